//! Long-run behaviour of repeated measurements and channel iteration.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instrument::KrausInstrument;
use crate::matcore::{null_space, superop_matrix, trace_distance, trace_norm, CMatrix, SuperopMatrix, C64, NORM_TOL};
use crate::measure::DensityMatrix;
use crate::posterior::{inverse_cdf, sample_chain, Trajectory};
use crate::rng::substream;

/// Eigenvalues with modulus at least `1 - PERIPHERAL_TOL` are peripheral.
pub const PERIPHERAL_TOL: f64 = 1e-9;
/// Distances at or below this are excluded from rate fits.
pub const FIT_FLOOR: f64 = 1e-12;
/// Trace-norm tolerance for a reported fixed point.
pub const FIXED_POINT_TOL: f64 = 1e-8;
/// Longest composition window tried by the positivity certificate.
pub const MAX_CERT_WINDOW: usize = 8;

/// A sampled chain with running averages at checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainRun {
    pub trajectory: Trajectory,
    /// Step counts `1, 2, 4, ...` and the final step.
    pub checkpoints: Vec<usize>,
    /// Cesaro means `(1/n) sum_{i <= n} f_i` at each checkpoint.
    pub cesaro: Vec<DensityMatrix>,
    /// `(m, tr(f_n^m) at each checkpoint)`.
    pub moments: Vec<(u32, Vec<f64>)>,
}

impl ChainRun {
    pub fn moment_sequence(&self, m: u32) -> Vec<f64> {
        match self.moments.iter().find(|(k, _)| *k == m) {
            Some((_, v)) => v.clone(),
            None => self.checkpoints.iter().map(|&n| self.trajectory.states[n - 1].moment(m)).collect(),
        }
    }
}

/// Powers of two below `n`, then `n`.
pub fn checkpoints(n: usize) -> Vec<usize> {
    let mut out: Vec<usize> = std::iter::successors(Some(1usize), |&k| k.checked_mul(2)).take_while(|&k| k < n).collect();
    out.push(n);
    out
}

fn require_square(inst: &KrausInstrument) -> Result<()> {
    if !inst.is_square() {
        return Err(Error::InvalidArgument("instrument must map a space to itself".into()));
    }
    Ok(())
}

/// Repeats `inst` `n` times from `rho0`, sampling each outcome.
pub fn run_chain(inst: &KrausInstrument, rho0: &DensityMatrix, n: usize, seed: u64, moments: &[u32]) -> Result<ChainRun> {
    require_square(inst)?;
    if n == 0 {
        return Err(Error::InvalidArgument("chain length must be at least 1".into()));
    }
    let trajectory = sample_chain(|_| inst, n, rho0, seed)?;
    let cps = checkpoints(n);
    let d = inst.dim_in();
    let mut cesaro = Vec::with_capacity(cps.len());
    let mut sum = CMatrix::zeros(d, d);
    let mut next = 0;
    for (i, s) in trajectory.states.iter().enumerate() {
        sum = sum + s.matrix().clone();
        if i + 1 == cps[next] {
            cesaro.push(DensityMatrix::from_trusted(sum.scale_real(1.0 / (i + 1) as f64).hermitize()));
            next += 1;
        }
    }
    let moments =
        moments.iter().map(|&m| (m, cps.iter().map(|&k| trajectory.states[k - 1].moment(m)).collect())).collect();
    Ok(ChainRun { trajectory, checkpoints: cps, cesaro, moments })
}

/// `||Phi(mean_n) - mean_n||_1` at each checkpoint, `Phi` the unconditional
/// channel.
pub fn cesaro_fixed_point_residual(run: &ChainRun, inst: &KrausInstrument) -> Result<Vec<f64>> {
    run.cesaro.iter().map(|m| Ok(trace_norm(&(inst.apply_channel(m.matrix())? - m.matrix().clone())))).collect()
}

/// Largest pairwise gap between `tr(f_n^m)` over the last `window`
/// checkpoints.
pub fn purity_moment_tail(run: &ChainRun, m: u32, window: usize) -> Result<f64> {
    if window == 0 || window > run.checkpoints.len() {
        return Err(Error::InvalidArgument(format!("window {window} outside 1..={}", run.checkpoints.len())));
    }
    let seq = run.moment_sequence(m);
    let tail = &seq[seq.len() - window..];
    let hi = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = tail.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(hi - lo)
}

/// Outcome of testing `p a_i^H a_i p = lambda_i p`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IsometryCondition {
    pub holds: bool,
    pub lambdas: Vec<f64>,
    /// First operator whose residual exceeds the tolerance.
    pub violating: Option<usize>,
    pub residual: f64,
}

/// Tests whether each `a_i` restricted to the range of `p` is proportional
/// to an isometry, with `lambda_i = tr(p a_i^H a_i p) / rank(p)`.
pub fn isometry_condition(kraus: &[CMatrix], p: &CMatrix) -> Result<IsometryCondition> {
    if !p.is_square() {
        return Err(Error::NotAProjection("not square".into()));
    }
    let res = (p * p).max_abs_diff(p).max(p.hermiticity_residual());
    if res > 1e-10 {
        return Err(Error::NotAProjection(format!("residual {res:.3e}")));
    }
    let rank = p.trace().re.round();
    if rank < 2.0 {
        return Err(Error::NotAProjection(format!("rank {rank} below 2")));
    }
    let mut lambdas = Vec::with_capacity(kraus.len());
    let mut worst = (0.0f64, None);
    for (i, a) in kraus.iter().enumerate() {
        if a.ncols() != p.dim() {
            return Err(Error::DimensionMismatch { expected: p.dim(), found: a.ncols() });
        }
        let q = (a.adjoint() * a.clone()).conjugate_by(p);
        let lambda = q.trace().re / rank;
        let r = q.max_abs_diff(&p.scale_real(lambda));
        if r > worst.0 {
            worst = (r, Some(i));
        }
        lambdas.push(lambda);
    }
    let holds = worst.0 <= 1e-8;
    Ok(IsometryCondition { holds, lambdas, violating: if holds { None } else { worst.1 }, residual: worst.0 })
}

/// Spectrum of a channel's superoperator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumReport {
    /// Sorted by descending modulus, then descending real and imaginary part.
    pub eigenvalues: Vec<C64>,
    pub gap: f64,
    pub peripheral_count: usize,
    pub fixed_point: Option<DensityMatrix>,
    pub fixed_point_residual: Option<f64>,
}

impl SpectrumReport {
    /// `-ln |lambda_2|`, the asymptotic contraction rate.
    pub fn spectral_rate(&self) -> f64 {
        -self.eigenvalues.get(1).map_or(0.0, |z| z.norm()).ln()
    }

    pub fn has_gap(&self) -> bool {
        self.peripheral_count == 1 && self.fixed_point.is_some()
    }
}

fn sort_spectrum(values: &mut [C64]) {
    values.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(b.re.total_cmp(&a.re)).then(b.im.total_cmp(&a.im)));
}

/// Eigenvalues, spectral gap and, when the eigenvalue 1 is the only
/// peripheral one and simple, the fixed point.
pub fn channel_spectrum(kraus: &[CMatrix]) -> Result<SpectrumReport> {
    let m = superop_matrix(kraus)?;
    if m.dim_in() != m.dim_out() {
        return Err(Error::InvalidArgument("channel must map a space to itself".into()));
    }
    let mut eigenvalues = m.eigenvalues();
    sort_spectrum(&mut eigenvalues);
    let peripheral_count = eigenvalues.iter().filter(|z| z.norm() >= 1.0 - PERIPHERAL_TOL).count();
    let gap = 1.0 - eigenvalues.get(1).map_or(0.0, |z| z.norm());
    let (fixed_point, fixed_point_residual) = if peripheral_count == 1 {
        match fixed_point(&m, kraus)? {
            Some((rho, r)) => (Some(rho), Some(r)),
            None => (None, None),
        }
    } else {
        (None, None)
    };
    Ok(SpectrumReport { eigenvalues, gap, peripheral_count, fixed_point, fixed_point_residual })
}

/// The state spanning `ker(M - I)` when that kernel is one-dimensional.
fn fixed_point(m: &SuperopMatrix, kraus: &[CMatrix]) -> Result<Option<(DensityMatrix, f64)>> {
    let d = m.dim_in();
    let shifted = m.as_dmatrix() - DMatrix::<C64>::identity(d * d, d * d);
    let null = null_space(&shifted, 1e-10);
    if null.len() != 1 {
        return Ok(None);
    }
    let x = CMatrix::unvec(&null[0], d, d)?;
    let t = x.trace();
    if t.norm() < 1e-12 {
        return Ok(None);
    }
    let rho = x.scale(t.inv()).hermitize();
    let Some(rho) = DensityMatrix::from_psd_unnormalized(&rho) else {
        return Ok(None);
    };
    let image = kraus.iter().fold(CMatrix::zeros(d, d), |acc, k| acc + rho.matrix().conjugate_by(k));
    let residual = trace_distance(&image, rho.matrix());
    Ok((residual <= FIXED_POINT_TOL).then_some((rho, residual)))
}

/// Least-squares line through `(n, ln d_n)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    /// Fitted decay rate: `d_n ~ C exp(-alpha n)`.
    pub alpha: f64,
    pub c: f64,
    /// Points used in the fit.
    pub points: Vec<(usize, f64)>,
    /// `ln d_n - (ln C - alpha n)` per used point.
    pub residuals: Vec<f64>,
}

/// Fits `ln d = ln C - alpha n` over the points with `d > FIT_FLOOR`;
/// `None` with fewer than two such points.
pub fn fit_rate(points: &[(usize, f64)]) -> Option<RateFit> {
    let used: Vec<(usize, f64)> = points.iter().copied().filter(|&(_, d)| d > FIT_FLOOR).collect();
    if used.len() < 2 {
        return None;
    }
    let k = used.len() as f64;
    let mx = used.iter().map(|p| p.0 as f64).sum::<f64>() / k;
    let my = used.iter().map(|p| p.1.ln()).sum::<f64>() / k;
    let sxx: f64 = used.iter().map(|p| (p.0 as f64 - mx).powi(2)).sum();
    let sxy: f64 = used.iter().map(|p| (p.0 as f64 - mx) * (p.1.ln() - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals = used.iter().map(|p| p.1.ln() - (intercept + slope * p.0 as f64)).collect();
    Some(RateFit { alpha: -slope, c: intercept.exp(), points: used, residuals })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceFit {
    pub fit: RateFit,
    /// `(n, ||Phi^n(rho0) - rho_*||_1)` over the requested range.
    pub distances: Vec<(usize, f64)>,
    pub spectral_rate: f64,
    pub fixed_point: DensityMatrix,
}

/// Iterates the channel deterministically and fits the exponential rate of
/// approach to its fixed point over `n_min..=n_max`.
pub fn convergence_fit(kraus: &[CMatrix], rho0: &DensityMatrix, n_min: usize, n_max: usize) -> Result<ConvergenceFit> {
    if n_min > n_max {
        return Err(Error::InvalidArgument(format!("empty range {n_min}..={n_max}")));
    }
    let spec = channel_spectrum(kraus)?;
    if !spec.has_gap() {
        return Err(Error::NoSpectralGap);
    }
    let star = spec.fixed_point.clone().expect("gap implies fixed point");
    if rho0.dim() != star.dim() {
        return Err(Error::DimensionMismatch { expected: star.dim(), found: rho0.dim() });
    }
    let mut rho = rho0.matrix().clone();
    let mut distances = Vec::with_capacity(n_max - n_min + 1);
    for n in 0..=n_max {
        if n >= n_min {
            distances.push((n, trace_distance(&rho, star.matrix())));
        }
        rho = kraus.iter().fold(CMatrix::zeros(rho.nrows(), rho.nrows()), |acc, k| acc + rho.conjugate_by(k));
    }
    let fit = fit_rate(&distances).ok_or(Error::AlreadyConverged)?;
    Ok(ConvergenceFit { fit, distances, spectral_rate: spec.spectral_rate(), fixed_point: star })
}

/// How the channel applied at each step is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Driving {
    Iid { weights: Vec<f64> },
    /// Irreducible chain on channel indices starting at `initial`.
    Markov { transition: Vec<Vec<f64>>, initial: usize },
}

fn is_prob_vector(v: &[f64]) -> bool {
    v.iter().all(|&p| p >= 0.0 && p.is_finite()) && (v.iter().sum::<f64>() - 1.0).abs() <= NORM_TOL
}

impl Driving {
    pub fn validate(&self, n_channels: usize) -> Result<()> {
        let bad = |m: &str| Err(Error::DegenerateDriving(m.into()));
        match self {
            Driving::Iid { weights } => {
                if weights.len() != n_channels || !is_prob_vector(weights) {
                    return bad("i.i.d. weights must be a probability vector over the channels");
                }
            }
            Driving::Markov { transition, initial } => {
                if transition.len() != n_channels || transition.iter().any(|r| r.len() != n_channels || !is_prob_vector(r)) {
                    return bad("transition matrix must be row-stochastic over the channels");
                }
                if *initial >= n_channels {
                    return bad("initial state out of range");
                }
                for start in 0..n_channels {
                    let mut seen = vec![false; n_channels];
                    let mut stack = vec![start];
                    seen[start] = true;
                    while let Some(i) = stack.pop() {
                        for (j, &p) in transition[i].iter().enumerate() {
                            if p > 0.0 && !seen[j] {
                                seen[j] = true;
                                stack.push(j);
                            }
                        }
                    }
                    if seen.contains(&false) {
                        return bad("transition matrix is not irreducible");
                    }
                }
            }
        }
        Ok(())
    }

    /// Channel indices for `n` steps.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<usize> {
        match self {
            Driving::Iid { weights } => (0..n).map(|_| inverse_cdf(weights, rng.random())).collect(),
            Driving::Markov { transition, initial } => {
                let mut cur = *initial;
                (0..n)
                    .map(|k| {
                        if k > 0 {
                            cur = inverse_cdf(&transition[cur], rng.random());
                        }
                        cur
                    })
                    .collect()
            }
        }
    }
}

/// PSD matrices spanning the Hermitian matrices: `|i><i|` and the
/// projectors onto `e_i + e_j` and `e_i + i e_j`.
fn psd_basis(d: usize) -> Vec<CMatrix> {
    let mut out = Vec::with_capacity(d * d);
    for i in 0..d {
        out.push(CMatrix::unit(d, i, i));
        for j in i + 1..d {
            for phase in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)] {
                let mut v = vec![C64::new(0.0, 0.0); d];
                v[i] = C64::new(1.0, 0.0);
                v[j] = phase;
                out.push(CMatrix::projector(&v).scale_real(0.5));
            }
        }
    }
    out
}

/// Shortest window length `N <= MAX_CERT_WINDOW` for which a sampled
/// composition of `N` channels maps every PSD basis element to a matrix
/// with minimum eigenvalue above `1e-10`.
pub fn positivity_certificate(superops: &[SuperopMatrix], driving: &Driving, seed: u64) -> Result<usize> {
    let d = superops[0].dim_in();
    let basis = psd_basis(d);
    let mut rng = substream(seed, 1);
    for window in 1..=MAX_CERT_WINDOW {
        let picks = driving.sample(&mut rng, window);
        let mut comp = SuperopMatrix::identity(d);
        for &k in &picks {
            comp = superops[k].after(&comp)?;
        }
        let positive = basis.iter().all(|b| {
            comp.apply(b).map(|img| crate::matcore::min_eigenvalue(&img.hermitize()) > 1e-10).unwrap_or(false)
        });
        if positive {
            return Ok(window);
        }
    }
    Err(Error::PositivityCertificateFailed(MAX_CERT_WINDOW))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionRun {
    /// Channel index applied at each step.
    pub choices: Vec<usize>,
    /// `||F_n(rho) - F_n(sigma)||_1` for `n = 0..=steps`.
    pub distances: Vec<f64>,
    /// Fitted over `n >= 1`; absent when fewer than two distances exceed
    /// the fit floor.
    pub fit: Option<RateFit>,
    pub certificate_window: usize,
}

/// Applies one randomly driven channel sequence to `rho` and `sigma` and
/// tracks their trace distance.
pub fn random_sequence_contraction(
    channels: &[KrausInstrument],
    driving: &Driving,
    rho: &DensityMatrix,
    sigma: &DensityMatrix,
    n: usize,
    seed: u64,
) -> Result<ContractionRun> {
    if channels.is_empty() {
        return Err(Error::InvalidArgument("no channels".into()));
    }
    let d = channels[0].dim_in();
    for ch in channels {
        require_square(ch)?;
        if ch.dim_in() != d {
            return Err(Error::DimensionMismatch { expected: d, found: ch.dim_in() });
        }
    }
    for s in [rho, sigma] {
        if s.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: s.dim() });
        }
    }
    driving.validate(channels.len())?;
    let superops: Vec<SuperopMatrix> = channels.iter().map(|c| c.superop()).collect();
    let certificate_window = positivity_certificate(&superops, driving, seed)?;
    let choices = driving.sample(&mut substream(seed, 0), n);
    let (mut a, mut b) = (rho.matrix().clone(), sigma.matrix().clone());
    let mut distances = Vec::with_capacity(n + 1);
    distances.push(trace_distance(&a, &b));
    for &k in &choices {
        a = superops[k].apply(&a)?;
        b = superops[k].apply(&b)?;
        distances.push(trace_distance(&a, &b));
    }
    let pts: Vec<(usize, f64)> = distances.iter().copied().enumerate().skip(1).collect();
    Ok(ContractionRun { choices, fit: fit_rate(&pts), distances, certificate_window })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Witness {
    pub witnessed: bool,
    pub min_step_distance: f64,
}

/// Follows `rho_{k+1} = u rho_k u^H` for `n` steps and reports whether
/// every step moves the state by at least `threshold` in trace norm.
pub fn nonconvergence_witness(u: &CMatrix, rho0: &DensityMatrix, n: usize, threshold: f64) -> Result<Witness> {
    if !u.is_square() || u.dim() != rho0.dim() {
        return Err(Error::DimensionMismatch { expected: rho0.dim(), found: u.nrows() });
    }
    let res = (u.adjoint() * u.clone()).max_abs_diff(&CMatrix::identity(u.dim()));
    if res > NORM_TOL {
        return Err(Error::InvalidArgument(format!("u is not unitary (residual {res:.3e})")));
    }
    if u.commutator(rho0.matrix()).max_abs() <= 1e-10 {
        return Err(Error::CommutingInput);
    }
    let mut rho = rho0.matrix().clone();
    let mut min = f64::INFINITY;
    for _ in 0..n {
        let next = rho.conjugate_by(u);
        min = min.min(trace_distance(&next, &rho));
        rho = next;
    }
    Ok(Witness { witnessed: min >= threshold, min_step_distance: min })
}

/// Kraus operators of amplitude damping with decay probability `gamma`.
pub fn amplitude_damping(gamma: f64) -> Vec<CMatrix> {
    vec![
        CMatrix::diag_real(&[1.0, (1.0 - gamma).sqrt()]),
        CMatrix::from_real_rows(&[&[0.0, gamma.sqrt()], &[0.0, 0.0]]).expect("2x2"),
    ]
}

/// Generalized amplitude damping: relaxation with probability `gamma`
/// towards the diagonal state `diag(p, 1 - p)`.
pub fn generalized_amplitude_damping(gamma: f64, p: f64) -> Vec<CMatrix> {
    let (a, b) = (p.sqrt(), (1.0 - p).sqrt());
    let s = (1.0 - gamma).sqrt();
    vec![
        CMatrix::diag_real(&[a, a * s]),
        CMatrix::from_real_rows(&[&[0.0, a * gamma.sqrt()], &[0.0, 0.0]]).expect("2x2"),
        CMatrix::diag_real(&[b * s, b]),
        CMatrix::from_real_rows(&[&[0.0, 0.0], &[b * gamma.sqrt(), 0.0]]).expect("2x2"),
    ]
}

/// Qubit depolarizing channel `rho -> (1 - s) rho + s I/2`.
pub fn depolarizing(s: f64) -> Vec<CMatrix> {
    let x = CMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).expect("2x2");
    let y = CMatrix::from_rows(&[vec![C64::new(0.0, 0.0), C64::new(0.0, -1.0)], vec![C64::new(0.0, 1.0), C64::new(0.0, 0.0)]])
        .expect("2x2");
    let z = CMatrix::diag_real(&[1.0, -1.0]);
    let w = (s / 4.0).sqrt();
    vec![CMatrix::identity(2).scale_real((1.0 - 3.0 * s / 4.0).sqrt()), x.scale_real(w), y.scale_real(w), z.scale_real(w)]
}
