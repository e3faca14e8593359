//! Parametric models over a real grid and posterior inference on the
//! parameter: estimators, credible intervals, HQPD sets and tests.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::NORM_TOL;
use crate::measure::{clip_and_normalize, induced_measure, DensityMatrix, Povm};

/// Slack for comparing accumulated masses against a coverage target.
pub const MASS_SLACK: f64 = 1e-12;

/// A quantum statistical model on a finite parameter grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamModel {
    grid: Vec<f64>,
    param_observable: Povm,
    prior_state: DensityMatrix,
    states_by_theta: Option<Vec<DensityMatrix>>,
    prior_weights: Option<Vec<f64>>,
}

impl ParamModel {
    pub fn new(
        grid: Vec<f64>,
        param_observable: Povm,
        prior_state: DensityMatrix,
        states_by_theta: Option<Vec<DensityMatrix>>,
        prior_weights: Option<Vec<f64>>,
    ) -> Result<Self> {
        let bad = |m: String| Err(Error::InvalidModel(m));
        if grid.is_empty() || grid.iter().any(|t| !t.is_finite()) {
            return bad("grid must be nonempty and finite".into());
        }
        if grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad("grid must be strictly increasing".into());
        }
        if param_observable.len() != grid.len() {
            return bad(format!("observable has {} outcomes for {} grid points", param_observable.len(), grid.len()));
        }
        if let Some(e) = param_observable.space().embedding() {
            if e != grid.as_slice() {
                return bad("observable embedding differs from the grid".into());
            }
        }
        if prior_state.dim() != param_observable.dim() {
            return Err(Error::DimensionMismatch { expected: param_observable.dim(), found: prior_state.dim() });
        }
        if let Some(states) = &states_by_theta {
            if states.len() != grid.len() {
                return bad(format!("{} parameter states for {} grid points", states.len(), grid.len()));
            }
            if let Some(s) = states.iter().find(|s| s.dim() != states[0].dim()) {
                return Err(Error::DimensionMismatch { expected: states[0].dim(), found: s.dim() });
            }
        }
        if let Some(w) = &prior_weights {
            if w.len() != grid.len() || w.iter().any(|&x| !(x >= 0.0)) || (w.iter().sum::<f64>() - 1.0).abs() > NORM_TOL {
                return Err(Error::InvalidProbabilityVector("prior weights".into()));
            }
        }
        Ok(ParamModel { grid, param_observable, prior_state, states_by_theta, prior_weights })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn param_observable(&self) -> &Povm {
        &self.param_observable
    }

    pub fn prior_state(&self) -> &DensityMatrix {
        &self.prior_state
    }

    pub fn states_by_theta(&self) -> Result<&[DensityMatrix]> {
        self.states_by_theta.as_deref().ok_or(Error::MissingThetaStates)
    }

    pub fn prior_weights(&self) -> Result<&[f64]> {
        self.prior_weights.as_deref().ok_or(Error::MissingPriorWeights)
    }

    /// Grid index of `theta`.
    pub fn theta_index(&self, theta: f64) -> Result<usize> {
        grid_index(&self.grid, theta).ok_or(Error::UnknownTheta(theta))
    }
}

pub(crate) fn grid_index(grid: &[f64], theta: f64) -> Option<usize> {
    grid.iter().position(|&g| (g - theta).abs() <= 1e-12 * g.abs().max(1.0))
}

/// Probability mass function of the parameter with its CDF.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PosteriorDist {
    grid: Vec<f64>,
    mass: Vec<f64>,
    cdf: Vec<f64>,
}

impl PosteriorDist {
    /// Applies the shared clipping policy to `mass`.
    pub fn new(grid: Vec<f64>, mass: Vec<f64>) -> Result<Self> {
        if grid.len() != mass.len() || grid.is_empty() {
            return Err(Error::InvalidProbabilityVector(format!("{} masses for {} grid points", mass.len(), grid.len())));
        }
        if grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidModel("grid must be strictly increasing".into()));
        }
        let mass = clip_and_normalize(&mass, |i| grid[i].to_string())?;
        let cdf = mass
            .iter()
            .scan(0.0, |acc, &m| {
                *acc += m;
                Some(*acc)
            })
            .collect();
        Ok(PosteriorDist { grid, mass, cdf })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }
}

/// Distribution of the parameter observable in `state`.
pub fn posterior_parameter_distribution(model: &ParamModel, state: &DensityMatrix) -> Result<PosteriorDist> {
    let dist = induced_measure(&model.param_observable, state)?;
    PosteriorDist::new(model.grid.clone(), dist.probs().to_vec())
}

/// Point estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimatorSpec {
    /// Minimizer of `c(theta) (theta - y)^2`; `None` means `c = 1`.
    WeightedMean {
        #[serde(default)]
        weights: Option<Vec<f64>>,
    },
    /// Smallest grid value whose CDF reaches `p`.
    Quantile { p: f64 },
    Mode,
}

impl EstimatorSpec {
    /// Quantile minimizing the linear loss with under- and over-estimation
    /// costs `k0` and `k1`.
    pub fn linear(k0: f64, k1: f64) -> Result<Self> {
        if !(k0 > 0.0 && k1 > 0.0) {
            return Err(Error::InvalidEstimator(format!("linear costs must be positive, got ({k0}, {k1})")));
        }
        Ok(EstimatorSpec::Quantile { p: k1 / (k0 + k1) })
    }

    pub fn name(&self) -> &'static str {
        match self {
            EstimatorSpec::WeightedMean { .. } => "weighted_mean",
            EstimatorSpec::Quantile { .. } => "quantile",
            EstimatorSpec::Mode => "mode",
        }
    }
}

pub fn point_estimate(dist: &PosteriorDist, spec: &EstimatorSpec) -> Result<f64> {
    match spec {
        EstimatorSpec::WeightedMean { weights } => {
            let c: Vec<f64> = match weights {
                Some(w) => {
                    if w.len() != dist.grid.len() || w.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
                        return Err(Error::InvalidEstimator("weights must be finite, nonnegative and one per grid point".into()));
                    }
                    w.clone()
                }
                None => vec![1.0; dist.grid.len()],
            };
            let den: f64 = c.iter().zip(&dist.mass).map(|(c, m)| c * m).sum();
            if den <= 0.0 {
                return Err(Error::DegenerateWeight);
            }
            let num: f64 = dist.grid.iter().zip(&c).zip(&dist.mass).map(|((t, c), m)| t * c * m).sum();
            Ok(num / den)
        }
        EstimatorSpec::Quantile { p } => {
            if !(*p > 0.0 && *p < 1.0) {
                return Err(Error::InvalidEstimator(format!("quantile level {p} outside (0, 1)")));
            }
            let i = dist.cdf.iter().position(|&f| f >= p - MASS_SLACK).unwrap_or(dist.grid.len() - 1);
            Ok(dist.grid[i])
        }
        EstimatorSpec::Mode => {
            let mut best = 0;
            for (i, &m) in dist.mass.iter().enumerate() {
                if m > dist.mass[best] {
                    best = i;
                }
            }
            Ok(dist.grid[best])
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} outside (0, 1)")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CredibleInterval {
    pub lo: f64,
    pub hi: f64,
    pub mass: f64,
}

/// Shortest contiguous grid window covering at least `1 - alpha`; ties go
/// to the window with the smallest lower end.
pub fn credible_interval(dist: &PosteriorDist, alpha: f64) -> Result<CredibleInterval> {
    check_alpha(alpha)?;
    let target = 1.0 - alpha - MASS_SLACK;
    let n = dist.grid.len();
    let mut best: Option<CredibleInterval> = None;
    for lo in 0..n {
        let mut mass = 0.0;
        for hi in lo..n {
            mass += dist.mass[hi];
            if mass >= target {
                let cand = CredibleInterval { lo: dist.grid[lo], hi: dist.grid[hi], mass };
                if best.is_none_or(|b| cand.hi - cand.lo < b.hi - b.lo) {
                    best = Some(cand);
                }
                break;
            }
        }
    }
    Ok(best.unwrap_or(CredibleInterval { lo: dist.grid[0], hi: dist.grid[n - 1], mass: 1.0 }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HqpdSet {
    /// Included grid values in ascending order.
    pub values: Vec<f64>,
    pub mass: f64,
    /// Smallest included mass.
    pub threshold: f64,
}

/// Highest-density set: grid points by descending mass (ties by ascending
/// value) until the covered mass reaches `1 - alpha`.
pub fn hqpd_set(dist: &PosteriorDist, alpha: f64) -> Result<HqpdSet> {
    check_alpha(alpha)?;
    let mut order: Vec<usize> = (0..dist.grid.len()).collect();
    order.sort_by(|&a, &b| dist.mass[b].total_cmp(&dist.mass[a]).then(a.cmp(&b)));
    let mut mass = 0.0;
    let mut taken = Vec::new();
    for i in order {
        taken.push(i);
        mass += dist.mass[i];
        if mass >= 1.0 - alpha - MASS_SLACK {
            break;
        }
    }
    let threshold = taken.iter().map(|&i| dist.mass[i]).fold(f64::INFINITY, f64::min);
    taken.sort_unstable();
    Ok(HqpdSet { values: taken.iter().map(|&i| dist.grid[i]).collect(), mass, threshold })
}

/// Which loss the testing rule minimizes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestRule {
    /// `argmin_i k_i P(theta in cell_i)`, for the loss `k_y 1{theta in cell_y}`.
    #[default]
    AsPrinted,
    /// `argmin_i k_i (1 - P(theta in cell_i))`, for the loss `k_y 1{theta not in cell_y}`.
    Conventional,
}

/// Posterior mass of each partition cell, after validating the partition.
pub fn cell_masses(dist: &PosteriorDist, partition: &[Vec<f64>]) -> Result<Vec<f64>> {
    let cells = partition_indices(&dist.grid, partition)?;
    Ok(cells.iter().map(|c| c.iter().map(|&i| dist.mass[i]).sum()).collect())
}

/// Grid indices of each cell; cells must be nonempty, disjoint and cover
/// the grid.
pub(crate) fn partition_indices(grid: &[f64], partition: &[Vec<f64>]) -> Result<Vec<Vec<usize>>> {
    let bad = |m: String| Err(Error::MalformedPartition(m));
    if partition.is_empty() {
        return bad("no cells".into());
    }
    let mut owner = vec![None; grid.len()];
    let mut out = Vec::with_capacity(partition.len());
    for (c, cell) in partition.iter().enumerate() {
        if cell.is_empty() {
            return bad(format!("cell {c} is empty"));
        }
        let mut idx = Vec::with_capacity(cell.len());
        for &t in cell {
            let Some(i) = grid_index(grid, t) else {
                return bad(format!("cell {c} contains {t}, which is not on the grid"));
            };
            if owner[i].is_some() {
                return bad(format!("grid value {t} appears in more than one cell"));
            }
            owner[i] = Some(c);
            idx.push(i);
        }
        out.push(idx);
    }
    if let Some(i) = owner.iter().position(Option::is_none) {
        return bad(format!("grid value {} is not covered", grid[i]));
    }
    Ok(out)
}

/// Index of the cell chosen by the posterior testing rule; ties go to the
/// smallest index.
pub fn hypothesis_test(dist: &PosteriorDist, partition: &[Vec<f64>], costs: &[f64], rule: TestRule) -> Result<usize> {
    if costs.len() != partition.len() {
        return Err(Error::MalformedPartition(format!("{} costs for {} cells", costs.len(), partition.len())));
    }
    if costs.iter().any(|&k| !(k >= 0.0) || !k.is_finite()) {
        return Err(Error::MalformedPartition("costs must be finite and nonnegative".into()));
    }
    let masses = cell_masses(dist, partition)?;
    let score = |i: usize| match rule {
        TestRule::AsPrinted => costs[i] * masses[i],
        TestRule::Conventional => costs[i] * (1.0 - masses[i]),
    };
    let mut best = 0;
    for i in 1..masses.len() {
        if score(i) < score(best) {
            best = i;
        }
    }
    Ok(best)
}
