//! Completely positive instruments in Kraus form.
//!
//! An instrument maps each outcome `x` to the operation
//! `rho -> sum_k K_k(x) rho K_k(x)^H`; summed over all outcomes it is a
//! channel. The dual acts on observables: `b -> sum_k K_k(x)^H b K_k(x)`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matcore::{
    cr, eig_hermitian_unchecked, superop_matrix, CMatrix, SuperopMatrix, Tolerances, C64, MAX_DIM,
};
use crate::measure::{marginal_observable, Check, DensityMatrix, OutcomeSpace, Povm};

/// Relative singular-value threshold below which a Kraus direction is
/// treated as linearly dependent.
pub const KRAUS_RANK_TOL: f64 = 1e-8;
/// Largest composite outcome space `compose` will build.
pub const MAX_OUTCOMES: usize = 1_000_000;
/// Residual accepted by the commutation and dilation certificates.
pub const CERT_TOL: f64 = 1e-8;

/// Number of Kraus operators of a list that are linearly independent.
fn kraus_rank(ops: &[CMatrix]) -> (usize, Vec<(f64, Vec<C64>)>) {
    if ops.is_empty() {
        return (0, Vec::new());
    }
    let n = ops[0].nrows() * ops[0].ncols();
    let stacked = DMatrix::from_fn(n, ops.len(), |i, j| ops[j].as_dmatrix().as_slice()[i]);
    let svd = stacked.svd(true, false);
    let u = svd.u.expect("requested U");
    let mut dirs: Vec<(f64, Vec<C64>)> = (0..svd.singular_values.len())
        .map(|k| (svd.singular_values[k], u.column(k).iter().copied().collect()))
        .collect();
    dirs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let s_max = dirs.first().map(|d| d.0).unwrap_or(0.0);
    let thresh = (KRAUS_RANK_TOL * s_max).max(1e-15);
    let rank = dirs.iter().filter(|d| d.0 > thresh).count();
    (rank, dirs)
}

/// Replaces a linearly dependent Kraus list by an orthogonal basis with the
/// same action; independent lists are returned unchanged.
///
/// The action only depends on `sum_j vec(K_j) vec(K_j)^H`, so the left
/// singular vectors of the stacked `[vec(K_1) ... vec(K_r)]` scaled by their
/// singular values reproduce it exactly up to the dropped directions.
pub fn reduce_kraus(ops: Vec<CMatrix>) -> Vec<CMatrix> {
    let (rank, dirs) = kraus_rank(&ops);
    if rank == ops.len() {
        return ops;
    }
    let (rows, cols) = (ops[0].nrows(), ops[0].ncols());
    dirs.into_iter()
        .take(rank)
        .map(|(s, u)| {
            let v: Vec<C64> = u.iter().map(|z| z * s).collect();
            CMatrix::unvec(&v, rows, cols).expect("shape preserved")
        })
        .collect()
}

/// A CP instrument given by per-outcome Kraus lists.
///
/// An empty list stands for the zero operation; such outcomes arise when
/// composition annihilates a tuple of outcomes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KrausInstrument {
    dim_in: usize,
    dim_out: usize,
    space: OutcomeSpace,
    kraus: Vec<Vec<CMatrix>>,
}

impl KrausInstrument {
    pub fn new(space: OutcomeSpace, kraus: Vec<Vec<CMatrix>>) -> Result<Self> {
        Self::with_tolerances(space, kraus, &Tolerances::default())
    }

    pub fn with_tolerances(space: OutcomeSpace, kraus: Vec<Vec<CMatrix>>, tol: &Tolerances) -> Result<Self> {
        let checks = Self::checks(&space, &kraus, tol)?;
        if let Some(c) = checks.iter().find(|c| !c.pass) {
            return Err(Error::InvalidInstrument(format!(
                "{} residual {:.3e} exceeds {:.1e}",
                c.check, c.residual, c.tolerance
            )));
        }
        let (dim_out, dim_in) = shape_of(&kraus).expect("checked");
        Ok(KrausInstrument { dim_in, dim_out, space, kraus })
    }

    /// Like [`KrausInstrument::new`] but first reduces each dependent Kraus
    /// list to a basis.
    pub fn new_reduced(space: OutcomeSpace, kraus: Vec<Vec<CMatrix>>) -> Result<Self> {
        Self::new(space, kraus.into_iter().map(reduce_kraus).collect())
    }

    /// Completeness and Kraus-independence residuals.
    pub fn checks(space: &OutcomeSpace, kraus: &[Vec<CMatrix>], tol: &Tolerances) -> Result<Vec<Check>> {
        if kraus.len() != space.len() {
            return Err(Error::InvalidInstrument(format!(
                "{} Kraus lists for {} outcomes",
                kraus.len(),
                space.len()
            )));
        }
        let (d_out, d_in) =
            shape_of(kraus).ok_or_else(|| Error::InvalidInstrument("instrument has no Kraus operators".into()))?;
        if d_in > MAX_DIM || d_out > MAX_DIM {
            return Err(Error::DimensionTooLarge(d_in.max(d_out)));
        }
        let mut total = CMatrix::zeros(d_in, d_in);
        let mut dependent = 0usize;
        for ops in kraus {
            for k in ops {
                if k.nrows() != d_out || k.ncols() != d_in {
                    return Err(Error::DimensionMismatch { expected: d_out, found: k.nrows() });
                }
                total = total + k.adjoint() * k.clone();
            }
            dependent += ops.len() - kraus_rank(ops).0;
        }
        let completeness = total.max_abs_diff(&CMatrix::identity(d_in));
        Ok(vec![
            Check { check: "completeness".into(), residual: completeness, tolerance: tol.norm, pass: completeness <= tol.norm },
            Check {
                check: "kraus_independence".into(),
                residual: dependent as f64,
                tolerance: 0.0,
                pass: dependent == 0,
            },
        ])
    }

    fn from_trusted(space: OutcomeSpace, kraus: Vec<Vec<CMatrix>>, dim_in: usize, dim_out: usize) -> Self {
        KrausInstrument { dim_in, dim_out, space, kraus }
    }

    /// Single outcome `label` with Kraus list `[u]`.
    pub fn unitary(label: &str, u: CMatrix) -> Result<Self> {
        Self::new(OutcomeSpace::new([label])?, vec![vec![u]])
    }

    /// Single-outcome instrument (a channel).
    pub fn channel(label: &str, kraus: Vec<CMatrix>) -> Result<Self> {
        Self::new(OutcomeSpace::new([label])?, vec![kraus])
    }

    /// Lueders instrument of a POVM: `K(x) = nu({x})^{1/2}`.
    pub fn luders(povm: &Povm) -> Result<Self> {
        let kraus = povm
            .effects()
            .iter()
            .map(|e| reduce_kraus(vec![eig_hermitian_unchecked(e).map_values(|l| l.max(0.0).sqrt())]))
            .collect();
        Self::new(povm.space().clone(), kraus)
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn is_square(&self) -> bool {
        self.dim_in == self.dim_out
    }

    pub fn space(&self) -> &OutcomeSpace {
        &self.space
    }

    pub fn kraus(&self) -> &[Vec<CMatrix>] {
        &self.kraus
    }

    pub fn kraus_for(&self, label: &str) -> Result<&[CMatrix]> {
        Ok(&self.kraus[self.space.index_of(label)?])
    }

    pub fn total_kraus_count(&self) -> usize {
        self.kraus.iter().map(Vec::len).sum()
    }

    /// All Kraus operators, outcome-major.
    pub fn all_kraus(&self) -> Vec<CMatrix> {
        self.kraus.iter().flatten().cloned().collect()
    }

    fn check_input(&self, m: &CMatrix, expected: usize) -> Result<()> {
        if !m.is_square() || m.dim() != expected {
            return Err(Error::DimensionMismatch { expected, found: m.nrows() });
        }
        Ok(())
    }

    /// Unnormalized post-measurement state for outcome index `i`.
    pub fn apply_outcome(&self, i: usize, rho: &CMatrix) -> CMatrix {
        self.kraus[i].iter().fold(CMatrix::zeros(self.dim_out, self.dim_out), |acc, k| acc + rho.conjugate_by(k))
    }

    /// `J*({x_i}) b`.
    pub fn dual_outcome(&self, i: usize, b: &CMatrix) -> CMatrix {
        self.kraus[i]
            .iter()
            .fold(CMatrix::zeros(self.dim_in, self.dim_in), |acc, k| acc + b.adjoint_conjugate_by(k))
    }

    /// `J(A) rho` for an event given as labels.
    pub fn apply_on_event<S: AsRef<str>>(&self, event: &[S], rho: &DensityMatrix) -> Result<CMatrix> {
        let idx = self.space.event_indices(event)?;
        self.check_input(rho.matrix(), self.dim_in)?;
        Ok(self.apply_indices(&idx, rho.matrix()))
    }

    pub(crate) fn apply_indices(&self, idx: &[usize], rho: &CMatrix) -> CMatrix {
        idx.iter().fold(CMatrix::zeros(self.dim_out, self.dim_out), |acc, &i| acc + self.apply_outcome(i, rho))
    }

    /// The unconditional channel `J(X) rho`.
    pub fn apply_channel(&self, rho: &CMatrix) -> Result<CMatrix> {
        self.check_input(rho, self.dim_in)?;
        let all: Vec<usize> = (0..self.space.len()).collect();
        Ok(self.apply_indices(&all, rho))
    }

    /// `J*(A) b` for an event given as labels.
    pub fn dual_apply<S: AsRef<str>>(&self, event: &[S], b: &CMatrix) -> Result<CMatrix> {
        let idx = self.space.event_indices(event)?;
        self.check_input(b, self.dim_out)?;
        Ok(self.dual_indices(&idx, b))
    }

    pub(crate) fn dual_indices(&self, idx: &[usize], b: &CMatrix) -> CMatrix {
        idx.iter().fold(CMatrix::zeros(self.dim_in, self.dim_in), |acc, &i| acc + self.dual_outcome(i, b))
    }

    /// `J*(X) b`.
    pub fn dual_channel(&self, b: &CMatrix) -> Result<CMatrix> {
        self.check_input(b, self.dim_out)?;
        let all: Vec<usize> = (0..self.space.len()).collect();
        Ok(self.dual_indices(&all, b))
    }

    /// Observable `x -> J*({x}) 1 = sum_k K_k(x)^H K_k(x)`.
    pub fn induced_observable(&self) -> Povm {
        let id = CMatrix::identity(self.dim_out);
        let effects = (0..self.space.len()).map(|i| self.dual_outcome(i, &id).hermitize()).collect();
        Povm::from_trusted(self.space.clone(), effects)
    }

    /// Superoperator of the unconditional channel.
    pub fn superop(&self) -> SuperopMatrix {
        superop_matrix(&self.all_kraus()).expect("instrument has Kraus operators")
    }
}

fn shape_of(kraus: &[Vec<CMatrix>]) -> Option<(usize, usize)> {
    kraus.iter().flatten().next().map(|k| (k.nrows(), k.ncols()))
}

fn check_chain(insts: &[KrausInstrument]) -> Result<()> {
    if insts.is_empty() {
        return Err(Error::InvalidArgument("empty instrument list".into()));
    }
    for (step, w) in insts.windows(2).enumerate() {
        if w[0].dim_out != w[1].dim_in {
            return Err(Error::DimensionChainMismatch { step: step + 1, out_dim: w[0].dim_out, in_dim: w[1].dim_in });
        }
    }
    Ok(())
}

/// Sequential composition: outcome `(x_1, ..., x_n)` carries the products
/// `K(x_n) ... K(x_1)`, with dependent lists reduced to a basis.
pub fn compose(insts: &[KrausInstrument]) -> Result<KrausInstrument> {
    check_chain(insts)?;
    let count = insts.iter().try_fold(1usize, |acc, i| acc.checked_mul(i.space.len()).filter(|&n| n <= MAX_OUTCOMES));
    let Some(_) = count else {
        let approx = insts.iter().map(|i| i.space.len() as f64).product::<f64>();
        return Err(Error::OutcomeExplosion(approx.min(usize::MAX as f64) as usize));
    };
    if insts.len() == 1 {
        return Ok(insts[0].clone());
    }
    let mut kraus: Vec<Vec<CMatrix>> = insts[0].kraus.clone();
    for next in &insts[1..] {
        kraus = kraus
            .par_iter()
            .flat_map_iter(|prev| {
                next.kraus.iter().map(move |ops| {
                    let products = prev.iter().flat_map(|p| ops.iter().map(move |k| k * p)).collect();
                    reduce_kraus(products)
                })
            })
            .collect();
    }
    let spaces: Vec<&OutcomeSpace> = insts.iter().map(|i| &i.space).collect();
    let space = OutcomeSpace::product(&spaces)?;
    Ok(KrausInstrument::from_trusted(space, kraus, insts[0].dim_in, insts[insts.len() - 1].dim_out))
}

/// Observables measured by each step of a sequential scheme:
/// `nu'_i(A) = J_1*(X) ... J_i*(A) ... J_n*(X) 1`.
pub fn sequential_marginals(insts: &[KrausInstrument]) -> Result<Vec<Povm>> {
    check_chain(insts)?;
    let n = insts.len();
    // Heisenberg-evolved identity through the tail of the chain.
    let mut tails = vec![CMatrix::identity(insts[n - 1].dim_out); n];
    for i in (0..n - 1).rev() {
        tails[i] = insts[i + 1].dual_channel(&tails[i + 1])?;
    }
    let mut out = Vec::with_capacity(n);
    for (i, inst) in insts.iter().enumerate() {
        let mut effects = Vec::with_capacity(inst.space.len());
        for x in 0..inst.space.len() {
            let mut e = inst.dual_outcome(x, &tails[i]);
            for prev in insts[..i].iter().rev() {
                e = prev.dual_channel(&e)?;
            }
            effects.push(e.hermitize());
        }
        out.push(Povm::from_trusted(inst.space.clone(), effects));
    }
    Ok(out)
}

/// Joint observable `J*(.) 1` of the composite of instruments whose duals
/// commute with the composite dual of their predecessors.
///
/// The commutation hypothesis is verified on every matrix unit and every
/// outcome pair; each factor's own induced observable is then certified to
/// be the corresponding marginal.
pub fn joint_observable_commuting(insts: &[KrausInstrument]) -> Result<Povm> {
    check_chain(insts)?;
    let d = insts[0].dim_in;
    if insts.iter().any(|i| i.dim_in != d || i.dim_out != d) {
        return Err(Error::InvalidArgument("commuting instruments must act on one space".into()));
    }
    let units = CMatrix::units(d);
    for step in 1..insts.len() {
        let preds = compose(&insts[..step])?;
        let cur = &insts[step];
        for t in 0..preds.space.len() {
            for a in 0..cur.space.len() {
                for (u, e) in units.iter().enumerate() {
                    let lhs = cur.dual_outcome(a, &preds.dual_outcome(t, e));
                    let rhs = preds.dual_outcome(t, &cur.dual_outcome(a, e));
                    let residual = lhs.max_abs_diff(&rhs);
                    if residual > CERT_TOL {
                        return Err(Error::NotCommuting { step, row: u / d, col: u % d, residual });
                    }
                }
            }
        }
    }
    let joint = compose(insts)?.induced_observable();
    for (i, inst) in insts.iter().enumerate() {
        let residual = marginal_observable(&joint, i)?.max_abs_diff(&inst.induced_observable());
        if residual > CERT_TOL {
            return Err(Error::NotCommuting { step: i, row: 0, col: 0, residual });
        }
    }
    Ok(joint)
}

/// System-probe realization `(H', phi, U, nu)` of an instrument. The unitary
/// acts on `system (x) ancilla` with the ancilla as the fast index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndirectMeasurement {
    ancilla_dim: usize,
    ancilla_state: DensityMatrix,
    unitary: CMatrix,
    pointer: Povm,
}

impl IndirectMeasurement {
    pub fn new(ancilla_state: DensityMatrix, unitary: CMatrix, pointer: Povm) -> Result<Self> {
        let ancilla_dim = ancilla_state.dim();
        if pointer.dim() != ancilla_dim {
            return Err(Error::DimensionMismatch { expected: ancilla_dim, found: pointer.dim() });
        }
        if !unitary.is_square() || unitary.dim() % ancilla_dim != 0 {
            return Err(Error::InvalidIndirectMeasurement("unitary dimension is not a multiple of the ancilla".into()));
        }
        let u_res = (unitary.adjoint() * unitary.clone()).max_abs_diff(&CMatrix::identity(unitary.dim()));
        if u_res > crate::matcore::NORM_TOL {
            return Err(Error::InvalidIndirectMeasurement(format!("U^H U deviates from identity by {u_res:.3e}")));
        }
        let effects = pointer.effects();
        for (i, p) in effects.iter().enumerate() {
            if (p * p).max_abs_diff(p) > crate::matcore::NORM_TOL {
                return Err(Error::InvalidIndirectMeasurement(format!("pointer effect {i} is not a projection")));
            }
            for q in &effects[i + 1..] {
                if (p * q).max_abs() > crate::matcore::NORM_TOL {
                    return Err(Error::InvalidIndirectMeasurement("pointer projections are not orthogonal".into()));
                }
            }
        }
        Ok(IndirectMeasurement { ancilla_dim, ancilla_state, unitary, pointer })
    }

    pub fn ancilla_dim(&self) -> usize {
        self.ancilla_dim
    }

    pub fn ancilla_state(&self) -> &DensityMatrix {
        &self.ancilla_state
    }

    pub fn unitary(&self) -> &CMatrix {
        &self.unitary
    }

    pub fn pointer(&self) -> &Povm {
        &self.pointer
    }

    pub fn system_dim(&self) -> usize {
        self.unitary.dim() / self.ancilla_dim
    }

    /// `Phi_phi U^H [a (x) nu({x_i})] U`.
    pub fn reconstructed_dual(&self, i: usize, a: &CMatrix) -> Result<CMatrix> {
        let d = self.system_dim();
        if !a.is_square() || a.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: a.nrows() });
        }
        let m = self.ancilla_dim;
        let c = a.kron(&self.pointer.effects()[i]).adjoint_conjugate_by(&self.unitary);
        let phi = self.ancilla_state.matrix();
        CMatrix::from_fn(d, d, |r, s| {
            let mut acc = C64::new(0.0, 0.0);
            for p in 0..m {
                for q in 0..m {
                    acc += c.get(r * m + p, s * m + q) * phi.get(q, p);
                }
            }
            acc
        })
    }

    /// The CP instrument this system-probe model realizes.
    pub fn corresponding_instrument(&self) -> Result<KrausInstrument> {
        let d = self.system_dim();
        let m = self.ancilla_dim;
        let phi = eig_hermitian_unchecked(self.ancilla_state.matrix());
        let mut kraus = Vec::with_capacity(self.pointer.len());
        for p in self.pointer.effects() {
            let range = eig_hermitian_unchecked(p);
            let mut ops = Vec::new();
            for (ks, &ls) in range.values.iter().enumerate() {
                if ls < 0.5 {
                    continue;
                }
                let e = range.vector(ks);
                for (kj, &w) in phi.values.iter().enumerate() {
                    if w <= 1e-14 {
                        continue;
                    }
                    let f = phi.vector(kj);
                    ops.push(CMatrix::from_fn(d, d, |i, l| {
                        let mut acc = C64::new(0.0, 0.0);
                        for a in 0..m {
                            for b in 0..m {
                                acc += e[a].conj() * self.unitary.get(i * m + a, l * m + b) * f[b];
                            }
                        }
                        acc * w.sqrt()
                    })?);
                }
            }
            kraus.push(reduce_kraus(ops));
        }
        KrausInstrument::new(self.pointer.space().clone(), kraus)
    }
}

/// The isometry `V = sum_{x,k} K_k(x) (x) e_{(x,k)}` of the dilation.
pub fn dilation_isometry(inst: &KrausInstrument) -> CMatrix {
    let d = inst.dim_in;
    let m = inst.total_kraus_count();
    let mut v = CMatrix::zeros(d * m, d);
    for (s, k) in inst.kraus.iter().flatten().enumerate() {
        for i in 0..inst.dim_out {
            for j in 0..d {
                v.set(i * m + s, j, k.get(i, j));
            }
        }
    }
    v
}

/// Realizes an instrument as an indirect measurement with a pure ancilla
/// `e_0` of dimension equal to the total Kraus count.
///
/// `U` maps `psi (x) e_0` to `V psi`; the remaining columns are filled by
/// Gram-Schmidt over the canonical basis in index order.
pub fn dilate(inst: &KrausInstrument) -> Result<IndirectMeasurement> {
    if !inst.is_square() {
        return Err(Error::InvalidArgument("dilation needs dim_in = dim_out".into()));
    }
    let d = inst.dim_in;
    let m = inst.total_kraus_count();
    if m == 0 {
        return Err(Error::CompletionFailure("instrument has no Kraus operators".into()));
    }
    let n = d * m;
    let v = dilation_isometry(inst);
    let mut cols: Vec<Option<Vec<C64>>> = vec![None; n];
    for j in 0..d {
        cols[j * m] = Some(v.column(j));
    }
    let mut basis: Vec<Vec<C64>> = cols.iter().flatten().cloned().collect();
    let mut fill = Vec::with_capacity(n - d);
    for e in 0..n {
        if fill.len() == n - d {
            break;
        }
        let mut w = vec![C64::new(0.0, 0.0); n];
        w[e] = cr(1.0);
        // Two passes of modified Gram-Schmidt.
        for _ in 0..2 {
            for b in &basis {
                let proj: C64 = b.iter().zip(&w).map(|(x, y)| x.conj() * y).sum();
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi -= proj * bi;
                }
            }
        }
        let norm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-6 {
            let w: Vec<C64> = w.iter().map(|z| z / norm).collect();
            basis.push(w.clone());
            fill.push(w);
        }
    }
    if fill.len() != n - d {
        return Err(Error::CompletionFailure(format!("found {} of {} completion vectors", fill.len(), n - d)));
    }
    let mut fill = fill.into_iter();
    for col in cols.iter_mut() {
        if col.is_none() {
            *col = fill.next();
        }
    }
    let unitary = CMatrix::from_fn(n, n, |i, j| cols[j].as_ref().expect("filled")[i])?;
    let ancilla_state = DensityMatrix::basis(m, 0)?;
    let mut effects = Vec::with_capacity(inst.space.len());
    let mut slot = 0;
    for ops in &inst.kraus {
        let diag: Vec<f64> = (0..m).map(|s| if s >= slot && s < slot + ops.len() { 1.0 } else { 0.0 }).collect();
        effects.push(CMatrix::diag_real(&diag));
        slot += ops.len();
    }
    let pointer = Povm::new(inst.space.clone(), effects)?;
    IndirectMeasurement::new(ancilla_state, unitary, pointer)
}

/// Whether two indirect measurements realize the same CP instrument, judged
/// on the reconstructed duals of every outcome over a matrix-unit basis.
pub fn statistically_equivalent(a: &IndirectMeasurement, b: &IndirectMeasurement) -> Result<bool> {
    if a.system_dim() != b.system_dim() || a.pointer.space().labels() != b.pointer.space().labels() {
        return Err(Error::IncompatibleOutcomeSpaces);
    }
    for e in CMatrix::units(a.system_dim()) {
        for i in 0..a.pointer.len() {
            if a.reconstructed_dual(i, &e)?.max_abs_diff(&b.reconstructed_dual(i, &e)?) > CERT_TOL {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::c;
    use approx::assert_abs_diff_eq;

    fn luders_z() -> KrausInstrument {
        KrausInstrument::new(OutcomeSpace::indexed(2).unwrap(), vec![vec![CMatrix::unit(2, 0, 0)], vec![CMatrix::unit(2, 1, 1)]])
            .unwrap()
    }

    fn luders_x() -> KrausInstrument {
        let plus = CMatrix::from_real_rows(&[&[0.5, 0.5], &[0.5, 0.5]]).unwrap();
        let minus = CMatrix::from_real_rows(&[&[0.5, -0.5], &[-0.5, 0.5]]).unwrap();
        KrausInstrument::new(OutcomeSpace::indexed(2).unwrap(), vec![vec![plus], vec![minus]]).unwrap()
    }

    fn hadamard_like() -> CMatrix {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        CMatrix::from_rows(&[vec![cr(h), c(0.0, h)], vec![c(0.0, h), cr(h)]]).unwrap()
    }

    fn noisy_readout() -> KrausInstrument {
        KrausInstrument::new(
            OutcomeSpace::indexed(2).unwrap(),
            vec![vec![CMatrix::diag_real(&[0.8f64.sqrt(), 0.2f64.sqrt()])], vec![CMatrix::diag_real(&[0.2f64.sqrt(), 0.8f64.sqrt()])]],
        )
        .unwrap()
    }

    #[test]
    fn rejects_incomplete_and_dependent_lists() {
        let k = CMatrix::identity(2).scale_real(0.9f64.sqrt());
        let r = KrausInstrument::new(OutcomeSpace::new(["a"]).unwrap(), vec![vec![k]]);
        assert!(matches!(r, Err(Error::InvalidInstrument(_))));
        let half = CMatrix::identity(2).scale_real(0.5f64.sqrt());
        let r = KrausInstrument::new(OutcomeSpace::new(["a"]).unwrap(), vec![vec![half.clone(), half.clone()]]);
        assert!(matches!(r, Err(Error::InvalidInstrument(_))));
        let ok = KrausInstrument::new_reduced(OutcomeSpace::new(["a"]).unwrap(), vec![vec![half.clone(), half]]).unwrap();
        assert_eq!(ok.total_kraus_count(), 1);
    }

    #[test]
    fn apply_on_event_examples() {
        let rho = DensityMatrix::maximally_mixed(2).unwrap();
        let empty: [&str; 0] = [];
        assert_eq!(luders_z().apply_on_event(&empty, &rho).unwrap(), CMatrix::zeros(2, 2));
        let out = luders_z().apply_on_event(&["0"], &rho).unwrap();
        assert!(out.max_abs_diff(&CMatrix::diag_real(&[0.5, 0.0])) < 1e-15);
        let u = hadamard_like();
        let inst = KrausInstrument::unitary("x0", u.clone()).unwrap();
        let rho = DensityMatrix::basis(2, 0).unwrap();
        let out = inst.apply_on_event(&["x0"], &rho).unwrap();
        assert!(out.max_abs_diff(&rho.matrix().conjugate_by(&u)) < 1e-15);
        assert!(matches!(inst.apply_on_event(&["nope"], &rho), Err(Error::UnknownLabel(_))));
    }

    #[test]
    fn dual_apply_examples() {
        let id = CMatrix::identity(2);
        assert!(luders_z().dual_apply(&["0", "1"], &id).unwrap().max_abs_diff(&id) < 1e-15);
        assert!(luders_z().dual_apply(&["0"], &id).unwrap().max_abs_diff(&CMatrix::unit(2, 0, 0)) < 1e-15);
        let u = hadamard_like();
        let z = CMatrix::diag_real(&[1.0, -1.0]);
        let inst = KrausInstrument::unitary("x0", u.clone()).unwrap();
        let expected = u.adjoint() * z.clone() * u;
        assert!(inst.dual_apply(&["x0"], &z).unwrap().max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn induced_observable_examples() {
        let u = KrausInstrument::unitary("x0", hadamard_like()).unwrap();
        assert!(u.induced_observable().effects()[0].max_abs_diff(&CMatrix::identity(2)) < 1e-15);
        let p = luders_z().induced_observable();
        assert!(p.effects()[1].max_abs_diff(&CMatrix::unit(2, 1, 1)) < 1e-15);
        let p = noisy_readout().induced_observable();
        assert!(p.effects()[0].max_abs_diff(&CMatrix::diag_real(&[0.8, 0.2])) < 1e-15);
        assert!(p.effects()[1].max_abs_diff(&CMatrix::diag_real(&[0.2, 0.8])) < 1e-15);
    }

    #[test]
    fn compose_examples() {
        let single = compose(&[luders_z()]).unwrap();
        assert_eq!(single, luders_z());

        let u = hadamard_like();
        let v = CMatrix::diag(&[cr(1.0), c(0.0, 1.0)]);
        let comp = compose(&[KrausInstrument::unitary("u", u.clone()).unwrap(), KrausInstrument::unitary("v", v.clone()).unwrap()])
            .unwrap();
        assert_eq!(comp.space().labels(), &["u|v"]);
        assert!(comp.kraus()[0][0].max_abs_diff(&(v * u)) < 1e-15);

        let comp = compose(&[luders_z(), luders_z()]).unwrap();
        assert_eq!(comp.space().len(), 4);
        assert!(comp.kraus_for("0|1").unwrap().is_empty());
        assert!(comp.kraus_for("1|0").unwrap().is_empty());
        let rho = DensityMatrix::maximally_mixed(2).unwrap();
        let p = crate::measure::induced_measure(&comp.induced_observable(), &rho).unwrap();
        assert_eq!(p.probs(), &[0.5, 0.0, 0.0, 0.5]);
    }

    #[test]
    fn compose_rejects_broken_chains() {
        let wide = KrausInstrument::channel("c", vec![CMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, 1.0], &[0.0, 0.0]]).unwrap()])
            .unwrap();
        assert!(matches!(compose(&[wide.clone(), wide]), Err(Error::DimensionChainMismatch { .. })));
    }

    #[test]
    fn sequential_marginal_of_heisenberg_evolved_step() {
        let u = hadamard_like();
        let insts = [KrausInstrument::unitary("u", u.clone()).unwrap(), luders_z()];
        let m = sequential_marginals(&insts).unwrap();
        // Oracle: nu'(x) = u^H |x><x| u.
        for x in 0..2 {
            let expected = CMatrix::unit(2, x, x).adjoint_conjugate_by(&u);
            assert!(m[1].effects()[x].max_abs_diff(&expected) < 1e-14);
        }
        assert!(m[0].effects()[0].max_abs_diff(&CMatrix::identity(2)) < 1e-14);
        let one = sequential_marginals(&[noisy_readout()]).unwrap();
        assert!(one[0].max_abs_diff(&noisy_readout().induced_observable()) < 1e-15);
    }

    #[test]
    fn commuting_joint_observable() {
        let joint = joint_observable_commuting(&[noisy_readout(), luders_z()]).unwrap();
        // Diagonal product oracle.
        let e = [[0.8, 0.2], [0.2, 0.8]];
        for a in 0..2 {
            for b in 0..2 {
                let mut diag = [e[a][0], e[a][1]];
                diag[1 - b] = 0.0;
                let expected = CMatrix::diag_real(&diag);
                assert!(joint.effects()[2 * a + b].max_abs_diff(&expected) < 1e-14);
            }
        }
        let same = joint_observable_commuting(&[luders_z(), luders_z()]).unwrap();
        assert!(same.effects()[1].max_abs() < 1e-15 && same.effects()[2].max_abs() < 1e-15);
    }

    #[test]
    fn noncommuting_pair_is_rejected() {
        match joint_observable_commuting(&[luders_z(), luders_x()]) {
            Err(Error::NotCommuting { step, residual, .. }) => {
                assert_eq!(step, 1);
                assert!(residual > 0.1);
            }
            other => panic!("expected NotCommuting, got {other:?}"),
        }
    }

    #[test]
    fn dilation_of_trivial_instruments() {
        let id = KrausInstrument::channel("x", vec![CMatrix::identity(2)]).unwrap();
        let im = dilate(&id).unwrap();
        assert_eq!(im.ancilla_dim(), 1);
        assert!(im.unitary().max_abs_diff(&CMatrix::identity(2)) < 1e-15);

        let u = hadamard_like();
        let im = dilate(&KrausInstrument::unitary("x0", u.clone()).unwrap()).unwrap();
        assert_eq!(im.ancilla_dim(), 1);
        assert!(im.unitary().max_abs_diff(&u) < 1e-15);
    }

    #[test]
    fn luders_dilation_reconstructs_dual() {
        let inst = luders_z();
        let im = dilate(&inst).unwrap();
        assert_eq!(im.ancilla_dim(), 2);
        let v = dilation_isometry(&inst);
        assert!((v.adjoint() * v).max_abs_diff(&CMatrix::identity(2)) < 1e-10);
        for e in CMatrix::units(2) {
            for x in 0..2 {
                let r = im.reconstructed_dual(x, &e).unwrap();
                assert!(r.max_abs_diff(&inst.dual_outcome(x, &e)) <= 1e-10);
            }
        }
        let back = im.corresponding_instrument().unwrap();
        assert!(back.induced_observable().max_abs_diff(&inst.induced_observable()) < 1e-12);
    }

    #[test]
    fn equivalence_ignores_unused_completion_block() {
        let inst = noisy_readout();
        let a = dilate(&inst).unwrap();
        // Rotate the ancilla levels e_1 (unused by the e_0 input block) by a
        // phase: U' = U (I (x) diag(1, i)) agrees with U on psi (x) e_0.
        let w = CMatrix::identity(2).kron(&CMatrix::diag(&[cr(1.0), c(0.0, 1.0)]));
        let b = IndirectMeasurement::new(a.ancilla_state().clone(), a.unitary() * &w, a.pointer().clone()).unwrap();
        assert!(statistically_equivalent(&a, &a).unwrap());
        assert!(statistically_equivalent(&a, &b).unwrap());
        let z = dilate(&luders_z()).unwrap();
        let x = dilate(&luders_x()).unwrap();
        assert!(!statistically_equivalent(&z, &x).unwrap());
        let single = dilate(&KrausInstrument::unitary("x0", hadamard_like()).unwrap()).unwrap();
        assert!(matches!(statistically_equivalent(&z, &single), Err(Error::IncompatibleOutcomeSpaces)));
    }

    #[test]
    fn luders_of_povm_has_square_root_kraus() {
        let p = noisy_readout().induced_observable();
        let l = KrausInstrument::luders(&p).unwrap();
        assert_abs_diff_eq!(l.kraus()[0][0].get(0, 0).re, 0.8f64.sqrt(), epsilon = 1e-14);
    }
}
