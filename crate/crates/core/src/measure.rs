//! States and observables over finite outcome sets.

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{cr, eig_hermitian_unchecked, CMatrix, Tolerances, C64, MAX_DIM, NORM_TOL};

/// Separator joining the components of a product-outcome label, e.g. `"0|1"`.
pub const TUPLE_SEP: char = '|';

/// Probability below which an outcome is treated as null.
pub const PROB_FLOOR: f64 = 1e-12;

/// Outcome of a single validation check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub check: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn le(check: &str, residual: f64, tolerance: f64) -> Check {
        Check { check: check.to_string(), residual, tolerance, pass: residual <= tolerance }
    }
}

fn first_failure(checks: &[Check]) -> Option<String> {
    checks
        .iter()
        .find(|c| !c.pass)
        .map(|c| format!("{} residual {:.3e} exceeds {:.1e}", c.check, c.residual, c.tolerance))
}

fn check_dim(d: usize) -> Result<()> {
    if d == 0 {
        return Err(Error::MalformedMatrix("zero dimension".into()));
    }
    if d > MAX_DIM {
        return Err(Error::DimensionTooLarge(d));
    }
    Ok(())
}

/// A positive, unit-trace matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct DensityMatrix {
    matrix: CMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        Self::with_tolerances(matrix, &Tolerances::default())
    }

    pub fn with_tolerances(matrix: CMatrix, tol: &Tolerances) -> Result<Self> {
        let checks = Self::checks(&matrix, tol)?;
        if let Some(msg) = first_failure(&checks) {
            return Err(Error::NotADensityMatrix(msg));
        }
        Ok(DensityMatrix { matrix: matrix.hermitize() })
    }

    /// Hermiticity, positivity and trace residuals of a candidate state.
    pub fn checks(matrix: &CMatrix, tol: &Tolerances) -> Result<Vec<Check>> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), found: matrix.ncols() });
        }
        check_dim(matrix.dim())?;
        let herm = matrix.hermiticity_residual();
        let mut out = vec![Check::le("hermiticity", herm, tol.herm)];
        let min_eig = eig_hermitian_unchecked(matrix).values[0];
        out.push(Check::le("positivity", (-min_eig).max(0.0), tol.psd));
        out.push(Check::le("trace", (matrix.trace() - cr(1.0)).norm(), tol.norm));
        Ok(out)
    }

    /// Normalizes a positive matrix known to be PSD by construction.
    pub(crate) fn from_psd_unnormalized(m: &CMatrix) -> Option<Self> {
        let t = m.trace().re;
        if !(t > 0.0) {
            return None;
        }
        Some(DensityMatrix { matrix: m.hermitize().scale_real(1.0 / t) })
    }

    pub(crate) fn from_trusted(matrix: CMatrix) -> Self {
        DensityMatrix { matrix }
    }

    /// `|psi><psi| / <psi|psi>`.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        check_dim(psi.len())?;
        let n: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::NotADensityMatrix("zero or non-finite state vector".into()));
        }
        Ok(DensityMatrix { matrix: CMatrix::projector(psi).scale_real(1.0 / n) })
    }

    pub fn maximally_mixed(d: usize) -> Result<Self> {
        check_dim(d)?;
        Ok(DensityMatrix { matrix: CMatrix::identity(d).scale_real(1.0 / d as f64) })
    }

    /// `|i><i|`.
    pub fn basis(d: usize, i: usize) -> Result<Self> {
        check_dim(d)?;
        if i >= d {
            return Err(Error::DimensionMismatch { expected: d, found: i });
        }
        Ok(DensityMatrix { matrix: CMatrix::unit(d, i, i) })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// `tr(rho^2)`.
    pub fn purity(&self) -> f64 {
        self.matrix.trace_product(&self.matrix).re
    }

    /// `tr(rho^m)` from the spectrum.
    pub fn moment(&self, m: u32) -> f64 {
        if m == 1 {
            return self.matrix.trace().re;
        }
        if m == 2 {
            return self.purity();
        }
        eig_hermitian_unchecked(&self.matrix).values.iter().map(|&l| l.max(0.0).powi(m as i32)).sum()
    }

    /// `t * self + (1 - t) * other`.
    pub fn mix(&self, other: &DensityMatrix, t: f64) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidArgument(format!("mixing weight {t} outside [0, 1]")));
        }
        Ok(DensityMatrix { matrix: self.matrix.scale_real(t) + other.matrix.scale_real(1.0 - t) })
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let m = CMatrix::deserialize(d)?;
        DensityMatrix::new(m).map_err(serde::de::Error::custom)
    }
}

/// Finite ordered set of outcome labels, optionally embedded in the reals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeSpace {
    labels: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    embedding: Option<Vec<f64>>,
}

impl OutcomeSpace {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::InvalidOutcomeSpace("no outcomes".into()));
        }
        let mut sorted = labels.clone();
        sorted.sort();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidOutcomeSpace(format!("duplicate label {:?}", w[0])));
        }
        Ok(OutcomeSpace { labels, embedding: None })
    }

    pub fn with_embedding(mut self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.labels.len() {
            return Err(Error::InvalidOutcomeSpace("embedding is not total".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidOutcomeSpace("non-finite embedding value".into()));
        }
        self.embedding = Some(values);
        Ok(self)
    }

    /// `n` outcomes labelled `"0"`, `"1"`, ...
    pub fn indexed(n: usize) -> Result<Self> {
        Self::new((0..n).map(|i| i.to_string()))
    }

    /// Ordered product; labels are joined with [`TUPLE_SEP`].
    pub fn product(spaces: &[&OutcomeSpace]) -> Result<Self> {
        let mut labels = vec![String::new()];
        for (k, s) in spaces.iter().enumerate() {
            let mut next = Vec::with_capacity(labels.len() * s.len());
            for prefix in &labels {
                for l in &s.labels {
                    if k == 0 {
                        next.push(l.clone());
                    } else {
                        next.push(format!("{prefix}{TUPLE_SEP}{l}"));
                    }
                }
            }
            labels = next;
        }
        OutcomeSpace::new(labels)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn embedding(&self) -> Option<&[f64]> {
        self.embedding.as_deref()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.labels.iter().position(|l| l == label).ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    /// Sorted, deduplicated indices of an event given by labels.
    pub fn event_indices<S: AsRef<str>>(&self, event: &[S]) -> Result<Vec<usize>> {
        let mut idx = event.iter().map(|l| self.index_of(l.as_ref())).collect::<Result<Vec<_>>>()?;
        idx.sort_unstable();
        idx.dedup();
        Ok(idx)
    }
}

/// Positive effects, one per outcome, summing to the identity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Povm {
    space: OutcomeSpace,
    effects: Vec<CMatrix>,
}

impl Povm {
    pub fn new(space: OutcomeSpace, effects: Vec<CMatrix>) -> Result<Self> {
        Self::with_tolerances(space, effects, &Tolerances::default())
    }

    pub fn with_tolerances(space: OutcomeSpace, effects: Vec<CMatrix>, tol: &Tolerances) -> Result<Self> {
        let checks = Self::checks(&space, &effects, tol)?;
        if let Some(msg) = first_failure(&checks) {
            return Err(Error::NotAPovm(msg));
        }
        let effects = effects.iter().map(CMatrix::hermitize).collect();
        Ok(Povm { space, effects })
    }

    pub(crate) fn from_trusted(space: OutcomeSpace, effects: Vec<CMatrix>) -> Self {
        Povm { space, effects }
    }

    /// Hermiticity, positivity and completeness residuals.
    pub fn checks(space: &OutcomeSpace, effects: &[CMatrix], tol: &Tolerances) -> Result<Vec<Check>> {
        if effects.len() != space.len() {
            return Err(Error::NotAPovm(format!("{} effects for {} outcomes", effects.len(), space.len())));
        }
        let d = effects[0].nrows();
        check_dim(d)?;
        let mut herm = 0.0f64;
        let mut neg = 0.0f64;
        let mut total = CMatrix::zeros(d, d);
        for e in effects {
            if !e.is_square() || e.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, found: e.nrows() });
            }
            herm = herm.max(e.hermiticity_residual());
            neg = neg.max(-eig_hermitian_unchecked(e).values[0]);
            total = total + e.clone();
        }
        Ok(vec![
            Check::le("hermiticity", herm, tol.herm),
            Check::le("positivity", neg.max(0.0), tol.psd),
            Check::le("completeness", total.max_abs_diff(&CMatrix::identity(d)), tol.norm),
        ])
    }

    /// Product observable `x -> E_1(x_1) E_2(x_2) ...` of pairwise commuting
    /// POVMs on the same space.
    pub fn commuting_product(factors: &[&Povm]) -> Result<Self> {
        let first = factors.first().ok_or_else(|| Error::InvalidArgument("no factors".into()))?;
        let d = first.dim();
        for (i, a) in factors.iter().enumerate() {
            if a.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, found: a.dim() });
            }
            for b in &factors[i + 1..] {
                for ea in &a.effects {
                    for eb in &b.effects {
                        if ea.commutator(eb).max_abs() > 1e-10 {
                            return Err(Error::NotAPovm("product factors do not commute".into()));
                        }
                    }
                }
            }
        }
        let spaces: Vec<&OutcomeSpace> = factors.iter().map(|p| &p.space).collect();
        let space = OutcomeSpace::product(&spaces)?;
        let mut effects = vec![CMatrix::identity(d)];
        for p in factors {
            effects = effects.iter().flat_map(|acc| p.effects.iter().map(move |e| acc * e)).collect();
        }
        Povm::new(space, effects)
    }

    pub fn space(&self) -> &OutcomeSpace {
        &self.space
    }

    pub fn effects(&self) -> &[CMatrix] {
        &self.effects
    }

    pub fn effect(&self, label: &str) -> Result<&CMatrix> {
        Ok(&self.effects[self.space.index_of(label)?])
    }

    pub fn dim(&self) -> usize {
        self.effects[0].dim()
    }

    pub fn len(&self) -> usize {
        self.effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }

    /// Max entrywise distance to another POVM on the same outcome order.
    pub fn max_abs_diff(&self, other: &Povm) -> f64 {
        if self.space.labels != other.space.labels {
            return f64::INFINITY;
        }
        self.effects.iter().zip(&other.effects).map(|(a, b)| a.max_abs_diff(b)).fold(0.0, f64::max)
    }
}

/// Probability mass function on an outcome space.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeDistribution {
    space: OutcomeSpace,
    probs: Vec<f64>,
}

impl OutcomeDistribution {
    /// Clips round-off negatives (within `NORM_TOL`) to zero and renormalizes
    /// a total that is within `NORM_TOL` of one.
    pub fn from_raw(space: OutcomeSpace, raw: Vec<f64>) -> Result<Self> {
        let probs = clip_and_normalize(&raw, |i| space.label(i).to_string())?;
        Ok(OutcomeDistribution { space, probs })
    }

    pub fn space(&self) -> &OutcomeSpace {
        &self.space
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, label: &str) -> Result<f64> {
        Ok(self.probs[self.space.index_of(label)?])
    }
}

/// Probability-clipping policy shared by every module.
pub(crate) fn clip_and_normalize(raw: &[f64], label: impl Fn(usize) -> String) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(raw.len());
    for (i, &v) in raw.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite);
        }
        if v < -NORM_TOL {
            return Err(Error::NegativeProbability { label: label(i), value: v });
        }
        out.push(v.max(0.0));
    }
    let total: f64 = out.iter().sum();
    if (total - 1.0).abs() > NORM_TOL {
        return Err(Error::NotNormalized(total));
    }
    for p in &mut out {
        *p /= total;
    }
    Ok(out)
}

fn check_same_dim(nu: &Povm, rho: &DensityMatrix) -> Result<()> {
    if nu.dim() != rho.dim() {
        return Err(Error::DimensionMismatch { expected: nu.dim(), found: rho.dim() });
    }
    Ok(())
}

/// `x -> tr[rho nu({x})]`.
pub fn induced_measure(nu: &Povm, rho: &DensityMatrix) -> Result<OutcomeDistribution> {
    check_same_dim(nu, rho)?;
    let mut raw = Vec::with_capacity(nu.len());
    for e in &nu.effects {
        let t = rho.matrix().trace_product(e);
        if t.im.abs() > 1e-10 {
            return Err(Error::NotAPovm(format!("complex expectation {t}")));
        }
        raw.push(t.re);
    }
    OutcomeDistribution::from_raw(nu.space.clone(), raw)
}

/// Radon-Nikodym derivative of `nu` with respect to its induced measure:
/// `x -> nu({x}) / tr[rho nu({x})]`, and the zero matrix for zero effects.
pub fn rn_derivative(nu: &Povm, rho: &DensityMatrix) -> Result<Vec<(String, CMatrix)>> {
    check_same_dim(nu, rho)?;
    let min_eig = eig_hermitian_unchecked(rho.matrix()).values[0];
    if min_eig <= 1e-8 {
        return Err(Error::NotFullRank(min_eig));
    }
    let d = nu.dim();
    let mut out = Vec::with_capacity(nu.len());
    for (label, e) in nu.space.labels.iter().zip(&nu.effects) {
        let mass = rho.matrix().trace_product(e).re;
        let deriv = if e.trace().re <= 1e-14 {
            CMatrix::zeros(d, d)
        } else if mass <= PROB_FLOOR {
            return Err(Error::InconsistentNullSet(label.clone()));
        } else {
            e.scale_real(1.0 / mass)
        };
        out.push((label.clone(), deriv));
    }
    Ok(out)
}

/// Splits a product label into its components.
pub fn split_label(label: &str) -> Vec<&str> {
    label.split(TUPLE_SEP).collect()
}

/// Marginal of a joint observable on product labels along `axis`.
pub fn marginal_observable(joint: &Povm, axis: usize) -> Result<Povm> {
    let parts: Vec<Vec<&str>> = joint.space.labels.iter().map(|l| split_label(l)).collect();
    let arity = parts[0].len();
    if parts.iter().any(|p| p.len() != arity) {
        return Err(Error::MalformedProductLabels("labels have differing arity".into()));
    }
    if axis >= arity {
        return Err(Error::MalformedProductLabels(format!("axis {axis} out of range for arity {arity}")));
    }
    let d = joint.dim();
    let mut labels: Vec<String> = Vec::new();
    let mut effects: Vec<CMatrix> = Vec::new();
    for (p, e) in parts.iter().zip(&joint.effects) {
        let key = p[axis];
        match labels.iter().position(|l| l == key) {
            Some(i) => effects[i] = &effects[i] + e,
            None => {
                labels.push(key.to_string());
                effects.push(e.clone());
            }
        }
    }
    debug_assert!(effects.iter().all(|e| e.dim() == d));
    Povm::new(OutcomeSpace::new(labels)?, effects)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn projective_qubit() -> Povm {
        Povm::new(OutcomeSpace::indexed(2).unwrap(), vec![CMatrix::unit(2, 0, 0), CMatrix::unit(2, 1, 1)]).unwrap()
    }

    fn scaled_identity(p: f64) -> Povm {
        Povm::new(
            OutcomeSpace::indexed(2).unwrap(),
            vec![CMatrix::identity(2).scale_real(p), CMatrix::identity(2).scale_real(1.0 - p)],
        )
        .unwrap()
    }

    #[test]
    fn density_matrix_validation() {
        assert!(DensityMatrix::new(CMatrix::diag_real(&[0.5, 0.5])).is_ok());
        assert!(matches!(DensityMatrix::new(CMatrix::diag_real(&[0.6, 0.5])), Err(Error::NotADensityMatrix(_))));
        assert!(matches!(DensityMatrix::new(CMatrix::diag_real(&[1.1, -0.1])), Err(Error::NotADensityMatrix(_))));
        assert!(matches!(DensityMatrix::maximally_mixed(65), Err(Error::DimensionTooLarge(65))));
    }

    #[test]
    fn moments_of_mixed_state() {
        let rho = DensityMatrix::new(CMatrix::diag_real(&[0.25, 0.75])).unwrap();
        assert_abs_diff_eq!(rho.purity(), 0.625, epsilon = 1e-15);
        assert_abs_diff_eq!(rho.moment(3), 0.25f64.powi(3) + 0.75f64.powi(3), epsilon = 1e-14);
    }

    #[test]
    fn trivial_povm_is_normalized() {
        let nu = Povm::new(OutcomeSpace::new(["X"]).unwrap(), vec![CMatrix::identity(2)]).unwrap();
        let rho = DensityMatrix::pure(&[cr(0.6), C64::new(0.0, 0.8)]).unwrap();
        let p = induced_measure(&nu, &rho).unwrap();
        assert_abs_diff_eq!(p.prob("X").unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn projective_on_maximally_mixed_is_uniform() {
        let p = induced_measure(&projective_qubit(), &DensityMatrix::maximally_mixed(2).unwrap()).unwrap();
        assert_eq!(p.probs(), &[0.5, 0.5]);
    }

    #[test]
    fn scaled_identity_effects_give_their_weights() {
        let rho = DensityMatrix::pure(&[cr(1.0), cr(2.0)]).unwrap();
        let p = induced_measure(&scaled_identity(0.3), &rho).unwrap();
        assert_abs_diff_eq!(p.probs()[0], 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(p.probs()[1], 0.7, epsilon = 1e-15);
    }

    #[test]
    fn povm_rejects_incomplete_effects() {
        let r = Povm::new(OutcomeSpace::indexed(2).unwrap(), vec![CMatrix::unit(2, 0, 0), CMatrix::unit(2, 0, 0)]);
        assert!(matches!(r, Err(Error::NotAPovm(_))));
    }

    #[test]
    fn rn_derivative_examples() {
        let mixed = DensityMatrix::maximally_mixed(2).unwrap();
        let nu = Povm::new(OutcomeSpace::new(["X"]).unwrap(), vec![CMatrix::identity(2)]).unwrap();
        let dd = rn_derivative(&nu, &mixed).unwrap();
        assert!(dd[0].1.max_abs_diff(&CMatrix::identity(2)) < 1e-15);

        for (_, m) in rn_derivative(&scaled_identity(0.3), &mixed).unwrap() {
            assert!(m.max_abs_diff(&CMatrix::identity(2)) < 1e-14);
        }

        let rho = DensityMatrix::new(CMatrix::diag_real(&[0.25, 0.75])).unwrap();
        let dd = rn_derivative(&projective_qubit(), &rho).unwrap();
        assert!(dd[0].1.max_abs_diff(&CMatrix::diag_real(&[4.0, 0.0])) < 1e-14);
        assert!(dd[1].1.max_abs_diff(&CMatrix::diag_real(&[0.0, 1.0 / 0.75])) < 1e-14);
    }

    #[test]
    fn rn_derivative_requires_full_rank() {
        let rho = DensityMatrix::basis(2, 0).unwrap();
        assert!(matches!(rn_derivative(&projective_qubit(), &rho), Err(Error::NotFullRank(_))));
    }

    #[test]
    fn rn_derivative_zero_effect_maps_to_zero() {
        let nu = Povm::new(OutcomeSpace::indexed(2).unwrap(), vec![CMatrix::identity(2), CMatrix::zeros(2, 2)]).unwrap();
        let dd = rn_derivative(&nu, &DensityMatrix::maximally_mixed(2).unwrap()).unwrap();
        assert_eq!(dd[1].1, CMatrix::zeros(2, 2));
    }

    #[test]
    fn marginal_of_product_recovers_factors() {
        let a = projective_qubit();
        let b = scaled_identity(0.3);
        let joint = Povm::commuting_product(&[&a, &b]).unwrap();
        assert_eq!(joint.space().labels(), &["0|0", "0|1", "1|0", "1|1"]);
        assert!(marginal_observable(&joint, 0).unwrap().max_abs_diff(&a) <= 1e-12);
        assert!(marginal_observable(&joint, 1).unwrap().max_abs_diff(&b) <= 1e-12);
    }

    #[test]
    fn marginal_of_single_outcome_joint() {
        let joint = Povm::new(OutcomeSpace::new(["X|Y"]).unwrap(), vec![CMatrix::identity(2)]).unwrap();
        let m = marginal_observable(&joint, 0).unwrap();
        assert_eq!(m.space().labels(), &["X"]);
        assert!(m.effects()[0].max_abs_diff(&CMatrix::identity(2)) < 1e-15);
    }

    #[test]
    fn marginal_rejects_ragged_labels() {
        let joint = Povm::new(
            OutcomeSpace::new(["a|b", "c"]).unwrap(),
            vec![CMatrix::unit(2, 0, 0), CMatrix::unit(2, 1, 1)],
        )
        .unwrap();
        assert!(matches!(marginal_observable(&joint, 0), Err(Error::MalformedProductLabels(_))));
        let ok = Povm::commuting_product(&[&projective_qubit(), &projective_qubit()]).unwrap();
        assert!(matches!(marginal_observable(&ok, 2), Err(Error::MalformedProductLabels(_))));
    }

    #[test]
    fn clipping_policy() {
        let space = OutcomeSpace::indexed(2).unwrap();
        let d = OutcomeDistribution::from_raw(space.clone(), vec![1.0 + 5e-10, -5e-10]).unwrap();
        assert_eq!(d.probs()[1], 0.0);
        assert!(matches!(
            OutcomeDistribution::from_raw(space.clone(), vec![1.1, -0.1]),
            Err(Error::NegativeProbability { .. })
        ));
        assert!(matches!(OutcomeDistribution::from_raw(space, vec![0.5, 0.4]), Err(Error::NotNormalized(_))));
    }

    #[test]
    fn outcome_space_rules() {
        assert!(OutcomeSpace::new(["a", "a"]).is_err());
        assert!(OutcomeSpace::new(Vec::<String>::new()).is_err());
        assert!(OutcomeSpace::new(["a", "b"]).unwrap().with_embedding(vec![1.0]).is_err());
        let s = OutcomeSpace::new(["a", "b", "c"]).unwrap();
        assert_eq!(s.event_indices(&["c", "a", "c"]).unwrap(), vec![0, 2]);
        assert!(matches!(s.event_indices(&["z"]), Err(Error::UnknownLabel(_))));
    }
}
