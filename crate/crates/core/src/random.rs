//! Random states, unitaries and instruments for tests, benchmarks and
//! synthetic configurations.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::instrument::KrausInstrument;
use crate::matcore::{c, eig_hermitian_unchecked, CMatrix};
use crate::measure::{DensityMatrix, OutcomeSpace, Povm};

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re, im) * std::f64::consts::FRAC_1_SQRT_2
    })
    .expect("finite")
}

/// Haar-random unitary.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, d: usize) -> CMatrix {
    let qr = ginibre(rng, d, d).into_dmatrix().qr();
    let (q, r) = (qr.q(), qr.r());
    let phases: Vec<_> = (0..d)
        .map(|i| {
            let z = r[(i, i)];
            if z.norm() > 0.0 { z / z.norm() } else { c(1.0, 0.0) }
        })
        .collect();
    CMatrix::from_dmatrix(q).expect("finite") * CMatrix::diag(&phases)
}

/// Random state of the given rank (Hilbert-Schmidt measure at full rank).
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, d: usize, rank: usize) -> DensityMatrix {
    let g = ginibre(rng, d, rank.max(1));
    let m = &g * &g.adjoint();
    DensityMatrix::from_psd_unnormalized(&m).expect("nonzero")
}

/// Random pure state.
pub fn random_pure<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DensityMatrix {
    random_density(rng, d, 1)
}

/// `A_j S^{-1/2}` for `S = sum_j A_j^H A_j`, so the result sums to a
/// complete family.
fn normalize_family(ops: Vec<CMatrix>) -> Vec<CMatrix> {
    let d = ops[0].ncols();
    let s = ops.iter().fold(CMatrix::zeros(d, d), |acc, a| acc + a.adjoint() * a.clone());
    let inv_sqrt = eig_hermitian_unchecked(&s.hermitize()).map_values(|l| 1.0 / l.sqrt());
    ops.into_iter().map(|a| a * inv_sqrt.clone()).collect()
}

/// Random instrument on `C^d` with `kraus_per_outcome` operators per outcome
/// labelled `0..outcomes`.
pub fn random_instrument<R: Rng + ?Sized>(rng: &mut R, d: usize, outcomes: usize, kraus_per_outcome: usize) -> KrausInstrument {
    let raw: Vec<CMatrix> = (0..outcomes * kraus_per_outcome).map(|_| ginibre(rng, d, d)).collect();
    let mut normalized = normalize_family(raw).into_iter();
    let kraus = (0..outcomes).map(|_| normalized.by_ref().take(kraus_per_outcome).collect()).collect();
    KrausInstrument::new_reduced(OutcomeSpace::indexed(outcomes).expect("nonempty"), kraus).expect("complete by construction")
}

/// Random POVM with `outcomes` full-rank effects.
pub fn random_povm<R: Rng + ?Sized>(rng: &mut R, d: usize, outcomes: usize) -> Povm {
    let inst = random_instrument(rng, d, outcomes, 1);
    inst.induced_observable()
}
