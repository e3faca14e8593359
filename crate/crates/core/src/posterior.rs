//! Posterior normal states and sequential-measurement trajectories.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::instrument::KrausInstrument;
use crate::matcore::{eig_hermitian_unchecked, CMatrix};
use crate::measure::{clip_and_normalize, DensityMatrix, OutcomeDistribution, PROB_FLOOR};
use crate::rng::uniform_at;

/// Accepted deviation of the disintegration identity.
pub const BOCHNER_TOL: f64 = 1e-9;
/// Accepted deviation of each stored state from its defining formula.
pub const STATE_TOL: f64 = 1e-10;

fn check_state(inst: &KrausInstrument, rho: &DensityMatrix) -> Result<()> {
    if rho.dim() != inst.dim_in() {
        return Err(Error::DimensionMismatch { expected: inst.dim_in(), found: rho.dim() });
    }
    Ok(())
}

/// Raw outcome probabilities `tr[J({x}) rho]`, after the clipping policy.
pub fn outcome_distribution(inst: &KrausInstrument, rho: &DensityMatrix) -> Result<OutcomeDistribution> {
    check_state(inst, rho)?;
    let raw = (0..inst.space().len()).map(|i| inst.apply_outcome(i, rho.matrix()).trace().re).collect();
    OutcomeDistribution::from_raw(inst.space().clone(), raw)
}

/// Normalizes `J({x_i}) rho`, or reports the outcome as null.
fn posterior_at(inst: &KrausInstrument, i: usize, rho: &CMatrix) -> Result<(DensityMatrix, f64)> {
    let out = inst.apply_outcome(i, rho);
    let p = out.trace().re;
    if !(p > PROB_FLOOR) {
        return Err(Error::ZeroProbabilityOutcome { label: inst.space().label(i).to_string(), prob: p.max(0.0) });
    }
    Ok((DensityMatrix::from_psd_unnormalized(&out).expect("positive trace"), p))
}

/// `sum_k K_k(x) rho K_k(x)^H / P_rho({x})`.
pub fn posterior_state(inst: &KrausInstrument, rho: &DensityMatrix, x: &str) -> Result<DensityMatrix> {
    check_state(inst, rho)?;
    let i = inst.space().index_of(x)?;
    posterior_at(inst, i, rho.matrix()).map(|(s, _)| s)
}

/// Residuals of the two defining identities of a posterior family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FamilyResiduals {
    /// Max entrywise deviation of a stored state from `J({x}) rho / p(x)`.
    pub pointwise: f64,
    /// Bound on `|sum_{x in A} states(x) p(x) - J(A) rho|` over every event `A`.
    pub bochner: f64,
}

/// Posterior states for every outcome of positive probability.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PosteriorFamily {
    instrument: KrausInstrument,
    prior: DensityMatrix,
    states: Vec<(String, DensityMatrix)>,
    dist: OutcomeDistribution,
}

impl PosteriorFamily {
    /// Assembles a family without verifying it.
    pub fn from_parts(
        instrument: KrausInstrument,
        prior: DensityMatrix,
        states: Vec<(String, DensityMatrix)>,
        dist: OutcomeDistribution,
    ) -> Self {
        PosteriorFamily { instrument, prior, states, dist }
    }

    pub fn instrument(&self) -> &KrausInstrument {
        &self.instrument
    }

    pub fn prior(&self) -> &DensityMatrix {
        &self.prior
    }

    pub fn states(&self) -> &[(String, DensityMatrix)] {
        &self.states
    }

    pub fn state(&self, label: &str) -> Option<&DensityMatrix> {
        self.states.iter().find(|(l, _)| l == label).map(|(_, s)| s)
    }

    pub fn dist(&self) -> &OutcomeDistribution {
        &self.dist
    }

    /// Pointwise and disintegration residuals.
    ///
    /// The disintegration error is linear in the event, so the sum of the
    /// singleton errors bounds it for every event at once.
    pub fn residuals(&self) -> Result<FamilyResiduals> {
        let inst = &self.instrument;
        let d = inst.dim_out();
        let mut pointwise = 0.0f64;
        let mut bochner = 0.0;
        for (i, label) in inst.space().labels().iter().enumerate() {
            let exact = inst.apply_outcome(i, self.prior.matrix());
            let p = self.dist.probs()[i];
            let weighted = match self.state(label) {
                Some(s) => {
                    if p > 0.0 {
                        pointwise = pointwise.max(s.matrix().max_abs_diff(&exact.scale_real(1.0 / p)));
                    }
                    s.matrix().scale_real(p)
                }
                None => CMatrix::zeros(d, d),
            };
            bochner += weighted.max_abs_diff(&exact);
        }
        Ok(FamilyResiduals { pointwise, bochner })
    }

    /// Fails unless both residuals are within tolerance.
    pub fn verify(&self) -> Result<FamilyResiduals> {
        let r = self.residuals()?;
        if r.pointwise > STATE_TOL || r.bochner > BOCHNER_TOL {
            return Err(Error::InvalidArgument(format!(
                "posterior family residuals pointwise {:.3e}, disintegration {:.3e}",
                r.pointwise, r.bochner
            )));
        }
        Ok(r)
    }
}

/// The family `x -> posterior_state(inst, rho, x)` with its distribution.
pub fn posterior_family(inst: &KrausInstrument, rho: &DensityMatrix) -> Result<PosteriorFamily> {
    let dist = outcome_distribution(inst, rho)?;
    let mut states = Vec::new();
    for (i, label) in inst.space().labels().iter().enumerate() {
        if dist.probs()[i] > PROB_FLOOR {
            states.push((label.clone(), posterior_at(inst, i, rho.matrix())?.0));
        }
    }
    let family = PosteriorFamily::from_parts(inst.clone(), rho.clone(), states, dist);
    family.verify()?;
    Ok(family)
}

/// A positive operator with no prior mass that a posterior state charges.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProperWitness {
    pub projector: CMatrix,
    pub label: String,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Properness {
    pub proper: bool,
    pub witness: Option<ProperWitness>,
}

/// Checks that no posterior state charges a positive operator the
/// unconditional output state does not.
///
/// The test operators are the eigenprojectors of `J(X) rho`; those with
/// mass at most `1e-12` span its kernel.
pub fn properness_check(family: &PosteriorFamily) -> Result<Properness> {
    let inst = family.instrument();
    let out = inst.apply_channel(family.prior().matrix())?;
    let eig = eig_hermitian_unchecked(&out.hermitize());
    for (k, &lambda) in eig.values.iter().enumerate() {
        if lambda > PROB_FLOOR {
            continue;
        }
        let projector = CMatrix::projector(&eig.vector(k));
        for (label, state) in family.states() {
            let mass = state.matrix().trace_product(&projector).re;
            if mass > STATE_TOL {
                return Ok(Properness {
                    proper: false,
                    witness: Some(ProperWitness { projector, label: label.clone(), mass }),
                });
            }
        }
    }
    Ok(Properness { proper: true, witness: None })
}

/// A sampled run of a sequential measurement scheme.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub seed: u64,
    pub outcomes: Vec<String>,
    /// Conditional probability of each realized outcome.
    pub probs: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub logprob: f64,
}

/// Index drawn by inverse CDF over `probs` from `u in [0, 1)`, never
/// landing on a zero-probability outcome.
pub(crate) fn inverse_cdf(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Samples outcomes step by step, each from the current posterior state,
/// using substream `(seed, step)` for step `step`.
pub fn sample_trajectory(insts: &[KrausInstrument], prior: &DensityMatrix, seed: u64) -> Result<Trajectory> {
    sample_chain(|i| &insts[i], insts.len(), prior, seed)
}

/// [`sample_trajectory`] over the instruments `inst_at(0..n)`.
pub(crate) fn sample_chain<'a>(
    inst_at: impl Fn(usize) -> &'a KrausInstrument,
    n: usize,
    prior: &DensityMatrix,
    seed: u64,
) -> Result<Trajectory> {
    let mut state = prior.clone();
    let mut traj = Trajectory {
        seed,
        outcomes: Vec::with_capacity(n),
        probs: Vec::with_capacity(n),
        states: Vec::with_capacity(n),
        logprob: 0.0,
    };
    for step in 0..n {
        let inst = inst_at(step);
        if inst.dim_in() != state.dim() {
            return Err(if step == 0 {
                Error::DimensionMismatch { expected: inst.dim_in(), found: state.dim() }
            } else {
                Error::DimensionChainMismatch { step, out_dim: state.dim(), in_dim: inst.dim_in() }
            });
        }
        let raw: Vec<f64> = (0..inst.space().len()).map(|i| inst.apply_outcome(i, state.matrix()).trace().re).collect();
        let probs = clip_and_normalize(&raw, |i| inst.space().label(i).to_string())?;
        let support: Vec<f64> = probs.iter().map(|&p| if p > PROB_FLOOR { p } else { 0.0 }).collect();
        let i = inverse_cdf(&support, uniform_at(seed, step as u64));
        let (next, _) = posterior_at(inst, i, state.matrix())?;
        let p = probs[i];
        traj.outcomes.push(inst.space().label(i).to_string());
        traj.probs.push(p);
        traj.logprob += p.ln();
        traj.states.push(next.clone());
        state = next;
    }
    Ok(traj)
}

/// `pi(theta | x) ∝ p(x | theta) pi(theta)` with `likelihood[theta][x]`.
pub fn classical_bayes_oracle(prior_weights: &[f64], likelihood: &[Vec<f64>], observation: usize) -> Result<Vec<f64>> {
    let bad = |m: String| Err(Error::InvalidProbabilityVector(m));
    if likelihood.len() != prior_weights.len() {
        return bad(format!("{} likelihood rows for {} prior weights", likelihood.len(), prior_weights.len()));
    }
    let is_prob = |v: &[f64]| v.iter().all(|&p| p >= 0.0 && p.is_finite()) && (v.iter().sum::<f64>() - 1.0).abs() <= 1e-9;
    if !is_prob(prior_weights) {
        return bad("prior weights".into());
    }
    for row in likelihood {
        if !is_prob(row) {
            return bad("likelihood row".into());
        }
        if observation >= row.len() {
            return bad(format!("observation {observation} out of range"));
        }
    }
    let joint: Vec<f64> = likelihood.iter().zip(prior_weights).map(|(row, &w)| row[observation] * w).collect();
    let evidence: f64 = joint.iter().sum();
    if !(evidence > 0.0) {
        return Err(Error::ZeroEvidence);
    }
    Ok(joint.iter().map(|j| j / evidence).collect())
}
