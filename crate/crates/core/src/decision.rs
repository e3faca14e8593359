//! Losses, risk, Bayes risk and finite-class decision analysis.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{grid_index, partition_indices, posterior_parameter_distribution, ParamModel, PosteriorDist};
use crate::instrument::KrausInstrument;
use crate::matcore::CMatrix;
use crate::measure::{DensityMatrix, TUPLE_SEP};
use crate::posterior::sample_trajectory;
use crate::rng::derive_seed;

/// Largest composite outcome space evaluated by exact enumeration.
pub const EXACT_LIMIT: usize = 10_000;
/// Largest `outcomes x actions` product searched for a Bayes solution.
pub const SOLVE_BUDGET: usize = 1_000_000;
/// Largest rule class accepted by the admissibility and minimax checks.
pub const CLASS_BUDGET: usize = 10_000;
/// Slack for "no worse than" comparisons of risks.
pub const EQ_SLACK: f64 = 1e-12;
/// Margin for "strictly better" comparisons of risks.
pub const STRICT_MARGIN: f64 = 1e-9;

/// An action: a real estimate, a partition cell or a closed interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Action {
    Real(f64),
    Index(usize),
    Interval(f64, f64),
}

impl Action {
    fn sort_key(&self) -> (f64, f64) {
        match *self {
            Action::Real(y) => (y, 0.0),
            Action::Index(i) => (i as f64, 0.0),
            Action::Interval(a, b) => (a, b),
        }
    }

    fn describe(&self) -> String {
        match self {
            Action::Real(y) => format!("real {y}"),
            Action::Index(i) => format!("index {i}"),
            Action::Interval(a, b) => format!("interval [{a}, {b}]"),
        }
    }
}

impl std::fmt::Display for Action {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Action::Real(y) => write!(f, "{y}"),
            Action::Index(i) => write!(f, "{i}"),
            Action::Interval(a, b) => write!(f, "[{a},{b}]"),
        }
    }
}

/// Loss `L(theta, action) >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossSpec {
    /// `c(theta) (theta - y)^2`; `None` means `c = 1`.
    WeightedQuadratic {
        #[serde(default)]
        weights: Option<Vec<f64>>,
    },
    /// `k1 (theta - y)` when `theta >= y`, `k0 (y - theta)` otherwise.
    Linear { k0: f64, k1: f64 },
    /// `0` when `|theta - y| <= eps`, else `1`.
    ZeroOne { eps: f64 },
    /// `k0 (b - a) + k1 1{theta not in [a, b]}`.
    Interval { k0: f64, k1: f64 },
    /// `k_y 1{theta in cell_y}`, or `k_y 1{theta not in cell_y}` when
    /// `conventional`.
    Partition {
        cells: Vec<Vec<f64>>,
        costs: Vec<f64>,
        #[serde(default)]
        conventional: bool,
    },
}

impl LossSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            LossSpec::WeightedQuadratic { .. } => "weighted_quadratic",
            LossSpec::Linear { .. } => "linear",
            LossSpec::ZeroOne { .. } => "zero_one",
            LossSpec::Interval { .. } => "interval",
            LossSpec::Partition { .. } => "partition",
        }
    }

    /// Validates the parameters against a grid.
    pub fn validate(&self, grid: &[f64]) -> Result<()> {
        let nonneg = |v: f64| v >= 0.0 && v.is_finite();
        let ok = match self {
            LossSpec::WeightedQuadratic { weights: Some(w) } => w.len() == grid.len() && w.iter().all(|&c| nonneg(c)),
            LossSpec::WeightedQuadratic { weights: None } => true,
            LossSpec::Linear { k0, k1 } | LossSpec::Interval { k0, k1 } => nonneg(*k0) && nonneg(*k1),
            LossSpec::ZeroOne { eps } => *eps > 0.0 && eps.is_finite(),
            LossSpec::Partition { cells, costs, .. } => {
                partition_indices(grid, cells)?;
                costs.len() == cells.len() && costs.iter().all(|&k| nonneg(k))
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidLoss(format!("bad parameters for {} loss", self.kind())))
        }
    }

    fn incompatible(&self, action: &Action) -> Error {
        Error::IncompatibleAction { action: action.describe(), loss: self.kind().into() }
    }

    /// Loss at grid point `i` of `grid`.
    pub fn eval(&self, grid: &[f64], i: usize, action: &Action) -> Result<f64> {
        let theta = grid[i];
        match (self, action) {
            (LossSpec::WeightedQuadratic { weights }, Action::Real(y)) => {
                let c = weights.as_ref().map_or(1.0, |w| w[i]);
                Ok(c * (theta - y) * (theta - y))
            }
            (LossSpec::Linear { k0, k1 }, Action::Real(y)) => {
                Ok(if theta >= *y { k1 * (theta - y) } else { k0 * (y - theta) })
            }
            (LossSpec::ZeroOne { eps }, Action::Real(y)) => Ok(if (theta - y).abs() <= *eps { 0.0 } else { 1.0 }),
            (LossSpec::Interval { k0, k1 }, Action::Interval(a, b)) if a <= b => {
                let miss = if theta < *a || theta > *b { 1.0 } else { 0.0 };
                Ok(k0 * (b - a) + k1 * miss)
            }
            (LossSpec::Partition { cells, costs, conventional }, Action::Index(y)) if *y < cells.len() => {
                let inside = cells[*y].iter().any(|&t| grid_index(&[t], theta).is_some());
                Ok(costs[*y] * if inside != *conventional { 1.0 } else { 0.0 })
            }
            _ => Err(self.incompatible(action)),
        }
    }
}

/// Expected loss `sum_theta mass(theta) L(theta, action)`.
pub fn posterior_risk(dist: &PosteriorDist, loss: &LossSpec, action: &Action) -> Result<f64> {
    let grid = dist.grid();
    let mut acc = 0.0;
    for (i, &m) in dist.mass().iter().enumerate() {
        acc += m * loss.eval(grid, i, action)?;
    }
    Ok(acc)
}

/// A nonrandomized rule: one action per composite outcome label.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecisionRule {
    labels: Vec<String>,
    actions: Vec<Action>,
}

impl DecisionRule {
    pub fn new(pairs: Vec<(String, Action)>) -> Self {
        let (labels, actions) = pairs.into_iter().unzip();
        DecisionRule { labels, actions }
    }

    /// The rule returning `action` on every outcome of `labels`.
    pub fn constant(labels: &[String], action: Action) -> Self {
        DecisionRule { labels: labels.to_vec(), actions: vec![action; labels.len()] }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn action_for(&self, label: &str) -> Result<&Action> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| &self.actions[i])
            .ok_or_else(|| Error::IncompleteRule(label.into()))
    }

    /// Actions aligned with `labels`.
    pub fn resolve(&self, labels: &[String]) -> Result<Vec<Action>> {
        if self.labels == labels {
            return Ok(self.actions.clone());
        }
        labels.iter().map(|l| self.action_for(l).copied()).collect()
    }
}

/// How a risk was computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum RiskMethod {
    ExactEnumeration,
    /// `stderr` is the largest per-parameter standard error.
    MonteCarlo { samples: usize, seed: u64, stderr: f64 },
}

/// Exact enumeration or Monte Carlo; `Auto` enumerates when the composite
/// space has at most [`EXACT_LIMIT`] outcomes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RiskMode {
    Auto { samples: usize, seed: u64 },
    Exact,
    MonteCarlo { samples: usize, seed: u64 },
}

impl Default for RiskMode {
    fn default() -> Self {
        RiskMode::Auto { samples: 10_000, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskReport {
    /// `(theta, R(theta, rule))` over the grid.
    pub per_theta: Vec<(f64, f64)>,
    pub bayes: f64,
    pub method: RiskMethod,
    /// Monte Carlo standard error per grid point (zero when exact).
    pub stderr: Vec<f64>,
}

fn composite_count(insts: &[KrausInstrument]) -> usize {
    insts.iter().try_fold(1usize, |acc, i| acc.checked_mul(i.space().len())).unwrap_or(usize::MAX)
}

fn check_chain(insts: &[KrausInstrument], d: usize) -> Result<()> {
    if insts.is_empty() {
        return Err(Error::InvalidArgument("no instruments".into()));
    }
    if insts[0].dim_in() != d {
        return Err(Error::DimensionMismatch { expected: insts[0].dim_in(), found: d });
    }
    for (step, w) in insts.windows(2).enumerate() {
        if w[0].dim_out() != w[1].dim_in() {
            return Err(Error::DimensionChainMismatch { step: step + 1, out_dim: w[0].dim_out(), in_dim: w[1].dim_in() });
        }
    }
    Ok(())
}

/// Labels of the composite outcome space, first step slowest.
pub fn composite_labels(insts: &[KrausInstrument]) -> Result<Vec<String>> {
    let n = composite_count(insts);
    if n > crate::instrument::MAX_OUTCOMES {
        return Err(Error::OutcomeExplosion(n));
    }
    let mut labels = vec![String::new()];
    for (step, inst) in insts.iter().enumerate() {
        labels = labels
            .iter()
            .flat_map(|p| {
                inst.space().labels().iter().map(move |l| if step == 0 { l.clone() } else { format!("{p}{TUPLE_SEP}{l}") })
            })
            .collect();
    }
    Ok(labels)
}

/// `P(x)` for every composite outcome `x` when the chain starts in `rho`.
pub fn composite_probabilities(insts: &[KrausInstrument], rho: &CMatrix) -> Vec<f64> {
    fn walk(insts: &[KrausInstrument], rho: &CMatrix, out: &mut Vec<f64>) {
        let Some((first, rest)) = insts.split_first() else {
            out.push(rho.trace().re.max(0.0));
            return;
        };
        let block: usize = rest.iter().map(|i| i.space().len()).product();
        for x in 0..first.space().len() {
            let next = first.apply_outcome(x, rho);
            if next.trace().re <= 0.0 {
                out.extend(std::iter::repeat_n(0.0, block));
            } else {
                walk(rest, &next, out);
            }
        }
    }
    let mut out = Vec::with_capacity(composite_count(insts));
    walk(insts, rho, &mut out);
    out
}

/// Outcome likelihoods `p(x | theta)` of a model under a measurement chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Likelihood {
    pub grid: Vec<f64>,
    pub labels: Vec<String>,
    /// `probs[theta][x]`.
    pub probs: Vec<Vec<f64>>,
}

impl Likelihood {
    pub fn new(model: &ParamModel, insts: &[KrausInstrument]) -> Result<Self> {
        let states = model.states_by_theta()?;
        check_chain(insts, states[0].dim())?;
        let n = composite_count(insts);
        if n > EXACT_LIMIT {
            return Err(Error::BudgetExceeded(format!("{n} composite outcomes exceed the exact limit {EXACT_LIMIT}")));
        }
        let labels = composite_labels(insts)?;
        let probs = states.par_iter().map(|s| composite_probabilities(insts, s.matrix())).collect();
        Ok(Likelihood { grid: model.grid().to_vec(), labels, probs })
    }

    /// `R(theta_i, rule)` for every grid point.
    pub fn risks(&self, loss: &LossSpec, actions: &[Action]) -> Result<Vec<f64>> {
        (0..self.grid.len())
            .map(|i| {
                let mut acc = 0.0;
                for (p, a) in self.probs[i].iter().zip(actions) {
                    if *p > 0.0 {
                        acc += p * loss.eval(&self.grid, i, a)?;
                    }
                }
                Ok(acc)
            })
            .collect()
    }

    pub fn rule_risks(&self, loss: &LossSpec, rule: &DecisionRule) -> Result<Vec<f64>> {
        self.risks(loss, &rule.resolve(&self.labels)?)
    }
}

fn prior_average(weights: &[f64], per_theta: &[f64]) -> f64 {
    weights.iter().zip(per_theta).map(|(w, r)| w * r).sum()
}

/// Monte Carlo risk at grid point `i`: mean and standard error.
fn mc_risk(
    model: &ParamModel,
    insts: &[KrausInstrument],
    rule: &DecisionRule,
    loss: &LossSpec,
    i: usize,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if samples < 2 {
        return Err(Error::InvalidArgument("Monte Carlo needs at least two samples".into()));
    }
    let state = &model.states_by_theta()?[i];
    let theta_seed = derive_seed(seed, i as u64);
    let losses: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let t = sample_trajectory(insts, state, derive_seed(theta_seed, s as u64))?;
            let label = t.outcomes.join(&TUPLE_SEP.to_string());
            loss.eval(model.grid(), i, rule.action_for(&label)?)
        })
        .collect::<Result<_>>()?;
    let n = samples as f64;
    let mean = losses.iter().sum::<f64>() / n;
    let var = losses.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

fn use_exact(insts: &[KrausInstrument], mode: RiskMode) -> bool {
    match mode {
        RiskMode::Exact => true,
        RiskMode::MonteCarlo { .. } => false,
        RiskMode::Auto { .. } => composite_count(insts) <= EXACT_LIMIT,
    }
}

fn mc_params(mode: RiskMode) -> (usize, u64) {
    match mode {
        RiskMode::Auto { samples, seed } | RiskMode::MonteCarlo { samples, seed } => (samples, seed),
        RiskMode::Exact => (0, 0),
    }
}

/// `R(theta, rule)` with the default mode.
pub fn risk(model: &ParamModel, insts: &[KrausInstrument], rule: &DecisionRule, loss: &LossSpec, theta: f64) -> Result<f64> {
    risk_with(model, insts, rule, loss, theta, RiskMode::default()).map(|(r, _)| r)
}

/// `R(theta, rule)` and how it was obtained.
pub fn risk_with(
    model: &ParamModel,
    insts: &[KrausInstrument],
    rule: &DecisionRule,
    loss: &LossSpec,
    theta: f64,
    mode: RiskMode,
) -> Result<(f64, RiskMethod)> {
    let states = model.states_by_theta()?;
    let i = model.theta_index(theta)?;
    loss.validate(model.grid())?;
    check_chain(insts, states[0].dim())?;
    if use_exact(insts, mode) {
        let labels = composite_labels(insts)?;
        let actions = rule.resolve(&labels)?;
        let probs = composite_probabilities(insts, states[i].matrix());
        let mut acc = 0.0;
        for (p, a) in probs.iter().zip(&actions) {
            if *p > 0.0 {
                acc += p * loss.eval(model.grid(), i, a)?;
            }
        }
        Ok((acc, RiskMethod::ExactEnumeration))
    } else {
        let (samples, seed) = mc_params(mode);
        let (mean, stderr) = mc_risk(model, insts, rule, loss, i, samples, seed)?;
        Ok((mean, RiskMethod::MonteCarlo { samples, seed, stderr }))
    }
}

/// Risk function over the grid and its prior average.
pub fn bayes_risk(
    model: &ParamModel,
    insts: &[KrausInstrument],
    rule: &DecisionRule,
    loss: &LossSpec,
    mode: RiskMode,
) -> Result<RiskReport> {
    let weights = model.prior_weights()?;
    let states = model.states_by_theta()?;
    loss.validate(model.grid())?;
    check_chain(insts, states[0].dim())?;
    let grid = model.grid();
    let (per, stderr, method) = if use_exact(insts, mode) {
        let lik = Likelihood::new(model, insts)?;
        let per = lik.rule_risks(loss, rule)?;
        let n = per.len();
        (per, vec![0.0; n], RiskMethod::ExactEnumeration)
    } else {
        let (samples, seed) = mc_params(mode);
        let pairs = (0..grid.len()).map(|i| mc_risk(model, insts, rule, loss, i, samples, seed)).collect::<Result<Vec<_>>>()?;
        let (per, se): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let worst = se.iter().copied().fold(0.0, f64::max);
        (per, se, RiskMethod::MonteCarlo { samples, seed, stderr: worst })
    };
    Ok(RiskReport {
        bayes: prior_average(weights, &per),
        per_theta: grid.iter().copied().zip(per).collect(),
        method,
        stderr,
    })
}

fn sorted_actions(action_set: &[Action]) -> Result<Vec<Action>> {
    if action_set.is_empty() {
        return Err(Error::InvalidArgument("empty action set".into()));
    }
    let mut a = action_set.to_vec();
    a.sort_by(|x, y| {
        let (a0, a1) = x.sort_key();
        let (b0, b1) = y.sort_key();
        a0.total_cmp(&b0).then(a1.total_cmp(&b1))
    });
    Ok(a)
}

/// First action (in sorted order) minimizing `score`, within [`EQ_SLACK`].
fn argmin_action(actions: &[Action], mut score: impl FnMut(&Action) -> Result<f64>) -> Result<Action> {
    let mut best = actions[0];
    let mut best_score = score(&best)?;
    for a in &actions[1..] {
        let s = score(a)?;
        if s < best_score - EQ_SLACK {
            best = *a;
            best_score = s;
        }
    }
    Ok(best)
}

/// Pointwise minimizer of the prior-weighted expected loss; by Fubini it
/// minimizes the Bayes risk over all rules into `action_set`.
pub fn bayes_solution_enumerate(
    model: &ParamModel,
    insts: &[KrausInstrument],
    loss: &LossSpec,
    action_set: &[Action],
) -> Result<DecisionRule> {
    let weights = model.prior_weights()?;
    let actions = sorted_actions(action_set)?;
    let n = composite_count(insts);
    if n.saturating_mul(actions.len()) > SOLVE_BUDGET {
        return Err(Error::BudgetExceeded(format!("{n} outcomes x {} actions exceeds {SOLVE_BUDGET}", actions.len())));
    }
    loss.validate(model.grid())?;
    let lik = Likelihood::new(model, insts)?;
    let grid = model.grid();
    let chosen = (0..lik.labels.len())
        .into_par_iter()
        .map(|x| {
            argmin_action(&actions, |a| {
                let mut acc = 0.0;
                for (i, w) in weights.iter().enumerate() {
                    let joint = w * lik.probs[i][x];
                    if joint > 0.0 {
                        acc += joint * loss.eval(grid, i, a)?;
                    }
                }
                Ok(acc)
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DecisionRule { labels: lik.labels, actions: chosen })
}

/// Rule choosing, for each outcome, the action of least posterior risk
/// under the posterior state of the model's prior state.
///
/// Null outcomes get the smallest action.
pub fn posterior_solution(
    model: &ParamModel,
    insts: &[KrausInstrument],
    loss: &LossSpec,
    action_set: &[Action],
) -> Result<DecisionRule> {
    let actions = sorted_actions(action_set)?;
    let n = composite_count(insts);
    if n.saturating_mul(actions.len()) > SOLVE_BUDGET {
        return Err(Error::BudgetExceeded(format!("{n} outcomes x {} actions exceeds {SOLVE_BUDGET}", actions.len())));
    }
    loss.validate(model.grid())?;
    check_chain(insts, model.prior_state().dim())?;
    let labels = composite_labels(insts)?;
    let composite = crate::instrument::compose(insts)?;
    let prior = model.prior_state();
    let chosen = (0..labels.len())
        .into_par_iter()
        .map(|x| {
            let out = composite.apply_outcome(x, prior.matrix());
            if out.trace().re <= crate::measure::PROB_FLOOR {
                return Ok(actions[0]);
            }
            let post = DensityMatrix::from_psd_unnormalized(&out).expect("positive trace");
            let dist = posterior_parameter_distribution(model, &post)?;
            argmin_action(&actions, |a| posterior_risk(&dist, loss, a))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DecisionRule { labels, actions: chosen })
}

/// Every rule from `labels` into `action_set`, in lexicographic order.
pub fn enumerate_rules(labels: &[String], action_set: &[Action]) -> Result<Vec<DecisionRule>> {
    let count = (action_set.len() as f64).powi(labels.len() as i32);
    if action_set.is_empty() || count > CLASS_BUDGET as f64 {
        return Err(Error::BudgetExceeded(format!("{count} rules exceed the class limit {CLASS_BUDGET}")));
    }
    let mut rules = vec![Vec::new()];
    for _ in labels {
        rules = rules
            .into_iter()
            .flat_map(|r: Vec<Action>| {
                action_set.iter().map(move |a| {
                    let mut r = r.clone();
                    r.push(*a);
                    r
                })
            })
            .collect();
    }
    Ok(rules.into_iter().map(|actions| DecisionRule { labels: labels.to_vec(), actions }).collect())
}

/// Whether `better` dominates `worse`: no worse anywhere, strictly better
/// somewhere.
pub fn dominates(better: &[f64], worse: &[f64]) -> bool {
    better.iter().zip(worse).all(|(b, w)| *b <= w + EQ_SLACK) && better.iter().zip(worse).any(|(b, w)| *b < w - STRICT_MARGIN)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Admissibility {
    pub admissible: bool,
    /// Index in the class of a dominating rule.
    pub dominated_by: Option<usize>,
    pub risks: Vec<f64>,
    pub dominating_risks: Option<Vec<f64>>,
}

fn class_risks(lik: &Likelihood, loss: &LossSpec, class: &[DecisionRule]) -> Result<Vec<Vec<f64>>> {
    if class.len() > CLASS_BUDGET {
        return Err(Error::BudgetExceeded(format!("{} rules exceed the class limit {CLASS_BUDGET}", class.len())));
    }
    class.par_iter().map(|r| lik.rule_risks(loss, r)).collect()
}

/// Searches `class` for a rule dominating `rule`.
pub fn admissibility_check(
    model: &ParamModel,
    insts: &[KrausInstrument],
    loss: &LossSpec,
    rule: &DecisionRule,
    class: &[DecisionRule],
) -> Result<Admissibility> {
    loss.validate(model.grid())?;
    let lik = Likelihood::new(model, insts)?;
    let risks = lik.rule_risks(loss, rule)?;
    let table = class_risks(&lik, loss, class)?;
    let hit = table.iter().position(|r| dominates(r, &risks));
    Ok(Admissibility {
        admissible: hit.is_none(),
        dominated_by: hit,
        dominating_risks: hit.map(|i| table[i].clone()),
        risks,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Minimax {
    /// Indices into the class attaining the smallest maximal risk.
    pub minimax: Vec<usize>,
    pub sup_risk: Vec<f64>,
    pub risks: Vec<Vec<f64>>,
}

/// Maximal risk of each rule and the rules attaining the least one.
pub fn minimax_check(model: &ParamModel, insts: &[KrausInstrument], loss: &LossSpec, class: &[DecisionRule]) -> Result<Minimax> {
    if class.is_empty() {
        return Err(Error::InvalidArgument("empty rule class".into()));
    }
    loss.validate(model.grid())?;
    let lik = Likelihood::new(model, insts)?;
    let risks = class_risks(&lik, loss, class)?;
    let sup_risk: Vec<f64> = risks.iter().map(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect();
    let best = sup_risk.iter().copied().fold(f64::INFINITY, f64::min);
    let minimax = (0..class.len()).filter(|&i| sup_risk[i] <= best + EQ_SLACK).collect();
    Ok(Minimax { minimax, sup_risk, risks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{OutcomeSpace, Povm};

    /// Two-point model with basis states and a readout that reports the
    /// parameter correctly with probability `q`.
    fn toy(q: f64) -> (ParamModel, Vec<KrausInstrument>) {
        let space = OutcomeSpace::indexed(2).unwrap().with_embedding(vec![0.0, 1.0]).unwrap();
        let povm = Povm::new(space, vec![CMatrix::unit(2, 0, 0), CMatrix::unit(2, 1, 1)]).unwrap();
        let states = vec![DensityMatrix::basis(2, 0).unwrap(), DensityMatrix::basis(2, 1).unwrap()];
        let model = ParamModel::new(
            vec![0.0, 1.0],
            povm,
            DensityMatrix::maximally_mixed(2).unwrap(),
            Some(states),
            Some(vec![0.5, 0.5]),
        )
        .unwrap();
        let (a, b) = (q.sqrt(), (1.0 - q).sqrt());
        let readout = KrausInstrument::new(
            OutcomeSpace::indexed(2).unwrap(),
            vec![vec![CMatrix::diag_real(&[a, b])], vec![CMatrix::diag_real(&[b, a])]],
        )
        .unwrap();
        (model, vec![readout])
    }

    fn quad() -> LossSpec {
        LossSpec::WeightedQuadratic { weights: None }
    }

    fn labels() -> Vec<String> {
        vec!["0".into(), "1".into()]
    }

    #[test]
    fn posterior_risk_examples() {
        let d = PosteriorDist::new(vec![0.0, 1.0], vec![0.7, 0.3]).unwrap();
        let r = posterior_risk(&d, &LossSpec::ZeroOne { eps: 1e-3 }, &Action::Real(0.0)).unwrap();
        assert!((r - 0.3).abs() < 1e-15);
        let p = PosteriorDist::new(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        assert_eq!(posterior_risk(&p, &quad(), &Action::Real(1.0)).unwrap(), 0.0);
        let h = PosteriorDist::new(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
        let r = posterior_risk(&h, &LossSpec::Linear { k0: 1.0, k1: 1.0 }, &Action::Real(0.5)).unwrap();
        assert!((r - 0.5).abs() < 1e-15);
        assert!(matches!(posterior_risk(&h, &quad(), &Action::Index(0)), Err(Error::IncompatibleAction { .. })));
    }

    #[test]
    fn risk_examples() {
        let (model, insts) = toy(0.8);
        let zero = LossSpec::Linear { k0: 0.0, k1: 0.0 };
        let rule = DecisionRule::constant(&labels(), Action::Real(0.3));
        assert_eq!(risk(&model, &insts, &rule, &zero, 1.0).unwrap(), 0.0);
        for theta in [0.0, 1.0] {
            let r = risk(&model, &insts, &rule, &quad(), theta).unwrap();
            assert!((r - (theta - 0.3) * (theta - 0.3)).abs() < 1e-15);
        }
        // Posterior-mean rule: E[theta | x] = 0.2 or 0.8.
        let mean_rule = DecisionRule::new(vec![("0".into(), Action::Real(0.2)), ("1".into(), Action::Real(0.8))]);
        let r0 = risk(&model, &insts, &mean_rule, &quad(), 0.0).unwrap();
        assert!((r0 - (0.8 * 0.04 + 0.2 * 0.64)).abs() < 1e-15);
        assert_eq!(risk(&model, &insts, &rule, &quad(), 0.5), Err(Error::UnknownTheta(0.5)));
    }

    #[test]
    fn bayes_risk_matches_hand_table() {
        let (model, insts) = toy(0.8);
        let rule = DecisionRule::new(vec![("0".into(), Action::Real(0.0)), ("1".into(), Action::Real(1.0))]);
        let rep = bayes_risk(&model, &insts, &rule, &quad(), RiskMode::Exact).unwrap();
        assert!((rep.per_theta[0].1 - 0.2).abs() < 1e-15 && (rep.per_theta[1].1 - 0.2).abs() < 1e-15);
        assert!((rep.bayes - 0.2).abs() < 1e-15);
        assert_eq!(rep.method, RiskMethod::ExactEnumeration);
    }

    #[test]
    fn monte_carlo_agrees_with_exact() {
        let (model, insts) = toy(0.7);
        let rule = DecisionRule::new(vec![("0".into(), Action::Real(0.1)), ("1".into(), Action::Real(0.9))]);
        let exact = bayes_risk(&model, &insts, &rule, &quad(), RiskMode::Exact).unwrap();
        let mc = bayes_risk(&model, &insts, &rule, &quad(), RiskMode::MonteCarlo { samples: 10_000, seed: 9 }).unwrap();
        for i in 0..2 {
            assert!((exact.per_theta[i].1 - mc.per_theta[i].1).abs() <= 4.0 * mc.stderr[i]);
        }
    }

    #[test]
    fn bayes_solution_examples() {
        let (model, insts) = toy(0.8);
        let actions = [Action::Real(1.0), Action::Real(0.0), Action::Real(0.5)];
        let sol = bayes_solution_enumerate(&model, &insts, &quad(), &actions).unwrap();
        assert_eq!(sol.actions(), &[Action::Real(0.0), Action::Real(1.0)]);
        let single = bayes_solution_enumerate(&model, &insts, &quad(), &[Action::Real(0.4)]).unwrap();
        assert_eq!(single, DecisionRule::constant(&labels(), Action::Real(0.4)));
        let sol_risk = bayes_risk(&model, &insts, &sol, &quad(), RiskMode::Exact).unwrap().bayes;
        let class = enumerate_rules(&labels(), &actions).unwrap();
        assert_eq!(class.len(), 9);
        let best = class
            .iter()
            .map(|r| bayes_risk(&model, &insts, r, &quad(), RiskMode::Exact).unwrap().bayes)
            .fold(f64::INFINITY, f64::min);
        assert!((sol_risk - best).abs() < 1e-15);
        let post = posterior_solution(&model, &insts, &quad(), &actions).unwrap();
        assert_eq!(post, sol);
    }

    #[test]
    fn fine_grid_solution_is_near_posterior_mean() {
        let (model, insts) = toy(0.8);
        let actions: Vec<Action> = (0..=100).map(|k| Action::Real(k as f64 / 100.0)).collect();
        let sol = bayes_solution_enumerate(&model, &insts, &quad(), &actions).unwrap();
        for (a, mean) in sol.actions().iter().zip([0.2, 0.8]) {
            let Action::Real(y) = a else { panic!() };
            assert!((y - mean).abs() <= 0.01);
        }
    }

    #[test]
    fn admissibility_and_minimax() {
        let (model, insts) = toy(0.8);
        let actions = [Action::Real(0.0), Action::Real(0.5), Action::Real(1.0)];
        let class = enumerate_rules(&labels(), &actions).unwrap();
        let bayes = bayes_solution_enumerate(&model, &insts, &quad(), &actions).unwrap();
        let adm = admissibility_check(&model, &insts, &quad(), &bayes, &class).unwrap();
        assert!(adm.admissible);
        let solo = admissibility_check(&model, &insts, &quad(), &bayes, std::slice::from_ref(&bayes)).unwrap();
        assert!(solo.admissible);

        let flipped = DecisionRule::new(vec![("0".into(), Action::Real(1.0)), ("1".into(), Action::Real(0.0))]);
        let adm = admissibility_check(&model, &insts, &quad(), &flipped, &class).unwrap();
        assert!(!adm.admissible);
        let w = adm.dominated_by.unwrap();
        assert!(dominates(&adm.dominating_risks.unwrap(), &adm.risks));
        assert!(w < class.len());

        let mm = minimax_check(&model, &insts, &quad(), &class).unwrap();
        let i = class.iter().position(|r| r == &bayes).unwrap();
        assert!(mm.minimax.contains(&i));
        let one = minimax_check(&model, &insts, &quad(), std::slice::from_ref(&flipped)).unwrap();
        assert_eq!(one.minimax, vec![0]);
    }

    #[test]
    fn budgets_are_enforced() {
        let labels: Vec<String> = (0..20).map(|i| i.to_string()).collect();
        assert!(matches!(enumerate_rules(&labels, &[Action::Real(0.0), Action::Real(1.0)]), Err(Error::BudgetExceeded(_))));
    }

    #[test]
    fn loss_values() {
        let grid = [0.0, 1.0, 2.0];
        let lin = LossSpec::Linear { k0: 1.0, k1: 3.0 };
        assert_eq!(lin.eval(&grid, 2, &Action::Real(1.0)).unwrap(), 3.0);
        assert_eq!(lin.eval(&grid, 0, &Action::Real(1.0)).unwrap(), 1.0);
        let int = LossSpec::Interval { k0: 0.5, k1: 2.0 };
        assert_eq!(int.eval(&grid, 2, &Action::Interval(0.0, 1.0)).unwrap(), 2.5);
        assert_eq!(int.eval(&grid, 1, &Action::Interval(0.0, 1.0)).unwrap(), 0.5);
        let part = LossSpec::Partition { cells: vec![vec![0.0], vec![1.0, 2.0]], costs: vec![1.0, 2.0], conventional: false };
        assert_eq!(part.eval(&grid, 1, &Action::Index(1)).unwrap(), 2.0);
        assert_eq!(part.eval(&grid, 0, &Action::Index(1)).unwrap(), 0.0);
        assert!(LossSpec::ZeroOne { eps: 0.0 }.validate(&grid).is_err());
    }
}
