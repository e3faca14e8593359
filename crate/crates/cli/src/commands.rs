//! `qbayes run` dispatch.

use clap::ValueEnum;
use qbayes::asymptotics::{
    cesaro_fixed_point_residual, channel_spectrum, convergence_fit, nonconvergence_witness, purity_moment_tail,
    random_sequence_contraction, run_chain,
};
use qbayes::decision::{bayes_solution_enumerate, dominates, enumerate_rules, posterior_solution, Likelihood, EQ_SLACK};
use qbayes::inference::{
    cell_masses, credible_interval, hqpd_set, hypothesis_test, point_estimate, posterior_parameter_distribution,
};
use qbayes::posterior::{posterior_family, properness_check, sample_trajectory};
use qbayes::rng::derive_seed;
use qbayes::{compose, Action, DecisionRule, Driving, EstimatorSpec, KrausInstrument, LossSpec, PosteriorDist};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{Resolved, RunParams};
use crate::error::CliError;
use crate::output::{Artifacts, Cell, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Simulate,
    Posterior,
    Estimate,
    Credible,
    Hqpd,
    Test,
    Risk,
    BayesSolve,
    Spectrum,
    Converge,
    Chain,
    Contraction,
    Witness,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Posterior => "posterior",
            Command::Estimate => "estimate",
            Command::Credible => "credible",
            Command::Hqpd => "hqpd",
            Command::Test => "test",
            Command::Risk => "risk",
            Command::BayesSolve => "bayes-solve",
            Command::Spectrum => "spectrum",
            Command::Converge => "converge",
            Command::Chain => "chain",
            Command::Contraction => "contraction",
            Command::Witness => "witness",
        }
    }

    pub fn is_stochastic(self) -> bool {
        matches!(self, Command::Simulate | Command::Chain | Command::Contraction)
    }
}

/// Flag values that take precedence over the config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub steps: Option<usize>,
    pub alpha: Option<f64>,
    pub with_states: bool,
}

struct Ctx<'a> {
    res: &'a Resolved,
    run: &'a RunParams,
    cmd: Command,
    seed: Option<u64>,
    steps: Option<usize>,
    alpha: Option<f64>,
    with_states: bool,
}

impl Ctx<'_> {
    fn need<'b, T>(&self, v: &'b Option<T>, name: &str) -> Result<&'b T, CliError> {
        v.as_ref().ok_or_else(|| CliError::missing(name, self.cmd.name()))
    }

    fn seed(&self) -> Result<u64, CliError> {
        self.seed.ok_or_else(|| CliError::Usage(format!("{} is stochastic and needs --seed or run.seed", self.cmd.name())))
    }

    fn steps(&self) -> Result<usize, CliError> {
        self.steps.ok_or_else(|| CliError::missing("steps", self.cmd.name()))
    }

    fn alpha(&self) -> Result<f64, CliError> {
        self.alpha.ok_or_else(|| CliError::missing("alpha", self.cmd.name()))
    }

    fn prior(&self) -> Result<qbayes::DensityMatrix, CliError> {
        self.res.state(self.need(&self.run.prior, "prior")?)
    }

    /// `run.instruments`, or `run.instrument` as a one-step sequence.
    fn sequence(&self) -> Result<Vec<KrausInstrument>, CliError> {
        let names: Vec<String> = match (&self.run.instruments, &self.run.instrument) {
            (Some(v), _) if !v.is_empty() => v.clone(),
            (_, Some(one)) => vec![one.clone()],
            _ => return Err(CliError::missing("instruments", self.cmd.name())),
        };
        names.iter().map(|n| self.res.instrument(n)).collect()
    }

    fn single(&self) -> Result<KrausInstrument, CliError> {
        let name = self.run.channel.as_ref().or(self.run.instrument.as_ref());
        self.res.instrument(name.ok_or_else(|| CliError::missing("channel", self.cmd.name()))?)
    }

    fn loss(&self) -> Result<&LossSpec, CliError> {
        self.need(&self.run.loss, "loss")
    }

    fn actions(&self) -> Result<Option<Vec<Action>>, CliError> {
        let loss = self.loss()?;
        self.run.actions.as_ref().map(|v| v.iter().map(|a| a.to_action(loss)).collect()).transpose()
    }

    /// Parameter distribution after the observation, or the prior one
    /// without an observation.
    fn param_dist(&self) -> Result<PosteriorDist, CliError> {
        let model = self.res.model(self.need(&self.run.model, "model")?)?;
        let state = match &self.run.observation {
            Some(obs) => {
                let composite = compose(&self.sequence()?)?;
                qbayes::posterior::posterior_state(&composite, model.prior_state(), obs)?
            }
            None => model.prior_state().clone(),
        };
        Ok(posterior_parameter_distribution(&model, &state)?)
    }
}

/// Runs one command and returns its `results` object.
pub fn run(cmd: Command, res: &Resolved, ov: &Overrides, art: &mut Artifacts) -> Result<(Option<u64>, Value), CliError> {
    let run = res.run();
    let ctx = Ctx {
        res,
        run,
        cmd,
        seed: ov.seed.or(run.seed),
        steps: ov.steps.or(run.steps),
        alpha: ov.alpha.or(run.alpha),
        with_states: ov.with_states,
    };
    if cmd.is_stochastic() {
        ctx.seed()?;
    }
    let results = match cmd {
        Command::Simulate => simulate(&ctx, art)?,
        Command::Posterior => posterior(&ctx, art)?,
        Command::Estimate => estimate(&ctx, art)?,
        Command::Credible => credible(&ctx, art)?,
        Command::Hqpd => hqpd(&ctx, art)?,
        Command::Test => test(&ctx, art)?,
        Command::Risk => risk(&ctx, art)?,
        Command::BayesSolve => bayes_solve(&ctx, art)?,
        Command::Spectrum => spectrum(&ctx, art)?,
        Command::Converge => converge(&ctx, art)?,
        Command::Chain => chain(&ctx, art)?,
        Command::Contraction => contraction(&ctx, art)?,
        Command::Witness => witness(&ctx, art)?,
    };
    Ok((if cmd.is_stochastic() { ctx.seed } else { None }, results))
}

fn simulate(ctx: &Ctx, art: &mut Artifacts) -> Result<Value, CliError> {
    let prior = ctx.prior()?;
    let insts = ctx.sequence()?;
    let n = ctx.steps.unwrap_or(insts.len());
    let seq: Vec<KrausInstrument> = (0..n).map(|i| insts[i % insts.len()].clone()).collect();
    let t = sample_trajectory(&seq, &prior, ctx.seed()?)?;
    let mut table = Table::new(["step", "outcome", "prob", "purity"]);
    for (i, ((x, p), s)) in t.outcomes.iter().zip(&t.probs).zip(&t.states).enumerate() {
        table.push(vec![(i + 1).into(), x.as_str().into(), (*p).into(), s.purity().into()]);
    }
    art.table("simulate", &table)?;
    if ctx.with_states {
        art.json("simulate.states", &t.states)?;
    }
    Ok(json!({ "steps": n, "logprob": t.logprob }))
}

fn posterior(ctx: &Ctx, art: &mut Artifacts) -> Result<Value, CliError> {
    let prior = ctx.prior()?;
    let obs = ctx.need(&ctx.run.observation, "observation")?;
    let composite = compose(&ctx.sequence()?)?;
    let family = posterior_family(&composite, &prior)?;
    let prob = family.dist().prob(obs)?;
    let state = qbayes::posterior::posterior_state(&composite, &prior, obs)?;
    let proper = properness_check(&family)?;
    let residuals = family.residuals()?;
    let record = json!({
        "observation": obs,
        "probability": prob,
        "posterior_state": state,
        "purity": state.purity(),
        "proper": proper.proper,
        "residuals": residuals,
    });
    art.json("posterior", &record)?;
    Ok(json!({ "probability": prob, "proper": proper.proper }))
}

fn inference_record(art: &mut Artifacts, stem: &str, estimator: &str, value: Value, auxiliary: Value) -> Result<Value, CliError> {
    let record = json!({ "estimator": estimator, "value": value, "auxiliary": auxiliary });
    art.json(stem, &record)?;
    Ok(json!({ "estimator": estimator, "value": value }))
}

fn estimate(ctx: &Ctx, art: &mut Artifacts) -> Result<Value, CliError> {
    let dist = ctx.param_dist()?;
    let spec = ctx.run.estimator.clone().unwrap_or(EstimatorSpec::WeightedMean { weights: None });
    let value = point_estimate(&dist, &spec)?;
    inference_record(art, "estimate", spec.name(), json!(value), json!({ "grid": dist.grid(), "posterior_mass": dist.mass() }))
}

fn credible(ctx: &Ctx, art: &mut Artifacts) -> Result<Value, CliError> {
    let dist = ctx.param_dist()?;
    let alpha = ctx.alpha()?;
    let ci = credible_interval(&dist, alpha)?;
    inference_record(art, "credible", "credible_interval", json!([ci.lo, ci.hi]), json!({ "alpha": alpha, "coverage": ci.mass }))
}

fn hqpd(ctx: &Ctx, art: &mut Artifacts) -> Result<Value, CliError> {
    let dist = ctx.param_dist()?;
    let alpha = ctx.alpha()?;
    let h = hqpd_set(&dist, alpha)?;
    inference_record(
        art,
        "hqpd",
        "hqpd",
        json!(h.values),
        json!({ "alpha": alpha, "coverage": h.mass, "threshold": h.threshold }),
    )
}

fn test(ctx: &Ctx, art: &mut Artifacts) -> Result<Value, CliError> {
    let dist = ctx.param_dist()?;
    let partition = ctx.need(&ctx.run.partition, "partition")?;
    let costs = ctx.need(&ctx.run.costs, "costs")?;
    let rule = ctx.run.test_rule.unwrap_or_default();
    let masses = cell_masses(&dist, partition)?;
    let chosen = hypothesis_test(&dist, partition, costs, rule)?;
    inference_record(art, "test", "test", json!(chosen), json!({ "cell_mass": masses, "rule": rule }))
}

fn prior_average(weights: &[f64], risks: &[f64]) -> f64 {
    weights.iter().zip(risks).map(|(w, r)| w * r).sum()
}

fn pairs(rule: &DecisionRule) -> Vec<(String, Action)> {
    rule.labels().iter().cloned().zip(rule.actions().iter().copied()).collect()
}

fn differing(a: &DecisionRule, b: &DecisionRule) -> Vec<String> {
    a.labels().iter().zip(a.actions().iter().zip(b.actions())).filter(|(_, (x, y))| x != y).map(|(l, _)| l.clone()).collect()
}

fn risk(ctx: &Ctx, art: &mut Artifacts) -> Result<Value, CliError> {
    let model = ctx.res.model(ctx.need(&ctx.run.model, "model")?)?;
    let insts = ctx.sequence()?;
    let loss = ctx.loss()?;
    loss.validate(model.grid())?;
    let lik = Likelihood::new(&model, &insts)?;
    let actions = ctx.actions()?;
    let class: Vec<DecisionRule> = match (&ctx.run.rules, &actions) {
        (Some(rules), _) => rules
            .iter()
            .map(|m| Ok(DecisionRule::new(m.iter().map(|(l, a)| Ok((l.clone(), a.to_action(loss)?))).collect::<Result<_, CliError>>()?)))
            .collect::<Result<_, CliError>>()?,
        (None, Some(actions)) => enumerate_rules(&lik.labels, actions)?,
        (None, None) => return Err(CliError::missing("actions", ctx.cmd.name())),
    };
    if class.is_empty() {
        return Err(CliError::Usage("empty rule class".into()));
    }
    let risks: Vec<Vec<f64>> = class.par_iter().map(|r| lik.rule_risks(loss, r)).collect::<qbayes::Result<_>>()?;

    let mut table = Table::new(["rule_id", "theta", "risk"]);
    for (id, r) in risks.iter().enumerate() {
        for (theta, v) in model.grid().iter().zip(r) {
            table.push(vec![id.into(), (*theta).into(), (*v).into()]);
        }
    }
    art.table("risk", &table)?;
    let mut rules = Table::new(["rule_id", "outcome", "action"]);
    for (id, rule) in class.iter().enumerate() {
        for (l, a) in rule.labels().iter().zip(rule.actions()) {
            rules.push(vec![id.into(), l.as_str().into(), Cell::Text(a.to_string())]);
        }
    }
    art.table("risk.rules", &rules)?;

    let sup: Vec<f64> = risks.iter().map(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect();
    let best_sup = sup.iter().copied().fold(f64::INFINITY, f64::min);
    let minimax_set: Vec<usize> = (0..class.len()).filter(|&i| sup[i] <= best_sup + EQ_SLACK).collect();
    let admissible: Vec<usize> = (0..class.len()).filter(|&i| !risks.iter().any(|other| dominates(other, &risks[i]))).collect();
    let mut results = json!({
        "rules": class.len(),
        "sup_risk": best_sup,
        "sup_risks": sup,
        "minimax_set": minimax_set,
        "admissible": admissible,
    });
    if let Ok(weights) = model.prior_weights() {
        let bayes: Vec<f64> = risks.iter().map(|r| prior_average(weights, r)).collect();
        let best = bayes.iter().copied().fold(f64::INFINITY, f64::min);
        results["bayes_risk"] = json!(best);
        results["bayes_risks"] = json!(bayes);
        results["bayes_set"] = json!((0..class.len()).filter(|&i| bayes[i] <= best + EQ_SLACK).collect::<Vec<_>>());
        if let Some(actions) = &actions {
            let b = bayes_solution_enumerate(&model, &insts, loss, actions)?;
            let p = posterior_solution(&model, &insts, loss, actions)?;
            results["bayes_solution"] = json!(pairs(&b));
            results["posterior_solution"] = json!(pairs(&p));
            results["solutions_differ_on"] = json!(differing(&b, &p));
        }
    }
    Ok(results)
}

fn bayes_solve(ctx: &Ctx, art: &mut Artifacts) -> Result<Value, CliError> {
    let model = ctx.res.model(ctx.need(&ctx.run.model, "model")?)?;
    let insts = ctx.sequence()?;
    let loss = ctx.loss()?;
    let actions = ctx.actions()?.ok_or_else(|| CliError::missing("actions", ctx.cmd.name()))?;
    let b = bayes_solution_enumerate(&model, &insts, loss, &actions)?;
    let p = posterior_solution(&model, &insts, loss, &actions)?;
    let weights = model.prior_weights()?;
    let lik = Likelihood::new(&model, &insts)?;
    let rb = prior_average(weights, &lik.rule_risks(loss, &b)?);
    let rp = prior_average(weights, &lik.rule_risks(loss, &p)?);
    let differ = differing(&b, &p);
    let record = json!({
        "bayes_solution": pairs(&b),
        "posterior_solution": pairs(&p),
        "solutions_differ_on": differ,
        "bayes_risk": rb,
        "posterior_solution_bayes_risk": rp,
    });
    art.json("bayes-solve", &record)?;
    Ok(json!({ "bayes_risk": rb, "posterior_solution_bayes_risk": rp, "solutions_differ_on": differ }))
}

fn spectrum(ctx: &Ctx, art: &mut Artifacts) -> Result<Value, CliError> {
    let ch = ctx.single()?;
    let report = channel_spectrum(&ch.all_kraus())?;
    let mut record = serde_json::to_value(&report)?;
    record["spectral_rate"] = json!(report.spectral_rate());
    art.json("spectrum", &record)?;
    Ok(json!({ "spectral_rate": report.spectral_rate(), "gap": report.gap, "peripheral_count": report.peripheral_count }))
}

fn converge(ctx: &Ctx, art: &mut Artifacts) -> Result<Value, CliError> {
    let ch = ctx.single()?;
    let rho = ctx.prior()?;
    let [lo, hi] = ctx.run.n_range.unwrap_or([5, 40]);
    let fit = convergence_fit(&ch.all_kraus(), &rho, lo, hi)?;
    let mut table = Table::new(["step", "distance"]);
    for &(n, d) in &fit.distances {
        table.push(vec![n.into(), d.into()]);
    }
    art.table("converge", &table)?;
    Ok(json!({
        "alpha_hat": fit.fit.alpha,
        "c": fit.fit.c,
        "spectral_rate": fit.spectral_rate,
        "ratio": fit.fit.alpha / fit.spectral_rate,
    }))
}

fn chain(ctx: &Ctx, art: &mut Artifacts) -> Result<Value, CliError> {
    let inst = ctx.single().or_else(|_| ctx.sequence().map(|mut v| v.swap_remove(0)))?;
    let rho = ctx.prior()?;
    let n = ctx.steps()?;
    let seed = ctx.seed()?;
    let moments = ctx.run.moments.clone().unwrap_or_else(|| vec![2]);
    let replicas = ctx.run.replicas.unwrap_or(1).max(1);
    let runs = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let s = if r == 0 { seed } else { derive_seed(seed, r as u64) };
            let run = run_chain(&inst, &rho, n, s, &moments)?;
            let residuals = cesaro_fixed_point_residual(&run, &inst)?;
            Ok((run, residuals))
        })
        .collect::<qbayes::Result<Vec<_>>>()?;
    let mut headers = vec!["replica".to_string(), "step".into(), "residual".into()];
    headers.extend(moments.iter().map(|m| format!("moment_{m}")));
    let mut table = Table::new(headers);
    let mut finals = Vec::with_capacity(replicas);
    let mut tails = Vec::with_capacity(replicas);
    for (r, (run, residuals)) in runs.iter().enumerate() {
        for (k, (&step, &res)) in run.checkpoints.iter().zip(residuals).enumerate() {
            let mut row = vec![r.into(), step.into(), res.into()];
            row.extend(run.moments.iter().map(|(_, v)| Cell::Float(v[k])));
            table.push(row);
        }
        finals.push(*residuals.last().expect("nonempty"));
        if let Some(&m) = moments.first() {
            tails.push(purity_moment_tail(run, m, run.checkpoints.len().min(5))?);
        }
    }
    art.table("chain", &table)?;
    Ok(json!({ "replicas": replicas, "final_residual": finals, "moment_tail": tails }))
}

fn contraction(ctx: &Ctx, art: &mut Artifacts) -> Result<Value, CliError> {
    let names = ctx.need(&ctx.run.channels, "channels")?;
    let channels: Vec<KrausInstrument> = names.iter().map(|n| ctx.res.instrument(n)).collect::<Result<_, _>>()?;
    let rho = ctx.prior()?;
    let sigma = ctx.res.state(ctx.need(&ctx.run.sigma, "sigma")?)?;
    let driving =
        ctx.run.driving.clone().unwrap_or_else(|| Driving::Iid { weights: vec![1.0 / channels.len() as f64; channels.len()] });
    let run = random_sequence_contraction(&channels, &driving, &rho, &sigma, ctx.steps()?, ctx.seed()?)?;
    let mut table = Table::new(["step", "channel", "distance"]);
    for (n, d) in run.distances.iter().enumerate() {
        let ch = if n == 0 { Cell::Empty } else { Cell::Text(names[run.choices[n - 1]].clone()) };
        table.push(vec![n.into(), ch, (*d).into()]);
    }
    art.table("contraction", &table)?;
    Ok(json!({ "alpha_hat": run.fit.as_ref().map(|f| f.alpha), "certificate_window": run.certificate_window }))
}

fn witness(ctx: &Ctx, art: &mut Artifacts) -> Result<Value, CliError> {
    let u = ctx.need(&ctx.run.unitary, "unitary")?;
    let rho = ctx.prior()?;
    let n = ctx.steps()?;
    let threshold = ctx.run.threshold.unwrap_or(0.1);
    let w = nonconvergence_witness(u, &rho, n, threshold)?;
    let record = json!({ "steps": n, "threshold": threshold, "witnessed": w.witnessed, "min_step_distance": w.min_step_distance });
    art.json("witness", &record)?;
    Ok(record)
}
