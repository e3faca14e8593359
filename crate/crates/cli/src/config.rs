//! Experiment documents: named objects plus run parameters.

use std::collections::BTreeMap;

use qbayes::asymptotics::{amplitude_damping, depolarizing, generalized_amplitude_damping};
use qbayes::{
    Action, CMatrix, Check, DensityMatrix, Driving, EstimatorSpec, InstrumentBlock, KrausInstrument, LossSpec,
    ModelBlock, OutcomeSpace, ParamModel, Povm, PovmBlock, TestRule, Tolerances,
};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub system: System,
    #[serde(default)]
    pub objects: Objects,
    #[serde(default)]
    pub run: RunParams,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct System {
    pub dim: usize,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Objects {
    #[serde(default)]
    pub states: BTreeMap<String, CMatrix>,
    #[serde(default)]
    pub povms: BTreeMap<String, PovmBlock>,
    #[serde(default)]
    pub instruments: BTreeMap<String, InstrumentSpec>,
    #[serde(default)]
    pub models: BTreeMap<String, ModelBlock>,
}

/// An explicit Kraus block or one of the standard qubit channels.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum InstrumentSpec {
    Block(InstrumentBlock),
    Named(NamedChannel),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NamedChannel {
    AmplitudeDamping { gamma: f64 },
    GeneralizedAmplitudeDamping { gamma: f64, p: f64 },
    Depolarizing { s: f64 },
    /// Lüders instrument of a named POVM.
    Luders { povm: String },
}

/// A real action, or an interval `[a, b]`. Partition losses read numbers as
/// cell indices.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
pub enum ActionSpec {
    Number(f64),
    Pair([f64; 2]),
}

/// Command parameters; every field can also be absent when the command does
/// not use it.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunParams {
    pub seed: Option<u64>,
    pub steps: Option<usize>,
    pub alpha: Option<f64>,
    /// Initial state name.
    pub prior: Option<String>,
    /// Second initial state for contraction runs.
    pub sigma: Option<String>,
    pub instruments: Option<Vec<String>>,
    pub instrument: Option<String>,
    pub channel: Option<String>,
    pub channels: Option<Vec<String>>,
    pub model: Option<String>,
    /// Composite outcome label, factors joined by `|`.
    pub observation: Option<String>,
    pub estimator: Option<EstimatorSpec>,
    pub loss: Option<LossSpec>,
    pub actions: Option<Vec<ActionSpec>>,
    /// Explicit rule class as outcome -> action maps; all rules into
    /// `actions` when absent.
    pub rules: Option<Vec<BTreeMap<String, ActionSpec>>>,
    pub partition: Option<Vec<Vec<f64>>>,
    pub costs: Option<Vec<f64>>,
    pub test_rule: Option<TestRule>,
    pub driving: Option<Driving>,
    pub n_range: Option<[usize; 2]>,
    pub replicas: Option<usize>,
    pub moments: Option<Vec<u32>>,
    pub unitary: Option<CMatrix>,
    pub threshold: Option<f64>,
}

/// Parses a document, reporting the position of the first syntax or schema
/// error.
pub fn parse(text: &str) -> Result<ExperimentConfig, CliError> {
    let cfg: ExperimentConfig =
        serde_json::from_str(text).map_err(|e| CliError::Parse { line: e.line(), column: e.column(), message: e.to_string() })?;
    if cfg.version != 1 {
        return Err(CliError::Usage(format!("unsupported config version {}", cfg.version)));
    }
    Ok(cfg)
}

/// Checks for one named object.
pub struct ObjectReport {
    pub object: String,
    pub checks: Vec<Check>,
    pub error: Option<qbayes::Error>,
}

impl ObjectReport {
    pub fn pass(&self) -> bool {
        self.error.is_none() && self.checks.iter().all(|c| c.pass)
    }
}

fn dim_check(what: &str, expected: usize, found: usize) -> Check {
    let residual = expected.abs_diff(found) as f64;
    Check { check: format!("{what}.dim"), residual, tolerance: 0.0, pass: residual == 0.0 }
}

fn report(object: String, checks: qbayes::Result<Vec<Check>>) -> ObjectReport {
    match checks {
        Ok(checks) => ObjectReport { object, checks, error: None },
        Err(e) => ObjectReport { object, checks: Vec::new(), error: Some(e) },
    }
}

impl NamedChannel {
    fn kraus(&self) -> Option<Vec<CMatrix>> {
        match *self {
            NamedChannel::AmplitudeDamping { gamma } => Some(amplitude_damping(gamma)),
            NamedChannel::GeneralizedAmplitudeDamping { gamma, p } => Some(generalized_amplitude_damping(gamma, p)),
            NamedChannel::Depolarizing { s } => Some(depolarizing(s)),
            NamedChannel::Luders { .. } => None,
        }
    }

    fn checks(&self, povms: &BTreeMap<String, PovmBlock>, tol: &Tolerances) -> qbayes::Result<Vec<Check>> {
        match self {
            NamedChannel::Luders { povm } => match povms.get(povm) {
                Some(b) => b.checks(tol),
                None => Err(qbayes::Error::InvalidArgument(format!("unknown POVM {povm:?}"))),
            },
            NamedChannel::AmplitudeDamping { gamma } | NamedChannel::GeneralizedAmplitudeDamping { gamma, .. }
                if !(0.0..=1.0).contains(gamma) =>
            {
                Err(qbayes::Error::InvalidArgument(format!("gamma {gamma} outside [0, 1]")))
            }
            NamedChannel::GeneralizedAmplitudeDamping { p, .. } if !(0.0..=1.0).contains(p) => {
                Err(qbayes::Error::InvalidArgument(format!("p {p} outside [0, 1]")))
            }
            NamedChannel::Depolarizing { s } if !(0.0..=1.0).contains(s) => {
                Err(qbayes::Error::InvalidArgument(format!("s {s} outside [0, 1]")))
            }
            _ => {
                let kraus = self.kraus().expect("standard channel");
                KrausInstrument::checks(&OutcomeSpace::new(["0"])?, &[kraus], tol)
            }
        }
    }
}

impl ExperimentConfig {
    /// Every invariant check of every object, in a stable order.
    pub fn validate(&self, tol: &Tolerances) -> Vec<ObjectReport> {
        let d = self.system.dim;
        let o = &self.objects;
        let mut out = Vec::new();
        for (name, m) in &o.states {
            let checks = DensityMatrix::checks(m, tol).map(|mut c| {
                c.insert(0, dim_check("state", d, m.nrows()));
                c
            });
            out.push(report(format!("states.{name}"), checks));
        }
        for (name, b) in &o.povms {
            out.push(report(format!("povms.{name}"), b.checks(tol)));
        }
        for (name, spec) in &o.instruments {
            let checks = match spec {
                InstrumentSpec::Block(b) => b.checks(tol).map(|mut c| {
                    c.insert(0, dim_check("instrument", d, b.dim_in));
                    c
                }),
                InstrumentSpec::Named(n) => n.checks(&o.povms, tol),
            };
            out.push(report(format!("instruments.{name}"), checks));
        }
        for (name, b) in &o.models {
            out.push(report(format!("models.{name}"), b.checks(tol)));
        }
        out.push(self.reference_report());
        out
    }

    fn reference_report(&self) -> ObjectReport {
        let r = &self.run;
        let o = &self.objects;
        let mut missing = Vec::new();
        let states = [&r.prior, &r.sigma];
        for s in states.into_iter().flatten() {
            if !o.states.contains_key(s) {
                missing.push(format!("state {s:?}"));
            }
        }
        let insts = r.instruments.iter().flatten().chain(&r.instrument).chain(&r.channel).chain(r.channels.iter().flatten());
        for i in insts {
            if !o.instruments.contains_key(i) {
                missing.push(format!("instrument {i:?}"));
            }
        }
        if let Some(m) = &r.model {
            if !o.models.contains_key(m) {
                missing.push(format!("model {m:?}"));
            }
        }
        let residual = missing.len() as f64;
        let check = Check { check: "references".into(), residual, tolerance: 0.0, pass: missing.is_empty() };
        let error = (!missing.is_empty()).then(|| qbayes::Error::InvalidArgument(format!("unresolved {}", missing.join(", "))));
        ObjectReport { object: "run".into(), checks: vec![check], error }
    }
}

/// Built objects, available once validation passes.
pub struct Resolved {
    pub config: ExperimentConfig,
    pub tol: Tolerances,
}

impl Resolved {
    pub fn new(config: ExperimentConfig, tol: Tolerances) -> Result<Self, CliError> {
        let failed: Vec<String> = config.validate(&tol).into_iter().filter(|r| !r.pass()).map(|r| r.object).collect();
        if !failed.is_empty() {
            return Err(CliError::Invalid(format!("objects failed validation: {}", failed.join(", "))));
        }
        Ok(Resolved { config, tol })
    }

    pub fn run(&self) -> &RunParams {
        &self.config.run
    }

    pub fn state(&self, name: &str) -> Result<DensityMatrix, CliError> {
        let m = self.config.objects.states.get(name).ok_or_else(|| CliError::unknown("state", name))?;
        Ok(DensityMatrix::with_tolerances(m.clone(), &self.tol)?)
    }

    pub fn povm(&self, name: &str) -> Result<Povm, CliError> {
        let b = self.config.objects.povms.get(name).ok_or_else(|| CliError::unknown("POVM", name))?;
        Ok(b.build(&self.tol)?)
    }

    pub fn instrument(&self, name: &str) -> Result<KrausInstrument, CliError> {
        match self.config.objects.instruments.get(name).ok_or_else(|| CliError::unknown("instrument", name))? {
            InstrumentSpec::Block(b) => Ok(b.build(&self.tol)?),
            InstrumentSpec::Named(NamedChannel::Luders { povm }) => Ok(KrausInstrument::luders(&self.povm(povm)?)?),
            InstrumentSpec::Named(n) => Ok(KrausInstrument::channel("0", n.kraus().expect("standard channel"))?),
        }
    }

    pub fn model(&self, name: &str) -> Result<ParamModel, CliError> {
        let b = self.config.objects.models.get(name).ok_or_else(|| CliError::unknown("model", name))?;
        Ok(b.build(&self.tol)?)
    }
}

impl ActionSpec {
    pub fn to_action(self, loss: &LossSpec) -> Result<Action, CliError> {
        match (self, loss) {
            (ActionSpec::Number(x), LossSpec::Partition { .. }) if x >= 0.0 && x.fract() == 0.0 => Ok(Action::Index(x as usize)),
            (ActionSpec::Number(x), LossSpec::Partition { .. }) => Err(CliError::Usage(format!("cell index {x} is not a nonnegative integer"))),
            (ActionSpec::Number(x), _) => Ok(Action::Real(x)),
            (ActionSpec::Pair([a, b]), _) => Ok(Action::Interval(a, b)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_error_has_position() {
        let err = parse("{\n  \"version\": 1,\n  \"system\": {\"dim\": 2}\n  \"run\": {}}").unwrap_err();
        match err {
            CliError::Parse { line, column, .. } => assert_eq!((line, column), (4, 3)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn named_channels_and_blocks_both_parse() {
        let text = r#"{"version": 1, "system": {"dim": 2}, "objects": {"instruments": {
            "ad": {"kind": "amplitude_damping", "gamma": 0.75},
            "id": {"dim_in": 2, "dim_out": 2, "labels": ["0"], "kraus": {"0": [[[[1,0],[0,0]],[[0,0],[1,0]]]]}}
        }}}"#;
        let cfg = parse(text).unwrap();
        let reports = cfg.validate(&Tolerances::default());
        assert!(reports.iter().all(|r| r.pass()));
        let res = Resolved::new(cfg, Tolerances::default()).unwrap();
        assert_eq!(res.instrument("ad").unwrap().total_kraus_count(), 2);
    }

    #[test]
    fn unresolved_reference_fails_validation() {
        let cfg = parse(r#"{"version": 1, "system": {"dim": 2}, "run": {"prior": "nope"}}"#).unwrap();
        let reports = cfg.validate(&Tolerances::default());
        assert!(!reports.last().unwrap().pass());
    }
}
