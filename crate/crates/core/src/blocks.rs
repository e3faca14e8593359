//! File blocks for observables, instruments and models.
//!
//! Blocks deserialize without validation so that every invariant can be
//! reported with its residual; `build` then constructs the checked type.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{grid_index, ParamModel};
use crate::instrument::KrausInstrument;
use crate::matcore::{CMatrix, Tolerances};
use crate::measure::{Check, DensityMatrix, OutcomeSpace, Povm};

fn lookup<'a, T>(map: &'a BTreeMap<String, T>, labels: &[String], what: &str) -> Result<Vec<&'a T>> {
    if map.len() != labels.len() {
        let extra = map.keys().find(|k| !labels.contains(k));
        if let Some(k) = extra {
            return Err(Error::UnknownLabel(k.clone()));
        }
    }
    labels
        .iter()
        .map(|l| map.get(l).ok_or_else(|| Error::InvalidOutcomeSpace(format!("no {what} for label {l:?}"))))
        .collect()
}

/// `{ "labels": [...], "effects": { label: matrix }, "embedding": { label: real }? }`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PovmBlock {
    pub labels: Vec<String>,
    pub effects: BTreeMap<String, CMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<BTreeMap<String, f64>>,
}

impl PovmBlock {
    pub fn from_povm(povm: &Povm) -> Self {
        let labels = povm.space().labels().to_vec();
        let effects = labels.iter().cloned().zip(povm.effects().iter().cloned()).collect();
        let embedding = povm.space().embedding().map(|e| labels.iter().cloned().zip(e.iter().copied()).collect());
        PovmBlock { labels, effects, embedding }
    }

    fn parts(&self) -> Result<(OutcomeSpace, Vec<CMatrix>)> {
        let mut space = OutcomeSpace::new(self.labels.iter().cloned())?;
        if let Some(e) = &self.embedding {
            space = space.with_embedding(lookup(e, &self.labels, "embedding")?.into_iter().copied().collect())?;
        }
        let effects = lookup(&self.effects, &self.labels, "effect")?.into_iter().cloned().collect();
        Ok((space, effects))
    }

    pub fn checks(&self, tol: &Tolerances) -> Result<Vec<Check>> {
        let (space, effects) = self.parts()?;
        Povm::checks(&space, &effects, tol)
    }

    pub fn build(&self, tol: &Tolerances) -> Result<Povm> {
        let (space, effects) = self.parts()?;
        Povm::with_tolerances(space, effects, tol)
    }
}

/// `{ "dim_in": d, "dim_out": d, "labels": [...], "kraus": { label: [matrix, ...] } }`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstrumentBlock {
    pub dim_in: usize,
    pub dim_out: usize,
    pub labels: Vec<String>,
    pub kraus: BTreeMap<String, Vec<CMatrix>>,
}

impl InstrumentBlock {
    pub fn from_instrument(inst: &KrausInstrument) -> Self {
        let labels = inst.space().labels().to_vec();
        let kraus = labels.iter().cloned().zip(inst.kraus().iter().cloned()).collect();
        InstrumentBlock { dim_in: inst.dim_in(), dim_out: inst.dim_out(), labels, kraus }
    }

    fn parts(&self) -> Result<(OutcomeSpace, Vec<Vec<CMatrix>>)> {
        let space = OutcomeSpace::new(self.labels.iter().cloned())?;
        let kraus: Vec<Vec<CMatrix>> = lookup(&self.kraus, &self.labels, "Kraus list")?.into_iter().cloned().collect();
        for k in kraus.iter().flatten() {
            if k.ncols() != self.dim_in {
                return Err(Error::DimensionMismatch { expected: self.dim_in, found: k.ncols() });
            }
            if k.nrows() != self.dim_out {
                return Err(Error::DimensionMismatch { expected: self.dim_out, found: k.nrows() });
            }
        }
        Ok((space, kraus))
    }

    pub fn checks(&self, tol: &Tolerances) -> Result<Vec<Check>> {
        let (space, kraus) = self.parts()?;
        KrausInstrument::checks(&space, &kraus, tol)
    }

    pub fn build(&self, tol: &Tolerances) -> Result<KrausInstrument> {
        let (space, kraus) = self.parts()?;
        KrausInstrument::with_tolerances(space, kraus, tol)
    }
}

/// `{ "grid": [...], "param_observable": povm-block, "prior_state": matrix,
/// "states_by_theta": {...}?, "prior_weights": [...]? }`
///
/// Keys of `states_by_theta` are observable labels or grid values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub grid: Vec<f64>,
    pub param_observable: PovmBlock,
    pub prior_state: CMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states_by_theta: Option<BTreeMap<String, CMatrix>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior_weights: Option<Vec<f64>>,
}

impl ModelBlock {
    fn ordered_states(&self) -> Result<Option<Vec<(String, &CMatrix)>>> {
        let Some(map) = &self.states_by_theta else {
            return Ok(None);
        };
        let mut slots: Vec<Option<(String, &CMatrix)>> = vec![None; self.grid.len()];
        for (key, m) in map {
            let i = match self.param_observable.labels.iter().position(|l| l == key) {
                Some(i) => i,
                None => key
                    .parse::<f64>()
                    .ok()
                    .and_then(|t| grid_index(&self.grid, t))
                    .ok_or_else(|| Error::InvalidModel(format!("state key {key:?} is neither a label nor a grid value")))?,
            };
            if i >= slots.len() || slots[i].is_some() {
                return Err(Error::InvalidModel(format!("state key {key:?} is out of range or repeated")));
            }
            slots[i] = Some((key.clone(), m));
        }
        slots
            .into_iter()
            .enumerate()
            .map(|(i, s)| s.ok_or_else(|| Error::InvalidModel(format!("no state for grid value {}", self.grid[i]))))
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    /// Per-component checks, prefixed with the component name.
    pub fn checks(&self, tol: &Tolerances) -> Result<Vec<Check>> {
        let mut out = Vec::new();
        for c in self.param_observable.checks(tol)? {
            out.push(Check { check: format!("param_observable.{}", c.check), ..c });
        }
        for c in DensityMatrix::checks(&self.prior_state, tol)? {
            out.push(Check { check: format!("prior_state.{}", c.check), ..c });
        }
        if let Some(states) = self.ordered_states()? {
            for (key, m) in states {
                for c in DensityMatrix::checks(m, tol)? {
                    out.push(Check { check: format!("states_by_theta[{key}].{}", c.check), ..c });
                }
            }
        }
        if let Some(w) = &self.prior_weights {
            let residual = (w.iter().sum::<f64>() - 1.0).abs();
            let negative = w.iter().copied().fold(0.0f64, |acc, x| acc.max(-x));
            out.push(Check { check: "prior_weights.sum".into(), residual, tolerance: tol.norm, pass: residual <= tol.norm });
            out.push(Check { check: "prior_weights.nonnegative".into(), residual: negative, tolerance: 0.0, pass: negative == 0.0 });
        }
        Ok(out)
    }

    pub fn build(&self, tol: &Tolerances) -> Result<ParamModel> {
        let mut povm_block = self.param_observable.clone();
        if povm_block.embedding.is_none() {
            povm_block.embedding = Some(povm_block.labels.iter().cloned().zip(self.grid.iter().copied()).collect());
        }
        if povm_block.labels.len() != self.grid.len() {
            return Err(Error::InvalidModel(format!(
                "observable has {} outcomes for {} grid points",
                povm_block.labels.len(),
                self.grid.len()
            )));
        }
        let povm = povm_block.build(tol)?;
        let prior = DensityMatrix::with_tolerances(self.prior_state.clone(), tol)?;
        let states = self
            .ordered_states()?
            .map(|v| v.into_iter().map(|(_, m)| DensityMatrix::with_tolerances(m.clone(), tol)).collect::<Result<Vec<_>>>())
            .transpose()?;
        ParamModel::new(self.grid.clone(), povm, prior, states, self.prior_weights.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn povm_block_roundtrip() {
        let text = r#"{"labels":["0","1"],"effects":{"0":[[[1,0],[0,0]],[[0,0],[0,0]]],"1":[[[0,0],[0,0]],[[0,0],[1,0]]]}}"#;
        let block: PovmBlock = serde_json::from_str(text).unwrap();
        let povm = block.build(&Tolerances::default()).unwrap();
        assert_eq!(PovmBlock::from_povm(&povm), block);
        assert!(block.checks(&Tolerances::default()).unwrap().iter().all(|c| c.pass));
    }

    #[test]
    fn incomplete_instrument_reports_residual() {
        let s = 0.9f64.sqrt();
        let text = format!(r#"{{"dim_in":2,"dim_out":2,"labels":["a"],"kraus":{{"a":[[[[{s},0],[0,0]],[[0,0],[{s},0]]]]}}}}"#);
        let block: InstrumentBlock = serde_json::from_str(&text).unwrap();
        let checks = block.checks(&Tolerances::default()).unwrap();
        let c = checks.iter().find(|c| c.check == "completeness").unwrap();
        assert!(!c.pass);
        assert!((c.residual - 0.1).abs() < 1e-12);
        assert!(block.build(&Tolerances::default()).is_err());
    }

    #[test]
    fn model_block_accepts_label_or_value_keys() {
        let text = r#"{
            "grid": [0.4, 0.8],
            "param_observable": {"labels": ["lo", "hi"], "effects": {
                "lo": [[[1,0],[0,0]],[[0,0],[0,0]]], "hi": [[[0,0],[0,0]],[[0,0],[1,0]]]}},
            "prior_state": [[[0.5,0],[0,0]],[[0,0],[0.5,0]]],
            "states_by_theta": {"lo": [[[1,0],[0,0]],[[0,0],[0,0]]], "0.8": [[[0,0],[0,0]],[[0,0],[1,0]]]},
            "prior_weights": [0.5, 0.5]
        }"#;
        let block: ModelBlock = serde_json::from_str(text).unwrap();
        let model = block.build(&Tolerances::default()).unwrap();
        assert_eq!(model.param_observable().space().embedding(), Some(&[0.4, 0.8][..]));
        assert_eq!(model.states_by_theta().unwrap()[1], DensityMatrix::basis(2, 1).unwrap());
        assert_eq!(block.checks(&Tolerances::default()).unwrap().len(), 3 + 3 + 6 + 2);
    }
}
