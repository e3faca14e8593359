//! Finite-dimensional quantum Bayesian inference.
//!
//! States, observables and CP instruments on `C^d`, the quantum Bayes rule
//! for posterior states, classical inference on parameter grids, decision
//! rules with risk analysis, and the long-run behaviour of repeated
//! measurement chains.

pub mod asymptotics;
pub mod blocks;
pub mod decision;
pub mod error;
pub mod inference;
pub mod instrument;
pub mod matcore;
pub mod measure;
pub mod posterior;
pub mod random;
pub mod rng;

pub use asymptotics::{ChainRun, ContractionRun, ConvergenceFit, Driving, SpectrumReport};
pub use blocks::{InstrumentBlock, ModelBlock, PovmBlock};
pub use decision::{Action, DecisionRule, LossSpec, RiskMethod, RiskMode, RiskReport};
pub use error::{Error, Result};
pub use inference::{EstimatorSpec, ParamModel, PosteriorDist, TestRule};
pub use instrument::{compose, dilate, IndirectMeasurement, KrausInstrument};
pub use matcore::{CMatrix, SuperopMatrix, Tolerances, C64};
pub use measure::{Check, DensityMatrix, OutcomeDistribution, OutcomeSpace, Povm};
pub use posterior::{PosteriorFamily, Trajectory};
