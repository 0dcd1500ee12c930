//! Likelihood-tempered Bayesian causal inference.
//!
//! Tempered (generalized) posteriors for cross-sectional regression and
//! latent-factor panel models, learning-rate selection by a proper scoring
//! rule, and a matrix-completion baseline with wild-bootstrap intervals.
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`); the aliases at
//! the crate root fix the scalar to `f64`.

pub mod analytic;
pub mod baseline;
pub mod diagnostics;
pub mod effects;
pub mod error;
pub mod factor;
pub mod io;
pub mod linalg;
pub mod panel;
pub mod regression;
pub mod rng;
pub mod scalar;
pub mod scoring;
pub mod selection;
pub mod simgen;

pub use error::{Error, Result};
pub use scalar::Real;

pub use panel::{build_treatment_indicator, random_cell_mask, summarize, Cell, CellMask, TreatmentIndicator};

pub type Matrix = linalg::Matrix<f64>;
pub type PanelData = panel::PanelData<f64>;
pub type DrawStore = panel::DrawStore<f64>;
pub type PosteriorSummary = panel::PosteriorSummary<f64>;
pub type ScoreReport = scoring::ScoreReport<f64>;
pub type GaussianRiskParams = analytic::GaussianRiskParams<f64>;
pub type RegressionPriors = regression::RegressionPriors<f64>;
pub type RegressionFit = regression::RegressionFit<f64>;
pub type FactorPriors = factor::FactorPriors<f64>;
pub type FactorModel = factor::FactorModel<f64>;
pub type FactorFit = factor::FactorFit<f64>;
pub type PredictiveDraws = factor::PredictiveDraws<f64>;
pub type EffectDraws = effects::EffectDraws<f64>;
pub type AttCurve = effects::AttCurve<f64>;
pub type OmegaGrid = selection::OmegaGrid<f64>;
pub type SelectionResult = selection::SelectionResult<f64>;
pub type CrossSectionSim = simgen::CrossSectionSim<f64>;
pub type PanelSim = simgen::PanelSim<f64>;
pub type MCFit = baseline::MCFit<f64>;
pub type BootstrapIntervals = baseline::BootstrapIntervals<f64>;
