//! Charge-based compact model of SiC vertical power MOSFETs with a staged
//! parameter-extraction pipeline.
//!
//! The model stack, bottom up: [`numerics`] (bracketed roots, fixed points,
//! bounded simplex), [`model`] (device equations and the electro-thermal bias
//! solver), [`sweep`] (transfer/output/gm curves), [`dataset`] (pulsed I-V
//! measurements), [`extraction`] (staged fitting) and [`cli`].

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod card;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod extraction;
pub mod model;
pub mod numerics;
pub mod presets;
pub mod sweep;

pub use card::ModelCard;
pub use dataset::{MeasurementRecord, MeasurementSet, Region};
pub use extraction::{fit_all, FitReport, FitStageSpec};
pub use model::{BiasSolution, ModelError, ModelParams, OperatingPoint};
pub use numerics::SolverOptions;
pub use sweep::{Curve, SweepSpec};
