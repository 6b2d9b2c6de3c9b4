//! Device physics: pinch-off potential, channel charge, drift-diffusion
//! current, drift-region resistance and the electro-thermal bias solver.

mod bias;
mod params;
pub mod physics;

pub use bias::{on_resistance, solve_bias_point, RON_PROBE_VDS};
pub use params::{BiasSolution, DriftLaw, ModelParams, OperatingPoint, ParamInfo, PARAMS};
pub use physics::{
    channel_charge, drift_resistance, drift_resistance_linear, flat_band, intrinsic_drain_current,
    junction_temperature, max_drift_current, pinch_off_potential, slope_factor, thermal_voltage, ThermalVoltage,
};

use thiserror::Error;

use crate::numerics::NumericsError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("{what} solver failed: {source}")]
    Solver {
        what: &'static str,
        #[source]
        source: NumericsError,
    },
    #[error("channel charge has no solution at psi_p = {psi_p}, v_c = {v_c}")]
    NoChargeSolution { psi_p: f64, v_c: f64 },
    #[error("channel is off at vgs = {vgs} V")]
    ChannelOff { vgs: f64 },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("unknown parameter {0:?}")]
    UnknownParam(String),
}
