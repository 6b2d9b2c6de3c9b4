use std::fmt;
use std::str::FromStr;

use super::ModelError;

/// Which drift-resistance law is applied at high current.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DriftLaw {
    /// `R_lin / (1 − r^β)^(1/β)`: resistance rises and diverges as the current
    /// approaches the velocity-saturation limit.
    #[default]
    Saturating,
    /// `R_lin / (1 + r^β)^(1/β)`, kept for A/B comparison only; it makes the
    /// resistance fall with current.
    Printed,
}

impl fmt::Display for DriftLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DriftLaw::Saturating => "saturating",
            DriftLaw::Printed => "printed",
        })
    }
}

impl FromStr for DriftLaw {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "saturating" => Ok(DriftLaw::Saturating),
            "printed" => Ok(DriftLaw::Printed),
            other => Err(ModelError::InvalidParams(format!("unknown drift law {other:?}"))),
        }
    }
}

/// Name and unit of one scalar model parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamInfo {
    pub name: &'static str,
    pub unit: &'static str,
    pub description: &'static str,
}

macro_rules! model_params {
    ($( $(#[doc = $doc:literal])+ $name:ident : $unit:literal ),* $(,)?) => {
        /// Device and model parameters. SI units throughout, temperatures in
        /// kelvin. Immutable once handed to the solvers.
        #[derive(Debug, Clone, PartialEq)]
        pub struct ModelParams {
            $( $(#[doc = $doc])+ pub $name: f64, )*
            pub drift_law: DriftLaw,
        }

        /// Every scalar parameter, in canonical (card and export) order.
        pub const PARAMS: &[ParamInfo] = &[
            $( ParamInfo { name: stringify!($name), unit: $unit, description: concat!($($doc),+) }, )*
        ];

        impl ModelParams {
            /// Builds a parameter set by asking `value` for every scalar by name.
            pub fn from_lookup(drift_law: DriftLaw, mut value: impl FnMut(&'static str) -> f64) -> Self {
                Self {
                    $( $name: value(stringify!($name)), )*
                    drift_law,
                }
            }

            pub fn get(&self, name: &str) -> Option<f64> {
                match name {
                    $( stringify!($name) => Some(self.$name), )*
                    _ => None,
                }
            }

            pub fn set(&mut self, name: &str, value: f64) -> Result<(), ModelError> {
                match name {
                    $( stringify!($name) => { self.$name = value; Ok(()) } )*
                    _ => Err(ModelError::UnknownParam(name.to_string())),
                }
            }
        }
    };
}

model_params! {
    /// Flat-band voltage at the reference temperature.
    vfb0: "V",
    /// Linear temperature coefficient of the flat-band voltage (interface-trap occupancy).
    k_vfb: "V/K",
    /// Twice the bulk Fermi potential; threshold offset of the channel charge.
    phi0: "V",
    /// Interface-charge shape parameter.
    alpha: "1",
    /// Normalized body-effect coefficient.
    gamma_b: "1",
    /// Channel width.
    w: "m",
    /// Channel length.
    l: "m",
    /// Oxide capacitance per unit area.
    cox: "F/m^2",
    /// Channel mobility at t0.
    mu_ch0: "m^2/(V*s)",
    /// Channel mobility temperature exponent.
    p_mu: "1",
    /// Drift region length.
    l_d: "m",
    /// Drift region cross-section area.
    a_d: "m^2",
    /// Drift region doping density.
    n_d: "1/m^3",
    /// Drift mobility at t0.
    mu_d0: "m^2/(V*s)",
    /// Drift mobility temperature exponent.
    p_mud: "1",
    /// Carrier saturation velocity in the drift region.
    v_sat: "m/s",
    /// Drift-resistance transition exponent.
    beta_r: "1",
    /// Extrinsic source resistance.
    r_s: "Ohm",
    /// Extrinsic drain contact resistance.
    r_d_contact: "Ohm",
    /// Junction-to-case thermal resistance.
    r_th: "K/W",
    /// Reference temperature.
    t0: "K",
    /// Drift-current clamp margin below I_max.
    eps_clamp: "1",
}

impl ModelParams {
    pub fn unit(name: &str) -> Option<&'static str> {
        PARAMS.iter().find(|p| p.name == name).map(|p| p.unit)
    }

    /// Checks the physical invariants; returns the first violation.
    pub fn validate(&self) -> Result<(), ModelError> {
        for info in PARAMS {
            let v = self.get(info.name).unwrap_or(f64::NAN);
            if !v.is_finite() {
                return Err(ModelError::InvalidParams(format!("{} is not finite", info.name)));
            }
        }
        let positive = [
            ("phi0", self.phi0),
            ("w", self.w),
            ("l", self.l),
            ("cox", self.cox),
            ("mu_ch0", self.mu_ch0),
            ("l_d", self.l_d),
            ("a_d", self.a_d),
            ("n_d", self.n_d),
            ("mu_d0", self.mu_d0),
            ("v_sat", self.v_sat),
            ("t0", self.t0),
        ];
        for (name, v) in positive {
            if v <= 0.0 {
                return Err(ModelError::InvalidParams(format!("{name} must be > 0, got {v}")));
            }
        }
        let non_negative = [
            ("alpha", self.alpha),
            ("gamma_b", self.gamma_b),
            ("r_s", self.r_s),
            ("r_d_contact", self.r_d_contact),
            ("r_th", self.r_th),
        ];
        for (name, v) in non_negative {
            if v < 0.0 {
                return Err(ModelError::InvalidParams(format!("{name} must be >= 0, got {v}")));
            }
        }
        if self.beta_r < 1.0 {
            return Err(ModelError::InvalidParams(format!("beta_r must be >= 1, got {}", self.beta_r)));
        }
        if !(self.eps_clamp > 0.0 && self.eps_clamp < 1e-2) {
            return Err(ModelError::InvalidParams(format!(
                "eps_clamp must be in (0, 1e-2), got {}",
                self.eps_clamp
            )));
        }
        Ok(())
    }

    /// Copy with self-heating disabled.
    pub fn isothermal(&self) -> Self {
        Self {
            r_th: 0.0,
            ..self.clone()
        }
    }
}

/// Externally applied bias and case temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub vgs: f64,
    pub vds: f64,
    pub t_case: f64,
}

impl OperatingPoint {
    pub fn new(vgs: f64, vds: f64, t_case: f64) -> Self {
        Self { vgs, vds, t_case }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.vgs.is_finite() && self.vds.is_finite() && self.t_case.is_finite()) {
            return Err(ModelError::Domain(format!("non-finite operating point {self:?}")));
        }
        if self.vds < 0.0 {
            return Err(ModelError::Domain(format!("vds must be >= 0, got {}", self.vds)));
        }
        if self.t_case <= 0.0 {
            return Err(ModelError::Domain(format!("t_case must be > 0, got {}", self.t_case)));
        }
        Ok(())
    }
}

/// Converged internal state at one operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasSolution {
    /// Terminal drain current, A.
    pub id: f64,
    /// Pinch-off potential normalized by the thermal voltage.
    pub psi_p: f64,
    /// Normalized charge at the source end of the channel.
    pub q_src: f64,
    /// Normalized charge at the intrinsic drain.
    pub q_drn: f64,
    /// Voltage across the channel, V.
    pub vds_int: f64,
    /// Drift resistance at the solution, Ohm.
    pub r_drift: f64,
    /// Junction temperature, K.
    pub t_j: f64,
    pub n_slope: f64,
    pub converged: bool,
    pub iterations: usize,
}
