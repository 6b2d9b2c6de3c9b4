//! Closed-form and implicit device equations.
//!
//! Potentials entering the electrostatics are normalized by the thermal
//! voltage at the local (junction) temperature and charges by `C_ox·V_t`.

use super::{DriftLaw, ModelError, ModelParams};
use crate::numerics::{solve_bracketed_newton, NumericsError, SolverOptions};

/// Elementary charge, C.
pub const Q_E: f64 = 1.602_176_634e-19;
/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;

/// Floor on ψ_p inside the slope factor.
pub const PSI_SLOPE_FLOOR: f64 = 1.0;
/// Lower bound on ψ_p when the channel charge is evaluated.
pub const PSI_CHARGE_FLOOR: f64 = 1e-6;

/// Thermal voltage `kT/q`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ThermalVoltage(f64);

impl ThermalVoltage {
    pub fn at(t: f64) -> Self {
        ThermalVoltage(K_B * t / Q_E)
    }

    pub fn volts(self) -> f64 {
        self.0
    }
}

pub fn thermal_voltage(t: f64) -> f64 {
    ThermalVoltage::at(t).volts()
}

/// Flat-band voltage at temperature `t`; linear in `t − t0`.
pub fn flat_band(p: &ModelParams, t: f64) -> f64 {
    p.vfb0 + p.k_vfb * (t - p.t0)
}

/// `e^{−ψ} + ψ − 1` without cancellation near zero, and its derivative.
fn depletion_arg(psi: f64) -> (f64, f64) {
    let d = -(-psi).exp_m1();
    if psi.abs() < 0.1 {
        // Taylor series, alternating; 11 terms is below 1 ulp for |ψ| < 0.1
        let mut term = psi * psi / 2.0;
        let mut sum = 0.0;
        for k in 3..=13 {
            sum += term;
            term *= -psi / k as f64;
        }
        (sum, d)
    } else {
        ((-psi).exp_m1() + psi, d)
    }
}

/// Residual of the pinch-off relation and its ψ-derivative, for a normalized
/// gate overdrive `drive = (vg − vfb)/V_t`.
fn pinch_off_residual(alpha: f64, gamma: f64, psi: f64, drive: f64) -> (f64, f64) {
    let (g, dg) = depletion_arg(psi);
    let s = g.max(0.0).sqrt();
    let ds = if s > 0.0 { dg / (2.0 * s) } else { std::f64::consts::FRAC_1_SQRT_2 };
    let den = 1.0 + alpha * psi;
    let value = psi + alpha * psi / den + gamma * s - drive;
    let slope = 1.0 + alpha / (den * den) + gamma * ds;
    (value, slope)
}

fn implicit_opts() -> SolverOptions {
    SolverOptions::default()
}

fn solver_failure(what: &'static str) -> impl Fn(NumericsError) -> ModelError {
    move |source| ModelError::Solver { what, source }
}

/// Normalized pinch-off potential at gate voltage `vg`.
///
/// Solves `(vg − vfb)/V_t = ψ + αψ/(1 + αψ) + γ·√(e^{−ψ} + ψ − 1)` for ψ on
/// `[0, (vg − vfb)/V_t]`. Returns 0 at or below flat band.
pub fn pinch_off_potential(p: &ModelParams, vg: f64, t: f64) -> Result<f64, ModelError> {
    if !(t > 0.0) {
        return Err(ModelError::Domain(format!("temperature must be > 0, got {t}")));
    }
    let drive = (vg - flat_band(p, t)) / thermal_voltage(t);
    if !(drive > 0.0) {
        return Ok(0.0);
    }
    let (alpha, gamma) = (p.alpha, p.gamma_b);
    let out = solve_bracketed_newton(
        |psi| pinch_off_residual(alpha, gamma, psi, drive),
        0.0,
        drive,
        &implicit_opts(),
    )
    .map_err(solver_failure("pinch-off potential"))?;
    Ok(out.value)
}

/// Slope factor `1 + γ/(2√max(ψ_p, 1))`.
pub fn slope_factor(p: &ModelParams, psi_p: f64) -> f64 {
    1.0 + p.gamma_b / (2.0 * psi_p.max(PSI_SLOPE_FLOOR).sqrt())
}

/// Residual of the channel-charge relation written in `u = ln q`, with its
/// u-derivative. `a = 2n/γ`, `rhs = ψ_p − v_c`.
fn charge_residual(a: f64, psi: f64, rhs: f64, u: f64) -> (f64, f64) {
    let q = u.exp();
    let s = (psi - 2.0 * q).max(0.0).sqrt();
    let inner = a * q + 2.0 * s;
    let value = u + (a * inner).ln() + 2.0 * q - rhs;
    let slope = 1.0 + q * (a - 2.0 / s) / inner + 2.0 * q;
    (value, slope)
}

/// dL/dq of the charge relation, used to locate its maximum.
fn charge_residual_dq(a: f64, psi: f64, q: f64) -> f64 {
    let s = (psi - 2.0 * q).max(0.0).sqrt();
    1.0 / q + 2.0 + (a - 2.0 / s) / (a * q + 2.0 * s)
}

/// Normalized inversion charge at normalized channel potential `v_c`.
///
/// Solves `ln q + ln((2n/γ)(q·2n/γ + 2√(ψ_p − 2q))) + 2q = ψ_p − v_c` on the
/// branch where the left side increases with q. The solve runs in `ln q`, so
/// deep-subthreshold charges far below `f64::MIN_POSITIVE` underflow to 0
/// instead of failing.
pub fn channel_charge(p: &ModelParams, psi_p: f64, n: f64, v_c: f64) -> Result<f64, ModelError> {
    if !(psi_p > 0.0) || !psi_p.is_finite() {
        return Err(ModelError::Domain(format!("channel charge needs psi_p > 0, got {psi_p}")));
    }
    if !(v_c >= 0.0) || !v_c.is_finite() {
        return Err(ModelError::Domain(format!("channel potential must be >= 0, got {v_c}")));
    }
    if !(p.gamma_b > 0.0) || !(n >= 1.0) {
        return Err(ModelError::Domain(format!(
            "channel charge needs gamma_b > 0 and n >= 1 (gamma_b = {}, n = {n})",
            p.gamma_b
        )));
    }
    let a = 2.0 * n / p.gamma_b;
    let rhs = psi_p - v_c;
    let f = |u: f64| charge_residual(a, psi_p, rhs, u);

    // On q ≤ (ψ_p − 1/a²)/2 the square root stays ≥ 1/a and the left side is
    // strictly increasing; past it the curve turns over before q = ψ_p/2.
    let q_mono = 0.5 * (psi_p - 1.0 / (a * a));
    let mut u_hi = if q_mono > 0.0 { q_mono.ln() } else { f64::NEG_INFINITY };
    if !(q_mono > 0.0) || f(u_hi).0 < 0.0 {
        let q_peak = charge_peak(a, psi_p, q_mono.max(0.0));
        if f(q_peak.ln()).0 < 0.0 {
            return Err(ModelError::NoChargeSolution { psi_p, v_c });
        }
        u_hi = q_peak.ln();
    }
    let q_top = u_hi.exp();
    let u_lo = rhs - (a * (a * q_top + 2.0 * psi_p.sqrt())).ln() - 2.0 * q_top - 1.0;
    let u_lo = u_lo.min(u_hi - 1.0);

    let out = solve_bracketed_newton(f, u_lo, u_hi, &implicit_opts()).map_err(solver_failure("channel charge"))?;
    Ok(out.value.exp())
}

/// Location of the maximum of the charge relation's left side on `(q_from, ψ/2)`.
fn charge_peak(a: f64, psi: f64, q_from: f64) -> f64 {
    let mut lo = q_from.max(psi * 1e-12);
    let mut hi = 0.5 * psi;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if charge_residual_dq(a, psi, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Channel mobility `mu_ch0·(t/t0)^(−p_mu)`.
pub fn channel_mobility(p: &ModelParams, t: f64) -> f64 {
    p.mu_ch0 * (t / p.t0).powf(-p.p_mu)
}

/// Drift-region mobility `mu_d0·(t/t0)^(−p_mud)`.
pub fn drift_mobility(p: &ModelParams, t: f64) -> f64 {
    p.mu_d0 * (t / p.t0).powf(-p.p_mud)
}

/// Drift-diffusion channel current from the source- and drain-end charges.
pub fn intrinsic_drain_current(p: &ModelParams, q_src: f64, q_drn: f64, n: f64, t: f64) -> f64 {
    let vt = thermal_voltage(t);
    2.0 * n * (p.w / p.l) * channel_mobility(p, t) * p.cox * (q_src - q_drn) * (q_src + q_drn + 1.0) * vt * vt
}

/// Low-current drift-region resistance.
pub fn drift_resistance_linear(p: &ModelParams, t: f64) -> f64 {
    p.l_d / (drift_mobility(p, t) * Q_E * p.n_d * p.a_d)
}

/// Velocity-saturation current limit of the drift region.
pub fn max_drift_current(p: &ModelParams) -> f64 {
    p.v_sat * Q_E * p.n_d * p.a_d
}

/// Current-dependent drift resistance.
pub fn drift_resistance(p: &ModelParams, i_ds: f64, t: f64) -> f64 {
    let r_lin = drift_resistance_linear(p, t);
    let ratio = (i_ds / max_drift_current(p)).max(0.0);
    match p.drift_law {
        DriftLaw::Saturating => {
            let r = ratio.min(1.0 - p.eps_clamp);
            if r == 0.0 {
                return r_lin;
            }
            r_lin / ((-r.powf(p.beta_r)).ln_1p() / p.beta_r).exp()
        }
        DriftLaw::Printed => r_lin / (ratio.powf(p.beta_r).ln_1p() / p.beta_r).exp(),
    }
}

/// Junction temperature from dissipated power.
pub fn junction_temperature(p: &ModelParams, power: f64, t_case: f64) -> f64 {
    t_case + p.r_th * power
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use approx::assert_relative_eq;

    fn base() -> ModelParams {
        presets::dut_160mohm_1200v()
    }

    #[test]
    fn thermal_voltage_at_300k() {
        assert!((thermal_voltage(300.0) - 0.025852).abs() < 1e-6);
    }

    #[test]
    fn flat_band_linear_law() {
        let mut p = base();
        assert_eq!(flat_band(&p, p.t0), p.vfb0);
        p.vfb0 = 3.0;
        p.k_vfb = -8e-3;
        assert_relative_eq!(flat_band(&p, p.t0 + 100.0), 2.2, max_relative = 1e-12);
        p.k_vfb = 0.0;
        assert_eq!(flat_band(&p, 450.0), 3.0);
    }

    #[test]
    fn depletion_arg_is_continuous_at_series_switch() {
        for x in [0.099_999_999f64, 0.1, 0.100_000_001, -0.099_999_999, -0.1] {
            let direct = (-x).exp() + x - 1.0;
            assert_relative_eq!(depletion_arg(x).0, direct, max_relative = 1e-9);
        }
        assert_relative_eq!(depletion_arg(1e-8).0, 0.5e-16, max_relative = 1e-12);
    }

    #[test]
    fn pinch_off_zero_overdrive() {
        let p = base();
        let t = 350.0;
        assert_eq!(pinch_off_potential(&p, flat_band(&p, t), t).unwrap(), 0.0);
        assert_eq!(pinch_off_potential(&p, flat_band(&p, t) - 3.0, t).unwrap(), 0.0);
    }

    #[test]
    fn pinch_off_degenerates_to_drive() {
        let mut p = base();
        p.alpha = 0.0;
        p.gamma_b = 0.0;
        p.vfb0 = 0.0;
        p.k_vfb = 0.0;
        let psi = pinch_off_potential(&p, 1.0, 300.0).unwrap();
        assert!((psi - 38.6817).abs() < 2e-4, "{psi}");
        assert_relative_eq!(psi, 1.0 / thermal_voltage(300.0), max_relative = 1e-14);
    }

    #[test]
    fn pinch_off_matches_bisection() {
        let mut p = base();
        p.alpha = 0.1;
        p.gamma_b = 1.0;
        p.k_vfb = 0.0;
        p.vfb0 = 0.0;
        let t = 300.0;
        let drive = 20.0;
        let vg = drive * thermal_voltage(t);
        let residual = |psi: f64| psi + 0.1 * psi / (1.0 + 0.1 * psi) + ((-psi).exp() + psi - 1.0).sqrt() - drive;
        let (mut lo, mut hi) = (0.0f64, drive);
        while hi - lo > 1e-13 {
            let mid = 0.5 * (lo + hi);
            if residual(mid) < 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        let psi = pinch_off_potential(&p, vg, t).unwrap();
        assert!((psi - 0.5 * (lo + hi)).abs() < 1e-12, "{psi} vs {lo}");
    }

    #[test]
    fn slope_factor_examples() {
        let mut p = base();
        p.gamma_b = 0.0;
        assert_eq!(slope_factor(&p, 10.0), 1.0);
        p.gamma_b = 2.0;
        assert_relative_eq!(slope_factor(&p, 25.0), 1.2, max_relative = 1e-15);
        assert_relative_eq!(slope_factor(&p, 0.01), 2.0, max_relative = 1e-15);
    }

    #[test]
    fn channel_charge_rejects_bad_domain() {
        let p = base();
        assert!(matches!(channel_charge(&p, 0.0, 1.2, 0.0), Err(ModelError::Domain(_))));
        assert!(matches!(channel_charge(&p, -1.0, 1.2, 0.0), Err(ModelError::Domain(_))));
        assert!(matches!(channel_charge(&p, 10.0, 1.2, -1.0), Err(ModelError::Domain(_))));
    }

    #[test]
    fn channel_charge_small_psi_without_root() {
        let mut p = base();
        p.gamma_b = 4.0;
        let n = slope_factor(&p, 1.0);
        assert!(matches!(
            channel_charge(&p, 1.0, n, 0.0),
            Err(ModelError::NoChargeSolution { .. })
        ));
    }

    #[test]
    fn channel_charge_underflows_gracefully() {
        let p = base();
        let q = channel_charge(&p, 100.0, 1.3, 5.0e4).unwrap();
        assert_eq!(q, 0.0);
    }

    #[test]
    fn intrinsic_current_closed_form() {
        let mut p = base();
        p.w = 1000.0e-6;
        p.l = 1.0e-6;
        p.mu_ch0 = 0.03;
        p.cox = 5e-3;
        let t = 300.0;
        p.t0 = t;
        let i = intrinsic_drain_current(&p, 1.0, 0.0, 1.2, t);
        let vt = thermal_voltage(t);
        assert_relative_eq!(i, 2.0 * 1.2 * 1000.0 * 0.03 * 5e-3 * 2.0 * vt * vt, max_relative = 1e-14);
        assert!((i - 4.812e-4).abs() < 1e-7, "{i}");
        assert_eq!(intrinsic_drain_current(&p, 3.0, 3.0, 1.2, t), 0.0);
        assert_eq!(
            intrinsic_drain_current(&p, 0.2, 3.0, 1.2, t),
            -intrinsic_drain_current(&p, 3.0, 0.2, 1.2, t)
        );
    }

    fn drift_example() -> ModelParams {
        let mut p = base();
        p.l_d = 1e-5;
        p.mu_d0 = 0.09;
        p.n_d = 1e22;
        p.a_d = 1e-6;
        p.v_sat = 2e5;
        p.t0 = 300.0;
        p
    }

    #[test]
    fn drift_resistance_linear_examples() {
        let mut p = drift_example();
        let r = drift_resistance_linear(&p, 300.0);
        assert!((r - 0.0693).abs() < 1e-4, "{r}");
        p.a_d *= 2.0;
        assert_relative_eq!(drift_resistance_linear(&p, 300.0), r / 2.0, max_relative = 1e-14);
        p.a_d /= 2.0;
        p.p_mud = 2.5;
        assert_relative_eq!(drift_resistance_linear(&p, 360.0) / r, 1.2f64.powf(2.5), max_relative = 1e-12);
        assert!((1.2f64.powf(2.5) - 1.577).abs() < 1e-3);
    }

    #[test]
    fn max_drift_current_examples() {
        let mut p = drift_example();
        let i = max_drift_current(&p);
        assert!((i - 320.4).abs() < 0.05, "{i}");
        p.a_d *= 2.0;
        assert_relative_eq!(max_drift_current(&p), 2.0 * i, max_relative = 1e-15);
        p.n_d = 1e-300;
        assert!(max_drift_current(&p) < 1e-200);
        assert!(drift_resistance_linear(&p, 300.0) > 1e200);
    }

    #[test]
    fn drift_resistance_examples() {
        let mut p = drift_example();
        p.beta_r = 2.0;
        let r_lin = drift_resistance_linear(&p, 300.0);
        assert_eq!(drift_resistance(&p, 0.0, 300.0), r_lin);
        let i_max = max_drift_current(&p);
        let r = drift_resistance(&p, 0.6 * i_max, 300.0);
        assert_relative_eq!(r, r_lin / (1.0f64 - 0.36).sqrt(), max_relative = 1e-12);
        assert!((r - 0.0866).abs() < 1e-4);
        p.beta_r = 200.0;
        assert_relative_eq!(drift_resistance(&p, 0.5 * i_max, 300.0), r_lin, max_relative = 1e-12);
        p.beta_r = 2.0;
        assert!(drift_resistance(&p, (1.0 - p.eps_clamp) * i_max, 300.0) > 10.0 * r_lin);
        assert!(drift_resistance(&p, 5.0 * i_max, 300.0).is_finite());
    }

    #[test]
    fn printed_law_decreases() {
        let mut p = drift_example();
        p.drift_law = DriftLaw::Printed;
        let i_max = max_drift_current(&p);
        let r0 = drift_resistance(&p, 0.0, 300.0);
        assert!(drift_resistance(&p, 0.5 * i_max, 300.0) < r0);
    }

    #[test]
    fn junction_temperature_law() {
        let mut p = base();
        assert_eq!(junction_temperature(&p, 0.0, 310.0), 310.0);
        p.r_th = 1.0;
        assert_eq!(junction_temperature(&p, 100.0, 300.0), 400.0);
        p.r_th = 0.0;
        assert_eq!(junction_temperature(&p, 1e4, 300.0), 300.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn drift_resistance_increases(a in 0.0f64..0.999, b in 0.0f64..0.999, beta in 1.0f64..6.0) {
                let mut p = drift_example();
                p.beta_r = beta;
                let i_max = max_drift_current(&p);
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                prop_assume!(hi - lo > 1e-6);
                prop_assert!(drift_resistance(&p, hi * i_max, 300.0) > drift_resistance(&p, lo * i_max, 300.0));
            }

            #[test]
            fn charge_decreases_with_channel_potential(psi in 5.0f64..120.0, v1 in 0.0f64..80.0, dv in 0.01f64..20.0) {
                let p = base();
                let n = slope_factor(&p, psi);
                let q1 = channel_charge(&p, psi, n, v1).unwrap();
                let q2 = channel_charge(&p, psi, n, v1 + dv).unwrap();
                prop_assert!(q1 > q2 || (q1 == 0.0 && q2 == 0.0));
            }
        }
    }
}
