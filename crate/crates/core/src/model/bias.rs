//! Self-consistent electro-thermal bias point.
//!
//! The terminal network is: source resistance `r_s`, the channel, then the
//! current-dependent drift resistance and the drain contact. The gate drive
//! seen by the channel is `vgs − id·r_s`. Junction temperature follows from
//! the dissipated power `id·vds` through `r_th`.

use std::cell::Cell;

use super::physics::{
    channel_charge, drift_resistance, drift_resistance_linear, intrinsic_drain_current, pinch_off_potential,
    slope_factor, thermal_voltage, PSI_CHARGE_FLOOR,
};
use super::{BiasSolution, DriftLaw, ModelError, ModelParams, OperatingPoint};
use crate::numerics::{solve_bracketed, NumericsError, SolveOutcome, SolverOptions};

/// Probe voltage for on-resistance.
pub const RON_PROBE_VDS: f64 = 5e-3;

/// Highest junction temperature the thermal search will consider.
const T_SEARCH_MAX: f64 = 3000.0;
/// Junction-temperature tolerance of the thermal balance, K.
const THERMAL_TOL_K: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
struct Channel {
    id: f64,
    psi_p: f64,
    n: f64,
    q_src: f64,
    q_drn: f64,
}

/// Channel-only current for gate and drain voltages referred to the
/// intrinsic source and drain.
fn channel(p: &ModelParams, vgs_int: f64, vds_int: f64, t: f64) -> Result<Channel, ModelError> {
    let vt = thermal_voltage(t);
    let psi_p = pinch_off_potential(p, vgs_int, t)?;
    let psi = psi_p.max(PSI_CHARGE_FLOOR);
    let n = slope_factor(p, psi);
    let v_src = p.phi0 / vt;
    let q_src = channel_charge(p, psi, n, v_src)?;
    let q_drn = if vds_int > 0.0 {
        channel_charge(p, psi, n, v_src + vds_int / vt)?
    } else {
        q_src
    };
    let id = intrinsic_drain_current(p, q_src, q_drn, n, t);
    Ok(Channel {
        id,
        psi_p,
        n,
        q_src,
        q_drn,
    })
}

#[derive(Debug, Clone, Copy)]
struct Electrical {
    channel: Channel,
    id: f64,
    vds_int: f64,
    r_drift: f64,
    iterations: usize,
    converged: bool,
}

/// Electrical solution at a fixed junction temperature.
///
/// The residual `F(id) = I_ch(vgs − id·r_s, vds − id·R(id)) − id` is strictly
/// decreasing in `id`, positive at 0 and non-positive at
/// `min(I_ch(vgs, vds), vds/R_min)`, so it is solved as a bracketed root
/// scaled by the open-network current.
fn electrical(p: &ModelParams, vgs: f64, vds: f64, t: f64, opts: &SolverOptions) -> Result<Electrical, ModelError> {
    let open = channel(p, vgs, vds, t)?;
    let r_lin = drift_resistance_linear(p, t);
    let r_ext = p.r_s + p.r_d_contact;
    let zero_drop = |channel: Channel| Electrical {
        channel,
        id: channel.id,
        vds_int: vds,
        r_drift: drift_resistance(p, channel.id, t),
        iterations: 0,
        converged: true,
    };
    if !(open.id > 0.0) || r_lin + r_ext == 0.0 {
        return Ok(zero_drop(open));
    }
    let scale = open.id;
    let mut id_hi = scale;
    if p.drift_law == DriftLaw::Saturating {
        id_hi = id_hi.min(vds / (r_lin + r_ext));
    }

    let failure: Cell<Option<ModelError>> = Cell::new(None);
    let vds_int_at = |id: f64| (vds - id * (drift_resistance(p, id, t) + r_ext)).max(0.0);
    let residual = |y: f64| {
        let id = y * scale;
        match channel(p, vgs - id * p.r_s, vds_int_at(id), t) {
            Ok(ch) => (ch.id - id) / scale,
            Err(e) => {
                failure.set(Some(e));
                f64::NAN
            }
        }
    };
    let outcome = match solve_bracketed(residual, 0.0, id_hi / scale, opts) {
        Ok(o) => o,
        Err(NumericsError::NotConverged(o)) => o,
        // id_hi bounds the root from above; a residual that is still
        // non-negative there (saturated channel, rounding) puts the root on it
        Err(NumericsError::NoBracket { hi, f_hi, .. }) if f_hi >= 0.0 => SolveOutcome {
            value: hi,
            residual: f_hi,
            iterations: 1,
            converged: true,
        },
        Err(e) => {
            return Err(failure.take().unwrap_or(ModelError::Solver {
                what: "drain current",
                source: e,
            }))
        }
    };
    let id = outcome.value * scale;
    let vds_int = vds_int_at(id);
    let channel = channel(p, vgs - id * p.r_s, vds_int, t)?;
    Ok(Electrical {
        channel,
        id,
        vds_int,
        r_drift: drift_resistance(p, id, t),
        iterations: outcome.iterations,
        converged: outcome.converged,
    })
}

/// Self-consistent bias point including self-heating.
///
/// The thermal balance `H(T) = t_case + r_th·vds·id(T) − T` is solved as a
/// bracketed root in T, each evaluation running the electrical solve above.
/// The returned `t_j` satisfies `t_j − t_case = r_th·id·vds` for the returned
/// `id`. Non-convergence is reported through `converged`, not as an error.
pub fn solve_bias_point(p: &ModelParams, op: &OperatingPoint, opts: &SolverOptions) -> Result<BiasSolution, ModelError> {
    op.validate()?;
    opts.validate().map_err(|source| ModelError::Solver {
        what: "options",
        source,
    })?;
    let OperatingPoint { vgs, vds, t_case } = *op;

    let finish = |e: Electrical, thermal_iterations: usize, thermal_ok: bool| BiasSolution {
        id: e.id,
        psi_p: e.channel.psi_p,
        q_src: e.channel.q_src,
        q_drn: e.channel.q_drn,
        vds_int: e.vds_int,
        r_drift: e.r_drift,
        t_j: t_case + p.r_th * e.id * vds,
        n_slope: e.channel.n,
        converged: e.converged && thermal_ok,
        iterations: e.iterations + thermal_iterations,
    };

    if vds == 0.0 {
        let ch = channel(p, vgs, 0.0, t_case)?;
        return Ok(BiasSolution {
            id: 0.0,
            psi_p: ch.psi_p,
            q_src: ch.q_src,
            q_drn: ch.q_src,
            vds_int: 0.0,
            r_drift: drift_resistance_linear(p, t_case),
            t_j: t_case,
            n_slope: ch.n,
            converged: true,
            iterations: 0,
        });
    }

    let cold = electrical(p, vgs, vds, t_case, opts)?;
    let rise0 = p.r_th * vds * cold.id;
    if rise0 <= opts.abs_tol * t_case {
        return Ok(finish(cold, 0, true));
    }

    // Thermal balance in units of the cold rise, h(y) = rise(t_case + y·rise0)/rise0 − y,
    // with h(0) = 1 known. Secant steps start at y = 1; once a point with
    // h ≤ 0 is seen they are confined to the bracket, bisecting otherwise.
    let tol = THERMAL_TOL_K / rise0;
    let balance = |y: f64| -> Result<(f64, Electrical), ModelError> {
        let e = electrical(p, vgs, vds, t_case + y * rise0, opts)?;
        Ok((p.r_th * vds * e.id / rise0 - y, e))
    };
    let mut pos = 0.0;
    let mut neg: Option<f64> = None;
    let (mut y_prev, mut h_prev) = (0.0, 1.0);
    let mut y = 1.0;
    let mut last = cold;
    for k in 1..=opts.max_iter {
        if t_case + y * rise0 > T_SEARCH_MAX {
            // thermal runaway within the search range: report the hottest state
            return Ok(finish(last, k, false));
        }
        let (h, e) = balance(y)?;
        last = e;
        if h.abs() <= tol {
            return Ok(finish(e, k, true));
        }
        if h > 0.0 {
            pos = y;
        } else {
            neg = Some(y);
        }
        let secant = y - h * (y - y_prev) / (h - h_prev);
        (y_prev, h_prev) = (y, h);
        y = match neg {
            Some(n) => {
                if (n - pos).abs() <= opts.rel_tol * n.abs().max(1.0) {
                    return Ok(finish(e, k, true));
                }
                let (lo, hi) = (pos.min(n), pos.max(n));
                if secant > lo && secant < hi {
                    secant
                } else {
                    0.5 * (lo + hi)
                }
            }
            None if secant.is_finite() && secant > pos => secant.min(2.0 * pos + 1.0),
            None => 2.0 * pos + 1.0,
        };
    }
    Ok(finish(last, opts.max_iter, false))
}

/// Small-signal on-resistance `vds/id` at a 5 mV probe.
pub fn on_resistance(p: &ModelParams, vgs: f64, t_case: f64) -> Result<f64, ModelError> {
    let sol = solve_bias_point(
        p,
        &OperatingPoint::new(vgs, RON_PROBE_VDS, t_case),
        &SolverOptions::default(),
    )?;
    if !(sol.id > 0.0) {
        return Err(ModelError::ChannelOff { vgs });
    }
    Ok(RON_PROBE_VDS / sol.id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use approx::assert_relative_eq;

    fn opts() -> SolverOptions {
        SolverOptions::default()
    }

    #[test]
    fn zero_vds_is_exactly_zero() {
        let p = presets::dut_160mohm_1200v();
        for vgs in [0.0, 5.0, 20.0] {
            let s = solve_bias_point(&p, &OperatingPoint::new(vgs, 0.0, 300.0), &opts()).unwrap();
            assert_eq!(s.id, 0.0);
            assert_eq!(s.vds_int, 0.0);
            assert_eq!(s.t_j, 300.0);
        }
    }

    #[test]
    fn negative_vds_rejected() {
        let p = presets::dut_160mohm_1200v();
        assert!(matches!(
            solve_bias_point(&p, &OperatingPoint::new(10.0, -0.1, 300.0), &opts()),
            Err(ModelError::Domain(_))
        ));
    }

    #[test]
    fn saturated_channel_with_tiny_series_resistance() {
        // the drain-current residual rounds to +1e-16 at the upper bracket here
        let mut p = presets::dut_160mohm_1200v();
        p.vfb0 = -1.4702994290479408;
        p.k_vfb = -0.026;
        p.alpha = 1.0;
        p.gamma_b = 7.858148073268376;
        p.mu_ch0 = 0.0018852518508349935;
        p.p_mu = 0.39;
        p.mu_d0 = 0.05770124156866321;
        p.v_sat = 78000.0;
        p.beta_r = 2.6;
        p.r_s = 0.0;
        p.r_d_contact = 0.0015294365302178981;
        p.r_th = 0.0014;
        let s = solve_bias_point(&p, &OperatingPoint::new(19.0, 20.89098160134745, 300.0), &opts()).unwrap();
        assert!(s.converged);
        assert!(s.id > 0.0 && s.vds_int <= 20.89098160134745);
    }

    #[test]
    fn degenerate_network_is_channel_only() {
        let mut p = presets::dut_160mohm_1200v();
        p.r_s = 0.0;
        p.r_d_contact = 0.0;
        p.r_th = 0.0;
        p.l_d = 1e-30;
        let t = 300.0;
        for (vgs, vds) in [(10.0, 0.1), (20.0, 5.0), (15.0, 100.0)] {
            let s = solve_bias_point(&p, &OperatingPoint::new(vgs, vds, t), &opts()).unwrap();
            let vt = thermal_voltage(t);
            let psi = pinch_off_potential(&p, vgs, t).unwrap();
            let n = slope_factor(&p, psi);
            let qs = channel_charge(&p, psi, n, p.phi0 / vt).unwrap();
            let qd = channel_charge(&p, psi, n, (p.phi0 + vds) / vt).unwrap();
            let i = intrinsic_drain_current(&p, qs, qd, n, t);
            assert_relative_eq!(s.id, i, max_relative = 1e-9);
        }
    }

    #[test]
    fn solution_invariants() {
        let p = presets::dut_160mohm_1200v();
        for &(vgs, vds) in &[(6.0, 0.005), (20.0, 2.0), (12.0, 50.0), (20.0, 600.0), (3.0, 100.0)] {
            let op = OperatingPoint::new(vgs, vds, 300.0);
            let s = solve_bias_point(&p, &op, &opts()).unwrap();
            assert!(s.converged, "{op:?}");
            assert!(s.id >= 0.0);
            assert!(s.q_src >= s.q_drn && s.q_drn >= 0.0);
            assert!(s.vds_int >= 0.0 && s.vds_int <= vds);
            assert!(s.t_j >= 300.0);
            let rise = p.r_th * s.id * vds;
            assert!((s.t_j - 300.0 - rise).abs() <= 1e-12 * s.t_j);
        }
    }

    #[test]
    fn source_resistance_adds_to_ron() {
        let p = presets::dut_160mohm_1200v();
        let r1 = on_resistance(&p, 20.0, 300.0).unwrap();
        let mut p2 = p.clone();
        p2.r_s *= 2.0;
        let r2 = on_resistance(&p2, 20.0, 300.0).unwrap();
        assert_relative_eq!(r2 - r1, p.r_s, max_relative = 1e-3);
    }

    #[test]
    fn channel_off_has_huge_ron() {
        let p = presets::dut_160mohm_1200v();
        match on_resistance(&p, 0.0, 300.0) {
            Ok(r) => assert!(r > 1e3, "{r}"),
            Err(ModelError::ChannelOff { .. }) => {}
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn printed_drift_law_still_solves() {
        let mut p = presets::dut_160mohm_1200v();
        p.drift_law = DriftLaw::Printed;
        let s = solve_bias_point(&p, &OperatingPoint::new(20.0, 400.0, 300.0), &opts()).unwrap();
        assert!(s.converged);
        assert!(s.r_drift < drift_resistance_linear(&p, s.t_j));
    }
}
