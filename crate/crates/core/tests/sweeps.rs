use sicfet_core::model::{on_resistance, ModelParams};
use sicfet_core::sweep::{output_sweep, transconductance, transfer_sweep, Axis, Scale, SweepSpec};
use sicfet_core::{presets, SolverOptions};

fn dut() -> ModelParams {
    presets::dut_160mohm_1200v()
}

fn spec(axis: Axis, start: f64, stop: f64, points: usize, scale: Scale, fixed: &[f64]) -> SweepSpec {
    SweepSpec { axis, start, stop, points, scale, fixed_bias: fixed.to_vec(), t_case: 300.0, self_heating: true }
}

#[test]
fn sweeps_are_deterministic() {
    let s = spec(Axis::Vds, 0.005, 800.0, 60, Scale::Log, &[8.0, 14.0, 20.0]);
    let a = output_sweep(&dut(), &s, &SolverOptions::default()).unwrap();
    let b = output_sweep(&dut(), &s, &SolverOptions::default()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a[2].label, "vgs=20V");
}

#[test]
fn transconductance_integrates_back_to_current() {
    let s = spec(Axis::Vgs, 0.0, 20.0, 801, Scale::Linear, &[10.0]);
    let p = dut();
    let id = &transfer_sweep(&p, &s, &SolverOptions::default()).unwrap()[0];
    let gm = &transconductance(&p, &s, &SolverOptions::default()).unwrap()[0];
    assert!(gm.all_converged());
    // trapezoidal integral of gm over vgs
    let integral: f64 = gm.x.windows(2).zip(gm.y.windows(2)).map(|(x, y)| 0.5 * (y[0] + y[1]) * (x[1] - x[0])).sum();
    let delta = id.y.last().unwrap() - id.y[0];
    assert!(((integral - delta) / delta).abs() < 0.01, "{integral} vs {delta}");
}

#[test]
fn initial_output_slope_matches_on_resistance() {
    let p = dut();
    let s = spec(Axis::Vds, 1e-4, 2e-3, 5, Scale::Linear, &[20.0]);
    let c = &output_sweep(&p, &s, &SolverOptions::default()).unwrap()[0];
    let slope = (c.y[1] - c.y[0]) / (c.x[1] - c.x[0]);
    let ron = on_resistance(&p, 20.0, 300.0).unwrap();
    assert!((slope * ron - 1.0).abs() < 0.01, "slope {slope}, 1/Ron {}", 1.0 / ron);
}

#[test]
fn self_heating_is_negligible_at_low_power() {
    let p = dut();
    let mut on = spec(Axis::Vds, 0.005, 0.05, 10, Scale::Log, &[6.0, 12.0, 20.0]);
    let mut off = on.clone();
    off.self_heating = false;
    let a = output_sweep(&p, &on, &SolverOptions::default()).unwrap();
    let b = output_sweep(&p, &off, &SolverOptions::default()).unwrap();
    for (ca, cb) in a.iter().zip(&b) {
        for ((x, ya), yb) in ca.x.iter().zip(&ca.y).zip(&cb.y) {
            assert!(x * ya < 0.1);
            assert!(((ya - yb) / yb).abs() < 1e-3, "{x}: {ya} vs {yb}");
        }
    }
    on.self_heating = false;
    assert!(output_sweep(&p, &on, &SolverOptions::default()).unwrap().iter().all(|c| c.meta.iter().all(|m| m.t_j == 300.0)));
}

#[test]
fn wrong_axis_and_bad_grids_are_rejected() {
    let p = dut();
    let o = SolverOptions::default();
    assert!(transfer_sweep(&p, &spec(Axis::Vds, 0.0, 1.0, 5, Scale::Linear, &[1.0]), &o).is_err());
    assert!(output_sweep(&p, &spec(Axis::Vds, 0.0, 1.0, 5, Scale::Log, &[1.0]), &o).is_err());
    assert!(output_sweep(&p, &spec(Axis::Vds, 0.0, 1.0, 1, Scale::Linear, &[1.0]), &o).is_err());
}
