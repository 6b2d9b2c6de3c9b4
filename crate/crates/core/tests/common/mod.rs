#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sicfet_core::dataset::{partition_regions, RegionThresholds};
use sicfet_core::extraction::{default_schedule, model_current};
use sicfet_core::model::ModelParams;
use sicfet_core::sweep::{make_grid, Scale};
use sicfet_core::{MeasurementRecord, MeasurementSet, SolverOptions};

/// Bias points covering all three setups: low-vds transfer curves, then
/// output curves through the mid- and high-voltage ranges.
pub fn full_plane_biases() -> Vec<(f64, f64, f64)> {
    let t = 300.0;
    let mut out = Vec::new();
    for vds in [0.005, 0.02, 0.05, 0.1, 0.2, 0.5] {
        for vgs in make_grid(1.0, 20.0, 121, Scale::Linear).unwrap() {
            out.push((vgs, vds, t));
        }
    }
    for k in 0..15 {
        let vgs = 6.0 + k as f64;
        for vds in make_grid(0.6, 15.0, 45, Scale::Log).unwrap() {
            out.push((vgs, vds, t));
        }
        for vds in make_grid(16.0, 800.0, 45, Scale::Log).unwrap() {
            out.push((vgs, vds, t));
        }
    }
    out
}

/// Synthetic measurements from `truth` with multiplicative Gaussian noise.
pub fn synthetic_set(truth: &ModelParams, noise: f64, seed: u64) -> MeasurementSet {
    let opts = SolverOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let records = full_plane_biases()
        .into_iter()
        .map(|(vgs, vds, t)| {
            let rec = MeasurementRecord::new(vgs, vds, 0.0, t);
            let id = model_current(truth, &rec, &opts).expect("truth converges");
            MeasurementRecord {
                id: id * (1.0 + noise * normal.sample(&mut rng)),
                source_tag: "synthetic".into(),
                ..rec
            }
        })
        .collect();
    partition_regions(&MeasurementSet::from_records(records), &RegionThresholds::default()).unwrap()
}

/// `truth` with every parameter the default schedule frees scaled by ±30%.
pub fn perturbed(truth: &ModelParams, seed: u64) -> ModelParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = truth.clone();
    let mut done: Vec<String> = Vec::new();
    for stage in default_schedule() {
        for name in stage.free_params {
            if done.contains(&name) {
                continue;
            }
            let sign = if rng.random::<bool>() { 1.3 } else { 0.7 };
            p.set(&name, truth.get(&name).unwrap() * sign).unwrap();
            done.push(name);
        }
    }
    p
}
