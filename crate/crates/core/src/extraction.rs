//! Staged parameter extraction.
//!
//! Low-voltage transfer data pins the channel electrostatics first, mid-voltage
//! output data the series resistances next, and high-power data the drift
//! saturation and thermal terms last. Each stage is a bounded Nelder-Mead run
//! over its free parameters with everything else frozen.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{MeasurementRecord, MeasurementSet, Region};
use crate::model::{solve_bias_point, ModelError, ModelParams, OperatingPoint};
use crate::numerics::{nelder_mead_with_steps, NumericsError, SolverOptions};

/// Current floor for relative and logarithmic residuals, A.
pub const I_FLOOR: f64 = 1e-9;
/// Residual charged for a point the bias solver cannot converge.
pub const PENALTY: f64 = 1e3;
/// Initial simplex edge, as a fraction of each parameter's magnitude.
const SIMPLEX_STEP: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExtractionError {
    #[error("stage {stage:?}: region {region} has no records")]
    EmptyRegion { stage: String, region: String },
    #[error("stage {stage:?}: {message}")]
    BadStage { stage: String, message: String },
    #[error("stage {stage:?}: objective is not finite at the starting parameters")]
    NonFinite { stage: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    #[default]
    Relative,
    LogCurrent,
}

/// Residual of one point under `weighting`.
pub fn point_residual(model: f64, measured: f64, weighting: Weighting) -> f64 {
    match weighting {
        Weighting::Relative => (model - measured) / measured.abs().max(I_FLOOR),
        Weighting::LogCurrent => model.abs().max(I_FLOOR).log10() - measured.abs().max(I_FLOOR).log10(),
    }
}

/// Modelled drain current at a record's bias; `None` when the solver fails
/// or does not converge.
pub fn model_current(params: &ModelParams, rec: &MeasurementRecord, opts: &SolverOptions) -> Option<f64> {
    let op = OperatingPoint::new(rec.vgs, rec.vds, rec.t_case);
    match solve_bias_point(params, &op, opts) {
        Ok(s) if s.converged && s.id.is_finite() => Some(s.id),
        _ => None,
    }
}

/// Root-mean-square weighted residual over `records`. Non-converged points
/// contribute [`PENALTY`]. The reduction order is fixed, so results do not
/// depend on the thread count.
pub fn error_over(
    params: &ModelParams,
    records: &[&MeasurementRecord],
    weighting: Weighting,
    opts: &SolverOptions,
) -> f64 {
    if records.is_empty() {
        return f64::NAN;
    }
    let sq: Vec<f64> = records
        .par_iter()
        .map(|r| {
            let res = model_current(params, r, opts).map_or(PENALTY, |m| point_residual(m, r.id, weighting));
            res * res
        })
        .collect();
    (sq.iter().sum::<f64>() / sq.len() as f64).sqrt()
}

/// Error of `params` against every record of `set`.
pub fn model_error(params: &ModelParams, set: &MeasurementSet, weighting: Weighting) -> Result<f64, ExtractionError> {
    if set.is_empty() {
        return Err(ExtractionError::BadStage {
            stage: "model_error".into(),
            message: "measurement set is empty".into(),
        });
    }
    let records: Vec<&MeasurementRecord> = set.records.iter().collect();
    Ok(error_over(params, &records, weighting, &SolverOptions::default()))
}

/// Which records a stage fits against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionSelect {
    All,
    #[serde(untagged)]
    Only(Region),
}

impl RegionSelect {
    fn records<'a>(&self, set: &'a MeasurementSet) -> Vec<&'a MeasurementRecord> {
        match self {
            RegionSelect::All => set.records.iter().collect(),
            RegionSelect::Only(r) => set.in_region(*r).collect(),
        }
    }

    fn name(&self) -> String {
        match self {
            RegionSelect::All => "all".into(),
            RegionSelect::Only(r) => r.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitStageSpec {
    pub name: String,
    pub free_params: Vec<String>,
    pub region: RegionSelect,
    #[serde(default)]
    pub weighting: Weighting,
    /// Per-parameter `[lo, hi]`; parameters not listed use [`default_bounds`].
    #[serde(default)]
    pub bounds: BTreeMap<String, (f64, f64)>,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Extra Nelder-Mead runs restarted from the best point.
    #[serde(default)]
    pub restarts: usize,
}

fn default_max_iter() -> usize {
    200
}

/// Search range used when a stage does not give one.
pub fn default_bounds(name: &str) -> Option<(f64, f64)> {
    Some(match name {
        "vfb0" => (-10.0, 10.0),
        "k_vfb" => (-0.05, 0.0),
        "phi0" => (0.5, 6.0),
        "alpha" => (0.0, 1.0),
        "gamma_b" => (0.5, 40.0),
        "mu_ch0" => (1e-4, 0.1),
        "p_mu" => (-2.0, 3.0),
        "mu_d0" => (0.005, 0.2),
        "p_mud" => (0.0, 4.0),
        "v_sat" => (2e4, 1e6),
        "beta_r" => (1.0, 10.0),
        "r_s" | "r_d_contact" => (0.0, 0.5),
        "r_th" => (0.0, 0.05),
        _ => return None,
    })
}

impl FitStageSpec {
    pub fn new(name: &str, free: &[&str], region: RegionSelect, weighting: Weighting) -> Self {
        Self {
            name: name.into(),
            free_params: free.iter().map(|s| s.to_string()).collect(),
            region,
            weighting,
            bounds: BTreeMap::new(),
            max_iter: default_max_iter(),
            restarts: 0,
        }
    }

    fn bad(&self, message: String) -> ExtractionError {
        ExtractionError::BadStage {
            stage: self.name.clone(),
            message,
        }
    }

    /// Effective bounds, in `free_params` order.
    pub fn resolved_bounds(&self, params: &ModelParams) -> Result<Vec<(f64, f64)>, ExtractionError> {
        if self.free_params.is_empty() {
            return Err(self.bad("no free parameters".into()));
        }
        let mut out = Vec::with_capacity(self.free_params.len());
        for (i, name) in self.free_params.iter().enumerate() {
            if self.free_params[..i].contains(name) {
                return Err(self.bad(format!("parameter {name:?} listed twice")));
            }
            if params.get(name).is_none() {
                return Err(self.bad(format!("unknown parameter {name:?}")));
            }
            let (lo, mut hi) = match self.bounds.get(name).copied().or_else(|| default_bounds(name)) {
                Some(b) => b,
                None => return Err(self.bad(format!("no bounds for {name:?}"))),
            };
            if name == "k_vfb" {
                // the threshold may only fall with temperature
                hi = hi.min(0.0);
            }
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(self.bad(format!("bounds for {name:?} must be finite with lo < hi, got [{lo}, {hi}]")));
            }
            out.push((lo, hi));
        }
        if let Some(extra) = self.bounds.keys().find(|k| !self.free_params.contains(k)) {
            return Err(self.bad(format!("bounds given for {extra:?}, which is not free")));
        }
        Ok(out)
    }
}

/// The default schedule: three staged fits and an all-region polish.
pub fn default_schedule() -> Vec<FitStageSpec> {
    // the low-voltage stage is cheap (no drift saturation, little heating)
    // and sets the threshold everything else builds on, so it gets more room
    let mut stage1 = FitStageSpec::new(
        "stage1",
        &["vfb0", "alpha", "gamma_b", "mu_ch0"],
        RegionSelect::Only(Region::LinearLowV),
        Weighting::LogCurrent,
    );
    stage1.max_iter = 400;
    // the first pass sees the series resistances at their starting values;
    // once stage 2 has corrected them the linear region is refitted
    let mut refit = stage1.clone();
    refit.name = "stage1_refit".into();
    refit.max_iter = 200;
    vec![
        stage1,
        FitStageSpec::new(
            "stage2",
            &["r_s", "r_d_contact", "mu_d0"],
            RegionSelect::Only(Region::OutputMidV),
            Weighting::Relative,
        ),
        refit,
        FitStageSpec::new(
            "stage3",
            &["beta_r", "v_sat", "r_th", "k_vfb", "p_mu"],
            RegionSelect::Only(Region::HighPower),
            Weighting::Relative,
        ),
        FitStageSpec::new(
            "polish",
            &["beta_r", "v_sat", "r_th", "k_vfb", "p_mu", "mu_ch0"],
            RegionSelect::All,
            Weighting::Relative,
        ),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageReport {
    pub name: String,
    pub region: String,
    pub iterations: usize,
    pub evaluations: usize,
    pub start_error: f64,
    pub end_error: f64,
    /// Best objective value per optimizer iteration.
    pub trace: Vec<f64>,
}

/// Runs one stage. Parameters not in `free_params` are returned untouched.
pub fn run_stage(
    params: &ModelParams,
    set: &MeasurementSet,
    stage: &FitStageSpec,
    opts: &SolverOptions,
) -> Result<(ModelParams, StageReport), ExtractionError> {
    let bounds = stage.resolved_bounds(params)?;
    let records = stage.region.records(set);
    if records.is_empty() {
        return Err(ExtractionError::EmptyRegion {
            stage: stage.name.clone(),
            region: stage.region.name(),
        });
    }

    // optimize in units of each parameter's starting magnitude
    let start: Vec<f64> = stage.free_params.iter().map(|n| params.get(n).expect("checked")).collect();
    let scale: Vec<f64> = start
        .iter()
        .zip(&bounds)
        .map(|(&v, &(lo, hi))| if v != 0.0 { v.abs() } else { (hi - lo).max(f64::MIN_POSITIVE) })
        .collect();
    let sbounds: Vec<(f64, f64)> = bounds.iter().zip(&scale).map(|(&(lo, hi), s)| (lo / s, hi / s)).collect();
    let x0: Vec<f64> = start
        .iter()
        .zip(&scale)
        .zip(&sbounds)
        .map(|((v, s), &(lo, hi))| (v / s).clamp(lo, hi))
        .collect();
    let steps: Vec<f64> = x0
        .iter()
        .zip(&sbounds)
        .map(|(&x, &(lo, hi))| if x != 0.0 { SIMPLEX_STEP * x.abs() } else { SIMPLEX_STEP * (hi - lo) })
        .collect();

    let build = |x: &[f64]| {
        let mut p = params.clone();
        for ((name, xi), s) in stage.free_params.iter().zip(x).zip(&scale) {
            p.set(name, xi * s).expect("checked");
        }
        p
    };
    let objective = |x: &[f64]| {
        let p = build(x);
        if p.validate().is_err() {
            return f64::INFINITY;
        }
        error_over(&p, &records, stage.weighting, opts)
    };

    let start_error = error_over(params, &records, stage.weighting, opts);
    let nm_opts = SolverOptions::default().with_max_iter(stage.max_iter.max(1));
    let mut x = x0;
    let mut trace = Vec::new();
    let (mut iterations, mut evaluations) = (0, 0);
    let mut f_best = f64::INFINITY;
    for _ in 0..=stage.restarts {
        let res = match nelder_mead_with_steps(&objective, &x, &sbounds, &steps, &nm_opts) {
            Ok(r) => r,
            Err(NumericsError::NonFinite { .. }) => return Err(ExtractionError::NonFinite { stage: stage.name.clone() }),
            Err(e) => return Err(stage.bad(e.to_string())),
        };
        iterations += res.iterations;
        evaluations += res.evaluations;
        let from = usize::from(!trace.is_empty());
        trace.extend(res.trace[from..].iter().map(|v| v.min(f_best)));
        if res.f_best < f_best {
            f_best = res.f_best;
            x = res.x_best;
        }
    }

    // never hand back something worse than the start
    let (fitted, end_error) = if f_best <= start_error || !start_error.is_finite() {
        (build(&x), f_best)
    } else {
        (params.clone(), start_error)
    };
    Ok((
        fitted,
        StageReport {
            name: stage.name.clone(),
            region: stage.region.name(),
            iterations,
            evaluations,
            start_error,
            end_error,
            trace,
        },
    ))
}

fn builtin_stage(name: &str) -> FitStageSpec {
    default_schedule().into_iter().find(|s| s.name == name).expect("built-in stage")
}

pub fn stage1_fit_linear(params0: &ModelParams, set: &MeasurementSet) -> Result<ModelParams, ExtractionError> {
    run_stage(params0, set, &builtin_stage("stage1"), &SolverOptions::default()).map(|(p, _)| p)
}

pub fn stage2_fit_output(params: &ModelParams, set: &MeasurementSet) -> Result<ModelParams, ExtractionError> {
    run_stage(params, set, &builtin_stage("stage2"), &SolverOptions::default()).map(|(p, _)| p)
}

pub fn stage3_fit_highpower(params: &ModelParams, set: &MeasurementSet) -> Result<ModelParams, ExtractionError> {
    run_stage(params, set, &builtin_stage("stage3"), &SolverOptions::default()).map(|(p, _)| p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub initial_params: ModelParams,
    pub final_params: ModelParams,
    pub per_stage: Vec<StageReport>,
    /// Relative RMS of the final parameters per region; `None` for regions
    /// without records.
    pub per_region_rms: BTreeMap<Region, Option<f64>>,
    /// Relative RMS over every record.
    pub overall_rms: f64,
    /// Set when a stage failed and the schedule stopped early.
    pub aborted: Option<ExtractionError>,
}

impl FitReport {
    /// Best objective value per iteration, stage by stage.
    pub fn objective_trace(&self) -> Vec<(&str, &[f64])> {
        self.per_stage.iter().map(|s| (s.name.as_str(), s.trace.as_slice())).collect()
    }

    pub fn to_text(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        let _ = writeln!(out, "# fit report");
        for s in &self.per_stage {
            let _ = writeln!(
                out,
                "stage {} region={} iterations={} evaluations={} start_error={:e} end_error={:e}",
                s.name, s.region, s.iterations, s.evaluations, s.start_error, s.end_error
            );
        }
        if let Some(e) = &self.aborted {
            let _ = writeln!(out, "aborted: {e}");
        }
        for (region, rms) in &self.per_region_rms {
            match rms {
                Some(v) => {
                    let _ = writeln!(out, "rms {region} {v:e}");
                }
                None => {
                    let _ = writeln!(out, "rms {region} n/a");
                }
            }
        }
        let _ = writeln!(out, "rms overall {:e}", self.overall_rms);
        let _ = writeln!(out, "\n# parameter initial final");
        for info in crate::model::PARAMS {
            let a = self.initial_params.get(info.name).unwrap_or(f64::NAN);
            let b = self.final_params.get(info.name).unwrap_or(f64::NAN);
            if a != b {
                let _ = writeln!(out, "{} {a:?} {b:?} # {}", info.name, info.unit);
            }
        }
        out
    }
}

/// Relative RMS per region and overall.
pub fn region_errors(
    params: &ModelParams,
    set: &MeasurementSet,
    opts: &SolverOptions,
) -> (BTreeMap<Region, Option<f64>>, f64) {
    let per_region = Region::ALL
        .into_iter()
        .map(|r| {
            let recs: Vec<_> = set.in_region(r).collect();
            let rms = (!recs.is_empty()).then(|| error_over(params, &recs, Weighting::Relative, opts));
            (r, rms)
        })
        .collect();
    let all: Vec<_> = set.records.iter().collect();
    (per_region, error_over(params, &all, Weighting::Relative, opts))
}

/// Runs `schedule` in order, threading the parameters through. A failing
/// stage stops the schedule; the report then holds the partial result.
pub fn fit_all(params0: &ModelParams, set: &MeasurementSet, schedule: &[FitStageSpec]) -> FitReport {
    let opts = SolverOptions::default();
    let mut params = params0.clone();
    let mut per_stage = Vec::new();
    let mut aborted = None;
    for stage in schedule {
        match run_stage(&params, set, stage, &opts) {
            Ok((p, report)) => {
                params = p;
                per_stage.push(report);
            }
            Err(e) => {
                aborted = Some(e);
                break;
            }
        }
    }
    let (per_region_rms, overall_rms) = region_errors(&params, set, &opts);
    FitReport {
        initial_params: params0.clone(),
        final_params: params,
        per_stage,
        per_region_rms,
        overall_rms,
        aborted,
    }
}
