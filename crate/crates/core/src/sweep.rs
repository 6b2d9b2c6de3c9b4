//! Transfer, output and transconductance curve families.
//!
//! Every point is an independent cold-start bias solve, so results do not
//! depend on evaluation order or thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{solve_bias_point, ModelError, ModelParams, OperatingPoint};
use crate::numerics::SolverOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Vgs,
    Vds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: Axis,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    #[serde(default)]
    pub scale: Scale,
    /// Values of the voltage that is held fixed; one curve each.
    pub fixed_bias: Vec<f64>,
    #[serde(default = "default_t_case")]
    pub t_case: f64,
    #[serde(default = "default_true")]
    pub self_heating: bool,
}

fn default_t_case() -> f64 {
    300.0
}

fn default_true() -> bool {
    true
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), ModelError> {
        make_grid(self.start, self.stop, self.points, self.scale)?;
        if self.fixed_bias.is_empty() {
            return Err(ModelError::Domain("sweep needs at least one fixed bias".into()));
        }
        if self.fixed_bias.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::Domain("non-finite fixed bias".into()));
        }
        if !(self.t_case > 0.0) || !self.t_case.is_finite() {
            return Err(ModelError::Domain(format!("t_case must be > 0, got {}", self.t_case)));
        }
        Ok(())
    }
}

/// Diagnostics of one curve point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointMeta {
    pub converged: bool,
    pub t_j: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    /// `"vgs=6.5V"` style label naming the fixed bias.
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub meta: Vec<PointMeta>,
}

impl Curve {
    pub fn all_converged(&self) -> bool {
        self.meta.iter().all(|m| m.converged)
    }
}

/// Inclusive voltage grid, arithmetic or geometric.
pub fn make_grid(start: f64, stop: f64, points: usize, scale: Scale) -> Result<Vec<f64>, ModelError> {
    if points < 2 {
        return Err(ModelError::Domain(format!("grid needs >= 2 points, got {points}")));
    }
    if !(start.is_finite() && stop.is_finite() && start < stop) {
        return Err(ModelError::Domain(format!("grid needs start < stop, got [{start}, {stop}]")));
    }
    let last = (points - 1) as f64;
    let mut grid: Vec<f64> = match scale {
        Scale::Linear => (0..points).map(|k| start + (stop - start) * (k as f64 / last)).collect(),
        Scale::Log => {
            if !(start > 0.0) {
                return Err(ModelError::Domain(format!("log grid needs start > 0, got {start}")));
            }
            let (a, b) = (start.ln(), stop.ln());
            (0..points).map(|k| (a + (b - a) * (k as f64 / last)).exp()).collect()
        }
    };
    grid[0] = start;
    grid[points - 1] = stop;
    Ok(grid)
}

fn label(axis: Axis, bias: f64) -> String {
    match axis {
        Axis::Vgs => format!("vds={bias}V"),
        Axis::Vds => format!("vgs={bias}V"),
    }
}

fn solve_curves(params: &ModelParams, spec: &SweepSpec, opts: &SolverOptions) -> Result<Vec<Curve>, ModelError> {
    spec.validate()?;
    params.validate()?;
    let p = if spec.self_heating { params.clone() } else { params.isothermal() };
    let grid = make_grid(spec.start, spec.stop, spec.points, spec.scale)?;

    let jobs: Vec<(usize, f64)> = (0..spec.fixed_bias.len())
        .flat_map(|c| grid.iter().map(move |&x| (c, x)))
        .collect();
    let points: Vec<(f64, PointMeta)> = jobs
        .par_iter()
        .map(|&(c, x)| {
            let bias = spec.fixed_bias[c];
            let op = match spec.axis {
                Axis::Vgs => OperatingPoint::new(x, bias, spec.t_case),
                Axis::Vds => OperatingPoint::new(bias, x, spec.t_case),
            };
            match solve_bias_point(&p, &op, opts) {
                Ok(s) => (
                    s.id,
                    PointMeta {
                        converged: s.converged,
                        t_j: s.t_j,
                        iterations: s.iterations,
                    },
                ),
                // a point the solver cannot handle is flagged, never dropped
                Err(_) => (
                    f64::NAN,
                    PointMeta {
                        converged: false,
                        t_j: f64::NAN,
                        iterations: 0,
                    },
                ),
            }
        })
        .collect();

    Ok(spec
        .fixed_bias
        .iter()
        .enumerate()
        .map(|(c, &bias)| {
            let chunk = &points[c * grid.len()..(c + 1) * grid.len()];
            Curve {
                label: label(spec.axis, bias),
                x: grid.clone(),
                y: chunk.iter().map(|(y, _)| *y).collect(),
                meta: chunk.iter().map(|(_, m)| *m).collect(),
            }
        })
        .collect())
}

/// Id versus vgs, one curve per fixed vds.
pub fn transfer_sweep(params: &ModelParams, spec: &SweepSpec, opts: &SolverOptions) -> Result<Vec<Curve>, ModelError> {
    if spec.axis != Axis::Vgs {
        return Err(ModelError::Domain("transfer sweep needs axis = vgs".into()));
    }
    solve_curves(params, spec, opts)
}

/// Id versus vds, one curve per fixed vgs.
pub fn output_sweep(params: &ModelParams, spec: &SweepSpec, opts: &SolverOptions) -> Result<Vec<Curve>, ModelError> {
    if spec.axis != Axis::Vds {
        return Err(ModelError::Domain("output sweep needs axis = vds".into()));
    }
    solve_curves(params, spec, opts)
}

/// gm = dId/dvgs by finite differences of the solved transfer curves.
pub fn transconductance(params: &ModelParams, spec: &SweepSpec, opts: &SolverOptions) -> Result<Vec<Curve>, ModelError> {
    let curves = transfer_sweep(params, spec, opts)?;
    Ok(curves
        .into_iter()
        .map(|c| {
            let y = differentiate(&c.x, &c.y);
            // a derivative touching a flagged point is flagged too
            let meta = (0..c.x.len())
                .map(|k| {
                    let lo = k.saturating_sub(1);
                    let hi = (k + 1).min(c.x.len() - 1);
                    PointMeta {
                        converged: c.meta[lo..=hi].iter().all(|m| m.converged),
                        ..c.meta[k]
                    }
                })
                .collect();
            Curve { y, meta, ..c }
        })
        .collect())
}

/// Central differences inside, one-sided at the ends.
pub fn differentiate(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n < 2 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|k| {
            let (a, b) = if k == 0 {
                (0, 1)
            } else if k == n - 1 {
                (n - 2, n - 1)
            } else {
                (k - 1, k + 1)
            };
            (y[b] - y[a]) / (x[b] - x[a])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_grid() {
        assert_eq!(make_grid(0.0, 10.0, 3, Scale::Linear).unwrap(), vec![0.0, 5.0, 10.0]);
        assert!(make_grid(1.0, 1.0, 2, Scale::Linear).is_err());
        assert!(make_grid(0.0, 1.0, 1, Scale::Linear).is_err());
        assert!(make_grid(0.0, 1.0, 5, Scale::Log).is_err());
    }

    #[test]
    fn log_grid_is_geometric() {
        let g = make_grid(0.005, 800.0, 57, Scale::Log).unwrap();
        assert_eq!(g[0], 0.005);
        assert_eq!(g[56], 800.0);
        let r0 = g[1] / g[0];
        for w in g.windows(2) {
            assert!((w[1] / w[0] / r0 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn differences_of_a_parabola() {
        let x: Vec<f64> = (0..11).map(|k| k as f64 * 0.1).collect();
        let y: Vec<f64> = x.iter().map(|v| v * v).collect();
        let d = differentiate(&x, &y);
        for k in 1..10 {
            assert!((d[k] - 2.0 * x[k]).abs() < 1e-12);
        }
        assert!((d[0] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn wrong_axis_rejected() {
        let p = crate::presets::dut_160mohm_1200v();
        let spec = SweepSpec {
            axis: Axis::Vds,
            start: 0.0,
            stop: 1.0,
            points: 3,
            scale: Scale::Linear,
            fixed_bias: vec![10.0],
            t_case: 300.0,
            self_heating: false,
        };
        assert!(transfer_sweep(&p, &spec, &SolverOptions::default()).is_err());
        assert!(output_sweep(&p, &spec, &SolverOptions::default()).is_ok());
    }
}
