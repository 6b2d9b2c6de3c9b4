use super::{NumericsError, SolverOptions};

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub x_best: Vec<f64>,
    pub f_best: f64,
    /// Best objective value after each iteration; entry 0 is the initial simplex.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    /// False when the iteration limit stopped the search.
    pub converged: bool,
}

/// Bounded Nelder-Mead with the default initial simplex (5% of each
/// coordinate's magnitude, or of its bound range when the coordinate is 0).
pub fn nelder_mead<F>(
    objective: F,
    x0: &[f64],
    bounds: &[(f64, f64)],
    opts: &SolverOptions,
) -> Result<SimplexResult, NumericsError>
where
    F: FnMut(&[f64]) -> f64,
{
    let steps: Vec<f64> = x0
        .iter()
        .zip(bounds)
        .map(|(&x, &(lo, hi))| {
            let scale = if x != 0.0 {
                x.abs()
            } else if (hi - lo).is_finite() {
                hi - lo
            } else {
                1.0
            };
            0.05 * scale
        })
        .collect();
    nelder_mead_with_steps(objective, x0, bounds, &steps, opts)
}

/// Bounded Nelder-Mead with explicit initial simplex edge lengths.
///
/// Every trial point is clipped to `bounds` before it is evaluated, so the
/// objective only ever sees feasible coordinates. Non-finite objective values
/// away from `x0` are treated as `+inf`.
pub fn nelder_mead_with_steps<F>(
    mut objective: F,
    x0: &[f64],
    bounds: &[(f64, f64)],
    steps: &[f64],
    opts: &SolverOptions,
) -> Result<SimplexResult, NumericsError>
where
    F: FnMut(&[f64]) -> f64,
{
    opts.validate()?;
    let dim = x0.len();
    if dim == 0 {
        return Err(NumericsError::InvalidOptions("empty parameter vector"));
    }
    if bounds.len() != dim || steps.len() != dim {
        return Err(NumericsError::InvalidOptions("bounds/steps length mismatch"));
    }
    for (&x, &(lo, hi)) in x0.iter().zip(bounds) {
        if !(lo <= hi) {
            return Err(NumericsError::InvalidOptions("bound with lo > hi"));
        }
        if !(x >= lo && x <= hi) {
            return Err(NumericsError::InvalidOptions("x0 outside bounds"));
        }
    }

    let clip = |v: &mut [f64]| {
        for (x, &(lo, hi)) in v.iter_mut().zip(bounds) {
            *x = x.clamp(lo, hi);
        }
    };
    let mut evaluations = 0usize;
    let mut eval = |v: &[f64]| {
        evaluations += 1;
        let f = objective(v);
        if f.is_finite() {
            f
        } else {
            f64::INFINITY
        }
    };

    let f0 = eval(x0);
    if !f0.is_finite() {
        return Err(NumericsError::NonFinite { x: f64::NAN });
    }
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    simplex.push((x0.to_vec(), f0));
    for i in 0..dim {
        let mut v = x0.to_vec();
        let hi = bounds[i].1;
        let step = steps[i].abs();
        v[i] = if x0[i] + step <= hi { x0[i] + step } else { x0[i] - step };
        clip(&mut v);
        let f = eval(&v);
        simplex.push((v, f));
    }

    let by_value = |a: &(Vec<f64>, f64), b: &(Vec<f64>, f64)| a.1.total_cmp(&b.1);
    simplex.sort_by(by_value);
    let mut trace = vec![simplex[0].1];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        if terminated(&simplex) {
            converged = true;
            break;
        }
        iterations += 1;

        let worst = dim;
        let mut centroid = vec![0.0; dim];
        for (v, _) in &simplex[..worst] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / dim as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[worst].0)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let mut reflected = along(REFLECT);
        clip(&mut reflected);
        let f_r = eval(&reflected);

        if f_r < simplex[0].1 {
            let mut expanded = along(REFLECT * EXPAND);
            clip(&mut expanded);
            let f_e = eval(&expanded);
            simplex[worst] = if f_e < f_r { (expanded, f_e) } else { (reflected, f_r) };
        } else if f_r < simplex[worst - 1].1 {
            simplex[worst] = (reflected, f_r);
        } else {
            let outside = f_r < simplex[worst].1;
            let mut contracted = if outside { along(REFLECT * CONTRACT) } else { along(-CONTRACT) };
            clip(&mut contracted);
            let f_c = eval(&contracted);
            let threshold = if outside { f_r } else { simplex[worst].1 };
            if f_c < threshold {
                simplex[worst] = (contracted, f_c);
            } else {
                let best = simplex[0].0.clone();
                for (v, f) in simplex.iter_mut().skip(1) {
                    for (x, b) in v.iter_mut().zip(&best) {
                        *x = b + SHRINK * (*x - b);
                    }
                    clip(v);
                    *f = eval(v);
                }
            }
        }
        simplex.sort_by(by_value);
        trace.push(simplex[0].1);
    }
    if !converged && terminated(&simplex) {
        converged = true;
    }

    let (x_best, f_best) = simplex.swap_remove(0);
    Ok(SimplexResult {
        x_best,
        f_best,
        trace,
        iterations,
        evaluations,
        converged,
    })
}

fn terminated(simplex: &[(Vec<f64>, f64)]) -> bool {
    let (best, f_best) = (&simplex[0].0, simplex[0].1);
    let f_worst = simplex[simplex.len() - 1].1;
    if f_worst - f_best < 1e-12 * (1.0 + f_best.abs()) {
        return true;
    }
    let norm = best.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diameter = simplex[1..]
        .iter()
        .map(|(v, _)| v.iter().zip(best).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    diameter < 1e-8 * (1.0 + norm)
}
