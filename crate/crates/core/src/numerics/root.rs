use super::{NumericsError, SolveOutcome, SolverOptions};

/// Central finite difference with step `max(1e-7, 1e-7·|x|)`.
pub fn central_difference<F: FnMut(f64) -> f64>(mut f: F, x: f64) -> f64 {
    let h = (1e-7 * x.abs()).max(1e-7);
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Finds a root of `f` on `[lo, hi]` given a sign change.
///
/// Secant steps through the two most recent iterates are taken while they
/// land strictly inside the current bracket; otherwise (or when the bracket
/// failed to halve over two steps) the bracket is bisected. `f` is never
/// evaluated outside `[lo, hi]`.
pub fn solve_bracketed<F>(mut f: F, lo: f64, hi: f64, opts: &SolverOptions) -> Result<SolveOutcome, NumericsError>
where
    F: FnMut(f64) -> f64,
{
    bracketed(|x| (f(x), None), lo, hi, opts)
}

/// Like [`solve_bracketed`] but with an analytic derivative: `fdf(x)` returns
/// `(f(x), f'(x))` and Newton steps replace the secant.
pub fn solve_bracketed_newton<F>(
    mut fdf: F,
    lo: f64,
    hi: f64,
    opts: &SolverOptions,
) -> Result<SolveOutcome, NumericsError>
where
    F: FnMut(f64) -> (f64, f64),
{
    bracketed(
        |x| {
            let (fx, dfx) = fdf(x);
            (fx, Some(dfx))
        },
        lo,
        hi,
        opts,
    )
}

fn bracketed<F>(mut eval: F, lo: f64, hi: f64, opts: &SolverOptions) -> Result<SolveOutcome, NumericsError>
where
    F: FnMut(f64) -> (f64, Option<f64>),
{
    opts.validate()?;
    let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    if !lo.is_finite() || !hi.is_finite() {
        return Err(NumericsError::NonFinite { x: if lo.is_finite() { hi } else { lo } });
    }

    let (f_lo, df_lo) = eval(lo);
    if !f_lo.is_finite() {
        return Err(NumericsError::NonFinite { x: lo });
    }
    if f_lo == 0.0 {
        return Ok(done(lo, f_lo, 0));
    }
    let (f_hi, df_hi) = eval(hi);
    if !f_hi.is_finite() {
        return Err(NumericsError::NonFinite { x: hi });
    }
    if f_hi == 0.0 {
        return Ok(done(hi, f_hi, 0));
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(NumericsError::NoBracket { lo, hi, f_lo, f_hi });
    }

    let (mut a, mut fa, mut b) = (lo, f_lo, hi);
    // Start from the endpoint with the smaller residual; the other endpoint
    // seeds the first secant (a regula falsi step).
    let ((mut x, mut fx, mut dfx), (mut x_prev, mut f_prev)) = if f_lo.abs() <= f_hi.abs() {
        ((lo, f_lo, df_lo), (hi, f_hi))
    } else {
        ((hi, f_hi, df_hi), (lo, f_lo))
    };
    let mut widths = [hi - lo, hi - lo];

    for iter in 1..=opts.max_iter {
        let width = b - a;
        let proposal = match dfx {
            Some(d) if d != 0.0 && d.is_finite() => x - fx / d,
            _ if fx != f_prev => x - fx * (x - x_prev) / (fx - f_prev),
            _ => f64::NAN,
        };
        let stalled = width > 0.5 * widths[0];
        let mut c = proposal;
        if stalled || !(c > a && c < b) {
            c = a + 0.5 * (b - a);
        }
        if !(c > a && c < b) {
            // a and b are adjacent floats
            return Ok(done(x, fx, iter - 1));
        }

        let (fc, dfc) = eval(c);
        if !fc.is_finite() {
            return Err(NumericsError::NonFinite { x: c });
        }
        if fc.signum() == fa.signum() {
            a = c;
            fa = fc;
        } else {
            b = c;
        }
        widths = [widths[1], width];
        x_prev = x;
        f_prev = fx;
        x = c;
        fx = fc;
        dfx = dfc;

        if fc.abs() <= opts.abs_tol || b - a <= opts.rel_tol * c.abs().max(f64::MIN_POSITIVE) {
            return Ok(done(c, fc, iter));
        }
    }
    Err(NumericsError::NotConverged(SolveOutcome {
        value: x,
        residual: fx,
        iterations: opts.max_iter,
        converged: false,
    }))
}

fn done(value: f64, residual: f64, iterations: usize) -> SolveOutcome {
    SolveOutcome {
        value,
        residual,
        iterations,
        converged: true,
    }
}

/// Damped fixed-point iteration `x ← x + damping·(g(x) − x)`.
///
/// Converged when `|g(x) − x| ≤ abs_tol + rel_tol·|x|`; the returned
/// `residual` is `g(value) − value` for the returned `value`. On failure the
/// error carries the iterate with the smallest residual seen.
pub fn fixed_point<G>(mut g: G, x0: f64, opts: &SolverOptions) -> Result<SolveOutcome, NumericsError>
where
    G: FnMut(f64) -> f64,
{
    opts.validate()?;
    if !x0.is_finite() {
        return Err(NumericsError::NonFinite { x: x0 });
    }
    let mut x = x0;
    let mut best: Option<SolveOutcome> = None;
    for updates in 0..=opts.max_iter {
        let gx = g(x);
        if !gx.is_finite() {
            return Err(NumericsError::NonFinite { x });
        }
        let residual = gx - x;
        let outcome = SolveOutcome {
            value: x,
            residual,
            iterations: updates,
            converged: false,
        };
        if residual.abs() <= opts.abs_tol + opts.rel_tol * x.abs() {
            return Ok(SolveOutcome { converged: true, ..outcome });
        }
        if best.is_none_or(|b| residual.abs() < b.residual.abs()) {
            best = Some(outcome);
        }
        if updates == opts.max_iter {
            break;
        }
        x += opts.damping * residual;
        if !x.is_finite() {
            break;
        }
    }
    Err(NumericsError::NotConverged(best.expect("at least one evaluation")))
}
