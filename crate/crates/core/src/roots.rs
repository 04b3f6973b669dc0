//! Bracketed scalar root finding.

use crate::error::{invalid, Error, Result};

/// Doublings allowed when expanding a bracket.
pub const MAX_DOUBLINGS: usize = 200;

#[derive(Debug, Clone, Copy)]
pub struct Root {
    pub x: f64,
    pub fx: f64,
    pub iterations: usize,
}

/// Root of an increasing function on `[lo, hi]` with `f(lo) ≤ 0 ≤ f(hi)`.
///
/// Newton steps from `f_df` are taken whenever they land strictly inside the
/// current bracket; otherwise the bracket is bisected. Stops once
/// `|f| ≤ tol` or the bracket cannot shrink further in floating point.
pub fn newton_bisect(
    f_df: impl Fn(f64) -> (f64, f64),
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Root> {
    if !(lo <= hi) {
        return invalid(format!("empty bracket [{lo}, {hi}]"));
    }
    let (flo, _) = f_df(lo);
    if flo >= 0.0 {
        return Ok(Root {
            x: lo,
            fx: flo,
            iterations: 0,
        });
    }
    let (fhi, _) = f_df(hi);
    if fhi <= 0.0 {
        return Ok(Root {
            x: hi,
            fx: fhi,
            iterations: 0,
        });
    }
    let mut x = 0.5 * (lo + hi);
    let mut best = Root {
        x: hi,
        fx: fhi,
        iterations: 0,
    };
    for it in 1..=max_iter {
        let (fx, dfx) = f_df(x);
        if !fx.is_finite() {
            return Err(Error::NonFinite(format!("root function at {x}")));
        }
        if fx.abs() < best.fx.abs() {
            best = Root {
                x,
                fx,
                iterations: it,
            };
        }
        if fx.abs() <= tol {
            return Ok(Root {
                x,
                fx,
                iterations: it,
            });
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = if dfx > 0.0 { x - fx / dfx } else { f64::NAN };
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if next <= lo || next >= hi || next == x {
            // bracket exhausted at floating-point resolution
            best.iterations = it;
            return Ok(best);
        }
        x = next;
    }
    Err(Error::NonConvergence(format!(
        "bracketed Newton: {max_iter} iterations, best residual {:e} at {}",
        best.fx, best.x
    )))
}

/// Plain bisection for an increasing `f` with `f(lo) ≤ 0 ≤ f(hi)`, run to
/// floating-point resolution or `|f| ≤ tol`.
pub fn bisect(f: impl Fn(f64) -> Result<f64>, lo: f64, hi: f64, tol: f64) -> Result<Root> {
    let (mut lo, mut hi) = (lo, hi);
    let flo = f(lo)?;
    if flo >= 0.0 {
        return Ok(Root {
            x: lo,
            fx: flo,
            iterations: 0,
        });
    }
    let fhi = f(hi)?;
    if fhi <= 0.0 {
        return Ok(Root {
            x: hi,
            fx: fhi,
            iterations: 0,
        });
    }
    let mut best = if -flo < fhi {
        Root {
            x: lo,
            fx: flo,
            iterations: 0,
        }
    } else {
        Root {
            x: hi,
            fx: fhi,
            iterations: 0,
        }
    };
    for it in 1..=2200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            best.iterations = it;
            return Ok(best);
        }
        let fm = f(mid)?;
        if !fm.is_finite() {
            return Err(Error::NonFinite(format!("root function at {mid}")));
        }
        if fm.abs() < best.fx.abs() {
            best = Root {
                x: mid,
                fx: fm,
                iterations: it,
            };
        }
        if fm.abs() <= tol {
            return Ok(best);
        }
        if fm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(best)
}

/// Walks `start, start + step, start + 2·step, start + 4·step, …` until
/// `f > 0`; `step` may be negative to walk downwards for `f < 0`.
pub fn expand(f: impl Fn(f64) -> Result<f64>, start: f64, step: f64, upward: bool) -> Result<f64> {
    let mut d = step;
    for _ in 0..MAX_DOUBLINGS {
        let x = start + d;
        let fx = f(x)?;
        if (upward && fx > 0.0) || (!upward && fx < 0.0) {
            return Ok(x);
        }
        d *= 2.0;
    }
    Err(Error::NonConvergence(format!(
        "bracket expansion from {start} failed after {MAX_DOUBLINGS} doublings"
    )))
}
