//! Scalar root finding: bisection and a Newton/bisection hybrid.

use crate::error::{Error, Result};

/// Bisection on a sign-changing bracket, run until the bracket can no longer
/// be split in floating point (or `max_iter` halvings).
pub fn bisect<F>(f: F, mut lo: f64, mut hi: f64, max_iter: usize) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::Solver {
            message: format!("bracket [{lo}, {hi}] does not change sign"),
            last: vec![lo, hi],
        });
    }
    for _ in 0..max_iter {
        let mid = lo + (hi - lo) / 2.0;
        if mid <= lo.min(hi) || mid >= lo.max(hi) {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    // the endpoint with the smaller residual
    Ok(if f(lo).abs() <= f(hi).abs() { lo } else { hi })
}

/// Newton steps safeguarded by a bisection bracket.
///
/// `fdf` returns `(f(x), f'(x))`. A Newton step that leaves the bracket or
/// fails to halve the previous step is replaced by a bisection step, so the
/// iteration converges whenever `f(lo)` and `f(hi)` differ in sign.
pub fn newton_safeguarded<F>(fdf: F, a: f64, b: f64, tol: f64, max_iter: usize) -> Result<f64>
where
    F: Fn(f64) -> (f64, f64),
{
    let (fa, _) = fdf(a);
    let (fb, _) = fdf(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Solver {
            message: format!("bracket [{a}, {b}] does not change sign"),
            last: vec![a, b],
        });
    }
    // orient so that f(xl) < 0
    let (mut xl, mut xh) = if fa < 0.0 { (a, b) } else { (b, a) };
    let mut x = 0.5 * (a + b);
    let mut dx_old = (b - a).abs();
    let mut dx = dx_old;
    let (mut fx, mut dfx) = fdf(x);
    for _ in 0..max_iter {
        let newton_out = ((x - xh) * dfx - fx) * ((x - xl) * dfx - fx) > 0.0;
        let slow = (2.0 * fx).abs() > (dx_old * dfx).abs();
        dx_old = dx;
        if newton_out || slow || dfx == 0.0 {
            dx = 0.5 * (xh - xl);
            x = xl + dx;
        } else {
            dx = fx / dfx;
            x -= dx;
        }
        if dx.abs() < tol {
            return Ok(x);
        }
        (fx, dfx) = fdf(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            xl = x;
        } else {
            xh = x;
        }
    }
    Err(Error::Solver {
        message: format!("no convergence after {max_iter} iterations"),
        last: vec![x],
    })
}

/// Central finite difference with step `1e-6 * max(1, |x|)`.
pub fn central_diff<F: Fn(f64) -> f64>(f: &F, x: f64) -> f64 {
    let h = 1e-6 * x.abs().max(1.0);
    (f(x + h) - f(x - h)) / (2.0 * h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_finds_sqrt2() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 200).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn bisect_rejects_bad_bracket() {
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, 50).is_err());
    }

    #[test]
    fn newton_cubic() {
        let r = newton_safeguarded(|x| (x * x * x - x - 2.0, 3.0 * x * x - 1.0), 1.0, 2.0, 1e-14, 100).unwrap();
        assert!((r * r * r - r - 2.0).abs() < 1e-12);
    }

    #[test]
    fn newton_falls_back_on_flat_derivative() {
        // derivative vanishes at the midpoint start
        let r = newton_safeguarded(|x| ((x - 0.3).powi(3), 3.0 * (x - 0.3).powi(2)), -1.0, 1.0, 1e-12, 200).unwrap();
        assert!((r - 0.3).abs() < 1e-4);
    }

    #[test]
    fn central_diff_of_sine() {
        assert!((central_diff(&f64::sin, 0.4) - 0.4f64.cos()).abs() < 1e-9);
    }
}
