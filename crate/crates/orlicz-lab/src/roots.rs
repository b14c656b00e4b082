//! Bracketing root finders and unimodal maximizers on the real line.

use crate::error::{Error, Result};

const MAX_ITER: usize = 400;

/// Sign-change bisection; returns the final bracket `(lo, hi)` with
/// `f(lo) < 0 <= f(hi)` orientation preserved from the inputs.
pub fn bisect_bracket<F>(f: F, lo: f64, hi: f64, rtol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    bisect_bracket_tol(f, lo, hi, 1e-300, rtol)
}

/// As [`bisect_bracket`], stopping once `hi - lo <= atol + rtol |mid|`.
pub fn bisect_bracket_tol<F>(mut f: F, mut lo: f64, mut hi: f64, atol: f64, rtol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    let flo = f(lo);
    let fhi = f(hi);
    if flo.is_nan() || fhi.is_nan() {
        return Err(Error::Evaluation { at: if flo.is_nan() { lo } else { hi }, value: f64::NAN });
    }
    if flo == 0.0 {
        return Ok((lo, lo));
    }
    if fhi == 0.0 {
        return Ok((hi, hi));
    }
    if (flo > 0.0) == (fhi > 0.0) {
        return Err(Error::NoBracket(format!("[{lo}, {hi}] with values {flo}, {fhi}")));
    }
    let rising = flo < 0.0;
    for _ in 0..MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if mid <= lo.min(hi) || mid >= lo.max(hi) {
            break;
        }
        if (hi - lo).abs() <= rtol * mid.abs() + atol {
            break;
        }
        let fm = f(mid);
        if fm.is_nan() {
            return Err(Error::Evaluation { at: mid, value: fm });
        }
        if fm == 0.0 {
            return Ok((mid, mid));
        }
        if (fm < 0.0) == rising {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo, hi))
}

/// Midpoint of the final bisection bracket.
pub fn bisect<F>(f: F, lo: f64, hi: f64, rtol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let (a, b) = bisect_bracket(f, lo, hi, rtol)?;
    Ok(0.5 * (a + b))
}

/// Solves `f(x) = target` for a non-decreasing `f` on the whole real line.
///
/// `rtol` is applied relative to `max(|x|, 1)`, which suits log-scale unknowns.
///
/// Brackets outward from `x0` with doubling steps, then bisects. `+inf` and
/// `-inf` values are treated as ordinary comparisons, NaN is an error.
pub fn solve_increasing<F>(mut f: F, target: f64, x0: f64, rtol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let (lo, hi) = bracket_increasing(&mut f, target, x0)?;
    let (a, b) = bisect_bracket_tol(|x| f(x) - target, lo, hi, rtol, rtol)?;
    Ok(0.5 * (a + b))
}

/// Finds `lo < hi` with `f(lo) < target <= f(hi)` for non-decreasing `f`.
pub fn bracket_increasing<F>(f: &mut F, target: f64, x0: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    let f0 = f(x0);
    if f0.is_nan() {
        return Err(Error::Evaluation { at: x0, value: f0 });
    }
    let mut step = 1.0f64.max(x0.abs() * 0.5);
    if f0 < target {
        let mut lo = x0;
        loop {
            let hi = lo + step;
            if !hi.is_finite() || hi > 1e300 {
                return Err(Error::NoBracket(format!("value {target} not reached above {x0}")));
            }
            let fh = f(hi);
            if fh.is_nan() {
                return Err(Error::Evaluation { at: hi, value: fh });
            }
            if fh >= target {
                return Ok((lo, hi));
            }
            lo = hi;
            step *= 2.0;
        }
    } else {
        let mut hi = x0;
        loop {
            let lo = hi - step;
            if !lo.is_finite() || lo < -1e300 {
                return Err(Error::NoBracket(format!("value {target} not reached below {x0}")));
            }
            let fl = f(lo);
            if fl.is_nan() {
                return Err(Error::Evaluation { at: lo, value: fl });
            }
            if fl < target {
                return Ok((lo, hi));
            }
            hi = lo;
            step *= 2.0;
        }
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for the maximum of a unimodal `f` on `[lo, hi]`.
pub fn golden_max<F>(mut f: F, mut lo: f64, mut hi: f64, rtol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..MAX_ITER {
        if (hi - lo).abs() <= rtol * (x1.abs() + x2.abs()) * 0.5 + 1e-300 {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Maximum of `f` over the sample points `xs` followed by `rounds` local
/// refinements, each splitting the neighbourhood of the best point into
/// `factor` sub-steps. Suited to objectives that are not known to be unimodal.
pub fn refined_grid_max<F>(mut f: F, xs: &[f64], rounds: usize, factor: usize) -> (f64, f64, usize)
where
    F: FnMut(f64) -> f64,
{
    let mut best_i = 0;
    let mut best = f64::NEG_INFINITY;
    for (i, &x) in xs.iter().enumerate() {
        let v = f(x);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let mut best_x = xs[best_i];
    let mut left = if best_i > 0 { xs[best_i - 1] } else { xs[0] };
    let mut right = if best_i + 1 < xs.len() { xs[best_i + 1] } else { xs[xs.len() - 1] };
    for _ in 0..rounds {
        let step = (right - left) / (2 * factor) as f64;
        if step <= 0.0 {
            break;
        }
        for j in 0..=2 * factor {
            let x = left + step * j as f64;
            let v = f(x);
            if v > best {
                best = v;
                best_x = x;
            }
        }
        left = (best_x - step).max(left);
        right = (best_x + step).min(right);
    }
    (best_x, best, best_i)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_finds_sqrt2() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-15).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn no_bracket_is_reported() {
        assert!(matches!(bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-12), Err(Error::NoBracket(_))));
    }

    #[test]
    fn solve_increasing_expands_both_ways() {
        let r = solve_increasing(|x| x.powi(3), 1e9, 0.0, 1e-15).unwrap();
        assert!((r - 1e3).abs() < 1e-10);
        let r = solve_increasing(|x| x, -12345.5, 3.0, 1e-15).unwrap();
        assert!((r + 12345.5).abs() < 1e-9);
        let r = solve_increasing(|x| if x > 800.0 { f64::INFINITY } else { x }, 799.0, 0.0, 1e-15).unwrap();
        assert!((r - 799.0).abs() < 1e-9);
    }

    #[test]
    fn golden_finds_parabola_peak() {
        let (x, v) = golden_max(|x| -(x - 0.3) * (x - 0.3) + 2.0, -5.0, 5.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-6);
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn refined_grid_beats_coarse_grid() {
        let xs: Vec<f64> = (0..=10).map(|i| i as f64).collect();
        let f = |x: f64| -(x - 2.63).powi(2);
        let (x, v, _) = refined_grid_max(f, &xs, 3, 10);
        assert!((x - 2.63).abs() < 2e-3);
        assert!(v > -4e-6);
    }
}
