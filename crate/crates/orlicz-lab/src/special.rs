//! Iterated logarithms and the overflow-safe elementary helpers the
//! N-function families are built from.

use crate::error::{Error, Result};

/// `ln(1 + e^u)`, exact to rounding for every finite `u`.
pub fn softplus(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

/// `u - ln(1 + e^u)`, i.e. `ln(t / (1 + t))` for `t = e^u`, without cancellation.
pub fn log_sigmoid(u: f64) -> f64 {
    if u > 0.0 {
        -(-u).exp().ln_1p()
    } else {
        u - u.exp().ln_1p()
    }
}

/// `g_k(t)`: `g_0(t) = t`, `g_{k+1}(t) = ln(1 + g_k(t))`.
pub fn iterated_log(k: usize, t: f64) -> f64 {
    let mut g = t;
    for _ in 0..k {
        g = g.ln_1p();
    }
    g
}

/// `G_k(y)`, the inverse of `g_k`, by applying `x -> e^x - 1` k times.
///
/// On overflow the error carries the logarithm of the first level that did
/// not fit, and `partial` is set when further exponentiations were pending.
pub fn iterated_log_inverse(k: usize, y: f64) -> Result<f64> {
    if !y.is_finite() || y < 0.0 {
        return Err(Error::domain(format!("iterated_log_inverse needs finite y >= 0, got {y}")));
    }
    let mut x = y;
    for level in 0..k {
        let next = x.exp_m1();
        if !next.is_finite() {
            return Err(Error::Overflow { log_value: x, partial: level + 1 < k });
        }
        x = next;
    }
    Ok(x)
}

/// `g_1(e^u), ..., g_k(e^u)` computed from `u = ln t`, so `t` itself may be
/// far beyond f64.
pub fn iterated_logs_from_ln(u: f64, k: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(k);
    if k == 0 {
        return out;
    }
    let mut g = softplus(u);
    out.push(g);
    for _ in 1..k {
        g = g.ln_1p();
        out.push(g);
    }
    out
}

const SERIES_CUTOFF: f64 = 1.0;
const SERIES_TERMS: usize = 30;

/// `e^x - 1 - x` without cancellation near zero.
pub fn expm1mx(x: f64) -> f64 {
    if x.abs() < SERIES_CUTOFF {
        // sum_{k>=2} x^k / k!
        let mut term = x * x / 2.0;
        let mut sum = term;
        for k in 3..SERIES_TERMS {
            term *= x / k as f64;
            sum += term;
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        x.exp_m1() - x
    }
}

/// `ln(e^x - 1 - x)` for `x > 0`, finite for all finite `x`.
pub fn ln_expm1mx(x: f64) -> f64 {
    if x < 30.0 {
        expm1mx(x).ln()
    } else {
        x + (-(1.0 + x) * (-x).exp()).ln_1p()
    }
}

/// Elasticity pieces of `F(x) = e^x - 1 - x` viewed through `x = a e^u`.
///
/// Returns `(xF'/F - 1, d/du of that)`; both stay finite for every `x > 0`.
pub fn expminus_elasticity(x: f64) -> (f64, f64) {
    if x < SERIES_CUTOFF {
        // Power series of N = 1 + (x-1)e^x, F, N' = x e^x, F' = e^x - 1.
        let mut n = [0.0f64; SERIES_TERMS];
        let mut f = [0.0f64; SERIES_TERMS];
        let mut dn = [0.0f64; SERIES_TERMS];
        let mut df = [0.0f64; SERIES_TERMS];
        let mut fact = 1.0;
        for k in 0..SERIES_TERMS {
            if k > 0 {
                fact *= k as f64;
            }
            let inv = 1.0 / fact;
            if k >= 2 {
                n[k] = (k as f64 - 1.0) * inv;
                f[k] = inv;
            }
            if k >= 1 {
                df[k] = inv;
                // x e^x has coefficient 1/(k-1)! at x^k
                dn[k] = inv * k as f64;
            }
        }
        let eval = |c: &[f64]| c.iter().rev().fold(0.0, |acc, &ck| acc * x + ck);
        // strip the common x^2 factor from N and F
        let nn = eval(&n[2..]);
        let ff = eval(&f[2..]);
        let em1 = nn / ff;
        // N'F - NF' starts at x^4; build its coefficients exactly by convolution
        let mut cross = [0.0f64; SERIES_TERMS];
        for i in 0..SERIES_TERMS {
            for j in 0..SERIES_TERMS - i {
                cross[i + j] += dn[i] * f[j] - n[i] * df[j];
            }
        }
        // d em1/du = x (N'F - NF')/F^2 ; cross/x^4 over (F/x^2)^2, times x * x
        let c = eval(&cross[4..]);
        let d = x * c / (ff * ff);
        return (em1, d);
    }
    let emx = (-x).exp();
    let om = -(-x).exp_m1(); // 1 - e^{-x}
    let ft = om - x * emx; // F e^{-x}
    let nt = x - 1.0 + emx; // N e^{-x}
    let em1 = nt / ft;
    let d = x * (x * ft - nt * om) / (ft * ft);
    (em1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1e-300)
    }

    #[test]
    fn iterated_log_examples() {
        let e = std::f64::consts::E;
        assert_eq!(iterated_log(0, 5.0), 5.0);
        assert!(close(iterated_log(1, e - 1.0), 1.0, 1e-15));
        assert!(close(iterated_log(2, (e - 1.0).exp() - 1.0), 1.0, 1e-15));
    }

    #[test]
    fn inverse_round_trip_on_log_grid() {
        for k in 0..5 {
            for i in 0..=60 {
                let t = 10f64.powf(-3.0 + 6.0 * i as f64 / 60.0);
                let back = iterated_log_inverse(k, iterated_log(k, t)).unwrap();
                assert!(close(back, t, 1e-10), "k={k} t={t} back={back}");
            }
        }
    }

    #[test]
    fn inverse_overflow_is_flagged() {
        match iterated_log_inverse(2, 50.0) {
            Err(Error::Overflow { partial, log_value }) => {
                assert!(!partial);
                assert!(log_value > 700.0);
            }
            other => panic!("expected overflow, got {other:?}"),
        }
        match iterated_log_inverse(4, 10.0) {
            Err(Error::Overflow { partial, .. }) => assert!(partial),
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn logs_from_ln_match_direct() {
        for &t in &[1e-8, 0.3, 1.0, 7.5, 1e6, 1e200] {
            let v = iterated_logs_from_ln(f64::ln(t), 4);
            for (j, g) in v.iter().enumerate() {
                assert!(close(*g, iterated_log(j + 1, t), 1e-13), "t={t} j={j}");
            }
        }
        // t = e^1000 is not representable, g_1 still is
        let v = iterated_logs_from_ln(1000.0, 2);
        assert!(close(v[0], 1000.0, 1e-15));
        assert!(close(v[1], 1001f64.ln(), 1e-15));
    }

    #[test]
    fn expm1mx_small_and_large() {
        let x = 1e-4;
        assert!(close(expm1mx(x), x * x / 2.0 + x * x * x / 6.0 + x.powi(4) / 24.0, 1e-12));
        assert!(close(expm1mx(2.0), 2f64.exp() - 3.0, 1e-14));
        assert!(close(ln_expm1mx(800.0), 800.0 + (-801.0 * (-800f64).exp()).ln_1p(), 1e-15));
    }

    #[test]
    fn expminus_elasticity_branches_agree() {
        // finite-difference oracle on ln F in u, with x = e^u
        let lnf = |u: f64| ln_expm1mx(u.exp());
        for &x in &[1e-3, 0.2, 0.9, 1.1, 3.0, 40.0] {
            let u = f64::ln(x);
            let h = 1e-5;
            let slope = (lnf(u + h) - lnf(u - h)) / (2.0 * h);
            let (em1, d) = expminus_elasticity(x);
            assert!(close(em1 + 1.0, slope, 1e-8), "x={x}: {} vs {slope}", em1 + 1.0);
            let curv = (lnf(u + h) - 2.0 * lnf(u) + lnf(u - h)) / (h * h);
            assert!((d - curv).abs() < 1e-4 * (1.0 + curv.abs()), "x={x}: {d} vs {curv}");
        }
        // continuity across the series cutoff
        let (a, da) = expminus_elasticity(1.0 - 1e-12);
        let (b, db) = expminus_elasticity(1.0 + 1e-12);
        assert!(close(a, b, 1e-10) && close(da, db, 1e-8));
    }
}
