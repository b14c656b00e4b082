//! Complementary functions and the `h`-function.
//!
//! For a primal point `t = e^u` the dual slope is `σ = Φ'(t)` and the
//! conjugate value is `Φ*(σ) = tΦ'(t) - Φ(t)`. The `h`-function
//! `h(x) = (Φ*)⁻¹(e^x)` is then the curve `x = ln Φ*(σ(u))`, `h = σ(u)`, and
//! its own conjugate `h*` is a second curve over the same parameter. All four
//! objects are therefore explicit functions of `u`, and each inverse needs a
//! single bisection in `u`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::nfunctions::{exp_checked, Family, Local, NFunction};
use crate::roots::{bisect_bracket_tol, golden_max, solve_increasing};

const U_TOL: f64 = 1e-15;

/// Whether a component is evaluated in closed form or numerically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    ClosedForm,
    Numeric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub phi_star: Source,
    pub phi_inverse: Source,
    pub phi_star_inverse: Source,
    pub h: Source,
    pub h_star: Source,
}

/// Everything known about `Φ` at one primal point `t = e^u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualPoint {
    pub u: f64,
    pub local: Local,
    /// `ln Φ'(t)`: the slope at which `t` maximizes `st - Φ(t)`.
    pub ln_sigma: f64,
    /// `ln Φ*(σ)`, which is also the argument `x` with `h(x) = σ`.
    pub ln_phi_star: f64,
    /// `ln h'(x)` at that argument.
    pub ln_h_slope: f64,
}

impl DualPoint {
    /// `h*` at the slope `h'(x)`, i.e. `x h'(x) - h(x)`; may be negative.
    pub fn h_star(&self) -> f64 {
        let l = &self.local;
        let m = l.ln_ratio.exp();
        m * (l.em1 * (self.ln_phi_star - 1.0) - 1.0)
    }

    /// `ln h*`, `-inf` where `h* <= 0`.
    pub fn ln_h_star(&self) -> f64 {
        let l = &self.local;
        let inner = l.em1 * (self.ln_phi_star - 1.0) - 1.0;
        if inner <= 0.0 {
            f64::NEG_INFINITY
        } else {
            l.ln_ratio + inner.ln()
        }
    }
}

/// `Φ` bundled with `Φ*`, the inverses, `h` and `h*`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugatePair {
    phi: NFunction,
    provenance: Provenance,
}

impl ConjugatePair {
    pub fn new(phi: NFunction) -> Result<Self> {
        phi.require_convex()?;
        let closed_conj = matches!(phi.family(), Family::PowerLaw { .. } | Family::ExpMinus { .. });
        let power = matches!(phi.family(), Family::PowerLaw { .. });
        let src = |b: bool| if b { Source::ClosedForm } else { Source::Numeric };
        let provenance = Provenance {
            phi_star: src(closed_conj),
            phi_inverse: src(power),
            phi_star_inverse: src(power),
            h: src(power),
            h_star: src(power),
        };
        Ok(ConjugatePair { phi, provenance })
    }

    pub fn phi(&self) -> &NFunction {
        &self.phi
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    fn dual_index(&self) -> Option<f64> {
        match self.phi.family() {
            Family::PowerLaw { p } => Some(p / (p - 1.0)),
            _ => None,
        }
    }

    pub fn dual_point(&self, u: f64) -> Result<DualPoint> {
        let local = self.phi.local(u)?;
        let ln_phi_star = local.ln_gap(u);
        Ok(DualPoint {
            u,
            local,
            ln_sigma: local.ln_deriv(),
            ln_phi_star,
            ln_h_slope: local.ln_ratio + local.em1.ln(),
        })
    }

    fn solve_u<F>(&self, key: F, target: f64) -> Result<DualPoint>
    where
        F: Fn(&DualPoint) -> f64,
    {
        let (dlo, _) = self.phi.log_domain();
        let start = if dlo.is_finite() { dlo.max(0.0) } else { 0.0 };
        let f = |u: f64| {
            if u < dlo {
                return f64::NEG_INFINITY;
            }
            match self.dual_point(u) {
                Ok(d) => key(&d),
                Err(Error::Range { .. }) => f64::INFINITY,
                Err(_) => f64::NAN,
            }
        };
        let u = solve_increasing(f, target, start, U_TOL).map_err(|e| match e {
            Error::NoBracket(_) | Error::Evaluation { .. } if self.phi.is_sample_only() => {
                let (lo, hi) = self.phi.log_domain();
                Error::Range { value: target.exp(), lo: lo.exp(), hi: hi.exp() }
            }
            other => other,
        })?;
        self.dual_point(u)
    }

    /// Primal maximizer `t*` of `st - Φ(t)`, as `ln t*`.
    pub fn ln_argmax(&self, s: f64) -> Result<f64> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::domain(format!("slope must be positive and finite, got {s}")));
        }
        Ok(self.solve_u(|d| d.ln_sigma, s.ln())?.u)
    }

    /// `Φ*(s)`, closed form where the family has one.
    pub fn conjugate_at(&self, s: f64) -> Result<f64> {
        check_nonneg(s)?;
        if s == 0.0 {
            return Ok(0.0);
        }
        match self.phi.family() {
            Family::PowerLaw { .. } => {
                let q = self.dual_index().unwrap();
                let ln_v = q * s.ln() - q.ln();
                if ln_v < 700.0 {
                    Ok(s.powf(q) / q)
                } else {
                    exp_checked(ln_v)
                }
            }
            Family::ExpMinus { a } => Ok(xlogx_minus(s / a)),
            _ => self.conjugate_numeric(s),
        }
    }

    /// `Φ*(s)` by solving `Φ'(t) = s`, regardless of family.
    pub fn conjugate_numeric(&self, s: f64) -> Result<f64> {
        check_nonneg(s)?;
        if s == 0.0 {
            return Ok(0.0);
        }
        exp_checked(self.ln_conjugate(s)?)
    }

    /// `ln Φ*(s)`, finite even when `Φ*(s)` is not representable.
    pub fn ln_conjugate(&self, s: f64) -> Result<f64> {
        check_nonneg(s)?;
        if s == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(self.solve_u(|d| d.ln_sigma, s.ln())?.ln_phi_star)
    }

    /// Brute-force `sup_s (st - Φ*(s))` by golden section in `ln s`.
    pub fn biconjugate_at(&self, t: f64) -> Result<f64> {
        check_nonneg(t)?;
        if t == 0.0 {
            return Ok(0.0);
        }
        let obj = |ls: f64| -> f64 {
            let s = ls.exp();
            match self.conjugate_at(s) {
                Ok(v) => s * t - v,
                Err(_) => f64::NEG_INFINITY,
            }
        };
        // coarse scan in ln s, then golden section around the best cell; the
        // scan must reach past ln Φ'(t), which is about t for exponential growth
        let top = self.phi.local(t.ln()).map(|l| l.ln_deriv()).unwrap_or(60.0).max(60.0) + 5.0;
        let cells = ((top + 60.0) / 0.25).ceil() as usize;
        let grid: Vec<f64> = (0..=cells).map(|i| -60.0 + 0.25 * i as f64).collect();
        let (_, _, i) = crate::roots::refined_grid_max(obj, &grid, 0, 1);
        let lo = grid[i.saturating_sub(1)];
        let hi = grid[(i + 1).min(grid.len() - 1)];
        let (_, v) = golden_max(obj, lo, hi, 1e-13);
        Ok(v)
    }

    /// `Φ⁻¹(y)`.
    pub fn phi_inverse(&self, y: f64) -> Result<f64> {
        self.phi.eval_inverse(y)
    }

    /// `(Φ*)⁻¹(y)`.
    pub fn phi_star_inverse(&self, y: f64) -> Result<f64> {
        check_nonneg(y)?;
        if y == 0.0 {
            return Ok(0.0);
        }
        if !y.is_finite() {
            return Err(Error::domain("inverse needs a finite value"));
        }
        exp_checked(self.ln_phi_star_inverse(y.ln())?)
    }

    /// `ln (Φ*)⁻¹(e^x)`, i.e. `ln h(x)`.
    pub fn ln_phi_star_inverse(&self, x: f64) -> Result<f64> {
        if let Some(q) = self.dual_index() {
            return Ok((q.ln() + x) / q);
        }
        Ok(self.solve_u(|d| d.ln_phi_star, x)?.ln_sigma)
    }

    /// `h(x) = (Φ*)⁻¹(e^x)`.
    pub fn h_at(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::domain("h needs a finite argument"));
        }
        exp_checked(self.ln_h(x)?)
    }

    pub fn ln_h(&self, x: f64) -> Result<f64> {
        self.ln_phi_star_inverse(x)
    }

    /// `ln h(x)` by root solving, even where a closed form exists.
    pub fn ln_h_numeric(&self, x: f64) -> Result<f64> {
        Ok(self.solve_u(|d| d.ln_phi_star, x)?.ln_sigma)
    }

    /// `h'(x)`.
    pub fn h_slope(&self, x: f64) -> Result<f64> {
        exp_checked(self.ln_h_slope(x)?)
    }

    /// `ln h'(x)`, finite where `h'` itself overflows.
    pub fn ln_h_slope(&self, x: f64) -> Result<f64> {
        if let Some(q) = self.dual_index() {
            return Ok((q.ln() + x) / q - q.ln());
        }
        Ok(self.solve_u(|d| d.ln_phi_star, x)?.ln_h_slope)
    }

    /// `τ₀ = h(1)`: above this `h*` is positive and strictly increasing.
    pub fn tau0(&self) -> Result<f64> {
        self.h_at(1.0)
    }

    /// Dual point whose `h`-slope equals `s`.
    pub fn point_for_h_slope(&self, s: f64) -> Result<DualPoint> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::domain(format!("slope must be positive and finite, got {s}")));
        }
        self.solve_u(|d| d.ln_h_slope, s.ln())
    }

    /// `h*(s) = sup_x (sx - h(x))`.
    pub fn hstar_at(&self, s: f64) -> Result<f64> {
        check_nonneg(s)?;
        if s == 0.0 {
            return Ok(0.0);
        }
        if let Some(q) = self.dual_index() {
            let c = q.powf(1.0 / q);
            return Ok(q * s * ((q * s / c).ln() - 1.0));
        }
        Ok(self.point_for_h_slope(s)?.h_star())
    }

    /// `(h*)⁻¹(y)` on the strict-increase region `s > τ₀`.
    pub fn hstar_inverse_at(&self, y: f64) -> Result<f64> {
        Ok(self.hstar_inverse_point(y)?.ln_h_slope.exp())
    }

    /// Dual point with `h*(h'(x)) = y`, restricted to slopes above `τ₀`.
    pub fn hstar_inverse_point(&self, y: f64) -> Result<DualPoint> {
        let tau0 = self.tau0()?;
        let floor = self.hstar_at(tau0)?;
        if !(y > floor) || !y.is_finite() {
            return Err(Error::Domain(format!(
                "(h*)^-1 is defined above h*(tau0) = {floor} with tau0 = h(1) = {tau0}; got {y}"
            )));
        }
        let p0 = self.point_for_h_slope(tau0)?;
        let target = y.ln();
        let f = |u: f64| match self.dual_point(u) {
            Ok(d) => d.ln_h_star() - target,
            Err(Error::Range { .. }) => f64::INFINITY,
            Err(_) => f64::NAN,
        };
        let mut hi = p0.u.abs().max(1.0) + p0.u;
        let mut guard = 0;
        while f(hi) < 0.0 {
            hi = hi * 2.0 + 1.0;
            guard += 1;
            if guard > 2000 || hi > 1e300 {
                return Err(Error::NoBracket(format!("(h*)^-1({y})")));
            }
        }
        let (a, b) = bisect_bracket_tol(f, p0.u, hi, U_TOL, U_TOL)?;
        self.dual_point(0.5 * (a + b))
    }

    /// Young margin `Φ(t) + Φ*(s) - st`.
    pub fn check_young(&self, s: f64, t: f64) -> Result<YoungReport> {
        let phi_t = self.phi.eval(t)?;
        let conj = self.conjugate_at(s)?;
        let margin = phi_t + conj - s * t;
        let tolerance = 1e-9 * (1.0 + s * t);
        Ok(YoungReport { s, t, margin, holds: margin >= -tolerance })
    }

    /// `ρ(t) = Φ⁻¹(t)(Φ*)⁻¹(t)/t`, which lies in `(1, 2]`.
    pub fn check_universal_product(&self, t: f64) -> Result<ProductReport> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::domain(format!("product check needs t > 0, got {t}")));
        }
        let ratio = self.phi_inverse(t)? * self.phi_star_inverse(t)? / t;
        Ok(ProductReport { t, ratio, holds: ratio > 1.0 && ratio <= 2.0 + 1e-9 })
    }
}

/// `(1+x)ln(1+x) - x`, accurate for small `x`.
fn xlogx_minus(x: f64) -> f64 {
    if x.abs() < 0.1 {
        // sum_{k>=2} (-1)^k x^k / (k(k-1))
        let mut sum = 0.0;
        let mut pow = x;
        for k in 2..40 {
            pow *= x;
            let term = pow / (k * (k - 1)) as f64;
            sum += if k % 2 == 0 { term } else { -term };
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        (1.0 + x) * x.ln_1p() - x
    }
}

fn check_nonneg(v: f64) -> Result<()> {
    if v.is_nan() || v < 0.0 {
        Err(Error::domain(format!("argument must be >= 0, got {v}")))
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct YoungReport {
    pub s: f64,
    pub t: f64,
    pub margin: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProductReport {
    pub t: f64,
    pub ratio: f64,
    pub holds: bool,
}

/// Result of comparing two N-functions and their duals on a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderReport {
    /// Grid points where the hypothesis `Φ₁ < Φ₂` held.
    pub points_used: usize,
    pub conjugate_violations: usize,
    pub h_violations: usize,
    pub holds: bool,
}

/// With `Φ₁ ≤ Φ₂` on the grid, checks `Φ₁* ≥ Φ₂*` at the slopes `Φ₂'(t)` and
/// `h₁ ≤ h₂` at the corresponding arguments `ln Φ₂*(Φ₂'(t))`. Grid points
/// where the hypothesis fails are skipped.
pub fn check_conjugate_order(small: &ConjugatePair, large: &ConjugatePair, grid: &[f64]) -> Result<OrderReport> {
    let tol = 1e-9;
    let mut used = 0;
    let mut cv = 0;
    let mut hv = 0;
    for &t in grid {
        let (a, b) = (small.phi().ln_eval(t)?, large.phi().ln_eval(t)?);
        if a > b {
            continue;
        }
        used += 1;
        let s = exp_checked(large.phi().local(t.ln())?.ln_deriv())?;
        let c_small = small.ln_conjugate(s)?;
        let c_large = large.ln_conjugate(s)?;
        if c_small < c_large - tol * (1.0 + c_large.abs()) {
            cv += 1;
        }
        let x = c_large;
        let (h1, h2) = (small.ln_h(x)?, large.ln_h(x)?);
        if h1 > h2 + tol * (1.0 + h2.abs()) {
            hv += 1;
        }
    }
    Ok(OrderReport { points_used: used, conjugate_violations: cv, h_violations: hv, holds: used > 0 && cv == 0 && hv == 0 })
}
