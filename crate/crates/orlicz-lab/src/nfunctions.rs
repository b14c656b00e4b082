//! N-functions: parametric families, tabulated generators, evaluation,
//! inversion and sampled validation of the axioms.
//!
//! Every family exposes its local behaviour at `u = ln t` through [`Local`]:
//! `ln(Φ(t)/t)`, the elasticity excess `tΦ'(t)/Φ(t) - 1` and its
//! `u`-derivative. The conjugate and integrability machinery is written
//! entirely in terms of these three numbers, which stay finite long after
//! `t` or `Φ(t)` leave the f64 range.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roots::solve_increasing;
use crate::special::{expm1mx, expminus_elasticity, iterated_log, ln_expm1mx, log_sigmoid, softplus};

/// Arguments above this are evaluated through the log channel.
pub const LOG_SPACE_THRESHOLD: f64 = 1e2;

/// Parametric or tabulated generator, as written in descriptors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params")]
pub enum Family {
    /// `t^p / p`
    #[serde(rename = "power")]
    PowerLaw { p: f64 },
    /// `e^{at} - 1 - at`
    #[serde(rename = "expminus")]
    ExpMinus { a: f64 },
    /// `g_0^{p_0} g_1^{p_1} ... g_k^{p_k}`
    #[serde(rename = "logproduct")]
    LogProduct(Vec<f64>),
    #[serde(rename = "tabulated")]
    Tabulated(TableSpec),
}

/// Sample table `(t_i, Φ(t_i))`, optionally continued past its last node by a
/// parametric tail model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSpec {
    pub t: Vec<f64>,
    pub phi: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail: Option<Box<Family>>,
}

/// Serializable `{family, params}` object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Descriptor {
    #[serde(flatten)]
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asymptotic_floor: Option<f64>,
}

/// Local data at `u = ln t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Local {
    /// `ln(Φ(t)/t)`
    pub ln_ratio: f64,
    /// `tΦ'(t)/Φ(t) - 1`
    pub em1: f64,
    /// `d em1 / du`
    pub em1_prime: f64,
}

impl Local {
    pub fn ln_phi(&self, u: f64) -> f64 {
        u + self.ln_ratio
    }

    /// `ln Φ'(t)`
    pub fn ln_deriv(&self) -> f64 {
        self.ln_ratio + self.em1.ln_1p()
    }

    /// `ln(tΦ'(t) - Φ(t))`, the log of the conjugate at the dual point.
    pub fn ln_gap(&self, u: f64) -> f64 {
        u + self.ln_ratio + self.em1.ln()
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        let n = x.len();
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let del: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = del[0];
            d[1] = del[0];
            return Pchip { x, y, d };
        }
        for k in 1..n - 1 {
            if del[k - 1] * del[k] > 0.0 {
                let w1 = 2.0 * h[k] + h[k - 1];
                let w2 = h[k] + 2.0 * h[k - 1];
                d[k] = (w1 + w2) / (w1 / del[k - 1] + w2 / del[k]);
            }
        }
        let end = |h0: f64, h1: f64, d0: f64, d1: f64| {
            let mut s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
            if s.signum() != d0.signum() {
                s = 0.0;
            } else if d0.signum() != d1.signum() && s.abs() > 3.0 * d0.abs() {
                s = 3.0 * d0;
            }
            s
        };
        d[0] = end(h[0], h[1], del[0], del[1]);
        d[n - 1] = end(h[n - 2], h[n - 3], del[n - 2], del[n - 3]);
        Pchip { x, y, d }
    }

    fn lo(&self) -> f64 {
        self.x[0]
    }

    fn hi(&self) -> f64 {
        self.x[self.x.len() - 1]
    }

    /// value, first and second derivative
    fn eval(&self, u: f64) -> (f64, f64, f64) {
        let n = self.x.len();
        let k = match self.x.binary_search_by(|v| v.partial_cmp(&u).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        };
        let h = self.x[k + 1] - self.x[k];
        let s = (u - self.x[k]) / h;
        let (y0, y1, d0, d1) = (self.y[k], self.y[k + 1], self.d[k] * h, self.d[k + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        let v = (2.0 * s3 - 3.0 * s2 + 1.0) * y0 + (s3 - 2.0 * s2 + s) * d0 + (-2.0 * s3 + 3.0 * s2) * y1 + (s3 - s2) * d1;
        let dv = ((6.0 * s2 - 6.0 * s) * y0 + (3.0 * s2 - 4.0 * s + 1.0) * d0 + (-6.0 * s2 + 6.0 * s) * y1 + (3.0 * s2 - 2.0 * s) * d1) / h;
        let ddv = ((12.0 * s - 6.0) * y0 + (6.0 * s - 4.0) * d0 + (-12.0 * s + 6.0) * y1 + (6.0 * s - 2.0) * d1) / (h * h);
        (v, dv, ddv)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Table {
    spline: Pchip,
    tail: Option<Box<NFunction>>,
}

/// A validated N-function. Immutable and cheap to clone.
#[derive(Debug, Clone, PartialEq)]
pub struct NFunction {
    family: Family,
    table: Option<Arc<Table>>,
    asymptotic_floor: Option<f64>,
    asymptotic_only: bool,
}

impl Serialize for NFunction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.descriptor().serialize(s)
    }
}

impl<'de> Deserialize<'de> for NFunction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let desc = Descriptor::deserialize(d)?;
        NFunction::from_descriptor(&desc).map_err(serde::de::Error::custom)
    }
}

impl NFunction {
    pub fn power(p: f64) -> Result<Self> {
        Self::new(Family::PowerLaw { p })
    }

    pub fn exp_minus(a: f64) -> Result<Self> {
        Self::new(Family::ExpMinus { a })
    }

    pub fn log_product(exponents: &[f64]) -> Result<Self> {
        Self::new(Family::LogProduct(exponents.to_vec()))
    }

    /// `t g_1^n ... g_{k-1}^n g_k^p`, the slow-growth family of depth `k >= 1`.
    pub fn slow_growth(k: usize, p: f64, n: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::domain("slow growth depth k must be at least 1"));
        }
        let mut e = vec![1.0];
        e.extend(std::iter::repeat_n(n, k - 1));
        e.push(p);
        Self::log_product(&e)
    }

    pub fn tabulated(t: Vec<f64>, phi: Vec<f64>) -> Result<Self> {
        Self::new(Family::Tabulated(TableSpec { t, phi, tail: None }))
    }

    pub fn from_descriptor(d: &Descriptor) -> Result<Self> {
        let mut f = Self::new(d.family.clone())?;
        f.asymptotic_floor = d.asymptotic_floor;
        Ok(f)
    }

    pub fn descriptor(&self) -> Descriptor {
        Descriptor { family: self.family.clone(), asymptotic_floor: self.asymptotic_floor }
    }

    pub fn new(family: Family) -> Result<Self> {
        let mut asymptotic_only = false;
        let mut table = None;
        match &family {
            Family::PowerLaw { p } => {
                if !(p.is_finite() && *p > 1.0) {
                    return Err(Error::domain(format!("power law needs p > 1, got {p}")));
                }
            }
            Family::ExpMinus { a } => {
                if !(a.is_finite() && *a > 0.0) {
                    return Err(Error::domain(format!("exponential family needs a > 0, got {a}")));
                }
            }
            Family::LogProduct(e) => {
                if e.is_empty() || e.iter().any(|v| !v.is_finite()) {
                    return Err(Error::domain("log product needs finite exponents p0..pk"));
                }
                if e[0] < 1.0 {
                    return Err(Error::domain(format!("log product needs p0 >= 1, got {}", e[0])));
                }
                match e[1..].iter().find(|&&v| v != 0.0) {
                    Some(&v) if v < 0.0 => {
                        return Err(Error::domain("first non-vanishing log exponent must be positive"));
                    }
                    None if e[0] == 1.0 => {
                        return Err(Error::domain("t itself is not an N-function"));
                    }
                    _ => {}
                }
                asymptotic_only = e[1..].iter().any(|&v| v > 0.0 && v < 1.0);
            }
            Family::Tabulated(spec) => {
                table = Some(Arc::new(build_table(spec)?));
            }
        }
        Ok(NFunction { family, table, asymptotic_floor: None, asymptotic_only })
    }

    pub fn with_asymptotic_floor(mut self, floor: f64) -> Self {
        self.asymptotic_floor = Some(floor);
        self
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    /// Lower end of the range on which asymptotic formulas are trusted.
    pub fn asymptotic_floor(&self) -> Option<f64> {
        self.asymptotic_floor
    }

    /// Set for log products with an exponent in (0,1): usable as a
    /// comparison function, rejected where convexity is required.
    pub fn is_asymptotic_only(&self) -> bool {
        self.asymptotic_only
    }

    pub fn is_tabulated(&self) -> bool {
        matches!(self.family, Family::Tabulated(_))
    }

    /// Tabulated without a tail model: convergence questions are undecidable.
    pub fn is_sample_only(&self) -> bool {
        self.table.as_ref().map(|t| t.tail.is_none()).unwrap_or(false)
    }

    pub fn require_convex(&self) -> Result<()> {
        if self.asymptotic_only {
            Err(Error::Precondition("N-function is tagged asymptotic-only".into()))
        } else {
            Ok(())
        }
    }

    /// Short human label, e.g. `power(p=2)`.
    pub fn label(&self) -> String {
        match &self.family {
            Family::PowerLaw { p } => format!("power(p={p})"),
            Family::ExpMinus { a } => format!("expminus(a={a})"),
            Family::LogProduct(e) => {
                let parts: Vec<String> = e.iter().map(|v| v.to_string()).collect();
                format!("logproduct({})", parts.join(","))
            }
            Family::Tabulated(s) => format!("tabulated({} nodes)", s.t.len()),
        }
    }

    /// Range of `u = ln t` where the function is represented.
    pub fn log_domain(&self) -> (f64, f64) {
        match &self.table {
            Some(t) => (t.spline.lo(), if t.tail.is_some() { f64::INFINITY } else { t.spline.hi() }),
            None => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// Local data at `u = ln t`.
    pub fn local(&self, u: f64) -> Result<Local> {
        if u.is_nan() {
            return Err(Error::Evaluation { at: u, value: u });
        }
        match &self.family {
            Family::PowerLaw { p } => Ok(Local { ln_ratio: (p - 1.0) * u - p.ln(), em1: p - 1.0, em1_prime: 0.0 }),
            Family::ExpMinus { a } => {
                let x = (a.ln() + u).exp();
                if x > 1e15 {
                    return Ok(Local { ln_ratio: x - u, em1: x - 1.0, em1_prime: x });
                }
                let (em1, em1_prime) = expminus_elasticity(x);
                Ok(Local { ln_ratio: ln_expm1mx(x) - u, em1, em1_prime })
            }
            Family::LogProduct(e) => Ok(log_product_local(e, u)),
            Family::Tabulated(_) => {
                let table = self.table.as_ref().expect("table built at construction");
                let s = &table.spline;
                if u < s.lo() - 1e-12 {
                    return Err(Error::Range { value: u.exp(), lo: s.lo().exp(), hi: s.hi().exp() });
                }
                if u <= s.hi() + 1e-12 {
                    let (v, dv, ddv) = s.eval(u.min(s.hi()));
                    return Ok(Local { ln_ratio: v - u, em1: dv - 1.0, em1_prime: ddv });
                }
                match &table.tail {
                    Some(model) => {
                        let top = s.hi();
                        let m_top = model.local(top)?;
                        let m = model.local(u)?;
                        let ln_phi = s.y[s.y.len() - 1] + m.ln_phi(u) - m_top.ln_phi(top);
                        Ok(Local { ln_ratio: ln_phi - u, em1: m.em1, em1_prime: m.em1_prime })
                    }
                    None => Err(Error::Range { value: u.exp(), lo: s.lo().exp(), hi: s.hi().exp() }),
                }
            }
        }
    }

    /// `ln Φ(e^u)`.
    pub fn ln_eval_log(&self, u: f64) -> Result<f64> {
        Ok(self.local(u)?.ln_phi(u))
    }

    /// `ln Φ(t)`; `-inf` at `t = 0`.
    pub fn ln_eval(&self, t: f64) -> Result<f64> {
        check_arg(t)?;
        if t == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        self.ln_eval_log(t.ln())
    }

    /// `Φ(t)`, closed form below [`LOG_SPACE_THRESHOLD`], log channel above.
    pub fn eval(&self, t: f64) -> Result<f64> {
        check_arg(t)?;
        if t == 0.0 {
            return Ok(0.0);
        }
        if t <= LOG_SPACE_THRESHOLD {
            match &self.family {
                Family::PowerLaw { p } => return Ok(t.powf(*p) / p),
                Family::ExpMinus { a } => return Ok(expm1mx(a * t)),
                Family::LogProduct(e) => {
                    let mut v = t.powf(e[0]);
                    for (i, &pi) in e.iter().enumerate().skip(1) {
                        if pi != 0.0 {
                            v *= iterated_log(i, t).powf(pi);
                        }
                    }
                    return Ok(v);
                }
                Family::Tabulated(_) => {}
            }
        }
        exp_checked(self.ln_eval(t)?)
    }

    /// `Φ'(t)`.
    pub fn deriv(&self, t: f64) -> Result<f64> {
        check_arg(t)?;
        if t == 0.0 {
            return Ok(0.0);
        }
        match &self.family {
            Family::PowerLaw { p } => Ok(t.powf(p - 1.0)),
            Family::ExpMinus { a } if a * t < 700.0 => Ok(a * (a * t).exp_m1()),
            _ => exp_checked(self.local(t.ln())?.ln_deriv()),
        }
    }

    /// The unique `t` with `Φ(t) = y`, relative tolerance 1e-12.
    pub fn eval_inverse(&self, y: f64) -> Result<f64> {
        if !y.is_finite() {
            return Err(Error::domain(format!("inverse needs a finite value, got {y}")));
        }
        if y < 0.0 {
            return Err(Error::domain(format!("inverse needs y >= 0, got {y}")));
        }
        if y == 0.0 {
            return Ok(0.0);
        }
        if let Family::PowerLaw { p } = self.family {
            return Ok((p * y).powf(1.0 / p));
        }
        let u = self.ln_inverse_log(y.ln())?;
        let mut t = u.exp();
        // one Newton polish in t where everything is representable
        if t.is_finite() && t <= 1e150 {
            if let (Ok(v), Ok(d)) = (self.eval(t), self.deriv(t)) {
                if d > 0.0 && v.is_finite() {
                    let next = t - (v - y) / d;
                    if next > 0.0 && (next - t).abs() < 1e-6 * t {
                        t = next;
                    }
                }
            }
        }
        Ok(t)
    }

    /// `u = ln t` with `ln Φ(t) = ln_y`.
    pub fn ln_inverse_log(&self, ln_y: f64) -> Result<f64> {
        if let Some(tbl) = &self.table {
            let lo = tbl.spline.lo();
            if ln_y < tbl.spline.y[0] - 1e-12 {
                return Err(Error::Range { value: ln_y.exp(), lo: lo.exp(), hi: tbl.spline.hi().exp() });
            }
            let (dlo, dhi) = self.log_domain();
            return crate::roots::bisect(
                |u| self.ln_eval_log(u).map(|v| v - ln_y).unwrap_or(f64::INFINITY),
                dlo,
                if dhi.is_finite() { dhi } else { find_upper(self, ln_y, dlo)? },
                1e-15,
            )
            .map_err(|e| if ln_y > tbl.spline.y[tbl.spline.y.len() - 1] && tbl.tail.is_none() {
                Error::Range { value: ln_y.exp(), lo: lo.exp(), hi: tbl.spline.hi().exp() }
            } else {
                e
            });
        }
        solve_increasing(|u| self.ln_eval_log(u).unwrap_or(f64::NAN), ln_y, 0.0, 1e-15)
    }

    /// Sampled check of the N-function axioms on a log-spaced grid.
    pub fn validate(&self, grid: &[f64]) -> ValidityReport {
        validate_nfunction(self, grid)
    }
}

fn find_upper(f: &NFunction, ln_y: f64, start: f64) -> Result<f64> {
    let mut u = start.max(0.0) + 1.0;
    for _ in 0..2000 {
        if f.ln_eval_log(u)? >= ln_y {
            return Ok(u);
        }
        u = u * 2.0 + 1.0;
    }
    Err(Error::NoBracket(format!("ln Φ = {ln_y}")))
}

fn check_arg(t: f64) -> Result<()> {
    if t.is_nan() || t < 0.0 {
        Err(Error::domain(format!("argument must be >= 0, got {t}")))
    } else if t.is_infinite() {
        Err(Error::domain("argument must be finite"))
    } else {
        Ok(())
    }
}

pub(crate) fn exp_checked(ln_v: f64) -> Result<f64> {
    let v = ln_v.exp();
    if v.is_infinite() {
        Err(Error::Overflow { log_value: ln_v, partial: false })
    } else {
        Ok(v)
    }
}

fn build_table(spec: &TableSpec) -> Result<Table> {
    let n = spec.t.len();
    if n < 2 || spec.phi.len() != n {
        return Err(Error::Data("table needs at least two (t, phi) pairs of equal length".into()));
    }
    for i in 0..n {
        if !(spec.t[i] > 0.0 && spec.t[i].is_finite() && spec.phi[i] > 0.0 && spec.phi[i].is_finite()) {
            return Err(Error::Data(format!("table entry {i} must be positive and finite")));
        }
        if i > 0 && (spec.t[i] <= spec.t[i - 1] || spec.phi[i] <= spec.phi[i - 1]) {
            return Err(Error::Data(format!("table must be strictly increasing at entry {i}")));
        }
    }
    for i in 1..n - 1 {
        let s0 = (spec.phi[i] - spec.phi[i - 1]) / (spec.t[i] - spec.t[i - 1]);
        let s1 = (spec.phi[i + 1] - spec.phi[i]) / (spec.t[i + 1] - spec.t[i]);
        if s1 < s0 * (1.0 - 1e-12) {
            return Err(Error::Data(format!("table is not convex at entry {i}")));
        }
    }
    let x: Vec<f64> = spec.t.iter().map(|t| t.ln()).collect();
    let y: Vec<f64> = spec.phi.iter().map(|p| p.ln()).collect();
    let tail = match &spec.tail {
        Some(f) => {
            if matches!(**f, Family::Tabulated(_)) {
                return Err(Error::Data("tail model must be parametric".into()));
            }
            Some(Box::new(NFunction::new((**f).clone())?))
        }
        None => None,
    };
    Ok(Table { spline: Pchip::new(x, y), tail })
}

fn log_product_local(e: &[f64], u: f64) -> Local {
    let p0 = e[0];
    let k = e.len() - 1;
    if k == 0 {
        return Local { ln_ratio: (p0 - 1.0) * u, em1: p0 - 1.0, em1_prime: 0.0 };
    }
    if u < -36.0 {
        // every g_j(t) equals t to double precision
        let s: f64 = e[1..].iter().sum();
        return Local { ln_ratio: (p0 - 1.0 + s) * u, em1: p0 - 1.0 + s, em1_prime: 0.0 };
    }
    let mut ln_ratio = (p0 - 1.0) * u;
    let mut em1 = p0 - 1.0;
    let mut em1_prime = 0.0;
    // c = u - (g_1 + ... + g_j) = ln D_j,  D_j = d g_j / du
    let mut g = softplus(u);
    let mut c = log_sigmoid(u);
    let inv_1pt = (-g).exp(); // 1/(1+t)
    let mut sum_d_after_first = 0.0;
    for (j, &pj) in e.iter().enumerate().skip(1) {
        if j > 1 {
            g = g.ln_1p();
            c -= g;
            sum_d_after_first += c.exp();
        }
        let ln_g = g.ln();
        if pj != 0.0 {
            let w = c - ln_g;
            let term = w.exp();
            let dw = inv_1pt - sum_d_after_first - term;
            ln_ratio += pj * ln_g;
            em1 += pj * term;
            em1_prime += pj * term * dw;
        }
    }
    Local { ln_ratio, em1, em1_prime }
}

/// Outcome of [`validate_nfunction`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidityReport {
    pub zero_at_origin: bool,
    pub sublinear_at_zero: bool,
    pub superlinear_at_infinity: bool,
    pub convex: bool,
    pub ratio_monotone: bool,
    pub inconclusive: bool,
    pub pass: bool,
}

/// `n` log-spaced points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1).max(1) as f64).exp()).collect()
}

const SLOPE_EPS: f64 = 1e-3;

/// Sampled N-function axiom check.
///
/// Limits at 0 and infinity are judged by the log-slope of `Φ(t)/t` over the
/// bottom and top two decades of the grid; convexity by non-decreasing secant
/// slopes. Grids not spanning `[1e-6, 1e6]` give an inconclusive report.
pub fn validate_nfunction(phi: &NFunction, grid: &[f64]) -> ValidityReport {
    let mut g: Vec<f64> = grid.iter().copied().filter(|t| *t > 0.0 && t.is_finite()).collect();
    g.sort_by(|a, b| a.partial_cmp(b).unwrap());
    g.dedup();
    let zero_at_origin = phi.eval(0.0).map(|v| v == 0.0).unwrap_or(false);
    let spans = g.len() >= 8 && g[0] <= 1e-6 * (1.0 + 1e-9) && g[g.len() - 1] >= 1e6 * (1.0 - 1e-9);
    let pts: Vec<(f64, f64)> = g.iter().filter_map(|&t| phi.ln_eval(t).ok().map(|l| (t.ln(), l - t.ln()))).collect();
    if !spans || pts.len() < 8 {
        return ValidityReport {
            zero_at_origin,
            sublinear_at_zero: false,
            superlinear_at_infinity: false,
            convex: false,
            ratio_monotone: false,
            inconclusive: true,
            pass: false,
        };
    }
    let slope_over = |sel: Vec<&(f64, f64)>| -> f64 {
        let first = sel[0];
        let last = sel[sel.len() - 1];
        (last.1 - first.1) / (last.0 - first.0)
    };
    let lo_u = pts[0].0;
    let hi_u = pts[pts.len() - 1].0;
    let two_dec = 2.0 * std::f64::consts::LN_10;
    let bottom: Vec<&(f64, f64)> = pts.iter().filter(|p| p.0 <= lo_u + two_dec).collect();
    let top: Vec<&(f64, f64)> = pts.iter().filter(|p| p.0 >= hi_u - two_dec).collect();
    let sublinear_at_zero = bottom.len() >= 2 && slope_over(bottom) > SLOPE_EPS;
    let superlinear_at_infinity = top.len() >= 2 && slope_over(top) > SLOPE_EPS;
    let ratio_monotone = pts.windows(2).all(|w| w[1].1 >= w[0].1 - 1e-12 * (1.0 + w[0].1.abs()));
    // secant slopes of Φ itself, only where Φ is representable
    let vals: Vec<(f64, f64)> = g.iter().filter_map(|&t| phi.eval(t).ok().map(|v| (t, v))).collect();
    let slopes: Vec<f64> = vals.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect();
    let convex = slopes.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-9) - 1e-300);
    let pass = zero_at_origin && sublinear_at_zero && superlinear_at_infinity && convex;
    ValidityReport { zero_at_origin, sublinear_at_zero, superlinear_at_infinity, convex, ratio_monotone, inconclusive: false, pass }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn eval_examples() {
        assert_eq!(NFunction::power(2.0).unwrap().eval(2.0).unwrap(), 2.0);
        assert_eq!(NFunction::exp_minus(1.0).unwrap().eval(0.0).unwrap(), 0.0);
        let lp = NFunction::log_product(&[1.0, 2.0]).unwrap();
        assert!(rel(lp.eval(E - 1.0).unwrap(), E - 1.0) < 1e-15);
    }

    #[test]
    fn inverse_examples() {
        assert!(rel(NFunction::power(2.0).unwrap().eval_inverse(2.0).unwrap(), 2.0) < 1e-15);
        assert!(rel(NFunction::exp_minus(1.0).unwrap().eval_inverse(E - 2.0).unwrap(), 1.0) < 1e-12);
        for f in [NFunction::power(3.0), NFunction::exp_minus(2.0), NFunction::log_product(&[1.0, 2.0, 1.0])] {
            assert_eq!(f.unwrap().eval_inverse(0.0).unwrap(), 0.0);
        }
        assert!(NFunction::power(2.0).unwrap().eval_inverse(f64::NAN).is_err());
    }

    #[test]
    fn construction_rules_for_log_products() {
        assert!(NFunction::log_product(&[0.5, 2.0]).is_err());
        assert!(NFunction::log_product(&[1.0, 0.0, -1.0]).is_err());
        assert!(NFunction::log_product(&[1.0]).is_err());
        assert!(NFunction::log_product(&[1.0, 0.0, 2.0]).is_ok());
        assert!(NFunction::log_product(&[2.0, -1.0]).is_err());
        assert!(NFunction::log_product(&[1.0, 2.0, -1.0]).is_ok());
        let f = NFunction::log_product(&[1.0, 0.5]).unwrap();
        assert!(f.is_asymptotic_only());
        assert!(f.require_convex().is_err());
        assert!(!NFunction::log_product(&[1.0, 2.0]).unwrap().is_asymptotic_only());
    }

    #[test]
    fn log_channel_matches_direct_evaluation() {
        let fams = [
            NFunction::power(1.5).unwrap(),
            NFunction::exp_minus(0.5).unwrap(),
            NFunction::log_product(&[1.0, 2.0, 3.0]).unwrap(),
            NFunction::log_product(&[1.5, 1.0]).unwrap(),
        ];
        for f in &fams {
            for &t in &[1e-5, 0.01, 0.7, 3.0, 99.0] {
                let direct = f.eval(t).unwrap();
                let via_log = f.ln_eval(t).unwrap().exp();
                assert!(rel(via_log, direct) < 1e-12, "{} at {t}", f.label());
            }
        }
    }

    #[test]
    fn local_derivatives_match_finite_differences() {
        let fams = [
            NFunction::exp_minus(2.0).unwrap(),
            NFunction::log_product(&[1.0, 2.0, 2.0, 3.0]).unwrap(),
            NFunction::log_product(&[1.2, 0.0, 2.0]).unwrap(),
        ];
        for f in &fams {
            for &u in &[-8.0, -1.0, 0.0, 2.0, 9.0, 40.0] {
                if let Family::ExpMinus { .. } = f.family() {
                    if u > 5.0 {
                        continue;
                    }
                }
                let h = 1e-5;
                let l = f.local(u).unwrap();
                let lp = f.local(u + h).unwrap();
                let lm = f.local(u - h).unwrap();
                let slope = (lp.ln_phi(u + h) - lm.ln_phi(u - h)) / (2.0 * h);
                assert!((slope - (1.0 + l.em1)).abs() < 1e-7 * slope.abs().max(1.0), "{} u={u}", f.label());
                let curv = (lp.em1 - lm.em1) / (2.0 * h);
                assert!((curv - l.em1_prime).abs() < 1e-6 * (1.0 + curv.abs()), "{} u={u}: {curv} vs {}", f.label(), l.em1_prime);
            }
        }
    }

    #[test]
    fn huge_arguments_stay_finite_in_log_channel() {
        let f = NFunction::log_product(&[1.0, 2.5]).unwrap();
        let l = f.local(1e53).unwrap();
        assert!(l.ln_ratio.is_finite() && l.em1 > 0.0 && l.em1_prime < 0.0);
        assert!(f.eval(1e300).is_ok());
        let g = NFunction::exp_minus(1.0).unwrap();
        assert!(matches!(g.eval(1e3), Err(Error::Overflow { .. })));
    }

    #[test]
    fn validation_examples() {
        let grid = log_grid(1e-6, 1e6, 121);
        assert!(NFunction::power(2.0).unwrap().validate(&grid).pass);
        assert!(NFunction::log_product(&[1.0, 2.0]).unwrap().validate(&grid).pass);
        let lin = NFunction::tabulated(grid.clone(), grid.clone()).unwrap();
        let r = lin.validate(&grid);
        assert!(!r.superlinear_at_infinity && !r.pass);
        assert!(NFunction::power(2.0).unwrap().validate(&log_grid(1e-2, 1e2, 50)).inconclusive);
    }

    #[test]
    fn tabulated_interpolates_power_law() {
        let grid = log_grid(1e-3, 1e3, 200);
        let vals: Vec<f64> = grid.iter().map(|t| t * t * t / 3.0).collect();
        let f = NFunction::tabulated(grid, vals).unwrap();
        for &t in &[2e-3, 0.5, 7.0, 900.0] {
            assert!(rel(f.eval(t).unwrap(), t * t * t / 3.0) < 1e-9);
            assert!(rel(f.deriv(t).unwrap(), t * t) < 1e-6);
        }
        assert!(matches!(f.eval(1e4), Err(Error::Range { .. })));
        assert!(rel(f.eval_inverse(9.0).unwrap(), 3.0) < 1e-10);
    }

    #[test]
    fn tabulated_tail_model_extends_range() {
        let grid = log_grid(1e-2, 1e2, 60);
        let vals: Vec<f64> = grid.iter().map(|t| t * t / 2.0).collect();
        let f = NFunction::new(Family::Tabulated(TableSpec {
            t: grid,
            phi: vals,
            tail: Some(Box::new(Family::PowerLaw { p: 2.0 })),
        }))
        .unwrap();
        assert!(rel(f.eval(1e4).unwrap(), 5e7) < 1e-9);
        assert!(!f.is_sample_only());
    }

    #[test]
    fn rejects_non_convex_tables() {
        let t = vec![1.0, 2.0, 3.0];
        assert!(NFunction::tabulated(t.clone(), vec![1.0, 3.0, 4.0]).is_err());
        assert!(NFunction::tabulated(t, vec![1.0, 0.5, 4.0]).is_err());
    }

    #[test]
    fn descriptor_round_trip() {
        let f = NFunction::log_product(&[1.0, 2.0, 5.0]).unwrap().with_asymptotic_floor(10.0);
        let s = serde_json::to_string(&f).unwrap();
        assert_eq!(s, r#"{"family":"logproduct","params":[1.0,2.0,5.0],"asymptotic_floor":10.0}"#);
        let back: NFunction = serde_json::from_str(&s).unwrap();
        assert_eq!(back, f);
        let p: NFunction = serde_json::from_str(r#"{"family":"power","params":{"p":2}}"#).unwrap();
        assert_eq!(p.eval(2.0).unwrap(), 2.0);
        assert!(serde_json::from_str::<NFunction>(r#"{"family":"power","params":{"p":0.5}}"#).is_err());
    }
}
