//! Green-function integrability and the metric bounds built on it: the
//! comparison function `E`, the diameter criterion and the volume lower
//! bound `v(r) = 1 / (Ψ*∘Ψ̃*)(C/r²)`.
//!
//! Every curve is handled in logarithmic variables. With `w = ln t` and
//! `u` the log-argument of `Φ` and `Φ₁`, the auxiliary function `Φ₂` is the
//! parametric curve `u ↦ (ln Φ₁(e^u)/e^u, ln Φ(e^u)/e^u)`.

use std::collections::HashMap;
use std::sync::Mutex;

use serde::Serialize;

use crate::conjugate::ConjugatePair;
use crate::error::{Error, Result};
use crate::ledger::Ledger;
use crate::nfunctions::{Descriptor, Family, NFunction};
use crate::quadrature::{self, Conclusion, IntegrabilityReport, ModelVerdict};
use crate::roots::golden_max;
use crate::special::{iterated_log_inverse, iterated_logs_from_ln};

/// Spacing of the `ln u` scan behind `Φ₂*` and `E₂`.
const LN_U_STEP: f64 = 0.1;
const LN_U_START: f64 = -7.0;
const LN_U_CAP: f64 = 690.0;
/// Spacing of cached `ln E` nodes in `s = ln(1 + ln t)`.
const NODE_STEP: f64 = 0.05;
const S_CAP: f64 = 690.0;
const STOP_RUN: usize = 20;

fn check_dimension(n: f64) -> Result<()> {
    if n >= 2.0 && n.fract() == 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("dimension n must be an integer >= 2, got {n}")))
    }
}

fn ln_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// `ln(e^a - e^b)` for `b < a`.
fn ln_sub_exp(a: f64, b: f64) -> f64 {
    a + (-(b - a).exp_m1()).ln()
}

/// Unique `z` with `e^{n z + a} = e^b + e^{z + lt}`. The left side minus
/// the right is concave and increasing in `z`, so Newton from the left end
/// climbs monotonically.
fn balance_root(n: f64, a: f64, b: f64, lt: f64) -> f64 {
    let mut z = ((b - a) / n).max((lt - a) / (n - 1.0));
    for _ in 0..100 {
        let rhs = ln_add_exp(b, z + lt);
        let h = n * z + a - rhs;
        let share = (z + lt - rhs).exp();
        let step = h / (n - share);
        z -= step;
        if step.abs() <= 1e-15 * (1.0 + z.abs()) {
            break;
        }
    }
    z
}

/// `Φ`, `Φ₁` and the dimension: everything `E` depends on.
#[derive(Debug)]
pub struct EFunction {
    phi: NFunction,
    phi1: NFunction,
    n: f64,
    nodes: Mutex<HashMap<i64, f64>>,
}

impl Clone for EFunction {
    fn clone(&self) -> Self {
        EFunction::new(self.phi.clone(), self.phi1.clone(), self.n).expect("validated at construction")
    }
}

impl EFunction {
    pub fn new(phi: NFunction, phi1: NFunction, n: f64) -> Result<Self> {
        check_dimension(n)?;
        phi1.require_convex()?;
        Ok(EFunction { phi, phi1, n, nodes: Mutex::new(HashMap::new()) })
    }

    pub fn n(&self) -> f64 {
        self.n
    }

    /// `ln(Φ₁(t)/t)` at `t = e^u`.
    fn lower(&self, u: f64) -> Result<f64> {
        Ok(self.phi1.local(u)?.ln_ratio)
    }

    /// `ln(Φ(t)/t)` at `t = e^u`.
    fn upper(&self, u: f64) -> Result<f64> {
        Ok(self.phi.local(u)?.ln_ratio)
    }

    /// `ln Φ₂(e^{ln_s})`, defined for `s >= Φ₁(1)`.
    pub fn ln_phi2(&self, ln_s: f64) -> Result<f64> {
        let floor = self.lower(0.0)?;
        if ln_s < floor - 1e-12 {
            return Err(Error::domain(format!(
                "phi2 is defined from phi1(1) = {:.6e} on, got s = {:.6e}",
                floor.exp(),
                ln_s.exp()
            )));
        }
        if ln_s <= floor {
            return self.upper(0.0);
        }
        let u = crate::roots::solve_increasing(|u| self.lower(u).unwrap_or(f64::NAN), ln_s, 1.0, 1e-15)?;
        self.upper(u.max(0.0))
    }

    /// Scans `u = 0` and `ln u` on a fixed grid, feeding `(u, a, b)` to
    /// `visit`, which returns `false` to stop.
    fn scan_u<F>(&self, mut visit: F) -> Result<bool>
    where
        F: FnMut(f64, f64, f64) -> bool,
    {
        if !visit(0.0, self.lower(0.0)?, self.upper(0.0)?) {
            return Ok(false);
        }
        let mut x = LN_U_START;
        while x <= LN_U_CAP {
            let u = x.exp();
            let (a, b) = match (self.lower(u), self.upper(u)) {
                (Ok(a), Ok(b)) => (a, b),
                // outside a table: the represented range is exhausted
                _ => return Ok(false),
            };
            if !visit(x, a, b) {
                return Ok(false);
            }
            x += LN_U_STEP;
        }
        Ok(true)
    }

    /// Golden polish in `ln u` around a grid optimum; the `u = 0` node is
    /// polished in `u` on `[0, e^{start}]`.
    fn polish<F>(&self, best_x: f64, at_origin: bool, mut f: F) -> f64
    where
        F: FnMut(f64) -> Result<f64>,
    {
        if at_origin {
            let (_, v) = golden_max(|u| f(u).unwrap_or(f64::NEG_INFINITY), 0.0, LN_U_START.exp(), 1e-12);
            v
        } else {
            let lo = best_x - LN_U_STEP;
            let hi = best_x + LN_U_STEP;
            let (_, v) = golden_max(|x| f(x.exp()).unwrap_or(f64::NEG_INFINITY), lo, hi, 1e-13);
            v
        }
    }

    /// `ln Φ₂*(e^{ln_y})` as a supremum over the parametric curve. `-inf`
    /// encodes `Φ₂* = 0`, `+inf` an unbounded supremum.
    pub fn ln_phi2_star(&self, ln_y: f64) -> Result<f64> {
        let value = |a: f64, b: f64| if b - a < ln_y { Some(ln_sub_exp(a + ln_y, b)) } else { None };
        let mut best = f64::NEG_INFINITY;
        let mut best_x = 0.0;
        let mut at_origin = true;
        let mut run = 0usize;
        let mut seen = false;
        let mut any_feasible = false;
        let mut last_feasible = false;
        let mut last_gap = f64::NEG_INFINITY;
        let finished = self.scan_u(|x, a, b| {
            let first = !seen;
            seen = true;
            match value(a, b) {
                Some(v) => {
                    run = 0;
                    any_feasible = true;
                    last_feasible = true;
                    if v > best {
                        best = v;
                        best_x = x;
                        at_origin = first;
                    }
                }
                None => {
                    // past the feasible stretch, or the gap Φ/Φ₁ keeps rising
                    if any_feasible || b - a > last_gap {
                        run += 1;
                    } else {
                        run = 0;
                    }
                    last_feasible = false;
                }
            }
            last_gap = b - a;
            run < STOP_RUN
        })?;
        if finished && last_feasible {
            return Ok(f64::INFINITY);
        }
        if best == f64::NEG_INFINITY {
            return Ok(best);
        }
        let polished = self.polish(best_x, at_origin, |u| {
            let (a, b) = (self.lower(u)?, self.upper(u)?);
            Ok(value(a, b).unwrap_or(f64::NEG_INFINITY))
        });
        Ok(best.max(polished))
    }

    /// `ln E₁` at `w = ln t`: `E₁^{n-1} = t²/Φ₁(t)`.
    pub fn ln_e1(&self, w: f64) -> Result<f64> {
        let w = w.max(0.0);
        Ok((w - self.lower(w)?) / (self.n - 1.0))
    }

    /// `ln E₂` at `w = ln t`, where `E₂(t) = inf{s : Φ₂*(sⁿ)/s >= t}`.
    ///
    /// Each point of the `Φ₂` curve admits the slopes `s` with
    /// `sⁿσ - ts >= Φ₂(σ)`, a half-line starting at a root, so `E₂` is the
    /// smallest such root over the curve.
    pub fn ln_e2(&self, w: f64) -> Result<f64> {
        let lt = w.max(0.0);
        let n = self.n;
        let mut best = f64::INFINITY;
        let mut best_x = 0.0;
        let mut at_origin = true;
        let mut run = 0usize;
        let mut first = true;
        self.scan_u(|x, a, b| {
            let z = balance_root(n, a, b, lt);
            if z < best {
                best = z;
                best_x = x;
                at_origin = first;
            }
            first = false;
            // roots are at least (b - a)/n
            if (b - a) / n > best + 1.0 {
                run += 1;
            } else {
                run = 0;
            }
            run < STOP_RUN
        })?;
        let polished = -self.polish(best_x, at_origin, |u| Ok(-balance_root(n, self.lower(u)?, self.upper(u)?, lt)));
        Ok(best.min(polished))
    }

    /// `ln E = min(ln E₁, ln E₂)`, with `E(t) = E(1)` for `t < 1`.
    pub fn ln_e_direct(&self, w: f64) -> Result<f64> {
        Ok(self.ln_e1(w)?.min(self.ln_e2(w)?))
    }

    fn node(&self, i: i64) -> Result<f64> {
        if let Some(v) = self.nodes.lock().ok().and_then(|m| m.get(&i).copied()) {
            return Ok(v);
        }
        let v = self.ln_e_direct((i as f64 * NODE_STEP).exp_m1())?;
        if let Ok(mut m) = self.nodes.lock() {
            m.insert(i, v);
        }
        Ok(v)
    }

    /// `ln E` from cached nodes at `w_i = e^{i h} - 1`, cubic Lagrange in `w`
    /// through the four surrounding nodes. Exact at nodes.
    pub fn ln_e(&self, w: f64) -> Result<f64> {
        let w = w.max(0.0);
        let s = w.ln_1p();
        if s > S_CAP {
            return Err(Error::Overflow { log_value: w, partial: false });
        }
        let i = (s / NODE_STEP).floor() as i64;
        let at = |j: i64| (j as f64 * NODE_STEP).exp_m1();
        if w == at(i) {
            return self.node(i);
        }
        let first = (i - 1).max(0);
        let xs: Vec<f64> = (first..first + 4).map(at).collect();
        let mut acc = 0.0;
        for (k, j) in (first..first + 4).enumerate() {
            let mut basis = 1.0;
            for (m, &xm) in xs.iter().enumerate() {
                if m != k {
                    basis *= (w - xm) / (xs[k] - xm);
                }
            }
            acc += basis * self.node(j)?;
        }
        Ok(acc)
    }
}

/// `Φ₂(s)` from `Φ₂(Φ₁(t)/t) = Φ(t)/t`.
pub fn phi2_of(phi: &NFunction, phi1: &NFunction, s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::domain(format!("phi2 needs s > 0, got {s}")));
    }
    let e = EFunction::new(phi.clone(), phi1.clone(), 2.0)?;
    crate::nfunctions::exp_checked(e.ln_phi2(s.ln())?)
}

pub fn e1_at(phi1: &NFunction, n: f64, t: f64) -> Result<f64> {
    EFunction::new(phi1.clone(), phi1.clone(), n)?.ln_e1(check_t(t)?.ln()).map(f64::exp)
}

pub fn e2_at(phi: &NFunction, phi1: &NFunction, n: f64, t: f64) -> Result<f64> {
    EFunction::new(phi.clone(), phi1.clone(), n)?.ln_e2(check_t(t)?.ln()).map(f64::exp)
}

pub fn e_at(phi: &NFunction, phi1: &NFunction, n: f64, t: f64) -> Result<f64> {
    EFunction::new(phi.clone(), phi1.clone(), n)?.ln_e_direct(check_t(t)?.ln()).map(f64::exp)
}

fn check_t(t: f64) -> Result<f64> {
    if t >= 0.0 && t.is_finite() {
        // E is constant on [0, 1]
        Ok(t.max(1.0))
    } else {
        Err(Error::domain(format!("E needs a finite t >= 0, got {t}")))
    }
}

/// Exponents `[p0, p1, ...]` when `f` is a log product.
fn log_exponents(f: &NFunction) -> Option<&[f64]> {
    match f.family() {
        Family::LogProduct(e) => Some(e),
        _ => None,
    }
}

/// `(ℓ, q)` when `Φ₁ = t g_1^n ... g_ℓ^n g_{ℓ+1}^q`.
pub fn witness_shape(phi1: &NFunction, n: f64) -> Option<(usize, f64)> {
    let e = log_exponents(phi1)?;
    if e[0] != 1.0 || e.len() < 2 {
        return None;
    }
    let logs = &e[1..];
    let (last, body) = logs.split_last()?;
    body.iter().all(|&p| p == n).then_some((body.len(), *last))
}

/// Inputs of the metric bounds.
#[derive(Debug, Clone)]
pub struct GeometryInputs {
    pub phi: NFunction,
    pub phi1: NFunction,
    pub n: f64,
    /// Depth of `Ẽ = g_1 ... g_ℓ g_{ℓ+1}^{q'}`.
    pub ell: usize,
    pub q_prime: f64,
    pub ledger: Ledger,
}

impl GeometryInputs {
    pub fn new(phi: NFunction, phi1: NFunction, n: f64) -> Result<Self> {
        check_dimension(n)?;
        phi1.require_convex()?;
        let k = log_exponents(&phi).map(|e| e.len() - 1).unwrap_or(0);
        let ell = witness_shape(&phi1, n).map(|(l, _)| l).unwrap_or(k + 2);
        Ok(GeometryInputs { phi, phi1, n, ell, q_prime: 2.5, ledger: Ledger::default() })
    }

    pub fn with_q_prime(mut self, q_prime: f64) -> Self {
        self.q_prime = q_prime;
        self
    }

    pub fn with_ledger(mut self, ledger: Ledger) -> Self {
        self.ledger = ledger;
        self
    }

    pub fn e_function(&self) -> Result<EFunction> {
        EFunction::new(self.phi.clone(), self.phi1.clone(), self.n)
    }

    /// Conditions on `Φ₁`: dominated by `Φ`, first integrability, growth.
    pub fn conditions(&self) -> Result<ConditionReport> {
        let c1 = dominance(&self.phi, &self.phi1);
        let pair = ConjugatePair::new(self.phi1.clone())?;
        let c2 = quadrature::i_of(&pair, self.n)?.conclusion();
        let c3 = check_growth_l(&self.phi1, &growth_grid());
        Ok(ConditionReport { dominance: c1, integrability: c2, growth: c3.clone(), pass: c1 == Some(true) && c2 == Conclusion::Converges && c3.bounded == Some(true) })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    /// `Φ/Φ₁ → ∞` on samples; `None` when `Φ` cannot be evaluated far out.
    pub dominance: Option<bool>,
    pub integrability: Conclusion,
    pub growth: GrowthReport,
    pub pass: bool,
}

/// `ln(Φ/Φ₁)` sampled at `u = 10^2, 10^4, ..., 10^256`, judged increasing
/// and still rising at the far end.
pub fn dominance(phi: &NFunction, phi1: &NFunction) -> Option<bool> {
    let us: Vec<f64> = (1..=8).map(|k| 10f64.powi(1 << k)).collect();
    let mut gaps = Vec::new();
    for u in us {
        let g = phi.local(u).ok()?.ln_ratio - phi1.local(u).ok()?.ln_ratio;
        gaps.push(g);
    }
    let tail = &gaps[gaps.len() - 4..];
    let rising = tail.windows(2).all(|w| w[1] > w[0] || w[1] == f64::INFINITY);
    Some(rising && (tail[3] - tail[0] > 0.1))
}

/// `(t_1, t_2)` pairs on `[1, 1e8]`.
pub fn growth_grid() -> Vec<(f64, f64)> {
    let ts = crate::nfunctions::log_grid(1.0, 1e8, 33);
    ts.iter().flat_map(|&a| ts.iter().map(move |&b| (a, b))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthReport {
    /// `ln` of the largest ratio `[Φ(t₁t₂)/(t₁t₂)] / [Φ(t₁)/t₁ + Φ(t₂)/t₂]`.
    pub ln_sup: f64,
    pub at: (f64, f64),
    /// `4^{p_1 + ...}` for log products.
    pub analytic_bound: Option<f64>,
    /// `None` for tabulated inputs.
    pub bounded: Option<bool>,
}

/// Empirical constant of the growth condition.
pub fn check_growth_l(phi: &NFunction, grid: &[(f64, f64)]) -> GrowthReport {
    let ratio = |t1: f64, t2: f64| -> Option<f64> {
        let (u1, u2) = (t1.ln(), t2.ln());
        let joint = phi.local(u1 + u2).ok()?.ln_ratio;
        Some(joint - ln_add_exp(phi.local(u1).ok()?.ln_ratio, phi.local(u2).ok()?.ln_ratio))
    };
    let mut ln_sup = f64::NEG_INFINITY;
    let mut at = (1.0, 1.0);
    let mut ln_sup_half = f64::NEG_INFINITY;
    let half = grid.iter().map(|p| p.0.max(p.1)).fold(1.0, f64::max).sqrt();
    for &(t1, t2) in grid {
        let Some(r) = ratio(t1, t2) else { continue };
        if r > ln_sup {
            ln_sup = r;
            at = (t1, t2);
        }
        if t1.max(t2) <= half * (1.0 + 1e-12) {
            ln_sup_half = ln_sup_half.max(r);
        }
    }
    let analytic_bound = log_exponents(phi).filter(|e| e[0] == 1.0).map(|e| 4f64.powf(e[1..].iter().sum()));
    let bounded = if phi.is_sample_only() {
        None
    } else if let Some(b) = analytic_bound {
        Some(ln_sup <= b.ln())
    } else {
        // a bounded ratio barely moves when the grid range is squared
        Some(ln_sup - ln_sup_half < 10f64.ln())
    };
    GrowthReport { ln_sup, at, analytic_bound, bounded }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EBoundReport {
    /// `ln sup Φ₁(E(t)ⁿ)/(E(t) t)`.
    pub ln_sup: f64,
    pub within_ledger: bool,
    pub bounded: bool,
}

/// Empirical constant in `Φ₁(E(t)ⁿ) <= C E(t) t`.
pub fn check_e_bound(inputs: &GeometryInputs, grid: &[f64]) -> Result<EBoundReport> {
    let e = inputs.e_function()?;
    let mut ln_sup = f64::NEG_INFINITY;
    let mut ln_sup_low = f64::NEG_INFINITY;
    let split = grid.iter().cloned().fold(1.0, f64::max).sqrt();
    for &t in grid {
        let w = t.max(1.0).ln();
        let le = e.ln_e_direct(w)?;
        let r = inputs.phi1.ln_eval_log(inputs.n * le)? - le - w;
        ln_sup = ln_sup.max(r);
        if t <= split {
            ln_sup_low = ln_sup_low.max(r);
        }
    }
    Ok(EBoundReport {
        ln_sup,
        within_ledger: ln_sup <= inputs.ledger.c.ln(),
        bounded: ln_sup.is_finite() && ln_sup - ln_sup_low < 10f64.ln(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub points: usize,
    /// Largest `ln[E^{n-1} Φ₁(t)/t²]`; at most 0.
    pub worst_e1: f64,
    /// Largest `ln[(t²/Φ₁(t)) Φ₁(1)/t]`; at most 0.
    pub worst_linear: f64,
    /// Largest `ln[Φ₂*(Eⁿ)/(t E)]`; at most 0.
    pub worst_conjugate: f64,
    pub holds: bool,
}

/// The two defining inequalities of `E`, pointwise on `grid`, relative
/// tolerance 1e-9.
pub fn check_comparisons(e: &EFunction, grid: &[f64]) -> Result<ComparisonReport> {
    let n = e.n;
    let floor = e.lower(0.0)?;
    let mut worst = (f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &t in grid {
        let w = t.max(1.0).ln();
        let le = e.ln_e_direct(w)?;
        let a = e.lower(w)?;
        worst.0 = worst.0.max((n - 1.0) * le - (w - a));
        worst.1 = worst.1.max(floor - a);
        worst.2 = worst.2.max(e.ln_phi2_star(n * le)? - w - le);
    }
    let tol = 1e-9f64.ln_1p();
    Ok(ComparisonReport {
        points: grid.len(),
        worst_e1: worst.0,
        worst_linear: worst.1,
        worst_conjugate: worst.2,
        holds: worst.0 <= tol && worst.1 <= tol && worst.2 <= tol,
    })
}

/// Classifies `∫₁^∞ dt/(t E(t))`.
pub fn green_integrability(e: &EFunction, model: Option<ModelVerdict>) -> Result<IntegrabilityReport> {
    quadrature::green_e_condition(|w| e.ln_e(w), model)
}

/// Asymptotic regimes with closed-form exponents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subcase {
    /// Polynomial or faster growth of `Φ`.
    Poly,
    /// `Φ = t g_1^p`, `p > n`.
    SlowK1,
    /// `Φ = t g_1^n g_2^p`.
    Slow21,
    /// `Φ = t g_1^n ... g_{k-1}^n g_k^p`, `k >= 3`.
    Slow22,
    /// `Φ = t g_1^n ... g_{j-1}^n g_j^{p_j} ...`, `2 <= j < k`.
    Slow23,
}

impl Subcase {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "poly" => Ok(Subcase::Poly),
            "slow-k1" => Ok(Subcase::SlowK1),
            "slow-2.1" => Ok(Subcase::Slow21),
            "slow-2.2" => Ok(Subcase::Slow22),
            "slow-2.3" => Ok(Subcase::Slow23),
            other => Err(Error::Unsupported(format!("unknown subcase '{other}'"))),
        }
    }

    /// Regime of `Φ`, with its log exponents `p_1..p_k` for slow growth.
    pub fn classify(phi: &NFunction, n: f64) -> Result<(Subcase, Vec<f64>)> {
        let e = match phi.family() {
            Family::PowerLaw { .. } | Family::ExpMinus { .. } => return Ok((Subcase::Poly, vec![])),
            Family::LogProduct(e) => e,
            Family::Tabulated(_) => return Err(Error::Unsupported("no closed form for tabulated input".into())),
        };
        if e[0] > 1.0 {
            return Ok((Subcase::Poly, vec![]));
        }
        let mut p = e[1..].to_vec();
        while p.last() == Some(&0.0) {
            p.pop();
        }
        let k = p.len();
        let unsupported = || Error::Unsupported(format!("no closed-form regime for exponents {e:?} with n = {n}"));
        if k == 0 {
            return Err(unsupported());
        }
        if p[0] > n {
            return if k == 1 { Ok((Subcase::SlowK1, p)) } else { Err(unsupported()) };
        }
        if p[0] < n || p.iter().any(|&x| x < n) {
            return Err(unsupported());
        }
        let j0 = p.iter().position(|&x| x > n).ok_or_else(unsupported)? + 1;
        let sub = match (k, j0) {
            (2, _) => Subcase::Slow21,
            (_, j) if j == k => Subcase::Slow22,
            _ => Subcase::Slow23,
        };
        Ok((sub, p))
    }
}

/// `t^{t_exponent} Π g_i^{log_exponents[i-1]}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerLog {
    pub t_exponent: f64,
    pub log_exponents: Vec<f64>,
}

impl PowerLog {
    fn new(t_exponent: f64, log_exponents: Vec<f64>) -> Self {
        PowerLog { t_exponent, log_exponents }
    }

    /// `ln` of the product at `t = e^w`.
    pub fn ln_at(&self, w: f64) -> f64 {
        let g = iterated_logs_from_ln(w, self.log_exponents.len());
        self.t_exponent * w + g.iter().zip(&self.log_exponents).filter(|(_, e)| **e != 0.0).map(|(g, e)| e * g.ln()).sum::<f64>()
    }

    /// Local slope `d ln / d ln t` at `t = e^w`.
    pub fn log_slope(&self, w: f64) -> f64 {
        let g = iterated_logs_from_ln(w, self.log_exponents.len());
        let mut chain = 1.0 / (1.0 + (-w).exp()); // d ln g_1 ... starts from dg_1/dw
        let mut slope = self.t_exponent;
        for (i, e) in self.log_exponents.iter().enumerate() {
            if i > 0 {
                chain /= 1.0 + g[i - 1];
            }
            slope += e * chain / g[i];
        }
        slope
    }
}

/// Closed-form shapes of `E` and of `Ψ*∘Ψ̃*` in one regime.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentRecord {
    pub subcase: Subcase,
    pub e: PowerLog,
    /// `Ψ*∘Ψ̃* ~ G_depth(inner)` with `G_0` the identity, when the Green
    /// integral converges.
    pub composed: Option<(usize, PowerLog)>,
    pub green_converges: bool,
}

impl ExponentRecord {
    /// `ln (Ψ*∘Ψ̃*)` from the closed form at `x = e^{ln_x}`.
    pub fn ln_composed(&self, ln_x: f64) -> Result<f64> {
        let (depth, inner) = self.composed.as_ref().ok_or_else(|| Error::Unsupported("no closed-form volume in this regime".into()))?;
        let y = inner.ln_at(ln_x).exp();
        if *depth == 0 {
            return Ok(y.ln());
        }
        let below = iterated_log_inverse(depth - 1, y)?;
        // ln(e^x - 1)
        Ok(below + (-(-below).exp()).ln_1p())
    }
}

/// Exponent tuples of the closed forms. `p` holds `Φ`'s log exponents
/// `p_1..p_k` (ignored for `poly`); `Φ₁ = t g_1^n ... g_ℓ^n g_{ℓ+1}^q`.
pub fn closed_form_exponents(sub: Subcase, n: f64, p: &[f64], ell: usize, q: f64, q_prime: f64) -> Result<ExponentRecord> {
    check_dimension(n)?;
    let rep = |v: f64, m: usize| vec![v; m];
    let cat = |parts: Vec<Vec<f64>>| parts.concat();
    match sub {
        Subcase::Poly => Ok(ExponentRecord {
            subcase: sub,
            e: PowerLog::new(1.0 / (n - 1.0), cat(vec![rep(-n / (n - 1.0), ell), vec![-q / (n - 1.0)]])),
            composed: Some((0, PowerLog::new(n, cat(vec![rep(2.0 * n, ell), vec![n * q_prime + q]])))),
            green_converges: true,
        }),
        Subcase::SlowK1 => {
            let pp = *p.first().ok_or_else(|| Error::config("slow-k1 needs p"))?;
            if !(pp > n) || ell < 1 {
                return Err(Error::config(format!("slow-k1 needs p > n and ell >= 1, got p = {pp}, ell = {ell}")));
            }
            let d = pp * n - pp + n;
            let m = pp - n;
            Ok(ExponentRecord {
                subcase: sub,
                e: PowerLog::new(m / d, cat(vec![rep(-pp * n / d, ell - 1), vec![-pp * q / d]])),
                composed: Some((
                    0,
                    PowerLog::new(
                        pp * n / m,
                        cat(vec![rep(2.0 * pp * n / m, ell - 1), vec![pp * (n + q) / m, pp * q * q_prime / m]]),
                    ),
                )),
                green_converges: true,
            })
        }
        Subcase::Slow21 | Subcase::Slow22 | Subcase::Slow23 => {
            let k = p.len();
            if k < 2 || p[0] != n || p.iter().any(|&x| x < n) {
                return Err(Error::config(format!("{sub:?} needs p_1 = n and p_i >= n, got {p:?}")));
            }
            if ell < k {
                return Err(Error::config(format!("the witness depth ell = {ell} must be at least k = {k}")));
            }
            // g_{j-1}^{(p_j - n)/n} for j >= 2, then g_k^{-1} ... g_{ℓ-1}^{-1} g_ℓ^{-q/n}
            let mut e_logs = vec![0.0; ell];
            for j in 2..=k {
                e_logs[j - 2] = (p[j - 1] - n) / n;
            }
            for slot in e_logs.iter_mut().take(ell - 1).skip(k - 1) {
                *slot = -1.0;
            }
            e_logs[ell - 1] += -q / n;
            let critical = p[1..].iter().position(|&x| x != 2.0 * n).map(|i| i + 2);
            let green = critical.map(|j| p[j - 1] > 2.0 * n).unwrap_or(false);
            let composed = match critical {
                Some(j0) if green && ell >= j0 => {
                    let big = p[j0 - 1];
                    let d = big - 2.0 * n;
                    let mut logs = Vec::new();
                    for &pi in &p[j0..] {
                        logs.push(-(pi - 2.0 * n) / d);
                    }
                    // g_{k-j0+1} .. g_{ℓ-j0}
                    logs.extend(rep(2.0 * n / d, ell.saturating_sub(k)));
                    logs.push((n + q) / d);
                    logs.push(n * q_prime / d);
                    Some((j0 - 1, PowerLog::new(n / d, logs)))
                }
                _ => None,
            };
            Ok(ExponentRecord { subcase: sub, e: PowerLog::new(0.0, e_logs), composed, green_converges: green })
        }
    }
}

/// Closed form for `(Φ, Φ₁)` when both have a recognised shape.
pub fn closed_form_for(inputs: &GeometryInputs) -> Result<ExponentRecord> {
    let (sub, p) = Subcase::classify(&inputs.phi, inputs.n)?;
    let (ell, q) = witness_shape(&inputs.phi1, inputs.n)
        .ok_or_else(|| Error::Unsupported(format!("phi1 {} is not of the form t g_1^n ... g_l^n g_(l+1)^q", inputs.phi1.label())))?;
    closed_form_exponents(sub, inputs.n, &p, ell, q, inputs.q_prime)
}

/// Largest `|ln(E_numeric/E_closed)|` over `grid`.
pub fn e_closed_form_gap(e: &EFunction, record: &ExponentRecord, grid: &[f64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &t in grid {
        let w = t.max(1.0).ln();
        worst = worst.max((e.ln_e_direct(w)? - record.e.ln_at(w)).abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Feasibility {
    Feasible { witness: Descriptor },
    Infeasible { reason: String },
    Unknown { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessAttempt {
    pub phi1: Descriptor,
    pub conditions: Option<ConditionReport>,
    pub green: Conclusion,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub feasibility: Feasibility,
    /// `true` when decided from the exponents alone.
    pub symbolic: bool,
    pub attempts: Vec<WitnessAttempt>,
}

/// Whether some `Φ₁` makes the Green integral converge, so the diameter is
/// bounded. Log products are decided from their exponents, everything else
/// by searching `Φ₁ = t g_1^n ... g_ℓ^n g_{ℓ+1}^q`.
pub fn diameter_feasible(phi: &NFunction, n: f64, budget: usize) -> Result<FeasibilityReport> {
    check_dimension(n)?;
    if let Some(e) = log_exponents(phi).filter(|e| e[0] == 1.0) {
        return Ok(FeasibilityReport { feasibility: symbolic_feasibility(e, n)?, symbolic: true, attempts: vec![] });
    }
    search_witness(phi, n, budget)
}

fn symbolic_feasibility(e: &[f64], n: f64) -> Result<Feasibility> {
    let p: Vec<f64> = e[1..].to_vec();
    let k = p.len();
    let infeasible = |reason: String| Ok(Feasibility::Infeasible { reason });
    if !quadrature::bertrand_converges(&p.iter().map(|x| x / n).collect::<Vec<_>>()) {
        return infeasible(format!("first integrability condition fails: first exponent different from n = {n} must exceed it"));
    }
    let witness = || {
        let mut w = vec![1.0];
        w.extend(vec![n; k + 2]);
        w.push(2.0 * n);
        NFunction::log_product(&w).map(|f| Feasibility::Feasible { witness: f.descriptor() })
    };
    if p[0] > n {
        return witness();
    }
    match p[1..].iter().position(|&x| x != 2.0 * n) {
        Some(i) if p[i + 1] > 2.0 * n => witness(),
        Some(i) => infeasible(format!("p_{} = {} is the first exponent after p_1 different from 2n and is below 2n = {}", i + 2, p[i + 1], 2.0 * n)),
        None => infeasible(format!("every exponent after p_1 equals 2n = {}; one must exceed it", 2.0 * n)),
    }
}

/// Candidates `ℓ = k+2, k+3, ... <= budget`, `q ∈ {n + 1/2, n + 1, 2n}`;
/// the first passing all conditions wins.
pub fn search_witness(phi: &NFunction, n: f64, budget: usize) -> Result<FeasibilityReport> {
    check_dimension(n)?;
    let k = log_exponents(phi).map(|e| e.len() - 1).unwrap_or(0);
    let mut attempts = Vec::new();
    for ell in (k + 2)..=budget.max(k + 2) {
        for q in [n + 0.5, n + 1.0, 2.0 * n] {
            let mut exps = vec![1.0];
            exps.extend(vec![n; ell]);
            exps.push(q);
            let phi1 = NFunction::log_product(&exps)?;
            let inputs = GeometryInputs::new(phi.clone(), phi1.clone(), n)?;
            let conditions = inputs.conditions().ok();
            let mut green = Conclusion::Unknown;
            if conditions.as_ref().map(|c| c.pass).unwrap_or(false) {
                let model = closed_form_for(&inputs).ok().map(|r| ModelVerdict {
                    converges: r.green_converges,
                    reason: format!("closed form, regime {:?}", r.subcase),
                });
                green = green_integrability(&inputs.e_function()?, model)?.conclusion();
            }
            attempts.push(WitnessAttempt { phi1: phi1.descriptor(), conditions, green });
            if green == Conclusion::Converges {
                return Ok(FeasibilityReport { feasibility: Feasibility::Feasible { witness: phi1.descriptor() }, symbolic: false, attempts });
            }
        }
    }
    Ok(FeasibilityReport {
        feasibility: Feasibility::Unknown { reason: format!("no witness up to depth {}", budget.max(k + 2)) },
        symbolic: false,
        attempts,
    })
}

/// `Ẽ = c g_1 ... g_ℓ g_{ℓ+1}^{q'}`, scaled so that `Ẽ <= E`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TildeE {
    pub scale: f64,
    pub ell: usize,
    pub q_prime: f64,
}

impl TildeE {
    pub fn ln_at(&self, w: f64) -> f64 {
        let w = w.max(0.0);
        let g = iterated_logs_from_ln(w, self.ell + 1);
        let (last, body) = g.split_last().expect("at least one level");
        self.scale.ln() + body.iter().map(|v| v.ln()).sum::<f64>() + self.q_prime * last.ln()
    }
}

/// The volume-bound pipeline for one input set.
#[derive(Debug)]
pub struct GeometryBound {
    pub inputs: GeometryInputs,
    pub e: EFunction,
    pub tilde: TildeE,
    pub green: IntegrabilityReport,
    pub tilde_green: IntegrabilityReport,
    /// `Ẽ/E` at the far end of the scale search; tends to 0.
    pub tilde_ratio_end: f64,
    pub closed_form: Option<ExponentRecord>,
}

/// Builds `Ψ`, `Ẽ`, `Ψ̃` and their conjugates. Needs a convergent Green
/// integral and `q' > 1`.
pub fn psi_pipeline(inputs: GeometryInputs) -> Result<GeometryBound> {
    if !(inputs.q_prime > 1.0) {
        return Err(Error::config(format!("q' = {} leaves the integral of 1/(t E~) divergent; q' must exceed 1", inputs.q_prime)));
    }
    let e = inputs.e_function()?;
    let closed_form = closed_form_for(&inputs).ok();
    let model = closed_form.as_ref().map(|r| ModelVerdict { converges: r.green_converges, reason: format!("closed form, regime {:?}", r.subcase) });
    let green = green_integrability(&e, model)?;
    if green.conclusion() != Conclusion::Converges {
        return Err(Error::Precondition(format!("the Green integral of 1/(t E) does not converge: {:?}", green.verdict())));
    }
    // scale Ẽ under E: coarse scan in s = ln(1+w) until Ẽ/E has clearly turned down
    let base = TildeE { scale: 1.0, ell: inputs.ell, q_prime: inputs.q_prime };
    let mut worst = f64::NEG_INFINITY;
    let mut last = f64::NEG_INFINITY;
    let mut falling = 0usize;
    let mut s: f64 = 0.0;
    while s <= S_CAP {
        let w = s.exp_m1();
        let r = base.ln_at(w) - e.ln_e(w)?;
        worst = worst.max(r);
        falling = if r < last { falling + 1 } else { 0 };
        last = r;
        if falling >= 40 && r < worst - 2.0 {
            break;
        }
        s += 5.0 * NODE_STEP;
    }
    let tilde = TildeE { scale: (-worst.max(0.0)).exp(), ..base };
    let tilde_green = quadrature::green_e_condition(
        |w| Ok(tilde.ln_at(w)),
        Some(ModelVerdict { converges: true, reason: format!("q' = {} > 1", inputs.q_prime) }),
    )?;
    Ok(GeometryBound { inputs, e, tilde, green, tilde_green, tilde_ratio_end: (last - worst.max(0.0)).exp(), closed_form })
}

/// Supremum of `value(s)` over the grid `s = 0, h, 2h, ...` followed by a
/// golden polish; `value` returns `None` where infeasible and the scan stops
/// once `stop` says so.
fn sup_over_s<V, S>(mut value: V, mut stop: S) -> Result<f64>
where
    V: FnMut(f64) -> Result<Option<f64>>,
    S: FnMut(f64, Option<f64>) -> bool,
{
    let mut best = f64::NEG_INFINITY;
    let mut best_s = 0.0;
    let mut i = 0u32;
    loop {
        let s = i as f64 * NODE_STEP;
        if s > S_CAP {
            return Err(Error::Overflow { log_value: s.exp(), partial: false });
        }
        let v = value(s)?;
        if let Some(v) = v {
            if v > best {
                best = v;
                best_s = s;
            }
        }
        if stop(s, v) {
            break;
        }
        i += 1;
    }
    if best == f64::NEG_INFINITY {
        return Ok(best);
    }
    let lo = (best_s - NODE_STEP).max(0.0);
    let (_, polished) = golden_max(|s| value(s).ok().flatten().unwrap_or(f64::NEG_INFINITY), lo, best_s + NODE_STEP, 1e-12);
    Ok(best.max(polished))
}

impl GeometryBound {
    /// `ln Ψ*(e^{ln_y})` with `Ψ(t) = t E(t)`; `-inf` encodes 0.
    pub fn ln_psi_star(&self, ln_y: f64) -> Result<f64> {
        let mut run = 0;
        sup_over_s(
            |s| {
                let w = s.exp_m1();
                let le = self.e.ln_e(w)?;
                Ok((le < ln_y).then(|| w + ln_sub_exp(ln_y, le)))
            },
            |_, v| {
                run = if v.is_none() { run + 1 } else { 0 };
                run >= 5
            },
        )
    }

    /// `ln Ψ̃*(e^{ln_x})` over the curve `w ↦ (Ẽ(e^w), E(e^w))`.
    pub fn ln_tilde_psi_star(&self, ln_x: f64) -> Result<f64> {
        let gaps = std::cell::RefCell::new(Vec::<f64>::new());
        sup_over_s(
            |s| {
                let w = s.exp_m1();
                let lt = self.tilde.ln_at(w);
                let le = self.e.ln_e(w)?;
                gaps.borrow_mut().push(le - lt);
                Ok((le - lt < ln_x).then(|| ln_sub_exp(lt + ln_x, le)))
            },
            |_, _| {
                let gaps = gaps.borrow();
                let m = gaps.len();
                m > STOP_RUN && gaps[m - 1] >= ln_x && gaps[m - STOP_RUN..].windows(2).all(|p| p[1] > p[0])
            },
        )
    }

    /// `ln (Ψ*∘Ψ̃*)(e^{ln_x})`.
    pub fn ln_composed(&self, ln_x: f64) -> Result<f64> {
        let inner = self.ln_tilde_psi_star(ln_x)?;
        if inner == f64::NEG_INFINITY {
            return Ok(inner);
        }
        self.ln_psi_star(inner)
    }

    /// `Ψ̃(v) = E(Ẽ⁻¹(v))`.
    pub fn tilde_psi(&self, v: f64) -> Result<f64> {
        if !(v >= 0.0) {
            return Err(Error::domain(format!("tilde psi needs v >= 0, got {v}")));
        }
        if v == 0.0 {
            return Ok(0.0);
        }
        let lv = v.ln();
        if lv <= self.tilde.ln_at(0.0) {
            return Ok(self.e.ln_e(0.0)?.exp());
        }
        let w = crate::roots::solve_increasing(|w| self.tilde.ln_at(w.max(0.0)), lv, 1.0, 1e-14)?;
        Ok(self.e.ln_e(w)?.exp())
    }

    /// `v(r) = min(1, 1/(Ψ*∘Ψ̃*)(C/r²))`.
    pub fn volume(&self, r: f64) -> Result<f64> {
        Ok(self.ln_volume(r)?.exp())
    }

    pub fn ln_volume(&self, r: f64) -> Result<f64> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::domain(format!("radius must be positive, got {r}")));
        }
        let ln_x = self.inputs.ledger.c.ln() - 2.0 * r.ln();
        Ok((-self.ln_composed(ln_x)?).min(0.0))
    }

    /// `v` on a grid of radii, evaluated in parallel.
    pub fn volume_curve(&self, radii: &[f64]) -> Result<Vec<(f64, f64)>> {
        std::thread::scope(|scope| {
            let handles: Vec<_> = radii.iter().map(|&r| scope.spawn(move || self.volume(r).map(|v| (r, v)))).collect();
            handles.into_iter().map(|h| h.join().expect("volume worker panicked")).collect()
        })
    }

    /// Least-squares slope of `ln v` against `ln r` over `ln r ± 1/4`.
    pub fn volume_slope(&self, r: f64) -> Result<f64> {
        let xs: Vec<f64> = (0..9).map(|i| r.ln() - 0.25 + 0.0625 * i as f64).collect();
        let ys = std::thread::scope(|scope| {
            let hs: Vec<_> = xs.iter().map(|&x| scope.spawn(move || self.ln_volume(x.exp()))).collect();
            hs.into_iter().map(|h| h.join().expect("slope worker panicked")).collect::<Result<Vec<f64>>>()
        })?;
        let mx = xs.iter().sum::<f64>() / 9.0;
        let my = ys.iter().sum::<f64>() / 9.0;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        Ok(sxy / sxx)
    }

    /// Closed-form slope of `ln v` against `ln r` at `r`.
    pub fn closed_volume_slope(&self, r: f64) -> Option<f64> {
        let (depth, inner) = self.closed_form.as_ref()?.composed.as_ref()?;
        (*depth == 0).then(|| 2.0 * inner.log_slope(self.inputs.ledger.c.ln() - 2.0 * r.ln()))
    }

    /// Rows `(t, E, E_closed)`; the last column is NaN without a closed form.
    pub fn e_curve(&self, grid: &[f64]) -> Result<Vec<[f64; 3]>> {
        grid.iter()
            .map(|&t| {
                let w = t.max(1.0).ln();
                let closed = self.closed_form.as_ref().map(|r| r.e.ln_at(w).exp()).unwrap_or(f64::NAN);
                Ok([t, self.e.ln_e_direct(w)?.exp(), closed])
            })
            .collect()
    }
}
