//! Improper integrals with convergence classification, and the three
//! integrability conditions built on them.
//!
//! The engine integrates on doubling panels and either extrapolates the tail
//! geometrically (convergent), recognizes a non-decaying `t f(t)`
//! (divergent), or gives up honestly. Integrands are passed as fallible
//! closures so tabulated inputs can stop the engine at the end of their data.

use serde::{Serialize, Serializer};

use crate::conjugate::{ConjugatePair, DualPoint};
use crate::error::{Error, Result};
use crate::nfunctions::{Family, NFunction};

pub const DEFAULT_TOL: f64 = 1e-8;
const MAX_PANELS: usize = 1100;
const MAX_PIECES: usize = 400;
const UNDERFLOW: f64 = 1e-300;
/// Fitted `t f(t)` decay at or below this means divergence.
const DIVERGENCE_SLOPE: f64 = 0.02;
/// `α̂ ln t` above this signals logarithmic decay the slope test cannot judge.
const LOG_DECAY: f64 = 0.5;
const FIT_DECADES: f64 = 4.0;

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991455371120812639,
    0.949107912342758525,
    0.864864423359769073,
    0.741531185599394440,
    0.586087235467691130,
    0.405845151377397167,
    0.207784955007898468,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [0.129484966168869693, 0.279705391489276668, 0.381830050505118945, 0.417959183673469388];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022935322010529225,
    0.063092092629978553,
    0.104790010322250184,
    0.140653259715525919,
    0.169004726639267903,
    0.190350578064785410,
    0.204432940075298892,
    0.209482141084727828,
];

fn checked<F>(f: &mut F, x: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let v = f(x)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Evaluation { at: x, value: v })
    }
}

/// One Gauss–Kronrod 7/15 step: `(kronrod, |kronrod - gauss|)`.
fn gk15<F>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = checked(f, c)?;
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = checked(f, c - dx)? + checked(f, c + dx)?;
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    Ok((k * h, ((k - g) * h).abs()))
}

/// Global adaptive subdivision: keep splitting the piece with the largest
/// error estimate until the summed estimate meets `max(rtol |I|, atol)` or
/// the piece budget runs out.
fn adaptive<F>(f: &mut F, a: f64, b: f64, rtol: f64, atol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (k, e) = gk15(f, a, b)?;
    let mut pieces = vec![(a, b, k, e)];
    let (mut total, mut err) = (k, e);
    while err > (rtol * total.abs()).max(atol) && pieces.len() < MAX_PIECES {
        let worst = (0..pieces.len()).max_by(|&i, &j| pieces[i].3.total_cmp(&pieces[j].3)).unwrap();
        let (lo, hi, k0, e0) = pieces.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            pieces.push((lo, hi, k0, 0.0));
            err -= e0;
            continue;
        }
        let (kl, el) = gk15(f, lo, mid)?;
        let (kr, er) = gk15(f, mid, hi)?;
        total += kl + kr - k0;
        err += el + er - e0;
        pieces.push((lo, mid, kl, el));
        pieces.push((mid, hi, kr, er));
    }
    // re-sum to shed accumulated rounding from the running updates
    let total = pieces.iter().map(|p| p.2).sum();
    let err = pieces.iter().map(|p| p.3).sum();
    Ok((total, err))
}

/// `∫_a^b f` by adaptive Gauss–Kronrod; returns `(value, error estimate)`.
pub fn integrate<F>(mut f: F, a: f64, b: f64, rtol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    if a == b {
        return Ok((0.0, 0.0));
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::domain("finite integration limits required"));
    }
    if a > b {
        let (v, e) = adaptive(&mut f, b, a, rtol, 1e-300)?;
        return Ok((-v, e));
    }
    adaptive(&mut f, a, b, rtol, 1e-300)
}

/// Classification outcome of a tail integral.
#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Converges { value: f64, error: f64 },
    Diverges { evidence: String },
    Inconclusive { evidence: String },
}

impl Verdict {
    pub fn is_converges(&self) -> bool {
        matches!(self, Verdict::Converges { .. })
    }

    pub fn is_diverges(&self) -> bool {
        matches!(self, Verdict::Diverges { .. })
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Verdict::Converges { value, .. } => Some(*value),
            _ => None,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Verdict::Converges { .. } => "converges",
            Verdict::Diverges { .. } => "diverges",
            Verdict::Inconclusive { .. } => "inconclusive",
        }
    }
}

/// Output of [`improper_tail_integral`].
#[derive(Debug, Clone, PartialEq)]
pub struct TailIntegral {
    pub verdict: Verdict,
    /// Fitted power `e` in `f(t) ~ t^e` over the last window of panels.
    pub tail_exponent: Option<f64>,
    /// Right end of the last panel integrated.
    pub truncation: f64,
    /// Sum over the panels actually integrated.
    pub partial_sum: f64,
    pub panels: usize,
    /// Remainder past the truncation from a fitted `(ln t)^{-β}` decay, when
    /// the run stopped on logarithmic decay with `β > 1`.
    pub log_tail: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// `∫₀^∞ h(t)^{-1/n} dt`
    I,
    /// `∫_{h(τ₀)}^∞ dt / (t^{1/n} (h*)⁻¹(t))`
    Second,
    /// `∫₁^∞ dt / (t E(t))`
    GreenE,
    /// A user integrand.
    Generic,
}

/// Convergence decided from the family's asymptotic form rather than samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelVerdict {
    pub converges: bool,
    pub reason: String,
}

/// Combined answer used by callers that need a yes/no.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Conclusion {
    Converges,
    Diverges,
    Unknown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrabilityReport {
    pub condition: Condition,
    /// Name of the integration variable the exponent and truncation refer to.
    pub variable: &'static str,
    pub integral: TailIntegral,
    pub model: Option<ModelVerdict>,
    /// Relative gap between two independent evaluations over a finite range.
    pub cross_check: Option<f64>,
}

impl IntegrabilityReport {
    pub fn verdict(&self) -> &Verdict {
        &self.integral.verdict
    }

    /// Numeric verdict when decisive, the asymptotic model otherwise.
    pub fn conclusion(&self) -> Conclusion {
        match (&self.integral.verdict, &self.model) {
            (Verdict::Converges { .. }, _) => Conclusion::Converges,
            (Verdict::Diverges { .. }, _) => Conclusion::Diverges,
            (Verdict::Inconclusive { .. }, Some(m)) if m.converges => Conclusion::Converges,
            (Verdict::Inconclusive { .. }, Some(_)) => Conclusion::Diverges,
            _ => Conclusion::Unknown,
        }
    }

    /// Whether the numeric verdict contradicts the model.
    pub fn model_conflict(&self) -> bool {
        match (&self.integral.verdict, &self.model) {
            (Verdict::Converges { .. }, Some(m)) => !m.converges,
            (Verdict::Diverges { .. }, Some(m)) => m.converges,
            _ => false,
        }
    }
}

impl Serialize for IntegrabilityReport {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct View<'a> {
            condition: Condition,
            verdict: &'static str,
            value: Option<f64>,
            error: Option<f64>,
            evidence: Option<&'a str>,
            exponent: Option<f64>,
            truncation: f64,
            variable: &'static str,
            partial_sum: f64,
            panels: usize,
            log_tail: Option<f64>,
            model: Option<&'a ModelVerdict>,
            conclusion: Conclusion,
            cross_check: Option<f64>,
        }
        let it = &self.integral;
        let (value, error, evidence) = match &it.verdict {
            Verdict::Converges { value, error } => (Some(*value), Some(*error), None),
            Verdict::Diverges { evidence } | Verdict::Inconclusive { evidence } => (None, None, Some(evidence.as_str())),
        };
        View {
            condition: self.condition,
            verdict: it.verdict.name(),
            value,
            error,
            evidence,
            exponent: it.tail_exponent,
            truncation: it.truncation,
            variable: self.variable,
            partial_sum: it.partial_sum,
            panels: it.panels,
            log_tail: it.log_tail,
            model: self.model.as_ref(),
            conclusion: self.conclusion(),
            cross_check: self.cross_check,
        }
        .serialize(s)
    }
}

/// Least-squares slope of `ys` against `xs`.
fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    sxy / sxx
}

/// Next panel end after `x` on the dyadic grid `{1, 2, 4, ...}`.
fn next_panel_end(x: f64) -> f64 {
    if x < 1.0 {
        return 1.0;
    }
    let mut e = 2f64.powi(x.log2().floor() as i32);
    while e <= x {
        e *= 2.0;
    }
    e
}

/// `∫_a^∞ f` on panels ending at the dyadic points `1, 2, 4, ...` above `a`.
///
/// Anchoring the panels on a fixed grid keeps the result smooth in `a`.
/// Converges once the geometric tail extrapolated from the last three panel
/// sums, plus the quadrature error, is below `tol` times the total. Diverges
/// when the slope `-α̂` of `ln(t f(t))` against `ln t` over the last four
/// decades has `α̂ <= 0.02`, unless `α̂ ln t` shows logarithmic decay, which
/// is reported as inconclusive with a fitted `(ln t)^{-β}` remainder. A range
/// error from `f` ends the run as inconclusive at that point.
pub fn improper_tail_integral<F>(mut f: F, a: f64, tol: f64) -> Result<TailIntegral>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !a.is_finite() {
        return Err(Error::domain("lower limit must be finite"));
    }
    let ln10 = std::f64::consts::LN_10;
    let mut sums: Vec<f64> = Vec::new();
    let mut fit_t: Vec<f64> = Vec::new();
    let mut fit_y: Vec<f64> = Vec::new();
    let mut total = 0.0;
    let mut qerr = 0.0;
    let mut lo = a;
    let mut exponent = None;
    let finish = |verdict, exponent, truncation, total, panels, log_tail| {
        Ok(TailIntegral { verdict, tail_exponent: exponent, truncation, partial_sum: total, panels, log_tail })
    };
    for k in 0..MAX_PANELS {
        let hi = next_panel_end(lo);
        if !hi.is_finite() || hi > 1e300 {
            let ev = format!("abscissa left the floating-point range after {k} panels");
            return finish(Verdict::Inconclusive { evidence: ev }, exponent, lo, total, k, None);
        }
        let step = adaptive(&mut f, lo, hi, tol * 0.1, UNDERFLOW).and_then(|p| Ok((p, checked(&mut f, hi)?)));
        let ((s, e), f_hi) = match step {
            Ok(v) => v,
            Err(Error::Range { .. }) => {
                let ev = format!("integrand only available up to {lo}");
                return finish(Verdict::Inconclusive { evidence: ev }, exponent, lo, total, k, None);
            }
            Err(err) => return Err(err),
        };
        if s < 0.0 || f_hi < 0.0 {
            return Err(Error::Evaluation { at: hi, value: f_hi.min(s) });
        }
        // a sliver before the first grid point is not a panel of its own
        let merge = k == 0 && hi - lo < 0.5 * hi && hi > 1.0;
        if merge {
            total += s;
            qerr += e;
            lo = hi;
            continue;
        }
        sums.push(s);
        total += s;
        qerr += e;
        lo = hi;
        if hi > 0.0 && f_hi > 0.0 {
            fit_t.push(hi.ln());
            fit_y.push((hi * f_hi).ln());
        }
        // exponent over the last four decades (or what is available)
        let last = fit_t.len();
        let mut start = 0;
        let mut window_decades = 0.0;
        if last >= 3 {
            let top = fit_t[last - 1];
            start = fit_t.iter().rposition(|&x| x <= top - FIT_DECADES * ln10).unwrap_or(0).min(last - 3);
            exponent = Some(ls_slope(&fit_t[start..], &fit_y[start..]) - 1.0);
            window_decades = (top - fit_t[start]) / ln10;
        }
        let n = sums.len();
        if n >= 4 {
            if total == 0.0 && f_hi == 0.0 {
                return finish(Verdict::Converges { value: 0.0, error: 0.0 }, exponent, hi, total, n, None);
            }
            let r = (sums[n - 1] / sums[n - 2]).max(sums[n - 2] / sums[n - 3]);
            let tail = if sums[n - 1] == 0.0 && f_hi == 0.0 {
                Some(0.0)
            } else if r < 1.0 {
                Some(sums[n - 1] * r / (1.0 - r))
            } else {
                None
            };
            if let Some(tail) = tail {
                let error = tail + qerr;
                if error <= tol * (total + tail) {
                    let v = Verdict::Converges { value: total + tail, error };
                    return finish(v, exponent, hi, total, n, None);
                }
            }
        }
        if window_decades >= FIT_DECADES - 1e-9 {
            let alpha = -(exponent.unwrap() + 1.0);
            if alpha <= DIVERGENCE_SLOPE {
                let mid = fit_t[last - 1] - 0.5 * FIT_DECADES * ln10;
                if alpha < -DIVERGENCE_SLOPE || alpha * mid < LOG_DECAY {
                    let ev = format!("t f(t) decays like t^-{alpha:.4} over four decades up to {hi:e}");
                    return finish(Verdict::Diverges { evidence: ev }, exponent, hi, total, n, None);
                }
                // t f(t) ~ c (ln t)^{-β}: fit β against ln ln t
                let lnln: Vec<f64> = fit_t[start..].iter().map(|x| x.ln()).collect();
                let beta = -ls_slope(&lnln, &fit_y[start..]);
                let log_tail = (beta > 1.0).then(|| hi * f_hi * hi.ln() / (beta - 1.0));
                let ev = format!("logarithmic decay, t f(t) ~ (ln t)^-{beta:.3} near {hi:e}");
                return finish(Verdict::Inconclusive { evidence: ev }, exponent, hi, total, n, log_tail);
            }
        }
        if f_hi < UNDERFLOW && f_hi > 0.0 && n >= 4 {
            let ev = format!("integrand underflowed at {hi:e} without a geometric tail");
            return finish(Verdict::Inconclusive { evidence: ev }, exponent, hi, total, n, None);
        }
    }
    let ev = format!("panel budget exhausted at {lo:e}");
    finish(Verdict::Inconclusive { evidence: ev }, exponent, lo, total, MAX_PANELS, None)
}

/// Value of a tail integral known to converge: the numeric value, or for
/// slowly convergent families with a converging model, the panel sum plus the
/// fitted logarithmic remainder.
pub fn settled_value(integral: &TailIntegral, model: Option<&ModelVerdict>) -> Result<f64> {
    match (&integral.verdict, model) {
        (Verdict::Converges { value, .. }, _) => Ok(*value),
        (_, Some(m)) if m.converges => Ok(integral.partial_sum + integral.log_tail.unwrap_or(0.0)),
        (v, _) => Err(Error::Precondition(format!("integral did not converge: {v:?}"))),
    }
}

/// Exact convergence of `∫^∞ dt / (t^{a_1} (ln t)^{a_2} (ln ln t)^{a_3} ...)`:
/// converges iff the first `a_i != 1` exceeds 1.
pub fn bertrand_converges(exponents: &[f64]) -> bool {
    match exponents.iter().find(|&&a| a != 1.0) {
        Some(&a) => a > 1.0,
        None => false,
    }
}

/// Asymptotic form of `h` decides conditions I and second for parametric
/// families. For `t^{p0} g_1^{p1} ...` with `p0 = 1`, `h(x) ≍ x^{p1} (ln x)^{p2} ...`.
pub fn integrability_model(phi: &NFunction, n: f64) -> Option<ModelVerdict> {
    match phi.family() {
        Family::PowerLaw { p } => Some(ModelVerdict {
            converges: true,
            reason: format!("h grows like exp(t (p-1)/p) with p = {p}"),
        }),
        Family::ExpMinus { .. } => Some(ModelVerdict { converges: true, reason: "h grows like e^t / t".into() }),
        Family::LogProduct(e) => {
            if e[0] > 1.0 {
                return Some(ModelVerdict {
                    converges: true,
                    reason: format!("leading power {} > 1 makes h exponential", e[0]),
                });
            }
            let a: Vec<f64> = e[1..].iter().map(|p| p / n).collect();
            let converges = bertrand_converges(&a);
            let reason = match e[1..].iter().position(|&p| p != n) {
                Some(i) => format!("first log exponent different from n = {n} is p{} = {}", i + 1, e[i + 1]),
                None => format!("every log exponent equals n = {n}"),
            };
            Some(ModelVerdict { converges, reason })
        }
        Family::Tabulated(spec) => {
            let tail = spec.tail.as_ref()?;
            let model = NFunction::new((**tail).clone()).ok()?;
            integrability_model(&model, n).map(|m| ModelVerdict { reason: format!("tail model: {}", m.reason), ..m })
        }
    }
}

fn check_n(n: f64) -> Result<()> {
    if n >= 2.0 && n.fract() == 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("dimension n must be an integer >= 2, got {n}")))
    }
}

/// `x ↦ h(x)^{-1/n}`.
pub fn i_integrand(pair: &ConjugatePair, n: f64) -> impl Fn(f64) -> Result<f64> + '_ {
    move |x| Ok((-pair.ln_h(x)? / n).exp())
}

/// `∫_from^∞ h(x)^{-1/n} dx` through the tail engine.
pub fn i_tail(pair: &ConjugatePair, n: f64, from: f64, tol: f64) -> Result<TailIntegral> {
    check_n(n)?;
    improper_tail_integral(i_integrand(pair, n), from, tol)
}

/// Classifies and evaluates `I = ∫₀^∞ h(t)^{-1/n} dt`.
///
/// `cross_check` compares `∫₀^X` against the same range written as
/// `∫_1^{e^X} ds / (s (Φ*)⁻¹(s)^{1/n})`.
pub fn i_of(pair: &ConjugatePair, n: f64) -> Result<IntegrabilityReport> {
    i_of_tol(pair, n, DEFAULT_TOL)
}

pub fn i_of_tol(pair: &ConjugatePair, n: f64, tol: f64) -> Result<IntegrabilityReport> {
    let integral = i_tail(pair, n, 0.0, tol)?;
    let x_max = integral.truncation.min(40.0);
    let cross_check = if x_max > 0.0 { Some(i_cross_check(pair, n, x_max)?) } else { None };
    Ok(IntegrabilityReport {
        condition: Condition::I,
        variable: "t",
        integral,
        model: integrability_model(pair.phi(), n),
        cross_check,
    })
}

fn i_cross_check(pair: &ConjugatePair, n: f64, x_max: f64) -> Result<f64> {
    let (direct, _) = integrate(i_integrand(pair, n), 0.0, x_max, 1e-12)?;
    let s_form = |s: f64| Ok(1.0 / (s * pair.phi_star_inverse(s)?.powf(1.0 / n)));
    let s_max = x_max.exp();
    let mut via_s = 0.0;
    let mut lo = 1.0f64;
    while lo < s_max {
        let hi = (lo * 2.0).min(s_max);
        via_s += integrate(s_form, lo, hi, 1e-12)?.0;
        lo = hi;
    }
    Ok((via_s - direct).abs() / direct.abs().max(1e-300))
}

/// Integrand of the second condition after substituting `t = h*(s(u))`,
/// where `s(u)` is the `h`-slope at the dual point `u`.
///
/// `dt = L(u) s(u) (ln s)'(u) du` and `(h*)⁻¹(t) = s(u)`, so the integrand
/// becomes `L(u) (ln s)'(u) t(u)^{-1/n}`.
fn second_integrand_at(d: &DualPoint, n: f64) -> Result<f64> {
    let l = &d.local;
    let ln_t = d.ln_h_star();
    if !ln_t.is_finite() {
        return Err(Error::domain(format!("h* is not positive at u = {}", d.u)));
    }
    let ds = l.em1 + l.em1_prime / l.em1;
    Ok(d.ln_phi_star * ds * (-ln_t / n).exp())
}

/// Tail of the second-condition integral from `t` in the `u` variable.
fn second_tail(pair: &ConjugatePair, n: f64, t: f64, tol: f64) -> Result<(TailIntegral, f64)> {
    let start = pair.hstar_inverse_point(t)?;
    let f = |u: f64| second_integrand_at(&pair.dual_point(u)?, n);
    Ok((improper_tail_integral(f, start.u, tol)?, start.u))
}

/// Classifies `∫_{h(τ₀)}^∞ dt / (t^{1/n} (h*)⁻¹(t))`; `τ₀` defaults to `h(1)`.
pub fn second_condition(pair: &ConjugatePair, n: f64, tau0: Option<f64>) -> Result<IntegrabilityReport> {
    check_n(n)?;
    let tau0 = match tau0 {
        Some(v) => v,
        None => pair.tau0()?,
    };
    let lower = pair.h_at(tau0)?;
    let (integral, _) = second_tail(pair, n, lower, DEFAULT_TOL)?;
    Ok(IntegrabilityReport {
        condition: Condition::Second,
        variable: "u",
        integral,
        model: integrability_model(pair.phi(), n),
        cross_check: None,
    })
}

/// `H(t) = ∫_t^∞ ds / (s^{1/n} (h*)⁻¹(s))` for a pair whose second
/// condition has been checked once.
#[derive(Debug, Clone)]
pub struct HProfile<'a> {
    pair: &'a ConjugatePair,
    n: f64,
    /// `h(τ₀)`, the left end of the domain.
    pub start: f64,
    pub report: IntegrabilityReport,
}

impl<'a> HProfile<'a> {
    pub fn new(pair: &'a ConjugatePair, n: f64) -> Result<Self> {
        let report = second_condition(pair, n, None)?;
        if report.conclusion() != Conclusion::Converges {
            return Err(Error::Precondition(format!(
                "second integrability condition does not hold for {} with n = {n}",
                pair.phi().label()
            )));
        }
        let start = pair.h_at(pair.tau0()?)?;
        Ok(HProfile { pair, n, start, report })
    }

    pub fn pair(&self) -> &ConjugatePair {
        self.pair
    }

    pub fn n(&self) -> f64 {
        self.n
    }

    /// `H(t)` for `t >= h(τ₀)`.
    pub fn at(&self, t: f64) -> Result<f64> {
        if !(t >= self.start) {
            return Err(Error::domain(format!("H is defined for t >= h(tau0) = {}, got {t}", self.start)));
        }
        self.tail(t)
    }

    /// `∫_t^∞` of the second-condition integrand for any `t` in the domain of `(h*)⁻¹`.
    pub fn tail(&self, t: f64) -> Result<f64> {
        let (integral, _) = second_tail(self.pair, self.n, t, DEFAULT_TOL * 0.01)?;
        settled_value(&integral, self.report.model.as_ref())
    }
}

/// `H(t)` in one call; re-checks the second condition each time.
pub fn h_of(pair: &ConjugatePair, n: f64, t: f64) -> Result<f64> {
    HProfile::new(pair, n)?.at(t)
}

/// Classifies `∫₁^∞ dt / (t E(t))`, written as `∫₀^∞ dw / E(e^w)`.
///
/// `ln_e` returns `ln E(e^w)` as a function of `w = ln t`, so `E` may be
/// evaluated far beyond the f64 range of `t`.
pub fn green_e_condition<F>(ln_e: F, model: Option<ModelVerdict>) -> Result<IntegrabilityReport>
where
    F: Fn(f64) -> Result<f64>,
{
    let integral = improper_tail_integral(|w| Ok((-ln_e(w)?).exp()), 0.0, DEFAULT_TOL)?;
    Ok(IntegrabilityReport { condition: Condition::GreenE, variable: "ln t", integral, model, cross_check: None })
}

/// `ξ(t) = ∫_t^∞ ds / (s E(s))` for `t >= 1` and `ξ(1)` below, with `E`
/// given as `w ↦ ln E(e^w)`.
pub fn xi_of<F>(ln_e: F, t: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(t >= 0.0) {
        return Err(Error::domain(format!("xi needs t >= 0, got {t}")));
    }
    let w0 = t.max(1.0).ln();
    let r = improper_tail_integral(|w| Ok((-ln_e(w)?).exp()), w0, DEFAULT_TOL)?;
    match r.verdict {
        Verdict::Converges { value, .. } => Ok(value),
        v => Err(Error::Precondition(format!("green integral does not converge: {v:?}"))),
    }
}

/// Samples whether `h'` is non-decreasing on `x ∈ [1e2, 1e6]`.
pub fn h_eventually_convex(pair: &ConjugatePair) -> Result<bool> {
    let grid = crate::nfunctions::log_grid(1e2, 1e6, 40);
    let mut prev = f64::NEG_INFINITY;
    for x in grid {
        let s = pair.ln_h_slope(x)?;
        if s < prev - 1e-9 {
            return Ok(false);
        }
        prev = s;
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    fn pair(f: Result<NFunction>) -> ConjugatePair {
        ConjugatePair::new(f.unwrap()).unwrap()
    }

    #[test]
    fn gk_integrates_polynomials_exactly() {
        let (v, _) = integrate(|x| Ok(x.powi(5) - 2.0 * x), 0.0, 2.0, 1e-14).unwrap();
        assert!(rel(v, 64.0 / 6.0 - 4.0) < 1e-14);
        let (v, _) = integrate(|x| Ok(x.sqrt()), 0.0, 1.0, 1e-12).unwrap();
        assert!(rel(v, 2.0 / 3.0) < 1e-11);
    }

    #[test]
    fn engine_examples() {
        let r = improper_tail_integral(|t| Ok((-t).exp()), 0.0, 1e-8).unwrap();
        match r.verdict {
            Verdict::Converges { value, error } => {
                assert!(rel(value, 1.0) < 1e-8);
                assert!(error <= 1e-8 * value);
            }
            v => panic!("{v:?}"),
        }
        let r = improper_tail_integral(|t| Ok(1.0 / t), 1.0, 1e-8).unwrap();
        assert!(r.verdict.is_diverges(), "{r:?}");
        assert!(r.tail_exponent.unwrap() >= -1.0 - 1e-9);
        let r = improper_tail_integral(|t| Ok(t.powf(-0.9)), 1.0, 1e-8).unwrap();
        assert!(r.verdict.is_diverges());
        // ∫₁^∞ dt/(t log²(1+t)) after u = log(1+t): ∫ du e^u/((e^u-1) u²)
        let oracle = {
            let u0 = 2f64.ln();
            let head = integrate(|u: f64| Ok(u.exp() / (u.exp_m1() * u * u)), u0, 40.0, 1e-13).unwrap().0;
            // beyond u = 40 the factor e^u/(e^u-1) is 1 to 4e-18
            head + 1.0 / 40.0
        };
        let r = improper_tail_integral(|w: f64| Ok(1.0 / crate::special::softplus(w).powi(2)), 0.0, 1e-8).unwrap();
        assert!(rel(r.verdict.value().unwrap(), oracle) < 1e-7, "{r:?} vs {oracle}");
    }

    #[test]
    fn engine_reports_log_decay_as_inconclusive() {
        let r = improper_tail_integral(|t| Ok(1.0 / (t * t.ln().powf(2.5))), 3.0, 1e-8).unwrap();
        assert!(matches!(r.verdict, Verdict::Inconclusive { .. }), "{r:?}");
        let exact = 3f64.ln().powf(-1.5) / 1.5;
        assert!(rel(r.partial_sum + r.log_tail.unwrap(), exact) < 1e-6, "{r:?}");
    }

    #[test]
    fn engine_stops_at_table_end() {
        let r = improper_tail_integral(
            |t| if t > 20.0 { Err(Error::Range { value: t, lo: 0.0, hi: 20.0 }) } else { Ok((-t).exp()) },
            0.0,
            1e-8,
        )
        .unwrap();
        assert!(matches!(r.verdict, Verdict::Inconclusive { .. }));
        assert!(r.truncation <= 20.0);
        let bad = improper_tail_integral(|t| Ok(if t > 3.0 { f64::NAN } else { 1.0 }), 0.0, 1e-8);
        assert!(matches!(bad, Err(Error::Evaluation { .. })));
    }

    #[test]
    fn i_of_power_law_matches_analytic() {
        let r = i_of(&pair(NFunction::power(2.0)), 2.0).unwrap();
        let exact = 4.0 * 2f64.powf(-0.25);
        assert!(rel(r.verdict().value().unwrap(), exact) < 1e-8, "{r:?}");
        assert!(r.cross_check.unwrap() < 1e-9);
    }

    #[test]
    fn i_of_log_products() {
        for (p, conv) in [(1.5, false), (2.0, false), (2.5, true), (3.0, true)] {
            let r = i_of(&pair(NFunction::log_product(&[1.0, p])), 2.0).unwrap();
            assert_eq!(r.verdict().is_converges(), conv, "p={p}: {r:?}");
            assert_eq!(r.verdict().is_diverges(), !conv, "p={p}: {r:?}");
            assert!(!r.model_conflict());
        }
        let r = i_of(&pair(NFunction::log_product(&[1.0, 2.0, 5.0])), 2.0).unwrap();
        assert_eq!(r.conclusion(), Conclusion::Converges, "{r:?}");
        let r = i_of(&pair(NFunction::log_product(&[1.0, 2.0, 2.0])), 2.0).unwrap();
        assert_eq!(r.conclusion(), Conclusion::Diverges, "{r:?}");
    }

    #[test]
    fn i_of_expminus_converges() {
        let p = pair(NFunction::exp_minus(1.0));
        let r = i_of(&p, 2.0).unwrap();
        let v = r.verdict().value().unwrap();
        // oracle: same integral by a fixed finite range plus an analytic bound
        // using h(t) >= e^t / Φ⁻¹(e^t) >= e^t / (t + 1) beyond t = 60
        let head = integrate(|x| Ok(p.h_at(x)?.powf(-0.5)), 0.0, 60.0, 1e-12).unwrap().0;
        assert!(rel(v, head) < 1e-8, "{v} vs {head}");
    }

    #[test]
    fn symbolic_criterion() {
        assert!(bertrand_converges(&[1.5]));
        assert!(!bertrand_converges(&[1.0]));
        assert!(bertrand_converges(&[1.0, 1.0, 2.0]));
        assert!(!bertrand_converges(&[1.0, 0.5, 9.0]));
        let m = integrability_model(&NFunction::log_product(&[1.0, 2.0, 2.0, 2.1]).unwrap(), 2.0).unwrap();
        assert!(m.converges);
    }

    #[test]
    fn second_condition_examples() {
        for f in [NFunction::power(2.0), NFunction::exp_minus(1.0)] {
            let r = second_condition(&pair(f), 2.0, None).unwrap();
            assert!(r.verdict().is_converges(), "{r:?}");
        }
        let r = second_condition(&pair(NFunction::log_product(&[1.0, 2.0])), 2.0, None).unwrap();
        assert!(r.verdict().is_diverges(), "{r:?}");
    }

    #[test]
    fn h_profile_shape_and_additivity() {
        let p = pair(NFunction::power(2.0));
        let prof = HProfile::new(&p, 2.0).unwrap();
        let mut prev = f64::INFINITY;
        let mut ratios = vec![];
        for t in crate::nfunctions::log_grid(1e2, 1e6, 9) {
            let v = prof.at(t).unwrap();
            assert!(v < prev);
            prev = v;
            ratios.push(v / (t.powf(-0.5) * t.ln()));
        }
        let (lo, hi) = ratios.iter().fold((f64::MAX, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
        assert!(hi / lo < 10.0, "{ratios:?}");
        // additivity with the finite piece integrated directly in t
        let (t0, t1) = (prof.start * 2.0, 500.0);
        let direct = integrate(|s| Ok(1.0 / (s.powf(0.5) * p.hstar_inverse_at(s)?)), t0, t1, 1e-12).unwrap().0;
        let lhs = prof.at(t1).unwrap() + direct;
        assert!(rel(lhs, prof.at(t0).unwrap()) < 1e-8);
        assert!(matches!(prof.at(prof.start * 0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn h_matches_log_substituted_oracle_for_slow_growth() {
        let p = pair(NFunction::slow_growth(1, 5.0, 2.0));
        let prof = HProfile::new(&p, 2.0).unwrap();
        for tau in [200.0f64, 5e5] {
            let mut oracle = 0.0;
            let mut lo = tau.ln();
            while lo < 690.0 {
                let hi = (lo + 5.0).min(690.0);
                let g = |w: f64| Ok((0.5 * w).exp() / p.hstar_inverse_at(w.exp())?);
                oracle += integrate(g, lo, hi, 1e-12).unwrap().0;
                lo = hi;
            }
            assert!(rel(prof.at(tau).unwrap(), oracle) < 1e-9);
        }
    }

    #[test]
    fn h_requires_second_condition() {
        let p = pair(NFunction::log_product(&[1.0, 1.5]));
        assert!(matches!(HProfile::new(&p, 2.0), Err(Error::Precondition(_))));
    }

    #[test]
    fn xi_examples() {
        let ln_id = |w: f64| Ok(w);
        for t in [1.0, 3.0, 100.0] {
            assert!(rel(xi_of(ln_id, t).unwrap(), 1.0 / t) < 1e-8);
        }
        assert_eq!(xi_of(ln_id, 0.5).unwrap(), xi_of(ln_id, 1.0).unwrap());
        let ln_sq = |w: f64| Ok(2.0 * crate::special::softplus(w).ln());
        assert!(xi_of(ln_sq, 1.0).unwrap().is_finite());
    }

    #[test]
    fn limit_and_doubling_bounds() {
        let p = pair(NFunction::power(2.0));
        let f = i_integrand(&p, 2.0);
        let mut last = f64::INFINITY;
        for t in crate::nfunctions::log_grid(1.0, 1e4, 30) {
            let v = t * f(t).unwrap();
            let twice = 2.0 * integrate(&f, t / 2.0, t, 1e-12).unwrap().0;
            assert!(v <= twice * (1.0 + 1e-12));
            last = v;
        }
        assert!(last < 1e-100);
    }

    #[test]
    fn report_json_fields() {
        let r = i_of(&pair(NFunction::power(2.0)), 2.0).unwrap();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        for key in ["verdict", "value", "error", "exponent", "truncation"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["verdict"], "converges");
    }
}
