//! Numeric domination `f ≺ g` (`f(t) <= C₁ g(C₂ t)` for large `t`),
//! equivalence `f ∼ g`, and the certification suite for the closed-form
//! conjugates and `h` asymptotics of the built-in families.
//!
//! Functions are passed in log form: a closure `u -> ln f(e^u)`. Rescaling
//! the argument by `C₂` is a shift of `u` by `ln C₂`, and nothing overflows.

use serde::Serialize;

use crate::conjugate::ConjugatePair;
use crate::error::{Error, Result};
use crate::nfunctions::{Family, NFunction};
use crate::special::iterated_logs_from_ln;

/// `u = ln t  ->  ln f(t)`.
pub type LnFn<'a> = &'a (dyn Fn(f64) -> Result<f64> + Sync);

/// Argument rescalings tried: `C₂ = 2^k`, `|k| <= 10`, nearest to 1 first.
const MAX_SCALE_POWER: i32 = 10;
/// Minimal growth of the log-ratio over the top two decades for `⊁`.
const UNBOUNDED_GROWTH: f64 = 0.5;
const TOP_WINDOW: f64 = 4.605_170_185_988_092; // ln 100

/// Log-spaced sample of `t` in `[e^ln_lo, e^ln_hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogRange {
    pub ln_lo: f64,
    pub ln_hi: f64,
    pub points: usize,
}

impl LogRange {
    pub fn new(ln_lo: f64, ln_hi: f64, points: usize) -> Result<Self> {
        if !(ln_lo.is_finite() && ln_hi.is_finite() && ln_lo < ln_hi) {
            return Err(Error::config(format!("log range needs ln_lo < ln_hi, got [{ln_lo}, {ln_hi}]")));
        }
        if points < 3 {
            return Err(Error::config("log range needs at least 3 points"));
        }
        Ok(LogRange { ln_lo, ln_hi, points })
    }

    pub fn from_t(lo: f64, hi: f64, points: usize) -> Result<Self> {
        if !(lo > 0.0) {
            return Err(Error::config(format!("range must be positive, got lo = {lo}")));
        }
        Self::new(lo.ln(), hi.ln(), points)
    }

    /// Raises the lower end to `floor` (in `t`) if that leaves a range.
    pub fn above(self, floor: Option<f64>) -> Self {
        match floor {
            Some(f) if f > 0.0 && f.ln() > self.ln_lo && f.ln() < self.ln_hi => LogRange { ln_lo: f.ln(), ..self },
            _ => self,
        }
    }

    pub fn grid(&self) -> Vec<f64> {
        let step = (self.ln_hi - self.ln_lo) / (self.points - 1) as f64;
        (0..self.points).map(|i| self.ln_lo + step * i as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// `f ≺ g`
    Prec,
    /// `f ⊁ g` (heuristic: the ratio grows at the top of the range for every `C₂`)
    NotPrec,
    /// `f ∼ g`
    Sim,
    Inconclusive,
}

/// `f(t) <= c1 · g(c2 · t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Witness {
    pub c1: f64,
    pub c2: f64,
}

impl Witness {
    /// Witness for `f ≺ h` from `f ≺ g` (self) and `g ≺ h` (next).
    pub fn then(self, next: Witness) -> Witness {
        Witness { c1: self.c1 * next.c1, c2: self.c2 * next.c2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonVerdict {
    pub direction: Direction,
    pub witness: Option<Witness>,
    /// Witness of the reverse domination, for `∼`.
    pub reverse_witness: Option<Witness>,
    pub range: LogRange,
    pub points_used: usize,
    /// `ln C₁ - ln budget` for the best rescaling; positive means over budget.
    pub max_violation: f64,
}

struct ScaleScan {
    ln_c2: f64,
    used: usize,
    max_ratio: f64,
    grows: Option<bool>,
}

fn scale_order() -> Vec<i32> {
    let mut ks = vec![0];
    for k in 1..=MAX_SCALE_POWER {
        ks.push(k);
        ks.push(-k);
    }
    ks
}

fn scan_scale(fv: &[Option<f64>], grid: &[f64], g: LnFn, k: i32, ln_hi: f64) -> ScaleScan {
    let shift = k as f64 * std::f64::consts::LN_2;
    let mut used = 0;
    let mut max_ratio = f64::NEG_INFINITY;
    let mut window = Vec::new();
    let top = ln_hi - TOP_WINDOW.min(ln_hi - grid[0]);
    for (&u, f) in grid.iter().zip(fv) {
        let Some(lf) = *f else { continue };
        let Ok(lg) = g(u + shift) else { continue };
        if !lg.is_finite() {
            continue;
        }
        let r = lf - lg;
        used += 1;
        max_ratio = max_ratio.max(r);
        if u >= top - 1e-12 {
            window.push(r);
        }
    }
    let grows = (window.len() >= 3).then(|| {
        let slack = 1e-9 * (1.0 + window.iter().fold(0.0f64, |m, r| m.max(r.abs())));
        let monotone = window.windows(2).all(|w| w[1] >= w[0] - slack);
        monotone && window[window.len() - 1] - window[0] >= UNBOUNDED_GROWTH
    });
    ScaleScan { ln_c2: shift, used, max_ratio, grows }
}

/// `f ≺ g` on `range` with `C₁ <= budget`.
///
/// `⊁` is checked first: when the log-ratio climbs by at least 0.5 over the
/// top two decades for every rescaling, a finite sampled `C₁` is an artifact
/// of where the range stops.
pub fn prec_check(f: LnFn, g: LnFn, range: &LogRange, budget: f64) -> ComparisonVerdict {
    let grid = range.grid();
    let fv: Vec<Option<f64>> = grid.iter().map(|&u| f(u).ok().filter(|v| v.is_finite())).collect();
    let scans: Vec<ScaleScan> = scale_order().into_iter().map(|k| scan_scale(&fv, &grid, g, k, range.ln_hi)).collect();
    let ln_budget = budget.ln();
    let enough = |s: &ScaleScan| 2 * s.used >= grid.len();
    let best = scans.iter().filter(|s| enough(s)).map(|s| s.max_ratio).fold(f64::INFINITY, f64::min);
    let verdict = |direction, witness: Option<Witness>, used| ComparisonVerdict {
        direction,
        witness,
        reverse_witness: None,
        range: *range,
        points_used: used,
        max_violation: best - ln_budget,
    };
    let judged: Vec<&ScaleScan> = scans.iter().filter(|s| enough(s) && s.grows.is_some()).collect();
    if !judged.is_empty() && judged.iter().all(|s| s.grows == Some(true)) {
        return verdict(Direction::NotPrec, None, judged[0].used);
    }
    match scans.iter().find(|s| enough(s) && s.max_ratio <= ln_budget) {
        Some(s) => verdict(Direction::Prec, Some(Witness { c1: s.max_ratio.exp(), c2: s.ln_c2.exp() }), s.used),
        None => verdict(Direction::Inconclusive, None, scans[0].used),
    }
}

/// `f ∼ g`: both dominations, each within `budget`.
pub fn sim_check(f: LnFn, g: LnFn, range: &LogRange, budget: f64) -> ComparisonVerdict {
    let forward = prec_check(f, g, range, budget);
    let backward = prec_check(g, f, range, budget);
    let direction = match (forward.direction, backward.direction) {
        (Direction::Prec, Direction::Prec) => Direction::Sim,
        (Direction::NotPrec, _) | (_, Direction::NotPrec) => Direction::NotPrec,
        _ => Direction::Inconclusive,
    };
    ComparisonVerdict {
        direction,
        reverse_witness: backward.witness,
        points_used: forward.points_used.min(backward.points_used),
        max_violation: forward.max_violation.max(backward.max_violation),
        ..forward
    }
}

/// Whether the suite compared `f/g` or, for values of exponential size in a
/// power of `s`, `ln f / ln g`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    Value,
    LogValue,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteItem {
    pub name: String,
    pub family: String,
    pub scale: Scale,
    pub verdict: ComparisonVerdict,
    /// Largest `|ln f - ln g|` without rescaling, in the compared scale.
    pub max_abs_log_ratio: f64,
    pub pass: bool,
    /// `(ln t, ln f, ln g)` in the compared scale.
    #[serde(skip)]
    pub curve: Vec<[f64; 3]>,
}

impl SuiteItem {
    pub fn curve_csv(&self) -> Result<String> {
        let rows: Vec<Vec<f64>> = self.curve.iter().map(|r| r.to_vec()).collect();
        crate::report::csv_string(&["ln_t", "ln_numeric", "ln_closed"], &rows)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub items: Vec<SuiteItem>,
    pub pass: bool,
}

/// Items pass when both dominations hold with constants at most 10 and the
/// unscaled log-ratio stays within `ln 10`.
pub const SUITE_BUDGET: f64 = 10.0;

/// Arguments of `h` below this are pre-asymptotic for the log-product items.
const H_FLOOR: f64 = 1e2;

type Boxed = Box<dyn Fn(f64) -> Result<f64> + Sync + Send>;

struct ItemSpec {
    name: String,
    family: String,
    scale: Scale,
    range: LogRange,
    numeric: Boxed,
    closed: Boxed,
}

fn run_item(spec: &ItemSpec) -> SuiteItem {
    let lift = |h: &Boxed, u: f64| -> Result<f64> {
        let v = h(u)?;
        match spec.scale {
            Scale::Value => Ok(v),
            Scale::LogValue if v > 0.0 => Ok(v.ln()),
            Scale::LogValue => Err(Error::domain(format!("log-value comparison needs ln f > 0, got {v}"))),
        }
    };
    let f = |u: f64| lift(&spec.numeric, u);
    let g = |u: f64| lift(&spec.closed, u);
    let verdict = sim_check(&f, &g, &spec.range, SUITE_BUDGET);
    let mut curve = Vec::with_capacity(spec.range.points);
    let mut worst: f64 = 0.0;
    let mut failed = false;
    for u in spec.range.grid() {
        match (f(u), g(u)) {
            (Ok(a), Ok(b)) if a.is_finite() && b.is_finite() => {
                worst = worst.max((a - b).abs());
                curve.push([u, a, b]);
            }
            _ => failed = true,
        }
    }
    let pass = !failed && verdict.direction == Direction::Sim && worst <= SUITE_BUDGET.ln();
    SuiteItem { name: spec.name.clone(), family: spec.family.clone(), scale: spec.scale, verdict, max_abs_log_ratio: worst, pass, curve }
}

fn pair(phi: NFunction) -> ConjugatePair {
    ConjugatePair::new(phi).expect("built-in suite families are convex")
}

fn suite_specs() -> Result<Vec<ItemSpec>> {
    let mut out = Vec::new();
    let s_range = LogRange::from_t(1e2, 1e6, 81)?;

    let ident = NFunction::power(2.0)?;
    let label = ident.label();
    let a = ident.clone();
    out.push(ItemSpec {
        name: "identity".into(),
        family: label,
        scale: Scale::Value,
        range: s_range,
        numeric: Box::new(move |u| ident.ln_eval_log(u)),
        closed: Box::new(move |u| a.ln_eval_log(u)),
    });

    for p in [1.5, 2.0, 3.0] {
        let q = p / (p - 1.0);
        let cp = pair(NFunction::power(p)?);
        out.push(ItemSpec {
            name: format!("power conjugate p={p}"),
            family: cp.phi().label(),
            scale: Scale::Value,
            range: s_range,
            numeric: Box::new(move |u| cp.ln_conjugate(u.exp())),
            closed: Box::new(move |u| Ok(q * u - q.ln())),
        });
        let cp = pair(NFunction::power(p)?);
        out.push(ItemSpec {
            name: format!("power h p={p}"),
            family: cp.phi().label(),
            scale: Scale::Value,
            range: LogRange::from_t(1.0, 1e3, 61)?,
            numeric: Box::new(move |u| cp.ln_h_numeric(u.exp())),
            closed: Box::new(move |u| Ok(q.ln() / q + u.exp() / q)),
        });
    }

    for a in [0.5, 1.0, 2.0] {
        let cp = pair(NFunction::exp_minus(a)?);
        out.push(ItemSpec {
            name: format!("exponential conjugate a={a}"),
            family: cp.phi().label(),
            scale: Scale::Value,
            range: s_range,
            numeric: Box::new(move |u| cp.ln_conjugate(u.exp())),
            closed: Box::new(move |u| {
                let y = u.exp() / a;
                Ok(((1.0 + y) * y.ln_1p() - y).ln())
            }),
        });
        let cp = pair(NFunction::exp_minus(a)?);
        out.push(ItemSpec {
            name: format!("exponential h a={a}"),
            family: cp.phi().label(),
            scale: Scale::Value,
            range: LogRange::from_t(10.0, 1e3, 61)?,
            numeric: Box::new(move |u| cp.ln_h_numeric(u.exp())),
            closed: Box::new(move |u| Ok(a.ln() - u + u.exp())),
        });
    }

    for e in [vec![2.0, 1.0], vec![3.0, 2.0, 1.0]] {
        let cp = pair(NFunction::log_product(&e)?);
        let q = e[0] / (e[0] - 1.0);
        let logs: Vec<f64> = e[1..].iter().map(|p| -p / (e[0] - 1.0)).collect();
        out.push(ItemSpec {
            name: format!("log-product conjugate p0={}", e[0]),
            family: cp.phi().label(),
            scale: Scale::Value,
            range: s_range,
            numeric: Box::new(move |u| cp.ln_conjugate(u.exp())),
            closed: Box::new(move |u| Ok(q * u + dot_ln(&logs, &iterated_logs_from_ln(u, logs.len())))),
        });
    }

    let h_range = LogRange::from_t(H_FLOOR, 1e6, 61)?;
    for e in [vec![1.0, 2.0], vec![1.0, 3.0, 2.0], vec![1.0, 2.0, 2.0, 3.0]] {
        let cp = pair(NFunction::log_product(&e)?);
        let closed = slow_conjugate_closed(&e);
        out.push(ItemSpec {
            name: format!("log-product conjugate p0=1 {e:?}"),
            family: cp.phi().label(),
            scale: Scale::LogValue,
            range: LogRange::from_t(1e2, 1e8, 61)?,
            numeric: Box::new(move |u| cp.ln_conjugate(u.exp())),
            closed: Box::new(closed),
        });
        let cp = pair(NFunction::log_product(&e)?);
        let p1 = e[1];
        let logs = e[2..].to_vec();
        out.push(ItemSpec {
            name: format!("log-product h p0=1 {e:?}"),
            family: cp.phi().label(),
            scale: Scale::Value,
            range: h_range,
            numeric: Box::new(move |u| cp.ln_h_numeric(u.exp())),
            closed: Box::new(move |u| Ok(p1 * u + dot_ln(&logs, &iterated_logs_from_ln(u, logs.len())))),
        });
        let cp = pair(NFunction::log_product(&e)?);
        let phi = NFunction::log_product(&e)?;
        out.push(ItemSpec {
            name: format!("h(ln t) vs phi(t)/t {e:?}"),
            family: cp.phi().label(),
            scale: Scale::Value,
            range: LogRange::new(H_FLOOR, 2000.0, 61)?,
            numeric: Box::new(move |u| cp.ln_h_numeric(u)),
            closed: Box::new(move |u| Ok(phi.local(u)?.ln_ratio)),
        });
    }
    Ok(out)
}

fn dot_ln(exponents: &[f64], logs: &[f64]) -> f64 {
    exponents.iter().zip(logs).map(|(p, g)| p * g.ln()).sum()
}

/// `ln Φ*(s)` for `Φ = t g_1^{p_1} ... g_k^{p_k}`, leading order as `s -> ∞`.
fn slow_conjugate_closed(e: &[f64]) -> impl Fn(f64) -> Result<f64> + Sync + Send {
    let p1 = e[1];
    let p2 = e.get(2).copied().unwrap_or(0.0);
    let tail: Vec<f64> = e[2..].iter().map(|p| p / p1).collect();
    move |u| {
        let logs = iterated_logs_from_ln(u, tail.len());
        let ln_front = (1.0 - p2 / p1) * p1.ln() + (1.0 - 1.0 / p1) * u + dot_ln(&tail, &logs);
        let ln_arg = (p2 / p1) * p1.ln() + u / p1 - dot_ln(&tail, &logs);
        Ok(ln_front + ln_arg.exp())
    }
}

/// Every closed-form asymptotic of the example families against the numeric
/// machinery. Items run concurrently.
pub fn verify_example_suite() -> Result<SuiteReport> {
    let specs = suite_specs()?;
    let items: Vec<SuiteItem> = std::thread::scope(|scope| {
        let handles: Vec<_> = specs.iter().map(|s| scope.spawn(move || run_item(s))).collect();
        handles.into_iter().map(|h| h.join().expect("suite item panicked")).collect()
    });
    let pass = items.iter().all(|i| i.pass);
    Ok(SuiteReport { items, pass })
}

/// `Φ** ∼ Φ` on `range` (in `t`) via the brute-force biconjugate.
pub fn biconjugate_sim(phi: &NFunction, range: &LogRange) -> Result<ComparisonVerdict> {
    if matches!(phi.family(), Family::Tabulated(_)) {
        return Err(Error::Unsupported("biconjugate check needs a parametric family".into()));
    }
    let cp = ConjugatePair::new(phi.clone())?;
    let f = |u: f64| cp.biconjugate_at(u.exp()).map(f64::ln);
    let g = |u: f64| phi.ln_eval_log(u);
    Ok(sim_check(&f, &g, range, SUITE_BUDGET))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn range(lo: f64, hi: f64) -> LogRange {
        LogRange::from_t(lo, hi, 61).unwrap()
    }

    #[test]
    fn reflexive_with_unit_constants() {
        let f = |u: f64| Ok(2.0 * u);
        let v = prec_check(&f, &f, &range(1.0, 1e6), 10.0);
        assert_eq!(v.direction, Direction::Prec);
        assert_eq!(v.witness, Some(Witness { c1: 1.0, c2: 1.0 }));
        assert_eq!(sim_check(&f, &f, &range(1.0, 1e6), 10.0).direction, Direction::Sim);
    }

    #[test]
    fn exponential_needs_argument_rescaling() {
        let f = |u: f64| Ok(2.0 * u.exp());
        let g = |u: f64| Ok(u.exp());
        let v = prec_check(&f, &g, &range(1.0, 100.0), 10.0);
        assert_eq!(v.direction, Direction::Prec);
        let w = v.witness.unwrap();
        assert_eq!(w.c2, 2.0);
        assert!((w.c1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn log_factor_is_not_dominated() {
        // f = t ln(1+t), g = t
        let f = |u: f64| Ok(u + u.exp().ln_1p().ln());
        let g = |u: f64| Ok(u);
        assert_eq!(prec_check(&f, &g, &range(1.0, 1e3), 10.0).direction, Direction::NotPrec);
        assert_eq!(prec_check(&g, &f, &range(1.0, 1e3), 10.0).direction, Direction::Prec);
    }

    #[test]
    fn witnesses_compose() {
        // t <= t ln(e+t) <= t^2 on t >= 1
        let f = |u: f64| Ok(u);
        let g = |u: f64| Ok(u + (std::f64::consts::E + u.exp()).ln().ln());
        let h = |u: f64| Ok(2.0 * u);
        let r = range(1.0, 1e4);
        let a = prec_check(&f, &g, &r, 1e3).witness.unwrap();
        let b = prec_check(&g, &h, &r, 1e3).witness.unwrap();
        let c = a.then(b);
        for u in r.grid() {
            assert!(f(u).unwrap() <= c.c1.ln() + h(u + c.c2.ln()).unwrap() + 1e-12);
        }
    }

    #[test]
    fn range_validation() {
        assert!(LogRange::new(1.0, 1.0, 10).is_err());
        assert!(LogRange::from_t(0.0, 1.0, 10).is_err());
        assert!(LogRange::new(0.0, 1.0, 2).is_err());
        let r = range(1.0, 1e4).above(Some(10.0));
        assert!((r.ln_lo - 10f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn biconjugate_matches_phi() {
        let r = range(1e-2, 1e2);
        for phi in [NFunction::power(1.5).unwrap(), NFunction::exp_minus(1.0).unwrap(), NFunction::log_product(&[1.0, 2.0]).unwrap()] {
            assert_eq!(biconjugate_sim(&phi, &r).unwrap().direction, Direction::Sim, "{}", phi.label());
        }
    }

    #[test]
    fn example_suite_passes() {
        let report = verify_example_suite().unwrap();
        for item in &report.items {
            assert!(item.pass, "{}: {:?} ratio {}", item.name, item.verdict.direction, item.max_abs_log_ratio);
        }
        let power = report.items.iter().find(|i| i.name == "power conjugate p=2").unwrap();
        assert!(power.max_abs_log_ratio <= 0.1);
        assert!(report.pass);
    }
}
