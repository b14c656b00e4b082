//! The stability modulus `ħ(δ)` and the level-set iteration bookkeeping.
//!
//! `τ(δ)` balances `δ Φ*(τ)` against the tail `H(τ)` of the second
//! integrability integral, and `ħ(δ) = H(τ(δ))`.

use std::io::Write;

use serde::Serialize;

use crate::conjugate::ConjugatePair;
use crate::error::{Error, Result};
use crate::ledger::Ledger;
use crate::nfunctions::{log_grid, Family, NFunction};
use crate::quadrature::{i_of, i_tail, settled_value, Conclusion, HProfile, DEFAULT_TOL};
use crate::roots::bisect_bracket_tol;
use crate::special::iterated_log;

/// `ln Φ*(τ)`, through the closed form while it is representable.
fn ln_phi_star(pair: &ConjugatePair, tau: f64) -> Result<f64> {
    match pair.conjugate_at(tau) {
        Ok(v) if v.is_finite() && v > 1e-250 => Ok(v.ln()),
        _ => pair.ln_conjugate(tau),
    }
}

/// Largest `δ` for which `τ(δ)` exists: `H(h(τ₀)) / Φ*(h(τ₀))`.
pub fn uniqueness_bound(prof: &HProfile) -> Result<f64> {
    let start = prof.start;
    Ok((prof.at(start)?.ln() - ln_phi_star(prof.pair(), start)?).exp())
}

/// Root of `δ Φ*(τ) = H(τ)` on `τ >= h(τ₀)`, relative tolerance `1e-10`.
pub fn tau_of_delta(prof: &HProfile, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::domain(format!("delta must be positive, got {delta}")));
    }
    let pair = prof.pair();
    let ln_delta = delta.ln();
    let g = |lt: f64| -> f64 {
        let tau = lt.exp();
        match (ln_phi_star(pair, tau), prof.at(tau)) {
            (Ok(a), Ok(h)) => ln_delta + a - h.ln(),
            _ => f64::NAN,
        }
    };
    let lo = prof.start.ln();
    let g_lo = g(lo);
    if g_lo.is_nan() {
        return Err(Error::Evaluation { at: prof.start, value: g_lo });
    }
    if g_lo > 0.0 {
        let bound = uniqueness_bound(prof)?;
        return Err(Error::Domain(format!("delta = {delta} exceeds the uniqueness bound {bound}")));
    }
    if g_lo == 0.0 {
        return Ok(prof.start);
    }
    let mut step = 1.0;
    let mut hi = lo + step;
    loop {
        let v = g(hi);
        if v.is_nan() {
            return Err(Error::Evaluation { at: hi.exp(), value: v });
        }
        if v > 0.0 {
            break;
        }
        step *= 2.0;
        hi = lo + step;
        if hi > 700.0 {
            return Err(Error::NoBracket(format!("tau(delta = {delta}) beyond f64 range")));
        }
    }
    let (a, b) = bisect_bracket_tol(g, lo, hi, 1e-11, 0.0)?;
    Ok((0.5 * (a + b)).exp())
}

/// `ħ(δ) = H(τ(δ))`.
pub fn hbar(prof: &HProfile, delta: f64) -> Result<f64> {
    prof.at(tau_of_delta(prof, delta)?)
}

/// Closed-form asymptote recognized for a family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Asymptote {
    /// `δ^{1/(1+n)} (-ln δ)`
    Exp,
    /// `δ^{1/(1+nq)} (-ln δ)^{nq/(1+nq)}`
    Power { q: f64 },
    /// `g_{k-1}(-ln δ)^{-(p-n)/n}`
    Slow { k: usize, p: f64 },
    None,
}

/// Matches `t g_1^n ... g_{k-1}^n g_k^p` with `p > n`.
fn slow_growth_shape(e: &[f64], n: f64) -> Option<(usize, f64)> {
    if e.len() < 2 || e[0] != 1.0 {
        return None;
    }
    let k = e.len() - 1;
    let p = e[k];
    (e[1..k].iter().all(|&v| v == n) && p > n).then_some((k, p))
}

pub fn recognize(phi: &NFunction, n: f64) -> Asymptote {
    match phi.family() {
        Family::ExpMinus { .. } => Asymptote::Exp,
        Family::PowerLaw { p } => Asymptote::Power { q: p / (p - 1.0) },
        Family::LogProduct(e) => match slow_growth_shape(e, n) {
            Some((k, p)) => Asymptote::Slow { k, p },
            None => Asymptote::None,
        },
        Family::Tabulated(_) => Asymptote::None,
    }
}

impl Asymptote {
    /// Value at `δ`, with multiplicative constant `c`.
    pub fn eval(&self, n: f64, delta: f64, c: f64) -> Result<f64> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::domain(format!("closed forms need 0 < delta < 1, got {delta}")));
        }
        let l = -delta.ln();
        match *self {
            Asymptote::Exp => Ok(c * delta.powf(1.0 / (1.0 + n)) * l),
            Asymptote::Power { q } => {
                let e = 1.0 + n * q;
                Ok(c * delta.powf(1.0 / e) * l.powf(n * q / e))
            }
            Asymptote::Slow { k, p } => Ok(c * iterated_log(k - 1, l).powf(-(p - n) / n)),
            Asymptote::None => Err(Error::Unsupported("no closed-form stability modulus for this family".into())),
        }
    }
}

/// Closed-form `ħ(δ)` for the exponential, power and slow-growth families.
pub fn hbar_closed_form(phi: &NFunction, n: f64, delta: f64, c: f64) -> Result<f64> {
    recognize(phi, n).eval(n, delta, c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityPoint {
    pub delta: f64,
    pub tau: f64,
    pub hbar: f64,
    pub hbar_closed: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityProfile {
    pub family: String,
    pub n: f64,
    pub asymptote: Asymptote,
    pub points: Vec<StabilityPoint>,
    pub ledger: Ledger,
}

/// Default grid: 25 log-spaced points on `[1e-12, 1e-3]`.
pub fn default_delta_grid() -> Vec<f64> {
    log_grid(1e-12, 1e-3, 25)
}

impl StabilityProfile {
    /// Evaluates `τ` and `ħ` over `deltas`, one thread per chunk.
    pub fn compute(pair: &ConjugatePair, n: f64, deltas: &[f64], ledger: &Ledger) -> Result<Self> {
        let prof = HProfile::new(pair, n)?;
        let asymptote = recognize(pair.phi(), n);
        let threads = std::thread::available_parallelism().map(|v| v.get()).unwrap_or(1).min(deltas.len().max(1));
        let chunk = deltas.len().div_ceil(threads).max(1);
        let results: Vec<Result<Vec<StabilityPoint>>> = std::thread::scope(|scope| {
            let handles: Vec<_> = deltas
                .chunks(chunk)
                .map(|part| {
                    let prof = &prof;
                    scope.spawn(move || {
                        part.iter()
                            .map(|&delta| {
                                let tau = tau_of_delta(prof, delta)?;
                                let hbar = prof.at(tau)?;
                                let hbar_closed = asymptote.eval(n, delta, ledger.c).ok();
                                Ok(StabilityPoint { delta, tau, hbar, hbar_closed })
                            })
                            .collect()
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("stability worker panicked")).collect()
        });
        let mut points = Vec::with_capacity(deltas.len());
        for r in results {
            points.extend(r?);
        }
        Ok(StabilityProfile { family: pair.phi().label(), n, asymptote, points, ledger: ledger.clone() })
    }

    /// Largest `|ln(ħ_numeric / ħ_closed)|` over the grid.
    pub fn max_log_ratio(&self) -> Option<f64> {
        let mut worst: Option<f64> = None;
        for p in &self.points {
            let c = p.hbar_closed?;
            let r = (p.hbar / c).ln().abs();
            worst = Some(worst.map_or(r, |w| w.max(r)));
        }
        worst
    }

    /// `τ` strictly increasing as `δ` decreases, i.e. decreasing in `δ`.
    pub fn tau_monotone(&self) -> bool {
        let mut pts = self.points.clone();
        pts.sort_by(|a, b| a.delta.total_cmp(&b.delta));
        pts.windows(2).all(|w| w[1].tau < w[0].tau && w[1].hbar > w[0].hbar)
    }

    /// CSV with columns `delta,tau,hbar,hbar_closed`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Data(e.to_string());
        out.write_record(["delta", "tau", "hbar", "hbar_closed"]).map_err(io)?;
        for p in &self.points {
            let closed = p.hbar_closed.map(crate::report::fmt_num).unwrap_or_default();
            out.write_record([
                crate::report::fmt_num(p.delta),
                crate::report::fmt_num(p.tau),
                crate::report::fmt_num(p.hbar),
                closed,
            ])
            .map_err(io)?;
        }
        out.flush().map_err(|e| Error::Data(e.to_string()))
    }
}

/// Level-set iteration threshold for the sup-norm bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeGiorgiReport {
    /// Smallest `t₀` with `2 C₁ K^{1/n} ∫_{t₀/2}^∞ h^{-1/n} <= 1`.
    pub t0: f64,
    /// Starting level `s₀ = e^{t₀}`; infinite when not representable.
    pub s0: f64,
    pub ln_s0: f64,
    /// `2 C₁ K^{1/n} ∫_{t₀/2}^∞ h^{-1/n}` at `t₀`.
    pub jump_bound: f64,
    /// Level beyond which the capacity quantity vanishes: `s₀ + jump_bound`.
    pub vanishing_level: f64,
    pub k: f64,
    pub c1: f64,
}

fn require_i(pair: &ConjugatePair, n: f64) -> Result<crate::quadrature::IntegrabilityReport> {
    let r = i_of(pair, n)?;
    if r.conclusion() != Conclusion::Converges {
        return Err(Error::Precondition(format!(
            "first integrability condition fails for {} with n = {n}",
            pair.phi().label()
        )));
    }
    Ok(r)
}

/// `2 C₁ K^{1/n} ∫_{t₀/2}^∞ h^{-1/n}(t) dt`.
pub fn jump_bound(pair: &ConjugatePair, n: f64, k: f64, c1: f64, t0: f64) -> Result<f64> {
    let tail = i_tail(pair, n, t0 / 2.0, DEFAULT_TOL * 0.01)?;
    let model = crate::quadrature::integrability_model(pair.phi(), n);
    Ok(2.0 * c1 * k.powf(1.0 / n) * settled_value(&tail, model.as_ref())?)
}

pub fn degiorgi_threshold(pair: &ConjugatePair, n: f64, k: f64, c1: f64) -> Result<DeGiorgiReport> {
    if !(k > 0.0 && c1 > 0.0) {
        return Err(Error::domain("K and C1 must be positive"));
    }
    require_i(pair, n)?;
    let j = |t0: f64| jump_bound(pair, n, k, c1, t0);
    let t0 = if j(0.0)? <= 1.0 {
        0.0
    } else {
        let mut hi = 1.0;
        while j(hi)? > 1.0 {
            hi *= 2.0;
            if hi > 1e300 {
                return Err(Error::NoBracket("De Giorgi threshold".into()));
            }
        }
        let f = |t: f64| j(t).map(|v| 1.0 - v).unwrap_or(f64::NAN);
        let (_, b) = bisect_bracket_tol(f, hi / 2.0, hi, 1e-12, 1e-12)?;
        // the upper end of the final bracket satisfies the inequality
        b
    };
    let jump = j(t0)?;
    let s0 = t0.exp();
    Ok(DeGiorgiReport { t0, s0, ln_s0: t0, jump_bound: jump, vanishing_level: s0 + jump, k, c1 })
}

/// One step of the synthetic level-set iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationStep {
    pub j: usize,
    pub s: f64,
    pub theta: f64,
    pub t: f64,
    pub r: f64,
}

/// Runs the halving scheme on the extremal sequence allowed by the iteration
/// inequality: `t_j = 2^j t₀ = c/ϑ_j` and `r_j = C₁ K^{1/n} t_j / h(t_j)^{1/n}`.
pub fn run_degiorgi_iteration(
    pair: &ConjugatePair,
    n: f64,
    k: f64,
    c1: f64,
    t0: f64,
    steps: usize,
) -> Result<Vec<IterationStep>> {
    if !(t0 > 0.0) {
        return Err(Error::domain("t0 must be positive"));
    }
    let mut out = Vec::with_capacity(steps + 1);
    let mut s = 0.0;
    for j in 0..=steps {
        let t = t0 * 2f64.powi(j as i32);
        let theta = 1.0 / t;
        let r = c1 * k.powf(1.0 / n) * t * (-pair.ln_h(t)? / n).exp();
        out.push(IterationStep { j, s, theta, t, r });
        s += r;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdReport {
    /// `t₀ = 4K/ρ₀`.
    pub t0: f64,
    /// `2 C₅ ∫_{t₀/2}^∞ dt / (t^{1/n} (h*)⁻¹(t))`.
    pub threshold: f64,
    /// `δ Φ*(τ(δ)) + 2 C₅ H(τ(δ))` when `δ` is given.
    pub assembled_bound: Option<f64>,
    pub hbar: Option<f64>,
    pub phi_star_at_one: f64,
    pub k: f64,
    pub c5: f64,
}

/// Vanishing threshold of the stability iteration for initial mass `ρ₀`.
pub fn stability_threshold(
    prof: &HProfile,
    k: f64,
    c5: f64,
    rho0: f64,
    delta: Option<f64>,
) -> Result<ThresholdReport> {
    let pair = prof.pair();
    let phi_star_one = pair.conjugate_at(1.0)?;
    let cap = phi_star_one * k;
    if !(rho0 > 0.0 && rho0 <= cap) {
        return Err(Error::Domain(format!("initial mass must lie in (0, Phi*(1) K] = (0, {cap}], got {rho0}")));
    }
    let t0 = 4.0 * k / rho0;
    let threshold = 2.0 * c5 * prof.tail(t0 / 2.0)?;
    let (assembled_bound, hbar_v) = match delta {
        Some(d) => {
            let tau = tau_of_delta(prof, d)?;
            let h = prof.at(tau)?;
            let lead = (d.ln() + ln_phi_star(pair, tau)?).exp();
            (Some(lead + 2.0 * c5 * h), Some(h))
        }
        None => (None, None),
    };
    Ok(ThresholdReport {
        t0,
        threshold,
        assembled_bound,
        hbar: hbar_v,
        phi_star_at_one: phi_star_one,
        k,
        c5,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    fn pair(f: Result<NFunction>) -> ConjugatePair {
        ConjugatePair::new(f.unwrap()).unwrap()
    }

    #[test]
    fn closed_form_examples() {
        let e = NFunction::exp_minus(1.0).unwrap();
        let v = hbar_closed_form(&e, 2.0, 1e-6, 1.0).unwrap();
        assert!(rel(v, 0.01 * 6.0 * 10f64.ln()) < 1e-12);
        assert!((v - 0.138155).abs() < 1e-6);
        // slow growth k = 1, p = 2n: exponent -1
        let s = NFunction::slow_growth(1, 4.0, 2.0).unwrap();
        let d: f64 = 1e-8;
        assert!(rel(hbar_closed_form(&s, 2.0, d, 1.0).unwrap(), 1.0 / -d.ln()) < 1e-14);
        // depth one reduces to (-ln δ)^{-(p-n)/n}
        let s = NFunction::slow_growth(1, 5.0, 2.0).unwrap();
        assert!(rel(hbar_closed_form(&s, 2.0, d, 1.0).unwrap(), (-d.ln()).powf(-1.5)) < 1e-14);
        let other = NFunction::log_product(&[1.0, 3.0, 1.0]).unwrap();
        assert!(matches!(hbar_closed_form(&other, 2.0, d, 1.0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn tau_balances_and_is_monotone() {
        let p = pair(NFunction::power(2.0));
        let prof = HProfile::new(&p, 2.0).unwrap();
        let bound = uniqueness_bound(&prof).unwrap();
        let at_bound = tau_of_delta(&prof, bound).unwrap();
        assert!(rel(at_bound, prof.start) < 1e-9);
        assert!(matches!(tau_of_delta(&prof, bound * 1.5), Err(Error::Domain(_))));
        let delta = 1e-6;
        let tau = tau_of_delta(&prof, delta).unwrap();
        let lhs = delta * tau * tau / 2.0;
        assert!(rel(lhs, prof.at(tau).unwrap()) < 1e-8);
        // sign change brackets the root
        assert!(delta * (tau * 0.99).powi(2) / 2.0 < prof.at(tau * 0.99).unwrap());
        assert!(delta * (tau * 1.01).powi(2) / 2.0 > prof.at(tau * 1.01).unwrap());
        assert!(tau_of_delta(&prof, 1e-7).unwrap() > tau);
        let hb = hbar(&prof, delta).unwrap();
        assert!(hb / delta > 1e3);
    }

    #[test]
    fn power_law_profile_tracks_closed_form() {
        let p = pair(NFunction::power(2.0));
        let prof = StabilityProfile::compute(&p, 2.0, &default_delta_grid(), &Ledger::default()).unwrap();
        assert!(prof.tau_monotone());
        assert!(prof.max_log_ratio().unwrap() <= 10f64.ln(), "{:?}", prof.max_log_ratio());
        let mut buf = Vec::new();
        prof.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("delta,tau,hbar,hbar_closed\n"));
        assert_eq!(text.lines().count(), 26);
    }

    #[test]
    fn expminus_delta_exponent_is_independent_of_a() {
        for a in [0.5, 2.0] {
            let p = pair(NFunction::exp_minus(a));
            let prof = HProfile::new(&p, 2.0).unwrap();
            let (d1, d2): (f64, f64) = (1e-12, 1e-9);
            let y = |d: f64| hbar(&prof, d).unwrap().ln() - (-d.ln()).ln();
            let slope = (y(d2) - y(d1)) / (d2.ln() - d1.ln());
            assert!((slope - 1.0 / 3.0).abs() < 0.05, "a={a}: {slope}");
        }
    }

    #[test]
    fn degiorgi_power_law_example() {
        let p = pair(NFunction::power(2.0));
        let r = degiorgi_threshold(&p, 2.0, 1.0, 1.0).unwrap();
        let exact = 8.0 * (8.0 * 2f64.powf(-0.25)).ln();
        assert!((r.t0 - exact).abs() < 1e-6, "{} vs {exact}", r.t0);
        assert!(r.jump_bound <= 1.0 + 1e-9);
        assert!(rel(r.vanishing_level, r.s0 + r.jump_bound) < 1e-15);
        // K -> 2^n K doubles the K^{1/n} factor
        let j1 = jump_bound(&p, 2.0, 1.0, 1.0, 20.0).unwrap();
        let j2 = jump_bound(&p, 2.0, 4.0, 1.0, 20.0).unwrap();
        assert!(rel(j2, 2.0 * j1) < 1e-12);
        let mut prev = f64::INFINITY;
        for t0 in [r.t0, 20.0, 30.0, 60.0] {
            let j = jump_bound(&p, 2.0, 1.0, 1.0, t0).unwrap();
            assert!(j <= prev);
            prev = j;
        }
        let divergent = pair(NFunction::log_product(&[1.0, 2.0]));
        assert!(matches!(degiorgi_threshold(&divergent, 2.0, 1.0, 1.0), Err(Error::Precondition(_))));
    }

    #[test]
    fn iteration_halves_and_stays_below_jump_bound() {
        let p = pair(NFunction::power(2.0));
        let t0 = 16.0;
        let steps = run_degiorgi_iteration(&p, 2.0, 1.0, 1.0, t0, 40).unwrap();
        for w in steps.windows(2) {
            assert!(rel(w[1].theta, w[0].theta / 2.0) < 1e-15);
            assert!(rel(w[1].t, 2.0 * w[0].t) < 1e-15);
        }
        let total: f64 = steps.iter().map(|s| s.r).sum();
        assert!(total <= jump_bound(&p, 2.0, 1.0, 1.0, t0).unwrap());
    }

    #[test]
    fn stability_threshold_examples() {
        let p = pair(NFunction::power(2.0));
        let prof = HProfile::new(&p, 2.0).unwrap();
        let r = stability_threshold(&prof, 1.0, 1.0, 0.1, None).unwrap();
        assert_eq!(r.t0, 40.0);
        // oracle: t = e^w, integrand e^{w/2} / (h*)⁻¹(e^w)
        let oracle = 2.0
            * integrate(|w: f64| Ok((0.5 * w).exp() / p.hstar_inverse_at(w.exp())?), 20f64.ln(), 690.0, 1e-13)
                .unwrap()
                .0;
        assert!(rel(r.threshold, oracle) < 1e-8, "{} vs {oracle}", r.threshold);
        let small = stability_threshold(&prof, 1.0, 1.0, 1e-6, None).unwrap();
        assert!(small.threshold < r.threshold * 0.1);
        assert!(matches!(stability_threshold(&prof, 1.0, 1.0, 0.6, None), Err(Error::Domain(_))));
        let with_delta = stability_threshold(&prof, 1.0, 2.0, 0.1, Some(1e-6)).unwrap();
        let h = with_delta.hbar.unwrap();
        assert!(rel(with_delta.assembled_bound.unwrap(), 5.0 * h) < 1e-7);
    }
}
