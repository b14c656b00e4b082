//! Acceptance run: one line per criterion, non-zero exit if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use orlicz_lab::asymptotics::verify_example_suite;
use orlicz_lab::geometry::{check_comparisons, closed_form_for, diameter_feasible, e_closed_form_gap, psi_pipeline, Feasibility, GeometryInputs};
use orlicz_lab::nfunctions::log_grid;
use orlicz_lab::orlicz_measure::{density_generator, luxemburg_norm, tail_bound_curve, DensitySpec, SampledDensity};
use orlicz_lab::quadrature::{h_eventually_convex, i_of, second_condition, Conclusion};
use orlicz_lab::stability::{default_delta_grid, StabilityProfile};
use orlicz_lab::{ConjugatePair, Ledger, NFunction};

type Outcome = Result<String, String>;

fn pair(phi: NFunction) -> ConjugatePair {
    ConjugatePair::new(phi).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn convex_builtins() -> Vec<NFunction> {
    let mut v = vec![];
    for p in [1.5, 2.0, 3.0] {
        v.push(NFunction::power(p).unwrap());
    }
    for a in [0.5, 1.0, 2.0] {
        v.push(NFunction::exp_minus(a).unwrap());
    }
    for e in [&[1.0, 2.0][..], &[1.0, 3.0], &[1.0, 2.0, 5.0], &[2.0, 1.0], &[3.0, 2.0, 1.0], &[1.0, 2.0, 2.0, 3.0]] {
        v.push(NFunction::log_product(e).unwrap());
    }
    v
}

fn within(limit: Duration, start: Instant) -> Result<(), String> {
    let e = start.elapsed();
    if e > limit {
        Err(format!("runtime {e:.2?} exceeds {limit:?}"))
    } else {
        Ok(())
    }
}

fn conjugate_correctness() -> Outcome {
    let start = Instant::now();
    let grid = log_grid(1e-3, 1e3, 121);
    let mut worst: f64 = 0.0;
    let families: Vec<NFunction> = [1.5, 2.0, 3.0].iter().map(|&p| NFunction::power(p).unwrap()).chain([0.5, 1.0, 2.0].iter().map(|&a| NFunction::exp_minus(a).unwrap())).collect();
    for phi in families {
        let cp = pair(phi);
        for &s in &grid {
            worst = worst.max(rel(cp.conjugate_numeric(s).unwrap(), cp.conjugate_at(s).unwrap()));
        }
    }
    within(Duration::from_secs(5), start)?;
    let detail = format!("worst relative error {worst:.2e} (limit 1e-8)");
    if worst <= 1e-8 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn universal_inequalities() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_margin = f64::INFINITY;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for phi in convex_builtins() {
        let cp = pair(phi.clone());
        for i in 0..1000 {
            let t = 10f64.powf(rng.gen_range(-3.0..2.0));
            // every other sample sits on the equality curve s = Φ'(t)
            let s = if i % 2 == 0 { 10f64.powf(rng.gen_range(-3.0..3.0)) } else { phi.deriv(t).unwrap() };
            let y = cp.check_young(s, t).unwrap();
            worst_margin = worst_margin.min(y.margin / (1.0 + s * t));
            let r = cp.check_universal_product(10f64.powf(rng.gen_range(-3.0..3.0))).unwrap().ratio;
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    within(Duration::from_secs(5), start)?;
    let detail = format!("min scaled Young margin {worst_margin:.2e}, product ratio in [{lo:.9}, {hi:.9}]");
    if worst_margin >= -1e-9 && lo > 1.0 && hi <= 2.0 + 1e-9 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn biconjugation() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut at = String::new();
    for phi in convex_builtins() {
        let cp = pair(phi.clone());
        for t in log_grid(1e-2, 1e2, 41) {
            let r = rel(cp.biconjugate_at(t).unwrap(), phi.eval(t).unwrap());
            if r > worst {
                worst = r;
                at = format!("{} at t={t:.3e}", phi.label());
            }
        }
    }
    let detail = format!("worst relative error {worst:.2e} ({at})");
    if worst <= 1e-6 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn integrability_classifier() -> Outcome {
    let start = Instant::now();
    let mut bad = vec![];
    for (p, want) in [(1.5, Conclusion::Diverges), (2.0, Conclusion::Diverges), (2.5, Conclusion::Converges), (3.0, Conclusion::Converges)] {
        let got = i_of(&pair(NFunction::log_product(&[1.0, p]).unwrap()), 2.0).unwrap().conclusion();
        if got != want {
            bad.push(format!("p={p}: {got:?}"));
        }
    }
    let value = i_of(&pair(NFunction::power(2.0).unwrap()), 2.0).unwrap().verdict().value().unwrap_or(f64::NAN);
    let err = rel(value, 4.0 * 2f64.powf(-0.25));
    within(Duration::from_secs(10), start)?;
    let detail = format!("log-product verdicts {}; I(power 2) = {value:.10}, rel err {err:.1e}", if bad.is_empty() { "as expected".into() } else { bad.join(", ") });
    if bad.is_empty() && err <= 1e-6 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn condition_equivalence() -> Outcome {
    let mut families = convex_builtins();
    for p in [1.5, 2.0, 2.5] {
        families.push(NFunction::log_product(&[1.0, p]).unwrap());
    }
    let (mut checked, mut bad) = (0, vec![]);
    for phi in families {
        let cp = pair(phi.clone());
        if !h_eventually_convex(&cp).unwrap() {
            continue;
        }
        checked += 1;
        let a = i_of(&cp, 2.0).unwrap().conclusion();
        let b = second_condition(&cp, 2.0, None).unwrap().conclusion();
        if a != b {
            bad.push(format!("{}: {a:?} vs {b:?}", phi.label()));
        }
    }
    let detail = format!("{checked} families with eventually convex h, {} disagreements {}", bad.len(), bad.join("; "));
    if checked > 0 && bad.is_empty() {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn hbar_asymptotics() -> Outcome {
    let start = Instant::now();
    let n = 2.0;
    let families = [
        NFunction::exp_minus(1.0).unwrap(),
        NFunction::power(2.0).unwrap(),
        NFunction::slow_growth(1, 2.0 * n + 1.0, n).unwrap(),
        NFunction::slow_growth(2, 2.0 * n + 1.0, n).unwrap(),
    ];
    let mut parts = vec![];
    let mut ok = true;
    for phi in families {
        let prof = StabilityProfile::compute(&pair(phi.clone()), n, &default_delta_grid(), &Ledger::default()).unwrap();
        let r = prof.max_log_ratio().unwrap_or(f64::INFINITY);
        let mono = prof.tau_monotone();
        ok &= r <= 10f64.ln() && mono;
        parts.push(format!("{} {r:.3}{}", phi.label(), if mono { "" } else { " (τ not monotone)" }));
    }
    within(Duration::from_secs(60), start)?;
    let detail = format!("max |ln ratio| (limit {:.3}): {}", 10f64.ln(), parts.join(", "));
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn geometry_pipeline() -> Outcome {
    let start = Instant::now();
    let grid = log_grid(1.0, 1e8, 81);
    let upper: Vec<f64> = grid.iter().copied().filter(|&t| t >= 1e2).collect();
    let cases = [
        (NFunction::power(2.0).unwrap(), NFunction::log_product(&[1.0, 2.0, 2.0, 3.0]).unwrap()),
        (NFunction::log_product(&[1.0, 2.0, 5.0]).unwrap(), NFunction::log_product(&[1.0, 2.0, 2.0, 2.0, 3.0]).unwrap()),
    ];
    let mut parts = vec![];
    let mut ok = true;
    for (phi, phi1) in cases {
        let inputs = GeometryInputs::new(phi.clone(), phi1, 2.0).unwrap();
        let e = inputs.e_function().unwrap();
        let cmp = check_comparisons(&e, &grid).unwrap();
        let record = closed_form_for(&inputs).unwrap();
        let gap = e_closed_form_gap(&e, &record, &upper).unwrap();
        ok &= cmp.holds && gap <= 10f64.ln();
        parts.push(format!("{}: comparisons {}, E gap {gap:.3}", phi.label(), if cmp.holds { "hold" } else { "FAIL" }));
    }
    within(Duration::from_secs(60), start)?;
    let detail = parts.join("; ");
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn diameter_volume() -> Outcome {
    let n = 2.0;
    let mut wrong = vec![];
    let feasible = |phi: &NFunction| matches!(diameter_feasible(phi, n, 4).unwrap().feasibility, Feasibility::Feasible { .. });
    let yes = [
        NFunction::power(1.5).unwrap(),
        NFunction::power(2.0).unwrap(),
        NFunction::power(3.0).unwrap(),
        NFunction::log_product(&[1.0, 2.0, 4.0, 5.0]).unwrap(),
        NFunction::log_product(&[1.0, 2.0, 4.0, 7.0]).unwrap(),
    ];
    let no = [NFunction::log_product(&[1.0, 2.0, 2.5]).unwrap(), NFunction::log_product(&[1.0, 2.0, 3.0]).unwrap(), NFunction::log_product(&[1.0, 2.0, 4.0]).unwrap()];
    for phi in &yes {
        if !feasible(phi) {
            wrong.push(format!("{} not feasible", phi.label()));
        }
    }
    for phi in &no {
        if feasible(phi) {
            wrong.push(format!("{} feasible", phi.label()));
        }
    }
    let mut slopes = vec![];
    let mut slope_ok = true;
    for p in [1.5, 2.0, 3.0] {
        let phi = NFunction::power(p).unwrap();
        let Feasibility::Feasible { witness } = diameter_feasible(&phi, n, 4).unwrap().feasibility else { continue };
        let inputs = GeometryInputs::new(phi, NFunction::from_descriptor(&witness).unwrap(), n).unwrap();
        let slope = psi_pipeline(inputs).unwrap().volume_slope(1e-6).unwrap();
        slope_ok &= (slope - 2.0 * n).abs() <= 0.05 * 2.0 * n;
        slopes.push(format!("p={p}: {slope:.3}"));
    }
    let detail = format!(
        "verdicts {}; volume slope at r=1e-6 vs 2n={} (5%): {}",
        if wrong.is_empty() { "as expected".into() } else { wrong.join(", ") },
        2.0 * n,
        slopes.join(", ")
    );
    if wrong.is_empty() && slope_ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn luxemburg_engine() -> Outcome {
    let mut worst_const: f64 = 0.0;
    let one = SampledDensity::uniform(vec![1.0; 16]).unwrap();
    for phi in convex_builtins() {
        let expected = 1.0 / phi.eval_inverse(1.0).unwrap();
        worst_const = worst_const.max(rel(luxemburg_norm(&phi, &one).unwrap(), expected));
    }
    let phi = NFunction::power(2.0).unwrap();
    let f = density_generator(DensitySpec::PowerSpike { gamma: 0.7 }, 2, 64).unwrap();
    let base = luxemburg_norm(&phi, &f).unwrap();
    let mut worst_hom: f64 = 0.0;
    for c in [1e-3, 0.5, 3.0, 1e3] {
        worst_hom = worst_hom.max(rel(luxemburg_norm(&phi, &f.scaled(c).unwrap()).unwrap(), c * base));
    }
    let cp = pair(NFunction::log_product(&[1.0, 2.0]).unwrap());
    let s_grid = log_grid(1.0, 1e6, 30);
    let mut specs = vec![];
    for i in 0..10 {
        specs.push(DensitySpec::PowerSpike { gamma: 0.15 + 0.18 * i as f64 });
        specs.push(DensitySpec::LogSpike { gamma: 1.5 + 0.5 * i as f64 });
    }
    let mut violations = 0;
    for spec in &specs {
        let f = density_generator(*spec, 2, 64).unwrap();
        for p in tail_bound_curve(&cp, &f, &s_grid, 1.0).unwrap() {
            if p.bound < p.worst_case_mass || p.bound.is_nan() {
                violations += 1;
            }
        }
    }
    let detail = format!(
        "constant-density rel err {worst_const:.1e}, homogeneity rel err {worst_hom:.1e}, tail violations {violations} over {} densities x {} s",
        specs.len(),
        s_grid.len()
    );
    if worst_const <= 1e-10 && worst_hom <= 1e-10 && violations == 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn example_suite() -> Outcome {
    let start = Instant::now();
    let report = verify_example_suite().unwrap();
    within(Duration::from_secs(30), start)?;
    let failed: Vec<&str> = report.items.iter().filter(|i| !i.pass).map(|i| i.name.as_str()).collect();
    let detail = format!("{} items, {} failed {}", report.items.len(), failed.len(), failed.join(", "));
    if report.pass {
        Ok(detail)
    } else {
        Err(detail)
    }
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("conjugate correctness", conjugate_correctness),
        ("universal inequalities", universal_inequalities),
        ("biconjugation", biconjugation),
        ("integrability classifier", integrability_classifier),
        ("condition equivalence", condition_equivalence),
        ("stability modulus asymptotics", hbar_asymptotics),
        ("E / comparison pipeline", geometry_pipeline),
        ("diameter and volume", diameter_volume),
        ("Luxemburg engine", luxemburg_engine),
        ("example suite", example_suite),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failures += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} [{tag}] {name}: {detail} ({:.2?})", i + 1, start.elapsed());
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
