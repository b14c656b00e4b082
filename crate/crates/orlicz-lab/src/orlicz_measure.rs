//! Sampled densities on a probability space, Luxemburg norms and the
//! Young-split bounds on the mass a density can put on a small set.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::conjugate::ConjugatePair;
use crate::error::{Error, Result};
use crate::nfunctions::NFunction;
use crate::roots::{bisect_bracket_tol, golden_max};

const PARALLEL_MIN: usize = 1 << 16;

/// Values `F_i >= 0` with probability weights `w_i`.
#[derive(Debug)]
pub struct SampledDensity {
    values: Vec<f64>,
    weights: Vec<f64>,
    normalized: bool,
    cache: Mutex<HashMap<String, f64>>,
}

impl Clone for SampledDensity {
    fn clone(&self) -> Self {
        SampledDensity {
            values: self.values.clone(),
            weights: self.weights.clone(),
            normalized: self.normalized,
            cache: Mutex::new(self.cache.lock().map(|c| c.clone()).unwrap_or_default()),
        }
    }
}

impl PartialEq for SampledDensity {
    fn eq(&self, other: &Self) -> bool {
        self.values == other.values && self.weights == other.weights
    }
}

impl SampledDensity {
    pub fn new(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if values.len() != weights.len() || values.is_empty() {
            return Err(Error::Data("values and weights must be non-empty and of equal length".into()));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Data(format!("density values must be finite and >= 0, got {v}")));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::Data(format!("weights must be positive, got {w}")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Data(format!("weights must sum to 1, got {total}")));
        }
        Ok(SampledDensity { values, weights, normalized: false, cache: Mutex::new(HashMap::new()) })
    }

    /// Equal weights `1/N`.
    pub fn uniform(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        let w = 1.0 / n as f64;
        let mut weights = vec![w; n];
        // absorb rounding so the weights sum to 1 within 1e-12
        let drift: f64 = 1.0 - weights.iter().sum::<f64>();
        if n > 0 {
            weights[0] += drift;
        }
        Self::new(values, weights)
    }

    /// Rescales so that `Σ w_i F_i = 1`.
    pub fn normalize(mut self) -> Result<Self> {
        let m = self.mass();
        if !(m > 0.0) {
            return Err(Error::Data("cannot normalize a zero density".into()));
        }
        for v in &mut self.values {
            *v /= m;
        }
        self.normalized = true;
        self.cache = Mutex::new(HashMap::new());
        Ok(self)
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized && (self.mass() - 1.0).abs() <= 1e-12
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `Σ w_i F_i`.
    pub fn mass(&self) -> f64 {
        self.values.iter().zip(&self.weights).map(|(f, w)| f * w).sum()
    }

    /// `c F` with the same weights.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.values.iter().map(|v| v * c).collect(), self.weights.clone())
    }

    /// Pointwise sum; weights must match.
    pub fn plus(&self, other: &SampledDensity) -> Result<Self> {
        if self.weights != other.weights {
            return Err(Error::Data("densities live on different sample sets".into()));
        }
        Self::new(self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(), self.weights.clone())
    }

    /// `Σ_{mask} w_i`.
    pub fn measure(&self, mask: &[bool]) -> Result<f64> {
        self.check_mask(mask)?;
        Ok(self.weights.iter().zip(mask).filter(|(_, m)| **m).map(|(w, _)| w).sum())
    }

    /// `Σ_{mask} w_i F_i`.
    pub fn mass_on(&self, mask: &[bool]) -> Result<f64> {
        self.check_mask(mask)?;
        Ok(self.values.iter().zip(&self.weights).zip(mask).filter(|(_, m)| **m).map(|((f, w), _)| f * w).sum())
    }

    fn check_mask(&self, mask: &[bool]) -> Result<()> {
        if mask.len() == self.len() {
            Ok(())
        } else {
            Err(Error::Data(format!("mask has {} entries for {} samples", mask.len(), self.len())))
        }
    }

    /// Largest mass any set of measure at most `m` can carry: the biggest
    /// values first, the last sample taken fractionally.
    pub fn worst_case_mass(&self, m: f64) -> f64 {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| self.values[b].total_cmp(&self.values[a]));
        let mut left = m.clamp(0.0, 1.0);
        let mut mass = 0.0;
        for i in idx {
            if left <= 0.0 {
                break;
            }
            let w = self.weights[i].min(left);
            mass += w * self.values[i];
            left -= w;
        }
        mass
    }

    /// CSV with columns `value,weight`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Data(e.to_string());
        out.write_record(["value", "weight"]).map_err(io)?;
        for (v, wt) in self.values.iter().zip(&self.weights) {
            out.write_record([format!("{v:.17e}"), format!("{wt:.17e}")]).map_err(io)?;
        }
        out.flush().map_err(|e| Error::Data(e.to_string()))
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            value: f64,
            weight: f64,
        }
        let mut values = Vec::new();
        let mut weights = Vec::new();
        for row in csv::Reader::from_reader(r).deserialize() {
            let row: Row = row.map_err(|e| Error::Data(e.to_string()))?;
            values.push(row.value);
            weights.push(row.weight);
        }
        Self::new(values, weights)
    }
}

/// `ln Σ w_i exp(ℓ(F_i / b))` for `ℓ = ln Φ`, chunked across threads for
/// large samples.
fn ln_modular<L>(ln_phi: &L, f: &SampledDensity, b: f64) -> Result<f64>
where
    L: Fn(f64) -> Result<f64> + Sync,
{
    let part = |vals: &[f64], wts: &[f64]| -> Result<(f64, f64)> {
        // running log-sum-exp as (max, scaled sum)
        let mut top = f64::NEG_INFINITY;
        let mut acc = 0.0;
        for (v, w) in vals.iter().zip(wts) {
            if *v == 0.0 {
                continue;
            }
            let x = w.ln() + ln_phi(v / b)?;
            if x > top {
                acc = acc * (top - x).exp() + 1.0;
                top = x;
            } else {
                acc += (x - top).exp();
            }
        }
        Ok((top, acc))
    };
    let parts: Vec<(f64, f64)> = if f.len() >= PARALLEL_MIN {
        let threads = std::thread::available_parallelism().map(|v| v.get()).unwrap_or(1);
        let chunk = f.len().div_ceil(threads);
        std::thread::scope(|s| {
            let hs: Vec<_> = f
                .values
                .chunks(chunk)
                .zip(f.weights.chunks(chunk))
                .map(|(v, w)| s.spawn(move || part(v, w)))
                .collect();
            hs.into_iter().map(|h| h.join().expect("modular worker panicked")).collect::<Result<_>>()
        })?
    } else {
        vec![part(&f.values, &f.weights)?]
    };
    let top = parts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return Ok(top);
    }
    let sum: f64 = parts.iter().filter(|p| p.1 > 0.0).map(|p| p.1 * (p.0 - top).exp()).sum();
    Ok(top + sum.ln())
}

/// Root `b` of `Σ w_i Φ(F_i/b) = 1` given `ln Φ` and `Φ⁻¹`.
fn norm_with<L, I>(ln_phi: L, inverse: I, f: &SampledDensity) -> Result<f64>
where
    L: Fn(f64) -> Result<f64> + Sync,
    I: Fn(f64) -> Result<f64>,
{
    let fmax = f.values.iter().cloned().fold(0.0, f64::max);
    if fmax == 0.0 {
        return Ok(0.0);
    }
    let wmin = f.weights.iter().cloned().fold(f64::INFINITY, f64::min);
    // at lo the largest sample alone reaches 1, at hi every term is <= w_i
    let mut lo = (fmax / inverse(1.0 / wmin)?).ln();
    let mut hi = (fmax / inverse(1.0)?).ln();
    let g = |lb: f64| ln_modular(&ln_phi, f, lb.exp()).unwrap_or(f64::NAN);
    let mut guard = 0;
    while g(lo) < 0.0 {
        lo -= 1.0;
        guard += 1;
        if guard > 200 {
            return Err(Error::NoBracket("modular never reaches 1".into()));
        }
    }
    while g(hi) > 0.0 {
        hi += 1.0;
        guard += 1;
        if guard > 400 {
            return Err(Error::NoBracket("modular stays above 1".into()));
        }
    }
    let (a, b) = bisect_bracket_tol(|lb| -g(lb), lo, hi, 1e-15, 0.0)?;
    Ok((0.5 * (a + b)).exp())
}

fn cache_key(tag: &str, phi: &NFunction) -> String {
    format!("{tag}:{}", serde_json::to_string(phi).unwrap_or_else(|_| phi.label()))
}

/// `‖F‖_Φ = inf { b > 0 : Σ w_i Φ(F_i/b) <= 1 }`, cached per density and `Φ`.
pub fn luxemburg_norm(phi: &NFunction, f: &SampledDensity) -> Result<f64> {
    phi.require_convex()?;
    let key = cache_key("phi", phi);
    if let Some(v) = f.cache.lock().ok().and_then(|c| c.get(&key).copied()) {
        return Ok(v);
    }
    let v = norm_with(|t| phi.ln_eval(t), |y| phi.eval_inverse(y), f)?;
    if let Ok(mut c) = f.cache.lock() {
        c.entry(key).or_insert(v);
    }
    Ok(v)
}

/// Luxemburg norm with respect to the complementary function `Φ*`.
pub fn luxemburg_norm_conjugate(pair: &ConjugatePair, f: &SampledDensity) -> Result<f64> {
    let key = cache_key("conj", pair.phi());
    if let Some(v) = f.cache.lock().ok().and_then(|c| c.get(&key).copied()) {
        return Ok(v);
    }
    let v = norm_with(
        |s| if s == 0.0 { Ok(f64::NEG_INFINITY) } else { pair.ln_conjugate(s) },
        |y| pair.phi_star_inverse(y),
        f,
    )?;
    if let Ok(mut c) = f.cache.lock() {
        c.entry(key).or_insert(v);
    }
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModularBound {
    pub modular: f64,
    pub norm: f64,
    pub holds: bool,
}

/// With modular `m = Σ w_i Φ(F_i) >= 1`, the norm is at most `m`.
pub fn norm_from_modular(phi: &NFunction, f: &SampledDensity) -> Result<ModularBound> {
    let modular = ln_modular(&|t| phi.ln_eval(t), f, 1.0)?.exp();
    if !modular.is_finite() {
        return Err(Error::Data("modular is not finite".into()));
    }
    if modular < 1.0 {
        return Err(Error::Precondition(format!("modular {modular} is below 1")));
    }
    let norm = luxemburg_norm(phi, f)?;
    Ok(ModularBound { modular, norm, holds: norm <= modular * (1.0 + 1e-12) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct YoungSplit {
    pub epsilon: f64,
    pub bound: f64,
    pub actual: f64,
    pub holds: bool,
}

/// `Σ_{mask} w F <= ε ‖F‖ (1 + Φ*(1/ε) μ(mask))`.
pub fn youngsplit_bound(pair: &ConjugatePair, f: &SampledDensity, mask: &[bool], eps: f64) -> Result<YoungSplit> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::domain(format!("epsilon must be positive, got {eps}")));
    }
    let norm = luxemburg_norm(pair.phi(), f)?;
    let mu = f.measure(mask)?;
    let actual = f.mass_on(mask)?;
    let conj = if mu == 0.0 { 0.0 } else { pair.conjugate_at(1.0 / eps)? };
    let bound = eps * norm * (1.0 + conj * mu);
    Ok(YoungSplit { epsilon: eps, bound, actual, holds: actual <= bound + 1e-9 })
}

/// The split bound minimized over `ε` by golden section in `ln ε`.
pub fn optimal_youngsplit(pair: &ConjugatePair, f: &SampledDensity, mask: &[bool]) -> Result<YoungSplit> {
    let obj = |le: f64| match youngsplit_bound(pair, f, mask, le.exp()) {
        Ok(r) => -r.bound,
        Err(_) => f64::NEG_INFINITY,
    };
    let grid: Vec<f64> = (0..=120).map(|i| -30.0 + 0.5 * i as f64).collect();
    let (_, _, i) = crate::roots::refined_grid_max(obj, &grid, 0, 1);
    let (le, _) = golden_max(obj, grid[i.saturating_sub(1)], grid[(i + 1).min(grid.len() - 1)], 1e-12);
    youngsplit_bound(pair, f, mask, le.exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailPoint {
    pub s: f64,
    /// `‖F‖ (1 + C) / (Φ*)⁻¹(s)`.
    pub bound: f64,
    /// Measure allowance `min(1, C/s)` of the level set.
    pub measure: f64,
    /// Largest mass a set with that measure can carry.
    pub worst_case_mass: f64,
}

/// Tail bound at each level `s`: choosing `Φ*(1/ε) = s` in the split, for
/// level sets whose measure is at most `C/s`.
pub fn tail_bound_curve(pair: &ConjugatePair, f: &SampledDensity, s_grid: &[f64], c: f64) -> Result<Vec<TailPoint>> {
    if !f.is_normalized() {
        return Err(Error::Precondition("tail bound needs a normalized density".into()));
    }
    if !(c > 0.0) {
        return Err(Error::config("tail constant must be positive"));
    }
    let norm = luxemburg_norm(pair.phi(), f)?;
    s_grid
        .iter()
        .map(|&s| {
            if !(s > 0.0) {
                return Err(Error::domain(format!("levels must be positive, got {s}")));
            }
            let measure = (c / s).min(1.0);
            Ok(TailPoint {
                s,
                bound: norm * (1.0 + c) / pair.phi_star_inverse(s)?,
                measure,
                worst_case_mass: f.worst_case_mass(measure),
            })
        })
        .collect()
}

/// Singular profile placed at a vertex of a periodic midpoint grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DensitySpec {
    Constant,
    /// `r^{-γ}`, integrable iff `γ < dim`.
    PowerSpike { gamma: f64 },
    /// `r^{-dim} (1 + ln(1/r))^{-γ}`, integrable iff `γ > 1`.
    LogSpike { gamma: f64 },
}

impl DensitySpec {
    /// Parses `constant`, `power-spike:γ` or `log-spike:γ`.
    pub fn parse(s: &str) -> Result<Self> {
        let (kind, arg) = s.split_once(':').unwrap_or((s, ""));
        let gamma = || arg.parse::<f64>().map_err(|_| Error::config(format!("bad exponent in '{s}'")));
        match kind {
            "constant" if arg.is_empty() => Ok(DensitySpec::Constant),
            "constant" => Err(Error::config(format!("'constant' takes no parameter, got '{s}'"))),
            "power-spike" => Ok(DensitySpec::PowerSpike { gamma: gamma()? }),
            "log-spike" => Ok(DensitySpec::LogSpike { gamma: gamma()? }),
            other => Err(Error::config(format!("unknown density kind '{other}'"))),
        }
    }
}

/// Mass-normalized density sampled at the midpoints of a `size^dim` grid on
/// the unit torus.
pub fn density_generator(spec: DensitySpec, dim: usize, size: usize) -> Result<SampledDensity> {
    if dim == 0 || size == 0 {
        return Err(Error::config("grid dimension and size must be positive"));
    }
    let count = size.checked_pow(dim as u32).filter(|&c| c <= 1 << 26).ok_or_else(|| Error::config("grid too large"))?;
    let d = dim as f64;
    match spec {
        DensitySpec::PowerSpike { gamma } if !(0.0..d).contains(&gamma) => {
            return Err(Error::domain(format!("power spike needs 0 <= gamma < {dim}, got {gamma}")));
        }
        DensitySpec::LogSpike { gamma } if !(gamma > 1.0) => {
            return Err(Error::domain(format!("log spike needs gamma > 1, got {gamma}")));
        }
        _ => {}
    }
    let h = 1.0 / size as f64;
    let mut values = Vec::with_capacity(count);
    let mut idx = vec![0usize; dim];
    for _ in 0..count {
        let r2: f64 = idx
            .iter()
            .map(|&i| {
                let x = (i as f64 + 0.5) * h;
                let dx = x.min(1.0 - x);
                dx * dx
            })
            .sum();
        let r = r2.sqrt();
        values.push(match spec {
            DensitySpec::Constant => 1.0,
            DensitySpec::PowerSpike { gamma } => r.powf(-gamma),
            DensitySpec::LogSpike { gamma } => r.powf(-d) * (1.0 - r.ln()).powf(-gamma),
        });
        for slot in idx.iter_mut() {
            *slot += 1;
            if *slot < size {
                break;
            }
            *slot = 0;
        }
    }
    SampledDensity::uniform(values)?.normalize()
}

/// Whether a profile has finite norm on the continuum, from the exponents.
pub fn analytic_in_space(spec: DensitySpec, dim: usize, phi: &NFunction) -> Option<bool> {
    use crate::nfunctions::Family;
    let d = dim as f64;
    match (spec, phi.family()) {
        (DensitySpec::Constant, _) => Some(true),
        (DensitySpec::PowerSpike { gamma }, Family::PowerLaw { p }) => Some(p * gamma < d),
        (DensitySpec::LogSpike { gamma }, Family::LogProduct(e)) if e.len() == 2 && e[0] == 1.0 => Some(gamma > e[1] + 1.0),
        _ => None,
    }
}

/// Growth rate of `ln ‖F_m‖` against `ln m` between two grid sizes; a
/// bounded norm under refinement shows a rate near zero.
pub fn refinement_rate(phi: &NFunction, spec: DensitySpec, dim: usize, sizes: (usize, usize)) -> Result<f64> {
    let a = luxemburg_norm(phi, &density_generator(spec, dim, sizes.0)?)?;
    let b = luxemburg_norm(phi, &density_generator(spec, dim, sizes.1)?)?;
    Ok((b / a).ln() / (sizes.1 as f64 / sizes.0 as f64).ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    fn pair(f: Result<NFunction>) -> ConjugatePair {
        ConjugatePair::new(f.unwrap()).unwrap()
    }

    fn random_density(rng: &mut ChaCha8Rng, n: usize) -> SampledDensity {
        let v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>().powi(3) * 10.0).collect();
        SampledDensity::uniform(v).unwrap()
    }

    #[test]
    fn norm_examples() {
        let p2 = NFunction::power(2.0).unwrap();
        let one = SampledDensity::uniform(vec![1.0; 10]).unwrap();
        assert!(rel(luxemburg_norm(&p2, &one).unwrap(), 0.5f64.sqrt()) < 1e-12);
        let zero = SampledDensity::uniform(vec![0.0; 4]).unwrap();
        assert_eq!(luxemburg_norm(&p2, &zero).unwrap(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = random_density(&mut rng, 200);
        let n1 = luxemburg_norm(&p2, &f).unwrap();
        let n3 = luxemburg_norm(&p2, &f.scaled(3.0).unwrap()).unwrap();
        assert!(rel(n3, 3.0 * n1) < 1e-12);
        // defining equation holds at the root
        let m: f64 = f.values().iter().zip(f.weights()).map(|(v, w)| w * (v / n1).powi(2) / 2.0).sum();
        assert!((m - 1.0).abs() < 1e-12);
    }

    #[test]
    fn modular_examples() {
        let p2 = NFunction::power(2.0).unwrap();
        let exact = SampledDensity::uniform(vec![2f64.sqrt(); 3]).unwrap();
        let r = norm_from_modular(&p2, &exact).unwrap();
        assert!(rel(r.modular, 1.0) < 1e-15 && rel(r.norm, 1.0) < 1e-12);
        let two = SampledDensity::uniform(vec![2.0; 3]).unwrap();
        let r = norm_from_modular(&p2, &two).unwrap();
        assert!(rel(r.modular, 2.0) < 1e-15 && rel(r.norm, 2f64.sqrt()) < 1e-12 && r.holds);
        let small = SampledDensity::uniform(vec![0.1; 3]).unwrap();
        assert!(matches!(norm_from_modular(&p2, &small), Err(Error::Precondition(_))));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let f = random_density(&mut rng, 50).scaled(3.0).unwrap();
            if let Ok(r) = norm_from_modular(&NFunction::exp_minus(1.0).unwrap(), &f) {
                assert!(r.holds);
            }
        }
    }

    #[test]
    fn young_split_examples() {
        let p2 = pair(NFunction::power(2.0));
        let one = SampledDensity::uniform(vec![1.0; 10]).unwrap();
        let half: Vec<bool> = (0..10).map(|i| i < 5).collect();
        let r = optimal_youngsplit(&p2, &one, &half).unwrap();
        // oracle: minimize (ε + 0.25/ε)/√2 on a dense grid
        let oracle = (1..200000)
            .map(|i| {
                let e = i as f64 * 1e-5;
                (e + 0.25 / e) / 2f64.sqrt()
            })
            .fold(f64::INFINITY, f64::min);
        assert!(rel(r.bound, oracle) < 1e-9 && rel(r.bound, 0.5f64.sqrt()) < 1e-9);
        assert!(r.holds && (r.actual - 0.5).abs() < 1e-15);
        let none = vec![false; 10];
        let r = youngsplit_bound(&p2, &one, &none, 0.3).unwrap();
        assert_eq!(r.actual, 0.0);
        assert!(rel(r.bound, 0.3 * 0.5f64.sqrt()) < 1e-12);
        let all = vec![true; 10];
        let r = youngsplit_bound(&p2, &one, &all, 1e6).unwrap();
        assert!(r.bound > 1e5 && r.holds);
    }

    #[test]
    fn tail_curve_dominates_and_decreases() {
        let p2 = pair(NFunction::power(2.0));
        let f = density_generator(DensitySpec::PowerSpike { gamma: 0.8 }, 2, 32).unwrap();
        let grid = crate::nfunctions::log_grid(1.0, 1e4, 30);
        let curve = tail_bound_curve(&p2, &f, &grid, 1.0).unwrap();
        for w in curve.windows(2) {
            assert!(w[1].bound < w[0].bound);
        }
        for p in &curve {
            assert!(p.worst_case_mass <= p.bound);
            // (Φ*)⁻¹(s) = √(2s): bound ∝ s^{-1/2}
            let norm = luxemburg_norm(p2.phi(), &f).unwrap();
            assert!(rel(p.bound, 2.0 * norm / (2.0 * p.s).sqrt()) < 1e-12);
        }
        let raw = SampledDensity::uniform(vec![2.0, 1.0]).unwrap();
        assert!(matches!(tail_bound_curve(&p2, &raw, &grid, 1.0), Err(Error::Precondition(_))));
    }

    #[test]
    fn single_spike_tail_is_below_bound() {
        let p = pair(NFunction::exp_minus(1.0));
        let mut v = vec![0.0; 1000];
        v[0] = 1.0;
        let f = SampledDensity::uniform(v).unwrap().normalize().unwrap();
        for t in tail_bound_curve(&p, &f, &crate::nfunctions::log_grid(1.0, 1e6, 30), 1.0).unwrap() {
            assert!(t.worst_case_mass <= t.bound, "{t:?}");
        }
    }

    #[test]
    fn generators_and_analytic_criterion() {
        let c = density_generator(DensitySpec::Constant, 2, 8).unwrap();
        assert!(c.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(c.is_normalized());
        assert!(density_generator(DensitySpec::PowerSpike { gamma: 2.0 }, 2, 8).is_err());
        assert!(density_generator(DensitySpec::LogSpike { gamma: 1.0 }, 2, 8).is_err());
        let p2 = NFunction::power(2.0).unwrap();
        for (gamma, finite) in [(0.5, true), (1.5, false)] {
            let spec = DensitySpec::PowerSpike { gamma };
            assert_eq!(analytic_in_space(spec, 2, &p2), Some(finite));
            let rate = refinement_rate(&p2, spec, 2, (64, 256)).unwrap();
            assert_eq!(rate < 0.1, finite, "gamma={gamma}: rate {rate}");
        }
        let lp = NFunction::log_product(&[1.0, 1.0]).unwrap();
        let spec = DensitySpec::LogSpike { gamma: 4.0 };
        assert_eq!(analytic_in_space(spec, 2, &lp), Some(true));
        let f = density_generator(spec, 2, 64).unwrap();
        assert!(luxemburg_norm(&lp, &f).unwrap().is_finite());
        assert_eq!(DensitySpec::parse("power-spike:0.5").unwrap(), DensitySpec::PowerSpike { gamma: 0.5 });
    }

    #[test]
    fn banach_and_holder_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pr = pair(NFunction::power(3.0));
        for _ in 0..10 {
            let f = random_density(&mut rng, 40);
            let g = SampledDensity::new(random_density(&mut rng, 40).values().to_vec(), f.weights().to_vec()).unwrap();
            let phi = pr.phi();
            let sum = luxemburg_norm(phi, &f.plus(&g).unwrap()).unwrap();
            assert!(sum <= luxemburg_norm(phi, &f).unwrap() + luxemburg_norm(phi, &g).unwrap() + 1e-12);
            let lhs: f64 = f.values().iter().zip(g.values()).zip(f.weights()).map(|((a, b), w)| a * b * w).sum();
            let rhs = 2.0 * luxemburg_norm(phi, &f).unwrap() * luxemburg_norm_conjugate(&pr, &g).unwrap();
            assert!(lhs <= rhs * (1.0 + 1e-12));
        }
    }

    #[test]
    fn csv_round_trip() {
        let f = density_generator(DensitySpec::PowerSpike { gamma: 1.0 }, 2, 4).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let back = SampledDensity::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, f);
        assert!(SampledDensity::read_csv("value,weight\n1,0.5\n".as_bytes()).is_err());
    }
}
