//! `orlicz` command line: every computation as a subcommand that emits CSV
//! curves and JSON reports.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numeric failure (or a
//! failed verification), 4 failed integrability precondition.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::asymptotics::verify_example_suite;
use crate::conjugate::{ConjugatePair, Source};
use crate::error::{Error, Result};
use crate::geometry::{self, Feasibility, GeometryInputs};
use crate::ledger::Ledger;
use crate::nfunctions::{log_grid, Descriptor, Family, NFunction};
use crate::orlicz_measure::{density_generator, luxemburg_norm, DensitySpec};
use crate::quadrature::{self, Conclusion};
use crate::report::{fmt_num, to_json, write_atomic};
use crate::stability::{default_delta_grid, StabilityProfile};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_PRECONDITION: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "orlicz", version, about = "N-function conjugates, integrability, stability moduli and volume bounds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Complementary function Φ*(s) at one slope or over a grid.
    Conjugate(ConjugateArgs),
    /// Stability modulus ħ(δ) over a δ grid.
    Hbar(HbarArgs),
    /// Whether a diameter bound is available, with the witness Φ₁.
    Diameter(DiameterArgs),
    /// Ball-volume lower bound v(r).
    Volume(VolumeArgs),
    /// Luxemburg norm of a generated density.
    Luxemburg(LuxemburgArgs),
    /// Closed-form asymptotics of the example families against the numerics.
    Verify(VerifyArgs),
    /// Both integrability conditions.
    Integrability(IntegrabilityArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyKind {
    Power,
    Expminus,
    Logproduct,
    Slowgrowth,
}

/// Φ as `--phi kind:params` or as `--family` with parameter flags.
#[derive(Debug, Clone, Default, Args)]
pub struct PhiArgs {
    /// `power:p`, `expminus:a`, `logproduct:p0,p1,...` or `slowgrowth:k,p`
    #[arg(long)]
    pub phi: Option<String>,
    #[arg(long, value_enum, conflicts_with = "phi")]
    pub family: Option<FamilyKind>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub a: Option<f64>,
    /// Depth of the slow-growth family.
    #[arg(long)]
    pub k: Option<usize>,
    /// Comma-separated log-product exponents.
    #[arg(long)]
    pub exponents: Option<String>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Complex dimension.
    #[arg(long)]
    pub n: Option<f64>,
    /// Ledger override `name=value`; repeatable.
    #[arg(long = "ledger", value_name = "NAME=VALUE")]
    pub ledger: Vec<String>,
    /// Sets every ledger constant before overrides.
    #[arg(long)]
    pub seed_constants: Option<f64>,
    /// Output file; CSV outputs also get a JSON sidecar.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GridArgs {
    #[arg(long)]
    pub min: Option<f64>,
    #[arg(long)]
    pub max: Option<f64>,
    #[arg(long)]
    pub count: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ConjugateArgs {
    #[command(flatten)]
    pub phi: PhiArgs,
    /// Single slope; prints Φ*(s).
    #[arg(long)]
    pub s: Option<f64>,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct HbarArgs {
    #[command(flatten)]
    pub phi: PhiArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct DiameterArgs {
    #[command(flatten)]
    pub phi: PhiArgs,
    /// Largest witness depth tried by the numeric search.
    #[arg(long, default_value_t = 4)]
    pub budget: usize,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct VolumeArgs {
    #[command(flatten)]
    pub phi: PhiArgs,
    /// Auxiliary Φ₁ in `--phi` syntax; searched for when absent.
    #[arg(long)]
    pub phi1: Option<String>,
    #[arg(long)]
    pub q_prime: Option<f64>,
    #[arg(long, default_value_t = 4)]
    pub budget: usize,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct LuxemburgArgs {
    #[command(flatten)]
    pub phi: PhiArgs,
    /// `constant[:c]`, `power-spike:γ` or `log-spike:γ`
    #[arg(long, default_value = "constant")]
    pub density: String,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Directory for one CSV curve per suite item.
    #[arg(long)]
    pub curves: Option<PathBuf>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct IntegrabilityArgs {
    #[command(flatten)]
    pub phi: PhiArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

/// Range and count of a sampling grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::config("grid must not be empty"));
        }
        if !(self.min > 0.0 && self.min.is_finite() && self.max.is_finite()) || self.max < self.min || (self.count > 1 && self.max == self.min) {
            return Err(Error::config(format!("grid range must be positive and ordered, got [{}, {}]", self.min, self.max)));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            vec![self.min]
        } else {
            log_grid(self.min, self.max, self.count)
        }
    }
}

/// Everything a command needs, as loaded from `--config` and overridden by
/// flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub command: String,
    pub phi: Vec<Descriptor>,
    pub n: f64,
    pub ledger: Ledger,
    pub grid: Option<GridSpec>,
    pub output: Option<PathBuf>,
    pub format: Format,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { command: String::new(), phi: Vec::new(), n: 2.0, ledger: Ledger::default(), grid: None, output: None, format: Format::Csv }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n >= 1.0 && self.n.is_finite()) {
            return Err(Error::config(format!("dimension n must be at least 1, got {}", self.n)));
        }
        self.ledger.validate().map_err(|e| Error::config(e.to_string()))?;
        if let Some(g) = &self.grid {
            g.validate()?;
        }
        Ok(())
    }

    fn resolve(command: &str, common: &CommonArgs, phi: Option<NFunction>, grid: &GridArgs, format: Format) -> Result<Self> {
        let mut cfg = match &common.config {
            Some(path) => {
                let cfg = RunConfig::load(path)?;
                if !cfg.command.is_empty() && cfg.command != command {
                    return Err(Error::config(format!("config is for '{}', not '{command}'", cfg.command)));
                }
                cfg
            }
            None => RunConfig { format, ..RunConfig::default() },
        };
        cfg.command = command.to_string();
        if let Some(phi) = phi {
            if cfg.phi.is_empty() {
                cfg.phi.push(phi.descriptor());
            } else {
                cfg.phi[0] = phi.descriptor();
            }
        }
        if let Some(n) = common.n {
            cfg.n = n;
        }
        if let Some(v) = common.seed_constants {
            cfg.ledger = Ledger::seeded(v);
        }
        for item in &common.ledger {
            let (name, value) = item.split_once('=').ok_or_else(|| Error::config(format!("ledger override '{item}' is not name=value")))?;
            let value: f64 = value.trim().parse().map_err(|_| Error::config(format!("ledger value in '{item}' is not a number")))?;
            cfg.ledger.set(name.trim(), value).map_err(|e| Error::config(e.to_string()))?;
        }
        if grid.min.is_some() || grid.max.is_some() || grid.count.is_some() {
            let base = cfg.grid;
            let pick = |flag: Option<f64>, from: Option<f64>| flag.or(from).ok_or_else(|| Error::config("grid needs --min and --max"));
            cfg.grid = Some(GridSpec {
                min: pick(grid.min, base.map(|g| g.min))?,
                max: pick(grid.max, base.map(|g| g.max))?,
                count: grid.count.or(base.map(|g| g.count)).unwrap_or(25),
            });
        }
        if let Some(out) = &common.out {
            cfg.output = Some(out.clone());
        }
        if let Some(f) = common.format {
            cfg.format = f;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn phi(&self, index: usize) -> Result<NFunction> {
        let d = self.phi.get(index).ok_or_else(|| Error::config("no N-function given (use --phi or --family)"))?;
        NFunction::from_descriptor(d).map_err(|e| Error::config(e.to_string()))
    }

    fn grid_or(&self, default: Vec<f64>) -> Vec<f64> {
        self.grid.map(|g| g.points()).unwrap_or(default)
    }
}

fn numbers(list: &str) -> Result<Vec<f64>> {
    list.split(',').map(|v| v.trim().parse::<f64>().map_err(|_| Error::config(format!("'{v}' is not a number")))).collect()
}

/// Parses `power:p`, `expminus:a`, `logproduct:p0,p1,...` or
/// `slowgrowth:k,p` (the last needs `n`).
pub fn parse_phi(spec: &str, n: f64) -> Result<NFunction> {
    let (kind, args) = spec.split_once(':').ok_or_else(|| Error::config(format!("'{spec}' is not kind:params")))?;
    let v = numbers(args)?;
    let want = |k: usize| if v.len() == k { Ok(()) } else { Err(Error::config(format!("'{kind}' takes {k} parameter(s), got {}", v.len()))) };
    let phi = match kind {
        "power" => want(1).and_then(|_| NFunction::power(v[0])),
        "expminus" => want(1).and_then(|_| NFunction::exp_minus(v[0])),
        "logproduct" => NFunction::log_product(&v),
        "slowgrowth" => want(2).and_then(|_| {
            if v[0].fract() != 0.0 || v[0] < 1.0 {
                return Err(Error::config(format!("slow-growth depth must be a positive integer, got {}", v[0])));
            }
            NFunction::slow_growth(v[0] as usize, v[1], n)
        }),
        other => return Err(Error::config(format!("unknown family '{other}'"))),
    };
    phi.map_err(|e| Error::config(e.to_string()))
}

impl PhiArgs {
    fn build(&self, n: f64) -> Result<Option<NFunction>> {
        if let Some(spec) = &self.phi {
            return parse_phi(spec, n).map(Some);
        }
        let Some(kind) = self.family else { return Ok(None) };
        let need = |v: Option<f64>, name: &str| v.ok_or_else(|| Error::config(format!("--family needs --{name}")));
        let phi = match kind {
            FamilyKind::Power => NFunction::power(need(self.p, "p")?),
            FamilyKind::Expminus => NFunction::exp_minus(need(self.a, "a")?),
            FamilyKind::Logproduct => {
                NFunction::log_product(&numbers(self.exponents.as_deref().ok_or_else(|| Error::config("--family logproduct needs --exponents"))?)?)
            }
            FamilyKind::Slowgrowth => NFunction::slow_growth(self.k.ok_or_else(|| Error::config("--family slowgrowth needs --k"))?, need(self.p, "p")?, n),
        };
        phi.map(Some).map_err(|e| Error::config(e.to_string()))
    }
}

/// Dimension from the flag or the config file, for parsing slow-growth specs.
fn early_n(common: &CommonArgs) -> Result<f64> {
    if let Some(n) = common.n {
        return Ok(n);
    }
    match &common.config {
        Some(p) => Ok(RunConfig::load(p)?.n),
        None => Ok(RunConfig::default().n),
    }
}

fn setup(command: &str, phi: &PhiArgs, grid: &GridArgs, common: &CommonArgs, format: Format) -> Result<RunConfig> {
    let n = early_n(common)?;
    RunConfig::resolve(command, common, phi.build(n)?, grid, format)
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        Error::Precondition(_) => EXIT_PRECONDITION,
        _ => EXIT_NUMERIC,
    }
}

/// Stdout write that treats a closed pipe as the end of output.
fn say(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|_| out.flush());
}

fn csv_text(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let io = |e: csv::Error| Error::Data(e.to_string());
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    String::from_utf8(w.into_inner().map_err(|e| Error::Data(e.to_string()))?).map_err(|e| Error::Data(e.to_string()))
}

fn opt_num(v: Option<f64>) -> String {
    v.filter(|x| x.is_finite()).map(fmt_num).unwrap_or_default()
}

/// Writes the CSV (with a JSON sidecar) or the JSON report to `cfg.output`,
/// or prints the requested format.
fn emit(cfg: &RunConfig, csv: Option<String>, json: String) -> Result<()> {
    let csv = csv.filter(|_| cfg.format == Format::Csv);
    match (&cfg.output, csv) {
        (Some(path), Some(csv)) => {
            write_atomic(path, csv.as_bytes())?;
            write_atomic(&path.with_extension("json"), json.as_bytes())
        }
        (Some(path), None) => write_atomic(path, json.as_bytes()),
        (None, Some(csv)) => {
            say(&csv);
            Ok(())
        }
        (None, None) => {
            say(&format!("{json}\n"));
            Ok(())
        }
    }
}

fn closed_conjugate(phi: &NFunction, s: f64) -> Option<f64> {
    let pair = ConjugatePair::new(phi.clone()).ok()?;
    match phi.family() {
        Family::PowerLaw { .. } | Family::ExpMinus { .. } => pair.conjugate_at(s).ok(),
        _ => None,
    }
}

fn cmd_conjugate(args: &ConjugateArgs) -> Result<i32> {
    let cfg = setup("conjugate", &args.phi, &args.grid, &args.common, Format::Csv)?;
    let phi = cfg.phi(0)?;
    let pair = ConjugatePair::new(phi.clone()).map_err(|e| Error::config(e.to_string()))?;
    let source = match pair.provenance().phi_star {
        Source::ClosedForm => "closed-form",
        Source::Numeric => "numeric",
    };
    if let Some(s) = args.s {
        if !(s >= 0.0 && s.is_finite()) {
            return Err(Error::config(format!("--s must be a finite nonnegative slope, got {s}")));
        }
        let v = pair.conjugate_at(s)?;
        if cfg.format == Format::Json || cfg.output.is_some() {
            #[derive(Serialize)]
            struct Point<'a> {
                family: String,
                s: f64,
                phi_star: f64,
                provenance: &'a str,
            }
            let json = to_json("conjugate", &cfg.ledger, Point { family: phi.label(), s, phi_star: v, provenance: source })?;
            emit(&RunConfig { format: Format::Json, ..cfg.clone() }, None, json)?;
        } else {
            say(&format!("{v}\n"));
        }
        return Ok(EXIT_OK);
    }
    let grid = cfg.grid_or(log_grid(1e-3, 1e3, 61));
    let mut rows = Vec::with_capacity(grid.len());
    let mut points = Vec::with_capacity(grid.len());
    for &s in &grid {
        let v = pair.conjugate_at(s)?;
        let closed = closed_conjugate(&phi, s);
        rows.push(vec![fmt_num(s), fmt_num(v), opt_num(closed), source.to_string()]);
        points.push((s, v, closed));
    }
    let csv = csv_text(&["s", "phi_star", "closed_form", "provenance"], &rows)?;
    let json = to_json("conjugate", &cfg.ledger, serde_json::json!({ "family": phi.label(), "provenance": pair.provenance(), "points": points }))?;
    emit(&cfg, Some(csv), json)?;
    Ok(EXIT_OK)
}

/// Least-squares fit `ln ħ = α ln δ + β ln(-ln δ) + c`; returns `(α, β)`.
pub fn fit_delta_exponents(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    let rows: Vec<[f64; 3]> = points.iter().filter(|(d, h)| *d > 0.0 && *d < 1.0 && *h > 0.0).map(|(d, h)| [d.ln(), (-d.ln()).ln(), h.ln()]).collect();
    if rows.len() < 3 {
        return None;
    }
    let m = rows.len() as f64;
    let mean = |k: usize| rows.iter().map(|r| r[k]).sum::<f64>() / m;
    let (mx, my, mz) = (mean(0), mean(1), mean(2));
    let (mut sxx, mut sxy, mut syy, mut sxz, mut syz) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for r in &rows {
        let (x, y, z) = (r[0] - mx, r[1] - my, r[2] - mz);
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
        sxz += x * z;
        syz += y * z;
    }
    let det = sxx * syy - sxy * sxy;
    (det.abs() > 1e-12 * sxx * syy).then(|| ((sxz * syy - syz * sxy) / det, (syz * sxx - sxz * sxy) / det))
}

fn cmd_hbar(args: &HbarArgs) -> Result<i32> {
    let cfg = setup("hbar", &args.phi, &args.grid, &args.common, Format::Csv)?;
    let phi = cfg.phi(0)?;
    let pair = ConjugatePair::new(phi.clone()).map_err(|e| Error::config(e.to_string()))?;
    let second = quadrature::second_condition(&pair, cfg.n, None)?;
    if second.conclusion() != Conclusion::Converges {
        eprintln!("second integrability condition does not hold for {} with n = {}", phi.label(), cfg.n);
        say(&format!("{}\n", to_json("hbar", &cfg.ledger, &second)?));
        return Ok(EXIT_PRECONDITION);
    }
    let deltas = cfg.grid_or(default_delta_grid());
    let prof = StabilityProfile::compute(&pair, cfg.n, &deltas, &cfg.ledger)?;
    let mut csv = Vec::new();
    prof.write_csv(&mut csv)?;
    let fit = fit_delta_exponents(&prof.points.iter().map(|p| (p.delta, p.hbar)).collect::<Vec<_>>());
    let json = to_json(
        "hbar",
        &cfg.ledger,
        serde_json::json!({
            "family": prof.family,
            "n": prof.n,
            "asymptote": prof.asymptote,
            "second_condition": second,
            "tau_monotone": prof.tau_monotone(),
            "max_log_ratio": prof.max_log_ratio(),
            "delta_exponent": fit.map(|f| f.0),
            "log_exponent": fit.map(|f| f.1),
        }),
    )?;
    emit(&cfg, Some(String::from_utf8(csv).map_err(|e| Error::Data(e.to_string()))?), json)?;
    Ok(EXIT_OK)
}

fn cmd_diameter(args: &DiameterArgs) -> Result<i32> {
    let cfg = setup("diameter", &args.phi, &GridArgs::default(), &args.common, Format::Json)?;
    let phi = cfg.phi(0)?;
    let report = geometry::diameter_feasible(&phi, cfg.n, args.budget)?;
    let json = to_json("diameter", &cfg.ledger, serde_json::json!({ "family": phi.label(), "n": cfg.n, "report": report }))?;
    emit(&RunConfig { format: Format::Json, ..cfg }, None, json)?;
    Ok(EXIT_OK)
}

fn cmd_volume(args: &VolumeArgs) -> Result<i32> {
    let mut cfg = setup("volume", &args.phi, &args.grid, &args.common, Format::Csv)?;
    if let Some(spec) = &args.phi1 {
        let phi1 = parse_phi(spec, cfg.n)?;
        cfg.phi.truncate(1);
        cfg.phi.push(phi1.descriptor());
    }
    let phi = cfg.phi(0)?;
    let phi1 = match cfg.phi(1) {
        Ok(p) => p,
        Err(_) => {
            let report = geometry::diameter_feasible(&phi, cfg.n, args.budget)?;
            match &report.feasibility {
                Feasibility::Feasible { witness } => NFunction::from_descriptor(witness)?,
                _ => {
                    eprintln!("no admissible auxiliary function found for {} with n = {}", phi.label(), cfg.n);
                    say(&format!("{}\n", to_json("volume", &cfg.ledger, &report)?));
                    return Ok(EXIT_PRECONDITION);
                }
            }
        }
    };
    let mut inputs = GeometryInputs::new(phi.clone(), phi1.clone(), cfg.n)?.with_ledger(cfg.ledger.clone());
    if let Some(q) = args.q_prime {
        inputs = inputs.with_q_prime(q);
    }
    let bound = geometry::psi_pipeline(inputs)?;
    let radii = cfg.grid_or(log_grid(1e-6, 1e-1, 21));
    let curve = bound.volume_curve(&radii)?;
    let closed = |r: f64| -> Option<f64> {
        let (depth, inner) = bound.closed_form.as_ref()?.composed.as_ref()?;
        (*depth == 0).then(|| (-inner.ln_at(cfg.ledger.c.ln() - 2.0 * r.ln())).exp().min(1.0))
    };
    let rows: Vec<Vec<String>> = curve.iter().map(|&(r, v)| vec![fmt_num(r), fmt_num(v), opt_num(closed(r))]).collect();
    let csv = csv_text(&["r", "v", "v_closed_form"], &rows)?;
    let r_min = radii.iter().copied().fold(f64::INFINITY, f64::min);
    let json = to_json(
        "volume",
        &cfg.ledger,
        serde_json::json!({
            "family": phi.label(),
            "phi1": phi1.label(),
            "n": cfg.n,
            "slope_at_min_r": bound.volume_slope(r_min).ok(),
            "closed_slope_at_min_r": bound.closed_volume_slope(r_min),
            "closed_form": bound.closed_form,
        }),
    )?;
    emit(&cfg, Some(csv), json)?;
    Ok(EXIT_OK)
}

/// `constant[:c]` is the constant density `c`; other kinds go to
/// [`DensitySpec::parse`].
fn parse_density(s: &str) -> Result<(DensitySpec, f64)> {
    match s.split_once(':') {
        Some(("constant", c)) => {
            let c: f64 = c.parse().map_err(|_| Error::config(format!("bad constant in '{s}'")))?;
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::config(format!("constant density must be positive, got {c}")));
            }
            Ok((DensitySpec::Constant, c))
        }
        _ => Ok((DensitySpec::parse(s)?, 1.0)),
    }
}

fn cmd_luxemburg(args: &LuxemburgArgs) -> Result<i32> {
    let cfg = setup("luxemburg", &args.phi, &GridArgs::default(), &args.common, Format::Csv)?;
    let phi = cfg.phi(0)?;
    let (spec, scale) = parse_density(&args.density)?;
    let size = if spec == DensitySpec::Constant { 1 } else { args.size };
    let density = density_generator(spec, args.dim, size).map_err(|e| match e {
        Error::Domain(m) => Error::Config(m),
        other => other,
    })?;
    let density = if scale == 1.0 { density } else { density.scaled(scale)? };
    let norm = luxemburg_norm(&phi, &density)?;
    if cfg.format == Format::Json || cfg.output.is_some() {
        let json = to_json(
            "luxemburg",
            &cfg.ledger,
            serde_json::json!({ "family": phi.label(), "density": spec, "scale": scale, "dim": args.dim, "samples": density.len(), "norm": norm }),
        )?;
        emit(&RunConfig { format: Format::Json, ..cfg }, None, json)?;
    } else {
        say(&format!("{norm}\n"));
    }
    Ok(EXIT_OK)
}

fn cmd_verify(args: &VerifyArgs) -> Result<i32> {
    let cfg = RunConfig::resolve("verify", &args.common, None, &GridArgs::default(), Format::Json)?;
    let report = verify_example_suite()?;
    if let Some(dir) = &args.curves {
        for (i, item) in report.items.iter().enumerate() {
            write_atomic(&dir.join(format!("item_{i:02}.csv")), item.curve_csv()?.as_bytes())?;
        }
    }
    for item in &report.items {
        eprintln!("{} {} (max |log ratio| {:.3e})", if item.pass { "pass" } else { "FAIL" }, item.name, item.max_abs_log_ratio);
    }
    emit(&RunConfig { format: Format::Json, ..cfg.clone() }, None, to_json("verify", &cfg.ledger, &report)?)?;
    Ok(if report.pass { EXIT_OK } else { EXIT_NUMERIC })
}

fn cmd_integrability(args: &IntegrabilityArgs) -> Result<i32> {
    let cfg = setup("integrability", &args.phi, &GridArgs::default(), &args.common, Format::Json)?;
    let phi = cfg.phi(0)?;
    let pair = ConjugatePair::new(phi.clone()).map_err(|e| Error::config(e.to_string()))?;
    let first = quadrature::i_of(&pair, cfg.n)?;
    let second = quadrature::second_condition(&pair, cfg.n, None);
    let (second, second_error) = match second {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let agree = second.as_ref().map(|s| s.conclusion() == first.conclusion());
    let json = to_json(
        "integrability",
        &cfg.ledger,
        serde_json::json!({ "family": phi.label(), "n": cfg.n, "i": first, "second": second, "second_error": second_error, "agree": agree }),
    )?;
    emit(&RunConfig { format: Format::Json, ..cfg }, None, json)?;
    Ok(EXIT_OK)
}

fn dispatch(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Conjugate(a) => cmd_conjugate(a),
        Command::Hbar(a) => cmd_hbar(a),
        Command::Diameter(a) => cmd_diameter(a),
        Command::Volume(a) => cmd_volume(a),
        Command::Luxemburg(a) => cmd_luxemburg(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Integrability(a) => cmd_integrability(a),
    }
}

/// Parses `args` (including the program name) and runs the command;
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_specs() {
        assert_eq!(parse_phi("power:2", 2.0).unwrap(), NFunction::power(2.0).unwrap());
        assert_eq!(parse_phi("logproduct:1,2,5", 2.0).unwrap(), NFunction::log_product(&[1.0, 2.0, 5.0]).unwrap());
        assert_eq!(parse_phi("slowgrowth:2,5", 2.0).unwrap(), NFunction::log_product(&[1.0, 2.0, 5.0]).unwrap());
        for bad in ["power", "power:0.5", "power:1,2", "cubic:3", "slowgrowth:1.5,3"] {
            assert!(matches!(parse_phi(bad, 2.0), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec { min: 1.0, max: 2.0, count: 0 }.validate().is_err());
        assert!(GridSpec { min: -1.0, max: 2.0, count: 3 }.validate().is_err());
        assert!(GridSpec { min: 2.0, max: 1.0, count: 3 }.validate().is_err());
        assert_eq!(GridSpec { min: 1.0, max: 100.0, count: 3 }.points().len(), 3);
    }

    #[test]
    fn config_overrides() {
        let common = CommonArgs { n: Some(3.0), ledger: vec!["c5=2".into()], seed_constants: Some(0.5), ..Default::default() };
        let cfg = RunConfig::resolve("hbar", &common, Some(NFunction::power(2.0).unwrap()), &GridArgs::default(), Format::Csv).unwrap();
        assert_eq!(cfg.n, 3.0);
        assert_eq!(cfg.ledger.c5, 2.0);
        assert_eq!(cfg.ledger.k, 0.5);
        let bad = CommonArgs { ledger: vec!["k=-1".into()], ..Default::default() };
        assert!(matches!(RunConfig::resolve("hbar", &bad, None, &GridArgs::default(), Format::Csv), Err(Error::Config(_))));
    }

    #[test]
    fn delta_fit_recovers_exponents() {
        let pts: Vec<(f64, f64)> = log_grid(1e-12, 1e-3, 25).into_iter().map(|d| (d, 3.0 * d.powf(0.25) * (-d.ln()).powf(0.75))).collect();
        let (a, b) = fit_delta_exponents(&pts).unwrap();
        assert!((a - 0.25).abs() < 1e-9 && (b - 0.75).abs() < 1e-9);
    }
}
