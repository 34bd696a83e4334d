//! Config-driven experiment runner: typed configs read from TOML with
//! dotted-key overrides, one driver per command, JSONL records plus a JSON
//! summary, and replay of stored reports.

use crate::cone::size_relation_audit;
use crate::curve::{Curve, CurveSpec};
use crate::cutoff::SmoothCutoff;
use crate::error::{Error, Result};
use crate::grid::{budget_from_env, probe_sweep, GridSpec, ProbeFamily, ProbeSpec, PROBE_FIELDS};
use crate::oscillatory::{decay_exponent_fit, geometric_grid, model_integral, QuadOptions};
use crate::plates::{
    cone_tuple_from_curve, decoupling_sweep, frenet_box_family, lorentz_identity_check, plate_family, slab_family, TrialSpec, TupleOptions,
    DECOUPLING_FIELDS,
};
use crate::sharpness::{bump_sweep, separation_audit, wolff_example, BumpOptions, WolffOptions};
use crate::symbols::{base_symbol_j3, base_symbol_j4, decompose_j3, decompose_j4, reconstruction_audit, support_audit, J3Config, J4Config};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

pub const SCHEMA_VERSION: u32 = 1;
pub const RECORDS_FILE: &str = "records.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Decay,
    Geometry,
    DecomposeAudit,
    Lorentz,
    Decouple,
    OperatorProbe,
    Sharpness,
}

impl Command {
    pub fn section(self) -> &'static str {
        match self {
            Command::Decay => "decay",
            Command::Geometry => "geometry",
            Command::DecomposeAudit => "decompose_audit",
            Command::Lorentz => "lorentz",
            Command::Decouple => "decouple",
            Command::OperatorProbe => "operator_probe",
            Command::Sharpness => "sharpness",
        }
    }

    fn default_curve(self) -> CurveSpec {
        let n = match self {
            Command::Decay | Command::Geometry | Command::DecomposeAudit => 4,
            Command::Lorentz | Command::Decouple => 3,
            Command::OperatorProbe | Command::Sharpness => 2,
        };
        CurveSpec::Moment { n }
    }
}

fn default_seed() -> u64 {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecayConfig {
    pub chi_width: f64,
    /// Direction of the ray; `e_n` when absent.
    pub ray: Option<Vec<f64>>,
    /// `λ = 2^a, 2^{a+step}, …, 2^b`.
    pub lambda_exp: (f64, f64),
    pub step: f64,
    pub tol: f64,
    /// Expected slope; `-1/n` is used when absent and the ray is `e_n`.
    pub expected_slope: Option<f64>,
    pub slope_tol: f64,
    /// `log2 λ` for the model stationary-phase constant check.
    pub model_lambda_exp: Option<f64>,
    pub model_tol: f64,
}

impl Default for DecayConfig {
    fn default() -> Self {
        Self {
            chi_width: 0.5,
            ray: None,
            lambda_exp: (8.0, 16.0),
            step: 0.5,
            tol: 1e-10,
            expected_slope: None,
            slope_tol: 0.03,
            model_lambda_exp: Some(16.0),
            model_tol: 0.05,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    /// `ξ' ∈ [-spread, spread]^{n-1}`, `ξ_n = 1`.
    pub spread: f64,
    pub samples: usize,
    /// Ratios must lie in `[1/window, window]`.
    pub window: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self { spread: 0.05, samples: 10_000, window: 10.0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecomposeConfig {
    /// 3 or 4.
    pub j: u32,
    pub ks: Vec<u32>,
    pub reconstruction_points: usize,
    pub support_samples: usize,
    pub max_constant: f64,
    /// Largest allowed ratio of a family's constant across `ks`.
    pub stability: f64,
}

impl Default for DecomposeConfig {
    fn default() -> Self {
        Self { j: 4, ks: vec![8, 12], reconstruction_points: 300, support_samples: 30, max_constant: 16.0, stability: 2.0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LorentzConfig {
    /// Defaults to `n - 1`.
    pub d: Option<usize>,
    /// Defaults to `(1, 0, …, 0)`.
    pub a: Option<Vec<f64>>,
    pub draws: usize,
    pub interval: (f64, f64),
    pub tol: f64,
}

impl Default for LorentzConfig {
    fn default() -> Self {
        Self { d: None, a: None, draws: 1000, interval: (-0.5, 0.5), tol: 1e-9 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionFamily {
    Box,
    Slab,
    Plate,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecoupleConfig {
    pub family: RegionFamily,
    /// Box order, or the tuple split for plates.
    pub d: usize,
    pub grid: usize,
    pub period: Option<f64>,
    /// Scales `r = 2^{-ℓ}` for `ℓ` in this inclusive range.
    pub levels: (u32, u32),
    pub p: Vec<f64>,
    pub trials: usize,
    pub focusing: bool,
    pub interval: (f64, f64),
    /// Plate weights; `(1, 0, …)` when absent.
    pub a: Option<Vec<f64>>,
    /// Plate truncation; `r^{-d}` at the finest scale when absent.
    pub k_trunc: Option<f64>,
    pub max_exponent: f64,
}

impl Default for DecoupleConfig {
    fn default() -> Self {
        Self {
            family: RegionFamily::Box,
            d: 2,
            grid: 128,
            period: None,
            levels: (1, 5),
            p: vec![2.0, 6.0],
            trials: 32,
            focusing: true,
            interval: (-0.5, 0.5),
            a: None,
            k_trunc: None,
            max_exponent: 0.2,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    pub chi_width: f64,
    pub grid: usize,
    pub period: Option<f64>,
    pub ks: (u32, u32),
    pub p: f64,
    pub random_trials: usize,
    pub bump_width: f64,
    /// Compare the fitted slope with `expected_slope` (default `-1/p`).
    pub check_slope: bool,
    pub expected_slope: Option<f64>,
    pub slope_tol: f64,
    pub slope_max: Option<f64>,
    pub require_monotone: bool,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            chi_width: 0.25,
            grid: 2048,
            period: None,
            ks: (4, 9),
            p: 4.0,
            random_trials: 2,
            bump_width: 0.1,
            check_slope: true,
            expected_slope: None,
            slope_tol: 0.1,
            slope_max: None,
            require_monotone: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SharpnessExample {
    Bump,
    Wolff,
    Separation,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SharpnessConfig {
    pub example: SharpnessExample,
    /// Defaults: 1.5 for the bump, 6 for the Wolff sums.
    pub p: Option<f64>,
    /// `log2 λ` range; defaults 4..9 (bump), 6..10 (Wolff), 8..12 (separation).
    pub lambda_exp: Option<(u32, u32)>,
    pub grid: usize,
    pub chi_width: f64,
    pub trials: usize,
    pub eps: f64,
    pub rho: f64,
    pub norm_tol: f64,
    pub ratio_tol: f64,
    pub exponent_tol: f64,
    pub min_gap: f64,
}

impl Default for SharpnessConfig {
    fn default() -> Self {
        Self {
            example: SharpnessExample::Bump,
            p: None,
            lambda_exp: None,
            grid: 4096,
            chi_width: 0.25,
            trials: 32,
            eps: 0.1,
            rho: 0.05,
            norm_tol: 0.05,
            ratio_tol: 0.1,
            exponent_tol: 0.05,
            min_gap: 0.5,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub command: Option<Command>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub budget_bytes: Option<u64>,
    #[serde(default)]
    pub curve: Option<CurveSpec>,
    #[serde(default)]
    pub decay: DecayConfig,
    #[serde(default)]
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub decompose_audit: DecomposeConfig,
    #[serde(default)]
    pub lorentz: LorentzConfig,
    #[serde(default)]
    pub decouple: DecoupleConfig,
    #[serde(default)]
    pub operator_probe: ProbeConfig,
    #[serde(default)]
    pub sharpness: SharpnessConfig,
}

fn config_error(e: serde_path_to_error::Error<impl std::fmt::Display>) -> Error {
    let field = e.path().to_string();
    Error::Config { field: if field.is_empty() || field == "." { "<root>".into() } else { field }, detail: e.inner().to_string() }
}

/// Parses a config document, applies `key.path=value` overrides (values in
/// TOML syntax, falling back to a bare string), and resolves the command.
pub fn load_config(text: &str, overrides: &[(String, String)], command: Command) -> Result<ExperimentConfig> {
    let mut doc: toml::Table = toml::from_str(text).map_err(|e| Error::Config {
        field: e.span().map(|s| format!("byte {}", s.start)).unwrap_or_else(|| "<document>".into()),
        detail: e.message().to_string(),
    })?;
    for (key, raw) in overrides {
        let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
            Ok(mut t) => t.remove("v").unwrap(),
            Err(_) => toml::Value::String(raw.clone()),
        };
        set_path(&mut doc, key, value)?;
    }
    let mut cfg: ExperimentConfig = serde_path_to_error::deserialize(toml::Value::Table(doc)).map_err(config_error)?;
    if let Some(c) = cfg.command {
        if c != command {
            return Err(Error::Config { field: "command".into(), detail: format!("config is for {c:?}, not {command:?}") });
        }
    }
    cfg.command = Some(command);
    if cfg.curve.is_none() {
        cfg.curve = Some(command.default_curve());
    }
    Ok(cfg)
}

fn set_path(doc: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config { field: key.into(), detail: "empty key segment".into() });
    }
    let mut t = doc;
    for p in &parts[..parts.len() - 1] {
        let entry = t.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        t = entry.as_table_mut().ok_or_else(|| Error::Config { field: key.into(), detail: format!("`{p}` is not a table") })?;
    }
    t.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

impl ExperimentConfig {
    pub fn command(&self) -> Result<Command> {
        self.command.ok_or_else(|| Error::Config { field: "command".into(), detail: "no command set".into() })
    }

    pub fn curve(&self) -> Result<Curve> {
        let spec = self.curve.clone().unwrap_or_else(|| CurveSpec::Moment { n: 2 });
        spec.build().map_err(|e| Error::Config { field: "curve".into(), detail: e.to_string() })
    }

    /// Flag and config budgets win over the environment default.
    pub fn budget(&self) -> Result<u64> {
        match self.budget_bytes {
            Some(b) => Ok(b),
            None => budget_from_env(),
        }
    }

    /// The resolved config restricted to the fields the command reads.
    pub fn echo(&self) -> Result<Value> {
        let cmd = self.command()?;
        let full = serde_json::to_value(self).map_err(|e| Error::Io(e.to_string()))?;
        let mut out = serde_json::Map::new();
        for key in ["command", "seed", "budget_bytes", "curve", cmd.section()] {
            out.insert(key.to_string(), full[key].clone());
        }
        Ok(Value::Object(out))
    }
}

/// A reported number with its uncertainty or tolerance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Estimate {
    pub name: String,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub stderr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tolerance: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// `"<="`, `">="` or `"within"` (`|value - target| <= tol`).
    pub relation: String,
    pub target: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tol: Option<f64>,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, relation: "<=".into(), target: bound, tol: None, pass: value <= bound }
    }

    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, relation: ">=".into(), target: bound, tol: None, pass: value >= bound }
    }

    pub fn within(name: impl Into<String>, value: f64, target: f64, tol: f64) -> Self {
        Self { name: name.into(), value, relation: "within".into(), target, tol: Some(tol), pass: (value - target).abs() <= tol }
    }

    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Self { name: name.into(), value: if ok { 1.0 } else { 0.0 }, relation: ">=".into(), target: 1.0, tol: None, pass: ok }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub tool_version: String,
    pub command: Command,
    pub config: Value,
    pub seed: u64,
    pub records: usize,
    pub estimates: Vec<Estimate>,
    pub checks: Vec<Check>,
    pub pass: bool,
    pub notes: Vec<String>,
    pub wall_seconds: f64,
    /// Working-set estimate for grid commands.
    pub grid_bytes: u64,
    /// Peak resident set size where the platform reports it.
    pub peak_rss_bytes: Option<u64>,
}

#[derive(Clone, Debug)]
pub struct Report {
    pub records: Vec<Value>,
    pub summary: Summary,
}

#[derive(Default)]
struct Outcome {
    records: Vec<Value>,
    estimates: Vec<Estimate>,
    checks: Vec<Check>,
    notes: Vec<String>,
    grid_bytes: u64,
}

impl Outcome {
    fn est(&mut self, name: impl Into<String>, value: f64, stderr: Option<f64>, tolerance: Option<f64>) {
        self.estimates.push(Estimate { name: name.into(), value, stderr, tolerance });
    }

    fn rec(&mut self, v: Value) {
        self.records.push(v);
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn peak_rss() -> Option<u64> {
    let s = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = s.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

fn default_period(n: usize) -> f64 {
    if n == 2 {
        2.0 * std::f64::consts::PI
    } else {
        std::f64::consts::PI
    }
}

/// Runs the configured command.
pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    let cmd = cfg.command()?;
    let started = Instant::now();
    let curve = cfg.curve()?;
    let budget = cfg.budget()?;
    let out = match cmd {
        Command::Decay => run_decay(cfg, &curve)?,
        Command::Geometry => run_geometry(cfg, &curve)?,
        Command::DecomposeAudit => run_decompose(cfg, &curve)?,
        Command::Lorentz => run_lorentz(cfg, &curve)?,
        Command::Decouple => run_decouple(cfg, &curve, budget)?,
        Command::OperatorProbe => run_probe(cfg, &curve, budget)?,
        Command::Sharpness => run_sharpness(cfg, &curve, budget)?,
    };
    let pass = out.checks.iter().all(|c| c.pass);
    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        command: cmd,
        config: cfg.echo()?,
        seed: cfg.seed,
        records: out.records.len(),
        estimates: out.estimates,
        checks: out.checks,
        pass,
        notes: out.notes,
        wall_seconds: started.elapsed().as_secs_f64(),
        grid_bytes: out.grid_bytes,
        peak_rss_bytes: peak_rss(),
    };
    Ok(Report { records: out.records, summary })
}

fn run_decay(cfg: &ExperimentConfig, curve: &Curve) -> Result<Outcome> {
    let c = &cfg.decay;
    let n = curve.dim();
    let ray = c.ray.clone().unwrap_or_else(|| {
        let mut e = vec![0.0; n];
        e[n - 1] = 1.0;
        e
    });
    if ray.len() != n {
        return Err(Error::Config { field: "decay.ray".into(), detail: format!("length {} for a curve in R^{n}", ray.len()) });
    }
    let is_top = ray[..n - 1].iter().all(|v| *v == 0.0) && ray[n - 1] > 0.0;
    let expected = c.expected_slope.or(if is_top { Some(-1.0 / n as f64) } else { None });
    let chi = SmoothCutoff::bump(c.chi_width);
    let lambdas = geometric_grid(c.lambda_exp.0, c.lambda_exp.1, c.step);
    let fit = decay_exponent_fit(curve, &chi, &ray, &lambdas, c.tol)?;
    let mut o = Outcome::default();
    for (l, v) in &fit.samples {
        o.rec(json!({"kind": "decay_sample", "lambda": l, "abs_mu_hat": v, "tol": c.tol}));
    }
    o.est("decay_slope", fit.slope, Some(fit.stderr), Some(c.slope_tol));
    if fit.excluded > 0 {
        o.notes.push(format!("{} samples below the quadrature floor were left out of the fit", fit.excluded));
    }
    if let Some(e) = expected {
        o.checks.push(Check::within("decay_slope", fit.slope, e, c.slope_tol));
    }
    if let Some(le) = c.model_lambda_exp {
        let lambda = 2f64.powf(le);
        let eta = SmoothCutoff::eta();
        let m = model_integral(n, lambda, &eta, &[], &[], &QuadOptions::default())?;
        let rel = (m.value - m.leading).norm() / m.leading.norm();
        o.rec(json!({"kind": "model_integral", "n": n, "lambda": lambda, "re": m.value.re, "im": m.value.im, "leading_re": m.leading.re, "leading_im": m.leading.im, "rel_error": rel, "quad_error": m.quad_error}));
        o.est("model_rel_error", rel, None, Some(c.model_tol));
        o.checks.push(Check::at_most("model_rel_error", rel, c.model_tol));
    }
    Ok(o)
}

fn run_geometry(cfg: &ExperimentConfig, curve: &Curve) -> Result<Outcome> {
    let c = &cfg.geometry;
    let a = size_relation_audit(curve, c.spread, c.samples, cfg.seed, true)?;
    let mut o = Outcome::default();
    for r in &a.records {
        let mut v = to_value(r);
        v["kind"] = json!("size_sample");
        o.rec(v);
    }
    let w = c.window;
    for (name, (lo, hi)) in [("root_gap", a.root_gap), ("u1_gap", a.u1_gap)] {
        o.est(format!("{name}_min"), lo, None, Some(1.0 / w));
        o.est(format!("{name}_max"), hi, None, Some(w));
        o.checks.push(Check::at_least(format!("{name}_min"), lo, 1.0 / w));
        o.checks.push(Check::at_most(format!("{name}_max"), hi, w));
    }
    o.est("u12_gap_max", a.u12_gap.1, None, Some(w));
    o.checks.push(Check::at_most("u12_gap_max", a.u12_gap.1, w));
    o.est("max_relative_residual", a.max_residual, None, Some(1e-12));
    o.checks.push(Check::at_most("root_failures", (a.errors + a.residual_failures) as f64, 0.0));
    o.notes.push(format!("{} of {} draws accepted", a.accepted, a.attempts));
    Ok(o)
}

fn run_decompose(cfg: &ExperimentConfig, curve: &Curve) -> Result<Outcome> {
    let c = &cfg.decompose_audit;
    if curve.dim() != 4 {
        return Err(Error::Config { field: "curve".into(), detail: "decompositions need a curve in R^4".into() });
    }
    if c.j != 3 && c.j != 4 {
        return Err(Error::Config { field: "decompose_audit.j".into(), detail: format!("J must be 3 or 4, got {}", c.j) });
    }
    let mut o = Outcome::default();
    let mut per_family: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for &k in &c.ks {
        let tree = if c.j == 3 {
            let jc = J3Config::default();
            decompose_j3(curve, &base_symbol_j3(&jc), k, &jc)?
        } else {
            let jc = J4Config::default();
            decompose_j4(curve, &base_symbol_j4(&jc), k, &jc)?
        };
        let rec = reconstruction_audit(curve, &tree, c.reconstruction_points, cfg.seed ^ k as u64)?;
        let mut v = to_value(&rec);
        v["kind"] = json!("reconstruction");
        v["k"] = json!(k);
        o.rec(v);
        let defect = rec.max_defect.max(rec.max_leaf_defect);
        o.est(format!("reconstruction_defect_k{k}"), defect, None, Some(1e-12));
        o.checks.push(Check::at_most(format!("reconstruction_defect_k{k}"), defect, 1e-12));
        let sup = support_audit(curve, &tree.audit_targets(), c.support_samples, cfg.seed.wrapping_add(k as u64))?;
        for p in &sup.pieces {
            let mut v = to_value(p);
            v["kind"] = json!("support_piece");
            v["k"] = json!(k);
            o.rec(v);
        }
        for (fam, cst) in &sup.by_family {
            let name = to_value(fam).as_str().unwrap_or("family").to_string();
            o.est(format!("support_constant_{name}_k{k}"), *cst, None, Some(c.max_constant));
            o.checks.push(Check::at_most(format!("support_constant_{name}_k{k}"), *cst, c.max_constant));
            per_family.entry(name).or_default().push(*cst);
        }
        if sup.vacuous > 0 {
            o.notes.push(format!("k = {k}: {} pieces had no accepted support sample", sup.vacuous));
        }
    }
    for (name, v) in per_family {
        if v.len() > 1 {
            let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = v.iter().cloned().fold(0.0, f64::max);
            o.checks.push(Check::at_most(format!("support_constant_{name}_spread"), hi / lo, c.stability));
        }
    }
    Ok(o)
}

fn run_lorentz(cfg: &ExperimentConfig, curve: &Curve) -> Result<Outcome> {
    let c = &cfg.lorentz;
    let n = curve.dim();
    let d = c.d.unwrap_or(n.saturating_sub(1));
    let a = c.a.clone().unwrap_or_else(|| {
        let mut v = vec![0.0; n.saturating_sub(d)];
        if let Some(x) = v.first_mut() {
            *x = 1.0;
        }
        v
    });
    let tuple = cone_tuple_from_curve(curve, d, &TupleOptions { interval: c.interval, ..Default::default() })
        .map_err(|e| Error::Config { field: "lorentz".into(), detail: e.to_string() })?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (lo, hi) = c.interval;
    let mut o = Outcome::default();
    let mut worst = 0.0f64;
    for i in 0..c.draws {
        let rho: f64 = rng.gen_range(0.01..=1.0);
        let r = rho * rng.gen_range(0.01..=1.0);
        let b: f64 = rng.gen_range(lo..=hi);
        let s: f64 = rng.gen_range(lo..=hi);
        let res = lorentz_identity_check(&tuple, &a, b, rho, s, r)?;
        worst = worst.max(res.worst());
        o.rec(json!({"kind": "lorentz_draw", "draw": i, "b": b, "rho": rho, "s": s, "r": r, "matrix_residual": res.matrix, "offset_residual": res.offset}));
    }
    o.est("max_relative_residual", worst, None, Some(c.tol));
    o.checks.push(Check::at_most("max_relative_residual", worst, c.tol));
    Ok(o)
}

fn run_decouple(cfg: &ExperimentConfig, curve: &Curve, budget: u64) -> Result<Outcome> {
    let c = &cfg.decouple;
    let n = curve.dim();
    if c.levels.0 > c.levels.1 {
        return Err(Error::Config { field: "decouple.levels".into(), detail: "empty level range".into() });
    }
    let scales: Vec<f64> = (c.levels.0..=c.levels.1).map(|l| 0.5f64.powi(l as i32)).collect();
    let grid = GridSpec::new(n, c.grid, c.period.unwrap_or(2.0 * std::f64::consts::PI))
        .map_err(|e| Error::Config { field: "decouple.grid".into(), detail: e.to_string() })?;
    grid.check_budget(DECOUPLING_FIELDS, budget)?;
    let trials = TrialSpec { gaussian: c.trials, focusing: c.focusing, seed: cfg.seed };
    let interval = c.interval;
    let finest = scales.iter().cloned().fold(1.0, f64::min);
    let sweep = match c.family {
        RegionFamily::Box => decoupling_sweep(&scales, |r| frenet_box_family(curve, c.d, r, interval), &c.p, grid, &trials, budget)?,
        RegionFamily::Slab => decoupling_sweep(&scales, |r| slab_family(curve, r, interval), &c.p, grid, &trials, budget)?,
        RegionFamily::Plate => {
            let tuple = cone_tuple_from_curve(curve, c.d, &TupleOptions { interval, ..Default::default() })?;
            let a = c.a.clone().unwrap_or_else(|| {
                let mut v = vec![0.0; n - c.d];
                v[0] = 1.0;
                v
            });
            let k = c.k_trunc.unwrap_or(finest.powi(-(c.d as i32)));
            decoupling_sweep(&scales, |r| plate_family(&tuple, &a, k, r, interval), &c.p, grid, &trials, budget)?
        }
    };
    let mut o = Outcome { grid_bytes: grid.bytes_for(DECOUPLING_FIELDS), ..Default::default() };
    let mut within_trivial = true;
    for (r, est) in sweep.scales.iter().zip(&sweep.estimates) {
        for t in &est.trials {
            for (i, p) in c.p.iter().enumerate() {
                o.rec(json!({"kind": "decoupling_trial", "r": r, "regions": est.regions, "trial": t.trial, "mode": t.mode, "p": p, "lp_ratio": t.lp_ratio[i], "l2_ratio": t.l2_ratio[i]}));
                within_trivial &= t.lp_ratio[i] <= est.summary[i].trivial_bound * (1.0 + 1e-9);
            }
        }
        for s in &est.summary {
            o.rec(json!({"kind": "decoupling_scale", "r": r, "regions": est.regions, "excluded": est.excluded.len(), "dilation": est.dilation, "summary": s}));
        }
        o.notes.extend(est.excluded.iter().map(|e| format!("r = {r}: {e}")));
    }
    o.checks.push(Check::flag("lp_ratio_within_trivial_bound", within_trivial));
    for f in &sweep.fits {
        o.est(format!("l2_growth_exponent_max_p{}", f.p), f.max_l2.slope, Some(f.max_l2.slope_stderr), Some(c.max_exponent));
        o.est(format!("l2_growth_exponent_median_p{}", f.p), f.median_l2.slope, Some(f.median_l2.slope_stderr), None);
        o.checks.push(Check::at_most(format!("l2_growth_exponent_max_p{}", f.p), f.max_l2.slope, c.max_exponent));
    }
    Ok(o)
}

fn run_probe(cfg: &ExperimentConfig, curve: &Curve, budget: u64) -> Result<Outcome> {
    let c = &cfg.operator_probe;
    let n = curve.dim();
    let grid = GridSpec::new(n, c.grid, c.period.unwrap_or(default_period(n)))
        .map_err(|e| Error::Config { field: "operator_probe.grid".into(), detail: e.to_string() })?;
    grid.check_budget(PROBE_FIELDS, budget)?;
    let ks: Vec<u32> = (c.ks.0..=c.ks.1).collect();
    let spec = ProbeSpec {
        families: vec![ProbeFamily::Random, ProbeFamily::Bump, ProbeFamily::Focusing],
        random_trials: c.random_trials,
        seed: cfg.seed,
        bump_width: c.bump_width,
    };
    let sweep = probe_sweep(curve, &SmoothCutoff::bump(c.chi_width), grid, &ks, c.p, &spec, budget)?;
    let mut o = Outcome { grid_bytes: grid.bytes_for(PROBE_FIELDS), ..Default::default() };
    for r in &sweep.reports {
        for s in &r.samples {
            let mut v = to_value(s);
            v["kind"] = json!("probe_sample");
            o.rec(v);
        }
        o.rec(json!({"kind": "probe_band", "k": r.k, "family_max": r.family_max, "max_ratio": r.max_ratio}));
    }
    let maxes: Vec<f64> = sweep.reports.iter().map(|r| r.max_ratio).collect();
    if c.require_monotone {
        let mono = maxes.windows(2).all(|w| w[1] < w[0]);
        o.checks.push(Check::flag("max_ratio_decreasing", mono));
    }
    if let Some(fit) = &sweep.fit {
        o.est("probe_slope", fit.slope, Some(fit.slope_stderr), Some(c.slope_tol));
        if c.check_slope {
            let e = c.expected_slope.unwrap_or(-1.0 / c.p);
            o.checks.push(Check::within("probe_slope", fit.slope, e, c.slope_tol));
        }
        if let Some(m) = c.slope_max {
            o.checks.push(Check::at_most("probe_slope", fit.slope, m));
        }
    } else {
        o.notes.push("fewer than 4 bands: no slope fitted".into());
        if c.check_slope || c.slope_max.is_some() {
            return Err(Error::Config { field: "operator_probe.ks".into(), detail: "a slope check needs at least 4 bands".into() });
        }
    }
    Ok(o)
}

fn run_sharpness(cfg: &ExperimentConfig, curve: &Curve, budget: u64) -> Result<Outcome> {
    let c = &cfg.sharpness;
    let n = curve.dim();
    let mut o = Outcome::default();
    match c.example {
        SharpnessExample::Bump => {
            let p = c.p.unwrap_or(1.5);
            let (lo, hi) = c.lambda_exp.unwrap_or((4, 9));
            let grid = GridSpec::new(n, c.grid, default_period(n)).map_err(|e| Error::Config { field: "sharpness.grid".into(), detail: e.to_string() })?;
            o.grid_bytes = grid.bytes_for(PROBE_FIELDS);
            let lambdas: Vec<f64> = (lo..=hi).map(|k| 2f64.powi(k as i32)).collect();
            let opts = BumpOptions { seed: cfg.seed, ..Default::default() };
            let sw = bump_sweep(curve, &SmoothCutoff::bump(c.chi_width), grid, &lambdas, &[p], &opts, budget)?;
            for r in &sw.reports {
                let mut v = to_value(r);
                v["kind"] = json!("bump");
                o.rec(v);
            }
            let f = &sw.fits[0];
            let nf = n as f64;
            o.est("norm_slope", f.norm_slope.slope, Some(f.norm_slope.slope_stderr), Some(c.norm_tol));
            o.est("ratio_slope", f.ratio_slope.slope, Some(f.ratio_slope.slope_stderr), Some(c.ratio_tol));
            o.checks.push(Check::within("norm_slope", f.norm_slope.slope, -nf / p, c.norm_tol));
            o.checks.push(Check::within("ratio_slope", f.ratio_slope.slope, -(1.0 - 1.0 / p), c.ratio_tol));
            let nb = sw.reports.iter().map(|r| r.nbhd_min).fold(f64::INFINITY, f64::min);
            o.checks.push(Check::at_least("neighbourhood_min", nb, f64::MIN_POSITIVE));
        }
        SharpnessExample::Wolff => {
            let p = c.p.unwrap_or(6.0);
            let (lo, hi) = c.lambda_exp.unwrap_or((6, 10));
            let grid = GridSpec::new(n, c.grid, default_period(n)).map_err(|e| Error::Config { field: "sharpness.grid".into(), detail: e.to_string() })?;
            o.grid_bytes = grid.bytes_for(2);
            let lambdas: Vec<f64> = (lo..=hi).map(|k| 2f64.powi(k as i32)).collect();
            let opts = WolffOptions { eps: c.eps, rho: c.rho, trials: c.trials, seed: cfg.seed, square_function: false };
            let sw = wolff_example(curve, &lambdas, p, &opts, grid, budget)?;
            for s in &sw.stats {
                for (t, v) in s.trial_norms.iter().enumerate() {
                    o.rec(json!({"kind": "wolff_trial", "lambda": s.lambda, "trial": t, "norm": v}));
                }
                o.rec(json!({"kind": "wolff_scale", "lambda": s.lambda, "balls": s.balls, "moment": s.moment, "moment_stderr": s.moment_stderr, "median": s.median}));
                o.est(format!("moment_lambda_{}", s.lambda), s.moment, Some(s.moment_stderr), None);
            }
            o.est("wolff_exponent", sw.fit.slope, Some(sw.fit.slope_stderr), Some(c.exponent_tol));
            o.checks.push(Check::within("wolff_exponent", sw.fit.slope, sw.target, c.exponent_tol));
        }
        SharpnessExample::Separation => {
            let (lo, hi) = c.lambda_exp.unwrap_or((8, 12));
            for k in [lo, hi] {
                let lambda = 2f64.powi(k as i32);
                match separation_audit(curve, lambda, c.eps) {
                    Ok(r) => {
                        let mut v = to_value(&r);
                        v["kind"] = json!("separation");
                        o.rec(v);
                        o.est(format!("min_gap_lambda_{lambda}"), r.min_gap, None, Some(c.min_gap));
                        o.checks.push(Check::at_least(format!("min_gap_lambda_{lambda}"), r.min_gap, c.min_gap));
                    }
                    Err(Error::InsufficientData(msg)) => {
                        o.rec(json!({"kind": "separation", "lambda": lambda, "eps": c.eps, "indices": 1, "pairs": 0}));
                        o.notes.push(format!("λ = {lambda}: {msg}"));
                        o.checks.push(Check::flag(format!("min_gap_lambda_{lambda}_has_pairs"), false));
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    }
    Ok(o)
}

/// Writes `records.jsonl` and `summary.json` into `dir`.
pub fn write_report(report: &Report, dir: &Path) -> Result<()> {
    let io = |e: std::io::Error| Error::Io(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut lines = String::new();
    for r in &report.records {
        lines.push_str(&serde_json::to_string(r).map_err(|e| Error::Io(e.to_string()))?);
        lines.push('\n');
    }
    std::fs::write(dir.join(RECORDS_FILE), lines).map_err(io)?;
    let s = serde_json::to_string_pretty(&report.summary).map_err(|e| Error::Io(e.to_string()))?;
    std::fs::write(dir.join(SUMMARY_FILE), s + "\n").map_err(io)?;
    Ok(())
}

/// Flattens the scalar fields of each record into CSV columns.
pub fn write_csv(records: &[Value], path: &Path) -> Result<()> {
    let mut cols: Vec<String> = Vec::new();
    for r in records {
        if let Value::Object(m) = r {
            for (k, v) in m {
                if !v.is_object() && !v.is_array() && !cols.contains(k) {
                    cols.push(k.clone());
                }
            }
        }
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
    w.write_record(&cols).map_err(|e| Error::Io(e.to_string()))?;
    for r in records {
        let row: Vec<String> = cols
            .iter()
            .map(|c| match &r[c] {
                Value::Null => String::new(),
                Value::String(s) => s.clone(),
                v => v.to_string(),
            })
            .collect();
        w.write_record(&row).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

pub fn read_report(dir: &Path) -> Result<Report> {
    let io = |e: std::io::Error| Error::Io(format!("{}: {e}", dir.display()));
    let summary: Summary = serde_json::from_str(&std::fs::read_to_string(dir.join(SUMMARY_FILE)).map_err(io)?)
        .map_err(|e| Error::Config { field: SUMMARY_FILE.into(), detail: e.to_string() })?;
    let text = std::fs::read_to_string(dir.join(RECORDS_FILE)).map_err(io)?;
    let records = text
        .lines()
        .enumerate()
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::Config { field: format!("{RECORDS_FILE}:{}", i + 1), detail: e.to_string() }))
        .collect::<Result<_>>()?;
    Ok(Report { records, summary })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Mismatch {
    pub record: usize,
    pub path: String,
    pub stored: Value,
    pub replayed: Value,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReplayOutcome {
    /// `"exact"` with the stored seed, `"statistical"` otherwise.
    pub mode: String,
    pub compared: usize,
    pub matched: bool,
    pub first_mismatch: Option<Mismatch>,
    pub band_checks: Vec<Check>,
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

fn diff(a: &Value, b: &Value, path: String, tol: f64) -> Option<(String, Value, Value)> {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64().unwrap_or(f64::NAN), y.as_f64().unwrap_or(f64::NAN));
            if close(x, y, tol) {
                None
            } else {
                Some((path, a.clone(), b.clone()))
            }
        }
        (Value::Object(x), Value::Object(y)) => {
            if x.len() != y.len() {
                return Some((path, a.clone(), b.clone()));
            }
            for (k, v) in x {
                match y.get(k) {
                    Some(w) => {
                        if let Some(d) = diff(v, w, format!("{path}.{k}"), tol) {
                            return Some(d);
                        }
                    }
                    None => return Some((format!("{path}.{k}"), v.clone(), Value::Null)),
                }
            }
            None
        }
        (Value::Array(x), Value::Array(y)) => {
            if x.len() != y.len() {
                return Some((path, a.clone(), b.clone()));
            }
            x.iter().zip(y).enumerate().find_map(|(i, (v, w))| diff(v, w, format!("{path}[{i}]"), tol))
        }
        _ => (a != b).then(|| (path, a.clone(), b.clone())),
    }
}

/// Reruns a stored report. With the stored seed every record must agree to
/// `1e-12` relative; with another seed only estimates carrying a standard
/// error are compared, within four combined standard errors.
pub fn replay(dir: &Path, seed: Option<u64>) -> Result<ReplayOutcome> {
    let stored = read_report(dir)?;
    if stored.summary.schema_version != SCHEMA_VERSION {
        return Err(Error::Config {
            field: "schema_version".into(),
            detail: format!("report has schema {}, this build reads {SCHEMA_VERSION}", stored.summary.schema_version),
        });
    }
    let mut cfg: ExperimentConfig = serde_path_to_error::deserialize(stored.summary.config.clone()).map_err(config_error)?;
    let exact = seed.map_or(true, |s| s == cfg.seed);
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let fresh = run(&cfg)?;
    if exact {
        let mut first = None;
        if stored.records.len() != fresh.records.len() {
            first = Some(Mismatch {
                record: stored.records.len().min(fresh.records.len()),
                path: "<count>".into(),
                stored: json!(stored.records.len()),
                replayed: json!(fresh.records.len()),
            });
        } else {
            for (i, (a, b)) in stored.records.iter().zip(&fresh.records).enumerate() {
                if let Some((path, x, y)) = diff(a, b, String::new(), 1e-12) {
                    first = Some(Mismatch { record: i, path, stored: x, replayed: y });
                    break;
                }
            }
        }
        return Ok(ReplayOutcome {
            mode: "exact".into(),
            compared: stored.records.len(),
            matched: first.is_none(),
            first_mismatch: first,
            band_checks: Vec::new(),
        });
    }
    let mut band_checks = Vec::new();
    for e in &stored.summary.estimates {
        let (Some(se), Some(f)) = (e.stderr, fresh.summary.estimates.iter().find(|f| f.name == e.name)) else { continue };
        let band = 4.0 * (se * se + f.stderr.unwrap_or(0.0).powi(2)).sqrt();
        band_checks.push(Check::within(e.name.clone(), f.value, e.value, band));
    }
    let matched = band_checks.iter().all(|c| c.pass);
    Ok(ReplayOutcome { mode: "statistical".into(), compared: band_checks.len(), matched, first_mismatch: None, band_checks })
}

/// Process exit status for an error: 2 for configuration problems, 3 for a
/// budget refusal, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Budget { .. } => 3,
        Error::Config { .. }
        | Error::InvalidParameter(_)
        | Error::InvalidDimension(_)
        | Error::Domain { .. }
        | Error::Nyquist { .. }
        | Error::Wrap(_)
        | Error::Overlap(_) => 2,
        _ => 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn malformed_curve_names_the_field() {
        let err = load_config("[curve]\nkind = \"helix\"\nn = 3\n", &[], Command::Lorentz).unwrap_err();
        match err {
            Error::Config { field, .. } => assert!(field.starts_with("curve"), "{field}"),
            e => panic!("{e:?}"),
        }
        let err = load_config("[lorentz]\ndraws = \"many\"\n", &[], Command::Lorentz).unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "lorentz.draws"), "{err:?}");
        let err = load_config("[lorentz]\nbogus = 1\n", &[], Command::Lorentz).unwrap_err();
        assert!(matches!(err, Error::Config { .. }));
    }

    #[test]
    fn overrides_win() {
        let cfg = load_config("seed = 3\n[lorentz]\ndraws = 10\n", &[("lorentz.draws".into(), "25".into()), ("seed".into(), "9".into())], Command::Lorentz).unwrap();
        assert_eq!(cfg.lorentz.draws, 25);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.curve, Some(CurveSpec::Moment { n: 3 }));
    }

    #[test]
    fn budget_refusal_quotes_the_estimate() {
        let cfg = load_config(
            "budget_bytes = 2147483648\n[curve]\nkind = \"moment\"\nn = 4\n[operator_probe]\ngrid = 256\nks = [3, 5]\n",
            &[],
            Command::OperatorProbe,
        )
        .unwrap();
        match run(&cfg) {
            Err(e @ Error::Budget { required, .. }) => {
                assert_eq!(required, 4u64 << 36);
                assert_eq!(exit_code(&e), 3);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn lorentz_report_replays_exactly() {
        let cfg = load_config("[lorentz]\ndraws = 40\n", &[], Command::Lorentz).unwrap();
        let rep = run(&cfg).unwrap();
        assert!(rep.summary.pass);
        assert_eq!(rep.records.len(), 40);
        let dir = std::env::temp_dir().join(format!("curvelab-replay-{}", std::process::id()));
        write_report(&rep, &dir).unwrap();
        let out = replay(&dir, None).unwrap();
        assert!(out.matched && out.compared == 40, "{out:?}");
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn randomized_report_replays() {
        let text = "[curve]\nkind = \"moment\"\nn = 2\n[sharpness]\nexample = \"wolff\"\ngrid = 512\nlambda_exp = [4, 7]\neps = 1.0\nrho = 0.4\ntrials = 8\n";
        let cfg = load_config(text, &[], Command::Sharpness).unwrap();
        let rep = run(&cfg).unwrap();
        let dir = std::env::temp_dir().join(format!("curvelab-wolff-{}", std::process::id()));
        write_report(&rep, &dir).unwrap();
        assert!(replay(&dir, None).unwrap().matched);
        let other = replay(&dir, Some(cfg.seed + 1)).unwrap();
        assert_eq!(other.mode, "statistical");
        assert!(other.compared > 0);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn tampered_record_is_reported() {
        let cfg = load_config("[lorentz]\ndraws = 5\n", &[], Command::Lorentz).unwrap();
        let mut rep = run(&cfg).unwrap();
        rep.records[3]["s"] = json!(0.123456);
        let dir = std::env::temp_dir().join(format!("curvelab-tamper-{}", std::process::id()));
        write_report(&rep, &dir).unwrap();
        let out = replay(&dir, None).unwrap();
        assert!(!out.matched);
        let m = out.first_mismatch.unwrap();
        assert_eq!((m.record, m.path.as_str()), (3, ".s"));
        std::fs::remove_dir_all(&dir).ok();
    }
}
