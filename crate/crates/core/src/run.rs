//! Experiment configs, sweep orchestration and on-disk artifacts.
//!
//! A config is flat `key = value` text with dotted keys. Lines starting with
//! `#` and blank lines are ignored.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::coupling::{AcceptanceRule, CoupledDynamics, CouplingConfig, FarStrategy, DEFAULT_MAX_STEPS};
use crate::dynamics::StatePoint;
use crate::error::{Error, Result};
use crate::estimation::{
    contraction_curve, ergodic_curve, exit_curve, fit_exponential_tail, EnsembleOptions, FitPolicy, RateEstimate,
    ReferenceSampling, SurvivalCurve, DEFAULT_BURN_IN, DEFAULT_SPACING, MIN_FIT_TRIALS,
};
use crate::modelzoo::{logistic_exit_spec, ModelSpec, ZooModel};

pub const SUMMARY_HEADER: &str = "sweep_key,sweep_value,slope,std_err,r_squared,t_lo,t_hi,N,censored,seed,provenance";
pub const SURVIVAL_FILE: &str = "survival.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const METADATA_FILE: &str = "run.txt";
/// Directory name of the single point of a run without a sweep.
pub const BASE_POINT: &str = "base";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    /// Coupling from a fixed pair `(x0, y0)`.
    Contraction,
    /// Coupling against partners drawn along a long reference trajectory.
    Ergodic,
    /// First exit from the logistic basins.
    Exit,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Contraction => "contraction",
            Algorithm::Ergodic => "ergodic",
            Algorithm::Exit => "exit",
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "contraction" => Ok(Algorithm::Contraction),
            "ergodic" => Ok(Algorithm::Ergodic),
            "exit" => Ok(Algorithm::Exit),
            other => Err(Error::InvalidInput(format!(
                "unknown algorithm `{other}` (expected contraction, ergodic or exit)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    /// Model parameter name, e.g. `eps`, `h`, `mu` or `du`.
    pub key: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub algo: Algorithm,
    /// `None` takes the model's default far strategy.
    pub strategy: Option<FarStrategy>,
    /// `None` takes the model's default threshold at each sweep point.
    pub threshold_d: Option<f64>,
    /// `None` takes the model's default mixture probability.
    pub beta: Option<f64>,
    pub rule: AcceptanceRule,
    pub trials: usize,
    pub seed: u64,
    pub max_steps: u64,
    pub x0: Option<Vec<f64>>,
    pub y0: Option<Vec<f64>>,
    pub workers: usize,
    pub out: PathBuf,
    pub spacing: u64,
    pub burn_in: u64,
    pub min_survivors: u64,
    pub sweep: Option<Sweep>,
}

const KNOWN_KEYS: &[&str] = &[
    "model.name",
    "sde.h",
    "algo",
    "coupling.strategy",
    "coupling.d",
    "coupling.beta",
    "coupling.rule",
    "run.N",
    "run.seed",
    "run.max_steps",
    "run.x0",
    "run.y0",
    "run.workers",
    "run.out",
    "alg2.H",
    "alg2.burn_in",
    "fit.min_survivors",
    "sweep.key",
    "sweep.values",
];

fn invalid(key: &str, message: impl Into<String>) -> Error {
    Error::Validation {
        key: key.to_string(),
        message: message.into(),
    }
}

fn parse_value<V: FromStr>(key: &str, raw: &str) -> Result<V> {
    raw.parse().map_err(|_| invalid(key, format!("cannot parse `{raw}`")))
}

fn parse_list(key: &str, raw: &str) -> Result<Vec<f64>> {
    let values = raw
        .split(',')
        .map(|s| parse_value::<f64>(key, s.trim()))
        .collect::<Result<Vec<_>>>()?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(invalid(key, "values must be finite"));
    }
    Ok(values)
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// A config with every optional setting at its default.
    pub fn for_model(model: ModelSpec, algo: Algorithm, trials: usize, seed: u64) -> Self {
        Self {
            model,
            algo,
            strategy: None,
            threshold_d: None,
            beta: None,
            rule: AcceptanceRule::default(),
            trials,
            seed,
            max_steps: DEFAULT_MAX_STEPS,
            x0: None,
            y0: None,
            workers: 0,
            out: PathBuf::from("out"),
            spacing: DEFAULT_SPACING,
            burn_in: DEFAULT_BURN_IN,
            min_survivors: FitPolicy::default().min_survivors,
            sweep: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: line_no,
                message: format!("expected `key = value`, found `{line}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || value.is_empty() {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("empty key or value in `{line}`"),
                });
            }
            let known = KNOWN_KEYS.contains(&key) || (key.starts_with("model.") && key.len() > 6);
            if !known {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("unknown key `{key}`"),
                });
            }
            if let Some((first, _)) = entries.get(key) {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("duplicate key `{key}` (first set on line {first})"),
                });
            }
            entries.insert(key.to_string(), (line_no, value.to_string()));
        }
        Self::from_entries(&entries)
    }

    fn from_entries(entries: &BTreeMap<String, (usize, String)>) -> Result<Self> {
        let get = |k: &str| entries.get(k).map(|(_, v)| v.as_str());
        let name = get("model.name").ok_or_else(|| invalid("model.name", "missing"))?;
        let mut params = BTreeMap::new();
        for (k, (_, v)) in entries {
            if let Some(p) = k.strip_prefix("model.") {
                if p != "name" {
                    params.insert(p.to_string(), parse_value::<f64>(k, v)?);
                }
            }
        }
        if let Some(h) = get("sde.h") {
            if params.contains_key("h") {
                return Err(invalid("sde.h", "step size given both as sde.h and model.h"));
            }
            params.insert("h".to_string(), parse_value::<f64>("sde.h", h)?);
        }
        let model = ModelSpec::from_params(name, &params).map_err(|e| invalid("model", e.to_string()))?;
        if get("sde.h").is_some() && !model.is_sde() {
            return Err(invalid("sde.h", format!("model `{name}` is a discrete map")));
        }

        let seed = get("run.seed").ok_or_else(|| invalid("run.seed", "a seed is mandatory"))?;
        let trials = get("run.N").ok_or_else(|| invalid("run.N", "missing trial count"))?;
        let algo = get("algo").map_or(Ok(Algorithm::Ergodic), |v| v.parse().map_err(|e: Error| invalid("algo", e.to_string())))?;
        let mut cfg = Self::for_model(model, algo, parse_value("run.N", trials)?, parse_value("run.seed", seed)?);
        if let Some(v) = get("coupling.strategy") {
            cfg.strategy = Some(v.parse().map_err(|e: Error| invalid("coupling.strategy", e.to_string()))?);
        }
        if let Some(v) = get("coupling.rule") {
            cfg.rule = v.parse().map_err(|e: Error| invalid("coupling.rule", e.to_string()))?;
        }
        if let Some(v) = get("coupling.d") {
            cfg.threshold_d = Some(parse_value("coupling.d", v)?);
        }
        if let Some(v) = get("coupling.beta") {
            cfg.beta = Some(parse_value("coupling.beta", v)?);
        }
        if let Some(v) = get("run.max_steps") {
            cfg.max_steps = parse_value("run.max_steps", v)?;
        }
        if let Some(v) = get("run.x0") {
            cfg.x0 = Some(parse_list("run.x0", v)?);
        }
        if let Some(v) = get("run.y0") {
            cfg.y0 = Some(parse_list("run.y0", v)?);
        }
        if let Some(v) = get("run.workers") {
            cfg.workers = parse_value("run.workers", v)?;
        }
        if let Some(v) = get("run.out") {
            cfg.out = PathBuf::from(v);
        }
        if let Some(v) = get("alg2.H") {
            cfg.spacing = parse_value("alg2.H", v)?;
        }
        if let Some(v) = get("alg2.burn_in") {
            cfg.burn_in = parse_value("alg2.burn_in", v)?;
        }
        if let Some(v) = get("fit.min_survivors") {
            cfg.min_survivors = parse_value("fit.min_survivors", v)?;
        }
        match (get("sweep.key"), get("sweep.values")) {
            (None, None) => {}
            (Some(k), Some(v)) => {
                let key = k.strip_prefix("model.").or_else(|| k.strip_prefix("sde.")).unwrap_or(k);
                cfg.sweep = Some(Sweep {
                    key: key.to_string(),
                    values: parse_list("sweep.values", v)?,
                });
            }
            (None, Some(_)) => return Err(invalid("sweep.key", "sweep.values given without sweep.key")),
            (Some(_), None) => return Err(invalid("sweep.values", "sweep.key given without sweep.values")),
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate().map_err(|e| invalid("model", e.to_string()))?;
        if self.trials == 0 {
            return Err(invalid("run.N", "at least one trial is required"));
        }
        if self.max_steps == 0 {
            return Err(invalid("run.max_steps", "must be at least 1"));
        }
        if let Some(d) = self.threshold_d {
            if !(d > 0.0 && d.is_finite()) {
                return Err(invalid("coupling.d", format!("must be positive, got {d}")));
            }
        }
        if let Some(b) = self.beta {
            if !(0.0..1.0).contains(&b) {
                return Err(invalid("coupling.beta", format!("must lie in [0, 1), got {b}")));
            }
        }
        if self.spacing == 0 {
            return Err(invalid("alg2.H", "must be at least 1"));
        }
        if self.algo == Algorithm::Exit && self.model.name() != "logistic" {
            return Err(invalid("algo", "the exit-time bound is defined for the logistic model only"));
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return Err(invalid("sweep.values", "empty sweep"));
            }
            for (i, a) in s.values.iter().enumerate() {
                if s.values[..i].contains(a) {
                    return Err(invalid("sweep.values", format!("duplicate value {a}")));
                }
            }
            for &v in &s.values {
                self.model.with_param(&s.key, v).map_err(|e| invalid("sweep.key", e.to_string()))?;
            }
        }
        for p in self.points()? {
            let spec = self.spec_at(p)?;
            let (x0, y0) = self.initial_points(&spec);
            for (key, pt) in [("run.x0", &x0), ("run.y0", &y0)] {
                if pt.len() != spec.dim() {
                    return Err(invalid(key, format!("expected {} coordinates, got {}", spec.dim(), pt.len())));
                }
            }
            let d = self.threshold_d.unwrap_or_else(|| spec.default_threshold());
            if !(d > 0.0) {
                return Err(invalid("coupling.d", format!("default threshold is {d}; set coupling.d explicitly")));
            }
        }
        Ok(())
    }

    fn points(&self) -> Result<Vec<Option<f64>>> {
        Ok(match &self.sweep {
            None => vec![None],
            Some(s) => s.values.iter().copied().map(Some).collect(),
        })
    }

    fn spec_at(&self, point: Option<f64>) -> Result<ModelSpec> {
        match (point, &self.sweep) {
            (Some(v), Some(s)) => self.model.with_param(&s.key, v),
            _ => Ok(self.model.clone()),
        }
    }

    fn initial_points(&self, spec: &ModelSpec) -> (Vec<f64>, Vec<f64>) {
        let (dx, dy) = spec.default_points();
        (self.x0.clone().unwrap_or(dx), self.y0.clone().unwrap_or(dy))
    }

    fn lines(&self, include_local: bool) -> Vec<(String, String)> {
        let mut out = vec![("model.name".to_string(), self.model.name().to_string())];
        for (k, v) in self.model.params() {
            if k == "h" {
                out.push(("sde.h".into(), v.to_string()));
            } else {
                out.push((format!("model.{k}"), v.to_string()));
            }
        }
        out.push(("algo".into(), self.algo.as_str().into()));
        if let Some(s) = self.strategy {
            out.push(("coupling.strategy".into(), s.as_str().into()));
        }
        if let Some(d) = self.threshold_d {
            out.push(("coupling.d".into(), d.to_string()));
        }
        if let Some(b) = self.beta {
            out.push(("coupling.beta".into(), b.to_string()));
        }
        out.push(("coupling.rule".into(), self.rule.as_str().into()));
        out.push(("run.N".into(), self.trials.to_string()));
        out.push(("run.seed".into(), self.seed.to_string()));
        out.push(("run.max_steps".into(), self.max_steps.to_string()));
        if let Some(x) = &self.x0 {
            out.push(("run.x0".into(), join(x)));
        }
        if let Some(y) = &self.y0 {
            out.push(("run.y0".into(), join(y)));
        }
        if include_local {
            out.push(("run.workers".into(), self.workers.to_string()));
            out.push(("run.out".into(), self.out.display().to_string()));
        }
        out.push(("alg2.H".into(), self.spacing.to_string()));
        out.push(("alg2.burn_in".into(), self.burn_in.to_string()));
        out.push(("fit.min_survivors".into(), self.min_survivors.to_string()));
        if let Some(s) = &self.sweep {
            out.push(("sweep.key".into(), s.key.clone()));
            out.push(("sweep.values".into(), join(&s.values)));
        }
        out
    }

    /// Full config text; parsing it yields an equal config.
    pub fn to_text(&self) -> String {
        render(&self.lines(true))
    }

    /// Config text without the settings that cannot change results
    /// (worker count and output directory).
    pub fn canonical_text(&self) -> String {
        render(&self.lines(false))
    }

    /// `v<version>+<first 16 hex digits of SHA-256(canonical text)>`.
    pub fn provenance(&self) -> String {
        let digest = Sha256::digest(self.canonical_text().as_bytes());
        let hex: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
        format!("v{}+{hex}", env!("CARGO_PKG_VERSION"))
    }
}

fn render(lines: &[(String, String)]) -> String {
    let mut s = String::new();
    for (k, v) in lines {
        let _ = writeln!(s, "{k} = {v}");
    }
    s
}

pub fn version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

/// Build version, config hash and seed.
pub fn version_and_provenance(config: &RunConfig) -> String {
    format!(
        "version {}\nprovenance {}\nseed {}",
        version(),
        config.provenance(),
        config.seed
    )
}

/// Result for one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    /// Directory name under the output root.
    pub id: String,
    pub sweep_key: String,
    pub sweep_value: Option<f64>,
    pub curve: SurvivalCurve,
    /// Per unit time for SDEs, per step for maps. `None` when the tail could not be fitted.
    pub estimate: Option<RateEstimate<f64>>,
    pub irreducibility_certified: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub points: Vec<PointResult>,
    pub provenance: String,
}

fn point_id(key: &str, value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{key}={v}"),
        None => BASE_POINT.to_string(),
    }
}

fn simulate<D: CoupledDynamics<f64>>(
    dynamics: &D,
    algo: Algorithm,
    x0: &StatePoint<f64>,
    y0: &StatePoint<f64>,
    coupling: &CouplingConfig<f64>,
    sampling: ReferenceSampling,
    opts: &EnsembleOptions,
) -> Result<SurvivalCurve> {
    match algo {
        Algorithm::Contraction => contraction_curve(dynamics, x0, y0, coupling, opts),
        Algorithm::Ergodic => ergodic_curve(dynamics, x0, y0, sampling, coupling, opts),
        Algorithm::Exit => exit_curve(dynamics, &logistic_exit_spec(), x0, y0, coupling.max_steps, opts),
    }
}

/// Runs every sweep point in memory without touching the disk.
pub fn execute(config: &RunConfig) -> Result<RunReport> {
    config.validate()?;
    let sweep_key = config.sweep.as_ref().map(|s| s.key.clone()).unwrap_or_default();
    let policy = FitPolicy::default().with_min_survivors(config.min_survivors);
    let opts = EnsembleOptions::new(config.trials, config.seed)
        .with_workers(config.workers)
        .with_policy(policy);
    let sampling = ReferenceSampling {
        spacing: config.spacing,
        burn_in: config.burn_in,
    };
    let mut points = Vec::new();
    for value in config.points()? {
        let spec = config.spec_at(value)?;
        let model = spec.make_model::<f64>()?;
        let coupling = CouplingConfig::new(
            config.strategy.unwrap_or_else(|| spec.default_strategy()),
            config.beta.unwrap_or_else(|| spec.default_beta()),
            config.threshold_d.unwrap_or_else(|| spec.default_threshold()),
            config.max_steps,
        )?
        .with_rule(config.rule);
        let (x0, y0) = config.initial_points(&spec);
        let geometry = spec.geometry();
        let x0 = StatePoint::new(x0, geometry).map_err(|e| invalid("run.x0", e.to_string()))?;
        let y0 = StatePoint::new(y0, geometry).map_err(|e| invalid("run.y0", e.to_string()))?;
        let id = point_id(&sweep_key, value);
        log::info!("running {id}: {spec}, {} trials", config.trials);
        let curve = match &model {
            ZooModel::Step(m) => simulate(m, config.algo, &x0, &y0, &coupling, sampling, &opts)?,
            ZooModel::Sir(m) => simulate(m, config.algo, &x0, &y0, &coupling, sampling, &opts)?,
        };
        let estimate = fit_point(&curve, &policy, spec.step_size(), config.algo);
        if !coupling.irreducibility_certified() {
            log::warn!("{id}: β = 0, the coupled chain is not irreducibility-certified");
        }
        points.push(PointResult {
            id,
            sweep_key: sweep_key.clone(),
            sweep_value: value,
            curve,
            estimate,
            irreducibility_certified: coupling.irreducibility_certified(),
        });
    }
    Ok(RunReport {
        points,
        provenance: config.provenance(),
    })
}

fn fit_point(curve: &SurvivalCurve, policy: &FitPolicy, h: Option<f64>, algo: Algorithm) -> Option<RateEstimate<f64>> {
    if (curve.total() as usize) < MIN_FIT_TRIALS {
        log::warn!("{} trials is below {MIN_FIT_TRIALS}; no fit", curve.total());
        return None;
    }
    match fit_exponential_tail::<f64>(curve, policy) {
        Ok(e) => {
            let e = if algo == Algorithm::Exit {
                e.with_kind(crate::estimation::TailKind::ExitUpper)
            } else {
                e
            };
            Some(h.map_or(e, |h| e.per_unit_time(h)))
        }
        Err(err) => {
            log::warn!("tail fit failed: {err}");
            None
        }
    }
}

/// Renders `summary.csv`.
pub fn summary_csv(report: &RunReport, config: &RunConfig) -> String {
    let mut s = String::from(SUMMARY_HEADER);
    s.push('\n');
    for p in &report.points {
        let value = p.sweep_value.map(|v| v.to_string()).unwrap_or_default();
        let fit = match &p.estimate {
            Some(e) => format!("{},{},{},{},{}", e.slope_r, e.std_err, e.r_squared, e.t_lo, e.t_hi),
            None => ",,,,".to_string(),
        };
        let _ = writeln!(
            s,
            "{},{value},{fit},{},{},{},{}",
            p.sweep_key,
            p.curve.total(),
            p.curve.censored(),
            config.seed,
            report.provenance
        );
    }
    s
}

fn metadata(report: &RunReport, config: &RunConfig) -> String {
    let mut s = version_and_provenance(config);
    s.push('\n');
    for p in &report.points {
        let _ = writeln!(
            s,
            "{} irreducibility_certified={}",
            p.id, p.irreducibility_certified
        );
    }
    s.push_str("\n# config\n");
    s.push_str(&config.canonical_text());
    s
}

/// Removes everything created under the output root if dropped before `commit`.
struct Cleanup {
    created: Vec<PathBuf>,
    committed: bool,
}

impl Drop for Cleanup {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for p in self.created.iter().rev() {
            let _ = if p.is_dir() { std::fs::remove_dir_all(p) } else { std::fs::remove_file(p) };
        }
    }
}

fn write_file(path: &Path, text: &str, guard: &mut Cleanup) -> Result<()> {
    if !path.exists() {
        guard.created.push(path.to_path_buf());
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn ensure_dir(path: &Path, guard: &mut Cleanup) -> Result<()> {
    if path.is_dir() {
        return Ok(());
    }
    let mut missing = Vec::new();
    let mut cur = Some(path);
    while let Some(p) = cur {
        if p.as_os_str().is_empty() || p.exists() {
            break;
        }
        missing.push(p.to_path_buf());
        cur = p.parent();
    }
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))?;
    guard.created.extend(missing.into_iter().rev());
    Ok(())
}

/// Writes the artifacts of a finished run under `config.out`.
pub fn write_artifacts(report: &RunReport, config: &RunConfig) -> Result<()> {
    let mut guard = Cleanup {
        created: Vec::new(),
        committed: false,
    };
    ensure_dir(&config.out, &mut guard)?;
    for p in &report.points {
        let dir = config.out.join(&p.id);
        ensure_dir(&dir, &mut guard)?;
        write_file(&dir.join(SURVIVAL_FILE), &p.curve.to_csv(), &mut guard)?;
    }
    write_file(&config.out.join(SUMMARY_FILE), &summary_csv(report, config), &mut guard)?;
    write_file(&config.out.join(METADATA_FILE), &metadata(report, config), &mut guard)?;
    guard.committed = true;
    Ok(())
}

/// Runs a config end to end: simulate, fit, write artifacts.
pub fn run(config: &RunConfig) -> Result<RunReport> {
    let report = execute(config)?;
    write_artifacts(&report, config)?;
    Ok(report)
}

pub fn run_file(path: impl AsRef<Path>) -> Result<RunReport> {
    let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(&path, e))?;
    run(&RunConfig::parse(&text)?)
}

/// Comparison of one summary row against a refit of its survival curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub id: String,
    pub summary_slope: Option<f64>,
    pub refit_slope: Option<f64>,
}

impl CheckRow {
    pub fn agrees(&self) -> bool {
        match (self.summary_slope, self.refit_slope) {
            (None, None) => true,
            (Some(a), Some(b)) => (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-300),
            _ => false,
        }
    }
}

/// Refits every `survival.csv` under the config's output root and compares
/// with the slope column of `summary.csv`.
pub fn check(config: &RunConfig) -> Result<Vec<CheckRow>> {
    let summary_path = config.out.join(SUMMARY_FILE);
    let text = std::fs::read_to_string(&summary_path).map_err(|e| Error::io(&summary_path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some(SUMMARY_HEADER) {
        return Err(Error::Parse {
            line: 1,
            message: "summary.csv header mismatch".into(),
        });
    }
    let policy = FitPolicy::default().with_min_survivors(config.min_survivors);
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 11 {
            return Err(Error::Parse {
                line: i + 2,
                message: format!("expected 11 columns, found {}", cols.len()),
            });
        }
        let value = if cols[1].is_empty() {
            None
        } else {
            Some(cols[1].parse::<f64>().map_err(|_| Error::Parse {
                line: i + 2,
                message: format!("bad sweep value `{}`", cols[1]),
            })?)
        };
        let summary_slope = if cols[2].is_empty() {
            None
        } else {
            Some(cols[2].parse::<f64>().map_err(|_| Error::Parse {
                line: i + 2,
                message: format!("bad slope `{}`", cols[2]),
            })?)
        };
        let id = point_id(cols[0], value);
        let spec = config.spec_at(value)?;
        let curve = SurvivalCurve::read_csv(config.out.join(&id).join(SURVIVAL_FILE))?;
        let refit = fit_point(&curve, &policy, spec.step_size(), config.algo).map(|e| e.slope_r);
        rows.push(CheckRow {
            id,
            summary_slope,
            refit_slope: refit,
        });
    }
    Ok(rows)
}
