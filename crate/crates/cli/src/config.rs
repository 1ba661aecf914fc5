//! Versioned JSON experiment configs and their validation.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use srb_lab::systems::{catalog, SystemSpec};
use srb_lab::{Point, SrbError};

pub const CONFIG_VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Lyapunov,
    PushforwardLebesgue,
    PushforwardLeaf,
    DensityCheck,
    EhDiagnostics,
    CoreCondition,
    Basin,
    EntropyCheck,
}

impl Experiment {
    pub fn as_str(&self) -> &'static str {
        match self {
            Experiment::Lyapunov => "lyapunov",
            Experiment::PushforwardLebesgue => "pushforward-lebesgue",
            Experiment::PushforwardLeaf => "pushforward-leaf",
            Experiment::DensityCheck => "density-check",
            Experiment::EhDiagnostics => "eh-diagnostics",
            Experiment::CoreCondition => "core-condition",
            Experiment::Basin => "basin",
            Experiment::EntropyCheck => "entropy-check",
        }
    }
}

/// Numeric settings; each experiment reads the ones it needs and fills in
/// its own defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub renorm_every: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub burn: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_length: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_grow: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cone_axis: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cone_angle: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub band_cells: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blowup_sample: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub holder_alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_bar: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unstable_angle: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stable_angle: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub angle_thresholds: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub version: Option<u64>,
    pub experiment: Option<String>,
    pub system: Option<SystemSpec>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub settings: Settings,
    /// The config as read, before overrides.
    pub raw: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub field: String,
    /// Error name, as in manifests.
    pub error: String,
    pub message: String,
}

impl Diagnostic {
    fn new(field: impl Into<String>, error: &str, message: impl Into<String>) -> Self {
        Diagnostic {
            field: field.into(),
            error: error.into(),
            message: message.into(),
        }
    }

    fn from_error(field: impl Into<String>, e: &SrbError) -> Self {
        let field = match e {
            SrbError::ParameterOutOfRange { field, .. } => format!("system.params.{field}"),
            _ => field.into(),
        };
        Diagnostic::new(field, e.name(), e.to_string())
    }
}

const KNOWN_KEYS: [&str; 7] = ["version", "experiment", "system", "seed", "workers", "out", "settings"];

/// Parses a config document, collecting every problem instead of stopping
/// at the first. Structural problems come back as diagnostics alongside the
/// partially filled config.
pub fn parse_config(text: &str) -> (ExperimentConfig, Vec<Diagnostic>) {
    let mut diags = Vec::new();
    let mut cfg = ExperimentConfig {
        version: None,
        experiment: None,
        system: None,
        seed: None,
        workers: None,
        out: None,
        settings: Settings::default(),
        raw: Value::Null,
    };
    let raw: Value = match serde_json::from_str(text) {
        Ok(v) => v,
        Err(e) => {
            diags.push(Diagnostic::new("", "Parse", format!("config is not valid JSON: {e}")));
            return (cfg, diags);
        }
    };
    cfg.raw = raw.clone();
    let Value::Object(map) = raw else {
        diags.push(Diagnostic::new("", "Parse", "config must be a JSON object"));
        return (cfg, diags);
    };
    for key in map.keys() {
        if !KNOWN_KEYS.contains(&key.as_str()) {
            diags.push(Diagnostic::new(key.clone(), "Parse", format!("unknown field {key:?}")));
        }
    }
    let get = |key: &str| map.get(key).filter(|v| !v.is_null()).cloned();
    if let Some(v) = get("version") {
        match v.as_u64() {
            Some(n) => cfg.version = Some(n),
            None => diags.push(Diagnostic::new("version", "Parse", "version must be an integer")),
        }
    }
    if let Some(v) = get("experiment") {
        match v.as_str() {
            Some(s) => cfg.experiment = Some(s.to_string()),
            None => diags.push(Diagnostic::new("experiment", "Parse", "experiment must be a string")),
        }
    }
    if let Some(v) = get("seed") {
        match v.as_u64() {
            Some(n) => cfg.seed = Some(n),
            None => diags.push(Diagnostic::new("seed", "Parse", "seed must be a nonnegative integer")),
        }
    }
    if let Some(v) = get("workers") {
        match v.as_u64() {
            Some(n) => cfg.workers = Some(n as usize),
            None => diags.push(Diagnostic::new("workers", "Parse", "workers must be a positive integer")),
        }
    }
    if let Some(v) = get("out") {
        match v.as_str() {
            Some(s) => cfg.out = Some(PathBuf::from(s)),
            None => diags.push(Diagnostic::new("out", "Parse", "out must be a path string")),
        }
    }
    if let Some(v) = get("settings") {
        match serde_json::from_value::<Settings>(v) {
            Ok(s) => cfg.settings = s,
            Err(e) => diags.push(Diagnostic::new("settings", "Parse", e.to_string())),
        }
    }
    if let Some(v) = get("system") {
        match parse_system(&v) {
            Ok(s) => cfg.system = Some(s),
            Err(d) => diags.push(d),
        }
    }
    (cfg, diags)
}

/// `{"name": ..., "params": {...}}` with missing parameters taken from the
/// catalog defaults.
fn parse_system(v: &Value) -> Result<SystemSpec, Diagnostic> {
    let name = v
        .get("name")
        .and_then(Value::as_str)
        .ok_or_else(|| Diagnostic::new("system.name", "Parse", "system needs a string name"))?;
    let cat = catalog();
    let entry = cat
        .as_array()
        .and_then(|a| a.iter().find(|e| e["name"] == name))
        .ok_or_else(|| {
            Diagnostic::new("system.name", "InvalidArgument", format!("unknown system {name:?}; see list-systems"))
        })?;
    let mut params = Map::new();
    if let Some(defaults) = entry["parameters"].as_object() {
        for (k, spec) in defaults {
            params.insert(k.clone(), spec["default"].clone());
        }
    }
    match v.get("params") {
        None | Some(Value::Null) => {}
        Some(Value::Object(given)) => {
            for (k, val) in given {
                if !params.contains_key(k) {
                    return Err(Diagnostic::new(
                        format!("system.params.{k}"),
                        "Parse",
                        format!("{name} has no parameter {k:?}"),
                    ));
                }
                params.insert(k.clone(), val.clone());
            }
        }
        Some(_) => return Err(Diagnostic::new("system.params", "Parse", "params must be an object")),
    }
    let doc = if params.is_empty() {
        json!({ "name": name })
    } else {
        json!({ "name": name, "params": params })
    };
    serde_json::from_value(doc).map_err(|e| Diagnostic::new("system.params", "Parse", e.to_string()))
}

fn positive_count(diags: &mut Vec<Diagnostic>, field: &str, v: Option<usize>) {
    if v == Some(0) {
        diags.push(Diagnostic::new(format!("settings.{field}"), "InvalidArgument", format!("{field} must be positive")));
    }
}

fn positive_real(diags: &mut Vec<Diagnostic>, field: &str, v: Option<f64>) {
    if let Some(x) = v {
        if !(x > 0.0 && x.is_finite()) {
            diags.push(Diagnostic::new(format!("settings.{field}"), "InvalidArgument", format!("{field} must be positive")));
        }
    }
}

/// Every problem with a config for `kind`, after overrides were applied.
pub fn validate(cfg: &ExperimentConfig, kind: Experiment) -> Vec<Diagnostic> {
    let mut d = Vec::new();
    match cfg.version {
        None => d.push(Diagnostic::new("version", "InvalidArgument", "config version is required")),
        Some(CONFIG_VERSION) => {}
        Some(v) => d.push(Diagnostic::new(
            "version",
            "InvalidArgument",
            format!("unsupported config version {v}; expected {CONFIG_VERSION}"),
        )),
    }
    if let Some(e) = &cfg.experiment {
        if e != kind.as_str() {
            d.push(Diagnostic::new(
                "experiment",
                "InvalidArgument",
                format!("config is for {e:?} but the subcommand is {:?}", kind.as_str()),
            ));
        }
    }
    if cfg.seed.is_none() {
        d.push(Diagnostic::new("seed", "InvalidArgument", "seed is mandatory (config, --seed or SRB_LAB_SEED)"));
    }
    if cfg.workers == Some(0) {
        d.push(Diagnostic::new("workers", "InvalidArgument", "workers must be positive"));
    }
    let s = &cfg.settings;
    for (f, v) in [
        ("n", s.n),
        ("ensemble", s.ensemble),
        ("grid", s.grid),
        ("renorm_every", s.renorm_every),
        ("n_grow", s.n_grow),
        ("bins", s.bins),
        ("probe", s.probe),
        ("sample", s.sample),
        ("reference_n", s.reference_n),
        ("blowup_sample", s.blowup_sample),
    ] {
        positive_count(&mut d, f, v);
    }
    for (f, v) in [
        ("target_length", s.target_length),
        ("tol", s.tol),
        ("band_cells", s.band_cells),
        ("holder_alpha", s.holder_alpha),
        ("lambda_bar", s.lambda_bar),
    ] {
        positive_real(&mut d, f, v);
    }
    if s.holder_alpha.is_some_and(|a| a > 1.0) {
        d.push(Diagnostic::new("settings.holder_alpha", "InvalidArgument", "holder_alpha must lie in (0, 1]"));
    }
    for (f, v) in [
        ("cone_angle", s.cone_angle),
        ("unstable_angle", s.unstable_angle),
        ("stable_angle", s.stable_angle),
    ] {
        if v.is_some_and(|a| !(a > 0.0 && a < std::f64::consts::FRAC_PI_2)) {
            d.push(Diagnostic::new(format!("settings.{f}"), "InvalidArgument", format!("{f} must lie in (0, pi/2)")));
        }
    }
    if let Some(g) = &s.eps_grid {
        if g.is_empty() || g.iter().any(|e| !(*e >= 0.0 && e.is_finite())) || g.windows(2).any(|w| !(w[1] < w[0])) {
            d.push(Diagnostic::new(
                "settings.eps_grid",
                "InvalidArgument",
                "eps_grid must be nonempty, nonnegative and strictly decreasing",
            ));
        }
    }
    match &cfg.system {
        None => {
            if !d.iter().any(|x| x.field.starts_with("system")) {
                d.push(Diagnostic::new("system", "InvalidArgument", "system is required"));
            }
        }
        Some(spec) => {
            let violations = spec.violations();
            for v in &violations {
                d.push(Diagnostic::from_error("system.params", v));
            }
            if violations.is_empty() {
                match spec.build() {
                    Err(e) => d.push(Diagnostic::from_error("system", &e)),
                    Ok(sys) => {
                        for (f, v) in [("x0", &s.x0), ("cone_axis", &s.cone_axis)] {
                            if let Some(v) = v {
                                if v.len() != sys.dim() {
                                    d.push(Diagnostic::new(
                                        format!("settings.{f}"),
                                        "InvalidArgument",
                                        format!("{f} has {} coordinates, {} has {}", v.len(), spec.name(), sys.dim()),
                                    ));
                                }
                            }
                        }
                        if let Some(x0) = s.x0.as_ref().filter(|v| v.len() == sys.dim()) {
                            if !sys.region().contains(&Point::new(x0)) {
                                d.push(Diagnostic::new("settings.x0", "InvalidArgument", "x0 lies outside the trapping region"));
                            }
                        }
                        if s.cone_axis.as_ref().is_some_and(|a| a.iter().all(|c| *c == 0.0)) {
                            d.push(Diagnostic::new("settings.cone_axis", "ZeroVector", "cone_axis must be nonzero"));
                        }
                        if kind == Experiment::CoreCondition && !sys.is_singular() {
                            d.push(Diagnostic::from_error("system", &SrbError::NotSingularSystem(spec.name())));
                        }
                    }
                }
            }
        }
    }
    d
}
