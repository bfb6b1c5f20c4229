//! `key = value` experiment configs.
//!
//! A config is layered: the shipped defaults, then a config file, then
//! command-line overrides. Every layer is checked against the same key list
//! and unknown keys are errors, not warnings.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

/// The versioned defaults file, compiled in so records can always echo it.
pub const DEFAULTS: &str = include_str!("../../../configs/defaults.conf");

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{origin}:{line}: expected `key = value`, got `{text}`")]
    Syntax { origin: String, line: usize, text: String },
    #[error("{origin}:{line}: unknown key `{key}`")]
    UnknownKey { origin: String, line: usize, key: String },
    #[error("{origin}:{line}: key `{key}` given twice")]
    Duplicate { origin: String, line: usize, key: String },
    #[error("bad value for `{key}`: {msg}")]
    Value { key: String, msg: String },
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

type Result<T> = std::result::Result<T, ConfigError>;

const DEFAULT_KEYS: &[&str] = &[
    "version",
    "delta",
    "eps",
    "first_moment_tol",
    "identity_tol",
    "completed_tol",
    "dual_tol",
    "dual_tail",
    "window_tol",
    "constants_tol",
    "vandermonde_tol",
    "vdc_constant",
    "slope_margin",
    "trend_rel_tol",
    "control_sigmas",
    "grid_nodes",
    "window_samples",
];

const EXPERIMENT_KEYS: &[&str] = &[
    "name",
    "kind",
    "check",
    "alpha",
    "theta",
    "m",
    "n",
    "sequence",
    "family",
    "radius",
    "seed",
    "samples",
    "control",
    "control_n",
    "time_limit",
    "out",
];

fn known(key: &str) -> bool {
    EXPERIMENT_KEYS.contains(&key) || (DEFAULT_KEYS.contains(&key) && key != "version")
}

/// Parses `key = value` lines. `#` starts a comment.
pub fn parse_pairs(text: &str, origin: &str, allow: impl Fn(&str) -> bool) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ConfigError::Syntax { origin: origin.into(), line: i + 1, text: line.into() });
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(ConfigError::Syntax { origin: origin.into(), line: i + 1, text: line.into() });
        }
        if !allow(k) {
            return Err(ConfigError::UnknownKey { origin: origin.into(), line: i + 1, key: k.into() });
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(ConfigError::Duplicate { origin: origin.into(), line: i + 1, key: k.into() });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Correlate,
    Moments,
    IdentityCheck,
    Expsum,
    BprocessCheck,
    Offdiag,
    Sweep,
}

impl Kind {
    pub const ALL: [Kind; 7] = [Kind::Correlate, Kind::Moments, Kind::IdentityCheck, Kind::Expsum, Kind::BprocessCheck, Kind::Offdiag, Kind::Sweep];

    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Correlate => "correlate",
            Kind::Moments => "moments",
            Kind::IdentityCheck => "identity-check",
            Kind::Expsum => "expsum",
            Kind::BprocessCheck => "bprocess-check",
            Kind::Offdiag => "offdiag",
            Kind::Sweep => "sweep",
        }
    }

    /// Sub-experiments accepted by `check`; the first is the default.
    pub fn checks(self) -> &'static [&'static str] {
        match self {
            Kind::Correlate | Kind::Moments | Kind::Sweep => &[],
            Kind::IdentityCheck => &["partition", "completed", "dual", "zero-pattern", "bell"],
            Kind::Expsum => &["windows", "kusmin-landau"],
            Kind::BprocessCheck => &["residuals", "constants"],
            Kind::Offdiag => &["exponent", "vandermonde", "vdc"],
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Kind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Kind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| format!("unknown kind `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Bspline,
    Bump,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Bspline => "bspline",
            Family::Bump => "bump",
        }
    }
}

impl FromStr for Family {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "bspline" => Ok(Family::Bspline),
            "bump" => Ok(Family::Bump),
            _ => Err(format!("unknown family `{s}` (bspline or bump)")),
        }
    }
}

/// Which points the correlation experiments run on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeqKind {
    Monomial,
    Uniform,
    Lattice,
}

impl SeqKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SeqKind::Monomial => "monomial",
            SeqKind::Uniform => "uniform",
            SeqKind::Lattice => "lattice",
        }
    }
}

impl FromStr for SeqKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "monomial" => Ok(SeqKind::Monomial),
            "uniform" => Ok(SeqKind::Uniform),
            "lattice" => Ok(SeqKind::Lattice),
            _ => Err(format!("unknown sequence `{s}` (monomial, uniform or lattice)")),
        }
    }
}

/// Constants from the defaults file, possibly overridden per experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Defaults {
    pub version: u32,
    pub delta: f64,
    pub eps: f64,
    pub first_moment_tol: f64,
    pub identity_tol: f64,
    pub completed_tol: f64,
    pub dual_tol: f64,
    pub dual_tail: f64,
    pub window_tol: f64,
    pub constants_tol: f64,
    pub vandermonde_tol: f64,
    pub vdc_constant: f64,
    pub slope_margin: f64,
    pub trend_rel_tol: f64,
    pub control_sigmas: f64,
    pub grid_nodes: usize,
    pub window_samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub kind: Kind,
    pub check: Option<String>,
    pub alpha: f64,
    pub theta: Vec<f64>,
    pub m: Vec<usize>,
    pub n: Vec<u64>,
    pub sequence: Vec<SeqKind>,
    pub family: Family,
    pub radius: f64,
    pub seed: u64,
    /// Monte Carlo replicates or random draws, depending on the experiment.
    pub samples: usize,
    /// Run the iid-uniform control alongside a correlation trend.
    pub control: bool,
    pub control_n: u64,
    /// Wall-clock budget in seconds; exceeding it fails the run.
    pub time_limit: Option<f64>,
    pub out: Option<PathBuf>,
    pub defaults: Defaults,
}

pub const MAX_N: u64 = 10_000_000;

fn value<T: FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>>
where
    T::Err: fmt::Display,
{
    match map.get(key) {
        None => Ok(None),
        Some(v) => v.parse::<T>().map(Some).map_err(|e| ConfigError::Value { key: key.into(), msg: format!("`{v}`: {e}") }),
    }
}

fn list<T: FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<Vec<T>>>
where
    T::Err: fmt::Display,
{
    match map.get(key) {
        None => Ok(None),
        Some(v) => {
            let items: Vec<&str> = v.split(',').map(str::trim).collect();
            if items.iter().any(|s| s.is_empty()) {
                return Err(ConfigError::Value { key: key.into(), msg: format!("empty list entry in `{v}`") });
            }
            items
                .into_iter()
                .map(|s| s.parse::<T>().map_err(|e| ConfigError::Value { key: key.into(), msg: format!("`{s}`: {e}") }))
                .collect::<Result<Vec<T>>>()
                .map(Some)
        }
    }
}

/// Integers may be written as `1e5` or `100_000`.
fn int_list(map: &BTreeMap<String, String>, key: &str) -> Result<Option<Vec<u64>>> {
    match list::<String>(map, key)? {
        None => Ok(None),
        Some(items) => items.iter().map(|s| parse_int(key, s)).collect::<Result<Vec<u64>>>().map(Some),
    }
}

fn parse_int(key: &str, s: &str) -> Result<u64> {
    let clean = s.replace('_', "");
    if let Ok(v) = clean.parse::<u64>() {
        return Ok(v);
    }
    match clean.parse::<f64>() {
        Ok(x) if x >= 0.0 && x.fract() == 0.0 && x <= u64::MAX as f64 => Ok(x as u64),
        _ => Err(ConfigError::Value { key: key.into(), msg: format!("`{s}` is not a nonnegative integer") }),
    }
}

fn int(map: &BTreeMap<String, String>, key: &str) -> Result<Option<u64>> {
    map.get(key).map(|s| parse_int(key, s)).transpose()
}

fn bad(key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Value { key: key.into(), msg: msg.into() }
}

fn float(map: &BTreeMap<String, String>, key: &str) -> Result<f64> {
    let v: f64 = value(map, key)?.ok_or_else(|| bad(key, "missing from defaults"))?;
    if !v.is_finite() {
        return Err(bad(key, "must be finite"));
    }
    Ok(v)
}

impl Defaults {
    fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        let d = Defaults {
            version: value(map, "version")?.ok_or(ConfigError::Missing("version"))?,
            delta: float(map, "delta")?,
            eps: float(map, "eps")?,
            first_moment_tol: float(map, "first_moment_tol")?,
            identity_tol: float(map, "identity_tol")?,
            completed_tol: float(map, "completed_tol")?,
            dual_tol: float(map, "dual_tol")?,
            dual_tail: float(map, "dual_tail")?,
            window_tol: float(map, "window_tol")?,
            constants_tol: float(map, "constants_tol")?,
            vandermonde_tol: float(map, "vandermonde_tol")?,
            vdc_constant: float(map, "vdc_constant")?,
            slope_margin: float(map, "slope_margin")?,
            trend_rel_tol: float(map, "trend_rel_tol")?,
            control_sigmas: float(map, "control_sigmas")?,
            grid_nodes: int(map, "grid_nodes")?.ok_or(ConfigError::Missing("grid_nodes"))? as usize,
            window_samples: int(map, "window_samples")?.ok_or(ConfigError::Missing("window_samples"))? as usize,
        };
        if !(d.delta > 0.0 && d.delta < 1.0) {
            return Err(bad("delta", "must lie in (0, 1)"));
        }
        if !(d.eps > 0.0 && d.eps < 1.0) {
            return Err(bad("eps", "must lie in (0, 1)"));
        }
        if d.dual_tail != mpcorr_core::correlations::DUAL_TAIL {
            return Err(bad("dual_tail", format!("the kernels are built for {:e}", mpcorr_core::correlations::DUAL_TAIL)));
        }
        if d.grid_nodes < 4 {
            return Err(bad("grid_nodes", "need at least 4 nodes"));
        }
        Ok(d)
    }

    fn write(&self, out: &mut BTreeMap<String, String>) {
        let d = self;
        for (k, v) in [
            ("delta", d.delta),
            ("eps", d.eps),
            ("first_moment_tol", d.first_moment_tol),
            ("identity_tol", d.identity_tol),
            ("completed_tol", d.completed_tol),
            ("dual_tol", d.dual_tol),
            ("dual_tail", d.dual_tail),
            ("window_tol", d.window_tol),
            ("constants_tol", d.constants_tol),
            ("vandermonde_tol", d.vandermonde_tol),
            ("vdc_constant", d.vdc_constant),
            ("slope_margin", d.slope_margin),
            ("trend_rel_tol", d.trend_rel_tol),
            ("control_sigmas", d.control_sigmas),
        ] {
            out.insert(k.into(), format!("{v:e}"));
        }
        out.insert("version".into(), d.version.to_string());
        out.insert("grid_nodes".into(), d.grid_nodes.to_string());
        out.insert("window_samples".into(), d.window_samples.to_string());
    }
}

/// Collects layers before the typed config is built.
#[derive(Debug, Clone)]
pub struct ConfigBuilder {
    map: BTreeMap<String, String>,
}

impl Default for ConfigBuilder {
    fn default() -> Self {
        Self::new()
    }
}

impl ConfigBuilder {
    pub fn new() -> Self {
        let map = parse_pairs(DEFAULTS, "defaults.conf", |k| DEFAULT_KEYS.contains(&k)).expect("shipped defaults parse");
        Self { map }
    }

    /// Layers a config file on top; later layers win.
    pub fn file(mut self, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        let layer = parse_pairs(&text, &path.display().to_string(), known)?;
        self.map.extend(layer);
        if !self.map.contains_key("name") {
            if let Some(stem) = path.file_stem() {
                self.map.insert("name".into(), stem.to_string_lossy().into_owned());
            }
        }
        Ok(self)
    }

    pub fn text(mut self, text: &str, origin: &str) -> Result<Self> {
        let layer = parse_pairs(text, origin, known)?;
        self.map.extend(layer);
        Ok(self)
    }

    /// A single override such as `theta=0.3`.
    pub fn set(mut self, key: &str, value: &str) -> Result<Self> {
        if !known(key) {
            return Err(ConfigError::UnknownKey { origin: "command line".into(), line: 0, key: key.into() });
        }
        self.map.insert(key.into(), value.trim().into());
        Ok(self)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    pub fn build(self) -> Result<ExperimentConfig> {
        ExperimentConfig::from_map(&self.map)
    }
}

impl ExperimentConfig {
    fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        let kind: Kind = value(map, "kind")?.ok_or(ConfigError::Missing("kind"))?;
        let check: Option<String> = value(map, "check")?;
        let checks = kind.checks();
        let check = match (check, checks.first()) {
            (Some(c), _) if checks.contains(&c.as_str()) => Some(c),
            (Some(c), _) if checks.is_empty() => return Err(bad("check", format!("`{kind}` takes no check, got `{c}`"))),
            (Some(c), _) => return Err(bad("check", format!("`{c}` is not one of {checks:?}"))),
            (None, Some(first)) => Some(first.to_string()),
            (None, None) => None,
        };
        let cfg = ExperimentConfig {
            name: value(map, "name")?.unwrap_or_else(|| kind.as_str().to_string()),
            kind,
            check,
            alpha: value(map, "alpha")?.unwrap_or(1.0),
            theta: list(map, "theta")?.unwrap_or_else(|| vec![0.3]),
            m: int_list(map, "m")?.unwrap_or_else(|| vec![3]).into_iter().map(|v| v as usize).collect(),
            n: int_list(map, "n")?.unwrap_or_else(|| vec![1000]),
            sequence: list(map, "sequence")?.unwrap_or_else(|| vec![SeqKind::Monomial]),
            family: value(map, "family")?.unwrap_or(Family::Bspline),
            radius: value(map, "radius")?.unwrap_or(1.0),
            seed: int(map, "seed")?.unwrap_or(0),
            samples: int(map, "samples")?.unwrap_or(100) as usize,
            control: value(map, "control")?.unwrap_or(false),
            control_n: int(map, "control_n")?.unwrap_or(100_000),
            time_limit: value(map, "time_limit")?,
            out: value::<String>(map, "out")?.map(PathBuf::from),
            defaults: Defaults::from_map(map)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(bad("alpha", "must be positive"));
        }
        if let Some(t) = self.theta.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
            return Err(bad("theta", format!("{t} is outside (0, 1)")));
        }
        if self.kind != Kind::Sweep && self.theta.len() != 1 {
            return Err(bad("theta", "only `sweep` takes a list of theta values"));
        }
        let lo = match self.kind {
            Kind::Moments | Kind::IdentityCheck => 1,
            _ => 2,
        };
        if let Some(m) = self.m.iter().find(|m| !(lo..=8).contains(*m)) {
            return Err(bad("m", format!("{m} is outside [{lo}, 8]")));
        }
        if let Some(n) = self.n.iter().find(|n| !(1..=MAX_N).contains(*n)) {
            return Err(bad("n", format!("{n} is outside [1, {MAX_N}]")));
        }
        if self.control_n < 2 || self.control_n > MAX_N {
            return Err(bad("control_n", format!("must lie in [2, {MAX_N}]")));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(bad("radius", "must be positive"));
        }
        if self.samples == 0 {
            return Err(bad("samples", "must be at least 1"));
        }
        if let Some(t) = self.time_limit {
            if !(t > 0.0) {
                return Err(bad("time_limit", "must be positive"));
            }
        }
        Ok(())
    }

    pub fn theta(&self) -> f64 {
        self.theta[0]
    }

    /// Canonical `key -> value` form: every value re-rendered from the typed
    /// field so equivalent spellings (`1e4`, `10000`) agree.
    pub fn canonical(&self) -> BTreeMap<String, String> {
        let join = |v: Vec<String>| v.join(",");
        let mut out = BTreeMap::new();
        out.insert("name".into(), self.name.clone());
        out.insert("kind".into(), self.kind.to_string());
        if let Some(c) = &self.check {
            out.insert("check".into(), c.clone());
        }
        out.insert("alpha".into(), format!("{:e}", self.alpha));
        out.insert("theta".into(), join(self.theta.iter().map(|t| format!("{t:e}")).collect()));
        out.insert("m".into(), join(self.m.iter().map(|v| v.to_string()).collect()));
        out.insert("n".into(), join(self.n.iter().map(|v| v.to_string()).collect()));
        out.insert("sequence".into(), join(self.sequence.iter().map(|s| s.as_str().to_string()).collect()));
        out.insert("family".into(), self.family.as_str().into());
        out.insert("radius".into(), format!("{:e}", self.radius));
        out.insert("seed".into(), self.seed.to_string());
        out.insert("samples".into(), self.samples.to_string());
        out.insert("control".into(), self.control.to_string());
        out.insert("control_n".into(), self.control_n.to_string());
        if let Some(t) = self.time_limit {
            out.insert("time_limit".into(), format!("{t:e}"));
        }
        self.defaults.write(&mut out);
        out
    }

    /// SHA-256 over the canonical form, leaving out the label and the output
    /// location so the same experiment always hashes the same.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.canonical() {
            if k == "name" {
                continue;
            }
            h.update(k.as_bytes());
            h.update(b"=");
            h.update(v.as_bytes());
            h.update(b"\n");
        }
        format!("{:x}", h.finalize())
    }
}
