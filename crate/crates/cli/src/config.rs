//! Pipeline configuration: one TOML file with a section per command.
//!
//! Validation collects every problem before failing so a broken config is
//! fixed in one round. Relative paths resolve against the directory of the
//! config file.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use regcx::econometrics::{GmmOptions, LagMode};
use regcx::spatial::MissingNeighbors;
use regcx::Exec;
use toml::{Table, Value};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Mode {
    /// Employment by industry; region scores by the eigenvector method.
    Industry,
    /// Exports by product; region scores from external product complexity.
    Export,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Industry => "industry",
            Mode::Export => "export",
        }
    }

    /// Name of the region-level indicator the mode produces.
    pub fn indicator(self) -> &'static str {
        match self {
            Mode::Industry => "indeci",
            Mode::Export => "eci",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestConfig {
    pub industry: PathBuf,
    pub exports: Option<PathBuf>,
    pub crosswalk: Option<PathBuf>,
    /// GDP per capita, nominal when a price index is given.
    pub gdp: PathBuf,
    pub population: PathBuf,
    pub price_index: Option<PathBuf>,
    pub base_year: Option<i32>,
    pub first_year: Option<i32>,
    pub last_year: Option<i32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityConfig {
    pub modes: Vec<Mode>,
    pub rca_threshold: f64,
    /// World trade shares for the export RCA baseline; internal when absent.
    pub export_shares: Option<PathBuf>,
    pub pci: Option<PathBuf>,
    pub dense_limit: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelatednessConfig {
    pub modes: Vec<Mode>,
    pub write_density: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialConfig {
    pub adjacency: PathBuf,
    pub indicators: Vec<String>,
    pub permutations: usize,
    pub seed: u64,
    pub missing_neighbors: MissingNeighbors,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorChoice {
    SystemGmm,
    WithinFe,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressSpec {
    pub id: String,
    pub regressors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressConfig {
    pub horizons: Vec<usize>,
    pub estimator: EstimatorChoice,
    pub gmm: GmmOptions,
    pub lag_mode: LagMode,
    pub year_effects: bool,
    pub specs: Vec<RegressSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub source: Option<PathBuf>,
    /// sha256 of the config file bytes followed by the overrides.
    pub digest_input: Vec<u8>,
    pub output: PathBuf,
    pub exec: Exec,
    pub ingest: Option<IngestConfig>,
    pub complexity: ComplexityConfig,
    pub relatedness: RelatednessConfig,
    pub spatial: Option<SpatialConfig>,
    pub regress: RegressConfig,
}

/// Which sections a command requires.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Needs {
    pub ingest: bool,
    pub spatial: bool,
}

const CONTROLS: [&str; 2] = ["log_gdppc", "log_population"];

/// The eight default specifications: lagged growth alone, with controls,
/// then industry complexity and its spatial lag separately and jointly,
/// then the same for export complexity.
pub fn default_specs(modes: &[Mode]) -> Vec<RegressSpec> {
    let spec = |id: usize, extra: &[&str]| RegressSpec {
        id: format!("s{id}"),
        regressors: if id == 1 {
            Vec::new()
        } else {
            CONTROLS.iter().chain(extra).map(|s| s.to_string()).collect()
        },
    };
    let mut out = vec![spec(1, &[]), spec(2, &[])];
    if modes.contains(&Mode::Industry) {
        out.extend([
            spec(3, &["indeci"]),
            spec(4, &["indeci_nbr"]),
            spec(5, &["indeci", "indeci_nbr"]),
        ]);
    }
    if modes.contains(&Mode::Export) {
        out.extend([spec(6, &["eci"]), spec(7, &["eci_nbr"]), spec(8, &["eci", "eci_nbr"])]);
    }
    out
}

/// Applies `section.key=value` overrides; values parse as TOML, falling back to strings.
pub fn apply_overrides(table: &mut Table, overrides: &[String]) -> Result<(), CliError> {
    let mut errors = Vec::new();
    for o in overrides {
        let Some((key, raw)) = o.split_once('=') else {
            errors.push(format!("override {o:?} is not key=value"));
            continue;
        };
        let value = format!("v = {raw}")
            .parse::<Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| Value::String(raw.to_string()));
        let parts: Vec<&str> = key.trim().split('.').collect();
        let (last, path) = parts.split_last().expect("split yields one part");
        if let Err(p) = insert_path(table, path, last, value) {
            errors.push(format!("override {key}: {p} is not a section"));
        }
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(CliError::Config(errors))
    }
}

/// Inserts `value` at `path.last`, creating sections; fails with the first
/// path element that is not a table.
fn insert_path<'p>(table: &mut Table, path: &[&'p str], last: &str, value: Value) -> Result<(), &'p str> {
    match path.split_first() {
        None => {
            table.insert(last.to_string(), value);
            Ok(())
        }
        Some((p, rest)) => match table.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new())) {
            Value::Table(inner) => insert_path(inner, rest, last, value),
            _ => Err(p),
        },
    }
}

struct Section<'a> {
    name: &'static str,
    table: Option<&'a Table>,
    used: BTreeSet<&'static str>,
    base: &'a Path,
    errors: &'a mut Vec<String>,
}

impl<'a> Section<'a> {
    fn new(root: &'a Table, name: &'static str, base: &'a Path, errors: &'a mut Vec<String>) -> Self {
        let table = match root.get(name) {
            Some(Value::Table(t)) => Some(t),
            Some(_) => {
                errors.push(format!("[{name}] must be a section"));
                None
            }
            None => None,
        };
        Self {
            name,
            table,
            used: BTreeSet::new(),
            base,
            errors,
        }
    }

    fn present(&self) -> bool {
        self.table.is_some()
    }

    fn raw(&mut self, key: &'static str) -> Option<&'a Value> {
        self.used.insert(key);
        self.table.and_then(|t| t.get(key))
    }

    fn err(&mut self, key: &str, msg: impl std::fmt::Display) {
        self.errors.push(format!("{}.{key}: {msg}", self.name));
    }

    fn string(&mut self, key: &'static str) -> Option<String> {
        match self.raw(key)? {
            Value::String(s) => Some(s.clone()),
            v => {
                self.err(key, format!("expected a string, got {}", v.type_str()));
                None
            }
        }
    }

    fn path(&mut self, key: &'static str) -> Option<PathBuf> {
        self.string(key).map(|s| self.base.join(s))
    }

    /// A path that must name an existing file.
    fn input(&mut self, key: &'static str, required: bool) -> Option<PathBuf> {
        let p = self.path(key);
        match &p {
            None if required => self.err(key, "required"),
            Some(p) if !p.is_file() => self.err(key, format!("file {} does not exist", p.display())),
            _ => {}
        }
        p
    }

    fn int(&mut self, key: &'static str) -> Option<i64> {
        match self.raw(key)? {
            Value::Integer(i) => Some(*i),
            v => {
                self.err(key, format!("expected an integer, got {}", v.type_str()));
                None
            }
        }
    }

    fn uint(&mut self, key: &'static str, default: usize, min: usize) -> usize {
        match self.int(key) {
            None => default,
            Some(i) if i >= min as i64 => i as usize,
            Some(i) => {
                self.err(key, format!("must be ≥ {min}, got {i}"));
                default
            }
        }
    }

    fn year(&mut self, key: &'static str) -> Option<i32> {
        let i = self.int(key)?;
        if (1000..=9999).contains(&i) {
            Some(i as i32)
        } else {
            self.err(key, format!("{i} is not a four-digit year"));
            None
        }
    }

    fn float(&mut self, key: &'static str, default: f64) -> f64 {
        match self.raw(key) {
            None => default,
            Some(Value::Float(f)) => *f,
            Some(Value::Integer(i)) => *i as f64,
            Some(v) => {
                let t = v.type_str();
                self.err(key, format!("expected a number, got {t}"));
                default
            }
        }
    }

    fn boolean(&mut self, key: &'static str, default: bool) -> bool {
        match self.raw(key) {
            None => default,
            Some(Value::Boolean(b)) => *b,
            Some(v) => {
                let t = v.type_str();
                self.err(key, format!("expected true or false, got {t}"));
                default
            }
        }
    }

    fn list(&mut self, key: &'static str) -> Option<Vec<&'a Value>> {
        match self.raw(key)? {
            Value::Array(a) => Some(a.iter().collect()),
            v => {
                self.err(key, format!("expected a list, got {}", v.type_str()));
                None
            }
        }
    }

    fn strings(&mut self, key: &'static str) -> Option<Vec<String>> {
        let items = self.list(key)?;
        let mut out = Vec::new();
        for v in items {
            match v {
                Value::String(s) => out.push(s.clone()),
                v => self.err(key, format!("expected strings, got {}", v.type_str())),
            }
        }
        Some(out)
    }

    fn choice<T: Copy>(&mut self, key: &'static str, options: &[(&str, T)], default: T) -> T {
        let Some(s) = self.string(key) else { return default };
        match options.iter().find(|(n, _)| *n == s) {
            Some((_, v)) => *v,
            None => {
                let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
                self.err(key, format!("{s:?} is not one of {}", names.join(", ")));
                default
            }
        }
    }

    fn modes(&mut self, key: &'static str, default: &[Mode]) -> Vec<Mode> {
        let Some(names) = self.strings(key) else {
            return default.to_vec();
        };
        let mut out = Vec::new();
        for n in names {
            match n.as_str() {
                "industry" => out.push(Mode::Industry),
                "export" => out.push(Mode::Export),
                other => self.err(key, format!("unknown mode {other:?} (industry, export)")),
            }
        }
        out.sort();
        out.dedup();
        out
    }

    fn finish(self) {
        if let Some(t) = self.table {
            for k in t.keys() {
                if !self.used.contains(k.as_str()) {
                    self.errors.push(format!("{}.{k}: unknown key", self.name));
                }
            }
        }
    }
}

const SECTIONS: [&str; 7] = [
    "run",
    "ingest",
    "complexity",
    "relatedness",
    "spatial",
    "regress",
    "synth",
];

/// Indicators the regression stage can reference.
pub fn known_regressors(modes: &[Mode]) -> BTreeSet<String> {
    let mut s: BTreeSet<String> = ["gdppc", "population", "log_gdppc", "log_population"]
        .map(String::from)
        .into();
    for m in modes {
        s.insert(m.indicator().to_string());
        s.insert(format!("{}_nbr", m.indicator()));
    }
    s
}

/// Validates the configuration for a command. `text` is the config file
/// content (empty when there is none).
pub fn parse(text: &str, source: Option<&Path>, overrides: &[String], needs: Needs) -> Result<Config, CliError> {
    let mut root: Table = text
        .parse()
        .map_err(|e: toml::de::Error| CliError::Config(vec![format!("config syntax: {}", e.message())]))?;
    apply_overrides(&mut root, overrides)?;
    let base = source
        .and_then(Path::parent)
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    let mut errors = Vec::new();
    for k in root.keys() {
        if !SECTIONS.contains(&k.as_str()) {
            errors.push(format!("[{k}]: unknown section"));
        }
    }

    let mut run = Section::new(&root, "run", &base, &mut errors);
    let output = run.path("output").unwrap_or_else(|| base.join("out"));
    let exec = run.choice(
        "exec",
        &[("parallel", Exec::Parallel), ("sequential", Exec::Sequential)],
        Exec::Parallel,
    );
    run.finish();

    let mut s = Section::new(&root, "ingest", &base, &mut errors);
    let ingest = if needs.ingest || s.present() {
        let required = needs.ingest;
        let cfg = IngestConfig {
            industry: s.input("industry", required).unwrap_or_default(),
            exports: s.input("exports", false),
            crosswalk: s.input("crosswalk", false),
            gdp: s.input("gdp", required).unwrap_or_default(),
            population: s.input("population", required).unwrap_or_default(),
            price_index: s.input("price_index", false),
            base_year: s.year("base_year"),
            first_year: s.year("first_year"),
            last_year: s.year("last_year"),
        };
        if let (Some(a), Some(b)) = (cfg.first_year, cfg.last_year) {
            if a > b {
                s.err("first_year", format!("{a} is after last_year {b}"));
            }
        }
        if cfg.price_index.is_some() && cfg.base_year.is_none() {
            s.err("base_year", "required when price_index is given");
        }
        s.finish();
        Some(cfg)
    } else {
        s.finish();
        None
    };

    let mut s = Section::new(&root, "complexity", &base, &mut errors);
    let default_modes: &[Mode] = if ingest.as_ref().is_some_and(|i| i.exports.is_some()) {
        &[Mode::Industry, Mode::Export]
    } else {
        &[Mode::Industry]
    };
    let modes = s.modes("modes", default_modes);
    let complexity = ComplexityConfig {
        rca_threshold: s.float("rca_threshold", 1.0),
        export_shares: s.input("export_shares", false),
        pci: s.input("pci", false),
        dense_limit: s.uint("dense_limit", 2000, 3),
        modes,
    };
    if !(complexity.rca_threshold > 0.0) {
        s.err("rca_threshold", "must be positive");
    }
    if complexity.modes.contains(&Mode::Export) {
        if complexity.pci.is_none() {
            s.err("pci", "required for mode \"export\"");
        }
        if let Some(i) = &ingest {
            if i.exports.is_none() {
                s.err("modes", "mode \"export\" needs ingest.exports");
            }
        }
    }
    if complexity.modes.is_empty() {
        s.err("modes", "at least one mode is required");
    }
    s.finish();

    let mut s = Section::new(&root, "relatedness", &base, &mut errors);
    let rel_modes = s.modes("modes", &complexity.modes);
    for m in &rel_modes {
        if !complexity.modes.contains(m) {
            s.err(
                "modes",
                format!("mode {:?} is not enabled in complexity.modes", m.name()),
            );
        }
    }
    let relatedness = RelatednessConfig {
        modes: rel_modes,
        write_density: s.boolean("write_density", true),
    };
    s.finish();

    let mut s = Section::new(&root, "spatial", &base, &mut errors);
    let spatial = if needs.spatial || s.present() {
        let default_ind: Vec<String> = complexity.modes.iter().map(|m| m.indicator().to_string()).collect();
        let indicators = s.strings("indicators").unwrap_or(default_ind);
        for ind in &indicators {
            if !complexity.modes.iter().any(|m| m.indicator() == ind) {
                s.err(
                    "indicators",
                    format!("{ind:?} is not produced by the configured complexity modes"),
                );
            }
        }
        let cfg = SpatialConfig {
            adjacency: s.input("adjacency", needs.spatial).unwrap_or_default(),
            indicators,
            permutations: s.uint("permutations", 0, 0),
            seed: s.uint("seed", 1, 0) as u64,
            missing_neighbors: s.choice(
                "missing_neighbors",
                &[
                    ("propagate", MissingNeighbors::Propagate),
                    ("subset", MissingNeighbors::Subset),
                ],
                MissingNeighbors::Propagate,
            ),
        };
        s.finish();
        Some(cfg)
    } else {
        s.finish();
        None
    };

    let mut s = Section::new(&root, "regress", &base, &mut errors);
    let horizons: Vec<usize> = match s.list("horizons") {
        None => vec![2, 3, 4],
        Some(items) => {
            let mut h = Vec::new();
            for v in items {
                match v {
                    Value::Integer(i) if *i >= 1 => h.push(*i as usize),
                    v => s.err("horizons", format!("expected positive integers, got {v}")),
                }
            }
            h
        }
    };
    let estimator = s.choice(
        "estimator",
        &[
            ("system-gmm", EstimatorChoice::SystemGmm),
            ("fe", EstimatorChoice::WithinFe),
        ],
        EstimatorChoice::SystemGmm,
    );
    let lags = match s.list("regressor_lags") {
        None => (1, 3),
        Some(items) => match items.as_slice() {
            [Value::Integer(a), Value::Integer(b)] if *a >= 1 && b >= a => (*a as usize, *b as usize),
            _ => {
                s.err("regressor_lags", "expected [first, last] with 1 ≤ first ≤ last");
                (1, 3)
            }
        },
    };
    let gmm = GmmOptions {
        two_step: s.boolean("two_step", true),
        collapse: s.boolean("collapse", true),
        max_lag_depth: s.uint("max_lag_depth", 4, 2),
        regressor_lags: lags,
    };
    let lag_mode = s.choice(
        "lag_mode",
        &[
            ("non-overlapping", LagMode::NonOverlapping),
            ("one-year", LagMode::OneYear),
        ],
        LagMode::NonOverlapping,
    );
    let year_effects = s.boolean("year_effects", true);
    let known = known_regressors(&complexity.modes);
    let specs = match s.raw("specs") {
        None => default_specs(&complexity.modes),
        Some(Value::Array(items)) => {
            let mut out = Vec::new();
            for (k, item) in items.iter().enumerate() {
                let Value::Table(t) = item else {
                    s.err("specs", format!("entry {k} must be a table"));
                    continue;
                };
                let id = match t.get("id") {
                    Some(Value::String(id)) => id.clone(),
                    _ => format!("s{}", k + 1),
                };
                let regressors: Vec<String> = match t.get("regressors") {
                    Some(Value::Array(a)) => a.iter().filter_map(|v| v.as_str().map(String::from)).collect(),
                    None => Vec::new(),
                    _ => {
                        s.err("specs", format!("{id}: regressors must be a list of strings"));
                        Vec::new()
                    }
                };
                for key in t.keys().filter(|k| *k != "id" && *k != "regressors") {
                    s.err("specs", format!("{id}: unknown key {key}"));
                }
                for r in &regressors {
                    if !known.contains(r) {
                        s.err(
                            "specs",
                            format!(
                                "{id}: indicator {r:?} is not available (known: {})",
                                known.iter().cloned().collect::<Vec<_>>().join(", ")
                            ),
                        );
                    }
                }
                out.push(RegressSpec { id, regressors });
            }
            out
        }
        Some(_) => {
            s.err("specs", "expected a list of tables");
            Vec::new()
        }
    };
    let ids: BTreeSet<&str> = specs.iter().map(|s| s.id.as_str()).collect();
    if ids.len() != specs.len() {
        s.err("specs", "spec ids must be unique");
    }
    let regress = RegressConfig {
        horizons,
        estimator,
        gmm,
        lag_mode,
        year_effects,
        specs,
    };
    s.finish();

    // the synth section is read by its own command
    let _ = root.get("synth");

    if !errors.is_empty() {
        return Err(CliError::Config(errors));
    }
    let mut digest_input = text.as_bytes().to_vec();
    for o in overrides {
        digest_input.push(b'\n');
        digest_input.extend_from_slice(o.as_bytes());
    }
    Ok(Config {
        source: source.map(Path::to_path_buf),
        digest_input,
        output,
        exec,
        ingest,
        complexity,
        relatedness,
        spatial,
        regress,
    })
}
