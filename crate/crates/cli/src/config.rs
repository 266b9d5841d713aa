//! Run configuration: TOML with dotted keys, e.g.
//!
//! ```toml
//! domain.kind = "disc"
//! electrodes.0.start = 0.3926990816987241
//! electrodes.0.end = 1.1780972450961724
//! electrodes.1.start = 1.9634954084936207
//! electrodes.1.end = 2.748893571891069
//! currents = [1.0, -1.0]
//! ```
//!
//! Every accessor reports failures against the dotted key that caused them.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use cemlab_core::asymptotics::{FitWindow, FEM_WINDOW_FRACTION};
use cemlab_core::fem::{conductivity_by_name, ConductivityField, Grading, SolverOptions};
use cemlab_core::geometry::{validate_layout, Arc, CurrentPattern, DomainSpec, ElectrodeLayout};
use toml::{Table, Value};

use crate::error::CliError;

/// Leaf keys that may appear; `N` stands for an index.
const KNOWN_KEYS: &[&str] = &[
    "domain.kind",
    "domain.angle",
    "domain.radius",
    "electrodes.N.start",
    "electrodes.N.end",
    "currents",
    "currents.N",
    "conductivity.kind",
    "conductivity.scale",
    "grading.h_max",
    "grading.ratio",
    "grading.levels",
    "grading.slope",
    "fit.window",
    "fit.edge",
    "fit.input",
    "fit.length",
    "solver.kind",
    "solver.rel_tol",
    "solver.max_iter",
    "convergence.meshes.N.h_max",
    "convergence.meshes.N.ratio",
    "convergence.meshes.N.levels",
    "convergence.meshes.N.slope",
    "convergence.enriched",
    "convergence.away",
    "output.profile_points",
    "output.mesh",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    Disc,
    HalfPlane,
    Wedge,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    table: Table,
    /// Directory that relative paths in the file are resolved against.
    base: PathBuf,
}

fn collect_leaves(prefix: &str, value: &Value, out: &mut Vec<String>) {
    let join = |k: &str| {
        let k = if k.parse::<usize>().is_ok() { "N" } else { k };
        if prefix.is_empty() {
            k.to_owned()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match value {
        Value::Table(t) => {
            for (k, v) in t {
                collect_leaves(&join(k), v, out);
            }
        }
        Value::Array(items) if items.iter().all(Value::is_table) && !items.is_empty() => {
            for item in items {
                collect_leaves(&join("0"), item, out);
            }
        }
        _ => out.push(prefix.to_owned()),
    }
}

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Float(x) => Some(*x),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

impl RunConfig {
    pub fn from_str(text: &str, base: &Path) -> Result<Self, CliError> {
        let table: Table = text.parse().map_err(|e: toml::de::Error| {
            let what = e.message().to_owned();
            let at = e
                .span()
                .map(|s| {
                    let line = text[..s.start].matches('\n').count() + 1;
                    format!(" (line {line})")
                })
                .unwrap_or_default();
            CliError::config("config", format!("{what}{at}"))
        })?;
        let mut leaves = Vec::new();
        collect_leaves("", &Value::Table(table.clone()), &mut leaves);
        if let Some(unknown) = leaves.iter().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
            return Err(CliError::config(unknown.clone(), "unknown key"));
        }
        Ok(RunConfig {
            table,
            base: base.to_owned(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config("--config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_str(&text, path.parent().unwrap_or(Path::new(".")))
    }

    fn get(&self, key: &str) -> Option<&Value> {
        let mut parts = key.split('.');
        let mut cur = self.table.get(parts.next()?)?;
        for p in parts {
            cur = match cur {
                Value::Table(t) => t.get(p)?,
                Value::Array(a) => a.get(p.parse::<usize>().ok()?)?,
                _ => return None,
            };
        }
        Some(cur)
    }

    fn float(&self, key: &str) -> Result<Option<f64>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => match as_f64(v) {
                Some(x) if x.is_finite() => Ok(Some(x)),
                _ => Err(CliError::config(key, "expected a finite number")),
            },
        }
    }

    fn positive(&self, key: &str, default: f64) -> Result<f64, CliError> {
        let x = self.float(key)?.unwrap_or(default);
        if x > 0.0 {
            Ok(x)
        } else {
            Err(CliError::config(key, format!("must be positive, got {x}")))
        }
    }

    fn count(&self, key: &str, default: usize) -> Result<usize, CliError> {
        match self.get(key) {
            None => Ok(default),
            Some(Value::Integer(i)) if *i >= 0 => Ok(*i as usize),
            Some(_) => Err(CliError::config(key, "expected a non-negative integer")),
        }
    }

    fn boolean(&self, key: &str, default: bool) -> Result<bool, CliError> {
        match self.get(key) {
            None => Ok(default),
            Some(Value::Boolean(b)) => Ok(*b),
            Some(_) => Err(CliError::config(key, "expected true or false")),
        }
    }

    fn string(&self, key: &str) -> Result<Option<&str>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(_) => Err(CliError::config(key, "expected a string")),
        }
    }

    /// Entries of an indexed section, given either as `key.0`, `key.1`, ...
    /// or as an array. Indices must be `0..n` without gaps.
    fn indexed(&self, key: &str) -> Result<Vec<&Value>, CliError> {
        match self.get(key) {
            None => Ok(Vec::new()),
            Some(Value::Array(items)) => Ok(items.iter().collect()),
            Some(Value::Table(t)) => {
                let mut entries = BTreeMap::new();
                for (k, v) in t {
                    let i: usize = k
                        .parse()
                        .map_err(|_| CliError::config(format!("{key}.{k}"), "expected an integer index"))?;
                    entries.insert(i, v);
                }
                if let Some((i, _)) = entries.iter().enumerate().find(|(n, (i, _))| *n != **i) {
                    return Err(CliError::config(
                        format!("{key}.{i}"),
                        "indices must run 0, 1, 2, ... without gaps",
                    ));
                }
                Ok(entries.into_values().collect())
            }
            Some(_) => Err(CliError::config(key, "expected an array or an indexed table")),
        }
    }

    pub fn domain_kind(&self) -> Result<DomainKind, CliError> {
        match self.string("domain.kind")? {
            Some("disc") => Ok(DomainKind::Disc),
            Some("half-plane") => Ok(DomainKind::HalfPlane),
            Some("wedge") => Ok(DomainKind::Wedge),
            Some(other) => Err(CliError::config(
                "domain.kind",
                format!("unknown domain `{other}` (expected disc, half-plane or wedge)"),
            )),
            None => Err(CliError::config("domain.kind", "missing")),
        }
    }

    pub fn domain(&self) -> Result<DomainSpec, CliError> {
        match self.domain_kind()? {
            DomainKind::Disc => Ok(DomainSpec::UnitDisc),
            DomainKind::HalfPlane => Ok(DomainSpec::UpperHalfPlane),
            DomainKind::Wedge => {
                let angle = self
                    .float("domain.angle")?
                    .ok_or_else(|| CliError::config("domain.angle", "missing (radians)"))?;
                let radius = self.positive("domain.radius", 1.0)?;
                DomainSpec::wedge(angle, radius).map_err(|e| CliError::config("domain.angle", e))
            }
        }
    }

    pub fn layout(&self, domain: &DomainSpec) -> Result<ElectrodeLayout, CliError> {
        let mut arcs = Vec::new();
        for (i, _) in self.indexed("electrodes")?.iter().enumerate() {
            let end = |name: &str| {
                let key = format!("electrodes.{i}.{name}");
                self.float(&key)?.ok_or_else(|| CliError::config(key, "missing"))
            };
            arcs.push(Arc::new(end("start")?, end("end")?));
        }
        if arcs.is_empty() {
            return Err(CliError::config("electrodes", "at least one electrode is required"));
        }
        let layout = ElectrodeLayout::new(arcs);
        validate_layout(&layout, domain).map_err(|e| CliError::config("electrodes", e))?;
        Ok(layout)
    }

    pub fn currents(&self, layout: &ElectrodeLayout) -> Result<CurrentPattern, CliError> {
        let values = self
            .indexed("currents")?
            .into_iter()
            .enumerate()
            .map(|(i, v)| as_f64(v).ok_or_else(|| CliError::config(format!("currents.{i}"), "expected a number")))
            .collect::<Result<Vec<_>, _>>()?;
        if values.len() != layout.len() {
            return Err(CliError::config(
                "currents",
                format!("{} currents for {} electrodes", values.len(), layout.len()),
            ));
        }
        CurrentPattern::new(values).map_err(|e| CliError::config("currents", e))
    }

    pub fn conductivity(&self) -> Result<Box<dyn ConductivityField>, CliError> {
        let kind = self.string("conductivity.kind")?.unwrap_or("constant");
        let scale = self.positive("conductivity.scale", 1.0)?;
        conductivity_by_name(kind, scale).map_err(|e| CliError::config("conductivity.kind", e))
    }

    fn grading_at(&self, prefix: &str, base: Grading) -> Result<Grading, CliError> {
        let key = |k: &str| format!("{prefix}.{k}");
        let g = Grading {
            h_max: self.positive(&key("h_max"), base.h_max)?,
            ratio: self.positive(&key("ratio"), base.ratio)?,
            levels: self.count(&key("levels"), base.levels as usize)? as u32,
            slope: self.positive(&key("slope"), base.slope)?,
            band: None,
        };
        g.validate().map_err(|e| CliError::config(prefix, e))?;
        Ok(g)
    }

    pub fn grading(&self) -> Result<Grading, CliError> {
        self.grading_at("grading", Grading::default())
    }

    /// Meshes of a convergence study; unset keys fall back to `grading.*`.
    pub fn study_gradings(&self) -> Result<Vec<Grading>, CliError> {
        let base = self.grading()?;
        let n = self.indexed("convergence.meshes")?.len();
        if n < 3 {
            return Err(CliError::config(
                "convergence.meshes",
                format!("need at least 3 meshes, got {n}"),
            ));
        }
        (0..n)
            .map(|i| self.grading_at(&format!("convergence.meshes.{i}"), base))
            .collect()
    }

    pub fn study_enriched(&self) -> Result<bool, CliError> {
        self.boolean("convergence.enriched", false)
    }

    pub fn study_away(&self) -> Result<f64, CliError> {
        self.positive("convergence.away", 0.1)
    }

    /// Fit window as fractions of a reference length.
    pub fn window_fraction(&self) -> Result<(f64, f64), CliError> {
        let Some(v) = self.get("fit.window") else {
            return Ok(FEM_WINDOW_FRACTION);
        };
        let pair = match v {
            Value::Array(a) if a.len() == 2 => a.iter().map(as_f64).collect::<Option<Vec<_>>>(),
            _ => None,
        }
        .ok_or_else(|| CliError::config("fit.window", "expected [lo, hi]"))?;
        FitWindow::new(pair[0], pair[1]).map_err(|e| CliError::config("fit.window", e))?;
        Ok((pair[0], pair[1]))
    }

    pub fn fit_length(&self) -> Result<f64, CliError> {
        self.positive("fit.length", 1.0)
    }

    /// `fit.edge` if set (must be an endpoint), otherwise `default`.
    pub fn fit_edge(&self, layout: &ElectrodeLayout, default: f64) -> Result<f64, CliError> {
        match self.float("fit.edge")? {
            None => Ok(default),
            Some(s) if layout.endpoints().contains(&s) => Ok(s),
            Some(s) => Err(CliError::config(
                "fit.edge",
                format!("{s} is not an electrode endpoint"),
            )),
        }
    }

    pub fn fit_input(&self) -> Result<PathBuf, CliError> {
        let rel = self
            .string("fit.input")?
            .ok_or_else(|| CliError::config("fit.input", "missing"))?;
        Ok(self.base.join(rel))
    }

    pub fn solver_kind(&self) -> Result<&str, CliError> {
        Ok(self.string("solver.kind")?.unwrap_or("fem"))
    }

    pub fn solver_options(&self) -> Result<SolverOptions, CliError> {
        let d = SolverOptions::default();
        let rel_tol = self.positive("solver.rel_tol", d.rel_tol)?;
        if rel_tol > d.fail_tol {
            return Err(CliError::config(
                "solver.rel_tol",
                format!("must not exceed the failure threshold {:e}", d.fail_tol),
            ));
        }
        Ok(SolverOptions {
            rel_tol,
            max_iter: self.count("solver.max_iter", d.max_iter)?,
            ..d
        })
    }

    pub fn profile_points(&self) -> Result<usize, CliError> {
        match self.count("output.profile_points", 64)? {
            n if n >= 2 => Ok(n),
            _ => Err(CliError::config("output.profile_points", "must be at least 2")),
        }
    }

    pub fn write_mesh(&self) -> Result<bool, CliError> {
        self.boolean("output.mesh", false)
    }
}
