//! Artifact writers. Numbers carry 17 significant digits; lines end in LF.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use cemlab_core::geometry::CurrentPattern;
use cemlab_core::hilbert_oracle::ProfileRow;
use cemlab_core::registry::EdgeEstimate;

use crate::error::CliError;

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub struct OutDir {
    dir: PathBuf,
    verbose: bool,
}

impl OutDir {
    pub fn create(dir: &Path, verbose: bool) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(OutDir {
            dir: dir.to_owned(),
            verbose,
        })
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, contents)?;
        if self.verbose {
            eprintln!("wrote {}", path.display());
        }
        Ok(())
    }
}

pub fn density_csv(rows: &[ProfileRow]) -> String {
    let mut out = String::from("s,dist_to_edge,density,tangential_derivative\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            num(r.s),
            num(r.dist_to_edge),
            opt(r.density),
            opt(r.tangential_derivative)
        );
    }
    out
}

pub fn potentials_csv(currents: &CurrentPattern, potentials: &[f64], fluxes: &[f64]) -> String {
    let mut out = String::from("electrode,current,potential,flux\n");
    for (i, ((j, u), f)) in currents.values().iter().zip(potentials).zip(fluxes).enumerate() {
        let _ = writeln!(out, "{i},{},{},{}", num(*j), num(*u), num(*f));
    }
    out
}

pub fn edges_csv(edges: &[EdgeEstimate]) -> String {
    let mut out = String::from("s,electrode,exponent,coefficient\n");
    for e in edges {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            num(e.s),
            e.electrode,
            opt(e.exponent),
            opt(e.coefficient)
        );
    }
    out
}

/// Plain `key: value` report, one entry per line.
#[derive(Default)]
pub struct Report(String);

impl Report {
    pub fn line(&mut self, key: &str, value: impl std::fmt::Display) -> &mut Self {
        let _ = writeln!(self.0, "{key}: {value}");
        self
    }

    pub fn finish(&self) -> &str {
        &self.0
    }
}

pub fn pass_fail(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}
