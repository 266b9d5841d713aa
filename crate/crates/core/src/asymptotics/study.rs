use std::io::Write;

use rayon::prelude::*;

use super::fit::{fit_power_law, FitResult, FitWindow};
use super::{AsymptoticsError, FEM_WINDOW_FRACTION};
use crate::fem::{
    assemble, solve, solve_enriched, ConductivityField, DensitySample, EnrichmentOptions, Mesh, SolverOptions,
};
use crate::geometry::{CurrentPattern, ElectrodeLayout, GeometryError};
use crate::hilbert_oracle::{MappedOracle, OracleError};

/// Number of log-spaced points at which a density profile is fitted.
const FIT_POINTS: usize = 32;

fn log_spaced(window: FitWindow, n: usize) -> impl Iterator<Item = f64> {
    let (lo, hi) = (window.d_min.ln(), window.d_max.ln());
    (0..n).map(move |i| (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp())
}

fn owning_arc(layout: &ElectrodeLayout, edge: f64) -> Result<(usize, f64), GeometryError> {
    layout
        .arcs
        .iter()
        .enumerate()
        .find_map(|(k, a)| {
            if a.start == edge {
                Some((k, 1.0))
            } else if a.end == edge {
                Some((k, -1.0))
            } else {
                None
            }
        })
        .ok_or(GeometryError::NotAnEndpoint(edge))
}

/// `(dist, |density|)` of a recovered density near the endpoint `edge`, read
/// off the piecewise-linear profile at log-spaced distances in `window`.
/// Distances beyond the last node on that half of the electrode are skipped.
pub fn edge_samples(
    density: &[DensitySample],
    layout: &ElectrodeLayout,
    edge: f64,
    window: FitWindow,
) -> Result<Vec<(f64, f64)>, GeometryError> {
    let (k, _) = owning_arc(layout, edge)?;
    let half = 0.5 * layout.arcs[k].length();
    let mut nodes: Vec<(f64, f64)> = density
        .iter()
        .filter(|d| d.electrode == k)
        .map(|d| ((d.s - edge).abs(), d.value))
        .filter(|&(d, _)| d <= half)
        .collect();
    nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = Vec::new();
    for d in log_spaced(window, FIT_POINTS) {
        let j = nodes.partition_point(|&(x, _)| x < d);
        if j == 0 || j == nodes.len() {
            if j < nodes.len() && nodes[j].0 == d {
                out.push((d, nodes[j].1.abs()));
            }
            continue;
        }
        let (x0, y0) = nodes[j - 1];
        let (x1, y1) = nodes[j];
        let t = (d - x0) / (x1 - x0);
        out.push((d, (y0 + t * (y1 - y0)).abs()));
    }
    Ok(out)
}

/// `(dist, |density|)` of the oracle at log-spaced distances from `edge`
/// into its electrode.
pub fn oracle_edge_samples(
    oracle: &MappedOracle,
    edge: f64,
    window: FitWindow,
    n: usize,
) -> Result<Vec<(f64, f64)>, OracleError> {
    let (_, direction) = owning_arc(oracle.layout(), edge)?;
    log_spaced(window, n)
        .map(|d| Ok((d, oracle.density(edge + direction * d)?.abs())))
        .collect()
}

/// Weighted discrete L2 error of `density` against `reference` over the
/// samples accepted by `weight`, which maps `(dist, electrode length)` to a
/// weight factor. Weights are trapezoidal in `s` within each electrode.
/// Relative to the reference norm unless that norm vanishes; NaN when no
/// sample is selected.
fn weighted_error(
    density: &[DensitySample],
    layout: &ElectrodeLayout,
    reference: &dyn Fn(f64) -> Result<f64, OracleError>,
    weight: impl Fn(f64, f64) -> Option<f64>,
) -> Result<f64, OracleError> {
    let (mut num, mut den, mut used) = (0.0, 0.0, 0);
    for (k, arc) in layout.arcs.iter().enumerate() {
        let mut rows: Vec<&DensitySample> = density.iter().filter(|d| d.electrode == k).collect();
        rows.sort_by(|a, b| a.s.total_cmp(&b.s));
        for (i, d) in rows.iter().enumerate() {
            let Some(factor) = weight(d.dist_to_edge, arc.length()) else {
                continue;
            };
            let left = if i > 0 { d.s - rows[i - 1].s } else { 0.0 };
            let right = if i + 1 < rows.len() { rows[i + 1].s - d.s } else { 0.0 };
            let w = 0.5 * (left + right) * factor;
            used += 1;
            let exact = reference(d.s)?;
            num += w * (d.value - exact).powi(2);
            den += w * exact * exact;
        }
    }
    Ok(if used == 0 {
        f64::NAN
    } else if den > 0.0 {
        (num / den).sqrt()
    } else {
        num.sqrt()
    })
}

/// Density error within `cut * |E|` of the electrode edges, weighted by the
/// distance to the edge so that the `dist^(-1/2)` blow-up has finite norm.
/// Samples at the endpoints themselves carry zero weight.
pub fn near_edge_error(
    density: &[DensitySample],
    layout: &ElectrodeLayout,
    reference: &dyn Fn(f64) -> Result<f64, OracleError>,
    cut: f64,
) -> Result<f64, OracleError> {
    weighted_error(density, layout, reference, |d, len| {
        (d > 0.0 && d <= cut * len).then_some(d)
    })
}

/// Plain L2 density error over samples at least `away * |E|` from the edges.
pub fn away_from_edge_error(
    density: &[DensitySample],
    layout: &ElectrodeLayout,
    reference: &dyn Fn(f64) -> Result<f64, OracleError>,
    away: f64,
) -> Result<f64, OracleError> {
    weighted_error(density, layout, reference, |d, len| (d >= away * len).then_some(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyOptions {
    /// Endpoint whose density is fitted.
    pub edge: f64,
    /// Fit window as fractions of the electrode length.
    pub window_fraction: (f64, f64),
    /// Samples at least this fraction of `|E|` from the edges enter the L2 error.
    pub away_fraction: f64,
    pub enriched: bool,
    pub solver: SolverOptions,
}

impl StudyOptions {
    pub fn new(edge: f64) -> Self {
        StudyOptions {
            edge,
            window_fraction: FEM_WINDOW_FRACTION,
            away_fraction: 0.1,
            enriched: false,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub dofs: usize,
    pub l2_error: f64,
    /// `None` when the density cannot be fitted (too few samples, or zero density).
    pub fit: Option<FitResult>,
}

/// Solves on every mesh (concurrently) and tabulates the density error away
/// from the edges and the power-law fit near `options.edge`, sorted by DOFs.
pub fn convergence_study(
    meshes: &[Mesh],
    sigma: &dyn ConductivityField,
    currents: &CurrentPattern,
    reference: &MappedOracle,
    options: &StudyOptions,
) -> Result<Vec<StudyRow>, AsymptoticsError> {
    if meshes.len() < 3 {
        return Err(AsymptoticsError::TooFewMeshes(meshes.len()));
    }
    let layout = reference.layout();
    let (k, _) = owning_arc(layout, options.edge)?;
    let window = FitWindow::scaled(options.window_fraction, layout.arcs[k].length())?;
    let exact = |s: f64| reference.density(s);
    let mut rows = meshes
        .par_iter()
        .map(|mesh| {
            let (density, dofs) = if options.enriched {
                let en = solve_enriched(
                    mesh,
                    sigma,
                    None,
                    currents.values(),
                    &EnrichmentOptions {
                        radius: None,
                        solver: options.solver,
                    },
                )?;
                (en.solution.density, en.solution.dofs.len())
            } else {
                let system = assemble(mesh, sigma, None, currents.values())?;
                let sol = solve(mesh, &system, &options.solver)?;
                (sol.density, system.n_dofs())
            };
            let l2_error = away_from_edge_error(&density, layout, &exact, options.away_fraction)?;
            let samples = edge_samples(&density, layout, options.edge, window)?;
            let fit = fit_power_law(&samples, window).ok();
            Ok(StudyRow { dofs, l2_error, fit })
        })
        .collect::<Result<Vec<_>, AsymptoticsError>>()?;
    rows.sort_by_key(|r| r.dofs);
    Ok(rows)
}

/// CSV with header `dofs,l2_error,exponent,coefficient,r_squared`; fit
/// columns are empty when no fit exists.
pub fn write_study_csv(rows: &[StudyRow], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "dofs,l2_error,exponent,coefficient,r_squared")?;
    for r in rows {
        match r.fit {
            Some(f) => writeln!(
                w,
                "{},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.dofs, r.l2_error, f.exponent, f.coefficient, f.r_squared
            )?,
            None => writeln!(w, "{},{:.16e},,,", r.dofs, r.l2_error)?,
        }
    }
    Ok(())
}
