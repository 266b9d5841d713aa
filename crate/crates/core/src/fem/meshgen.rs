//! Graded triangulation of the disc and of wedges.
//!
//! Boundary points are placed by marching from every electrode endpoint and
//! corner with the step `grading.size_at(dist)`. Interior seeds are laid on
//! rings around each endpoint (spacing following the same size law) and on a
//! triangular lattice of spacing `h_max` elsewhere. A constrained Delaunay
//! triangulation of these points is then refined for angle quality; Steiner
//! points landing on the polygonal boundary are moved onto the true curve.

use std::collections::{HashMap, HashSet};
use std::f64::consts::PI;

use num_complex::Complex64;
use spade::{AngleLimit, ConstrainedDelaunayTriangulation, Point2, RefinementParameters, Triangulation};

use super::mesh::{param_midpoint, BoundaryEdge, BoundaryLabel, Grading, Mesh};
use super::FemError;
use crate::geometry::{validate_layout, DomainSpec, ElectrodeLayout};

/// Minimum interior angle accepted from the generator.
pub const MIN_ANGLE_DEG: f64 = 15.0;
const REFINE_ANGLE_DEG: f64 = 25.0;

pub fn generate_graded_mesh(
    domain: &DomainSpec,
    layout: &ElectrodeLayout,
    grading: &Grading,
) -> Result<Mesh, FemError> {
    if matches!(domain, DomainSpec::UpperHalfPlane) {
        return Err(FemError::UnboundedDomain);
    }
    domain.validate()?;
    validate_layout(layout, domain).map_err(FemError::LayoutConflict)?;
    grading.validate()?;

    let boundary_s = boundary_parameters(domain, layout, grading);
    let mut points: Vec<Complex64> = boundary_s
        .iter()
        .map(|&s| domain.boundary_point(s).expect("parameter in range"))
        .collect();
    let nb = points.len();
    points.extend(interior_seeds(domain, layout, grading, &points));

    let vertices: Vec<Point2<f64>> = points.iter().map(|p| Point2::new(p.re, p.im)).collect();
    let edges: Vec<[usize; 2]> = (0..nb).map(|i| [i, (i + 1) % nb]).collect();
    let mut cdt = ConstrainedDelaunayTriangulation::<Point2<f64>>::bulk_load_cdt(vertices, edges)
        .map_err(|e| FemError::MeshGeneration(format!("{e:?}")))?;
    if cdt.num_vertices() != points.len() {
        return Err(FemError::MeshGeneration("duplicate seed points".into()));
    }
    let h = grading.h_max;
    let params = RefinementParameters::<f64>::new()
        .with_angle_limit(AngleLimit::from_deg(REFINE_ANGLE_DEG))
        .with_max_allowed_area(0.3 * 3f64.sqrt() * h * h)
        .with_max_additional_vertices(4 * points.len() + 10_000)
        .exclude_outer_faces(true);
    let result = cdt.refine(params);
    if !result.refinement_complete {
        return Err(FemError::MeshGeneration("refinement did not complete".into()));
    }
    let excluded: HashSet<usize> = result.excluded_faces.iter().map(|f| f.index()).collect();

    let mut triangles = Vec::new();
    for face in cdt.inner_faces() {
        if excluded.contains(&face.fix().index()) {
            continue;
        }
        let [a, b, c] = face.vertices();
        triangles.push([a.fix().index(), b.fix().index(), c.fix().index()]);
    }

    // compact vertex numbering in insertion order
    let mut used = vec![false; cdt.num_vertices()];
    for t in &triangles {
        for &v in t {
            used[v] = true;
        }
    }
    let mut new_index = vec![usize::MAX; used.len()];
    let mut vertices = Vec::new();
    for (v, vertex) in cdt.vertices().enumerate() {
        if used[v] {
            new_index[v] = vertices.len();
            let p = vertex.position();
            vertices.push([p.x, p.y]);
        }
    }
    for t in &mut triangles {
        for v in t.iter_mut() {
            *v = new_index[*v];
        }
    }
    let mut vertex_s = vec![None; vertices.len()];
    for (i, &s) in boundary_s.iter().enumerate() {
        if new_index[i] != usize::MAX {
            vertex_s[new_index[i]] = Some(s);
        }
    }

    let directed: HashSet<(usize, usize)> = triangles
        .iter()
        .flat_map(|t| (0..3).map(move |i| (t[i], t[(i + 1) % 3])))
        .collect();
    let mut boundary_pairs: Vec<(usize, usize)> = directed
        .iter()
        .filter(|&&(a, b)| !directed.contains(&(b, a)))
        .copied()
        .collect();
    boundary_pairs.sort_unstable();
    for &(a, b) in &boundary_pairs {
        for v in [a, b] {
            if vertex_s[v].is_none() {
                let p = Complex64::new(vertices[v][0], vertices[v][1]);
                let s = domain.project_to_boundary(p);
                let q = domain.boundary_point(s)?;
                vertices[v] = [q.re, q.im];
                vertex_s[v] = Some(s);
            }
        }
    }
    let boundary = boundary_pairs
        .into_iter()
        .map(|(a, b)| {
            let mid = param_midpoint(domain, vertex_s[a].unwrap(), vertex_s[b].unwrap());
            let label = match layout.electrode_at(mid) {
                Some(k) => BoundaryLabel::Electrode(k),
                None => BoundaryLabel::Insulated,
            };
            BoundaryEdge { v: [a, b], label }
        })
        .collect();

    let mesh = Mesh {
        vertices,
        triangles,
        boundary,
        vertex_s,
        domain: *domain,
        layout: layout.clone(),
        grading: *grading,
    };
    mesh.validate(MIN_ANGLE_DEG)?;
    Ok(mesh)
}

/// Boundary parameters in increasing order, including every electrode
/// endpoint and corner.
fn boundary_parameters(domain: &DomainSpec, layout: &ElectrodeLayout, grading: &Grading) -> Vec<f64> {
    let len = domain.boundary_length().expect("bounded domain");
    let mut breaks: Vec<f64> = layout
        .endpoints()
        .into_iter()
        .chain(domain.corner_params())
        .map(|s| if s >= len { s - len } else { s })
        .collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    if breaks.is_empty() {
        breaks.push(0.0);
    }
    let size = |s: f64| {
        let d = layout
            .dist_to_nearest_edge(domain, s.rem_euclid(len))
            .unwrap_or(f64::INFINITY);
        grading.size_at(d)
    };
    let mut out = Vec::new();
    for (k, &p) in breaks.iter().enumerate() {
        let q = if k + 1 < breaks.len() {
            breaks[k + 1]
        } else {
            breaks[0] + len
        };
        out.push(p);
        for s in march(p, q, size) {
            out.push(if s >= len { s - len } else { s });
        }
    }
    out
}

/// Points strictly between `p` and `q`, stepping inward from both ends.
fn march(p: f64, q: f64, size: impl Fn(f64) -> f64) -> Vec<f64> {
    let mid = 0.5 * (p + q);
    let mut fwd = Vec::new();
    let mut s = p;
    loop {
        s += size(s);
        if s >= mid {
            break;
        }
        fwd.push(s);
    }
    let mut bwd = Vec::new();
    s = q;
    loop {
        s -= size(s);
        if s <= mid {
            break;
        }
        bwd.push(s);
    }
    let b = bwd.last().copied().unwrap_or(q);
    let mut a = fwd.last().copied().unwrap_or(p);
    let h = size(a).min(size(b));
    if b - a < 0.5 * h && !fwd.is_empty() {
        // merge the short middle gap into its neighbour
        fwd.pop();
        a = fwd.last().copied().unwrap_or(p);
    }
    // split what is left evenly, no piece longer than the local size
    let pieces = ((b - a) / h * (1.0 - 1e-9)).ceil().max(1.0) as usize;
    fwd.extend((1..pieces).map(|i| a + (b - a) * i as f64 / pieces as f64));
    bwd.reverse();
    fwd.extend(bwd);
    fwd
}

/// Interior seeds, kept at least a fraction of the local size away from the
/// boundary and from each other. The first layer sits at the apex of an
/// equilateral triangle over every boundary segment, which keeps the stencils
/// of boundary vertices regular.
fn interior_seeds(
    domain: &DomainSpec,
    layout: &ElectrodeLayout,
    grading: &Grading,
    boundary: &[Complex64],
) -> Vec<Complex64> {
    let endpoints: Vec<Complex64> = layout
        .endpoints()
        .into_iter()
        .map(|s| domain.boundary_point(s).expect("endpoint on boundary"))
        .collect();
    let size = |p: Complex64| {
        let d = endpoints.iter().map(|e| (p - e).norm()).fold(f64::INFINITY, f64::min);
        grading.size_at(d)
    };
    let mut grid = SeedGrid::default();
    let nb = boundary.len();
    for i in 0..nb {
        let (a, b) = (boundary[i], boundary[(i + 1) % nb]);
        let len = (b - a).norm();
        // the domain lies to the left of the positively oriented boundary
        let apex = 0.5 * (a + b) + Complex64::i() * (b - a) * (0.5 * 3f64.sqrt());
        if domain.contains(apex) && domain.distance_to_boundary(apex) >= 0.5 * len && !grid.conflicts(apex, 0.6 * len) {
            grid.insert(apex, len);
        }
    }
    let accept = |p: Complex64, grid: &mut SeedGrid| {
        let h = size(p);
        if domain.contains(p) && domain.distance_to_boundary(p) >= 0.6 * h && !grid.conflicts(p, 0.6 * h) {
            grid.insert(p, h);
        }
    };
    let (h_min, h_max) = (grading.h_min(), grading.h_max);
    if h_min < h_max {
        for &e in &endpoints {
            let mut r = grading.size_at(0.0);
            while r < 1.2 * grading.graded_reach() {
                let h = grading.size_at(r);
                let m = ((2.0 * PI * r / h).ceil() as usize).max(6);
                let offset = 0.5 * (r / h_min).ln();
                for j in 0..m {
                    let t = offset + 2.0 * PI * j as f64 / m as f64;
                    accept(e + Complex64::from_polar(r, t), &mut grid);
                }
                r += h;
            }
        }
    }
    let (lo, hi) = bounding_box(domain);
    let dy = 0.5 * 3f64.sqrt() * h_max;
    let rows = ((hi.im - lo.im) / dy).ceil() as i64;
    let cols = ((hi.re - lo.re) / h_max).ceil() as i64 + 1;
    for i in 0..=rows {
        let y = lo.im + i as f64 * dy;
        let shift = if i % 2 == 0 { 0.0 } else { 0.5 * h_max };
        for j in 0..=cols {
            let p = Complex64::new(lo.re + shift + j as f64 * h_max, y);
            accept(p, &mut grid);
        }
    }
    grid.points
}

fn bounding_box(domain: &DomainSpec) -> (Complex64, Complex64) {
    match *domain {
        DomainSpec::Wedge { angle, radius } => {
            let mut lo = Complex64::new(0.0, 0.0);
            let mut hi = lo;
            for k in 0..=256 {
                let p = Complex64::from_polar(radius, angle * k as f64 / 256.0);
                lo = Complex64::new(lo.re.min(p.re), lo.im.min(p.im));
                hi = Complex64::new(hi.re.max(p.re), hi.im.max(p.im));
            }
            (lo, hi)
        }
        _ => (Complex64::new(-1.0, -1.0), Complex64::new(1.0, 1.0)),
    }
}

/// Points bucketed by size class so proximity queries stay local.
#[derive(Default)]
struct SeedGrid {
    points: Vec<Complex64>,
    cells: HashMap<(i32, i64, i64), Vec<usize>>,
}

impl SeedGrid {
    fn level(h: f64) -> i32 {
        h.log2().floor() as i32
    }

    fn cell(p: Complex64, level: i32) -> (i64, i64) {
        let w = 2f64.powi(level);
        ((p.re / w).floor() as i64, (p.im / w).floor() as i64)
    }

    fn insert(&mut self, p: Complex64, h: f64) {
        let level = Self::level(h);
        let (i, j) = Self::cell(p, level);
        self.cells.entry((level, i, j)).or_default().push(self.points.len());
        self.points.push(p);
    }

    fn conflicts(&self, p: Complex64, radius: f64) -> bool {
        let level = Self::level(radius / 0.6);
        for l in level - 2..=level + 2 {
            let (i, j) = Self::cell(p, l);
            let reach = ((radius / 2f64.powi(l)).ceil() as i64).max(1);
            for di in -reach..=reach {
                for dj in -reach..=reach {
                    if let Some(ids) = self.cells.get(&(l, i + di, j + dj)) {
                        if ids.iter().any(|&k| (self.points[k] - p).norm() < radius) {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }
}
