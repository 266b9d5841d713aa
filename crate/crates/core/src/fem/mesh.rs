//! Triangle meshes with labelled boundary edges.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use num_complex::Complex64;

use super::FemError;
use crate::geometry::{DomainSpec, ElectrodeLayout};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryLabel {
    Insulated,
    Electrode(usize),
}

impl BoundaryLabel {
    fn code(self) -> i64 {
        match self {
            BoundaryLabel::Insulated => -1,
            BoundaryLabel::Electrode(k) => k as i64,
        }
    }
}

/// Boundary edge oriented with the domain on its left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub v: [usize; 2],
    pub label: BoundaryLabel,
}

/// Geometric grading toward electrode endpoints: target size
/// `clamp(slope * d, h_max * ratio^levels, h_max)` at distance `d`.
///
/// With a `band`, the finest size is used on the annulus
/// `band.inner <= d <= band.outer` instead, growing with `slope` away from it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grading {
    pub h_max: f64,
    pub ratio: f64,
    pub levels: u32,
    pub slope: f64,
    pub band: Option<Band>,
}

/// Distances from an endpoint bounding the refined annulus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub inner: f64,
    pub outer: f64,
}

impl Default for Grading {
    fn default() -> Self {
        Grading {
            h_max: 0.2,
            ratio: 0.15,
            levels: 8,
            slope: 0.15,
            band: None,
        }
    }
}

impl Grading {
    pub fn uniform(h_max: f64) -> Self {
        Grading {
            h_max,
            ratio: 1.0,
            levels: 0,
            slope: 0.15,
            band: None,
        }
    }

    /// Size `h_fine` on the annulus `[inner, outer]` around every endpoint.
    pub fn banded(h_max: f64, h_fine: f64, inner: f64, outer: f64) -> Self {
        Grading {
            h_max,
            ratio: h_fine / h_max,
            levels: 1,
            slope: 0.3,
            band: Some(Band { inner, outer }),
        }
    }

    pub fn h_min(&self) -> f64 {
        self.h_max * self.ratio.powi(self.levels as i32)
    }

    pub fn size_at(&self, d: f64) -> f64 {
        match self.band {
            Some(b) => {
                let gap = (b.inner - d).max(d - b.outer).max(0.0);
                (self.h_min() + self.slope * gap).min(self.h_max)
            }
            None => (self.slope * d).clamp(self.h_min(), self.h_max),
        }
    }

    /// Distance from an endpoint beyond which the size is `h_max`.
    pub(super) fn graded_reach(&self) -> f64 {
        match self.band {
            Some(b) => b.outer + (self.h_max - self.h_min()) / self.slope,
            None => self.h_max / self.slope,
        }
    }

    pub fn validate(&self) -> Result<(), FemError> {
        let ok = self.h_max > 0.0
            && self.ratio > 0.0
            && self.ratio <= 1.0
            && self.slope > 0.0
            && self.slope <= 1.0
            && self.h_min() > 0.0
            && self.band.is_none_or(|b| b.inner >= 0.0 && b.outer >= b.inner);
        if ok {
            Ok(())
        } else {
            Err(FemError::InvalidGrading(*self))
        }
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary: Vec<BoundaryEdge>,
    /// Boundary parameter of each boundary vertex.
    pub vertex_s: Vec<Option<f64>>,
    pub domain: DomainSpec,
    pub layout: ElectrodeLayout,
    pub grading: Grading,
}

impl Mesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn point(&self, v: usize) -> Complex64 {
        Complex64::new(self.vertices[v][0], self.vertices[v][1])
    }

    pub fn triangle_points(&self, t: usize) -> [Complex64; 3] {
        let [a, b, c] = self.triangles[t];
        [self.point(a), self.point(b), self.point(c)]
    }

    /// Twice the signed area.
    pub fn signed_area2(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        let (e1, e2) = (b - a, c - a);
        e1.re * e2.im - e1.im * e2.re
    }

    pub fn area(&self, t: usize) -> f64 {
        0.5 * self.signed_area2(t).abs()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.area(t)).sum()
    }

    pub fn min_angle_deg(&self) -> f64 {
        (0..self.n_triangles())
            .map(|t| triangle_min_angle(&self.triangle_points(t)))
            .fold(f64::INFINITY, f64::min)
            .to_degrees()
    }

    /// Electrode of each vertex (if it lies on an electrode edge).
    pub fn vertex_electrodes(&self) -> Vec<Option<usize>> {
        let mut out = vec![None; self.n_vertices()];
        for e in &self.boundary {
            if let BoundaryLabel::Electrode(k) = e.label {
                out[e.v[0]] = Some(k);
                out[e.v[1]] = Some(k);
            }
        }
        out
    }

    /// Vertices of electrode `k` ordered along the boundary.
    pub fn electrode_vertices(&self, k: usize) -> Vec<usize> {
        let mut vs: Vec<usize> = self
            .boundary
            .iter()
            .filter(|e| e.label == BoundaryLabel::Electrode(k))
            .flat_map(|e| e.v)
            .collect();
        vs.sort_unstable();
        vs.dedup();
        let start = self.layout.arcs[k].start;
        let len = self.domain.boundary_length().unwrap_or(f64::INFINITY);
        let key = |v: usize| {
            let s = self.vertex_s[v].unwrap_or(f64::NAN);
            // arcs never wrap, but a vertex at s = 0 may sit at the end of the last arc
            if s < start - 1e-12 {
                s + len
            } else {
                s
            }
        };
        vs.sort_by(|&a, &b| key(a).total_cmp(&key(b)));
        vs
    }

    /// Distance along the boundary from vertex `v` to the nearest electrode endpoint.
    pub fn boundary_dist_to_edge(&self, v: usize) -> Option<f64> {
        let s = self.vertex_s[v]?;
        self.layout.dist_to_nearest_edge(&self.domain, s).ok()
    }

    /// Checks orientation, conformity, boundary coverage, labels and angle quality.
    pub fn validate(&self, min_angle_deg: f64) -> Result<(), FemError> {
        for t in 0..self.n_triangles() {
            if !(self.signed_area2(t) > 0.0) {
                return Err(FemError::InvalidMesh(format!(
                    "triangle {t} is not positively oriented"
                )));
            }
        }
        let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &self.triangles {
            for i in 0..3 {
                let (a, b) = (tri[i], tri[(i + 1) % 3]);
                *edge_count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        if let Some((e, c)) = edge_count.iter().find(|(_, &c)| c > 2) {
            return Err(FemError::InvalidMesh(format!("edge {e:?} shared by {c} triangles")));
        }
        let mut boundary_count: HashMap<(usize, usize), usize> = HashMap::new();
        for e in &self.boundary {
            let (a, b) = (e.v[0], e.v[1]);
            *boundary_count.entry((a.min(b), a.max(b))).or_default() += 1;
        }
        for (e, &c) in &edge_count {
            let listed = boundary_count.get(e).copied().unwrap_or(0);
            if (c == 1) != (listed == 1) || listed > 1 {
                return Err(FemError::InvalidMesh(format!(
                    "boundary edge {e:?} covered {listed} times"
                )));
            }
        }
        for e in &self.boundary {
            let (Some(s0), Some(s1)) = (self.vertex_s[e.v[0]], self.vertex_s[e.v[1]]) else {
                return Err(FemError::InvalidMesh("boundary vertex without parameter".into()));
            };
            let mid = param_midpoint(&self.domain, s0, s1);
            let expected = match self.layout.electrode_at(mid) {
                Some(k) => BoundaryLabel::Electrode(k),
                None => BoundaryLabel::Insulated,
            };
            if expected != e.label {
                return Err(FemError::InvalidMesh(format!("boundary edge {:?} mislabelled", e.v)));
            }
        }
        for (k, arc) in self.layout.arcs.iter().enumerate() {
            let len = self.domain.boundary_length().unwrap_or(f64::INFINITY);
            for s in [arc.start, arc.end] {
                if !self.vertex_s.iter().any(|&v| v == Some(s) || v == Some(s - len)) {
                    return Err(FemError::InvalidMesh(format!(
                        "endpoint {s} of electrode {k} is not a vertex"
                    )));
                }
            }
        }
        let angle = self.min_angle_deg();
        if angle < min_angle_deg {
            return Err(FemError::GradingTooAggressive { min_angle_deg: angle });
        }
        Ok(())
    }

    /// Uniform red refinement; boundary midpoints are placed on the true boundary.
    pub fn refine_uniform(&self) -> Mesh {
        let mut vertices = self.vertices.clone();
        let mut vertex_s = self.vertex_s.clone();
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let boundary_edges: HashMap<(usize, usize), BoundaryLabel> = self
            .boundary
            .iter()
            .map(|e| ((e.v[0].min(e.v[1]), e.v[0].max(e.v[1])), e.label))
            .collect();
        let mut mid = |a: usize, b: usize, vertices: &mut Vec<[f64; 2]>, vertex_s: &mut Vec<Option<f64>>| {
            let key = (a.min(b), a.max(b));
            *midpoint.entry(key).or_insert_with(|| {
                let (pa, pb) = (vertices[a], vertices[b]);
                let mut p = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
                let mut s = None;
                if boundary_edges.contains_key(&key) {
                    let sm = param_midpoint(&self.domain, vertex_s[a].unwrap(), vertex_s[b].unwrap());
                    let q = self.domain.boundary_point(sm).expect("parameter in range");
                    p = [q.re, q.im];
                    s = Some(sm);
                }
                vertices.push(p);
                vertex_s.push(s);
                vertices.len() - 1
            })
        };
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        for &[a, b, c] in &self.triangles {
            let ab = mid(a, b, &mut vertices, &mut vertex_s);
            let bc = mid(b, c, &mut vertices, &mut vertex_s);
            let ca = mid(c, a, &mut vertices, &mut vertex_s);
            triangles.extend_from_slice(&[[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
        }
        let mut boundary = Vec::with_capacity(2 * self.boundary.len());
        for e in &self.boundary {
            let m = mid(e.v[0], e.v[1], &mut vertices, &mut vertex_s);
            boundary.push(BoundaryEdge {
                v: [e.v[0], m],
                label: e.label,
            });
            boundary.push(BoundaryEdge {
                v: [m, e.v[1]],
                label: e.label,
            });
        }
        Mesh {
            vertices,
            triangles,
            boundary,
            vertex_s,
            domain: self.domain,
            layout: self.layout.clone(),
            grading: Grading {
                h_max: 0.5 * self.grading.h_max,
                ..self.grading
            },
        }
    }

    /// Plain-text export: a header line `vertices N triangles M boundary K`,
    /// then `x y` per vertex, `i j k` per triangle and `i j label` per
    /// boundary edge (label -1 = insulated, otherwise the electrode index).
    pub fn write_text(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(
            w,
            "vertices {} triangles {} boundary {}",
            self.n_vertices(),
            self.n_triangles(),
            self.boundary.len()
        )?;
        for v in &self.vertices {
            writeln!(w, "{:.17e} {:.17e}", v[0], v[1])?;
        }
        for t in &self.triangles {
            writeln!(w, "{} {} {}", t[0], t[1], t[2])?;
        }
        for e in &self.boundary {
            writeln!(w, "{} {} {}", e.v[0], e.v[1], e.label.code())?;
        }
        Ok(())
    }

    /// Reads the format of [`Mesh::write_text`]; boundary parameters are
    /// recovered by projecting boundary vertices onto `domain`.
    pub fn read_text(
        r: impl BufRead,
        domain: DomainSpec,
        layout: ElectrodeLayout,
        grading: Grading,
    ) -> Result<Mesh, FemError> {
        let bad = |msg: String| FemError::MeshFormat(msg);
        let mut lines = r.lines().map(|l| l.map_err(|e| bad(e.to_string())));
        let header = lines.next().ok_or_else(|| bad("empty file".into()))??;
        let words: Vec<&str> = header.split_whitespace().collect();
        let count = |key: &str, at: usize| -> Result<usize, FemError> {
            if words.get(at) != Some(&key) {
                return Err(bad(format!("expected `{key}` in header")));
            }
            words
                .get(at + 1)
                .and_then(|w| w.parse().ok())
                .ok_or_else(|| bad(format!("bad count for `{key}`")))
        };
        let (nv, nt, nb) = (count("vertices", 0)?, count("triangles", 2)?, count("boundary", 4)?);
        let mut next_fields = |n: usize| -> Result<Vec<String>, FemError> {
            let line = lines.next().ok_or_else(|| bad("unexpected end of file".into()))??;
            let fields: Vec<String> = line.split_whitespace().map(str::to_owned).collect();
            if fields.len() != n {
                return Err(bad(format!("expected {n} fields in `{line}`")));
            }
            Ok(fields)
        };
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("bad number `{s}`")));
        let idx = |s: &str| s.parse::<usize>().map_err(|_| bad(format!("bad index `{s}`")));
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let f = next_fields(2)?;
            vertices.push([num(&f[0])?, num(&f[1])?]);
        }
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let f = next_fields(3)?;
            let t = [idx(&f[0])?, idx(&f[1])?, idx(&f[2])?];
            if t.iter().any(|&i| i >= nv) {
                return Err(bad(format!("vertex index out of range in triangle {t:?}")));
            }
            triangles.push(t);
        }
        let mut boundary = Vec::with_capacity(nb);
        for _ in 0..nb {
            let f = next_fields(3)?;
            let v = [idx(&f[0])?, idx(&f[1])?];
            if v.iter().any(|&i| i >= nv) {
                return Err(bad(format!("vertex index out of range in boundary edge {v:?}")));
            }
            let code: i64 = f[2].parse().map_err(|_| bad(format!("bad label `{}`", f[2])))?;
            let label = match code {
                -1 => BoundaryLabel::Insulated,
                k if k >= 0 => BoundaryLabel::Electrode(k as usize),
                _ => return Err(bad(format!("bad label {code}"))),
            };
            boundary.push(BoundaryEdge { v, label });
        }
        let mut vertex_s = vec![None; nv];
        let endpoints = layout.endpoints();
        for e in &boundary {
            for &v in &e.v {
                let p = Complex64::new(vertices[v][0], vertices[v][1]);
                let mut s = domain.project_to_boundary(p);
                // snap to an electrode endpoint lost in the decimal round trip
                if let Some(&ep) = endpoints.iter().find(|&&ep| (ep - s).abs() < 1e-13) {
                    s = ep;
                }
                vertex_s[v] = Some(s);
            }
        }
        Ok(Mesh {
            vertices,
            triangles,
            boundary,
            vertex_s,
            domain,
            layout,
            grading,
        })
    }
}

pub(crate) fn triangle_min_angle(p: &[Complex64; 3]) -> f64 {
    (0..3)
        .map(|i| {
            let (a, b, c) = (p[i], p[(i + 1) % 3], p[(i + 2) % 3]);
            let (u, v) = (b - a, c - a);
            (u.conj() * v).arg().abs()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Midpoint of the boundary stretch from `s0` to `s1` in the positive
/// direction, accounting for the wrap of closed boundaries.
pub(crate) fn param_midpoint(domain: &DomainSpec, s0: f64, s1: f64) -> f64 {
    match domain.boundary_length() {
        Some(len) if s1 < s0 => (0.5 * (s0 + s1 + len)).rem_euclid(len),
        _ => 0.5 * (s0 + s1),
    }
}
