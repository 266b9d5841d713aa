//! Quadrature rules.
//!
//! Interval integrals with inverse-square-root endpoint behaviour use the
//! Gauss-Jacobi rule with `alpha = beta = -1/2`, which has closed-form nodes
//! and equal weights (Gauss-Chebyshev of the first kind). Triangle integrals
//! with a point singularity at a vertex use collapsed (Duffy) coordinates with
//! geometric layers toward the collapsed vertex.

use std::f64::consts::PI;
use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::GaussLegendre;
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadratureError {
    #[error("weighted quadrature on [{a}, {b}] did not converge (last change {change:e})")]
    NotConverged { a: f64, b: f64, change: f64 },
}

/// Default node count for endpoint-weighted integrals.
pub const DEFAULT_JACOBI_NODES: usize = 64;
const MAX_JACOBI_NODES: usize = 1 << 14;

/// `int_a^b g(x) / sqrt((x-a)(b-x)) dx` with `n` Gauss-Jacobi(-1/2,-1/2) nodes.
pub fn gauss_jacobi_half(a: f64, b: f64, n: usize, mut g: impl FnMut(f64) -> f64) -> f64 {
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    let mut sum = 0.0;
    for i in 0..n {
        let t = ((2 * i + 1) as f64 * PI / (2 * n) as f64).cos();
        sum += g(mid + half * t);
    }
    sum * PI / n as f64
}

fn gauss_jacobi_half_with_scale(a: f64, b: f64, n: usize, g: &mut impl FnMut(f64) -> f64) -> (f64, f64) {
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    let (mut sum, mut abs) = (0.0, 0.0);
    for i in 0..n {
        let t = ((2 * i + 1) as f64 * PI / (2 * n) as f64).cos();
        let v = g(mid + half * t);
        sum += v;
        abs += v.abs();
    }
    let w = PI / n as f64;
    (sum * w, abs * w)
}

/// Same as [`gauss_jacobi_half`] but doubles the node count (starting from
/// `n0`) until two successive values agree to `rel_tol` times the integral
/// of `|g|`. The tolerance never drops below the summation roundoff of `n`
/// nodes, `8 sqrt(n) eps`.
pub fn gauss_jacobi_half_adaptive(
    a: f64,
    b: f64,
    n0: usize,
    rel_tol: f64,
    mut g: impl FnMut(f64) -> f64,
) -> Result<f64, QuadratureError> {
    let mut n = n0.max(2);
    let (mut prev, _) = gauss_jacobi_half_with_scale(a, b, n, &mut g);
    let mut change = f64::INFINITY;
    while n < MAX_JACOBI_NODES {
        n *= 2;
        let (cur, scale) = gauss_jacobi_half_with_scale(a, b, n, &mut g);
        change = (cur - prev).abs();
        let tol = rel_tol.max(8.0 * f64::EPSILON * (n as f64).sqrt());
        if change <= tol * scale || change == 0.0 {
            return Ok(cur);
        }
        if !cur.is_finite() {
            break;
        }
        prev = cur;
    }
    Err(QuadratureError::NotConverged { a, b, change })
}

/// Gauss-Legendre nodes and weights mapped to `[0, 1]`.
pub fn legendre_unit(n: usize) -> &'static [(f64, f64)] {
    static CACHE: OnceLock<Vec<Vec<(f64, f64)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| {
        (0..=32)
            .map(|k| {
                if k == 0 {
                    return Vec::new();
                }
                let rule = GaussLegendre::new(NonZeroUsize::new(k).expect("k > 0"));
                rule.iter().map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w)).collect()
            })
            .collect()
    });
    assert!((1..=32).contains(&n), "Gauss-Legendre order {n} not tabulated");
    &cache[n]
}

/// Composite-free Gauss-Legendre integral over `[a, b]`.
pub fn legendre(a: f64, b: f64, n: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
    legendre_unit(n)
        .iter()
        .map(|&(x, w)| w * f(a + (b - a) * x))
        .sum::<f64>()
        * (b - a)
}

/// Quadrature points on the reference triangle `(0,0),(1,0),(0,1)`; weights
/// sum to the reference area 1/2.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub points: Vec<([f64; 2], f64)>,
}

impl TriangleRule {
    /// Degree-2 rule with three interior points.
    pub fn three_point() -> Self {
        let w = 1.0 / 6.0;
        TriangleRule {
            points: vec![
                ([1.0 / 6.0, 1.0 / 6.0], w),
                ([2.0 / 3.0, 1.0 / 6.0], w),
                ([1.0 / 6.0, 2.0 / 3.0], w),
            ],
        }
    }

    /// Tensor Gauss-Legendre rule in collapsed coordinates, collapsed at vertex 0.
    pub fn collapsed(n: usize) -> Self {
        Self::graded_collapsed(n, 0, 1.0)
    }

    /// Collapsed rule with `layers` geometric layers (ratio `ratio`) toward
    /// vertex 0, for integrands singular at that vertex.
    pub fn graded_collapsed(n: usize, layers: usize, ratio: f64) -> Self {
        let gl = legendre_unit(n);
        let mut bounds = Vec::with_capacity(layers + 1);
        let mut hi = 1.0;
        for _ in 0..layers {
            let lo = hi * ratio;
            bounds.push((lo, hi));
            hi = lo;
        }
        bounds.push((0.0, hi));
        let mut points = Vec::with_capacity(bounds.len() * n * n);
        for (lo, hi) in bounds {
            for &(xu, wu) in gl {
                let u = lo + (hi - lo) * xu;
                let wu = wu * (hi - lo);
                for &(t, wt) in gl {
                    points.push(([u * (1.0 - t), u * t], wu * wt * u));
                }
            }
        }
        TriangleRule { points }
    }

    /// Integrates `f` over the physical triangle `tri`.
    pub fn integrate<const M: usize>(
        &self,
        tri: &[Complex64; 3],
        mut f: impl FnMut(Complex64) -> [f64; M],
    ) -> [f64; M] {
        let e1 = tri[1] - tri[0];
        let e2 = tri[2] - tri[0];
        let jac = (e1.re * e2.im - e1.im * e2.re).abs();
        let mut acc = [0.0; M];
        for &([xi, eta], w) in &self.points {
            let p = tri[0] + e1 * xi + e2 * eta;
            let v = f(p);
            for k in 0..M {
                acc[k] += w * jac * v[k];
            }
        }
        acc
    }
}

fn graded_rule() -> &'static TriangleRule {
    static RULE: OnceLock<TriangleRule> = OnceLock::new();
    RULE.get_or_init(|| TriangleRule::graded_collapsed(12, 24, 0.25))
}

fn smooth_rule() -> &'static TriangleRule {
    static RULE: OnceLock<TriangleRule> = OnceLock::new();
    RULE.get_or_init(|| TriangleRule::collapsed(20))
}

/// Integrates `f` over `tri` when `f` may be singular at `singular` (a vertex
/// of `tri` or a point outside it). Triangles close to the singular point
/// relative to their size are split recursively; a triangle with the singular
/// point as a vertex uses a radially graded collapsed rule.
pub fn integrate_triangle_near_point<const M: usize>(
    tri: &[Complex64; 3],
    singular: Complex64,
    f: &mut impl FnMut(Complex64) -> [f64; M],
) -> [f64; M] {
    integrate_near(tri, singular, f, 0)
}

fn integrate_near<const M: usize>(
    tri: &[Complex64; 3],
    singular: Complex64,
    f: &mut impl FnMut(Complex64) -> [f64; M],
    depth: usize,
) -> [f64; M] {
    let diam = (tri[0] - tri[1])
        .norm()
        .max((tri[1] - tri[2]).norm())
        .max((tri[2] - tri[0]).norm());
    if let Some(k) = tri.iter().position(|v| (v - singular).norm() <= 1e-12 * diam) {
        let rotated = [tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]];
        return graded_rule().integrate(&rotated, f);
    }
    let dist = point_triangle_distance(singular, tri);
    if dist < 1.5 * diam && depth < 16 {
        let m01 = 0.5 * (tri[0] + tri[1]);
        let m12 = 0.5 * (tri[1] + tri[2]);
        let m20 = 0.5 * (tri[2] + tri[0]);
        let children = [
            [tri[0], m01, m20],
            [m01, tri[1], m12],
            [m20, m12, tri[2]],
            [m01, m12, m20],
        ];
        let mut acc = [0.0; M];
        for child in &children {
            let v = integrate_near(child, singular, f, depth + 1);
            for k in 0..M {
                acc[k] += v[k];
            }
        }
        return acc;
    }
    smooth_rule().integrate(tri, f)
}

/// Euclidean distance from `p` to the closed triangle.
pub fn point_triangle_distance(p: Complex64, tri: &[Complex64; 3]) -> f64 {
    let cross = |a: Complex64, b: Complex64| a.re * b.im - a.im * b.re;
    let orient = cross(tri[1] - tri[0], tri[2] - tri[0]).signum();
    let inside = (0..3).all(|i| {
        let (a, b) = (tri[i], tri[(i + 1) % 3]);
        cross(b - a, p - a) * orient >= 0.0
    });
    if inside {
        return 0.0;
    }
    (0..3)
        .map(|i| point_segment_distance(p, tri[i], tri[(i + 1) % 3]))
        .fold(f64::INFINITY, f64::min)
}

pub fn point_segment_distance(p: Complex64, a: Complex64, b: Complex64) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = (((p - a) * ab.conj()).re / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}
