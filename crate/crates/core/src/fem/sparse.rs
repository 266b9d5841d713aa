//! Compressed sparse rows and Jacobi-preconditioned conjugate gradients.

/// Square CSR matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed in the
    /// order given, so the result does not depend on anything but that order.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; n + 1];
        for &(r, _, _) in triplets {
            counts[r + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut entries = vec![(0usize, 0.0f64); triplets.len()];
        for &(r, c, v) in triplets {
            entries[next[r]] = (c, v);
            next[r] += 1;
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for r in 0..n {
            let row = &mut entries[counts[r]..counts[r + 1]];
            // stable: equal columns keep insertion order
            row.sort_by_key(|&(c, _)| c);
            for &(c, v) in row.iter() {
                if cols.len() > row_ptr[r] && *cols.last().unwrap() == c {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        CsrMatrix { n, row_ptr, cols, vals }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[range.clone()]
            .iter()
            .copied()
            .zip(self.vals[range].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(j, _)| j == c).map_or(0.0, |(_, v)| v)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|r| self.get(r, r)).collect()
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *out = acc;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// Largest `|A - A^T|` entry.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst
    }

    /// The matrix with row and column `k` removed.
    pub fn without(&self, k: usize) -> CsrMatrix {
        let shift = |c: usize| if c > k { c - 1 } else { c };
        let mut row_ptr = vec![0];
        let mut cols = Vec::with_capacity(self.nnz());
        let mut vals = Vec::with_capacity(self.nnz());
        for r in (0..self.n).filter(|&r| r != k) {
            for (c, v) in self.row(r).filter(|&(c, _)| c != k) {
                cols.push(shift(c));
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        CsrMatrix {
            n: self.n - 1,
            row_ptr,
            cols,
            vals,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOutcome {
    pub iterations: usize,
    /// Final true relative residual `|b - A x| / |b|`.
    pub residual: f64,
    pub converged: bool,
}

/// Solves `A x = b` for symmetric positive definite `A`, starting from `x`.
/// The residual is recomputed from scratch every `refresh` iterations to
/// keep the recursion honest at tight tolerances.
pub fn pcg(a: &CsrMatrix, b: &[f64], x: &mut [f64], rel_tol: f64, max_iter: usize) -> CgOutcome {
    let n = a.n();
    let refresh = 50;
    let b_norm = norm(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return CgOutcome {
            iterations: 0,
            residual: 0.0,
            converged: true,
        };
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let mut r = vec![0.0; n];
    let mut ap = vec![0.0; n];
    let true_residual = |x: &[f64], r: &mut [f64], scratch: &mut [f64]| {
        a.mul_vec_into(x, scratch);
        for i in 0..n {
            r[i] = b[i] - scratch[i];
        }
    };
    true_residual(x, &mut r, &mut ap);
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut it = 0;
    // rounding floor: near the target, stop once refreshes bring no real progress
    let mut best = f64::INFINITY;
    let mut stalled = 0;
    loop {
        let rel = norm(&r) / b_norm;
        if rel <= rel_tol {
            // confirm with a fresh residual before stopping
            true_residual(x, &mut r, &mut ap);
            let rel = norm(&r) / b_norm;
            if rel <= rel_tol {
                return CgOutcome {
                    iterations: it,
                    residual: rel,
                    converged: true,
                };
            }
            z = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
            p.clone_from(&z);
            rz = dot(&r, &z);
        }
        if it >= max_iter {
            true_residual(x, &mut r, &mut ap);
            return CgOutcome {
                iterations: it,
                residual: norm(&r) / b_norm,
                converged: false,
            };
        }
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            true_residual(x, &mut r, &mut ap);
            return CgOutcome {
                iterations: it,
                residual: norm(&r) / b_norm,
                converged: false,
            };
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
        }
        it += 1;
        if it % refresh == 0 {
            true_residual(x, &mut r, &mut ap);
            let rel = norm(&r) / b_norm;
            if rel < 0.5 * best {
                best = rel;
                stalled = 0;
            } else if rel < 1e4 * rel_tol {
                stalled += 1;
                if stalled >= 10 {
                    return CgOutcome {
                        iterations: it,
                        residual: rel,
                        converged: rel <= rel_tol,
                    };
                }
            }
        } else {
            for i in 0..n {
                r[i] -= alpha * ap[i];
            }
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
