//! Sparse symmetric positive definite solves via preconditioned conjugate
//! gradients. The systems here are pinned graph Laplacians (Newton steps,
//! harmonic extensions, bounded Green's functions), which are SPD
//! M-matrices, so Jacobi-preconditioned CG is reliable and has no external
//! dependencies.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinSolveError {
    #[error("conjugate gradient stalled: residual {residual:e} after {iters} iterations")]
    NoConvergence { iters: usize, residual: f64 },
    #[error("matrix has a non-positive diagonal entry at row {0}")]
    NotPositiveDefinite(usize),
}

/// Symmetric sparse matrix in adjacency-list form. Only meant for assembly of
/// small graph systems; each row stores `(column, value)` pairs plus the
/// diagonal separately.
#[derive(Debug, Clone)]
pub struct SparseSym {
    pub diag: Vec<f64>,
    pub off: Vec<Vec<(usize, f64)>>,
}

impl SparseSym {
    pub fn new(n: usize) -> Self {
        Self {
            diag: vec![0.0; n],
            off: vec![Vec::new(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn add_diag(&mut self, i: usize, v: f64) {
        self.diag[i] += v;
    }

    /// Adds `v` at (i, j) and (j, i).
    pub fn add_sym(&mut self, i: usize, j: usize, v: f64) {
        self.off[i].push((j, v));
        self.off[j].push((i, v));
    }

    pub fn mul(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..self.len() {
            let mut acc = self.diag[i] * x[i];
            for &(j, v) in &self.off[i] {
                acc += v * x[j];
            }
            out[i] = acc;
        }
    }

    /// Jacobi-preconditioned conjugate gradients for `A x = b`.
    pub fn solve_cg(&self, b: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>, LinSolveError> {
        let n = self.len();
        for (i, &d) in self.diag.iter().enumerate() {
            if d <= 0.0 || !d.is_finite() {
                return Err(LinSolveError::NotPositiveDefinite(i));
            }
        }
        let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        if bnorm == 0.0 {
            return Ok(vec![0.0; n]);
        }
        let mut x = vec![0.0; n];
        let mut r = b.to_vec();
        let mut z: Vec<f64> = r.iter().zip(&self.diag).map(|(ri, di)| ri / di).collect();
        let mut p = z.clone();
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let mut ap = vec![0.0; n];
        for _ in 0..max_iter {
            self.mul(&p, &mut ap);
            let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            if pap <= 0.0 {
                return Err(LinSolveError::NotPositiveDefinite(0));
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if rnorm <= tol * bnorm {
                return Ok(x);
            }
            for i in 0..n {
                z[i] = r[i] / self.diag[i];
            }
            let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        let residual = r.iter().map(|v| v * v).sum::<f64>().sqrt() / bnorm;
        Err(LinSolveError::NoConvergence {
            iters: max_iter,
            residual,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_laplacian() {
        // path graph 0-1-2 with unit weights, pinned at both ends
        let mut a = SparseSym::new(3);
        for i in 0..3 {
            a.add_diag(i, 2.0);
        }
        a.add_sym(0, 1, -1.0);
        a.add_sym(1, 2, -1.0);
        let x = a.solve_cg(&[1.0, 0.0, 0.0], 1e-14, 100).unwrap();
        // exact solution of tridiag(2,-1): x = [3/4, 1/2, 1/4]
        assert!((x[0] - 0.75).abs() < 1e-12);
        assert!((x[1] - 0.5).abs() < 1e-12);
        assert!((x[2] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn grid_laplacian_accuracy() {
        // 2d pinned grid, manufactured solution
        let n = 20usize;
        let idx = |i: usize, j: usize| i * n + j;
        let mut a = SparseSym::new(n * n);
        for i in 0..n {
            for j in 0..n {
                a.add_diag(idx(i, j), 4.0);
                if i + 1 < n {
                    a.add_sym(idx(i, j), idx(i + 1, j), -1.0);
                }
                if j + 1 < n {
                    a.add_sym(idx(i, j), idx(i, j + 1), -1.0);
                }
            }
        }
        let xs: Vec<f64> = (0..n * n).map(|k| ((k * 37) % 101) as f64 / 101.0).collect();
        let mut b = vec![0.0; n * n];
        a.mul(&xs, &mut b);
        let sol = a.solve_cg(&b, 1e-13, 10_000).unwrap();
        let err = sol
            .iter()
            .zip(&xs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(err < 1e-9, "max err {err}");
    }
}
