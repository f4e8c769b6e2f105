//! Dense symmetric eigendecomposition by cyclic Jacobi rotations.

use crate::error::{Error, Result};

/// Eigenpairs of a real symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Eigenvalues, sorted descending.
    pub values: Vec<f64>,
    /// Eigenvectors stored column-wise: `vectors[i * n + k]` is component i of vector k.
    pub vectors: Vec<f64>,
    pub n: usize,
    pub sweeps: usize,
}

impl SymmetricEigen {
    pub fn vector(&self, k: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.vectors[i * self.n + k]).collect()
    }

    /// Largest `||A v - lambda v||_2` over all eigenpairs.
    pub fn max_residual(&self, a: &[f64]) -> f64 {
        let n = self.n;
        (0..n)
            .map(|k| {
                let v = self.vector(k);
                let lambda = self.values[k];
                (0..n)
                    .map(|i| {
                        let av: f64 = (0..n).map(|j| a[i * n + j] * v[j]).sum();
                        (av - lambda * v[i]).powi(2)
                    })
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }
}

pub const MAX_SWEEPS: usize = 100;

/// Diagonalizes the row-major symmetric `n x n` matrix `a`. Rotations are
/// applied in fixed row-cyclic order, so the result is deterministic.
pub fn jacobi_eigen(a: &[f64], n: usize) -> Result<SymmetricEigen> {
    assert_eq!(a.len(), n * n, "matrix must be n x n");
    let mut m = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let frob: f64 = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    let target = (f64::EPSILON * frob).powi(2);
    let off = |m: &[f64]| -> f64 {
        let mut s = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                s += 2.0 * m[p * n + q] * m[p * n + q];
            }
        }
        s
    };

    let mut sweeps = 0;
    while off(&m) > target {
        if sweeps == MAX_SWEEPS {
            return Err(Error::NoConvergence {
                sweeps,
                residual: off(&m).sqrt(),
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                // skip rotations that would not change the diagonal in floating point
                if sweeps > 4
                    && (apq.abs() * 100.0 + app.abs() == app.abs())
                    && (apq.abs() * 100.0 + aqq.abs() == aqq.abs())
                {
                    m[p * n + q] = 0.0;
                    m[q * n + p] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);

                m[p * n + p] = app - t * apq;
                m[q * n + q] = aqq + t * apq;
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
                for r in 0..n {
                    if r != p && r != q {
                        let arp = m[r * n + p];
                        let arq = m[r * n + q];
                        let new_rp = arp - s * (arq + tau * arp);
                        let new_rq = arq + s * (arp - tau * arq);
                        m[r * n + p] = new_rp;
                        m[p * n + r] = new_rp;
                        m[r * n + q] = new_rq;
                        m[q * n + r] = new_rq;
                    }
                }
                for r in 0..n {
                    let vrp = v[r * n + p];
                    let vrq = v[r * n + q];
                    v[r * n + p] = vrp - s * (vrq + tau * vrp);
                    v[r * n + q] = vrq + s * (vrp - tau * vrq);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j * n + j].total_cmp(&m[i * n + i]).then(i.cmp(&j)));
    let values = order.iter().map(|&k| m[k * n + k]).collect();
    let mut vectors = vec![0.0; n * n];
    for (dst, &src) in order.iter().enumerate() {
        for i in 0..n {
            vectors[i * n + dst] = v[i * n + src];
        }
    }
    Ok(SymmetricEigen {
        values,
        vectors,
        n,
        sweeps,
    })
}
