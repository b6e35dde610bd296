//! Small dense linear algebra for covariance analysis.

use rand::Rng;

use crate::error::{Error, Result};
use crate::stats::rng_for;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Removes the components along an orthonormal `basis`; two passes keep the
/// result orthogonal to working precision.
pub fn project_out(v: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for b in basis {
            let c = dot(v, b);
            for (x, y) in v.iter_mut().zip(b) {
                *x -= c * y;
            }
        }
    }
}

/// `basis_i · basis_j` for all pairs, row-major.
pub fn gram(basis: &[Vec<f64>]) -> Vec<f64> {
    let k = basis.len();
    let mut g = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            g[i * k + j] = dot(&basis[i], &basis[j]);
        }
    }
    g
}

/// Largest `|G - I|` entry of the Gram matrix.
pub fn orthonormality_error(basis: &[Vec<f64>]) -> f64 {
    let k = basis.len();
    gram(basis)
        .iter()
        .enumerate()
        .map(|(idx, g)| (g - if idx / k == idx % k { 1.0 } else { 0.0 }).abs())
        .fold(0.0, f64::max)
}

/// Row-major sample matrix with `dim` columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Samples {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl Samples {
    pub fn new(dim: usize) -> Self {
        Self { dim, data: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim.max(1))
    }

    pub fn push(&mut self, row: &[f64]) {
        debug_assert_eq!(row.len(), self.dim);
        self.data.extend_from_slice(row);
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for r in self.rows() {
            for (a, b) in m.iter_mut().zip(r) {
                *a += b;
            }
        }
        let n = self.len() as f64;
        m.iter_mut().for_each(|v| *v /= n);
        m
    }

    /// Unbiased covariance, row-major `dim × dim`.
    pub fn covariance(&self) -> Vec<f64> {
        self.covariance_of(&(0..self.len()).collect::<Vec<_>>())
    }

    /// Covariance of the rows selected by `idx` (repeats allowed).
    pub fn covariance_of(&self, idx: &[usize]) -> Vec<f64> {
        let d = self.dim;
        let n = idx.len() as f64;
        let mut mean = vec![0.0; d];
        for &i in idx {
            for (a, b) in mean.iter_mut().zip(self.row(i)) {
                *a += b;
            }
        }
        mean.iter_mut().for_each(|v| *v /= n);
        let mut cov = vec![0.0; d * d];
        let mut centered = vec![0.0; d];
        for &i in idx {
            for (c, (x, m)) in centered.iter_mut().zip(self.row(i).iter().zip(&mean)) {
                *c = x - m;
            }
            for a in 0..d {
                let ca = centered[a];
                if ca == 0.0 {
                    continue;
                }
                for b in a..d {
                    cov[a * d + b] += ca * centered[b];
                }
            }
        }
        let denom = (n - 1.0).max(1.0);
        for a in 0..d {
            for b in a..d {
                let v = cov[a * d + b] / denom;
                cov[a * d + b] = v;
                cov[b * d + a] = v;
            }
        }
        cov
    }
}

pub fn mat_vec(m: &[f64], v: &[f64]) -> Vec<f64> {
    let d = v.len();
    (0..d).map(|i| dot(&m[i * d..(i + 1) * d], v)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub iterations: usize,
}

pub const POWER_ITERATION_CAP: usize = 100_000;

/// Top eigenpair of the symmetric PSD matrix `m` restricted to the
/// orthogonal complement of `basis`. Starts from a seeded random vector and
/// stops once the Rayleigh quotient changes by at most `1e-13` relative over
/// ten consecutive iterations.
pub fn top_eigen_restricted(m: &[f64], dim: usize, basis: &[Vec<f64>], seed: u64) -> Result<EigenPair> {
    let mut rng = rng_for(seed, 0xe16e);
    let mut v: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
    project_out(&mut v, basis);
    let nv = norm(&v);
    if nv < 1e-300 || basis.len() >= dim {
        return Ok(EigenPair { value: 0.0, vector: vec![0.0; dim], iterations: 0 });
    }
    v.iter_mut().for_each(|x| *x /= nv);
    let mut prev = f64::NAN;
    let mut stable = 0;
    for it in 1..=POWER_ITERATION_CAP {
        let mut w = mat_vec(m, &v);
        project_out(&mut w, basis);
        let rq = dot(&v, &w);
        let nw = norm(&w);
        if nw <= 1e-300 {
            return Ok(EigenPair { value: 0.0, vector: v, iterations: it });
        }
        w.iter_mut().for_each(|x| *x /= nw);
        v = w;
        if (rq - prev).abs() <= 1e-13 * rq.abs().max(1e-300) {
            stable += 1;
            if stable >= 10 {
                return Ok(EigenPair { value: rq, vector: v, iterations: it });
            }
        } else {
            stable = 0;
        }
        prev = rq;
    }
    Err(Error::EigenNonConvergence(POWER_ITERATION_CAP))
}

/// Operator norm of a square matrix via power iteration on `MᵀM`.
pub fn operator_norm(m: &[f64], dim: usize, seed: u64) -> Result<f64> {
    let mut mtm = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            mtm[i * dim + j] = (0..dim).map(|k| m[k * dim + i] * m[k * dim + j]).sum();
        }
    }
    Ok(top_eigen_restricted(&mtm, dim, &[], seed)?.value.max(0.0).sqrt())
}
