//! Low-lying eigenpairs and shifted solves for one hermitian chain operator.
//!
//! Short chains are diagonalized densely. Long chains keep a banded
//! Cholesky factor of `A + I` and find the eigenpairs below a cutoff by
//! subspace iteration with `(A + I)⁻¹`, enlarging the subspace until at
//! least a few Ritz values sit above the cutoff.

use super::banded::{BandedCholesky, RingOp};
use crate::error::{Error, Result};
use crate::C64;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Chains up to this length are diagonalized densely.
pub const DENSE_CHAIN: usize = 512;
const MAX_SWEEPS: usize = 2000;

#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub value: f64,
    pub vector: Vec<C64>,
}

#[derive(Debug, Clone)]
pub struct Window {
    /// Eigenpairs with value ≤ cutoff, ascending.
    pub pairs: Vec<Eigenpair>,
    /// Lower bound for the spectrum outside the window.
    pub next_above: f64,
    /// Whether the window is the whole spectrum.
    pub complete: bool,
}

#[derive(Debug, Clone)]
enum Kind {
    Dense { values: Vec<f64>, vectors: DMatrix<C64> },
    Banded { op: RingOp, chol: BandedCholesky },
}

#[derive(Debug, Clone)]
pub struct ChainSolver {
    pub len: usize,
    kind: Kind,
    dense_matrix: Option<DMatrix<C64>>,
}

fn sorted_eigen(m: DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn nrm(a: &[C64]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

impl ChainSolver {
    pub fn from_ring(op: RingOp) -> Result<Self> {
        if op.len <= DENSE_CHAIN {
            let l = op.len;
            let d = op.to_dense();
            let m = DMatrix::from_fn(l, l, |r, c| 0.5 * (d[r * l + c] + d[c * l + r].conj()));
            return Ok(Self::from_dense(m));
        }
        let chol = BandedCholesky::from_ring(&op, 1.0)?;
        Ok(Self { len: op.len, kind: Kind::Banded { op, chol }, dense_matrix: None })
    }

    /// Hermitian matrix (symmetrized on entry).
    pub fn from_dense(m: DMatrix<C64>) -> Self {
        let len = m.nrows();
        let (values, vectors) = sorted_eigen(m.clone());
        Self { len, kind: Kind::Dense { values, vectors }, dense_matrix: Some(m) }
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        match (&self.kind, &self.dense_matrix) {
            (Kind::Banded { op, .. }, _) => op.apply(v),
            (_, Some(m)) => (m * nalgebra::DVector::from_column_slice(v)).as_slice().to_vec(),
            _ => unreachable!(),
        }
    }

    /// (A + I)⁻¹ v.
    pub fn solve_plus(&self, v: &[C64]) -> Vec<C64> {
        match &self.kind {
            Kind::Banded { chol, .. } => chol.solve_ring(v),
            Kind::Dense { values, vectors } => {
                let b = nalgebra::DVector::from_column_slice(v);
                let c = vectors.adjoint() * b;
                let s = nalgebra::DVector::from_iterator(self.len, c.iter().zip(values).map(|(x, l)| x / (l + 1.0)));
                (vectors * s).as_slice().to_vec()
            }
        }
    }

    /// Largest eigenvalue (power iteration for banded chains).
    pub fn lambda_max(&self, seed: u64) -> f64 {
        match &self.kind {
            Kind::Dense { values, .. } => values.last().copied().unwrap_or(0.0),
            Kind::Banded { op, .. } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut v: Vec<C64> = (0..self.len).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
                let mut lam = 0.0;
                for _ in 0..200 {
                    let s = nrm(&v);
                    v.iter_mut().for_each(|x| *x /= s);
                    let w = op.apply(&v);
                    let next = dot(&v, &w).re;
                    v = w;
                    if (next - lam).abs() <= 1e-4 * next.abs() {
                        lam = next;
                        break;
                    }
                    lam = next;
                }
                lam
            }
        }
    }

    /// All eigenpairs with value ≤ cutoff.
    pub fn window(&self, cutoff: f64, initial: usize, seed: u64) -> Result<Window> {
        match &self.kind {
            Kind::Dense { values, vectors } => {
                let pairs = values
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| v <= cutoff)
                    .map(|(i, &v)| Eigenpair { value: v, vector: vectors.column(i).iter().copied().collect() })
                    .collect::<Vec<_>>();
                let next_above = values.get(pairs.len()).copied().unwrap_or(f64::INFINITY);
                let complete = pairs.len() == self.len;
                Ok(Window { pairs, next_above, complete })
            }
            Kind::Banded { op, chol } => {
                let mut m = initial.max(8);
                loop {
                    let (theta, x) = subspace_iteration(op, chol, self.len, m, cutoff, seed)?;
                    let inside = theta.iter().filter(|&&t| t <= cutoff).count();
                    if m - inside >= (m / 3).max(6) || m >= self.len {
                        let pairs = theta
                            .iter()
                            .zip(x)
                            .filter(|(t, _)| **t <= cutoff)
                            .map(|(t, v)| Eigenpair { value: *t, vector: v })
                            .collect();
                        return Ok(Window { pairs, next_above: theta[inside], complete: false });
                    }
                    m *= 2;
                }
            }
        }
    }
}

/// Ritz values/vectors of the m lowest eigenpairs; returns when every Ritz
/// pair inside the cutoff has converged.
fn subspace_iteration(
    op: &RingOp,
    chol: &BandedCholesky,
    len: usize,
    m: usize,
    cutoff: f64,
    seed: u64,
) -> Result<(Vec<f64>, Vec<Vec<C64>>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (m as u64).wrapping_mul(0x9E37_79B9));
    let mut x = DMatrix::from_fn(len, m, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    for sweep in 0..MAX_SWEEPS {
        let mut y = DMatrix::zeros(len, m);
        for c in 0..m {
            let col: Vec<C64> = x.column(c).iter().copied().collect();
            let s = chol.solve_ring(&col);
            y.column_mut(c).copy_from_slice(&s);
        }
        let q = y.qr().q();
        let mut aq = DMatrix::zeros(len, m);
        for c in 0..m {
            let col: Vec<C64> = q.column(c).iter().copied().collect();
            aq.column_mut(c).copy_from_slice(&op.apply(&col));
        }
        let hs = q.adjoint() * &aq;
        let hs = (&hs + hs.adjoint()) * C64::new(0.5, 0.0);
        let (theta, z) = sorted_eigen(hs);
        x = &q * &z;
        let ax = &aq * &z;
        let mut converged = true;
        for (c, &t) in theta.iter().enumerate() {
            if t > cutoff {
                break;
            }
            let r = (ax.column(c) - x.column(c) * C64::new(t, 0.0)).norm();
            if r > 1e-9 * (1.0 + t) {
                converged = false;
                break;
            }
        }
        if converged && sweep > 0 {
            let vecs = (0..m).map(|c| x.column(c).iter().copied().collect()).collect();
            return Ok((theta, vecs));
        }
    }
    Err(Error::NoConvergence(format!("subspace iteration with {m} vectors")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_ring(len: usize) -> RingOp {
        let one = vec![C64::new(1.0, 0.0); len];
        let s = RingOp::shift(one.clone());
        let id = RingOp::identity(len);
        id.scale(C64::new(2.0, 0.0)).add(&s.scale(C64::new(-1.0, 0.0))).add(&s.adjoint().scale(C64::new(-1.0, 0.0)))
            .scale(C64::new((len * len) as f64 / 40.0, 0.0))
    }

    #[test]
    fn banded_window_matches_dense() {
        let len = 600;
        let op = laplacian_ring(len);
        let banded = ChainSolver::from_ring(op.clone()).unwrap();
        let l = op.len;
        let d = op.to_dense();
        let dense = ChainSolver::from_dense(DMatrix::from_fn(l, l, |r, c| d[r * l + c]));
        let wb = banded.window(3.0, 8, 1).unwrap();
        let wd = dense.window(3.0, 8, 1).unwrap();
        assert_eq!(wb.pairs.len(), wd.pairs.len());
        for (a, b) in wb.pairs.iter().zip(&wd.pairs) {
            assert!((a.value - b.value).abs() < 1e-9, "{} {}", a.value, b.value);
        }
        let v: Vec<C64> = (0..len).map(|i| C64::new(i as f64, 0.5)).collect();
        let x1 = banded.solve_plus(&v);
        let x2 = dense.solve_plus(&v);
        assert!(x1.iter().zip(&x2).all(|(a, b)| (a - b).norm() < 1e-8 * nrm(&x2)));
    }
}
