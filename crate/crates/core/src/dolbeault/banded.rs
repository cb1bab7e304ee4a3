//! Operators on a ring `ℤ/L` of the form `(A v)[J] = Σ_o c_o[J] v[J+o]`,
//! and a banded Cholesky factorization after folding the ring into a band.

use crate::error::{Error, Result};
use crate::C64;

#[derive(Debug, Clone, PartialEq)]
pub struct RingOp {
    pub len: usize,
    /// (offset, coefficient per position), offsets reduced to (-L/2, L/2].
    pub terms: Vec<(isize, Vec<C64>)>,
}

fn reduce(o: isize, len: usize) -> isize {
    let l = len as isize;
    let mut r = o.rem_euclid(l);
    if r > l / 2 {
        r -= l;
    }
    r
}

impl RingOp {
    pub fn diag(c: Vec<C64>) -> Self {
        Self { len: c.len(), terms: vec![(0, c)] }
    }

    pub fn identity(len: usize) -> Self {
        Self::diag(vec![C64::new(1.0, 0.0); len])
    }

    /// `(S v)[J] = w[J] v[J+1]`.
    pub fn shift(w: Vec<C64>) -> Self {
        let len = w.len();
        Self { len, terms: vec![(reduce(1, len), w)] }
    }

    fn push(&mut self, o: isize, c: Vec<C64>) {
        let o = reduce(o, self.len);
        if let Some((_, e)) = self.terms.iter_mut().find(|(k, _)| *k == o) {
            for (a, b) in e.iter_mut().zip(c) {
                *a += b;
            }
        } else {
            self.terms.push((o, c));
            self.terms.sort_by_key(|t| t.0);
        }
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        let l = self.len as isize;
        let mut out = vec![C64::new(0.0, 0.0); self.len];
        for (o, c) in &self.terms {
            for (j, y) in out.iter_mut().enumerate() {
                *y += c[j] * v[(j as isize + o).rem_euclid(l) as usize];
            }
        }
        out
    }

    pub fn compose(&self, b: &RingOp) -> RingOp {
        let l = self.len as isize;
        let mut out = RingOp { len: self.len, terms: Vec::new() };
        for (o, a) in &self.terms {
            for (p, bc) in &b.terms {
                let c: Vec<C64> = (0..self.len).map(|j| a[j] * bc[(j as isize + o).rem_euclid(l) as usize]).collect();
                out.push(o + p, c);
            }
        }
        out
    }

    pub fn adjoint(&self) -> RingOp {
        let l = self.len as isize;
        let mut out = RingOp { len: self.len, terms: Vec::new() };
        for (o, a) in &self.terms {
            let c: Vec<C64> = (0..self.len).map(|j| a[(j as isize - o).rem_euclid(l) as usize].conj()).collect();
            out.push(-o, c);
        }
        out
    }

    pub fn scale(&self, s: C64) -> RingOp {
        let mut out = self.clone();
        out.terms.iter_mut().for_each(|(_, c)| c.iter_mut().for_each(|v| *v *= s));
        out
    }

    pub fn add(&self, b: &RingOp) -> RingOp {
        let mut out = self.clone();
        for (o, c) in &b.terms {
            out.push(*o, c.clone());
        }
        out
    }

    pub fn max_offset(&self) -> usize {
        self.terms.iter().map(|t| t.0.unsigned_abs()).max().unwrap_or(0)
    }

    /// Dense matrix, row-major.
    pub fn to_dense(&self) -> Vec<C64> {
        let l = self.len;
        let mut m = vec![C64::new(0.0, 0.0); l * l];
        for (o, c) in &self.terms {
            for j in 0..l {
                let k = (j as isize + o).rem_euclid(l as isize) as usize;
                m[j * l + k] += c[j];
            }
        }
        m
    }
}

/// Position of ring index J after folding: J = m ↦ 2m, J = L-1-m ↦ 2m+1.
pub fn fold_index(j: usize, len: usize) -> usize {
    if 2 * j < len {
        2 * j
    } else {
        2 * (len - 1 - j) + 1
    }
}

/// Hermitian positive definite band matrix stored by lower diagonals:
/// `l[i * (kb+1) + k] = A[i][i-k]`.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    kb: usize,
    l: Vec<C64>,
}

impl BandedCholesky {
    /// Factor the folded form of a hermitian ring operator plus `shift·I`.
    pub fn from_ring(op: &RingOp, shift: f64) -> Result<Self> {
        let len = op.len;
        let mut kb = 0;
        for (o, _) in &op.terms {
            for j in 0..len {
                let k = (j as isize + o).rem_euclid(len as isize) as usize;
                kb = kb.max(fold_index(j, len).abs_diff(fold_index(k, len)));
            }
        }
        let w = kb + 1;
        let mut a = vec![C64::new(0.0, 0.0); len * w];
        for (o, c) in &op.terms {
            for j in 0..len {
                let k = (j as isize + o).rem_euclid(len as isize) as usize;
                let (r, s) = (fold_index(j, len), fold_index(k, len));
                if r >= s {
                    a[r * w + (r - s)] += c[j];
                }
            }
        }
        for i in 0..len {
            a[i * w] += shift;
        }
        Self::factor(len, kb, a)
    }

    fn factor(n: usize, kb: usize, mut a: Vec<C64>) -> Result<Self> {
        let w = kb + 1;
        for i in 0..n {
            for k in (1..=kb.min(i)).rev() {
                let j = i - k;
                let mut s = a[i * w + k];
                let m0 = i.saturating_sub(kb);
                for m in m0..j {
                    s -= a[i * w + (i - m)] * a[j * w + (j - m)].conj();
                }
                a[i * w + k] = s / a[j * w];
            }
            let mut d = a[i * w].re;
            for m in i.saturating_sub(kb)..i {
                d -= a[i * w + (i - m)].norm_sqr();
            }
            if !(d > 0.0) {
                return Err(Error::NoConvergence(format!("band Cholesky pivot {d:e} at row {i}")));
            }
            a[i * w] = C64::new(d.sqrt(), 0.0);
        }
        Ok(Self { n, kb, l: a })
    }

    /// Solve in ring ordering (folding handled internally).
    pub fn solve_ring(&self, b: &[C64]) -> Vec<C64> {
        let n = self.n;
        let mut y = vec![C64::new(0.0, 0.0); n];
        for (j, v) in b.iter().enumerate() {
            y[fold_index(j, n)] = *v;
        }
        self.solve_in_place(&mut y);
        (0..n).map(|j| y[fold_index(j, n)]).collect()
    }

    fn solve_in_place(&self, y: &mut [C64]) {
        let (n, kb, w) = (self.n, self.kb, self.kb + 1);
        for i in 0..n {
            let mut s = y[i];
            for m in i.saturating_sub(kb)..i {
                s -= self.l[i * w + (i - m)] * y[m];
            }
            y[i] = s / self.l[i * w].re;
        }
        for j in (0..n).rev() {
            let mut s = y[j];
            for i in (j + 1)..(j + kb + 1).min(n) {
                s -= self.l[i * w + (i - j)].conj() * y[i];
            }
            y[j] = s / self.l[j * w].re;
        }
    }
}
