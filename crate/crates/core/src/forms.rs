//! L-valued (p,q)-forms on a fiber, stored on strictly increasing
//! multi-indices `dz^I ∧ dz̄^J` (holomorphic part first).
//!
//! Interior products contract the first slot:
//! `ι_{∂_γ}(dz^I ∧ dz̄^J) = (-1)^{pos(γ, I)} dz^{I∖γ} ∧ dz̄^J` and
//! `ι_{∂_γ̄}(dz^I ∧ dz̄^J) = (-1)^{|I| + pos(γ, J)} dz^I ∧ dz̄^{J∖γ}`.
//! The cup products of a Kodaira–Spencer form `A = A^γ_δ̄ dz̄^δ ⊗ ∂_γ` are
//! `A∪ψ = A^γ_δ̄ dz̄^δ ∧ ι_{∂_γ}ψ` and `Ā∪ψ = conj(A^γ_δ̄) dz^δ ∧ ι_{∂_γ̄}ψ`.

use crate::error::{Error, Result};
use crate::fiber_geometry::TorusFiber;
use crate::oracles;
use crate::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// Strictly increasing subsets of {0..n} of size k, lexicographic.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k <= n {
        rec(0, n, k, &mut Vec::new(), &mut out);
    }
    out
}

fn subset_index(n: usize, set: &[usize]) -> usize {
    subsets(n, set.len()).iter().position(|s| s == set).expect("valid subset")
}

/// Insert `x` into sorted `set`; returns (new set, number of elements before x) or None if present.
fn insert(set: &[usize], x: usize) -> Option<(Vec<usize>, usize)> {
    if set.contains(&x) {
        return None;
    }
    let pos = set.iter().filter(|&&e| e < x).count();
    let mut s = set.to_vec();
    s.insert(pos, x);
    Some((s, pos))
}

fn remove(set: &[usize], x: usize) -> Option<(Vec<usize>, usize)> {
    let pos = set.iter().position(|&e| e == x)?;
    let mut s = set.to_vec();
    s.remove(pos);
    Some((s, pos))
}

fn sign(k: usize) -> f64 {
    if k.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PQForm {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub grid: usize,
    /// `comps[c][point]`, c = index(I) * C(n,q) + index(J).
    pub comps: Vec<Vec<C64>>,
}

impl PQForm {
    pub fn zeros(n: usize, p: usize, q: usize, grid: usize) -> Result<Self> {
        if p > n || q > n {
            return Err(Error::BidegreeOutOfRange { p, q, n });
        }
        let nc = subsets(n, p).len() * subsets(n, q).len();
        let npts = (grid * grid).pow(n as u32);
        Ok(Self { n, p, q, grid, comps: vec![vec![C64::new(0.0, 0.0); npts]; nc] })
    }

    pub fn from_comps(n: usize, p: usize, q: usize, grid: usize, comps: Vec<Vec<C64>>) -> Result<Self> {
        let z = Self::zeros(n, p, q, grid)?;
        if comps.len() != z.comps.len() || comps.iter().any(|c| c.len() != z.npts()) {
            return Err(Error::DimensionMismatch("component layout".into()));
        }
        Ok(Self { comps, ..z })
    }

    /// Scalar field as a (0,0)-form on a one-factor fiber.
    pub fn scalar(n: usize, grid: usize, values: Vec<C64>) -> Result<Self> {
        Self::from_comps(n, 0, 0, grid, vec![values])
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.n, self.p, self.q, self.grid).expect("valid bidegree")
    }

    pub fn npts(&self) -> usize {
        (self.grid * self.grid).pow(self.n as u32)
    }

    pub fn ncomp(&self) -> usize {
        self.comps.len()
    }

    /// (I, J) for every stored component.
    pub fn index_pairs(&self) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
        let hs = subsets(self.n, self.p);
        let as_ = subsets(self.n, self.q);
        let mut a = Vec::new();
        let mut b = Vec::new();
        for i in &hs {
            for j in &as_ {
                a.push(i.clone());
                b.push(j.clone());
            }
        }
        (a, b)
    }

    pub fn component_index(&self, i: &[usize], j: &[usize]) -> usize {
        subset_index(self.n, i) * subsets(self.n, self.q).len() + subset_index(self.n, j)
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.n != other.n || self.grid != other.grid {
            return Err(Error::FiberMismatch);
        }
        if self.p != other.p || self.q != other.q {
            return Err(Error::BidegreeMismatch(self.p, self.q, other.p, other.q));
        }
        Ok(())
    }

    pub fn scale(&self, a: C64) -> Self {
        let mut o = self.clone();
        o.comps.iter_mut().flatten().for_each(|v| *v *= a);
        o
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let mut o = self.clone();
        for (a, b) in o.comps.iter_mut().zip(&other.comps) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        Ok(o)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    /// Pointwise multiplication of every component by a scalar field.
    pub fn mul_field(&self, f: &[C64]) -> Self {
        let mut o = self.clone();
        for c in o.comps.iter_mut() {
            for (x, y) in c.iter_mut().zip(f) {
                *x *= y;
            }
        }
        o
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().flatten().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// Flatten to a single vector (component-major).
    pub fn to_vec(&self) -> Vec<C64> {
        self.comps.concat()
    }

    pub fn from_vec_like(&self, v: &[C64]) -> Self {
        let np = self.npts();
        let mut o = self.clone();
        for (c, comp) in o.comps.iter_mut().enumerate() {
            comp.copy_from_slice(&v[c * np..(c + 1) * np]);
        }
        o
    }
}

fn det_minor(gi: &[C64], n: usize, rows: &[usize], cols: &[usize]) -> C64 {
    match rows.len() {
        0 => C64::new(1.0, 0.0),
        1 => gi[rows[0] * n + cols[0]],
        2 => gi[rows[0] * n + cols[0]] * gi[rows[1] * n + cols[1]] - gi[rows[0] * n + cols[1]] * gi[rows[1] * n + cols[0]],
        _ => unreachable!("n <= 2"),
    }
}

/// Pointwise weight matrix `W[c'][c]` with `ψ·χ̄ = Σ ψ_c W[c'][c] conj(χ_{c'})`,
/// built from minors of g^{-1}.
pub fn pointwise_weights(fiber: &TorusFiber, p: usize, q: usize, point: usize) -> Vec<C64> {
    let n = fiber.n;
    let gi = fiber.inverse_metric_at(point);
    let hs = subsets(n, p);
    let as_ = subsets(n, q);
    let mut idx = Vec::new();
    for i in &hs {
        for j in &as_ {
            idx.push((i.clone(), j.clone()));
        }
    }
    let nc = idx.len();
    let mut w = vec![C64::new(0.0, 0.0); nc * nc];
    for (cp, (k, l)) in idx.iter().enumerate() {
        for (c, (i, j)) in idx.iter().enumerate() {
            w[cp * nc + c] = det_minor(&gi, n, k, i) * det_minor(&gi, n, j, l);
        }
    }
    w
}

/// Pointwise inner product field ψ·χ̄ (no volume factor).
pub fn pointwise_pairing(psi: &PQForm, chi: &PQForm, fiber: &TorusFiber) -> Result<Vec<C64>> {
    psi.check_same(chi)?;
    if fiber.n != psi.n || fiber.grid != psi.grid {
        return Err(Error::FiberMismatch);
    }
    let nc = psi.ncomp();
    let flat = fiber.is_flat_constant();
    let w0 = pointwise_weights(fiber, psi.p, psi.q, 0);
    Ok((0..psi.npts())
        .map(|pt| {
            let wl;
            let w = if flat {
                &w0
            } else {
                wl = pointwise_weights(fiber, psi.p, psi.q, pt);
                &wl
            };
            let mut acc = C64::new(0.0, 0.0);
            for cp in 0..nc {
                for c in 0..nc {
                    acc += psi.comps[c][pt] * w[cp * nc + c] * chi.comps[cp][pt].conj();
                }
            }
            acc
        })
        .collect())
}

/// ⟨ψ, χ⟩ = Σ_points (ψ·χ̄) g dV; linear in ψ, antilinear in χ.
pub fn inner_product(psi: &PQForm, chi: &PQForm, fiber: &TorusFiber) -> Result<C64> {
    let pw = pointwise_pairing(psi, chi, fiber)?;
    Ok(pw.iter().zip(&fiber.gdv).map(|(a, w)| a * w).sum())
}

pub fn norm(psi: &PQForm, fiber: &TorusFiber) -> f64 {
    inner_product(psi, psi, fiber).map(|v| v.re.max(0.0).sqrt()).unwrap_or(f64::NAN)
}

/// Tangent-valued (0,1)-form `A^α_β̄` per point, `comps[p*n*n + α*n + β]`.
#[derive(Debug, Clone, PartialEq)]
pub struct KodairaSpencerForm {
    pub n: usize,
    pub grid: usize,
    pub comps: Vec<C64>,
    /// Base direction label (always 0: one-dimensional base).
    pub direction: usize,
}

impl KodairaSpencerForm {
    pub fn zeros(n: usize, grid: usize) -> Self {
        Self { n, grid, comps: vec![C64::new(0.0, 0.0); (grid * grid).pow(n as u32) * n * n], direction: 0 }
    }

    pub fn constant(n: usize, grid: usize, a: C64) -> Self {
        let mut k = Self::zeros(n, grid);
        let np = (grid * grid).pow(n as u32);
        for p in 0..np {
            for al in 0..n {
                k.comps[p * n * n + al * n + al] = a;
            }
        }
        k
    }

    pub fn at(&self, p: usize, alpha: usize, beta: usize) -> C64 {
        self.comps[p * self.n * self.n + alpha * self.n + beta]
    }

    /// ∫|A|² g dV with |A|² = g_{αβ̄} g^{δ̄γ}... reduced for diagonal metrics:
    /// Σ |A^α_β̄|² g_α / g_β.
    pub fn norm_sq(&self, fiber: &TorusFiber) -> f64 {
        let n = self.n;
        (0..fiber.npts())
            .map(|p| {
                let g = fiber.metric_at(p);
                let mut acc = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        acc += self.at(p, a, b).norm_sqr() * g[a * n + a].re / g[b * n + b].re;
                    }
                }
                acc * fiber.gdv[p]
            })
            .sum()
    }

    /// Lowered tensor A_{β̄δ̄} = g_{αβ̄} A^α_δ̄ and its max antisymmetric part
    /// relative to max |A|.
    pub fn symmetry_defect(&self, fiber: &TorusFiber) -> f64 {
        let n = self.n;
        let mut num: f64 = 0.0;
        let mut den: f64 = 0.0;
        for p in 0..fiber.npts() {
            let g = fiber.metric_at(p);
            let low = |b: usize, dd: usize| -> C64 { (0..n).map(|a| g[a * n + b] * self.at(p, a, dd)).sum() };
            for b in 0..n {
                for dd in 0..n {
                    num = num.max((low(b, dd) - low(dd, b)).norm());
                    den = den.max(low(b, dd).norm());
                }
            }
        }
        if den == 0.0 {
            0.0
        } else {
            num / den
        }
    }
}

/// Interior product with ∂_γ (holomorphic) or ∂_γ̄ (antiholomorphic),
/// scaled pointwise by `coef`.
fn interior(psi: &PQForm, gamma: usize, holo: bool, coef: &dyn Fn(usize) -> C64) -> PQForm {
    let (np, nq) = if holo { (psi.p - 1, psi.q) } else { (psi.p, psi.q - 1) };
    let mut out = PQForm::zeros(psi.n, np, nq, psi.grid).expect("valid");
    let (ii, jj) = psi.index_pairs();
    for (c, (i, j)) in ii.iter().zip(&jj).enumerate() {
        let hit = if holo { remove(i, gamma) } else { remove(j, gamma) };
        let Some((rest, pos)) = hit else { continue };
        let (ni, nj, sg) = if holo { (rest, j.clone(), sign(pos)) } else { (i.clone(), rest, sign(i.len() + pos)) };
        let oc = out.component_index(&ni, &nj);
        for pt in 0..psi.npts() {
            out.comps[oc][pt] += sg * coef(pt) * psi.comps[c][pt];
        }
    }
    out
}

/// dz^δ ∧ ψ (holo) or dz̄^δ ∧ ψ (antiholo).
pub(crate) fn wedge_basis(psi: &PQForm, delta: usize, holo: bool) -> PQForm {
    let (np, nq) = if holo { (psi.p + 1, psi.q) } else { (psi.p, psi.q + 1) };
    let mut out = PQForm::zeros(psi.n, np, nq, psi.grid).expect("valid");
    let (ii, jj) = psi.index_pairs();
    for (c, (i, j)) in ii.iter().zip(&jj).enumerate() {
        let hit = if holo { insert(i, delta) } else { insert(j, delta) };
        let Some((new, pos)) = hit else { continue };
        let (ni, nj, sg) = if holo { (new, j.clone(), sign(pos)) } else { (i.clone(), new, sign(i.len() + pos)) };
        let oc = out.component_index(&ni, &nj);
        for pt in 0..psi.npts() {
            out.comps[oc][pt] += sg * psi.comps[c][pt];
        }
    }
    out
}

/// Transpose of [`wedge_basis`] as a map on component arrays.
pub(crate) fn wedge_basis_adjoint(chi: &PQForm, delta: usize, holo: bool) -> PQForm {
    let (np, nq) = if holo { (chi.p - 1, chi.q) } else { (chi.p, chi.q - 1) };
    let mut out = PQForm::zeros(chi.n, np, nq, chi.grid).expect("valid");
    let (ii, jj) = out.index_pairs();
    for (c, (i, j)) in ii.iter().zip(&jj).enumerate() {
        let hit = if holo { insert(i, delta) } else { insert(j, delta) };
        let Some((new, pos)) = hit else { continue };
        let (ni, nj, sg) = if holo { (new, j.clone(), sign(pos)) } else { (i.clone(), new, sign(i.len() + pos)) };
        let ic = chi.component_index(&ni, &nj);
        for pt in 0..chi.npts() {
            out.comps[c][pt] += sg * chi.comps[ic][pt];
        }
    }
    out
}

pub(crate) fn accumulate(acc: &mut PQForm, x: &PQForm) {
    for (a, b) in acc.comps.iter_mut().zip(&x.comps) {
        for (u, v) in a.iter_mut().zip(b) {
            *u += v;
        }
    }
}

/// A∪ψ : (p,q) → (p-1, q+1).
pub fn cup_ks(a: &KodairaSpencerForm, psi: &PQForm) -> Result<PQForm> {
    if psi.p == 0 || psi.q >= psi.n {
        return Err(Error::BidegreeOutOfRange { p: psi.p, q: psi.q, n: psi.n });
    }
    if a.n != psi.n || a.grid != psi.grid {
        return Err(Error::FiberMismatch);
    }
    let mut out = PQForm::zeros(psi.n, psi.p - 1, psi.q + 1, psi.grid)?;
    for g in 0..psi.n {
        for d in 0..psi.n {
            let contracted = interior(psi, g, true, &|pt| a.at(pt, g, d));
            accumulate(&mut out, &wedge_basis(&contracted, d, false));
        }
    }
    Ok(out)
}

/// Ā∪ψ : (p,q) → (p+1, q-1), using the complex conjugate of `a`.
pub fn cup_ks_conj(a: &KodairaSpencerForm, psi: &PQForm) -> Result<PQForm> {
    if psi.q == 0 || psi.p >= psi.n {
        return Err(Error::BidegreeOutOfRange { p: psi.p, q: psi.q, n: psi.n });
    }
    if a.n != psi.n || a.grid != psi.grid {
        return Err(Error::FiberMismatch);
    }
    let mut out = PQForm::zeros(psi.n, psi.p + 1, psi.q - 1, psi.grid)?;
    for g in 0..psi.n {
        for d in 0..psi.n {
            let contracted = interior(psi, g, false, &|pt| a.at(pt, g, d).conj());
            accumulate(&mut out, &wedge_basis(&contracted, d, true));
        }
    }
    Ok(out)
}

/// Vector field of pure type on the fiber, `v[p*n + α]`.
#[derive(Debug, Clone, PartialEq)]
pub enum FiberVector {
    Holomorphic(Vec<C64>),
    Antiholomorphic(Vec<C64>),
}

/// Interior product δ_v ψ with first-slot convention.
pub fn contract_vector(v: &FiberVector, psi: &PQForm) -> Result<PQForm> {
    let (field, holo) = match v {
        FiberVector::Holomorphic(f) => (f, true),
        FiberVector::Antiholomorphic(f) => (f, false),
    };
    if (holo && psi.p == 0) || (!holo && psi.q == 0) {
        return Err(Error::BidegreeOutOfRange { p: psi.p, q: psi.q, n: psi.n });
    }
    if field.len() != psi.npts() * psi.n {
        return Err(Error::DimensionMismatch("vector field length".into()));
    }
    let (np, nq) = if holo { (psi.p - 1, psi.q) } else { (psi.p, psi.q - 1) };
    let mut out = PQForm::zeros(psi.n, np, nq, psi.grid)?;
    let n = psi.n;
    for g in 0..n {
        accumulate(&mut out, &interior(psi, g, holo, &|pt| field[pt * n + g]));
    }
    Ok(out)
}

/// Complex conjugation (p,q) → (q,p):
/// conj(ψ_{IJ} dz^I ∧ dz̄^J) = (-1)^{pq} conj(ψ_{IJ}) dz^J ∧ dz̄^I.
pub fn conjugate(psi: &PQForm) -> PQForm {
    let mut out = PQForm::zeros(psi.n, psi.q, psi.p, psi.grid).expect("valid");
    let (ii, jj) = psi.index_pairs();
    let sg = sign(psi.p * psi.q);
    for (c, (i, j)) in ii.iter().zip(&jj).enumerate() {
        let oc = out.component_index(j, i);
        for pt in 0..psi.npts() {
            out.comps[oc][pt] = sg * psi.comps[c][pt].conj();
        }
    }
    out
}

/// Smooth random section of the degree-d bundle on one factor:
/// `θ_k(x + τy, τ) e^{iπ d τ y²} · Σ_{|a|,|b|≤1} c_{ab} e^{2πi(ax + by)}`
/// (in the unitary frame). With d = 0 the theta factor is dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothSection {
    pub d: u32,
    pub k: u32,
    pub coeffs: [[C64; 3]; 3],
}

impl SmoothSection {
    pub fn random(d: u32, rng: &mut ChaCha8Rng) -> Self {
        let mut coeffs = [[C64::new(0.0, 0.0); 3]; 3];
        for row in coeffs.iter_mut() {
            for c in row.iter_mut() {
                *c = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        let k = if d > 0 { rng.gen_range(0..d) } else { 0 };
        Self { d, k, coeffs }
    }

    pub fn trig(&self, x: f64, y: f64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (ia, a) in (-1i32..=1).enumerate() {
            for (ib, b) in (-1i32..=1).enumerate() {
                acc += self.coeffs[ia][ib] * C64::from_polar(1.0, 2.0 * PI * (a as f64 * x + b as f64 * y));
            }
        }
        acc
    }

    pub fn eval(&self, x: f64, y: f64, tau: C64) -> C64 {
        if self.d == 0 {
            return self.trig(x, y);
        }
        let z = x + tau * y;
        let th = oracles::theta_value(self.k, self.d, z, tau, oracles::DEFAULT_TRUNCATION).expect("valid");
        th * (C64::new(0.0, PI * self.d as f64) * tau * y * y).exp() * self.trig(x, y)
    }
}

/// Random smooth (p,q)-form: every component is an independent smooth
/// section (products over factors when n = 2).
pub fn random_smooth_form(taus: &[C64], degrees: &[u32], grid: usize, p: usize, q: usize, seed: u64) -> Result<PQForm> {
    let n = taus.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = PQForm::zeros(n, p, q, grid)?;
    let h = 1.0 / grid as f64;
    let m = grid * grid;
    for c in 0..out.ncomp() {
        let secs: Vec<SmoothSection> = degrees.iter().map(|&d| SmoothSection::random(d, &mut rng)).collect();
        let factor_vals: Vec<Vec<C64>> = (0..n)
            .map(|f| {
                (0..m)
                    .map(|l| secs[f].eval((l / grid) as f64 * h, (l % grid) as f64 * h, taus[f]))
                    .collect()
            })
            .collect();
        for pt in 0..out.npts() {
            let mut v = C64::new(1.0, 0.0);
            let mut rest = pt;
            for f in (0..n).rev() {
                v *= factor_vals[f][rest % m];
                rest /= m;
            }
            out.comps[c][pt] = v;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiber_geometry::build_fiber;
    use crate::line_bundle::build_bundle;

    fn setup(n: usize) -> (TorusFiber, Vec<C64>, Vec<u32>) {
        let taus: Vec<C64> = (0..n).map(|f| C64::new(0.2 * f as f64, 1.0 + 0.5 * f as f64)).collect();
        let degrees: Vec<u32> = (0..n).map(|f| 1 + f as u32).collect();
        let b = build_bundle(n, &taus, &degrees, 8, None).unwrap();
        (build_fiber(&b).unwrap(), taus, degrees)
    }

    #[test]
    fn contraction_example() {
        let (fib, _, _) = setup(1);
        let f: Vec<C64> = (0..fib.npts()).map(|i| C64::new(i as f64, 1.0)).collect();
        let psi = PQForm::from_comps(1, 1, 1, 8, vec![f.clone()]).unwrap();
        let v = FiberVector::Holomorphic(vec![C64::new(1.0, 0.0); fib.npts()]);
        let r = contract_vector(&v, &psi).unwrap();
        assert_eq!((r.p, r.q), (0, 1));
        assert_eq!(r.comps[0], f);
        let vb = FiberVector::Antiholomorphic(vec![C64::new(1.0, 0.0); fib.npts()]);
        let rb = contract_vector(&vb, &psi).unwrap();
        assert_eq!(rb.comps[0][3], -f[3]);
    }

    #[test]
    fn double_contraction_vanishes() {
        let (_, taus, degrees) = setup(2);
        let psi = random_smooth_form(&taus, &degrees, 8, 2, 1, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let field: Vec<C64> = (0..psi.npts() * 2).map(|_| C64::new(rng.gen(), rng.gen())).collect();
        let v = FiberVector::Holomorphic(field);
        let once = contract_vector(&v, &psi).unwrap();
        let twice = contract_vector(&v, &once).unwrap();
        assert!(twice.max_abs() < 1e-12 * psi.max_abs());
    }

    #[test]
    fn hermitian_inner_product() {
        let (fib, taus, degrees) = setup(2);
        for (p, q) in [(0, 0), (1, 0), (1, 1), (2, 1), (2, 2)] {
            let a = random_smooth_form(&taus, &degrees, 8, p, q, 1).unwrap();
            let b = random_smooth_form(&taus, &degrees, 8, p, q, 2).unwrap();
            let ab = inner_product(&a, &b, &fib).unwrap();
            let ba = inner_product(&b, &a, &fib).unwrap();
            assert!((ab - ba.conj()).norm() < 1e-12 * ab.norm().max(1.0));
            assert!(inner_product(&a, &a, &fib).unwrap().re > 0.0);
        }
    }

    #[test]
    fn conjugation_involutive_and_isometric() {
        let (fib, taus, degrees) = setup(2);
        let a = random_smooth_form(&taus, &degrees, 8, 2, 1, 3).unwrap();
        let b = random_smooth_form(&taus, &degrees, 8, 2, 1, 5).unwrap();
        assert_eq!(conjugate(&conjugate(&a)), a);
        let lhs = inner_product(&conjugate(&a), &conjugate(&b), &fib).unwrap();
        let rhs = inner_product(&a, &b, &fib).unwrap().conj();
        assert!((lhs - rhs).norm() < 1e-10 * rhs.norm().max(1.0));
    }

    #[test]
    fn cup_bidegrees_and_errors() {
        let (_, taus, degrees) = setup(1);
        let a = KodairaSpencerForm::constant(1, 8, C64::new(0.0, 0.5));
        let psi = random_smooth_form(&taus, &degrees, 8, 1, 0, 7).unwrap();
        let r = cup_ks(&a, &psi).unwrap();
        assert_eq!((r.p, r.q), (0, 1));
        for pt in 0..r.npts() {
            assert!((r.comps[0][pt] - C64::new(0.0, 0.5) * psi.comps[0][pt]).norm() < 1e-14);
        }
        let s = random_smooth_form(&taus, &degrees, 8, 0, 1, 7).unwrap();
        assert!(matches!(cup_ks(&a, &s), Err(Error::BidegreeOutOfRange { .. })));
        let rc = cup_ks_conj(&a, &s).unwrap();
        assert!((rc.comps[0][5] - C64::new(0.0, -0.5) * s.comps[0][5]).norm() < 1e-14);
        let z = KodairaSpencerForm::zeros(1, 8);
        assert!(cup_ks(&z, &psi).unwrap().max_abs() == 0.0);
    }

    #[test]
    fn cup_norm_is_half_at_tau_i() {
        let b = build_bundle(1, &[C64::new(0.0, 1.0)], &[1], 16, None).unwrap();
        let fib = build_fiber(&b).unwrap();
        let a = KodairaSpencerForm::constant(1, 16, C64::new(0.0, 0.5));
        let psi = random_smooth_form(&[C64::new(0.0, 1.0)], &[1], 16, 1, 0, 2).unwrap();
        let r = cup_ks(&a, &psi).unwrap();
        // |A|² g_{zz̄}/g_{zz̄}: the (0,1) and (1,0) weights are both g^{-1}.
        assert!((norm(&r, &fib) - 0.5 * norm(&psi, &fib)).abs() < 1e-12);
    }
}
