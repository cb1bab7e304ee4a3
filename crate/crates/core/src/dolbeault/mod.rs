//! ∂̄ and ∂ on L-valued (p,q)-forms, their adjoints for the weighted
//! inner product, Laplacians, harmonic projection and shifted Green's
//! operators.
//!
//! `∂̄ψ = Σ_f dz̄^f ∧ D̄_f ψ` and `∂ψ = Σ_f dz^f ∧ D_f ψ` with the
//! single-factor lattice operators of [`crate::lattice`]. Operators of
//! different factors act on different indices and commute, so
//! `∂̄∂̄ = ∂∂ = 0` exactly. Adjoints are `W_in⁻¹ Tᴴ W_out` with the diagonal
//! pointwise weights of [`crate::forms::pointwise_weights`].

pub mod banded;
pub mod chain;
pub mod window;

use crate::error::{Error, Result};
use crate::fiber_geometry::TorusFiber;
use crate::forms::{self, PQForm};
use crate::lattice;
use crate::line_bundle::BundleMetric;
use crate::C64;
use chain::ChainModel;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use window::ChainSolver;

/// Blocks up to this dimension are diagonalized densely when the Landau
/// chain structure is not available.
pub const DENSE_LIMIT: usize = 1600;
/// Eigenpairs at or below this value are resolved explicitly.
pub const WINDOW_CUTOFF: f64 = 3.5;
/// Relative kernel threshold.
pub const KERNEL_REL: f64 = 1e-6;
/// Required ratio between the first non-kernel eigenvalue and ε₀, and
/// between ε₀ and the largest kernel eigenvalue.
pub const GAP_RATIO: f64 = 1e2;
/// Lift energy ‖Wv‖/‖v‖ above which a near-kernel mode is a lattice artifact.
pub const ARTIFACT_LIFT: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum LaplacianKind {
    Del,
    Dbar,
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockSpectrum {
    pub kind: LaplacianKind,
    pub p: usize,
    pub q: usize,
    /// Window eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    pub lift_energy: Vec<f64>,
    pub artifact: Vec<bool>,
    pub lambda_max: f64,
    /// ε₀.
    pub threshold: f64,
    pub kernel_dim: usize,
    /// (first eigenvalue above ε₀) / ε₀.
    pub gap_ratio: f64,
    /// Lower bound for eigenvalues outside the window.
    pub next_above: f64,
    pub complete: bool,
    pub max_residual: f64,
    pub orthonormality: f64,
}

#[derive(Debug, Clone)]
enum Rep {
    Chain { scale: f64 },
    Dense { sqrt_w: Vec<f64> },
}

#[derive(Debug)]
pub struct BlockSolver {
    rep: Rep,
    solvers: Vec<ChainSolver>,
    /// (chain, representation vector) of every window eigenpair.
    window: Vec<(usize, Vec<C64>)>,
    pub spectrum: BlockSpectrum,
    /// W-orthonormal eigenforms, parallel to `spectrum.eigenvalues`.
    pub eigenforms: Vec<PQForm>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GreenDiagnostics {
    /// ‖P_band ψ‖/‖ψ‖ for the excluded band |λ-1| < ε₁ (σ = -1 only).
    pub band_mass: f64,
    pub band_modes: usize,
    pub harmonic_mass: f64,
    pub iterations: usize,
    pub epsilon1: f64,
}

#[derive(Debug, Clone)]
pub struct HodgeParts {
    pub harmonic: PQForm,
    pub exact: PQForm,
    pub coexact: PQForm,
}

#[derive(Debug)]
pub struct DolbeaultComplex {
    pub bundle: BundleMetric,
    pub fiber: TorusFiber,
    /// ∂̄∂̄ = 0 and ∂∂ = 0 hold exactly (always true for this construction).
    pub exact_nilpotent: bool,
    weights: HashMap<(usize, usize), Vec<Vec<f64>>>,
    chain: Option<ChainModel>,
    cache: Mutex<HashMap<(LaplacianKind, usize, usize), Arc<BlockSolver>>>,
}

pub fn build_complex(fiber: &TorusFiber, bundle: &BundleMetric) -> Result<DolbeaultComplex> {
    if fiber.n != bundle.n || fiber.grid != bundle.grid {
        return Err(Error::FiberMismatch);
    }
    for p in 0..fiber.npts() {
        let g = fiber.metric_at(p);
        for a in 0..fiber.n {
            if !(g[a * fiber.n + a].re > 0.0) {
                return Err(Error::NonPositiveMetric { point: p, value: g[a * fiber.n + a].re });
            }
        }
    }
    let n = fiber.n;
    let mut weights = HashMap::new();
    for p in 0..=n {
        for q in 0..=n {
            let nc = forms::subsets(n, p).len() * forms::subsets(n, q).len();
            let mut w = vec![vec![0.0; fiber.npts()]; nc];
            for pt in 0..fiber.npts() {
                let pw = forms::pointwise_weights(fiber, p, q, pt);
                for (c, wc) in w.iter_mut().enumerate() {
                    for c2 in 0..nc {
                        if c2 != c && pw[c2 * nc + c].norm() > 1e-14 * pw[c * nc + c].norm() {
                            return Err(Error::Unsupported("non-diagonal fiber metric".into()));
                        }
                    }
                    wc[pt] = pw[c * nc + c].re * fiber.gdv[pt];
                }
            }
            weights.insert((p, q), w);
        }
    }
    let chain = if n == 1 && bundle.is_unperturbed() && fiber.is_flat_constant() {
        ChainModel::detect(&bundle.factors[0].links, bundle.factors[0].weight.d)
    } else {
        None
    };
    Ok(DolbeaultComplex {
        bundle: bundle.clone(),
        fiber: fiber.clone(),
        exact_nilpotent: true,
        weights,
        chain,
        cache: Mutex::new(HashMap::new()),
    })
}

impl DolbeaultComplex {
    pub fn n(&self) -> usize {
        self.fiber.n
    }

    pub fn block_dim(&self, p: usize, q: usize) -> usize {
        self.weights[&(p, q)].len() * self.fiber.npts()
    }

    pub fn has_fast_path(&self) -> bool {
        self.chain.is_some()
    }

    fn check(&self, psi: &PQForm) -> Result<()> {
        if psi.n != self.n() || psi.grid != self.fiber.grid {
            return Err(Error::FiberMismatch);
        }
        Ok(())
    }

    pub fn weights(&self, p: usize, q: usize) -> &[Vec<f64>] {
        &self.weights[&(p, q)]
    }

    pub fn inner(&self, a: &PQForm, b: &PQForm) -> C64 {
        let w = &self.weights[&(a.p, a.q)];
        let mut acc = C64::new(0.0, 0.0);
        for (c, wc) in w.iter().enumerate() {
            for (pt, wv) in wc.iter().enumerate() {
                acc += a.comps[c][pt] * b.comps[c][pt].conj() * wv;
            }
        }
        acc
    }

    pub fn norm(&self, a: &PQForm) -> f64 {
        self.inner(a, a).re.max(0.0).sqrt()
    }

    fn weigh(&self, psi: &PQForm, inverse: bool) -> PQForm {
        let w = &self.weights[&(psi.p, psi.q)];
        let mut o = psi.clone();
        for (c, comp) in o.comps.iter_mut().enumerate() {
            for (pt, v) in comp.iter_mut().enumerate() {
                *v *= if inverse { 1.0 / w[c][pt] } else { w[c][pt] };
            }
        }
        o
    }

    fn componentwise(&self, psi: &PQForm, f: usize, op: fn(&[C64], &lattice::Links, &lattice::FactorLayout, C64) -> Vec<C64>) -> PQForm {
        let fb = &self.bundle.factors[f];
        let lay = self.bundle.layout(f);
        let mut o = psi.clone();
        for comp in o.comps.iter_mut() {
            *comp = op(comp, &fb.links, &lay, fb.weight.tau);
        }
        o
    }

    fn exterior(&self, psi: &PQForm, holo: bool) -> Result<PQForm> {
        self.check(psi)?;
        let n = self.n();
        if (holo && psi.p >= n) || (!holo && psi.q >= n) {
            return Err(Error::BidegreeOutOfRange { p: psi.p + holo as usize, q: psi.q + !holo as usize, n });
        }
        let (p, q) = if holo { (psi.p + 1, psi.q) } else { (psi.p, psi.q + 1) };
        let mut out = PQForm::zeros(n, p, q, psi.grid)?;
        for f in 0..n {
            let t = if holo {
                self.componentwise(psi, f, lattice::del_component)
            } else {
                self.componentwise(psi, f, lattice::dbar_component)
            };
            forms::accumulate(&mut out, &forms::wedge_basis(&t, f, holo));
        }
        Ok(out)
    }

    fn exterior_adjoint(&self, chi: &PQForm, holo: bool) -> Result<PQForm> {
        self.check(chi)?;
        let n = self.n();
        if (holo && chi.p == 0) || (!holo && chi.q == 0) {
            return Err(Error::BidegreeOutOfRange { p: chi.p, q: chi.q, n });
        }
        let wchi = self.weigh(chi, false);
        let (p, q) = if holo { (chi.p - 1, chi.q) } else { (chi.p, chi.q - 1) };
        let mut out = PQForm::zeros(n, p, q, chi.grid)?;
        for f in 0..n {
            let t = forms::wedge_basis_adjoint(&wchi, f, holo);
            // (D̄)ᴴ = -D and (D)ᴴ = -D̄.
            let d = if holo {
                self.componentwise(&t, f, lattice::dbar_component)
            } else {
                self.componentwise(&t, f, lattice::del_component)
            };
            forms::accumulate(&mut out, &d.scale(C64::new(-1.0, 0.0)));
        }
        Ok(self.weigh(&out, true))
    }

    pub fn dbar(&self, psi: &PQForm) -> Result<PQForm> {
        self.exterior(psi, false)
    }

    pub fn del(&self, psi: &PQForm) -> Result<PQForm> {
        self.exterior(psi, true)
    }

    pub fn dbar_adjoint(&self, chi: &PQForm) -> Result<PQForm> {
        self.exterior_adjoint(chi, false)
    }

    pub fn del_adjoint(&self, chi: &PQForm) -> Result<PQForm> {
        self.exterior_adjoint(chi, true)
    }

    /// □ψ = D*Dψ + DD*ψ, terms leaving the complex omitted.
    pub fn laplacian_apply(&self, kind: LaplacianKind, psi: &PQForm) -> Result<PQForm> {
        self.check(psi)?;
        let holo = kind == LaplacianKind::Del;
        let n = self.n();
        let mut out = psi.zeros_like();
        let up_ok = if holo { psi.p < n } else { psi.q < n };
        let down_ok = if holo { psi.p > 0 } else { psi.q > 0 };
        if up_ok {
            let up = self.exterior(psi, holo)?;
            forms::accumulate(&mut out, &self.exterior_adjoint(&up, holo)?);
        }
        if down_ok {
            let down = self.exterior_adjoint(psi, holo)?;
            forms::accumulate(&mut out, &self.exterior(&down, holo)?);
        }
        Ok(out)
    }

    pub fn laplacian(&self, kind: LaplacianKind, p: usize, q: usize) -> Result<Laplacian<'_>> {
        if p > self.n() || q > self.n() {
            return Err(Error::BidegreeOutOfRange { p, q, n: self.n() });
        }
        Ok(Laplacian { complex: self, kind, p, q })
    }

    /// max over random smooth unit forms of ‖(□_∂ − □_∂̄ − (n−p−q))ψ‖.
    pub fn bkn_defect(&self, p: usize, q: usize, trials: usize, seed: u64) -> Result<f64> {
        let n = self.n();
        if p > n || q > n {
            return Err(Error::BidegreeOutOfRange { p, q, n });
        }
        let c = n as f64 - p as f64 - q as f64;
        let mut worst: f64 = 0.0;
        for t in 0..trials {
            let psi = forms::random_smooth_form(&self.bundle.taus(), &self.bundle.degrees(), self.fiber.grid, p, q, seed.wrapping_add(t as u64))?;
            let psi = psi.scale(C64::new(1.0 / self.norm(&psi), 0.0));
            let a = self.laplacian_apply(LaplacianKind::Del, &psi)?;
            let b = self.laplacian_apply(LaplacianKind::Dbar, &psi)?;
            let r = a.sub(&b)?.sub(&psi.scale(C64::new(c, 0.0)))?;
            worst = worst.max(self.norm(&r));
        }
        Ok(worst)
    }

    // ---- spectral part ----

    fn to_rep(&self, solver: &BlockSolver, psi: &PQForm) -> Vec<Vec<C64>> {
        match &solver.rep {
            Rep::Chain { scale } => {
                let cm = self.chain.as_ref().expect("chain model");
                let mut v = cm.to_chains(&psi.comps[0]);
                v.iter_mut().flatten().for_each(|x| *x *= scale);
                v
            }
            Rep::Dense { sqrt_w } => vec![psi.to_vec().iter().zip(sqrt_w).map(|(x, s)| x * s).collect()],
        }
    }

    #[allow(clippy::wrong_self_convention)]
    fn from_rep(&self, solver: &BlockSolver, like: (usize, usize), v: &[Vec<C64>]) -> PQForm {
        let z = PQForm::zeros(self.n(), like.0, like.1, self.fiber.grid).expect("valid");
        match &solver.rep {
            Rep::Chain { scale } => {
                let cm = self.chain.as_ref().expect("chain model");
                let mut u = cm.from_chains(v);
                u.iter_mut().for_each(|x| *x /= scale);
                PQForm { comps: vec![u], ..z }
            }
            Rep::Dense { sqrt_w } => {
                let flat: Vec<C64> = v[0].iter().zip(sqrt_w).map(|(x, s)| x / s).collect();
                z.from_vec_like(&flat)
            }
        }
    }

    fn chain_ring(&self, cm: &ChainModel, c: usize, kind: LaplacianKind, p: usize, q: usize) -> banded::RingOp {
        let tau = self.bundle.factors[0].weight.tau;
        let g = self.fiber.metric_at(0)[0].re;
        let db = cm.dbar(c, tau);
        let dbh = db.adjoint();
        // One-factor blocks reduce to P = D̄ᴴD̄/g or Q = D̄D̄ᴴ/g.
        let use_p = match (kind, p, q) {
            (LaplacianKind::Dbar, _, 0) => true,
            (LaplacianKind::Dbar, _, _) => false,
            (LaplacianKind::Del, 1, _) => true,
            (LaplacianKind::Del, _, _) => false,
        };
        let m = if use_p { dbh.compose(&db) } else { db.compose(&dbh) };
        m.scale(C64::new(1.0 / g, 0.0))
    }

    fn build_solver(&self, kind: LaplacianKind, p: usize, q: usize) -> Result<BlockSolver> {
        let (rep, solvers) = if let Some(cm) = &self.chain {
            let w = self.weights[&(p, q)][0][0];
            let solvers = (0..cm.chains)
                .map(|c| ChainSolver::from_ring(self.chain_ring(cm, c, kind, p, q)))
                .collect::<Result<Vec<_>>>()?;
            (Rep::Chain { scale: w.sqrt() }, solvers)
        } else {
            let dim = self.block_dim(p, q);
            if dim > DENSE_LIMIT {
                return Err(Error::Unsupported(format!(
                    "spectral decomposition of a {dim}-dimensional block without the Landau-gauge fast path"
                )));
            }
            let sqrt_w: Vec<f64> = self.weights[&(p, q)].concat().iter().map(|w| w.sqrt()).collect();
            let z = PQForm::zeros(self.n(), p, q, self.fiber.grid)?;
            let mut m = DMatrix::<C64>::zeros(dim, dim);
            for col in 0..dim {
                let mut e = vec![C64::new(0.0, 0.0); dim];
                e[col] = C64::new(1.0 / sqrt_w[col], 0.0);
                let a = self.laplacian_apply(kind, &z.from_vec_like(&e))?.to_vec();
                for row in 0..dim {
                    m[(row, col)] = a[row] * sqrt_w[row];
                }
            }
            let m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
            (Rep::Dense { sqrt_w }, vec![ChainSolver::from_dense(m)])
        };
        let nchains = solvers.len();
        let degree_total: u32 = self.bundle.degrees().iter().product();
        let initial = (6 * degree_total as usize).div_ceil(nchains) + 6;
        let mut pairs = Vec::new();
        let mut next_above = f64::INFINITY;
        let mut complete = true;
        let mut lambda_max: f64 = 0.0;
        for (c, s) in solvers.iter().enumerate() {
            let w = s.window(WINDOW_CUTOFF, initial, 17 + c as u64)?;
            next_above = next_above.min(w.next_above);
            complete &= w.complete;
            lambda_max = lambda_max.max(s.lambda_max(29 + c as u64));
            for e in w.pairs {
                pairs.push((e.value, c, e.vector));
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut solver = BlockSolver {
            rep,
            solvers,
            window: Vec::new(),
            spectrum: BlockSpectrum {
                kind,
                p,
                q,
                eigenvalues: Vec::new(),
                lift_energy: Vec::new(),
                artifact: Vec::new(),
                lambda_max,
                threshold: 0.0,
                kernel_dim: 0,
                gap_ratio: 0.0,
                next_above,
                complete,
                max_residual: 0.0,
                orthonormality: 0.0,
            },
            eigenforms: Vec::new(),
        };
        let mut residual: f64 = 0.0;
        for (val, c, vec) in pairs {
            let mut rep = vec![Vec::new(); nchains];
            for (k, r) in rep.iter_mut().enumerate() {
                *r = if k == c { vec.clone() } else { vec![C64::new(0.0, 0.0); solver.solvers[k].len] };
            }
            let av = solver.solvers[c].apply(&vec);
            let r = av.iter().zip(&vec).map(|(a, v)| (a - val * v).norm_sqr()).sum::<f64>().sqrt();
            residual = residual.max(r);
            let form = self.from_rep(&solver, (p, q), &rep);
            let lift = self.lift_energy(&form);
            solver.spectrum.eigenvalues.push(val);
            solver.spectrum.lift_energy.push(lift);
            solver.spectrum.artifact.push(lift > ARTIFACT_LIFT);
            solver.eigenforms.push(form);
            solver.window.push((c, vec));
        }
        solver.spectrum.max_residual = residual;
        let mut ortho: f64 = 0.0;
        for (i, (ci, vi)) in solver.window.iter().enumerate() {
            for (cj, vj) in solver.window.iter().skip(i) {
                let ip: C64 = if ci == cj { vi.iter().zip(vj).map(|(a, b)| a.conj() * b).sum() } else { C64::new(0.0, 0.0) };
                let target = if std::ptr::eq(vi, vj) { 1.0 } else { 0.0 };
                ortho = ortho.max((ip - target).norm());
            }
        }
        solver.spectrum.orthonormality = ortho;
        let (threshold, kdim, ratio) = kernel_split(&solver.spectrum.eigenvalues);
        solver.spectrum.threshold = threshold;
        solver.spectrum.kernel_dim = kdim;
        solver.spectrum.gap_ratio = ratio;
        Ok(solver)
    }

    /// ‖(lift)v‖/‖v‖ summed over factors (unweighted l²).
    pub fn lift_energy(&self, v: &PQForm) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for comp in &v.comps {
            let mut acc = vec![C64::new(0.0, 0.0); comp.len()];
            for f in 0..self.n() {
                let fb = &self.bundle.factors[f];
                let l = lattice::lift(comp, &fb.links, &self.bundle.layout(f));
                acc.iter_mut().zip(&l).for_each(|(a, b)| *a += b);
            }
            num += acc.iter().map(|x| x.norm_sqr()).sum::<f64>();
            den += comp.iter().map(|x| x.norm_sqr()).sum::<f64>();
        }
        (num / den).sqrt()
    }

    /// Cached spectral data of one block.
    pub fn solver(&self, kind: LaplacianKind, p: usize, q: usize) -> Result<Arc<BlockSolver>> {
        if p > self.n() || q > self.n() {
            return Err(Error::BidegreeOutOfRange { p, q, n: self.n() });
        }
        if let Some(s) = self.cache.lock().expect("cache").get(&(kind, p, q)) {
            return Ok(s.clone());
        }
        let s = Arc::new(self.build_solver(kind, p, q)?);
        self.cache.lock().expect("cache").insert((kind, p, q), s.clone());
        Ok(s)
    }

    pub fn spectrum(&self, kind: LaplacianKind, p: usize, q: usize) -> Result<BlockSpectrum> {
        Ok(self.solver(kind, p, q)?.spectrum.clone())
    }

    fn kernel_indices(&self, s: &BlockSolver, resolved: bool) -> Result<Vec<usize>> {
        let sp = &s.spectrum;
        if sp.gap_ratio < GAP_RATIO {
            return Err(Error::AmbiguousKernel { threshold: sp.threshold, ratio: sp.gap_ratio });
        }
        Ok((0..sp.kernel_dim).filter(|&i| !(resolved && sp.artifact[i])).collect())
    }

    /// W-orthonormal basis of the numerical kernel of □_∂̄; with
    /// `resolved`, lattice artifact modes are left out.
    pub fn harmonic_basis(&self, p: usize, q: usize, resolved: bool) -> Result<Vec<PQForm>> {
        let s = self.solver(LaplacianKind::Dbar, p, q)?;
        Ok(self.kernel_indices(&s, resolved)?.into_iter().map(|i| s.eigenforms[i].clone()).collect())
    }

    fn project(&self, basis: &[PQForm], psi: &PQForm) -> PQForm {
        let mut out = psi.zeros_like();
        for b in basis {
            forms::accumulate(&mut out, &b.scale(self.inner(psi, b)));
        }
        out
    }

    /// Orthogonal projection onto the full numerical kernel of □_∂̄.
    pub fn harmonic_projection(&self, psi: &PQForm) -> Result<PQForm> {
        self.check(psi)?;
        Ok(self.project(&self.harmonic_basis(psi.p, psi.q, false)?, psi))
    }

    /// Projection onto the kernel without lattice artifact modes.
    pub fn resolved_harmonic_projection(&self, psi: &PQForm) -> Result<PQForm> {
        self.check(psi)?;
        Ok(self.project(&self.harmonic_basis(psi.p, psi.q, true)?, psi))
    }

    /// Solve (□ - μ)x = ψ on the complement of the window modes listed in
    /// `excluded`. Window modes are treated spectrally; the rest by the
    /// fixed point `x = (□+1)⁻¹(ψ + (1+μ)x)`.
    fn resolvent(&self, s: &BlockSolver, psi: &PQForm, mu: f64, excluded: &[bool]) -> Result<(PQForm, usize)> {
        let b = self.to_rep(s, psi);
        if mu == -1.0 {
            let x: Vec<Vec<C64>> = b.iter().enumerate().map(|(c, v)| s.solvers[c].solve_plus(v)).collect();
            return Ok((self.from_rep(s, (psi.p, psi.q), &x), 1));
        }
        let mut perp = b.clone();
        let mut x: Vec<Vec<C64>> = b.iter().map(|v| vec![C64::new(0.0, 0.0); v.len()]).collect();
        for (k, (c, v)) in s.window.iter().enumerate() {
            let coef: C64 = v.iter().zip(&b[*c]).map(|(a, bb)| a.conj() * bb).sum();
            perp[*c].iter_mut().zip(v).for_each(|(y, a)| *y -= coef * a);
            if !excluded[k] {
                let lam = s.spectrum.eigenvalues[k] - mu;
                x[*c].iter_mut().zip(v).for_each(|(y, a)| *y += coef / lam * a);
            }
        }
        let project_out = |y: &mut Vec<Vec<C64>>| {
            for (c, v) in &s.window {
                let coef: C64 = v.iter().zip(&y[*c]).map(|(a, bb)| a.conj() * bb).sum();
                y[*c].iter_mut().zip(v).for_each(|(t, a)| *t -= coef * a);
            }
        };
        let mut xp: Vec<Vec<C64>> = perp.iter().map(|v| vec![C64::new(0.0, 0.0); v.len()]).collect();
        let mut iterations = 0;
        if !s.spectrum.complete {
            let bnorm = perp.iter().flatten().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            loop {
                iterations += 1;
                let mut next: Vec<Vec<C64>> = perp
                    .iter()
                    .zip(&xp)
                    .enumerate()
                    .map(|(c, (bb, xx))| {
                        let rhs: Vec<C64> = bb.iter().zip(xx).map(|(u, v)| u + (1.0 + mu) * v).collect();
                        s.solvers[c].solve_plus(&rhs)
                    })
                    .collect();
                project_out(&mut next);
                let diff = next.iter().flatten().zip(xp.iter().flatten()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
                xp = next;
                if diff <= 1e-14 * bnorm.max(1e-300) || bnorm == 0.0 {
                    break;
                }
                if iterations > 2000 {
                    return Err(Error::NoConvergence("shifted Green iteration".into()));
                }
            }
        }
        for (a, b) in x.iter_mut().zip(&xp) {
            a.iter_mut().zip(b).for_each(|(u, v)| *u += v);
        }
        Ok((self.from_rep(s, (psi.p, psi.q), &x), iterations))
    }

    /// (□_∂̄ + σ)⁻¹ψ for σ = ±1. For σ = -1 the band |λ-1| < ε₁ is removed
    /// (and the harmonic space when `exclude_harmonic`); its relative mass
    /// in ψ is reported.
    pub fn green_shifted(&self, sigma: i32, psi: &PQForm, exclude_harmonic: bool) -> Result<(PQForm, GreenDiagnostics)> {
        self.check(psi)?;
        if sigma != 1 && sigma != -1 {
            return Err(Error::InvalidParameter(format!("shift {sigma} must be ±1")));
        }
        let s = self.solver(LaplacianKind::Dbar, psi.p, psi.q)?;
        let eps1 = epsilon1(self.fiber.grid);
        let total = self.norm(psi);
        let mut diag = GreenDiagnostics { band_mass: 0.0, band_modes: 0, harmonic_mass: 0.0, iterations: 0, epsilon1: eps1 };
        let nwin = s.spectrum.eigenvalues.len();
        let mut excluded = vec![false; nwin];
        let mut band = 0.0;
        let mut harm = 0.0;
        for k in 0..nwin {
            let lam = s.spectrum.eigenvalues[k];
            let c = self.inner(psi, &s.eigenforms[k]).norm_sqr();
            if k < s.spectrum.kernel_dim {
                harm += c;
                if sigma == -1 && exclude_harmonic {
                    excluded[k] = true;
                }
            }
            if (lam - 1.0).abs() < eps1 {
                band += c;
                diag.band_modes += 1;
                if sigma == -1 {
                    excluded[k] = true;
                }
            }
        }
        if total > 0.0 {
            diag.band_mass = band.sqrt() / total;
            diag.harmonic_mass = harm.sqrt() / total;
        }
        let (x, it) = self.resolvent(&s, psi, -sigma as f64, &excluded)?;
        diag.iterations = it;
        Ok((x, diag))
    }

    /// G_∂̄ψ: inverse of □_∂̄ on the orthogonal complement of its kernel.
    pub fn green(&self, psi: &PQForm) -> Result<PQForm> {
        self.check(psi)?;
        let s = self.solver(LaplacianKind::Dbar, psi.p, psi.q)?;
        let kernel = self.kernel_indices(&s, false)?;
        let mut excluded = vec![false; s.spectrum.eigenvalues.len()];
        kernel.iter().for_each(|&k| excluded[k] = true);
        Ok(self.resolvent(&s, psi, 0.0, &excluded)?.0)
    }

    /// ψ = Hψ + ∂̄(∂̄*Gψ) + ∂̄*(∂̄Gψ).
    pub fn hodge_decompose(&self, psi: &PQForm) -> Result<HodgeParts> {
        let harmonic = self.harmonic_projection(psi)?;
        let g = self.green(psi)?;
        let n = self.n();
        let exact = if psi.q > 0 { self.dbar(&self.dbar_adjoint(&g)?)? } else { psi.zeros_like() };
        let coexact = if psi.q < n { self.dbar_adjoint(&self.dbar(&g)?)? } else { psi.zeros_like() };
        Ok(HodgeParts { harmonic, exact, coexact })
    }
}

/// ε₁ = max(10⁻⁶, 10/N²).
pub fn epsilon1(grid: usize) -> f64 {
    (10.0 / (grid * grid) as f64).max(1e-6)
}

/// (ε₀, kernel dimension, gap ratio) from ascending window eigenvalues.
/// The reference scale is the largest resolved window eigenvalue: the
/// operator norm is dominated by the lift and sits far above the
/// continuum-relevant part of the spectrum.
pub fn kernel_split(values: &[f64]) -> (f64, usize, f64) {
    let top = values.last().copied().unwrap_or(0.0).max(1.0);
    let eps0 = KERNEL_REL * top;
    let k = values.iter().take_while(|&&v| v < eps0).count();
    let above = values.get(k).copied().unwrap_or(f64::INFINITY);
    let below = if k > 0 { values[k - 1].max(0.0) } else { 0.0 };
    let ratio = (above / eps0).min(if below > 0.0 { eps0 / below } else { f64::INFINITY });
    (eps0, k, ratio)
}

/// Handle to one Laplacian block.
#[derive(Debug, Clone, Copy)]
pub struct Laplacian<'a> {
    pub complex: &'a DolbeaultComplex,
    pub kind: LaplacianKind,
    pub p: usize,
    pub q: usize,
}

impl Laplacian<'_> {
    pub fn apply(&self, psi: &PQForm) -> Result<PQForm> {
        if (psi.p, psi.q) != (self.p, self.q) {
            return Err(Error::BidegreeMismatch(psi.p, psi.q, self.p, self.q));
        }
        self.complex.laplacian_apply(self.kind, psi)
    }

    pub fn spectrum(&self) -> Result<BlockSpectrum> {
        self.complex.spectrum(self.kind, self.p, self.q)
    }
}

/// Random W-unit form with independent Gaussian-free uniform entries.
pub fn random_form(c: &DolbeaultComplex, p: usize, q: usize, seed: u64) -> Result<PQForm> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = PQForm::zeros(c.n(), p, q, c.fiber.grid)?;
    f.comps.iter_mut().flatten().for_each(|v| *v = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let nrm = c.norm(&f);
    Ok(f.scale(C64::new(1.0 / nrm, 0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiber_geometry::build_fiber;
    use crate::line_bundle::build_bundle;

    fn complex(n: usize, d: u32, grid: usize) -> DolbeaultComplex {
        let taus: Vec<C64> = (0..n).map(|f| C64::new(0.1 * f as f64, 1.0 + 0.3 * f as f64)).collect();
        let degs: Vec<u32> = (0..n).map(|f| d + f as u32).collect();
        let b = build_bundle(n, &taus, &degs, grid, None).unwrap();
        build_complex(&build_fiber(&b).unwrap(), &b).unwrap()
    }

    #[test]
    fn nilpotent_and_adjoint() {
        for (n, grid) in [(1, 8), (2, 4)] {
            let c = complex(n, 1, grid);
            for p in 0..=n {
                for q in 0..n {
                    let psi = random_form(&c, p, q, 1).unwrap();
                    let chi = random_form(&c, p, q + 1, 2).unwrap();
                    let lhs = c.inner(&c.dbar(&psi).unwrap(), &chi);
                    let rhs = c.inner(&psi, &c.dbar_adjoint(&chi).unwrap());
                    assert!((lhs - rhs).norm() < 1e-10 * lhs.norm().max(1.0));
                    if q + 1 < n {
                        let d1 = c.dbar(&psi).unwrap();
                        let dd = c.dbar(&d1).unwrap();
                        assert!(dd.max_abs() < 1e-12 * d1.max_abs() * grid as f64 * 1e3);
                    }
                }
            }
            for p in 0..n {
                for q in 0..=n {
                    let psi = random_form(&c, p, q, 4).unwrap();
                    let chi = random_form(&c, p + 1, q, 5).unwrap();
                    let lhs = c.inner(&c.del(&psi).unwrap(), &chi);
                    let rhs = c.inner(&psi, &c.del_adjoint(&chi).unwrap());
                    assert!((lhs - rhs).norm() < 1e-10 * lhs.norm().max(1.0));
                }
            }
        }
    }

    #[test]
    fn nilpotent_product_blocks() {
        let c = complex(2, 1, 4);
        let psi = random_form(&c, 1, 0, 9).unwrap();
        let dd = c.dbar(&c.dbar(&psi).unwrap()).unwrap();
        assert!(dd.max_abs() < 1e-9 * c.dbar(&psi).unwrap().max_abs());
        let ee = c.del(&c.del(&random_form(&c, 0, 1, 9).unwrap()).unwrap()).unwrap();
        assert!(ee.max_abs() < 1e-9);
    }

    #[test]
    fn laplacian_hermitian_nonnegative() {
        let c = complex(1, 2, 8);
        for kind in [LaplacianKind::Del, LaplacianKind::Dbar] {
            for (p, q) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                let a = random_form(&c, p, q, 1).unwrap();
                let b = random_form(&c, p, q, 2).unwrap();
                let l = c.laplacian(kind, p, q).unwrap();
                let ab = c.inner(&l.apply(&a).unwrap(), &b);
                let ba = c.inner(&a, &l.apply(&b).unwrap());
                assert!((ab - ba).norm() < 1e-9 * ab.norm().max(1.0));
                assert!(c.inner(&l.apply(&a).unwrap(), &a).re >= 0.0);
            }
        }
    }

    #[test]
    fn chain_path_matches_dense_path() {
        let c = complex(1, 2, 16);
        assert!(c.has_fast_path());
        let ph: Vec<C64> = (0..256).map(|i| C64::from_polar(1.0, 0.3 * (i as f64).sin())).collect();
        let g = c.bundle.gauge_transformed(&[ph]);
        let cg = build_complex(&c.fiber, &g).unwrap();
        assert!(!cg.has_fast_path());
        for kind in [LaplacianKind::Del, LaplacianKind::Dbar] {
            for (p, q) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                let a = c.spectrum(kind, p, q).unwrap();
                let b = cg.spectrum(kind, p, q).unwrap();
                assert_eq!(a.eigenvalues.len(), b.eigenvalues.len());
                for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
                    assert!((x - y).abs() < 1e-8, "{kind:?} ({p},{q}) {x} {y}");
                }
                assert_eq!(a.kernel_dim, b.kernel_dim);
                assert_eq!(a.artifact, b.artifact);
                assert!(a.max_residual < 1e-6 && a.orthonormality < 1e-10);
            }
        }
    }

    #[test]
    fn chain_eigenforms_are_eigenforms() {
        let c = complex(1, 1, 32);
        let s = c.solver(LaplacianKind::Dbar, 0, 1).unwrap();
        for (v, lam) in s.eigenforms.iter().zip(&s.spectrum.eigenvalues).take(4) {
            let r = c.laplacian_apply(LaplacianKind::Dbar, v).unwrap().sub(&v.scale(C64::new(*lam, 0.0))).unwrap();
            assert!(c.norm(&r) < 1e-7);
            assert!((c.norm(v) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn landau_levels_and_kernel() {
        for d in 1..=2u32 {
            let c = complex(1, d, 32);
            let s = c.spectrum(LaplacianKind::Dbar, 0, 0).unwrap();
            assert_eq!(s.kernel_dim, d as usize);
            assert!(s.gap_ratio > 1e3);
            for m in 0..3 {
                for k in 0..d as usize {
                    assert!((s.eigenvalues[m * d as usize + k] - m as f64).abs() < 1e-2);
                }
            }
            // □_∂ on (0,0): only artifacts below 1
            let sd = c.spectrum(LaplacianKind::Del, 0, 0).unwrap();
            let resolved: Vec<f64> = sd.eigenvalues.iter().zip(&sd.artifact).filter(|(_, a)| !**a).map(|(v, _)| *v).collect();
            assert!((resolved[0] - 1.0).abs() < 1e-2);
        }
    }

    #[test]
    fn artifacts_only_in_q_blocks() {
        let c = complex(1, 1, 32);
        assert_eq!(c.harmonic_basis(1, 0, true).unwrap().len(), 1);
        assert_eq!(c.harmonic_basis(0, 1, false).unwrap().len(), 1);
        assert!(c.harmonic_basis(0, 1, true).unwrap().is_empty());
    }

    #[test]
    fn projection_idempotent_selfadjoint() {
        let c = complex(1, 2, 16);
        let a = random_form(&c, 1, 0, 1).unwrap();
        let b = random_form(&c, 1, 0, 2).unwrap();
        let ha = c.harmonic_projection(&a).unwrap();
        let hha = c.harmonic_projection(&ha).unwrap();
        assert!(c.norm(&ha.sub(&hha).unwrap()) < 1e-12);
        let hb = c.harmonic_projection(&b).unwrap();
        assert!((c.inner(&ha, &b) - c.inner(&a, &hb)).norm() < 1e-12);
    }

    #[test]
    fn green_shifted_spectral_values() {
        let c = complex(1, 1, 32);
        let s = c.solver(LaplacianKind::Dbar, 0, 0).unwrap();
        let h = &s.eigenforms[0];
        let (x, _) = c.green_shifted(1, h, false).unwrap();
        assert!(c.norm(&x.sub(h).unwrap()) < 1e-9);
        let e2 = &s.eigenforms[2];
        let l2 = s.spectrum.eigenvalues[2];
        let (x, diag) = c.green_shifted(-1, e2, true).unwrap();
        assert!(c.norm(&x.sub(&e2.scale(C64::new(1.0 / (l2 - 1.0), 0.0))).unwrap()) < 1e-9);
        assert!(diag.band_mass < 1e-12);
        let e1 = &s.eigenforms[1];
        let (_, diag) = c.green_shifted(-1, e1, true).unwrap();
        assert!((diag.band_mass - 1.0).abs() < 1e-10);
    }

    #[test]
    fn green_minus_solves_off_band() {
        let c = complex(1, 1, 32);
        let psi = random_form(&c, 0, 0, 7).unwrap();
        let s = c.solver(LaplacianKind::Dbar, 0, 0).unwrap();
        let (x, diag) = c.green_shifted(-1, &psi, true).unwrap();
        let mut target = psi.clone();
        for (k, v) in s.eigenforms.iter().enumerate() {
            let lam = s.spectrum.eigenvalues[k];
            if k < s.spectrum.kernel_dim || (lam - 1.0).abs() < diag.epsilon1 {
                target = target.sub(&v.scale(c.inner(&psi, v))).unwrap();
            }
        }
        let r = c.laplacian_apply(LaplacianKind::Dbar, &x).unwrap().sub(&x).unwrap().sub(&target).unwrap();
        assert!(c.norm(&r) < 1e-8, "{}", c.norm(&r));
    }

    #[test]
    fn hodge_parts_orthogonal() {
        let c = complex(1, 1, 16);
        for (p, q) in [(0, 0), (0, 1), (1, 1)] {
            let psi = random_form(&c, p, q, 11).unwrap();
            let h = c.hodge_decompose(&psi).unwrap();
            let sum = h.harmonic.add(&h.exact).unwrap().add(&h.coexact).unwrap();
            assert!(c.norm(&psi.sub(&sum).unwrap()) < 1e-9);
            assert!(c.inner(&h.harmonic, &h.exact).norm() < 1e-9);
            assert!(c.inner(&h.exact, &h.coexact).norm() < 1e-9);
            let parts = c.norm(&h.harmonic).powi(2) + c.norm(&h.exact).powi(2) + c.norm(&h.coexact).powi(2);
            assert!((parts - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn bkn_converges_second_order() {
        let d16 = complex(1, 1, 16).bkn_defect(0, 0, 2, 3).unwrap();
        let d32 = complex(1, 1, 32).bkn_defect(0, 0, 2, 3).unwrap();
        let ratio = d16 / d32;
        assert!(ratio > 3.0 && ratio < 8.0, "{ratio}");
        assert!(complex(1, 1, 16).bkn_defect(1, 0, 2, 3).unwrap() < 1e-10);
    }

    #[test]
    fn product_spectrum_is_sum_of_factor_spectra() {
        let c = complex(2, 1, 8);
        assert!(matches!(c.spectrum(LaplacianKind::Dbar, 1, 1), Err(Error::Unsupported(_))));
        let taus = [C64::new(0.0, 1.0), C64::new(0.1, 1.3)];
        let b = build_bundle(2, &taus, &[1, 2], 6, None).unwrap();
        let prod = build_complex(&build_fiber(&b).unwrap(), &b).unwrap();
        let s = prod.spectrum(LaplacianKind::Dbar, 0, 0).unwrap();
        let mut sums = Vec::new();
        let factor: Vec<Vec<f64>> = (0..2)
            .map(|f| {
                let b1 = build_bundle(1, &[taus[f]], &[f as u32 + 1], 6, None).unwrap();
                let c1 = build_complex(&build_fiber(&b1).unwrap(), &b1).unwrap();
                c1.spectrum(LaplacianKind::Dbar, 0, 0).unwrap().eigenvalues
            })
            .collect();
        for a in &factor[0] {
            for b in &factor[1] {
                sums.push(a + b);
            }
        }
        sums.sort_by(f64::total_cmp);
        for (x, y) in s.eigenvalues.iter().zip(&sums).take(4) {
            assert!((x - y).abs() < 1e-8, "{x} {y}");
        }
        assert!(s.max_residual < 1e-8);
    }
}
