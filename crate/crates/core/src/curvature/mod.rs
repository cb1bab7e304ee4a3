//! Curvature of the direct image bundle: holomorphic frames, Gram
//! matrices, the term-by-term assembly from the Kodaira-Spencer data and a
//! finite-difference Chern curvature computed from Gram matrices on a
//! stencil of nearby fibers.

pub mod identities;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::dolbeault::{DolbeaultComplex, LaplacianKind};
use crate::error::{Error, Result};
use crate::family::{
    geodesic_curvature, kodaira_spencer, lie_derivative, FamilyModel, FormField, GeodesicCurvature, LiftDirection,
    ThetaField,
};
use crate::forms::{cup_ks, cup_ks_conj, inner_product, KodairaSpencerForm, PQForm};
use crate::C64;

pub type CMatrix = DMatrix<C64>;

/// Everything needed on the fiber over one base point.
pub struct FiberContext {
    pub model: FamilyModel,
    pub s: C64,
    pub complex: DolbeaultComplex,
    pub ks: KodairaSpencerForm,
    pub geodesic: GeodesicCurvature,
}

impl FiberContext {
    pub fn new(model: &FamilyModel, s: C64) -> Result<Self> {
        Ok(Self {
            model: model.clone(),
            s,
            complex: model.complex(s)?,
            ks: kodaira_spencer(model, s)?,
            geodesic: geodesic_curvature(model, s)?,
        })
    }
}

/// `H[l][k] = ⟨ψ^k, ψ^l⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub h: CMatrix,
}

impl GramMatrix {
    pub fn from_inner<F: Fn(&PQForm, &PQForm) -> C64>(forms: &[PQForm], inner: F) -> Self {
        let r = forms.len();
        Self { h: CMatrix::from_fn(r, r, |l, k| inner(&forms[k], &forms[l])) }
    }

    pub fn rank(&self) -> usize {
        self.h.nrows()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (&self.h - self.h.adjoint()).norm() / self.h.norm().max(1e-300)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut e: Vec<f64> = SymmetricEigen::new(hermitian_part(&self.h)).eigenvalues.iter().cloned().collect();
        e.sort_by(f64::total_cmp);
        e
    }

    pub fn condition_number(&self) -> f64 {
        let e = self.eigenvalues();
        if e[0] <= 0.0 {
            f64::INFINITY
        } else {
            e[e.len() - 1] / e[0]
        }
    }

    /// `H^{-1/2}`; fails on an ill-conditioned or indefinite matrix.
    pub fn inverse_sqrt(&self) -> Result<CMatrix> {
        let cond = self.condition_number();
        if !(cond < 1e12) {
            return Err(Error::IllConditionedGram(cond));
        }
        let eig = SymmetricEigen::new(hermitian_part(&self.h));
        let d = CMatrix::from_diagonal(&eig.eigenvalues.map(|v| C64::new(1.0 / v.sqrt(), 0.0)));
        Ok(&eig.eigenvectors * d * eig.eigenvectors.adjoint())
    }
}

pub(crate) fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// `ψ̃_k = Σ_j M[j][k] ψ_j`.
pub fn transform_frame(forms: &[PQForm], m: &CMatrix) -> Vec<PQForm> {
    (0..m.ncols())
        .map(|k| {
            let mut acc = forms[0].zeros_like();
            for (j, f) in forms.iter().enumerate() {
                acc = acc.add(&f.scale(m[(j, k)])).expect("same shape");
            }
            acc
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectImageFrame {
    pub p: usize,
    pub s: C64,
    /// Harmonic projections of the theta forms.
    pub projected: Vec<PQForm>,
    /// Orthonormal combination of `projected`.
    pub basis: Vec<PQForm>,
    pub gram: GramMatrix,
    /// max_k ‖ψ^k - Hψ^k‖/‖ψ^k‖ before projection.
    pub projection_residual: f64,
    /// max_k ‖□ψ^k‖/‖ψ^k‖ after projection.
    pub harmonic_residual: f64,
}

impl DirectImageFrame {
    pub fn rank(&self) -> usize {
        self.basis.len()
    }
}

/// Theta forms `θ_k dz`, k < d, that generate the direct image for p = 1.
pub fn theta_fields(model: &FamilyModel) -> Vec<ThetaField> {
    (0..model.d).map(ThetaField::new).collect()
}

pub fn holomorphic_frame(ctx: &FiberContext, p: usize) -> Result<DirectImageFrame> {
    let n = ctx.complex.n();
    if p > n {
        return Err(Error::BidegreeOutOfRange { p, q: 0, n });
    }
    if p < n {
        return Err(Error::EmptyHarmonicSpace { p, q: n - p });
    }
    let cx = &ctx.complex;
    let mut projected = Vec::new();
    let mut projection_residual: f64 = 0.0;
    let mut harmonic_residual: f64 = 0.0;
    for f in theta_fields(&ctx.model) {
        let raw = f.sample(&ctx.model, ctx.s)?;
        let h = cx.resolved_harmonic_projection(&raw)?;
        let nr = cx.norm(&raw);
        projection_residual = projection_residual.max(cx.norm(&raw.sub(&h)?) / nr);
        harmonic_residual = harmonic_residual.max(cx.norm(&cx.laplacian_apply(LaplacianKind::Dbar, &h)?) / cx.norm(&h));
        projected.push(h);
    }
    let gram = GramMatrix::from_inner(&projected, |a, b| cx.inner(a, b));
    let basis = transform_frame(&projected, &gram.inverse_sqrt()?);
    Ok(DirectImageFrame { p, s: ctx.s, projected, basis, gram, projection_residual, harmonic_residual })
}

pub fn gram(ctx: &FiberContext, frame: &[PQForm]) -> Result<GramMatrix> {
    if frame.is_empty() {
        return Err(Error::EmptyHarmonicSpace { p: 0, q: 0 });
    }
    Ok(GramMatrix::from_inner(frame, |a, b| ctx.complex.inner(a, b)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureDiagnostics {
    /// Largest relative mass of the shifted-resolvent inputs in |λ-1| < ε₁.
    pub band_mass: f64,
    /// Largest relative harmonic mass of those inputs.
    pub harmonic_mass: f64,
    pub hermiticity_defect: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureResult {
    pub r: CMatrix,
    pub term1: CMatrix,
    pub term2: CMatrix,
    pub term3: CMatrix,
    /// Contribution of the harmonic parts of `Ā∪ψ` (already inside term3).
    pub harmonic_part_term: CMatrix,
    pub diagnostics: CurvatureDiagnostics,
}

/// The three terms for an arbitrary list of forms of one bidegree, which
/// must be orthonormal for the sum to be the curvature.
pub fn curvature_terms(ctx: &FiberContext, forms: &[PQForm]) -> Result<CurvatureResult> {
    let r = forms.len();
    if r == 0 {
        return Err(Error::EmptyHarmonicSpace { p: 0, q: 0 });
    }
    let cx = &ctx.complex;
    let n = cx.n();
    let (p, q) = (forms[0].p, forms[0].q);
    let phi: Vec<C64> = ctx.geodesic.phi.iter().map(|&v| C64::new(v, 0.0)).collect();
    let zero = CMatrix::zeros(r, r);
    let mut diag = CurvatureDiagnostics { band_mass: 0.0, harmonic_mass: 0.0, hermiticity_defect: 0.0 };

    let weighted: Vec<PQForm> = forms.iter().map(|f| f.mul_field(&phi)).collect();
    let term1 = CMatrix::from_fn(r, r, |l, k| cx.inner(&weighted[k], &forms[l]));

    let term2 = if p >= 1 && q < n {
        let cups = forms.iter().map(|f| cup_ks(&ctx.ks, f)).collect::<Result<Vec<_>>>()?;
        let solved = cups
            .iter()
            .map(|c| {
                let (x, _) = cx.green_shifted(1, c, false)?;
                Ok(x)
            })
            .collect::<Result<Vec<_>>>()?;
        CMatrix::from_fn(r, r, |l, k| cx.inner(&solved[k], &cups[l]))
    } else {
        zero.clone()
    };

    let (term3, harmonic_part_term) = if q >= 1 && p < n {
        let cups = forms.iter().map(|f| cup_ks_conj(&ctx.ks, f)).collect::<Result<Vec<_>>>()?;
        let mut solved = Vec::with_capacity(r);
        for c in &cups {
            let (x, d) = cx.green_shifted(-1, c, false)?;
            diag.band_mass = diag.band_mass.max(d.band_mass);
            diag.harmonic_mass = diag.harmonic_mass.max(d.harmonic_mass);
            solved.push(x);
        }
        let harm = cups.iter().map(|c| cx.harmonic_projection(c)).collect::<Result<Vec<_>>>()?;
        (
            CMatrix::from_fn(r, r, |l, k| cx.inner(&solved[k], &cups[l])),
            CMatrix::from_fn(r, r, |l, k| -cx.inner(&harm[k], &harm[l])),
        )
    } else {
        (zero.clone(), zero)
    };

    let total = &term1 + &term2 + &term3;
    diag.hermiticity_defect = (&total - total.adjoint()).norm() / total.norm().max(1e-300);
    Ok(CurvatureResult { r: total, term1, term2, term3, harmonic_part_term, diagnostics: diag })
}

pub fn direct_image_curvature(ctx: &FiberContext, frame: &DirectImageFrame) -> Result<CurvatureResult> {
    curvature_terms(ctx, &frame.basis)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChernFd {
    /// Curvature in the frame orthonormalized at the centre.
    pub r: CMatrix,
    /// Raw Gram matrix at the centre.
    pub h: CMatrix,
    /// ∂_s H at the centre (raw frame).
    pub dh: CMatrix,
    /// Rank one: |R - (-H ∂∂̄ log H)| / |R|.
    pub rank_one_defect: Option<f64>,
}

/// Gram matrix of raw theta frames on the fiber over s.
fn theta_gram(model: &FamilyModel, s: C64) -> Result<CMatrix> {
    let fiber = model.fiber(s)?;
    let forms = theta_fields(model).iter().map(|f| f.sample(model, s)).collect::<Result<Vec<_>>>()?;
    let r = forms.len();
    let mut h = CMatrix::zeros(r, r);
    for l in 0..r {
        for k in 0..r {
            h[(l, k)] = inner_product(&forms[k], &forms[l], &fiber)?;
        }
    }
    Ok(h)
}

/// `R = -∂_s̄∂_s H + (∂_s̄ H) H⁻¹ (∂_s H)` from Gram matrices of the
/// theta frame at `s + {0, ±e, ±ie}` for e = ε and ε/2 (Richardson).
pub fn chern_curvature_fd(model: &FamilyModel, s: C64, eps: f64) -> Result<ChernFd> {
    model.check_domain(s, eps)?;
    let i = C64::new(0.0, 1.0);
    let mut pts = vec![s];
    for e in [eps, 0.5 * eps] {
        pts.extend([s + e, s - e, s + i * e, s - i * e]);
    }
    let hs = pts.par_iter().map(|&t| theta_gram(model, t)).collect::<Result<Vec<_>>>()?;
    let h0 = &hs[0];
    let derivs = |o: usize, e: f64| {
        let (xp, xm, yp, ym) = (&hs[o], &hs[o + 1], &hs[o + 2], &hs[o + 3]);
        let dx = (xp - xm).scale(0.5 / e);
        let dy = (yp - ym).scale(0.5 / e);
        let lap = (xp + xm + yp + ym - h0.scale(4.0)).scale(1.0 / (e * e));
        let ds = (&dx - &dy * i).scale(0.5);
        let dsb = (&dx + &dy * i).scale(0.5);
        (ds, dsb, lap.scale(0.25))
    };
    let (ds1, dsb1, dd1) = derivs(1, eps);
    let (ds2, dsb2, dd2) = derivs(5, 0.5 * eps);
    let rich = |a: CMatrix, b: CMatrix| (b.scale(4.0) - a).scale(1.0 / 3.0);
    let (ds, dsb, dd) = (rich(ds1, ds2), rich(dsb1, dsb2), rich(dd1, dd2));
    let g = GramMatrix { h: h0.clone() };
    let hinv = h0.clone().try_inverse().ok_or(Error::IllConditionedGram(g.condition_number()))?;
    let raw = -&dd + &dsb * &hinv * &ds;
    let m = g.inverse_sqrt()?;
    let r = m.adjoint() * &raw * &m;
    let rank_one_defect = (h0.nrows() == 1).then(|| {
        // -H ∂∂̄ log H with log H from the same stencil
        let lh: Vec<f64> = hs.iter().map(|h| h[(0, 0)].re.ln()).collect();
        let lap = |o: usize, e: f64| (lh[o] + lh[o + 1] + lh[o + 2] + lh[o + 3] - 4.0 * lh[0]) / (4.0 * e * e);
        let ddl = (4.0 * lap(5, 0.5 * eps) - lap(1, eps)) / 3.0;
        let expect = -h0[(0, 0)].re * ddl;
        (raw[(0, 0)].re - expect).abs() / raw[(0, 0)].norm().max(1e-300)
    });
    Ok(ChernFd { r, h: h0.clone(), dh: ds, rank_one_defect })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FirstVariation {
    /// max |∂_s H(FD) - ⟨(L_vψ^k)', ψ^l⟩|.
    pub derivative_residual: f64,
    /// max |⟨ψ^k, L_v̄ψ^l⟩|.
    pub orthogonality_residual: f64,
    /// Frobenius norm of H.
    pub scale: f64,
}

/// First variation of the Gram matrix of the raw theta frame against the
/// Lie derivatives of its members.
pub fn first_variation_check(ctx: &FiberContext) -> Result<FirstVariation> {
    let model = &ctx.model;
    let fd = chern_curvature_fd(model, ctx.s, model.eps)?;
    let fields = theta_fields(model);
    let r = fields.len();
    let psi = fields.iter().map(|f| f.sample(model, ctx.s)).collect::<Result<Vec<_>>>()?;
    let lv = fields
        .iter()
        .map(|f| Ok(lie_derivative(model, ctx.s, f, LiftDirection::V)?.prime))
        .collect::<Result<Vec<_>>>()?;
    let lvb = fields
        .iter()
        .map(|f| Ok(lie_derivative(model, ctx.s, f, LiftDirection::VBar)?.prime))
        .collect::<Result<Vec<_>>>()?;
    let mut derivative_residual: f64 = 0.0;
    let mut orthogonality_residual: f64 = 0.0;
    for l in 0..r {
        for k in 0..r {
            let pair = ctx.complex.inner(&lv[k], &psi[l]);
            derivative_residual = derivative_residual.max((fd.dh[(l, k)] - pair).norm());
            orthogonality_residual = orthogonality_residual.max(ctx.complex.inner(&psi[k], &lvb[l]).norm());
        }
    }
    Ok(FirstVariation { derivative_residual, orthogonality_residual, scale: fd.h.norm() })
}

/// Pairings of the non-harmonic parts of `(L_vψ)'` and `(L_v̄ψ)'`, taken
/// directly and through the shifted resolvents.
#[derive(Debug, Clone, PartialEq)]
pub struct GreenEqualities {
    pub v_direct: CMatrix,
    /// `⟨ξ^k, ξ^l⟩ - ⟨(□+1)⁻¹ξ^k, ξ^l⟩` with ξ = A∪ψ.
    pub v_green: CMatrix,
    pub vbar_direct: CMatrix,
    /// `⟨η^k, η^l⟩ + ⟨(□-1)⁻¹η^k, η^l⟩` with η = Ā∪ψ minus its harmonic part.
    pub vbar_green: CMatrix,
    /// Frobenius norm of `⟨ξ^k, ξ^l⟩`.
    pub scale: f64,
    pub band_mass: f64,
}

impl GreenEqualities {
    pub fn v_residual(&self) -> f64 {
        (&self.v_direct - &self.v_green).norm()
    }

    pub fn vbar_residual(&self) -> f64 {
        (&self.vbar_direct - &self.vbar_green).norm()
    }
}

pub fn green_equalities(ctx: &FiberContext) -> Result<GreenEqualities> {
    let model = &ctx.model;
    let cx = &ctx.complex;
    let fields = theta_fields(model);
    let r = fields.len();
    let psi = fields.iter().map(|f| f.sample(model, ctx.s)).collect::<Result<Vec<_>>>()?;
    let non_harmonic = |u: PQForm| -> Result<PQForm> {
        let h = cx.harmonic_projection(&u)?;
        u.sub(&h)
    };
    let pair = |a: &[PQForm], b: &[PQForm]| CMatrix::from_fn(r, r, |l, k| cx.inner(&a[k], &b[l]));
    let mut band_mass: f64 = 0.0;

    let uv = fields
        .iter()
        .map(|f| non_harmonic(lie_derivative(model, ctx.s, f, LiftDirection::V)?.prime))
        .collect::<Result<Vec<_>>>()?;
    let xi = psi.iter().map(|f| cup_ks(&ctx.ks, f)).collect::<Result<Vec<_>>>()?;
    let xi_solved = xi.iter().map(|c| Ok(cx.green_shifted(1, c, false)?.0)).collect::<Result<Vec<_>>>()?;
    let xi_pair = pair(&xi, &xi);
    let v_green = &xi_pair - pair(&xi_solved, &xi);

    let uvb = fields
        .iter()
        .map(|f| non_harmonic(lie_derivative(model, ctx.s, f, LiftDirection::VBar)?.prime))
        .collect::<Result<Vec<_>>>()?;
    let (p, q) = (psi[0].p, psi[0].q);
    // Ā∪ψ lives in (p+1, q-1); it is zero when that bidegree does not exist
    let vbar_green = if q >= 1 && p < cx.n() {
        let eta = psi.iter().map(|f| non_harmonic(cup_ks_conj(&ctx.ks, f)?)).collect::<Result<Vec<_>>>()?;
        let mut eta_solved = Vec::with_capacity(r);
        for e in &eta {
            let (x, d) = cx.green_shifted(-1, e, true)?;
            band_mass = band_mass.max(d.band_mass);
            eta_solved.push(x);
        }
        pair(&eta, &eta) + pair(&eta_solved, &eta)
    } else {
        CMatrix::zeros(r, r)
    };

    Ok(GreenEqualities {
        v_direct: pair(&uv, &uv),
        v_green,
        vbar_direct: pair(&uvb, &uvb),
        vbar_green,
        scale: xi_pair.norm(),
        band_mass,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Positivity {
    Positive,
    Semi,
    Indefinite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NakanoVerdict {
    pub min_eigenvalue: f64,
    pub verdict: Positivity,
    pub harmonic_part_min: f64,
}

/// Eigenvalues within `tol` of zero count as zero.
pub fn nakano_check(res: &CurvatureResult, tol: f64) -> NakanoVerdict {
    let min = |m: &CMatrix| {
        SymmetricEigen::new(hermitian_part(m)).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let m = min(&res.r);
    let verdict = if m > tol {
        Positivity::Positive
    } else if m >= -tol {
        Positivity::Semi
    } else {
        Positivity::Indefinite
    };
    NakanoVerdict { min_eigenvalue: m, verdict, harmonic_part_min: min(&res.harmonic_part_term) }
}
