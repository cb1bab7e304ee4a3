//! One-parameter families `s ↦ (X_s, L_s)` over a disc in ℂ, for n = 1.
//!
//! The total weight is written in holomorphic coordinates `(z, s)`:
//! `W(z, s) = -2π d (Im z)² / Im τ(s) - λ|s|²`. All total-space metric
//! components come from finite differences of `W`, never from their
//! closed forms. In the real chart the same weight reads
//! `-2π d Im τ(s) y² - λ|s|²`, so the link phases do not depend on `s`
//! and the only `s`-dependence of the unitary frame is in
//! `ρ = e^{iπ d τ(s) y² - λ|s|²/2}`.

mod lie;

pub use lie::*;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dolbeault::{build_complex, DolbeaultComplex};
use crate::error::{Error, Result};
use crate::fiber_geometry::{build_fiber, TorusFiber};
use crate::forms::KodairaSpencerForm;
use crate::lattice::{self, Axis, FactorLayout};
use crate::line_bundle::{build_bundle, bundle_curvature_pairing, BundleMetric, TotalMetric, TotalVector};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilyKind {
    /// τ(s) = τ₀ + s, trivial twist.
    PureModulus,
    /// Fixed τ, weight multiplied by e^{-λ|s|²}.
    BaseTwist { lambda: f64 },
    /// Fixed τ, no twist.
    ProductTrivial,
    Combined { lambda: f64 },
}

impl FamilyKind {
    pub fn lambda(&self) -> f64 {
        match *self {
            FamilyKind::BaseTwist { lambda } | FamilyKind::Combined { lambda } => lambda,
            _ => 0.0,
        }
    }

    pub fn varies_modulus(&self) -> bool {
        matches!(self, FamilyKind::PureModulus | FamilyKind::Combined { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilyModel {
    pub kind: FamilyKind,
    pub tau0: C64,
    pub d: u32,
    pub grid: usize,
    /// Base point where curvature is evaluated.
    pub s0: C64,
    /// Base-direction finite-difference step.
    pub eps: f64,
    pub richardson: bool,
}

pub const DEFAULT_BASE_STEP: f64 = 1e-3;

impl FamilyModel {
    pub fn new(kind: FamilyKind, tau0: C64, d: u32, grid: usize) -> Result<Self> {
        if !(tau0.im > 0.0) {
            return Err(Error::InvalidParameter(format!("Im tau must be positive, got {tau0}")));
        }
        if d == 0 {
            return Err(Error::InvalidParameter("degree must be positive".into()));
        }
        if grid < 8 {
            return Err(Error::InvalidParameter(format!("grid {grid} below 8")));
        }
        Ok(Self { kind, tau0, d, grid, s0: C64::new(0.0, 0.0), eps: DEFAULT_BASE_STEP, richardson: true })
    }

    pub fn at_base_point(mut self, s0: C64) -> Result<Self> {
        self.s0 = s0;
        self.check_domain(s0, 0.0)?;
        Ok(self)
    }

    pub fn with_step(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn radius(&self) -> f64 {
        0.5 * self.tau0.im
    }

    /// Fails when a stencil of half-width `reach` around `s` leaves the disc.
    pub fn check_domain(&self, s: C64, reach: f64) -> Result<()> {
        if s.norm() + reach > self.radius() {
            return Err(Error::StencilOutOfDomain(format!(
                "|s| = {:.3e} with reach {:.1e} exceeds radius {:.3e}",
                s.norm(),
                reach,
                self.radius()
            )));
        }
        Ok(())
    }

    pub fn tau(&self, s: C64) -> C64 {
        if self.kind.varies_modulus() {
            self.tau0 + s
        } else {
            self.tau0
        }
    }

    pub fn lambda(&self) -> f64 {
        self.kind.lambda()
    }

    pub fn npts(&self) -> usize {
        self.grid * self.grid
    }

    pub fn coords(&self, p: usize) -> (f64, f64) {
        let h = 1.0 / self.grid as f64;
        ((p / self.grid) as f64 * h, (p % self.grid) as f64 * h)
    }

    pub fn layout(&self) -> FactorLayout {
        FactorLayout::new(self.grid, 1, 0)
    }

    /// Weight in holomorphic coordinates.
    pub fn weight(&self, z: C64, s: C64) -> f64 {
        -2.0 * PI * self.d as f64 * z.im * z.im / self.tau(s).im - self.lambda() * s.norm_sqr()
    }

    /// Weight in the real chart (x, y) at parameter s.
    pub fn log_h(&self, _x: f64, y: f64, s: C64) -> f64 {
        -2.0 * PI * self.d as f64 * self.tau(s).im * y * y - self.lambda() * s.norm_sqr()
    }

    /// Logarithm of the unitary frame factor ρ with u = f ρ.
    pub fn log_rho(&self, _x: f64, y: f64, s: C64) -> C64 {
        C64::new(0.0, PI * self.d as f64) * self.tau(s) * y * y - 0.5 * self.lambda() * s.norm_sqr()
    }

    pub fn bundle(&self, s: C64) -> Result<BundleMetric> {
        self.check_domain(s, 0.0)?;
        build_bundle(1, &[self.tau(s)], &[self.d], self.grid, None)
    }

    pub fn fiber(&self, s: C64) -> Result<TorusFiber> {
        build_fiber(&self.bundle(s)?)
    }

    pub fn complex(&self, s: C64) -> Result<DolbeaultComplex> {
        let b = self.bundle(s)?;
        let f = build_fiber(&b)?;
        build_complex(&f, &b)
    }

    /// Wirtinger derivatives (∂_s, ∂_s̄) of a vector-valued function of s by
    /// central differences with step `eps`, Richardson-extrapolated.
    pub fn base_wirtinger<F>(&self, s: C64, f: F) -> Result<(Vec<C64>, Vec<C64>)>
    where
        F: Fn(C64) -> Result<Vec<C64>>,
    {
        self.check_domain(s, self.eps)?;
        let one = |e: f64| -> Result<(Vec<C64>, Vec<C64>)> {
            let (sp, sm) = (f(s + e)?, f(s - e)?);
            let (ep, em) = (f(s + C64::new(0.0, e))?, f(s - C64::new(0.0, e))?);
            let ds: Vec<C64> = sp.iter().zip(&sm).map(|(a, b)| (a - b) / (2.0 * e)).collect();
            let de: Vec<C64> = ep.iter().zip(&em).map(|(a, b)| (a - b) / (2.0 * e)).collect();
            Ok((ds, de))
        };
        let (mut ds, mut de) = one(self.eps)?;
        if self.richardson {
            let (ds2, de2) = one(0.5 * self.eps)?;
            for (a, b) in ds.iter_mut().zip(&ds2) {
                *a = (4.0 * b - *a) / 3.0;
            }
            for (a, b) in de.iter_mut().zip(&de2) {
                *a = (4.0 * b - *a) / 3.0;
            }
        }
        let i = C64::new(0.0, 1.0);
        let d_s = ds.iter().zip(&de).map(|(a, b)| 0.5 * (a - i * b)).collect();
        let d_sb = ds.iter().zip(&de).map(|(a, b)| 0.5 * (a + i * b)).collect();
        Ok((d_s, d_sb))
    }

    /// ∂_s τ by differences of τ(s).
    pub fn tau_prime(&self, s: C64) -> Result<C64> {
        let (d, _) = self.base_wirtinger(s, |t| Ok(vec![self.tau(t)]))?;
        Ok(d[0])
    }
}

/// (g_{ss̄}, g_{sz̄}, g_{zz̄}) at (z, s) from second differences of the weight.
/// The fiber step is 1/N, the base step `eps` with Richardson extrapolation.
pub fn metric_point(model: &FamilyModel, z: C64, s: C64) -> (f64, C64, f64) {
    let dz = 1.0 / model.grid as f64;
    let w = |a: f64, b: f64, sg: f64, et: f64| model.weight(z + C64::new(a, b), s + C64::new(sg, et));
    let w0 = w(0.0, 0.0, 0.0, 0.0);
    let g_zz = -0.25
        * ((w(dz, 0.0, 0.0, 0.0) - 2.0 * w0 + w(-dz, 0.0, 0.0, 0.0))
            + (w(0.0, dz, 0.0, 0.0) - 2.0 * w0 + w(0.0, -dz, 0.0, 0.0)))
        / (dz * dz);
    let base = |e: f64| -> (f64, C64) {
        let ss = ((w(0.0, 0.0, e, 0.0) - 2.0 * w0 + w(0.0, 0.0, -e, 0.0))
            + (w(0.0, 0.0, 0.0, e) - 2.0 * w0 + w(0.0, 0.0, 0.0, -e)))
            / (e * e);
        let mixed = |ua: f64, ub: f64, us: f64, ue: f64| {
            (w(dz * ua, dz * ub, e * us, e * ue) - w(-dz * ua, -dz * ub, e * us, e * ue)
                - w(dz * ua, dz * ub, -e * us, -e * ue)
                + w(-dz * ua, -dz * ub, -e * us, -e * ue))
                / (4.0 * dz * e)
        };
        let sa = mixed(1.0, 0.0, 1.0, 0.0);
        let eb = mixed(0.0, 1.0, 0.0, 1.0);
        let sb = mixed(0.0, 1.0, 1.0, 0.0);
        let ea = mixed(1.0, 0.0, 0.0, 1.0);
        (-0.25 * ss, -0.25 * C64::new(sa + eb, sb - ea))
    };
    let (mut g_ss, mut g_sz) = base(model.eps);
    if model.richardson {
        let (h_ss, h_sz) = base(0.5 * model.eps);
        g_ss = (4.0 * h_ss - g_ss) / 3.0;
        g_sz = (4.0 * h_sz - g_sz) / 3.0;
    }
    (g_ss, g_sz, g_zz)
}

pub(crate) fn grid_z(model: &FamilyModel, p: usize, s: C64) -> C64 {
    let (x, y) = model.coords(p);
    x + model.tau(s) * y
}

pub fn total_metric_components(model: &FamilyModel, s: C64) -> Result<TotalMetric> {
    model.check_domain(s, model.eps)?;
    let mut out = TotalMetric { g_ss: Vec::new(), g_sz: Vec::new(), g_zz: Vec::new() };
    for p in 0..model.npts() {
        let (ss, sz, zz) = metric_point(model, grid_z(model, p, s), s);
        if !(zz > 0.0) {
            return Err(Error::NonPositiveMetric { point: p, value: zz });
        }
        out.g_ss.push(ss);
        out.g_sz.push(sz);
        out.g_zz.push(zz);
    }
    Ok(out)
}

fn lift_point(model: &FamilyModel, z: C64, s: C64) -> C64 {
    let (_, sz, zz) = metric_point(model, z, s);
    -sz / zz
}

/// Horizontal lift `v = ∂_s + a ∂_z` of ∂/∂s, `a = -g_{sz̄}/g_{zz̄}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizontalLift {
    pub s: C64,
    pub a: Vec<C64>,
}

impl HorizontalLift {
    pub fn vector(&self) -> TotalVector {
        let zero = vec![C64::new(0.0, 0.0); self.a.len()];
        TotalVector { s: C64::new(1.0, 0.0), sbar: C64::new(0.0, 0.0), z: self.a.clone(), zbar: zero }
    }
}

pub fn horizontal_lift(model: &FamilyModel, s: C64) -> Result<HorizontalLift> {
    model.check_domain(s, model.eps)?;
    let a = (0..model.npts()).map(|p| lift_point(model, grid_z(model, p, s), s)).collect();
    Ok(HorizontalLift { s, a })
}

/// (∂_z a, ∂_z̄ a) at z by off-grid central differences of the lift.
pub(crate) fn lift_derivatives(model: &FamilyModel, z: C64, s: C64) -> (C64, C64) {
    let dz = 1.0 / model.grid as f64;
    let i = C64::new(0.0, 1.0);
    let da = (lift_point(model, z + dz, s) - lift_point(model, z - dz, s)) / (2.0 * dz);
    let db = (lift_point(model, z + i * dz, s) - lift_point(model, z - i * dz, s)) / (2.0 * dz);
    (0.5 * (da - i * db), 0.5 * (da + i * db))
}

/// (∂_z∂_z a, ∂_z̄∂_z a, ∂_z∂_z̄ a) by nested off-grid differences.
pub(crate) fn lift_second_derivatives(model: &FamilyModel, z: C64, s: C64) -> (C64, C64, C64) {
    let dz = 1.0 / model.grid as f64;
    let i = C64::new(0.0, 1.0);
    let (xp, xm) = (lift_derivatives(model, z + dz, s), lift_derivatives(model, z - dz, s));
    let (yp, ym) = (lift_derivatives(model, z + i * dz, s), lift_derivatives(model, z - i * dz, s));
    let wirt = |ap: C64, am: C64, bp: C64, bm: C64| {
        let (da, db) = ((ap - am) / (2.0 * dz), (bp - bm) / (2.0 * dz));
        (0.5 * (da - i * db), 0.5 * (da + i * db))
    };
    let (dz_dza, dzb_dza) = wirt(xp.0, xm.0, yp.0, ym.0);
    let (dz_dzba, _) = wirt(xp.1, xm.1, yp.1, ym.1);
    (dz_dza, dzb_dza, dz_dzba)
}

/// Kodaira-Spencer representative `A = ∂̄ a ⊗ ∂_z`, i.e. the coefficient
/// of `dz̄ ⊗ ∂_z`.
pub fn kodaira_spencer(model: &FamilyModel, s: C64) -> Result<KodairaSpencerForm> {
    model.check_domain(s, model.eps)?;
    let mut ks = KodairaSpencerForm::zeros(1, model.grid);
    for p in 0..model.npts() {
        ks.comps[p] = lift_derivatives(model, grid_z(model, p, s), s).1;
    }
    Ok(ks)
}

/// Geodesic curvature `φ = g_{ss̄} - |g_{sz̄}|²/g_{zz̄}` with its fiber
/// gradients `φ^{;z} = g^{-1} ∂_z̄ φ` and `φ^{;z̄} = g^{-1} ∂_z φ`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicCurvature {
    pub phi: Vec<f64>,
    pub grad_z: Vec<C64>,
    pub grad_zbar: Vec<C64>,
}

pub fn geodesic_curvature(model: &FamilyModel, s: C64) -> Result<GeodesicCurvature> {
    let g = total_metric_components(model, s)?;
    let phi: Vec<f64> =
        (0..model.npts()).map(|p| g.g_ss[p] - g.g_sz[p].norm_sqr() / g.g_zz[p]).collect();
    let (dz, dzb) = wirtinger_real(&phi, &model.layout(), model.tau(s));
    let grad_z = dzb.iter().zip(&g.g_zz).map(|(v, gz)| v / gz).collect();
    let grad_zbar = dz.iter().zip(&g.g_zz).map(|(v, gz)| v / gz).collect();
    Ok(GeodesicCurvature { phi, grad_z, grad_zbar })
}

/// (∂_z f, ∂_z̄ f) of a periodic real field.
pub(crate) fn wirtinger_real(f: &[f64], lay: &FactorLayout, tau: C64) -> (Vec<C64>, Vec<C64>) {
    let fx = lattice::central_real(f, lay, Axis::X);
    let fy = lattice::central_real(f, lay, Axis::Y);
    let t = tau - tau.conj();
    let dz = fx.iter().zip(&fy).map(|(&a, &b)| (b - tau.conj() * a) / t).collect();
    let dzb = fx.iter().zip(&fy).map(|(&a, &b)| (tau * a - b) / t).collect();
    (dz, dzb)
}

/// x- and y-derivatives of a periodic complex field.
pub(crate) fn central_complex(f: &[C64], lay: &FactorLayout) -> (Vec<C64>, Vec<C64>) {
    let re: Vec<f64> = f.iter().map(|c| c.re).collect();
    let im: Vec<f64> = f.iter().map(|c| c.im).collect();
    let join = |a: Vec<f64>, b: Vec<f64>| a.into_iter().zip(b).map(|(r, i)| C64::new(r, i)).collect();
    (
        join(lattice::central_real(&re, lay, Axis::X), lattice::central_real(&im, lay, Axis::X)),
        join(lattice::central_real(&re, lay, Axis::Y), lattice::central_real(&im, lay, Axis::Y)),
    )
}

/// Pointwise defect of `L_v(ω_X/S) = 0`, relative to g:
/// `|∂_s g + a ∂_z g + g ∂_z a| / g` with ∂_s at fixed z.
pub fn lie_volume_defect(model: &FamilyModel, s: C64) -> Result<Vec<f64>> {
    model.check_domain(s, 2.0 * model.eps)?;
    let dz = 1.0 / model.grid as f64;
    let i = C64::new(0.0, 1.0);
    let mut out = Vec::with_capacity(model.npts());
    for p in 0..model.npts() {
        let z = grid_z(model, p, s);
        let gz = |z: C64, s: C64| metric_point(model, z, s).2;
        let g0 = gz(z, s);
        let (ds, _) = model.base_wirtinger(s, |t| Ok(vec![C64::new(gz(z, t), 0.0)]))?;
        let da = (gz(z + dz, s) - gz(z - dz, s)) / (2.0 * dz);
        let db = (gz(z + i * dz, s) - gz(z - i * dz, s)) / (2.0 * dz);
        let dzg = 0.5 * (da - i * db);
        let a = lift_point(model, z, s);
        let (dza, _) = lift_derivatives(model, z, s);
        out.push((ds[0] + a * dzg + g0 * dza).norm() / g0);
    }
    Ok(out)
}

/// Comparison of the bracket `[v̄, v]` (real-chart differences of the lift
/// in s) with `-φ^{;z} ∂_z + φ^{;z̄} ∂_z̄`, and of `Θ(L)_{v̄v}` with `-φ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CommutatorCheck {
    pub bracket: TotalVector,
    pub predicted: TotalVector,
    pub bracket_residual: f64,
    pub theta_residual: f64,
    pub scale: f64,
}

pub fn commutator_check(model: &FamilyModel, s: C64) -> Result<CommutatorCheck> {
    model.check_domain(s, 2.0 * model.eps)?;
    let lay = model.layout();
    let n = model.npts();
    let v = RealVector::horizontal(model, s, false)?;
    let w = RealVector::horizontal(model, s, true)?;
    let (_, vx_sb) = model.base_wirtinger(s, |t| Ok(RealVector::horizontal(model, t, false)?.x))?;
    let (_, vy_sb) = model.base_wirtinger(s, |t| Ok(RealVector::horizontal(model, t, false)?.y))?;
    let (wx_s, _) = model.base_wirtinger(s, |t| Ok(RealVector::horizontal(model, t, true)?.x))?;
    let (wy_s, _) = model.base_wirtinger(s, |t| Ok(RealVector::horizontal(model, t, true)?.y))?;
    let (vxx, vxy) = central_complex(&v.x, &lay);
    let (vyx, vyy) = central_complex(&v.y, &lay);
    let (wxx, wxy) = central_complex(&w.x, &lay);
    let (wyx, wyy) = central_complex(&w.y, &lay);
    let tau = model.tau(s);
    let mut bz = Vec::with_capacity(n);
    let mut bzb = Vec::with_capacity(n);
    for p in 0..n {
        // [w, v]^i = w(v^i) - v(w^i), w = v̄
        let bx = vx_sb[p] + w.x[p] * vxx[p] + w.y[p] * vxy[p] - wx_s[p] - v.x[p] * wxx[p] - v.y[p] * wxy[p];
        let by = vy_sb[p] + w.x[p] * vyx[p] + w.y[p] * vyy[p] - wy_s[p] - v.x[p] * wyx[p] - v.y[p] * wyy[p];
        bz.push(bx + tau * by);
        bzb.push(bx + tau.conj() * by);
    }
    let zero = C64::new(0.0, 0.0);
    let bracket = TotalVector { s: zero, sbar: zero, z: bz, zbar: bzb };
    let gc = geodesic_curvature(model, s)?;
    let predicted = TotalVector {
        s: zero,
        sbar: zero,
        z: gc.grad_z.iter().map(|c| -c).collect(),
        zbar: gc.grad_zbar.clone(),
    };
    let mut bracket_residual: f64 = 0.0;
    for p in 0..n {
        bracket_residual = bracket_residual
            .max((bracket.z[p] - predicted.z[p]).norm())
            .max((bracket.zbar[p] - predicted.zbar[p]).norm());
    }
    let g = total_metric_components(model, s)?;
    let lv = horizontal_lift(model, s)?.vector();
    let theta = bundle_curvature_pairing(&g, &lv.conj(), &lv);
    let theta_residual = theta.iter().zip(&gc.phi).map(|(t, f)| (t + f).norm()).fold(0.0, f64::max);
    let scale = g.g_zz.iter().cloned().fold(0.0, f64::max);
    Ok(CommutatorCheck { bracket, predicted, bracket_residual, theta_residual, scale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::AnalyticFamily;

    fn tau() -> C64 {
        C64::new(0.3, 1.1)
    }

    #[test]
    fn metric_components_match_closed_form() {
        let m = FamilyModel::new(FamilyKind::PureModulus, tau(), 2, 16).unwrap();
        let g = total_metric_components(&m, m.s0).unwrap();
        let af = AnalyticFamily { tau: tau(), d: 2 };
        for p in (0..m.npts()).step_by(7) {
            let z = grid_z(&m, p, m.s0);
            assert!((g.g_zz[p] - af.fiber_metric()).abs() < 1e-9);
            assert!((g.g_sz[p] - af.g_s_zbar(z)).norm() < 1e-6, "{} {}", g.g_sz[p], af.g_s_zbar(z));
            assert!((g.g_ss[p] - af.g_s_sbar(z)).abs() < 1e-6);
        }
    }

    #[test]
    fn ks_class_of_modulus_family() {
        let m = FamilyModel::new(FamilyKind::PureModulus, tau(), 1, 16).unwrap();
        let ks = kodaira_spencer(&m, m.s0).unwrap();
        let af = AnalyticFamily { tau: tau(), d: 1 };
        let expect = C64::new(0.0, 0.5 / tau().im);
        assert!((af.ks_coefficient() - expect).norm() < 1e-14);
        assert!(ks.comps.iter().all(|c| (c - expect).norm() < 1e-6));
        let f = m.fiber(m.s0).unwrap();
        assert!((ks.norm_sq(&f) - af.ks_norm_sq()).abs() < 1e-5);
    }

    #[test]
    fn geodesic_curvature_by_family() {
        let t = tau();
        let m = FamilyModel::new(FamilyKind::PureModulus, t, 1, 16).unwrap();
        assert!(geodesic_curvature(&m, m.s0).unwrap().phi.iter().all(|v| v.abs() < 1e-5));
        let m = FamilyModel::new(FamilyKind::BaseTwist { lambda: 0.7 }, t, 1, 16).unwrap();
        assert!(geodesic_curvature(&m, m.s0).unwrap().phi.iter().all(|v| (v - 0.7).abs() < 1e-6));
        let m = FamilyModel::new(FamilyKind::ProductTrivial, t, 1, 16).unwrap();
        assert!(horizontal_lift(&m, m.s0).unwrap().a.iter().all(|a| a.norm() < 1e-9));
    }

    #[test]
    fn lift_is_y_for_modulus() {
        let m = FamilyModel::new(FamilyKind::PureModulus, tau(), 1, 16).unwrap();
        let l = horizontal_lift(&m, m.s0).unwrap();
        for p in 0..m.npts() {
            let (_, y) = m.coords(p);
            assert!((l.a[p] - y).norm() < 1e-6);
        }
    }

    #[test]
    fn volume_and_commutator() {
        for kind in [FamilyKind::PureModulus, FamilyKind::Combined { lambda: 0.4 }] {
            let m = FamilyModel::new(kind, tau(), 1, 16).unwrap();
            assert!(lie_volume_defect(&m, m.s0).unwrap().iter().all(|v| *v < 1e-6));
            let c = commutator_check(&m, m.s0).unwrap();
            assert!(c.bracket_residual < 1e-6 * c.scale.max(1.0), "{}", c.bracket_residual);
            assert!(c.theta_residual < 1e-5, "{}", c.theta_residual);
        }
    }

    #[test]
    fn domain_is_enforced() {
        let m = FamilyModel::new(FamilyKind::PureModulus, C64::new(0.0, 1.0), 1, 16).unwrap();
        assert!(matches!(m.clone().at_base_point(C64::new(0.6, 0.0)), Err(Error::StencilOutOfDomain(_))));
        assert!(horizontal_lift(&m, C64::new(0.5, 0.0)).is_err());
    }
}
