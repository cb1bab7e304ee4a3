//! Lie derivatives of relative forms along vector fields of the total
//! space, computed in the real chart `(x, y, s)` by the Cartan formula:
//! the covariant derivative of the components plus `ω_j ∂_i X^j` slot
//! terms. Forms are sampled on neighbouring fibers, so the s-dependence of
//! `dz = dx + τ(s) dy` enters through the samples and is never written in
//! closed form.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{central_complex, horizontal_lift, FamilyModel};
use crate::error::{Error, Result};
use crate::forms::{random_smooth_form, PQForm, SmoothSection};
use crate::lattice::{self, Axis, Links};
use crate::line_bundle::TotalVector;
use crate::oracles::{ThetaFrame, DEFAULT_TRUNCATION};
use crate::C64;

/// Component arrays, one `Vec` per form component.
type Grid = Vec<Vec<C64>>;

/// Vector field with constant base components and real-chart fiber
/// components `X^x ∂_x + X^y ∂_y`, where ∂_s is taken at fixed (x, y).
#[derive(Debug, Clone, PartialEq)]
pub struct RealVector {
    pub s: C64,
    pub sbar: C64,
    pub x: Vec<C64>,
    pub y: Vec<C64>,
}

impl RealVector {
    /// Converts `X^s ∂_s + X^s̄ ∂_s̄ + X^z ∂_z + X^z̄ ∂_z̄` (∂_s at fixed z).
    pub fn from_total(model: &FamilyModel, s: C64, v: &TotalVector) -> Result<Self> {
        let tau = model.tau(s);
        let tp = model.tau_prime(s)?;
        let t = tau - tau.conj();
        let mut x = Vec::with_capacity(model.npts());
        let mut y = Vec::with_capacity(model.npts());
        for p in 0..model.npts() {
            let (_, yy) = model.coords(p);
            let pz = v.z[p] - v.s * tp * yy;
            let qz = v.zbar[p] - v.sbar * tp.conj() * yy;
            x.push((-tau.conj() * pz + tau * qz) / t);
            y.push((pz - qz) / t);
        }
        Ok(Self { s: v.s, sbar: v.sbar, x, y })
    }

    /// The horizontal lift v of ∂/∂s, or its conjugate v̄.
    pub fn horizontal(model: &FamilyModel, s: C64, conj: bool) -> Result<Self> {
        let v = horizontal_lift(model, s)?.vector();
        Self::from_total(model, s, &if conj { v.conj() } else { v })
    }

    /// Pure fiber field.
    pub fn fiber(model: &FamilyModel, s: C64, z: Vec<C64>, zbar: Vec<C64>) -> Result<Self> {
        let zero = C64::new(0.0, 0.0);
        Self::from_total(model, s, &TotalVector { s: zero, sbar: zero, z, zbar })
    }

    pub fn is_vertical(&self) -> bool {
        self.s == C64::new(0.0, 0.0) && self.sbar == C64::new(0.0, 0.0)
    }
}

/// A relative form given on every fiber near the base point.
pub trait FormField: Sync {
    fn bidegree(&self) -> (usize, usize);
    fn sample(&self, model: &FamilyModel, s: C64) -> Result<PQForm>;
    /// False for ordinary (untwisted) forms.
    fn bundle_valued(&self) -> bool {
        true
    }
}

/// `θ_k(z, τ(s))` in the unitary frame, in the single component of a
/// (p,q)-form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaField {
    pub k: u32,
    pub p: usize,
    pub q: usize,
}

impl ThetaField {
    pub fn new(k: u32) -> Self {
        Self { k, p: 1, q: 0 }
    }
}

impl FormField for ThetaField {
    fn bidegree(&self) -> (usize, usize) {
        (self.p, self.q)
    }

    fn sample(&self, model: &FamilyModel, s: C64) -> Result<PQForm> {
        let th = ThetaFrame::new(model.d, DEFAULT_TRUNCATION)?;
        if self.k >= model.d {
            return Err(Error::InvalidParameter(format!("theta index {} >= degree {}", self.k, model.d)));
        }
        let tau = model.tau(s);
        let vals: Vec<C64> = (0..model.npts())
            .map(|p| {
                let (x, y) = model.coords(p);
                th.value(self.k, x + tau * y, tau) * model.log_rho(x, y, s).exp()
            })
            .collect();
        PQForm::from_comps(1, self.p, self.q, model.grid, vec![vals])
    }
}

fn base_factor(c: &[C64; 3], delta: C64) -> C64 {
    (c[0] * delta + c[1] * delta.conj() + c[2] * delta.norm_sqr()).exp()
}

fn draw_coefficients(seed: u64) -> [C64; 3] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_ba5e);
    let mut c = [C64::new(0.0, 0.0); 3];
    for v in c.iter_mut() {
        *v = C64::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
    }
    c
}

/// Smooth random bundle-valued form with non-holomorphic dependence on s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomField {
    pub seed: u64,
    pub p: usize,
    pub q: usize,
    pub c: [C64; 3],
}

impl RandomField {
    pub fn new(seed: u64, p: usize, q: usize) -> Self {
        Self { seed, p, q, c: draw_coefficients(seed) }
    }
}

impl FormField for RandomField {
    fn bidegree(&self) -> (usize, usize) {
        (self.p, self.q)
    }

    fn sample(&self, model: &FamilyModel, s: C64) -> Result<PQForm> {
        let f = random_smooth_form(&[model.tau(s)], &[model.d], model.grid, self.p, self.q, self.seed)?;
        let twist = (-0.5 * model.lambda() * s.norm_sqr()).exp();
        Ok(f.scale(base_factor(&self.c, s - model.s0) * twist))
    }
}

/// Smooth random ordinary (not bundle-valued) form.
#[derive(Debug, Clone, PartialEq)]
pub struct OrdinaryField {
    pub p: usize,
    pub q: usize,
    pub c: [C64; 3],
    coeffs: Vec<SmoothSection>,
}

impl OrdinaryField {
    pub fn new(seed: u64, p: usize, q: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ncomp = if p <= 1 && q <= 1 { 1 } else { 0 };
        let coeffs = (0..ncomp).map(|_| SmoothSection::random(0, &mut rng)).collect();
        Self { p, q, c: draw_coefficients(seed), coeffs }
    }
}

impl FormField for OrdinaryField {
    fn bidegree(&self) -> (usize, usize) {
        (self.p, self.q)
    }

    fn sample(&self, model: &FamilyModel, s: C64) -> Result<PQForm> {
        let f = base_factor(&self.c, s - model.s0);
        let comps = self
            .coeffs
            .iter()
            .map(|sec| {
                (0..model.npts())
                    .map(|p| {
                        let (x, y) = model.coords(p);
                        sec.trig(x, y) * f
                    })
                    .collect()
            })
            .collect();
        PQForm::from_comps(1, self.p, self.q, model.grid, comps)
    }

    fn bundle_valued(&self) -> bool {
        false
    }
}

/// `α ⊗ σ` for an ordinary form α and a section σ.
pub struct ProductField<'a> {
    pub form: &'a dyn FormField,
    pub section: &'a dyn FormField,
}

impl FormField for ProductField<'_> {
    fn bidegree(&self) -> (usize, usize) {
        self.form.bidegree()
    }

    fn sample(&self, model: &FamilyModel, s: C64) -> Result<PQForm> {
        let sec = self.section.sample(model, s)?;
        if (sec.p, sec.q) != (0, 0) {
            return Err(Error::BidegreeMismatch(sec.p, sec.q, 0, 0));
        }
        Ok(self.form.sample(model, s)?.mul_field(&sec.comps[0]))
    }
}

/// A form known on one fiber only. Base derivatives are unavailable.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticField {
    pub form: PQForm,
    pub at: C64,
}

impl FormField for StaticField {
    fn bidegree(&self) -> (usize, usize) {
        (self.form.p, self.form.q)
    }

    fn sample(&self, _model: &FamilyModel, s: C64) -> Result<PQForm> {
        if s != self.at {
            return Err(Error::MissingBaseStencil);
        }
        Ok(self.form.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LiftDirection {
    V,
    VBar,
}

/// One bidegree component of `L_X ψ` for X = v or v̄, sampled on each fiber.
pub struct LieField<'a> {
    pub inner: &'a dyn FormField,
    pub direction: LiftDirection,
    pub bidegree: (usize, usize),
}

impl<'a> LieField<'a> {
    /// `(L_X ψ)'`, the part of the input's bidegree.
    pub fn prime(inner: &'a dyn FormField, direction: LiftDirection) -> Self {
        Self { inner, direction, bidegree: inner.bidegree() }
    }

    /// `(L_X ψ)''`: (p-1, q+1) along v, (p+1, q-1) along v̄.
    pub fn second(inner: &'a dyn FormField, direction: LiftDirection) -> Option<Self> {
        let (p, q) = inner.bidegree();
        let bidegree = match direction {
            LiftDirection::V => (p.checked_sub(1)?, q + 1),
            LiftDirection::VBar => (p + 1, q.checked_sub(1)?),
        };
        (bidegree.0 <= 1 && bidegree.1 <= 1).then_some(Self { inner, direction, bidegree })
    }
}

impl FormField for LieField<'_> {
    fn bidegree(&self) -> (usize, usize) {
        self.bidegree
    }

    fn sample(&self, model: &FamilyModel, s: C64) -> Result<PQForm> {
        let v = RealVector::horizontal(model, s, self.direction == LiftDirection::VBar)?;
        let (p, q) = self.bidegree;
        let parts = lie_along(model, s, self.inner, &v)?;
        match parts.into_iter().find(|f| (f.p, f.q) == (p, q)) {
            Some(f) => Ok(f),
            None => PQForm::zeros(1, p, q, model.grid),
        }
    }

    fn bundle_valued(&self) -> bool {
        self.inner.bundle_valued()
    }
}

/// Real-chart components: (0,0) → u; 1-forms → (ω_x, ω_y); 2-forms → ω_xy.
fn to_real(form: &PQForm, tau: C64) -> Vec<Vec<C64>> {
    let u = &form.comps[0];
    match (form.p, form.q) {
        (0, 0) => vec![u.clone()],
        (1, 0) => vec![u.clone(), u.iter().map(|c| c * tau).collect()],
        (0, 1) => vec![u.clone(), u.iter().map(|c| c * tau.conj()).collect()],
        _ => vec![u.iter().map(|c| c * (tau.conj() - tau)).collect()],
    }
}

/// Splits real-chart components into all bidegrees of total degree k.
fn from_real(comps: &[Vec<C64>], tau: C64, grid: usize) -> Result<Vec<PQForm>> {
    let t = tau.conj() - tau;
    match comps.len() {
        1 if comps[0].is_empty() => Ok(vec![]),
        2 => {
            let (a, b) = (&comps[0], &comps[1]);
            let dz = a.iter().zip(b).map(|(a, b)| (a * tau.conj() - b) / t).collect();
            let dzb = a.iter().zip(b).map(|(a, b)| (b - a * tau) / t).collect();
            Ok(vec![
                PQForm::from_comps(1, 1, 0, grid, vec![dz])?,
                PQForm::from_comps(1, 0, 1, grid, vec![dzb])?,
            ])
        }
        _ => Err(Error::DimensionMismatch("real-chart components".into())),
    }
}

/// `L_X ψ` split into all bidegrees of the same total degree.
pub fn lie_along(model: &FamilyModel, s: C64, field: &dyn FormField, v: &RealVector) -> Result<Vec<PQForm>> {
    let form = field.sample(model, s)?;
    if form.n != 1 || form.grid != model.grid {
        return Err(Error::FiberMismatch);
    }
    let tau = model.tau(s);
    let grid = model.grid;
    let n = model.npts();
    let lay = model.layout();
    let bundle = field.bundle_valued();
    let comps = to_real(&form, tau);
    let nc = comps.len();

    let mut out: Vec<Vec<C64>> = comps.iter().map(|_| vec![C64::new(0.0, 0.0); n]).collect();
    if !v.is_vertical() {
        let flat = |t: C64| -> Result<Vec<C64>> {
            let f = field.sample(model, t)?;
            Ok(to_real(&f, model.tau(t)).concat())
        };
        let (ds, dsb) = model.base_wirtinger(s, flat)?;
        let (conn_s, conn_sb) = connection_terms(model, s, bundle)?;
        for c in 0..nc {
            for p in 0..n {
                let w = comps[c][p];
                let d_s = ds[c * n + p] + w * conn_s[p];
                let d_sb = dsb[c * n + p] + w * conn_sb[p];
                out[c][p] += v.s * d_s + v.sbar * d_sb;
            }
        }
    }

    let links = if bundle { model.bundle(s)?.factors[0].links.clone() } else { Links::trivial(grid) };
    for c in 0..nc {
        let gx = lattice::gradient(&comps[c], &links, &lay, Axis::X);
        let gy = lattice::gradient(&comps[c], &links, &lay, Axis::Y);
        for p in 0..n {
            out[c][p] += v.x[p] * gx[p] + v.y[p] * gy[p];
        }
    }

    let (xx, xy) = central_complex(&v.x, &lay);
    let (yx, yy) = central_complex(&v.y, &lay);
    match nc {
        2 => {
            for p in 0..n {
                let (wx, wy) = (comps[0][p], comps[1][p]);
                out[0][p] += wx * xx[p] + wy * yx[p];
                out[1][p] += wx * xy[p] + wy * yy[p];
            }
        }
        1 if form.p + form.q == 2 => {
            for p in 0..n {
                out[0][p] += comps[0][p] * (xx[p] + yy[p]);
            }
        }
        _ => {}
    }

    match form.p + form.q {
        0 => Ok(vec![PQForm::from_comps(1, 0, 0, grid, out)?]),
        1 => from_real(&out, tau, grid),
        _ => {
            let t = tau.conj() - tau;
            let u = out[0].iter().map(|c| c / t).collect();
            Ok(vec![PQForm::from_comps(1, 1, 1, grid, vec![u])?])
        }
    }
}

/// `(D_s, D_s̄)` of the unitary-frame coefficients of a field, with s
/// varying at fixed (x, y).
pub fn coefficient_base_derivative(
    model: &FamilyModel,
    s: C64,
    field: &dyn FormField,
) -> Result<(Grid, Grid)> {
    let n = model.npts();
    let f0 = field.sample(model, s)?;
    let (ds, dsb) = model.base_wirtinger(s, |t| Ok(field.sample(model, t)?.comps.concat()))?;
    let (conn_s, conn_sb) = connection_terms(model, s, field.bundle_valued())?;
    let nc = f0.comps.len();
    let mut a = vec![vec![C64::new(0.0, 0.0); n]; nc];
    let mut b = a.clone();
    for c in 0..nc {
        for p in 0..n {
            let w = f0.comps[c][p];
            a[c][p] = ds[c * n + p] + w * conn_s[p];
            b[c][p] = dsb[c * n + p] + w * conn_sb[p];
        }
    }
    Ok((a, b))
}

/// `∂_s log h - ∂_s log ρ` and `-∂_s̄ log ρ` per point: the extra terms
/// of the Chern connection in the base directions, in the unitary frame.
fn connection_terms(model: &FamilyModel, s: C64, bundle: bool) -> Result<(Vec<C64>, Vec<C64>)> {
    let n = model.npts();
    if !bundle {
        return Ok((vec![C64::new(0.0, 0.0); n], vec![C64::new(0.0, 0.0); n]));
    }
    let (rs, rsb) = model.base_wirtinger(s, |t| {
        Ok((0..n).map(|p| { let (x, y) = model.coords(p); model.log_rho(x, y, t) }).collect())
    })?;
    let (hs, _) = model.base_wirtinger(s, |t| {
        Ok((0..n).map(|p| { let (x, y) = model.coords(p); C64::new(model.log_h(x, y, t), 0.0) }).collect())
    })?;
    Ok(((0..n).map(|p| hs[p] - rs[p]).collect(), rsb.iter().map(|c| -c).collect()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LieParts {
    pub prime: PQForm,
    pub second: Option<PQForm>,
    /// Remaining part, expected to vanish.
    pub stray: Option<PQForm>,
}

fn split(parts: Vec<PQForm>, (p, q): (usize, usize), shift: (isize, isize)) -> Result<LieParts> {
    let (sp, sq) = (p as isize + shift.0, q as isize + shift.1);
    let mut prime = None;
    let mut second = None;
    let mut stray = None;
    for f in parts {
        if (f.p, f.q) == (p, q) {
            prime = Some(f);
        } else if (f.p as isize, f.q as isize) == (sp, sq) {
            second = Some(f);
        } else {
            stray = Some(f);
        }
    }
    Ok(LieParts { prime: prime.ok_or(Error::BidegreeMismatch(p, q, p, q))?, second, stray })
}

/// `L_v ψ` or `L_v̄ ψ` for the horizontal lift v at s.
pub fn lie_derivative(model: &FamilyModel, s: C64, field: &dyn FormField, direction: LiftDirection) -> Result<LieParts> {
    let v = RealVector::horizontal(model, s, direction == LiftDirection::VBar)?;
    let shift = match direction {
        LiftDirection::V => (-1, 1),
        LiftDirection::VBar => (1, -1),
    };
    split(lie_along(model, s, field, &v)?, field.bidegree(), shift)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{kodaira_spencer, FamilyKind};
    use crate::forms::{cup_ks, cup_ks_conj};

    fn rel(a: &PQForm, b: &PQForm) -> f64 {
        a.sub(b).unwrap().max_abs() / a.max_abs().max(b.max_abs()).max(1e-300)
    }

    fn model(kind: FamilyKind, grid: usize) -> FamilyModel {
        FamilyModel::new(kind, C64::new(0.2, 1.0), 2, grid).unwrap()
    }

    #[test]
    fn second_part_is_ks_cup() {
        for kind in [FamilyKind::PureModulus, FamilyKind::Combined { lambda: 0.3 }] {
            let m = model(kind, 16);
            let ks = kodaira_spencer(&m, m.s0).unwrap();
            for f in [&ThetaField::new(1) as &dyn FormField, &RandomField::new(3, 1, 0)] {
                let l = lie_derivative(&m, m.s0, f, LiftDirection::V).unwrap();
                let psi = f.sample(&m, m.s0).unwrap();
                assert!(rel(l.second.as_ref().unwrap(), &cup_ks(&ks, &psi).unwrap()) < 1e-6);
            }
            let f = RandomField::new(4, 0, 1);
            let l = lie_derivative(&m, m.s0, &f, LiftDirection::VBar).unwrap();
            let psi = f.sample(&m, m.s0).unwrap();
            assert!(rel(l.second.as_ref().unwrap(), &cup_ks_conj(&ks, &psi).unwrap()) < 1e-6);
        }
    }

    #[test]
    fn theta_frame_is_holomorphic_in_s() {
        let m = model(FamilyKind::Combined { lambda: 0.5 }, 16);
        let f = ThetaField::new(0);
        let l = lie_derivative(&m, m.s0, &f, LiftDirection::VBar).unwrap();
        let scale = f.sample(&m, m.s0).unwrap().max_abs();
        assert!(l.prime.max_abs() < 1e-6 * scale, "{}", l.prime.max_abs());
        assert!(l.stray.unwrap().max_abs() < 1e-6 * scale);
    }

    #[test]
    fn static_field_needs_stencil() {
        let m = model(FamilyKind::PureModulus, 8);
        let f = StaticField { form: ThetaField::new(0).sample(&m, m.s0).unwrap(), at: m.s0 };
        assert!(matches!(lie_derivative(&m, m.s0, &f, LiftDirection::V), Err(Error::MissingBaseStencil)));
        let v = RealVector::fiber(&m, m.s0, vec![C64::new(1.0, 0.0); 64], vec![C64::new(0.0, 0.0); 64]).unwrap();
        assert!(lie_along(&m, m.s0, &f, &v).is_ok());
    }
}
