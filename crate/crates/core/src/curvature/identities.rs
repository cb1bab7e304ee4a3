//! Residuals of the Lie-derivative, commutator and Dolbeault identities
//! behind the curvature formula, on the theta frame and on seeded random
//! forms, plus their convergence under grid refinement.
//!
//! Each residual is `‖LHS - RHS‖ / max(‖LHS‖, ‖RHS‖, scale)` where `scale`
//! is the norm of the input form (or the natural size of the field being
//! differentiated). Identities whose both sides vanish by bidegree on a
//! curve are listed with `vacuous = true`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::{theta_fields, FiberContext};
use crate::error::Result;
use crate::family::{
    commutator_check, coefficient_base_derivative, grid_z, lie_along, lie_derivative, lift_second_derivatives,
    lie_volume_defect, total_metric_components, FamilyModel, FormField, LieField, LiftDirection, OrdinaryField,
    ProductField, RandomField, RealVector, ThetaField,
};
use crate::forms::{conjugate, cup_ks, cup_ks_conj, PQForm};
use crate::lattice;
use crate::line_bundle::bundle_curvature_pairing;
use crate::C64;

pub const ORDER_THRESHOLD: f64 = 1.5;
/// Relative residuals below this count as converged regardless of order.
pub const RESIDUAL_FLOOR: f64 = 1e-8;
/// A residual that grows at least this much when the base step is halved
/// is dominated by roundoff (∝ ε⁻²), not truncation (∝ ε²).
pub const ROUNDOFF_GROWTH: f64 = 2.0;
/// Roundoff-limited rows must still sit below this.
pub const ROUNDOFF_CAP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FormSet {
    /// Properties of the family itself, no forms involved.
    Family,
    Theta,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Residual {
    pub identity: &'static str,
    pub forms: FormSet,
    pub absolute: f64,
    pub relative: f64,
    pub vacuous: bool,
}

#[derive(Default)]
struct Table(BTreeMap<(&'static str, FormSet), Residual>);

impl Table {
    fn push(&mut self, identity: &'static str, forms: FormSet, (absolute, relative): (f64, f64)) {
        let e = self.0.entry((identity, forms)).or_insert(Residual {
            identity,
            forms,
            absolute: 0.0,
            relative: 0.0,
            vacuous: false,
        });
        e.absolute = e.absolute.max(absolute);
        e.relative = e.relative.max(relative);
    }

    fn vacuous(&mut self, identity: &'static str, forms: FormSet) {
        self.0.insert((identity, forms), Residual { identity, forms, absolute: 0.0, relative: 0.0, vacuous: true });
    }
}

type Parts = BTreeMap<(usize, usize), PQForm>;
type FieldPair = (FormSet, Box<dyn FormField>, Box<dyn FormField>);

fn collect(forms: impl IntoIterator<Item = PQForm>) -> Parts {
    let mut out = Parts::new();
    for f in forms {
        match out.get_mut(&(f.p, f.q)) {
            Some(acc) => *acc = acc.add(&f).expect("same shape"),
            None => {
                out.insert((f.p, f.q), f);
            }
        }
    }
    out
}

fn sub_parts(a: &Parts, b: &Parts) -> Parts {
    let neg: Vec<PQForm> = b.values().map(|f| f.scale(C64::new(-1.0, 0.0))).collect();
    collect(a.values().cloned().chain(neg))
}

fn parts_norm(ctx: &FiberContext, a: &Parts) -> f64 {
    a.values().map(|f| ctx.complex.norm(f).powi(2)).sum::<f64>().sqrt()
}

fn compare(ctx: &FiberContext, lhs: &Parts, rhs: &Parts, scale: f64) -> (f64, f64) {
    let abs = parts_norm(ctx, &sub_parts(lhs, rhs));
    let den = parts_norm(ctx, lhs).max(parts_norm(ctx, rhs)).max(scale).max(1e-300);
    (abs, abs / den)
}

fn compare_forms(ctx: &FiberContext, lhs: &PQForm, rhs: &PQForm, scale: f64) -> (f64, f64) {
    compare(ctx, &collect([lhs.clone()]), &collect([rhs.clone()]), scale)
}

fn compare_fields(ctx: &FiberContext, lhs: Vec<C64>, rhs: Vec<C64>, scale: f64) -> Result<(f64, f64)> {
    let g = ctx.model.grid;
    Ok(compare_forms(ctx, &PQForm::scalar(1, g, lhs)?, &PQForm::scalar(1, g, rhs)?, scale))
}

fn compare_matrices(lhs: &[Vec<C64>], rhs: &[Vec<C64>], scale: f64) -> (f64, f64) {
    let fro = |m: &[Vec<C64>]| m.iter().flatten().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let diff: Vec<Vec<C64>> =
        lhs.iter().zip(rhs).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect()).collect();
    let abs = fro(&diff);
    (abs, abs / fro(lhs).max(fro(rhs)).max(scale).max(1e-300))
}

fn horizontal(ctx: &FiberContext, dir: LiftDirection) -> Result<RealVector> {
    RealVector::horizontal(&ctx.model, ctx.s, dir == LiftDirection::VBar)
}

/// All parts of `L_X ψ` for X = v or v̄.
fn lie_full(ctx: &FiberContext, f: &dyn FormField, dir: LiftDirection) -> Result<Parts> {
    Ok(collect(lie_along(&ctx.model, ctx.s, f, &horizontal(ctx, dir)?)?))
}

fn bidegrees_of_degree(k: usize) -> Vec<(usize, usize)> {
    match k {
        0 => vec![(0, 0)],
        1 => vec![(1, 0), (0, 1)],
        _ => vec![(1, 1)],
    }
}

/// `h(φ, ψ)` as an ordinary form when one of the two is a section.
fn pair(a: &PQForm, b: &PQForm) -> Result<PQForm> {
    if (a.p, a.q) == (0, 0) {
        Ok(conjugate(b).mul_field(&a.comps[0]))
    } else if (b.p, b.q) == (0, 0) {
        let cb: Vec<C64> = b.comps[0].iter().map(|c| c.conj()).collect();
        Ok(a.mul_field(&cb))
    } else {
        Err(crate::Error::Unsupported("pairing of two forms of positive degree".into()))
    }
}

struct PairField<'a> {
    a: &'a dyn FormField,
    b: &'a dyn FormField,
}

impl FormField for PairField<'_> {
    fn bidegree(&self) -> (usize, usize) {
        let ((p1, q1), (p2, q2)) = (self.a.bidegree(), self.b.bidegree());
        (p1 + q2, q1 + p2)
    }

    fn sample(&self, model: &FamilyModel, s: C64) -> Result<PQForm> {
        pair(&self.a.sample(model, s)?, &self.b.sample(model, s)?)
    }

    fn bundle_valued(&self) -> bool {
        false
    }
}

fn sign(k: usize) -> f64 {
    if k.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// One residual per identity at the fiber of `ctx`, the worst case over
/// the theta frame and over random forms drawn from `seeds`.
pub fn identity_suite(ctx: &FiberContext, seeds: &[u64]) -> Result<Vec<Residual>> {
    let m = &ctx.model;
    let s = ctx.s;
    let cx = &ctx.complex;
    let n = m.npts();
    let grid = m.grid;
    let thetas = theta_fields(m);
    let mut t = Table::default();
    let theta_refs: Vec<&dyn FormField> = thetas.iter().map(|f| f as &dyn FormField).collect();

    // volume form is preserved by v
    let vol = lie_volume_defect(m, s)?.into_iter().fold(0.0, f64::max);
    t.push("lift_preserves_volume", FormSet::Family, (vol, vol));

    // L_v ψ has second part A ∪ ψ
    let random10: Vec<RandomField> = seeds.iter().map(|&k| RandomField::new(k, 1, 0)).collect();
    let random01: Vec<RandomField> = seeds.iter().map(|&k| RandomField::new(k, 0, 1)).collect();
    let random00: Vec<RandomField> = seeds.iter().map(|&k| RandomField::new(k, 0, 0)).collect();
    let random11: Vec<RandomField> = seeds.iter().map(|&k| RandomField::new(k, 1, 1)).collect();
    for (set, fields) in [
        (FormSet::Theta, theta_refs.clone()),
        (FormSet::Random, random10.iter().map(|f| f as &dyn FormField).collect()),
    ] {
        for f in fields {
            let psi = f.sample(m, s)?;
            let l = lie_derivative(m, s, f, LiftDirection::V)?;
            let rhs = cup_ks(&ctx.ks, &psi)?;
            t.push("lie_v_second_part", set, compare_forms(ctx, l.second.as_ref().unwrap_or(&rhs.zeros_like()), &rhs, cx.norm(&psi)));
        }
    }

    // L_v̄: only forms with q ≥ 1 and p < n have a (p+1, q-1) part
    t.vacuous("lie_vbar_second_part", FormSet::Theta);
    for f in &random01 {
        let psi = f.sample(m, s)?;
        let l = lie_derivative(m, s, f, LiftDirection::VBar)?;
        let rhs = cup_ks_conj(&ctx.ks, &psi)?.scale(C64::new(sign(psi.p), 0.0));
        t.push("lie_vbar_second_part", FormSet::Random, compare_forms(ctx, l.second.as_ref().unwrap(), &rhs, cx.norm(&psi)));
    }

    // v̄∪ψ = 0 for (1,0)-forms
    let mut lv = Vec::new();
    let mut lvb = Vec::new();
    let mut psis = Vec::new();
    for f in &thetas {
        let psi = f.sample(m, s)?;
        let a = lie_derivative(m, s, f, LiftDirection::V)?;
        let b = lie_derivative(m, s, f, LiftDirection::VBar)?;
        let zero = psi.zeros_like();
        t.push("lie_vbar_prime_vanishes", FormSet::Theta, compare_forms(ctx, &b.prime, &zero, cx.norm(&psi)));
        let dbar_b = cx.dbar(&b.prime)?;
        t.push("dbar_lie_vbar_prime", FormSet::Theta, compare_forms(ctx, &dbar_b, &dbar_b.zeros_like(), cx.norm(&psi)));
        // ∂̄(L_vψ)' against ∂(A∪ψ), with the sign (-1)^n of our ∂̄ convention
        let lhs = cx.dbar(&a.prime)?;
        let rhs = cx.del(&cup_ks(&ctx.ks, &psi)?)?.scale(C64::new(sign(1), 0.0));
        t.push("dbar_lie_v_prime", FormSet::Theta, compare_forms(ctx, &lhs, &rhs, cx.norm(&psi)));
        lv.push(a);
        lvb.push(b);
        psis.push(psi);
    }
    for name in ["dbar_star_lie_v_prime", "del_star_cup", "dbar_star_lie_vbar_prime", "del_conj_cup"] {
        t.vacuous(name, FormSet::Theta);
    }

    // [v̄, v] acting on forms, in operator form
    let com = commutator_check(m, s)?;
    let g = total_metric_components(m, s)?;
    let lift = crate::family::horizontal_lift(m, s)?.vector();
    let theta_vbar_v = bundle_curvature_pairing(&g, &lift.conj(), &lift);
    let theta_v_vbar = bundle_curvature_pairing(&g, &lift, &lift.conj());
    let phi: Vec<C64> = ctx.geodesic.phi.iter().map(|&v| C64::new(v, 0.0)).collect();
    let bracket = RealVector::fiber(m, s, com.bracket.z.clone(), com.bracket.zbar.clone())?;
    let predicted = RealVector::fiber(m, s, com.predicted.z.clone(), com.predicted.zbar.clone())?;
    let neg_bracket = RealVector::fiber(
        m,
        s,
        com.bracket.z.iter().map(|c| -c).collect(),
        com.bracket.zbar.iter().map(|c| -c).collect(),
    )?;
    let mut bracket_theta = Vec::new();
    let generic: Vec<(FormSet, &dyn FormField)> = thetas
        .iter()
        .map(|f| (FormSet::Theta, f as &dyn FormField))
        .chain(
            random10
                .iter()
                .chain(&random01)
                .chain(&random00)
                .chain(&random11)
                .map(|f| (FormSet::Random, f as &dyn FormField)),
        )
        .collect();
    for &(set, f) in &generic {
        let psi = f.sample(m, s)?;
        let lhs = collect(lie_along(m, s, f, &bracket)?.into_iter().chain([psi.mul_field(&theta_vbar_v)]));
        let rhs = collect(
            lie_along(m, s, f, &predicted)?.into_iter().chain([psi.mul_field(&phi).scale(C64::new(-1.0, 0.0))]),
        );
        t.push("bracket_of_lifts", set, compare(ctx, &lhs, &rhs, cx.norm(&psi)));
        if set == FormSet::Theta {
            bracket_theta.push(lhs[&(psi.p, psi.q)].clone());
        }
    }

    // pairing of the bracket term with the frame
    let r = thetas.len();
    let scale_h = psis.iter().map(|p| cx.norm(p).powi(2)).fold(0.0, f64::max);
    let lhs_pair: Vec<Vec<C64>> = (0..r).map(|l| (0..r).map(|k| cx.inner(&bracket_theta[k], &psis[l])).collect()).collect();
    let rhs_pair: Vec<Vec<C64>> =
        (0..r).map(|l| (0..r).map(|k| -cx.inner(&psis[k].mul_field(&phi), &psis[l])).collect()).collect();
    t.push("bracket_pairing", FormSet::Theta, compare_matrices(&lhs_pair, &rhs_pair, scale_h));

    for (set, fields) in [
        (FormSet::Theta, theta_refs.clone()),
        (FormSet::Random, random10.iter().map(|f| f as &dyn FormField).collect::<Vec<_>>()),
    ] {
        let mut outer = Vec::new();
        let mut second = Vec::new();
        let mut base = Vec::new();
        for &f in &fields {
            let sec = LieField::second(f, LiftDirection::V).expect("(1,0) input");
            outer.push(lie_derivative(m, s, &sec, LiftDirection::VBar)?.second.expect("(1,0) output"));
            second.push(sec.sample(m, s)?);
            base.push(f.sample(m, s)?);
        }
        let q = fields.len();
        let lhs: Vec<Vec<C64>> = (0..q).map(|l| (0..q).map(|k| cx.inner(&outer[k], &base[l])).collect()).collect();
        let rhs: Vec<Vec<C64>> = (0..q).map(|l| (0..q).map(|k| cx.inner(&second[k], &second[l])).collect()).collect();
        let sc = base.iter().map(|p| cx.norm(p).powi(2)).fold(0.0, f64::max);
        t.push("second_part_pairing", set, compare_matrices(&lhs, &rhs, sc));
    }

    // second derivatives of the lift; Γ comes from the lattice fiber metric
    let (dgamma, _) = m.base_wirtinger(s, |u| Ok(m.fiber(u)?.christoffel_diag(0)))?;
    let mut d2 = Vec::with_capacity(n);
    let mut lhs_lift = Vec::with_capacity(n);
    let mut rhs_lift = Vec::with_capacity(n);
    for p in 0..n {
        let (zz, zbz, zzb) = lift_second_derivatives(m, grid_z(m, p, s), s);
        d2.push(-zz);
        lhs_lift.push(zbz);
        rhs_lift.push(zzb);
    }
    let ks_scale = ctx.ks.comps.iter().map(|c| c.norm()).fold(0.0, f64::max) * (2.0 * std::f64::consts::PI * m.d as f64).sqrt();
    t.push("christoffel_variation", FormSet::Family, compare_fields(ctx, dgamma, d2, ks_scale)?);
    t.push("lift_mixed_partials", FormSet::Family, compare_fields(ctx, lhs_lift, rhs_lift, ks_scale)?);

    // mixed derivatives on theta coefficients, with ∂_s at fixed z written as
    // ∂_s|_{xy} - τ' y ∇_z.
    let tau = m.tau(s);
    let tp = m.tau_prime(s)?;
    let tt = tau - tau.conj();
    let links = m.bundle(s)?.factors[0].links.clone();
    let lay = m.layout();
    let ys: Vec<f64> = (0..n).map(|p| m.coords(p).1).collect();
    for f in &thetas {
        let u = f.sample(m, s)?.comps[0].clone();
        let (ds, _) = coefficient_base_derivative(m, s, f)?;
        let ds = &ds[0];
        let du = lattice::nabla_z(&u, &links, &lay, tau);
        let dbdu = lattice::nabla_zbar(&du, &links, &lay, tau);
        let dbds = lattice::nabla_zbar(ds, &links, &lay, tau);
        let lhs_mixed: Vec<C64> = (0..n).map(|p| dbds[p] + tp / tt * du[p] - tp * ys[p] * dbdu[p]).collect();
        let rhs_mixed: Vec<C64> = (0..n).map(|p| -g.g_sz[p] * u[p]).collect();
        let sc = cx.norm(&PQForm::scalar(1, grid, u.clone())?) * g.g_zz[0];
        t.push("frame_mixed_derivative", FormSet::Theta, compare_fields(ctx, lhs_mixed, rhs_mixed, sc)?);

        // [D_s|_xy, ∇_z] u + τ'/(τ-τ̄) ∇_z u = (∂_z∂_z a) u
        let nabla = NablaZ { inner: f };
        let (ds_du, _) = coefficient_base_derivative(m, s, &nabla)?;
        let dz_ds = lattice::nabla_z(ds, &links, &lay, tau);
        let lhs_nabla: Vec<C64> = (0..n).map(|p| ds_du[0][p] - dz_ds[p] + tp / tt * du[p]).collect();
        let rhs_nabla: Vec<C64> = (0..n).map(|p| -u[p] * d2_at(m, p, s)).collect();
        let sc = cx.norm(&PQForm::scalar(1, grid, du.clone())?);
        t.push("frame_nabla_commutator", FormSet::Theta, compare_fields(ctx, lhs_nabla, rhs_nabla, sc)?);
    }
    for name in ["fiber_curvature_ks", "fiber_curvature_conj", "fiber_curvature_mixed"] {
        t.vacuous(name, FormSet::Theta);
    }

    // Leibniz rule for α ⊗ σ
    for (i, &seed) in seeds.iter().enumerate() {
        let alpha = OrdinaryField::new(seed, 1, 0);
        let rsec = RandomField::new(seed + 1000, 0, 0);
        let tsec = ThetaField { k: (i as u32) % m.d, p: 0, q: 0 };
        for (set, sec) in [(FormSet::Random, &rsec as &dyn FormField), (FormSet::Theta, &tsec as &dyn FormField)] {
            let prod = ProductField { form: &alpha, section: sec };
            let a0 = alpha.sample(m, s)?;
            let s0 = sec.sample(m, s)?;
            for dir in [LiftDirection::V, LiftDirection::VBar] {
                let lhs = lie_full(ctx, &prod, dir)?;
                let la = lie_full(ctx, &alpha, dir)?;
                let ls = lie_full(ctx, sec, dir)?;
                let rhs = collect(
                    la.values()
                        .map(|f| f.mul_field(&s0.comps[0]))
                        .chain([a0.mul_field(&ls[&(0, 0)].comps[0])]),
                );
                t.push("leibniz_product", set, compare(ctx, &lhs, &rhs, cx.norm(&prod.sample(m, s)?)));
            }
        }
    }

    // [L_v, L_v̄] = L_{[v,v̄]} + Θ_{vv̄}
    for &(set, f) in &generic {
        let psi = f.sample(m, s)?;
        let k = psi.p + psi.q;
        let mut lhs_forms = Vec::new();
        for (outer, inner) in [(LiftDirection::V, LiftDirection::VBar), (LiftDirection::VBar, LiftDirection::V)] {
            let sg = if outer == LiftDirection::V { 1.0 } else { -1.0 };
            for b in bidegrees_of_degree(k) {
                let part = LieField { inner: f, direction: inner, bidegree: b };
                for g in lie_along(m, s, &part, &horizontal(ctx, outer)?)? {
                    lhs_forms.push(g.scale(C64::new(sg, 0.0)));
                }
            }
        }
        let lhs = collect(lhs_forms);
        let rhs = collect(lie_along(m, s, f, &neg_bracket)?.into_iter().chain([psi.mul_field(&theta_v_vbar)]));
        t.push("lie_commutator", set, compare(ctx, &lhs, &rhs, cx.norm(&psi)));
    }

    // L_X h(φ, ψ) = h(L_X φ, ψ) + h(φ, L_X̄ ψ)
    let mut pairs: Vec<FieldPair> = Vec::new();
    for &seed in seeds {
        pairs.push((FormSet::Random, Box::new(RandomField::new(seed, 0, 0)), Box::new(RandomField::new(seed + 7, 0, 0))));
        pairs.push((FormSet::Random, Box::new(RandomField::new(seed, 0, 0)), Box::new(RandomField::new(seed + 7, 1, 0))));
    }
    for f in &thetas {
        pairs.push((FormSet::Theta, Box::new(ThetaField { k: 0, p: 0, q: 0 }), Box::new(*f)));
    }
    for (set, a, b) in &pairs {
        let h = PairField { a: a.as_ref(), b: b.as_ref() };
        let b0 = b.sample(m, s)?;
        let a0 = a.sample(m, s)?;
        for (dir, conj_dir) in [(LiftDirection::V, LiftDirection::VBar), (LiftDirection::VBar, LiftDirection::V)] {
            let lhs = lie_full(ctx, &h, dir)?;
            let la = lie_full(ctx, a.as_ref(), dir)?;
            let lb = lie_full(ctx, b.as_ref(), conj_dir)?;
            let mut terms = Vec::new();
            for f in la.values() {
                terms.push(pair(f, &b0)?);
            }
            for f in lb.values() {
                terms.push(pair(&a0, f)?);
            }
            t.push("metric_compatibility", *set, compare(ctx, &lhs, &collect(terms), cx.norm(&h.sample(m, s)?)));
        }
    }

    Ok(t.0.into_values().collect())
}

fn d2_at(m: &FamilyModel, p: usize, s: C64) -> C64 {
    -lift_second_derivatives(m, grid_z(m, p, s), s).0
}

/// `∇_z` of a section's coefficient, on every fiber.
struct NablaZ<'a> {
    inner: &'a dyn FormField,
}

impl FormField for NablaZ<'_> {
    fn bidegree(&self) -> (usize, usize) {
        self.inner.bidegree()
    }

    fn sample(&self, model: &FamilyModel, s: C64) -> Result<PQForm> {
        let f = self.inner.sample(model, s)?;
        let links = model.bundle(s)?.factors[0].links.clone();
        let comps = f.comps.iter().map(|c| lattice::nabla_z(c, &links, &model.layout(), model.tau(s))).collect();
        PQForm::from_comps(1, f.p, f.q, f.grid, comps)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub identity: &'static str,
    pub forms: FormSet,
    pub grids: Vec<usize>,
    pub relative: Vec<f64>,
    /// Least-squares slope of -log(residual) against log(N).
    pub order: Option<f64>,
    pub vacuous: bool,
    /// Finest-grid residual at ε/2 over the one at ε, when it was needed.
    pub step_growth: Option<f64>,
    pub status: RowStatus,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Vacuous,
    Converging,
    BelowFloor,
    /// Exact on the grid; what is left is roundoff from the base stencil.
    RoundoffLimited,
    Failed,
}

pub fn fitted_order(grids: &[usize], values: &[f64]) -> Option<f64> {
    if values.iter().any(|v| !(*v > 0.0)) || grids.len() < 2 {
        return None;
    }
    let xs: Vec<f64> = grids.iter().map(|&g| (g as f64).ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Some(-sxy / sxx)
}

/// Pass rule of a convergence row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceCriteria {
    pub order: f64,
    pub floor: f64,
    pub roundoff_growth: f64,
    pub roundoff_cap: f64,
}

impl Default for ConvergenceCriteria {
    fn default() -> Self {
        ConvergenceCriteria {
            order: ORDER_THRESHOLD,
            floor: RESIDUAL_FLOOR,
            roundoff_growth: ROUNDOFF_GROWTH,
            roundoff_cap: ROUNDOFF_CAP,
        }
    }
}

/// Runs the suite on every grid and fits convergence orders. Rows that
/// neither converge nor sit below the floor are rerun on the finest grid
/// at ε/2 to see whether roundoff explains them.
pub fn convergence_study(
    model: &FamilyModel,
    grids: &[usize],
    seeds: &[u64],
    crit: &ConvergenceCriteria,
) -> Result<Vec<ConvergenceRow>> {
    let runs = grids
        .par_iter()
        .map(|&g| {
            let mut mm = model.clone();
            mm.grid = g;
            let ctx = FiberContext::new(&mm, mm.s0)?;
            identity_suite(&ctx, seeds)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows: Vec<ConvergenceRow> = runs[0]
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let relative: Vec<f64> = runs.iter().map(|run| run[i].relative).collect();
            let order = fitted_order(grids, &relative);
            let finest = *relative.last().unwrap_or(&0.0);
            let status = if r.vacuous {
                RowStatus::Vacuous
            } else if finest <= crit.floor {
                RowStatus::BelowFloor
            } else if order.is_some_and(|o| o >= crit.order) {
                RowStatus::Converging
            } else {
                RowStatus::Failed
            };
            ConvergenceRow {
                identity: r.identity,
                forms: r.forms,
                grids: grids.to_vec(),
                relative,
                order,
                vacuous: r.vacuous,
                step_growth: None,
                status,
                pass: status != RowStatus::Failed,
            }
        })
        .collect();
    if rows.iter().any(|r| r.status == RowStatus::Failed) {
        let mut mm = model.clone().with_step(model.eps / 2.0);
        mm.grid = *grids.last().expect("nonempty grid list");
        let half = identity_suite(&FiberContext::new(&mm, mm.s0)?, seeds)?;
        for (row, h) in rows.iter_mut().zip(&half) {
            if row.status != RowStatus::Failed {
                continue;
            }
            let finest = *row.relative.last().unwrap_or(&0.0);
            let growth = h.relative / finest;
            row.step_growth = Some(growth);
            if growth >= crit.roundoff_growth && finest <= crit.roundoff_cap {
                row.status = RowStatus::RoundoffLimited;
                row.pass = true;
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::FamilyKind;

    #[test]
    fn order_fit() {
        let g = [16, 32, 64];
        let v: Vec<f64> = g.iter().map(|&n| 3.0 / (n as f64).powi(2)).collect();
        assert!((fitted_order(&g, &v).unwrap() - 2.0).abs() < 1e-12);
        assert!(fitted_order(&g, &[1.0, 0.0, 1.0]).is_none());
    }

    #[test]
    fn suite_small_grid() {
        let m = FamilyModel::new(FamilyKind::Combined { lambda: 0.5 }, C64::new(0.2, 1.0), 1, 16).unwrap();
        let ctx = FiberContext::new(&m, m.s0).unwrap();
        let rows = identity_suite(&ctx, &[1, 2]).unwrap();
        for r in &rows {
            println!("{:28} {:?} {:.3e} {:.3e} {}", r.identity, r.forms, r.absolute, r.relative, r.vacuous);
        }
        assert!(rows.iter().all(|r| r.relative < 0.2), "{rows:#?}");
    }
}
