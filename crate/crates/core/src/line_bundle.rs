//! Hermitian line bundle of degree d on each torus factor.
//!
//! Sections are stored in the unitary frame `u = f·h^{1/2}e^{iχ}` with
//! `χ = π d Re τ y²`; for the model weight this is `u = f·e^{iπ d τ y²}`,
//! which is periodic in x and satisfies `u(x, y+1) = e^{-2πi d x} u(x, y)`.
//! The unitary connection is `d + i(A_x dx + A_y dy)` with
//!
//! ```text
//! A_x = -(∂_y L - Re τ ∂_x L)/(2 Im τ) - ∂_x χ
//! A_y = -(Re τ ∂_y L - |τ|² ∂_x L)/(2 Im τ) - ∂_y χ
//! ```
//!
//! for `L = log h`; the model weight gives `A_x = 2π d y`, `A_y = 0`.

use crate::error::{Error, Result};
use crate::fiber_geometry::TorusFiber;
use crate::forms::PQForm;
use crate::lattice::{self, FactorLayout, Links};
use crate::C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// One Fourier mode `amp · cos(2π(kx x + ky y))` added to `log h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CosMode {
    pub amp: f64,
    pub kx: i32,
    pub ky: i32,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    pub modes: Vec<CosMode>,
}

impl Perturbation {
    pub fn cosine_x(amp: f64) -> Self {
        Self { modes: vec![CosMode { amp, kx: 1, ky: 0 }] }
    }

    fn eval(&self, x: f64, y: f64) -> [f64; 6] {
        // value, ∂x, ∂y, ∂xx, ∂xy, ∂yy
        let mut out = [0.0; 6];
        for m in &self.modes {
            let (ax, ay) = (2.0 * PI * m.kx as f64, 2.0 * PI * m.ky as f64);
            let ph = ax * x + ay * y;
            let (s, c) = ph.sin_cos();
            out[0] += m.amp * c;
            out[1] -= m.amp * ax * s;
            out[2] -= m.amp * ay * s;
            out[3] -= m.amp * ax * ax * c;
            out[4] -= m.amp * ax * ay * c;
            out[5] -= m.amp * ay * ay * c;
        }
        out
    }
}

/// Closed-form weight of one factor.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorWeight {
    pub d: u32,
    pub tau: C64,
    pub perturbation: Perturbation,
}

impl FactorWeight {
    pub fn log_h(&self, x: f64, y: f64) -> f64 {
        -2.0 * PI * self.d as f64 * self.tau.im * y * y + self.perturbation.eval(x, y)[0]
    }

    /// (value, ∂x, ∂y, ∂xx, ∂xy, ∂yy) of log h.
    pub fn jet(&self, x: f64, y: f64) -> [f64; 6] {
        let mut p = self.perturbation.eval(x, y);
        let c = -2.0 * PI * self.d as f64 * self.tau.im;
        p[0] += c * y * y;
        p[2] += 2.0 * c * y;
        p[5] += 2.0 * c;
        p
    }

    pub fn chi(&self, _x: f64, y: f64) -> f64 {
        PI * self.d as f64 * self.tau.re * y * y
    }

    /// g_{zz̄} = -∂_z∂_z̄ log h.
    pub fn metric(&self, x: f64, y: f64) -> f64 {
        let j = self.jet(x, y);
        let t = self.tau;
        -(t.norm_sqr() * j[3] - 2.0 * t.re * j[4] + j[5]) / (4.0 * t.im * t.im)
    }

    /// Real connection components (A_x, A_y) of the unitary frame.
    pub fn connection(&self, x: f64, y: f64) -> (f64, f64) {
        let j = self.jet(x, y);
        let t = self.tau;
        let dchi_y = 2.0 * PI * self.d as f64 * t.re * y;
        let ax = -(j[2] - t.re * j[1]) / (2.0 * t.im);
        let ay = -(t.re * j[2] - t.norm_sqr() * j[1]) / (2.0 * t.im) - dchi_y;
        (ax, ay)
    }

    /// Γ^h_z = ∂_z log h.
    pub fn holomorphic_connection(&self, x: f64, y: f64) -> C64 {
        let j = self.jet(x, y);
        let t = self.tau - self.tau.conj();
        (j[2] - self.tau.conj() * j[1]) / t
    }

    pub fn links(&self, grid: usize) -> Links {
        let n = grid;
        let h = 1.0 / n as f64;
        // 4-point Gauss-Legendre on [0, 1]
        let nodes = [0.069_431_844_202_973_71, 0.330_009_478_207_571_9, 0.669_990_521_792_428_1, 0.930_568_155_797_026_3];
        let weights = [0.173_927_422_568_726_9, 0.326_072_577_431_273_1, 0.326_072_577_431_273_1, 0.173_927_422_568_726_9];
        let mut links = Links::trivial(n);
        for i in 0..n {
            for j in 0..n {
                let (x, y) = (i as f64 * h, j as f64 * h);
                let mut px = 0.0;
                let mut py = 0.0;
                for (s, w) in nodes.iter().zip(&weights) {
                    px += w * self.connection(x + s * h, y).0 * h;
                    py += w * self.connection(x, y + s * h).1 * h;
                }
                links.ux[i * n + j] = C64::from_polar(1.0, px);
                let mut uy = C64::from_polar(1.0, py);
                if j == n - 1 {
                    uy *= C64::from_polar(1.0, -2.0 * PI * self.d as f64 * x);
                }
                links.uy[i * n + j] = uy;
            }
        }
        links
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorBundle {
    pub weight: FactorWeight,
    pub links: Links,
}

/// Line bundle on a product of `n` factors (n = 1 or 2).
#[derive(Debug, Clone, PartialEq)]
pub struct BundleMetric {
    pub n: usize,
    pub grid: usize,
    pub factors: Vec<FactorBundle>,
    /// log h at every grid point of the product.
    pub log_h: Vec<f64>,
    /// Γ^h_α = ∂_α log h, `conn[p * n + α]`.
    pub conn: Vec<C64>,
}

impl BundleMetric {
    pub fn npts(&self) -> usize {
        (self.grid * self.grid).pow(self.n as u32)
    }

    pub fn layout(&self, factor: usize) -> FactorLayout {
        FactorLayout::new(self.grid, self.n, factor)
    }

    pub fn degrees(&self) -> Vec<u32> {
        self.factors.iter().map(|f| f.weight.d).collect()
    }

    pub fn taus(&self) -> Vec<C64> {
        self.factors.iter().map(|f| f.weight.tau).collect()
    }

    pub fn is_unperturbed(&self) -> bool {
        self.factors.iter().all(|f| f.weight.perturbation.modes.is_empty())
    }

    /// Local grid coordinates of factor f at product point p.
    pub fn coords(&self, factor: usize, p: usize) -> (f64, f64) {
        let (i, j) = self.layout(factor).local(p);
        let h = 1.0 / self.grid as f64;
        (i as f64 * h, j as f64 * h)
    }

    /// Replace the links by a gauge-transformed copy (one phase field per factor).
    pub fn gauge_transformed(&self, phases: &[Vec<C64>]) -> Self {
        let mut out = self.clone();
        for (f, ph) in out.factors.iter_mut().zip(phases) {
            f.links = f.links.gauge_transform(ph);
        }
        out
    }
}

pub fn build_bundle(
    n: usize,
    taus: &[C64],
    degrees: &[u32],
    grid: usize,
    perturbation: Option<&[Perturbation]>,
) -> Result<BundleMetric> {
    if n == 0 || n > 2 {
        return Err(Error::Unsupported(format!("fiber dimension {n}")));
    }
    if taus.len() != n || degrees.len() != n {
        return Err(Error::DimensionMismatch("one τ and one degree per factor".into()));
    }
    if grid < 4 || !grid.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!("grid size {grid} must be even and >= 4")));
    }
    let mut factors = Vec::with_capacity(n);
    for f in 0..n {
        if degrees[f] == 0 {
            return Err(Error::InvalidParameter("degree must be >= 1".into()));
        }
        if taus[f].im <= 0.0 {
            return Err(Error::InvalidParameter("Im τ must be positive".into()));
        }
        let pert = perturbation.and_then(|p| p.get(f)).cloned().unwrap_or_default();
        let weight = FactorWeight { d: degrees[f], tau: taus[f], perturbation: pert };
        let h = 1.0 / grid as f64;
        for i in 0..grid {
            for j in 0..grid {
                let g = weight.metric(i as f64 * h, j as f64 * h);
                if g <= 0.0 {
                    return Err(Error::NonPositiveMetric { point: i * grid + j, value: g });
                }
            }
        }
        let links = weight.links(grid);
        factors.push(FactorBundle { weight, links });
    }
    let mut b = BundleMetric { n, grid, factors, log_h: Vec::new(), conn: Vec::new() };
    let npts = b.npts();
    b.log_h = vec![0.0; npts];
    b.conn = vec![C64::new(0.0, 0.0); npts * n];
    for p in 0..npts {
        for f in 0..n {
            let (x, y) = b.coords(f, p);
            b.log_h[p] += b.factors[f].weight.log_h(x, y);
            b.conn[p * n + f] = b.factors[f].weight.holomorphic_connection(x, y);
        }
    }
    Ok(b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BundleCurvature {
    /// g_{αα} = -∂_α∂_ᾱ log h of each factor on its own grid, `omega[f][i*N+j]`.
    pub omega: Vec<Vec<f64>>,
    /// Plaquette field strengths Φ with plaquette = e^{-iΦ}, per factor.
    pub plaquette_flux: Vec<Vec<f64>>,
    /// Σ Φ per factor.
    pub flux: Vec<f64>,
}

pub fn bundle_curvature(bundle: &BundleMetric) -> BundleCurvature {
    let n = bundle.grid;
    let h = 1.0 / n as f64;
    let mut omega = Vec::new();
    let mut pf = Vec::new();
    let mut flux = Vec::new();
    for f in &bundle.factors {
        let mut om = vec![0.0; n * n];
        let mut ph = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                om[i * n + j] = f.weight.metric(i as f64 * h, j as f64 * h);
                ph[i * n + j] = -f.links.plaquette(i, j).arg();
            }
        }
        flux.push(ph.iter().sum());
        omega.push(om);
        pf.push(ph);
    }
    BundleCurvature { omega, plaquette_flux: pf, flux }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// ∇_{z_α}
    Holomorphic(usize),
    /// ∇_{z̄_α}
    Antiholomorphic(usize),
}

/// Chern covariant derivative of an L-valued form along one fiber
/// coordinate direction, including the fiber Christoffel symbols acting on
/// form indices. Uses the blended central differences without the lift.
pub fn covariant_derivative(
    bundle: &BundleMetric,
    fiber: &TorusFiber,
    form: &PQForm,
    direction: Direction,
) -> Result<PQForm> {
    if form.n != bundle.n || form.grid != bundle.grid || fiber.n != bundle.n || fiber.grid != bundle.grid {
        return Err(Error::DimensionMismatch("form, fiber and bundle grids differ".into()));
    }
    let mut out = form.zeros_like();
    let (f, holo) = match direction {
        Direction::Holomorphic(f) => (f, true),
        Direction::Antiholomorphic(f) => (f, false),
    };
    if f >= bundle.n {
        return Err(Error::DimensionMismatch(format!("direction index {f}")));
    }
    let fb = &bundle.factors[f];
    let lay = bundle.layout(f);
    for (c, comp) in form.comps.iter().enumerate() {
        out.comps[c] = if holo {
            lattice::nabla_z(comp, &fb.links, &lay, fb.weight.tau)
        } else {
            lattice::nabla_zbar(comp, &fb.links, &lay, fb.weight.tau)
        };
    }
    // Flat product metrics have Γ^α_{αα} = ∂_α log g_α only; the Chern
    // connection acts on holomorphic indices in holomorphic directions and
    // on antiholomorphic indices in antiholomorphic directions.
    let gamma = fiber.christoffel_diag(f);
    let (hol_idx, anti_idx) = form.index_pairs();
    for (c, (ii, jj)) in hol_idx.iter().zip(&anti_idx).enumerate() {
        let slot_present = if holo { ii.contains(&f) } else { jj.contains(&f) };
        if !slot_present {
            continue;
        }
        for p in 0..form.npts() {
            let gm = if holo { gamma[p] } else { gamma[p].conj() };
            out.comps[c][p] -= gm * form.comps[c][p];
        }
    }
    Ok(out)
}

/// Total-space metric components of a one-parameter family over a fiber
/// with n = 1: g_{ss̄}, g_{sz̄}, g_{zz̄} per grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct TotalMetric {
    pub g_ss: Vec<f64>,
    pub g_sz: Vec<C64>,
    pub g_zz: Vec<f64>,
}

/// Complex vector field on the total space: constant base components,
/// fiber components per grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct TotalVector {
    pub s: C64,
    pub sbar: C64,
    pub z: Vec<C64>,
    pub zbar: Vec<C64>,
}

impl TotalVector {
    pub fn conj(&self) -> Self {
        Self {
            s: self.sbar.conj(),
            sbar: self.s.conj(),
            z: self.zbar.iter().map(|c| c.conj()).collect(),
            zbar: self.z.iter().map(|c| c.conj()).collect(),
        }
    }
}

/// Θ(L)_{vw} = Θ(L)(v, w) with `Θ(L) = ∂̄∂ log h = g_{ab̄} dz^a ∧ dz̄^b`
/// over a, b ∈ {s, z}; e.g. Θ(L)_{v̄v} = -|v|²_ω.
pub fn bundle_curvature_pairing(g: &TotalMetric, v: &TotalVector, w: &TotalVector) -> Vec<C64> {
    let npts = g.g_zz.len();
    (0..npts)
        .map(|p| {
            let va = [v.s, v.z[p]];
            let vb = [v.sbar, v.zbar[p]];
            let wa = [w.s, w.z[p]];
            let wb = [w.sbar, w.zbar[p]];
            let m = [
                [C64::new(g.g_ss[p], 0.0), g.g_sz[p]],
                [g.g_sz[p].conj(), C64::new(g.g_zz[p], 0.0)],
            ];
            let mut acc = C64::new(0.0, 0.0);
            for a in 0..2 {
                for b in 0..2 {
                    acc += m[a][b] * (va[a] * wb[b] - wa[a] * vb[b]);
                }
            }
            acc
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flux_is_quantized() {
        for d in 1..=3u32 {
            for &n in &[8usize, 16, 24] {
                let b = build_bundle(1, &[C64::new(0.2, 1.3)], &[d], n, None).unwrap();
                let c = bundle_curvature(&b);
                assert!((c.flux[0] - 2.0 * PI * d as f64).abs() < 1e-10, "d={d} n={n}");
                let each = 2.0 * PI * d as f64 / (n * n) as f64;
                assert!(c.plaquette_flux[0].iter().all(|v| (v - each).abs() < 1e-12));
            }
        }
    }

    #[test]
    fn links_unit_modulus() {
        let b = build_bundle(1, &[C64::new(0.0, 1.0)], &[2], 8, Some(&[Perturbation::cosine_x(0.01)])).unwrap();
        for l in b.factors[0].links.ux.iter().chain(&b.factors[0].links.uy) {
            assert!((l.norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn perturbation_keeps_flux() {
        let pert = Perturbation { modes: vec![CosMode { amp: 0.01, kx: 1, ky: 0 }, CosMode { amp: 0.005, kx: 1, ky: 2 }] };
        let b = build_bundle(1, &[C64::new(0.5, 1.0)], &[1], 16, Some(&[pert])).unwrap();
        let c = bundle_curvature(&b);
        assert!((c.flux[0] - 2.0 * PI).abs() < 1e-10);
        let om = &c.omega[0];
        let spread = om.iter().cloned().fold(f64::MIN, f64::max) - om.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread > 0.05);
    }

    #[test]
    fn strong_perturbation_rejected() {
        let r = build_bundle(1, &[C64::new(0.0, 1.0)], &[1], 8, Some(&[Perturbation::cosine_x(1.0)]));
        assert!(matches!(r, Err(Error::NonPositiveMetric { .. })));
    }

    #[test]
    fn model_metric_value() {
        let w = FactorWeight { d: 2, tau: C64::new(0.3, 1.5), perturbation: Perturbation::default() };
        assert!((w.metric(0.3, 0.8) - 2.0 * PI / 1.5).abs() < 1e-13);
        let (ax, ay) = w.connection(0.1, 0.4);
        assert!((ax - 2.0 * PI * 2.0 * 0.4).abs() < 1e-12 && ay.abs() < 1e-12);
    }
}
