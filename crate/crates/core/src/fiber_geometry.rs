//! Flat tori `ℂ/(ℤ + τℤ)` (or products of two) sampled on an N×N grid in
//! `(x, y)`, with the Kähler metric induced by the bundle weight.
//!
//! The volume form is `ω^n/n!`. On one factor `ω = i g dz∧dz̄` and
//! `dz∧dz̄ = -2i Im τ dx∧dy`, so `ω = 2 Im τ g dx∧dy`.

use crate::error::{Error, Result};
use crate::lattice::{self, Axis};
use crate::line_bundle::BundleMetric;
use crate::C64;

#[derive(Debug, Clone, PartialEq)]
pub struct TorusFiber {
    pub n: usize,
    pub grid: usize,
    pub taus: Vec<C64>,
    /// g_{αβ̄} at every point, row-major n×n blocks.
    pub metric: Vec<C64>,
    /// Volume weight of each grid point: (ω^n/n!) density times cell area.
    pub gdv: Vec<f64>,
    /// Per-factor metric on the factor's own N×N grid.
    factor_metric: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChristoffelCurvature {
    /// Γ^α_{αα} on each factor grid (the only nonzero symbols of a product).
    pub gamma: Vec<Vec<C64>>,
    /// R^α_{ααᾱ} = -∂_ᾱ Γ^α_{αα} on each factor grid.
    pub curvature: Vec<Vec<C64>>,
}

impl TorusFiber {
    pub fn npts(&self) -> usize {
        (self.grid * self.grid).pow(self.n as u32)
    }

    pub fn metric_at(&self, p: usize) -> &[C64] {
        &self.metric[p * self.n * self.n..(p + 1) * self.n * self.n]
    }

    /// g^{αβ̄} (inverse matrix) at point p.
    pub fn inverse_metric_at(&self, p: usize) -> Vec<C64> {
        let g = self.metric_at(p);
        match self.n {
            1 => vec![C64::new(1.0, 0.0) / g[0]],
            _ => {
                let det = g[0] * g[3] - g[1] * g[2];
                vec![g[3] / det, -g[1] / det, -g[2] / det, g[0] / det]
            }
        }
    }

    /// g of factor f on its own grid.
    pub fn factor_metric(&self, f: usize) -> &[f64] {
        &self.factor_metric[f]
    }

    /// True when every factor metric is constant to rounding.
    pub fn is_flat_constant(&self) -> bool {
        self.factor_metric.iter().all(|m| {
            let m0 = m[0];
            m.iter().all(|v| (v - m0).abs() <= 1e-12 * m0.abs())
        })
    }

    /// Γ^f_{ff} = ∂_{z_f} log g_f evaluated at every product point.
    pub fn christoffel_diag(&self, f: usize) -> Vec<C64> {
        let local = factor_christoffel(self, f);
        let lay = lattice::FactorLayout::new(self.grid, self.n, f);
        (0..self.npts())
            .map(|p| {
                let (i, j) = lay.local(p);
                local[i * self.grid + j]
            })
            .collect()
    }
}

fn wirtinger(dx: &[f64], dy: &[f64], tau: C64, holo: bool) -> Vec<C64> {
    let t = tau - tau.conj();
    dx.iter()
        .zip(dy)
        .map(|(&a, &b)| if holo { (b - tau.conj() * a) / t } else { (tau * a - b) / t })
        .collect()
}

fn factor_christoffel(fiber: &TorusFiber, f: usize) -> Vec<C64> {
    let lay = lattice::FactorLayout::new(fiber.grid, 1, 0);
    let g = &fiber.factor_metric[f];
    let lg: Vec<f64> = g.iter().map(|v| v.ln()).collect();
    let dx = lattice::central_real(&lg, &lay, Axis::X);
    let dy = lattice::central_real(&lg, &lay, Axis::Y);
    wirtinger(&dx, &dy, fiber.taus[f], true)
}

pub fn build_fiber(bundle: &BundleMetric) -> Result<TorusFiber> {
    let n = bundle.n;
    let grid = bundle.grid;
    let h = 1.0 / grid as f64;
    let mut factor_metric = Vec::with_capacity(n);
    for fb in &bundle.factors {
        let mut m = vec![0.0; grid * grid];
        for i in 0..grid {
            for j in 0..grid {
                let g = fb.weight.metric(i as f64 * h, j as f64 * h);
                if !(g > 0.0) {
                    return Err(Error::NonPositiveMetric { point: i * grid + j, value: g });
                }
                m[i * grid + j] = g;
            }
        }
        factor_metric.push(m);
    }
    let npts = bundle.npts();
    let cell = (h * h).powi(n as i32);
    let mut metric = vec![C64::new(0.0, 0.0); npts * n * n];
    let mut gdv = vec![0.0; npts];
    for p in 0..npts {
        let mut vol = cell;
        for f in 0..n {
            let (i, j) = bundle.layout(f).local(p);
            let g = factor_metric[f][i * grid + j];
            metric[p * n * n + f * n + f] = C64::new(g, 0.0);
            vol *= 2.0 * bundle.factors[f].weight.tau.im * g;
        }
        gdv[p] = vol;
    }
    Ok(TorusFiber { n, grid, taus: bundle.taus(), metric, gdv, factor_metric })
}

pub fn fiber_volume(fiber: &TorusFiber) -> f64 {
    fiber.gdv.iter().sum()
}

pub fn christoffel_and_curvature(fiber: &TorusFiber) -> ChristoffelCurvature {
    let lay = lattice::FactorLayout::new(fiber.grid, 1, 0);
    let mut gamma = Vec::new();
    let mut curvature = Vec::new();
    for f in 0..fiber.n {
        let gm = factor_christoffel(fiber, f);
        let re: Vec<f64> = gm.iter().map(|c| c.re).collect();
        let im: Vec<f64> = gm.iter().map(|c| c.im).collect();
        let (rx, ry) = (lattice::central_real(&re, &lay, Axis::X), lattice::central_real(&re, &lay, Axis::Y));
        let (ix, iy) = (lattice::central_real(&im, &lay, Axis::X), lattice::central_real(&im, &lay, Axis::Y));
        let dre = wirtinger(&rx, &ry, fiber.taus[f], false);
        let dim = wirtinger(&ix, &iy, fiber.taus[f], false);
        let r: Vec<C64> = dre.iter().zip(&dim).map(|(a, b)| -(a + C64::new(0.0, 1.0) * b)).collect();
        gamma.push(gm);
        curvature.push(r);
    }
    ChristoffelCurvature { gamma, curvature }
}
