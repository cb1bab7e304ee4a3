//! Closed-form ground truths.
//!
//! Nothing here touches lattice operators. Derivations for the flat model
//! (one factor, `z = x + τy`, `t = τ - τ̄ = 2i Im τ`, `u = z - z̄`):
//!
//! * `log h = π d i u² / t = -2π d Im τ y²`, so `g_{zz̄} = -∂_z∂_z̄ log h = π d / Im τ`.
//! * `ω^n/n!` in `(x, y)` coordinates is `2 Im τ · g dx dy`, total volume `2π d`.
//! * Pure modulus family `τ(s) = τ₀ + s`: `g_{sz̄} = -2π i d u / t²`,
//!   `g_{ss̄} = 2π i d u² / t³`, hence `a^z = -g_{sz̄}/g_{zz̄} = u/t = y` and
//!   `A^z_{z̄} = ∂_z̄ a^z = -1/t = i/(2 Im τ)`.
//! * `φ = g_{ss̄} - |g_{sz̄}|²/g_{zz̄} = 0` identically.
//! * `∫|A|² g dV = (1/(4 Im τ²)) · (π d/Im τ)^{-1}·g · 2π d = π d/(2 Im τ²)`
//!   (the pointwise norm of a tangent-valued (0,1)-form is `|A|² g g^{-1}`).
//! * Theta sections `θ_k(z,τ) = Σ_m exp(iπ d τ (m+k/d)² + 2π i d z (m+k/d))`
//!   satisfy `∫|θ_k|² h dx dy = (2 d Im τ)^{-1/2}` and are mutually orthogonal;
//!   the (1,0)-form `θ_k dz` therefore has squared norm `√(2 Im τ / d)`.
//! * With that norm `H(s) ∝ (Im τ)^{1/2}`, the Chern curvature of the
//!   direct image line is `-∂_s∂_s̄ log H = 1/(8 Im τ²)` per orthonormal frame.
//! * Base twist `h e^{-λ|s|²}`: `φ = λ`, `A = 0`, curvature `λ`.

use crate::error::{Error, Result};
use crate::C64;
use std::f64::consts::PI;

/// Default series truncation used by frames.
pub const DEFAULT_TRUNCATION: usize = 8;

/// Degree-d theta functions with characteristics k/d.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaFrame {
    pub d: u32,
    pub truncation: usize,
}

impl ThetaFrame {
    pub fn new(d: u32, truncation: usize) -> Result<Self> {
        if truncation < 3 {
            return Err(Error::TruncationTooCoarse(truncation));
        }
        if d == 0 {
            return Err(Error::InvalidParameter("theta degree must be >= 1".into()));
        }
        Ok(Self { d, truncation })
    }

    pub fn value(&self, k: u32, z: C64, tau: C64) -> C64 {
        theta_sum(k, self.d, z, tau, self.truncation)
    }

    /// Sum of the moduli of the next forty omitted terms on both sides,
    /// relative to the largest retained term.
    pub fn tail_bound(&self, k: u32, z: C64, tau: C64) -> f64 {
        let m = self.truncation as i64;
        let mut largest = 0.0f64;
        for n in -m..=m {
            largest = largest.max(term(k, self.d, z, tau, n).norm());
        }
        let mut tail = 0.0;
        for n in (m + 1)..(m + 41) {
            tail += term(k, self.d, z, tau, n).norm() + term(k, self.d, z, tau, -n).norm();
        }
        tail / largest
    }
}

fn term(k: u32, d: u32, z: C64, tau: C64, n: i64) -> C64 {
    let df = d as f64;
    let m = n as f64 + k as f64 / df;
    (C64::new(0.0, PI * df) * tau * m * m + C64::new(0.0, 2.0 * PI * df) * z * m).exp()
}

fn theta_sum(k: u32, d: u32, z: C64, tau: C64, truncation: usize) -> C64 {
    // Recentre the summation window on the dominant term so that points
    // slightly outside the fundamental domain stay accurate.
    let shift = (-(z.im / tau.im)).round() as i64;
    let m = truncation as i64;
    let mut acc = C64::new(0.0, 0.0);
    for n in (shift - m)..=(shift + m) {
        acc += term(k, d, z, tau, n);
    }
    acc
}

/// θ_k(z, τ) for degree d with an M-term symmetric truncation.
pub fn theta_value(k: u32, d: u32, z: C64, tau: C64, truncation: usize) -> Result<C64> {
    if truncation < 3 {
        return Err(Error::TruncationTooCoarse(truncation));
    }
    if tau.im <= 0.0 {
        return Err(Error::InvalidParameter("Im tau must be positive".into()));
    }
    Ok(theta_sum(k, d, z, tau, truncation))
}

/// Automorphy factor e^{-2πi d z - πi d τ} for z ↦ z + τ.
pub fn theta_automorphy(d: u32, z: C64, tau: C64) -> C64 {
    let df = d as f64;
    (C64::new(0.0, -2.0 * PI * df) * z + C64::new(0.0, -PI * df) * tau).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LandauOracle {
    pub d: u32,
    pub m_max: usize,
}

impl LandauOracle {
    /// (value, multiplicity) pairs for □_∂̄ on (0,0), n = 1.
    pub fn levels(&self) -> Vec<(f64, usize)> {
        landau_spectrum(self.d, self.m_max)
    }

    /// Sorted eigenvalue list with multiplicities expanded.
    pub fn expanded(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (v, mult) in self.levels() {
            out.extend(std::iter::repeat_n(v, mult));
        }
        out
    }
}

/// Landau ladder: the commutator of the covariant (1,0) and (0,1)
/// derivatives is the metric itself, so with g-normalized Laplacians the
/// levels are the non-negative integers, each of multiplicity d.
pub fn landau_spectrum(d: u32, m_max: usize) -> Vec<(f64, usize)> {
    (0..=m_max).map(|m| (m as f64, d as usize)).collect()
}

/// Same ladder for the (0,1) block: ∂̄∂̄* = ∂̄*∂̄ + 1 there.
pub fn landau_spectrum_01(d: u32, m_max: usize) -> Vec<(f64, usize)> {
    (1..=m_max + 1).map(|m| (m as f64, d as usize)).collect()
}

/// Closed-form quantities of the pure-modulus family at τ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticFamily {
    pub tau: C64,
    pub d: u32,
}

impl AnalyticFamily {
    /// a^z = (z - z̄)/(τ - τ̄), i.e. the y coordinate.
    pub fn lift(&self, z: C64) -> C64 {
        (z - z.conj()) / (self.tau - self.tau.conj())
    }

    /// A^z_{z̄} = ∂_z̄ a^z = -1/(τ - τ̄) = i/(2 Im τ).
    pub fn ks_coefficient(&self) -> C64 {
        -C64::new(1.0, 0.0) / (self.tau - self.tau.conj())
    }

    pub fn fiber_metric(&self) -> f64 {
        PI * self.d as f64 / self.tau.im
    }

    pub fn geodesic_curvature(&self, _z: C64) -> f64 {
        0.0
    }

    pub fn ks_norm_sq(&self) -> f64 {
        PI * self.d as f64 / (2.0 * self.tau.im * self.tau.im)
    }

    pub fn g_s_zbar(&self, z: C64) -> C64 {
        let t = self.tau - self.tau.conj();
        C64::new(0.0, -2.0 * PI * self.d as f64) * (z - z.conj()) / (t * t)
    }

    pub fn g_s_sbar(&self, z: C64) -> f64 {
        let t = self.tau - self.tau.conj();
        let u = z - z.conj();
        (C64::new(0.0, 2.0 * PI * self.d as f64) * u * u / (t * t * t)).re
    }

    pub fn fiber_volume(&self) -> f64 {
        2.0 * PI * self.d as f64
    }

    /// Squared norm of the (1,0)-form θ_k dz.
    pub fn theta_form_norm_sq(&self) -> f64 {
        (2.0 * self.tau.im / self.d as f64).sqrt()
    }

    /// Squared norm of the section θ_k against g dV.
    pub fn theta_section_norm_sq(&self) -> f64 {
        2.0 * PI * self.d as f64 / (2.0 * self.d as f64 * self.tau.im).sqrt()
    }

    /// Curvature of the direct image in an orthonormal frame.
    pub fn direct_image_curvature(&self) -> f64 {
        1.0 / (8.0 * self.tau.im * self.tau.im)
    }
}

pub fn analytic_family_quantities(tau: C64, d: u32) -> AnalyticFamily {
    AnalyticFamily { tau, d }
}

/// Base-twisted family h·e^{-λ|s|²}: φ = λ and the curvature equals λ.
pub fn twist_curvature(lambda: f64) -> f64 {
    lambda
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn automorphy_in_one() {
        for d in 1..=3 {
            for k in 0..d {
                let tau = c(0.3, 1.1);
                let z = c(0.2, 0.4);
                let a = theta_value(k, d, z + 1.0, tau, 8).unwrap();
                let b = theta_value(k, d, z, tau, 8).unwrap();
                assert!((a - b).norm() < 1e-12, "d={d} k={k}");
            }
        }
    }

    #[test]
    fn automorphy_in_tau() {
        for d in 1..=3 {
            for k in 0..d {
                let tau = c(0.5, 1.0);
                let z = c(0.1, 0.3);
                let a = theta_value(k, d, z + tau, tau, 10).unwrap();
                let b = theta_automorphy(d, z, tau) * theta_value(k, d, z, tau, 10).unwrap();
                assert!((a - b).norm() < 1e-12 * b.norm().max(1.0), "d={d} k={k}");
            }
        }
    }

    #[test]
    fn truncation_converges() {
        let a = theta_value(0, 1, c(0.0, 0.0), c(0.0, 1.0), 5).unwrap();
        let b = theta_value(0, 1, c(0.0, 0.0), c(0.0, 1.0), 8).unwrap();
        assert!((a - b).norm() < 1e-14);
        // θ(0, i) = Σ e^{-π n²}
        let direct: f64 = (-20i32..=20).map(|n| (-PI * (n * n) as f64).exp()).sum();
        assert!((b.re - direct).abs() < 1e-14 && b.im.abs() < 1e-15);
    }

    #[test]
    fn tail_bound_small() {
        let f = ThetaFrame::new(1, 5).unwrap();
        for &y in &[0.0, 0.5, 0.99] {
            let tau = c(0.0, 0.5);
            assert!(f.tail_bound(0, tau * y, tau) < 1e-14);
        }
    }

    #[test]
    fn coarse_truncation_rejected() {
        assert_eq!(
            theta_value(0, 1, c(0.0, 0.0), c(0.0, 1.0), 2),
            Err(Error::TruncationTooCoarse(2))
        );
    }

    #[test]
    fn landau_levels() {
        assert_eq!(landau_spectrum(1, 2), vec![(0.0, 1), (1.0, 1), (2.0, 1)]);
        assert!(landau_spectrum(3, 4).iter().all(|&(_, m)| m == 3));
        let o = LandauOracle { d: 2, m_max: 1 };
        assert_eq!(o.expanded(), vec![0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn family_constants() {
        let f = analytic_family_quantities(c(0.0, 1.0), 1);
        assert!((f.ks_coefficient() - c(0.0, 0.5)).norm() < 1e-15);
        assert!((f.ks_norm_sq() - PI / 2.0).abs() < 1e-15);
        let f2 = analytic_family_quantities(c(0.0, 2.0), 3);
        assert!((f2.ks_norm_sq() - 3.0 * PI / 8.0).abs() < 1e-15);
        // φ cancellation: g_ss̄ = |g_sz̄|²/g
        let z = c(0.3, 0.7);
        let lhs = f.g_s_sbar(z);
        let rhs = f.g_s_zbar(z).norm_sqr() / f.fiber_metric();
        assert!((lhs - rhs).abs() < 1e-13);
        assert!((f.lift(z) - c(0.7, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn theta_gram_by_quadrature() {
        // Spectral quadrature of |θ_k|² e^{-2π d Im τ y²} over the unit square.
        let tau = c(0.5, 1.0);
        for d in 1..=3u32 {
            let n = 64;
            let mut gram = vec![C64::new(0.0, 0.0); (d * d) as usize];
            for i in 0..n {
                for j in 0..n {
                    let (x, y) = (i as f64 / n as f64, j as f64 / n as f64);
                    let z = x + tau * y;
                    let w = (-2.0 * PI * d as f64 * tau.im * y * y).exp() / (n * n) as f64;
                    let th: Vec<C64> = (0..d).map(|k| theta_value(k, d, z, tau, 8).unwrap()).collect();
                    for a in 0..d as usize {
                        for b in 0..d as usize {
                            gram[a * d as usize + b] += th[a] * th[b].conj() * w;
                        }
                    }
                }
            }
            let expect = 1.0 / (2.0 * d as f64 * tau.im).sqrt();
            for a in 0..d as usize {
                for b in 0..d as usize {
                    let e = if a == b { expect } else { 0.0 };
                    assert!((gram[a * d as usize + b] - e).norm() < 1e-10, "d={d} ({a},{b})");
                }
            }
        }
    }
}
