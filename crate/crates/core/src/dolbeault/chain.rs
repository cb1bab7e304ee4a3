//! Landau-gauge structure of a single flat factor.
//!
//! When the x-links depend only on y and the y-links are trivial in x
//! except for the wrap phase `e^{-2πi d i/N}`, a discrete Fourier transform
//! in x turns `S_x` into a diagonal and `S_y` into a weighted shift that
//! moves momentum k to k + d across the seam. The grid then splits into
//! `gcd(d, N)` independent rings of length `N²/gcd(d, N)`.

use super::banded::RingOp;
use crate::lattice::{Links, GRADIENT_ALPHA, LIFT_STRENGTH};
use crate::C64;
use rustfft::FftPlanner;
use std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct ChainModel {
    pub grid: usize,
    pub d: u32,
    pub chains: usize,
    pub len: usize,
    sx: Vec<Vec<C64>>,
    sy: Vec<Vec<C64>>,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl ChainModel {
    /// Recognize the Landau-gauge link pattern to 1e-12; `None` otherwise.
    pub fn detect(links: &Links, d: u32) -> Option<Self> {
        let n = links.grid;
        let tol = 1e-12;
        for i in 0..n {
            for j in 0..n {
                if (links.ux[i * n + j] - links.ux[j]).norm() > tol {
                    return None;
                }
                let expect = if j == n - 1 {
                    links.uy[n - 1] * C64::from_polar(1.0, -2.0 * PI * d as f64 * i as f64 / n as f64)
                } else {
                    links.uy[j]
                };
                if (links.uy[i * n + j] - expect).norm() > tol {
                    return None;
                }
            }
        }
        let g = gcd(d as usize % n, n);
        let len = n * n / g;
        let mut sx = Vec::with_capacity(g);
        let mut sy = Vec::with_capacity(g);
        for c in 0..g {
            let mut a = Vec::with_capacity(len);
            let mut b = Vec::with_capacity(len);
            for pos in 0..len {
                let (m, j) = (pos / n, pos % n);
                let k = (c + m * d as usize) % n;
                a.push(links.ux[j] * C64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64));
                b.push(links.uy[j]);
            }
            sx.push(a);
            sy.push(b);
        }
        Some(Self { grid: n, d, chains: g, len, sx, sy })
    }

    fn momentum(&self, c: usize, pos: usize) -> (usize, usize) {
        let n = self.grid;
        ((c + (pos / n) * self.d as usize) % n, pos % n)
    }

    /// Unitary DFT in x followed by gathering into chains.
    pub fn to_chains(&self, u: &[C64]) -> Vec<Vec<C64>> {
        let n = self.grid;
        let fft = FftPlanner::new().plan_fft_forward(n);
        let s = 1.0 / (n as f64).sqrt();
        let mut hat = vec![C64::new(0.0, 0.0); n * n];
        let mut col = vec![C64::new(0.0, 0.0); n];
        for j in 0..n {
            for i in 0..n {
                col[i] = u[i * n + j];
            }
            fft.process(&mut col);
            for k in 0..n {
                hat[k * n + j] = col[k] * s;
            }
        }
        (0..self.chains)
            .map(|c| {
                (0..self.len)
                    .map(|pos| {
                        let (k, j) = self.momentum(c, pos);
                        hat[k * n + j]
                    })
                    .collect()
            })
            .collect()
    }

    pub fn from_chains(&self, v: &[Vec<C64>]) -> Vec<C64> {
        let n = self.grid;
        let mut hat = vec![C64::new(0.0, 0.0); n * n];
        for (c, chain) in v.iter().enumerate() {
            for (pos, val) in chain.iter().enumerate() {
                let (k, j) = self.momentum(c, pos);
                hat[k * n + j] = *val;
            }
        }
        let ifft = FftPlanner::new().plan_fft_inverse(n);
        let s = 1.0 / (n as f64).sqrt();
        let mut out = vec![C64::new(0.0, 0.0); n * n];
        let mut col = vec![C64::new(0.0, 0.0); n];
        for j in 0..n {
            for k in 0..n {
                col[k] = hat[k * n + j];
            }
            ifft.process(&mut col);
            for i in 0..n {
                out[i * n + j] = col[i] * s;
            }
        }
        out
    }

    fn shifts(&self, c: usize) -> (RingOp, RingOp) {
        (RingOp::diag(self.sx[c].clone()), RingOp::shift(self.sy[c].clone()))
    }

    fn gradient(&self, s: &RingOp) -> RingOp {
        let h = 1.0 / self.grid as f64;
        let si = s.adjoint();
        let s2 = s.compose(s);
        let si2 = si.compose(&si);
        let c1 = C64::new(GRADIENT_ALPHA / (2.0 * h), 0.0);
        let c2 = C64::new((1.0 - GRADIENT_ALPHA) / (4.0 * h), 0.0);
        s.add(&si.scale(-C64::new(1.0, 0.0))).scale(c1).add(&s2.add(&si2.scale(-C64::new(1.0, 0.0))).scale(c2))
    }

    fn lift_of(&self, sx: &RingOp, sy: &RingOp) -> RingOp {
        let h = 1.0 / self.grid as f64;
        let id = RingOp::identity(self.len);
        let mut out: Option<RingOp> = None;
        for s in [sx, sy] {
            let lap = s.add(&s.adjoint()).add(&id.scale(C64::new(-2.0, 0.0)));
            let l2 = lap.compose(&lap);
            let l4 = l2.compose(&l2).scale(C64::new(LIFT_STRENGTH / h, 0.0));
            out = Some(match out {
                None => l4,
                Some(o) => o.add(&l4),
            });
        }
        out.expect("two axes")
    }

    /// Lattice ∂̄ component operator (∇_z̄ + lift) on chain c.
    pub fn dbar(&self, c: usize, tau: C64) -> RingOp {
        let (sx, sy) = self.shifts(c);
        let t = tau - tau.conj();
        let gx = self.gradient(&sx);
        let gy = self.gradient(&sy);
        gx.scale(tau / t).add(&gy.scale(-C64::new(1.0, 0.0) / t)).add(&self.lift_of(&sx, &sy))
    }

    pub fn lift(&self, c: usize) -> RingOp {
        let (sx, sy) = self.shifts(c);
        self.lift_of(&sx, &sy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{self, FactorLayout};
    use crate::line_bundle::build_bundle;

    #[test]
    fn chain_dbar_matches_lattice() {
        for (d, n) in [(1u32, 8usize), (2, 8), (3, 6), (4, 4)] {
            let tau = C64::new(0.3, 1.2);
            let b = build_bundle(1, &[tau], &[d], n, None).unwrap();
            let links = &b.factors[0].links;
            let cm = ChainModel::detect(links, d).expect("Landau pattern");
            assert_eq!(cm.chains * cm.len, n * n);
            let u: Vec<C64> = (0..n * n).map(|i| C64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos())).collect();
            let lay = FactorLayout::new(n, 1, 0);
            let direct = lattice::dbar_component(&u, links, &lay, tau);
            let ch = cm.to_chains(&u);
            let applied: Vec<Vec<C64>> = ch.iter().enumerate().map(|(c, v)| cm.dbar(c, tau).apply(v)).collect();
            let back = cm.from_chains(&applied);
            let err = direct.iter().zip(&back).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(err < 1e-9, "d={d} n={n} err={err}");
            let round = cm.from_chains(&ch);
            assert!(round.iter().zip(&u).all(|(a, b)| (a - b).norm() < 1e-12));
        }
    }

    #[test]
    fn gauge_transformed_links_not_detected() {
        let b = build_bundle(1, &[C64::new(0.0, 1.0)], &[1], 8, None).unwrap();
        let ph: Vec<C64> = (0..64).map(|i| C64::from_polar(1.0, 0.1 * i as f64)).collect();
        let g = b.gauge_transformed(&[ph]);
        assert!(ChainModel::detect(&g.factors[0].links, 1).is_none());
    }
}
