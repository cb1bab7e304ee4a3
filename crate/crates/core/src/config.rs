//! Experiment configuration: one JSON document, unknown keys rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::family::{FamilyKind, FamilyModel};
use crate::C64;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Csv,
}

/// Every pass/fail threshold used by the drivers. Echoed into each report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Minimum fitted convergence order of an identity residual.
    pub identity_order: f64,
    /// Relative residual that counts as converged regardless of order.
    pub identity_floor: f64,
    /// Rows failing both rules above pass when the finest-grid residual
    /// grows at least this much on halving ε (roundoff, not truncation)...
    pub identity_roundoff_growth: f64,
    /// ...and stays below this.
    pub identity_roundoff_cap: f64,
    /// Accepted range for the fitted order of the Nakano defect.
    pub bkn_order: [f64; 2],
    pub bkn_absolute: f64,
    /// Eigenvalue match against the Landau levels.
    pub spectrum: f64,
    pub kernel_gap_ratio: f64,
    /// Relative error for the Kodaira-Spencer and geodesic oracles.
    pub family_relative: f64,
    pub geodesic_absolute: f64,
    /// First variation residuals, relative to ‖H‖.
    pub first_variation: f64,
    /// Curvature against the finite-difference Chern curvature, relative.
    pub curvature: f64,
    /// Resolvent pairings against direct Lie-derivative pairings, relative.
    pub green: f64,
    pub band_mass: f64,
    /// Eigenvalues closer than this to zero count as zero.
    pub positivity: f64,
    /// Product-trivial curvature bound relative to ‖H‖.
    pub trivial: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            identity_order: 1.5,
            identity_floor: 1e-8,
            identity_roundoff_growth: 2.0,
            identity_roundoff_cap: 1e-6,
            bkn_order: [1.7, 2.3],
            bkn_absolute: 2e-2,
            spectrum: 1e-2,
            kernel_gap_ratio: 1e3,
            family_relative: 1e-2,
            geodesic_absolute: 1e-4,
            first_variation: 1e-3,
            curvature: 1e-2,
            green: 1e-2,
            band_mass: 1e-3,
            positivity: 1e-8,
            trivial: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Radius of the disc of base points around s = 0.
    pub radius: f64,
    /// Centre plus evenly spaced points on the circle.
    pub points: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { radius: 0.2, points: 9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default = "default_family")]
    pub family: FamilyKind,
    /// `[re, im]`.
    #[serde(default = "default_tau")]
    pub tau: C64,
    #[serde(default = "default_d")]
    pub d: u32,
    #[serde(default = "default_p")]
    pub p: usize,
    #[serde(default = "default_grids")]
    pub grids: Vec<usize>,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Number of seeded random forms per bidegree in the identity suite.
    #[serde(default = "default_random_forms")]
    pub random_forms: usize,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default = "default_formats")]
    pub formats: Vec<ReportFormat>,
}

fn default_family() -> FamilyKind {
    FamilyKind::PureModulus
}
fn default_tau() -> C64 {
    C64::new(0.0, 1.0)
}
fn default_d() -> u32 {
    1
}
fn default_p() -> usize {
    1
}
fn default_grids() -> Vec<usize> {
    vec![16, 32, 64]
}
fn default_eps() -> f64 {
    1e-3
}
fn default_seed() -> u64 {
    1
}
fn default_random_forms() -> usize {
    10
}
fn default_formats() -> Vec<ReportFormat> {
    vec![ReportFormat::Json]
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            family: default_family(),
            tau: default_tau(),
            d: default_d(),
            p: default_p(),
            grids: default_grids(),
            eps: default_eps(),
            seed: default_seed(),
            random_forms: default_random_forms(),
            tolerances: Tolerances::default(),
            sweep: SweepConfig::default(),
            formats: default_formats(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let c: ExperimentConfig = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("schema_version {} (expected {SCHEMA_VERSION})", self.schema_version));
        }
        if !(self.tau.im > 0.0) || !self.tau.re.is_finite() || !self.tau.im.is_finite() {
            return bad(format!("Im tau must be positive, got {}", self.tau));
        }
        if !(1..=16).contains(&self.d) {
            return bad(format!("degree d = {} outside 1..=16", self.d));
        }
        if self.p > 1 {
            return bad(format!("p = {} exceeds the fiber dimension 1", self.p));
        }
        if self.grids.is_empty() {
            return bad("grid list is empty".into());
        }
        for &n in &self.grids {
            if n < 8 || n % 2 != 0 {
                return bad(format!("grid size {n} must be even and at least 8"));
            }
        }
        if self.grids.windows(2).any(|w| w[0] >= w[1]) {
            return bad("grid sizes must be strictly increasing".into());
        }
        if !(1e-5..=1e-2).contains(&self.eps) {
            return bad(format!("eps = {:e} outside [1e-5, 1e-2]", self.eps));
        }
        if self.random_forms == 0 {
            return bad("random_forms must be at least 1".into());
        }
        if !self.family.lambda().is_finite() {
            return bad("lambda is not finite".into());
        }
        if !(self.sweep.radius > 0.0) || self.sweep.points == 0 {
            return bad("sweep needs a positive radius and at least one point".into());
        }
        // every stencil reaches |s| + ε; the family is defined for |s| < Im τ / 2
        if self.sweep.radius + 2.0 * self.eps >= 0.5 * self.tau.im {
            return bad(format!("sweep radius {} leaves the family's domain", self.sweep.radius));
        }
        if self.formats.is_empty() {
            return bad("no report format selected".into());
        }
        Ok(())
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.random_forms as u64).map(|k| self.seed.wrapping_add(k)).collect()
    }

    pub fn model(&self, grid: usize) -> Result<FamilyModel, ConfigError> {
        FamilyModel::new(self.family, self.tau, self.d, grid)
            .map(|m| m.with_step(self.eps))
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn finest_grid(&self) -> usize {
        *self.grids.last().expect("validated nonempty")
    }

    pub fn sweep_points(&self) -> Vec<C64> {
        let k = self.sweep.points;
        let mut pts = vec![C64::new(0.0, 0.0)];
        for j in 0..k.saturating_sub(1) {
            let t = 2.0 * std::f64::consts::PI * j as f64 / (k - 1) as f64;
            pts.push(C64::from_polar(self.sweep.radius, t));
        }
        pts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_document_gets_defaults() {
        let c = ExperimentConfig::from_json(r#"{"schema_version": 1}"#).unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!(c.seeds().len(), 10);
    }

    #[test]
    fn family_and_tau_parse() {
        let c = ExperimentConfig::from_json(
            r#"{"schema_version": 1, "family": {"kind": "base_twist", "lambda": 1.0}, "tau": [0.5, 1.0], "d": 2}"#,
        )
        .unwrap();
        assert_eq!(c.family, FamilyKind::BaseTwist { lambda: 1.0 });
        assert_eq!(c.tau, C64::new(0.5, 1.0));
    }

    #[test]
    fn rejects_bad_documents() {
        for doc in [
            r#"{"schema_version": 1, "colour": 3}"#,
            r#"{"schema_version": 1, "tolerances": {"curvatur": 1e-2}}"#,
            r#"{"schema_version": 2}"#,
            r#"{"schema_version": 1, "tau": [0.0, -1.0]}"#,
            r#"{"schema_version": 1, "grids": [16, 33]}"#,
            r#"{"schema_version": 1, "grids": [32, 16]}"#,
            r#"{"schema_version": 1, "eps": 0.1}"#,
            r#"{"schema_version": 1, "d": 0}"#,
            r#"{"schema_version": 1, "p": 2}"#,
            r#"{"tau": [0.0, 1.0]}"#,
        ] {
            assert!(ExperimentConfig::from_json(doc).is_err(), "{doc}");
        }
    }

    #[test]
    fn sweep_points_lie_on_the_disc() {
        let c = ExperimentConfig::default();
        let pts = c.sweep_points();
        assert_eq!(pts.len(), 9);
        assert!(pts[1..].iter().all(|p| (p.norm() - 0.2).abs() < 1e-15));
    }
}
