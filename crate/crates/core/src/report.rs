//! Report assembly and emission. JSON reports carry no timings, so equal
//! configs give byte-equal files; wall-clock data goes to `timings.json`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;

use crate::config::{ExperimentConfig, ReportFormat};
use crate::curvature::identities::{FormSet, RowStatus};
use crate::curvature::CMatrix;
use crate::C64;

/// Complex matrix as rows of `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct MatrixJson(pub Vec<Vec<[f64; 2]>>);

impl From<&CMatrix> for MatrixJson {
    fn from(m: &CMatrix) -> Self {
        MatrixJson((0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "rule", content = "limit", rename_all = "snake_case")]
pub enum Threshold {
    AtMost(f64),
    AtLeast(f64),
    Within([f64; 2]),
    /// Recorded, not judged.
    Info,
}

impl Threshold {
    pub fn admits(&self, v: f64) -> bool {
        match *self {
            Threshold::AtMost(t) => v <= t,
            Threshold::AtLeast(t) => v >= t,
            Threshold::Within([a, b]) => (a..=b).contains(&v),
            Threshold::Info => true,
        }
    }

    fn csv(&self) -> (String, String) {
        match *self {
            Threshold::AtMost(t) => ("at_most".into(), format!("{t:e}")),
            Threshold::AtLeast(t) => ("at_least".into(), format!("{t:e}")),
            Threshold::Within([a, b]) => ("within".into(), format!("{a:e}..{b:e}")),
            Threshold::Info => ("info".into(), String::new()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub grid: Option<usize>,
    pub eps: Option<f64>,
    pub value: f64,
    pub threshold: Threshold,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, grid: Option<usize>, eps: Option<f64>, value: f64, threshold: Threshold) -> Self {
        let pass = value.is_finite() && threshold.admits(value) || threshold == Threshold::Info;
        Check { name: name.into(), grid, eps, value, threshold, pass }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityRow {
    pub identity: String,
    pub forms: FormSet,
    pub grids: Vec<usize>,
    pub eps: f64,
    pub relative: Vec<f64>,
    pub order: Option<f64>,
    pub step_growth: Option<f64>,
    pub status: RowStatus,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumEntry {
    pub grid: usize,
    pub d: u32,
    pub p: usize,
    pub q: usize,
    pub eigenvalues: Vec<f64>,
    /// Landau levels repeated by multiplicity, when an oracle exists.
    pub oracle: Option<Vec<f64>>,
    pub kernel_dim: usize,
    pub gap_ratio: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureEntry {
    pub s: C64,
    pub grid: usize,
    pub eps: f64,
    /// `Some(reason)` when the direct image is zero at this bidegree.
    pub empty: Option<String>,
    pub rank: usize,
    pub r: Option<MatrixJson>,
    pub term1: Option<MatrixJson>,
    pub term2: Option<MatrixJson>,
    pub term3: Option<MatrixJson>,
    pub harmonic_part_term: Option<MatrixJson>,
    pub fd: Option<MatrixJson>,
    /// max entry |R - R_fd| / ‖R_fd‖.
    pub fd_deviation: Option<f64>,
    pub hermiticity_defect: Option<f64>,
    pub band_mass: Option<f64>,
    pub min_eigenvalue: Option<f64>,
    pub verdict: Option<crate::curvature::Positivity>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NumericFailure {
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: ExperimentConfig,
    pub pass: bool,
    pub checks: Vec<Check>,
    pub identities: Vec<IdentityRow>,
    pub spectra: Vec<SpectrumEntry>,
    pub curvature: Vec<CurvatureEntry>,
    pub failures: Vec<NumericFailure>,
}

impl Report {
    pub fn new(command: &str, config: &ExperimentConfig) -> Self {
        Report {
            tool: "dimlab",
            version: env!("CARGO_PKG_VERSION"),
            command: command.into(),
            config: config.clone(),
            pass: true,
            checks: Vec::new(),
            identities: Vec::new(),
            spectra: Vec::new(),
            curvature: Vec::new(),
            failures: Vec::new(),
        }
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn fail(&mut self, stage: &str, err: impl std::fmt::Display) {
        self.failures.push(NumericFailure { stage: stage.into(), message: err.to_string() });
    }

    /// Recomputes the overall verdict from the parts.
    pub fn finish(&mut self) {
        self.pass = self.checks.iter().all(|c| c.pass) && self.identities.iter().all(|r| r.pass);
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report is serializable");
        s.push('\n');
        s
    }

    /// Writes the selected formats into `dir`; returns the files written.
    pub fn write(&self, dir: &Path, formats: &[ReportFormat]) -> std::io::Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut out = Vec::new();
        for f in formats {
            match f {
                ReportFormat::Json => {
                    let p = dir.join("report.json");
                    fs::write(&p, self.to_json())?;
                    out.push(p);
                }
                ReportFormat::Csv => out.extend(self.write_csv(dir)?),
            }
        }
        Ok(out)
    }

    fn write_csv(&self, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
        let mut out = Vec::new();
        let mut table = |name: &str, header: &[&str], rows: Vec<Vec<String>>| -> std::io::Result<()> {
            if rows.is_empty() {
                return Ok(());
            }
            let p = dir.join(name);
            let mut w = csv::Writer::from_path(&p)?;
            w.write_record(header)?;
            for r in rows {
                w.write_record(&r)?;
            }
            w.flush()?;
            out.push(p);
            Ok(())
        };
        let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
        let optf = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();

        table(
            "checks.csv",
            &["name", "grid", "eps", "value", "rule", "limit", "pass"],
            self.checks
                .iter()
                .map(|c| {
                    let (rule, limit) = c.threshold.csv();
                    vec![c.name.clone(), opt(c.grid), optf(c.eps), format!("{:e}", c.value), rule, limit, c.pass.to_string()]
                })
                .collect(),
        )?;
        table(
            "identities.csv",
            &["identity", "forms", "grid", "eps", "relative", "order", "step_growth", "status", "pass"],
            self.identities
                .iter()
                .flat_map(|r| {
                    r.grids.iter().zip(&r.relative).map(move |(g, v)| {
                        vec![
                            r.identity.clone(),
                            json_word(&r.forms),
                            g.to_string(),
                            format!("{:e}", r.eps),
                            format!("{v:e}"),
                            optf(r.order),
                            optf(r.step_growth),
                            json_word(&r.status),
                            r.pass.to_string(),
                        ]
                    })
                })
                .collect(),
        )?;
        table(
            "spectra.csv",
            &["grid", "d", "p", "q", "index", "eigenvalue", "oracle"],
            self.spectra
                .iter()
                .flat_map(|e| {
                    e.eigenvalues.iter().enumerate().map(move |(i, v)| {
                        let o = e.oracle.as_ref().and_then(|o| o.get(i)).map(|x| format!("{x:e}")).unwrap_or_default();
                        vec![
                            e.grid.to_string(),
                            e.d.to_string(),
                            e.p.to_string(),
                            e.q.to_string(),
                            i.to_string(),
                            format!("{v:e}"),
                            o,
                        ]
                    })
                })
                .collect(),
        )?;
        let mut rows = Vec::new();
        for e in &self.curvature {
            let (Some(r), Some(t1), Some(t2), Some(t3)) = (&e.r, &e.term1, &e.term2, &e.term3) else {
                rows.push(vec![format!("{:e}", e.s.re), format!("{:e}", e.s.im), e.grid.to_string()]
                    .into_iter()
                    .chain(std::iter::repeat_n(String::new(), 12))
                    .chain([e.empty.clone().unwrap_or_default()])
                    .collect());
                continue;
            };
            for l in 0..e.rank {
                for k in 0..e.rank {
                    let mut row = vec![format!("{:e}", e.s.re), format!("{:e}", e.s.im), e.grid.to_string(), l.to_string(), k.to_string()];
                    for m in [Some(r), e.fd.as_ref(), Some(t1), Some(t2), Some(t3)] {
                        let [a, b] = m.map(|m| m.0[l][k]).map(|[a, b]| [format!("{a:e}"), format!("{b:e}")]).unwrap_or_default();
                        row.extend([a, b]);
                    }
                    row.push(String::new());
                    rows.push(row);
                }
            }
        }
        table(
            "curvature.csv",
            &[
                "s_re", "s_im", "grid", "l", "k", "r_re", "r_im", "fd_re", "fd_im", "term1_re", "term1_im", "term2_re", "term2_im",
                "term3_re", "term3_im", "empty",
            ],
            rows,
        )?;
        Ok(out)
    }
}

/// Serialized name of a unit enum variant.
fn json_word<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Timings {
    pub command: String,
    pub stages: Vec<(String, f64)>,
    pub total_seconds: f64,
}

impl Timings {
    pub fn record(&mut self, stage: &str, d: Duration) {
        self.stages.push((stage.into(), d.as_secs_f64()));
        self.total_seconds += d.as_secs_f64();
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let p = dir.join("timings.json");
        fs::write(&p, serde_json::to_string_pretty(self).expect("timings are serializable") + "\n")?;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        let mut r = Report::new("verify", &ExperimentConfig::default());
        r.check(Check::new("volume", Some(16), None, 1e-12, Threshold::AtMost(1e-10)));
        r.check(Check::new("order", None, Some(1e-3), 1.9, Threshold::Within([1.7, 2.3])));
        r.curvature.push(CurvatureEntry {
            s: C64::new(0.0, 0.0),
            grid: 16,
            eps: 1e-3,
            empty: None,
            rank: 1,
            r: Some((&CMatrix::from_element(1, 1, C64::new(0.125, 0.0))).into()),
            term1: Some((&CMatrix::zeros(1, 1)).into()),
            term2: Some((&CMatrix::from_element(1, 1, C64::new(0.125, 0.0))).into()),
            term3: Some((&CMatrix::zeros(1, 1)).into()),
            harmonic_part_term: None,
            fd: None,
            fd_deviation: None,
            hermiticity_defect: Some(0.0),
            band_mass: Some(0.0),
            min_eigenvalue: Some(0.125),
            verdict: Some(crate::curvature::Positivity::Positive),
        });
        r.finish();
        r
    }

    #[test]
    fn thresholds() {
        assert!(Threshold::AtMost(1.0).admits(1.0));
        assert!(!Threshold::AtLeast(1.5).admits(1.4));
        assert!(!Threshold::Within([1.7, 2.3]).admits(2.4));
        assert!(!Check::new("x", None, None, f64::NAN, Threshold::AtMost(1.0)).pass);
    }

    #[test]
    fn json_is_stable_and_names_thresholds() {
        let r = sample();
        assert!(r.pass);
        let a = r.to_json();
        assert_eq!(a, sample().to_json());
        let v: serde_json::Value = serde_json::from_str(&a).unwrap();
        assert_eq!(v["checks"][1]["threshold"]["rule"], "within");
        assert_eq!(v["checks"][1]["threshold"]["limit"][0], 1.7);
        assert_eq!(v["curvature"][0]["r"][0][0][0], 0.125);
        assert_eq!(v["config"]["schema_version"], 1);
    }

    #[test]
    fn csv_tables() {
        let dir = tempfile::tempdir().unwrap();
        let files = sample().write(dir.path(), &[ReportFormat::Json, ReportFormat::Csv]).unwrap();
        let names: Vec<_> = files.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
        assert_eq!(names, ["report.json", "checks.csv", "curvature.csv"]);
        let text = fs::read_to_string(dir.path().join("checks.csv")).unwrap();
        assert!(text.starts_with("name,grid,eps,value,rule,limit,pass\n"));
        assert!(text.contains("order,,1e-3,1.9e0,within,1.7e0..2.3e0,true"));
    }
}
