//! Batch results, Wilson intervals, and the CSV / JSON writers.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SbiError};
use crate::lipschitz::LipschitzEstimate;

use super::config::SuccessCriterion;

/// JSON has no NaN/∞; non-finite floats are written as strings.
mod lossless {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    fn to_repr(v: f64) -> Repr {
        if v.is_finite() {
            Repr::Num(v)
        } else {
            Repr::Text(v.to_string())
        }
    }

    fn from_repr<E: serde::de::Error>(r: Repr) -> Result<f64, E> {
        match r {
            Repr::Num(v) => Ok(v),
            Repr::Text(s) => s.parse().map_err(E::custom),
        }
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        to_repr(*v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        from_repr(Repr::deserialize(d)?)
    }

    pub mod vec {
        use super::*;

        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            v.iter().map(|&x| to_repr(x)).collect::<Vec<_>>().serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            Vec::<Repr>::deserialize(d)?.into_iter().map(from_repr).collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub n: usize,
    pub method: String,
    pub seed: u64,
    #[serde(with = "lossless::vec")]
    pub final_x: Vec<f64>,
    #[serde(with = "lossless")]
    pub final_f: f64,
    pub success: bool,
    pub iterations: usize,
    pub fallback_iterations: usize,
    pub diverged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub n: usize,
    pub method: String,
    pub successes: usize,
    pub trials: usize,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub mean_iterations: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_wall_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub objective: String,
    pub dim: usize,
    pub master_seed: u64,
    pub success: SuccessCriterion,
    pub lipschitz: Option<LipschitzEstimate>,
    /// The configuration that produced this report, as TOML.
    pub config: String,
    pub cells: Vec<CellSummary>,
    pub trials: Vec<TrialRecord>,
}

/// Wilson score interval at 95 % confidence.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    const Z: f64 = 1.959_963_984_540_054;
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z * Z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Aggregates trial records into cells ordered as `(n, method)` appear in `order`.
pub fn summarize(trials: &[TrialRecord], order: &[(usize, String)]) -> Vec<CellSummary> {
    order
        .iter()
        .map(|(n, method)| {
            let cell: Vec<&TrialRecord> = trials
                .iter()
                .filter(|t| t.n == *n && &t.method == method)
                .collect();
            let count = cell.len();
            let successes = cell.iter().filter(|t| t.success).count();
            let (ci_low, ci_high) = wilson_interval(successes, count);
            let mean = |f: &dyn Fn(&TrialRecord) -> f64| {
                if count == 0 {
                    0.0
                } else {
                    cell.iter().map(|t| f(t)).sum::<f64>() / count as f64
                }
            };
            let mean_wall_ms = cell
                .iter()
                .map(|t| t.wall_ms)
                .collect::<Option<Vec<f64>>>()
                .filter(|v| !v.is_empty())
                .map(|v| v.iter().sum::<f64>() / v.len() as f64);
            CellSummary {
                n: *n,
                method: method.clone(),
                successes,
                trials: count,
                rate: if count == 0 { 0.0 } else { successes as f64 / count as f64 },
                ci_low,
                ci_high,
                mean_iterations: mean(&|t| t.iterations as f64),
                mean_wall_ms,
            }
        })
        .collect()
}

impl ExperimentReport {
    pub fn cell(&self, n: usize, method: &str) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.n == n && c.method == method)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| SbiError::parse("report json", e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| SbiError::parse("report json", e.to_string()))
    }
}

/// Rates table with rows `(d, method)` and one column group per swarm size:
/// the rate in percent and its Wilson bounds.
pub fn render_csv(reports: &[ExperimentReport]) -> String {
    let sizes: BTreeSet<usize> = reports.iter().flat_map(|r| r.cells.iter().map(|c| c.n)).collect();
    let mut s = String::from("d,method");
    for n in &sizes {
        let _ = write!(s, ",N={n},N={n}_ci_low,N={n}_ci_high");
    }
    s.push('\n');
    for r in reports {
        let mut methods: Vec<&str> = Vec::new();
        for c in &r.cells {
            if !methods.contains(&c.method.as_str()) {
                methods.push(&c.method);
            }
        }
        for m in methods {
            let _ = write!(s, "{},{m}", r.dim);
            for n in &sizes {
                match r.cell(*n, m) {
                    Some(c) => {
                        let _ = write!(
                            s,
                            ",{:.1},{:.1},{:.1}",
                            100.0 * c.rate,
                            100.0 * c.ci_low,
                            100.0 * c.ci_high
                        );
                    }
                    None => s.push_str(",,,"),
                }
            }
            s.push('\n');
        }
    }
    s
}

/// Writes `report.csv` and `report.json` into `dir`. Several reports (one per
/// dimension) share the CSV; the JSON holds an array.
pub fn emit_reports(reports: &[ExperimentReport], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| SbiError::io(dir, e))?;
    let csv = dir.join("report.csv");
    fs::write(&csv, render_csv(reports)).map_err(|e| SbiError::io(&csv, e))?;
    let json = dir.join("report.json");
    let text = serde_json::to_string_pretty(reports)
        .map_err(|e| SbiError::parse("report json", e.to_string()))?;
    fs::write(&json, text + "\n").map_err(|e| SbiError::io(&json, e))?;
    Ok(())
}

pub fn emit_report(report: &ExperimentReport, dir: &Path) -> Result<()> {
    emit_reports(std::slice::from_ref(report), dir)
}

pub fn read_reports(path: &Path) -> Result<Vec<ExperimentReport>> {
    let text = fs::read_to_string(path).map_err(|e| SbiError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| SbiError::parse("report json", e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::SuccessMode;

    fn record(trial: usize, n: usize, success: bool) -> TrialRecord {
        TrialRecord {
            trial,
            n,
            method: "sbi_simex".into(),
            seed: 42 + trial as u64,
            final_x: vec![1.5, f64::NAN],
            final_f: if success { 0.1 } else { f64::INFINITY },
            success,
            iterations: 10 * trial,
            fallback_iterations: 0,
            diverged: !success,
            error: None,
            wall_ms: None,
        }
    }

    fn report(trials: Vec<TrialRecord>, order: &[(usize, String)]) -> ExperimentReport {
        ExperimentReport {
            objective: "exp_sin_1d".into(),
            dim: 1,
            master_seed: 3,
            success: SuccessCriterion::new(SuccessMode::FGap, 0.03).unwrap(),
            lipschitz: None,
            config: String::new(),
            cells: summarize(&trials, order),
            trials,
        }
    }

    #[test]
    fn wilson_examples() {
        let (lo, hi) = wilson_interval(965, 1000);
        assert!((lo - 0.9517).abs() < 1e-3 && (hi - 0.9750).abs() < 1e-3, "{lo} {hi}");
        assert_eq!(wilson_interval(0, 0), (0.0, 1.0));
        let (lo, hi) = wilson_interval(10, 10);
        assert!(hi > 1.0 - 1e-12 && lo > 0.72 && lo < 0.73, "{lo} {hi}");
    }

    #[test]
    fn rate_is_exact_fraction() {
        let trials = vec![record(0, 5, true), record(1, 5, false), record(2, 5, true)];
        let r = report(trials, &[(5, "sbi_simex".into())]);
        assert_eq!(r.cells[0].successes, 2);
        assert_eq!(r.cells[0].rate, 2.0 / 3.0);
        assert_eq!(r.cells[0].mean_iterations, 10.0);
    }

    #[test]
    fn json_round_trip_with_non_finite_values() {
        let r = report(vec![record(0, 5, false), record(1, 5, true)], &[(5, "sbi_simex".into())]);
        let back = ExperimentReport::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back.cells, r.cells);
        assert!(back.trials[0].final_x[1].is_nan());
        assert_eq!(back.trials[0].final_f, f64::INFINITY);
        assert_eq!(back.to_json().unwrap(), r.to_json().unwrap());
    }

    #[test]
    fn csv_shapes() {
        let empty = report(vec![], &[]);
        assert_eq!(render_csv(&[empty]), "d,method\n");
        let one = report(vec![record(0, 5, true)], &[(5, "sbi_simex".into())]);
        let csv = render_csv(&[one]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], "d,method,N=5,N=5_ci_low,N=5_ci_high");
        assert!(lines[1].starts_with("1,sbi_simex,100.0,"));
    }

    #[test]
    fn emit_reports_io_error_has_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let err = emit_reports(&[], &blocker.join("sub")).unwrap_err();
        assert!(err.to_string().contains("sub"), "{err}");
    }
}
