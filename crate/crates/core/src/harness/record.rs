//! Experiment records: JSON persistence, tidy CSV export and content hashes.

use super::config::{Experiment, ExperimentConfig, OutputFormat};
use super::HarnessError;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

/// One estimate on one grid point.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub statistic: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(default, rename = "K", skip_serializing_if = "Option::is_none")]
    pub k: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub estimate: f64,
    pub se: f64,
    pub oracle: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_note: Option<String>,
    pub replicas: u64,
}

impl Cell {
    pub fn new(statistic: &str, estimate: f64, se: f64, replicas: u64) -> Self {
        Cell {
            statistic: statistic.into(),
            estimate,
            se,
            replicas,
            ..Default::default()
        }
    }

    pub fn n(mut self, n: u64) -> Self {
        self.n = Some(n);
        self
    }

    pub fn k(mut self, k: u64) -> Self {
        self.k = Some(k);
        self
    }

    pub fn m(mut self, m: u64) -> Self {
        self.m = Some(m);
        self
    }

    pub fn delta(mut self, delta: f64) -> Self {
        self.delta = Some(delta);
        self
    }

    pub fn epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = Some(epsilon);
        self
    }

    pub fn t(mut self, t: f64) -> Self {
        self.t = Some(t);
        self
    }

    pub fn label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn oracle(mut self, oracle: f64) -> Self {
        self.oracle = Some(oracle);
        self
    }

    pub fn oracle_note(mut self, note: impl Into<String>) -> Self {
        self.oracle_note = Some(note.into());
        self
    }

    /// `|estimate - oracle| / se`, when both exist.
    pub fn z_score(&self) -> Option<f64> {
        let o = self.oracle?;
        let d = (self.estimate - o).abs();
        Some(if d == 0.0 { 0.0 } else { d / self.se })
    }

    /// `|estimate / oracle - 1|`, when the oracle exists and is non-zero.
    pub fn relative_error(&self) -> Option<f64> {
        let o = self.oracle.filter(|o| *o != 0.0)?;
        Some((self.estimate / o - 1.0).abs())
    }
}

/// Outcome of a test run inside an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub statistic: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed,
            statistic: None,
            p_value: None,
            detail: detail.into(),
        }
    }

    pub fn with_test(mut self, statistic: f64, p_value: f64) -> Self {
        self.statistic = Some(statistic).filter(|x| x.is_finite());
        self.p_value = Some(p_value);
        self
    }
}

/// One-sample KS distance against a reference law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsEntry {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    pub sample_size: u64,
    pub distance: f64,
    pub critical_1pct: f64,
}

/// Run bookkeeping. Everything except `wall_clock_seconds` and `threads`
/// is determined by the config.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub wall_clock_seconds: f64,
    pub threads: usize,
    pub attempts: u64,
    pub accepted: u64,
    pub rejections: u64,
    pub redraws: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acceptance_rate: Option<f64>,
    pub path_checks: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub schema_version: u32,
    pub experiment: Experiment,
    pub config: ExperimentConfig,
    pub cells: Vec<Cell>,
    pub checks: Vec<Check>,
    pub ks: Vec<KsEntry>,
    pub metadata: Metadata,
    pub content_hash: String,
}

#[derive(Serialize)]
struct HashedContent<'a> {
    schema_version: u32,
    config: &'a ExperimentConfig,
    cells: &'a [Cell],
    checks: &'a [Check],
    ks: &'a [KsEntry],
    attempts: u64,
    accepted: u64,
    rejections: u64,
    redraws: u64,
    path_checks: u64,
    notes: &'a [String],
}

impl ExperimentRecord {
    pub fn new(
        config: &ExperimentConfig,
        cells: Vec<Cell>,
        checks: Vec<Check>,
        ks: Vec<KsEntry>,
        metadata: Metadata,
    ) -> Self {
        let mut r = ExperimentRecord {
            schema_version: SCHEMA_VERSION,
            experiment: config.experiment,
            config: config.clone(),
            cells,
            checks,
            ks,
            metadata,
            content_hash: String::new(),
        };
        r.content_hash = r.compute_hash();
        r
    }

    /// SHA-256 over the config (minus threads and output settings), the
    /// results and the deterministic metadata.
    pub fn compute_hash(&self) -> String {
        let mut config = self.config.clone();
        config.threads = 0;
        config.out = String::new();
        config.format = OutputFormat::Json;
        config.plot = false;
        let m = &self.metadata;
        let content = HashedContent {
            schema_version: self.schema_version,
            config: &config,
            cells: &self.cells,
            checks: &self.checks,
            ks: &self.ks,
            attempts: m.attempts,
            accepted: m.accepted,
            rejections: m.rejections,
            redraws: m.redraws,
            path_checks: m.path_checks,
            notes: &m.notes,
        };
        let bytes = serde_json::to_vec(&content).expect("record serializes");
        let digest = Sha256::digest(&bytes);
        let mut hex = String::with_capacity(64);
        for b in digest.iter() {
            write!(hex, "{b:02x}").unwrap();
        }
        hex
    }

    pub fn all_checks_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn cells_of<'a>(&'a self, statistic: &'a str) -> impl Iterator<Item = &'a Cell> + 'a {
        self.cells.iter().filter(move |c| c.statistic == statistic)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("record serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Io(format!("cannot read record: {e}")))
    }

    /// Cells grouped by statistic, in first-appearance order.
    pub fn statistics(&self) -> Vec<(&str, Vec<&Cell>)> {
        let mut order: Vec<&str> = Vec::new();
        let mut groups: BTreeMap<&str, Vec<&Cell>> = BTreeMap::new();
        for c in &self.cells {
            if !groups.contains_key(c.statistic.as_str()) {
                order.push(&c.statistic);
            }
            groups.entry(&c.statistic).or_default().push(c);
        }
        order
            .into_iter()
            .map(|s| (s, groups.remove(s).unwrap()))
            .collect()
    }

    /// Tidy CSV for one statistic.
    pub fn csv_for(&self, statistic: &str) -> Result<String, HarnessError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| HarnessError::Io(e.to_string());
        w.write_record([
            "experiment",
            "n",
            "K",
            "m",
            "delta",
            "epsilon",
            "estimate",
            "se",
            "oracle",
            "replicas",
            "seed",
            "t",
            "label",
        ])
        .map_err(io)?;
        let opt = |x: Option<String>| x.unwrap_or_default();
        for c in self.cells_of(statistic) {
            w.write_record([
                self.experiment.name().to_string(),
                opt(c.n.map(|v| v.to_string())),
                opt(c.k.map(|v| v.to_string())),
                opt(c.m.map(|v| v.to_string())),
                opt(c.delta.map(|v| v.to_string())),
                opt(c.epsilon.map(|v| v.to_string())),
                c.estimate.to_string(),
                c.se.to_string(),
                opt(c.oracle.map(|v| v.to_string())),
                c.replicas.to_string(),
                self.config.seed.to_string(),
                opt(c.t.map(|v| v.to_string())),
                opt(c.label.clone()),
            ])
            .map_err(io)?;
        }
        String::from_utf8(
            w.into_inner()
                .map_err(|e| HarnessError::Io(e.to_string()))?,
        )
        .map_err(|e| HarnessError::Io(e.to_string()))
    }

    /// Writes `record.json` and, for CSV output, one file per statistic
    /// (plus SVG plots if requested). Returns the paths written.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
        let io = |e: std::io::Error| HarnessError::Io(format!("{}: {e}", dir.display()));
        std::fs::create_dir_all(dir).map_err(io)?;
        let mut written = Vec::new();
        let path = dir.join("record.json");
        std::fs::write(&path, self.to_json()).map_err(io)?;
        written.push(path);
        for (stat, cells) in self.statistics() {
            if self.config.format == OutputFormat::Csv {
                let path = dir.join(format!("{stat}.csv"));
                std::fs::write(&path, self.csv_for(stat)?).map_err(io)?;
                written.push(path);
            }
            if self.config.plot {
                if let Some(svg) = super::plot::line_plot(stat, &cells) {
                    let path = dir.join(format!("{stat}.svg"));
                    std::fs::write(&path, svg).map_err(io)?;
                    written.push(path);
                }
            }
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_record() -> ExperimentRecord {
        let config = ExperimentConfig::defaults(Experiment::Survival);
        let cells = vec![
            Cell::new("survival_probability", 0.1 + 0.2, 1e-3, 10)
                .m(5)
                .oracle(1.0 / 6.0),
            Cell::new("shape_frequency", 1.0 / 3.0, 0.01, 10)
                .k(3)
                .n(50)
                .label("((1,2),3)")
                .oracle_note("x, y"),
        ];
        let checks = vec![Check::new("a", true, "ok").with_test(1.5, 0.01)];
        let ks = vec![KsEntry {
            name: "k".into(),
            n: Some(3),
            sample_size: 4,
            distance: 0.1,
            critical_1pct: 0.8,
        }];
        ExperimentRecord::new(
            &config,
            cells,
            checks,
            ks,
            Metadata {
                wall_clock_seconds: 1.25,
                ..Default::default()
            },
        )
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let r = sample_record();
        let back = ExperimentRecord::from_json(&r.to_json()).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.compute_hash(), r.content_hash);
    }

    #[test]
    fn hash_ignores_threads_and_timing() {
        let r = sample_record();
        let mut other = r.clone();
        other.config.threads = 7;
        other.metadata.wall_clock_seconds = 99.0;
        other.metadata.threads = 7;
        assert_eq!(other.compute_hash(), r.content_hash);
        other.cells[0].estimate += 1e-16;
        assert_ne!(other.compute_hash(), r.content_hash);
    }

    #[test]
    fn csv_quotes_labels() {
        let r = sample_record();
        let csv = r.csv_for("shape_frequency").unwrap();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "experiment,n,K,m,delta,epsilon,estimate,se,oracle,replicas,seed,t,label"
        );
        let row = lines.next().unwrap();
        assert!(row.starts_with("survival,50,3,,,,"));
        assert!(row.ends_with(",\"((1,2),3)\""));
    }

    #[test]
    fn write_creates_files() {
        let mut r = sample_record();
        r.config.format = OutputFormat::Csv;
        r.config.plot = true;
        let dir = tempfile::tempdir().unwrap();
        let files = r.write_to(dir.path()).unwrap();
        assert!(files.iter().any(|p| p.ends_with("record.json")));
        assert!(files
            .iter()
            .any(|p| p.ends_with("survival_probability.csv")));
        let back = ExperimentRecord::from_json(
            &std::fs::read_to_string(dir.path().join("record.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(back, r);
    }
}
