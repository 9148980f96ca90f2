//! Experiment configuration: per-experiment defaults, overlaid by a flat
//! TOML file and then by command-line flags.

use super::HarnessError;
use crate::treegen::LawKind;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Survival,
    PairMrca,
    Lifetime,
    SkeletonDensity,
    BranchBoundary,
    Shapes,
    EnumerateLattice,
    GstCheck,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::Survival,
        Experiment::PairMrca,
        Experiment::Lifetime,
        Experiment::SkeletonDensity,
        Experiment::BranchBoundary,
        Experiment::Shapes,
        Experiment::EnumerateLattice,
        Experiment::GstCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Survival => "survival",
            Experiment::PairMrca => "pair-mrca",
            Experiment::Lifetime => "lifetime",
            Experiment::SkeletonDensity => "skeleton-density",
            Experiment::BranchBoundary => "branch-boundary",
            Experiment::Shapes => "shapes",
            Experiment::EnumerateLattice => "enumerate-lattice",
            Experiment::GstCheck => "gst-check",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown experiment {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

impl FromStr for OutputFormat {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            _ => Err(HarnessError::Config(format!("unknown format {s:?}"))),
        }
    }
}

/// Every knob of every experiment. Fields an experiment does not use are
/// carried along unchanged so the echo in a record is always complete.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub law: LawKind,
    /// Lattice dimension.
    pub d: usize,
    /// Step range: displacements lie in `[-L, L]^d \ {o}`.
    #[serde(rename = "L")]
    pub range: u32,
    pub n_grid: Vec<u64>,
    /// Generations for survival and moment estimates.
    pub m_grid: Vec<u64>,
    /// Rescaled times for the lifetime tail.
    pub t_grid: Vec<f64>,
    /// Conditioning horizon: trees are conditioned on `T_{⌊ns⌋} ≠ ∅`.
    pub s: f64,
    /// Number of sampled vertices for shapes and GST checks.
    #[serde(rename = "K")]
    pub k: usize,
    /// Nested sample sizes for the skeleton density sweep.
    #[serde(rename = "K_grid")]
    pub k_grid: Vec<usize>,
    /// Sign test compares `K_sign_high` against `K_sign_low`.
    #[serde(rename = "K_sign_low")]
    pub k_sign_low: usize,
    #[serde(rename = "K_sign_high")]
    pub k_sign_high: usize,
    /// Generations of the per-MRCA pair counts.
    pub k1: u64,
    pub k2: u64,
    /// Rescaled pair generations `⌊n t1⌋, ⌊n t2⌋` for the aggregate.
    pub t1: f64,
    pub t2: f64,
    /// MRCA window `[window_a, window_b]` in rescaled time.
    pub window_a: f64,
    pub window_b: f64,
    /// Rescaled pair generations for the boundary statistics.
    pub u1: f64,
    pub u2: f64,
    pub delta_grid: Vec<f64>,
    pub epsilon_grid: Vec<f64>,
    /// Random pairs per tree for the spatial coincidence statistic.
    pub pairs_per_tree: usize,
    /// Lattice fugacity, as an exact decimal or fraction.
    pub z: String,
    pub max_edges: usize,
    pub replicas: u64,
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub threads: usize,
    /// Vertex budget per tree.
    pub vertex_cap: u64,
    /// Consecutive budget overruns tolerated within one replica.
    pub max_redraws: u64,
    /// Conditioned experiments fail if accepted/attempted drops below this.
    pub min_acceptance_rate: f64,
    pub out: String,
    pub format: OutputFormat,
    pub plot: bool,
}

impl ExperimentConfig {
    /// Defaults for `experiment`.
    pub fn defaults(experiment: Experiment) -> Self {
        let mut c = ExperimentConfig {
            experiment,
            law: LawKind::GeometricHalf,
            d: 1,
            range: 1,
            n_grid: vec![200],
            m_grid: vec![0, 1, 5, 10, 20, 50, 100, 200],
            t_grid: vec![1.5, 2.0, 3.0],
            s: 1.0,
            k: 3,
            k_grid: vec![1, 2, 4, 8, 16, 32, 64],
            k_sign_low: 4,
            k_sign_high: 64,
            k1: 3,
            k2: 3,
            t1: 1.0,
            t2: 1.0,
            window_a: 0.2,
            window_b: 0.6,
            u1: 0.5,
            u2: 0.5,
            delta_grid: vec![0.05, 0.1, 0.2],
            epsilon_grid: vec![0.25, 0.5, 1.0],
            pairs_per_tree: 64,
            z: "1".into(),
            max_edges: 4,
            replicas: 10_000,
            seed: 1,
            threads: 0,
            vertex_cap: 50_000_000,
            max_redraws: 1_000,
            min_acceptance_rate: 1e-4,
            out: "out".into(),
            format: OutputFormat::Json,
            plot: false,
        };
        match experiment {
            Experiment::Survival => c.replicas = 100_000,
            Experiment::PairMrca => c.replicas = 100_000,
            Experiment::Lifetime => c.replicas = 20_000,
            Experiment::SkeletonDensity => {
                c.n_grid = vec![100];
                c.epsilon_grid = vec![0.25, 0.5];
                c.replicas = 1_000;
            }
            Experiment::BranchBoundary => {
                c.n_grid = vec![50, 200];
                c.replicas = 2_000;
            }
            Experiment::Shapes => {
                c.n_grid = vec![50, 100, 200, 400];
                c.epsilon_grid = vec![0.1];
                c.replicas = 10_000;
            }
            Experiment::EnumerateLattice => c.replicas = 100_000,
            Experiment::GstCheck => {
                c.k = 4;
                c.d = 2;
                c.n_grid = vec![1, 2, 7, 100];
                c.replicas = 1_000;
            }
        }
        c
    }

    /// Defaults overlaid by the keys of a flat TOML document. An
    /// `experiment` key, if present, must agree with `experiment`.
    pub fn from_toml(experiment: Experiment, text: &str) -> Result<Self, HarnessError> {
        let overlay: toml::Table = text
            .parse()
            .map_err(|e| HarnessError::Config(format!("config file: {e}")))?;
        if let Some(v) = overlay.get("experiment") {
            if v.as_str() != Some(experiment.name()) {
                return Err(HarnessError::Config(format!(
                    "config is for experiment {v}, not {experiment}"
                )));
            }
        }
        let mut base = toml::Table::try_from(Self::defaults(experiment))
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        for (k, v) in overlay {
            if !base.contains_key(&k) {
                return Err(HarnessError::Config(format!("unknown config key {k:?}")));
            }
            base.insert(k, v);
        }
        let c: ExperimentConfig = base
            .try_into()
            .map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: &str| Err(HarnessError::Config(msg.to_string()));
        if self.n_grid.is_empty()
            || self.m_grid.is_empty()
            || self.t_grid.is_empty()
            || self.k_grid.is_empty()
            || self.delta_grid.is_empty()
            || self.epsilon_grid.is_empty()
        {
            return bad("all grids must be non-empty");
        }
        if self.replicas == 0 {
            return bad("replicas must be at least 1");
        }
        if self.d == 0 || self.range == 0 {
            return bad("d and L must be at least 1");
        }
        if !(self.s.is_finite() && self.s >= 0.0) {
            return bad("s must be a finite non-negative number");
        }
        if self.vertex_cap == 0 {
            return bad("vertex_cap must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.min_acceptance_rate) {
            return bad("min_acceptance_rate must lie in [0, 1]");
        }
        let positive = |xs: &[f64]| xs.iter().all(|x| x.is_finite() && *x > 0.0);
        if !positive(&self.t_grid) || !positive(&self.delta_grid) || !positive(&self.epsilon_grid) {
            return bad("t, delta and epsilon grids must be positive");
        }
        match self.experiment {
            Experiment::PairMrca => {
                if self.k1.min(self.k2) == 0 {
                    return bad("k1 and k2 must be at least 1");
                }
                if !(0.0 <= self.window_a && self.window_a <= self.window_b)
                    || self.t1 <= 0.0
                    || self.t2 <= 0.0
                {
                    return bad("need 0 <= window_a <= window_b and t1, t2 > 0");
                }
                if self
                    .n_grid
                    .iter()
                    .any(|&n| ((n as f64 * self.t1.min(self.t2)).floor() as u64) == 0)
                {
                    return bad("every n in n_grid needs ⌊n·min(t1, t2)⌋ >= 1");
                }
            }
            Experiment::Lifetime
            | Experiment::SkeletonDensity
            | Experiment::BranchBoundary
            | Experiment::Shapes
                if self.n_grid.contains(&0) =>
            {
                return bad("n_grid entries must be at least 1");
            }
            _ => {}
        }
        match self.experiment {
            Experiment::SkeletonDensity => {
                if self.k_grid.contains(&0) {
                    return bad("K_grid entries must be at least 1");
                }
                if !self.k_grid.contains(&self.k_sign_low)
                    || !self.k_grid.contains(&self.k_sign_high)
                {
                    return bad("K_sign_low and K_sign_high must be in K_grid");
                }
            }
            Experiment::BranchBoundary => {
                if self.u1 <= 0.0 || self.u2 <= 0.0 || self.pairs_per_tree == 0 {
                    return bad("u1, u2 must be positive and pairs_per_tree at least 1");
                }
            }
            Experiment::Shapes => {
                if !(2..=4).contains(&self.k) {
                    return bad("shapes needs K in {2, 3, 4}");
                }
            }
            Experiment::GstCheck => {
                if !(2..=8).contains(&self.k) {
                    return bad("gst-check needs 2 <= K <= 8");
                }
            }
            Experiment::EnumerateLattice => {
                self.fugacity()?;
            }
            _ => {}
        }
        Ok(())
    }

    /// `z` parsed as an exact rational.
    pub fn fugacity(&self) -> Result<num_rational::BigRational, HarnessError> {
        crate::latticeoracle::parse_rational(&self.z)
            .map_err(|e| HarnessError::Config(format!("z: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        for e in Experiment::ALL {
            let c = ExperimentConfig::defaults(e);
            c.validate().unwrap();
            assert_eq!(ExperimentConfig::from_toml(e, &c.to_toml()).unwrap(), c);
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
        }
    }

    #[test]
    fn overlay_and_errors() {
        let c = ExperimentConfig::from_toml(
            Experiment::Survival,
            "law = \"binary-half\"\nm_grid = [3]\n",
        )
        .unwrap();
        assert_eq!(c.law, LawKind::BinaryHalf);
        assert_eq!(c.m_grid, vec![3]);
        assert!(ExperimentConfig::from_toml(Experiment::Survival, "bogus = 1").is_err());
        assert!(ExperimentConfig::from_toml(Experiment::Survival, "m_grid = []").is_err());
        assert!(
            ExperimentConfig::from_toml(Experiment::Survival, "experiment = \"shapes\"").is_err()
        );
        assert!(ExperimentConfig::from_toml(Experiment::Shapes, "K = 7").is_err());
        assert!(ExperimentConfig::from_toml(Experiment::EnumerateLattice, "z = \"x\"").is_err());
    }
}
