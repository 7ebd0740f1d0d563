//! Experiment grid configuration, read from a TOML file.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use nird_core::{GraphModel, Method};
use serde::{Deserialize, Serialize};

use crate::BenchError;

/// The experiments the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Study {
    /// Error rates over a grid of dependence coefficients.
    Dependence,
    /// Error rates over network parameters at a fixed coefficient.
    Network,
    /// The dependence study with noise variance drawn per trial.
    Noise,
    /// Detection of linear-threshold contagion by diffusion step.
    Diffusion,
    /// Wall-clock time by network size.
    Scalability,
}

impl Study {
    pub const ALL: [Study; 5] = [
        Study::Dependence,
        Study::Network,
        Study::Noise,
        Study::Diffusion,
        Study::Scalability,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Study::Dependence => "dependence",
            Study::Network => "network",
            Study::Noise => "noise",
            Study::Diffusion => "diffusion",
            Study::Scalability => "scalability",
        }
    }
}

impl fmt::Display for Study {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Study {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        Study::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| {
                let valid: Vec<&str> = Study::ALL.iter().map(Study::name).collect();
                BenchError::Config(format!("unknown study `{s}`; valid studies: {}", valid.join(", ")))
            })
    }
}

/// Which test a scalability row times.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestKind {
    Marginal,
    Conditional,
}

/// A flat experiment description. Fields irrelevant to the chosen study are
/// ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub study: String,
    pub master_seed: u64,
    pub trials: usize,
    pub permutations: usize,
    pub alpha: f64,
    pub method: Method,
    pub features: Option<usize>,
    pub lambda: Option<f64>,
    /// Record mean wall-clock time per cell. Timing makes output
    /// nondeterministic, so it is off by default except for scalability.
    pub timing: bool,

    pub n: usize,
    pub cases: Vec<u8>,
    pub beta_d: Vec<f64>,
    /// Network families as `ba:M` or `er:P`.
    pub networks: Vec<String>,

    /// Edge list for the diffusion study; a generated network is used when
    /// absent.
    pub graph_file: Option<PathBuf>,
    pub graph_model: String,
    pub graph_nodes: usize,
    pub p_init: Vec<f64>,
    pub steps: Vec<usize>,
    pub sample_sizes: Vec<usize>,

    pub sizes: Vec<usize>,
    pub methods: Vec<Method>,
    pub tests: Vec<TestKind>,
    pub repetitions: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            study: "dependence".into(),
            master_seed: 0,
            trials: 50,
            permutations: 1000,
            alpha: 0.05,
            method: Method::Rff,
            features: None,
            lambda: None,
            timing: false,
            n: 100,
            cases: vec![1, 2, 3, 4],
            beta_d: vec![0.1, 0.9],
            networks: vec!["ba:3".into(), "er:0.02".into()],
            graph_file: None,
            graph_model: "er:0.011".into(),
            graph_nodes: 4000,
            p_init: vec![0.1],
            steps: vec![1, 5, 20],
            sample_sizes: vec![2000],
            sizes: vec![100, 200, 300, 400, 500],
            methods: vec![Method::Exact, Method::Rff],
            tests: vec![TestKind::Marginal, TestKind::Conditional],
            repetitions: 3,
        }
    }
}

/// A validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentGrid {
    pub study: Study,
    pub config: GridConfig,
    pub networks: Vec<GraphModel>,
}

impl GridConfig {
    pub fn from_toml(text: &str) -> Result<Self, BenchError> {
        toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Replaces the desk-scale grids with the full-size ones.
    pub fn paper_scale(mut self) -> Result<Self, BenchError> {
        let study: Study = self.study.parse()?;
        self.trials = 100;
        match study {
            Study::Dependence | Study::Noise => {
                self.cases = vec![1, 2, 3, 4];
                self.beta_d = vec![0.1, 0.3, 0.5, 0.7, 0.9];
                self.networks = vec!["ba:3".into(), "er:0.02".into()];
            }
            Study::Network => {
                self.cases = vec![1, 2, 3, 4];
                self.beta_d = vec![0.5];
                self.networks = ["ba:1", "ba:2", "ba:3", "er:0.005", "er:0.01", "er:0.015", "er:0.02", "er:0.025"]
                    .map(String::from)
                    .to_vec();
            }
            Study::Diffusion => {
                self.steps = vec![1, 5, 10, 20];
                self.sample_sizes = vec![500, 1000, 2000, 3000];
                self.p_init = vec![0.1];
            }
            Study::Scalability => {
                // sizes past the exact-path limit are timed with features only
                self.sizes = vec![100, 200, 300, 400, 500, 10_000];
            }
        }
        Ok(self)
    }

    pub fn validate(self) -> Result<ExperimentGrid, BenchError> {
        let study: Study = self.study.parse()?;
        let bad = |msg: String| Err(BenchError::Config(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.permutations < nird_core::nullperm::MIN_PERMUTATIONS {
            return bad(format!(
                "permutations must be at least {}",
                nird_core::nullperm::MIN_PERMUTATIONS
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if let Some(c) = self.cases.iter().find(|c| !(1..=4).contains(*c)) {
            return bad(format!("case {c} is not one of 1, 2, 3, 4"));
        }
        if self.beta_d.iter().any(|b| !(*b >= 0.0)) {
            return bad("beta_d values must be nonnegative".into());
        }
        if self.study == "scalability" && self.sizes.windows(2).any(|w| w[0] > w[1]) {
            return bad("sizes must be sorted ascending".into());
        }
        let networks = self
            .networks
            .iter()
            .map(|s| s.parse::<GraphModel>().map_err(|e| BenchError::Config(e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        self.graph_model
            .parse::<GraphModel>()
            .map_err(|e| BenchError::Config(e.to_string()))?;
        Ok(ExperimentGrid {
            study,
            config: self,
            networks,
        })
    }
}
