//! Monte Carlo trials. Every trial draws its graph, attributes and
//! permutations from substreams of a seed derived from the master seed and
//! the cell key, so results do not depend on scheduling.

use std::time::Instant;

use nird_core::attrgen::{self, varied_noise_sd};
use nird_core::graph::sample_nodes;
use nird_core::rng::{derive_seed, stable_hash, stream, substream};
use nird_core::{
    run_test, AttributeTable, DiffusionConfig, GenConfig, Graph, GraphGenConfig, GraphModel, Hypothesis, Method,
    TestOptions, TestSpec,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::BenchError;

/// Permutation-test settings shared by all trials of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestParams {
    pub method: Method,
    pub permutations: usize,
    pub alpha: f64,
    pub features: Option<usize>,
    pub lambda: Option<f64>,
}

impl Default for TestParams {
    fn default() -> Self {
        TestParams {
            method: Method::Rff,
            permutations: 1000,
            alpha: 0.05,
            features: None,
            lambda: None,
        }
    }
}

impl TestParams {
    pub fn options(&self, seed: u64) -> TestOptions {
        TestOptions {
            method: self.method,
            num_permutations: self.permutations,
            alpha: self.alpha,
            num_features: self.features,
            lambda: self.lambda,
            seed,
        }
    }
}

/// Outcome of one trial, tagged with the hypothesis its data came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub hypothesis: Hypothesis,
    pub statistic: f64,
    pub p_value: f64,
    pub reject: bool,
    /// Test time, excluding graph and attribute generation.
    pub runtime_ms: f64,
}

/// The hypothesis each dependence case is tested with.
pub fn case_spec(case: u8) -> TestSpec {
    let text = match case {
        1 => "rel(X) _||_ Y",
        3 => "X _||_ Y | rel(Z)",
        _ => "rel(X) _||_ Y | Z",
    };
    text.parse().expect("built-in spec parses")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseMode {
    /// `ε ~ N(0, 1)`.
    Fixed,
    /// Noise variance drawn per trial from `N(1, 0.2²)`.
    Varied,
}

/// One synthetic experiment cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticCell {
    pub case: u8,
    pub network: GraphModel,
    pub n: usize,
    pub beta_d: f64,
    pub noise: NoiseMode,
}

impl SyntheticCell {
    /// Seed key of the trials for `hyp`. Null data do not depend on `β_d`,
    /// so Null trials are keyed without it and shared across a `β_d` grid.
    pub fn key(&self, hyp: Hypothesis) -> String {
        let base = format!("case={};net={};n={};noise={:?}", self.case, self.network, self.n, self.noise);
        match hyp {
            Hypothesis::Null => format!("{base};null"),
            Hypothesis::Alternate => format!("{base};beta_d={};alternate", self.beta_d),
        }
    }
}

fn key_seed(master_seed: u64, key: &str) -> u64 {
    derive_seed(master_seed, &[stable_hash(key.as_bytes())])
}

fn timed_test(
    g: &Graph,
    table: &AttributeTable,
    spec: &TestSpec,
    params: &TestParams,
    seed: u64,
    trial: usize,
    hypothesis: Hypothesis,
) -> Result<TrialRecord, BenchError> {
    let start = Instant::now();
    let r = run_test(g, table, spec, &params.options(seed))?;
    Ok(TrialRecord {
        trial,
        hypothesis,
        statistic: r.statistic,
        p_value: r.p_value,
        reject: r.reject,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Generated inputs of one synthetic trial.
pub fn synthetic_data(
    cell: &SyntheticCell,
    hyp: Hypothesis,
    trial: usize,
    master_seed: u64,
) -> Result<(Graph, AttributeTable), BenchError> {
    let ks = key_seed(master_seed, &cell.key(hyp));
    let t = trial as u64;
    let g = GraphGenConfig {
        model: cell.network,
        n: cell.n,
        seed: derive_seed(ks, &[stream::GRAPH, t]),
    }
    .generate()?;
    let mut gen = GenConfig::new(cell.case, hyp, cell.beta_d, derive_seed(ks, &[stream::ATTRIBUTES, t]));
    if cell.noise == NoiseMode::Varied {
        gen.noise_sd = varied_noise_sd(&mut substream(ks, &[stream::NOISE, t]));
    }
    let table = attrgen::generate(&g, &gen)?;
    Ok((g, table))
}

/// Runs `trials` independent trials of `cell` under `hyp`, with a fresh
/// graph per trial. Records are in trial order.
pub fn run_synthetic_trials(
    cell: &SyntheticCell,
    hyp: Hypothesis,
    trials: usize,
    params: &TestParams,
    master_seed: u64,
) -> Result<Vec<TrialRecord>, BenchError> {
    let spec = case_spec(cell.case);
    let ks = key_seed(master_seed, &cell.key(hyp));
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let (g, table) = synthetic_data(cell, hyp, t, master_seed)?;
            timed_test(&g, &table, &spec, params, derive_seed(ks, &[stream::PERMUTATIONS, t as u64]), t, hyp)
        })
        .collect()
}

/// One diffusion cell on a fixed base network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionCell {
    pub p_init: f64,
    pub steps: usize,
    pub sample_size: usize,
}

impl DiffusionCell {
    pub fn key(&self) -> String {
        format!("diffusion;p_init={};steps={};sample={}", self.p_init, self.steps, self.sample_size)
    }
}

/// Inputs of one diffusion trial: contagion simulated on `base`, then an
/// induced subgraph on a uniform node sample (isolated nodes repaired).
pub fn diffusion_data(
    base: &Graph,
    cell: &DiffusionCell,
    trial: usize,
    master_seed: u64,
) -> Result<(Graph, AttributeTable), BenchError> {
    let ks = key_seed(master_seed, &cell.key());
    let t = trial as u64;
    let full = attrgen::diffuse_linear_threshold(
        base,
        &DiffusionConfig {
            p_init: cell.p_init,
            steps: cell.steps,
            seed: derive_seed(ks, &[stream::ATTRIBUTES, t]),
        },
    )?;
    if cell.sample_size >= base.n() {
        return Ok((base.clone(), full));
    }
    let mut rng = substream(ks, &[stream::SAMPLING, t]);
    let nodes = sample_nodes(base.n(), cell.sample_size, &mut rng)?;
    let g = base.induced_subgraph(&nodes, &mut rng)?;
    let mut table = AttributeTable::new(nodes.len());
    for name in ["X", "Y"] {
        let col = full.get(name)?;
        table.insert(name, nodes.iter().map(|&i| col[i]).collect())?;
    }
    Ok((g, table))
}

/// Runs `trials` diffusion trials, testing `rel(X) _||_ Y`. Every record is
/// an Alternate record: the outcome depends on neighbors' treatments.
pub fn run_diffusion_trials(
    base: &Graph,
    cell: &DiffusionCell,
    trials: usize,
    params: &TestParams,
    master_seed: u64,
) -> Result<Vec<TrialRecord>, BenchError> {
    let spec = case_spec(1);
    let ks = key_seed(master_seed, &cell.key());
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let (g, table) = diffusion_data(base, cell, t, master_seed)?;
            let seed = derive_seed(ks, &[stream::PERMUTATIONS, t as u64]);
            timed_test(&g, &table, &spec, params, seed, t, Hypothesis::Alternate)
        })
        .collect()
}

/// Fraction of rejections among records generated under `hyp`. Fails if
/// any record came from the other hypothesis.
pub fn rejection_rate(records: &[TrialRecord], hyp: Hypothesis) -> Result<f64, BenchError> {
    if let Some(r) = records.iter().find(|r| r.hypothesis != hyp) {
        return Err(BenchError::Provenance(format!(
            "trial {} is a {} record in a {} rate",
            r.trial,
            r.hypothesis.name(),
            hyp.name()
        )));
    }
    if records.is_empty() {
        return Err(BenchError::Provenance("no trials to aggregate".into()));
    }
    Ok(records.iter().filter(|r| r.reject).count() as f64 / records.len() as f64)
}

/// Type I rate: rejections among Null records.
pub fn type1(null: &[TrialRecord]) -> Result<f64, BenchError> {
    rejection_rate(null, Hypothesis::Null)
}

/// Type II rate: non-rejections among Alternate records.
pub fn type2(alternate: &[TrialRecord]) -> Result<f64, BenchError> {
    let accepted = alternate.iter().filter(|r| !r.reject).count();
    rejection_rate(alternate, Hypothesis::Alternate)?;
    Ok(accepted as f64 / alternate.len() as f64)
}
