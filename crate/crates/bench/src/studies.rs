//! The experiment studies and the grid runner.

use std::collections::HashMap;
use std::fs::File;
use std::io::BufReader;
use std::time::Instant;

use nird_core::graph::read_edge_list;
use nird_core::nullperm::EXACT_LIMIT;
use nird_core::rng::{derive_seed, stream};
use nird_core::{attrgen, run_test, GenConfig, Graph, GraphGenConfig, GraphModel, Hypothesis, Method};

use crate::config::{ExperimentGrid, Study, TestKind};
use crate::report::{ErrorReport, ReportRow};
use crate::trials::{
    case_spec, run_diffusion_trials, run_synthetic_trials, type1, type2, DiffusionCell, NoiseMode, SyntheticCell,
    TestParams, TrialRecord,
};
use crate::BenchError;

fn params(grid: &ExperimentGrid) -> TestParams {
    let c = &grid.config;
    TestParams {
        method: c.method,
        permutations: c.permutations,
        alpha: c.alpha,
        features: c.features,
        lambda: c.lambda,
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

fn header(grid: &ExperimentGrid) -> Vec<String> {
    let mut comments = vec![format!("nird bench: study={} master_seed={}", grid.study, grid.config.master_seed)];
    comments.extend(grid.config.to_toml().lines().map(str::to_string));
    comments
}

/// Error rates over cases × networks × `β_d`, with Null trials shared
/// across the `β_d` grid of a (case, network) pair.
fn synthetic_study(grid: &ExperimentGrid, noise: NoiseMode) -> Result<Vec<ReportRow>, BenchError> {
    let c = &grid.config;
    let p = params(grid);
    let mut null_cache: HashMap<String, Vec<TrialRecord>> = HashMap::new();
    let mut rows = Vec::new();
    for network in &grid.networks {
        for &case in &c.cases {
            for &beta_d in &c.beta_d {
                let cell = SyntheticCell {
                    case,
                    network: *network,
                    n: c.n,
                    beta_d,
                    noise,
                };
                let null_key = cell.key(Hypothesis::Null);
                if !null_cache.contains_key(&null_key) {
                    let recs = run_synthetic_trials(&cell, Hypothesis::Null, c.trials, &p, c.master_seed)?;
                    null_cache.insert(null_key.clone(), recs);
                }
                let null = &null_cache[&null_key];
                let alt = run_synthetic_trials(&cell, Hypothesis::Alternate, c.trials, &p, c.master_seed)?;
                rows.push(ReportRow {
                    experiment_id: grid.study.name().to_string(),
                    case,
                    model: network.name().to_string(),
                    model_param: network.param(),
                    beta_d: Some(beta_d),
                    n: c.n,
                    steps: None,
                    trials: c.trials,
                    type1: Some(type1(null)?),
                    type2: Some(type2(&alt)?),
                    mean_stat: mean(alt.iter().map(|r| r.statistic)),
                    mean_runtime_ms: c
                        .timing
                        .then(|| mean(null.iter().chain(&alt).map(|r| r.runtime_ms))),
                    seed: c.master_seed,
                });
            }
        }
    }
    Ok(rows)
}

/// The fixed network the diffusion study runs on.
pub fn diffusion_base(grid: &ExperimentGrid) -> Result<(Graph, GraphModel, String), BenchError> {
    let c = &grid.config;
    match &c.graph_file {
        Some(path) => {
            let g = read_edge_list(BufReader::new(File::open(path)?), None)?;
            Ok((g, GraphModel::ErdosRenyi { p: 0.0 }, "file".into()))
        }
        None => {
            let model: GraphModel = c.graph_model.parse()?;
            let g = GraphGenConfig {
                model,
                n: c.graph_nodes,
                seed: derive_seed(c.master_seed, &[stream::GRAPH]),
            }
            .generate()?;
            Ok((g, model, model.name().to_string()))
        }
    }
}

fn diffusion_study(grid: &ExperimentGrid) -> Result<Vec<ReportRow>, BenchError> {
    let c = &grid.config;
    let p = params(grid);
    let (base, model, model_name) = diffusion_base(grid)?;
    let mut rows = Vec::new();
    for &p_init in &c.p_init {
        for &steps in &c.steps {
            for &sample_size in &c.sample_sizes {
                let cell = DiffusionCell {
                    p_init,
                    steps,
                    sample_size,
                };
                let recs = run_diffusion_trials(&base, &cell, c.trials, &p, c.master_seed)?;
                rows.push(ReportRow {
                    experiment_id: format!("diffusion/p_init={p_init}"),
                    case: 1,
                    model: model_name.clone(),
                    model_param: model.param(),
                    beta_d: None,
                    n: sample_size.min(base.n()),
                    steps: Some(steps),
                    trials: c.trials,
                    type1: None,
                    type2: Some(type2(&recs)?),
                    mean_stat: mean(recs.iter().map(|r| r.statistic)),
                    mean_runtime_ms: c.timing.then(|| mean(recs.iter().map(|r| r.runtime_ms))),
                    seed: c.master_seed,
                });
            }
        }
    }
    Ok(rows)
}

/// Wall-clock time of one test on ER(n, 0.02) data, averaged over
/// repetitions. Graph and attribute generation are not timed.
pub fn time_test(
    n: usize,
    kind: TestKind,
    method: Method,
    repetitions: usize,
    base: &TestParams,
    master_seed: u64,
) -> Result<(f64, Vec<TrialRecord>), BenchError> {
    let case = match kind {
        TestKind::Marginal => 1,
        TestKind::Conditional => 2,
    };
    let g = GraphGenConfig {
        model: GraphModel::ErdosRenyi { p: 0.02 },
        n,
        seed: derive_seed(master_seed, &[stream::GRAPH, n as u64]),
    }
    .generate()?;
    let table = attrgen::generate(
        &g,
        &GenConfig::new(case, Hypothesis::Alternate, 0.5, derive_seed(master_seed, &[stream::ATTRIBUTES, n as u64])),
    )?;
    let spec = case_spec(case);
    let p = TestParams { method, ..*base };
    let mut records = Vec::new();
    for rep in 0..repetitions.max(1) {
        let start = Instant::now();
        let r = run_test(&g, &table, &spec, &p.options(derive_seed(master_seed, &[stream::TRIAL, rep as u64])))?;
        records.push(TrialRecord {
            trial: rep,
            hypothesis: Hypothesis::Alternate,
            statistic: r.statistic,
            p_value: r.p_value,
            reject: r.reject,
            runtime_ms: start.elapsed().as_secs_f64() * 1e3,
        });
    }
    Ok((mean(records.iter().map(|r| r.runtime_ms)), records))
}

fn scalability_study(grid: &ExperimentGrid) -> Result<Vec<ReportRow>, BenchError> {
    let c = &grid.config;
    let p = params(grid);
    let mut rows = Vec::new();
    for &kind in &c.tests {
        for &method in &c.methods {
            for &n in &c.sizes {
                if method == Method::Exact && n > EXACT_LIMIT {
                    continue;
                }
                let (ms, recs) = time_test(n, kind, method, c.repetitions, &p, c.master_seed)?;
                let name = match kind {
                    TestKind::Marginal => "marginal",
                    TestKind::Conditional => "conditional",
                };
                rows.push(ReportRow {
                    experiment_id: format!("scalability/{name}/{method}"),
                    case: if kind == TestKind::Marginal { 1 } else { 2 },
                    model: "er".into(),
                    model_param: 0.02,
                    beta_d: Some(0.5),
                    n,
                    steps: None,
                    trials: recs.len(),
                    type1: None,
                    type2: Some(type2(&recs)?),
                    mean_stat: mean(recs.iter().map(|r| r.statistic)),
                    mean_runtime_ms: Some(ms),
                    seed: c.master_seed,
                });
            }
        }
    }
    Ok(rows)
}

/// Runs the configured study.
pub fn run_grid(grid: &ExperimentGrid) -> Result<ErrorReport, BenchError> {
    let rows = match grid.study {
        Study::Dependence => synthetic_study(grid, NoiseMode::Fixed)?,
        Study::Network => synthetic_study(grid, NoiseMode::Fixed)?,
        Study::Noise => synthetic_study(grid, NoiseMode::Varied)?,
        Study::Diffusion => diffusion_study(grid)?,
        Study::Scalability => scalability_study(grid)?,
    };
    Ok(ErrorReport {
        comments: header(grid),
        rows,
    })
}
