//! Permutation null distribution, p-values and the end-to-end test driver.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attributes::AttributeTable;
use crate::conditional::{self, ConditionalSpec};
use crate::error::{NirdError, Result};
use crate::graph::Graph;
use crate::kernels::center;
use crate::marginal::{self, MarginalSpec};
use crate::rng::{stream, substream};
use crate::testspec::{Method, TestSpec};

/// Largest graph the exact method accepts.
pub const EXACT_LIMIT: usize = 2000;

/// Smallest number of permutations for which `α = 0.05` is attainable.
pub const MIN_PERMUTATIONS: usize = 19;

/// How one side of a test enters the statistic.
#[derive(Debug, Clone, PartialEq)]
pub enum Representation {
    /// `n × d` explicit features; HSIC is `‖(1/n) Xᵀ H Y‖²_F`.
    Features(DMatrix<f64>),
    /// `n × n` Gram matrix; HSIC is `(1/n²) tr(Kx H Ky H)`.
    Gram(DMatrix<f64>),
}

impl Representation {
    pub fn n(&self) -> usize {
        match self {
            Representation::Features(m) | Representation::Gram(m) => m.nrows(),
        }
    }
}

/// Both sides of a test, ready for permutation. Only `permuted` is
/// shuffled.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub fixed: Representation,
    pub permuted: Representation,
    /// Bandwidth per role, keyed by the column(s) it was computed from.
    pub bandwidths: BTreeMap<String, f64>,
    /// Columns whose points were all identical (bandwidth fell back to 1).
    pub degenerate: Vec<String>,
    pub lambda: Option<f64>,
    pub num_features: Option<usize>,
}

/// Row factor `L` with `L Lᵀ = M Mᵀ` and at most `n` columns.
fn compress(m: DMatrix<f64>) -> DMatrix<f64> {
    if m.ncols() <= m.nrows() {
        return m;
    }
    m.transpose().qr().r().transpose()
}

/// Evaluates the statistic under arbitrary permutations of the `permuted`
/// side.
#[derive(Debug, Clone)]
pub struct PermutationEngine {
    kind: EngineKind,
    n: usize,
}

#[derive(Debug, Clone)]
enum EngineKind {
    Features { xc: DMatrix<f64>, y: DMatrix<f64> },
    Gram { xc: DMatrix<f64>, y: DMatrix<f64> },
}

impl PermutationEngine {
    pub fn new(fixed: &Representation, permuted: &Representation) -> Result<Self> {
        let n = fixed.n();
        if permuted.n() != n {
            return Err(NirdError::mismatch(format!(
                "sides have {} and {} rows",
                n,
                permuted.n()
            )));
        }
        let kind = match (fixed, permuted) {
            (Representation::Features(x), Representation::Features(y)) => {
                let mut xc = x.clone();
                for mut col in xc.column_iter_mut() {
                    let mean = col.mean();
                    col.add_scalar_mut(-mean);
                }
                EngineKind::Features {
                    xc: compress(xc),
                    y: compress(y.clone()),
                }
            }
            (Representation::Gram(x), Representation::Gram(y)) => {
                if x.ncols() != n || y.ncols() != n {
                    return Err(NirdError::mismatch("Gram matrices must be square"));
                }
                EngineKind::Gram {
                    xc: center(x),
                    y: y.clone(),
                }
            }
            _ => return Err(NirdError::mismatch("cannot mix features and Gram matrices")),
        };
        Ok(PermutationEngine { kind, n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// The statistic with row `i` of the permuted side replaced by row
    /// `perm[i]`.
    pub fn statistic(&self, perm: &[usize]) -> f64 {
        let n = self.n;
        if n == 0 {
            return 0.0;
        }
        let scale = 1.0 / (n as f64 * n as f64);
        match &self.kind {
            EngineKind::Features { xc, y } => {
                let yp = y.select_rows(perm);
                xc.tr_mul(&yp).norm_squared() * scale
            }
            EngineKind::Gram { xc, y } => {
                let mut total = 0.0;
                for j in 0..n {
                    let xcol = xc.column(j);
                    let ycol = y.column(perm[j]);
                    let mut acc = 0.0;
                    for i in 0..n {
                        acc += xcol[i] * ycol[perm[i]];
                    }
                    total += acc;
                }
                total * scale
            }
        }
    }

    /// The unpermuted statistic.
    pub fn observed(&self) -> f64 {
        let identity: Vec<usize> = (0..self.n).collect();
        self.statistic(&identity)
    }
}

/// The permutation used by replicate `b`, drawn from its own substream.
pub fn replicate_permutation(n: usize, seed: u64, b: usize) -> Vec<usize> {
    let mut rng = substream(seed, &[stream::PERMUTATIONS, b as u64]);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    perm
}

/// Statistics of `num_permutations` replicates, in replicate order.
pub fn permutation_replicates<F>(n: usize, num_permutations: usize, seed: u64, stat: F) -> Vec<f64>
where
    F: Fn(&[usize]) -> f64 + Sync,
{
    (0..num_permutations)
        .into_par_iter()
        .map(|b| stat(&replicate_permutation(n, seed, b)))
        .collect()
}

/// `(1 + #{b : stat_b ≥ observed}) / (B + 1)`. Replicates within a relative
/// `1e−12` of the observed value count as ties.
pub fn pvalue(observed: f64, replicates: &[f64]) -> f64 {
    let threshold = observed - 1e-12 * observed.abs();
    let exceed = replicates.iter().filter(|&&s| s >= threshold).count();
    (1 + exceed) as f64 / (replicates.len() + 1) as f64
}

/// Permutation p-value of `observed` against `stat` evaluated on
/// `num_permutations` random relabelings of `n` nodes.
pub fn permutation_pvalue<F>(
    n: usize,
    observed: f64,
    num_permutations: usize,
    seed: u64,
    stat: F,
) -> Result<f64>
where
    F: Fn(&[usize]) -> f64 + Sync,
{
    check_permutations(num_permutations)?;
    Ok(pvalue(observed, &permutation_replicates(n, num_permutations, seed, stat)))
}

fn check_permutations(b: usize) -> Result<()> {
    if b < MIN_PERMUTATIONS {
        return Err(NirdError::BadParams(format!(
            "need at least {MIN_PERMUTATIONS} permutations, got {b}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOptions {
    pub method: Method,
    pub num_permutations: usize,
    pub alpha: f64,
    /// Frequencies per variable; defaults to 20 for marginal and 50 for
    /// conditional tests.
    pub num_features: Option<usize>,
    /// Ridge penalty; defaults to `1e−3·n`.
    pub lambda: Option<f64>,
    pub seed: u64,
}

impl Default for TestOptions {
    fn default() -> Self {
        TestOptions {
            method: Method::Rff,
            num_permutations: 1000,
            alpha: 0.05,
            num_features: None,
            lambda: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub spec: String,
    pub method: Method,
    pub statistic: f64,
    pub p_value: f64,
    pub reject: bool,
    pub num_permutations: usize,
    pub alpha: f64,
    pub seed: u64,
    pub n: usize,
    pub num_features: Option<usize>,
    pub lambda: Option<f64>,
    pub bandwidths: BTreeMap<String, f64>,
    pub degenerate_columns: Vec<String>,
}

/// Builds both sides of `spec` without running permutations.
pub fn prepare(g: &Graph, table: &AttributeTable, spec: &TestSpec, opts: &TestOptions) -> Result<Prepared> {
    if table.n() != g.n() {
        return Err(NirdError::mismatch(format!(
            "attribute table has {} rows, graph has {} nodes",
            table.n(),
            g.n()
        )));
    }
    if opts.method == Method::Exact && g.n() > EXACT_LIMIT {
        return Err(NirdError::PathTooLarge {
            n: g.n(),
            limit: EXACT_LIMIT,
        });
    }
    match &spec.given {
        None => {
            let m = MarginalSpec {
                lhs: spec.lhs.clone(),
                rhs: spec.rhs.clone(),
                method: opts.method,
                num_features: opts.num_features.unwrap_or(marginal::DEFAULT_FEATURES),
                seed: opts.seed,
            };
            marginal::prepare(g, table, &m)
        }
        Some(z) => {
            let c = ConditionalSpec {
                x: spec.lhs.clone(),
                y: spec.rhs.clone(),
                z: z.clone(),
                method: opts.method,
                lambda: opts.lambda.unwrap_or_else(|| conditional::default_lambda(g.n())),
                num_features: opts.num_features.unwrap_or(conditional::DEFAULT_FEATURES),
                seed: opts.seed,
            };
            conditional::prepare(g, table, &c)
        }
    }
}

/// Runs the permutation test of `spec` on `(g, table)`.
pub fn run_test(g: &Graph, table: &AttributeTable, spec: &TestSpec, opts: &TestOptions) -> Result<TestResult> {
    check_permutations(opts.num_permutations)?;
    if !(opts.alpha > 0.0 && opts.alpha < 1.0) {
        return Err(NirdError::BadParams(format!("alpha must lie in (0, 1), got {}", opts.alpha)));
    }
    let prepared = prepare(g, table, spec, opts)?;
    let engine = PermutationEngine::new(&prepared.fixed, &prepared.permuted)?;
    let observed = engine.observed();
    let replicates =
        permutation_replicates(engine.n(), opts.num_permutations, opts.seed, |p| engine.statistic(p));
    let p_value = pvalue(observed, &replicates);
    Ok(TestResult {
        spec: spec.to_string(),
        method: opts.method,
        statistic: observed,
        p_value,
        reject: p_value <= opts.alpha,
        num_permutations: opts.num_permutations,
        alpha: opts.alpha,
        seed: opts.seed,
        n: g.n(),
        num_features: prepared.num_features,
        lambda: prepared.lambda,
        bandwidths: prepared.bandwidths,
        degenerate_columns: prepared.degenerate,
    })
}
