//! HSIC marginal statistic between two variables, either of which may be
//! relational.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::attributes::AttributeTable;
use crate::error::{NirdError, Result};
use crate::graph::Graph;
use crate::kernels::{center, median_bandwidth_or_default, points, rbf_gram, relational_gram};
use crate::nullperm::{PermutationEngine, Prepared, Representation};
use crate::rff::{relational_rff_mean, rff_map, sample_frequencies, FeatureMatrix, RffConfig};
use crate::rng::{derive_seed, stable_hash};
use crate::testspec::{Method, VariableRef};

/// Frequencies per variable when none are requested.
pub const DEFAULT_FEATURES: usize = 20;

/// Seed of the frequencies for the variable(s) named `key`. Keying by name
/// gives a column the same features in every role it plays.
pub(crate) fn frequency_seed(seed: u64, key: &str) -> u64 {
    derive_seed(seed, &[stable_hash(key.as_bytes())])
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginalSpec {
    pub lhs: VariableRef,
    pub rhs: VariableRef,
    pub method: Method,
    pub num_features: usize,
    pub seed: u64,
}

/// `(1/n²) tr(Kx H Ky H)`, evaluated as `(1/n²) ⟨H Kx H, Ky⟩_F`.
pub fn hsic_exact(kx: &DMatrix<f64>, ky: &DMatrix<f64>) -> Result<f64> {
    let n = kx.nrows();
    if kx.shape() != (n, n) || ky.shape() != (n, n) {
        return Err(NirdError::mismatch(format!(
            "Gram shapes {:?} and {:?} differ or are not square",
            kx.shape(),
            ky.shape()
        )));
    }
    if n == 0 {
        return Ok(0.0);
    }
    Ok(center(kx).dot(ky) / (n as f64 * n as f64))
}

/// `‖(1/n) Zxᵀ H Zy‖²_F`, without forming any `n × n` matrix.
pub fn hsic_rff(zx: &FeatureMatrix, zy: &FeatureMatrix) -> Result<f64> {
    let n = zx.n();
    if zy.n() != n {
        return Err(NirdError::mismatch(format!("feature matrices have {} and {} rows", n, zy.n())));
    }
    if n == 0 {
        return Ok(0.0);
    }
    let mut yc = zy.values.clone();
    for mut col in yc.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    Ok(zx.values.tr_mul(&yc).norm_squared() / (n as f64 * n as f64))
}

/// Collects per-role bandwidths while a test is being prepared.
#[derive(Debug, Default)]
pub(crate) struct Bandwidths {
    pub values: BTreeMap<String, f64>,
    pub degenerate: Vec<String>,
}

impl Bandwidths {
    pub fn median(&mut self, key: &str, x: &DMatrix<f64>) -> Result<f64> {
        let (b, fallback) = median_bandwidth_or_default(x)?;
        if fallback && !self.degenerate.iter().any(|d| d == key) {
            self.degenerate.push(key.to_string());
        }
        self.values.insert(key.to_string(), b);
        Ok(b)
    }
}

/// Random Fourier features of one variable, aggregated over neighbors when
/// it is relational.
pub(crate) fn variable_features(
    g: &Graph,
    values: &[f64],
    relational: bool,
    bandwidth: f64,
    num_features: usize,
    seed: u64,
) -> Result<DMatrix<f64>> {
    let cfg = RffConfig {
        num_features,
        bandwidth,
        seed,
    };
    let z = rff_map(&points(values), &sample_frequencies(&cfg, 1)?)?;
    Ok(if relational {
        relational_rff_mean(&z, g)?.values
    } else {
        z.values
    })
}

/// RBF Gram of one variable, or the relational Gram when it is relational.
pub(crate) fn variable_gram(g: &Graph, values: &[f64], relational: bool, bandwidth: f64) -> Result<DMatrix<f64>> {
    let k = rbf_gram(&points(values), bandwidth)?;
    if relational {
        relational_gram(&k, g)
    } else {
        Ok(k.values)
    }
}

/// Builds both sides. The side to permute follows
/// [`crate::testspec::TestSpec::permutes_lhs`].
pub fn prepare(g: &Graph, table: &AttributeTable, spec: &MarginalSpec) -> Result<Prepared> {
    if table.n() != g.n() {
        return Err(NirdError::mismatch("attribute table and graph differ in size"));
    }
    let mut bw = Bandwidths::default();
    let mut side = |var: &VariableRef| -> Result<Representation> {
        let values = table.get(&var.column)?;
        let b = bw.median(&var.column, &points(values))?;
        Ok(match spec.method {
            Method::Rff => Representation::Features(variable_features(
                g,
                values,
                var.is_relational(),
                b,
                spec.num_features,
                frequency_seed(spec.seed, &var.column),
            )?),
            Method::Exact => Representation::Gram(variable_gram(g, values, var.is_relational(), b)?),
        })
    };
    let lhs = side(&spec.lhs)?;
    let rhs = side(&spec.rhs)?;
    let permute_lhs = spec.rhs.is_relational() && !spec.lhs.is_relational();
    let (fixed, permuted) = if permute_lhs { (rhs, lhs) } else { (lhs, rhs) };
    Ok(Prepared {
        fixed,
        permuted,
        bandwidths: bw.values,
        degenerate: bw.degenerate,
        lambda: None,
        num_features: (spec.method == Method::Rff).then_some(spec.num_features),
    })
}

/// The observed marginal statistic.
pub fn marginal_statistic(g: &Graph, table: &AttributeTable, spec: &MarginalSpec) -> Result<f64> {
    let p = prepare(g, table, spec)?;
    match (&p.fixed, &p.permuted) {
        (Representation::Features(x), Representation::Features(y)) => hsic_rff(
            &FeatureMatrix::new(x.clone(), crate::rff::FeatureKind::Raw),
            &FeatureMatrix::new(y.clone(), crate::rff::FeatureKind::Raw),
        ),
        (Representation::Gram(x), Representation::Gram(y)) => hsic_exact(x, y),
        _ => Ok(PermutationEngine::new(&p.fixed, &p.permuted)?.observed()),
    }
}
