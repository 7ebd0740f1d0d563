//! Random Fourier features for the RBF kernel and the relational feature
//! mean `D⁻¹ A Z`.

use nalgebra::DMatrix;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{NirdError, Result};
use crate::graph::Graph;
use crate::kernels::check_bandwidth;
use crate::rng::{stream, substream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RffConfig {
    /// Number of frequencies `D`; the feature dimension is `2·D`.
    pub num_features: usize,
    pub bandwidth: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureKind {
    Raw,
    RelationalMean,
    Residual,
}

/// One feature row per node.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub values: DMatrix<f64>,
    pub kind: FeatureKind,
}

impl FeatureMatrix {
    pub fn new(values: DMatrix<f64>, kind: FeatureKind) -> Self {
        FeatureMatrix { values, kind }
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    /// `Z Zᵀ`, the Gram matrix these features induce.
    pub fn gram(&self) -> DMatrix<f64> {
        &self.values * self.values.transpose()
    }
}

/// Draws a `D × input_dim` frequency matrix with i.i.d. `N(0, bandwidth⁻²)`
/// entries.
pub fn sample_frequencies(cfg: &RffConfig, input_dim: usize) -> Result<DMatrix<f64>> {
    check_bandwidth(cfg.bandwidth)?;
    if cfg.num_features == 0 || input_dim == 0 {
        return Err(NirdError::BadParams(
            "need at least one feature and one input dimension".into(),
        ));
    }
    let normal = Normal::new(0.0, 1.0 / cfg.bandwidth)
        .map_err(|_| NirdError::BadBandwidth(cfg.bandwidth))?;
    let mut rng = substream(cfg.seed, &[stream::FREQUENCIES]);
    let mut freqs = DMatrix::zeros(cfg.num_features, input_dim);
    for k in 0..cfg.num_features {
        for c in 0..input_dim {
            freqs[(k, c)] = normal.sample(&mut rng);
        }
    }
    Ok(freqs)
}

/// Adds `weight·z(point)` to `out`, where `z` is the cos/sin feature map
/// for `freqs` and `out` has length `2·D`.
pub fn accumulate_features(point: &[f64], freqs: &DMatrix<f64>, weight: f64, out: &mut [f64]) {
    let d = freqs.nrows();
    let scale = weight * (1.0 / d as f64).sqrt();
    for k in 0..d {
        let mut phase = 0.0;
        for (c, &v) in point.iter().enumerate() {
            phase += freqs[(k, c)] * v;
        }
        let (s, c) = phase.sin_cos();
        out[2 * k] += scale * c;
        out[2 * k + 1] += scale * s;
    }
}

/// Row `i` is `√(1/D)·[cos ω₁ᵀxᵢ, sin ω₁ᵀxᵢ, …, cos ω_Dᵀxᵢ, sin ω_Dᵀxᵢ]`.
pub fn rff_map(x: &DMatrix<f64>, freqs: &DMatrix<f64>) -> Result<FeatureMatrix> {
    if x.ncols() != freqs.ncols() {
        return Err(NirdError::mismatch(format!(
            "inputs have {} columns, frequencies expect {}",
            x.ncols(),
            freqs.ncols()
        )));
    }
    let n = x.nrows();
    let mut values = DMatrix::zeros(n, 2 * freqs.nrows());
    let mut point = vec![0.0; x.ncols()];
    let mut row = vec![0.0; values.ncols()];
    for i in 0..n {
        for (c, p) in point.iter_mut().enumerate() {
            *p = x[(i, c)];
        }
        row.fill(0.0);
        accumulate_features(&point, freqs, 1.0, &mut row);
        for (c, &v) in row.iter().enumerate() {
            values[(i, c)] = v;
        }
    }
    Ok(FeatureMatrix::new(values, FeatureKind::Raw))
}

/// `D⁻¹ A Z`: row `i` is the mean of the feature rows of the neighbors of `i`.
pub fn relational_rff_mean(z: &FeatureMatrix, g: &Graph) -> Result<FeatureMatrix> {
    Ok(FeatureMatrix::new(g.aggregate_rows(&z.values)?, FeatureKind::RelationalMean))
}
