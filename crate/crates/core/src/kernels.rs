//! RBF Gram matrices, median-heuristic bandwidths, centering and the
//! relational Gram `D⁻¹ A K A D⁻¹`.
//!
//! Points are the rows of an `n × d` matrix; a single attribute column is an
//! `n × 1` matrix (see [`points`]).

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::index;

use crate::error::{NirdError, Result};
use crate::graph::Graph;
use crate::rng::{stream, substream};

/// Largest number of points used to estimate the median distance.
pub const MEDIAN_SUBSAMPLE: usize = 1000;

const SUBSAMPLE_SEED: u64 = 0x6d65_6469_616e;

/// A Gram matrix together with the bandwidth that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    pub values: DMatrix<f64>,
    pub bandwidth: f64,
}

impl KernelMatrix {
    pub fn n(&self) -> usize {
        self.values.nrows()
    }
}

/// Wraps a column of values as an `n × 1` point matrix.
pub fn points(values: &[f64]) -> DMatrix<f64> {
    DMatrix::from_column_slice(values.len(), 1, values)
}

/// Stacks equally long columns side by side into an `n × k` point matrix.
pub fn stack_columns(columns: &[&[f64]]) -> Result<DMatrix<f64>> {
    let n = columns.first().map_or(0, |c| c.len());
    if columns.iter().any(|c| c.len() != n) {
        return Err(NirdError::mismatch("columns differ in length"));
    }
    Ok(DMatrix::from_fn(n, columns.len(), |i, j| columns[j][i]))
}

fn sq_dist(x: &DMatrix<f64>, i: usize, j: usize) -> f64 {
    (0..x.ncols()).map(|c| (x[(i, c)] - x[(j, c)]).powi(2)).sum()
}

fn median_of(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len();
    if m % 2 == 1 {
        values[m / 2]
    } else {
        0.5 * (values[m / 2 - 1] + values[m / 2])
    }
}

/// Median pairwise Euclidean distance between rows of `x`.
///
/// At most [`MEDIAN_SUBSAMPLE`] rows enter the estimate; larger inputs are
/// subsampled with a fixed seed. When more than half the pairs coincide the
/// median of the nonzero distances is used instead, so the result is always
/// positive unless every point is identical.
pub fn median_bandwidth(x: &DMatrix<f64>) -> Result<f64> {
    let n = x.nrows();
    if n < 2 {
        return Err(NirdError::BadParams("bandwidth needs at least two points".into()));
    }
    let rows: Vec<usize> = if n > MEDIAN_SUBSAMPLE {
        let mut rng = substream(SUBSAMPLE_SEED, &[stream::SUBSAMPLE, n as u64]);
        let mut picked = index::sample(&mut rng, n, MEDIAN_SUBSAMPLE).into_vec();
        picked.sort_unstable();
        picked
    } else {
        (0..n).collect()
    };
    let mut dists = Vec::with_capacity(rows.len() * (rows.len() - 1) / 2);
    for (a, &i) in rows.iter().enumerate() {
        for &j in &rows[a + 1..] {
            dists.push(sq_dist(x, i, j).sqrt());
        }
    }
    let median = median_of(&mut dists);
    if median > 0.0 {
        return Ok(median);
    }
    let mut positive: Vec<f64> = dists.into_iter().filter(|&d| d > 0.0).collect();
    if positive.is_empty() {
        return Err(NirdError::DegenerateInput);
    }
    Ok(median_of(&mut positive))
}

/// [`median_bandwidth`], falling back to 1.0 for degenerate input. The flag
/// reports whether the fallback was taken.
pub fn median_bandwidth_or_default(x: &DMatrix<f64>) -> Result<(f64, bool)> {
    match median_bandwidth(x) {
        Ok(b) => Ok((b, false)),
        Err(NirdError::DegenerateInput) => Ok((1.0, true)),
        Err(e) => Err(e),
    }
}

pub(crate) fn check_bandwidth(bandwidth: f64) -> Result<()> {
    if bandwidth > 0.0 && bandwidth.is_finite() {
        Ok(())
    } else {
        Err(NirdError::BadBandwidth(bandwidth))
    }
}

/// `K[i][j] = exp(−‖xᵢ − xⱼ‖² / (2·bandwidth²))`.
pub fn rbf_gram(x: &DMatrix<f64>, bandwidth: f64) -> Result<KernelMatrix> {
    check_bandwidth(bandwidth)?;
    let n = x.nrows();
    let scale = -0.5 / (bandwidth * bandwidth);
    let mut values = DMatrix::from_element(n, n, 1.0);
    for j in 0..n {
        for i in j + 1..n {
            let v = (scale * sq_dist(x, i, j)).exp();
            values[(i, j)] = v;
            values[(j, i)] = v;
        }
    }
    Ok(KernelMatrix { values, bandwidth })
}

/// Double centering `H K H` with `H = I − 11ᵀ/n`, computed from row, column
/// and grand means.
pub fn center(k: &DMatrix<f64>) -> DMatrix<f64> {
    let (r, c) = k.shape();
    assert_eq!(r, c, "center needs a square matrix");
    if r == 0 {
        return k.clone();
    }
    let n = r as f64;
    let col_means: Vec<f64> = (0..c).map(|j| k.column(j).sum() / n).collect();
    let row_means: Vec<f64> = (0..r).map(|i| k.row(i).sum() / n).collect();
    let grand = col_means.iter().sum::<f64>() / n;
    DMatrix::from_fn(r, c, |i, j| k[(i, j)] - row_means[i] - col_means[j] + grand)
}

/// Gram of neighborhood kernel means:
/// `out[i][j] = (1/(deg i·deg j)) Σ_{m∈N(i)} Σ_{p∈N(j)} K[m][p]`.
pub fn relational_gram(k: &KernelMatrix, g: &Graph) -> Result<DMatrix<f64>> {
    if k.n() != g.n() {
        return Err(NirdError::mismatch(format!(
            "kernel is {}×{}, graph has {} nodes",
            k.n(),
            k.n(),
            g.n()
        )));
    }
    let mk = g.aggregate_rows(&k.values)?;
    let mut out = g.aggregate_rows(&mk.transpose())?;
    // restore exact symmetry lost to summation order
    for j in 0..out.ncols() {
        for i in j + 1..out.nrows() {
            let v = 0.5 * (out[(i, j)] + out[(j, i)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(out)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Fails with [`NirdError::Numerical`] when the smallest eigenvalue of `m`
/// is below `−1e−8·n`.
pub fn check_psd(m: &DMatrix<f64>) -> Result<()> {
    let tol = -1e-8 * m.nrows() as f64;
    let lo = min_eigenvalue(m);
    if lo < tol {
        Err(NirdError::Numerical(format!("matrix not PSD: smallest eigenvalue {lo:e}")))
    } else {
        Ok(())
    }
}
