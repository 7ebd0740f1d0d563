//! Relational conditional independence statistic: ridge-regress the feature
//! maps of `ẍ = (x, z)` and `y` on those of `z`, then take HSIC of the
//! residuals.
//!
//! A relational variable contributes one *member* per neighbor. The target
//! for `ẍ` at node `i` ranges over all pairs of an `x` member and a `z`
//! member, and its feature row is the mean over those pairs. Each member is
//! regressed on node `i`'s conditioning features and the member residuals
//! are averaged, which amounts to a ridge fit weighted by member counts.

use nalgebra::DMatrix;

use crate::attributes::AttributeTable;
use crate::error::{NirdError, Result};
use crate::graph::Graph;
use crate::kernels::{points, stack_columns};
use crate::marginal::{frequency_seed, hsic_exact, hsic_rff, variable_features, variable_gram, Bandwidths};
use crate::nullperm::{Prepared, Representation};
use crate::rff::{accumulate_features, sample_frequencies, FeatureKind, FeatureMatrix, RffConfig};
use crate::testspec::{Method, VariableRef};

/// Frequencies per variable when none are requested.
pub const DEFAULT_FEATURES: usize = 50;

/// Ridge penalty used when none is given: `1e−3·n`.
pub fn default_lambda(n: usize) -> f64 {
    1e-3 * n as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalSpec {
    pub x: VariableRef,
    pub y: VariableRef,
    pub z: VariableRef,
    pub method: Method,
    pub lambda: f64,
    pub num_features: usize,
    pub seed: u64,
}

/// Coefficients `β` of a multi-output ridge regression.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeFit {
    pub coefficients: DMatrix<f64>,
    pub lambda: f64,
}

impl RidgeFit {
    /// `Φ_t − Φ_z β`.
    pub fn residuals(&self, phi_z: &DMatrix<f64>, phi_t: &DMatrix<f64>) -> DMatrix<f64> {
        phi_t - phi_z * &self.coefficients
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(NirdError::BadParams(format!("lambda must be positive, got {lambda}")))
    }
}

/// `β = (Φ_zᵀ W Φ_z + λI)⁻¹ Φ_zᵀ W Φ_t` with `W = diag(weights)`.
pub fn ridge_fit_weighted(
    phi_z: &DMatrix<f64>,
    phi_t: &DMatrix<f64>,
    weights: &[f64],
    lambda: f64,
) -> Result<RidgeFit> {
    check_lambda(lambda)?;
    let n = phi_z.nrows();
    if phi_t.nrows() != n || weights.len() != n {
        return Err(NirdError::mismatch(format!(
            "regression rows differ: {} regressors, {} targets, {} weights",
            n,
            phi_t.nrows(),
            weights.len()
        )));
    }
    let mut weighted = phi_z.clone();
    for (mut row, &w) in weighted.row_iter_mut().zip(weights) {
        row *= w;
    }
    let mut gram = weighted.tr_mul(phi_z);
    for k in 0..gram.nrows() {
        gram[(k, k)] += lambda;
    }
    let rhs = weighted.tr_mul(phi_t);
    let chol = gram
        .cholesky()
        .ok_or_else(|| NirdError::Numerical("ridge system is not positive definite".into()))?;
    Ok(RidgeFit {
        coefficients: chol.solve(&rhs),
        lambda,
    })
}

/// Unweighted ridge regression of `Φ_t` on `Φ_z`.
pub fn ridge_fit(phi_z: &FeatureMatrix, phi_t: &FeatureMatrix, lambda: f64) -> Result<RidgeFit> {
    ridge_fit_weighted(&phi_z.values, &phi_t.values, &vec![1.0; phi_z.n()], lambda)
}

/// Gram of the weighted ridge residuals in dual form:
/// `λ² Q K_t Qᵀ` with `Q = (K_z W + λI)⁻¹`.
pub fn dual_residual_gram(
    kz: &DMatrix<f64>,
    kt: &DMatrix<f64>,
    weights: &[f64],
    lambda: f64,
) -> Result<DMatrix<f64>> {
    check_lambda(lambda)?;
    let n = kz.nrows();
    if kz.shape() != (n, n) || kt.shape() != (n, n) || weights.len() != n {
        return Err(NirdError::mismatch("dual residual inputs must be n × n with n weights"));
    }
    let mut system = kz.clone();
    for (j, &w) in weights.iter().enumerate() {
        let mut col = system.column_mut(j);
        col *= w;
    }
    for k in 0..n {
        system[(k, k)] += lambda;
    }
    let lu = system.lu();
    let qkt = lu
        .solve(kt)
        .ok_or_else(|| NirdError::Numerical("singular dual ridge system".into()))?;
    let gram = lu
        .solve(&qkt.transpose())
        .ok_or_else(|| NirdError::Numerical("singular dual ridge system".into()))?;
    let mut out = gram * (lambda * lambda);
    for j in 0..n {
        for i in j + 1..n {
            let v = 0.5 * (out[(i, j)] + out[(j, i)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(out)
}

fn members<'g>(var: &VariableRef, g: &'g Graph, i: usize, own: &'g [usize]) -> Result<&'g [usize]> {
    match var.predicate {
        Some(p) => p.evaluate(g, i),
        None => Ok(&own[i..=i]),
    }
}

fn member_counts(var: &VariableRef, g: &Graph) -> Vec<f64> {
    (0..g.n())
        .map(|i| if var.is_relational() { g.degree(i) as f64 } else { 1.0 })
        .collect()
}

struct Columns<'a> {
    x: &'a [f64],
    y: &'a [f64],
    z: &'a [f64],
}

fn columns<'a>(g: &Graph, table: &'a AttributeTable, spec: &ConditionalSpec) -> Result<Columns<'a>> {
    if table.n() != g.n() {
        return Err(NirdError::mismatch("attribute table and graph differ in size"));
    }
    check_lambda(spec.lambda)?;
    Ok(Columns {
        x: table.get(&spec.x.column)?,
        y: table.get(&spec.y.column)?,
        z: table.get(&spec.z.column)?,
    })
}

fn joint_key(spec: &ConditionalSpec) -> String {
    format!("{},{}", spec.x.column, spec.z.column)
}

/// Mean features of `(x_a, z_b)` over the member pairs of every node.
fn joint_member_features(
    g: &Graph,
    cols: &Columns,
    spec: &ConditionalSpec,
    freqs: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let n = g.n();
    let own: Vec<usize> = (0..n).collect();
    let d = 2 * freqs.nrows();
    let mut out = DMatrix::zeros(n, d);
    let mut row = vec![0.0; d];
    for i in 0..n {
        let xm = members(&spec.x, g, i, &own)?;
        let zm = members(&spec.z, g, i, &own)?;
        let weight = 1.0 / (xm.len() * zm.len()) as f64;
        row.fill(0.0);
        for &a in xm {
            for &b in zm {
                accumulate_features(&[cols.x[a], cols.z[b]], freqs, weight, &mut row);
            }
        }
        for (c, &v) in row.iter().enumerate() {
            out[(i, c)] = v;
        }
    }
    Ok(out)
}

struct Residualized {
    x: DMatrix<f64>,
    y: DMatrix<f64>,
    bandwidths: Bandwidths,
}

fn residualize_rff(g: &Graph, table: &AttributeTable, spec: &ConditionalSpec) -> Result<Residualized> {
    let cols = columns(g, table, spec)?;
    let mut bw = Bandwidths::default();
    let b_joint = bw.median(&joint_key(spec), &stack_columns(&[cols.x, cols.z])?)?;
    let b_y = bw.median(&spec.y.column, &points(cols.y))?;
    let b_z = bw.median(&spec.z.column, &points(cols.z))?;

    let seed = |key: &str| frequency_seed(spec.seed, key);
    let phi_z = variable_features(g, cols.z, spec.z.is_relational(), b_z, spec.num_features, seed(&spec.z.column))?;
    let phi_y = variable_features(g, cols.y, spec.y.is_relational(), b_y, spec.num_features, seed(&spec.y.column))?;
    let joint_cfg = RffConfig {
        num_features: spec.num_features,
        bandwidth: b_joint,
        seed: seed(&joint_key(spec)),
    };
    let phi_x = joint_member_features(g, &cols, spec, &sample_frequencies(&joint_cfg, 2)?)?;

    let wz = member_counts(&spec.z, g);
    let wx: Vec<f64> = member_counts(&spec.x, g).iter().zip(&wz).map(|(a, b)| a * b).collect();
    let wy = member_counts(&spec.y, g);
    let rx = ridge_fit_weighted(&phi_z, &phi_x, &wx, spec.lambda)?.residuals(&phi_z, &phi_x);
    let ry = ridge_fit_weighted(&phi_z, &phi_y, &wy, spec.lambda)?.residuals(&phi_z, &phi_y);
    Ok(Residualized {
        x: rx,
        y: ry,
        bandwidths: bw,
    })
}

/// Residual feature matrices `(R_ẍ, R_y)` from the random-feature fit.
pub fn residualize(
    g: &Graph,
    table: &AttributeTable,
    spec: &ConditionalSpec,
) -> Result<(FeatureMatrix, FeatureMatrix)> {
    let r = residualize_rff(g, table, spec)?;
    Ok((
        FeatureMatrix::new(r.x, FeatureKind::Residual),
        FeatureMatrix::new(r.y, FeatureKind::Residual),
    ))
}

fn residual_grams_inner(g: &Graph, table: &AttributeTable, spec: &ConditionalSpec) -> Result<Residualized> {
    let cols = columns(g, table, spec)?;
    let mut bw = Bandwidths::default();
    let b_joint = bw.median(&joint_key(spec), &stack_columns(&[cols.x, cols.z])?)?;
    let b_y = bw.median(&spec.y.column, &points(cols.y))?;
    let b_z = bw.median(&spec.z.column, &points(cols.z))?;

    let kz = variable_gram(g, cols.z, spec.z.is_relational(), b_z)?;
    let ky = variable_gram(g, cols.y, spec.y.is_relational(), b_y)?;
    // product RBF with a shared bandwidth factorizes over the member pairs
    let kx = variable_gram(g, cols.x, spec.x.is_relational(), b_joint)?
        .component_mul(&variable_gram(g, cols.z, spec.z.is_relational(), b_joint)?);

    let wz = member_counts(&spec.z, g);
    let wx: Vec<f64> = member_counts(&spec.x, g).iter().zip(&wz).map(|(a, b)| a * b).collect();
    let wy = member_counts(&spec.y, g);
    Ok(Residualized {
        x: dual_residual_gram(&kz, &kx, &wx, spec.lambda)?,
        y: dual_residual_gram(&kz, &ky, &wy, spec.lambda)?,
        bandwidths: bw,
    })
}

/// Residual Gram matrices `(R_ẍ R_ẍᵀ, R_y R_yᵀ)` from the exact kernel fit.
pub fn residual_grams(
    g: &Graph,
    table: &AttributeTable,
    spec: &ConditionalSpec,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let r = residual_grams_inner(g, table, spec)?;
    Ok((r.x, r.y))
}

/// Builds both residual sides. The `y` residuals are permuted unless `y` is
/// relational and `x` is not.
pub fn prepare(g: &Graph, table: &AttributeTable, spec: &ConditionalSpec) -> Result<Prepared> {
    let (r, wrap): (Residualized, fn(DMatrix<f64>) -> Representation) = match spec.method {
        Method::Rff => (residualize_rff(g, table, spec)?, Representation::Features),
        Method::Exact => (residual_grams_inner(g, table, spec)?, Representation::Gram),
    };
    let (x, y) = (wrap(r.x), wrap(r.y));
    let permute_x = spec.y.is_relational() && !spec.x.is_relational();
    let (fixed, permuted) = if permute_x { (y, x) } else { (x, y) };
    Ok(Prepared {
        fixed,
        permuted,
        bandwidths: r.bandwidths.values,
        degenerate: r.bandwidths.degenerate,
        lambda: Some(spec.lambda),
        num_features: (spec.method == Method::Rff).then_some(spec.num_features),
    })
}

/// The observed conditional statistic.
pub fn conditional_statistic(g: &Graph, table: &AttributeTable, spec: &ConditionalSpec) -> Result<f64> {
    match spec.method {
        Method::Rff => {
            let (rx, ry) = residualize(g, table, spec)?;
            hsic_rff(&rx, &ry)
        }
        Method::Exact => {
            let (gx, gy) = residual_grams(g, table, spec)?;
            hsic_exact(&gx, &gy)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use rand::Rng;

    fn random(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = substream(seed, &[]);
        DMatrix::from_fn(n, d, |_, _| rng.random::<f64>() - 0.5)
    }

    #[test]
    fn identical_target_is_explained() {
        let z = FeatureMatrix::new(random(30, 5, 1), FeatureKind::Raw);
        let fit = ridge_fit(&z, &z, 1e-10).unwrap();
        assert!((&fit.coefficients - DMatrix::identity(5, 5)).amax() < 1e-6);
        assert!(fit.residuals(&z.values, &z.values).amax() < 1e-8);
    }

    #[test]
    fn orthogonal_target_is_untouched() {
        let phi_z = DMatrix::from_fn(4, 1, |i, _| [1.0, 1.0, 0.0, 0.0][i]);
        let phi_t = DMatrix::from_fn(4, 1, |i, _| [1.0, -1.0, 0.0, 0.0][i]);
        let fit = ridge_fit_weighted(&phi_z, &phi_t, &[1.0; 4], 1e-9).unwrap();
        assert!(fit.coefficients.amax() < 1e-12);
        assert_eq!(fit.residuals(&phi_z, &phi_t), phi_t);
    }

    #[test]
    fn matches_normal_equations() {
        let z = random(30, 6, 2);
        let t = random(30, 4, 3);
        let lambda = 0.3;
        let fit = ridge_fit_weighted(&z, &t, &[1.0; 30], lambda).unwrap();
        let inv = (z.transpose() * &z + DMatrix::identity(6, 6) * lambda).try_inverse().unwrap();
        let beta = inv * z.transpose() * &t;
        let r_oracle = &t - &z * beta;
        let r = fit.residuals(&z, &t);
        assert!((&r * r.transpose() - &r_oracle * r_oracle.transpose()).amax() < 1e-8);
    }

    #[test]
    fn residuals_orthogonality_bound() {
        let z = random(30, 5, 4);
        let t = random(30, 3, 5);
        for lambda in [1e-4, 1e-2, 1.0] {
            let fit = ridge_fit_weighted(&z, &t, &[1.0; 30], lambda).unwrap();
            let lhs = (z.transpose() * fit.residuals(&z, &t)).norm();
            assert!(lhs <= lambda * fit.coefficients.norm() * (1.0 + 1e-9));
        }
    }

    #[test]
    fn dual_matches_primal_weighted() {
        let z = random(25, 7, 6);
        let t = random(25, 5, 7);
        let w: Vec<f64> = (0..25).map(|i| 1.0 + (i % 4) as f64).collect();
        let lambda = 0.05;
        let r = ridge_fit_weighted(&z, &t, &w, lambda).unwrap().residuals(&z, &t);
        let dual = dual_residual_gram(&(&z * z.transpose()), &(&t * t.transpose()), &w, lambda).unwrap();
        assert!((dual - &r * r.transpose()).amax() < 1e-10);
    }

    #[test]
    fn lambda_must_be_positive() {
        let z = random(5, 2, 1);
        assert!(ridge_fit_weighted(&z, &z, &[1.0; 5], 0.0).is_err());
        assert!(dual_residual_gram(&z.clone().resize(5, 5, 0.0), &DMatrix::zeros(5, 5), &[1.0; 5], -1.0).is_err());
        assert!(ridge_fit_weighted(&z, &z, &[1.0; 4], 1.0).is_err());
    }
}
