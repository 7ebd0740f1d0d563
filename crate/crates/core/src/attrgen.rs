//! Synthetic attributes for the four dependence cases and a linear-threshold
//! diffusion simulator.
//!
//! Columns: `Z` is a uniform confounder, `X` a binary treatment, `Y` a real
//! outcome. `σ̄V` below denotes the neighborhood mean of column `V`.
//!
//! | case | structure                       | tested as               |
//! |------|---------------------------------|-------------------------|
//! | 1    | σ̄X → Y                          | `rel(X) _||_ Y`         |
//! | 2    | σ̄X ← Z → Y ← σ̄X               | `rel(X) _||_ Y | Z`     |
//! | 3    | X ← σ̄Z → Y ← X                 | `X _||_ Y | rel(Z)`     |
//! | 4    | σ̄X ← Z → Y                      | `rel(X) _||_ Y | Z`     |

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::attributes::AttributeTable;
use crate::error::{NirdError, Result};
use crate::graph::Graph;
use crate::rng::{stream, substream};

/// Which generating equation produces the outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hypothesis {
    Null,
    Alternate,
}

impl Hypothesis {
    pub fn name(&self) -> &'static str {
        match self {
            Hypothesis::Null => "null",
            Hypothesis::Alternate => "alternate",
        }
    }
}

impl std::str::FromStr for Hypothesis {
    type Err = NirdError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "null" | "h0" => Ok(Hypothesis::Null),
            "alternate" | "alt" | "h1" => Ok(Hypothesis::Alternate),
            _ => Err(NirdError::BadParams(format!("unknown hypothesis `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    /// Dependence case, 1 to 4.
    pub case: u8,
    pub hypothesis: Hypothesis,
    pub beta_d: f64,
    pub beta_c: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

impl GenConfig {
    pub fn new(case: u8, hypothesis: Hypothesis, beta_d: f64, seed: u64) -> Self {
        GenConfig {
            case,
            hypothesis,
            beta_d,
            beta_c: 1.0,
            noise_sd: 1.0,
            seed,
        }
    }

    fn validate(&self, expected: u8) -> Result<()> {
        if self.case != expected {
            return Err(NirdError::BadCase {
                expected,
                got: self.case,
            });
        }
        if !(self.beta_d >= 0.0) || !self.beta_c.is_finite() || !(self.noise_sd >= 0.0) {
            return Err(NirdError::BadParams(format!(
                "need beta_d >= 0, finite beta_c and noise_sd >= 0, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Noise standard deviation for the varied-noise experiment: the variance
/// is drawn from N(1, 0.2²) and clipped below at 0.05.
pub fn varied_noise_sd(rng: &mut impl Rng) -> f64 {
    let variance: f64 = Normal::new(1.0, 0.2).expect("valid").sample(rng);
    variance.max(0.05).sqrt()
}

/// Mean of `column` over the neighbors of `i`.
pub fn relational_mean(g: &Graph, column: &[f64], i: usize) -> f64 {
    g.neighbor_mean(column, i)
}

/// Median split: 1 where the value exceeds the column median, else 0.
pub fn binarize(values: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    values.iter().map(|&v| if v > median { 1.0 } else { 0.0 }).collect()
}

fn uniforms(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random::<f64>()).collect()
}

fn noise(rng: &mut ChaCha8Rng, n: usize, sd: f64) -> Vec<f64> {
    (0..n)
        .map(|_| sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
        .collect()
}

fn start(cfg: &GenConfig) -> ChaCha8Rng {
    substream(cfg.seed, &[stream::ATTRIBUTES, cfg.case as u64])
}

/// Case 1: `X` uniform then binarized. Null `Y ~ U(0,1)`; alternate
/// `Y = β_d·(σ̄X)² + ε`.
pub fn gen_case1(g: &Graph, cfg: &GenConfig) -> Result<AttributeTable> {
    cfg.validate(1)?;
    let n = g.n();
    let mut rng = start(cfg);
    let x = binarize(&uniforms(&mut rng, n));
    let eps = noise(&mut rng, n, cfg.noise_sd);
    let y = match cfg.hypothesis {
        Hypothesis::Null => uniforms(&mut rng, n),
        Hypothesis::Alternate => {
            let xbar = g.neighbor_means(&x);
            (0..n).map(|i| cfg.beta_d * xbar[i].powi(2) + eps[i]).collect()
        }
    };
    AttributeTable::new(n).with("X", x)?.with("Y", y)
}

/// Case 2: `X = bin(β_c·Z² + ε)`, `Y = β_c·Z² + ε`, plus `β_d·(σ̄X)²`
/// under the alternate.
pub fn gen_case2(g: &Graph, cfg: &GenConfig) -> Result<AttributeTable> {
    cfg.validate(2)?;
    let n = g.n();
    let mut rng = start(cfg);
    let z = uniforms(&mut rng, n);
    let eps_x = noise(&mut rng, n, cfg.noise_sd);
    let eps_y = noise(&mut rng, n, cfg.noise_sd);
    let x = binarize(&(0..n).map(|i| cfg.beta_c * z[i].powi(2) + eps_x[i]).collect::<Vec<_>>());
    let dependence = match cfg.hypothesis {
        Hypothesis::Null => vec![0.0; n],
        Hypothesis::Alternate => g.neighbor_means(&x).iter().map(|m| cfg.beta_d * m * m).collect(),
    };
    let y = (0..n)
        .map(|i| dependence[i] + cfg.beta_c * z[i].powi(2) + eps_y[i])
        .collect();
    AttributeTable::new(n).with("Z", z)?.with("X", x)?.with("Y", y)
}

/// Case 3: case 2 with the roles of `σ̄X` and `Z` exchanged for `X` and
/// `σ̄Z`.
pub fn gen_case3(g: &Graph, cfg: &GenConfig) -> Result<AttributeTable> {
    cfg.validate(3)?;
    let n = g.n();
    let mut rng = start(cfg);
    let z = uniforms(&mut rng, n);
    let eps_x = noise(&mut rng, n, cfg.noise_sd);
    let eps_y = noise(&mut rng, n, cfg.noise_sd);
    let zbar = g.neighbor_means(&z);
    let x = binarize(&(0..n).map(|i| cfg.beta_c * zbar[i].powi(2) + eps_x[i]).collect::<Vec<_>>());
    let beta_d = match cfg.hypothesis {
        Hypothesis::Null => 0.0,
        Hypothesis::Alternate => cfg.beta_d,
    };
    let y = (0..n)
        .map(|i| beta_d * x[i].powi(2) + cfg.beta_c * zbar[i].powi(2) + eps_y[i])
        .collect();
    AttributeTable::new(n).with("Z", z)?.with("X", x)?.with("Y", y)
}

/// Case 4: each node's `Z` feeds its neighbors' treatments,
/// `X = bin(β_c·(σ̄Z)² + ε)`, and its own outcome `Y = β_c·Z² + ε`.
/// There is no `σ̄X → Y` term under either hypothesis.
pub fn gen_case4(g: &Graph, cfg: &GenConfig) -> Result<AttributeTable> {
    cfg.validate(4)?;
    let n = g.n();
    let mut rng = start(cfg);
    let z = uniforms(&mut rng, n);
    let eps_x = noise(&mut rng, n, cfg.noise_sd);
    let eps_y = noise(&mut rng, n, cfg.noise_sd);
    let zbar = g.neighbor_means(&z);
    let x = binarize(&(0..n).map(|i| cfg.beta_c * zbar[i].powi(2) + eps_x[i]).collect::<Vec<_>>());
    let y = (0..n).map(|i| cfg.beta_c * z[i].powi(2) + eps_y[i]).collect();
    AttributeTable::new(n).with("Z", z)?.with("X", x)?.with("Y", y)
}

/// Dispatches on `cfg.case`.
pub fn generate(g: &Graph, cfg: &GenConfig) -> Result<AttributeTable> {
    match cfg.case {
        1 => gen_case1(g, cfg),
        2 => gen_case2(g, cfg),
        3 => gen_case3(g, cfg),
        4 => gen_case4(g, cfg),
        other => Err(NirdError::BadParams(format!("case must be 1..=4, got {other}"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionConfig {
    pub p_init: f64,
    pub steps: usize,
    pub seed: u64,
}

impl Default for DiffusionConfig {
    fn default() -> Self {
        DiffusionConfig {
            p_init: 0.1,
            steps: 1,
            seed: 0,
        }
    }
}

/// Runs `steps` synchronous linear-threshold updates from `initial`.
///
/// Each step maps the previous treatments `x` to
/// `x'ᵢ = 1(σ̄xᵢ > Tᵢ)` and the outcome `yᵢ = 1(σ̄xᵢ > Tᵢ)` from the same
/// previous-step treatments, so the returned `(x, y)` are the treatment
/// and outcome of the final step.
pub fn simulate_threshold(
    g: &Graph,
    thresholds: &[f64],
    initial: &[f64],
    steps: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = g.n();
    if thresholds.len() != n || initial.len() != n {
        return Err(NirdError::mismatch("thresholds and initial state need one entry per node"));
    }
    if steps == 0 {
        return Err(NirdError::BadParams("diffusion needs at least one step".into()));
    }
    let mut x = initial.to_vec();
    let mut y = vec![0.0; n];
    for _ in 0..steps {
        let means = g.neighbor_means(&x);
        for i in 0..n {
            y[i] = if means[i] > thresholds[i] { 1.0 } else { 0.0 };
        }
        x.copy_from_slice(&y);
    }
    Ok((x, y))
}

/// Linear-threshold diffusion with `Tᵢ ~ U(0,1)` and initial treatments
/// `Bernoulli(p_init)`. Returns columns `X` (final treatment), `Y`
/// (outcome) and `T` (thresholds).
pub fn diffuse_linear_threshold(g: &Graph, cfg: &DiffusionConfig) -> Result<AttributeTable> {
    if !(cfg.p_init > 0.0 && cfg.p_init < 1.0) || cfg.steps == 0 {
        return Err(NirdError::BadParams(format!(
            "diffusion needs 0 < p_init < 1 and steps >= 1, got {cfg:?}"
        )));
    }
    let n = g.n();
    let mut rng = substream(cfg.seed, &[stream::ATTRIBUTES, 0xd1ff]);
    let thresholds = uniforms(&mut rng, n);
    let initial: Vec<f64> = (0..n)
        .map(|_| if rng.random::<f64>() < cfg.p_init { 1.0 } else { 0.0 })
        .collect();
    let (x, y) = simulate_threshold(g, &thresholds, &initial, cfg.steps)?;
    AttributeTable::new(n).with("X", x)?.with("Y", y)?.with("T", thresholds)
}
