//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use nird_bench::studies::time_test;
use nird_bench::trials::{run_synthetic_trials, type1, type2};
use nird_bench::{run_grid, GridConfig, NoiseMode, SyntheticCell, TestKind, TestParams, TrialRecord};
use nird_core::attrgen;
use nird_core::graph::{generate_ba, generate_er};
use nird_core::kernels::{median_bandwidth, points, rbf_gram, relational_gram};
use nird_core::marginal::hsic_exact;
use nird_core::nalgebra::DMatrix;
use nird_core::rff::{relational_rff_mean, rff_map, sample_frequencies, RffConfig};
use nird_core::{run_test, GenConfig, Graph, GraphModel, Hypothesis, Method, TestOptions, TestSpec};

const MASTER_SEED: u64 = 0;
const TRIALS: usize = 100;

struct Outcome {
    pass: bool,
    detail: String,
}

fn networks() -> [GraphModel; 2] {
    ["ba:3".parse().unwrap(), "er:0.02".parse().unwrap()]
}

fn cell(case: u8, network: GraphModel, beta_d: f64) -> SyntheticCell {
    SyntheticCell {
        case,
        network,
        n: 100,
        beta_d,
        noise: NoiseMode::Fixed,
    }
}

fn trials(case: u8, network: GraphModel, beta_d: f64, hyp: Hypothesis) -> Vec<TrialRecord> {
    run_synthetic_trials(&cell(case, network, beta_d), hyp, TRIALS, &TestParams::default(), MASTER_SEED).unwrap()
}

/// Null trials for each case on both networks, shared by criteria 1, 3 and 7.
struct NullPools {
    by_case: Vec<(u8, GraphModel, Vec<TrialRecord>)>,
}

impl NullPools {
    fn build() -> Self {
        let mut by_case = Vec::new();
        for case in 1..=4 {
            for net in networks() {
                by_case.push((case, net, trials(case, net, 0.5, Hypothesis::Null)));
            }
        }
        NullPools { by_case }
    }

    fn get(&self, case: u8, net: GraphModel) -> &[TrialRecord] {
        &self.by_case.iter().find(|(c, n, _)| *c == case && *n == net).unwrap().2
    }
}

fn criterion1(pools: &NullPools) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for case in 1..=3 {
        for net in networks() {
            let t1 = type1(pools.get(case, net)).unwrap();
            pass &= (0.0..=0.10).contains(&t1);
            parts.push(format!("case{case}/{net}={t1:.2}"));
        }
    }
    Outcome {
        pass,
        detail: format!("Type I in [0, 0.10]: {}", parts.join(" ")),
    }
}

fn criterion2() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for case in 1..=2 {
        for net in networks() {
            let t2: Vec<f64> = [0.1, 0.5, 0.9]
                .iter()
                .map(|&b| type2(&trials(case, net, b, Hypothesis::Alternate)).unwrap())
                .collect();
            pass &= t2[0] >= t2[1] && t2[1] >= t2[2] && t2[2] <= t2[0] - 0.3;
            parts.push(format!("case{case}/{net}={:.2}>{:.2}>{:.2}", t2[0], t2[1], t2[2]));
        }
    }
    Outcome {
        pass,
        detail: format!("Type II over beta_d 0.1/0.5/0.9: {}", parts.join(" ")),
    }
}

fn criterion3(pools: &NullPools) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for net in networks() {
        let t1 = type1(pools.get(4, net)).unwrap();
        pass &= t1 <= 0.10;
        let mut t2s = Vec::new();
        for beta in [0.1, 0.5, 0.9] {
            let t2 = type2(&trials(4, net, beta, Hypothesis::Alternate)).unwrap();
            pass &= t2 >= 0.85;
            t2s.push(format!("{t2:.2}"));
        }
        parts.push(format!("{net}: type1={t1:.2} type2={}", t2s.join("/")));
    }
    Outcome {
        pass,
        detail: format!("case 4 Type II >= 0.85: {}", parts.join("; ")),
    }
}

fn criterion4() -> Outcome {
    let start = Instant::now();
    let cfg = GridConfig {
        study: "diffusion".into(),
        master_seed: MASTER_SEED,
        trials: 50,
        graph_model: "er:0.011".into(),
        graph_nodes: 4000,
        p_init: vec![0.1],
        steps: vec![1, 20],
        sample_sizes: vec![2000],
        ..GridConfig::default()
    };
    let report = run_grid(&cfg.validate().unwrap()).unwrap();
    let by_steps = |s: usize| report.rows.iter().find(|r| r.steps == Some(s)).unwrap().type2.unwrap();
    let (t1, t20) = (by_steps(1), by_steps(20));
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: t20 <= t1 - 0.4 && secs <= 900.0,
        detail: format!("Type II steps=1 {t1:.2}, steps=20 {t20:.2}; {secs:.0}s"),
    }
}

fn uniform_column(n: usize, seed: u64) -> Vec<f64> {
    let g = generate_er(n.max(2), 0.5, seed).unwrap();
    attrgen::generate(&g, &GenConfig::new(2, Hypothesis::Null, 0.0, seed)).unwrap().get("Z").unwrap().to_vec()
}

fn criterion5() -> Outcome {
    let mut monotone = 0;
    let mut mean_err = [0.0; 3];
    for seed in 0..20u64 {
        let g = generate_ba(30, 2, seed).unwrap();
        let xs = uniform_column(30, seed);
        let bw = median_bandwidth(&points(&xs)).unwrap();
        let exact = relational_gram(&rbf_gram(&points(&xs), bw).unwrap(), &g).unwrap();
        let err: Vec<f64> = [8, 64, 512]
            .iter()
            .map(|&d| {
                let f = sample_frequencies(&RffConfig { num_features: d, bandwidth: bw, seed }, 1).unwrap();
                let z = relational_rff_mean(&rff_map(&points(&xs), &f).unwrap(), &g).unwrap();
                (z.gram() - &exact).amax()
            })
            .collect();
        if err[0] > err[1] && err[1] > err[2] {
            monotone += 1;
        }
        for (m, e) in mean_err.iter_mut().zip(&err) {
            *m += e / 20.0;
        }
    }
    let decreasing = mean_err[0] > mean_err[1] && mean_err[1] > mean_err[2];

    let spec: TestSpec = "rel(X) _||_ Y".parse().unwrap();
    let mut agree = 0;
    for trial in 0..50u64 {
        let hyp = if trial < 25 { Hypothesis::Null } else { Hypothesis::Alternate };
        let g = generate_ba(100, 3, 1000 + trial).unwrap();
        let t = attrgen::generate(&g, &GenConfig::new(1, hyp, 0.9, 1000 + trial)).unwrap();
        let decide = |method, num_features| {
            let opts = TestOptions {
                method,
                num_features,
                seed: trial,
                ..TestOptions::default()
            };
            run_test(&g, &t, &spec, &opts).unwrap().reject
        };
        if decide(Method::Exact, None) == decide(Method::Rff, Some(512)) {
            agree += 1;
        }
    }
    Outcome {
        pass: decreasing && agree >= 45,
        detail: format!(
            "mean max-entry error over 20 seeds {:.3}/{:.3}/{:.3} (strictly decreasing on {monotone}/20 single draws); \
             decisions agree on {agree}/50",
            mean_err[0], mean_err[1], mean_err[2]
        ),
    }
}

fn v_statistic(k: &DMatrix<f64>, l: &DMatrix<f64>) -> f64 {
    let n = k.nrows();
    let mut perms = Vec::new();
    for p in 0..256usize {
        let idx = [p & 3, (p >> 2) & 3, (p >> 4) & 3, (p >> 6) & 3];
        if (0..4).all(|i| (i + 1..4).all(|j| idx[i] != idx[j])) {
            perms.push(idx);
        }
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            for q in 0..n {
                for r in 0..n {
                    let idx = [i, j, q, r];
                    for p in &perms {
                        let (t, u, v, w) = (idx[p[0]], idx[p[1]], idx[p[2]], idx[p[3]]);
                        total += (k[(t, u)] * l[(t, u)] + k[(t, u)] * l[(v, w)] - 2.0 * k[(t, u)] * l[(t, v)]) / 24.0;
                    }
                }
            }
        }
    }
    total / (n as f64).powi(4)
}

fn criterion6() -> Outcome {
    let mut worst_v: f64 = 0.0;
    for seed in 0..5u64 {
        let x = uniform_column(10, seed);
        let y = uniform_column(10, seed + 50);
        let k = rbf_gram(&points(&x), 0.3).unwrap().values;
        let l = rbf_gram(&points(&y), 0.4).unwrap().values;
        let fast = hsic_exact(&k, &l).unwrap();
        let slow = v_statistic(&k, &l);
        worst_v = worst_v.max((fast - slow).abs() / slow.abs());
    }
    let mut worst_r: f64 = 0.0;
    for seed in 0..5u64 {
        let g: Graph = generate_er(12, 0.3, seed).unwrap();
        let k = rbf_gram(&points(&uniform_column(12, seed)), 0.25).unwrap();
        let fast = relational_gram(&k, &g).unwrap();
        for i in 0..12 {
            for j in 0..12 {
                let (ni, nj) = (g.neighbors(i).unwrap(), g.neighbors(j).unwrap());
                let mut s = 0.0;
                for &m in ni {
                    for &p in nj {
                        s += k.values[(m, p)];
                    }
                }
                s /= (ni.len() * nj.len()) as f64;
                worst_r = worst_r.max((fast[(i, j)] - s).abs());
            }
        }
    }
    Outcome {
        pass: worst_v <= 1e-8 && worst_r <= 1e-10,
        detail: format!("V-statistic rel. error {worst_v:.1e}; relational Gram abs. error {worst_r:.1e}"),
    }
}

/// `P(K > x)` for the Kolmogorov distribution.
fn kolmogorov_tail(x: f64) -> f64 {
    let s: f64 = (1..=100)
        .map(|k| {
            let k = k as f64;
            let sign = if k as i64 % 2 == 1 { 2.0 } else { -2.0 };
            sign * (-2.0 * k * k * x * x).exp()
        })
        .sum();
    s.clamp(0.0, 1.0)
}

fn ks_uniform_pvalue(p: &[f64]) -> f64 {
    let mut p = p.to_vec();
    p.sort_by(f64::total_cmp);
    let n = p.len() as f64;
    let d = p
        .iter()
        .enumerate()
        .map(|(i, &v)| (v - i as f64 / n).max((i + 1) as f64 / n - v))
        .fold(0.0, f64::max);
    kolmogorov_tail(d * n.sqrt())
}

fn criterion7(pools: &NullPools) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for case in 1..=4 {
        let p: Vec<f64> = networks().iter().flat_map(|&net| pools.get(case, net).iter().map(|r| r.p_value)).collect();
        let m = p.len() as f64;
        let mut rates = Vec::new();
        for alpha in [0.01, 0.05, 0.1] {
            let rate = p.iter().filter(|&&v| v <= alpha).count() as f64 / m;
            pass &= rate <= alpha + 3.0 * (alpha * (1.0 - alpha) / m).sqrt();
            rates.push(format!("{rate:.3}"));
        }
        let ks = ks_uniform_pvalue(&p);
        pass &= ks > 0.01;
        parts.push(format!("case{case}: {} KS p={ks:.3}", rates.join("/")));
    }
    Outcome {
        pass,
        detail: format!("rejection at alpha 0.01/0.05/0.1 over 200 nulls: {}", parts.join("; ")),
    }
}

fn median_ms(n: usize, method: Method) -> f64 {
    let (_, records) = time_test(n, TestKind::Marginal, method, 3, &TestParams::default(), MASTER_SEED).unwrap();
    let mut t: Vec<f64> = records.iter().map(|r| r.runtime_ms).collect();
    t.sort_by(f64::total_cmp);
    t[t.len() / 2]
}

fn criterion8() -> Outcome {
    let large = median_ms(10_000, Method::Rff) / 1e3;
    let exact = median_ms(500, Method::Exact) / median_ms(100, Method::Exact);
    let rff = median_ms(500, Method::Rff) / median_ms(100, Method::Rff);
    Outcome {
        pass: large < 60.0 && exact > rff,
        detail: format!("RFF n=10000 {large:.1}s; t(500)/t(100) exact {exact:.1}, RFF {rff:.1}"),
    }
}

fn nird(args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_nird"))
        .args(args)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn run_all_commands(dir: &Path) -> bool {
    let p = |name: &str| dir.join(name).to_string_lossy().into_owned();
    let cfg = dir.join("grid.cfg");
    fs::write(
        &cfg,
        "study = \"dependence\"\ntrials = 6\npermutations = 99\nn = 60\ncases = [1, 2]\nbeta_d = [0.9]\n",
    )
    .unwrap();
    nird(&["generate", "--case", "2", "--n", "120", "--seed", "7", "--edges-out", &p("edges.txt"), "--attrs-out", &p("attrs.csv")])
        && nird(&[
            "test", "--edges", &p("edges.txt"), "--attrs", &p("attrs.csv"), "--spec", "rel(X) _||_ Y | Z", "--seed", "7",
            "--out", &p("result.json"),
        ])
        && nird(&[
            "test", "--edges", &p("edges.txt"), "--attrs", &p("attrs.csv"), "--spec", "rel(X) _||_ Y", "--method",
            "exact", "--seed", "7", "--out", &p("exact.json"),
        ])
        && nird(&[
            "diffuse", "--model", "er:0.02", "--n", "500", "--steps", "5", "--seed", "7", "--edges-out",
            &p("diffusion_edges.txt"), "--attrs-out", &p("diffusion.csv"),
        ])
        && nird(&["bench", "--config", &cfg.to_string_lossy(), "--out", &p("report.csv")])
}

fn criterion9() -> Outcome {
    let a = tempfile::TempDir::new().unwrap();
    let b = tempfile::TempDir::new().unwrap();
    if !(run_all_commands(a.path()) && run_all_commands(b.path())) {
        return Outcome {
            pass: false,
            detail: "a command failed".into(),
        };
    }
    let files = [
        "edges.txt",
        "attrs.csv",
        "result.json",
        "exact.json",
        "diffusion_edges.txt",
        "diffusion.csv",
        "report.csv",
    ];
    let differing: Vec<&str> = files
        .iter()
        .copied()
        .filter(|f| fs::read(a.path().join(f)).unwrap() != fs::read(b.path().join(f)).unwrap())
        .collect();
    Outcome {
        pass: differing.is_empty(),
        detail: if differing.is_empty() {
            format!("{} output files identical across reruns", files.len())
        } else {
            format!("differing: {}", differing.join(", "))
        },
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    // `cargo test -- --list` and similar probes should not run the suite.
    if args.iter().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let only: Option<usize> = std::env::var("NIRD_ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let wants = |k: usize| only.is_none_or(|o| o == k);

    let pools = (wants(1) || wants(3) || wants(7)).then(NullPools::build);
    let checks: [(usize, &str, Box<dyn Fn() -> Outcome + '_>); 9] = [
        (1, "calibration", Box::new(|| criterion1(pools.as_ref().unwrap()))),
        (2, "power trend", Box::new(criterion2)),
        (3, "case-4 sanity", Box::new(|| criterion3(pools.as_ref().unwrap()))),
        (4, "diffusion trend", Box::new(criterion4)),
        (5, "RFF fidelity", Box::new(criterion5)),
        (6, "oracle equivalence", Box::new(criterion6)),
        (7, "null p-value validity", Box::new(|| criterion7(pools.as_ref().unwrap()))),
        (8, "scalability shape", Box::new(criterion8)),
        (9, "determinism", Box::new(criterion9)),
    ];
    let mut failed = 0;
    for (k, name, check) in &checks {
        if !wants(*k) {
            continue;
        }
        let start = Instant::now();
        let o = check();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("{verdict} criterion {k} ({name}): {} [{:.0}s]", o.detail, start.elapsed().as_secs_f64());
        if !o.pass {
            failed += 1;
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
