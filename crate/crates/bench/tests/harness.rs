use nird_bench::trials::{rejection_rate, run_diffusion_trials, run_synthetic_trials, synthetic_data, type1, type2, DiffusionCell};
use nird_bench::{run_grid, BenchError, ErrorReport, GridConfig, NoiseMode, SyntheticCell, TestParams};
use nird_core::graph::generate_er;
use nird_core::Hypothesis;

fn params() -> TestParams {
    TestParams {
        permutations: 49,
        ..TestParams::default()
    }
}

fn cell(case: u8, beta_d: f64) -> SyntheticCell {
    SyntheticCell {
        case,
        network: "ba:2".parse().unwrap(),
        n: 50,
        beta_d,
        noise: NoiseMode::Fixed,
    }
}

#[test]
fn trials_are_independent_of_scheduling() {
    let c = cell(2, 0.9);
    let all = run_synthetic_trials(&c, Hypothesis::Alternate, 6, &params(), 3).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let serial = pool.install(|| run_synthetic_trials(&c, Hypothesis::Alternate, 6, &params(), 3).unwrap());
    for (a, b) in all.iter().zip(&serial) {
        assert_eq!((a.trial, a.statistic.to_bits(), a.p_value), (b.trial, b.statistic.to_bits(), b.p_value));
    }
}

#[test]
fn every_trial_gets_a_fresh_graph() {
    let c = cell(1, 0.5);
    let (g0, _) = synthetic_data(&c, Hypothesis::Null, 0, 0).unwrap();
    let (g1, _) = synthetic_data(&c, Hypothesis::Null, 1, 0).unwrap();
    let (g0_other_seed, _) = synthetic_data(&c, Hypothesis::Null, 0, 1).unwrap();
    assert_ne!(g0, g1);
    assert_ne!(g0, g0_other_seed);
}

#[test]
fn null_data_do_not_depend_on_beta() {
    let (ga, ta) = synthetic_data(&cell(3, 0.1), Hypothesis::Null, 2, 5).unwrap();
    let (gb, tb) = synthetic_data(&cell(3, 0.9), Hypothesis::Null, 2, 5).unwrap();
    assert_eq!(ga, gb);
    assert_eq!(ta, tb);
}

#[test]
fn rates_refuse_mixed_provenance() {
    let null = run_synthetic_trials(&cell(1, 0.9), Hypothesis::Null, 3, &params(), 0).unwrap();
    let alt = run_synthetic_trials(&cell(1, 0.9), Hypothesis::Alternate, 3, &params(), 0).unwrap();
    assert!(type1(&null).is_ok());
    assert!(type2(&alt).is_ok());
    assert!(matches!(type1(&alt), Err(BenchError::Provenance(_))));
    let mixed: Vec<_> = null.iter().chain(&alt).cloned().collect();
    assert!(matches!(rejection_rate(&mixed, Hypothesis::Null), Err(BenchError::Provenance(_))));
    let t2 = type2(&alt).unwrap();
    assert_eq!(t2, 1.0 - rejection_rate(&alt, Hypothesis::Alternate).unwrap());
}

#[test]
fn diffusion_trials_sample_the_requested_size() {
    let base = generate_er(300, 0.03, 1).unwrap();
    let c = DiffusionCell {
        p_init: 0.1,
        steps: 2,
        sample_size: 120,
    };
    let records = run_diffusion_trials(&base, &c, 3, &params(), 0).unwrap();
    assert_eq!(records.len(), 3);
    assert!(records.iter().all(|r| r.hypothesis == Hypothesis::Alternate));
}

fn small_grid(study: &str, seed: u64) -> GridConfig {
    GridConfig {
        study: study.into(),
        master_seed: seed,
        trials: 4,
        permutations: 19,
        n: 40,
        cases: vec![1, 4],
        beta_d: vec![0.5],
        networks: vec!["er:0.1".into()],
        graph_nodes: 150,
        graph_model: "er:0.05".into(),
        steps: vec![1],
        sample_sizes: vec![80],
        ..GridConfig::default()
    }
}

#[test]
fn reports_are_reproducible_and_round_trip() {
    for study in ["dependence", "network", "noise", "diffusion"] {
        let grid = small_grid(study, 9).validate().unwrap();
        let a = run_grid(&grid).unwrap();
        let b = run_grid(&grid).unwrap();
        assert_eq!(a.to_csv_string(), b.to_csv_string(), "{study}");
        assert_eq!(ErrorReport::read_csv(a.to_csv_string().as_bytes()).unwrap(), a);
        for r in &a.rows {
            assert_eq!(r.seed, 9);
            for rate in [r.type1, r.type2].into_iter().flatten() {
                // counts over 4 trials
                assert_eq!((rate * 4.0).fract(), 0.0);
            }
        }
    }
}

#[test]
fn master_seed_changes_results() {
    let a = run_grid(&small_grid("dependence", 1).validate().unwrap()).unwrap();
    let b = run_grid(&small_grid("dependence", 2).validate().unwrap()).unwrap();
    let stats = |r: &ErrorReport| r.rows.iter().map(|x| x.mean_stat).collect::<Vec<_>>();
    assert_ne!(stats(&a), stats(&b));
}

#[test]
fn timing_is_opt_in() {
    let mut cfg = small_grid("dependence", 0);
    cfg.cases = vec![1];
    let plain = run_grid(&cfg.clone().validate().unwrap()).unwrap();
    assert!(plain.rows.iter().all(|r| r.mean_runtime_ms.is_none()));
    cfg.timing = true;
    let timed = run_grid(&cfg.validate().unwrap()).unwrap();
    assert!(timed.rows.iter().all(|r| r.mean_runtime_ms.unwrap() > 0.0));
}

#[test]
fn report_embeds_the_configuration() {
    let cfg = small_grid("dependence", 4);
    let report = run_grid(&cfg.clone().validate().unwrap()).unwrap();
    let toml: String = report.comments.iter().skip(1).map(|c| format!("{c}\n")).collect();
    assert_eq!(GridConfig::from_toml(&toml).unwrap(), cfg);
}
