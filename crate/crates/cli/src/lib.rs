//! Subcommands of the `nird` binary.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use nird_bench::{run_grid, ErrorReport, GridConfig};
use nird_core::attrgen::{self, DiffusionConfig, GenConfig};
use nird_core::graph::{read_edge_list, write_edge_list};
use nird_core::rng::{derive_seed, stream};
use nird_core::{
    run_test, AttributeTable, Graph, GraphGenConfig, GraphModel, Hypothesis, Method, TestOptions, TestResult, TestSpec,
};

#[derive(Debug, Parser)]
#[command(name = "nird", version, about = "Relational independence tests on graph data")]
pub struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "NIRD_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test an independence hypothesis on an edge list and attribute CSV.
    Test(TestArgs),
    /// Generate a synthetic network and attributes for one dependence case.
    Generate(GenerateArgs),
    /// Simulate linear-threshold diffusion on a network.
    Diffuse(DiffuseArgs),
    /// Run an experiment study from a grid config.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct TestArgs {
    /// Edge list: one `i j` pair per line, `#` comments.
    #[arg(long)]
    pub edges: PathBuf,
    /// Attribute CSV with a header row and one row per node.
    #[arg(long)]
    pub attrs: PathBuf,
    /// Hypothesis, e.g. `rel(X) _||_ Y | Z`.
    #[arg(long)]
    pub spec: String,
    /// Node count, when larger than the largest id in the edge list + 1.
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long, default_value = "rff")]
    pub method: Method,
    #[arg(long, default_value_t = 1000)]
    pub permutations: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Random frequencies per variable (default 20 marginal, 50 conditional).
    #[arg(long)]
    pub features: Option<usize>,
    /// Ridge penalty for conditional tests (default 1e-3 n).
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the JSON result to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Network family: `ba:M` or `er:P`.
    #[arg(long, default_value = "ba:3")]
    pub model: GraphModel,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// Dependence case, 1 to 4.
    #[arg(long, default_value_t = 1)]
    pub case: u8,
    /// `null` or `alternate`.
    #[arg(long, default_value = "alternate")]
    pub hypothesis: Hypothesis,
    #[arg(long, default_value_t = 0.5)]
    pub beta_d: f64,
    #[arg(long, default_value_t = 1.0)]
    pub beta_c: f64,
    #[arg(long, default_value_t = 1.0)]
    pub noise_sd: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub edges_out: PathBuf,
    #[arg(long)]
    pub attrs_out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DiffuseArgs {
    /// Edge list to diffuse on; a network is generated when absent.
    #[arg(long)]
    pub edges: Option<PathBuf>,
    #[arg(long, default_value = "er:0.011")]
    pub model: GraphModel,
    #[arg(long, default_value_t = 4000)]
    pub n: usize,
    #[arg(long, default_value_t = 0.1)]
    pub p_init: f64,
    #[arg(long, default_value_t = 5)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Where to write the generated network (only without `--edges`).
    #[arg(long)]
    pub edges_out: Option<PathBuf>,
    #[arg(long)]
    pub attrs_out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// TOML grid config.
    #[arg(long)]
    pub config: PathBuf,
    /// Output CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Replace desk-scale grids with the full-size grids.
    #[arg(long)]
    pub paper_scale: bool,
    /// Override the config's master seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    ))
}

fn load_graph(path: &Path, nodes: Option<usize>) -> Result<Graph> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    read_edge_list(BufReader::new(file), nodes).with_context(|| format!("in edge list {}", path.display()))
}

fn load_attributes(path: &Path) -> Result<AttributeTable> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    AttributeTable::read_csv(BufReader::new(file)).with_context(|| format!("in attribute file {}", path.display()))
}

pub fn cmd_test(args: &TestArgs) -> Result<TestResult> {
    let spec: TestSpec = args.spec.parse().context("in hypothesis")?;
    let g = load_graph(&args.edges, args.nodes)?;
    let table = load_attributes(&args.attrs)?;
    if table.n() != g.n() {
        bail!(
            "attribute file has {} rows but the edge list has {} nodes (use --nodes if trailing nodes are missing)",
            table.n(),
            g.n()
        );
    }
    let opts = TestOptions {
        method: args.method,
        num_permutations: args.permutations,
        alpha: args.alpha,
        num_features: args.features,
        lambda: args.lambda,
        seed: args.seed,
    };
    let result = run_test(&g, &table, &spec, &opts)?;
    if let Some(out) = &args.out {
        let mut w = create(out)?;
        serde_json::to_writer_pretty(&mut w, &result)?;
        writeln!(w)?;
        w.flush()?;
    }
    Ok(result)
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<(Graph, AttributeTable)> {
    let g = GraphGenConfig {
        model: args.model,
        n: args.n,
        seed: derive_seed(args.seed, &[stream::GRAPH]),
    }
    .generate()?;
    let cfg = GenConfig {
        case: args.case,
        hypothesis: args.hypothesis,
        beta_d: args.beta_d,
        beta_c: args.beta_c,
        noise_sd: args.noise_sd,
        seed: derive_seed(args.seed, &[stream::ATTRIBUTES]),
    };
    let table = attrgen::generate(&g, &cfg)?;
    let comments = vec![format!(
        "nird generate model={} n={} case={} hypothesis={} beta_d={} beta_c={} noise_sd={} seed={}",
        args.model,
        args.n,
        args.case,
        args.hypothesis.name(),
        args.beta_d,
        args.beta_c,
        args.noise_sd,
        args.seed
    )];
    let mut w = create(&args.edges_out)?;
    write_edge_list(&g, &mut w, &comments)?;
    w.flush()?;
    let mut w = create(&args.attrs_out)?;
    table.write_csv(&mut w, &comments)?;
    w.flush()?;
    Ok((g, table))
}

pub fn cmd_diffuse(args: &DiffuseArgs) -> Result<AttributeTable> {
    let (g, source) = match &args.edges {
        Some(path) => (load_graph(path, None)?, format!("edges={}", path.display())),
        None => {
            let g = GraphGenConfig {
                model: args.model,
                n: args.n,
                seed: derive_seed(args.seed, &[stream::GRAPH]),
            }
            .generate()?;
            (g, format!("model={} n={}", args.model, args.n))
        }
    };
    let cfg = DiffusionConfig {
        p_init: args.p_init,
        steps: args.steps,
        seed: derive_seed(args.seed, &[stream::ATTRIBUTES]),
    };
    let table = attrgen::diffuse_linear_threshold(&g, &cfg)?;
    let comments = vec![format!(
        "nird diffuse {source} p_init={} steps={} seed={}",
        args.p_init, args.steps, args.seed
    )];
    if let Some(path) = &args.edges_out {
        if args.edges.is_some() {
            bail!("--edges-out only applies to generated networks");
        }
        let mut w = create(path)?;
        write_edge_list(&g, &mut w, &comments)?;
        w.flush()?;
    }
    let mut w = create(&args.attrs_out)?;
    table.write_csv(&mut w, &comments)?;
    w.flush()?;
    Ok(table)
}

pub fn cmd_bench(args: &BenchArgs) -> Result<ErrorReport> {
    let text = fs::read_to_string(&args.config).with_context(|| format!("cannot read {}", args.config.display()))?;
    let mut cfg = GridConfig::from_toml(&text)?;
    if args.paper_scale {
        cfg = cfg.paper_scale()?;
    }
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    let grid = cfg.validate()?;
    let report = run_grid(&grid)?;
    let mut w = create(&args.out)?;
    report.write_csv(&mut w)?;
    w.flush()?;
    Ok(report)
}

fn fmt_rate(r: Option<f64>) -> String {
    r.map_or_else(|| "-".into(), |v| format!("{v:.2}"))
}

/// One line per report row, for the terminal.
pub fn summarize(report: &ErrorReport) -> String {
    let mut out = String::new();
    for r in &report.rows {
        let beta = r.beta_d.map_or_else(|| "-".into(), |b| b.to_string());
        let steps = r.steps.map_or_else(|| "-".into(), |s| s.to_string());
        let time = r.mean_runtime_ms.map_or_else(String::new, |t| format!(" time={t:.1}ms"));
        out.push_str(&format!(
            "{} case={} {}:{} n={} beta_d={} steps={} type1={} type2={}{}\n",
            r.experiment_id,
            r.case,
            r.model,
            r.model_param,
            r.n,
            beta,
            steps,
            fmt_rate(r.type1),
            fmt_rate(r.type2),
            time
        ));
    }
    out
}

/// Entry point shared by the binary and the tests.
pub fn run(cli: Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("cannot configure the thread pool")?;
    }
    match &cli.command {
        Command::Test(args) => {
            let result = cmd_test(args)?;
            println!("{}", serde_json::to_string_pretty(&result)?);
        }
        Command::Generate(args) => {
            let (g, _) = cmd_generate(args)?;
            eprintln!(
                "wrote {} ({} nodes, {} edges) and {}",
                args.edges_out.display(),
                g.n(),
                g.num_edges(),
                args.attrs_out.display()
            );
        }
        Command::Diffuse(args) => {
            let table = cmd_diffuse(args)?;
            let active = table.get("X")?.iter().filter(|&&x| x == 1.0).count();
            eprintln!("wrote {} ({active} of {} nodes active)", args.attrs_out.display(), table.n());
        }
        Command::Bench(args) => {
            let report = cmd_bench(args)?;
            print!("{}", summarize(&report));
            eprintln!("wrote {}", args.out.display());
        }
    }
    Ok(())
}
