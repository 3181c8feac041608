use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dpsc_core::bounds::{bound_cor1, bound_cor2, bound_nonprivate, bound_thm2, bound_thm4, BoundInputs};
use dpsc_core::datagen::{generate_linear_panel, LatentModelSpec};
use dpsc_core::io::{write_panel_csv, DatasetDocument};
use dpsc_harness::report::{fmt_f64, write_outputs};
use dpsc_harness::sweep::split_budget;
use dpsc_harness::{run_single, run_sweep, Algorithm, HarnessError, Result, SingleRun, SweepConfig};

#[derive(Parser)]
#[command(name = "dpsc", version, about = "Differentially private synthetic control experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep described by a JSON config.
    Sweep(SweepArgs),
    /// Run one algorithm once on one dataset and print the record as JSON.
    Run(RunArgs),
    /// Print theoretical RMSE bounds over a grid as CSV.
    Bounds(BoundsArgs),
    /// Generate a synthetic dataset.
    Gen(GenArgs),
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config's `output`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    Nonprivate,
    Out,
    Obj,
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    t0: usize,
    /// Post-intervention periods.
    #[arg(long, default_value_t = 3)]
    horizon: usize,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_enum)]
    algo: AlgoArg,
    #[command(flatten)]
    size: DataArgs,
    #[arg(long)]
    lambda: f64,
    /// Total budget, split into eps1 and eps2.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    #[arg(long, default_value_t = 0.5)]
    eps_split: f64,
    #[arg(long)]
    c: Option<f64>,
    /// Seed of the mechanism noise; a sweep record's `seed` column.
    #[arg(long)]
    seed: u64,
    /// Seed of the generated dataset; a sweep manifest's dataset seed.
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
    /// Read the dataset from a JSON document with ground truth instead.
    #[arg(long, conflicts_with = "data_seed")]
    data: Option<PathBuf>,
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    size: DataArgs,
    #[arg(long, value_delimiter = ',', required = true)]
    lambda: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    eps: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    #[arg(long, default_value_t = 0.5)]
    eps_split: f64,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    sigma2: f64,
    #[arg(long, default_value_t = 1.0)]
    s: f64,
    #[arg(long, default_value_t = 1.0)]
    psi: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    size: DataArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn sweep(args: SweepArgs) -> Result<()> {
    let mut cfg = SweepConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(reps) = args.reps {
        cfg.reps = reps;
    }
    let dir = args
        .out
        .or_else(|| cfg.output.clone())
        .ok_or_else(|| HarnessError::Config("no output directory: pass --out or set `output`".into()))?;
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads.unwrap_or(0))
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let out = pool.install(|| run_sweep(&cfg))?;
    for path in write_outputs(&dir, &cfg, &out)? {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn run(args: RunArgs) -> Result<()> {
    let model = LatentModelSpec::default();
    let (panel, target) = match &args.data {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
            let doc = DatasetDocument::from_json(&text)?;
            let target = doc
                .target_series()?
                .ok_or_else(|| HarnessError::Config(format!("{}: no target series", path.display())))?;
            (doc.panel()?, target)
        }
        None => {
            let DataArgs { n, t0, horizon } = args.size;
            let data = generate_linear_panel(n, t0, t0 + horizon, &model, args.data_seed)?;
            (data.panel, data.target)
        }
    };
    let algorithm = match args.algo {
        AlgoArg::Nonprivate => Algorithm::Nonprivate,
        AlgoArg::Out => Algorithm::DpscOut,
        AlgoArg::Obj => Algorithm::DpscObj,
    };
    let spec = SingleRun {
        algorithm,
        lambda: args.lambda,
        eps: args.eps,
        eps_split: args.eps_split,
        delta: args.delta,
        c: args.c,
    };
    let record = run_single(spec, &panel, &target, &model, args.seed)?;
    let text = serde_json::to_string_pretty(&record).map_err(|e| HarnessError::Config(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn bounds(args: BoundsArgs) -> Result<()> {
    let DataArgs { n, t0, horizon } = args.size;
    if n == 0 || t0 == 0 || horizon == 0 {
        return Err(HarnessError::Config("n, t0 and horizon must be positive".into()));
    }
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let io = |e| HarnessError::io("<stdout>", e);
    writeln!(out, "n,t0,T,lambda,eps1,eps2,delta,nonprivate,thm2,cor1,thm4,cor2,sample_size_ok").map_err(io)?;
    for &lambda in &args.lambda {
        for &eps in &args.eps {
            if !(lambda > 0.0 && eps > 0.0) {
                return Err(HarnessError::Config(format!("lambda={lambda}, eps={eps}: must be positive")));
            }
            let (eps1, eps2) = split_budget(eps, args.eps_split);
            let mut inp = BoundInputs::new(n, t0, t0 + horizon, lambda).with_budget(eps1, eps2, args.delta, args.c);
            inp.sigma2 = args.sigma2;
            inp.s = args.s;
            inp.psi = args.psi;
            let (cor1, ok) = bound_cor1(&inp);
            let (cor2, _) = bound_cor2(&inp);
            writeln!(
                out,
                "{n},{t0},{},{},{},{},{},{},{},{},{},{},{ok}",
                t0 + horizon,
                fmt_f64(lambda),
                fmt_f64(eps1),
                fmt_f64(eps2),
                fmt_f64(args.delta),
                fmt_f64(bound_nonprivate(&inp)),
                fmt_f64(bound_thm2(&inp)),
                fmt_f64(cor1),
                fmt_f64(bound_thm4(&inp)),
                fmt_f64(cor2),
            )
            .map_err(io)?;
        }
    }
    Ok(())
}

fn gen(args: GenArgs) -> Result<()> {
    let DataArgs { n, t0, horizon } = args.size;
    let model = LatentModelSpec::default();
    let data = generate_linear_panel(n, t0, t0 + horizon, &model, args.seed)?;
    let mut buf = Vec::new();
    match args.format {
        Format::Json => {
            buf = DatasetDocument::from_linear(&data, model, args.seed).to_json()?.into_bytes();
            buf.push(b'\n');
        }
        Format::Csv => write_panel_csv(&mut buf, &data.panel, Some(&data.target))?,
    }
    match &args.out {
        Some(path) => std::fs::write(path, buf).map_err(|e| HarnessError::io(path, e)),
        None => std::io::stdout().write_all(&buf).map_err(|e| HarnessError::io("<stdout>", e)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sweep(a) => sweep(a),
        Command::Run(a) => run(a),
        Command::Bounds(a) => bounds(a),
        Command::Gen(a) => gen(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dpsc: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
