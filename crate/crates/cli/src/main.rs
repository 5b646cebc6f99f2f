use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use sparse_recovery::combinatorial::{
    kautz_singleton, random_code_disjunct, random_list_disjunct, read_design, verify_list_disjunct, write_design,
    DEFAULT_C1, DEFAULT_C2, DEFAULT_C3, DEFAULT_VERIFY_BUDGET,
};
use sparse_recovery::heavy_hitters::{write_sketch, HhConfig, HhSketch};
use sparse_recovery::rng;
use sparse_recovery::util::round_up_pow2;
use sparse_recovery_cli::config::parse_const;
use sparse_recovery_cli::stream_io::{for_each_update, open_input, open_output, write_stream, write_truth};
use sparse_recovery_cli::workload::{generate_stream, DEFAULT_SKEW};
use sparse_recovery_cli::{run_experiment, Distribution, ExperimentConfig, PlacementKind, Scheme};

#[derive(Parser)]
#[command(name = "sparse-recovery", version, about = "Seeded experiments for sparse recovery and group testing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run seeded trials of one scheme and report per-trial CSV and a JSON summary.
    Run(RunArgs),
    /// Write a synthetic strict-turnstile stream as `index,delta` lines.
    GenStream(GenArgs),
    /// Build or check combinatorial designs.
    #[command(subcommand)]
    Design(DesignCommand),
    /// Feed an `index,delta` stream to a heavy-hitters sketch and print the heavy list.
    Hh(HhArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Both,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_enum)]
    scheme: Scheme,
    #[arg(long)]
    n: u64,
    #[arg(long)]
    k: u64,
    #[arg(long, default_value_t = 100)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// False positives per level (default k·log2 k for gt-noisy-fp).
    #[arg(long)]
    e0: Option<u64>,
    /// Total false negatives (default 2k for gt-voting-fn).
    #[arg(long)]
    e1: Option<u64>,
    #[arg(long, value_enum, default_value = "uniform")]
    placement: PlacementKind,
    #[arg(long, default_value_t = 0.5)]
    eps: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Constant override, repeatable.
    #[arg(long = "const", value_name = "KEY=VAL")]
    consts: Vec<String>,
    /// Output prefix: writes PREFIX.csv and/or PREFIX.json. Standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Stream for the hh schemes; every trial sketches it with a fresh seed.
    #[arg(long)]
    stream_file: Option<PathBuf>,
    /// Workload for the hh schemes when no stream file is given.
    #[arg(long, value_enum, default_value = "spikes+flat")]
    dist: Distribution,
    /// Exit 1 when the success rate is below this.
    #[arg(long, default_value_t = 0.95)]
    threshold: f64,
    /// Record wall time per trial (makes output run-dependent).
    #[arg(long)]
    timing: bool,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: u64,
    #[arg(long)]
    k: u64,
    #[arg(long, value_enum, default_value = "spikes+flat")]
    dist: Distribution,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_SKEW)]
    skew: f64,
    #[arg(long, default_value = "-")]
    out: PathBuf,
    /// Also write the final vector as `index,value` lines.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DesignKindArg {
    /// Kautz–Singleton k-disjunct.
    Ks,
    /// Random (k, k)-list-disjunct.
    List,
    /// Random-code k-disjunct.
    Code,
}

#[derive(Subcommand)]
enum DesignCommand {
    /// Build a design and write its snapshot.
    Build {
        #[arg(long, value_enum)]
        kind: DesignKindArg,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        k: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exhaustively check a snapshot for (k, list)-list-disjunctness (list 0: k-disjunct).
    Verify {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        k: u64,
        #[arg(long, default_value_t = 0)]
        list: u64,
    },
}

#[derive(Args)]
struct HhArgs {
    #[arg(long)]
    n: u64,
    #[arg(long)]
    k: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `-` reads standard input.
    #[arg(long, default_value = "-")]
    stream_file: PathBuf,
    /// Print `index,estimate` and drop entries whose estimate is below the threshold.
    #[arg(long)]
    estimates: bool,
    /// Save the sketch state after the stream.
    #[arg(long)]
    snapshot: Option<PathBuf>,
}

/// Failure of the configuration rather than of the experiment.
struct UsageError(anyhow::Error);

fn usage(e: anyhow::Error) -> UsageError {
    UsageError(e)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::GenStream(args) => cmd_gen(args).map(|_| true),
        Command::Design(cmd) => cmd_design(cmd),
        Command::Hh(args) => cmd_hh(args).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(UsageError(e)) => {
            eprintln!("error: {e:#}");
            eprintln!("{}", Cli::command().render_usage());
            ExitCode::from(2)
        }
    }
}

fn config_from(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::new(args.scheme, args.n, args.k)?.trials(args.trials).seed(args.seed);
    cfg.e0 = args.e0;
    cfg.e1 = args.e1;
    cfg.placement = args.placement;
    cfg.eps = args.eps;
    cfg.delta = args.delta;
    cfg.alpha = args.alpha;
    cfg.dist = args.dist;
    cfg.stream_file = args.stream_file.clone();
    cfg.timing = args.timing;
    cfg.jobs = args.jobs;
    for c in &args.consts {
        let (key, value) = parse_const(c)?;
        cfg.consts.insert(key, value);
    }
    if !(0.0..=1.0).contains(&args.threshold) {
        bail!("--threshold must lie in [0, 1]");
    }
    if args.jobs == Some(0) {
        bail!("--jobs must be positive");
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_run(args: RunArgs) -> Result<bool, UsageError> {
    let cfg = config_from(&args).map_err(usage)?;
    let report = run_experiment(&cfg).map_err(usage)?;
    let write = |ext: &str, body: &dyn Fn(&mut dyn Write) -> Result<()>| -> Result<()> {
        let path = match &args.out {
            Some(prefix) => prefix.with_extension(ext),
            None => PathBuf::from("-"),
        };
        let mut w = open_output(&path)?;
        body(&mut *w)?;
        w.flush()?;
        Ok(())
    };
    let emit = || -> Result<()> {
        if matches!(args.format, Format::Csv | Format::Both) {
            write("csv", &|w| report.write_csv(w))?;
        }
        if matches!(args.format, Format::Json | Format::Both) {
            write("json", &|w| Ok(writeln!(w, "{}", report.summary_json())?))?;
        }
        Ok(())
    };
    emit().map_err(usage)?;
    if cfg.scheme == Scheme::Verify {
        for r in &report.records {
            eprintln!("seed {}: {}", r.seed, if r.success { "PASS" } else { "FAIL" });
        }
    }
    let s = &report.summary;
    eprintln!(
        "{} n={} k={} trials={} success_rate={:.4} list_p50={} median_inserts={} rows={}",
        cfg.scheme.name(),
        cfg.n,
        cfg.k,
        cfg.trials,
        s.success_rate,
        s.list_size.p50,
        s.median_inserts,
        s.median_rows
    );
    Ok(s.success_rate >= args.threshold)
}

fn cmd_gen(args: GenArgs) -> Result<(), UsageError> {
    let run = || -> Result<()> {
        if args.k == 0 || args.k > args.n {
            bail!("need 1 <= k <= n");
        }
        let (k, n) = round_up_pow2(args.k, args.n);
        let mut r = rng::stream(args.seed, 0, 0);
        let (stream, x) = generate_stream(n, k, args.dist, args.skew, &mut r)?;
        write_stream(open_output(&args.out)?, &stream)?;
        if let Some(path) = &args.truth {
            write_truth(open_output(path)?, &x)?;
        }
        Ok(())
    };
    run().map_err(usage)
}

fn cmd_design(cmd: DesignCommand) -> Result<bool, UsageError> {
    match cmd {
        DesignCommand::Build { kind, n, k, seed, out } => {
            let d = match kind {
                DesignKindArg::Ks => kautz_singleton(k, n),
                DesignKindArg::List => random_list_disjunct(k, n, DEFAULT_C1, seed),
                DesignKindArg::Code => random_code_disjunct(k, n, DEFAULT_C2, DEFAULT_C3, seed),
            }
            .context("building design")
            .map_err(usage)?;
            write_design(&d, &out).with_context(|| format!("writing {}", out.display())).map_err(usage)?;
            eprintln!("wrote {} ({} rows, {} columns)", out.display(), d.rows(), d.n());
            Ok(true)
        }
        DesignCommand::Verify { input, k, list } => {
            let d = read_design(&input).with_context(|| format!("reading {}", input.display())).map_err(usage)?;
            let ok = verify_list_disjunct(&d, k, list, DEFAULT_VERIFY_BUDGET).map_err(|e| usage(e.into()))?;
            println!("{}: {}", input.display(), if ok { "PASS" } else { "FAIL" });
            Ok(ok)
        }
    }
}

fn cmd_hh(args: HhArgs) -> Result<(), UsageError> {
    let run = || -> Result<()> {
        if args.k == 0 || args.k > args.n {
            bail!("need 1 <= k <= n");
        }
        let config = HhConfig { estimates: args.estimates, ..HhConfig::default() };
        let mut sketch = HhSketch::new(args.k, args.n, args.seed, config)?;
        let count = for_each_update(open_input(&args.stream_file)?, |u| Ok(sketch.apply(u)?))?;
        let mut out = open_output(&PathBuf::from("-"))?;
        if args.estimates {
            for (i, e) in sketch.query_with_estimates()? {
                writeln!(out, "{i},{e}")?;
            }
        } else {
            for i in sketch.query() {
                writeln!(out, "{i}")?;
            }
        }
        out.flush()?;
        if let Some(path) = &args.snapshot {
            write_sketch(&sketch, path)?;
        }
        eprintln!("{count} updates, norm {}, threshold {}", sketch.norm(), sketch.threshold());
        Ok(())
    };
    run().map_err(usage)
}
