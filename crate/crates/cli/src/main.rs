// SPDX-License-Identifier: Apache-2.0

//! `delta-interp`: run transfer experiments, sweep CM capacity, verify the
//! error bounds, and do δ/γ arithmetic.
//!
//! Exit status: 0 success, 1 usage or config error, 2 runtime failure,
//! 3 bound violation.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use delta_interp_core::bounds::{self, VerifyOptions};
use delta_interp_core::experiment::{self, ExperimentConfig};
use delta_interp_core::io::{self, BlobParams, CsvSchema, CurveParams, LabelMapping};
use delta_interp_core::metrics;
use delta_interp_core::serial;
use delta_interp_core::Error;

#[derive(Parser)]
#[command(name = "delta-interp", version, about = "Confidence-weighted transfer and (δ, γ) interpretability")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the transfer pipeline over seeds; writes report.json and per_seed.csv.
    Run(RunArgs),
    /// Sweep a CM hyperparameter; writes sweep.csv and sweep.json.
    Sweep(RunArgs),
    /// Check the error bounds on random finite domains.
    VerifyBounds(VerifyArgs),
    /// δ from two errors, or δ and γ from four.
    Delta(DeltaArgs),
    /// Write a synthetic dataset as CSV.
    GenData(GenArgs),
    /// Expand special-value codes of a CSV table.
    FicoExpand(FicoArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated seeds; overrides the config.
    #[arg(long, value_delimiter = ',', alias = "seed")]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory; overrides the config (default `out`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 100)]
    instances: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the JSON summary here as well as to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Multiply every right-hand side before comparing (negative control).
    #[arg(long, default_value_t = 1.0, hide = true)]
    rhs_scale: f64,
}

#[derive(Args)]
struct DeltaArgs {
    /// `e_before e_after`, or `e_tm_test e_tm_robust e_tmI_test e_tmI_robust`.
    #[arg(num_args = 2..=4, required = true, allow_negative_numbers = true)]
    values: Vec<f64>,
    /// Inputs are accuracies; errors are `1 - accuracy`.
    #[arg(long)]
    accuracy: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Curve,
    Blobs,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: GenKind,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    noise_fraction: f64,
    #[arg(long, default_value_t = io::synth::DEFAULT_CURVE_FREQUENCY)]
    curve_frequency: f64,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 2.0)]
    separation: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FicoArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    label: String,
    #[arg(long, default_value_t = ',')]
    delimiter: char,
}

enum Failure {
    Usage(String),
    Runtime(String),
    Violation(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Parse { .. } | Error::InvalidArgument(_) | Error::InvalidHyperparam { .. } => {
                Failure::Usage(e.to_string())
            }
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn load_config(args: &RunArgs) -> Result<(ExperimentConfig, usize, PathBuf), Failure> {
    let mut cfg = ExperimentConfig::from_path(&args.config).map_err(|e| match e {
        Error::Io(io) => Failure::Usage(format!("{}: {io}", args.config.display())),
        other => Failure::from(other),
    })?;
    if let Some(s) = &args.seeds {
        cfg.seeds = s.clone();
    }
    cfg.validate()?;
    let jobs = args.jobs.or(cfg.jobs).unwrap_or(1);
    if jobs == 0 {
        return Err(Failure::Usage("--jobs must be at least 1".into()));
    }
    let out = args
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    Ok((cfg, jobs, out))
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn fmt4(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| format!("{x:.4}"))
}

fn cmd_run(args: &RunArgs) -> Result<(), Failure> {
    let (cfg, jobs, out) = load_config(args)?;
    let report = experiment::run(&cfg, jobs)?;
    experiment::write_run(&report, &out, Some(now()))?;
    for f in &report.failed_seeds {
        eprintln!("seed {} failed: {}", f.seed, f.reason);
    }
    println!(
        "seeds={} delta_median={} gamma_median={} report={}",
        report.per_seed.len(),
        fmt4(report.delta),
        fmt4(report.gamma),
        out.join("report.json").display()
    );
    Ok(())
}

fn cmd_sweep(args: &RunArgs) -> Result<(), Failure> {
    let (cfg, jobs, out) = load_config(args)?;
    if cfg.sweep.is_none() {
        return Err(Failure::Usage("config has no [sweep] section".into()));
    }
    let rows = experiment::sweep(&cfg, jobs)?;
    experiment::write_sweep(&rows, &out)?;
    println!("rows={} sweep={}", rows.len(), out.join("sweep.csv").display());
    Ok(())
}

fn cmd_verify(args: &VerifyArgs) -> Result<(), Failure> {
    let opts = VerifyOptions {
        rhs_scale: args.rhs_scale,
        ..VerifyOptions::default()
    };
    let report = bounds::verify_bounds(args.instances, args.seed, opts)?;
    let json = serial::to_json(&report).map_err(Failure::from)?;
    if let Some(p) = &args.out {
        write_file(p, &json)?;
    }
    print!("{json}");
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Violation(format!(
            "{} of {} instances violate a bound (max violation {:e}, identity gap {:e})",
            report.violations, report.instances, report.max_violation, report.identity_max_gap
        )))
    }
}

fn write_file(p: &Path, s: &str) -> Result<(), Failure> {
    if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    std::fs::write(p, s).map_err(|e| Failure::Runtime(format!("{}: {e}", p.display())))
}

fn cmd_delta(args: &DeltaArgs) -> Result<(), Failure> {
    let v: Vec<f64> = if args.accuracy {
        args.values.iter().map(|a| 1.0 - a).collect()
    } else {
        args.values.clone()
    };
    match v.len() {
        2 => println!("delta={}", fmt4(metrics::delta(v[0], v[1])?)),
        4 => {
            let d = metrics::delta(v[0], v[2])?;
            if v.iter().any(|x| *x < 0.0) {
                return Err(Failure::Usage("errors must be non-negative".into()));
            }
            let g = metrics::gamma(v[0], v[1], v[2], v[3]);
            println!("delta={} gamma={}", fmt4(d), fmt4(g));
        }
        n => return Err(Failure::Usage(format!("expected 2 or 4 values, got {n}"))),
    }
    Ok(())
}

fn cmd_gen(args: &GenArgs) -> Result<(), Failure> {
    let data = match args.kind {
        GenKind::Curve => {
            let draw = io::synthetic_curve(
                &CurveParams {
                    n: args.n,
                    noise_fraction: args.noise_fraction,
                    frequency: args.curve_frequency,
                },
                args.seed,
            )?;
            eprintln!("flipped {} labels (fraction {})", draw.flipped.len(), draw.achieved_fraction);
            draw.dataset
        }
        GenKind::Blobs => io::synthetic_blobs(
            &BlobParams {
                n: args.n,
                k: args.k,
                dim: args.dim,
                separation: args.separation,
            },
            args.seed,
        )?,
    };
    let mut schema = CsvSchema::new("label");
    schema.label_mapping = LabelMapping::Integer;
    io::save_csv(&data, &args.out, &schema)?;
    Ok(())
}

fn cmd_fico(args: &FicoArgs) -> Result<(), Failure> {
    let table = io::read_raw(&args.input, args.delimiter, true)?;
    let ex = io::fico_expand(&table, &args.label, LabelMapping::FirstAppearance)?;
    let mut schema = CsvSchema::new(&args.label);
    schema.delimiter = args.delimiter;
    io::save_csv(&ex.dataset, &args.output, &schema)?;
    eprintln!(
        "rows={} dropped_all_minus9={} mixed_minus9_rows={} width={}",
        ex.dataset.len(),
        ex.dropped_rows,
        ex.mixed_minus9_rows,
        ex.dataset.dim()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DELTA_INTERP_LOG", "warn")).init();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::VerifyBounds(a) => cmd_verify(a),
        Command::Delta(a) => cmd_delta(a),
        Command::GenData(a) => cmd_gen(a),
        Command::FicoExpand(a) => cmd_fico(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Violation(m)) => {
            eprintln!("bound violation: {m}");
            ExitCode::from(3)
        }
    }
}
