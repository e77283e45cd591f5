use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use proxcg_core::data::{normalize_rows_l2, read_libsvm};
use proxcg_core::harness::{format_summary, load_spec, prepare, run_experiment, RunStatus, OUTPUT_DIR_ENV};
use proxcg_core::theory::{report, TheoryReport};
use proxcg_core::{Error, LabelMapping, ParseOptions, TheoryInputs};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

#[derive(Parser)]
#[command(name = "proxcg", version, about = "Proximal stochastic conjugate-gradient experiments")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (algorithm, seed) pair of an experiment spec.
    Run {
        spec: PathBuf,
        /// Write the metric CSV here instead of the spec's `output`.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Directory the CSV is redirected into.
        #[arg(long, env = OUTPUT_DIR_ENV)]
        output_dir: Option<PathBuf>,
    },
    /// Check a spec, load its data and expand its algorithms without running.
    Validate { spec: PathBuf },
    /// Rate constants, feasibility and a suggested momentum weight.
    Theory {
        inputs: PathBuf,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Parse a LIBSVM file and print its statistics.
    CheckData {
        path: PathBuf,
        /// Treat this label as +1 and every other label as -1.
        #[arg(long)]
        positive_class: Option<f64>,
        /// Feature dimension, if larger than the largest index in the file.
        #[arg(long)]
        dim: Option<usize>,
        /// Skip unit-norm row scaling.
        #[arg(long)]
        no_normalize: bool,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(err) if err.is_data_error() => EXIT_DATA,
        _ => EXIT_USAGE,
    }
}

fn dispatch(command: Command) -> anyhow::Result<ExitCode> {
    match command {
        Command::Run { spec, output, output_dir } => run(spec, output, output_dir),
        Command::Validate { spec } => validate(spec),
        Command::Theory { inputs, json } => theory(inputs, json),
        Command::CheckData { path, positive_class, dim, no_normalize } => {
            check_data(path, positive_class, dim, !no_normalize)
        }
    }
}

fn run(path: PathBuf, output: Option<PathBuf>, output_dir: Option<PathBuf>) -> anyhow::Result<ExitCode> {
    let mut spec = load_spec(&path)?;
    if let Some(out) = output {
        spec.output = Some(out);
    }
    if let Some(dir) = output_dir {
        // the harness reads the variable when resolving the output path
        std::env::set_var(OUTPUT_DIR_ENV, dir);
        if spec.output.is_none() {
            spec.output = Some(PathBuf::from("metrics.csv"));
        }
    }
    let res = run_experiment(&spec)?;
    print!("{}", format_summary(&res.summary));
    println!("lambda = {:e}, P* = {:.10e}", res.lambda, res.p_star);
    if let Some(out) = &res.output {
        println!("wrote {} rows to {}", res.rows.len(), out.display());
    }
    for run in &res.runs {
        match &run.status {
            RunStatus::Completed => {}
            RunStatus::Diverged { epoch } => log::warn!("{} seed {} diverged at epoch {epoch}", run.label, run.seed),
            RunStatus::Failed { reason } => log::warn!("{} seed {} failed: {reason}", run.label, run.seed),
        }
    }
    if res.all_failed() {
        eprintln!("every run diverged or failed");
        return Ok(ExitCode::from(EXIT_DIVERGED));
    }
    Ok(ExitCode::SUCCESS)
}

fn validate(path: PathBuf) -> anyhow::Result<ExitCode> {
    let spec = load_spec(&path)?;
    let prepared = prepare(&spec)?;
    println!(
        "{}: n = {}, d = {}, lambda = {:e}, {} jobs",
        spec.dataset.display_name(),
        prepared.data.n(),
        prepared.data.d(),
        prepared.lambda,
        prepared.jobs.len()
    );
    for (label, alg) in prepared.jobs.iter().step_by(spec.seeds.len()) {
        println!("  {label}: {}", serde_json::to_string(alg)?);
    }
    Ok(ExitCode::SUCCESS)
}

fn theory(path: PathBuf, json: bool) -> anyhow::Result<ExitCode> {
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let inputs: TheoryInputs =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let r = report(&inputs)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&r)?);
    } else {
        print_report(&r);
    }
    Ok(ExitCode::SUCCESS)
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.6e}"))
}

fn print_report(r: &TheoryReport) {
    println!("xi        {:.6e}", r.xi);
    println!("C         {:.6e}", r.c);
    println!("xi2       {:.6e}", r.xi2);
    println!("C2        {:.6e}", r.c2);
    println!("xi_st     {}", opt(r.xi_st));
    println!("C_st      {}", opt(r.c_st));
    println!("feasible  {}", r.feasible);
    if let Some(f) = r.feasible_st {
        println!("feasible_st {f}");
    }
    match r.suggested_gamma {
        Some(g) if g.degenerate => println!("gamma*    0 (degenerate at eta2 = 2/3)"),
        Some(g) => println!("gamma*    {:.6e}", g.gamma),
        None => println!("gamma*    -"),
    }
    if let Some(g) = r.gd_rate {
        println!("xi_gd     {g:.6e}");
    }
    if let Some(rad) = r.radii {
        println!("Delta     {:.6e}", rad.delta);
        println!("Delta_bar {:.6e}", rad.delta_bar);
        println!("Delta_st  {}", opt(rad.delta_st));
    }
}

fn check_data(path: PathBuf, positive: Option<f64>, dim: Option<usize>, normalize: bool) -> anyhow::Result<ExitCode> {
    let labels = positive.map_or(LabelMapping::Standard, LabelMapping::PositiveClass);
    let mut data = read_libsvm(&path, &ParseOptions { labels, dim })?;
    let raw_max = data.rows().iter().map(|r| r.norm_sq()).fold(0.0, f64::max).sqrt();
    if normalize {
        data = normalize_rows_l2(data);
    }
    let (n, d, nnz) = (data.n(), data.d(), data.nnz());
    let pos = data.labels().iter().filter(|&&b| b > 0.0).count();
    let empty = data.rows().iter().filter(|r| r.nnz() == 0).count();
    println!("file        {}", path.display());
    println!("n           {n}");
    println!("d           {d}");
    println!("nnz         {nnz}");
    println!("density     {:.6}", nnz as f64 / (n as f64 * d.max(1) as f64));
    println!("labels      +1: {pos}, -1: {}", n - pos);
    println!("empty rows  {empty}");
    println!("max |a_i|   {raw_max:.6e}{}", if normalize { " (before scaling)" } else { "" });
    Ok(ExitCode::SUCCESS)
}
