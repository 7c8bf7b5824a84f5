//! `frlscale` — run fuzzy RL auto-scaling experiments from the command line.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use frlscale_core::{
    compare_controller_runs, emit_outputs, run_experiment, Controller, ExperimentConfig,
};

#[derive(Parser)]
#[command(
    name = "frlscale",
    version,
    about = "Fuzzy reinforcement-learning auto-scaling experiments on a simulated VM group"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write steps.csv, summary.json and plot data
    Run(RunArgs),
    /// Run several controllers on the same scenario and tabulate the results
    Compare(CompareArgs),
    /// Write a starter workload trace CSV to adapt or replace
    GenTraceTemplate(GenTraceArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (JSON). Every field has a default, so the file may be
    /// as small as {"controller":"FQL"} — or omitted entirely.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory the run artifacts are written into
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the config seed (the FRL_SEED env var wins over both)
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config horizon
    #[arg(long)]
    horizon: Option<u64>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    horizon: Option<u64>,
    /// Comma-separated controllers (FSL, FQL, fixed:N); defaults to the
    /// config's compare list
    #[arg(long, value_delimiter = ',', value_parser = parse_controller)]
    controllers: Option<Vec<Controller>>,
}

#[derive(Args)]
struct GenTraceArgs {
    /// Where to write the template
    #[arg(long, default_value = "trace_template.csv")]
    out: PathBuf,
    /// Number of sample rows
    #[arg(long, default_value_t = 48)]
    rows: u64,
}

fn parse_controller(s: &str) -> Result<Controller, String> {
    s.parse()
}

fn main() {
    if let Err(err) = dispatch() {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn dispatch() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::Compare(args) => compare(args),
        Command::GenTraceTemplate(args) => gen_trace_template(args),
    }
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    let Some(path) = path else {
        return Ok(ExperimentConfig::default());
    };
    let text =
        fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let cfg: ExperimentConfig = serde_json::from_str(&text)
        .with_context(|| format!("parsing config {}", path.display()))?;
    Ok(cfg)
}

/// Seed precedence: FRL_SEED env var, then --seed, then the config file.
fn apply_overrides(
    cfg: &mut ExperimentConfig,
    seed: Option<u64>,
    horizon: Option<u64>,
) -> Result<()> {
    if let Some(h) = horizon {
        cfg.horizon = h;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Ok(raw) = std::env::var("FRL_SEED") {
        cfg.seed = raw
            .trim()
            .parse()
            .with_context(|| format!("FRL_SEED must be an unsigned integer, got '{raw}'"))?;
    }
    Ok(())
}

fn run(args: RunArgs) -> Result<()> {
    let mut cfg = load_config(args.config.as_deref())?;
    apply_overrides(&mut cfg, args.seed, args.horizon)?;
    let output = run_experiment(&cfg)?;
    let files = emit_outputs(&args.out, &output)?;

    let s = &output.summary;
    println!(
        "{} over {} intervals{} (seed {}):",
        s.controller,
        s.effective_horizon,
        if s.truncated { ", trace-truncated" } else { "" },
        s.seed
    );
    println!(
        "  mean rt {:.4} s, p95 {:.4} s, SLA violations {:.1}%, mean VM usage {:.1}%",
        s.mean_rt_s,
        s.p95_rt_s,
        100.0 * s.sla_violation_ratio,
        s.mean_vm_pct
    );
    match s.convergence_step {
        Some(step) => println!("  converged at interval {step}"),
        None => println!("  no convergence within the horizon"),
    }
    let snapshots = files.qtable_snapshots.len();
    println!(
        "wrote {}, {}, {}{} in {}",
        file_name(&files.steps_csv),
        file_name(&files.summary_json),
        file_name(&files.rt_series),
        if snapshots > 0 {
            format!(" and {snapshots} q-table snapshots")
        } else {
            String::new()
        },
        args.out.display()
    );
    Ok(())
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .unwrap_or_default()
        .to_string_lossy()
        .into_owned()
}

/// Directory-safe version of a controller label: `fixed(3)` -> `fixed_3`.
fn dir_label(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '_'
            }
        })
        .collect::<String>()
        .trim_end_matches('_')
        .to_string()
}

fn compare(args: CompareArgs) -> Result<()> {
    let mut base = load_config(args.config.as_deref())?;
    apply_overrides(&mut base, args.seed, args.horizon)?;

    let controllers = args.controllers.unwrap_or_else(|| base.compare.clone());
    if controllers.is_empty() {
        bail!("nothing to compare: pass --controllers or a config with a compare list");
    }
    let cfgs: Vec<ExperimentConfig> = controllers
        .iter()
        .map(|&c| base.with_controller(c))
        .collect();
    let (outputs, table) = compare_controller_runs(&cfgs)?;

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    for (output, row) in outputs.iter().zip(&table.rows) {
        emit_outputs(&args.out.join(dir_label(&row.controller)), output)?;
    }

    let text = table.render_text();
    fs::write(args.out.join("comparison.txt"), &text).with_context(|| "writing comparison.txt")?;
    let mut json = serde_json::to_string_pretty(&table)?;
    json.push('\n');
    fs::write(args.out.join("comparison.json"), json).with_context(|| "writing comparison.json")?;

    print!("{text}");
    println!(
        "wrote per-controller artifacts and the comparison to {}",
        args.out.display()
    );
    Ok(())
}

/// A plausible half-day request curve: two traffic peaks over `rows` samples,
/// integer counts, no randomness.
fn gen_trace_template(args: GenTraceArgs) -> Result<()> {
    if args.rows < 2 {
        bail!("a trace needs at least 2 rows, got {}", args.rows);
    }
    let mut body = String::from("t,count\n");
    for t in 0..args.rows {
        let phase = t as f64 / args.rows as f64;
        let daily = (2.0 * std::f64::consts::PI * phase).sin();
        let rush = (4.0 * std::f64::consts::PI * phase).sin();
        let count = (55.0 + 35.0 * daily + 10.0 * rush).round() as i64;
        body.push_str(&format!("{t},{count}\n"));
    }
    fs::write(&args.out, body).with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "wrote {} sample rows to {}; replace the counts with real data or point a config's trace pattern at it",
        args.rows,
        args.out.display()
    );
    Ok(())
}
