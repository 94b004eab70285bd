use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sbi_core::diagnostics::Trace;
use sbi_core::harness::{self, emit_reports, ExperimentConfig, ExperimentReport, Prepared};
use sbi_core::{Result, SbiError};

#[derive(Parser)]
#[command(name = "sbi", version, about = "Swarm-based inertial optimizers: batches, traces and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML experiment file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (overrides the file).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads, 0 = all cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Config override `key=value` (dotted keys, TOML values); repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (N, method) cell of a batch and write report.csv / report.json.
    Run(Common),
    /// Run one trial and write its per-iteration trace and event log.
    Trace {
        #[command(flatten)]
        common: Common,
        /// Trial index within the cell.
        #[arg(long, default_value_t = 0)]
        trial: usize,
        /// Swarm size; defaults to the first configured size.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Reproduce one of the built-in results tables.
    BenchSuite {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(harness::TABLE_NAMES))]
        table: String,
        /// Restrict to these dimensions.
        #[arg(long, value_delimiter = ',')]
        dims: Vec<usize>,
    },
    /// Run the invariant checks on small random instances.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn apply_common(mut cfg: ExperimentConfig, common: &Common) -> Result<ExperimentConfig> {
    cfg = cfg.with_overrides(&common.set)?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(t) = common.threads {
        cfg.threads = t;
    }
    if let Some(o) = &common.out {
        cfg.output.dir = o.clone();
    }
    Ok(cfg)
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let base = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    apply_common(base, common)
}

fn print_cells(report: &ExperimentReport) {
    println!("{} d={}", report.objective, report.dim);
    for c in &report.cells {
        println!(
            "  N={:<4} {:<28} {:>6.1}%  [{:.1}, {:.1}]  ({}/{}), mean iters {:.1}",
            c.n,
            c.method,
            100.0 * c.rate,
            100.0 * c.ci_low,
            100.0 * c.ci_high,
            c.successes,
            c.trials,
            c.mean_iterations
        );
    }
}

fn cmd_run(common: &Common) -> Result<()> {
    let cfg = load(common)?;
    let report = harness::run_batch(&cfg)?;
    emit_reports(std::slice::from_ref(&report), &cfg.output.dir)?;
    print_cells(&report);
    println!("wrote {}", cfg.output.dir.display());
    Ok(())
}

fn cmd_trace(common: &Common, trial: usize, n: Option<usize>) -> Result<()> {
    let cfg = load(common)?;
    let prepared = Prepared::new(&cfg)?;
    let n = n.or(cfg.sizes.first().copied()).unwrap_or(1);
    std::fs::create_dir_all(&cfg.output.dir).map_err(|e| SbiError::Io {
        path: cfg.output.dir.clone(),
        source: e,
    })?;
    for method in &prepared.methods {
        let (swarm_cfg, _) = method.apply(&prepared.cfg.swarm, &prepared.cfg.sbgd);
        let mut trace = Trace::new(cfg.dim, &swarm_cfg, method.scheme, prepared.lipschitz.value);
        let (rec, _) = prepared.run_trial_observed(trial, n, method, &mut trace);
        let stem = format!("{}_N{n}_t{trial}", method.label());
        let out: &Path = &cfg.output.dir;
        trace.write_tsv(&out.join(format!("trace_{stem}.tsv")))?;
        trace.write_events_tsv(&out.join(format!("events_{stem}.tsv")))?;
        println!(
            "{}: F = {:.10}, success = {}, iterations = {}, dissipation violations = {}",
            method.label(),
            rec.final_f,
            rec.success,
            rec.iterations,
            trace.ledger.dissipation_violations.len()
        );
        if let Some(e) = rec.error {
            println!("  error: {e}");
        }
    }
    println!("wrote {}", cfg.output.dir.display());
    Ok(())
}

fn cmd_bench(common: &Common, table: &str, dims: &[usize]) -> Result<()> {
    let mut reports = Vec::new();
    for base in harness::table_preset(table)? {
        if !dims.is_empty() && !dims.contains(&base.dim) {
            continue;
        }
        let cfg = match &common.config {
            // a file given alongside --table layers on top of the preset
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| SbiError::Io {
                    path: p.clone(),
                    source: e,
                })?;
                let extra: toml::Table =
                    toml::from_str(&text).map_err(|e| SbiError::Config(format!("config: {e}")))?;
                let sets: Vec<String> = flatten("", &extra);
                base.with_overrides(&sets)?
            }
            None => base,
        };
        let cfg = apply_common(cfg, common)?;
        let report = harness::run_batch(&cfg)?;
        print_cells(&report);
        reports.push(report);
        emit_reports(&reports, &common.out.clone().unwrap_or_else(|| PathBuf::from("out")))?;
    }
    Ok(())
}

fn flatten(prefix: &str, t: &toml::Table) -> Vec<String> {
    let mut out = Vec::new();
    for (k, v) in t {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            toml::Value::Table(inner) => out.extend(flatten(&key, inner)),
            other => out.push(format!("{key}={other}")),
        }
    }
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(c) => cmd_run(c),
        Command::Trace { common, trial, n } => cmd_trace(common, *trial, *n),
        Command::BenchSuite { common, table, dims } => cmd_bench(common, table, dims),
        Command::Verify { seed } => {
            let checks = harness::verify::run_all(*seed);
            let mut ok = true;
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                ok &= c.passed;
            }
            if ok {
                Ok(())
            } else {
                Err(SbiError::InvalidArgument("invariant checks failed".into()))
            }
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
