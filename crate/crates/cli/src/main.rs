use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dpsco::harness::{self, exit, ExperimentSpec};
use dpsco::privacy::{calibrate_sigma, end_to_end, from_target, AuditConfig, EndToEndParams};
use dpsco::registry::Params;
use dpsco::{Error, Result};
use serde_json::json;

#[derive(Parser)]
#[command(name = "dpsco", version, about = "Private SGD that stops after touching half the data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment grid and check the excess-risk bound in every cell.
    Run(RunArgs),
    /// Monte-Carlo the stopping time for several n.
    TauSim(TauArgs),
    /// Solve for noise scale, step size and the end-to-end guarantee.
    Calibrate(CalibrateArgs),
    /// Empirically audit one calibrated noisy step.
    Audit(AuditArgs),
}

#[derive(Args)]
struct Output {
    /// Output root; defaults to $DPSCO_OUTPUT_DIR or ./results.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Seed for reproducible mode; drawn from entropy (and recorded) if absent.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct RunArgs {
    /// Flat key = value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--param set.radius=0.5`. Repeatable.
    #[arg(long = "param", short = 'p', value_name = "KEY=VALUE")]
    params: Vec<String>,
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    repeats: Option<usize>,
    /// Replace the calibrated noise scale (e.g. 0 for non-private SGD).
    #[arg(long)]
    sigma_override: Option<f64>,
    #[arg(long)]
    dump_traces: bool,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct TauArgs {
    /// Comma-separated dataset sizes.
    #[arg(long, value_delimiter = ',', default_value = "16,64,256,1024")]
    n: Vec<usize>,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long, default_value = "tau-sim")]
    name: String,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Defaults to --delta.
    #[arg(long)]
    delta_prime: Option<f64>,
    #[arg(long = "L", default_value_t = 1.0)]
    lipschitz: f64,
    #[arg(long = "D", default_value_t = 1.0)]
    diameter: f64,
    #[arg(long = "d", default_value_t = 1)]
    dimension: usize,
    #[arg(long)]
    eps_bar: Option<f64>,
    #[arg(long)]
    delta_bar: Option<f64>,
}

#[derive(Args)]
struct AuditArgs {
    /// Noise scale; calibrated from --L, --eps-tilde and --delta if absent.
    #[arg(long)]
    sigma: Option<f64>,
    /// Multiplier applied to the noise scale.
    #[arg(long, default_value_t = 1.0)]
    sigma_scale: f64,
    #[arg(long = "L", default_value_t = 1.0)]
    lipschitz: f64,
    #[arg(long, default_value_t = 0.5)]
    eps_tilde: f64,
    #[arg(long, default_value_t = 1e-6)]
    delta: f64,
    #[arg(long, default_value_t = 1_000_000)]
    trials: usize,
    #[arg(long, default_value_t = 500)]
    grid: usize,
    #[arg(long, default_value = "audit")]
    name: String,
    #[command(flatten)]
    out: Output,
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(rand_seed)
}

fn rand_seed() -> u64 {
    use std::collections::hash_map::RandomState;
    use std::hash::{BuildHasher, Hasher};
    let mut h = RandomState::new().build_hasher();
    h.write_u128(
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_nanos())
            .unwrap_or_default(),
    );
    h.finish()
}

fn output_root(out: &Output) -> PathBuf {
    out.output_dir.clone().unwrap_or_else(harness::default_output_dir)
}

fn print_json(v: &serde_json::Value) -> Result<()> {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{}", serde_json::to_string_pretty(v)?)?;
    Ok(())
}

fn run(args: RunArgs) -> Result<i32> {
    let mut p = match &args.config {
        Some(path) => harness::parse_config(&std::fs::read_to_string(path)?)?,
        None => Params::new(),
    };
    for kv in &args.params {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--param expects KEY=VALUE, got {kv:?}")))?;
        p.insert(k.trim(), v.trim());
    }
    if let Some(name) = &args.name {
        p.insert("name", name);
    }
    if let Some(r) = args.repeats {
        p.insert("repeats", r);
    }
    if let Some(s) = args.sigma_override {
        p.insert("sigma_override", s);
    }
    if args.dump_traces {
        p.insert("dump_traces", true);
    }
    if let Some(dir) = &args.out.output_dir {
        p.insert("output_dir", dir.display());
    }
    let seed = match args.out.seed {
        Some(s) => s,
        None => match p.get::<u64>("seed")? {
            Some(s) => s,
            None => rand_seed(),
        },
    };
    p.insert("seed", seed);

    let spec = ExperimentSpec::from_params(&p)?;
    let result = harness::cmd_run(&spec)?;
    let cells: Vec<_> = result
        .cells
        .iter()
        .map(|c| {
            json!({
                "n": c.n, "epsilon": c.epsilon, "sigma": c.sigma,
                "mean_excess_risk": c.mean_excess_risk, "bound_value": c.bound_value,
                "bound_satisfied": c.bound_satisfied, "degraded": c.degraded,
            })
        })
        .collect();
    print_json(&json!({ "seed": seed, "output": spec.cell_dir(), "cells": cells }))?;
    Ok(if result.cells.iter().any(|c| c.degraded) { exit::OVERRUN } else { exit::OK })
}

fn tau_sim(args: TauArgs) -> Result<i32> {
    let seed = resolve_seed(args.out.seed);
    let dir = output_root(&args.out).join(&args.name);
    let stats = harness::cmd_tau_sim(&args.n, args.trials, seed, &dir)?;
    let summaries: Vec<_> = stats.iter().map(|s| s.summary()).collect();
    print_json(&json!({ "seed": seed, "output": dir, "summaries": summaries }))?;
    Ok(exit::OK)
}

fn calibrate(a: CalibrateArgs) -> Result<i32> {
    let n = a.n.ok_or_else(|| Error::Config("--n is required".into()))?;
    let (mode, epsilon, delta, delta_prime) = match (a.eps, a.delta, a.eps_bar, a.delta_bar) {
        (Some(eps), Some(delta), None, None) => ("direct", eps, delta, a.delta_prime.unwrap_or(delta)),
        (None, None, Some(eps_bar), Some(delta_bar)) => {
            let t = from_target(eps_bar, delta_bar, n)?;
            ("target", t.epsilon, t.delta, t.delta_prime)
        }
        _ => {
            return Err(Error::Config(
                "provide either --eps and --delta, or --eps-bar and --delta-bar (with --n)".into(),
            ))
        }
    };
    let params = EndToEndParams {
        n,
        epsilon,
        delta,
        delta_prime,
        lipschitz: a.lipschitz,
        diameter: a.diameter,
        dimension: a.dimension,
    };
    let r = end_to_end(&params)?;
    let mut out = json!({
        "mode": mode,
        "inputs": params,
        "sigma": r.sigma,
        "eta": r.eta,
        "report": r.report,
        "composed": r.composed,
        "risk_bound": r.risk_bound,
    });
    if let (Some(eb), Some(db)) = (a.eps_bar, a.delta_bar) {
        out["target"] = json!({ "eps_bar": eb, "delta_bar": db });
    }
    print_json(&out)?;
    Ok(exit::OK)
}

fn audit(a: AuditArgs) -> Result<i32> {
    let base = match a.sigma {
        Some(s) => s,
        None => calibrate_sigma(a.lipschitz, a.delta, a.eps_tilde)?,
    };
    let seed = resolve_seed(a.out.seed);
    let cfg = AuditConfig {
        sigma: base * a.sigma_scale,
        lipschitz: a.lipschitz,
        epsilon_tilde: a.eps_tilde,
        delta: a.delta,
        trials: a.trials,
        grid: a.grid,
        seed,
    };
    let dir = output_root(&a.out).join(&a.name);
    let r = harness::cmd_audit(&cfg, &dir)?;
    let worst = &r.intervals[r.worst_interval];
    print_json(&json!({
        "config": cfg,
        "output": dir,
        "max_violation": r.max_violation,
        "worst_interval": { "lo": worst.lo, "hi": worst.hi, "violation": worst.violation, "stderr": worst.stderr },
        "significant": r.significant,
    }))?;
    Ok(if r.significant { exit::AUDIT } else { exit::OK })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Run(a) => run(a),
        Command::TauSim(a) => tau_sim(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Audit(a) => audit(a),
    };
    match res {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(harness::exit_code(&e) as u8)
        }
    }
}
