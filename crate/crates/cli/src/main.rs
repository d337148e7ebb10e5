//! `dpi` — command-line driver for the dual-policy-iteration experiments.

use clap::{Args, Parser, Subcommand};
use dpi_core::harness::{
    self, emit_plot, read_csv, run_robust, verify, AdvantageCost, Baseline, ExperimentConfig,
    PolicyArch, RobustArm, Track, VerifyOptions,
};
use dpi_core::DpiError;
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_VALIDATION: u8 = 2;
const EXIT_VERIFY: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

#[derive(Parser)]
#[command(
    name = "dpi",
    version,
    about = "Dual policy iteration: trust-region model-based experts with natural-gradient imitation"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dual policy iteration on random Garnet MDPs.
    Tabular(RunArgs),
    /// Conservative policy iteration baseline on the same Garnet setup.
    Cpi(RunArgs),
    /// Continuous track on cart-pole balancing.
    Cartpole(RunArgs),
    /// Continuous track on the linear-quadratic benchmark system.
    Lti(RunArgs),
    /// Robust training across a family of perturbed cart-poles.
    Robust(RobustRunArgs),
    /// Natural-policy-gradient baseline with Monte Carlo advantages.
    Npg(NpgArgs),
    /// Numeric verification of the improvement-theory inequalities.
    Verify(VerifyArgs),
    /// Plot learning curves from one or more metrics.csv files.
    Plot(PlotArgs),
}

#[derive(Args, Default)]
struct RunArgs {
    /// JSON config document; its fields override the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for metrics.csv, config.json, policy.json, plot.svg.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Comma-separated seed list.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    episodes_per_iter: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    mu_min: Option<f64>,
    #[arg(long)]
    mu_max: Option<f64>,
    #[arg(long)]
    ridge: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Policy architecture: linear | two-layer.
    #[arg(long)]
    policy: Option<String>,
    /// Hidden width for the two-layer policy.
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    log_std_init: Option<f64>,
    /// Floor on the policy log-std (use a very negative value to disable).
    #[arg(long, allow_negative_numbers = true)]
    log_std_floor: Option<f64>,
    #[arg(long)]
    k_steps: Option<usize>,
    #[arg(long)]
    eval_rollouts: Option<usize>,
    /// Count evaluation rollouts toward the episode budget.
    #[arg(long)]
    count_eval_episodes: bool,
    #[arg(long)]
    pool_window: Option<usize>,
    /// Cost for the expert disadvantage: original | surrogate.
    #[arg(long)]
    advantage_cost: Option<String>,
    /// Disable advantage standardization.
    #[arg(long)]
    no_standardize_advantages: bool,
    /// Tabular expert uses hard value-iteration backups.
    #[arg(long)]
    hard_backup: bool,
    #[arg(long)]
    soft_vi_tol: Option<f64>,
    #[arg(long)]
    num_states: Option<usize>,
    #[arg(long)]
    num_actions: Option<usize>,
    #[arg(long)]
    branches: Option<usize>,
    #[arg(long)]
    num_envs: Option<usize>,
    #[arg(long)]
    test_envs: Option<usize>,
    #[arg(long)]
    perturb_scale: Option<f64>,
}

#[derive(Args)]
struct RobustRunArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Which arm to run: robust (all training envs) | single (one randomly
    /// picked training env, still tested on the held-out envs).
    #[arg(long, default_value = "robust")]
    arm: String,
}

#[derive(Args)]
struct NpgArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Environment: cartpole | lti.
    #[arg(long, default_value = "cartpole")]
    env: String,
}

#[derive(Args)]
struct VerifyArgs {
    /// Directory for offending-instance dumps.
    #[arg(long)]
    dump_dir: Option<PathBuf>,
    #[arg(long)]
    pdl_instances: Option<usize>,
    #[arg(long)]
    lemma3_instances: Option<usize>,
    #[arg(long)]
    lemma4_instances: Option<usize>,
    #[arg(long)]
    theorem2_instances: Option<usize>,
}

#[derive(Args)]
struct PlotArgs {
    /// metrics.csv files to draw.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Output SVG path.
    #[arg(long, default_value = "plot.svg")]
    out: PathBuf,
}

fn build_config(args: &RunArgs, track: Track, baseline: Baseline) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    if let Some(seeds) = &args.seeds {
        cfg.seeds = seeds.clone();
    }
    macro_rules! set {
        ($field:ident) => {
            if let Some(v) = args.$field {
                cfg.$field = v;
            }
        };
    }
    set!(iterations);
    set!(episodes_per_iter);
    set!(horizon);
    set!(alpha);
    set!(beta);
    set!(mu_min);
    set!(mu_max);
    set!(ridge);
    set!(log_std_init);
    set!(k_steps);
    set!(eval_rollouts);
    set!(pool_window);
    set!(soft_vi_tol);
    set!(num_states);
    set!(num_actions);
    set!(branches);
    set!(num_envs);
    set!(test_envs);
    set!(perturb_scale);
    if let Some(g) = args.gamma {
        cfg.gamma = Some(g);
    }
    if let Some(floor) = args.log_std_floor {
        cfg.log_std_floor = Some(floor);
    }
    if args.count_eval_episodes {
        cfg.count_eval_episodes = true;
    }
    if args.no_standardize_advantages {
        cfg.standardize_advantages = false;
    }
    if args.hard_backup {
        cfg.hard_backup = true;
    }
    if let Some(policy) = &args.policy {
        cfg.policy = match policy.as_str() {
            "linear" => PolicyArch::Linear,
            "two-layer" | "two_layer" => PolicyArch::TwoLayer {
                hidden: args.hidden.unwrap_or(32),
            },
            other => anyhow::bail!("unknown policy architecture: {other}"),
        };
    } else if let Some(hidden) = args.hidden {
        cfg.policy = PolicyArch::TwoLayer { hidden };
    }
    if let Some(mode) = &args.advantage_cost {
        cfg.advantage_cost = match mode.as_str() {
            "original" => AdvantageCost::Original,
            "surrogate" => AdvantageCost::Surrogate,
            other => anyhow::bail!("unknown advantage cost mode: {other}"),
        };
    }
    // The config document overrides the flags.
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)?;
        apply_json_overrides(&mut cfg, &text)?;
    }
    // The subcommand fixes the track and baseline last.
    cfg.track = track;
    cfg.baseline = baseline;
    Ok(cfg)
}

fn apply_json_overrides(cfg: &mut ExperimentConfig, text: &str) -> anyhow::Result<()> {
    let overrides: serde_json::Value = serde_json::from_str(text)?;
    let obj = overrides
        .as_object()
        .ok_or_else(|| anyhow::anyhow!("config document must be a JSON object"))?;
    let mut merged = serde_json::to_value(&*cfg)?;
    let target = merged.as_object_mut().expect("config serializes to an object");
    for (key, value) in obj {
        if !target.contains_key(key) {
            anyhow::bail!("unknown config field: {key}");
        }
        target.insert(key.clone(), value.clone());
    }
    *cfg = serde_json::from_value(merged)?;
    Ok(())
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    if let Some(dpi) = err.downcast_ref::<DpiError>() {
        match dpi {
            DpiError::InvalidArgument(_) => EXIT_VALIDATION,
            _ => EXIT_NUMERICAL,
        }
    } else {
        EXIT_VALIDATION
    }
}

fn run(args: &RunArgs, track: Track, baseline: Baseline) -> anyhow::Result<()> {
    let cfg = build_config(args, track, baseline)?;
    let records = harness::run_to_dir(&cfg, &args.out)?;
    for rec in &records {
        if let Some(j) = rec.final_j_pi() {
            println!("{} seed {}: final cost {j:.4}", rec.method, rec.seed);
        }
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

fn run_robust_cmd(args: &RobustRunArgs) -> anyhow::Result<()> {
    let cfg = build_config(&args.run, Track::Robust, Baseline::Dpi)?;
    cfg.validate()?;
    let arm = match args.arm.as_str() {
        "robust" => RobustArm::Robust,
        "single" | "non-robust" | "nonrobust" => RobustArm::Single,
        other => anyhow::bail!("unknown arm: {other}"),
    };
    std::fs::create_dir_all(&args.run.out)?;
    std::fs::write(
        args.run.out.join("config.json"),
        serde_json::to_string_pretty(&cfg)?,
    )?;
    let mut records = Vec::new();
    let mut first = true;
    for &seed in &cfg.seeds {
        let (record, policy_json) = run_robust(&cfg, seed, arm)?;
        let name = if first {
            "policy.json".to_string()
        } else {
            format!("policy_{seed}.json")
        };
        std::fs::write(args.run.out.join(name), &policy_json)?;
        first = false;
        println!(
            "{} seed {}: final held-out cost {:.4}",
            record.method,
            seed,
            record.final_j_pi().unwrap_or(f64::NAN)
        );
        records.push(record);
    }
    harness::write_csv(&records, &args.run.out.join("metrics.csv"))?;
    emit_plot(&records, &args.run.out.join("plot.svg"))?;
    println!("wrote {}", args.run.out.display());
    Ok(())
}

fn run_npg(args: &NpgArgs) -> anyhow::Result<()> {
    let track = match args.env.as_str() {
        "cartpole" => Track::Cartpole,
        "lti" => Track::Lti,
        other => anyhow::bail!("unknown environment: {other}"),
    };
    run(&args.run, track, Baseline::Npg)
}

fn run_verify(args: &VerifyArgs) -> anyhow::Result<bool> {
    let mut opts = VerifyOptions {
        dump_dir: args.dump_dir.clone(),
        ..VerifyOptions::default()
    };
    if let Some(n) = args.pdl_instances {
        opts.pdl_instances = n;
    }
    if let Some(n) = args.lemma3_instances {
        opts.lemma3_instances = n;
    }
    if let Some(n) = args.lemma4_instances {
        opts.lemma4_instances = n;
    }
    if let Some(n) = args.theorem2_instances {
        opts.theorem2_instances = n;
    }
    let report = verify(&opts)?;
    print!("{}", report.render_table());
    for check in &report.checks {
        println!("  {}: {}", check.name, check.detail);
    }
    Ok(report.all_pass())
}

fn run_plot(args: &PlotArgs) -> anyhow::Result<()> {
    let mut records = Vec::new();
    for input in &args.inputs {
        records.extend(read_csv(input)?);
    }
    emit_plot(&records, &args.out)?;
    println!("wrote {}", args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome: anyhow::Result<Option<bool>> = match &cli.cmd {
        Command::Tabular(a) => run(a, Track::Tabular, Baseline::Dpi).map(|_| None),
        Command::Cpi(a) => run(a, Track::Tabular, Baseline::Cpi).map(|_| None),
        Command::Cartpole(a) => run(a, Track::Cartpole, Baseline::Dpi).map(|_| None),
        Command::Lti(a) => run(a, Track::Lti, Baseline::Dpi).map(|_| None),
        Command::Robust(a) => run_robust_cmd(a).map(|_| None),
        Command::Npg(a) => run_npg(a).map(|_| None),
        Command::Verify(a) => run_verify(a).map(Some),
        Command::Plot(a) => run_plot(a).map(|_| None),
    };
    match outcome {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(true)) => ExitCode::SUCCESS,
        Ok(Some(false)) => {
            eprintln!("verification failed");
            ExitCode::from(EXIT_VERIFY)
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
