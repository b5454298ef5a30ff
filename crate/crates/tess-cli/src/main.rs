//! Command-line front end for the spiking-network training engine: train,
//! eval, cost, and dump subcommands over the shared dotted-key config.
//! Exit codes: 0 success, 2 config error, 3 data error, 4 numeric
//! divergence.

mod checkpoint;
mod config;
mod cost;
mod dataset;
mod dump;
mod error;
mod metrics;
mod trainer;

use clap::{Args, Parser, Subcommand};
use config::RunConfig;
use error::{CliError, CliResult};

#[derive(Parser)]
#[command(
    name = "tess",
    version,
    about = "Train and inspect spiking networks with a layer-local learning rule"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train a preset network; writes metrics, checkpoints and the resolved config
    Train(RunArgs),
    /// Evaluate a checkpoint on dataset splits
    Eval(EvalArgs),
    /// Print analytical training costs for an architecture
    Cost(CostCliArgs),
    /// Print basis rows, a checkpoint header, or a trace tape
    Dump(DumpArgs),
}

/// Config-forming flags shared by commands that resolve a full run config.
/// A flag beats a `--set` pair, which beats TESS_SEED, which beats the
/// config file, which beats the built-in defaults.
#[derive(Args)]
struct RunArgs {
    /// Config file of dotted `key = value` lines
    #[arg(long)]
    config: Option<String>,
    /// Extra dotted key=value override, repeatable, applied in order
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Network preset: toy-dense, toy-conv or vgg9-paper
    #[arg(long)]
    preset: Option<String>,
    /// Data source: synth:CxNxT, synthframe:CxCHxHxWxT, or an .evf path
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    epochs: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long = "batch-size")]
    batch_size: Option<usize>,
    /// Training workers; results do not depend on the count
    #[arg(long)]
    threads: Option<usize>,
    /// Steps at the start of each sample without updates
    #[arg(long = "t-l")]
    t_l: Option<u32>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    /// Output directory for metrics and checkpoints
    #[arg(long)]
    out: Option<String>,
    /// Record real wall-clock seconds in metrics rows
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: String,
    /// Override the data source stored in the checkpoint
    #[arg(long)]
    dataset: Option<String>,
    /// Split to report: train, val, test or all
    #[arg(long, default_value = "all")]
    split: String,
}

#[derive(Args)]
struct CostCliArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Steps per sample
    #[arg(long = "t-steps", visible_alias = "T")]
    t_steps: Option<u32>,
    /// Class count
    #[arg(long = "classes", visible_alias = "C")]
    classes: Option<usize>,
    /// Benchmark setting for the nine-layer preset
    #[arg(long, default_value = "cifar10-dvs")]
    setting: String,
    /// Rule to report: bptt, s-tllr, tess or all
    #[arg(long, default_value = "all")]
    rule: String,
    /// Also print the symbolic scaling comparison
    #[arg(long)]
    complexity: bool,
}

#[derive(Args)]
struct DumpArgs {
    /// Square-wave rows for `C=<classes>,n=<width>`
    #[arg(long)]
    basis: Option<String>,
    /// Checkpoint whose header to print
    #[arg(long)]
    checkpoint: Option<String>,
    /// Print every trace value of one training sample
    #[arg(long)]
    traces: bool,
    #[command(flatten)]
    run: RunArgs,
}

fn resolve_config(args: &RunArgs) -> CliResult<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{path}: {e}")))?;
        cfg.apply_file_text(path, &text)?;
    }
    cfg.apply_seed_env(std::env::var("TESS_SEED").ok().as_deref())?;
    cfg.apply_overrides(&args.sets)?;
    let mut flag = |key: &str, value: Option<String>| -> CliResult<()> {
        if let Some(v) = value {
            cfg.set(key, &v)
                .map_err(|msg| CliError::Config(format!("--{}: {msg}", key.replace('.', "-"))))?;
        }
        Ok(())
    };
    flag("model.preset", args.preset.clone())?;
    flag("data.source", args.dataset.clone())?;
    flag("train.epochs", args.epochs.map(|v| v.to_string()))?;
    flag("train.seed", args.seed.map(|v| v.to_string()))?;
    flag("optimizer.lr", args.lr.map(|v| v.to_string()))?;
    flag("train.batch_size", args.batch_size.map(|v| v.to_string()))?;
    flag("train.threads", args.threads.map(|v| v.to_string()))?;
    flag("update.t_l", args.t_l.map(|v| v.to_string()))?;
    flag("data.noise", args.noise.map(|v| v.to_string()))?;
    flag("data.samples", args.samples.map(|v| v.to_string()))?;
    flag("out.dir", args.out.clone())?;
    if args.timing {
        flag("log.timing", Some(String::from("true")))?;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.cmd {
        Cmd::Train(args) => {
            let cfg = resolve_config(&args)?;
            trainer::cmd_train(&cfg)
        }
        Cmd::Eval(args) => trainer::cmd_eval(&args.checkpoint, args.dataset.as_deref(), &args.split),
        Cmd::Cost(args) => {
            let cfg = resolve_config(&args.run)?;
            let req = cost::CostRequest {
                setting: args.setting,
                t_steps: args.t_steps,
                classes: args.classes,
                t_l: args.run.t_l,
                rule: args.rule,
                complexity: args.complexity,
            };
            cost::cmd_cost(&cfg, &req)
        }
        Cmd::Dump(args) => {
            let modes =
                args.basis.is_some() as u32 + args.checkpoint.is_some() as u32 + args.traces as u32;
            if modes != 1 {
                return Err(CliError::Config(String::from(
                    "dump needs exactly one of --basis, --checkpoint, --traces",
                )));
            }
            if let Some(spec) = &args.basis {
                return dump::cmd_dump_basis(spec);
            }
            if let Some(path) = &args.checkpoint {
                return dump::cmd_dump_checkpoint(path);
            }
            let cfg = resolve_config(&args.run)?;
            dump::cmd_dump_traces(&cfg)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
