use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use qpolar::cli::{analyze, read_config, run_construct, run_simulate, Command, RunConfig};
use qpolar::merge::MergeRule;

#[derive(Parser)]
#[command(name = "qpolar", version, about = "Polar code construction for q-ary input channels")]
struct Args {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Construct all subchannels; write capacities.csv, frozen.txt, summary.txt
    Construct(Common),
    /// Per-level capacity gaps and timings; write levels.csv
    Analyze(Common),
    /// Monte-Carlo frame error rate under SC decoding; write fer.csv
    Simulate(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum Policy {
    GreedyExact,
    GreedyPairs,
    ThresholdL1,
}

#[derive(clap::Args)]
struct Common {
    /// Configuration file
    config: PathBuf,
    #[arg(long, value_enum)]
    policy: Option<Policy>,
    /// Skip the lossless equivalence-class reduction
    #[arg(long)]
    no_cyclic: bool,
    /// Skip the `+`-step pre-merge
    #[arg(long)]
    no_premerge: bool,
    /// Worker threads for construction (0 = all cores)
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory (overrides `out_dir`)
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(c: &Common, command: Command) -> qpolar::Result<RunConfig> {
    let mut cfg = read_config(&c.config)?;
    cfg.command = command;
    if let Some(p) = c.policy {
        cfg.policy.rule = match p {
            Policy::GreedyExact => MergeRule::GreedyExact,
            Policy::GreedyPairs => MergeRule::GreedyPairsOnly,
            Policy::ThresholdL1 => match cfg.policy.rule {
                r @ MergeRule::ThresholdL1 { .. } => r,
                _ => MergeRule::ThresholdL1 { c1: 10.0, c2: 2.0 },
            },
        };
    }
    if c.no_cyclic {
        cfg.policy.cyclic_no_loss = false;
    }
    if c.no_premerge {
        cfg.policy.plus_premerge = false;
    }
    if let Some(t) = c.threads {
        cfg.threads = t;
    }
    if let Some(out) = &c.out {
        if cfg.simulate.out == cfg.out_dir.join("fer.csv") {
            cfg.simulate.out = out.join("fer.csv");
        }
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

fn run(args: Args) -> qpolar::Result<()> {
    match args.command {
        Cmd::Construct(c) => {
            let cfg = load(&c, Command::Construct)?;
            let o = run_construct(&cfg)?;
            println!(
                "I(W) = {:.6}  average = {:.6}  gap = {:.6}  ({:.2} s) -> {}",
                o.channel_capacity,
                o.average_capacity,
                o.gap(),
                o.wall_seconds,
                cfg.out_dir.display()
            );
        }
        Cmd::Analyze(c) => {
            let cfg = load(&c, Command::Analyze)?;
            print!("{}", analyze(&cfg)?);
        }
        Cmd::Simulate(c) => {
            let cfg = load(&c, Command::Simulate)?;
            let r = run_simulate(&cfg)?;
            println!("trials = {}  errors = {}  fer = {}", r.trials, r.block_errors, r.fer);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
