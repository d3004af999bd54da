use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sdgem::commands::{cmd_effects, cmd_indices, cmd_simulate, cmd_solve, RunConfig};

#[derive(Parser)]
#[command(name = "sdgem", version, about = "Supply-demand equilibrium metrics for spatial marketplaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve every snapshot; writes rho.csv and duals.csv
    Solve(Flags),
    /// Demand- and supply-centric indices per window; writes indices.csv and scatter.csv
    Indices(Flags),
    /// Analyse a switchback experiment; writes effects.csv and ate_by_market.csv
    Effects(Flags),
    /// Run the market simulator; writes snapshots.csv and graph.csv
    Simulate(Flags),
}

#[derive(Args)]
struct Flags {
    /// key = value run configuration; flags override its entries
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Dispatch radius in edge-cost units
    #[arg(long)]
    radius: Option<f64>,
    /// Snapshot CSV (a directory of <market>.csv files for `effects`)
    #[arg(long)]
    snapshots: Option<PathBuf>,
    #[arg(long)]
    sim_config: Option<PathBuf>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Snapshots per aggregation window
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    design: Option<PathBuf>,
    /// Minutes per experiment period
    #[arg(long)]
    period_length: Option<f64>,
    #[arg(long)]
    n_permutations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Flags {
    fn resolve(self) -> sdgem::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($flag:ident => $field:ident),*) => {
                $(if let Some(v) = self.$flag { cfg.$field = v; })*
            };
        }
        set!(radius => radius, lambda => lambda, epsilon => epsilon, delta => delta, window => window,
             period_length => period_length, n_permutations => n_permutations, seed => seed, out => out_dir);
        macro_rules! set_path {
            ($($flag:ident),*) => {
                $(if self.$flag.is_some() { cfg.$flag = self.$flag; })*
            };
        }
        set_path!(graph, snapshots, sim_config, design);
        Ok(cfg)
    }
}

fn run(cli: Cli) -> sdgem::Result<()> {
    match cli.command {
        Command::Solve(f) => cmd_solve(&f.resolve()?).map(drop),
        Command::Indices(f) => cmd_indices(&f.resolve()?).map(drop),
        Command::Effects(f) => cmd_effects(&f.resolve()?).map(drop),
        Command::Simulate(f) => cmd_simulate(&f.resolve()?).map(drop),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sdgem: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
