mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{data, solve, theory};

/// Bad flag values, unreadable configs and other caller mistakes; exit 2.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

/// A checked property did not hold; exit 1.
#[derive(Debug)]
pub struct Failure(pub String);

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Failure {}

#[derive(Parser)]
#[command(
    name = "rgin",
    version,
    about = "GNNs with random node features and local approximation algorithms"
)]
struct Cli {
    #[command(flatten)]
    globals: Globals,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone, Debug)]
pub struct Globals {
    /// Worker threads; 1 makes every command bit-reproducible.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// JSON file of parameter defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for initialization, batch order, dropout and sampling.
    #[arg(long, global = true)]
    pub model_seed: Option<u64>,
    /// Seed for random node values.
    #[arg(long, global = true)]
    pub feature_seed: Option<u64>,
    /// Number of equally likely random node values.
    #[arg(long, global = true)]
    pub support_size: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled dataset of random 3-regular graphs.
    GenData(data::GenDataArgs),
    /// Train a node classifier and write a checkpoint.
    Train(data::TrainArgs),
    /// Train and evaluate every model on every task over several seeds.
    RunTable2(data::RunTableArgs),
    /// Dominating sets from the greedy or local algorithm.
    SolveMds(solve::SolveMdsArgs),
    /// Matchings from the phased augmenting-path algorithm.
    SolveMm(solve::SolveMmArgs),
    /// Approximation ratios against exact solutions.
    RatioBench(solve::RatioBenchArgs),
    /// Show that refinement cannot separate a triangle pair from a hexagon.
    WlDemo(theory::WlDemoArgs),
    /// Per-node digests of unfolding trees.
    HashEmbed(theory::HashEmbedArgs),
    /// Sample-based solution size estimates.
    Estimate(solve::EstimateArgs),
    /// Compare analytic and numeric gradients over an architecture matrix.
    GradCheck(theory::GradCheckArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = commands::init_threads(&cli.globals).and_then(|()| match cli.command {
        Command::GenData(a) => data::gen_data(a, &cli.globals),
        Command::Train(a) => data::train(a, &cli.globals),
        Command::RunTable2(a) => data::run_table(a, &cli.globals),
        Command::SolveMds(a) => solve::solve_mds(a, &cli.globals),
        Command::SolveMm(a) => solve::solve_mm(a, &cli.globals),
        Command::RatioBench(a) => solve::ratio_bench(a, &cli.globals),
        Command::WlDemo(a) => theory::wl_demo(a, &cli.globals),
        Command::HashEmbed(a) => theory::hash_embed(a, &cli.globals),
        Command::Estimate(a) => solve::estimate(a, &cli.globals),
        Command::GradCheck(a) => theory::grad_check(a, &cli.globals),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<Usage>().is_some() {
        return 2;
    }
    match e.downcast_ref::<rgin_core::Error>() {
        Some(rgin_core::Error::InvalidParameter(_)) => 2,
        _ => 1,
    }
}
