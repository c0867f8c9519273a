//! `polarscale` command line: each subcommand writes CSV/JSON data files and
//! a `manifest.json` into the output directory.
//!
//! Exit codes: 0 success, 1 input error, 2 numerical degeneracy.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

mod axes;
mod decompose;
mod output;
mod points;
mod sweeps;
mod synth;

#[derive(Parser)]
#[command(name = "polarscale", version, about = "Multiscale polarization analysis")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Serialize, Clone)]
pub struct Common {
    /// Output directory.
    #[arg(long, global = true, env = "POLARSCALE_OUT", default_value = "polarscale-out")]
    #[serde(skip)]
    pub out: PathBuf,
    /// Seed for every random choice of the run.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Variance added at each scale for k-d tree and random hierarchies.
    Decompose(decompose::DecomposeArgs),
    /// Symmetric two-mode electorates swept through J: outcome branches and jumps.
    StabilitySweep(sweeps::StabilityArgs),
    /// Effective variance and J under social ties, swept over tie weights.
    TiesSweep(sweeps::TiesArgs),
    /// Regional and national election axes with a coupling sweep.
    Axes(axes::AxesArgs),
    /// Representation tensor of one voter and its directional breakdown.
    Representation(axes::RepresentationArgs),
    /// Synthetic geography of mixed or segregated locales.
    Synth(synth::SynthArgs),
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let c = &cli.common;
    match &cli.command {
        Command::Decompose(a) => decompose::run(c, a),
        Command::StabilitySweep(a) => sweeps::run_stability(c, a),
        Command::TiesSweep(a) => sweeps::run_ties(c, a),
        Command::Axes(a) => axes::run_axes(c, a),
        Command::Representation(a) => axes::run_representation(c, a),
        Command::Synth(a) => synth::run(c, a),
    }
}

fn is_degenerate(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.downcast_ref::<polarscale::Error>()
            .is_some_and(|e| e.is_degenerate())
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_degenerate(&e) { 2 } else { 1 })
        }
    }
}
