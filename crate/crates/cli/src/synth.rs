use anyhow::Result;
use clap::{Args, ValueEnum};
use polarscale::election::Mixture2;
use polarscale::ingest::{synth_geography, write_units, SynthConfig, SynthMode};
use serde::Serialize;
use serde_json::json;

use crate::output::Run;
use crate::Common;

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Mixed,
    Segregated,
}

#[derive(Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value_t = Mode::Segregated)]
    pub mode: Mode,
    #[arg(long, default_value_t = 64)]
    pub locales: usize,
    #[arg(long, default_value_t = 100)]
    pub per_locale: usize,
    #[arg(long, default_value_t = 0.5)]
    pub pi_a: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub mu_a: f64,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    pub mu_b: f64,
    /// Width of each mode; 0 gives point masses.
    #[arg(long, default_value_t = 0.5)]
    pub sigma: f64,
}

pub fn run(common: &Common, args: &SynthArgs) -> Result<()> {
    // validate through the constructor with a positive width, then set the requested one
    let mut mixture = Mixture2::new(args.pi_a, 1.0 - args.pi_a, args.mu_a, args.mu_b, 1.0)?;
    mixture.sigma = args.sigma;
    let cfg = SynthConfig {
        mode: match args.mode {
            Mode::Mixed => SynthMode::Mixed,
            Mode::Segregated => SynthMode::Segregated,
        },
        locales: args.locales,
        per_locale: args.per_locale,
        mixture,
        seed: common.seed,
    };
    let (units, tree) = synth_geography(&cfg)?;
    let mut run = Run::new(&common.out)?;
    run.with_writer("units.csv", |w| write_units(&units, w))?;
    run.with_writer("regions.csv", |w| tree.write_assignment_csv(&units, w))?;
    run.finish("synth", common.seed, args, json!({}))
}
