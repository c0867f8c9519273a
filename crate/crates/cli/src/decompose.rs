use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{ArgGroup, Args};
use polarscale::geo_hierarchy::{build_kdtree_hierarchy, build_random_hierarchy, GeoUnit, RegionTree};
use polarscale::ingest::{load_returns, read_units, SchemaConfig};
use polarscale::scale_variance::{between_group_profile, decompose, decompose_bernoulli, loglog_slope};
use polarscale::ScaleDecomposition;
use serde::Serialize;
use serde_json::json;

use crate::output::Run;
use crate::Common;

const MAX_DEFAULT_DEPTH: usize = 10;

#[derive(Args, Serialize)]
#[command(group(ArgGroup::new("input").required(true).args(["returns", "units"])))]
pub struct DecomposeArgs {
    /// Returns file in the schema given by --schema.
    #[arg(long)]
    pub returns: Option<PathBuf>,
    /// TOML column mapping for --returns (defaults documented in the README).
    #[arg(long, requires = "returns")]
    pub schema: Option<PathBuf>,
    /// Units file: unit_id,x,y,population,value.
    #[arg(long)]
    pub units: Option<PathBuf>,
    /// Levels of the built hierarchies [default: min(10, floor(log2 units))].
    #[arg(long)]
    pub depth: Option<usize>,
    /// Give every unit population 1.
    #[arg(long)]
    pub unweighted: bool,
    /// Treat values as shares of binary voters and add the within-unit term.
    #[arg(long)]
    pub bernoulli: bool,
    /// Scales with fewer regions are left out of the slope fit.
    #[arg(long, default_value_t = 64)]
    pub min_groups: usize,
}

#[derive(Serialize)]
struct HierarchySummary {
    levels: usize,
    total: f64,
    sum_added: f64,
    /// Share of variance within regions of each scale, finest first.
    within_share: Vec<f64>,
    /// Log-log slope of between-group variance against mean group size, over
    /// scales with at least `min_groups` regions.
    slope_vs_group_size: Option<f64>,
    slope_scales: usize,
}

fn summarize(dec: &ScaleDecomposition, min_groups: usize) -> Result<HierarchySummary> {
    let within_share = if dec.sum_added() > 0.0 {
        (1..=dec.levels())
            .map(|s| dec.within_share(s))
            .collect::<polarscale::Result<_>>()?
    } else {
        vec![0.0; dec.levels()]
    };
    // few groups leave chi-square noise of order one in the between-group variance
    let (xs, ys): (Vec<f64>, Vec<f64>) = between_group_profile(dec)
        .into_iter()
        .zip(&dec.groups[1..])
        .filter(|(p, &g)| p.1 > 0.0 && g >= min_groups)
        .map(|(p, _)| p)
        .unzip();
    Ok(HierarchySummary {
        levels: dec.levels(),
        total: dec.total,
        sum_added: dec.sum_added(),
        within_share,
        slope_vs_group_size: loglog_slope(&xs, &ys).ok(),
        slope_scales: xs.len(),
    })
}

fn load(args: &DecomposeArgs) -> Result<(Vec<GeoUnit<f64>>, Option<RegionTree>)> {
    if let Some(path) = &args.returns {
        let schema = match &args.schema {
            Some(p) => SchemaConfig::from_path(p).with_context(|| format!("reading {}", p.display()))?,
            None => SchemaConfig::default(),
        };
        let loaded =
            load_returns::<f64>(path, &schema).with_context(|| format!("reading {}", path.display()))?;
        for d in &loaded.skipped {
            eprintln!("skipped line {}: {}", d.line, d.message);
        }
        let tree = if schema.levels.is_empty() {
            None
        } else {
            Some(loaded.hierarchy()?)
        };
        return Ok((loaded.units, tree));
    }
    let path = args.units.as_ref().expect("clap enforces one input");
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let units = read_units::<f64, _>(file).with_context(|| format!("reading {}", path.display()))?;
    Ok((units, None))
}

pub fn run(common: &Common, args: &DecomposeArgs) -> Result<()> {
    let (mut units, assigned) = load(args)?;
    if units.iter().any(|u| u.value.as_scalar().is_none()) {
        bail!("decompose needs scalar unit values");
    }
    if args.unweighted {
        units.iter_mut().for_each(|u| u.population = 1.0);
    }
    let depth = match args.depth {
        Some(d) => d,
        None => (usize::BITS - 1 - units.len().leading_zeros()).min(MAX_DEFAULT_DEPTH as u32) as usize,
    };
    if depth == 0 {
        bail!("need at least two units to build a hierarchy");
    }
    let pop: f64 = units.iter().map(|u| u.population).sum();
    let mean = units
        .iter()
        .map(|u| u.population * u.value.as_scalar().unwrap())
        .sum::<f64>()
        / pop;
    let shares = units
        .iter()
        .all(|u| (0.0..=1.0).contains(&u.value.as_scalar().unwrap()));
    if args.bernoulli && !shares {
        bail!("--bernoulli needs values in [0, 1]");
    }
    let normalizer = shares.then_some(mean * (1.0 - mean)).filter(|&v| v > 0.0);

    let mut trees = vec![
        ("kdtree", build_kdtree_hierarchy(&units, depth)?),
        ("random", build_random_hierarchy(&units, depth, common.seed)?),
    ];
    if let Some(t) = assigned {
        trees.push(("assigned", t));
    }
    let mut run = Run::new(&common.out)?;
    let mut summaries = serde_json::Map::new();
    for (name, tree) in &trees {
        let dec = if args.bernoulli {
            decompose_bernoulli(tree, &units)?
        } else {
            decompose(tree, &units)?
        };
        let dec = match normalizer {
            Some(_) => dec.normalized(mean)?,
            None => dec,
        };
        run.with_writer(&format!("decompose_{name}.csv"), |w| dec.write_csv(w))?;
        if *name != "assigned" {
            run.with_writer(&format!("regions_{name}.csv"), |w| {
                tree.write_assignment_csv(&units, w)
            })?;
        }
        summaries.insert(
            name.to_string(),
            serde_json::to_value(summarize(&dec, args.min_groups)?)?,
        );
    }
    run.json(
        "summary.json",
        &json!({
            "units": units.len(),
            "population": pop,
            "mean": mean,
            "normalizer": normalizer,
            "hierarchies": summaries,
        }),
    )?;
    run.finish(
        "decompose",
        common.seed,
        args,
        json!({ "depth": depth, "max_default_depth": MAX_DEFAULT_DEPTH }),
    )
}
