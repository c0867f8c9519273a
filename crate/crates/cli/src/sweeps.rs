use std::fs::File;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use polarscale::election::{
    bifurcation_onset, bifurcation_sweep, detect_instability, polarization_j, ElectionModel,
    InstabilityConfig, Mixture2,
};
use polarscale::geo_hierarchy::build_kdtree_hierarchy;
use polarscale::ingest::read_units;
use polarscale::scale_variance::decompose;
use polarscale::social_ties::{
    effective_opinions, j_fully_connected, j_segregated, multiscale_effective_variance,
    transform_fully_connected_mixture, transform_segregated_mixture, two_state_j, ScaleWeights, TieMatrix,
};
use serde::Serialize;
use serde_json::json;

use crate::output::{header, num, Run};
use crate::Common;

fn grid(lo: f64, hi: f64, steps: usize) -> Result<Vec<f64>> {
    if steps < 2 || !(hi > lo) {
        bail!("a sweep needs at least 2 steps over a nonempty range");
    }
    Ok((0..steps)
        .map(|k| lo + (hi - lo) * k as f64 / (steps - 1) as f64)
        .collect())
}

#[derive(Args, Serialize)]
pub struct StabilityArgs {
    /// Width of each subpopulation.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Alienation scale a of the utility-argmax election.
    #[arg(long, default_value_t = 1.0)]
    pub alienation: f64,
    #[arg(long, default_value_t = 0.0)]
    pub j_min: f64,
    #[arg(long, default_value_t = 2.0)]
    pub j_max: f64,
    #[arg(long, default_value_t = 41)]
    pub j_steps: usize,
    /// Half-range of the mass asymmetry scanned for outcome jumps.
    #[arg(long, default_value_t = 0.05)]
    pub asymmetry: f64,
    /// Onset: first J whose outcome split exceeds this fraction of Δ.
    #[arg(long, default_value_t = 1e-3)]
    pub onset_tol: f64,
}

pub fn run_stability(common: &Common, args: &StabilityArgs) -> Result<()> {
    if !(args.asymmetry > 0.0 && args.asymmetry < 0.5) {
        bail!("--asymmetry must lie in (0, 0.5)");
    }
    let model = ElectionModel::utility(args.alienation);
    let js = grid(args.j_min, args.j_max, args.j_steps)?;
    let rows = bifurcation_sweep(&model, args.sigma, &js)?;
    let cfg = InstabilityConfig::default();
    let mut out = Vec::with_capacity(rows.len());
    for row in &rows {
        let delta = row.delta;
        let family = |eps: f64| Mixture2::new(0.5 + eps, 0.5 - eps, delta, -delta, args.sigma);
        // jump of the outcome as the mass balance crosses one half
        let (jump, status) = match detect_instability(&model, family, -args.asymmetry, args.asymmetry, &cfg) {
            Ok(r) if r.unstable => (r.jump, "jump"),
            Ok(r) => (r.jump, "continuous"),
            Err(e) if e.is_degenerate() => (f64::NAN, "unresolved"),
            Err(e) => return Err(e.into()),
        };
        out.push(vec![
            num(row.j),
            num(delta),
            num(row.branches[0]),
            num(*row.branches.last().expect("at least one branch")),
            num(row.split),
            num(jump),
            status.to_string(),
        ]);
    }
    let onset = bifurcation_onset(&rows, args.onset_tol);
    let mut run = Run::new(&common.out)?;
    run.csv(
        "stability.csv",
        &header(&[
            "j",
            "delta",
            "branch_low",
            "branch_high",
            "split",
            "jump",
            "status",
        ]),
        out,
    )?;
    run.json("summary.json", &json!({ "onset_j": onset }))?;
    run.finish(
        "stability-sweep",
        common.seed,
        args,
        json!({ "election": model, "instability": cfg }),
    )
}

#[derive(Args, Serialize)]
pub struct TiesArgs {
    #[arg(long, default_value_t = 0.5)]
    pub pi_a: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub mu_a: f64,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    pub mu_b: f64,
    #[arg(long, default_value_t = 0.5)]
    pub sigma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub alienation: f64,
    /// Grid points for w in [0, 1].
    #[arg(long, default_value_t = 21)]
    pub w_steps: usize,
    /// Grid points per axis of the two-state (w1, w2) table.
    #[arg(long, default_value_t = 11)]
    pub w2_steps: usize,
    /// Dense headerless tie matrix; requires --opinions.
    #[arg(long, requires = "opinions")]
    pub ties: Option<PathBuf>,
    /// Opinions for --ties: first column of a headed CSV.
    #[arg(long, requires = "ties")]
    pub opinions: Option<PathBuf>,
    /// Accept negative tie weights.
    #[arg(long)]
    pub allow_negative: bool,
    /// Units file for a multiscale weight vector; requires --scale-weights.
    #[arg(long, requires = "scale_weights")]
    pub units: Option<PathBuf>,
    /// Weights w_1..w_{N+1}, finest scale first; a k-d tree of depth N is built.
    #[arg(long, value_delimiter = ',', requires = "units")]
    pub scale_weights: Option<Vec<f64>>,
}

fn read_column(path: &PathBuf) -> Result<Vec<f64>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let mut xs = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let raw = rec.get(0).unwrap_or("").trim();
        xs.push(
            raw.parse::<f64>()
                .with_context(|| format!("line {}: bad opinion {raw:?}", k + 2))?,
        );
    }
    Ok(xs)
}

fn variance(xs: &[f64]) -> f64 {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

pub fn run_ties(common: &Common, args: &TiesArgs) -> Result<()> {
    let mix = Mixture2::new(args.pi_a, 1.0 - args.pi_a, args.mu_a, args.mu_b, args.sigma)?;
    let a = args.alienation;
    if !(a > 0.0) {
        bail!("--alienation must be positive");
    }
    let j0 = polarization_j(&mix, a);
    let mut run = Run::new(&common.out)?;

    let mut rows = Vec::new();
    for w in grid(0.0, 1.0, args.w_steps)? {
        rows.push(vec![
            num(w),
            num(transform_fully_connected_mixture(&mix, w)?.variance()),
            num(transform_segregated_mixture(&mix, w)?.variance()),
            num(j0),
            num(j_fully_connected(&mix, a, w)),
            num(j_segregated(&mix, a, w)),
        ]);
    }
    run.csv(
        "ties.csv",
        &header(&[
            "w",
            "variance_fully_connected",
            "variance_segregated",
            "j",
            "j_fully_connected",
            "j_segregated",
        ]),
        rows,
    )?;

    let delta = (args.mu_a - args.mu_b).abs() / 2.0;
    let mut rows = Vec::new();
    let ws = grid(0.0, 1.0, args.w2_steps)?;
    for &w1 in &ws {
        for &w2 in ws.iter().filter(|&&w2| w1 + w2 <= 1.0 + 1e-12) {
            let (s1, s2) = two_state_j(delta, args.sigma, a, w1, w2.min(1.0 - w1))?;
            rows.push(vec![num(w1), num(w2), num(s1), num(s2)]);
        }
    }
    run.csv(
        "two_state.csv",
        &header(&["w1", "w2", "j_state1", "j_state2"]),
        rows,
    )?;

    let mut summary = serde_json::Map::new();
    summary.insert("j".into(), json!(j0));
    summary.insert("mixture_variance".into(), json!(mix.variance()));
    if let (Some(tp), Some(op)) = (&args.ties, &args.opinions) {
        let file = File::open(tp).with_context(|| format!("opening {}", tp.display()))?;
        let ties = TieMatrix::<f64>::read_csv(file, args.allow_negative)?;
        let x = read_column(op)?;
        let eff = effective_opinions(&ties, &x)?;
        run.csv(
            "effective.csv",
            &header(&["index", "opinion", "effective"]),
            x.iter()
                .zip(&eff)
                .enumerate()
                .map(|(i, (a, b))| vec![i.to_string(), num(*a), num(*b)]),
        )?;
        summary.insert("variance_before".into(), json!(variance(&x)));
        summary.insert("variance_after".into(), json!(variance(&eff)));
    }
    if let (Some(up), Some(sw)) = (&args.units, &args.scale_weights) {
        let file = File::open(up).with_context(|| format!("opening {}", up.display()))?;
        let units = read_units::<f64, _>(file)?;
        let weights = ScaleWeights::new(sw.clone())?;
        if sw.len() < 2 {
            bail!("--scale-weights needs at least two entries");
        }
        let tree = build_kdtree_hierarchy(&units, sw.len() - 1)?;
        let before = decompose(&tree, &units)?;
        let after = multiscale_effective_variance(&before, &weights)?;
        run.csv(
            "multiscale.csv",
            &header(&["scale", "weight", "factor", "added", "effective_added"]),
            (0..before.added.len()).map(|k| {
                vec![
                    (k + 1).to_string(),
                    num(sw[k]),
                    num(weights.factor(k)),
                    num(before.added[k]),
                    num(after.added[k]),
                ]
            }),
        )?;
    }
    run.json("summary.json", &summary)?;
    run.finish("ties-sweep", common.seed, args, json!({}))
}
