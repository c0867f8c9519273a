use std::path::PathBuf;

use anyhow::bail;
use clap::{Args, ValueEnum};
use polarscale::axes::{
    circular_dispersion, multilevel_couple, pca_axis, two_means_axis, AxisProvenance, ElectionAxis,
    InteractionSystem, OpinionCloud, ScaleInteraction, TwoMeansConfig,
};
use polarscale::rep_tensor::{
    default_steps, directional_rep_auto, rep_tensor, CoordinateMedianElection, MeanElection,
};
use serde::Serialize;
use serde_json::json;

use crate::output::{header, num, Run};
use crate::points::{read_points, Points};
use crate::Common;

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AxisMethod {
    TwoMeans,
    Pca,
}

#[derive(Args, Serialize)]
pub struct AxesArgs {
    /// Points CSV: coordinate columns plus optional `region` and `weight`.
    #[arg(long)]
    pub points: PathBuf,
    /// Extraction used for the coupled axes.
    #[arg(long, value_enum, default_value_t = AxisMethod::TwoMeans)]
    pub method: AxisMethod,
    /// Grid points for the coupling sweep, self weight w from 1 down to 0.
    #[arg(long, default_value_t = 21)]
    pub w_steps: usize,
    #[arg(long, default_value_t = 16)]
    pub restarts: usize,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn cloud_of(pts: &Points, members: &[usize]) -> polarscale::Result<OpinionCloud<f64>> {
    OpinionCloud::new(
        members.iter().map(|&i| pts.coords[i].clone()).collect(),
        members.iter().map(|&i| pts.weights[i]).collect(),
    )
}

/// Axes are undirected; orient `axis` into the half-space of `reference`.
fn orient(axis: ElectionAxis<f64>, reference: &ElectionAxis<f64>) -> ElectionAxis<f64> {
    if dot(&axis.direction, &reference.direction) < 0.0 {
        let flipped: Vec<f64> = axis.direction.iter().map(|x| -x).collect();
        ElectionAxis::new(&flipped, axis.provenance).expect("unit vector")
    } else {
        axis
    }
}

fn extract(
    cloud: &OpinionCloud<f64>,
    method: AxisMethod,
    cfg: &TwoMeansConfig,
) -> polarscale::Result<ElectionAxis<f64>> {
    match method {
        AxisMethod::TwoMeans => Ok(two_means_axis(cloud, cfg)?.axis),
        AxisMethod::Pca => pca_axis(cloud),
    }
}

pub fn run_axes(common: &Common, args: &AxesArgs) -> anyhow::Result<()> {
    let pts = read_points(&args.points)?;
    let d = pts.dim();
    let cfg = TwoMeansConfig {
        restarts: args.restarts,
        max_iter: args.max_iter,
        seed: common.seed,
    };
    let all: Vec<usize> = (0..pts.coords.len()).collect();
    let cloud = cloud_of(&pts, &all)?;
    let national = extract(&cloud, args.method, &cfg)?;

    let mut run = Run::new(&common.out)?;
    let mut head = header(&["region", "method", "points", "status", "angle_to_national"]);
    head.extend((1..=d).map(|k| format!("dir_{k}")));
    let mut axis_rows = Vec::new();
    let mut label_rows = Vec::new();
    let mut local = Vec::new();
    let mut regions_json = Vec::new();
    let mut push_axis =
        |region: &str, method: &str, n: usize, axis: Result<&ElectionAxis<f64>, &polarscale::Error>| {
            let mut row = vec![region.to_string(), method.to_string(), n.to_string()];
            match axis {
                Ok(a) => {
                    let a = orient(a.clone(), &national);
                    row.push("ok".into());
                    row.push(num(a.angle_to(&national)));
                    row.extend(a.direction.iter().map(|&x| num(x)));
                }
                Err(e) => {
                    row.push(e.to_string());
                    row.extend(std::iter::repeat_n(String::new(), d + 1));
                }
            }
            axis_rows.push(row);
        };
    push_axis(
        "national",
        method_name(args.method),
        pts.coords.len(),
        Ok(&national),
    );

    for region in pts.region_names() {
        let members: Vec<usize> = all
            .iter()
            .copied()
            .filter(|&i| pts.regions[i] == region)
            .collect();
        let cloud = match cloud_of(&pts, &members) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("region {region}: {e}");
                continue;
            }
        };
        let fit = two_means_axis(&cloud, &cfg);
        let pca = pca_axis(&cloud);
        push_axis(&region, "two-means", members.len(), fit.as_ref().map(|f| &f.axis));
        push_axis(&region, "pca", members.len(), pca.as_ref());
        if let Ok(f) = &fit {
            for (&i, &l) in members.iter().zip(&f.labels) {
                label_rows.push(vec![i.to_string(), region.clone(), l.to_string()]);
            }
        }
        let chosen = match args.method {
            AxisMethod::TwoMeans => fit.map(|f| f.axis),
            AxisMethod::Pca => pca,
        };
        match chosen {
            Ok(a) => {
                let a = orient(a, &national);
                regions_json.push(json!({
                    "region": region,
                    "points": members.len(),
                    "direction": a.direction,
                    "angle_to_national": a.angle_to(&national),
                }));
                local.push((region, a));
            }
            Err(e) => regions_json.push(json!({ "region": region, "degenerate": e.to_string() })),
        }
    }
    run.csv("axes.csv", &head, axis_rows)?;
    label_rows.sort_by_key(|r| r[0].parse::<usize>().unwrap_or(usize::MAX));
    run.csv("labels.csv", &header(&["row", "region", "label"]), label_rows)?;

    let cov = cloud.covariance();
    run.csv(
        "variance.csv",
        &header(&["coordinate", "variance"]),
        pts.coordinate_names
            .iter()
            .enumerate()
            .map(|(k, name)| vec![name.clone(), num(cov.rows()[k][k])]),
    )?;

    // each local election keeps weight w on its own axis and gives 1 − w to
    // the national one, which keeps its own
    let n = local.len();
    if n > 0 {
        let mut axes: Vec<ElectionAxis<f64>> = local.iter().map(|(_, a)| a.clone()).collect();
        axes.push(national.clone());
        let weights: Vec<Vec<f64>> = (0..=n).map(|i| vec![if i < n { 1.0 } else { 0.0 }]).collect();
        let steps = args.w_steps.max(2);
        let mut rows = Vec::with_capacity(steps);
        for k in 0..steps {
            let w = 1.0 - k as f64 / (steps - 1) as f64;
            let system = InteractionSystem {
                axes: axes.clone(),
                scales: vec![ScaleInteraction {
                    members: vec![n],
                    weights: weights.clone(),
                }],
                w,
                self_weights: Some((0..=n).map(|i| if i < n { w } else { 1.0 }).collect()),
            };
            let coupled = multilevel_couple(&system)?;
            let dispersion = circular_dispersion(&coupled[..n], &national)?;
            let max_angle = coupled[..n]
                .iter()
                .map(|a| a.angle_to(&national))
                .fold(0.0, f64::max);
            rows.push(vec![num(w), num(dispersion), num(max_angle)]);
        }
        run.csv("coupling.csv", &header(&["w", "dispersion", "max_angle"]), rows)?;
    }
    run.json(
        "axes.json",
        &json!({
            "method": args.method,
            "national": national,
            "regions": regions_json,
        }),
    )?;
    run.finish("axes", common.seed, args, json!({ "two_means": cfg }))
}

fn method_name(m: AxisMethod) -> &'static str {
    match m {
        AxisMethod::TwoMeans => "two-means",
        AxisMethod::Pca => "pca",
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MultiRule {
    Mean,
    CoordinateMedian,
}

#[derive(Args, Serialize)]
pub struct RepresentationArgs {
    /// Points CSV as for `axes`; regions are ignored.
    #[arg(long)]
    pub points: PathBuf,
    /// Row index of the voter.
    #[arg(long, default_value_t = 0)]
    pub voter: usize,
    #[arg(long, value_enum, default_value_t = MultiRule::Mean)]
    pub election: MultiRule,
    /// Finite-difference step for every coordinate [default: 1e-4 × coordinate sd].
    #[arg(long)]
    pub h: Option<f64>,
    /// Combine steps h and h/2 to cancel the leading error term.
    #[arg(long)]
    pub richardson: bool,
    /// Election axis ê [default: the weighted 2-means axis].
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub axis: Option<Vec<f64>>,
    /// Direction ĉ of the breakdown [default: voter minus weighted mean, or ê].
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub direction: Option<Vec<f64>>,
}

pub fn run_representation(common: &Common, args: &RepresentationArgs) -> anyhow::Result<()> {
    let pts = read_points(&args.points)?;
    let d = pts.dim();
    if args.voter >= pts.coords.len() {
        bail!("voter {} out of range ({} points)", args.voter, pts.coords.len());
    }
    let cloud = OpinionCloud::new(pts.coords.clone(), pts.weights.clone())?;
    let steps = match args.h {
        Some(h) if h > 0.0 => vec![h; d],
        Some(_) => bail!("--h must be positive"),
        None => default_steps(&cloud),
    };
    let tensor = match args.election {
        MultiRule::Mean => rep_tensor(&MeanElection, &cloud, args.voter, &steps, args.richardson)?,
        MultiRule::CoordinateMedian => rep_tensor(
            &CoordinateMedianElection,
            &cloud,
            args.voter,
            &steps,
            args.richardson,
        )?,
    };
    let cfg = TwoMeansConfig {
        seed: common.seed,
        ..TwoMeansConfig::default()
    };
    let axis = match &args.axis {
        Some(v) => ElectionAxis::new(v, AxisProvenance::CandidatePair)?,
        None => two_means_axis(&cloud, &cfg)?.axis,
    };
    let direction = match &args.direction {
        Some(v) => v.clone(),
        None => {
            let m = cloud.mean();
            let v: Vec<f64> = pts.coords[args.voter]
                .iter()
                .zip(&m)
                .map(|(x, y)| x - y)
                .collect();
            if dot(&v, &v) > 0.0 {
                v
            } else {
                axis.direction.clone()
            }
        }
    };
    if axis.direction.len() != d || direction.len() != d {
        bail!("--axis and --direction need {d} components");
    }
    let breakdown = if d >= 2 {
        Some(directional_rep_auto(&tensor, &direction, &axis.direction)?)
    } else {
        None
    };
    let mut run = Run::new(&common.out)?;
    run.json(
        "representation.json",
        &json!({
            "voter": args.voter,
            "election": args.election,
            "steps": steps,
            "richardson": args.richardson,
            "tensor": tensor,
            "axis": axis,
            "direction": direction,
            "breakdown": breakdown,
        }),
    )?;
    run.finish(
        "representation",
        common.seed,
        args,
        json!({ "relative_step": 1e-4, "two_means": cfg }),
    )
}
