use polarscale::axes::{
    circular_dispersion, couple_axes, multilevel_couple, partisan_transform, pca_axis, two_means_axis,
    AxisProvenance, CandidatePair, ElectionAxis, InteractionSystem, OpinionCloud, PartisanMode,
    ScaleInteraction, TwoMeansConfig,
};
use polarscale::linalg::Matrix;
use polarscale::rep_tensor::{
    directional_rep, rep_tensor, CoordinateMedianElection, MeanElection, RepTensor,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axis(v: &[f64]) -> ElectionAxis<f64> {
    ElectionAxis::new(v, AxisProvenance::CandidatePair).unwrap()
}

fn two_blobs(rng: &mut ChaCha8Rng, center: &[f64], n: usize, spread: &[f64]) -> OpinionCloud<f64> {
    let mut pts = Vec::new();
    for side in [1.0, -1.0] {
        for _ in 0..n {
            pts.push(
                center
                    .iter()
                    .zip(spread)
                    .map(|(&c, &s)| side * c + s * normal(rng))
                    .collect(),
            );
        }
    }
    OpinionCloud::uniform(pts).unwrap()
}

fn rotate(theta: f64, p: &[f64]) -> Vec<f64> {
    let (s, c) = theta.sin_cos();
    vec![c * p[0] - s * p[1], s * p[0] + c * p[1]]
}

#[test]
fn symmetric_blobs_give_the_center_direction() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let cloud = two_blobs(&mut rng, &[3.0, 4.0], 150, &[0.3, 0.3]);
    let fit = two_means_axis(&cloud, &TwoMeansConfig::default()).unwrap();
    assert!((fit.axis.direction[0] - 0.6).abs() < 0.02 && (fit.axis.direction[1] - 0.8).abs() < 0.02);
    assert!(fit.labels[..150].iter().all(|&l| l == 0) && fit.labels[150..].iter().all(|&l| l == 1));
}

#[test]
fn rotation_equivariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let cloud = two_blobs(&mut rng, &[2.0, 0.5], 100, &[0.5, 0.2]);
    let theta = 0.7;
    let rotated = OpinionCloud::new(
        cloud.points().iter().map(|p| rotate(theta, p)).collect(),
        cloud.weights().to_vec(),
    )
    .unwrap();
    let cfg = TwoMeansConfig::default();
    for (a, b) in [
        (
            two_means_axis(&cloud, &cfg).unwrap().axis,
            two_means_axis(&rotated, &cfg).unwrap().axis,
        ),
        (pca_axis(&cloud).unwrap(), pca_axis(&rotated).unwrap()),
    ] {
        let turned = rotate(theta, &a.direction);
        let c = dot(&turned, &b.direction);
        assert!((c.abs() - 1.0).abs() < 1e-9, "cosine {c}");
    }
}

#[test]
fn two_means_axis_dominates_random_directions() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let cloud = two_blobs(&mut rng, &[1.0, 2.0, -1.0], 200, &[0.4, 0.4, 0.4]);
    let axis = two_means_axis(&cloud, &TwoMeansConfig::default()).unwrap().axis;
    let best = cloud.projected_variance(&axis.direction);
    let beaten = (0..100)
        .filter(|_| {
            let v: Vec<f64> = (0..3).map(|_| normal(&mut rng)).collect();
            let n = dot(&v, &v).sqrt();
            let u: Vec<f64> = v.iter().map(|x| x / n).collect();
            cloud.projected_variance(&u) > best
        })
        .count();
    assert_eq!(beaten, 0);
}

#[test]
fn within_party_mapping_reduces_to_pairwise_coupling() {
    // equal candidate distances: e'_a ∝ (1 − p_b m) ê_a + p_b m ê_b
    let pairs = [
        CandidatePair::<f64>::new(vec![1.0, 0.0, 0.0], vec![-1.0, 0.0, 0.0]).unwrap(),
        CandidatePair::new(vec![0.5, 1.0, 1.0], vec![0.5, -1.0, 0.0]).unwrap(),
    ];
    let scale = pairs[0].distance() / pairs[1].distance();
    let pairs = vec![
        pairs[0].clone(),
        CandidatePair::new(
            pairs[1].d.iter().map(|x| x * scale).collect(),
            pairs[1].r.iter().map(|x| x * scale).collect(),
        )
        .unwrap(),
    ];
    let (pa, pb, m) = (0.3, 0.7, 0.4);
    let moved = partisan_transform(&pairs, PartisanMode::WithinParty, m, &[pa, pb]).unwrap();
    let ea = pairs[0].axis().unwrap();
    let eb = pairs[1].axis().unwrap();
    let (ca, cb) = couple_axes(&ea, &eb, 1.0 - pb * m, 1.0 - pa * m).unwrap();
    let system = InteractionSystem {
        axes: vec![ea, eb],
        scales: vec![ScaleInteraction {
            members: vec![0, 1],
            weights: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        }],
        w: 1.0,
        self_weights: Some(vec![1.0 - pb * m, 1.0 - pa * m]),
    };
    let ml = multilevel_couple(&system).unwrap();
    for (k, c) in [(0, &ca), (1, &cb)] {
        let direct = moved[k].axis().unwrap();
        for j in 0..3 {
            assert!((direct.direction[j] - c.direction[j]).abs() < 1e-12);
            assert!((ml[k].direction[j] - c.direction[j]).abs() < 1e-12);
        }
    }
}

fn national_system(
    local: Vec<ElectionAxis<f64>>,
    national: ElectionAxis<f64>,
    w: f64,
) -> InteractionSystem<f64> {
    let n = local.len();
    let mut axes = local;
    axes.push(national);
    // every local election pulled toward the national one, which keeps its own axis
    let weights = (0..=n).map(|i| vec![if i < n { 1.0 } else { 0.0 }]).collect();
    InteractionSystem {
        axes,
        scales: vec![ScaleInteraction {
            members: vec![n],
            weights,
        }],
        w,
        self_weights: Some((0..=n).map(|i| if i < n { w } else { 1.0 }).collect()),
    }
}

#[test]
fn identical_axes_have_zero_dispersion_at_any_coupling() {
    let e = axis(&[0.2, 0.9, 0.1]);
    for w in [1.0, 0.7, 0.2, 0.0] {
        let out = multilevel_couple(&national_system(vec![e.clone(); 4], e.clone(), w)).unwrap();
        assert!(circular_dispersion(&out, &e).unwrap().abs() < 1e-12);
    }
}

proptest! {
    #[test]
    fn dispersion_nonincreasing_under_coupling(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let national = axis(&[1.0, 0.0, 0.0]);
        // local axes within a right angle of the national one
        let local: Vec<ElectionAxis<f64>> = (0..6)
            .map(|_| {
                let v = [rng.random::<f64>() + 1e-3, normal(&mut rng), normal(&mut rng)];
                axis(&v)
            })
            .collect();
        let mut prev = f64::INFINITY;
        for k in 0..=20 {
            let w = 1.0 - k as f64 / 20.0;
            let out = multilevel_couple(&national_system(local.clone(), national.clone(), w)).unwrap();
            let d = circular_dispersion(&out, &national).unwrap();
            prop_assert!(d <= prev + 1e-12);
            prev = d;
        }
    }

    #[test]
    fn pairwise_coupling_contracts(seed in 0u64..10_000, wa in 0.5..1.0f64, wb in 0.5..1.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = axis(&[normal(&mut rng), normal(&mut rng), normal(&mut rng)]);
        let b = axis(&[normal(&mut rng), normal(&mut rng), normal(&mut rng)]);
        let (ca, cb) = couple_axes(&a, &b, wa, wb).unwrap();
        prop_assert!(ca.angle_to(&cb) <= a.angle_to(&b) + 1e-12);
        prop_assert!((dot(&ca.direction, &ca.direction) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tensor_linearity(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = 3;
        let a: Vec<Vec<f64>> = (0..d).map(|_| (0..d).map(|_| normal(&mut rng)).collect()).collect();
        let b: Vec<Vec<f64>> = (0..d).map(|_| (0..d).map(|_| normal(&mut rng)).collect()).collect();
        let pts: Vec<Vec<f64>> = (0..5).map(|_| (0..d).map(|_| normal(&mut rng)).collect()).collect();
        let cloud = OpinionCloud::uniform(pts).unwrap();
        let apply = |m: &Vec<Vec<f64>>, c: &OpinionCloud<f64>| {
            let x = c.mean();
            (0..d).map(|k| dot(&m[k], &x)).collect::<Vec<f64>>()
        };
        let fa = |c: &OpinionCloud<f64>| Ok(apply(&a, c));
        let fb = |c: &OpinionCloud<f64>| Ok(apply(&b, c));
        let fsum = |c: &OpinionCloud<f64>| {
            Ok(apply(&a, c).iter().zip(apply(&b, c)).map(|(x, y)| x + y).collect())
        };
        let h = [1e-3; 3];
        let ta = rep_tensor(&fa, &cloud, 1, &h, false).unwrap();
        let tb = rep_tensor(&fb, &cloud, 1, &h, false).unwrap();
        let ts = rep_tensor(&fsum, &cloud, 1, &h, false).unwrap();
        for mu in 0..d {
            for nu in 0..d {
                prop_assert!((ts.get(mu, nu) - ta.get(mu, nu) - tb.get(mu, nu)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn directional_parts_add_up(seed in 0u64..10_000, th in 0.0..std::f64::consts::TAU) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = 4;
        let rows: Vec<Vec<f64>> = (0..d).map(|_| (0..d).map(|_| normal(&mut rng)).collect()).collect();
        let t = RepTensor { matrix: Matrix::from_rows(rows).unwrap() };
        let e0: Vec<f64> = (0..d).map(|_| normal(&mut rng)).collect();
        let n = dot(&e0, &e0).sqrt();
        let e: Vec<f64> = e0.iter().map(|x| x / n).collect();
        let mut o: Vec<f64> = (0..d).map(|_| normal(&mut rng)).collect();
        let c0 = dot(&o, &e);
        o.iter_mut().zip(&e).for_each(|(x, &y)| *x -= c0 * y);
        let n = dot(&o, &o).sqrt();
        o.iter_mut().for_each(|x| *x /= n);
        let c: Vec<f64> = e.iter().zip(&o).map(|(&x, &y)| th.cos() * x + th.sin() * y).collect();
        let r = directional_rep(&t, &c, &e, &o).unwrap();
        prop_assert!((r.on_axis + r.off_axis - r.total).abs() < 1e-12);
    }
}

#[test]
fn multidimensional_elections_on_simple_clouds() {
    let cloud = OpinionCloud::<f64>::uniform(vec![vec![0.0, 0.0], vec![1.0, 3.0], vec![5.0, 1.0]]).unwrap();
    let mean = rep_tensor(&MeanElection, &cloud, 0, &[1e-4, 1e-4], true).unwrap();
    assert!((mean.get(0, 0) - 1.0 / 3.0).abs() < 1e-10 && mean.get(1, 0).abs() < 1e-10);
    // voter 1 is the median in x only
    let med = rep_tensor(&CoordinateMedianElection, &cloud, 1, &[1e-4, 1e-4], false).unwrap();
    assert!((med.get(0, 0) - 1.0).abs() < 1e-9);
    assert_eq!(med.get(1, 1), 0.0);
}
