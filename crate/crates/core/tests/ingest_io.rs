use std::collections::BTreeMap;
use std::io::Write;

use polarscale::election::Mixture2;
use polarscale::geo_hierarchy::GeoUnit;
use polarscale::ingest::{
    load_returns, read_returns, read_units, synth_geography, write_returns, write_units, ReturnsRow,
    SchemaConfig, SynthConfig, SynthMode, ValueMode,
};
use polarscale::scale_variance::{decompose, decompose_bernoulli};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const HEADER: &str = "unit_id,latitude,longitude,votes_a,votes_b,total_votes,county,state\n";

fn schema() -> SchemaConfig {
    SchemaConfig {
        levels: vec!["county".into(), "state".into()],
        ..SchemaConfig::default()
    }
}

fn random_rows(rng: &mut ChaCha8Rng, n: usize) -> Vec<ReturnsRow> {
    (0..n)
        .map(|i| {
            let total = rng.random_range(1..5000u64);
            let a = rng.random_range(0..=total);
            let b = rng.random_range(0..=total - a);
            let state = i % 3;
            let county = state * 10 + rng.random_range(0..4);
            ReturnsRow {
                id: format!("p{i:03}"),
                latitude: rng.random_range(-60.0..60.0),
                longitude: rng.random_range(-170.0..170.0),
                votes_a: a,
                votes_b: b,
                total_votes: total,
                regions: vec![format!("c{county}"), format!("s{state}")],
            }
        })
        .collect()
}

#[test]
fn three_row_fixture_by_hand() {
    let text =
        format!("{HEADER}a,1.0,2.0,30,70,100,x,s\nb,1.0,2.0,60,40,100,x,s\nc,1.0,2.0,180,120,300,y,s\n");
    let r = read_returns::<f64, _>(text.as_bytes(), &schema()).unwrap();
    let tree = r.hierarchy().unwrap();
    let dec = decompose(&tree, &r.units).unwrap();
    // shares .3, .6, .6 with weights 1/5, 1/5, 3/5; county means .45 and .6
    let mean = 0.54;
    let total = 0.2 * (0.3f64 - mean).powi(2) + 0.8 * (0.6f64 - mean).powi(2);
    let within_county = 0.4 * 0.0225;
    let between_county = 0.4 * (0.45f64 - mean).powi(2) + 0.6 * (0.6f64 - mean).powi(2);
    assert!((dec.total - total).abs() < 1e-15);
    assert!((dec.added[0] - within_county).abs() < 1e-15);
    assert!((dec.added[1] - between_county).abs() < 1e-15);
    assert!(dec.added[2].abs() < 1e-15);
}

#[test]
fn loader_totals_match_independent_aggregates() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let rows = random_rows(&mut rng, 120);
    let mut buf = Vec::new();
    write_returns(&rows, &schema(), &mut buf).unwrap();
    for mode in [ValueMode::Total, ValueMode::TwoParty] {
        let s = SchemaConfig {
            value_mode: mode,
            strict: false,
            ..schema()
        };
        let r = read_returns::<f64, _>(buf.as_slice(), &s).unwrap();
        let den = |row: &ReturnsRow| match mode {
            ValueMode::Total => row.total_votes,
            ValueMode::TwoParty => row.votes_a + row.votes_b,
        };
        let kept: Vec<&ReturnsRow> = rows.iter().filter(|row| den(row) > 0).collect();
        assert_eq!(r.units.len(), kept.len());
        let votes: u64 = kept.iter().map(|row| row.votes_a).sum();
        let pop: u64 = kept.iter().map(|row| den(row)).sum();
        let loaded_pop: f64 = r.units.iter().map(|u| u.population).sum();
        let loaded_votes: f64 = r
            .units
            .iter()
            .map(|u| u.population * u.value.as_scalar().unwrap())
            .sum();
        assert_eq!(loaded_pop, pop as f64);
        assert!((loaded_votes - votes as f64).abs() < 1e-6);
        // per-state populations from the tree against a direct tally
        let tree = r.hierarchy().unwrap();
        let pops = tree.region_populations(&r.units).unwrap();
        let mut tally: BTreeMap<String, u64> = BTreeMap::new();
        for row in &kept {
            *tally.entry(row.regions[1].clone()).or_default() += den(row);
        }
        for (k, (label, p)) in tally.iter().enumerate() {
            assert_eq!(&tree.region_label(2, k), label);
            assert_eq!(pops[1][k], *p as f64);
        }
    }
}

#[test]
fn returns_round_trip_through_disk() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let rows = random_rows(&mut rng, 40);
    let mut file = tempfile::NamedTempFile::new().unwrap();
    write_returns(&rows, &schema(), &mut file).unwrap();
    file.flush().unwrap();
    let r = load_returns::<f64>(file.path(), &schema()).unwrap();
    assert_eq!(r.rows, rows);
    assert!(r.skipped.is_empty());
}

#[test]
fn units_round_trip() {
    let units = vec![
        GeoUnit::vector("a", [0.5, -1.25], 3.0, vec![0.1, 0.2]),
        GeoUnit::vector("b", [1.0 / 3.0, 2.0], 1.5, vec![-0.7, 1e-17]),
    ];
    let mut buf = Vec::new();
    write_units(&units, &mut buf).unwrap();
    assert!(buf.starts_with(b"unit_id,x,y,population,value_1,value_2\n"));
    assert_eq!(read_units::<f64, _>(buf.as_slice()).unwrap(), units);
    let scalar = vec![GeoUnit::scalar("s", [0.0, 0.0], 1.0, 0.25f64)];
    let mut buf = Vec::new();
    write_units(&scalar, &mut buf).unwrap();
    assert!(buf.starts_with(b"unit_id,x,y,population,value\n"));
    assert_eq!(read_units::<f64, _>(buf.as_slice()).unwrap(), scalar);
}

#[test]
fn shuffled_rows_give_the_same_tree() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let rows = random_rows(&mut rng, 60);
    let mut shuffled = rows.clone();
    shuffled.shuffle(&mut rng);
    let load = |rows: &[ReturnsRow]| {
        let mut buf = Vec::new();
        write_returns(rows, &schema(), &mut buf).unwrap();
        let r = read_returns::<f64, _>(buf.as_slice(), &schema()).unwrap();
        let tree = r.hierarchy().unwrap();
        let by_id: BTreeMap<String, Vec<String>> = r
            .units
            .iter()
            .enumerate()
            .map(|(u, unit)| {
                let path = (1..=tree.levels())
                    .map(|s| tree.region_label(s, tree.region(s, u)))
                    .collect();
                (unit.id.clone(), path)
            })
            .collect();
        (by_id, decompose(&tree, &r.units).unwrap())
    };
    let (a, da) = load(&rows);
    let (b, db) = load(&shuffled);
    assert_eq!(a, b);
    for (x, y) in da.added.iter().zip(&db.added) {
        assert!((x - y).abs() < 1e-14);
    }
}

fn synth(mode: SynthMode, sigma: f64, seed: u64) -> polarscale::ScaleDecomposition {
    let cfg = SynthConfig {
        mode,
        locales: 64,
        per_locale: 50,
        // built field by field: the constructor rejects a zero width
        mixture: Mixture2 {
            pi_a: 0.5,
            pi_b: 0.5,
            mu_a: 1.0,
            mu_b: -1.0,
            sigma,
        },
        seed,
    };
    let (units, tree) = synth_geography(&cfg).unwrap();
    decompose(&tree, &units).unwrap()
}

#[test]
fn segregated_without_noise_is_all_between_locales() {
    let d = synth(SynthMode::Segregated, 0.0, 1);
    assert!(d.added[0].abs() < 1e-15);
    assert!((d.added[1] - 1.0).abs() < 1e-12);
}

#[test]
fn mixed_locales_differ_by_sampling_noise_only() {
    // locale means of 50 draws: between-locale variance ≈ Var / 50
    let mut between = 0.0;
    let reps = 20;
    for seed in 0..reps {
        let d = synth(SynthMode::Mixed, 0.5, seed);
        between += d.added[1] / d.total;
    }
    let ratio = between / reps as f64 * 50.0;
    assert!((ratio - 1.0).abs() < 0.1, "ratio {ratio}");
}

#[test]
fn mixed_and_segregated_share_totals_but_not_scales() {
    let reps = 30;
    let (mut tm, mut ts) = (Vec::new(), Vec::new());
    for seed in 0..reps {
        let m = synth(SynthMode::Mixed, 0.5, seed);
        let s = synth(SynthMode::Segregated, 0.5, 1000 + seed);
        tm.push(m.total);
        ts.push(s.total);
        assert!(s.added[1] > 10.0 * m.added[1]);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let var = |v: &[f64]| {
        let m = mean(v);
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)
    };
    let se = ((var(&tm) + var(&ts)) / reps as f64).sqrt();
    assert!(
        (mean(&tm) - mean(&ts)).abs() < 3.0 * se + 1e-12,
        "{} vs {} (se {se})",
        mean(&tm),
        mean(&ts)
    );
}

#[test]
fn returns_pipeline_bernoulli_decomposition() {
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    let rows = random_rows(&mut rng, 90);
    let mut file = tempfile::NamedTempFile::new().unwrap();
    write_returns(&rows, &schema(), &mut file).unwrap();
    file.flush().unwrap();
    let s = SchemaConfig {
        value_mode: ValueMode::TwoParty,
        strict: false,
        ..schema()
    };
    let r = load_returns::<f64>(file.path(), &s).unwrap();
    let dec = decompose_bernoulli(&r.hierarchy().unwrap(), &r.units).unwrap();
    let a: u64 = r.rows.iter().map(|row| row.votes_a).sum();
    let n: u64 = r.rows.iter().map(|row| row.votes_a + row.votes_b).sum();
    let p = a as f64 / n as f64;
    assert!((dec.sum_added() - p * (1.0 - p)).abs() < 1e-12);
    assert_eq!(dec.groups[0] as u64, n);
    let norm = dec.normalized(p).unwrap();
    assert!((norm.sum_added() - 1.0).abs() < 1e-12);
    let share = dec.within_share(3).unwrap();
    assert!((0.0..=1.0 + 1e-12).contains(&share));
}
