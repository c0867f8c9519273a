//! Returns ingestion, unit tables and synthetic geographies.
//!
//! Returns CSV (one row per unit, header required):
//!
//! ```text
//! unit_id,latitude,longitude,votes_a,votes_b,total_votes[,county,state,...]
//! ```
//!
//! Column names and the region columns (finest first) come from a
//! [`SchemaConfig`], which can be read from a TOML file:
//!
//! ```toml
//! id = "precinct"
//! latitude = "lat"
//! longitude = "lon"
//! votes_a = "dem"
//! votes_b = "rep"
//! total = "total"
//! levels = ["county", "state"]
//! value_mode = "two-party"   # or "total" (default)
//! strict = false             # skip and count bad rows instead of aborting
//! ```
//!
//! Loaded units carry `coords = [longitude, latitude]`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::election::Mixture2;
use crate::error::{Error, Result};
use crate::geo_hierarchy::{GeoUnit, Opinion, RegionTree};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValueMode {
    /// `votes_a / total_votes`, population `total_votes`.
    #[default]
    Total,
    /// `votes_a / (votes_a + votes_b)`, population `votes_a + votes_b`.
    TwoParty,
}

/// Column mapping and parsing policy for returns files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemaConfig {
    pub id: String,
    pub latitude: String,
    pub longitude: String,
    pub votes_a: String,
    pub votes_b: String,
    pub total: String,
    /// Region columns, finest level first.
    pub levels: Vec<String>,
    pub value_mode: ValueMode,
    pub strict: bool,
}

impl Default for SchemaConfig {
    fn default() -> Self {
        SchemaConfig {
            id: "unit_id".into(),
            latitude: "latitude".into(),
            longitude: "longitude".into(),
            votes_a: "votes_a".into(),
            votes_b: "votes_b".into(),
            total: "total_votes".into(),
            levels: Vec::new(),
            value_mode: ValueMode::Total,
            strict: true,
        }
    }
}

impl SchemaConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }
}

/// One validated row of a returns file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnsRow {
    pub id: String,
    pub latitude: f64,
    pub longitude: f64,
    pub votes_a: u64,
    pub votes_b: u64,
    pub total_votes: u64,
    /// Region labels in the schema's level order.
    pub regions: Vec<String>,
}

impl ReturnsRow {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(-90.0..=90.0).contains(&self.latitude) {
            return Err(format!("latitude {} outside [-90, 90]", self.latitude));
        }
        if !(-180.0..=180.0).contains(&self.longitude) {
            return Err(format!("longitude {} outside [-180, 180]", self.longitude));
        }
        if self.total_votes == 0 {
            return Err("total_votes is zero; the vote share is undefined".into());
        }
        if self
            .votes_a
            .checked_add(self.votes_b)
            .is_none_or(|s| s > self.total_votes)
        {
            return Err(format!(
                "votes_a + votes_b = {} exceeds total_votes = {}",
                self.votes_a as u128 + self.votes_b as u128,
                self.total_votes
            ));
        }
        Ok(())
    }

    /// Unit with the share and population given by `mode`.
    pub fn to_unit<T: Scalar>(&self, mode: ValueMode) -> std::result::Result<GeoUnit<T>, String> {
        let (num, den) = match mode {
            ValueMode::Total => (self.votes_a, self.total_votes),
            ValueMode::TwoParty => (self.votes_a, self.votes_a + self.votes_b),
        };
        if den == 0 {
            return Err("no two-party votes; the two-party share is undefined".into());
        }
        Ok(GeoUnit::scalar(
            self.id.clone(),
            [T::lit(self.longitude), T::lit(self.latitude)],
            T::lit(den as f64),
            T::lit(num as f64 / den as f64),
        ))
    }
}

/// A rejected row in lenient mode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowDiagnostic {
    pub line: u64,
    pub message: String,
}

/// Parsed returns: valid rows plus the diagnostics of skipped ones.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedReturns<T> {
    pub rows: Vec<ReturnsRow>,
    pub units: Vec<GeoUnit<T>>,
    pub skipped: Vec<RowDiagnostic>,
}

impl<T: Scalar> LoadedReturns<T> {
    /// Region tree from the pre-assigned region columns.
    pub fn hierarchy(&self) -> Result<RegionTree> {
        let labels: Vec<Vec<String>> = self.rows.iter().map(|r| r.regions.clone()).collect();
        load_assigned_hierarchy(&labels)
    }
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::MissingColumn(name.to_string()))
}

fn parse_row(
    rec: &csv::StringRecord,
    cols: &[usize],
    region_cols: &[usize],
) -> std::result::Result<ReturnsRow, String> {
    let field = |k: usize| rec.get(cols[k]).unwrap_or("").trim();
    let float = |k: usize, what: &str| {
        field(k)
            .parse::<f64>()
            .map_err(|_| format!("{what} `{}` is not a number", field(k)))
    };
    let count = |k: usize, what: &str| {
        field(k)
            .parse::<u64>()
            .map_err(|_| format!("{what} `{}` must be a nonnegative integer", field(k)))
    };
    let id = field(0).to_string();
    if id.is_empty() {
        return Err("empty unit id".into());
    }
    let regions = region_cols
        .iter()
        .map(|&c| {
            let v = rec.get(c).unwrap_or("").trim();
            if v.is_empty() {
                Err("missing region id".to_string())
            } else {
                Ok(v.to_string())
            }
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let row = ReturnsRow {
        id,
        latitude: float(1, "latitude")?,
        longitude: float(2, "longitude")?,
        votes_a: count(3, "votes_a")?,
        votes_b: count(4, "votes_b")?,
        total_votes: count(5, "total_votes")?,
        regions,
    };
    row.validate()?;
    Ok(row)
}

/// Parses a returns CSV. Invalid rows abort in strict mode and are skipped
/// with a line-numbered diagnostic otherwise.
pub fn read_returns<T: Scalar, R: Read>(input: R, schema: &SchemaConfig) -> Result<LoadedReturns<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::Headers)
        .from_reader(input);
    let headers = rdr.headers()?.clone();
    let cols = [
        &schema.id,
        &schema.latitude,
        &schema.longitude,
        &schema.votes_a,
        &schema.votes_b,
        &schema.total,
    ]
    .iter()
    .map(|name| column(&headers, name))
    .collect::<Result<Vec<_>>>()?;
    let region_cols = schema
        .levels
        .iter()
        .map(|name| column(&headers, name))
        .collect::<Result<Vec<_>>>()?;
    let mut out = LoadedReturns {
        rows: Vec::new(),
        units: Vec::new(),
        skipped: Vec::new(),
    };
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let parsed = parse_row(&rec, &cols, &region_cols)
            .and_then(|row| row.to_unit::<T>(schema.value_mode).map(|u| (row, u)));
        match parsed {
            Ok((row, unit)) => {
                out.rows.push(row);
                out.units.push(unit);
            }
            Err(message) if schema.strict => return Err(Error::Row { line, message }),
            Err(message) => out.skipped.push(RowDiagnostic { line, message }),
        }
    }
    if out.rows.is_empty() {
        return Err(Error::Empty("returns file has no valid rows"));
    }
    Ok(out)
}

pub fn load_returns<T: Scalar>(path: impl AsRef<Path>, schema: &SchemaConfig) -> Result<LoadedReturns<T>> {
    read_returns(File::open(path)?, schema)
}

/// Writes rows under the schema's column names.
pub fn write_returns<W: Write>(rows: &[ReturnsRow], schema: &SchemaConfig, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![
        schema.id.clone(),
        schema.latitude.clone(),
        schema.longitude.clone(),
        schema.votes_a.clone(),
        schema.votes_b.clone(),
        schema.total.clone(),
    ];
    header.extend(schema.levels.iter().cloned());
    w.write_record(&header)?;
    for r in rows {
        if r.regions.len() != schema.levels.len() {
            return Err(Error::DimensionMismatch(format!(
                "row `{}` has {} region ids for {} levels",
                r.id,
                r.regions.len(),
                schema.levels.len()
            )));
        }
        let mut rec = vec![
            r.id.clone(),
            r.latitude.to_string(),
            r.longitude.to_string(),
            r.votes_a.to_string(),
            r.votes_b.to_string(),
            r.total_votes.to_string(),
        ];
        rec.extend(r.regions.iter().cloned());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Region tree from per-unit region labels (`labels[u][level]`, finest level
/// first). Region indices follow sorted label order, so the tree does not
/// depend on row order.
pub fn load_assigned_hierarchy(labels: &[Vec<String>]) -> Result<RegionTree> {
    let Some(first) = labels.first() else {
        return Err(Error::Empty("no units with region labels"));
    };
    let levels = first.len();
    if levels == 0 {
        return Err(Error::InvalidParameter("no region levels configured".into()));
    }
    if let Some(u) = labels.iter().position(|l| l.len() != levels) {
        return Err(Error::DimensionMismatch(format!(
            "unit {u} has {} region ids, expected {levels}",
            labels[u].len()
        )));
    }
    let mut assignment = Vec::with_capacity(levels);
    let mut names = Vec::with_capacity(levels);
    for s in 0..levels {
        let index: BTreeMap<&str, usize> = labels
            .iter()
            .map(|l| l[s].as_str())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .enumerate()
            .map(|(i, l)| (l, i))
            .collect();
        assignment.push(labels.iter().map(|l| index[l[s].as_str()]).collect());
        names.push(index.keys().map(|k| k.to_string()).collect());
    }
    RegionTree::build(assignment, Some(names))
}

/// Writes units as `unit_id,x,y,population,value` (scalar opinions) or
/// `unit_id,x,y,population,value_1..value_d`.
pub fn write_units<T: Scalar, W: Write>(units: &[GeoUnit<T>], out: W) -> Result<()> {
    let Some(first) = units.first() else {
        return Err(Error::Empty("no units to write"));
    };
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["unit_id", "x", "y", "population"].map(String::from).to_vec();
    match &first.value {
        Opinion::Scalar(_) => header.push("value".into()),
        Opinion::Vector(v) => header.extend((1..=v.len()).map(|k| format!("value_{k}"))),
    }
    w.write_record(&header)?;
    for u in units {
        if u.value.dim() != first.value.dim() {
            return Err(Error::DimensionMismatch(format!(
                "unit `{}` has a different opinion dimension",
                u.id
            )));
        }
        let mut rec = vec![
            u.id.clone(),
            u.coords[0].to_string(),
            u.coords[1].to_string(),
            u.population.to_string(),
        ];
        rec.extend(u.value.as_slice().iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the layout produced by [`write_units`].
pub fn read_units<T: Scalar, R: Read>(input: R) -> Result<Vec<GeoUnit<T>>> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    for (k, name) in ["unit_id", "x", "y", "population"].iter().enumerate() {
        if headers.get(k) != Some(name) {
            return Err(Error::MissingColumn(name.to_string()));
        }
    }
    let scalar = headers.get(4) == Some("value") && headers.len() == 5;
    if !scalar && headers.len() < 5 {
        return Err(Error::MissingColumn("value".into()));
    }
    let mut units = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let num = |k: usize| -> Result<T> {
            let f = rec.get(k).unwrap_or("");
            f.trim().parse::<f64>().map(T::lit).map_err(|_| Error::Row {
                line,
                message: format!("column `{}` value `{f}` is not a number", &headers[k]),
            })
        };
        let values = (4..headers.len()).map(num).collect::<Result<Vec<T>>>()?;
        let unit = GeoUnit {
            id: rec.get(0).unwrap_or("").to_string(),
            coords: [num(1)?, num(2)?],
            population: num(3)?,
            value: if scalar {
                Opinion::Scalar(values[0])
            } else {
                Opinion::Vector(values)
            },
        };
        unit.validate(false).map_err(|e| Error::Row {
            line,
            message: e.to_string(),
        })?;
        units.push(unit);
    }
    if units.is_empty() {
        return Err(Error::Empty("units file has no rows"));
    }
    Ok(units)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthMode {
    /// Every locale draws from the same mixture.
    Mixed,
    /// Half the locales lean to mode A, half to mode B; the overall share of
    /// each mode is preserved.
    Segregated,
}

/// Synthetic opinion geography parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthConfig {
    pub mode: SynthMode,
    pub locales: usize,
    pub per_locale: usize,
    pub mixture: Mixture2<f64>,
    pub seed: u64,
}

/// Samples `locales × per_locale` single-voter units with unit population.
/// Locale `l` occupies grid cell `(l mod side, l div side)` with units placed
/// uniformly inside it; the returned tree has one level (locales).
pub fn synth_geography(cfg: &SynthConfig) -> Result<(Vec<GeoUnit<f64>>, RegionTree)> {
    if cfg.locales < 2 || cfg.per_locale < 2 {
        return Err(Error::InvalidParameter(
            "need at least 2 locales and 2 units per locale".into(),
        ));
    }
    let mix = &cfg.mixture;
    if !(mix.sigma >= 0.0 && mix.sigma.is_finite()) {
        return Err(Error::InvalidParameter(
            "mixture width must be finite and nonnegative".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let l = cfg.locales;
    // probability of drawing from mode A in each locale
    let p_a: Vec<f64> = match cfg.mode {
        SynthMode::Mixed => vec![mix.pi_a; l],
        SynthMode::Segregated => {
            let biased = l / 2;
            let f = biased as f64 / l as f64;
            let q_a = (mix.pi_a / f).min(1.0);
            let q_b = ((mix.pi_a - f * q_a) / (1.0 - f)).clamp(0.0, 1.0);
            let mut p: Vec<f64> = (0..l).map(|i| if i < biased { q_a } else { q_b }).collect();
            p.shuffle(&mut rng);
            p
        }
    };
    let side = (l as f64).sqrt().ceil() as usize;
    let noise = Normal::new(0.0, mix.sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut units = Vec::with_capacity(l * cfg.per_locale);
    let mut level = Vec::with_capacity(l * cfg.per_locale);
    for (loc, &p) in p_a.iter().enumerate() {
        let (cx, cy) = ((loc % side) as f64, (loc / side) as f64);
        for k in 0..cfg.per_locale {
            let mu = if rng.random::<f64>() < p {
                mix.mu_a
            } else {
                mix.mu_b
            };
            let x = mu + noise.sample(&mut rng);
            let coords = [cx + rng.random::<f64>(), cy + rng.random::<f64>()];
            units.push(GeoUnit::scalar(format!("L{loc}-{k}"), coords, 1.0, x));
            level.push(loc);
        }
    }
    let labels = vec![(0..l).map(|i| format!("L{i}")).collect()];
    let tree = RegionTree::build(vec![level], Some(labels))?;
    Ok((units, tree))
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "unit_id,latitude,longitude,votes_a,votes_b,total_votes\n";

    #[test]
    fn basic_row() {
        let text = format!("{HEADER}p1,40.0,-75.1,60,40,100\n");
        let r = read_returns::<f64, _>(text.as_bytes(), &SchemaConfig::default()).unwrap();
        let u = &r.units[0];
        assert_eq!(u.value, Opinion::Scalar(0.6));
        assert_eq!(u.population, 100.0);
        assert_eq!(u.coords, [-75.1, 40.0]);
    }

    #[test]
    fn negative_votes_rejected_with_line() {
        let text = format!("{HEADER}p1,40.0,-75.1,60,40,100\np2,40.0,-75.1,-1,40,100\n");
        match read_returns::<f64, _>(text.as_bytes(), &SchemaConfig::default()) {
            Err(Error::Row { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("votes_a"));
            }
            other => panic!("expected a row error, got {other:?}"),
        }
        let lenient = SchemaConfig {
            strict: false,
            ..SchemaConfig::default()
        };
        let r = read_returns::<f64, _>(text.as_bytes(), &lenient).unwrap();
        assert_eq!((r.units.len(), r.skipped.len()), (1, 1));
        assert_eq!(r.skipped[0].line, 3);
    }

    #[test]
    fn invariant_violations() {
        for row in [
            "p,40,-75,60,50,100",
            "p,40,-75,0,0,0",
            "p,95,-75,1,1,2",
            "p,40,-75,x,1,2",
        ] {
            let text = format!("{HEADER}{row}\n");
            assert!(read_returns::<f64, _>(text.as_bytes(), &SchemaConfig::default()).is_err());
        }
        let missing = "unit_id,latitude,longitude,votes_a,votes_b\np,1,1,1,1\n";
        assert!(matches!(
            read_returns::<f64, _>(missing.as_bytes(), &SchemaConfig::default()),
            Err(Error::MissingColumn(_))
        ));
        assert!(read_returns::<f64, _>(HEADER.as_bytes(), &SchemaConfig::default()).is_err());
    }

    #[test]
    fn two_party_mode() {
        let text = format!("{HEADER}p1,40.0,-75.1,60,20,100\n");
        let schema = SchemaConfig {
            value_mode: ValueMode::TwoParty,
            ..SchemaConfig::default()
        };
        let r = read_returns::<f64, _>(text.as_bytes(), &schema).unwrap();
        assert_eq!(r.units[0].value, Opinion::Scalar(0.75));
        assert_eq!(r.units[0].population, 80.0);
    }

    #[test]
    fn toml_schema() {
        let s = SchemaConfig::from_toml_str(
            "id = \"fips\"\nlevels = [\"county\", \"state\"]\nvalue_mode = \"two-party\"\nstrict = false\n",
        )
        .unwrap();
        assert_eq!(s.id, "fips");
        assert_eq!(s.total, "total_votes");
        assert_eq!(s.value_mode, ValueMode::TwoParty);
        assert!(SchemaConfig::from_toml_str("bogus = 1").is_err());
    }

    fn labels(rows: &[(&str, &str)]) -> Vec<Vec<String>> {
        rows.iter()
            .map(|(c, s)| vec![c.to_string(), s.to_string()])
            .collect()
    }

    #[test]
    fn assigned_hierarchy() {
        let t =
            load_assigned_hierarchy(&labels(&[("c1", "s"), ("c1", "s"), ("c2", "s"), ("c2", "s")])).unwrap();
        assert_eq!((t.levels(), t.region_count(1), t.region_count(2)), (2, 2, 1));
        let bad = load_assigned_hierarchy(&labels(&[("c1", "s1"), ("c1", "s2")]));
        match bad {
            Err(Error::Nesting(msg)) => {
                assert!(msg.contains("c1") && msg.contains("s1") && msg.contains("s2"))
            }
            other => panic!("expected nesting error, got {other:?}"),
        }
    }

    #[test]
    fn region_indices_ignore_row_order() {
        let a = load_assigned_hierarchy(&labels(&[("b", "x"), ("a", "x"), ("c", "y")])).unwrap();
        let b = load_assigned_hierarchy(&labels(&[("c", "y"), ("b", "x"), ("a", "x")])).unwrap();
        assert_eq!(a.level(1), &[1, 0, 2]);
        assert_eq!(b.level(1), &[2, 1, 0]);
        assert_eq!(a.region_label(1, 0), b.region_label(1, 0));
    }

    #[test]
    fn units_round_trip() {
        let units = vec![
            GeoUnit::scalar("a", [0.1f64, 2.0 / 3.0], 3.0, 0.123456789012345),
            GeoUnit::scalar("b", [1e-17, -5.5], 0.0, 1.0 / 7.0),
        ];
        let mut buf = Vec::new();
        write_units(&units, &mut buf).unwrap();
        assert_eq!(read_units::<f64, _>(buf.as_slice()).unwrap(), units);
        let vecs = vec![GeoUnit::vector("v", [0.0f64, 0.0], 1.0, vec![0.5, -0.25])];
        let mut buf = Vec::new();
        write_units(&vecs, &mut buf).unwrap();
        assert_eq!(read_units::<f64, _>(buf.as_slice()).unwrap(), vecs);
    }

    #[test]
    fn synth_is_deterministic_and_shaped() {
        let cfg = SynthConfig {
            mode: SynthMode::Segregated,
            locales: 6,
            per_locale: 5,
            mixture: Mixture2::symmetric(1.0, 0.1).unwrap(),
            seed: 9,
        };
        let (u1, t1) = synth_geography(&cfg).unwrap();
        let (u2, t2) = synth_geography(&cfg).unwrap();
        assert_eq!((u1.len(), t1.region_count(1)), (30, 6));
        assert_eq!((&u1, &t1), (&u2, &t2));
        let bad = SynthConfig { locales: 1, ..cfg };
        assert!(synth_geography(&bad).is_err());
    }
}
