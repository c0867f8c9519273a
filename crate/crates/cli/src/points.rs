use std::path::Path;

use anyhow::{bail, Context, Result};

/// Points file: a header row, optional `region` and `weight` columns, and
/// every other column a coordinate, in file order.
pub struct Points {
    pub coordinate_names: Vec<String>,
    pub regions: Vec<String>,
    pub coords: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl Points {
    pub fn dim(&self) -> usize {
        self.coordinate_names.len()
    }

    /// Region labels in first-appearance order.
    pub fn region_names(&self) -> Vec<String> {
        let mut seen = Vec::new();
        for r in &self.regions {
            if !seen.contains(r) {
                seen.push(r.clone());
            }
        }
        seen
    }
}

pub fn read_points(path: &Path) -> Result<Points> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let region_col = headers.iter().position(|h| h == "region");
    let weight_col = headers.iter().position(|h| h == "weight");
    let coord_cols: Vec<usize> = (0..headers.len())
        .filter(|&c| Some(c) != region_col && Some(c) != weight_col)
        .collect();
    if coord_cols.is_empty() {
        bail!("{}: no coordinate columns", path.display());
    }
    let mut pts = Points {
        coordinate_names: coord_cols.iter().map(|&c| headers[c].to_string()).collect(),
        regions: Vec::new(),
        coords: Vec::new(),
        weights: Vec::new(),
    };
    for (k, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = k + 2;
        let field = |c: usize| -> Result<f64> {
            let raw = rec.get(c).unwrap_or("").trim();
            let v: f64 = raw
                .parse()
                .with_context(|| format!("line {line}: `{}` = {raw:?} is not a number", &headers[c]))?;
            if !v.is_finite() {
                bail!("line {line}: `{}` is not finite", &headers[c]);
            }
            Ok(v)
        };
        pts.coords
            .push(coord_cols.iter().map(|&c| field(c)).collect::<Result<_>>()?);
        pts.weights.push(match weight_col {
            Some(c) => field(c)?,
            None => 1.0,
        });
        pts.regions.push(match region_col {
            Some(c) => rec.get(c).unwrap_or("").to_string(),
            None => "all".to_string(),
        });
    }
    if pts.coords.is_empty() {
        bail!("{}: no points", path.display());
    }
    Ok(pts)
}
