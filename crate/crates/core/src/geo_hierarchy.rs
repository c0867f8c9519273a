//! Nested region hierarchies over atomic electoral units.
//!
//! A [`RegionTree`] with `N` levels assigns every unit one region per scale,
//! scale 1 being the finest and scale `N` the coarsest. The whole country is
//! the implicit scale `N + 1`. Two builders are provided:
//!
//! * [`build_kdtree_hierarchy`] splits the units recursively at the count
//!   median, alternating the coordinate axis (first coordinate at the root).
//!   Ties on the coordinate are broken by unit id.
//! * [`build_random_hierarchy`] shuffles the units with a seeded generator and
//!   halves the shuffled order recursively. Aggregating over such a tree
//!   ignores geography and serves as the central-limit baseline.
//!
//! Both builders split a node of `n` units into `n / 2` and `n - n / 2`
//! units, so sibling counts never differ by more than one.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Opinion carried by a unit: a scalar (e.g. a vote share) or a d-vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Opinion<T> {
    Scalar(T),
    Vector(Vec<T>),
}

impl<T: Scalar> Opinion<T> {
    pub fn dim(&self) -> usize {
        match self {
            Opinion::Scalar(_) => 1,
            Opinion::Vector(v) => v.len(),
        }
    }

    pub fn as_scalar(&self) -> Option<T> {
        match self {
            Opinion::Scalar(x) => Some(*x),
            Opinion::Vector(v) if v.len() == 1 => Some(v[0]),
            Opinion::Vector(_) => None,
        }
    }

    pub fn as_slice(&self) -> &[T] {
        match self {
            Opinion::Scalar(x) => std::slice::from_ref(x),
            Opinion::Vector(v) => v,
        }
    }
}

/// One atomic electoral unit (precinct, county, synthetic voter).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoUnit<T> {
    pub id: String,
    /// Planar coordinates used only for partitioning.
    pub coords: [T; 2],
    pub population: T,
    pub value: Opinion<T>,
}

impl<T: Scalar> GeoUnit<T> {
    pub fn scalar(id: impl Into<String>, coords: [T; 2], population: T, value: T) -> Self {
        GeoUnit {
            id: id.into(),
            coords,
            population,
            value: Opinion::Scalar(value),
        }
    }

    pub fn vector(id: impl Into<String>, coords: [T; 2], population: T, value: Vec<T>) -> Self {
        GeoUnit {
            id: id.into(),
            coords,
            population,
            value: Opinion::Vector(value),
        }
    }

    /// Checks the unit invariants: finite coordinates, nonnegative population,
    /// finite values, and scalar shares confined to `[0, 1]` when `share` is set.
    pub fn validate(&self, share: bool) -> Result<()> {
        if !self.coords.iter().all(|c| c.is_finite()) {
            return Err(Error::NonFinite(format!("coordinates of unit `{}`", self.id)));
        }
        if !(self.population >= T::zero()) || !self.population.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "population of unit `{}` must be finite and nonnegative",
                self.id
            )));
        }
        if !self.value.as_slice().iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite(format!("value of unit `{}`", self.id)));
        }
        if share {
            if let Opinion::Scalar(v) = self.value {
                if v < T::zero() || v > T::one() {
                    return Err(Error::InvalidParameter(format!(
                        "vote share {v} of unit `{}` outside [0, 1]",
                        self.id
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Nested assignment of units to regions, finest scale first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionTree {
    /// `assignment[s][u]` is the region of unit `u` at scale `s + 1`.
    assignment: Vec<Vec<usize>>,
    region_counts: Vec<usize>,
    /// `parent[s][r]` is the scale-`s + 2` region containing scale-`s + 1` region `r`.
    parent: Vec<Vec<usize>>,
    labels: Option<Vec<Vec<String>>>,
}

impl RegionTree {
    /// Builds a tree from per-level region indices (finest level first),
    /// validating that every level covers every unit and that levels nest.
    ///
    /// Region indices at each level must be dense (`0..count`).
    pub fn from_assignments(assignment: Vec<Vec<usize>>) -> Result<Self> {
        Self::build(assignment, None)
    }

    pub(crate) fn build(assignment: Vec<Vec<usize>>, labels: Option<Vec<Vec<String>>>) -> Result<Self> {
        let Some(first) = assignment.first() else {
            return Err(Error::Empty("region tree needs at least one level"));
        };
        let n = first.len();
        if n == 0 {
            return Err(Error::Empty("region tree over zero units"));
        }
        let mut region_counts = Vec::with_capacity(assignment.len());
        for (s, level) in assignment.iter().enumerate() {
            if level.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "level {} assigns {} units, expected {n}",
                    s + 1,
                    level.len()
                )));
            }
            let count = level.iter().copied().max().map_or(0, |m| m + 1);
            let mut seen = vec![false; count];
            level.iter().for_each(|&r| seen[r] = true);
            if let Some(hole) = seen.iter().position(|&x| !x) {
                return Err(Error::InvalidParameter(format!(
                    "level {} has no unit in region {hole}; region indices must be dense",
                    s + 1
                )));
            }
            region_counts.push(count);
        }
        let mut parent = Vec::with_capacity(assignment.len().saturating_sub(1));
        for s in 0..assignment.len().saturating_sub(1) {
            let mut up = vec![usize::MAX; region_counts[s]];
            for (&child, &par) in assignment[s].iter().zip(&assignment[s + 1]) {
                if up[child] == usize::MAX {
                    up[child] = par;
                } else if up[child] != par {
                    let name = |lvl: usize, r: usize| match &labels {
                        Some(l) => l[lvl][r].clone(),
                        None => r.to_string(),
                    };
                    return Err(Error::Nesting(format!(
                        "region `{}` at scale {} lies in both `{}` and `{}` at scale {}",
                        name(s, child),
                        s + 1,
                        name(s + 1, up[child]),
                        name(s + 1, par),
                        s + 2
                    )));
                }
            }
            parent.push(up);
        }
        Ok(RegionTree {
            assignment,
            region_counts,
            parent,
            labels,
        })
    }

    /// Number of nested scales `N` (the whole country is not counted).
    pub fn levels(&self) -> usize {
        self.assignment.len()
    }

    pub fn num_units(&self) -> usize {
        self.assignment[0].len()
    }

    /// Region index of `unit` at scale `scale` (1-based, `1..=N`).
    pub fn region(&self, scale: usize, unit: usize) -> usize {
        self.assignment[scale - 1][unit]
    }

    /// Per-unit region indices at `scale` (1-based).
    pub fn level(&self, scale: usize) -> &[usize] {
        &self.assignment[scale - 1]
    }

    /// Region count at `scale` (1-based); scale `N + 1` has one region.
    pub fn region_count(&self, scale: usize) -> usize {
        if scale == self.levels() + 1 {
            1
        } else {
            self.region_counts[scale - 1]
        }
    }

    /// Parent region at scale `scale + 1` of region `region` at `scale`.
    /// Regions at scale `N` all have parent 0 (the whole country).
    pub fn parent(&self, scale: usize, region: usize) -> usize {
        if scale == self.levels() {
            0
        } else {
            self.parent[scale - 1][region]
        }
    }

    pub fn labels(&self) -> Option<&[Vec<String>]> {
        self.labels.as_deref()
    }

    pub fn region_label(&self, scale: usize, region: usize) -> String {
        match &self.labels {
            Some(l) => l[scale - 1][region].clone(),
            None => region.to_string(),
        }
    }

    /// Unit counts per region at `scale` (1-based).
    pub fn region_sizes(&self, scale: usize) -> Vec<usize> {
        let mut sizes = vec![0; self.region_count(scale)];
        if scale == self.levels() + 1 {
            sizes[0] = self.num_units();
        } else {
            self.level(scale).iter().for_each(|&r| sizes[r] += 1);
        }
        sizes
    }

    /// Region populations per level (finest first), summed from member units.
    pub fn region_populations<T: Scalar>(&self, units: &[GeoUnit<T>]) -> Result<Vec<Vec<T>>> {
        self.check_units(units)?;
        Ok(self
            .assignment
            .iter()
            .zip(&self.region_counts)
            .map(|(level, &count)| {
                let mut pops = vec![T::zero(); count];
                for (u, &r) in level.iter().enumerate() {
                    pops[r] += units[u].population;
                }
                pops
            })
            .collect())
    }

    pub(crate) fn check_units<T>(&self, units: &[GeoUnit<T>]) -> Result<()> {
        if units.len() != self.num_units() {
            return Err(Error::DimensionMismatch(format!(
                "tree covers {} units but {} were supplied",
                self.num_units(),
                units.len()
            )));
        }
        Ok(())
    }

    /// True when every pair of units sharing a scale-`i` region shares all
    /// coarser regions. Always holds for a constructed tree.
    pub fn is_nested(&self) -> bool {
        (0..self.levels().saturating_sub(1)).all(|s| {
            let mut up: HashMap<usize, usize> = HashMap::new();
            (0..self.num_units()).all(|u| {
                let par = self.assignment[s + 1][u];
                *up.entry(self.assignment[s][u]).or_insert(par) == par
            })
        })
    }

    /// Writes `unit_id,scale_1,...,scale_N` rows.
    pub fn write_assignment_csv<T, W: Write>(&self, units: &[GeoUnit<T>], out: W) -> Result<()> {
        self.check_units(units)?;
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["unit_id".to_string()];
        header.extend((1..=self.levels()).map(|s| format!("scale_{s}")));
        w.write_record(&header)?;
        for (u, unit) in units.iter().enumerate() {
            let mut rec = vec![unit.id.clone()];
            rec.extend((1..=self.levels()).map(|s| self.region_label(s, self.region(s, u))));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_depth<T>(units: &[GeoUnit<T>], depth: usize) -> Result<()> {
    if units.is_empty() {
        return Err(Error::Empty("no units to partition"));
    }
    if depth == 0 {
        return Err(Error::InvalidParameter("depth must be at least 1".into()));
    }
    if depth >= usize::BITS as usize || (1usize << depth) > units.len() {
        return Err(Error::InvalidParameter(format!(
            "depth {depth} needs at least 2^{depth} units, got {}",
            units.len()
        )));
    }
    Ok(())
}

/// Recursively halves `order`, calling `arrange` on each node's slice before
/// it is split, and records region indices for every level from the root.
fn halve_recursively(
    order: &mut [usize],
    n_units: usize,
    depth: usize,
    mut arrange: impl FnMut(&mut [usize], usize),
) -> Vec<Vec<usize>> {
    // from_root[l][u]: node index of unit u at depth l + 1 below the root
    let mut from_root = vec![vec![0usize; n_units]; depth];
    let mut nodes: Vec<(usize, usize)> = vec![(0, order.len())];
    for (l, row) in from_root.iter_mut().enumerate() {
        let mut next = Vec::with_capacity(nodes.len() * 2);
        for &(lo, hi) in &nodes {
            arrange(&mut order[lo..hi], l);
            let mid = lo + (hi - lo) / 2;
            next.push((lo, mid));
            next.push((mid, hi));
        }
        for (k, &(lo, hi)) in next.iter().enumerate() {
            for &u in &order[lo..hi] {
                row[u] = k;
            }
        }
        nodes = next;
    }
    from_root.reverse();
    from_root
}

/// Equal-count k-d tree hierarchy of `depth` binary levels.
///
/// Scale 1 holds the `2^depth` leaves and scale `depth` the two halves below
/// the root.
pub fn build_kdtree_hierarchy<T: Scalar>(units: &[GeoUnit<T>], depth: usize) -> Result<RegionTree> {
    check_depth(units, depth)?;
    for u in units {
        if !u.coords.iter().all(|c| c.is_finite()) {
            return Err(Error::NonFinite(format!("coordinates of unit `{}`", u.id)));
        }
    }
    let mut order: Vec<usize> = (0..units.len()).collect();
    let assignment = halve_recursively(&mut order, units.len(), depth, |slice, l| {
        let axis = l % 2;
        slice.sort_by(|&a, &b| {
            let (ca, cb) = (units[a].coords[axis], units[b].coords[axis]);
            ca.partial_cmp(&cb)
                .unwrap_or(Ordering::Equal)
                .then_with(|| units[a].id.cmp(&units[b].id))
        });
    });
    RegionTree::from_assignments(assignment)
}

/// Geography-blind hierarchy: units shuffled by `seed`, then halved into
/// contiguous equal-count blocks.
pub fn build_random_hierarchy<T: Scalar>(
    units: &[GeoUnit<T>],
    depth: usize,
    seed: u64,
) -> Result<RegionTree> {
    check_depth(units, depth)?;
    let mut order: Vec<usize> = (0..units.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let assignment = halve_recursively(&mut order, units.len(), depth, |_, _| {});
    RegionTree::from_assignments(assignment)
}
