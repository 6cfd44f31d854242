//! Shared data types: sparse intensity panels, binary specialization
//! matrices, region adjacency graphs and per-region indicator series.
//!
//! All types are immutable once built, so they can be shared across the
//! worker threads of [`crate::par::Exec`] without locking.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::ops::RangeInclusive;

use crate::error::{Error, Result};

/// One stored cell of an [`ActivityPanel`] year slice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entry {
    pub region: usize,
    pub activity: usize,
    pub value: f64,
}

/// Region × activity × year intensity tensor (hours worked, export value).
///
/// Only strictly positive values are stored; an absent cell is a zero flow.
/// Identifier lists are sorted so that the same data always produces the
/// same panel regardless of input row order.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivityPanel {
    regions: Vec<String>,
    activities: Vec<String>,
    years: Vec<i32>,
    // one slice per entry of `years`, sorted by (region, activity)
    slices: Vec<Vec<Entry>>,
}

impl ActivityPanel {
    pub fn regions(&self) -> &[String] {
        &self.regions
    }

    pub fn activities(&self) -> &[String] {
        &self.activities
    }

    pub fn years(&self) -> &[i32] {
        &self.years
    }

    pub fn year_index(&self, year: i32) -> Option<usize> {
        self.years.binary_search(&year).ok()
    }

    /// Stored entries of one year, sorted by (region, activity).
    pub fn year_entries(&self, year: i32) -> Option<&[Entry]> {
        self.year_index(year).map(|y| self.slices[y].as_slice())
    }

    pub fn n_stored(&self) -> usize {
        self.slices.iter().map(Vec::len).sum()
    }

    pub fn get(&self, region: &str, activity: &str, year: i32) -> f64 {
        let (Some(r), Some(a), Some(y)) = (
            index_of(&self.regions, region),
            index_of(&self.activities, activity),
            self.year_index(year),
        ) else {
            return 0.0;
        };
        let slice = &self.slices[y];
        slice
            .binary_search_by(|e| (e.region, e.activity).cmp(&(r, a)))
            .map(|k| slice[k].value)
            .unwrap_or(0.0)
    }

    /// Dense row-major region × activity matrix for one year.
    pub fn dense_year(&self, year: i32) -> Option<Vec<f64>> {
        let entries = self.year_entries(year)?;
        let n_a = self.activities.len();
        let mut out = vec![0.0; self.regions.len() * n_a];
        for e in entries {
            out[e.region * n_a + e.activity] = e.value;
        }
        Some(out)
    }

    /// Iterates over every stored cell as `(region, activity, year, value)`.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, i32, f64)> + '_ {
        self.years.iter().zip(&self.slices).flat_map(move |(&year, slice)| {
            slice.iter().map(move |e| {
                (
                    self.regions[e.region].as_str(),
                    self.activities[e.activity].as_str(),
                    year,
                    e.value,
                )
            })
        })
    }
}

/// Accumulates intensity records; repeated keys are summed.
#[derive(Debug, Default)]
pub struct PanelBuilder {
    regions: BTreeSet<String>,
    activities: BTreeSet<String>,
    years: BTreeSet<i32>,
    values: HashMap<(String, String, i32), f64>,
}

impl PanelBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one record. Zero values register the identifiers but store nothing.
    pub fn add(&mut self, region: &str, activity: &str, year: i32, value: f64) -> Result<()> {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::invalid(format!(
                "intensity must be a finite nonnegative number, got {value} for ({region}, {activity}, {year})"
            )));
        }
        if !self.regions.contains(region) {
            self.regions.insert(region.to_owned());
        }
        if !self.activities.contains(activity) {
            self.activities.insert(activity.to_owned());
        }
        self.years.insert(year);
        if value > 0.0 {
            *self
                .values
                .entry((region.to_owned(), activity.to_owned(), year))
                .or_insert(0.0) += value;
        }
        Ok(())
    }

    pub fn build(self) -> ActivityPanel {
        let regions: Vec<String> = self.regions.into_iter().collect();
        let activities: Vec<String> = self.activities.into_iter().collect();
        let years: Vec<i32> = self.years.into_iter().collect();
        let r_idx: HashMap<&str, usize> = regions.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let a_idx: HashMap<&str, usize> = activities.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let mut slices = vec![Vec::new(); years.len()];
        for ((r, a, y), value) in &self.values {
            let yi = years.binary_search(y).expect("year registered");
            slices[yi].push(Entry {
                region: r_idx[r.as_str()],
                activity: a_idx[a.as_str()],
                value: *value,
            });
        }
        for s in &mut slices {
            s.sort_by_key(|e| (e.region, e.activity));
        }
        ActivityPanel {
            regions,
            activities,
            years,
            slices,
        }
    }
}

/// Binary region × activity matrix `M` for one year with its marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecializationMatrix {
    regions: Vec<String>,
    activities: Vec<String>,
    year: i32,
    entries: Vec<bool>,
    diversity: Vec<usize>,
    ubiquity: Vec<usize>,
    no_data: Vec<bool>,
    region_weight: Option<Vec<f64>>,
}

impl SpecializationMatrix {
    /// Builds from row-major 0/1 rows.
    pub fn from_rows(regions: Vec<String>, activities: Vec<String>, year: i32, rows: &[Vec<u8>]) -> Result<Self> {
        if rows.len() != regions.len() {
            return Err(Error::invalid(format!(
                "{} rows for {} regions",
                rows.len(),
                regions.len()
            )));
        }
        let n_a = activities.len();
        let mut entries = Vec::with_capacity(regions.len() * n_a);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n_a {
                return Err(Error::invalid(format!(
                    "row {r} has {} entries, expected {n_a}",
                    row.len()
                )));
            }
            for &v in row {
                match v {
                    0 => entries.push(false),
                    1 => entries.push(true),
                    _ => return Err(Error::invalid(format!("entry {v} in row {r} is not 0/1"))),
                }
            }
        }
        let no_data = vec![false; regions.len()];
        Self::from_entries(regions, activities, year, entries, no_data, None)
    }

    pub(crate) fn from_entries(
        regions: Vec<String>,
        activities: Vec<String>,
        year: i32,
        entries: Vec<bool>,
        no_data: Vec<bool>,
        region_weight: Option<Vec<f64>>,
    ) -> Result<Self> {
        check_unique(&regions, "region")?;
        check_unique(&activities, "activity")?;
        let n_a = activities.len();
        debug_assert_eq!(entries.len(), regions.len() * n_a);
        let mut diversity = vec![0usize; regions.len()];
        let mut ubiquity = vec![0usize; n_a];
        for (r, row) in entries.chunks(n_a.max(1)).enumerate().take(regions.len()) {
            for (i, &m) in row.iter().enumerate() {
                if m {
                    diversity[r] += 1;
                    ubiquity[i] += 1;
                }
            }
        }
        Ok(Self {
            regions,
            activities,
            year,
            entries,
            diversity,
            ubiquity,
            no_data,
            region_weight,
        })
    }

    pub fn regions(&self) -> &[String] {
        &self.regions
    }

    pub fn activities(&self) -> &[String] {
        &self.activities
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn n_regions(&self) -> usize {
        self.regions.len()
    }

    pub fn n_activities(&self) -> usize {
        self.activities.len()
    }

    #[inline]
    pub fn get(&self, region: usize, activity: usize) -> bool {
        self.entries[region * self.activities.len() + activity]
    }

    pub fn row(&self, region: usize) -> &[bool] {
        let n_a = self.activities.len();
        &self.entries[region * n_a..(region + 1) * n_a]
    }

    pub fn diversity(&self) -> &[usize] {
        &self.diversity
    }

    pub fn ubiquity(&self) -> &[usize] {
        &self.ubiquity
    }

    /// True for regions whose RCA row was undefined (zero total intensity).
    pub fn no_data(&self, region: usize) -> bool {
        self.no_data[region]
    }

    /// Optional per-region weight (total intensity) used to break ties
    /// between equally sized connected components.
    pub fn region_weight(&self) -> Option<&[f64]> {
        self.region_weight.as_deref()
    }

    /// Recomputes row and column sums and compares them with the stored marginals.
    pub fn marginals_consistent(&self) -> bool {
        let n_a = self.activities.len();
        let div_ok = (0..self.regions.len()).all(|r| self.row(r).iter().filter(|&&m| m).count() == self.diversity[r]);
        let ubi_ok = (0..n_a).all(|i| (0..self.regions.len()).filter(|&r| self.get(r, i)).count() == self.ubiquity[i]);
        div_ok && ubi_ok
    }

    /// Restriction to the given region and activity indices (in the given order).
    pub fn submatrix(&self, regions: &[usize], activities: &[usize]) -> SpecializationMatrix {
        let mut entries = Vec::with_capacity(regions.len() * activities.len());
        for &r in regions {
            for &i in activities {
                entries.push(self.get(r, i));
            }
        }
        let weight = self
            .region_weight
            .as_ref()
            .map(|w| regions.iter().map(|&r| w[r]).collect());
        SpecializationMatrix::from_entries(
            regions.iter().map(|&r| self.regions[r].clone()).collect(),
            activities.iter().map(|&i| self.activities[i].clone()).collect(),
            self.year,
            entries,
            regions.iter().map(|&r| self.no_data[r]).collect(),
            weight,
        )
        .expect("identifiers of a valid matrix stay unique")
    }
}

/// Undirected adjacency among regions (shared-border neighbors).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionGraph {
    regions: Vec<String>,
    neighbors: Vec<Vec<usize>>,
}

impl RegionGraph {
    /// Builds from index edges; duplicates and reversed duplicates are merged.
    pub fn new(regions: Vec<String>, edges: &[(usize, usize)]) -> Result<Self> {
        check_unique(&regions, "region")?;
        let mut sets = vec![BTreeSet::new(); regions.len()];
        for &(a, b) in edges {
            if a >= regions.len() || b >= regions.len() {
                return Err(Error::invalid(format!("edge ({a}, {b}) out of range")));
            }
            if a == b {
                return Err(Error::invalid(format!("self-loop on region {}", regions[a])));
            }
            sets[a].insert(b);
            sets[b].insert(a);
        }
        Ok(Self {
            regions,
            neighbors: sets.into_iter().map(|s| s.into_iter().collect()).collect(),
        })
    }

    /// Builds from named edges; `extra_regions` adds isolated regions.
    /// Regions are sorted by name.
    pub fn from_named_edges<S: AsRef<str>>(edges: &[(S, S)], extra_regions: &[S]) -> Result<Self> {
        let mut names: BTreeSet<&str> = extra_regions.iter().map(AsRef::as_ref).collect();
        for (a, b) in edges {
            names.insert(a.as_ref());
            names.insert(b.as_ref());
        }
        let regions: Vec<String> = names.iter().map(|s| s.to_string()).collect();
        let idx: HashMap<&str, usize> = names.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        let edges: Vec<(usize, usize)> = edges.iter().map(|(a, b)| (idx[a.as_ref()], idx[b.as_ref()])).collect();
        Self::new(regions, &edges)
    }

    pub fn regions(&self) -> &[String] {
        &self.regions
    }

    pub fn n_regions(&self) -> usize {
        self.regions.len()
    }

    pub fn neighbors(&self, region: usize) -> &[usize] {
        &self.neighbors[region]
    }

    pub fn degree(&self, region: usize) -> usize {
        self.neighbors[region].len()
    }

    /// Number of undirected edges.
    pub fn n_edges(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn index_of(&self, region: &str) -> Option<usize> {
        self.regions.iter().position(|r| r == region)
    }

    /// Edge list with `a < b`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.n_edges());
        for (a, ns) in self.neighbors.iter().enumerate() {
            out.extend(ns.iter().filter(|&&b| a < b).map(|&b| (a, b)));
        }
        out
    }

    /// Induced subgraph on regions with `keep[r]`; also returns the number of
    /// edges that were removed because an endpoint was dropped.
    pub fn induced(&self, keep: &[bool]) -> (RegionGraph, usize) {
        let mut new_index = vec![usize::MAX; self.regions.len()];
        let mut regions = Vec::new();
        for (r, name) in self.regions.iter().enumerate() {
            if keep[r] {
                new_index[r] = regions.len();
                regions.push(name.clone());
            }
        }
        let mut kept = Vec::new();
        let mut removed = 0;
        for (a, b) in self.edges() {
            if keep[a] && keep[b] {
                kept.push((new_index[a], new_index[b]));
            } else {
                removed += 1;
            }
        }
        let g = RegionGraph::new(regions, &kept).expect("subgraph of a valid graph");
        (g, removed)
    }

    pub fn is_symmetric(&self) -> bool {
        self.neighbors.iter().enumerate().all(|(a, ns)| {
            ns.iter()
                .all(|&b| b != a && self.neighbors[b].binary_search(&a).is_ok())
        })
    }
}

/// Per-region, per-year scalar indicator. Absent keys are missing values.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorSeries {
    pub name: String,
    pub units: String,
    values: BTreeMap<(String, i32), f64>,
}

impl IndicatorSeries {
    pub fn new(name: impl Into<String>, units: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            units: units.into(),
            values: BTreeMap::new(),
        }
    }

    /// Inserts a value; a second value for the same (region, year) is an error.
    pub fn insert(&mut self, region: &str, year: i32, value: f64) -> Result<()> {
        match self.values.entry((region.to_owned(), year)) {
            std::collections::btree_map::Entry::Occupied(_) => Err(Error::invalid(format!(
                "duplicate value for ({region}, {year}) in indicator {}",
                self.name
            ))),
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(value);
                Ok(())
            }
        }
    }

    pub fn get(&self, region: &str, year: i32) -> Option<f64> {
        self.values.get(&(region.to_owned(), year)).copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Iterates in (region, year) order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, i32, f64)> + '_ {
        self.values.iter().map(|((r, y), v)| (r.as_str(), *y, *v))
    }

    pub fn regions(&self) -> BTreeSet<&str> {
        self.values.keys().map(|(r, _)| r.as_str()).collect()
    }

    pub fn years(&self) -> BTreeSet<i32> {
        self.values.keys().map(|(_, y)| *y).collect()
    }

    /// Values of one year keyed by region.
    pub fn year_slice(&self, year: i32) -> BTreeMap<&str, f64> {
        self.values
            .iter()
            .filter(|((_, y), _)| *y == year)
            .map(|((r, _), v)| (r.as_str(), *v))
            .collect()
    }

    pub fn map_values(&self, name: impl Into<String>, f: impl Fn(f64) -> f64) -> Self {
        Self {
            name: name.into(),
            units: self.units.clone(),
            values: self.values.iter().map(|(k, v)| (k.clone(), f(*v))).collect(),
        }
    }
}

/// Rectangular (region, year) × indicator table with explicit missing cells.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedTable {
    pub columns: Vec<String>,
    pub regions: Vec<String>,
    pub years: Vec<i32>,
    /// One row per (region, year), region-major.
    pub rows: Vec<Vec<Option<f64>>>,
}

impl AlignedTable {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn key(&self, row: usize) -> (&str, i32) {
        let ny = self.years.len();
        (&self.regions[row / ny], self.years[row % ny])
    }

    pub fn cell(&self, region: &str, year: i32, column: &str) -> Option<Option<f64>> {
        let r = self.regions.iter().position(|x| x == region)?;
        let y = self.years.iter().position(|&x| x == year)?;
        let c = self.columns.iter().position(|x| x == column)?;
        Some(self.rows[r * self.years.len() + y][c])
    }
}

/// Aligns several series onto the regions they all share and the requested years.
pub fn align(series: &[&IndicatorSeries], years: RangeInclusive<i32>) -> Result<AlignedTable> {
    let mut regions: Option<BTreeSet<&str>> = None;
    for s in series {
        let rs = s.regions();
        regions = Some(match regions {
            None => rs,
            Some(acc) => acc.intersection(&rs).copied().collect(),
        });
    }
    let regions: Vec<String> = regions.unwrap_or_default().into_iter().map(str::to_owned).collect();
    if regions.is_empty() {
        return Err(Error::NoOverlap);
    }
    let years: Vec<i32> = years.collect();
    let mut rows = Vec::with_capacity(regions.len() * years.len());
    for r in &regions {
        for &y in &years {
            rows.push(series.iter().map(|s| s.get(r, y)).collect());
        }
    }
    Ok(AlignedTable {
        columns: series.iter().map(|s| s.name.clone()).collect(),
        regions,
        years,
        rows,
    })
}

pub(crate) fn index_of(list: &[String], key: &str) -> Option<usize> {
    list.iter().position(|x| x == key)
}

fn check_unique(ids: &[String], what: &str) -> Result<()> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::invalid(format!("duplicate {what} identifier {id:?}")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(name: &str, cells: &[(&str, i32, f64)]) -> IndicatorSeries {
        let mut s = IndicatorSeries::new(name, "");
        for &(r, y, v) in cells {
            s.insert(r, y, v).unwrap();
        }
        s
    }

    #[test]
    fn align_full_overlap() {
        let cells: Vec<(&str, i32, f64)> = ["A", "B"]
            .iter()
            .flat_map(|r| (2003..=2005).map(move |y| (*r, y, y as f64)))
            .collect();
        let a = series("a", &cells);
        let b = series("b", &cells);
        let t = align(&[&a, &b], 2003..=2005).unwrap();
        assert_eq!(t.n_rows(), 6);
        assert!(t.rows.iter().all(|row| row.iter().all(Option::is_some)));
    }

    #[test]
    fn align_keeps_missing_explicit() {
        let a = series("a", &[("A", 2004, 1.0), ("B", 2003, 2.0)]);
        let b = series("b", &[("A", 2004, 1.0), ("B", 2004, 2.0)]);
        let t = align(&[&a, &b], 2003..=2005).unwrap();
        assert_eq!(t.cell("B", 2004, "a"), Some(None));
        assert_eq!(t.cell("B", 2004, "b"), Some(Some(2.0)));
    }

    #[test]
    fn align_disjoint_regions_errors() {
        let a = series("a", &[("A", 2004, 1.0)]);
        let b = series("b", &[("B", 2004, 1.0)]);
        assert!(matches!(align(&[&a, &b], 2003..=2005), Err(Error::NoOverlap)));
    }

    #[test]
    fn indicator_rejects_duplicates() {
        let mut s = IndicatorSeries::new("x", "");
        s.insert("A", 2000, 1.0).unwrap();
        assert!(s.insert("A", 2000, 2.0).is_err());
    }

    #[test]
    fn panel_builder_sums_and_drops_zeros() {
        let mut b = PanelBuilder::new();
        b.add("R", "p", 2010, 5.0).unwrap();
        b.add("R", "p", 2010, 7.0).unwrap();
        b.add("S", "q", 2010, 0.0).unwrap();
        assert!(b.add("S", "q", 2010, -1.0).is_err());
        let p = b.build();
        assert_eq!(p.get("R", "p", 2010), 12.0);
        assert_eq!(p.regions(), ["R", "S"]);
        assert_eq!(p.n_stored(), 1);
    }

    #[test]
    fn graph_dedups_and_rejects_self_loops() {
        let g = RegionGraph::from_named_edges(&[("a", "b"), ("b", "a"), ("a", "b")], &[]).unwrap();
        assert_eq!(g.n_edges(), 1);
        assert!(g.is_symmetric());
        assert!(RegionGraph::from_named_edges(&[("a", "a")], &[]).is_err());
    }

    #[test]
    fn specialization_marginals() {
        let m = SpecializationMatrix::from_rows(
            vec!["r1".into(), "r2".into()],
            vec!["a".into(), "b".into(), "c".into()],
            2000,
            &[vec![1, 0, 1], vec![1, 1, 0]],
        )
        .unwrap();
        assert_eq!(m.diversity(), [2, 2]);
        assert_eq!(m.ubiquity(), [2, 1, 1]);
        assert!(m.marginals_consistent());
        assert!(SpecializationMatrix::from_rows(vec!["r".into()], vec!["a".into()], 0, &[vec![2]]).is_err());
    }
}
