//! Long-format CSV file formats (UTF-8, header row required).
//!
//! | file        | columns                        |
//! |-------------|--------------------------------|
//! | intensity   | `region,activity,year,value`   |
//! | indicator   | `region,year,value`            |
//! | adjacency   | `region_a,region_b`            |
//! | crosswalk   | `sub_region,region`            |
//! | shares      | `activity,year,share`          |
//! | pci         | `activity,year,pci`            |
//! | price index | `year,index`                   |
//!
//! Floats are written with the shortest representation that parses back to
//! the same `f64`, so write → read is bit-exact.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use csv::StringRecord;

use crate::data::{ActivityPanel, IndicatorSeries, RegionGraph};
use crate::error::{Error, Result};
use crate::ingest::Crosswalk;

pub const INTENSITY_HEADER: [&str; 4] = ["region", "activity", "year", "value"];
pub const INDICATOR_HEADER: [&str; 3] = ["region", "year", "value"];
pub const ADJACENCY_HEADER: [&str; 2] = ["region_a", "region_b"];
pub const CROSSWALK_HEADER: [&str; 2] = ["sub_region", "region"];
pub const SHARES_HEADER: [&str; 3] = ["activity", "year", "share"];
pub const PCI_HEADER: [&str; 3] = ["activity", "year", "pci"];
pub const PRICE_INDEX_HEADER: [&str; 2] = ["year", "index"];

/// A parsed data row together with its 1-based line number in the file.
pub struct Row {
    pub line: u64,
    pub fields: StringRecord,
}

impl Row {
    pub fn str(&self, i: usize) -> &str {
        self.fields.get(i).unwrap_or("")
    }
}

/// Reads a CSV whose header must equal `header` exactly.
pub fn read_rows(path: &Path, header: &[&str]) -> Result<Vec<Row>> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    read_rows_from(file, path, header)
}

pub fn read_rows_from<R: Read>(reader: R, path: &Path, header: &[&str]) -> Result<Vec<Row>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_owned(),
        line,
        message,
    };
    let got = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if got.iter().collect::<Vec<_>>() != header {
        return Err(parse_err(
            1,
            format!(
                "expected header `{}`, found `{}`",
                header.join(","),
                got.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        if rec.len() != header.len() {
            return Err(parse_err(
                line,
                format!("expected {} fields, found {}", header.len(), rec.len()),
            ));
        }
        rows.push(Row { line, fields: rec });
    }
    Ok(rows)
}

pub(crate) fn parse_year(path: &Path, row: &Row, i: usize) -> Result<i32> {
    let s = row.str(i);
    if s.len() != 4 || !s.bytes().all(|b| b.is_ascii_digit()) {
        return Err(Error::Parse {
            path: path.to_owned(),
            line: row.line,
            message: format!("year {s:?} is not a 4-digit integer"),
        });
    }
    Ok(s.parse().expect("4 ascii digits"))
}

pub(crate) fn parse_f64(path: &Path, row: &Row, i: usize, what: &str) -> Result<f64> {
    let s = row.str(i);
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Parse {
            path: path.to_owned(),
            line: row.line,
            message: format!("{what} {s:?} is not a finite number"),
        }),
    }
}

fn nonempty<'a>(path: &Path, row: &'a Row, i: usize, what: &str) -> Result<&'a str> {
    let s = row.str(i);
    if s.is_empty() {
        return Err(Error::Parse {
            path: path.to_owned(),
            line: row.line,
            message: format!("empty {what}"),
        });
    }
    Ok(s)
}

/// Reads an intensity file without any crosswalk.
pub fn read_intensity(path: &Path) -> Result<ActivityPanel> {
    crate::ingest::load_intensity(path, None)
}

pub fn write_intensity<W: Write>(panel: &ActivityPanel, out: W) -> Result<()> {
    let mut w = CsvOut::new(out, &INTENSITY_HEADER)?;
    for (r, a, y, v) in panel.iter() {
        w.row(&[r, a, &y.to_string(), &fmt_f64(v)])?;
    }
    // identifiers without any positive cell survive the round trip as zero rows
    let (regions, activities, years) = (panel.regions(), panel.activities(), panel.years());
    if let (Some(a0), Some(y0), Some(r0)) = (activities.first(), years.first(), regions.first()) {
        let mut seen_r = vec![false; regions.len()];
        let mut seen_a = vec![false; activities.len()];
        let mut seen_y = vec![false; years.len()];
        for (yi, &y) in years.iter().enumerate() {
            for e in panel.year_entries(y).unwrap_or(&[]) {
                seen_r[e.region] = true;
                seen_a[e.activity] = true;
                seen_y[yi] = true;
            }
        }
        let y0 = y0.to_string();
        for (r, _) in regions.iter().zip(&seen_r).filter(|(_, s)| !**s) {
            w.row(&[r, a0, &y0, "0"])?;
        }
        for (a, _) in activities.iter().zip(&seen_a).filter(|(_, s)| !**s) {
            w.row(&[r0, a, &y0, "0"])?;
        }
        for (y, _) in years.iter().zip(&seen_y).filter(|(_, s)| !**s) {
            w.row(&[r0, a0, &y.to_string(), "0"])?;
        }
    }
    w.finish()
}

pub fn read_indicator(path: &Path, name: &str) -> Result<IndicatorSeries> {
    let rows = read_rows(path, &INDICATOR_HEADER)?;
    let mut s = IndicatorSeries::new(name, "");
    for row in &rows {
        let region = nonempty(path, row, 0, "region")?;
        let year = parse_year(path, row, 1)?;
        let value = parse_f64(path, row, 2, "value")?;
        s.insert(region, year, value).map_err(|e| Error::Parse {
            path: path.to_owned(),
            line: row.line,
            message: e.to_string(),
        })?;
    }
    Ok(s)
}

pub fn write_indicator<W: Write>(series: &IndicatorSeries, out: W) -> Result<()> {
    let mut w = CsvOut::new(out, &INDICATOR_HEADER)?;
    for (r, y, v) in series.iter() {
        w.row(&[r, &y.to_string(), &fmt_f64(v)])?;
    }
    w.finish()
}

pub fn read_adjacency(path: &Path) -> Result<RegionGraph> {
    let rows = read_rows(path, &ADJACENCY_HEADER)?;
    let mut edges = Vec::with_capacity(rows.len());
    for row in &rows {
        let a = nonempty(path, row, 0, "region_a")?;
        let b = nonempty(path, row, 1, "region_b")?;
        if a == b {
            return Err(Error::Parse {
                path: path.to_owned(),
                line: row.line,
                message: format!("self-loop on region {a}"),
            });
        }
        edges.push((a.to_owned(), b.to_owned()));
    }
    RegionGraph::from_named_edges(&edges, &[])
}

pub fn write_adjacency<W: Write>(graph: &RegionGraph, out: W) -> Result<()> {
    let mut w = CsvOut::new(out, &ADJACENCY_HEADER)?;
    for (a, b) in graph.edges() {
        w.row(&[&graph.regions()[a], &graph.regions()[b]])?;
    }
    w.finish()
}

pub fn write_crosswalk<W: Write>(crosswalk: &Crosswalk, out: W) -> Result<()> {
    let mut w = CsvOut::new(out, &CROSSWALK_HEADER)?;
    for (sub, region) in crosswalk.pairs() {
        w.row(&[sub, region])?;
    }
    w.finish()
}

/// `(activity, year) → value` lookups used for baseline shares and PCI.
pub type ActivityYearMap = BTreeMap<(String, i32), f64>;

fn read_activity_year(path: &Path, header: &[&str], what: &str) -> Result<ActivityYearMap> {
    let rows = read_rows(path, header)?;
    let mut out = BTreeMap::new();
    for row in &rows {
        let activity = nonempty(path, row, 0, "activity")?.to_owned();
        let year = parse_year(path, row, 1)?;
        let v = parse_f64(path, row, 2, what)?;
        if out.insert((activity.clone(), year), v).is_some() {
            return Err(Error::Parse {
                path: path.to_owned(),
                line: row.line,
                message: format!("duplicate {what} for ({activity}, {year})"),
            });
        }
    }
    Ok(out)
}

/// External baseline shares; every share must lie in (0, 1].
pub fn read_shares(path: &Path) -> Result<ActivityYearMap> {
    let m = read_activity_year(path, &SHARES_HEADER, "share")?;
    if let Some(((a, y), s)) = m.iter().find(|(_, &s)| !(s > 0.0 && s <= 1.0)) {
        return Err(Error::invalid(format!(
            "{}: share {s} for ({a}, {y}) outside (0, 1]",
            path.display()
        )));
    }
    Ok(m)
}

pub fn read_pci(path: &Path) -> Result<ActivityYearMap> {
    read_activity_year(path, &PCI_HEADER, "pci")
}

pub fn write_activity_year<W: Write>(map: &ActivityYearMap, header: &[&str], out: W) -> Result<()> {
    let mut w = CsvOut::new(out, header)?;
    for ((a, y), v) in map {
        w.row(&[a, &y.to_string(), &fmt_f64(*v)])?;
    }
    w.finish()
}

pub fn read_price_index(path: &Path) -> Result<BTreeMap<i32, f64>> {
    let rows = read_rows(path, &PRICE_INDEX_HEADER)?;
    let mut out = BTreeMap::new();
    for row in &rows {
        let year = parse_year(path, row, 0)?;
        let v = parse_f64(path, row, 1, "index")?;
        if out.insert(year, v).is_some() {
            return Err(Error::Parse {
                path: path.to_owned(),
                line: row.line,
                message: format!("duplicate index for {year}"),
            });
        }
    }
    Ok(out)
}

pub fn write_price_index<W: Write>(index: &BTreeMap<i32, f64>, out: W) -> Result<()> {
    let mut w = CsvOut::new(out, &PRICE_INDEX_HEADER)?;
    for (y, v) in index {
        w.row(&[&y.to_string(), &fmt_f64(*v)])?;
    }
    w.finish()
}

/// Shortest round-trip decimal representation; never uses exponent notation.
pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        // normalise -0
        return "0".to_owned();
    }
    format!("{v}")
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Small header-checked CSV writer.
pub struct CsvOut<W: Write> {
    inner: csv::Writer<W>,
    width: usize,
}

impl<W: Write> CsvOut<W> {
    pub fn new(out: W, header: &[&str]) -> Result<Self> {
        let mut inner = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        inner.write_record(header).map_err(csv_err)?;
        Ok(Self {
            inner,
            width: header.len(),
        })
    }

    pub fn row<S: AsRef<[u8]>>(&mut self, fields: &[S]) -> Result<()> {
        debug_assert_eq!(fields.len(), self.width);
        self.inner.write_record(fields).map_err(csv_err)
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush().map_err(|source| Error::Io {
            path: PathBuf::from("<output>"),
            source,
        })
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io {
        path: PathBuf::from("<output>"),
        source: std::io::Error::other(e.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::PanelBuilder;
    use proptest::prelude::*;

    fn tmp_with(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn header_mismatch_is_reported_on_line_1() {
        let f = tmp_with("region,year\nA,2000\n");
        match read_indicator(f.path(), "x") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_year_has_line_number() {
        let f = tmp_with("region,year,value\nA,2000,1\nB,20x1,2\n");
        match read_indicator(f.path(), "x") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn adjacency_dedups_reversed_rows() {
        let f = tmp_with("region_a,region_b\nA,B\nB,A\nB,C\nA,B\n");
        let g = read_adjacency(f.path()).unwrap();
        assert_eq!(g.n_edges(), 2);
        assert_eq!(g.degree(g.index_of("B").unwrap()), 2);
    }

    #[test]
    fn shares_out_of_range_rejected() {
        let f = tmp_with("activity,year,share\np,2000,1.5\n");
        assert!(read_shares(f.path()).is_err());
    }

    fn arb_panel() -> impl Strategy<Value = ActivityPanel> {
        prop::collection::vec(
            (0usize..5, 0usize..4, 2000i32..2004, prop_oneof![Just(0.0), 0.0f64..1e9]),
            1..40,
        )
        .prop_map(|cells| {
            let mut b = PanelBuilder::new();
            for (r, a, y, v) in cells {
                b.add(&format!("r{r}"), &format!("a{a}"), y, v).unwrap();
            }
            b.build()
        })
    }

    proptest! {
        #[test]
        fn intensity_round_trip_is_exact(panel in arb_panel()) {
            let mut buf = Vec::new();
            write_intensity(&panel, &mut buf).unwrap();
            let f = tmp_with(std::str::from_utf8(&buf).unwrap());
            let back = read_intensity(f.path()).unwrap();
            prop_assert_eq!(back, panel);
        }

        #[test]
        fn indicator_round_trip_is_exact(
            cells in prop::collection::btree_map((0usize..6, 1990i32..2030), -1e12f64..1e12, 0..30)
        ) {
            let mut s = IndicatorSeries::new("x", "");
            for ((r, y), v) in &cells {
                s.insert(&format!("reg {r}"), *y, *v).unwrap();
            }
            let mut buf = Vec::new();
            write_indicator(&s, &mut buf).unwrap();
            let f = tmp_with(std::str::from_utf8(&buf).unwrap());
            let back = read_indicator(f.path(), "x").unwrap();
            prop_assert_eq!(back, s);
        }
    }
}
