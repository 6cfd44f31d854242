//! Loading intensity files, sub-region → region aggregation and GDP deflation.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::data::{ActivityPanel, IndicatorSeries, PanelBuilder};
use crate::error::{Error, Result};
use crate::io::{self, CROSSWALK_HEADER, INTENSITY_HEADER};

/// Many-to-one map from sub-regions (municipalities) to regions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Crosswalk {
    map: BTreeMap<String, String>,
}

impl Crosswalk {
    /// Builds from pairs; a sub-region mapped to two different regions is rejected.
    pub fn from_pairs<S: AsRef<str>>(pairs: &[(S, S)]) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (sub, region) in pairs {
            let (sub, region) = (sub.as_ref(), region.as_ref());
            if let Some(prev) = map.insert(sub.to_owned(), region.to_owned()) {
                if prev != region {
                    return Err(Error::invalid(format!(
                        "sub-region {sub} maps to both {prev} and {region}"
                    )));
                }
            }
        }
        Ok(Self { map })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let rows = io::read_rows(path, &CROSSWALK_HEADER)?;
        let mut map: BTreeMap<String, String> = BTreeMap::new();
        for row in &rows {
            let (sub, region) = (row.str(0), row.str(1));
            if sub.is_empty() || region.is_empty() {
                return Err(Error::Parse {
                    path: path.to_owned(),
                    line: row.line,
                    message: "empty identifier".into(),
                });
            }
            match map.get(sub) {
                Some(prev) if prev != region => {
                    return Err(Error::Parse {
                        path: path.to_owned(),
                        line: row.line,
                        message: format!("sub-region {sub} maps to both {prev} and {region}"),
                    })
                }
                _ => {
                    map.insert(sub.to_owned(), region.to_owned());
                }
            }
        }
        Ok(Self { map })
    }

    pub fn region_of(&self, sub_region: &str) -> Option<&str> {
        self.map.get(sub_region).map(String::as_str)
    }

    /// `(sub_region, region)` pairs in sub-region order.
    pub fn pairs(&self) -> impl Iterator<Item = (&str, &str)> + '_ {
        self.map.iter().map(|(s, r)| (s.as_str(), r.as_str()))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Loads an intensity CSV, summing sub-regions that map to the same region.
///
/// Without a crosswalk, identifiers pass through unchanged. Zero rows are
/// accepted and stored as absence.
pub fn load_intensity(path: &Path, crosswalk: Option<&Crosswalk>) -> Result<ActivityPanel> {
    let rows = io::read_rows(path, &INTENSITY_HEADER)?;
    let mut builder = PanelBuilder::new();
    let mut unknown = BTreeSet::new();
    for row in &rows {
        let sub = row.str(0);
        let activity = row.str(1);
        if sub.is_empty() || activity.is_empty() {
            return Err(Error::Parse {
                path: path.to_owned(),
                line: row.line,
                message: "empty identifier".into(),
            });
        }
        let year = io::parse_year(path, row, 2)?;
        let value = io::parse_f64(path, row, 3, "value")?;
        if value < 0.0 {
            return Err(Error::Parse {
                path: path.to_owned(),
                line: row.line,
                message: format!("negative intensity {value}"),
            });
        }
        let region = match crosswalk {
            None => sub,
            Some(cw) => match cw.region_of(sub) {
                Some(r) => r,
                None => {
                    unknown.insert(sub.to_owned());
                    continue;
                }
            },
        };
        builder.add(region, activity, year, value)?;
    }
    if !unknown.is_empty() {
        let list: Vec<String> = unknown.into_iter().collect();
        return Err(Error::invalid(format!(
            "{}: sub-regions missing from crosswalk: {}",
            path.display(),
            list.join(", ")
        )));
    }
    Ok(builder.build())
}

/// Re-expresses a nominal series in prices of `base_year`:
/// `real(r, t) = nominal(r, t) · index(base) / index(t)`.
pub fn deflate(nominal: &IndicatorSeries, price_index: &BTreeMap<i32, f64>, base_year: i32) -> Result<IndicatorSeries> {
    let index = |year: i32| -> Result<f64> {
        match price_index.get(&year) {
            None => Err(Error::Missing(format!("price index for year {year}"))),
            Some(&v) if !(v > 0.0) || !v.is_finite() => {
                Err(Error::invalid(format!("nonpositive price index {v} for year {year}")))
            }
            Some(&v) => Ok(v),
        }
    };
    let base = index(base_year)?;
    let mut out = IndicatorSeries::new(nominal.name.clone(), format!("{} ({base_year} prices)", nominal.units));
    for (r, y, v) in nominal.iter() {
        let value = if y == base_year { v } else { v * base / index(y)? };
        out.insert(r, y, value)?;
    }
    Ok(out)
}
