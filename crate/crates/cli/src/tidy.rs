//! Tidy `key,year,indicator,value` tables shared between stages.

use std::collections::BTreeMap;
use std::path::Path;

use regcx::data::IndicatorSeries;
use regcx::io::read_rows;
use regcx::Error;

use crate::{CliError, Context};

pub const REGION_HEADER: [&str; 4] = ["region", "year", "indicator", "value"];
pub const ACTIVITY_HEADER: [&str; 4] = ["activity", "year", "indicator", "value"];
pub const NEIGHBOR_HEADER: [&str; 4] = ["region", "year", "indicator", "neighbor_avg"];

/// Reads a tidy file into one series per indicator; empty values are skipped.
/// `rename` maps an indicator name to the series name.
pub fn read_series(
    path: &Path,
    header: &[&str],
    rename: impl Fn(&str) -> String,
) -> Result<BTreeMap<String, IndicatorSeries>, CliError> {
    let ctx = || format!("reading {}", path.display());
    let rows = read_rows(path, header).context(ctx)?;
    let mut out: BTreeMap<String, IndicatorSeries> = BTreeMap::new();
    for row in rows {
        let parse_err = |message: String| CliError::Core {
            context: ctx(),
            source: Error::Parse {
                path: path.to_path_buf(),
                line: row.line,
                message,
            },
        };
        let year: i32 = row
            .str(1)
            .parse()
            .map_err(|_| parse_err(format!("bad year {:?}", row.str(1))))?;
        if row.str(3).is_empty() {
            continue;
        }
        let value: f64 = row
            .str(3)
            .parse()
            .map_err(|_| parse_err(format!("bad value {:?}", row.str(3))))?;
        let name = rename(row.str(2));
        out.entry(name.clone())
            .or_insert_with(|| IndicatorSeries::new(name, ""))
            .insert(row.str(0), year, value)
            .context(ctx)?;
    }
    Ok(out)
}

/// `(key, year) → value` for one indicator of a tidy file.
pub fn read_keyed(path: &Path, header: &[&str], indicator: &str) -> Result<BTreeMap<(String, i32), f64>, CliError> {
    let series = read_series(path, header, str::to_string)?;
    Ok(series
        .get(indicator)
        .map(|s| s.iter().map(|(k, y, v)| ((k.to_string(), y), v)).collect())
        .unwrap_or_default())
}
