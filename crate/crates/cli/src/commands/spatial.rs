//! Spatial autocorrelation of the complexity indicators and their
//! neighbor averages.

use regcx::io::{fmt_f64, read_adjacency, CsvOut};
use regcx::spatial::{moran_permutation_null, morans_i, neighbor_average, restrict_to_values, skewness};

use super::complexity as cx;
use crate::config::Config;
use crate::run::Run;
use crate::tidy::{read_series, NEIGHBOR_HEADER, REGION_HEADER};
use crate::{CliError, Context};

pub const MORAN: &str = "spatial/moran.csv";
pub const MORAN_NULL: &str = "spatial/moran_null.csv";
pub const NEIGHBORS: &str = "spatial/neighbors.csv";

pub fn run(cfg: &Config) -> Result<(), CliError> {
    let sc = cfg.spatial.as_ref().expect("spatial section validated");
    let mut run = Run::new(cfg, "spatial");
    let graph = read_adjacency(run.input(&sc.adjacency)).context(|| "adjacency".into())?;
    let indicators = run.upstream(cx::INDICATORS, "complexity")?;
    let series = read_series(&indicators, &REGION_HEADER, str::to_string)?;

    let ctx = || "writing spatial outputs".to_string();
    let mut moran = CsvOut::new(run.create(MORAN)?, &["year", "indicator", "morans_i", "skewness"]).context(ctx)?;
    let mut null = if sc.permutations > 0 {
        Some(
            CsvOut::new(
                run.create(MORAN_NULL)?,
                &["year", "indicator", "observed", "null_mean", "null_se", "p_upper"],
            )
            .context(ctx)?,
        )
    } else {
        None
    };
    let mut nbr = CsvOut::new(run.create(NEIGHBORS)?, &NEIGHBOR_HEADER).context(ctx)?;

    for ind in &sc.indicators {
        let Some(s) = series.get(ind) else {
            log::warn!("{ind}: no values in {}", cx::INDICATORS);
            continue;
        };
        for year in s.years() {
            let slice = s.year_slice(year);
            let unknown = slice.keys().filter(|r| graph.index_of(r).is_none()).count();
            if unknown > 0 {
                log::warn!("{ind} {year}: {unknown} regions are not in the adjacency graph");
            }
            let (sub, values, excluded) = restrict_to_values(&slice, &graph);
            if excluded > 0 {
                log::info!("{ind} {year}: {excluded} graph regions without a value excluded");
            }
            let at = || format!("indicator {ind}, year {year}");
            let i = morans_i(&values, &sub).context(at)?;
            let g = skewness(&values).context(at)?;
            let y = year.to_string();
            moran.row(&[y.as_str(), ind, &fmt_f64(i), &fmt_f64(g)]).context(ctx)?;
            if let Some(w) = null.as_mut() {
                let seed = sc.seed.wrapping_add(year as u64);
                let p = moran_permutation_null(&values, &sub, sc.permutations, seed, cfg.exec).context(at)?;
                w.row(&[
                    y.as_str(),
                    ind,
                    &fmt_f64(p.observed),
                    &fmt_f64(p.mean),
                    &fmt_f64(p.std_error),
                    &fmt_f64(p.p_upper),
                ])
                .context(ctx)?;
            }

            let full: Vec<Option<f64>> = graph.regions().iter().map(|r| slice.get(r.as_str()).copied()).collect();
            let avg = neighbor_average(&full, &graph, sc.missing_neighbors);
            for (region, a) in graph.regions().iter().zip(avg) {
                if let Some(a) = a {
                    nbr.row(&[region.as_str(), &y, ind, &fmt_f64(a)]).context(ctx)?;
                }
            }
        }
    }
    moran.finish().context(ctx)?;
    if let Some(w) = null {
        w.finish().context(ctx)?;
    }
    nbr.finish().context(ctx)?;
    run.finish()
}
