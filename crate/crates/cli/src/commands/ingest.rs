//! Aggregates raw inputs to the analysis regions, deflates GDP, and writes
//! the region-level tables the later stages read.

use regcx::data::{ActivityPanel, IndicatorSeries, PanelBuilder};
use regcx::ingest::{deflate, load_intensity, Crosswalk};
use regcx::io::{read_indicator, read_price_index, write_indicator, write_intensity};

use crate::config::{Config, IngestConfig};
use crate::run::Run;
use crate::{CliError, Context};

pub const INDUSTRY: &str = "ingest/industry.csv";
pub const EXPORTS: &str = "ingest/exports.csv";
pub const GDPPC: &str = "ingest/gdppc.csv";
pub const POPULATION: &str = "ingest/population.csv";

fn in_range(ic: &IngestConfig, year: i32) -> bool {
    ic.first_year.is_none_or(|a| year >= a) && ic.last_year.is_none_or(|b| year <= b)
}

fn filter_panel(panel: ActivityPanel, ic: &IngestConfig) -> regcx::Result<ActivityPanel> {
    if ic.first_year.is_none() && ic.last_year.is_none() {
        return Ok(panel);
    }
    let mut b = PanelBuilder::new();
    for (r, a, y, v) in panel.iter().filter(|&(_, _, y, _)| in_range(ic, y)) {
        b.add(r, a, y, v)?;
    }
    Ok(b.build())
}

fn filter_series(s: IndicatorSeries, ic: &IngestConfig) -> regcx::Result<IndicatorSeries> {
    let mut out = IndicatorSeries::new(s.name.clone(), s.units.clone());
    for (r, y, v) in s.iter().filter(|&(_, y, _)| in_range(ic, y)) {
        out.insert(r, y, v)?;
    }
    Ok(out)
}

pub fn run(cfg: &Config) -> Result<(), CliError> {
    let ic = cfg.ingest.as_ref().expect("ingest section validated");
    let mut run = Run::new(cfg, "ingest");
    let crosswalk = match &ic.crosswalk {
        Some(p) => Some(Crosswalk::read(run.input(p)).context(|| "crosswalk".into())?),
        None => None,
    };

    let industry = load_intensity(run.input(&ic.industry), crosswalk.as_ref())
        .and_then(|p| filter_panel(p, ic))
        .context(|| "industry intensities".into())?;
    log::info!(
        "industry: {} regions, {} activities, {} years",
        industry.regions().len(),
        industry.activities().len(),
        industry.years().len()
    );
    write_intensity(&industry, run.create(INDUSTRY)?).context(|| INDUSTRY.into())?;

    if let Some(p) = &ic.exports {
        let exports = load_intensity(run.input(p), crosswalk.as_ref())
            .and_then(|p| filter_panel(p, ic))
            .context(|| "export intensities".into())?;
        log::info!(
            "exports: {} regions, {} products",
            exports.regions().len(),
            exports.activities().len()
        );
        write_intensity(&exports, run.create(EXPORTS)?).context(|| EXPORTS.into())?;
    }

    let mut gdp = read_indicator(run.input(&ic.gdp), "gdppc").context(|| "gdp".into())?;
    if let Some(p) = &ic.price_index {
        let index = read_price_index(run.input(p)).context(|| "price index".into())?;
        let base = ic.base_year.expect("validated with price_index");
        gdp = deflate(&gdp, &index, base).context(|| "deflating gdp".into())?;
    }
    let gdp = filter_series(gdp, ic).context(|| "gdp".into())?;
    write_indicator(&gdp, run.create(GDPPC)?).context(|| GDPPC.into())?;

    let pop = read_indicator(run.input(&ic.population), "population")
        .and_then(|s| filter_series(s, ic))
        .context(|| "population".into())?;
    write_indicator(&pop, run.create(POPULATION)?).context(|| POPULATION.into())?;
    run.finish()
}
