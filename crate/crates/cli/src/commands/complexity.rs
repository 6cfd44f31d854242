//! Per-year RCA, specialization matrices and complexity scores.

use std::collections::BTreeMap;

use regcx::complexity::{eci_from_external, eigen_complexity, ComplexityResult, EigenOptions};
use regcx::data::{ActivityPanel, IndicatorSeries, SpecializationMatrix};
use regcx::io::{fmt_f64, read_indicator, read_intensity, read_pci, read_shares, CsvOut};
use regcx::rca::{binarize, rca, Baseline};
use regcx::stats::pearson;
use regcx::Exec;

use super::ingest;
use crate::config::{Config, Mode};
use crate::run::Run;
use crate::tidy::{ACTIVITY_HEADER, REGION_HEADER};
use crate::{CliError, Context};

pub const INDICATORS: &str = "complexity/indicators.csv";
pub const ACTIVITIES: &str = "complexity/activities.csv";
pub const REGION_RANKING: &str = "complexity/region_ranking.csv";
pub const ACTIVITY_RANKING: &str = "complexity/activity_ranking.csv";
pub const CORRELATIONS: &str = "complexity/correlations.csv";

/// Name of the activity-level indicator of the industry mode.
pub const ACTIVITY_INDICATOR: &str = "ici";

pub fn drops_file(mode: Mode) -> String {
    format!("complexity/drops_{}.csv", mode.name())
}

pub fn activity_drops_file(mode: Mode) -> String {
    format!("complexity/activity_drops_{}.csv", mode.name())
}

/// `(key, value)` pairs sorted by descending value, ties by key.
fn ranked<'k>(pairs: impl Iterator<Item = (&'k str, f64)>) -> Vec<(&'k str, f64)> {
    let mut v: Vec<_> = pairs.collect();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(b.0)));
    v
}

fn write_ranking<'k, W: std::io::Write>(
    w: &mut CsvOut<W>,
    year: i32,
    indicator: &str,
    pairs: impl Iterator<Item = (&'k str, f64)>,
) -> regcx::Result<()> {
    let y = year.to_string();
    for (rank, (key, v)) in ranked(pairs).into_iter().enumerate() {
        w.row(&[y.as_str(), indicator, &(rank + 1).to_string(), key, &fmt_f64(v)])?;
    }
    Ok(())
}

/// Region-level intensities for a mode, and the RCA baseline it uses.
pub fn load_mode(run: &mut Run, mode: Mode) -> Result<(ActivityPanel, Baseline), CliError> {
    let (rel, ctx) = match mode {
        Mode::Industry => (ingest::INDUSTRY, "industry intensities"),
        Mode::Export => (ingest::EXPORTS, "export intensities"),
    };
    let path = run.upstream(rel, "ingest")?;
    let panel = read_intensity(&path).context(|| ctx.into())?;
    let baseline = match (mode, &run.cfg.complexity.export_shares) {
        (Mode::Export, Some(p)) => Baseline::External(read_shares(run.input(p)).context(|| "export shares".into())?),
        _ => Baseline::Internal,
    };
    Ok((panel, baseline))
}

pub fn specialization(
    panel: &ActivityPanel,
    baseline: &Baseline,
    year: i32,
    threshold: f64,
) -> regcx::Result<SpecializationMatrix> {
    Ok(binarize(&rca(panel, baseline, year, Exec::Sequential)?, threshold))
}

/// PCI values for one year keyed by activity.
pub fn pci_for_year(pci: &BTreeMap<(String, i32), f64>, year: i32) -> BTreeMap<String, f64> {
    pci.iter()
        .filter(|((_, y), _)| *y == year)
        .map(|((a, _), v)| (a.clone(), *v))
        .collect()
}

pub fn run(cfg: &Config) -> Result<(), CliError> {
    let mut run = Run::new(cfg, "complexity");
    let cc = &cfg.complexity;
    let opts = EigenOptions {
        dense_limit: cc.dense_limit,
        ..Default::default()
    };
    let mut per_mode: Vec<(Mode, Vec<ComplexityResult>)> = Vec::new();
    let mut pcis: BTreeMap<i32, BTreeMap<String, f64>> = BTreeMap::new();
    for &mode in &cc.modes {
        let (panel, baseline) = load_mode(&mut run, mode)?;
        let pci = match mode {
            Mode::Export => Some(read_pci(run.input(cc.pci.as_ref().expect("validated"))).context(|| "pci".into())?),
            Mode::Industry => None,
        };
        let years = panel.years().to_vec();
        if let Some(pci) = &pci {
            pcis = years.iter().map(|&y| (y, pci_for_year(pci, y))).collect();
        }
        let results = cfg.exec.try_map_range(years.len(), |k| {
            let year = years[k];
            let m = specialization(&panel, &baseline, year, cc.rca_threshold).map_err(|e| (year, e))?;
            match &pci {
                Some(pci) => eci_from_external(&m, &pci_for_year(pci, year)),
                None => eigen_complexity(&m, &opts),
            }
            .map_err(|e| (year, e))
        });
        let results = results.map_err(|(year, source)| CliError::Core {
            context: format!("{} complexity, year {year}", mode.name()),
            source,
        })?;
        for r in &results {
            log::info!(
                "{} {}: {} regions scored, {} dropped",
                mode.name(),
                r.year,
                r.regions.len(),
                r.dropped_regions.len()
            );
        }
        per_mode.push((mode, results));
    }

    let ctx = || "writing complexity outputs".to_string();
    let mut w = CsvOut::new(run.create(INDICATORS)?, &REGION_HEADER).context(ctx)?;
    for (mode, results) in &per_mode {
        for r in results {
            for (region, v) in r.regions.iter().zip(&r.region_scores) {
                w.row(&[region.as_str(), &r.year.to_string(), mode.indicator(), &fmt_f64(*v)])
                    .context(ctx)?;
            }
        }
    }
    w.finish().context(ctx)?;

    let mut w = CsvOut::new(run.create(ACTIVITIES)?, &ACTIVITY_HEADER).context(ctx)?;
    for (_, results) in per_mode.iter().filter(|(m, _)| *m == Mode::Industry) {
        for r in results {
            if let Some(scores) = &r.activity_scores {
                for (a, v) in r.activities.iter().zip(scores) {
                    w.row(&[a.as_str(), &r.year.to_string(), ACTIVITY_INDICATOR, &fmt_f64(*v)])
                        .context(ctx)?;
                }
            }
        }
    }
    w.finish().context(ctx)?;

    for (mode, results) in &per_mode {
        let mut w = CsvOut::new(run.create(&drops_file(*mode))?, &["region", "year", "reason"]).context(ctx)?;
        for r in results {
            for (region, why) in &r.dropped_regions {
                w.row(&[region.as_str(), &r.year.to_string(), &why.to_string()])
                    .context(ctx)?;
            }
        }
        w.finish().context(ctx)?;
        let mut w = CsvOut::new(
            run.create(&activity_drops_file(*mode))?,
            &["activity", "year", "reason"],
        )
        .context(ctx)?;
        for r in results {
            for (a, why) in &r.dropped_activities {
                w.row(&[a.as_str(), &r.year.to_string(), &why.to_string()])
                    .context(ctx)?;
            }
        }
        w.finish().context(ctx)?;
    }

    // leaderboards of regions and activities per year
    let mut w = CsvOut::new(
        run.create(REGION_RANKING)?,
        &["year", "indicator", "rank", "region", "value"],
    )
    .context(ctx)?;
    for (mode, results) in &per_mode {
        for r in results {
            let pairs = r
                .regions
                .iter()
                .map(String::as_str)
                .zip(r.region_scores.iter().copied());
            write_ranking(&mut w, r.year, mode.indicator(), pairs).context(ctx)?;
        }
    }
    w.finish().context(ctx)?;
    let mut w = CsvOut::new(
        run.create(ACTIVITY_RANKING)?,
        &["year", "indicator", "rank", "activity", "value"],
    )
    .context(ctx)?;
    for (mode, results) in &per_mode {
        for r in results {
            match (mode, &r.activity_scores) {
                (Mode::Industry, Some(scores)) => {
                    let pairs = r.activities.iter().map(String::as_str).zip(scores.iter().copied());
                    write_ranking(&mut w, r.year, ACTIVITY_INDICATOR, pairs).context(ctx)?;
                }
                (Mode::Export, _) => {
                    let pci = pcis.get(&r.year).cloned().unwrap_or_default();
                    let pairs = r.activities.iter().filter_map(|a| pci.get(a).map(|v| (a.as_str(), *v)));
                    write_ranking(&mut w, r.year, "pci", pairs).context(ctx)?;
                }
                _ => {}
            }
        }
    }
    w.finish().context(ctx)?;

    // pairwise correlations of the complexity indicators and the controls
    let gdp = read_indicator(&run.upstream(ingest::GDPPC, "ingest")?, "gdppc").context(|| ingest::GDPPC.into())?;
    let pop = read_indicator(&run.upstream(ingest::POPULATION, "ingest")?, "population")
        .context(|| ingest::POPULATION.into())?;
    let mut series: Vec<IndicatorSeries> = Vec::new();
    for (mode, results) in &per_mode {
        let mut s = IndicatorSeries::new(mode.indicator(), "");
        for r in results {
            for (region, v) in r.regions.iter().zip(&r.region_scores) {
                s.insert(region, r.year, *v).context(ctx)?;
            }
        }
        series.push(s);
    }
    series.push(gdp);
    series.push(pop);
    let years: std::collections::BTreeSet<i32> =
        per_mode.iter().flat_map(|(_, rs)| rs.iter().map(|r| r.year)).collect();
    let mut w = CsvOut::new(
        run.create(CORRELATIONS)?,
        &["year", "indicator_a", "indicator_b", "n", "pearson"],
    )
    .context(ctx)?;
    for &year in &years {
        let slices: Vec<BTreeMap<&str, f64>> = series.iter().map(|s| s.year_slice(year)).collect();
        for a in 0..series.len() {
            for b in a + 1..series.len() {
                let (x, y): (Vec<f64>, Vec<f64>) = slices[a]
                    .iter()
                    .filter_map(|(r, va)| slices[b].get(r).map(|vb| (*va, *vb)))
                    .unzip();
                let rho = pearson(&x, &y);
                w.row(&[
                    year.to_string(),
                    series[a].name.clone(),
                    series[b].name.clone(),
                    x.len().to_string(),
                    regcx::io::fmt_opt(rho),
                ])
                .context(ctx)?;
            }
        }
    }
    w.finish().context(ctx)?;
    run.finish()
}
