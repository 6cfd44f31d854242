//! Proximity between activities, density of each region around each
//! activity, and closeness of a region's opportunities to complexity.

use std::collections::BTreeMap;

use regcx::io::{fmt_f64, fmt_opt, read_pci, CsvOut};
use regcx::relatedness::{closeness_to_complexity, density, proximity};

use super::complexity::{self as cx, load_mode, pci_for_year, specialization};
use crate::config::{Config, Mode};
use crate::run::Run;
use crate::tidy::{read_keyed, ACTIVITY_HEADER, REGION_HEADER};
use crate::{CliError, Context};

pub fn proximity_file(mode: Mode) -> String {
    format!("relatedness/proximity_{}.csv", mode.name())
}

pub fn density_file(mode: Mode) -> String {
    format!("relatedness/density_{}.csv", mode.name())
}

pub fn closeness_file(mode: Mode) -> String {
    format!("relatedness/closeness_{}.csv", mode.name())
}

pub fn s_curve_file(mode: Mode) -> String {
    format!("relatedness/s_curve_{}.csv", mode.name())
}

pub fn run(cfg: &Config) -> Result<(), CliError> {
    let mut run = Run::new(cfg, "relatedness");
    let indicators = run.upstream(cx::INDICATORS, "complexity")?;
    for &mode in &cfg.relatedness.modes {
        let (panel, baseline) = load_mode(&mut run, mode)?;
        let activity_complexity = match mode {
            Mode::Industry => {
                let p = run.upstream(cx::ACTIVITIES, "complexity")?;
                read_keyed(&p, &ACTIVITY_HEADER, cx::ACTIVITY_INDICATOR)?
            }
            Mode::Export => {
                let p = cfg.complexity.pci.as_ref().expect("validated");
                read_pci(run.input(p)).context(|| "pci".into())?
            }
        };
        let region_complexity = read_keyed(&indicators, &REGION_HEADER, mode.indicator())?;
        let threshold = cfg.complexity.rca_threshold;

        let ctx = || format!("writing {} relatedness outputs", mode.name());
        let mut prox = CsvOut::new(
            run.create(&proximity_file(mode))?,
            &["activity_a", "activity_b", "year", "phi"],
        )
        .context(ctx)?;
        let mut dens = if cfg.relatedness.write_density {
            Some(
                CsvOut::new(
                    run.create(&density_file(mode))?,
                    &["region", "activity", "year", "omega"],
                )
                .context(ctx)?,
            )
        } else {
            None
        };
        let mut close =
            CsvOut::new(run.create(&closeness_file(mode))?, &["region", "year", "closeness"]).context(ctx)?;
        let mut curve = CsvOut::new(
            run.create(&s_curve_file(mode))?,
            &["region", "year", "complexity", "closeness"],
        )
        .context(ctx)?;

        for &year in panel.years() {
            let m = specialization(&panel, &baseline, year, threshold)
                .context(|| format!("{} specialization, year {year}", mode.name()))?;
            let phi = proximity(&m, cfg.exec);
            let omega = density(&m, &phi, cfg.exec);
            let year_complexity: BTreeMap<String, f64> = pci_for_year(&activity_complexity, year);
            let closeness = closeness_to_complexity(&m, &omega, &year_complexity, cfg.exec);
            let y = year.to_string();

            let acts = &phi.activities;
            for i in 0..phi.n() {
                for j in i + 1..phi.n() {
                    let v = phi.get(i, j);
                    if v > 0.0 {
                        prox.row(&[acts[i].as_str(), &acts[j], &y, &fmt_f64(v)]).context(ctx)?;
                    }
                }
            }
            if let Some(w) = dens.as_mut() {
                for (r, region) in omega.regions.iter().enumerate() {
                    for (a, act) in omega.activities.iter().enumerate() {
                        if let Some(v) = omega.get(r, a) {
                            w.row(&[region.as_str(), act, &y, &fmt_f64(v)]).context(ctx)?;
                        }
                    }
                }
            }
            let undefined = closeness.iter().filter(|c| c.is_none()).count();
            if undefined > 0 {
                log::info!("{} {year}: closeness undefined for {undefined} regions", mode.name());
            }
            for (region, c) in m.regions().iter().zip(&closeness) {
                close.row(&[region.as_str(), &y, &fmt_opt(*c)]).context(ctx)?;
                if let (Some(c), Some(k)) = (c, region_complexity.get(&(region.clone(), year))) {
                    curve
                        .row(&[region.as_str(), &y, &fmt_f64(*k), &fmt_f64(*c)])
                        .context(ctx)?;
                }
            }
        }
        prox.finish().context(ctx)?;
        if let Some(w) = dens {
            w.finish().context(ctx)?;
        }
        close.finish().context(ctx)?;
        curve.finish().context(ctx)?;
    }
    run.finish()
}
