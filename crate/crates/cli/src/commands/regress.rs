//! Growth regressions for every configured horizon and specification.

use std::collections::BTreeMap;

use regcx::data::IndicatorSeries;
use regcx::econometrics::{
    build_panel_unchecked, stars, system_gmm, vif, within_fe, Dependent, PanelModelResult, PanelSpec, RegressionTable,
};
use regcx::io::{fmt_f64, fmt_opt, read_indicator, CsvOut};
use regcx::Error;

use super::{complexity as cx, ingest, spatial};
use crate::config::{Config, EstimatorChoice, RegressSpec};
use crate::run::Run;
use crate::tidy::{read_series, NEIGHBOR_HEADER, REGION_HEADER};
use crate::{CliError, Context};

pub const COEFFICIENTS: &str = "regress/coefficients.csv";
pub const DIAGNOSTICS: &str = "regress/diagnostics.csv";
pub const MARGINAL_EFFECTS: &str = "regress/marginal_effects.csv";
pub const DELETIONS: &str = "regress/deletions.csv";
pub const VIF: &str = "regress/vif.csv";
pub const NOTES: &str = "regress/notes.csv";

/// Output name of the lagged dependent, shared by all horizons.
pub const LAG_TERM: &str = "g_lag";

/// Specifications whose complexity terms feed the marginal-effects table.
const MARGINAL_SPECS: [(&str, [&str; 2]); 2] = [("s5", ["indeci", "indeci_nbr"]), ("s8", ["eci", "eci_nbr"])];

const Z95: f64 = 1.959963984540054;

struct Job<'a> {
    id: String,
    horizon: usize,
    spec: &'a RegressSpec,
    table: RegressionTable,
}

fn load_series(run: &mut Run) -> Result<BTreeMap<String, IndicatorSeries>, CliError> {
    let cfg = run.cfg;
    let mut out = BTreeMap::new();
    let gdp = run.upstream(ingest::GDPPC, "ingest")?;
    out.insert(
        "gdppc".into(),
        read_indicator(&gdp, "gdppc").context(|| ingest::GDPPC.into())?,
    );
    let pop = run.upstream(ingest::POPULATION, "ingest")?;
    out.insert(
        "population".into(),
        read_indicator(&pop, "population").context(|| ingest::POPULATION.into())?,
    );

    let regressors: Vec<&str> = cfg
        .regress
        .specs
        .iter()
        .flat_map(|s| &s.regressors)
        .map(String::as_str)
        .collect();
    let complexity = |r: &str| {
        cfg.complexity
            .modes
            .iter()
            .any(|m| r.trim_start_matches("log_") == m.indicator())
    };
    if regressors.iter().any(|r| complexity(r)) {
        let p = run.upstream(cx::INDICATORS, "complexity")?;
        out.extend(read_series(&p, &REGION_HEADER, str::to_string)?);
    }
    if regressors.iter().any(|r| r.ends_with("_nbr")) {
        let p = run.upstream(spatial::NEIGHBORS, "spatial")?;
        out.extend(read_series(&p, &NEIGHBOR_HEADER, |ind| format!("{ind}_nbr"))?);
    }
    Ok(out)
}

fn estimate(cfg: &Config, table: &RegressionTable) -> regcx::Result<PanelModelResult> {
    match cfg.regress.estimator {
        EstimatorChoice::SystemGmm => system_gmm(table, &cfg.regress.gmm),
        EstimatorChoice::WithinFe => within_fe(table),
    }
}

fn term_name(table: &RegressionTable, term: &str) -> String {
    if table.lag_term.as_deref() == Some(term) {
        LAG_TERM.to_string()
    } else {
        term.to_string()
    }
}

pub fn run(cfg: &Config) -> Result<(), CliError> {
    let rc = &cfg.regress;
    let mut run = Run::new(cfg, "regress");
    let series = load_series(&mut run)?;
    for spec in &rc.specs {
        for r in &spec.regressors {
            let base = r.strip_prefix("log_").unwrap_or(r);
            if !series.contains_key(r) && !series.contains_key(base) {
                return Err(CliError::Config(vec![format!(
                    "{}: indicator {r:?} has no values in the stage outputs",
                    spec.id
                )]));
            }
        }
    }
    let refs: Vec<&IndicatorSeries> = series.values().collect();

    let mut jobs = Vec::new();
    for &h in &rc.horizons {
        for spec in &rc.specs {
            let names: Vec<&str> = spec.regressors.iter().map(String::as_str).collect();
            let mut ps = PanelSpec::new(
                Dependent::Growth {
                    series: "gdppc".into(),
                    horizon: h,
                },
                &names,
            );
            ps.lag_mode = rc.lag_mode;
            ps.year_effects = rc.year_effects;
            let id = format!("h{h}_{}", spec.id);
            let table = build_panel_unchecked(&refs, &ps).context(|| format!("panel for {id}"))?;
            jobs.push(Job {
                id,
                horizon: h,
                spec,
                table,
            });
        }
    }

    let ctx = || "writing regression outputs".to_string();
    let mut w = CsvOut::new(run.create(DELETIONS)?, &["spec_id", "region", "year", "reason"]).context(ctx)?;
    for j in &jobs {
        for d in &j.table.deletions {
            w.row(&[j.id.as_str(), &d.region, &d.year.to_string(), &d.reason])
                .context(ctx)?;
        }
    }
    w.finish().context(ctx)?;
    if let Some(j) = jobs.iter().find(|j| j.table.rows.is_empty()) {
        return Err(CliError::Core {
            context: format!("panel for {}", j.id),
            source: Error::EmptyPanel(format!(
                "every candidate row was deleted; see {}",
                run.output_path(DELETIONS).display()
            )),
        });
    }

    let results = cfg
        .exec
        .try_map_range(jobs.len(), |k| estimate(cfg, &jobs[k].table).map_err(|e| (k, e)))
        .map_err(|(k, source)| CliError::Core {
            context: format!("estimating {}", jobs[k].id),
            source,
        })?;

    let mut coef = CsvOut::new(
        run.create(COEFFICIENTS)?,
        &["spec_id", "term", "estimate", "std_error", "stars"],
    )
    .context(ctx)?;
    let mut diag = CsvOut::new(
        run.create(DIAGNOSTICS)?,
        &["spec_id", "n_obs", "n_instruments", "sargan_p", "ar1_p", "ar2_p"],
    )
    .context(ctx)?;
    let mut notes = CsvOut::new(run.create(NOTES)?, &["spec_id", "note"]).context(ctx)?;
    let mut vifs = CsvOut::new(run.create(VIF)?, &["spec_id", "term", "vif", "flagged"]).context(ctx)?;
    let mut me = CsvOut::new(
        run.create(MARGINAL_EFFECTS)?,
        &["horizon", "term", "estimate", "ci_low", "ci_high"],
    )
    .context(ctx)?;

    for (j, res) in jobs.iter().zip(&results) {
        log::info!(
            "{}: {} observations, {} regions, {}",
            j.id,
            res.n_obs,
            res.n_regions,
            res.estimator
        );
        for c in res.coefficients.iter().chain(&res.nuisance) {
            coef.row(&[
                j.id.as_str(),
                &term_name(&j.table, &c.term),
                &fmt_f64(c.estimate),
                &fmt_f64(c.std_error),
                stars(c.p_value()),
            ])
            .context(ctx)?;
        }
        diag.row(&[
            j.id.as_str(),
            &res.n_obs.to_string(),
            &res.n_instruments.map(|n| n.to_string()).unwrap_or_default(),
            &fmt_opt(res.sargan.map(|t| t.p_value)),
            &fmt_opt(res.ar1.map(|t| t.p_value)),
            &fmt_opt(res.ar2.map(|t| t.p_value)),
        ])
        .context(ctx)?;
        for n in &res.notes {
            notes.row(&[j.id.as_str(), n]).context(ctx)?;
        }
        if j.spec.regressors.len() >= 2 {
            let names: Vec<&str> = j.spec.regressors.iter().map(String::as_str).collect();
            let v = vif(&j.table, &names).context(|| format!("VIF for {}", j.id))?;
            for name in &names {
                let x = &v[*name];
                vifs.row(&[
                    j.id.as_str(),
                    name,
                    &fmt_f64(x.value),
                    if x.flagged { "true" } else { "false" },
                ])
                .context(ctx)?;
            }
        }
        for (sid, terms) in MARGINAL_SPECS {
            if j.spec.id != sid {
                continue;
            }
            for t in terms {
                if let Some(c) = res.coefficient(t) {
                    let h = j.horizon.to_string();
                    let half = Z95 * c.std_error;
                    me.row(&[
                        h.as_str(),
                        t,
                        &fmt_f64(c.estimate),
                        &fmt_f64(c.estimate - half),
                        &fmt_f64(c.estimate + half),
                    ])
                    .context(ctx)?;
                }
            }
        }
    }
    coef.finish().context(ctx)?;
    diag.finish().context(ctx)?;
    notes.finish().context(ctx)?;
    vifs.finish().context(ctx)?;
    me.finish().context(ctx)?;
    run.finish()
}
