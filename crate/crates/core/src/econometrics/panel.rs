use std::collections::{BTreeMap, BTreeSet};

use crate::data::IndicatorSeries;
use crate::error::{Error, Result};

/// Continuous-time-equivalent growth over the window `[t, t + h]`:
/// `g_t = (ln y_{t+h} − ln y_t) / h`, defined where both endpoints exist.
pub fn growth_rate(y: &IndicatorSeries, horizon: usize) -> Result<IndicatorSeries> {
    if horizon == 0 {
        return Err(Error::invalid("growth horizon must be ≥ 1"));
    }
    if let Some((r, t, v)) = y.iter().find(|&(_, _, v)| !(v > 0.0)) {
        return Err(Error::invalid(format!(
            "{} must be positive for growth rates, got {v} at ({r}, {t})",
            y.name
        )));
    }
    let h = horizon as i32;
    let mut out = IndicatorSeries::new(format!("g{horizon}_{}", y.name), "log points per year");
    for (r, t, v) in y.iter() {
        if let Some(end) = y.get(r, t + h) {
            out.insert(r, t, (end.ln() - v.ln()) / horizon as f64)?;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Dependent {
    /// Growth of a series over `horizon` years starting at `t`.
    Growth { series: String, horizon: usize },
    /// The series itself.
    Level { series: String },
}

impl Dependent {
    pub fn series(&self) -> &str {
        match self {
            Dependent::Growth { series, .. } | Dependent::Level { series } => series,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Dependent::Growth { series, horizon } => format!("g{horizon}_{series}"),
            Dependent::Level { series } => series.clone(),
        }
    }
}

/// Spacing of the lagged dependent and of every lag used by the estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LagMode {
    /// The previous, non-overlapping window: a lag of `h` years for growth
    /// of horizon `h`, one year for levels.
    #[default]
    NonOverlapping,
    /// Always one year.
    OneYear,
}

/// Regressor names are series names; a `log_` prefix takes the natural log
/// of the named series (which must then be positive).
#[derive(Debug, Clone, PartialEq)]
pub struct PanelSpec {
    pub dependent: Dependent,
    pub regressors: Vec<String>,
    pub include_lagged_dependent: bool,
    pub lag_mode: LagMode,
    pub year_effects: bool,
}

impl PanelSpec {
    pub fn new(dependent: Dependent, regressors: &[&str]) -> Self {
        Self {
            dependent,
            regressors: regressors.iter().map(|s| s.to_string()).collect(),
            include_lagged_dependent: true,
            lag_mode: LagMode::NonOverlapping,
            year_effects: true,
        }
    }

    /// Years between an observation and its lag.
    pub fn lag_step(&self) -> i32 {
        match (self.lag_mode, &self.dependent) {
            (LagMode::OneYear, _) | (LagMode::NonOverlapping, Dependent::Level { .. }) => 1,
            (LagMode::NonOverlapping, Dependent::Growth { horizon, .. }) => *horizon as i32,
        }
    }

    pub fn lag_term(&self) -> String {
        format!("{}_lag", self.dependent.label())
    }

    fn validate(&self) -> Result<()> {
        if let Dependent::Growth { horizon: 0, .. } = self.dependent {
            return Err(Error::invalid("growth horizon must be ≥ 1"));
        }
        let mut seen = BTreeSet::new();
        for r in &self.regressors {
            if !seen.insert(r.as_str()) {
                return Err(Error::invalid(format!("regressor {r} listed twice")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelRow {
    pub region: usize,
    pub year: i32,
    pub y: f64,
    pub y_lag: Option<f64>,
    pub x: Vec<f64>,
}

/// A `(region, year)` candidate removed by listwise deletion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Deletion {
    pub region: String,
    pub year: i32,
    pub reason: String,
}

/// Complete-case regression rows plus the variable histories the GMM
/// instruments are drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTable {
    pub dependent: String,
    pub regressors: Vec<String>,
    /// Term name of the lagged dependent, when included.
    pub lag_term: Option<String>,
    pub step: i32,
    pub year_effects: bool,
    pub region_names: Vec<String>,
    /// Sorted by (region, year).
    pub rows: Vec<PanelRow>,
    /// Every defined dependent value, keyed by (region index, year).
    pub dependent_history: BTreeMap<(usize, i32), f64>,
    /// Every defined (transformed) regressor value, keyed by (regressor, region, year).
    pub regressor_history: BTreeMap<(usize, usize, i32), f64>,
    pub deletions: Vec<Deletion>,
}

impl RegressionTable {
    pub fn n_obs(&self) -> usize {
        self.rows.len()
    }

    pub fn n_regions_used(&self) -> usize {
        self.rows.iter().map(|r| r.region).collect::<BTreeSet<_>>().len()
    }

    pub fn years(&self) -> BTreeSet<i32> {
        self.rows.iter().map(|r| r.year).collect()
    }

    /// Values of a named column (a regressor or the lag term) in row order.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        if self.lag_term.as_deref() == Some(name) {
            return Some(self.rows.iter().map(|r| r.y_lag.expect("lag present")).collect());
        }
        let k = self.regressors.iter().position(|r| r == name)?;
        Some(self.rows.iter().map(|r| r.x[k]).collect())
    }
}

/// Resolves a regressor name against the available series.
fn resolve<'a>(name: &str, series: &BTreeMap<&str, &'a IndicatorSeries>) -> Result<(&'a IndicatorSeries, bool)> {
    if let Some(s) = series.get(name) {
        return Ok((s, false));
    }
    if let Some(base) = name.strip_prefix("log_") {
        if let Some(s) = series.get(base) {
            return Ok((s, true));
        }
    }
    Err(Error::Missing(format!("indicator {name} not supplied")))
}

/// Builds the complete-case table. Candidates are every region in any
/// supplied series crossed with every year of the dependent's base series;
/// each candidate without a full row is logged with the first missing item.
pub fn build_panel(series: &[&IndicatorSeries], spec: &PanelSpec) -> Result<RegressionTable> {
    let table = build_panel_unchecked(series, spec)?;
    if table.rows.is_empty() {
        return Err(Error::EmptyPanel(format!(
            "no complete rows for {} after deleting {} candidates",
            table.dependent,
            table.deletions.len()
        )));
    }
    Ok(table)
}

/// [`build_panel`] without the empty-table check, so callers can report
/// the deletions of a panel that ends up empty.
pub fn build_panel_unchecked(series: &[&IndicatorSeries], spec: &PanelSpec) -> Result<RegressionTable> {
    spec.validate()?;
    let by_name: BTreeMap<&str, &IndicatorSeries> = series.iter().map(|s| (s.name.as_str(), *s)).collect();
    let base = *by_name
        .get(spec.dependent.series())
        .ok_or_else(|| Error::Missing(format!("indicator {} not supplied", spec.dependent.series())))?;
    let dep = match &spec.dependent {
        Dependent::Growth { horizon, .. } => growth_rate(base, *horizon)?,
        Dependent::Level { .. } => base.clone(),
    };
    let resolved: Vec<(&IndicatorSeries, bool)> = spec
        .regressors
        .iter()
        .map(|n| resolve(n, &by_name))
        .collect::<Result<_>>()?;

    let region_names: Vec<String> = {
        let mut set = BTreeSet::new();
        for s in series {
            set.extend(s.regions().into_iter().map(str::to_string));
        }
        set.into_iter().collect()
    };
    let region_idx: BTreeMap<&str, usize> = region_names.iter().enumerate().map(|(i, r)| (r.as_str(), i)).collect();
    let years = base.years();
    let step = spec.lag_step();

    let dependent_history: BTreeMap<(usize, i32), f64> = dep.iter().map(|(r, t, v)| ((region_idx[r], t), v)).collect();
    let mut regressor_history = BTreeMap::new();
    for (k, (s, log)) in resolved.iter().enumerate() {
        for (r, t, v) in s.iter() {
            let v = if *log { v.ln() } else { v };
            if v.is_finite() {
                regressor_history.insert((k, region_idx[r], t), v);
            }
        }
    }

    let mut rows = Vec::new();
    let mut deletions = Vec::new();
    for (ri, region) in region_names.iter().enumerate() {
        'year: for &t in &years {
            let delete = |reason: String, deletions: &mut Vec<Deletion>| {
                deletions.push(Deletion {
                    region: region.clone(),
                    year: t,
                    reason,
                });
            };
            let Some(&y) = dependent_history.get(&(ri, t)) else {
                delete(format!("{} undefined", dep.name), &mut deletions);
                continue;
            };
            let y_lag = if spec.include_lagged_dependent {
                match dependent_history.get(&(ri, t - step)) {
                    Some(&v) => Some(v),
                    None => {
                        delete(format!("lagged {} undefined", dep.name), &mut deletions);
                        continue;
                    }
                }
            } else {
                None
            };
            let mut x = Vec::with_capacity(resolved.len());
            for (k, (s, log)) in resolved.iter().enumerate() {
                match regressor_history.get(&(k, ri, t)) {
                    Some(&v) => x.push(v),
                    None => {
                        let reason = match s.get(region, t) {
                            Some(v) if *log => format!("{} = {v} has no logarithm", spec.regressors[k]),
                            _ => format!("{} missing", spec.regressors[k]),
                        };
                        delete(reason, &mut deletions);
                        continue 'year;
                    }
                }
            }
            rows.push(PanelRow {
                region: ri,
                year: t,
                y,
                y_lag,
                x,
            });
        }
    }
    Ok(RegressionTable {
        dependent: spec.dependent.label(),
        regressors: spec.regressors.clone(),
        lag_term: spec.include_lagged_dependent.then(|| spec.lag_term()),
        step,
        year_effects: spec.year_effects,
        region_names,
        rows,
        dependent_history,
        regressor_history,
        deletions,
    })
}
