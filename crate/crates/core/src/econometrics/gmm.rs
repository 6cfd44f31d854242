use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};

use super::linalg::{dependent_columns, spd_inverse};
use super::panel::{PanelRow, RegressionTable};
use super::{chi2_upper, normal_two_sided, ChiSquareTest, Coefficient, Estimator, PanelModelResult, ZTest};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GmmOptions {
    pub two_step: bool,
    /// One instrument column per lag depth instead of one per period and depth.
    pub collapse: bool,
    /// Deepest lag of the dependent (in lag steps) instrumenting the
    /// difference equation; the shallowest is 2.
    pub max_lag_depth: usize,
    /// Lags of the regressors' levels instrumenting the difference equation.
    /// Starting at 1 treats regressors as predetermined, at 2 as endogenous.
    pub regressor_lags: (usize, usize),
}

impl Default for GmmOptions {
    fn default() -> Self {
        Self {
            two_step: true,
            collapse: true,
            max_lag_depth: 4,
            regressor_lags: (1, 3),
        }
    }
}

/// An instrument column. `period` is `None` for collapsed instruments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Instrument {
    DiffLagDep { lag: usize, period: Option<i32> },
    DiffLagRegressor { k: usize, lag: usize, period: Option<i32> },
    LevelDiffDep { period: Option<i32> },
    LevelDiffRegressor { k: usize, period: Option<i32> },
    Const,
    Year(i32),
}

/// One region's stacked system: difference rows first, then level rows.
#[derive(Debug, Clone)]
struct Block {
    z: DMatrix<f64>,
    x: DMatrix<f64>,
    y: DVector<f64>,
    h: DMatrix<f64>,
    diff_years: Vec<i32>,
}

impl Block {
    fn n_diff(&self) -> usize {
        self.diff_years.len()
    }
}

/// Estimation internals kept for the diagnostics.
#[derive(Debug, Clone)]
pub struct GmmFit {
    pub params: Vec<String>,
    /// Leading entries of `params` that are reported as coefficients.
    pub n_reported: usize,
    pub two_step: bool,
    pub n_obs: usize,
    pub n_regions: usize,
    pub n_instruments: usize,
    pub beta_one_step: DVector<f64>,
    pub beta_two_step: Option<DVector<f64>>,
    /// Instruments removed as linear combinations of the others.
    pub dropped_instruments: Vec<String>,
    step: i32,
    blocks: Vec<Block>,
    zx: DMatrix<f64>,
    w_one: DMatrix<f64>,
    w_two: Option<DMatrix<f64>>,
    a_inv_one: DMatrix<f64>,
    a_inv_two: Option<DMatrix<f64>>,
    sigma2: f64,
}

impl GmmFit {
    /// The reported estimate (two-step when requested).
    pub fn beta(&self) -> &DVector<f64> {
        match (&self.beta_two_step, self.two_step) {
            (Some(b), true) => b,
            _ => &self.beta_one_step,
        }
    }

    fn weighting(&self) -> (&DMatrix<f64>, &DMatrix<f64>) {
        match (&self.w_two, &self.a_inv_two, self.two_step) {
            (Some(w), Some(a), true) => (w, a),
            _ => (&self.w_one, &self.a_inv_one),
        }
    }

    /// Conventional one-step covariance, or the uncorrected two-step one.
    pub fn covariance(&self) -> DMatrix<f64> {
        if self.two_step {
            self.weighting().1.clone()
        } else {
            &self.a_inv_one * self.sigma2
        }
    }

    fn residuals(&self, beta: &DVector<f64>) -> Vec<DVector<f64>> {
        self.blocks.iter().map(|b| &b.y - &b.x * beta).collect()
    }
}

fn describe(inst: &Instrument, regressors: &[String]) -> String {
    let at = |p: &Option<i32>| p.map(|t| format!(" ({t})")).unwrap_or_default();
    match inst {
        Instrument::DiffLagDep { lag, period } => format!("dependent lag {lag}{}", at(period)),
        Instrument::DiffLagRegressor { k, lag, period } => format!("{} lag {lag}{}", regressors[*k], at(period)),
        Instrument::LevelDiffDep { period } => format!("dependent difference{}", at(period)),
        Instrument::LevelDiffRegressor { k, period } => format!("{} difference{}", regressors[*k], at(period)),
        Instrument::Const => "constant".into(),
        Instrument::Year(y) => format!("year {y}"),
    }
}

fn value(map: &BTreeMap<(usize, i32), f64>, region: usize, year: i32) -> Option<f64> {
    map.get(&(region, year)).copied()
}

/// Closed-form linear GMM: `β = (X'Z W Z'X)⁻¹ X'Z W Z'y`.
fn solve(
    zx: &DMatrix<f64>,
    zy: &DVector<f64>,
    w: &DMatrix<f64>,
    params: &[String],
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let xzw = zx.transpose() * w;
    let a_inv = spd_inverse(&(&xzw * zx)).ok_or_else(|| Error::RankDeficient(params.to_vec()))?;
    let beta = &a_inv * (xzw * zy);
    Ok((beta, a_inv))
}

/// Fits the system GMM estimator and keeps what the diagnostics need.
///
/// Difference equation: `Δy_t = ρ Δy_{t−s} + β'Δx_t + Δν_t + Δε_t`,
/// instrumented by `y_{t−2s} … y_{t−Ls}` and by regressor levels at the
/// configured lags. Level equation: `y_t = ρ y_{t−s} + β'x_t + c + ν_t + μ + ε_t`,
/// instrumented by `Δy_{t−s}`, by the matching regressor differences, and by
/// the constant and year dummies. Missing instrument values are zero. The
/// one-step weighting is block diagonal: the usual (2, −1) band for the
/// difference rows and the identity for the level rows.
pub fn system_gmm_fit(table: &RegressionTable, opts: &GmmOptions) -> Result<GmmFit> {
    let Some(lag_term) = table.lag_term.clone() else {
        return Err(Error::invalid("system GMM needs the lagged dependent"));
    };
    if opts.max_lag_depth < 2 {
        return Err(Error::invalid("max_lag_depth must be ≥ 2"));
    }
    let (lag_lo, lag_hi) = opts.regressor_lags;
    if lag_lo == 0 || lag_hi < lag_lo {
        return Err(Error::invalid(format!(
            "invalid regressor lag range {lag_lo}..{lag_hi}"
        )));
    }
    let years: Vec<i32> = table.years().into_iter().collect();
    if years.len() < 3 {
        return Err(Error::InsufficientPeriods(format!(
            "system GMM needs at least 4 periods of the dependent (3 with a defined lag), found {}",
            years.len()
        )));
    }
    let s = table.step;
    let k = table.regressors.len();
    let dummy_years: Vec<i32> = if table.year_effects {
        years[1..].to_vec()
    } else {
        Vec::new()
    };
    let mut params = vec![lag_term];
    params.extend(table.regressors.iter().cloned());
    params.push("const".into());
    params.extend(dummy_years.iter().map(|y| format!("year_{y}")));
    let p = params.len();
    let n_reported = 1 + k;
    let dummy_col = |year: i32| dummy_years.iter().position(|&y| y == year).map(|d| k + 2 + d);

    let x_hist = |j: usize, region: usize, year: i32| table.regressor_history.get(&(j, region, year)).copied();
    let y_hist = &table.dependent_history;
    let period = |t: i32| (!opts.collapse).then_some(t);

    // group rows by region
    let mut groups: Vec<Vec<&PanelRow>> = Vec::new();
    for row in &table.rows {
        match groups.last_mut() {
            Some(g) if g[0].region == row.region => g.push(row),
            _ => groups.push(vec![row]),
        }
    }

    // first pass: sparse instrument entries per block
    struct Raw {
        x: Vec<Vec<f64>>,
        y: Vec<f64>,
        z: Vec<Vec<(Instrument, f64)>>,
        diff_years: Vec<i32>,
    }
    let mut raws = Vec::with_capacity(groups.len());
    let mut keys = BTreeSet::new();
    for g in &groups {
        let region = g[0].region;
        let by_year: BTreeMap<i32, &PanelRow> = g.iter().map(|r| (r.year, *r)).collect();
        let mut raw = Raw {
            x: Vec::new(),
            y: Vec::new(),
            z: Vec::new(),
            diff_years: Vec::new(),
        };
        for r in g {
            let Some(prev) = by_year.get(&(r.year - s)) else {
                continue;
            };
            let mut xr = vec![0.0; p];
            xr[0] = r.y_lag.expect("lag present") - prev.y_lag.expect("lag present");
            for j in 0..k {
                xr[1 + j] = r.x[j] - prev.x[j];
            }
            if let Some(c) = dummy_col(r.year) {
                xr[c] += 1.0;
            }
            if let Some(c) = dummy_col(prev.year) {
                xr[c] -= 1.0;
            }
            let mut zr = Vec::new();
            for lag in 2..=opts.max_lag_depth {
                if let Some(v) = value(y_hist, region, r.year - lag as i32 * s) {
                    zr.push((
                        Instrument::DiffLagDep {
                            lag,
                            period: period(r.year),
                        },
                        v,
                    ));
                }
            }
            for j in 0..k {
                for lag in lag_lo..=lag_hi {
                    if let Some(v) = x_hist(j, region, r.year - lag as i32 * s) {
                        zr.push((
                            Instrument::DiffLagRegressor {
                                k: j,
                                lag,
                                period: period(r.year),
                            },
                            v,
                        ));
                    }
                }
            }
            raw.x.push(xr);
            raw.y.push(r.y - prev.y);
            raw.z.push(zr);
            raw.diff_years.push(r.year);
        }
        for r in g {
            let mut xr = vec![0.0; p];
            xr[0] = r.y_lag.expect("lag present");
            xr[1..=k].copy_from_slice(&r.x);
            xr[k + 1] = 1.0;
            if let Some(c) = dummy_col(r.year) {
                xr[c] = 1.0;
            }
            let mut zr = vec![(Instrument::Const, 1.0)];
            if let (Some(a), Some(b)) = (value(y_hist, region, r.year - s), value(y_hist, region, r.year - 2 * s)) {
                zr.push((Instrument::LevelDiffDep { period: period(r.year) }, a - b));
            }
            for j in 0..k {
                let t1 = r.year - (lag_lo as i32 - 1) * s;
                if let (Some(a), Some(b)) = (x_hist(j, region, t1), x_hist(j, region, t1 - s)) {
                    zr.push((
                        Instrument::LevelDiffRegressor {
                            k: j,
                            period: period(r.year),
                        },
                        a - b,
                    ));
                }
            }
            if dummy_col(r.year).is_some() {
                zr.push((Instrument::Year(r.year), 1.0));
            }
            raw.x.push(xr);
            raw.y.push(r.y);
            raw.z.push(zr);
        }
        for zr in &raw.z {
            keys.extend(zr.iter().filter(|(_, v)| *v != 0.0).map(|(i, _)| *i));
        }
        raws.push(raw);
    }
    if raws.iter().all(|r| r.diff_years.is_empty()) {
        return Err(Error::InsufficientPeriods(
            "no region has two consecutive observations".into(),
        ));
    }
    let index: BTreeMap<Instrument, usize> = keys.iter().enumerate().map(|(i, k)| (*k, i)).collect();
    let n_inst = index.len();

    let mut blocks = Vec::with_capacity(raws.len());
    for raw in raws {
        let n = raw.y.len();
        let nd = raw.diff_years.len();
        let mut z = DMatrix::zeros(n, n_inst);
        for (i, zr) in raw.z.iter().enumerate() {
            for (key, v) in zr {
                if let Some(&c) = index.get(key) {
                    z[(i, c)] = *v;
                }
            }
        }
        let x = DMatrix::from_fn(n, p, |i, j| raw.x[i][j]);
        let mut h = DMatrix::identity(n, n);
        for a in 0..nd {
            h[(a, a)] = 2.0;
            for b in 0..nd {
                if raw.diff_years[b] - raw.diff_years[a] == s {
                    h[(a, b)] = -1.0;
                    h[(b, a)] = -1.0;
                }
            }
        }
        blocks.push(Block {
            z,
            x,
            y: DVector::from_vec(raw.y),
            h,
            diff_years: raw.diff_years,
        });
    }

    // instruments that are linear combinations of others (lagged growth is a
    // difference of lagged log levels, say) carry no information; drop them,
    // checking the constant and year dummies first so a data column goes
    let total: usize = blocks.iter().map(|b| b.y.len()).sum();
    let keys: Vec<Instrument> = keys.into_iter().collect();
    let mut order: Vec<usize> = (0..n_inst).collect();
    order.sort_by_key(|&c| !matches!(keys[c], Instrument::Const | Instrument::Year(_)));
    let mut stacked_z = DMatrix::zeros(total, n_inst);
    let mut at = 0;
    for b in &blocks {
        for (dst, &src) in order.iter().enumerate() {
            stacked_z
                .view_mut((at, dst), (b.y.len(), 1))
                .copy_from(&b.z.column(src));
        }
        at += b.y.len();
    }
    let norms: Vec<f64> = stacked_z.column_iter().map(|c| c.norm()).collect();
    let mut redundant: Vec<usize> = dependent_columns(&stacked_z, &norms)
        .into_iter()
        .map(|j| order[j])
        .collect();
    redundant.sort_unstable();
    let dropped_instruments: Vec<String> = redundant
        .iter()
        .map(|&c| describe(&keys[c], &table.regressors))
        .collect();
    if !redundant.is_empty() {
        for b in &mut blocks {
            b.z = b.z.clone().remove_columns_at(&redundant);
        }
    }
    let n_inst = n_inst - redundant.len();
    let n_regions = groups.len();
    if n_inst >= n_regions {
        return Err(Error::InstrumentProliferation {
            instruments: n_inst,
            regions: n_regions,
        });
    }

    // identification: the stacked regressors must have full column rank
    let mut stacked = DMatrix::zeros(total, p);
    let mut at = 0;
    for b in &blocks {
        stacked.view_mut((at, 0), (b.y.len(), p)).copy_from(&b.x);
        at += b.y.len();
    }
    let norms: Vec<f64> = stacked.column_iter().map(|c| c.norm()).collect();
    let dep = dependent_columns(&stacked, &norms);
    if !dep.is_empty() {
        return Err(Error::RankDeficient(
            dep.into_iter().map(|j| params[j].clone()).collect(),
        ));
    }

    let mut zx = DMatrix::zeros(n_inst, p);
    let mut zy = DVector::zeros(n_inst);
    let mut zhz = DMatrix::zeros(n_inst, n_inst);
    for b in &blocks {
        let zt = b.z.transpose();
        zx += &zt * &b.x;
        zy += &zt * &b.y;
        zhz += &zt * &b.h * &b.z;
    }
    let w_one = spd_inverse(&zhz)
        .ok_or_else(|| Error::SingularWeighting("one-step instrument cross-product is singular".into()))?;
    let (beta_one, a_inv_one) = solve(&zx, &zy, &w_one, &params)?;

    let mut omega = DMatrix::zeros(n_inst, n_inst);
    let mut ssr_diff = 0.0;
    let mut n_diff = 0usize;
    for b in &blocks {
        let u = &b.y - &b.x * &beta_one;
        let zu = b.z.transpose() * &u;
        omega += &zu * zu.transpose();
        ssr_diff += u.rows(0, b.n_diff()).norm_squared();
        n_diff += b.n_diff();
    }
    let sigma2 = ssr_diff / (2.0 * n_diff as f64);
    let w_two = spd_inverse(&omega);
    if opts.two_step && w_two.is_none() {
        return Err(Error::SingularWeighting(
            "two-step weighting matrix from one-step residuals is singular".into(),
        ));
    }
    let (beta_two, a_inv_two) = match &w_two {
        Some(w) => {
            let (b, a) = solve(&zx, &zy, w, &params)?;
            (Some(b), Some(a))
        }
        None => (None, None),
    };

    Ok(GmmFit {
        params,
        n_reported,
        two_step: opts.two_step,
        n_obs: table.rows.len(),
        n_regions,
        n_instruments: n_inst,
        beta_one_step: beta_one,
        beta_two_step: beta_two,
        dropped_instruments,
        step: s,
        blocks,
        zx,
        w_one,
        w_two,
        a_inv_one,
        a_inv_two,
        sigma2,
    })
}

/// Hansen's J at the two-step estimate with the efficient weighting
/// matrix built from one-step residuals; chi-square with
/// `instruments − parameters` degrees of freedom.
pub fn sargan_test(fit: &GmmFit) -> Result<ChiSquareTest> {
    let p = fit.params.len();
    if fit.n_instruments <= p {
        return Err(Error::NotOveridentified {
            instruments: fit.n_instruments,
            parameters: p,
        });
    }
    let (Some(beta), Some(w)) = (&fit.beta_two_step, &fit.w_two) else {
        return Err(Error::SingularWeighting(
            "efficient weighting matrix unavailable".into(),
        ));
    };
    let mut g = DVector::zeros(fit.n_instruments);
    for (b, u) in fit.blocks.iter().zip(fit.residuals(beta)) {
        g += b.z.transpose() * u;
    }
    let statistic = (g.transpose() * w * &g)[(0, 0)].max(0.0);
    let dof = fit.n_instruments - p;
    Ok(ChiSquareTest {
        statistic,
        dof,
        p_value: chi2_upper(statistic, dof),
    })
}

/// Arellano–Bond test for order-`m` autocorrelation of the differenced
/// residuals, with the variance accounting for estimation error in `β`.
pub fn arellano_bond_test(fit: &GmmFit, m: usize) -> Result<ZTest> {
    if m == 0 {
        return Err(Error::invalid("autocorrelation order must be ≥ 1"));
    }
    let beta = fit.beta();
    let (w, a_inv) = fit.weighting();
    let gap = m as i32 * fit.step;
    let p = fit.params.len();

    let mut parts = Vec::with_capacity(fit.blocks.len());
    let mut d = DVector::zeros(p);
    let mut stat = 0.0;
    let mut pairs = 0usize;
    for b in &fit.blocks {
        let u = &b.y - &b.x * beta;
        let nd = b.n_diff();
        let e = u.rows(0, nd);
        let lagged = DVector::from_fn(nd, |i, _| {
            let t = b.diff_years[i] - gap;
            b.diff_years.iter().position(|&y| y == t).map_or(0.0, |j| e[j])
        });
        pairs += b
            .diff_years
            .iter()
            .filter(|&&t| b.diff_years.contains(&(t - gap)))
            .count();
        let we = lagged.dot(&e);
        stat += we;
        d += b.x.rows(0, nd).transpose() * &lagged;
        parts.push((we, b.z.transpose() * u));
    }
    if pairs == 0 {
        return Err(Error::InsufficientPeriods(format!(
            "no differenced residuals {m} lag steps apart for the order-{m} test"
        )));
    }
    let c = w * &fit.zx * (a_inv * d);
    let var: f64 = parts.iter().map(|(we, zu)| (we - c.dot(zu)).powi(2)).sum();
    if !(var > 0.0) {
        return Err(Error::Degenerate(format!("order-{m} test has zero variance")));
    }
    let z = stat / var.sqrt();
    Ok(ZTest {
        z,
        p_value: normal_two_sided(z),
    })
}

/// System GMM with its diagnostics. Tests that cannot be computed are left
/// empty and explained in `notes`.
pub fn system_gmm(table: &RegressionTable, opts: &GmmOptions) -> Result<PanelModelResult> {
    let fit = system_gmm_fit(table, opts)?;
    let cov = fit.covariance();
    let beta = fit.beta();
    let coef = |j: usize| Coefficient {
        term: fit.params[j].clone(),
        estimate: beta[j],
        std_error: cov[(j, j)].max(0.0).sqrt(),
    };
    let mut notes = Vec::new();
    if opts.two_step {
        notes.push("two-step standard errors without finite-sample correction".to_string());
    }
    notes.push(format!(
        "{} instruments{}",
        fit.n_instruments,
        if opts.collapse { " (collapsed)" } else { "" }
    ));
    if !fit.dropped_instruments.is_empty() {
        notes.push(format!(
            "dropped collinear instruments: {}",
            fit.dropped_instruments.join(", ")
        ));
    }
    let sargan = match sargan_test(&fit) {
        Ok(t) => Some(t),
        Err(e) => {
            notes.push(format!("overidentification test unavailable: {e}"));
            None
        }
    };
    let mut ar = |m| match arellano_bond_test(&fit, m) {
        Ok(t) => Some(t),
        Err(e) => {
            notes.push(format!("AR({m}) test unavailable: {e}"));
            None
        }
    };
    let ar1 = ar(1);
    let ar2 = ar(2);
    Ok(PanelModelResult {
        estimator: if opts.two_step {
            Estimator::GmmTwoStep
        } else {
            Estimator::GmmOneStep
        },
        coefficients: (0..fit.n_reported).map(coef).collect(),
        nuisance: (fit.n_reported..fit.params.len()).map(coef).collect(),
        n_obs: fit.n_obs,
        n_regions: fit.n_regions,
        n_instruments: Some(fit.n_instruments),
        sargan,
        ar1,
        ar2,
        notes,
    })
}
