use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::linalg::{dependent_columns, ols};
use super::{Coefficient, Estimator, PanelModelResult, RegressionTable};
use crate::error::{Error, Result};

/// Two-way fixed effects: region effects by demeaning, year effects as
/// explicit dummies demeaned with everything else (exact on unbalanced
/// panels). OLS with standard errors clustered by region.
///
/// Regions with a single observation carry no within variation and are
/// left out.
pub fn within_fe(table: &RegressionTable) -> Result<PanelModelResult> {
    let mut count: BTreeMap<usize, usize> = BTreeMap::new();
    for r in &table.rows {
        *count.entry(r.region).or_default() += 1;
    }
    let rows: Vec<_> = table.rows.iter().filter(|r| count[&r.region] >= 2).collect();
    if rows.is_empty() {
        return Err(Error::EmptyPanel("no region has two or more observations".into()));
    }
    let singletons = count.values().filter(|&&c| c < 2).count();

    let years: Vec<i32> = {
        let mut y: Vec<i32> = rows.iter().map(|r| r.year).collect();
        y.sort_unstable();
        y.dedup();
        y
    };
    let dummy_years: &[i32] = if table.year_effects { &years[1..] } else { &[] };
    let mut names: Vec<String> = dummy_years.iter().map(|y| format!("year_{y}")).collect();
    let n_dummies = names.len();
    names.extend(table.lag_term.iter().cloned());
    names.extend(table.regressors.iter().cloned());

    let n = rows.len();
    let k = names.len();
    let mut x = DMatrix::zeros(n, k);
    let mut y = DVector::zeros(n);
    for (i, r) in rows.iter().enumerate() {
        if let Some(d) = dummy_years.iter().position(|&t| t == r.year) {
            x[(i, d)] = 1.0;
        }
        let mut c = n_dummies;
        if let Some(l) = r.y_lag {
            x[(i, c)] = l;
            c += 1;
        }
        for v in &r.x {
            x[(i, c)] = *v;
            c += 1;
        }
        y[i] = r.y;
    }
    let reference: Vec<f64> = x.column_iter().map(|c| c.norm()).collect();

    // region demeaning; rows are sorted by region
    let mut start = 0;
    while start < n {
        let mut end = start;
        while end < n && rows[end].region == rows[start].region {
            end += 1;
        }
        let len = (end - start) as f64;
        for j in 0..k {
            let m = x.view((start, j), (end - start, 1)).sum() / len;
            x.view_mut((start, j), (end - start, 1)).add_scalar_mut(-m);
        }
        let m = y.rows(start, end - start).sum() / len;
        y.rows_mut(start, end - start).add_scalar_mut(-m);
        start = end;
    }

    if k == 0 {
        return Err(Error::invalid("no regressors"));
    }
    let dependent = dependent_columns(&x, &reference);
    if !dependent.is_empty() {
        return Err(Error::RankDeficient(
            dependent.into_iter().map(|j| names[j].clone()).collect(),
        ));
    }
    let (beta, xtx_inv) = ols(&x, &y).ok_or_else(|| Error::RankDeficient(names.clone()))?;
    let resid = &y - &x * &beta;

    // cluster-robust sandwich with the usual small-sample factor
    let mut meat = DMatrix::zeros(k, k);
    let mut g = 0usize;
    let mut start = 0;
    while start < n {
        let mut end = start;
        while end < n && rows[end].region == rows[start].region {
            end += 1;
        }
        let xg = x.rows(start, end - start);
        let s = xg.transpose() * resid.rows(start, end - start);
        meat += &s * s.transpose();
        g += 1;
        start = end;
    }
    let factor = if g > 1 && n > k {
        (g as f64 / (g as f64 - 1.0)) * ((n as f64 - 1.0) / (n as f64 - k as f64))
    } else {
        1.0
    };
    let cov = &xtx_inv * meat * &xtx_inv * factor;

    let coef = |j: usize| Coefficient {
        term: names[j].clone(),
        estimate: beta[j],
        std_error: cov[(j, j)].max(0.0).sqrt(),
    };
    let mut notes = vec!["standard errors clustered by region".to_string()];
    if singletons > 0 {
        notes.push(format!("{singletons} single-observation regions left out"));
    }
    Ok(PanelModelResult {
        estimator: Estimator::WithinFe,
        coefficients: (n_dummies..k).map(coef).collect(),
        nuisance: (0..n_dummies).map(coef).collect(),
        n_obs: n,
        n_regions: g,
        n_instruments: None,
        sargan: None,
        ar1: None,
        ar2: None,
        notes,
    })
}
