use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::linalg::{dependent_columns, ols};
use super::RegressionTable;
use crate::error::{Error, Result};

/// Variance inflation factor; `flagged` marks exact collinearity, where the
/// value is infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vif {
    pub value: f64,
    pub flagged: bool,
}

/// `VIF_k = 1 / (1 − R²_k)` from regressing column `k` on the other named
/// columns and an intercept.
pub fn vif(table: &RegressionTable, regressors: &[&str]) -> Result<BTreeMap<String, Vif>> {
    if regressors.len() < 2 {
        return Err(Error::invalid("VIF needs at least two regressors"));
    }
    let cols: Vec<Vec<f64>> = regressors
        .iter()
        .map(|&name| {
            table
                .column(name)
                .ok_or_else(|| Error::Missing(format!("column {name} not in table")))
        })
        .collect::<Result<_>>()?;
    vif_columns(regressors, &cols)
}

pub(crate) fn vif_columns(names: &[&str], cols: &[Vec<f64>]) -> Result<BTreeMap<String, Vif>> {
    let n = cols[0].len();
    let mut out = BTreeMap::new();
    for (k, name) in names.iter().enumerate() {
        let y = DVector::from_column_slice(&cols[k]);
        let others: Vec<&Vec<f64>> = cols
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != k)
            .map(|(_, c)| c)
            .collect();
        let x = DMatrix::from_fn(n, others.len() + 1, |i, j| if j == 0 { 1.0 } else { others[j - 1][i] });
        let ybar = y.mean();
        let sst: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum();
        let scale = y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let constant = sst <= (1e-12 * scale).powi(2) * n as f64;
        // drop redundant columns among the others: R² is unaffected
        let norms: Vec<f64> = x.column_iter().map(|c| c.norm()).collect();
        let redundant = dependent_columns(&x, &norms);
        let keep: Vec<usize> = (0..x.ncols()).filter(|j| !redundant.contains(j)).collect();
        let x = x.select_columns(&keep);
        let r2 = if constant {
            1.0
        } else {
            let (beta, _) = ols(&x, &y).ok_or_else(|| Error::RankDeficient(vec![name.to_string()]))?;
            let ssr = (&y - &x * beta).norm_squared();
            1.0 - ssr / sst
        };
        let v = if 1.0 - r2 <= 1e-12 {
            Vif {
                value: f64::INFINITY,
                flagged: true,
            }
        } else {
            Vif {
                value: 1.0 / (1.0 - r2),
                flagged: false,
            }
        };
        out.insert(name.to_string(), v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::rng_for;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn orthogonal_columns_give_one() {
        let a = vec![1.0, -1.0, 1.0, -1.0];
        let b = vec![1.0, 1.0, -1.0, -1.0];
        let c = vec![1.0, -1.0, -1.0, 1.0];
        let v = vif_columns(&["a", "b", "c"], &[a, b, c]).unwrap();
        for x in v.values() {
            assert!((x.value - 1.0).abs() < 1e-12 && !x.flagged);
        }
    }

    #[test]
    fn near_duplicate_matches_known_r2() {
        // x2 = x1 + δ·e with x1, e independent unit normals: R² = 1/(1+δ²)
        let mut rng = rng_for(5, 0);
        let n = 20_000;
        let delta: f64 = 0.05;
        let x1: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let x2: Vec<f64> = x1
            .iter()
            .map(|v| {
                v + {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    delta * e
                }
            })
            .collect();
        let v = vif_columns(&["x1", "x2"], &[x1, x2]).unwrap();
        let expected = 1.0 + 1.0 / delta.powi(2);
        assert!(v["x1"].value > 10.0);
        assert!((v["x2"].value / expected - 1.0).abs() < 0.05, "{:?}", v["x2"]);
    }

    #[test]
    fn exact_collinearity_is_flagged() {
        let a = vec![1.0, 2.0, 3.0, 5.0];
        let b = vec![0.5, 1.0, 4.0, 2.0];
        let c: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 2.0 * x - y).collect();
        let v = vif_columns(&["a", "b", "c"], &[a, b, c]).unwrap();
        assert!(v.values().all(|x| x.flagged && x.value.is_infinite()));
    }

    #[test]
    fn single_regressor_rejected() {
        let t = crate::econometrics::build_panel(
            &[&{
                let mut s = crate::data::IndicatorSeries::new("y", "");
                for t in 2000..2004 {
                    s.insert("r", t, t as f64).unwrap();
                }
                s
            }],
            &crate::econometrics::PanelSpec::new(crate::econometrics::Dependent::Level { series: "y".into() }, &[]),
        )
        .unwrap();
        assert!(vif(&t, &["y_lag"]).is_err());
    }
}
