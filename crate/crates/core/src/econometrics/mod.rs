//! Growth panels and their estimators: two-way fixed effects with
//! region-clustered errors, system GMM for dynamic panels, and the usual
//! diagnostics (Hansen/Sargan overidentification, Arellano–Bond serial
//! correlation, variance inflation factors).

mod fe;
mod gmm;
mod linalg;
mod panel;
mod vif;

pub use fe::within_fe;
pub use gmm::{arellano_bond_test, sargan_test, system_gmm, system_gmm_fit, GmmFit, GmmOptions};
pub use panel::{
    build_panel, build_panel_unchecked, growth_rate, Deletion, Dependent, LagMode, PanelRow, PanelSpec, RegressionTable,
};
pub use vif::{vif, Vif};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    WithinFe,
    GmmOneStep,
    GmmTwoStep,
}

impl std::fmt::Display for Estimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Estimator::WithinFe => "within-fe",
            Estimator::GmmOneStep => "system-gmm-one-step",
            Estimator::GmmTwoStep => "system-gmm-two-step",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Coefficient {
    pub term: String,
    pub estimate: f64,
    pub std_error: f64,
}

impl Coefficient {
    /// Two-sided normal p-value of `estimate / std_error`.
    pub fn p_value(&self) -> f64 {
        normal_two_sided(self.estimate / self.std_error)
    }
}

/// Chi-square test result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Normal z test result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZTest {
    pub z: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelModelResult {
    pub estimator: Estimator,
    /// Lagged dependent first, then regressors in table order.
    pub coefficients: Vec<Coefficient>,
    /// Intercept and year effects.
    pub nuisance: Vec<Coefficient>,
    pub n_obs: usize,
    pub n_regions: usize,
    pub n_instruments: Option<usize>,
    pub sargan: Option<ChiSquareTest>,
    pub ar1: Option<ZTest>,
    pub ar2: Option<ZTest>,
    pub notes: Vec<String>,
}

impl PanelModelResult {
    pub fn coefficient(&self, term: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.term == term)
    }
}

pub(crate) fn normal_two_sided(z: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    let n = Normal::standard();
    (2.0 * n.cdf(-z.abs())).clamp(0.0, 1.0)
}

pub(crate) fn chi2_upper(stat: f64, dof: usize) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    let d = ChiSquared::new(dof as f64).expect("dof > 0");
    d.sf(stat.max(0.0)).clamp(0.0, 1.0)
}

/// Significance stars at the 0.1 / 0.05 / 0.01 levels.
pub fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.1 {
        "*"
    } else {
        ""
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn star_thresholds() {
        assert_eq!(stars(0.2), "");
        assert_eq!(stars(0.09), "*");
        assert_eq!(stars(0.04), "**");
        assert_eq!(stars(0.001), "***");
    }

    #[test]
    fn reference_quantiles() {
        assert!((normal_two_sided(1.959963984540054) - 0.05).abs() < 1e-9);
        assert!((chi2_upper(3.841458820694124, 1) - 0.05).abs() < 1e-10);
        assert_eq!(chi2_upper(0.0, 3), 1.0);
    }
}
