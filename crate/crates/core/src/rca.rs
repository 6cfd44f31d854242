//! Revealed comparative advantage and binarization into the specialization matrix.

use std::collections::BTreeMap;

use crate::data::{ActivityPanel, SpecializationMatrix};
use crate::error::{Error, Result};
use crate::par::Exec;

/// Expected activity share of a typical region.
#[derive(Debug, Clone, PartialEq)]
pub enum Baseline {
    /// The activity's share of total intensity across all regions in the panel.
    Internal,
    /// Externally supplied shares keyed by `(activity, year)`, each in (0, 1].
    External(BTreeMap<(String, i32), f64>),
}

/// Region × activity RCA values for one year. Rows of regions with zero
/// total intensity are undefined (`None`).
#[derive(Debug, Clone, PartialEq)]
pub struct RcaMatrix {
    pub regions: Vec<String>,
    pub activities: Vec<String>,
    pub year: i32,
    pub rows: Vec<Option<Vec<f64>>>,
    /// Σ_j X_{r,j} per region.
    pub region_totals: Vec<f64>,
}

impl RcaMatrix {
    pub fn get(&self, region: usize, activity: usize) -> Option<f64> {
        self.rows[region].as_ref().map(|row| row[activity])
    }
}

/// `RCA_{r,i} = (X_{r,i} / Σ_j X_{r,j}) / Z_i`.
pub fn rca(panel: &ActivityPanel, baseline: &Baseline, year: i32, exec: Exec) -> Result<RcaMatrix> {
    let dense = panel
        .dense_year(year)
        .ok_or_else(|| Error::Missing(format!("year {year} not present in panel")))?;
    let n_r = panel.regions().len();
    let n_a = panel.activities().len();

    let region_totals: Vec<f64> = (0..n_r).map(|r| dense[r * n_a..(r + 1) * n_a].iter().sum()).collect();
    let mut activity_totals = vec![0.0; n_a];
    for r in 0..n_r {
        for (i, t) in activity_totals.iter_mut().enumerate() {
            *t += dense[r * n_a + i];
        }
    }
    let grand: f64 = region_totals.iter().sum();

    // z[i] = None marks an activity with no intensity anywhere and no baseline;
    // its RCA is 0 for every region.
    let z: Vec<Option<f64>> = match baseline {
        Baseline::Internal => {
            if !(grand > 0.0) {
                return Err(Error::invalid(format!("zero total intensity in year {year}")));
            }
            activity_totals.iter().map(|&t| (t > 0.0).then(|| t / grand)).collect()
        }
        Baseline::External(shares) => {
            if !(grand > 0.0) {
                return Err(Error::invalid(format!("zero total intensity in year {year}")));
            }
            let mut missing = Vec::new();
            let z = panel
                .activities()
                .iter()
                .zip(&activity_totals)
                .map(|(a, &t)| match shares.get(&(a.clone(), year)) {
                    Some(&s) => Some(s),
                    None => {
                        if t > 0.0 {
                            missing.push(a.clone());
                        }
                        None
                    }
                })
                .collect();
            if !missing.is_empty() {
                return Err(Error::Missing(format!(
                    "external share for year {year}, activities: {}",
                    missing.join(", ")
                )));
            }
            z
        }
    };

    let rows = exec.map_range(n_r, |r| {
        let total = region_totals[r];
        if !(total > 0.0) {
            return None;
        }
        let x = &dense[r * n_a..(r + 1) * n_a];
        Some(
            x.iter()
                .zip(&z)
                .map(|(&v, zi)| match zi {
                    Some(zi) => (v / total) / zi,
                    None => 0.0,
                })
                .collect(),
        )
    });

    Ok(RcaMatrix {
        regions: panel.regions().to_vec(),
        activities: panel.activities().to_vec(),
        year,
        rows,
        region_totals,
    })
}

/// `M_{r,i} = 1` iff `RCA_{r,i} > threshold` (strict). Undefined rows become
/// all-zero rows flagged as no-data.
pub fn binarize(rca: &RcaMatrix, threshold: f64) -> SpecializationMatrix {
    let n_a = rca.activities.len();
    let mut entries = Vec::with_capacity(rca.regions.len() * n_a);
    let mut no_data = Vec::with_capacity(rca.regions.len());
    for row in &rca.rows {
        match row {
            Some(row) => {
                entries.extend(row.iter().map(|&v| v > threshold));
                no_data.push(false);
            }
            None => {
                entries.extend(std::iter::repeat_n(false, n_a));
                no_data.push(true);
            }
        }
    }
    SpecializationMatrix::from_entries(
        rca.regions.clone(),
        rca.activities.clone(),
        rca.year,
        entries,
        no_data,
        Some(rca.region_totals.clone()),
    )
    .expect("panel identifiers are unique")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::PanelBuilder;
    use proptest::prelude::*;

    fn panel(rows: &[&[f64]], year: i32) -> ActivityPanel {
        let mut b = PanelBuilder::new();
        for (r, row) in rows.iter().enumerate() {
            for (a, &v) in row.iter().enumerate() {
                b.add(&format!("r{r}"), &format!("a{a}"), year, v).unwrap();
            }
        }
        b.build()
    }

    /// Scalar recomputation of the RCA formula, independent of the dense path.
    fn rca_scalar(x: &[&[f64]], r: usize, i: usize) -> f64 {
        let row_total: f64 = x[r].iter().sum();
        let col: f64 = x.iter().map(|row| row[i]).sum();
        let grand: f64 = x.iter().flat_map(|row| row.iter()).sum();
        (x[r][i] / row_total) / (col / grand)
    }

    #[test]
    fn two_by_two_internal() {
        let x: [&[f64]; 2] = [&[10.0, 0.0], &[10.0, 10.0]];
        let m = rca(&panel(&x, 2000), &Baseline::Internal, 2000, Exec::Sequential).unwrap();
        let expected = [[1.5, 0.0], [0.75, 1.5]];
        for r in 0..2 {
            for i in 0..2 {
                let v = m.get(r, i).unwrap();
                assert!((v - expected[r][i]).abs() < 1e-12);
                assert!((v - rca_scalar(&x, r, i)).abs() < 1e-12);
            }
        }
        let spec = binarize(&m, 1.0);
        assert_eq!(spec.row(0), [true, false]);
        assert_eq!(spec.row(1), [false, true]);
    }

    #[test]
    fn threshold_is_strict() {
        let m = RcaMatrix {
            regions: vec!["r".into()],
            activities: vec!["a".into(), "b".into()],
            year: 0,
            rows: vec![Some(vec![1.0, 1.0 + 1e-12])],
            region_totals: vec![1.0],
        };
        assert_eq!(binarize(&m, 1.0).row(0), [false, true]);
    }

    #[test]
    fn baseline_matching_region_is_all_ones() {
        // region r2 has exactly the national mix
        let x: [&[f64]; 3] = [&[1.0, 5.0, 4.0], &[9.0, 1.0, 0.0], &[2.5, 1.5, 1.0]];
        let m = rca(&panel(&x, 2000), &Baseline::Internal, 2000, Exec::Sequential).unwrap();
        for i in 0..3 {
            assert!((m.get(2, i).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_region_is_undefined_and_flagged() {
        let mut b = PanelBuilder::new();
        b.add("r0", "a", 2000, 3.0).unwrap();
        b.add("r0", "b", 2000, 1.0).unwrap();
        b.add("r1", "a", 2000, 0.0).unwrap();
        let m = rca(&b.build(), &Baseline::Internal, 2000, Exec::Sequential).unwrap();
        assert!(m.rows[1].is_none());
        let s = binarize(&m, 1.0);
        assert!(s.no_data(1));
        assert_eq!(s.diversity()[1], 0);
    }

    #[test]
    fn zero_grand_total_errors() {
        let mut b = PanelBuilder::new();
        b.add("r0", "a", 2000, 0.0).unwrap();
        assert!(rca(&b.build(), &Baseline::Internal, 2000, Exec::Sequential).is_err());
    }

    #[test]
    fn missing_year_errors() {
        let x: [&[f64]; 1] = [&[1.0]];
        assert!(rca(&panel(&x, 2000), &Baseline::Internal, 2001, Exec::Sequential).is_err());
    }

    #[test]
    fn external_baseline() {
        let x: [&[f64]; 2] = [&[10.0, 0.0], &[10.0, 10.0]];
        let p = panel(&x, 2000);
        let shares: BTreeMap<(String, i32), f64> = [(("a0".into(), 2000), 0.5), (("a1".into(), 2000), 0.25)].into();
        let m = rca(&p, &Baseline::External(shares.clone()), 2000, Exec::Sequential).unwrap();
        assert!((m.get(0, 0).unwrap() - 2.0).abs() < 1e-12);
        assert!((m.get(1, 1).unwrap() - 2.0).abs() < 1e-12);

        let mut partial = shares;
        partial.remove(&("a1".into(), 2000));
        let err = rca(&p, &Baseline::External(partial), 2000, Exec::Sequential).unwrap_err();
        assert!(err.to_string().contains("a1"));
    }

    fn arb_matrix() -> impl Strategy<Value = Vec<Vec<f64>>> {
        (2usize..6, 2usize..6).prop_flat_map(|(nr, na)| {
            prop::collection::vec(
                prop::collection::vec(prop_oneof![1 => Just(0.0), 3 => 0.01f64..1e6], na),
                nr,
            )
        })
    }

    proptest! {
        #[test]
        fn weighted_mean_is_one(x in arb_matrix()) {
            let refs: Vec<&[f64]> = x.iter().map(Vec::as_slice).collect();
            let p = panel(&refs, 2000);
            let grand: f64 = x.iter().flatten().sum();
            prop_assume!(grand > 0.0);
            let m = rca(&p, &Baseline::Internal, 2000, Exec::Sequential).unwrap();
            for i in 0..x[0].len() {
                let col: f64 = x.iter().map(|r| r[i]).sum();
                if col == 0.0 { continue; }
                let mut acc = 0.0;
                for (r, row) in x.iter().enumerate() {
                    let share = row.iter().sum::<f64>() / grand;
                    if let Some(v) = m.get(r, i) {
                        prop_assert!(v >= 0.0);
                        acc += share * v;
                    }
                }
                prop_assert!((acc - 1.0).abs() < 1e-9, "activity {} mean {}", i, acc);
            }
        }

        #[test]
        fn region_scaling_leaves_row_unchanged(x in arb_matrix(), k in 0.001f64..1000.0) {
            // the internal baseline moves with the scaled region, so the
            // invariance is a statement about a fixed baseline
            prop_assume!(x.iter().flatten().sum::<f64>() > 0.0);
            let shares: BTreeMap<(String, i32), f64> = (0..x[0].len())
                .map(|i| ((format!("a{i}"), 2000), 0.5))
                .collect();
            let refs: Vec<&[f64]> = x.iter().map(Vec::as_slice).collect();
            let before = rca(&panel(&refs, 2000), &Baseline::External(shares.clone()), 2000, Exec::Sequential).unwrap();
            let mut scaled = x.clone();
            for v in scaled[0].iter_mut() { *v *= k; }
            let refs: Vec<&[f64]> = scaled.iter().map(Vec::as_slice).collect();
            let after = rca(&panel(&refs, 2000), &Baseline::External(shares), 2000, Exec::Sequential).unwrap();
            for i in 0..x[0].len() {
                match (before.get(0, i), after.get(0, i)) {
                    (Some(a), Some(b)) => prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0)),
                    (a, b) => prop_assert_eq!(a.is_none(), b.is_none()),
                }
            }
        }
    }
}
