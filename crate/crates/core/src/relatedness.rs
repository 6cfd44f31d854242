//! Activity proximity, regional density around activities, and closeness of
//! each region to complex activities it has not yet specialized in.

use std::collections::BTreeMap;

use crate::data::SpecializationMatrix;
use crate::par::Exec;
use crate::stats::pearson;

/// Symmetric activity × activity proximity `φ` for one year.
#[derive(Debug, Clone, PartialEq)]
pub struct ProximityMatrix {
    pub activities: Vec<String>,
    pub year: i32,
    phi: Vec<f64>,
}

impl ProximityMatrix {
    pub fn n(&self) -> usize {
        self.activities.len()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.phi[i * self.activities.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.activities.len();
        &self.phi[i * n..(i + 1) * n]
    }
}

/// `φ_ij = C_ij / max(u_i, u_j)`: the smaller of the two conditional
/// co-specialization probabilities. Zero when either ubiquity is zero.
pub fn proximity(m: &SpecializationMatrix, exec: Exec) -> ProximityMatrix {
    let n_a = m.n_activities();
    let ubi = m.ubiquity();
    // region lists per activity for the co-occurrence counts
    let cols: Vec<Vec<usize>> = (0..n_a)
        .map(|i| (0..m.n_regions()).filter(|&r| m.get(r, i)).collect())
        .collect();
    let rows = exec.map_range(n_a, |i| {
        (0..n_a)
            .map(|j| {
                if ubi[i] == 0 || ubi[j] == 0 {
                    return 0.0;
                }
                if i == j {
                    return 1.0;
                }
                let c = intersect_count(&cols[i], &cols[j]);
                c as f64 / ubi[i].max(ubi[j]) as f64
            })
            .collect::<Vec<f64>>()
    });
    ProximityMatrix {
        activities: m.activities().to_vec(),
        year: m.year(),
        phi: rows.concat(),
    }
}

fn intersect_count(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut c) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                c += 1;
                i += 1;
                j += 1;
            }
        }
    }
    c
}

/// Region × activity density `ω`; `None` where `Σ_i' φ_ii' = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub regions: Vec<String>,
    pub activities: Vec<String>,
    pub year: i32,
    omega: Vec<Option<f64>>,
}

impl DensityMatrix {
    #[inline]
    pub fn get(&self, region: usize, activity: usize) -> Option<f64> {
        self.omega[region * self.activities.len() + activity]
    }

    pub fn row(&self, region: usize) -> &[Option<f64>] {
        let n = self.activities.len();
        &self.omega[region * n..(region + 1) * n]
    }
}

/// `ω_{r,i} = Σ_i' M_{r,i'} φ_{i,i'} / Σ_i' φ_{i,i'}`.
pub fn density(m: &SpecializationMatrix, phi: &ProximityMatrix, exec: Exec) -> DensityMatrix {
    assert_eq!(
        m.activities(),
        phi.activities.as_slice(),
        "proximity from another activity set"
    );
    let n_a = m.n_activities();
    let denom: Vec<f64> = (0..n_a).map(|i| phi.row(i).iter().sum()).collect();
    let rows = exec.map_range(m.n_regions(), |r| {
        let row = m.row(r);
        (0..n_a)
            .map(|i| {
                if denom[i] == 0.0 {
                    return None;
                }
                let num: f64 = phi.row(i).iter().zip(row).filter(|(_, &x)| x).map(|(p, _)| p).sum();
                Some(num / denom[i])
            })
            .collect::<Vec<_>>()
    });
    DensityMatrix {
        regions: m.regions().to_vec(),
        activities: m.activities().to_vec(),
        year: m.year(),
        omega: rows.concat(),
    }
}

/// Minimum number of candidate activities for a closeness value.
pub const MIN_CANDIDATES: usize = 3;

/// Per-region Pearson correlation between density and complexity over the
/// activities the region is not specialized in (`M_{r,i} = 0`).
///
/// Activities with undefined density or without a complexity value are not
/// candidates. Regions with fewer than [`MIN_CANDIDATES`] candidates, or
/// zero variance in either vector, get `None`.
pub fn closeness_to_complexity(
    m: &SpecializationMatrix,
    omega: &DensityMatrix,
    activity_complexity: &BTreeMap<String, f64>,
    exec: Exec,
) -> Vec<Option<f64>> {
    let complexity: Vec<Option<f64>> = m
        .activities()
        .iter()
        .map(|a| activity_complexity.get(a).copied())
        .collect();
    exec.map_range(m.n_regions(), |r| {
        let mut w = Vec::new();
        let mut c = Vec::new();
        for (i, &specialized) in m.row(r).iter().enumerate() {
            if specialized {
                continue;
            }
            if let (Some(o), Some(ci)) = (omega.get(r, i), complexity[i]) {
                w.push(o);
                c.push(ci);
            }
        }
        if w.len() < MIN_CANDIDATES {
            return None;
        }
        pearson(&w, &c)
    })
}
