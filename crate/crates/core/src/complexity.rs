//! Complexity indices of regions and activities.
//!
//! Three routes are provided:
//!
//! * [`eci_from_external`]: region scores as the average of externally
//!   supplied activity complexities (PCI) over the region's specializations.
//! * [`eigen_complexity`]: region scores `K` from the eigenvector of the
//!   region–region operator `M̂ = D_r⁻¹ M D_a⁻¹ Mᵀ` belonging to its second
//!   largest eigenvalue, activity scores `Q` as averages of `K`.
//! * [`reflections`]: the alternating-averaging iteration whose even steps
//!   converge to the same `K`; kept as an independent cross-check.
//!
//! `M̂` is similar to the symmetric positive semidefinite matrix
//! `S = D_r^{-1/2} M D_a⁻¹ Mᵀ D_r^{-1/2}` (`M̂ = D_r^{-1/2} S D_r^{1/2}`), so its
//! spectrum is real and nonnegative and eigenvectors are recovered as
//! `K = D_r^{-1/2} v` from those of `S`.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::data::SpecializationMatrix;
use crate::error::{Error, Result};
use crate::stats::{pearson, standardize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum DropReason {
    /// RCA row undefined (no intensity at all in that year).
    NoData,
    /// Diversity zero.
    NoSpecializations,
    /// Ubiquity zero.
    NoSpecializedRegions,
    /// Outside the largest connected component of the bipartite network.
    Disconnected,
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DropReason::NoData => "no data",
            DropReason::NoSpecializations => "no specializations",
            DropReason::NoSpecializedRegions => "no specialized regions",
            DropReason::Disconnected => "disconnected",
        })
    }
}

/// Scores for one year. Standardized scores have mean 0 and population
/// standard deviation 1 over the included entities.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityResult {
    pub year: i32,
    pub regions: Vec<String>,
    pub region_scores: Vec<f64>,
    pub raw_region: Vec<f64>,
    /// Empty for [`eci_from_external`].
    pub activities: Vec<String>,
    pub activity_scores: Option<Vec<f64>>,
    pub raw_activity: Option<Vec<f64>>,
    pub dropped_regions: Vec<(String, DropReason)>,
    pub dropped_activities: Vec<(String, DropReason)>,
    /// Eigenvalues of `M̂` in descending order (all of them on the dense path,
    /// the leading three on the power-iteration path).
    pub eigenvalues: Option<Vec<f64>>,
}

impl ComplexityResult {
    pub fn region_score(&self, region: &str) -> Option<f64> {
        self.regions
            .iter()
            .position(|r| r == region)
            .map(|k| self.region_scores[k])
    }

    pub fn activity_score(&self, activity: &str) -> Option<f64> {
        let k = self.activities.iter().position(|a| a == activity)?;
        self.activity_scores.as_ref().map(|s| s[k])
    }
}

/// `ECI_r = (1/M_{r,*}) Σ_i M_{r,i} PCI_i`, standardized over scored regions.
pub fn eci_from_external(m: &SpecializationMatrix, pci: &BTreeMap<String, f64>) -> Result<ComplexityResult> {
    let mut regions = Vec::new();
    let mut raw = Vec::new();
    let mut dropped = Vec::new();
    let mut missing = std::collections::BTreeSet::new();
    for r in 0..m.n_regions() {
        if m.no_data(r) {
            dropped.push((m.regions()[r].clone(), DropReason::NoData));
            continue;
        }
        if m.diversity()[r] == 0 {
            dropped.push((m.regions()[r].clone(), DropReason::NoSpecializations));
            continue;
        }
        let mut acc = 0.0;
        for (i, _) in m.row(r).iter().enumerate().filter(|(_, &x)| x) {
            match pci.get(&m.activities()[i]) {
                Some(v) => acc += v,
                None => {
                    missing.insert(m.activities()[i].clone());
                }
            }
        }
        regions.push(m.regions()[r].clone());
        raw.push(acc / m.diversity()[r] as f64);
    }
    if !missing.is_empty() {
        return Err(Error::Missing(format!(
            "PCI for year {}, activities: {}",
            m.year(),
            missing.into_iter().collect::<Vec<_>>().join(", ")
        )));
    }
    if regions.len() < 2 {
        return Err(Error::Degenerate(format!(
            "{} scored region(s) in year {}",
            regions.len(),
            m.year()
        )));
    }
    let scores = standardize(&raw)
        .ok_or_else(|| Error::Degenerate(format!("all region ECI values equal in year {}", m.year())))?;
    Ok(ComplexityResult {
        year: m.year(),
        regions,
        region_scores: scores,
        raw_region: raw,
        activities: Vec::new(),
        activity_scores: None,
        raw_activity: None,
        dropped_regions: dropped,
        dropped_activities: Vec::new(),
        eigenvalues: None,
    })
}

/// `M̂_{r,r'} = Σ_i M_{r,i} M_{r',i} / (M_{r,*} M_{*,i})`.
pub fn build_mhat(m: &SpecializationMatrix) -> Result<DMatrix<f64>> {
    check_marginals(m)?;
    let n = m.n_regions();
    let div = m.diversity();
    let ubi = m.ubiquity();
    let mut out = DMatrix::zeros(n, n);
    for r in 0..n {
        for rp in 0..n {
            let mut acc = 0.0;
            for i in 0..m.n_activities() {
                if m.get(r, i) && m.get(rp, i) {
                    acc += 1.0 / ubi[i] as f64;
                }
            }
            out[(r, rp)] = acc / div[r] as f64;
        }
    }
    Ok(out)
}

fn check_marginals(m: &SpecializationMatrix) -> Result<()> {
    if let Some(r) = m.diversity().iter().position(|&d| d == 0) {
        return Err(Error::PruneRequired(format!(
            "region {} has diversity 0",
            m.regions()[r]
        )));
    }
    if let Some(i) = m.ubiquity().iter().position(|&u| u == 0) {
        return Err(Error::PruneRequired(format!(
            "activity {} has ubiquity 0",
            m.activities()[i]
        )));
    }
    Ok(())
}

/// Outcome of [`prune`]: the retained submatrix and the original indices.
#[derive(Debug, Clone)]
pub struct Pruned {
    pub matrix: SpecializationMatrix,
    pub region_index: Vec<usize>,
    pub activity_index: Vec<usize>,
    pub dropped_regions: Vec<(String, DropReason)>,
    pub dropped_activities: Vec<(String, DropReason)>,
}

/// Removes zero-diversity regions and zero-ubiquity activities until stable,
/// then keeps the largest connected component of the region–activity graph
/// (by region count; ties by total region weight, then by number of links,
/// then by earliest region).
pub fn prune(m: &SpecializationMatrix) -> Pruned {
    let (n_r, n_a) = (m.n_regions(), m.n_activities());
    let mut region_reason: Vec<Option<DropReason>> =
        (0..n_r).map(|r| m.no_data(r).then_some(DropReason::NoData)).collect();
    let mut activity_reason: Vec<Option<DropReason>> = vec![None; n_a];
    loop {
        let mut changed = false;
        for r in 0..n_r {
            if region_reason[r].is_none() && !(0..n_a).any(|i| activity_reason[i].is_none() && m.get(r, i)) {
                region_reason[r] = Some(DropReason::NoSpecializations);
                changed = true;
            }
        }
        for i in 0..n_a {
            if activity_reason[i].is_none() && !(0..n_r).any(|r| region_reason[r].is_none() && m.get(r, i)) {
                activity_reason[i] = Some(DropReason::NoSpecializedRegions);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    // connected components over alive nodes; activities are offset by n_r
    let mut comp = vec![usize::MAX; n_r + n_a];
    let mut n_comp = 0;
    let mut stack = Vec::new();
    for start in 0..n_r {
        if region_reason[start].is_some() || comp[start] != usize::MAX {
            continue;
        }
        comp[start] = n_comp;
        stack.push(start);
        while let Some(node) = stack.pop() {
            if node < n_r {
                for i in 0..n_a {
                    if activity_reason[i].is_none() && m.get(node, i) && comp[n_r + i] == usize::MAX {
                        comp[n_r + i] = n_comp;
                        stack.push(n_r + i);
                    }
                }
            } else {
                let i = node - n_r;
                for r in 0..n_r {
                    if region_reason[r].is_none() && m.get(r, i) && comp[r] == usize::MAX {
                        comp[r] = n_comp;
                        stack.push(r);
                    }
                }
            }
        }
        n_comp += 1;
    }

    if n_comp > 1 {
        // (region count, weight, links); first maximum wins
        let mut stats = vec![(0usize, 0.0f64, 0usize); n_comp];
        for r in 0..n_r {
            if region_reason[r].is_none() {
                let s = &mut stats[comp[r]];
                s.0 += 1;
                s.1 += m.region_weight().map_or(0.0, |w| w[r]);
                s.2 += m.diversity()[r];
            }
        }
        let mut best = 0;
        for c in 1..n_comp {
            let (a, b) = (stats[c], stats[best]);
            let better = a.0 > b.0 || (a.0 == b.0 && a.1 > b.1) || (a.0 == b.0 && a.1 == b.1 && a.2 > b.2);
            if better {
                best = c;
            }
        }
        for r in 0..n_r {
            if region_reason[r].is_none() && comp[r] != best {
                region_reason[r] = Some(DropReason::Disconnected);
            }
        }
        for i in 0..n_a {
            if activity_reason[i].is_none() && comp[n_r + i] != best {
                activity_reason[i] = Some(DropReason::Disconnected);
            }
        }
    }

    let region_index: Vec<usize> = (0..n_r).filter(|&r| region_reason[r].is_none()).collect();
    let activity_index: Vec<usize> = (0..n_a).filter(|&i| activity_reason[i].is_none()).collect();
    let dropped_regions = region_reason
        .iter()
        .enumerate()
        .filter_map(|(r, why)| why.map(|w| (m.regions()[r].clone(), w)))
        .collect();
    let dropped_activities = activity_reason
        .iter()
        .enumerate()
        .filter_map(|(i, why)| why.map(|w| (m.activities()[i].clone(), w)))
        .collect();
    Pruned {
        matrix: m.submatrix(&region_index, &activity_index),
        region_index,
        activity_index,
        dropped_regions,
        dropped_activities,
    }
}

/// Eigen-solver configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    /// Systems with at most this many regions use the dense symmetric
    /// eigendecomposition; larger ones use power iteration with deflation.
    pub dense_limit: usize,
    /// L2 change of the unit iterate below which power iteration stops.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            dense_limit: 2000,
            tolerance: 1e-11,
            max_iterations: 200_000,
        }
    }
}

/// Gap below which two eigenvalues are treated as equal.
const EIGEN_GAP: f64 = 1e-10;

/// Full spectrum of `M̂` for a pruned matrix.
#[derive(Debug, Clone)]
pub struct MhatSpectrum {
    /// Descending.
    pub eigenvalues: Vec<f64>,
    /// Column `k` is a right eigenvector of `M̂` for `eigenvalues[k]`, unit L2 norm.
    pub vectors: DMatrix<f64>,
}

/// `S = D_r^{-1/2} M D_a⁻¹ Mᵀ D_r^{-1/2}` as a dense matrix.
fn symmetric_operator(m: &SpecializationMatrix) -> DMatrix<f64> {
    let n = m.n_regions();
    let b = scaled_incidence(m);
    let mut s = DMatrix::zeros(n, n);
    for r in 0..n {
        for rp in r..n {
            let v: f64 = merge_dot(&b[r], &b[rp]);
            s[(r, rp)] = v;
            s[(rp, r)] = v;
        }
    }
    s
}

/// Rows of `B = D_r^{-1/2} M D_a^{-1/2}` as sorted sparse (activity, value) lists.
fn scaled_incidence(m: &SpecializationMatrix) -> Vec<Vec<(usize, f64)>> {
    let (div, ubi) = (m.diversity(), m.ubiquity());
    (0..m.n_regions())
        .map(|r| {
            let dr = (div[r] as f64).sqrt();
            m.row(r)
                .iter()
                .enumerate()
                .filter(|(_, &x)| x)
                .map(|(i, _)| (i, 1.0 / (dr * (ubi[i] as f64).sqrt())))
                .collect()
        })
        .collect()
}

fn merge_dot(a: &[(usize, f64)], b: &[(usize, f64)]) -> f64 {
    let (mut i, mut j, mut acc) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                acc += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

/// Dense spectrum of `M̂`; requires a matrix without zero marginals.
pub fn mhat_spectrum(m: &SpecializationMatrix) -> Result<MhatSpectrum> {
    check_marginals(m)?;
    let eig = SymmetricEigen::new(symmetric_operator(m));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let n = m.n_regions();
    let inv_sqrt_d: Vec<f64> = m.diversity().iter().map(|&d| 1.0 / (d as f64).sqrt()).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let mut v = DVector::from_fn(n, |r, _| eig.eigenvectors[(r, k)] * inv_sqrt_d[r]);
        v /= v.norm();
        vectors.set_column(col, &v);
    }
    Ok(MhatSpectrum {
        eigenvalues: order.iter().map(|&k| eig.eigenvalues[k]).collect(),
        vectors,
    })
}

/// Region and activity complexity from the second eigenvector of `M̂`.
pub fn eigen_complexity(m: &SpecializationMatrix, opts: &EigenOptions) -> Result<ComplexityResult> {
    let pruned = prune(m);
    let pm = &pruned.matrix;
    let year = m.year();
    if pm.n_regions() < 3 || pm.n_activities() < 3 {
        return Err(Error::Degenerate(format!(
            "{} regions × {} activities left after pruning in year {year}",
            pm.n_regions(),
            pm.n_activities()
        )));
    }

    let (eigenvalues, k_raw) = if pm.n_regions() <= opts.dense_limit {
        let spec = mhat_spectrum(pm)?;
        let v = spec.vectors.column(1).iter().copied().collect::<Vec<_>>();
        (spec.eigenvalues, v)
    } else {
        power_second_eigenpair(pm, opts)?
    };
    let (l1, l2, l3) = (
        eigenvalues[0],
        eigenvalues[1],
        eigenvalues.get(2).copied().unwrap_or(0.0),
    );
    if l2 <= EIGEN_GAP {
        return Err(Error::Degenerate(format!(
            "second eigenvalue {l2:e} vanishes in year {year}: no variation across regions"
        )));
    }
    if l1 - l2 <= EIGEN_GAP || l2 - l3 <= EIGEN_GAP {
        return Err(Error::Degenerate(format!(
            "second eigenvalue {l2} is not separated (neighbors {l1}, {l3}) in year {year}"
        )));
    }

    let diversity: Vec<f64> = pm.diversity().iter().map(|&d| d as f64).collect();
    let mut k_raw = k_raw;
    let flip = match pearson(&k_raw, &diversity) {
        Some(c) => c < 0.0,
        // constant diversity: make the largest component positive
        None => {
            let big = k_raw
                .iter()
                .copied()
                .max_by(|a, b| a.abs().total_cmp(&b.abs()))
                .unwrap_or(0.0);
            big < 0.0
        }
    };
    if flip {
        k_raw.iter_mut().for_each(|x| *x = -*x);
    }
    let q_raw = activity_averages(pm, &k_raw);

    let region_scores =
        standardize(&k_raw).ok_or_else(|| Error::Degenerate(format!("constant region eigenvector in year {year}")))?;
    let activity_scores =
        standardize(&q_raw).ok_or_else(|| Error::Degenerate(format!("constant activity scores in year {year}")))?;

    Ok(ComplexityResult {
        year,
        regions: pm.regions().to_vec(),
        region_scores,
        raw_region: k_raw,
        activities: pm.activities().to_vec(),
        activity_scores: Some(activity_scores),
        raw_activity: Some(q_raw),
        dropped_regions: pruned.dropped_regions,
        dropped_activities: pruned.dropped_activities,
        eigenvalues: Some(eigenvalues),
    })
}

/// `Q_i = (1/M_{*,i}) Σ_r M_{r,i} K_r`.
fn activity_averages(m: &SpecializationMatrix, k: &[f64]) -> Vec<f64> {
    let mut q = vec![0.0; m.n_activities()];
    for (r, kr) in k.iter().enumerate() {
        for (i, _) in m.row(r).iter().enumerate().filter(|(_, &x)| x) {
            q[i] += kr;
        }
    }
    q.iter_mut().zip(m.ubiquity()).for_each(|(qi, &u)| *qi /= u as f64);
    q
}

/// `K_r = (1/M_{r,*}) Σ_i M_{r,i} Q_i`.
fn region_averages(m: &SpecializationMatrix, q: &[f64]) -> Vec<f64> {
    (0..m.n_regions())
        .map(|r| {
            let s: f64 = m.row(r).iter().zip(q).filter(|(&x, _)| x).map(|(_, qi)| qi).sum();
            s / m.diversity()[r] as f64
        })
        .collect()
}

/// Power iteration on `S` with the known leading eigenvector
/// `u₁ ∝ D_r^{1/2}·1` deflated. Returns eigenvalues `[1, λ₂, λ₃]` and `K`.
fn power_second_eigenpair(m: &SpecializationMatrix, opts: &EigenOptions) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = m.n_regions();
    let b = scaled_incidence(m);
    let n_a = m.n_activities();
    let apply = |x: &[f64]| -> Vec<f64> {
        let mut t = vec![0.0; n_a];
        for (r, row) in b.iter().enumerate() {
            for &(i, v) in row {
                t[i] += v * x[r];
            }
        }
        b.iter().map(|row| row.iter().map(|&(i, v)| v * t[i]).sum()).collect()
    };
    let mut u1: Vec<f64> = m.diversity().iter().map(|&d| (d as f64).sqrt()).collect();
    normalize(&mut u1);

    let run = |deflate: &[&[f64]], seed: &dyn Fn(usize) -> f64| -> Result<(f64, Vec<f64>)> {
        let mut x: Vec<f64> = (0..n).map(seed).collect();
        orthogonalize(&mut x, deflate);
        if normalize(&mut x) == 0.0 {
            x = (0..n).map(|r| if r % 2 == 0 { 1.0 } else { -1.0 }).collect();
            orthogonalize(&mut x, deflate);
            normalize(&mut x);
        }
        let mut lambda = 0.0;
        for _ in 0..opts.max_iterations {
            let mut y = apply(&x);
            orthogonalize(&mut y, deflate);
            lambda = dot(&x, &y);
            let norm = normalize(&mut y);
            if norm == 0.0 {
                return Ok((0.0, x));
            }
            let diff: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            x = y;
            if diff < opts.tolerance {
                let y = apply(&x);
                return Ok((dot(&x, &y), x));
            }
        }
        log::warn!(
            "power iteration reached {} iterations (λ ≈ {lambda})",
            opts.max_iterations
        );
        Err(Error::NoConvergence(opts.max_iterations))
    };

    let div = m.diversity();
    let (l2, v2) = run(&[&u1], &|r| div[r] as f64 + 1e-3 * (r as f64 + 1.0).sin())?;
    // λ₃ only feeds the separation check; a rough estimate is enough
    let l3 = match run(&[&u1, &v2], &|r| (0.37 * r as f64).cos()) {
        Ok((l3, _)) => l3,
        Err(Error::NoConvergence(_)) => 0.0,
        Err(e) => return Err(e),
    };
    let mut k: Vec<f64> = v2.iter().zip(div).map(|(v, &d)| v / (d as f64).sqrt()).collect();
    normalize(&mut k);
    Ok((vec![1.0, l2, l3], k))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(x: &mut [f64]) -> f64 {
    let n = dot(x, x).sqrt();
    if n > 0.0 {
        x.iter_mut().for_each(|v| *v /= n);
    }
    n
}

fn orthogonalize(x: &mut [f64], basis: &[&[f64]]) {
    for u in basis {
        let c = dot(x, u);
        x.iter_mut().zip(u.iter()).for_each(|(v, ui)| *v -= c * ui);
    }
}

/// Per-iteration standardized region and activity scores of the method of reflections.
#[derive(Debug, Clone)]
pub struct Reflections {
    pub regions: Vec<String>,
    pub activities: Vec<String>,
    /// `k[n]` is the region vector after `n` iterations.
    pub k: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
}

/// Method of reflections on a pruned, connected matrix.
///
/// `k⁽⁰⁾` and `q⁽⁰⁾` are the standardized diversity and ubiquity;
/// `k⁽ⁿ⁾` averages `q⁽ⁿ⁻¹⁾` over each region's specializations and `q⁽ⁿ⁾`
/// averages `k⁽ⁿ⁻¹⁾` over each activity's regions, re-standardized every step.
pub fn reflections(m: &SpecializationMatrix, iterations: usize) -> Result<Reflections> {
    check_marginals(m)?;
    let pruned = prune(m);
    if pruned
        .dropped_regions
        .iter()
        .any(|(_, w)| *w == DropReason::Disconnected)
    {
        return Err(Error::Disconnected(format!(
            "{} region(s) outside the largest component",
            pruned.dropped_regions.len()
        )));
    }
    if m.n_regions() < 3 || m.n_activities() < 3 {
        return Err(Error::Degenerate(format!(
            "{} regions × {} activities",
            m.n_regions(),
            m.n_activities()
        )));
    }
    let degenerate = |n: usize| Error::Degenerate(format!("reflection {n} has no variation"));
    let div: Vec<f64> = m.diversity().iter().map(|&d| d as f64).collect();
    let ubi: Vec<f64> = m.ubiquity().iter().map(|&u| u as f64).collect();
    let mut k = vec![standardize(&div).ok_or_else(|| degenerate(0))?];
    let mut q = vec![standardize(&ubi).ok_or_else(|| degenerate(0))?];
    for n in 1..=iterations {
        let kn = standardize(&region_averages(m, &q[n - 1])).ok_or_else(|| degenerate(n))?;
        let qn = standardize(&activity_averages(m, &k[n - 1])).ok_or_else(|| degenerate(n))?;
        k.push(kn);
        q.push(qn);
    }
    Ok(Reflections {
        regions: m.regions().to_vec(),
        activities: m.activities().to_vec(),
        k,
        q,
    })
}
