//! Spatial statistics over a [`RegionGraph`]: global Moran's I with binary
//! (row-unstandardized) weights, population skewness, and neighbor averages.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use crate::data::RegionGraph;
use crate::error::{Error, Result};
use crate::par::Exec;
use crate::stats::mean;
use crate::synth::rng_for;

/// `I = (|R| / Σ_r |N(r)|) · Σ_r Σ_{r'∈N(r)} (x_r' − x̄)(x_r − x̄) / Σ_r (x_r − x̄)²`.
///
/// `values[r]` belongs to `graph.regions()[r]`.
pub fn morans_i(values: &[f64], graph: &RegionGraph) -> Result<f64> {
    assert_eq!(values.len(), graph.n_regions(), "one value per graph region");
    let links: usize = (0..graph.n_regions()).map(|r| graph.degree(r)).sum();
    if links == 0 {
        return Err(Error::NoEdges(format!("{} isolated regions", graph.n_regions())));
    }
    let xbar = mean(values);
    let dev: Vec<f64> = values.iter().map(|v| v - xbar).collect();
    let denom: f64 = dev.iter().map(|d| d * d).sum();
    let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if !(denom > (1e-13 * scale).powi(2) * values.len() as f64) {
        return Err(Error::ConstantField("zero variance".into()));
    }
    Ok(moran_with_dev(&dev, denom, links, graph))
}

fn moran_with_dev(dev: &[f64], denom: f64, links: usize, graph: &RegionGraph) -> f64 {
    let mut num = 0.0;
    for (r, dr) in dev.iter().enumerate() {
        num += dr * graph.neighbors(r).iter().map(|&n| dev[n]).sum::<f64>();
    }
    (graph.n_regions() as f64 / links as f64) * num / denom
}

/// Moran's I under random relabelling of the values.
#[derive(Debug, Clone)]
pub struct PermutationNull {
    pub observed: f64,
    pub mean: f64,
    pub std_error: f64,
    /// Share of permutations with `I ≥ observed` (with the +1 correction).
    pub p_upper: f64,
    pub draws: Vec<f64>,
}

/// Permutation distribution of Moran's I; permutation `k` uses seed `seed + k`.
pub fn moran_permutation_null(
    values: &[f64],
    graph: &RegionGraph,
    permutations: usize,
    seed: u64,
    exec: Exec,
) -> Result<PermutationNull> {
    let observed = morans_i(values, graph)?;
    let links: usize = (0..graph.n_regions()).map(|r| graph.degree(r)).sum();
    let xbar = mean(values);
    let dev: Vec<f64> = values.iter().map(|v| v - xbar).collect();
    let denom: f64 = dev.iter().map(|d| d * d).sum();
    let draws = exec.map_range(permutations, |k| {
        let mut rng = rng_for(seed, k as u64);
        let mut d = dev.clone();
        d.shuffle(&mut rng);
        moran_with_dev(&d, denom, links, graph)
    });
    let m = mean(&draws);
    let var = draws.iter().map(|d| (d - m).powi(2)).sum::<f64>() / (draws.len().max(2) - 1) as f64;
    let above = draws.iter().filter(|&&d| d >= observed).count();
    Ok(PermutationNull {
        observed,
        mean: m,
        std_error: (var / draws.len() as f64).sqrt(),
        p_upper: (above + 1) as f64 / (draws.len() + 1) as f64,
        draws,
    })
}

/// `⟨(x − x̄)³⟩ / ⟨(x − x̄)²⟩^{3/2}` with divide-by-n moments.
pub fn skewness(values: &[f64]) -> Result<f64> {
    if values.len() < 3 {
        return Err(Error::invalid(format!(
            "skewness needs at least 3 values, got {}",
            values.len()
        )));
    }
    let xbar = mean(values);
    let n = values.len() as f64;
    let m2 = values.iter().map(|v| (v - xbar).powi(2)).sum::<f64>() / n;
    let m3 = values.iter().map(|v| (v - xbar).powi(3)).sum::<f64>() / n;
    let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if !(m2 > (1e-13 * scale).powi(2)) {
        return Err(Error::ConstantField("zero variance".into()));
    }
    Ok(m3 / m2.powf(1.5))
}

/// How [`neighbor_average`] treats neighbors without a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MissingNeighbors {
    /// Any missing neighbor makes the average undefined.
    #[default]
    Propagate,
    /// Average over the neighbors that have values.
    Subset,
}

/// `⟨x⟩_{N(r)} = (1/|N(r)|) Σ_{r'∈N(r)} x_r'`. Isolated regions are `None`.
pub fn neighbor_average(values: &[Option<f64>], graph: &RegionGraph, policy: MissingNeighbors) -> Vec<Option<f64>> {
    assert_eq!(values.len(), graph.n_regions(), "one value per graph region");
    (0..graph.n_regions())
        .map(|r| {
            let ns = graph.neighbors(r);
            if ns.is_empty() {
                return None;
            }
            let mut sum = 0.0;
            let mut count = 0usize;
            for &n in ns {
                match values[n] {
                    Some(v) => {
                        sum += v;
                        count += 1;
                    }
                    None if policy == MissingNeighbors::Propagate => return None,
                    None => {}
                }
            }
            (count > 0).then(|| sum / count as f64)
        })
        .collect()
}

/// Restricts `graph` to regions present in `values`, dropping incident edges.
/// Returns the subgraph, the aligned values, and the number of excluded regions.
pub fn restrict_to_values(values: &BTreeMap<&str, f64>, graph: &RegionGraph) -> (RegionGraph, Vec<f64>, usize) {
    let keep: Vec<bool> = graph
        .regions()
        .iter()
        .map(|r| values.contains_key(r.as_str()))
        .collect();
    let excluded = keep.iter().filter(|k| !**k).count();
    let (sub, _) = graph.induced(&keep);
    let aligned = sub.regions().iter().map(|r| values[r.as_str()]).collect();
    (sub, aligned, excluded)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{gen_region_graph, GraphModel};
    use proptest::prelude::*;

    /// Brute-force oracle: explicit double loop over a dense weight matrix.
    fn moran_brute(x: &[f64], g: &RegionGraph) -> f64 {
        let n = x.len();
        let mut w = vec![vec![0.0; n]; n];
        for (a, b) in g.edges() {
            w[a][b] = 1.0;
            w[b][a] = 1.0;
        }
        let xbar = x.iter().sum::<f64>() / n as f64;
        let s0: f64 = w.iter().flatten().sum();
        let mut num = 0.0;
        for i in 0..n {
            for j in 0..n {
                num += w[i][j] * (x[i] - xbar) * (x[j] - xbar);
            }
        }
        let den: f64 = x.iter().map(|v| (v - xbar).powi(2)).sum();
        n as f64 / s0 * num / den
    }

    #[test]
    fn chessboard_cycle_is_minus_one() {
        let g = gen_region_graph(GraphModel::Cycle(4)).unwrap();
        let i = morans_i(&[1.0, -1.0, 1.0, -1.0], &g).unwrap();
        assert!((i + 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_cliques_is_plus_one() {
        let g = gen_region_graph(GraphModel::TwoCliques(3)).unwrap();
        let x = [2.0, 2.0, 2.0, -5.0, -5.0, -5.0];
        let i = morans_i(&x, &g).unwrap();
        assert!((i - 1.0).abs() < 1e-12);
        assert!((i - moran_brute(&x, &g)).abs() < 1e-12);
    }

    #[test]
    fn constant_and_edgeless_errors() {
        let g = gen_region_graph(GraphModel::Cycle(4)).unwrap();
        assert!(matches!(morans_i(&[3.0; 4], &g), Err(Error::ConstantField(_))));
        let iso = RegionGraph::new(vec!["a".into(), "b".into()], &[]).unwrap();
        assert!(matches!(morans_i(&[1.0, 2.0], &iso), Err(Error::NoEdges(_))));
    }

    #[test]
    fn skewness_examples() {
        assert!(skewness(&[-1.0, 0.0, 1.0]).unwrap().abs() < 1e-15);
        // brute force: m3 = (2·(−1)³ + 2³)/3 = 2, m2 = (2·1 + 4)/3 = 2
        let expected = 2.0 / 2f64.powf(1.5);
        assert!((skewness(&[0.0, 0.0, 3.0]).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.7071067811865476).abs() < 1e-15);
        assert!(skewness(&[1.0, 1.0, 1.0]).is_err());
        assert!(skewness(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn neighbor_average_rules() {
        let g = RegionGraph::from_named_edges(&[("a", "b"), ("a", "c")], &["d"]).unwrap();
        let v = [None, Some(1.0), Some(3.0), Some(9.0)];
        let na = neighbor_average(&v, &g, MissingNeighbors::Propagate);
        assert_eq!(na[0], Some(2.0));
        assert_eq!(na[1], None); // neighbor a missing
        assert_eq!(na[3], None); // isolated
        let subset = neighbor_average(&v, &g, MissingNeighbors::Subset);
        assert_eq!(subset[1], None);
        let v2 = [Some(0.0), None, Some(3.0), None];
        assert_eq!(neighbor_average(&v2, &g, MissingNeighbors::Subset)[0], Some(3.0));
    }

    #[test]
    fn permutation_null_mean() {
        let g = gen_region_graph(GraphModel::Grid(10, 10)).unwrap();
        let x: Vec<f64> = (0..100).map(|k| ((k * 37) % 101) as f64).collect();
        let null = moran_permutation_null(&x, &g, 2000, 42, Exec::Parallel).unwrap();
        let expected = -1.0 / 99.0;
        assert!(
            (null.mean - expected).abs() < 3.0 * null.std_error,
            "{} vs {expected}",
            null.mean
        );
        let seq = moran_permutation_null(&x, &g, 50, 42, Exec::Sequential).unwrap();
        let par = moran_permutation_null(&x, &g, 50, 42, Exec::Parallel).unwrap();
        assert_eq!(seq.draws, par.draws);
    }

    proptest! {
        #[test]
        fn affine_invariance(xs in prop::collection::vec(-100.0f64..100.0, 9), a in 0.1f64..10.0, b in -50.0f64..50.0, neg in any::<bool>()) {
            let g = gen_region_graph(GraphModel::Grid(3, 3)).unwrap();
            let a = if neg { -a } else { a };
            let Ok(i1) = morans_i(&xs, &g) else { return Ok(()); };
            prop_assert!((i1 - moran_brute(&xs, &g)).abs() < 1e-9);
            let ys: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
            let i2 = morans_i(&ys, &g).unwrap();
            prop_assert!((i1 - i2).abs() < 1e-9);
        }

        #[test]
        fn neighbor_average_is_linear(
            xs in prop::collection::vec(-10.0f64..10.0, 8),
            ys in prop::collection::vec(-10.0f64..10.0, 8),
            alpha in -3.0f64..3.0, beta in -3.0f64..3.0,
        ) {
            let g = gen_region_graph(GraphModel::Cycle(8)).unwrap();
            let wrap = |v: &[f64]| v.iter().map(|x| Some(*x)).collect::<Vec<_>>();
            let combo: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| alpha * x + beta * y).collect();
            let nx = neighbor_average(&wrap(&xs), &g, MissingNeighbors::Propagate);
            let ny = neighbor_average(&wrap(&ys), &g, MissingNeighbors::Propagate);
            let nc = neighbor_average(&wrap(&combo), &g, MissingNeighbors::Propagate);
            for k in 0..8 {
                let lhs = nc[k].unwrap();
                let rhs = alpha * nx[k].unwrap() + beta * ny[k].unwrap();
                prop_assert!((lhs - rhs).abs() < 1e-9);
            }
        }

        #[test]
        fn mirrored_skewness(xs in prop::collection::vec(-10.0f64..10.0, 3..20)) {
            if let Ok(s) = skewness(&xs) {
                let m: Vec<f64> = xs.iter().map(|x| -x).collect();
                prop_assert!((skewness(&m).unwrap() + s).abs() < 1e-9);
            }
        }
    }
}
