//! Seeded synthetic data: specialization matrices with known structure,
//! dynamic panels with planted coefficients, structured region graphs, and
//! a complete pipeline fixture in the standard file formats.
//!
//! Every generator is a pure function of its parameters and seed. The
//! generator is ChaCha8 (`rand_chacha::ChaCha8Rng::seed_from_u64`);
//! replication `k` of a Monte Carlo run uses seed `seed + k`.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{ActivityPanel, IndicatorSeries, PanelBuilder, RegionGraph, SpecializationMatrix};
use crate::error::{Error, Result};
use crate::ingest::Crosswalk;

/// Algorithm identifier recorded in run manifests.
pub const RNG_ALGORITHM: &str = "chacha8/rand_chacha-0.9/seed_from_u64";

pub type SynthRng = ChaCha8Rng;

/// RNG for replication `index` of a run seeded with `seed`.
pub fn rng_for(seed: u64, index: u64) -> SynthRng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_add(index))
}

fn normal(rng: &mut SynthRng) -> f64 {
    StandardNormal.sample(rng)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpecializationModel {
    /// Region `r` is specialized in the first `⌈n_a (n_r − r) / n_r⌉` activities.
    Nested,
    /// Independent Bernoulli entries.
    Random { density: f64 },
    /// `k` diagonal blocks, each connected, with nothing between blocks.
    Block { k: usize },
}

pub fn gen_specialization(
    n_regions: usize,
    n_activities: usize,
    model: SpecializationModel,
    seed: u64,
) -> Result<SpecializationMatrix> {
    if n_regions < 3 || n_activities < 3 {
        return Err(Error::invalid(format!(
            "specialization matrix needs at least 3×3, got {n_regions}×{n_activities}"
        )));
    }
    let mut rng = rng_for(seed, 0);
    let mut rows = vec![vec![0u8; n_activities]; n_regions];
    match model {
        SpecializationModel::Nested => {
            for (r, row) in rows.iter_mut().enumerate() {
                let k = (n_activities * (n_regions - r)).div_ceil(n_regions).max(1);
                row[..k].iter_mut().for_each(|v| *v = 1);
            }
        }
        SpecializationModel::Random { density } => {
            if !(0.0..=1.0).contains(&density) {
                return Err(Error::invalid(format!("density {density} outside [0, 1]")));
            }
            for row in rows.iter_mut() {
                for v in row.iter_mut() {
                    *v = u8::from(rng.random::<f64>() < density);
                }
            }
        }
        SpecializationModel::Block { k } => {
            if k == 0 || k > n_regions || k > n_activities {
                return Err(Error::invalid(format!(
                    "{k} blocks do not fit a {n_regions}×{n_activities} matrix"
                )));
            }
            let r_bounds = split(n_regions, k);
            let a_bounds = split(n_activities, k);
            for b in 0..k {
                let (r0, r1) = r_bounds[b];
                let (a0, a1) = a_bounds[b];
                for (j, r) in (r0..r1).enumerate() {
                    // the block's first activity is shared by all its regions
                    rows[r][a0] = 1;
                    // each further activity gets at least one region
                    for (m, a) in (a0 + 1..a1).enumerate() {
                        if m % (r1 - r0) == j || rng.random::<f64>() < 0.4 {
                            rows[r][a] = 1;
                        }
                    }
                }
            }
        }
    }
    let regions = (0..n_regions).map(|r| format!("r{:04}", r + 1)).collect();
    let activities = (0..n_activities).map(|i| format!("a{:04}", i + 1)).collect();
    SpecializationMatrix::from_rows(regions, activities, 2000, &rows)
}

fn split(n: usize, k: usize) -> Vec<(usize, usize)> {
    (0..k).map(|b| (b * n / k, (b + 1) * n / k)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GraphModel {
    Cycle(usize),
    /// Rook-contiguity grid with `a` rows and `b` columns.
    Grid(usize, usize),
    /// Two disjoint complete graphs of `n` nodes each.
    TwoCliques(usize),
}

/// Structured graphs; region `k` is named `g{k:04}` so lexical order matches index order.
pub fn gen_region_graph(model: GraphModel) -> Result<RegionGraph> {
    let (n, edges): (usize, Vec<(usize, usize)>) = match model {
        GraphModel::Cycle(n) => {
            if n < 3 {
                return Err(Error::invalid(format!("cycle needs at least 3 nodes, got {n}")));
            }
            (n, (0..n).map(|k| (k, (k + 1) % n)).collect())
        }
        GraphModel::Grid(a, b) => {
            if a == 0 || b == 0 {
                return Err(Error::invalid("empty grid"));
            }
            let mut e = Vec::new();
            for i in 0..a {
                for j in 0..b {
                    let k = i * b + j;
                    if j + 1 < b {
                        e.push((k, k + 1));
                    }
                    if i + 1 < a {
                        e.push((k, k + b));
                    }
                }
            }
            (a * b, e)
        }
        GraphModel::TwoCliques(n) => {
            if n < 2 {
                return Err(Error::invalid(format!("cliques need at least 2 nodes, got {n}")));
            }
            let mut e = Vec::new();
            for base in [0, n] {
                for i in 0..n {
                    for j in i + 1..n {
                        e.push((base + i, base + j));
                    }
                }
            }
            (2 * n, e)
        }
    };
    RegionGraph::new((0..n).map(|k| format!("g{k:04}")).collect(), &edges)
}

/// Parameters of `y_it = ρ y_{i,t−1} + β x_it + μ_i + ε_it`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicPanelParams {
    pub n: usize,
    pub t: usize,
    pub rho: f64,
    pub beta: f64,
    pub sigma_mu: f64,
    pub sigma_eps: f64,
    /// AR(1) coefficient of ε (serially correlated errors).
    pub ar_eps: Option<f64>,
    /// Autoregressive coefficient of x.
    pub x_persistence: f64,
    /// Loading of x on μ_i (correlation with the fixed effect).
    pub x_mu: f64,
    /// Loading of x on ε_{t−1} (feedback that makes x predetermined, not exogenous).
    pub x_feedback: f64,
    /// Loading of x on ε_t; nonzero makes x endogenous.
    pub x_endogenous: f64,
    pub burn_in: usize,
    pub first_year: i32,
}

impl Default for DynamicPanelParams {
    fn default() -> Self {
        Self {
            n: 500,
            t: 8,
            rho: 0.5,
            beta: 1.0,
            sigma_mu: 1.0,
            sigma_eps: 1.0,
            ar_eps: None,
            x_persistence: 0.5,
            x_mu: 0.5,
            x_feedback: 0.3,
            x_endogenous: 0.0,
            burn_in: 50,
            first_year: 2001,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DynamicPanel {
    pub y: IndicatorSeries,
    pub x: IndicatorSeries,
    pub mu: Vec<f64>,
    pub regions: Vec<String>,
    pub years: Vec<i32>,
}

/// Simulates the dynamic panel, discarding `burn_in` periods. The process
/// starts at its noise-free stationary mean.
pub fn gen_dynamic_panel(p: &DynamicPanelParams, seed: u64) -> Result<DynamicPanel> {
    if !(p.rho.abs() < 1.0) {
        return Err(Error::invalid(format!("|rho| must be < 1, got {}", p.rho)));
    }
    if !(p.x_persistence.abs() < 1.0) {
        return Err(Error::invalid(format!(
            "|x_persistence| must be < 1, got {}",
            p.x_persistence
        )));
    }
    if let Some(a) = p.ar_eps {
        if !(a.abs() < 1.0) {
            return Err(Error::invalid(format!("|ar_eps| must be < 1, got {a}")));
        }
    }
    let mut rng = rng_for(seed, 0);
    let regions: Vec<String> = (0..p.n).map(|i| format!("i{:05}", i + 1)).collect();
    let years: Vec<i32> = (0..p.t).map(|k| p.first_year + k as i32).collect();
    let mut y_series = IndicatorSeries::new("y", "");
    let mut x_series = IndicatorSeries::new("x", "");
    let mut mus = Vec::with_capacity(p.n);
    for name in &regions {
        let mu = p.sigma_mu * normal(&mut rng);
        mus.push(mu);
        let mut x = p.x_mu * mu / (1.0 - p.x_persistence);
        let mut y = (mu + p.beta * x) / (1.0 - p.rho);
        let mut eps_prev = 0.0;
        for step in 0..p.burn_in + p.t {
            let shock = p.sigma_eps * normal(&mut rng);
            let eps = match p.ar_eps {
                Some(a) => a * eps_prev + shock,
                None => shock,
            };
            let v = normal(&mut rng);
            x = p.x_persistence * x + p.x_mu * mu + p.x_feedback * eps_prev + p.x_endogenous * eps + v;
            y = p.rho * y + p.beta * x + mu + eps;
            eps_prev = eps;
            if step >= p.burn_in {
                let year = years[step - p.burn_in];
                y_series.insert(name, year, y)?;
                x_series.insert(name, year, x)?;
            }
        }
    }
    Ok(DynamicPanel {
        y: y_series,
        x: x_series,
        mu: mus,
        regions,
        years,
    })
}

/// Sizes of the synthetic pipeline fixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixtureParams {
    pub n_regions: usize,
    pub n_industries: usize,
    pub n_products: usize,
    pub n_years: usize,
    pub first_year: i32,
    /// > 1 writes intensities at sub-region level plus a crosswalk.
    pub subregions_per_region: usize,
    pub base_year: i32,
}

impl Default for FixtureParams {
    fn default() -> Self {
        Self {
            n_regions: 60,
            n_industries: 40,
            n_products: 30,
            n_years: 14,
            first_year: 2003,
            subregions_per_region: 2,
            base_year: 2010,
        }
    }
}

/// A complete input set for the CLI pipeline.
#[derive(Debug, Clone)]
pub struct PipelineFixture {
    pub industry: ActivityPanel,
    pub exports: ActivityPanel,
    pub crosswalk: Option<Crosswalk>,
    /// `(product, year) → share` in world trade.
    pub world_shares: BTreeMap<(String, i32), f64>,
    pub pci: BTreeMap<(String, i32), f64>,
    pub gdp_nominal: IndicatorSeries,
    pub population: IndicatorSeries,
    pub price_index: BTreeMap<i32, f64>,
    pub graph: RegionGraph,
}

/// Regions on a near-square grid share a spatially smooth latent capability;
/// activities have latent complexity; a region holds an activity when its
/// capability exceeds the activity's complexity up to noise. GDP per capita
/// grows faster where capability is higher.
pub fn gen_pipeline_fixture(p: &FixtureParams, seed: u64) -> Result<PipelineFixture> {
    if p.n_regions < 9 || p.n_industries < 3 || p.n_products < 3 || p.n_years < 2 {
        return Err(Error::invalid("fixture too small"));
    }
    let mut rng = rng_for(seed, 0);
    let cols = (p.n_regions as f64).sqrt().ceil() as usize;
    let rows = p.n_regions.div_ceil(cols);
    let region_names: Vec<String> = (0..p.n_regions).map(|k| format!("R{:04}", k + 1)).collect();
    let mut edges = Vec::new();
    for k in 0..p.n_regions {
        let (i, j) = (k / cols, k % cols);
        if j + 1 < cols && k + 1 < p.n_regions {
            edges.push((k, k + 1));
        }
        if i + 1 < rows && k + cols < p.n_regions {
            edges.push((k, k + cols));
        }
    }
    let graph = RegionGraph::new(region_names.clone(), &edges)?;

    let phase: [f64; 4] = std::array::from_fn(|_| rng.random::<f64>() * std::f64::consts::TAU);
    let capability: Vec<f64> = (0..p.n_regions)
        .map(|k| {
            let (i, j) = ((k / cols) as f64 / rows as f64, (k % cols) as f64 / cols as f64);
            0.7 * (std::f64::consts::TAU * i + phase[0]).sin()
                + 0.5 * (std::f64::consts::TAU * 1.5 * j + phase[1]).cos()
                + 0.3 * (std::f64::consts::TAU * (i + j) + phase[2]).sin()
                + 0.35 * normal(&mut rng)
        })
        .collect();
    let drift: Vec<f64> = (0..p.n_regions).map(|_| 0.02 * normal(&mut rng)).collect();
    let log_pop0: Vec<f64> = capability
        .iter()
        .map(|c| 11.0 + 0.6 * c + 0.8 * normal(&mut rng))
        .collect();
    let industry_cx: Vec<f64> = (0..p.n_industries).map(|_| 2.4 * rng.random::<f64>() - 1.2).collect();
    let product_cx: Vec<f64> = (0..p.n_products).map(|_| 2.4 * rng.random::<f64>() - 1.2).collect();
    // a few regions never export
    let exporter: Vec<bool> = capability
        .iter()
        .map(|&c| c > -1.0 || rng.random::<f64>() < 0.5)
        .collect();

    let years: Vec<i32> = (0..p.n_years).map(|t| p.first_year + t as i32).collect();
    let sub = p.subregions_per_region.max(1);
    let sub_name = |r: usize, s: usize| {
        if sub == 1 {
            region_names[r].clone()
        } else {
            format!("{}-{}", region_names[r], s + 1)
        }
    };
    let crosswalk = if sub > 1 {
        let pairs: Vec<(String, String)> = (0..p.n_regions)
            .flat_map(|r| (0..sub).map(move |s| (r, s)))
            .map(|(r, s)| (sub_name(r, s), region_names[r].clone()))
            .collect();
        Some(Crosswalk::from_pairs(&pairs)?)
    } else {
        None
    };

    let mut industry = PanelBuilder::new();
    let mut exports = PanelBuilder::new();
    let mut pop = IndicatorSeries::new("population", "inhabitants");
    let mut gdp = IndicatorSeries::new("gdppc", "currency per capita");
    let mut price_index = BTreeMap::new();
    let mut world_shares = BTreeMap::new();
    let mut pci = BTreeMap::new();
    let mut log_y: Vec<f64> = capability
        .iter()
        .map(|c| 9.5 + 0.4 * c + 0.2 * normal(&mut rng))
        .collect();

    for (t, &year) in years.iter().enumerate() {
        price_index.insert(year, 1.05f64.powi(year - p.base_year));
        let raw: Vec<f64> = (0..p.n_products).map(|_| normal(&mut rng).exp()).collect();
        let total: f64 = raw.iter().sum();
        for (j, w) in raw.iter().enumerate() {
            let code = format!("P{:04}", j + 1);
            world_shares.insert((code.clone(), year), w / total);
            pci.insert((code, year), product_cx[j] / 0.7 + 0.05 * normal(&mut rng));
        }
        for r in 0..p.n_regions {
            let c = capability[r] + drift[r] * t as f64;
            let log_pop = log_pop0[r] + 0.01 * t as f64;
            pop.insert(&region_names[r], year, log_pop.exp().round())?;
            for (i, &a) in industry_cx.iter().enumerate() {
                if c - a + 0.6 * normal(&mut rng) > -0.4 {
                    let hours = (2.0 + 0.3 * log_pop - 0.5 * a.abs() + 0.4 * normal(&mut rng)).exp();
                    let s = if sub > 1 { rng.random_range(0..sub) } else { 0 };
                    industry.add(&sub_name(r, s), &format!("I{:05}", i + 1), year, hours.round().max(1.0))?;
                }
            }
            if exporter[r] {
                for (j, &a) in product_cx.iter().enumerate() {
                    if c - a + 0.8 * normal(&mut rng) > 0.3 {
                        let usd = (6.0 + 0.5 * c + normal(&mut rng)).exp();
                        let s = if sub > 1 { rng.random_range(0..sub) } else { 0 };
                        exports.add(&sub_name(r, s), &format!("P{:04}", j + 1), year, usd.round().max(1.0))?;
                    }
                }
            }
            // make sure every sub-region appears so the crosswalk is exercised
            for s in 0..sub {
                industry.add(&sub_name(r, s), &format!("I{:05}", 1), year, 0.0)?;
            }
            let nominal = log_y[r].exp() * price_index[&year];
            gdp.insert(&region_names[r], year, nominal)?;
        }
        let mean_log_y = log_y.iter().sum::<f64>() / log_y.len() as f64;
        for r in 0..p.n_regions {
            let nbr: f64 =
                graph.neighbors(r).iter().map(|&n| capability[n]).sum::<f64>() / graph.degree(r).max(1) as f64;
            log_y[r] +=
                0.015 + 0.03 * capability[r] + 0.02 * nbr - 0.05 * (log_y[r] - mean_log_y) + 0.02 * normal(&mut rng);
        }
    }

    Ok(PipelineFixture {
        industry: industry.build(),
        exports: exports.build(),
        crosswalk,
        world_shares,
        pci,
        gdp_nominal: gdp,
        population: pop,
        price_index,
        graph,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complexity::prune;

    #[test]
    fn nested_4x4() {
        let m = gen_specialization(4, 4, SpecializationModel::Nested, 0).unwrap();
        let rows: Vec<Vec<bool>> = (0..4).map(|r| m.row(r).to_vec()).collect();
        assert_eq!(
            rows,
            [
                [true, true, true, true],
                [true, true, true, false],
                [true, true, false, false],
                [true, false, false, false]
            ]
        );
        let p = prune(&m);
        assert!(p.dropped_regions.is_empty() && p.dropped_activities.is_empty());
    }

    #[test]
    fn nested_larger_has_no_pruning_loss() {
        let m = gen_specialization(9, 5, SpecializationModel::Nested, 0).unwrap();
        let p = prune(&m);
        assert!(p.dropped_regions.is_empty() && p.dropped_activities.is_empty());
        assert!(m.diversity().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn block_components() {
        let m = gen_specialization(10, 8, SpecializationModel::Block { k: 2 }, 5).unwrap();
        let p = prune(&m);
        // one block is kept whole and the other dropped as disconnected
        assert_eq!(p.region_index.len(), 5);
        assert_eq!(p.dropped_regions.len(), 5);
        assert_eq!(p.activity_index.len() + p.dropped_activities.len(), 8);
        // within a block every region shares the first activity
        let m3 = gen_specialization(9, 9, SpecializationModel::Block { k: 3 }, 1).unwrap();
        let comps = prune(&m3.submatrix(&[0, 1, 2], &[0, 1, 2]));
        assert!(comps.dropped_regions.is_empty());
    }

    #[test]
    fn random_is_reproducible() {
        let a = gen_specialization(20, 25, SpecializationModel::Random { density: 0.3 }, 99).unwrap();
        let b = gen_specialization(20, 25, SpecializationModel::Random { density: 0.3 }, 99).unwrap();
        let c = gen_specialization(20, 25, SpecializationModel::Random { density: 0.3 }, 100).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(gen_specialization(2, 5, SpecializationModel::Nested, 0).is_err());
    }

    #[test]
    fn graphs() {
        let c = gen_region_graph(GraphModel::Cycle(4)).unwrap();
        assert!((0..4).all(|r| c.degree(r) == 2));
        let g = gen_region_graph(GraphModel::Grid(2, 2)).unwrap();
        assert_eq!((g.n_regions(), g.n_edges()), (4, 4));
        let k = gen_region_graph(GraphModel::TwoCliques(3)).unwrap();
        assert_eq!(k.n_regions(), 6);
        assert!(k.edges().iter().all(|&(a, b)| (a < 3) == (b < 3)));
    }

    #[test]
    fn noise_free_panel_sits_at_fixed_point() {
        let p = DynamicPanelParams {
            n: 5,
            t: 4,
            sigma_eps: 0.0,
            beta: 0.0,
            x_feedback: 0.0,
            ..Default::default()
        };
        let panel = gen_dynamic_panel(&p, 3).unwrap();
        for (i, r) in panel.regions.iter().enumerate() {
            for &y in &panel.years {
                let v = panel.y.get(r, y).unwrap();
                assert!((v - panel.mu[i] / (1.0 - p.rho)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn panel_reproducible_and_validated() {
        let p = DynamicPanelParams {
            n: 20,
            ..Default::default()
        };
        let a = gen_dynamic_panel(&p, 1).unwrap();
        let b = gen_dynamic_panel(&p, 1).unwrap();
        assert_eq!(a.y, b.y);
        assert_eq!(a.x, b.x);
        let bad = DynamicPanelParams { rho: 1.0, ..p };
        assert!(gen_dynamic_panel(&bad, 1).is_err());
    }

    #[test]
    fn fixture_is_deterministic() {
        let p = FixtureParams {
            n_regions: 16,
            n_industries: 8,
            n_products: 6,
            n_years: 3,
            ..Default::default()
        };
        let a = gen_pipeline_fixture(&p, 4).unwrap();
        let b = gen_pipeline_fixture(&p, 4).unwrap();
        assert_eq!(a.industry, b.industry);
        assert_eq!(a.gdp_nominal, b.gdp_nominal);
        assert_eq!(a.graph.n_regions(), 16);
    }
}
