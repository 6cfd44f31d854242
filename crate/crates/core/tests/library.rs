//! Library-level pipeline on a synthetic fixture: file round trip, RCA,
//! complexity, relatedness and spatial statistics.

use std::collections::BTreeMap;
use std::fs::File;

use regcx::complexity::{eigen_complexity, EigenOptions};
use regcx::ingest::load_intensity;
use regcx::io::{read_adjacency, read_intensity, write_adjacency, write_intensity};
use regcx::rca::{binarize, rca, Baseline};
use regcx::relatedness::{closeness_to_complexity, density, proximity};
use regcx::spatial::{morans_i, restrict_to_values};
use regcx::stats::pearson;
use regcx::synth::{gen_pipeline_fixture, FixtureParams};
use regcx::Exec;

fn fixture() -> regcx::synth::PipelineFixture {
    gen_pipeline_fixture(&FixtureParams::default(), 5).unwrap()
}

#[test]
fn intensity_and_adjacency_survive_a_file_round_trip() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let (ip, ap) = (dir.path().join("industry.csv"), dir.path().join("adjacency.csv"));
    write_intensity(&f.industry, File::create(&ip).unwrap()).unwrap();
    write_adjacency(&f.graph, File::create(&ap).unwrap()).unwrap();
    assert_eq!(read_intensity(&ip).unwrap(), f.industry);
    assert_eq!(read_adjacency(&ap).unwrap(), f.graph);
}

#[test]
fn sequential_and_parallel_kernels_agree_bitwise() {
    let f = fixture();
    let year = f.industry.years()[0];
    let run = |exec: Exec| {
        let m = binarize(&rca(&f.industry, &Baseline::Internal, year, exec).unwrap(), 1.0);
        let phi = proximity(&m, exec);
        let omega = density(&m, &phi, exec);
        (m, phi, omega)
    };
    let (m_s, phi_s, omega_s) = run(Exec::Sequential);
    let (m_p, phi_p, omega_p) = run(Exec::default());
    assert_eq!(m_s, m_p);
    assert_eq!(phi_s, phi_p);
    assert_eq!(omega_s, omega_p);
}

#[test]
fn latent_capability_shows_up_in_every_stage() {
    let f = fixture();
    // Industry counts are recorded for subregions; aggregate them to regions.
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("industry.csv");
    write_intensity(&f.industry, File::create(&path).unwrap()).unwrap();
    let industry = load_intensity(&path, f.crosswalk.as_ref()).unwrap();
    let year = industry.years()[0];
    let m = binarize(
        &rca(&industry, &Baseline::Internal, year, Exec::default()).unwrap(),
        1.0,
    );
    let eig = eigen_complexity(&m, &EigenOptions::default()).unwrap();

    // Complexity is oriented along diversity.
    let diversity: Vec<f64> = eig
        .regions
        .iter()
        .map(|r| {
            let i = m.regions().iter().position(|x| x == r).unwrap();
            (0..m.n_activities()).filter(|&a| m.get(i, a)).count() as f64
        })
        .collect();
    assert!(pearson(&eig.region_scores, &diversity).unwrap() >= 0.0);

    // Capability is spatially smooth, so complexity clusters on the grid.
    let values: BTreeMap<&str, f64> = eig
        .regions
        .iter()
        .map(String::as_str)
        .zip(eig.region_scores.iter().copied())
        .collect();
    let (graph, x, _) = restrict_to_values(&values, &f.graph);
    assert!(morans_i(&x, &graph).unwrap() > 0.0);

    // Closeness is defined for most regions and bounded.
    let ici: BTreeMap<String, f64> = eig
        .activities
        .iter()
        .cloned()
        .zip(eig.activity_scores.clone().unwrap())
        .collect();
    let phi = proximity(&m, Exec::default());
    let omega = density(&m, &phi, Exec::default());
    let close = closeness_to_complexity(&m, &omega, &ici, Exec::default());
    let defined: Vec<f64> = close.iter().flatten().copied().collect();
    assert!(defined.len() * 2 > close.len());
    assert!(defined.iter().all(|c| (-1.0..=1.0).contains(c)));
}
