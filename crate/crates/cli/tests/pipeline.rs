use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn regcx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_regcx"))
        .args(args)
        .env("REGCX_LOG", "warn")
        .env_remove("REGCX_CONFIG")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(out.status.success(), "failed: {}", String::from_utf8_lossy(&out.stderr));
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn small_fixture(dir: &Path) {
    let d = dir.to_str().unwrap();
    ok(&regcx(&[
        "synth",
        "fixture",
        "--out",
        d,
        "--regions",
        "64",
        "--industries",
        "20",
        "--products",
        "15",
    ]));
}

/// Every file under `root` keyed by relative path.
fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

fn differing(a: &BTreeMap<PathBuf, Vec<u8>>, b: &BTreeMap<PathBuf, Vec<u8>>) -> Vec<String> {
    let mut keys: Vec<&PathBuf> = a.keys().chain(b.keys()).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .filter(|k| a.get(*k) != b.get(*k))
        .map(|k| k.display().to_string())
        .collect()
}

fn config(dir: &Path) -> String {
    dir.join("config.toml").to_str().unwrap().to_string()
}

#[test]
fn all_is_byte_identical_across_copies_and_reruns() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    small_fixture(a.path());
    for (rel, bytes) in tree(a.path()) {
        let p = b.path().join(rel);
        fs::create_dir_all(p.parent().unwrap()).unwrap();
        fs::write(p, bytes).unwrap();
    }
    ok(&regcx(&["-c", &config(a.path()), "all"]));
    ok(&regcx(&["-c", &config(b.path()), "--sequential", "all"]));
    let first = tree(&a.path().join("out"));
    assert!(first.len() > 20);
    // the manifests differ only in the config digest, which covers --sequential
    let mut seq = tree(&b.path().join("out"));
    assert_eq!(differing(&first, &seq), ["manifest.jsonl"]);
    ok(&regcx(&["-c", &config(b.path()), "all"]));
    seq = tree(&b.path().join("out"));
    assert!(
        differing(&first, &seq).is_empty(),
        "copies differ: {:?}",
        differing(&first, &seq)
    );
    ok(&regcx(&["-c", &config(a.path()), "all"]));
    let again = tree(&a.path().join("out"));
    assert!(
        differing(&first, &again).is_empty(),
        "rerun differs: {:?}",
        differing(&first, &again)
    );

    let manifest = String::from_utf8(first[Path::new("manifest.jsonl")].clone()).unwrap();
    let commands: Vec<String> = manifest
        .lines()
        .map(|l| {
            serde_json::from_str::<serde_json::Value>(l).unwrap()["command"]
                .as_str()
                .unwrap()
                .to_string()
        })
        .collect();
    assert_eq!(commands, ["ingest", "complexity", "relatedness", "spatial", "regress"]);
}

#[test]
fn manifest_checksums_match_outputs() {
    let a = tempfile::tempdir().unwrap();
    small_fixture(a.path());
    ok(&regcx(&["-c", &config(a.path()), "all"]));
    let out = a.path().join("out");
    let manifest = fs::read_to_string(out.join("manifest.jsonl")).unwrap();
    for line in manifest.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        for o in v["outputs"].as_array().unwrap() {
            let bytes = fs::read(out.join(o["path"].as_str().unwrap())).unwrap();
            let digest = sha256_hex(&bytes);
            assert_eq!(o["sha256"].as_str().unwrap(), digest);
        }
        for i in v["inputs"].as_array().unwrap() {
            let bytes = fs::read(a.path().join(i["path"].as_str().unwrap())).unwrap();
            assert_eq!(i["sha256"].as_str().unwrap(), sha256_hex(&bytes));
        }
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[test]
fn regress_tables_have_one_block_per_horizon() {
    let a = tempfile::tempdir().unwrap();
    small_fixture(a.path());
    ok(&regcx(&["-c", &config(a.path()), "all"]));
    let reg = a.path().join("out/regress");
    let diag = fs::read_to_string(reg.join("diagnostics.csv")).unwrap();
    for h in [2, 3, 4] {
        assert_eq!(diag.lines().filter(|l| l.starts_with(&format!("h{h}_"))).count(), 8);
    }
    let me = fs::read_to_string(reg.join("marginal_effects.csv")).unwrap();
    assert_eq!(me.lines().next().unwrap(), "horizon,term,estimate,ci_low,ci_high");
    for line in me.lines().skip(1) {
        let f: Vec<f64> = line.split(',').skip(2).map(|v| v.parse().unwrap()).collect();
        assert!(f[1] <= f[0] && f[0] <= f[2]);
    }
    let coef = fs::read_to_string(reg.join("coefficients.csv")).unwrap();
    assert!(coef.lines().any(|l| l.starts_with("h3_s5,indeci_nbr,")));
    assert!(coef.lines().any(|l| l.starts_with("h4_s1,g_lag,")));
}

#[test]
fn closeness_and_s_curve_keys_are_unique() {
    let a = tempfile::tempdir().unwrap();
    small_fixture(a.path());
    ok(&regcx(&["-c", &config(a.path()), "all"]));
    for mode in ["industry", "export"] {
        let text = fs::read_to_string(a.path().join(format!("out/relatedness/s_curve_{mode}.csv"))).unwrap();
        let mut keys = std::collections::BTreeSet::new();
        for line in text.lines().skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            assert!(keys.insert((f[0].to_string(), f[1].to_string())), "duplicate {line}");
            let c: f64 = f[3].parse().unwrap();
            assert!((-1.0..=1.0).contains(&c));
        }
        assert!(!keys.is_empty());
    }
}

#[test]
fn export_mode_without_pci_is_a_config_error() {
    let a = tempfile::tempdir().unwrap();
    small_fixture(a.path());
    let text = fs::read_to_string(a.path().join("config.toml"))
        .unwrap()
        .replace("pci = \"pci.csv\"\n", "");
    fs::write(a.path().join("config.toml"), text).unwrap();
    let out = regcx(&["-c", &config(a.path()), "complexity"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("pci"), "{}", stderr(&out));
}

#[test]
fn config_errors_are_reported_together() {
    let a = tempfile::tempdir().unwrap();
    fs::write(
        a.path().join("config.toml"),
        "[ingest]\nindustry = \"nope.csv\"\n[complexity]\nrca_threshold = -1\n[bogus]\n",
    )
    .unwrap();
    let out = regcx(&["-c", &config(a.path()), "all"]);
    assert_eq!(out.status.code(), Some(2));
    let e = stderr(&out);
    for needle in ["nope.csv", "rca_threshold", "bogus", "gdp", "population", "adjacency"] {
        assert!(e.contains(needle), "missing {needle}: {e}");
    }
}

#[test]
fn spec_with_absent_indicator_is_a_config_error() {
    let a = tempfile::tempdir().unwrap();
    small_fixture(a.path());
    let out = regcx(&[
        "-c",
        &config(a.path()),
        "--set",
        "complexity.modes=[\"industry\"]",
        "--set",
        "regress.specs=[{id = \"x\", regressors = [\"eci\"]}]",
        "regress",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("\"eci\" is not available"), "{}", stderr(&out));
}

#[test]
fn missing_upstream_names_the_producing_command() {
    let a = tempfile::tempdir().unwrap();
    small_fixture(a.path());
    let out = regcx(&["-c", &config(a.path()), "relatedness"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("run `complexity` first"), "{}", stderr(&out));
}

/// A spatial-only setup: hand-written indicator table and adjacency.
fn spatial_case(values: &[(&str, f64)], edges: &[(&str, &str)], extra: &str) -> (tempfile::TempDir, Output) {
    let a = tempfile::tempdir().unwrap();
    let out = a.path().join("out/complexity");
    fs::create_dir_all(&out).unwrap();
    let mut ind = String::from("region,year,indicator,value\n");
    for (i, (r, v)) in values.iter().enumerate() {
        ind.push_str(&format!("{r},2010,indeci,{v}\n"));
        ind.push_str(&format!(
            "{r},2011,indeci,{}\n",
            if extra.is_empty() { *v } else { i as f64 }
        ));
    }
    fs::write(out.join("indicators.csv"), ind).unwrap();
    let mut adj = String::from("region_a,region_b\n");
    for (x, y) in edges {
        adj.push_str(&format!("{x},{y}\n"));
    }
    fs::write(a.path().join("adjacency.csv"), adj).unwrap();
    fs::write(
        a.path().join("config.toml"),
        "[spatial]\nadjacency = \"adjacency.csv\"\n",
    )
    .unwrap();
    let o = regcx(&["-c", &config(a.path()), "spatial"]);
    (a, o)
}

#[test]
fn chessboard_gives_moran_minus_one() {
    let cycle = [("a", "b"), ("b", "c"), ("c", "d"), ("d", "a")];
    let (dir, out) = spatial_case(&[("a", 1.0), ("b", -1.0), ("c", 1.0), ("d", -1.0)], &cycle, "");
    ok(&out);
    let text = fs::read_to_string(dir.path().join("out/spatial/moran.csv")).unwrap();
    let row = text.lines().nth(1).unwrap();
    let f: Vec<&str> = row.split(',').collect();
    assert_eq!(&f[..2], ["2010", "indeci"]);
    assert!((f[2].parse::<f64>().unwrap() + 1.0).abs() < 1e-12);
    let nbr = fs::read_to_string(dir.path().join("out/spatial/neighbors.csv")).unwrap();
    assert!(nbr.lines().any(|l| l == "a,2010,indeci,-1"));
}

#[test]
fn constant_indicator_reports_the_year() {
    let cycle = [("a", "b"), ("b", "c"), ("c", "d"), ("d", "a")];
    let (_dir, out) = spatial_case(&[("a", 2.0), ("b", 2.0), ("c", 2.0), ("d", 2.0)], &cycle, "");
    assert!(!out.status.success());
    assert!(stderr(&out).contains("year 2010"), "{}", stderr(&out));
}

#[test]
fn empty_panel_points_to_the_deletion_log() {
    let a = tempfile::tempdir().unwrap();
    small_fixture(a.path());
    ok(&regcx(&["-c", &config(a.path()), "all"]));
    let out = regcx(&["-c", &config(a.path()), "--set", "regress.horizons=[11]", "regress"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("deletions.csv"), "{}", stderr(&out));
    let log = fs::read_to_string(a.path().join("out/regress/deletions.csv")).unwrap();
    assert!(log.lines().count() > 1);
}

#[test]
fn synth_generators_write_their_files() {
    let a = tempfile::tempdir().unwrap();
    let d = a.path().to_str().unwrap();
    ok(&regcx(&["synth", "panel", "--out", d, "--n", "20", "--t", "5"]));
    ok(&regcx(&[
        "synth",
        "specialization",
        "--out",
        d,
        "--model",
        "nested",
        "--regions",
        "4",
        "--activities",
        "4",
    ]));
    ok(&regcx(&["synth", "graph", "--out", d, "--model", "cycle", "--n", "4"]));
    let panel = fs::read_to_string(a.path().join("panel.csv")).unwrap();
    assert_eq!(panel.lines().count(), 1 + 2 * 20 * 5);
    let m = fs::read_to_string(a.path().join("specialization.csv")).unwrap();
    assert_eq!(m.lines().filter(|l| l.ends_with(",1")).count(), 4 + 3 + 2 + 1);
    let g = fs::read_to_string(a.path().join("adjacency.csv")).unwrap();
    assert_eq!(g.lines().count(), 5);
}
