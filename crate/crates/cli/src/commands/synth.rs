//! Synthetic inputs: a complete pipeline fixture with its config file, and
//! the single-purpose generators used in the checks.

use std::fs;
use std::path::Path;

use regcx::io::{
    fmt_f64, write_activity_year, write_adjacency, write_crosswalk, write_indicator, write_intensity,
    write_price_index, CsvOut, PCI_HEADER, SHARES_HEADER,
};
use regcx::synth::{
    gen_dynamic_panel, gen_pipeline_fixture, gen_region_graph, gen_specialization, DynamicPanelParams, FixtureParams,
    GraphModel, SpecializationModel,
};

use crate::config::{parse, Config, Needs};
use crate::run::Run;
use crate::tidy::REGION_HEADER;
use crate::{CliError, Context};

pub const FIXTURE_CONFIG: &str = "config.toml";

/// The manifest digest covers the generator settings, not the output path,
/// so fixtures written to different directories get identical manifests.
fn config_for(out: &Path, settings: String) -> Result<Config, CliError> {
    let value = toml::Value::String(out.to_string_lossy().into_owned());
    let mut cfg = parse("", None, &[format!("run.output={value}")], Needs::default())?;
    cfg.digest_input = settings.into_bytes();
    Ok(cfg)
}

fn fixture_config(p: &FixtureParams, crosswalk: bool) -> String {
    let mut s = String::new();
    s.push_str("[run]\noutput = \"out\"\n\n[ingest]\n");
    s.push_str("industry = \"industry.csv\"\nexports = \"exports.csv\"\n");
    if crosswalk {
        s.push_str("crosswalk = \"crosswalk.csv\"\n");
    }
    s.push_str("gdp = \"gdp.csv\"\npopulation = \"population.csv\"\nprice_index = \"price_index.csv\"\n");
    s.push_str(&format!("base_year = {}\n\n", p.base_year));
    s.push_str(
        "[complexity]\nmodes = [\"industry\", \"export\"]\nexport_shares = \"world_shares.csv\"\npci = \"pci.csv\"\n\n",
    );
    s.push_str("[spatial]\nadjacency = \"adjacency.csv\"\npermutations = 99\nseed = 1\n\n");
    s.push_str("[regress]\nhorizons = [2, 3, 4]\n");
    s
}

/// Writes every input file of the pipeline plus a config that uses them.
pub fn fixture(out: &Path, p: &FixtureParams, seed: u64) -> Result<(), CliError> {
    let f = gen_pipeline_fixture(p, seed).context(|| "generating fixture".into())?;
    let cfg = config_for(out, format!("fixture {p:?} seed {seed}"))?;
    let mut run = Run::new(&cfg, "synth");
    let ctx = || format!("writing fixture to {}", out.display());
    write_intensity(&f.industry, run.create("industry.csv")?).context(ctx)?;
    write_intensity(&f.exports, run.create("exports.csv")?).context(ctx)?;
    if let Some(cw) = &f.crosswalk {
        write_crosswalk(cw, run.create("crosswalk.csv")?).context(ctx)?;
    }
    write_indicator(&f.gdp_nominal, run.create("gdp.csv")?).context(ctx)?;
    write_indicator(&f.population, run.create("population.csv")?).context(ctx)?;
    write_price_index(&f.price_index, run.create("price_index.csv")?).context(ctx)?;
    write_activity_year(&f.world_shares, &SHARES_HEADER, run.create("world_shares.csv")?).context(ctx)?;
    write_activity_year(&f.pci, &PCI_HEADER, run.create("pci.csv")?).context(ctx)?;
    write_adjacency(&f.graph, run.create("adjacency.csv")?).context(ctx)?;
    let path = out.join(FIXTURE_CONFIG);
    fs::write(&path, fixture_config(p, f.crosswalk.is_some())).map_err(|e| CliError::io(&path, e))?;
    run.finish()
}

/// Writes `y` and `x` of a simulated dynamic panel as a tidy table.
pub fn panel(out: &Path, p: &DynamicPanelParams, seed: u64) -> Result<(), CliError> {
    let d = gen_dynamic_panel(p, seed).context(|| "generating panel".into())?;
    let cfg = config_for(out, format!("panel {p:?} seed {seed}"))?;
    let mut run = Run::new(&cfg, "synth");
    let ctx = || "writing panel".to_string();
    let mut w = CsvOut::new(run.create("panel.csv")?, &REGION_HEADER).context(ctx)?;
    for s in [&d.y, &d.x] {
        for (r, y, v) in s.iter() {
            w.row(&[r, &y.to_string(), &s.name, &fmt_f64(v)]).context(ctx)?;
        }
    }
    w.finish().context(ctx)?;
    run.finish()
}

/// Writes a binary specialization matrix in the intensity format (values 0/1).
pub fn specialization(
    out: &Path,
    n_regions: usize,
    n_activities: usize,
    model: SpecializationModel,
    seed: u64,
) -> Result<(), CliError> {
    let m = gen_specialization(n_regions, n_activities, model, seed).context(|| "generating matrix".into())?;
    let cfg = config_for(
        out,
        format!("specialization {n_regions}x{n_activities} {model:?} seed {seed}"),
    )?;
    let mut run = Run::new(&cfg, "synth");
    let ctx = || "writing matrix".to_string();
    let mut w = CsvOut::new(run.create("specialization.csv")?, &regcx::io::INTENSITY_HEADER).context(ctx)?;
    let y = m.year().to_string();
    for (r, region) in m.regions().iter().enumerate() {
        for (a, act) in m.activities().iter().enumerate() {
            w.row(&[region.as_str(), act, &y, if m.get(r, a) { "1" } else { "0" }])
                .context(ctx)?;
        }
    }
    w.finish().context(ctx)?;
    run.finish()
}

pub fn graph(out: &Path, model: GraphModel) -> Result<(), CliError> {
    let g = gen_region_graph(model).context(|| "generating graph".into())?;
    let cfg = config_for(out, format!("graph {model:?}"))?;
    let mut run = Run::new(&cfg, "synth");
    write_adjacency(&g, run.create("adjacency.csv")?).context(|| "writing graph".into())?;
    run.finish()
}
