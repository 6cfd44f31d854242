use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use regcx::synth::{DynamicPanelParams, FixtureParams, GraphModel, SpecializationModel};
use regcx_cli::commands::{self, synth};
use regcx_cli::config::{parse, Config, Needs};
use regcx_cli::CliError;

/// Regional economic complexity pipeline.
#[derive(Parser)]
#[command(name = "regcx", version)]
struct Cli {
    /// Configuration file.
    #[arg(short, long, env = "REGCX_CONFIG", global = true)]
    config: Option<PathBuf>,
    /// Overrides a configuration key, e.g. `--set regress.horizons=[3]`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Output directory (overrides run.output).
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
    /// Run every kernel on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Aggregate raw intensities to regions and deflate GDP.
    Ingest,
    /// RCA, specialization and complexity per year.
    Complexity,
    /// Proximity, density and closeness to complex activities.
    Relatedness,
    /// Moran's I, skewness and neighbor averages.
    Spatial,
    /// Growth regressions with diagnostics.
    Regress,
    /// Every stage in order.
    All,
    /// Generate synthetic inputs.
    #[command(subcommand)]
    Synth(SynthCommand),
}

#[derive(Subcommand)]
enum SynthCommand {
    /// A complete input set plus config.toml.
    Fixture(FixtureArgs),
    /// A simulated dynamic panel.
    Panel(PanelArgs),
    /// A binary specialization matrix.
    Specialization(SpecializationArgs),
    /// A structured region graph.
    Graph(GraphArgs),
}

#[derive(Args)]
struct FixtureArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = FixtureParams::default().n_regions)]
    regions: usize,
    #[arg(long, default_value_t = FixtureParams::default().n_industries)]
    industries: usize,
    #[arg(long, default_value_t = FixtureParams::default().n_products)]
    products: usize,
    #[arg(long, default_value_t = FixtureParams::default().n_years)]
    years: usize,
    #[arg(long, default_value_t = FixtureParams::default().subregions_per_region)]
    subregions: usize,
}

#[derive(Args)]
struct PanelArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long, default_value_t = 8)]
    t: usize,
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// AR(1) coefficient of the errors.
    #[arg(long)]
    ar_eps: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MatrixKind {
    Nested,
    Random,
    Block,
}

#[derive(Args)]
struct SpecializationArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    regions: usize,
    #[arg(long, default_value_t = 25)]
    activities: usize,
    #[arg(long, value_enum, default_value = "random")]
    model: MatrixKind,
    #[arg(long, default_value_t = 0.3)]
    density: f64,
    #[arg(long, default_value_t = 2)]
    blocks: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum GraphKind {
    Cycle,
    Grid,
    TwoCliques,
}

#[derive(Args)]
struct GraphArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    model: GraphKind,
    /// Node count (cycle), rows (grid) or clique size.
    #[arg(long)]
    n: usize,
    /// Grid columns.
    #[arg(long)]
    m: Option<usize>,
}

fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

fn load(cli: &Cli, needs: Needs) -> Result<Config, CliError> {
    let text = match &cli.config {
        Some(p) => fs::read_to_string(p).map_err(|e| CliError::Config(vec![format!("{}: {e}", p.display())]))?,
        None => String::new(),
    };
    let source = cli.config.as_deref().map(absolute);
    let mut overrides = cli.overrides.clone();
    if cli.sequential {
        overrides.push("run.exec=\"sequential\"".into());
    }
    if let Some(o) = &cli.output {
        let v = toml::Value::String(absolute(o).to_string_lossy().into_owned());
        overrides.push(format!("run.output={v}"));
    }
    parse(&text, source.as_deref(), &overrides, needs)
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let none = Needs::default();
    match &cli.command {
        Command::Ingest => commands::ingest::run(&load(cli, Needs { ingest: true, ..none })?),
        Command::Complexity => commands::complexity::run(&load(cli, none)?),
        Command::Relatedness => commands::relatedness::run(&load(cli, none)?),
        Command::Spatial => commands::spatial::run(&load(cli, Needs { spatial: true, ..none })?),
        Command::Regress => commands::regress::run(&load(cli, none)?),
        Command::All => commands::all(&load(
            cli,
            Needs {
                ingest: true,
                spatial: true,
            },
        )?),
        Command::Synth(s) => run_synth(s),
    }
}

fn run_synth(s: &SynthCommand) -> Result<(), CliError> {
    match s {
        SynthCommand::Fixture(a) => {
            let p = FixtureParams {
                n_regions: a.regions,
                n_industries: a.industries,
                n_products: a.products,
                n_years: a.years,
                subregions_per_region: a.subregions,
                ..Default::default()
            };
            synth::fixture(&absolute(&a.out), &p, a.seed)
        }
        SynthCommand::Panel(a) => {
            let p = DynamicPanelParams {
                n: a.n,
                t: a.t,
                rho: a.rho,
                beta: a.beta,
                ar_eps: a.ar_eps,
                ..Default::default()
            };
            synth::panel(&absolute(&a.out), &p, a.seed)
        }
        SynthCommand::Specialization(a) => {
            let model = match a.model {
                MatrixKind::Nested => SpecializationModel::Nested,
                MatrixKind::Random => SpecializationModel::Random { density: a.density },
                MatrixKind::Block => SpecializationModel::Block { k: a.blocks },
            };
            synth::specialization(&absolute(&a.out), a.regions, a.activities, model, a.seed)
        }
        SynthCommand::Graph(a) => {
            let model = match a.model {
                GraphKind::Cycle => GraphModel::Cycle(a.n),
                GraphKind::Grid => GraphModel::Grid(a.n, a.m.unwrap_or(a.n)),
                GraphKind::TwoCliques => GraphModel::TwoCliques(a.n),
            };
            synth::graph(&absolute(&a.out), model)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("REGCX_LOG", "info")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
