use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use posdesign_cli::experiments::{self, Experiment, Method, RunConfig, Sweep};
use posdesign_cli::{CliError, Preset, ScenarioFile};

#[derive(Parser)]
#[command(name = "posdesign", version, about = "Precoder design sweeps for mmWave downlink positioning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// PEB versus clock-bias prior for several NLOS reflection coefficients.
    Regimes(Common),
    /// Robust SDP and codebook strategies versus clock-bias prior.
    Compare(Common),
    /// Angular patterns of the designed precoders.
    Beampattern(Common),
    /// Power allocation versus time sharing for a range of symbols per beam.
    Timeshare(Common),
    /// A single design at the scenario's clock-bias prior.
    Design(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario JSON file.
    #[arg(long, conflicts_with = "preset")]
    scenario: Option<PathBuf>,
    /// Built-in scenario.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Seed for the path gain phases when the scenario gives none.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Use 64 subcarriers.
    #[arg(long)]
    desk_scale: bool,
    /// Worker threads (default: one per processor).
    #[arg(long)]
    workers: Option<usize>,
    /// Design method (design and beampattern).
    #[arg(long, value_enum)]
    method: Option<Method>,
    /// Smallest σ_clk of the sweep in meters.
    #[arg(long)]
    sigma_from: Option<f64>,
    /// Largest σ_clk of the sweep in meters.
    #[arg(long)]
    sigma_to: Option<f64>,
    /// Number of logarithmically spaced σ_clk values.
    #[arg(long)]
    sigma_points: Option<usize>,
    /// σ_clk for design, beampattern and timeshare (default: the scenario's).
    #[arg(long)]
    sigma_clk_m: Option<f64>,
    /// Reflection coefficients swept by regimes.
    #[arg(long, value_delimiter = ',')]
    gammas: Option<Vec<f64>>,
    /// Symbols per beam swept by timeshare.
    #[arg(long, value_delimiter = ',')]
    symbols: Option<Vec<usize>>,
    /// Record wall-clock times in the CSV.
    #[arg(long)]
    timing: bool,
}

fn config(experiment: Experiment, c: &Common) -> Result<RunConfig, CliError> {
    let mut file = match (&c.scenario, c.preset) {
        (Some(path), None) => ScenarioFile::load(path)?,
        (None, Some(p)) => p.scenario(),
        (None, None) => Preset::Table1Scen1.scenario(),
        (Some(_), Some(_)) => return Err(CliError::Config("--scenario and --preset are exclusive".into())),
    };
    if c.desk_scale {
        file = file.desk_scaled();
    }
    if let Some(s) = c.sigma_clk_m {
        file.sigma_clk_m = s;
    }
    file.validate()?;
    let mut cfg = RunConfig::new(experiment, file);
    cfg.preset = c.preset.or(c.scenario.is_none().then_some(Preset::Table1Scen1));
    cfg.scenario_path = c.scenario.clone();
    cfg.desk_scale = c.desk_scale;
    cfg.seed = c.seed;
    cfg.workers = c.workers.unwrap_or(0);
    cfg.timing = c.timing;
    cfg.sweep = Sweep::log(
        c.sigma_from.unwrap_or(cfg.sweep.from),
        c.sigma_to.unwrap_or(cfg.sweep.to),
        c.sigma_points.unwrap_or(cfg.sweep.points),
    );
    cfg.sweep.validate()?;
    if let Some(g) = &c.gammas {
        cfg.gammas = g.clone();
    }
    if let Some(l) = &c.symbols {
        cfg.symbols = l.clone();
    }
    if let Some(m) = c.method {
        cfg.methods = vec![m];
    } else if experiment == Experiment::Compare || experiment == Experiment::Beampattern {
        cfg.methods = Method::ALL.to_vec();
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, common) = match &cli.command {
        Command::Regimes(c) => (Experiment::Regimes, c),
        Command::Compare(c) => (Experiment::Compare, c),
        Command::Beampattern(c) => (Experiment::Beampattern, c),
        Command::Timeshare(c) => (Experiment::Timeshare, c),
        Command::Design(c) => (Experiment::Design, c),
    };
    let cfg = match config(experiment, common) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    let out = match experiments::run(experiment, &cfg) {
        Ok(out) => out,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(if matches!(e, CliError::Config(_)) { 2 } else { 3 });
        }
    };
    for e in &out.errors {
        eprintln!("row failed: {e}");
    }
    match experiments::write_outputs(&common.out, experiment, &cfg, &out) {
        Ok(files) => eprintln!("wrote {} files to {}", files.len(), common.out.display()),
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    }
    let failed = out.failed_rows();
    if out.rows.is_empty() || failed == 0 {
        ExitCode::SUCCESS
    } else if failed == out.rows.len() {
        ExitCode::from(3)
    } else {
        ExitCode::from(4)
    }
}
