use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use posdesign::codebook::{self, AodInterval, Codebook, CodebookKind};
use posdesign::design::{self, Parameterization, UncertaintyGrid};
use posdesign::fisher::{self, ClockPrior, FimModel};
use posdesign::{Arrays, OfdmConfig, Scenario, C64};

use crate::metrics::{covariance_pattern, relative_los_illumination};
use crate::output::{self, PatternSample, SweepRecord, ERROR_STATUS};
use crate::scenario::{Preset, ScenarioFile};
use crate::CliError;

/// Floor applied to exported beampatterns.
pub const PATTERN_FLOOR_DB: f64 = -80.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Regimes,
    Compare,
    Beampattern,
    Timeshare,
    Design,
}

impl Experiment {
    pub fn label(self) -> &'static str {
        match self {
            Experiment::Regimes => "regimes",
            Experiment::Compare => "compare",
            Experiment::Beampattern => "beampattern",
            Experiment::Timeshare => "timeshare",
            Experiment::Design => "design",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Worst-case SDP over the full covariance.
    RobustSdp,
    /// Sum and digital difference beams with optimized power.
    Digital,
    /// Sum and unit-modulus difference beams with optimized power.
    Analog,
    /// Sum beams with optimized power.
    SumOpt,
    /// Sum beams with uniform power.
    SumUniform,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::RobustSdp, Method::Digital, Method::Analog, Method::SumOpt, Method::SumUniform];

    pub fn label(self) -> &'static str {
        match self {
            Method::RobustSdp => "robust-sdp",
            Method::Digital => "digital",
            Method::Analog => "analog",
            Method::SumOpt => "sum-opt",
            Method::SumUniform => "sum-uniform",
        }
    }

    pub fn codebook_kind(self) -> CodebookKind {
        match self {
            Method::RobustSdp | Method::Digital => CodebookKind::Digital,
            Method::Analog => CodebookKind::Analog,
            Method::SumOpt | Method::SumUniform => CodebookKind::SumOnly,
        }
    }
}

/// Logarithmic sweep of σ_clk in meters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sweep {
    pub from: f64,
    pub to: f64,
    pub points: usize,
}

impl Sweep {
    pub fn log(from: f64, to: f64, points: usize) -> Self {
        Self { from, to, points }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.from > 0.0 && self.to > 0.0 && self.from.is_finite() && self.to.is_finite()) {
            return Err(CliError::Config("log sweep bounds must be positive and finite".into()));
        }
        if self.points == 0 || (self.points == 1 && self.from != self.to) {
            return Err(CliError::Config("sweep needs at least two points unless from == to".into()));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.from];
        }
        let (a, b) = (self.from.log10(), self.to.log10());
        (0..self.points).map(|i| 10f64.powf(a + (b - a) * i as f64 / (self.points - 1) as f64)).collect()
    }
}

/// Everything an experiment needs besides the subcommand.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    /// Effective scenario (after desk scaling).
    pub scenario: ScenarioFile,
    pub preset: Option<Preset>,
    pub scenario_path: Option<PathBuf>,
    pub desk_scale: bool,
    pub seed: u64,
    /// Worker threads; 0 uses one per processor.
    #[serde(skip)]
    pub workers: usize,
    pub sweep: Sweep,
    /// Reflection coefficients swept by `regimes`.
    pub gammas: Vec<f64>,
    /// Reflection coefficient of the curve with known LOS angle and delay.
    pub los_known_gamma: Option<f64>,
    pub methods: Vec<Method>,
    /// Symbols per beam swept by `timeshare`.
    pub symbols: Vec<usize>,
    pub theta_points: usize,
    /// Record wall-clock times (makes the CSV run-dependent).
    pub timing: bool,
}

impl RunConfig {
    /// Defaults for `experiment` on `scenario`.
    pub fn new(experiment: Experiment, scenario: ScenarioFile) -> Self {
        let sweep = match experiment {
            Experiment::Compare => Sweep::log(1e-3, 1e3, 7),
            _ => Sweep::log(1e-3, 1e3, 13),
        };
        let methods = match experiment {
            Experiment::Design => vec![Method::Digital],
            _ => Method::ALL.to_vec(),
        };
        Self {
            scenario,
            preset: None,
            scenario_path: None,
            desk_scale: false,
            seed: 7,
            workers: 0,
            sweep,
            gammas: vec![0.0, 0.1, 0.5, 1.0],
            los_known_gamma: Some(0.1),
            methods,
            symbols: (0..7).map(|i| 1 << i).collect(),
            theta_points: 2001,
            timing: false,
        }
    }
}

/// Precoder behind a sweep row.
#[derive(Debug, Clone)]
pub enum Export {
    Codebook(Codebook),
    Covariance(DMatrix<C64>),
}

impl Export {
    pub fn covariance(&self) -> DMatrix<C64> {
        match self {
            Export::Codebook(cb) => cb.covariance(),
            Export::Covariance(x) => x.clone(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub rows: Vec<SweepRecord>,
    /// Precoder of each row, aligned with `rows`.
    pub exports: Vec<Option<Export>>,
    pub patterns: Vec<PatternSample>,
    /// Error messages of failed rows.
    pub errors: Vec<String>,
}

impl RunOutput {
    pub fn failed_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.failed()).count()
    }
}

/// Geometry, arrays, uncertainty grid and AOD intervals of a scenario.
#[derive(Debug, Clone)]
pub struct Setup {
    pub file: ScenarioFile,
    pub scenario: Scenario,
    pub arrays: Arrays,
    pub grid: UncertaintyGrid,
    pub intervals: Vec<AodInterval>,
}

impl Setup {
    pub fn new(file: &ScenarioFile, seed: u64) -> Result<Self, CliError> {
        file.validate()?;
        let scenario = file.scenario(seed);
        let arrays = file.arrays()?;
        let grid = file.grid(&scenario)?;
        let intervals = codebook::aod_intervals_from_grid(&grid, &arrays.tx)?;
        Ok(Self { file: file.clone(), scenario, arrays, grid, intervals })
    }

    /// Same geometry with every NLOS reflection coefficient set to `gamma`.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self, CliError> {
        let mut scenario = self.scenario.clone();
        scenario.nlos_reflection.iter_mut().for_each(|g| *g = gamma);
        let mut file = self.file.clone();
        file.nlos_reflection.iter_mut().for_each(|g| *g = gamma);
        let grid = file.grid(&scenario)?;
        Ok(Self { file, scenario, grid, arrays: self.arrays, intervals: self.intervals.clone() })
    }

    /// Beam count of a codebook of `kind`.
    pub fn beam_count(&self, kind: CodebookKind) -> usize {
        kind.beam_count(&self.intervals)
    }

    /// OFDM configuration whose budget follows the beam count of `kind`.
    pub fn ofdm(&self, kind: CodebookKind) -> OfdmConfig {
        self.file.ofdm(self.beam_count(kind))
    }

    pub fn codebook(&self, kind: CodebookKind) -> Result<Codebook, CliError> {
        let cfg = self.ofdm(kind);
        Ok(codebook::build_codebook(&self.intervals, kind, &self.arrays.tx, &cfg)?.normalized_for(&cfg))
    }

    /// FIM models of every grid point; `los_known` removes the LOS AOD and
    /// delay from the unknowns.
    pub fn models(&self, sigma_clk_m: f64, los_known: bool) -> Result<Vec<FimModel>, CliError> {
        let prior = ClockPrior::from_std_m(sigma_clk_m)?;
        let known = if los_known { vec![0, fisher::los_delay_index(self.scenario.num_paths())] } else { Vec::new() };
        Ok(self.grid.models(&self.arrays, &self.file.ofdm(1), prior, &known)?)
    }

    /// Designs the precoder of `method` at `sigma_clk_m`.
    pub fn evaluate(&self, method: Method, sigma_clk_m: f64, los_known: bool) -> Result<Evaluation, CliError> {
        let models = self.models(sigma_clk_m, los_known)?;
        let kind = method.codebook_kind();
        let cfg = self.ofdm(kind);
        let ev = match method {
            Method::RobustSdp => {
                let param = Parameterization::Full { n: self.arrays.tx.num_elements };
                let sol = design::solve_worst_case(&models, &param, cfg.trace_budget(), &Default::default())?;
                Evaluation { worst_peb: sol.worst_peb, status: sol.status.label().into(), export: Export::Covariance(sol.x.x) }
            }
            Method::SumUniform => {
                let cb = self.codebook(kind)?;
                let worst_peb = codebook::worst_case_peb(&models, &cb.covariance());
                Evaluation { worst_peb, status: "uniform".into(), export: Export::Codebook(cb) }
            }
            _ => {
                let pa = codebook::optimize_power(&self.codebook(kind)?, &models, &cfg)?;
                Evaluation { worst_peb: pa.worst_peb, status: pa.status.label().into(), export: Export::Codebook(pa.codebook) }
            }
        };
        Ok(ev)
    }

    pub fn illumination(&self, x: &DMatrix<C64>) -> Result<f64, CliError> {
        relative_los_illumination(x, &self.intervals, &self.arrays.tx)
    }
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub worst_peb: f64,
    pub status: String,
    pub export: Export,
}

struct Row {
    record: SweepRecord,
    export: Option<Export>,
    error: Option<String>,
}

fn error_row(sweep_var: f64, method: String, e: &CliError) -> Row {
    Row {
        error: Some(format!("{method} at {sweep_var}: {e}")),
        record: SweepRecord {
            sweep_var,
            method,
            worst_peb_m: f64::INFINITY,
            los_illum: f64::NAN,
            solver_status: ERROR_STATUS.into(),
            wall_s: 0.0,
        },
        export: None,
    }
}

fn timed<T>(timing: bool, f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, if timing { start.elapsed().as_secs_f64() } else { 0.0 })
}

fn design_row(setup: &Setup, method: Method, label: String, sigma: f64, los_known: bool, timing: bool) -> Row {
    let (res, wall_s) = timed(timing, || -> Result<_, CliError> {
        let ev = setup.evaluate(method, sigma, los_known)?;
        let illum = setup.illumination(&ev.export.covariance())?;
        Ok((ev, illum))
    });
    match res {
        Ok((ev, los_illum)) => Row {
            record: SweepRecord { sweep_var: sigma, method: label, worst_peb_m: ev.worst_peb, los_illum, solver_status: ev.status, wall_s },
            export: Some(ev.export),
            error: None,
        },
        Err(e) => error_row(sigma, label, &e),
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))
}

/// Runs jobs on the pool, keeping job order.
fn run_jobs<J: Sync>(workers: usize, jobs: &[J], f: impl Fn(&J) -> Vec<Row> + Sync + Send) -> Result<Vec<Row>, CliError> {
    let rows: Vec<Vec<Row>> = pool(workers)?.install(|| jobs.par_iter().map(&f).collect());
    Ok(rows.into_iter().flatten().collect())
}

fn collect(rows: Vec<Row>) -> RunOutput {
    let mut out = RunOutput::default();
    for r in rows {
        out.rows.push(r.record);
        out.exports.push(r.export);
        out.errors.extend(r.error);
    }
    out
}

pub fn regime_label(gamma: f64, los_known: bool) -> String {
    if los_known {
        format!("digital-gamma{gamma}-los-known")
    } else {
        format!("digital-gamma{gamma}")
    }
}

/// Digital codebook with optimized power for every reflection coefficient
/// and σ_clk, plus the curve with known LOS angle and delay.
pub fn run_regimes(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    cfg.sweep.validate()?;
    let base = Setup::new(&cfg.scenario, cfg.seed)?;
    let mut curves: Vec<(Setup, f64, bool)> = Vec::new();
    for &g in &cfg.gammas {
        curves.push((base.with_gamma(g)?, g, false));
    }
    if let Some(g) = cfg.los_known_gamma {
        curves.push((base.with_gamma(g)?, g, true));
    }
    let sigmas = cfg.sweep.values();
    let jobs: Vec<(usize, f64)> = (0..curves.len()).flat_map(|c| sigmas.iter().map(move |&s| (c, s))).collect();
    let rows = run_jobs(cfg.workers, &jobs, |&(c, sigma)| {
        let (setup, g, known) = &curves[c];
        vec![design_row(setup, Method::Digital, regime_label(*g, *known), sigma, *known, cfg.timing)]
    })?;
    Ok(collect(rows))
}

/// Every configured method at every σ_clk.
pub fn run_compare(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    cfg.sweep.validate()?;
    let setup = Setup::new(&cfg.scenario, cfg.seed)?;
    let jobs: Vec<(f64, Method)> = cfg.sweep.values().into_iter().flat_map(|s| cfg.methods.iter().map(move |&m| (s, m))).collect();
    let rows = run_jobs(cfg.workers, &jobs, |&(sigma, m)| vec![design_row(&setup, m, m.label().into(), sigma, false, cfg.timing)])?;
    Ok(collect(rows))
}

/// Configured methods at the scenario's σ_clk.
pub fn run_design(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    if cfg.methods.is_empty() {
        return Err(CliError::Config("no design method selected".into()));
    }
    let setup = Setup::new(&cfg.scenario, cfg.seed)?;
    let sigma = cfg.scenario.sigma_clk_m;
    let rows = run_jobs(cfg.workers, &cfg.methods, |&m| vec![design_row(&setup, m, m.label().into(), sigma, false, cfg.timing)])?;
    Ok(collect(rows))
}

/// Beampatterns `10 log10 Re(aᵀXā)` of the configured methods on a uniform
/// grid over [-π/2, π/2].
pub fn run_beampattern(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    if cfg.theta_points < 2 {
        return Err(CliError::Config("beampattern needs at least two angles".into()));
    }
    let mut out = run_design(cfg)?;
    let setup = Setup::new(&cfg.scenario, cfg.seed)?;
    let n = cfg.theta_points;
    let half_pi = std::f64::consts::FRAC_PI_2;
    let thetas: Vec<f64> = (0..n).map(|i| -half_pi + std::f64::consts::PI * i as f64 / (n - 1) as f64).collect();
    for (row, export) in out.rows.iter().zip(&out.exports) {
        let Some(export) = export else { continue };
        let x = export.covariance();
        for &theta in &thetas {
            let p = covariance_pattern(&x, theta, &setup.arrays.tx)?;
            let db = if p > 0.0 { (10.0 * p.log10()).max(PATTERN_FLOOR_DB) } else { PATTERN_FLOOR_DB };
            out.patterns.push(PatternSample { theta_rad: theta, method: row.method.clone(), pattern_db: db });
        }
    }
    Ok(out)
}

/// Power allocation versus time sharing of the digital codebook for every
/// configured number of symbols per beam, at the scenario's σ_clk.
pub fn run_timeshare(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    if cfg.symbols.contains(&0) || cfg.symbols.is_empty() {
        return Err(CliError::Config("symbols per beam must be positive".into()));
    }
    let base = Setup::new(&cfg.scenario, cfg.seed)?;
    let sigma = cfg.scenario.sigma_clk_m;
    let p_max = cfg.scenario.per_beam_power_mw();
    let rows = run_jobs(cfg.workers, &cfg.symbols, |&l| {
        let lv = l as f64;
        let (res, wall_s) = timed(cfg.timing, || -> Result<_, CliError> {
            let mut setup = base.clone();
            setup.file.symbols_per_beam = l;
            let kind = CodebookKind::Digital;
            let ofdm = setup.ofdm(kind);
            let models = setup.models(sigma, false)?;
            let cb = setup.codebook(kind)?;
            let pa = codebook::optimize_power(&cb, &models, &ofdm)?;
            let ts = codebook::time_share_with_weights(&cb, &pa.codebook.power_weights, &models, &ofdm, l, p_max)?;
            let shared = cb.with_weights(ts.factors.iter().map(|&f| f as f64 / lv).collect())?;
            let illum_pa = setup.illumination(&pa.codebook.covariance())?;
            let illum_ts = setup.illumination(&shared.covariance())?;
            Ok((pa, ts, shared, illum_pa, illum_ts))
        });
        match res {
            Ok((pa, ts, shared, illum_pa, illum_ts)) => vec![
                Row {
                    record: SweepRecord {
                        sweep_var: lv,
                        method: "power-allocation".into(),
                        worst_peb_m: ts.peb_allocated,
                        los_illum: illum_pa,
                        solver_status: pa.status.label().into(),
                        wall_s,
                    },
                    export: Some(Export::Codebook(pa.codebook)),
                    error: None,
                },
                Row {
                    record: SweepRecord {
                        sweep_var: lv,
                        method: "time-sharing".into(),
                        worst_peb_m: ts.peb_shared,
                        los_illum: illum_ts,
                        solver_status: if ts.degenerate { "degenerate".into() } else { pa.status.label().into() },
                        wall_s: 0.0,
                    },
                    export: Some(Export::Codebook(shared)),
                    error: None,
                },
            ],
            Err(e) => vec![error_row(lv, "power-allocation".into(), &e), error_row(lv, "time-sharing".into(), &e)],
        }
    })?;
    Ok(collect(rows))
}

pub fn run(experiment: Experiment, cfg: &RunConfig) -> Result<RunOutput, CliError> {
    match experiment {
        Experiment::Regimes => run_regimes(cfg),
        Experiment::Compare => run_compare(cfg),
        Experiment::Beampattern => run_beampattern(cfg),
        Experiment::Timeshare => run_timeshare(cfg),
        Experiment::Design => run_design(cfg),
    }
}

#[derive(Serialize)]
struct Versions {
    posdesign: &'static str,
    posdesign_cli: &'static str,
}

#[derive(Serialize)]
struct Manifest<'a> {
    experiment: &'static str,
    config: &'a RunConfig,
    versions: Versions,
    rows: usize,
    failed_rows: usize,
    files: Vec<String>,
}

/// File name of the precoder exported for row `index`.
pub fn export_file_name(experiment: Experiment, index: usize, method: &str) -> String {
    format!("{}_{index:03}_{method}.csv", experiment.label())
}

/// Writes the sweep CSV, beampatterns, precoder exports and the run
/// manifest under `dir`; returns the paths written.
pub fn write_outputs(dir: &Path, experiment: Experiment, cfg: &RunConfig, out: &RunOutput) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir.join("precoders"))?;
    let mut files = Vec::new();
    let sweep = dir.join(format!("{}.csv", experiment.label()));
    output::write_sweep(fs::File::create(&sweep)?, &out.rows)?;
    files.push(sweep);
    if !out.patterns.is_empty() {
        let p = dir.join("beampattern_db.csv");
        output::write_patterns(fs::File::create(&p)?, &out.patterns)?;
        files.push(p);
    }
    for (i, (row, export)) in out.rows.iter().zip(&out.exports).enumerate() {
        let Some(export) = export else { continue };
        let p = dir.join("precoders").join(export_file_name(experiment, i, &row.method));
        let f = fs::File::create(&p)?;
        match export {
            Export::Codebook(cb) => cb.write_csv(f)?,
            Export::Covariance(x) => output::write_covariance(f, x)?,
        }
        files.push(p);
    }
    let manifest = Manifest {
        experiment: experiment.label(),
        config: cfg,
        versions: Versions { posdesign: posdesign::VERSION, posdesign_cli: env!("CARGO_PKG_VERSION") },
        rows: out.rows.len(),
        failed_rows: out.failed_rows(),
        files: files.iter().map(|p| p.strip_prefix(dir).unwrap_or(p).display().to_string()).collect(),
    };
    let mp = dir.join("manifest.json");
    output::write_json(&mp, &manifest)?;
    files.push(mp);
    Ok(files)
}
