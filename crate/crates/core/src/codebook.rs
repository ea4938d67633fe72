//! Sum/difference beam codebooks over AOD uncertainty intervals, beam power
//! allocation and time sharing.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};

use conic::{Settings, Status};

use crate::arrays::{self, BeamKind};
use crate::design::{self, Parameterization, UncertaintyGrid};
use crate::fisher::{FimModel, Peb};
use crate::{Beam, Error, OfdmConfig, Result, UlaConfig, C64};

/// AOD interval of one path and the beam angles covering it.
#[derive(Debug, Clone, PartialEq)]
pub struct AodInterval {
    pub path: usize,
    /// Smallest grid AOD minus half a beamwidth.
    pub lower: f64,
    /// Largest grid AOD plus half a beamwidth.
    pub upper: f64,
    pub beam_angles: Vec<f64>,
}

impl AodInterval {
    pub fn num_beams(&self) -> usize {
        self.beam_angles.len()
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Beam spacing used for codebooks: the half-power beamwidth at broadside.
pub fn beam_spacing(cfg: &UlaConfig) -> Result<f64> {
    arrays::half_power_beamwidth(0.0, cfg)
}

/// Per-path AOD intervals spanned by `grid`, each covered by beams spaced one
/// beamwidth apart and centred on the interval.
pub fn aod_intervals_from_grid(grid: &UncertaintyGrid, cfg: &UlaConfig) -> Result<Vec<AodInterval>> {
    let first = grid
        .points
        .first()
        .ok_or_else(|| Error::InvalidInput("uncertainty grid is empty".into()))?;
    let g_count = first.channel.num_paths();
    let bw = beam_spacing(cfg)?;
    let mut out = Vec::with_capacity(g_count);
    for g in 0..g_count {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for pt in &grid.points {
            let a = *pt
                .channel
                .aod
                .get(g)
                .ok_or_else(|| Error::DimensionMismatch("grid points differ in path count".into()))?;
            lo = lo.min(a);
            hi = hi.max(a);
        }
        let (lower, upper) = (lo - bw / 2.0, hi + bw / 2.0);
        let count = (((upper - lower) / bw) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let center = 0.5 * (lo + hi);
        let beam_angles = (0..count)
            .map(|i| center + (i as f64 - (count - 1) as f64 / 2.0) * bw)
            .collect();
        out.push(AodInterval { path: g, lower, upper, beam_angles });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CodebookKind {
    /// Sum beams and digital difference beams.
    Digital,
    /// Sum beams and unit-modulus difference beams.
    Analog,
    /// Sum beams only.
    SumOnly,
}

impl CodebookKind {
    pub fn label(self) -> &'static str {
        match self {
            CodebookKind::Digital => "digital",
            CodebookKind::Analog => "analog",
            CodebookKind::SumOnly => "sum",
        }
    }

    /// Number of beams for the given intervals.
    pub fn beam_count(self, intervals: &[AodInterval]) -> usize {
        let n: usize = intervals.iter().map(AodInterval::num_beams).sum();
        match self {
            CodebookKind::SumOnly => n,
            _ => 2 * n,
        }
    }
}

/// Beams with per-beam power weights `ρ` (summing to `M`).
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub kind: CodebookKind,
    /// Columns of `F`, each with `‖f_m‖² = P_tot/(K L M)`.
    pub beams: Vec<Beam>,
    pub power_weights: Vec<f64>,
    pub symbols_per_beam: usize,
}

const ANALOG_ITERS: usize = 500;
const ANALOG_TOL: f64 = 1e-12;

/// Builds the codebook of `kind`; beams are conjugated steering and
/// derivative vectors so that the pattern peaks (sum) or nulls (difference)
/// at each beam angle. `ρ` starts uniform.
pub fn build_codebook(intervals: &[AodInterval], kind: CodebookKind, tx: &UlaConfig, cfg: &OfdmConfig) -> Result<Codebook> {
    cfg.validate()?;
    if intervals.is_empty() || intervals.iter().any(|iv| iv.beam_angles.is_empty()) {
        return Err(Error::InvalidInput("codebook needs at least one beam per interval".into()));
    }
    let angles: Vec<f64> = intervals.iter().flat_map(|iv| iv.beam_angles.iter().copied()).collect();
    let m = kind.beam_count(intervals);
    let norm2 = cfg.total_power_mw / (cfg.num_subcarriers * cfg.symbols_per_beam * m) as f64;
    let scaled = |v: DVector<C64>| {
        let n = v.norm();
        v * C64::new(norm2.sqrt() / n, 0.0)
    };
    let mut beams = Vec::with_capacity(m);
    for &a in &angles {
        beams.push(Beam { weights: scaled(arrays::ula_steering(a, tx)?.conjugate()), kind: BeamKind::Sum, pointing_angle: a });
    }
    if kind != CodebookKind::SumOnly {
        for &a in &angles {
            let d = arrays::ula_derivative(a, tx)?.conjugate();
            let (weights, bk) = match kind {
                CodebookKind::Analog => (arrays::analog_project(&d, ANALOG_ITERS, ANALOG_TOL)?, BeamKind::AnalogDiff),
                _ => (d, BeamKind::Diff),
            };
            beams.push(Beam { weights: scaled(weights), kind: bk, pointing_angle: a });
        }
    }
    Ok(Codebook { kind, beams, power_weights: vec![1.0; m], symbols_per_beam: cfg.symbols_per_beam })
}

impl Codebook {
    pub fn len(&self) -> usize {
        self.beams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beams.is_empty()
    }

    pub fn num_elements(&self) -> usize {
        self.beams.first().map_or(0, |b| b.weights.len())
    }

    /// `F` without power weights.
    pub fn matrix(&self) -> DMatrix<C64> {
        let cols: Vec<_> = self.beams.iter().map(|b| b.weights.clone()).collect();
        DMatrix::from_columns(&cols)
    }

    /// `F diag(√ρ)`.
    pub fn weighted_matrix(&self) -> DMatrix<C64> {
        let cols: Vec<_> = self
            .beams
            .iter()
            .zip(&self.power_weights)
            .map(|(b, &r)| &b.weights * C64::new(r.max(0.0).sqrt(), 0.0))
            .collect();
        DMatrix::from_columns(&cols)
    }

    /// `X = L F diag(ρ) Fᴴ`.
    pub fn covariance(&self) -> DMatrix<C64> {
        self.covariance_with(&self.power_weights, self.symbols_per_beam as f64)
    }

    fn covariance_with(&self, weights: &[f64], scale: f64) -> DMatrix<C64> {
        let n = self.num_elements();
        let mut x = DMatrix::zeros(n, n);
        for (b, &w) in self.beams.iter().zip(weights) {
            if w != 0.0 {
                x += &b.weights * b.weights.adjoint() * C64::new(scale * w, 0.0);
            }
        }
        x
    }

    /// Copy with every beam rescaled to `‖f_m‖² = P_tot/(K L M)` for `cfg`.
    pub fn normalized_for(&self, cfg: &OfdmConfig) -> Self {
        let norm2 = cfg.total_power_mw / (cfg.num_subcarriers * cfg.symbols_per_beam * self.len()) as f64;
        let beams = self
            .beams
            .iter()
            .map(|b| Beam { weights: &b.weights * C64::new((norm2 / b.weights.norm_squared()).sqrt(), 0.0), ..b.clone() })
            .collect();
        Self { beams, symbols_per_beam: cfg.symbols_per_beam, ..self.clone() }
    }

    pub fn with_weights(&self, rho: Vec<f64>) -> Result<Self> {
        if rho.len() != self.len() {
            return Err(Error::DimensionMismatch(format!("{} weights for {} beams", rho.len(), self.len())));
        }
        if rho.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::InvalidInput("power weights must be finite and nonnegative".into()));
        }
        Ok(Self { power_weights: rho, ..self.clone() })
    }

    /// Writes one row per beam: kind, pointing angle, ρ and the weights as
    /// interleaved real/imaginary parts.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let n = self.num_elements();
        let mut header = vec!["kind".to_string(), "pointing_angle_rad".into(), "rho".into()];
        for i in 0..n {
            header.push(format!("w{i}_re"));
            header.push(format!("w{i}_im"));
        }
        w.write_record(&header).map_err(io_err)?;
        for (b, r) in self.beams.iter().zip(&self.power_weights) {
            let mut row = vec![b.kind.label().to_string(), format!("{:?}", b.pointing_angle), format!("{r:?}")];
            for z in b.weights.iter() {
                row.push(format!("{:?}", z.re));
                row.push(format!("{:?}", z.im));
            }
            w.write_record(&row).map_err(io_err)?;
        }
        w.flush().map_err(|e| Error::Io(e.to_string()))
    }

    /// Reads the format of [`Codebook::write_csv`].
    pub fn read_csv<R: Read>(input: R, kind: CodebookKind, symbols_per_beam: usize) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let mut beams = Vec::new();
        let mut rho = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(io_err)?;
            let field = |i: usize| -> Result<f64> {
                rec.get(i)
                    .ok_or_else(|| Error::Io(format!("row {}: missing column {i}", line + 1)))?
                    .parse::<f64>()
                    .map_err(|e| Error::Io(format!("row {}: column {i}: {e}", line + 1)))
            };
            let bk = BeamKind::parse(rec.get(0).unwrap_or(""))
                .ok_or_else(|| Error::Io(format!("row {}: unknown beam kind", line + 1)))?;
            if rec.len() < 5 || (rec.len() - 3) % 2 != 0 {
                return Err(Error::Io(format!("row {}: expected interleaved re/im weights", line + 1)));
            }
            let n = (rec.len() - 3) / 2;
            let mut wv = DVector::zeros(n);
            for i in 0..n {
                wv[i] = C64::new(field(3 + 2 * i)?, field(4 + 2 * i)?);
            }
            beams.push(Beam { weights: wv, kind: bk, pointing_angle: field(1)? });
            rho.push(field(2)?);
        }
        if beams.is_empty() {
            return Err(Error::Io("codebook file has no beams".into()));
        }
        Ok(Self { kind, beams, power_weights: rho, symbols_per_beam })
    }
}

fn io_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Optimal power weights of a codebook.
#[derive(Debug, Clone)]
pub struct PowerAllocation {
    /// Codebook carrying the optimal `ρ` (summing to `M`).
    pub codebook: Codebook,
    pub worst_peb: f64,
    pub pebs: Vec<Peb>,
    pub status: Status,
}

/// Largest PEB of `x` over `models`.
pub fn worst_case_peb(models: &[FimModel], x: &DMatrix<C64>) -> f64 {
    models.iter().map(|m| m.peb(x).value).fold(0.0, f64::max)
}

/// Minimises the worst-case PEB over `models` with respect to the beam
/// powers, keeping `tr X = P_tot/K`.
pub fn optimize_power(cb: &Codebook, models: &[FimModel], cfg: &OfdmConfig) -> Result<PowerAllocation> {
    if cb.is_empty() {
        return Err(Error::InvalidInput("empty codebook".into()));
    }
    if cb.len() == 1 {
        return Ok(evaluate_allocation(cb.normalized_for(cfg).with_weights(vec![1.0])?, models, Status::Optimal));
    }
    let unit: Vec<DVector<C64>> = cb.beams.iter().map(|b| &b.weights / C64::new(b.weights.norm(), 0.0)).collect();
    let param = Parameterization::Beams { beams: unit };
    let sol = design::solve_worst_case(models, &param, cfg.trace_budget(), &Settings::default())?;
    let m = cb.len() as f64;
    let rho: Vec<f64> = sol.coords.iter().map(|v| (v / cfg.trace_budget() * m).max(0.0)).collect();
    let total: f64 = rho.iter().sum();
    let rho: Vec<f64> = rho.iter().map(|r| r * m / total).collect();
    Ok(evaluate_allocation(cb.normalized_for(cfg).with_weights(rho)?, models, sol.status))
}

fn evaluate_allocation(codebook: Codebook, models: &[FimModel], status: Status) -> PowerAllocation {
    let x = codebook.covariance();
    let pebs: Vec<Peb> = models.iter().map(|md| md.peb(&x)).collect();
    let worst_peb = pebs.iter().map(|p| p.value).fold(0.0, f64::max);
    PowerAllocation { codebook, worst_peb, pebs, status }
}

/// Convenience wrapper building the grid models.
pub fn optimize_power_on_grid(
    cb: &Codebook,
    grid: &UncertaintyGrid,
    arrays: &crate::Arrays,
    cfg: &OfdmConfig,
    prior: crate::fisher::ClockPrior,
) -> Result<PowerAllocation> {
    optimize_power(cb, &grid.models(arrays, cfg, prior, &[])?, cfg)
}

/// Time sharing factors and the resulting PEBs.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSharing {
    pub factors: Vec<u64>,
    pub symbols_per_beam: usize,
    pub max_power_mw: f64,
    /// Worst-case PEB with continuous power allocation.
    pub peb_allocated: f64,
    /// Worst-case PEB with the quantised factors.
    pub peb_shared: f64,
    /// All factors rounded to zero and the strongest beam was forced to one.
    pub degenerate: bool,
}

impl TimeSharing {
    pub fn relative_gap(&self) -> f64 {
        (self.peb_shared - self.peb_allocated).abs() / self.peb_allocated
    }
}

fn round_half_away(x: f64) -> u64 {
    x.round().max(0.0) as u64
}

/// Time sharing factors `L_m = round(L ρ_m)` for given weights, evaluated
/// with every beam at power `P_max` per symbol.
pub fn time_share_with_weights(
    cb: &Codebook,
    rho: &[f64],
    models: &[FimModel],
    cfg: &OfdmConfig,
    symbols_per_beam: usize,
    max_power_mw: f64,
) -> Result<TimeSharing> {
    if symbols_per_beam == 0 || !(max_power_mw > 0.0) {
        return Err(Error::InvalidInput("L must be at least 1 and P_max positive".into()));
    }
    if rho.len() != cb.len() {
        return Err(Error::DimensionMismatch(format!("{} weights for {} beams", rho.len(), cb.len())));
    }
    let l = symbols_per_beam as f64;
    let mut factors: Vec<u64> = rho.iter().map(|r| round_half_away(l * r)).collect();
    let degenerate = factors.iter().all(|&f| f == 0);
    if degenerate {
        let (best, _) = rho
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &r)| if r > acc.1 { (i, r) } else { acc });
        factors[best] = 1;
    }
    // every beam at P_max/K per subcarrier and symbol
    let unit: Vec<f64> = cb.beams.iter().map(|b| max_power_mw / cfg.num_subcarriers as f64 / b.weights.norm_squared()).collect();
    let allocated: Vec<f64> = rho.iter().zip(&unit).map(|(r, u)| r * u).collect();
    let shared: Vec<f64> = factors.iter().zip(&unit).map(|(&f, u)| f as f64 * u).collect();
    let x_pa = cb.covariance_with(&allocated, l);
    let x_ts = cb.covariance_with(&shared, 1.0);
    Ok(TimeSharing {
        factors,
        symbols_per_beam,
        max_power_mw,
        peb_allocated: worst_case_peb(models, &x_pa),
        peb_shared: worst_case_peb(models, &x_ts),
        degenerate,
    })
}

/// Power allocation with `P_tot = L M P_max`, then rounding
/// `L ρ_m` to the nearest integer.
pub fn time_share(
    cb: &Codebook,
    models: &[FimModel],
    cfg: &OfdmConfig,
    symbols_per_beam: usize,
    max_power_mw: f64,
) -> Result<TimeSharing> {
    if symbols_per_beam == 0 || !(max_power_mw > 0.0) {
        return Err(Error::InvalidInput("L must be at least 1 and P_max positive".into()));
    }
    let m = cb.len();
    let scaled = OfdmConfig {
        symbols_per_beam,
        total_power_mw: (symbols_per_beam * m) as f64 * max_power_mw,
        ..*cfg
    };
    let pa = optimize_power(cb, models, &scaled)?;
    time_share_with_weights(cb, &pa.codebook.power_weights, models, &scaled, symbols_per_beam, max_power_mw)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_is_half_away_from_zero() {
        assert_eq!(round_half_away(0.5), 1);
        assert_eq!(round_half_away(1.5), 2);
        assert_eq!(round_half_away(2.4999), 2);
        assert_eq!(round_half_away(0.0), 0);
    }

    #[test]
    fn kind_labels_are_distinct() {
        let labels = [CodebookKind::Digital, CodebookKind::Analog, CodebookKind::SumOnly].map(CodebookKind::label);
        assert_eq!(labels, ["digital", "analog", "sum"]);
    }
}
