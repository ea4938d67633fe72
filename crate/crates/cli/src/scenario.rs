//! Scenario files: JSON with explicit units in the field names.

use std::path::Path;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use posdesign::arrays::{UcaConfig, UlaConfig};
use posdesign::design::UncertaintyGrid;
use posdesign::{geometry, Arrays, OfdmConfig, Scenario};

use crate::CliError;

/// Subcarrier count used by `--desk-scale`.
pub const DESK_SCALE_SUBCARRIERS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub fc_hz: f64,
    pub subcarrier_spacing_hz: f64,
    pub num_subcarriers: usize,
    pub symbols_per_beam: usize,
    pub n_tx: usize,
    pub n_rx: usize,
    pub n_rf: usize,
    pub bs_position_m: [f64; 2],
    pub ue_position_m: [f64; 2],
    pub incidence_points_m: Vec<[f64; 2]>,
    /// Reflection coefficient of every NLOS path.
    pub nlos_reflection: Vec<f64>,
    pub ue_orientation_rad: f64,
    pub clock_bias_s: f64,
    pub sigma_clk_m: f64,
    pub noise_psd_dbm_hz: f64,
    pub noise_figure_db: f64,
    /// Transmit power per beam and symbol, `P_tot/(LM)`.
    pub per_beam_power_dbm: f64,
    /// Side of the square UE uncertainty box.
    pub ue_uncertainty_m: f64,
    /// Side of the square incidence-point uncertainty box.
    pub incidence_uncertainty_m: f64,
    pub ue_grid_per_axis: usize,
    pub incidence_grid_per_axis: usize,
    /// Gain phases of every path; drawn from the run seed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain_phases_rad: Option<Vec<f64>>,
}

const REQUIRED_FIELDS: &[&str] = &[
    "fc_hz",
    "subcarrier_spacing_hz",
    "num_subcarriers",
    "symbols_per_beam",
    "n_tx",
    "n_rx",
    "n_rf",
    "bs_position_m",
    "ue_position_m",
    "incidence_points_m",
    "nlos_reflection",
    "ue_orientation_rad",
    "clock_bias_s",
    "sigma_clk_m",
    "noise_psd_dbm_hz",
    "noise_figure_db",
    "per_beam_power_dbm",
    "ue_uncertainty_m",
    "incidence_uncertainty_m",
    "ue_grid_per_axis",
    "incidence_grid_per_axis",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    #[value(name = "table1-scen1")]
    Table1Scen1,
    #[value(name = "table1-scen2")]
    Table1Scen2,
}

impl Preset {
    pub fn label(self) -> &'static str {
        match self {
            Preset::Table1Scen1 => "table1-scen1",
            Preset::Table1Scen2 => "table1-scen2",
        }
    }

    pub fn scenario(self) -> ScenarioFile {
        let (inc_extent, inc_per_axis) = match self {
            Preset::Table1Scen1 => (5.0, 3),
            Preset::Table1Scen2 => (0.3, 2),
        };
        ScenarioFile {
            fc_hz: 28e9,
            subcarrier_spacing_hz: 120e3,
            num_subcarriers: 1024,
            symbols_per_beam: 1,
            n_tx: 32,
            n_rx: 16,
            n_rf: 16,
            bs_position_m: [0.0, 0.0],
            ue_position_m: [25.0, 10.0],
            incidence_points_m: vec![[15.0, 25.0]],
            nlos_reflection: vec![0.5],
            ue_orientation_rad: 0.0,
            clock_bias_s: 0.0,
            sigma_clk_m: 15.0,
            noise_psd_dbm_hz: -174.0,
            noise_figure_db: 8.0,
            per_beam_power_dbm: 20.0,
            ue_uncertainty_m: 0.3,
            incidence_uncertainty_m: inc_extent,
            ue_grid_per_axis: 2,
            incidence_grid_per_axis: inc_per_axis,
            gain_phases_rad: None,
        }
    }
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        if text.trim().is_empty() {
            return Err(CliError::Config(format!(
                "scenario file is empty; required fields: {}",
                REQUIRED_FIELDS.join(", ")
            )));
        }
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| CliError::Config(format!("scenario: {e}")))?;
        if let Some(obj) = value.as_object() {
            let missing: Vec<&str> = REQUIRED_FIELDS.iter().copied().filter(|f| !obj.contains_key(*f)).collect();
            if !missing.is_empty() {
                return Err(CliError::Config(format!("scenario is missing required fields: {}", missing.join(", "))));
            }
        }
        let file: Self = serde_json::from_str(text).map_err(|e| CliError::Config(format!("scenario: {e}")))?;
        file.validate()?;
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: &str| Err(CliError::Config(msg.to_string()));
        if self.incidence_points_m.len() != self.nlos_reflection.len() {
            return bad("incidence_points_m and nlos_reflection must have the same length");
        }
        if let Some(p) = &self.gain_phases_rad {
            if p.len() != self.incidence_points_m.len() + 1 {
                return bad("gain_phases_rad needs one phase per path (LOS first)");
            }
        }
        if self.n_rf != self.n_rx {
            return bad("the receive combiner is the identity, so n_rf must equal n_rx");
        }
        if !(self.sigma_clk_m > 0.0) {
            return bad("sigma_clk_m must be positive");
        }
        if self.ue_grid_per_axis == 0 || self.incidence_grid_per_axis == 0 {
            return bad("grid sizes must be at least 1 per axis");
        }
        if self.ue_uncertainty_m < 0.0 || self.incidence_uncertainty_m < 0.0 {
            return bad("uncertainty extents must be nonnegative");
        }
        Ok(())
    }

    /// Copy with `K` reduced to the desk-scale value.
    pub fn desk_scaled(&self) -> Self {
        Self { num_subcarriers: DESK_SCALE_SUBCARRIERS, ..self.clone() }
    }

    pub fn num_paths(&self) -> usize {
        self.incidence_points_m.len() + 1
    }

    pub fn per_beam_power_mw(&self) -> f64 {
        10f64.powf(self.per_beam_power_dbm / 10.0)
    }

    /// Geometry with gain phases from the file or from `seed`.
    pub fn scenario(&self, seed: u64) -> Scenario {
        let v = |p: [f64; 2]| Vector2::new(p[0], p[1]);
        Scenario {
            bs_position: v(self.bs_position_m),
            ue_position: v(self.ue_position_m),
            incidence_points: self.incidence_points_m.iter().copied().map(v).collect(),
            ue_orientation: self.ue_orientation_rad,
            clock_bias: self.clock_bias_s,
            clock_bias_std_m: self.sigma_clk_m,
            nlos_reflection: self.nlos_reflection.clone(),
            gain_phases: self
                .gain_phases_rad
                .clone()
                .unwrap_or_else(|| geometry::seeded_phases(self.num_paths(), seed)),
        }
    }

    /// OFDM configuration for `num_beams` active beams with
    /// `P_tot = L·M·P_beam`.
    pub fn ofdm(&self, num_beams: usize) -> OfdmConfig {
        OfdmConfig {
            num_subcarriers: self.num_subcarriers,
            subcarrier_spacing_hz: self.subcarrier_spacing_hz,
            symbols_per_beam: self.symbols_per_beam,
            num_beams,
            carrier_hz: self.fc_hz,
            total_power_mw: (self.symbols_per_beam * num_beams) as f64 * self.per_beam_power_mw(),
            noise_psd_dbm_hz: self.noise_psd_dbm_hz,
            noise_figure_db: self.noise_figure_db,
        }
    }

    pub fn arrays(&self) -> Result<Arrays, CliError> {
        let wavelength = posdesign::SPEED_OF_LIGHT / self.fc_hz;
        Ok(Arrays { tx: UlaConfig::new(self.n_tx)?, rx: UcaConfig::half_wavelength(self.n_rx, wavelength)? })
    }

    pub fn grid(&self, scn: &Scenario) -> Result<UncertaintyGrid, CliError> {
        Ok(UncertaintyGrid::from_boxes(
            scn,
            &self.ofdm(1),
            self.ue_uncertainty_m,
            self.ue_grid_per_axis,
            self.incidence_uncertainty_m,
            self.incidence_grid_per_axis,
        )?)
    }
}
