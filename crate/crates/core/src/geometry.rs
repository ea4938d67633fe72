//! Scenario geometry, per-path channel parameters and the OFDM channel.

use nalgebra::{Complex, DMatrix, DVector, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::arrays::{self, Arrays};
use crate::{Error, Real, Result, SPEED_OF_LIGHT};

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario<T: Real> {
    /// BS position `q` in meters.
    pub bs_position: Vector2<T>,
    /// UE position `p` in meters.
    pub ue_position: Vector2<T>,
    /// Incidence points `r_g`, one per NLOS path.
    pub incidence_points: Vec<Vector2<T>>,
    /// UE orientation `ψ` in radians.
    pub ue_orientation: T,
    /// Clock bias `Δt` in seconds.
    pub clock_bias: T,
    /// Clock-bias prior standard deviation in meters.
    pub clock_bias_std_m: T,
    /// Reflection coefficient `γ_g` of each NLOS path.
    pub nlos_reflection: Vec<T>,
    /// Gain phases in radians, one per path (LOS first).
    pub gain_phases: Vec<T>,
}

impl<T: Real> Scenario<T> {
    pub fn num_paths(&self) -> usize {
        1 + self.incidence_points.len()
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.num_paths();
        if self.nlos_reflection.len() != g - 1 {
            return Err(Error::InvalidInput(format!(
                "{} reflection coefficients for {} NLOS paths",
                self.nlos_reflection.len(),
                g - 1
            )));
        }
        if self.gain_phases.len() != g {
            return Err(Error::InvalidInput(format!("{} gain phases for {g} paths", self.gain_phases.len())));
        }
        if self.nlos_reflection.iter().any(|&v| !(v >= T::zero())) {
            return Err(Error::InvalidInput("reflection coefficients must be nonnegative".into()));
        }
        if !(self.clock_bias_std_m >= T::zero()) {
            return Err(Error::InvalidInput("clock-bias standard deviation must be nonnegative".into()));
        }
        let q = self.bs_position;
        let p = self.ue_position;
        if (p - q).norm() <= T::zero() {
            return Err(Error::DegenerateGeometry("UE coincides with BS".into()));
        }
        for (i, r) in self.incidence_points.iter().enumerate() {
            if (r - q).norm() <= T::zero() || (r - p).norm() <= T::zero() {
                return Err(Error::DegenerateGeometry(format!("incidence point {i} coincides with BS or UE")));
            }
        }
        Ok(())
    }
}

/// Uniform gain phases in `[−π, π)` from a seeded generator.
pub fn seeded_phases(num_paths: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..num_paths)
        .map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OfdmConfig<T> {
    pub num_subcarriers: usize,
    pub subcarrier_spacing_hz: T,
    pub symbols_per_beam: usize,
    pub num_beams: usize,
    pub carrier_hz: T,
    pub total_power_mw: T,
    pub noise_psd_dbm_hz: T,
    pub noise_figure_db: T,
}

impl<T: Real> OfdmConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.num_subcarriers == 0 || self.symbols_per_beam == 0 || self.num_beams == 0 {
            return Err(Error::InvalidInput("K, L and M must be at least 1".into()));
        }
        if !(self.subcarrier_spacing_hz > T::zero()) || !(self.carrier_hz > T::zero()) {
            return Err(Error::InvalidInput("subcarrier spacing and carrier must be positive".into()));
        }
        if !(self.total_power_mw > T::zero()) {
            return Err(Error::InvalidInput("total power must be positive".into()));
        }
        Ok(())
    }

    pub fn wavelength(&self) -> T {
        T::lit(SPEED_OF_LIGHT) / self.carrier_hz
    }

    /// `σ² = 10^{0.1(F + N0)} K Δf` in mW.
    pub fn noise_variance(&self) -> T {
        T::lit(10.0).powf(T::lit(0.1) * (self.noise_figure_db + self.noise_psd_dbm_hz))
            * T::lit(self.num_subcarriers as f64)
            * self.subcarrier_spacing_hz
    }

    /// Trace budget `P_tot / K` of the precoder covariance.
    pub fn trace_budget(&self) -> T {
        self.total_power_mw / T::lit(self.num_subcarriers as f64)
    }
}

/// Channel-domain parameters `η = [θ; φ; αR; αI; τ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams<T: Real> {
    pub aod: Vec<T>,
    pub aoa: Vec<T>,
    pub gain: Vec<Complex<T>>,
    pub delay: Vec<T>,
}

impl<T: Real> ChannelParams<T> {
    pub fn num_paths(&self) -> usize {
        self.aod.len()
    }

    pub fn flatten(&self) -> DVector<T> {
        let g = self.num_paths();
        let mut v = DVector::zeros(5 * g);
        for i in 0..g {
            v[i] = self.aod[i];
            v[g + i] = self.aoa[i];
            v[2 * g + i] = self.gain[i].re;
            v[3 * g + i] = self.gain[i].im;
            v[4 * g + i] = self.delay[i];
        }
        v
    }

    pub fn from_flat(v: &DVector<T>) -> Result<Self> {
        if v.is_empty() || !v.len().is_multiple_of(5) {
            return Err(Error::DimensionMismatch(format!("channel vector length {} is not 5G", v.len())));
        }
        let g = v.len() / 5;
        Ok(Self {
            aod: (0..g).map(|i| v[i]).collect(),
            aoa: (0..g).map(|i| v[g + i]).collect(),
            gain: (0..g).map(|i| Complex::new(v[2 * g + i], v[3 * g + i])).collect(),
            delay: (0..g).map(|i| v[4 * g + i]).collect(),
        })
    }
}

/// Position-domain parameters `η̃ = [p, ψ, r, αR, αI, Δt]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionParams<T: Real> {
    pub ue_position: Vector2<T>,
    pub ue_orientation: T,
    pub incidence_points: Vec<Vector2<T>>,
    pub gain: Vec<Complex<T>>,
    pub clock_bias: T,
}

impl<T: Real> PositionParams<T> {
    pub fn num_paths(&self) -> usize {
        self.gain.len()
    }

    pub fn flatten(&self) -> DVector<T> {
        let g = self.num_paths();
        let mut v = DVector::zeros(4 * g + 2);
        v[0] = self.ue_position.x;
        v[1] = self.ue_position.y;
        v[2] = self.ue_orientation;
        for (i, r) in self.incidence_points.iter().enumerate() {
            v[3 + 2 * i] = r.x;
            v[4 + 2 * i] = r.y;
        }
        let base = 3 + 2 * (g - 1);
        for i in 0..g {
            v[base + i] = self.gain[i].re;
            v[base + g + i] = self.gain[i].im;
        }
        v[4 * g + 1] = self.clock_bias;
        v
    }

    pub fn from_flat(v: &DVector<T>) -> Result<Self> {
        if v.len() < 6 || !(v.len() - 2).is_multiple_of(4) {
            return Err(Error::DimensionMismatch(format!("position vector length {} is not 4G+2", v.len())));
        }
        let g = (v.len() - 2) / 4;
        let base = 3 + 2 * (g - 1);
        Ok(Self {
            ue_position: Vector2::new(v[0], v[1]),
            ue_orientation: v[2],
            incidence_points: (0..g - 1).map(|i| Vector2::new(v[3 + 2 * i], v[4 + 2 * i])).collect(),
            gain: (0..g).map(|i| Complex::new(v[base + i], v[base + g + i])).collect(),
            clock_bias: v[4 * g + 1],
        })
    }
}

/// Wraps an angle to `(−π, π]`.
pub fn wrap_angle<T: Real>(x: T) -> T {
    let two_pi = T::two_pi();
    let y = x - two_pi * ((x - T::pi()) / two_pi).ceil();
    if y <= -T::pi() {
        y + two_pi
    } else {
        y
    }
}

fn atan2v<T: Real>(d: &Vector2<T>) -> T {
    d.y.atan2(d.x)
}

fn check_distinct<T: Real>(a: &Vector2<T>, b: &Vector2<T>, what: &str) -> Result<()> {
    if (a - b).norm() > T::zero() {
        Ok(())
    } else {
        Err(Error::DegenerateGeometry(format!("{what} coincide")))
    }
}

/// AODs and AOAs of every path (LOS first).
pub fn path_angles<T: Real>(scn: &Scenario<T>) -> Result<(Vec<T>, Vec<T>)> {
    let q = scn.bs_position;
    let p = scn.ue_position;
    check_distinct(&p, &q, "UE and BS")?;
    let theta0 = atan2v(&(p - q));
    let mut theta = vec![wrap_angle(theta0)];
    let mut phi = vec![wrap_angle(theta0 - scn.ue_orientation)];
    for r in &scn.incidence_points {
        check_distinct(r, &q, "incidence point and BS")?;
        check_distinct(r, &p, "incidence point and UE")?;
        theta.push(wrap_angle(atan2v(&(r - q))));
        phi.push(wrap_angle(atan2v(&(p - r)) - scn.ue_orientation));
    }
    Ok((theta, phi))
}

fn path_lengths<T: Real>(q: &Vector2<T>, p: &Vector2<T>, incidence: &[Vector2<T>]) -> Vec<T> {
    let mut out = vec![(p - q).norm()];
    out.extend(incidence.iter().map(|r| (q - r).norm() + (r - p).norm()));
    out
}

/// Path delays in seconds, clock bias included.
pub fn path_delays<T: Real>(scn: &Scenario<T>) -> Result<Vec<T>> {
    path_angles(scn)?;
    Ok(unchecked_delays(scn))
}

fn unchecked_delays<T: Real>(scn: &Scenario<T>) -> Vec<T> {
    let c = T::lit(SPEED_OF_LIGHT);
    path_lengths(&scn.bs_position, &scn.ue_position, &scn.incidence_points)
        .into_iter()
        .map(|d| d / c + scn.clock_bias)
        .collect()
}

/// Delays without the coincident-point guard.
pub fn path_delays_unchecked<T: Real>(scn: &Scenario<T>) -> Vec<T> {
    unchecked_delays(scn)
}

/// Free-space gains: `|α₀| = c/(4π fc d₀)`, `|α_g| = γ_g c/(4π fc d_g)`.
pub fn path_gains<T: Real>(scn: &Scenario<T>, cfg: &OfdmConfig<T>) -> Result<Vec<Complex<T>>> {
    path_angles(scn)?;
    if !(cfg.carrier_hz > T::zero()) {
        return Err(Error::InvalidInput("carrier frequency must be positive".into()));
    }
    if scn.gain_phases.len() != scn.num_paths() || scn.nlos_reflection.len() + 1 != scn.num_paths() {
        return Err(Error::InvalidInput("gain phases / reflection coefficients do not match the path count".into()));
    }
    let c = T::lit(SPEED_OF_LIGHT);
    let lengths = path_lengths(&scn.bs_position, &scn.ue_position, &scn.incidence_points);
    Ok(lengths
        .iter()
        .enumerate()
        .map(|(g, &d)| {
            let refl = if g == 0 { T::one() } else { scn.nlos_reflection[g - 1] };
            let mag = refl * c / (T::lit(4.0) * T::pi() * cfg.carrier_hz * d);
            let ph = scn.gain_phases[g];
            Complex::new(mag * ph.cos(), mag * ph.sin())
        })
        .collect())
}

pub fn params_from_scenario<T: Real>(
    scn: &Scenario<T>,
    cfg: &OfdmConfig<T>,
) -> Result<(ChannelParams<T>, PositionParams<T>)> {
    scn.validate()?;
    let (aod, aoa) = path_angles(scn)?;
    let delay = path_delays(scn)?;
    let gain = path_gains(scn, cfg)?;
    let pos = PositionParams {
        ue_position: scn.ue_position,
        ue_orientation: scn.ue_orientation,
        incidence_points: scn.incidence_points.clone(),
        gain: gain.clone(),
        clock_bias: scn.clock_bias,
    };
    Ok((ChannelParams { aod, aoa, gain, delay }, pos))
}

/// The map `η̃ ↦ η` for a BS at `bs`.
pub fn channel_from_position<T: Real>(pos: &PositionParams<T>, bs: &Vector2<T>) -> Result<ChannelParams<T>> {
    let scn = Scenario {
        bs_position: *bs,
        ue_position: pos.ue_position,
        incidence_points: pos.incidence_points.clone(),
        ue_orientation: pos.ue_orientation,
        clock_bias: pos.clock_bias,
        clock_bias_std_m: T::zero(),
        nlos_reflection: vec![T::one(); pos.incidence_points.len()],
        gain_phases: vec![T::zero(); pos.num_paths()],
    };
    let (aod, aoa) = path_angles(&scn)?;
    Ok(ChannelParams {
        aod,
        aoa,
        gain: pos.gain.clone(),
        delay: unchecked_delays(&scn),
    })
}

fn delay_phase<T: Real>(k: usize, cfg: &OfdmConfig<T>, tau: T) -> Complex<T> {
    let ph = -T::two_pi() * T::lit(k as f64) * cfg.subcarrier_spacing_hz * tau;
    Complex::new(ph.cos(), ph.sin())
}

fn check_subcarrier<T: Real>(k: usize, cfg: &OfdmConfig<T>) -> Result<()> {
    if k >= cfg.num_subcarriers {
        return Err(Error::DimensionMismatch(format!("subcarrier {k} out of range 0..{}", cfg.num_subcarriers)));
    }
    Ok(())
}

fn check_params<T: Real>(params: &ChannelParams<T>) -> Result<()> {
    let g = params.aod.len();
    if g == 0 || params.aoa.len() != g || params.gain.len() != g || params.delay.len() != g {
        return Err(Error::DimensionMismatch("channel parameter vectors differ in length".into()));
    }
    Ok(())
}

/// `H_k = Σ_g α_g e^{−j2πkΔfτ_g} a_rx(φ_g) a_txᵀ(θ_g)`.
pub fn channel_matrix<T: Real>(
    k: usize,
    params: &ChannelParams<T>,
    arrays: &Arrays<T>,
    cfg: &OfdmConfig<T>,
) -> Result<DMatrix<Complex<T>>> {
    check_subcarrier(k, cfg)?;
    check_params(params)?;
    let lambda = cfg.wavelength();
    let mut h = DMatrix::zeros(arrays.rx.num_elements, arrays.tx.num_elements);
    for g in 0..params.num_paths() {
        let at = arrays::ula_steering(params.aod[g], &arrays.tx)?;
        let ar = arrays::uca_steering(params.aoa[g], &arrays.rx, lambda)?;
        let c = params.gain[g] * delay_phase(k, cfg, params.delay[g]);
        h += (ar * c) * at.transpose();
    }
    Ok(h)
}

/// `∂H_k/∂η_i` for every entry of `η`, in flattening order.
pub fn channel_derivatives<T: Real>(
    k: usize,
    params: &ChannelParams<T>,
    arrays: &Arrays<T>,
    cfg: &OfdmConfig<T>,
) -> Result<Vec<DMatrix<Complex<T>>>> {
    check_subcarrier(k, cfg)?;
    check_params(params)?;
    let g_count = params.num_paths();
    let lambda = cfg.wavelength();
    let zero = DMatrix::zeros(arrays.rx.num_elements, arrays.tx.num_elements);
    let mut out = vec![zero; 5 * g_count];
    let j = Complex::new(T::zero(), T::one());
    for g in 0..g_count {
        let at = arrays::ula_steering(params.aod[g], &arrays.tx)?;
        let dat = arrays::ula_derivative(params.aod[g], &arrays.tx)?;
        let ar = arrays::uca_steering(params.aoa[g], &arrays.rx, lambda)?;
        let dar = arrays::uca_derivative(params.aoa[g], &arrays.rx, lambda)?;
        let e = delay_phase(k, cfg, params.delay[g]);
        let base = &ar * at.transpose();
        out[g] = (&ar * (params.gain[g] * e)) * dat.transpose();
        out[g_count + g] = (dar * (params.gain[g] * e)) * at.transpose();
        out[2 * g_count + g] = &base * e;
        out[3 * g_count + g] = &base * (j * e);
        let dtau = Complex::new(T::zero(), -T::two_pi() * T::lit(k as f64) * cfg.subcarrier_spacing_hz);
        out[4 * g_count + g] = &base * (dtau * params.gain[g] * e);
    }
    Ok(out)
}
