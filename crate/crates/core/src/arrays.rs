//! Array manifolds, derivative beams and beampatterns.
//!
//! The ULA uses centred element indices `n ∈ {−(N−1)/2, …, (N−1)/2}` so that
//! a steering vector and its angular derivative are exactly orthogonal.

use nalgebra::{Complex, DMatrix, DVector};

use crate::{Error, Real, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UlaConfig<T> {
    pub num_elements: usize,
    /// Spacing in wavelengths.
    pub element_spacing: T,
}

impl<T: Real> UlaConfig<T> {
    pub fn new(num_elements: usize) -> Result<Self> {
        Self::with_spacing(num_elements, T::lit(0.5))
    }

    pub fn with_spacing(num_elements: usize, element_spacing: T) -> Result<Self> {
        if num_elements < 2 {
            return Err(Error::InvalidInput(format!("ULA needs at least 2 elements, got {num_elements}")));
        }
        if !(element_spacing > T::zero()) || !element_spacing.is_finite_value() {
            return Err(Error::InvalidInput("ULA element spacing must be positive".into()));
        }
        Ok(Self { num_elements, element_spacing })
    }

    fn index(&self, n: usize) -> T {
        T::lit(n as f64 - (self.num_elements as f64 - 1.0) / 2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UcaConfig<T> {
    pub num_elements: usize,
    /// Radius in meters.
    pub radius: T,
}

impl<T: Real> UcaConfig<T> {
    pub fn new(num_elements: usize, radius: T) -> Result<Self> {
        if num_elements == 0 {
            return Err(Error::InvalidInput("UCA needs at least one element".into()));
        }
        if !(radius > T::zero()) || !radius.is_finite_value() {
            return Err(Error::InvalidInput("UCA radius must be positive".into()));
        }
        Ok(Self { num_elements, radius })
    }

    /// Radius giving a half-wavelength chord between neighbouring elements.
    pub fn half_wavelength(num_elements: usize, wavelength: T) -> Result<Self> {
        let n = num_elements.max(2);
        let radius = wavelength / (T::lit(4.0) * (T::pi() / T::lit(n as f64)).sin());
        Self::new(num_elements, radius)
    }
}

/// Transmit ULA and receive UCA.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrays<T> {
    pub tx: UlaConfig<T>,
    pub rx: UcaConfig<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BeamKind {
    Sum,
    Diff,
    AnalogDiff,
}

impl BeamKind {
    pub fn label(self) -> &'static str {
        match self {
            BeamKind::Sum => "sum",
            BeamKind::Diff => "diff",
            BeamKind::AnalogDiff => "analog-diff",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sum" => Some(BeamKind::Sum),
            "diff" => Some(BeamKind::Diff),
            "analog-diff" => Some(BeamKind::AnalogDiff),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Beam<T: Real> {
    pub weights: DVector<Complex<T>>,
    pub kind: BeamKind,
    pub pointing_angle: T,
}

fn check_finite<T: Real>(what: &str, x: T) -> Result<()> {
    if x.is_finite_value() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{what} must be finite")))
    }
}

fn cis<T: Real>(phase: T) -> Complex<T> {
    Complex::new(phase.cos(), phase.sin())
}

pub fn ula_steering<T: Real>(theta: T, cfg: &UlaConfig<T>) -> Result<DVector<Complex<T>>> {
    check_finite("theta", theta)?;
    let k = T::two_pi() * cfg.element_spacing * theta.sin();
    Ok(DVector::from_fn(cfg.num_elements, |n, _| cis(k * cfg.index(n))))
}

/// `∂a(θ)/∂θ`.
pub fn ula_derivative<T: Real>(theta: T, cfg: &UlaConfig<T>) -> Result<DVector<Complex<T>>> {
    let a = ula_steering(theta, cfg)?;
    let k = T::two_pi() * cfg.element_spacing * theta.cos();
    Ok(DVector::from_fn(cfg.num_elements, |n, _| {
        a[n] * Complex::new(T::zero(), k * cfg.index(n))
    }))
}

pub fn uca_steering<T: Real>(phi: T, cfg: &UcaConfig<T>, wavelength: T) -> Result<DVector<Complex<T>>> {
    check_finite("phi", phi)?;
    check_finite("wavelength", wavelength)?;
    if !(wavelength > T::zero()) {
        return Err(Error::InvalidInput("wavelength must be positive".into()));
    }
    let kr = T::two_pi() / wavelength * cfg.radius;
    let n = T::lit(cfg.num_elements as f64);
    Ok(DVector::from_fn(cfg.num_elements, |m, _| {
        cis(kr * (phi - T::two_pi() * T::lit(m as f64) / n).cos())
    }))
}

/// `∂a(φ)/∂φ` for the UCA.
pub fn uca_derivative<T: Real>(phi: T, cfg: &UcaConfig<T>, wavelength: T) -> Result<DVector<Complex<T>>> {
    let a = uca_steering(phi, cfg, wavelength)?;
    let kr = T::two_pi() / wavelength * cfg.radius;
    let n = T::lit(cfg.num_elements as f64);
    Ok(DVector::from_fn(cfg.num_elements, |m, _| {
        let s = -(phi - T::two_pi() * T::lit(m as f64) / n).sin();
        a[m] * Complex::new(T::zero(), kr * s)
    }))
}

/// Per-iteration record of [`analog_project_traced`].
#[derive(Debug, Clone)]
pub struct AnalogProjection<T: Real> {
    pub weights: DVector<Complex<T>>,
    /// `min_β ‖t − βw‖²` after initialisation and after every iteration.
    pub objective: Vec<T>,
}

/// Closest constant-modulus vector (entries of modulus `1/√N`) to `target`
/// up to a complex scale.
pub fn analog_project<T: Real>(target: &DVector<Complex<T>>, max_iters: usize, tol: T) -> Result<DVector<Complex<T>>> {
    analog_project_traced(target, max_iters, tol).map(|p| p.weights)
}

pub fn analog_project_traced<T: Real>(
    target: &DVector<Complex<T>>,
    max_iters: usize,
    tol: T,
) -> Result<AnalogProjection<T>> {
    let n = target.len();
    let t_norm2 = target.norm_squared();
    if n == 0 || !(t_norm2 > T::zero()) {
        return Err(Error::InvalidInput("analog projection target must be nonzero".into()));
    }
    if target.iter().any(|z| !z.re.is_finite_value() || !z.im.is_finite_value()) {
        return Err(Error::InvalidInput("analog projection target must be finite".into()));
    }
    let modulus = T::one() / T::lit(n as f64).sqrt();
    let project = |v: &DVector<Complex<T>>| {
        DVector::from_fn(n, |i, _| {
            let z = v[i];
            let r = z.norm_sqr().sqrt();
            if r > T::zero() {
                z * (modulus / r)
            } else {
                Complex::new(modulus, T::zero())
            }
        })
    };
    let objective = |w: &DVector<Complex<T>>| {
        let c = w.dotc(target);
        t_norm2 - c.norm_sqr() / w.norm_squared()
    };

    let mut w = project(target);
    let mut f = objective(&w);
    let mut history = vec![f];
    let mut step = T::one() / t_norm2;
    for _ in 0..max_iters {
        // gradient of −|wᴴt|² with respect to w̄ is −t·(tᴴw)
        let grad_dir = target * target.dotc(&w);
        let mut accepted = None;
        let mut mu = step;
        for _ in 0..30 {
            let cand = project(&(&w + &grad_dir * Complex::new(mu, T::zero())));
            let fc = objective(&cand);
            if fc <= f {
                accepted = Some((cand, fc));
                break;
            }
            mu *= T::lit(0.5);
        }
        let Some((cand, fc)) = accepted else {
            history.push(f);
            break;
        };
        let change = (f - fc).abs();
        w = cand;
        let prev = f;
        f = fc;
        history.push(f);
        step = mu * T::lit(2.0);
        if change <= tol * prev.abs().max(t_norm2 * T::lit(1e-300)) {
            break;
        }
    }
    Ok(AnalogProjection { weights: w, objective: history })
}

/// `‖a_txᵀ(θ) F‖²` on each angle of `theta_grid`.
pub fn beampattern<T: Real>(
    precoder: &DMatrix<Complex<T>>,
    theta_grid: &[T],
    cfg: &UlaConfig<T>,
) -> Result<DVector<T>> {
    if precoder.nrows() != cfg.num_elements {
        return Err(Error::DimensionMismatch(format!(
            "precoder has {} rows, array has {} elements",
            precoder.nrows(),
            cfg.num_elements
        )));
    }
    let mut out = DVector::zeros(theta_grid.len());
    for (i, &theta) in theta_grid.iter().enumerate() {
        let a = ula_steering(theta, cfg)?;
        out[i] = (a.transpose() * precoder).iter().map(|z| z.norm_sqr()).fold(T::zero(), |s, v| s + v);
    }
    Ok(out)
}

/// Normalised array factor `|a(θ)ᴴa(θ')|² / N²`.
fn array_gain<T: Real>(theta: T, other: T, cfg: &UlaConfig<T>) -> T {
    let du = T::two_pi() * cfg.element_spacing * (other.sin() - theta.sin());
    let mut acc = Complex::new(T::zero(), T::zero());
    for n in 0..cfg.num_elements {
        acc += cis(du * cfg.index(n));
    }
    acc.norm_sqr() / T::lit((cfg.num_elements * cfg.num_elements) as f64)
}

/// Main-lobe width at half of the peak of `|a(θ)ᴴa(θ')|²`, measured by
/// bisection on each side of `theta`.
pub fn half_power_beamwidth<T: Real>(theta: T, cfg: &UlaConfig<T>) -> Result<T> {
    check_finite("theta", theta)?;
    if theta.cos() < T::lit(0.05) {
        return Err(Error::Domain(format!("beamwidth undefined near endfire (theta = {})", theta.to_f64())));
    }
    let half = T::lit(0.5);
    let probe = T::lit(0.05) / T::lit(cfg.num_elements as f64) / (cfg.element_spacing * T::lit(2.0));
    let edge = |dir: T| -> Result<T> {
        let mut inner = T::zero();
        let mut outer = probe;
        loop {
            let cand = theta + dir * outer;
            if cand.abs() >= T::frac_pi_2() {
                return Err(Error::Domain("main lobe reaches endfire".into()));
            }
            if array_gain(theta, cand, cfg) < half {
                break;
            }
            inner = outer;
            outer += probe;
        }
        for _ in 0..100 {
            let mid = (inner + outer) * half;
            if array_gain(theta, theta + dir * mid, cfg) >= half {
                inner = mid;
            } else {
                outer = mid;
            }
        }
        Ok((inner + outer) * half)
    };
    Ok(edge(T::one())? + edge(-T::one())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn boresight_steering_is_all_ones() {
        let cfg = UlaConfig::<f64>::new(8).unwrap();
        let a = ula_steering(0.0, &cfg).unwrap();
        for z in a.iter() {
            assert_relative_eq!(z.re, 1.0);
            assert_relative_eq!(z.im, 0.0);
        }
    }

    #[test]
    fn endfire_two_element_steering() {
        let cfg = UlaConfig::<f64>::new(2).unwrap();
        let a = ula_steering(std::f64::consts::FRAC_PI_2, &cfg).unwrap();
        assert_relative_eq!(a[0].re, 0.0, epsilon = 1e-15);
        assert_relative_eq!(a[0].im, -1.0, epsilon = 1e-15);
        assert_relative_eq!(a[1].im, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn three_element_derivative_at_boresight() {
        let cfg = UlaConfig::<f64>::new(3).unwrap();
        let d = ula_derivative(0.0, &cfg).unwrap();
        let pi = std::f64::consts::PI;
        assert_relative_eq!(d[0].im, -pi, epsilon = 1e-14);
        assert_relative_eq!(d[1].norm(), 0.0, epsilon = 1e-14);
        assert_relative_eq!(d[2].im, pi, epsilon = 1e-14);
        assert_relative_eq!(d[0].re, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn derivative_vanishes_at_endfire() {
        let cfg = UlaConfig::<f64>::new(7).unwrap();
        let d = ula_derivative(std::f64::consts::FRAC_PI_2, &cfg).unwrap();
        assert!(d.norm() < 1e-12);
    }

    #[test]
    fn non_finite_angle_is_rejected() {
        let cfg = UlaConfig::<f64>::new(4).unwrap();
        assert!(matches!(ula_steering(f64::NAN, &cfg), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn single_element_uca_has_unit_modulus() {
        let cfg = UcaConfig::new(1, 0.01).unwrap();
        let a = uca_steering(0.7, &cfg, 0.0107).unwrap();
        assert_eq!(a.len(), 1);
        assert_relative_eq!(a[0].norm(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn beamwidth_at_boresight_matches_rule_of_thumb() {
        let cfg = UlaConfig::<f64>::new(32).unwrap();
        let bw = half_power_beamwidth(0.0, &cfg).unwrap();
        assert_relative_eq!(bw, 0.0554, max_relative = 0.01);
        let approx = 0.886 / (32.0 * 0.5);
        assert_relative_eq!(bw, approx, max_relative = 0.05);
    }

    #[test]
    fn beamwidth_near_endfire_is_a_domain_error() {
        let cfg = UlaConfig::<f64>::new(32).unwrap();
        assert!(matches!(half_power_beamwidth(1.55, &cfg), Err(Error::Domain(_))));
    }

    #[test]
    fn generic_over_f32() {
        let cfg = UlaConfig::<f32>::new(16).unwrap();
        let a = ula_steering(0.3f32, &cfg).unwrap();
        assert!((a.norm_squared() - 16.0).abs() < 1e-4);
    }
}
