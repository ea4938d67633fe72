use nalgebra::DMatrix;

use posdesign::arrays::ula_steering;
use posdesign::codebook::AodInterval;
use posdesign::{UlaConfig, C64};

use crate::CliError;

/// Trapezoid nodes per integration interval.
pub const ILLUMINATION_NODES: usize = 1000;

/// Angular pattern `Re(aᵀ(θ) X ā(θ))` of a precoder covariance.
pub fn covariance_pattern(x: &DMatrix<C64>, theta: f64, ula: &UlaConfig) -> Result<f64, CliError> {
    let a = ula_steering(theta, ula)?;
    Ok((a.transpose() * x * a.map(|z| z.conj()))[(0, 0)].re)
}

fn integrate(x: &DMatrix<C64>, lower: f64, upper: f64, ula: &UlaConfig) -> Result<f64, CliError> {
    if upper <= lower {
        return Ok(0.0);
    }
    let n = ILLUMINATION_NODES;
    let h = (upper - lower) / (n - 1) as f64;
    let mut acc = 0.0;
    for i in 0..n {
        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        acc += w * covariance_pattern(x, lower + h * i as f64, ula)?;
    }
    Ok(acc * h)
}

/// Disjoint cover of the given closed intervals.
fn merge(mut spans: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    spans.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (lo, hi) in spans {
        match out.last_mut() {
            Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
            _ => out.push((lo, hi)),
        }
    }
    out
}

/// Power radiated into the LOS AOD interval relative to the power radiated
/// into the union of all path intervals. NaN when nothing is radiated there.
pub fn relative_los_illumination(x: &DMatrix<C64>, intervals: &[AodInterval], ula: &UlaConfig) -> Result<f64, CliError> {
    let los = intervals
        .iter()
        .find(|iv| iv.path == 0)
        .ok_or_else(|| CliError::Config("no LOS interval".into()))?;
    let num = integrate(x, los.lower, los.upper, ula)?;
    let mut den = 0.0;
    for (lo, hi) in merge(intervals.iter().map(|iv| (iv.lower, iv.upper)).collect()) {
        den += integrate(x, lo, hi, ula)?;
    }
    if !(den > 0.0) {
        return Ok(f64::NAN);
    }
    Ok((num / den).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merging_joins_overlaps_only() {
        assert_eq!(merge(vec![(0.3, 0.5), (0.0, 0.1), (0.05, 0.2)]), vec![(0.0, 0.2), (0.3, 0.5)]);
    }
}
