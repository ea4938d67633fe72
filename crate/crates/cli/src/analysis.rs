//! Regime detection on PEB-versus-σ_clk curves.

/// Value at the smallest sweep point.
pub fn plateau(curve: &[(f64, f64)]) -> Option<f64> {
    curve.first().map(|p| p.1)
}

/// Relative change between the last two sweep points.
pub fn saturation_change(curve: &[(f64, f64)]) -> Option<f64> {
    match curve {
        [.., (_, a), (_, b)] => Some((b - a).abs() / a.abs().max(b.abs())),
        _ => None,
    }
}

/// Largest relative deviation among `values` from their maximum.
pub fn relative_spread(values: &[f64]) -> f64 {
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    (hi - lo) / hi
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let pts: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.log10(), y.log10())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Abscissa (log-interpolated) where the curve crosses the geometric mean
/// of its first and last values.
pub fn transition_center(curve: &[(f64, f64)]) -> Option<f64> {
    let (first, last) = (curve.first()?.1, curve.last()?.1);
    if !(first > 0.0 && last.is_finite() && last > first) {
        return None;
    }
    let target = (first * last).sqrt().log10();
    curve.windows(2).find_map(|w| {
        let (x0, y0) = (w[0].0.log10(), w[0].1.log10());
        let (x1, y1) = (w[1].0.log10(), w[1].1.log10());
        ((y0 - target) * (y1 - target) <= 0.0 && y1 != y0).then(|| 10f64.powf(x0 + (target - y0) * (x1 - x0) / (y1 - y0)))
    })
}

/// Log-log slope over the decade of σ centred on the transition: the fit
/// uses every sweep point within half a decade of [`transition_center`],
/// falling back to the two points bracketing it.
pub fn middle_decade_slope(curve: &[(f64, f64)]) -> Option<f64> {
    let c = transition_center(curve)?.log10();
    let inside: Vec<(f64, f64)> = curve.iter().copied().filter(|p| (p.0.log10() - c).abs() <= 0.5 + 1e-9).collect();
    if inside.len() >= 2 {
        return loglog_slope(&inside);
    }
    let i = curve.iter().position(|p| p.0.log10() >= c)?;
    loglog_slope(&curve[i.saturating_sub(1)..=i.max(1).min(curve.len() - 1)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_slope_is_recovered() {
        let curve: Vec<(f64, f64)> = (0..13).map(|i| 10f64.powf(-3.0 + 0.5 * i as f64)).map(|s| (s, (1.0 + s * s).sqrt().min(30.0))).collect();
        let slope = middle_decade_slope(&curve).unwrap();
        assert!((slope - 1.0).abs() < 0.1, "{slope}");
        assert!(saturation_change(&curve).unwrap() < 1e-12);
    }

    #[test]
    fn spread_is_relative_to_the_largest() {
        assert!((relative_spread(&[1.0, 0.95, 0.99]) - 0.05).abs() < 1e-12);
    }
}
