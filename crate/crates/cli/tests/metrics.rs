use nalgebra::DMatrix;

use posdesign::arrays::BeamKind;
use posdesign::codebook::CodebookKind;
use posdesign::{C64, UlaConfig};
use posdesign_cli::analysis;
use posdesign_cli::experiments::Setup;
use posdesign_cli::metrics::{covariance_pattern, relative_los_illumination};
use posdesign_cli::Preset;

fn setup() -> Setup {
    Setup::new(&Preset::Table1Scen1.scenario().desk_scaled(), 7).unwrap()
}

/// Covariance of the sum beams whose pointing angle lies in the interval of `path`.
fn sum_beams_of_path(s: &Setup, path: usize) -> DMatrix<C64> {
    let iv = s.intervals.iter().find(|iv| iv.path == path).unwrap();
    let cb = s.codebook(CodebookKind::SumOnly).unwrap();
    let n = s.arrays.tx.num_elements;
    let mut x = DMatrix::zeros(n, n);
    for b in cb.beams.iter().filter(|b| b.kind == BeamKind::Sum && iv.beam_angles.contains(&b.pointing_angle)) {
        x += &b.weights * b.weights.adjoint();
    }
    x
}

/// Midpoint-rule oracle on a fine grid.
fn midpoint(x: &DMatrix<C64>, lo: f64, hi: f64, ula: &UlaConfig) -> f64 {
    let n = 20_000;
    let h = (hi - lo) / n as f64;
    (0..n).map(|i| covariance_pattern(x, lo + h * (i as f64 + 0.5), ula).unwrap()).sum::<f64>() * h
}

#[test]
fn los_only_precoder_illuminates_the_los_interval() {
    let s = setup();
    let los = s.intervals.iter().find(|iv| iv.path == 0).unwrap();
    let nlos = s.intervals.iter().find(|iv| iv.path == 1).unwrap();
    assert!(los.upper < nlos.lower || nlos.upper < los.lower, "intervals overlap");
    let x = sum_beams_of_path(&s, 0);
    let r = relative_los_illumination(&x, &s.intervals, &s.arrays.tx).unwrap();
    assert!(r > 0.95, "{r}");
    let num = midpoint(&x, los.lower, los.upper, &s.arrays.tx);
    let den = num + midpoint(&x, nlos.lower, nlos.upper, &s.arrays.tx);
    assert!((r - num / den).abs() < 1e-5, "{r} vs {}", num / den);
}

#[test]
fn nlos_only_precoder_barely_illuminates_the_los_interval() {
    let s = setup();
    let x = sum_beams_of_path(&s, 1);
    let r = relative_los_illumination(&x, &s.intervals, &s.arrays.tx).unwrap();
    assert!(r < 0.05, "{r}");
}

#[test]
fn illumination_is_scale_invariant() {
    let s = setup();
    let x = s.codebook(CodebookKind::Digital).unwrap().covariance();
    let a = relative_los_illumination(&x, &s.intervals, &s.arrays.tx).unwrap();
    let b = relative_los_illumination(&(&x * C64::new(4.0, 0.0)), &s.intervals, &s.arrays.tx).unwrap();
    assert!((a - b).abs() < 1e-12);
    assert!((0.0..=1.0).contains(&a));
}

#[test]
fn zero_precoder_is_undefined() {
    let s = setup();
    let n = s.arrays.tx.num_elements;
    assert!(relative_los_illumination(&DMatrix::zeros(n, n), &s.intervals, &s.arrays.tx).unwrap().is_nan());
}

#[test]
fn middle_decade_slope_of_a_known_curve() {
    // PEB ≈ max(plateau, σ) with saturation: unit slope in between
    let curve: Vec<(f64, f64)> = (0..13)
        .map(|i| 10f64.powf(-3.0 + 0.5 * i as f64))
        .map(|s| (s, (0.01f64.powi(2) + s * s).sqrt().min(0.35)))
        .collect();
    let slope = analysis::middle_decade_slope(&curve).unwrap();
    assert!((0.8..=1.2).contains(&slope), "{slope}");
    let flat: Vec<(f64, f64)> = curve.iter().map(|&(s, _)| (s, 1.0)).collect();
    assert!(analysis::middle_decade_slope(&flat).is_none());
}
