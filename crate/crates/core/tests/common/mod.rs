#![allow(dead_code)]

use nalgebra::{DMatrix, Vector2};
use posdesign::arrays::{Arrays, UcaConfig, UlaConfig};
use posdesign::fisher::FimModel;
use posdesign::geometry;
use posdesign::{ChannelParams, OfdmConfig, Scenario, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const PER_BEAM_POWER_MW: f64 = 100.0;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn table1(gamma: f64, sigma_clk_m: f64) -> Scenario {
    Scenario {
        bs_position: Vector2::new(0.0, 0.0),
        ue_position: Vector2::new(25.0, 10.0),
        incidence_points: vec![Vector2::new(15.0, 25.0)],
        ue_orientation: 0.0,
        clock_bias: 0.0,
        clock_bias_std_m: sigma_clk_m,
        nlos_reflection: vec![gamma],
        gain_phases: geometry::seeded_phases(2, 7),
    }
}

pub fn ofdm(num_subcarriers: usize, num_beams: usize) -> OfdmConfig {
    OfdmConfig {
        num_subcarriers,
        subcarrier_spacing_hz: 120e3,
        symbols_per_beam: 1,
        num_beams,
        carrier_hz: 28e9,
        total_power_mw: num_beams as f64 * PER_BEAM_POWER_MW,
        noise_psd_dbm_hz: -174.0,
        noise_figure_db: 8.0,
    }
}

pub fn arrays(n_tx: usize, n_rx: usize, cfg: &OfdmConfig) -> Arrays<f64> {
    Arrays {
        tx: UlaConfig::new(n_tx).unwrap(),
        rx: UcaConfig::half_wavelength(n_rx, cfg.wavelength()).unwrap(),
    }
}

/// Smallest distance between an incidence point and the BS–UE segment.
/// Closer points give an NLOS path that coincides with the LOS path in
/// delay, AoD and AoA.
pub const MIN_PATH_SEPARATION_M: f64 = 1.0;

fn distance_to_segment(p: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Random geometry: BS at the origin, UE and incidence points in the right
/// half plane, random orientation, clock bias, reflections and phases.
/// Incidence points are redrawn until the paths are distinct.
pub fn random_scenario(rng: &mut ChaCha8Rng, num_paths: usize) -> Scenario {
    let ue = Vector2::new(rng.random_range(8.0..40.0), rng.random_range(-20.0..20.0));
    let bs = Vector2::new(0.0, 0.0);
    let incidence = (1..num_paths)
        .map(|_| loop {
            let r = Vector2::new(rng.random_range(5.0..35.0), rng.random_range(-30.0..30.0));
            if distance_to_segment(&r, &bs, &ue) >= MIN_PATH_SEPARATION_M {
                break r;
            }
        })
        .collect();
    Scenario {
        bs_position: bs,
        ue_position: ue,
        incidence_points: incidence,
        ue_orientation: rng.random_range(-3.0..3.0),
        clock_bias: rng.random_range(0.0..50e-9),
        clock_bias_std_m: rng.random_range(0.1..10.0),
        nlos_reflection: (1..num_paths).map(|_| rng.random_range(0.2..1.0)).collect(),
        gain_phases: (0..num_paths).map(|_| rng.random_range(-3.1..3.1)).collect(),
    }
}

pub fn random_covariance(rng: &mut ChaCha8Rng, n: usize, trace: f64) -> DMatrix<C64> {
    let a = DMatrix::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let x = &a * a.adjoint();
    let t = x.trace().re;
    x * C64::new(trace / t, 0.0)
}

/// Explicit sum over subcarriers, symbols and beams of
/// `(2/σ²) Re{∂ȳᴴ/∂η_i ∂ȳ/∂η_j}` with `ȳ = Wᴴ H_k f_m s_{k,ℓ}` and random
/// QPSK pilots.
pub fn brute_force_fim(
    f: &DMatrix<C64>,
    symbols_per_beam: usize,
    params: &ChannelParams,
    arrays: &Arrays<f64>,
    cfg: &OfdmConfig,
    w: &DMatrix<C64>,
    seed: u64,
) -> DMatrix<f64> {
    let mut r = rng(seed);
    let p = 5 * params.num_paths();
    let mut j = DMatrix::zeros(p, p);
    let qpsk = [C64::new(1.0, 1.0), C64::new(1.0, -1.0), C64::new(-1.0, 1.0), C64::new(-1.0, -1.0)];
    for k in 0..cfg.num_subcarriers {
        let d = geometry::channel_derivatives(k, params, arrays, cfg).unwrap();
        for _l in 0..symbols_per_beam {
            let s = qpsk[r.random_range(0..4)] / C64::new(2f64.sqrt(), 0.0);
            for m in 0..f.ncols() {
                let fm = f.column(m);
                let dy: Vec<_> = d.iter().map(|h| w.adjoint() * h * fm * s).collect();
                for a in 0..p {
                    for b in 0..p {
                        j[(a, b)] += dy[a].dotc(&dy[b]).re;
                    }
                }
            }
        }
    }
    j * (2.0 / cfg.noise_variance())
}

/// PEB through an explicit inverse of the full matrix.
pub fn peb_full_inverse(j: &DMatrix<f64>) -> f64 {
    let inv = j.clone().try_inverse().unwrap();
    (inv[(0, 0)] + inv[(1, 1)]).sqrt()
}

/// PEB through the Schur complement of the nuisance block.
pub fn peb_schur(j: &DMatrix<f64>) -> f64 {
    let n = j.nrows();
    let a = j.view((0, 0), (2, 2)).into_owned();
    let b = j.view((0, 2), (2, n - 2)).into_owned();
    let c = j.view((2, 2), (n - 2, n - 2)).into_owned();
    let schur = a - &b * c.try_inverse().unwrap() * b.transpose();
    schur.try_inverse().unwrap().trace().sqrt()
}

/// Exhaustive search of the PEB over `2×2` Hermitian PSD `X` of trace
/// `budget`, parameterised as `[[a, b+ic], [b−ic, 1−a]]·budget`.
/// A coarse grid is refined around the best cell until the step is below
/// `resolution`.
pub fn grid_search_2x2(model: &FimModel, budget: f64, resolution: f64) -> f64 {
    let eval = |a: f64, rho: f64, phi: f64| -> f64 {
        if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&rho) {
            return f64::INFINITY;
        }
        let r = rho * (a * (1.0 - a)).max(0.0).sqrt();
        let (b, c) = (r * phi.cos(), r * phi.sin());
        let x = DMatrix::from_row_slice(2, 2, &[C64::new(a, 0.0), C64::new(b, c), C64::new(b, -c), C64::new(1.0 - a, 0.0)])
            * C64::new(budget, 0.0);
        model.peb(&x).value
    };
    let two_pi = std::f64::consts::TAU;
    let (mut best, mut ba, mut brho, mut bphi) = (f64::INFINITY, 0.5, 0.0, 0.0);
    let (na, nr, np) = (101, 41, 72);
    for ia in 0..na {
        let a = ia as f64 / (na - 1) as f64;
        for ir in 0..nr {
            let rho = ir as f64 / (nr - 1) as f64;
            for ip in 0..np {
                let phi = two_pi * ip as f64 / np as f64;
                let v = eval(a, rho, phi);
                if v < best {
                    (best, ba, brho, bphi) = (v, a, rho, phi);
                }
            }
        }
    }
    let (mut sa, mut sr, mut sp) = (1.0 / (na - 1) as f64, 1.0 / (nr - 1) as f64, two_pi / np as f64);
    while sa.max(sr).max(sp) > resolution {
        let (ca, cr, cp) = (ba, brho, bphi);
        for ia in -4..=4 {
            for ir in -4..=4 {
                for ip in -4..=4 {
                    let a = ca + sa * ia as f64 / 4.0;
                    let rho = (cr + sr * ir as f64 / 4.0).clamp(0.0, 1.0);
                    let phi = cp + sp * ip as f64 / 4.0;
                    let v = eval(a, rho, phi);
                    if v < best {
                        (best, ba, brho, bphi) = (v, a, rho, phi);
                    }
                }
            }
        }
        sa /= 2.0;
        sr /= 2.0;
        sp /= 2.0;
    }
    best
}
