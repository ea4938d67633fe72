mod common;

use common::*;
use nalgebra::DMatrix;
use posdesign::arrays::{self, UcaConfig, UlaConfig};
use posdesign::fisher::{ClockPrior, FimModel};
use posdesign::{geometry, C64};
use proptest::prelude::*;

fn config() -> ProptestConfig {
    ProptestConfig { cases: 48, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn steering_vectors_have_unit_modulus_entries(theta in -1.5f64..1.5, phi in -3.1f64..3.1, n in 2usize..40, m in 1usize..16) {
        let ula = UlaConfig::new(n).unwrap();
        let a = arrays::ula_steering(theta, &ula).unwrap();
        prop_assert!((a.norm_squared() - n as f64).abs() < 1e-9 * n as f64);
        let lambda = 0.0107;
        let uca = UcaConfig::half_wavelength(m, lambda).unwrap();
        let b = arrays::uca_steering(phi, &uca, lambda).unwrap();
        prop_assert!((b.norm_squared() - m as f64).abs() < 1e-9 * m as f64);
    }

    #[test]
    fn sum_and_difference_beams_are_orthogonal(theta in -1.5f64..1.5, n in 2usize..64) {
        let ula = UlaConfig::new(n).unwrap();
        let a = arrays::ula_steering(theta, &ula).unwrap();
        let d = arrays::ula_derivative(theta, &ula).unwrap();
        prop_assert!(a.dotc(&d).norm() < 1e-9 * (a.norm() * d.norm()).max(1.0));
    }

    #[test]
    fn fim_is_linear_in_covariance(seed in 0u64..1000, a in 0.0f64..3.0, b in 0.0f64..3.0) {
        let mut r = rng(seed);
        let cfg = ofdm(8, 4);
        let arr = arrays(8, 4, &cfg);
        let scn = random_scenario(&mut r, 2);
        let model = FimModel::from_scenario(&scn, &arr, &cfg, ClockPrior::none()).unwrap();
        let x1 = random_covariance(&mut r, 8, 1.0);
        let x2 = random_covariance(&mut r, 8, 1.0);
        let lhs = model.channel_fim(&(&x1 * C64::new(a, 0.0) + &x2 * C64::new(b, 0.0)));
        let rhs = model.channel_fim(&x1) * a + model.channel_fim(&x2) * b;
        prop_assert!((&lhs - &rhs).amax() <= 1e-10 * rhs.amax().max(1e-300));
    }

    #[test]
    fn peb_is_loewner_monotone(seed in 0u64..1000, extra in 0.01f64..2.0) {
        let mut r = rng(seed);
        let cfg = ofdm(8, 4);
        let arr = arrays(8, 4, &cfg);
        let scn = random_scenario(&mut r, 2);
        let prior = ClockPrior::from_std_m(scn.clock_bias_std_m).unwrap();
        let model = FimModel::from_scenario(&scn, &arr, &cfg, prior).unwrap();
        let x1 = random_covariance(&mut r, 8, cfg.trace_budget());
        let x2 = &x1 + random_covariance(&mut r, 8, extra * cfg.trace_budget());
        let (p1, p2) = (model.peb(&x1).value, model.peb(&x2).value);
        prop_assert!(p2 <= p1 * (1.0 + 1e-9), "{} > {}", p2, p1);
    }

    #[test]
    fn peb_is_monotone_in_prior(seed in 0u64..1000, s1 in 0.01f64..100.0, ratio in 1.0f64..100.0) {
        let mut r = rng(seed);
        let cfg = ofdm(8, 4);
        let arr = arrays(8, 4, &cfg);
        let scn = random_scenario(&mut r, 2);
        let x = random_covariance(&mut r, 8, cfg.trace_budget());
        let tight = FimModel::from_scenario(&scn, &arr, &cfg, ClockPrior::from_std_m(s1).unwrap()).unwrap();
        let loose = FimModel::from_scenario(&scn, &arr, &cfg, ClockPrior::from_std_m(s1 * ratio).unwrap()).unwrap();
        let none = FimModel::from_scenario(&scn, &arr, &cfg, ClockPrior::none()).unwrap();
        let (a, b, c) = (tight.peb(&x).value, loose.peb(&x).value, none.peb(&x).value);
        prop_assert!(a <= b * (1.0 + 1e-9));
        prop_assert!(b <= c * (1.0 + 1e-9) || c.is_infinite());
    }

    #[test]
    fn uca_peb_does_not_depend_on_orientation(seed in 0u64..1000) {
        let mut r = rng(seed);
        let cfg = ofdm(8, 4);
        let arr = arrays(8, 16, &cfg);
        let mut scn = random_scenario(&mut r, 2);
        let prior = ClockPrior::from_std_m(scn.clock_bias_std_m).unwrap();
        let x = random_covariance(&mut r, 8, cfg.trace_budget());
        let pebs: Vec<f64> = (0..8)
            .map(|i| {
                scn.ue_orientation = std::f64::consts::TAU * i as f64 / 8.0;
                FimModel::from_scenario(&scn, &arr, &cfg, prior).unwrap().peb(&x).value
            })
            .collect();
        let lo = pebs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = pebs.iter().copied().fold(0.0, f64::max);
        prop_assert!((hi - lo) / lo < 5e-3, "spread {}", (hi - lo) / lo);
    }

    #[test]
    fn channel_and_position_vectors_round_trip(seed in 0u64..1000, g in 1usize..4) {
        let mut r = rng(seed);
        let cfg = ofdm(8, 4);
        let scn = random_scenario(&mut r, g);
        let (ch, pos) = geometry::params_from_scenario(&scn, &cfg).unwrap();
        prop_assert_eq!(posdesign::ChannelParams::from_flat(&ch.flatten()).unwrap(), ch.clone());
        prop_assert_eq!(posdesign::PositionParams::from_flat(&pos.flatten()).unwrap(), pos.clone());
        let again = geometry::channel_from_position(&pos, &scn.bs_position).unwrap();
        prop_assert!((again.flatten() - ch.flatten()).amax() < 1e-15);
    }
}

#[test]
fn zero_covariance_gives_singular_peb() {
    let cfg = ofdm(8, 4);
    let arr = arrays(8, 4, &cfg);
    let model = FimModel::from_scenario(&table1(0.5, 1.0), &arr, &cfg, ClockPrior::from_std_m(1.0).unwrap()).unwrap();
    let p = model.peb(&DMatrix::zeros(8, 8));
    assert!(p.singular && p.value.is_infinite());
}
