//! Property tests over randomized parameters.

use nalgebra::DMatrix;
use proptest::prelude::*;

use lumispec::montecarlo::factor_covariance;
use lumispec::system::{
    build_coupled, build_feedback_coupled, build_feedback_isolated, build_isolated_2l,
    psd_classify, CovarianceClass,
};
use lumispec::{
    kappa0_from_micro, steady_state, transfer_spectrum, xi_from_pump, FactorMode, LaserParams,
    MicroParams,
};

fn rate() -> impl Strategy<Value = f64> {
    // Log-uniform over [0.1, 10].
    (-1.0..1.0f64).prop_map(|e| 10.0_f64.powf(e))
}

fn params() -> impl Strategy<Value = LaserParams> {
    (rate(), rate(), rate(), -0.5..1.0f64, 1e2..1e8f64)
        .prop_map(|(k, kt, k0, xi, r)| LaserParams::new(k, kt, k0, xi, r))
}

proptest! {
    #[test]
    fn steady_state_balance_identities(p in params()) {
        let s = steady_state(&p).unwrap();
        let lhs1 = p.kappa_tilde * s.n_tilde;
        let rhs1 = p.kappa0 * s.n;
        prop_assert!((lhs1 - rhs1).abs() <= 1e-12 * rhs1.abs().max(1e-300));
        let lhs2 = (p.kappa + p.kappa0) * s.n;
        prop_assert!((lhs2 - p.pump_rate).abs() <= 1e-12 * p.pump_rate);
    }

    #[test]
    fn pump_parameter_round_trip(xi in -0.5..1.0f64) {
        let p = -2.0 * xi;
        let (back, _) = xi_from_pump(p).unwrap();
        // Division and multiplication by two are exact in binary.
        prop_assert_eq!(back, xi);
    }

    #[test]
    fn kappa0_homogeneity(
        gamma2 in 1e-3..1.0f64,
        ratio in 0.1..10.0f64,
        atoms in 1.0..1e6f64,
        photons in 1.0..1e6f64,
        a in 0.1..10.0f64,
    ) {
        let micro = MicroParams {
            gamma2_tilde: gamma2,
            gamma1_tilde: gamma2 * 100.0,
            g13_tilde: ratio,
            g12_tilde: 1.0,
            atom_count: atoms,
            n_tilde: photons,
        };
        let base = kappa0_from_micro(&micro).unwrap();
        let tol = 1e-12;

        // Degree 1 in gamma2 and in the atom number.
        let scaled = kappa0_from_micro(&MicroParams {
            gamma2_tilde: a * gamma2, gamma1_tilde: a * gamma2 * 100.0, ..micro.clone()
        }).unwrap();
        prop_assert!((scaled - a * base).abs() <= tol * (a * base).abs());
        let scaled = kappa0_from_micro(&MicroParams { atom_count: a * atoms, ..micro.clone() }).unwrap();
        prop_assert!((scaled - a * base).abs() <= tol * (a * base).abs());

        // Degree -1 in the photon number.
        let scaled = kappa0_from_micro(&MicroParams { n_tilde: a * photons, ..micro.clone() }).unwrap();
        prop_assert!((scaled - base / a).abs() <= tol * (base / a).abs());

        // Degree 2 in the coupling ratio.
        let scaled = kappa0_from_micro(&MicroParams { g13_tilde: a * ratio, ..micro }).unwrap();
        prop_assert!((scaled - a * a * base).abs() <= tol * (a * a * base).abs());
    }

    #[test]
    fn feedback_off_reduces_to_plain_builders(p in params()) {
        let s = steady_state(&p).unwrap();
        prop_assert_eq!(
            build_feedback_coupled(&p, &s).unwrap(),
            build_coupled(&p, &s).unwrap()
        );
        let iso = LaserParams { kappa0: 0.0, kappa_tilde: 0.0, ..p };
        let s = steady_state(&iso).unwrap();
        prop_assert_eq!(
            build_feedback_isolated(&iso, &s).unwrap(),
            build_isolated_2l(&iso, &s).unwrap()
        );
    }

    #[test]
    fn noise_covariance_exactly_symmetric(p in params(), lambda in 0.0..20.0f64) {
        let p = p.with_feedback(lambda);
        let s = steady_state(&p).unwrap();
        let sys = build_feedback_coupled(&p, &s).unwrap();
        let d = &sys.noise_cov;
        for i in 0..d.nrows() {
            for j in 0..d.ncols() {
                prop_assert_eq!(d[(i, j)], d[(j, i)]);
            }
        }
    }

    #[test]
    fn factorization_reconstructs_any_symmetric_covariance(
        entries in proptest::collection::vec(-5.0..5.0f64, 16),
        dim in 1usize..=4,
    ) {
        let full = DMatrix::from_fn(dim, dim, |i, j| entries[i * 4 + j]);
        let d = (&full + full.transpose()) * 0.5;
        let f = factor_covariance(&d).unwrap();
        let scale = d.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(1.0);
        prop_assert!(f.reconstruction_residual(&d) <= 1e-12 * scale);
        let expected_mode = match psd_classify(&d).unwrap() {
            CovarianceClass::Psd => FactorMode::Real,
            CovarianceClass::Indefinite => FactorMode::Complex,
        };
        prop_assert_eq!(f.mode(), expected_mode);
    }

    #[test]
    fn spectra_even_and_at_shot_floor_far_out(p in params(), omega in 0.0..10.0f64) {
        let s = steady_state(&p).unwrap();
        let sys = build_coupled(&p, &s).unwrap();
        let pair = transfer_spectrum(&sys, &[omega, -omega]).unwrap();
        for ch in &pair.values {
            prop_assert_eq!(ch[0], ch[1]);
        }
        let far = 1e3 * p.kappa.max(p.kappa_tilde).max(p.kappa0);
        let floor = transfer_spectrum(&sys, &[far]).unwrap();
        for ch in &floor.values {
            prop_assert!((ch[0] - 1.0).abs() < 0.01);
        }
    }
}
