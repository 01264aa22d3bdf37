use std::f64::consts::PI;

use kronig_penney::asymptotics::{edge_taylor, puiseux_coeffs};
use kronig_penney::bloch::{amplitude, NormalizedWave};
use kronig_penney::discriminant::{discriminant, transfer_matrix};
use kronig_penney::propagator::{kernel, KernelQuery, QuadratureSpec};
use kronig_penney::{build_band, Band, PotentialStrength};
use proptest::prelude::*;

const STRENGTHS: [f64; 6] = [0.5, -0.5, 1.0, -1.0, 4.0, -4.0];

fn strength() -> impl Strategy<Value = PotentialStrength> {
    prop::sample::select(STRENGTHS.to_vec()).prop_map(|v| PotentialStrength::new(v).unwrap())
}

fn band_case(n_max: u32) -> impl Strategy<Value = Band> {
    (strength(), 0..n_max).prop_map(|(v, i)| {
        let first = if v.is_repulsive() { 1 } else { 2 };
        build_band(first + i, v).unwrap()
    })
}

fn scale(band: &Band, order: usize) -> f64 {
    (0..=64)
        .map(|i| {
            let s = band.lambda_jet(PI * i as f64 / 64.0).unwrap();
            [s.d1, s.d2, s.d3][order - 1].abs()
        })
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transfer_matrix_is_unimodular(k in 0.1f64..200.0, v in strength()) {
        let t = transfer_matrix(k, v).unwrap();
        prop_assert!((t.det() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn discriminant_is_even(eps in 1e-8f64..0.4, v in strength()) {
        prop_assert_eq!(discriminant(eps, v), discriminant(-eps, v));
    }

    #[test]
    fn inversion_residual(b in band_case(20), theta in -PI..PI) {
        let k = b.k_of_theta(theta).unwrap();
        prop_assert!((discriminant(k, b.v()) - 2.0 * theta.cos()).abs() < 1e-12);
        prop_assert_eq!(k, b.k_of_theta(-theta).unwrap());
    }

    #[test]
    fn lambda_jet_matches_differences(b in band_case(10), theta in 0.02f64..3.12) {
        prop_assume!(theta.sin().abs() > 1e-2);
        let h = 2e-4;
        let lam = |x: f64| b.lambda_jet(x).unwrap();
        let c = lam(theta);
        let five = |f: &dyn Fn(f64) -> f64| {
            (-f(theta + 2.0 * h) + 8.0 * f(theta + h) - 8.0 * f(theta - h) + f(theta - 2.0 * h)) / (12.0 * h)
        };
        let d1 = five(&|x| lam(x).lambda);
        let d2 = five(&|x| lam(x).d1);
        let d3 = five(&|x| lam(x).d2);
        for (j, (exact, fd)) in [(c.d1, d1), (c.d2, d2), (c.d3, d3)].into_iter().enumerate() {
            let tol = 1e-5 * (exact.abs() + 1e-2 * scale(&b, j + 1));
            prop_assert!((exact - fd).abs() < tol, "order {}: {} vs {}", j + 1, exact, fd);
        }
    }

    #[test]
    fn gaps_are_open(b in band_case(30)) {
        let next = build_band(b.n() + 1, b.v()).unwrap();
        prop_assert!(b.interval().1 < next.interval().0);
    }

    #[test]
    fn dk_sign_follows_parity(b in band_case(30), theta in 1e-6f64..(PI - 1e-6)) {
        let s = b.lambda_jet(theta).unwrap().dk_dtheta;
        let expected = if b.n() % 2 == 1 { 1.0 } else { -1.0 };
        prop_assert_eq!(s.signum(), expected);
    }

    #[test]
    fn edge_h_dominates_free_part(n in 1u32..200, v in strength(), tau in -PI..PI) {
        let exp = puiseux_coeffs(edge_taylor(n, v).unwrap()).unwrap();
        let s = (0.5 * tau).sin();
        prop_assert!(exp.h_of_offset(tau) >= 4.0 * s * s);
    }

    #[test]
    fn bloch_waves_pair_under_conjugation(b in band_case(8), theta in 0.01f64..3.13, x in -3.0f64..3.0) {
        let u = NormalizedWave::new(&b, theta).unwrap();
        let w = NormalizedWave::new(&b, -theta).unwrap();
        prop_assert!((u.eval(x).conj() - w.eval(x)).norm() < 1e-12 * (1.0 + u.eval(x).norm()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn kernel_below_amplitude_max(b in band_case(6), t in -20.0f64..20.0, xp in 0.01f64..0.99, yp in 0.01f64..0.99, off in -4i64..4) {
        let q = KernelQuery::from_cells(b.n(), t, xp, yp, off).unwrap();
        let k = kernel(&b, &q, &QuadratureSpec::default()).unwrap();
        let amax = (0..=2000)
            .map(|i| amplitude(&b, PI * i as f64 / 2000.0, xp, yp).unwrap().norm())
            .fold(0.0, f64::max);
        prop_assert!(k.norm() <= amax * (1.0 + 1e-3));
    }
}
