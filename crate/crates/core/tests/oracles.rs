use std::f64::consts::PI;

use kronig_penney::bands::inflection_point;
use kronig_penney::{build_band, PotentialStrength};

#[allow(clippy::excessive_precision)]
/// `θ₀ − nπ` at `V = 1` from a 60-digit solve of `λ'' = 0` using implicit
/// differentiation of `D(k) = 2 cos θ`.
const THETA0_OFFSETS: [(u32, f64); 4] = [
    (125, -0.086015648790562445567),
    (250, -0.068275360766134436098),
    (500, -0.054191652937574590456),
    (1000, -0.043012401210021904122),
];

#[test]
fn inflection_offsets_match_high_precision_values() {
    let v = PotentialStrength::new(1.0).unwrap();
    for (n, want) in THETA0_OFFSETS {
        let got = inflection_point(&build_band(n, v).unwrap()).unwrap().offset;
        assert!((got - want).abs() < 1e-13, "n={n}: {got} vs {want}");
    }
}

#[test]
fn inflection_correction_decays_like_n_to_minus_five_thirds() {
    let resid: Vec<f64> = THETA0_OFFSETS
        .iter()
        .map(|&(n, off)| off + (1.0 / (4.0 * n as f64 * PI)).cbrt())
        .collect();
    for w in resid.windows(2) {
        let slope = (w[1] / w[0]).log2();
        assert!((slope + 5.0 / 3.0).abs() < 0.05, "{slope}");
    }
}
