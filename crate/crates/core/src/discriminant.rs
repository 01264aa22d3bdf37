//! The Kronig–Penney discriminant `D(k) = 2 cos k + V sin(k)/k`, its closed-form
//! derivatives through order six, and the one-period transfer matrix.
//!
//! All derivative formulas are linear in `(cos k, sin k)`. The internal
//! [`jet_trig`] therefore accepts the trigonometric pair separately from `k`,
//! which lets callers near a band edge pass `(cos u, sin u)` for `k = mπ + u`
//! and obtain `(-1)^m D^(j)(k)` without losing the small offset `u` to rounding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this wavenumber the `k^{-j}` weighted terms cancel catastrophically
/// and the Taylor series of `sin(k)/k` is used instead.
pub const SMALL_K: f64 = 1e-3;

/// The derivative jet switches to the series below this wavenumber. The
/// closed forms carry terms up to `720 sin(k)/k⁷`, whose rounding error grows
/// like `ε/k^(j+1)`, so the switch sits well above [`SMALL_K`].
pub const JET_SERIES_K: f64 = 0.5;

/// Highest derivative order available in closed form.
pub const MAX_ORDER: usize = 6;

/// Coupling constant `V` of the delta comb.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct PotentialStrength(f64);

impl PotentialStrength {
    pub fn new(v: f64) -> Result<Self> {
        if !v.is_finite() {
            return Err(Error::InvalidArgument(format!("V must be finite, got {v}")));
        }
        if v == 0.0 {
            return Err(Error::InvalidArgument(
                "V must be non-zero (use PotentialStrength::free_oracle for V = 0)".into(),
            ));
        }
        Ok(Self(v))
    }

    /// The free case `V = 0`. Only meaningful as a test oracle: several
    /// structural facts (non-empty gaps, non-critical band edges) fail here.
    pub fn free_oracle() -> Self {
        Self(0.0)
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_free(self) -> bool {
        self.0 == 0.0
    }

    pub fn is_repulsive(self) -> bool {
        self.0 > 0.0
    }
}

impl TryFrom<f64> for PotentialStrength {
    type Error = Error;

    fn try_from(v: f64) -> Result<Self> {
        PotentialStrength::new(v)
    }
}

impl From<PotentialStrength> for f64 {
    fn from(v: PotentialStrength) -> f64 {
        v.0
    }
}

/// `D(k), D'(k), ..., D^(order)(k)` at a single wavenumber.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscriminantJet {
    pub k: f64,
    pub order: usize,
    values: [f64; MAX_ORDER + 1],
}

impl DiscriminantJet {
    /// Derivative of order `j`, or `None` above the computed order.
    pub fn get(&self, j: usize) -> Option<f64> {
        (j <= self.order).then(|| self.values[j])
    }

    pub fn values(&self) -> &[f64] {
        &self.values[..=self.order]
    }
}

impl std::ops::Index<usize> for DiscriminantJet {
    type Output = f64;

    fn index(&self, j: usize) -> &f64 {
        assert!(j <= self.order, "derivative order {j} not computed");
        &self.values[j]
    }
}

/// `D(k) = 2 cos k + V sin(k)/k`. Even in `k`; `k = 0` returns `2 + V`.
pub fn discriminant(k: f64, v: PotentialStrength) -> f64 {
    if k.abs() < SMALL_K {
        2.0 * k.cos() + v.value() * sinc_derivative_series(k, 0)
    } else {
        2.0 * k.cos() + v.value() * k.sin() / k
    }
}

/// Closed-form derivatives `D^(j)(k)` for `j = 0..=max_order`.
pub fn discriminant_derivs(
    k: f64,
    v: PotentialStrength,
    max_order: usize,
) -> Result<DiscriminantJet> {
    if max_order > MAX_ORDER {
        return Err(Error::InvalidArgument(format!(
            "derivative order {max_order} exceeds the closed-form limit {MAX_ORDER}"
        )));
    }
    if !(k > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "wavenumber must be positive, got {k}"
        )));
    }
    let mut values = jet(k, v.value());
    for x in values.iter_mut().skip(max_order + 1) {
        *x = 0.0;
    }
    Ok(DiscriminantJet {
        k,
        order: max_order,
        values,
    })
}

/// Full jet at a real wavenumber, dispatching to the series branch for tiny `k`.
pub(crate) fn jet(k: f64, v: f64) -> [f64; MAX_ORDER + 1] {
    let (s, c) = k.sin_cos();
    jet_trig(c, s, k, v)
}

/// Derivatives of `2c(k) + V s(k)/k` where `(c, s)` stand in for `(cos k, sin k)`.
///
/// With `c = cos u, s = sin u` and `k = mπ + u` this yields `(-1)^m D^(j)(k)`.
pub(crate) fn jet_trig(c: f64, s: f64, k: f64, v: f64) -> [f64; MAX_ORDER + 1] {
    let trig = [c, -s, -c, s, c, -s, -c];
    if k.abs() < JET_SERIES_K {
        let mut out = [0.0; MAX_ORDER + 1];
        for (j, o) in out.iter_mut().enumerate() {
            *o = 2.0 * trig[j] + v * sinc_derivative_series(k, j);
        }
        return out;
    }
    closed_form_jet(c, s, k, v)
}

fn closed_form_jet(c: f64, s: f64, k: f64, v: f64) -> [f64; MAX_ORDER + 1] {
    let trig = [c, -s, -c, s, c, -s, -c];
    let mut out = [0.0; MAX_ORDER + 1];
    let r = 1.0 / k;
    let r2 = r * r;
    let r3 = r2 * r;
    let r4 = r3 * r;
    let r5 = r4 * r;
    let r6 = r5 * r;
    let r7 = r6 * r;
    let sinc = [
        s * r,
        c * r - s * r2,
        -s * r - 2.0 * c * r2 + 2.0 * s * r3,
        -c * r + 3.0 * s * r2 + 6.0 * c * r3 - 6.0 * s * r4,
        s * r + 4.0 * c * r2 - 12.0 * s * r3 - 24.0 * c * r4 + 24.0 * s * r5,
        c * r - 5.0 * s * r2 - 20.0 * c * r3 + 60.0 * s * r4 + 120.0 * c * r5 - 120.0 * s * r6,
        -s * r - 6.0 * c * r2 + 30.0 * s * r3 + 120.0 * c * r4 - 360.0 * s * r5 - 720.0 * c * r6
            + 720.0 * s * r7,
    ];
    for j in 0..=MAX_ORDER {
        out[j] = 2.0 * trig[j] + v * sinc[j];
    }
    out
}

/// `d^j/dk^j [sin(k)/k]` from the Maclaurin series, accurate to rounding for `|k| ≤ 1`.
fn sinc_derivative_series(k: f64, j: usize) -> f64 {
    // sin(k)/k = sum_m (-1)^m k^{2m} / (2m+1)!
    let mut total = 0.0;
    for m in 0..12usize {
        let p = 2 * m;
        if p < j {
            continue;
        }
        // (2m)! / (2m - j)! / (2m + 1)!
        let mut coeff = 1.0 / factorial(p + 1);
        for i in 0..j {
            coeff *= (p - i) as f64;
        }
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        total += sign * coeff * k.powi((p - j) as i32);
    }
    total
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * i as f64)
}

/// `D(sqrt(λ))` for `λ < 0`: `2 cosh κ + V sinh(κ)/κ` with `κ = sqrt(-λ)`.
pub fn discriminant_negative_energy(lambda: f64, v: PotentialStrength) -> Result<f64> {
    if !(lambda < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "negative-energy discriminant needs λ < 0, got {lambda}"
        )));
    }
    let kappa = (-lambda).sqrt();
    let sinhc = if kappa < SMALL_K {
        let k2 = kappa * kappa;
        1.0 + k2 / 6.0 + k2 * k2 / 120.0 + k2 * k2 * k2 / 5040.0
    } else {
        kappa.sinh() / kappa
    };
    Ok(2.0 * kappa.cosh() + v.value() * sinhc)
}

/// One-period transfer matrix acting on the coefficient pair `(A_j, B_j)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferMatrix(pub [[f64; 2]; 2]);

impl TransferMatrix {
    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn apply<T>(&self, x: [T; 2]) -> [T; 2]
    where
        T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
    {
        let m = &self.0;
        [
            x[0] * m[0][0] + x[1] * m[0][1],
            x[0] * m[1][0] + x[1] * m[1][1],
        ]
    }
}

pub fn transfer_matrix(k: f64, v: PotentialStrength) -> Result<TransferMatrix> {
    if !(k > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "wavenumber must be positive, got {k}"
        )));
    }
    let (s, c) = k.sin_cos();
    let sinc = if k < SMALL_K {
        sinc_derivative_series(k, 0)
    } else {
        s / k
    };
    let v = v.value();
    Ok(TransferMatrix([[c, sinc], [v * c - k * s, v * sinc + c]]))
}
