//! Large-`n` expansions: `k_n` and `l_n`, the Taylor jet of `D` at `l_n`, the
//! Puiseux inverse near the band top, the edge expansions of `λ±`, the
//! inflection offset and the band-centre expansion.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::bands::{critical_offset, sign_pow, Anchored};
use crate::discriminant::{jet_trig, PotentialStrength};
use crate::error::{Error, Result};

/// Truncated series `(k_n, l_n)` through order `(nπ)⁻³`.
pub fn kn_ln_asymptotic(n: u32, v: PotentialStrength) -> (f64, f64) {
    let a = n as f64 * PI;
    let (k, l) = kn_ln_offsets(n, v);
    (a + k, a + l)
}

/// The same series as [`kn_ln_asymptotic`] measured from `nπ`.
pub fn kn_ln_offsets(n: u32, v: PotentialStrength) -> (f64, f64) {
    let v = v.value();
    let a = n as f64 * PI;
    let a3 = a.powi(-3);
    let k = v / a - (v * v + v.powi(3) / 12.0) * a3;
    let l = 0.5 * v / a - (0.5 * v * v + v.powi(3) / 24.0) * a3;
    (k, l)
}

/// Which sheet of the square-root branch at `l_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// `k > l_n`: the bottom of band `n+1`.
    Plus,
    /// `k < l_n`: the top of band `n`.
    Minus,
}

impl Branch {
    fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

/// Coefficients attached to the critical point `l_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeExpansion {
    pub n: u32,
    pub v: PotentialStrength,
    pub l_n: Anchored,
    /// `D(l_n)`.
    pub y_n: f64,
    /// `(−1)^n y_n`.
    pub z_n: f64,
    /// `z_n − 2`, without cancellation.
    pub z_minus_two: f64,
    /// `d_2 … d_6`, the Taylor coefficients `D^(m)(l_n)/m!`.
    pub d: [f64; 5],
    /// `e_1 … e_5`; zero until [`puiseux_coeffs`] runs.
    pub e: [f64; 5],
    /// `l_n², λ_{0,1} … λ_{0,5}`.
    pub lam0: [f64; 6],
    /// `λ_{2,−3}, λ_{2,−1}, λ_{2,0}, λ_{2,1}`.
    pub lam2: [f64; 4],
}

impl EdgeExpansion {
    pub fn l_value(&self) -> f64 {
        self.l_n.value()
    }

    /// `c_m = (−1)^{n+1} d_m` for `m = 2..=6`.
    pub fn c(&self) -> [f64; 5] {
        let s = -sign_pow(self.n as i64);
        self.d.map(|x| s * x)
    }

    /// `h = z_n − 2 cos τ`, computed as `(z_n − 2) + 4 sin²(τ/2)`.
    pub fn h_of_offset(&self, tau: f64) -> f64 {
        let s = (0.5 * tau).sin();
        self.z_minus_two + 4.0 * s * s
    }
}

/// Taylor data `y_n, z_n, d_2 … d_6` at the numerically computed `l_n`.
pub fn edge_taylor(n: u32, v: PotentialStrength) -> Result<EdgeExpansion> {
    if n == 0 {
        return Err(Error::InvalidArgument("edge expansion needs n ≥ 1".into()));
    }
    let h = critical_offset(n, v)?;
    let m = n as f64 * PI;
    let k = m + h;
    let (s, c) = h.sin_cos();
    let e = jet_trig(c, s, k, v.value());
    let sign = sign_pow(n as i64);
    let half = (0.5 * h).sin();
    let z_minus_two = -4.0 * half * half + v.value() * s / k;
    let mut fact = 1.0;
    let mut d = [0.0; 5];
    for j in 2..=6 {
        fact *= j as f64;
        d[j - 2] = sign * e[j] / fact;
    }
    Ok(EdgeExpansion {
        n,
        v,
        l_n: Anchored {
            base: n as i64,
            offset: h,
        },
        y_n: sign * e[0],
        z_n: e[0],
        z_minus_two,
        d,
        e: [0.0; 5],
        lam0: [0.0; 6],
        lam2: [0.0; 4],
    })
}

/// Solve the triangular system for `e_1 … e_5` and fill the `λ` coefficients.
pub fn puiseux_coeffs(mut exp: EdgeExpansion) -> Result<EdgeExpansion> {
    let [c2, c3, c4, c5, c6] = exp.c();
    if !(c2 > 0.0) {
        return Err(Error::Structural(format!(
            "c_2 = {c2} must be positive at l_{}",
            exp.n
        )));
    }
    let e1 = c2.sqrt().recip();
    let e2 = -c3 * e1 * e1 / (2.0 * c2);
    let e3 = -(c2 * e2 * e2 + 3.0 * c3 * e1 * e1 * e2 + c4 * e1.powi(4)) / (2.0 * c2 * e1);
    let e4 = -(2.0 * c2 * e2 * e3
        + c3 * (3.0 * e1 * e1 * e3 + 3.0 * e1 * e2 * e2)
        + 4.0 * c4 * e1.powi(3) * e2
        + c5 * e1.powi(5))
        / (2.0 * c2 * e1);
    let e5 = -(c2 * (2.0 * e2 * e4 + e3 * e3)
        + c3 * (6.0 * e1 * e2 * e3 + 3.0 * e1 * e1 * e4 + e2.powi(3))
        + c4 * (6.0 * e1 * e1 * e2 * e2 + 4.0 * e1.powi(3) * e3)
        + 5.0 * c5 * e1.powi(4) * e2
        + c6 * e1.powi(6))
        / (2.0 * c2 * e1);
    exp.e = [e1, e2, e3, e4, e5];
    exp.lam0 = lambda0_coeffs(exp.l_value(), &exp.e);
    exp.lam2 = lambda2_coeffs(&exp.lam0, exp.z_n, exp.z_minus_two);
    Ok(exp)
}

/// Coefficients of `k²` as a series in `h^{1/2}` (upper branch signs).
fn lambda0_coeffs(l: f64, e: &[f64; 5]) -> [f64; 6] {
    let [e1, e2, e3, e4, e5] = *e;
    [
        l * l,
        2.0 * l * e1,
        e1 * e1 + 2.0 * l * e2,
        2.0 * l * e3 + 2.0 * e1 * e2,
        2.0 * l * e4 + 2.0 * e1 * e3 + e2 * e2,
        2.0 * l * e5 + 2.0 * e1 * e4 + 2.0 * e2 * e3,
    ]
}

/// `4 − z² = −(z − 2)(z + 2)`.
fn four_minus_z_sq(z: f64, z_minus_two: f64) -> f64 {
    -z_minus_two * (z + 2.0)
}

/// Coefficient of `h^{m/2}` in `d²λ/dθ²` from `λ = Σ L_p h^{p/2}`, using
/// `(2 sin τ)² = (4 − z²) + 2zh − h²` and `2 cos τ = z − h`.
fn second_derivative_coeff(lam0: &[f64; 6], z: f64, a: f64, m: i32) -> f64 {
    let l = |p: i32| -> f64 {
        if (0..=5).contains(&p) {
            lam0[p as usize]
        } else {
            0.0
        }
    };
    let mf = m as f64;
    l(m + 4) * (mf + 4.0) * (mf + 2.0) * a / 4.0 + l(m + 2) * (mf + 2.0) * (mf + 1.0) * z / 2.0
        - l(m) * mf * mf / 4.0
}

fn lambda2_coeffs(lam0: &[f64; 6], z: f64, z_minus_two: f64) -> [f64; 4] {
    let a = four_minus_z_sq(z, z_minus_two);
    [-3, -1, 0, 1].map(|m| second_derivative_coeff(lam0, z, a, m))
}

/// `(λ, λ', λ'', λ''')` from the truncated edge expansion at `τ = θ − nπ`.
pub fn lambda_edge_jet_offset(exp: &EdgeExpansion, branch: Branch, tau: f64) -> Result<[f64; 4]> {
    let h = exp.h_of_offset(tau);
    if !(h < 1.0) {
        return Err(Error::OutsideValidity(format!(
            "edge expansion needs h < 1, got h = {h} at τ = {tau}"
        )));
    }
    let b = branch.sign();
    let s = h.sqrt();
    let two_sin = 2.0 * tau.sin();
    let signed = |p: i32, x: f64| if p.rem_euclid(2) == 1 { b * x } else { x };
    let l = &exp.lam0;
    let mut lam = 0.0;
    let mut dlam_dh = 0.0;
    for p in 0..=5i32 {
        lam += signed(p, l[p as usize]) * s.powi(p);
        if p > 0 {
            dlam_dh += signed(p, 0.5 * p as f64 * l[p as usize]) * s.powi(p - 2);
        }
    }
    let orders = [-3, -1, 0, 1];
    let mut d2 = 0.0;
    let mut dd2_dh = 0.0;
    for (i, &m) in orders.iter().enumerate() {
        let g = signed(m, exp.lam2[i]);
        d2 += g * s.powi(m);
        dd2_dh += 0.5 * m as f64 * g * s.powi(m - 2);
    }
    Ok([lam, two_sin * dlam_dh, d2, two_sin * dd2_dh])
}

/// As [`lambda_edge_jet_offset`] with the unfolded `θ` near `nπ`.
pub fn lambda_edge_jet(exp: &EdgeExpansion, branch: Branch, theta: f64) -> Result<[f64; 4]> {
    lambda_edge_jet_offset(exp, branch, theta - exp.n as f64 * PI)
}

/// `k±` from the Puiseux series at `τ = θ − nπ`.
pub fn puiseux_k(exp: &EdgeExpansion, branch: Branch, tau: f64) -> f64 {
    let h = exp.h_of_offset(tau);
    let s = h.sqrt();
    let b = branch.sign();
    let e = &exp.e;
    let mut sum = 0.0;
    for p in (1..=5).rev() {
        let c = if p % 2 == 1 { b * e[p - 1] } else { e[p - 1] };
        sum = (sum + c) * s;
    }
    exp.l_n.offset + exp.n as f64 * PI + sum
}

/// Leading-order closed forms of the edge coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeadingForms {
    pub y_n: f64,
    pub d: [f64; 5],
    pub e: [f64; 5],
    pub lam0: [f64; 6],
    pub lam2: [f64; 4],
}

pub fn leading_forms(n: u32, v: PotentialStrength) -> LeadingForms {
    let v = v.value();
    let v2 = v * v;
    let a = n as f64 * PI;
    let (i1, i2, i3) = (a.recip(), a.powi(-2), a.powi(-3));
    let sign = sign_pow(n as i64);
    LeadingForms {
        y_n: sign * (2.0 + v2 / 4.0 * i2),
        d: [
            sign * (-1.0 - (v + v2 / 8.0) * i2),
            sign * ((v + v2 / 6.0) * i3),
            sign * (1.0 / 12.0 + (v / 6.0 + v2 / 96.0) * i2),
            sign * (-(v / 6.0 + v2 / 60.0) * i3),
            sign * (-1.0 / 360.0 - (v / 120.0 + v2 / 2880.0) * i2),
        ],
        e: [
            1.0 - (v / 2.0 + v2 / 16.0) * i2,
            (v / 2.0 + v2 / 12.0) * i3,
            1.0 / 24.0 - (v / 48.0 + v2 / 128.0) * i2,
            (v / 24.0 + v2 / 80.0) * i3,
            3.0 / 640.0 - (3.0 * v / 1280.0 + 3.0 * v2 / 2048.0) * i2,
        ],
        lam0: [
            a * a + v - (0.75 * v2 + v.powi(3) / 12.0) * i2,
            2.0 * a - v2 / 8.0 * i1,
            1.0 + v2 / 24.0 * i2,
            a / 12.0 - v2 / 64.0 * i1,
            1.0 / 12.0 + v2 / 240.0 * i2,
            3.0 / 320.0 * a - 3.0 * v2 / 1024.0 * i1,
        ],
        lam2: [
            v2 / 2.0 * i1,
            -v2 / 16.0 * i1,
            2.0 + v2 / 6.0 * i2,
            -9.0 * v2 / 256.0 * i1,
        ],
    }
}

/// `nπ − (V²/(4nπ))^{1/3}`.
pub fn theta0_asymptotic(n: u32, v: PotentialStrength) -> f64 {
    let a = n as f64 * PI;
    a - (v.value().powi(2) / (4.0 * a)).cbrt()
}

/// Band-centre expansion of `k` and `λ` with two derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerExpansion {
    pub theta: f64,
    pub k: f64,
    pub dk: f64,
    pub d2k: f64,
    pub lambda: f64,
    pub dlambda: f64,
    pub d2lambda: f64,
}

/// The window `[(n−1)π + δ^{1/4}, nπ − δ^{1/4}]`, `δ = V²/(4nπ)`.
pub fn inner_window(n: u32, v: PotentialStrength) -> (f64, f64) {
    let a = n as f64 * PI;
    let w = (v.value().powi(2) / (4.0 * a)).powf(0.25);
    (a - PI + w, a - w)
}

/// Expansion at the unfolded `θ` inside [`inner_window`].
pub fn inner_expansion(n: u32, v: PotentialStrength, theta: f64) -> Result<InnerExpansion> {
    if n == 0 {
        return Err(Error::InvalidArgument("inner expansion needs n ≥ 1".into()));
    }
    let (lo, hi) = inner_window(n, v);
    if !(theta >= lo && theta <= hi) {
        return Err(Error::OutsideValidity(format!(
            "θ = {theta} outside the inner window [{lo}, {hi}] of band {n}"
        )));
    }
    let v = v.value();
    let v2 = v * v;
    let (s, c) = theta.sin_cos();
    let t2 = theta * theta;
    let cot = c / s;
    Ok(InnerExpansion {
        theta,
        k: theta + v / (2.0 * theta) + v2 * cot / (8.0 * t2),
        dk: 1.0 - v / (2.0 * t2) - v2 / (8.0 * t2 * s * s),
        d2k: v2 * c / (4.0 * t2 * s.powi(3)),
        lambda: t2 + v + v2 * cot / (4.0 * theta),
        dlambda: 2.0 * theta - v2 / (4.0 * theta * s * s),
        d2lambda: 2.0 + v2 * c / (2.0 * theta * s.powi(3)),
    })
}
