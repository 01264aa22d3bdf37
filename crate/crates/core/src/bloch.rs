//! Bloch waves `φ_{n,θ}`, their Wronskians and normalisation, and the
//! amplitude `a_n(θ, x, y) = u_{n,θ}(x) conj(u_{n,θ}(y))` in closed form.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bands::{Band, LocalPoint};
use crate::error::{Error, Result};
use crate::quad::adaptive_gk15;

/// Generalised eigenfunction with `φ(x + 1) = e^{iθ} φ(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochWave {
    pub n: u32,
    pub v: f64,
    pub theta: f64,
    pub k: f64,
    pub a0: Complex64,
    pub b0: Complex64,
}

impl BlochWave {
    pub fn new(band: &Band, theta: f64) -> Result<Self> {
        let p = band_point(band, theta)?;
        Ok(Self::from_point(band, theta, &p))
    }

    pub(crate) fn from_point(band: &Band, theta: f64, p: &LocalPoint) -> Self {
        let v = band.v().value();
        let sk = p.sin_k();
        // cos k − e^{iθ} with cos k − cos θ = −V sin(k)/(2k) from D(k) = 2 cos θ
        let b0 = Complex64::new(-0.5 * v * sk / p.k, -theta.sin());
        BlochWave {
            n: band.n(),
            v,
            theta,
            k: p.k,
            a0: Complex64::new(-sk / p.k, 0.0),
            b0,
        }
    }

    /// The same wave multiplied by a real constant.
    pub fn scaled(&self, c: f64) -> Self {
        BlochWave {
            a0: self.a0 * c,
            b0: self.b0 * c,
            ..*self
        }
    }

    /// The wave at `−θ`, which is the pointwise conjugate.
    pub fn conjugate(&self) -> Self {
        BlochWave {
            theta: -self.theta,
            a0: self.a0.conj(),
            b0: self.b0.conj(),
            ..*self
        }
    }

    fn cell(&self, x: f64) -> (Complex64, f64) {
        let j = x.floor();
        (Complex64::from_polar(1.0, j * self.theta), x - j)
    }
}

pub(crate) fn band_point(band: &Band, theta: f64) -> Result<LocalPoint> {
    let (sigma, _) = band.sigma_of_theta(theta);
    band.point_at_sigma(sigma)
}

/// `φ(x) = e^{ijθ}(A₀ cos kξ + B₀ sin(kξ)/k)` with `j = ⌊x⌋`, `ξ = x − j`.
pub fn bloch_eval(w: &BlochWave, x: f64) -> Complex64 {
    let (phase, xi) = w.cell(x);
    let (s, c) = (w.k * xi).sin_cos();
    phase * (w.a0 * c + w.b0 * (s / w.k))
}

/// Right derivative `φ'(x+)`.
pub fn bloch_deriv(w: &BlochWave, x: f64) -> Complex64 {
    let (phase, xi) = w.cell(x);
    let (s, c) = (w.k * xi).sin_cos();
    phase * (-w.a0 * (w.k * s) + w.b0 * c)
}

/// `φ ψ' − φ' ψ` at `x`.
pub fn numeric_wronskian(phi: &BlochWave, psi: &BlochWave, x: f64) -> Complex64 {
    bloch_eval(phi, x) * bloch_deriv(psi, x) - bloch_deriv(phi, x) * bloch_eval(psi, x)
}

/// `W(φ_θ, φ_{−θ}) = −2i sin(k) sin(θ)/k`.
pub fn wronskian_pair(band: &Band, theta: f64) -> Result<Complex64> {
    let p = band_point(band, theta)?;
    Ok(Complex64::new(0.0, -2.0 * p.sin_k() * theta.sin() / p.k))
}

/// `(∫₀¹ |φ|²)^{1/2}` by adaptive Gauss–Kronrod.
pub fn normalization(w: &BlochWave) -> Result<f64> {
    let (val, _) = adaptive_gk15(|x| bloch_eval(w, x).norm_sqr(), 0.0, 1.0, 1e-13, 0.0);
    let c = val.sqrt();
    if !(c >= 1e-14) {
        return Err(Error::Structural(format!(
            "Bloch wave of band {} at θ = {} vanishes (norm {c:e})",
            w.n, w.theta
        )));
    }
    Ok(c)
}

/// Normalised Bloch wave `u_{n,θ} = φ_{n,θ}/C_{n,θ}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedWave {
    pub wave: BlochWave,
    pub norm: f64,
}

impl NormalizedWave {
    pub fn new(band: &Band, theta: f64) -> Result<Self> {
        let wave = BlochWave::new(band, theta)?;
        let norm = normalization(&wave)?;
        Ok(Self { wave, norm })
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        bloch_eval(&self.wave, x) / self.norm
    }

    pub fn deriv(&self, x: f64) -> Complex64 {
        bloch_deriv(&self.wave, x) / self.norm
    }
}

/// Quantities of the closed-form amplitude that depend only on `θ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct AmplitudeCoeffs {
    pub k: f64,
    pub p: f64,
    pub q: f64,
    pub beta: f64,
    pub dk: f64,
}

impl AmplitudeCoeffs {
    /// `dk` is `dk/dθ` in the caller's orientation of `θ`.
    pub fn from_point(v: f64, p: &LocalPoint, dk: f64) -> Self {
        let k = p.k;
        let sk = p.sin_k();
        let ck = p.cos_k();
        let d1 = p.d1();
        AmplitudeCoeffs {
            k,
            p: -2.0 * sk / d1,
            q: (-4.0 * sk + 4.0 * v * ck / k + v * v * sk / (k * k)) / (2.0 * d1),
            beta: 0.5 * v / k,
            dk,
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> Complex64 {
        let (sx, cx) = (self.k * x).sin_cos();
        let (sy, cy) = (self.k * y).sin_cos();
        let fx = cx + self.beta * sx;
        let fy = cy + self.beta * sy;
        let re = self.p * fx * fy + self.q * sx * sy;
        let im = self.dk * (sx * cy - cx * sy);
        Complex64::new(re, im)
    }
}

pub(crate) fn amplitude_coeffs(band: &Band, theta: f64) -> Result<AmplitudeCoeffs> {
    let (sigma, sign) = band.sigma_of_theta(theta);
    let p = band.point_at_sigma(sigma)?;
    let dk = sign * p.k_derivs()[1];
    Ok(AmplitudeCoeffs::from_point(band.v().value(), &p, dk))
}

/// `a_n(θ, x', y')` for cell coordinates `x', y' ∈ (0, 1)`:
///
/// ```text
/// (−2 sin k/D') f(x) f(y) + i k' sin k(x−y) + Q sin kx sin ky,
/// f(x) = cos kx + (V/2k) sin kx,
/// Q = (−4 sin k + 4V cos(k)/k + V² sin(k)/k²) / (2D').
/// ```
pub fn amplitude(band: &Band, theta: f64, xp: f64, yp: f64) -> Result<Complex64> {
    Ok(amplitude_coeffs(band, theta)?.eval(xp, yp))
}

/// Central difference of [`amplitude`] in `θ`.
pub fn amplitude_dtheta(band: &Band, theta: f64, xp: f64, yp: f64, step: f64) -> Result<Complex64> {
    let hi = amplitude(band, theta + step, xp, yp)?;
    let lo = amplitude(band, theta - step, xp, yp)?;
    Ok((hi - lo) / (2.0 * step))
}
