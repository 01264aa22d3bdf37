//! Band edges, critical points of the discriminant, the monotone inverse
//! `k(θ) = D⁻¹(2 cos θ)` on each band and the band function `λ_n = k²` with
//! derivatives through order three.
//!
//! Every root is computed as an offset from a multiple of π. A band is
//! parametrised internally by `σ ∈ [0, π]`, the distance of the unfolded
//! quasimomentum from `(n−1)π`; points with `σ ≥ π/2` are solved relative to
//! `nπ` and the others relative to `(n−1)π`. Each frame solves
//!
//! ```text
//! −4 sin((u−τ)/2) sin((u+τ)/2) + V sin(u)/(mπ+u) = 0,    k = mπ + u,
//! ```
//!
//! which keeps full relative precision in both `u` and `τ` near the band edges.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::discriminant::{jet_trig, PotentialStrength};
use crate::error::{Error, Result};
use crate::roots::{brent, brent_with_values};

const EDGE_TOL: f64 = 1e-300;

/// A wavenumber stored as `base·π + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchored {
    pub base: i64,
    pub offset: f64,
}

impl Anchored {
    pub fn value(&self) -> f64 {
        self.base as f64 * PI + self.offset
    }

    fn offset_in(&self, m: i64) -> f64 {
        (self.base - m) as f64 * PI + self.offset
    }
}

fn check_index(
    n: u32,
    v: PotentialStrength,
    min_repulsive: u32,
    min_attractive: u32,
) -> Result<()> {
    let min = if v.value() >= 0.0 {
        min_repulsive
    } else {
        min_attractive
    };
    if n < min {
        return Err(Error::InvalidArgument(format!(
            "index {n} not available for V = {} (minimum {min})",
            v.value()
        )));
    }
    Ok(())
}

/// Offset `h = l_n − nπ` of the critical point of `D` near `nπ`.
pub fn critical_offset(n: u32, v: PotentialStrength) -> Result<f64> {
    check_index(n, v, 0, 1)?;
    let vv = v.value();
    if n == 0 || vv == 0.0 {
        return Ok(0.0);
    }
    let m = n as f64 * PI;
    // (-1)^n D'(nπ + h)
    let g = |h: f64| {
        let k = m + h;
        let (s, c) = h.sin_cos();
        -2.0 * s + vv * (c / k - s / (k * k))
    };
    let (lo, hi) = if vv > 0.0 {
        (0.0, FRAC_PI_2)
    } else {
        (-FRAC_PI_2, 0.0)
    };
    brent(g, lo, hi, EDGE_TOL).map_err(|e| match e {
        Error::Structural(msg) => Error::Structural(format!("critical point l_{n}: {msg}")),
        other => other,
    })
}

/// The critical point `l_n`, the unique zero of `D'` in `(nπ, nπ + π/2)` for
/// `V > 0` and in `(nπ − π/2, nπ)` for `V < 0`. `l_0 = 0` by convention.
pub fn critical_point(n: u32, v: PotentialStrength) -> Result<f64> {
    Ok(n as f64 * PI + critical_offset(n, v)?)
}

/// Offset `h = k_n − nπ` of the band edge where `D = 2(−1)^n` away from `nπ`.
pub fn edge_offset(n: u32, v: PotentialStrength) -> Result<f64> {
    check_index(n, v, 0, 2)?;
    let vv = v.value();
    if vv == 0.0 {
        return Ok(0.0);
    }
    let m = n as f64 * PI;
    // (-1)^n (D(nπ + h) − 2(−1)^n) / (2 sin(h/2))
    let g = |h: f64| {
        let (s, c) = (0.5 * h).sin_cos();
        -2.0 * s + vv * c / (m + h)
    };
    let (lo, hi) = if vv > 0.0 { (1e-300, PI) } else { (-PI, 0.0) };
    brent(g, lo, hi, EDGE_TOL).map_err(|e| match e {
        Error::Structural(msg) => Error::Structural(format!("band edge k_{n}: {msg}")),
        other => other,
    })
}

/// The band edge `k_n`: for `V > 0` the root of `D = 2(−1)^n` in
/// `(nπ, (n+1)π)`, for `V < 0` the root in `((n−1)π, nπ)`.
pub fn band_edge(n: u32, v: PotentialStrength) -> Result<f64> {
    Ok(n as f64 * PI + edge_offset(n, v)?)
}

/// One spectral band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    n: u32,
    v: PotentialStrength,
    l_lo: Anchored,
    l_hi: Anchored,
    bottom: Anchored,
    top: Anchored,
}

/// Band quantities at one quasimomentum. Derivatives are with respect to the
/// quasimomentum as passed in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaSample {
    pub theta: f64,
    pub k: f64,
    pub lambda: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub dk_dtheta: f64,
}

/// Solution of the band equation in one local frame.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LocalPoint {
    /// Reference multiple `m` (either `n` or `n−1`).
    pub m: i64,
    pub tau: f64,
    pub u: f64,
    pub k: f64,
    /// `(−1)^m D^(j)(k)` for `j = 0..=3`.
    pub e: [f64; 4],
}

impl LocalPoint {
    /// `k` and its first three derivatives with respect to the unfolded
    /// quasimomentum.
    pub fn k_derivs(&self) -> [f64; 4] {
        let [_, e1, e2, e3] = self.e;
        let (st, ct) = self.tau.sin_cos();
        let k1 = -2.0 * st / e1;
        let k2 = (-2.0 * ct - e2 * k1 * k1) / e1;
        let k3 = (2.0 * st - e3 * k1 * k1 * k1 - 3.0 * e2 * k1 * k2) / e1;
        [self.k, k1, k2, k3]
    }

    /// `λ` and its first three derivatives with respect to the unfolded
    /// quasimomentum.
    pub fn lambda_derivs(&self) -> [f64; 4] {
        let [k, k1, k2, k3] = self.k_derivs();
        [
            k * k,
            2.0 * k * k1,
            2.0 * k1 * k1 + 2.0 * k * k2,
            6.0 * k1 * k2 + 2.0 * k * k3,
        ]
    }

    pub fn sin_k(&self) -> f64 {
        sign_pow(self.m) * self.u.sin()
    }

    pub fn cos_k(&self) -> f64 {
        sign_pow(self.m) * self.u.cos()
    }

    /// `D'(k)` in the original frame.
    pub fn d1(&self) -> f64 {
        sign_pow(self.m) * self.e[1]
    }
}

#[inline]
pub(crate) fn sign_pow(m: i64) -> f64 {
    if m.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Reduce to `[−π, π]`.
pub(crate) fn reduce_angle(theta: f64) -> f64 {
    if (-PI..=PI).contains(&theta) {
        theta
    } else {
        theta - 2.0 * PI * (theta / (2.0 * PI)).round()
    }
}

impl Band {
    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn v(&self) -> PotentialStrength {
        self.v
    }

    /// Lower bracketing critical point `l_{n−1}`.
    pub fn l_lo(&self) -> f64 {
        self.l_lo.value()
    }

    /// Upper bracketing critical point `l_n`.
    pub fn l_hi(&self) -> f64 {
        self.l_hi.value()
    }

    pub fn k_bottom(&self) -> f64 {
        self.bottom.value()
    }

    pub fn k_top(&self) -> f64 {
        self.top.value()
    }

    pub fn bottom_edge(&self) -> Anchored {
        self.bottom
    }

    pub fn top_edge(&self) -> Anchored {
        self.top
    }

    /// The spectral interval `[k_bottom², k_top²]`.
    pub fn interval(&self) -> (f64, f64) {
        (self.k_bottom().powi(2), self.k_top().powi(2))
    }

    /// `(−1)^n`: the sign of `cos θ` at the top of the band.
    pub fn parity(&self) -> f64 {
        sign_pow(self.n as i64)
    }

    /// Position `σ ∈ [0, π]` measured from the band bottom.
    pub(crate) fn sigma_of_theta(&self, theta: f64) -> (f64, f64) {
        let r = reduce_angle(theta);
        let a = r.abs();
        let sign = if r >= 0.0 { 1.0 } else { -1.0 };
        if self.n % 2 == 1 {
            (a, sign)
        } else {
            (PI - a, -sign)
        }
    }

    /// Solve in the frame at the top (`top = true`, `τ ∈ [−π, 0]`) or bottom
    /// (`τ ∈ [0, π]`) of the band.
    pub(crate) fn solve_local(&self, top: bool, tau: f64) -> Result<LocalPoint> {
        let m = self.frame_base(top);
        let (lo, hi) = self.frame_bracket(m);
        let u = if tau == 0.0 {
            if top {
                hi
            } else {
                lo
            }
        } else {
            let f = self.frame_equation(m, tau);
            let (flo, fhi) = (f(lo), f(hi));
            let noise = 16.0 * f64::EPSILON * (1.0 + self.v.value().abs());
            if flo.signum() == fhi.signum() && flo.abs().min(fhi.abs()) <= noise {
                return Ok(self.local_point(m, tau, if flo.abs() <= fhi.abs() { lo } else { hi }));
            }
            brent_with_values(&f, lo, hi, flo, fhi, EDGE_TOL).map_err(|e| match e {
                Error::Structural(msg) => {
                    Error::Structural(format!("band {} inversion at τ = {tau}: {msg}", self.n))
                }
                other => other,
            })?
        };
        Ok(self.local_point(m, tau, u))
    }

    /// Unsafeguarded Newton from a nearby root; `None` if it leaves the
    /// bracket or stalls.
    pub(crate) fn newton_warm(&self, top: bool, tau: f64, guess: f64) -> Option<LocalPoint> {
        if tau == 0.0 {
            return None;
        }
        let m = self.frame_base(top);
        let (lo, hi) = self.frame_bracket(m);
        let k0 = m as f64 * PI;
        let v = self.v.value();
        let (ht, hc) = (0.5 * tau).sin_cos();
        let mut u = guess;
        for _ in 0..12 {
            let (s, c) = u.sin_cos();
            let k = k0 + u;
            let (sh, ch) = (0.5 * u).sin_cos();
            let sinc = if k == 0.0 { 1.0 } else { s / k };
            let f = -4.0 * (sh * hc - ch * ht) * (sh * hc + ch * ht) + v * sinc;
            let df = -2.0 * s + v * (c / k - s / (k * k));
            if f == 0.0 {
                return (u >= lo && u <= hi).then(|| self.local_point(m, tau, u));
            }
            let next = u - f / df;
            if !(next >= lo && next <= hi) {
                return None;
            }
            let done = (next - u).abs() <= 4.0 * f64::EPSILON * next.abs() + 1e-300;
            u = next;
            if done {
                return Some(self.local_point(m, tau, u));
            }
        }
        None
    }

    fn frame_base(&self, top: bool) -> i64 {
        if top {
            self.n as i64
        } else {
            self.n as i64 - 1
        }
    }

    fn frame_bracket(&self, m: i64) -> (f64, f64) {
        (self.bottom.offset_in(m), self.top.offset_in(m))
    }

    fn frame_equation(&self, m: i64, tau: f64) -> impl Fn(f64) -> f64 {
        let k0 = m as f64 * PI;
        let v = self.v.value();
        move |u: f64| {
            let k = k0 + u;
            let sinc = if k == 0.0 { 1.0 } else { u.sin() / k };
            -4.0 * (0.5 * (u - tau)).sin() * (0.5 * (u + tau)).sin() + v * sinc
        }
    }

    pub(crate) fn local_point(&self, m: i64, tau: f64, u: f64) -> LocalPoint {
        let k = m as f64 * PI + u;
        let (s, c) = u.sin_cos();
        let j = jet_trig(c, s, k, self.v.value());
        LocalPoint {
            m,
            tau,
            u,
            k,
            e: [j[0], j[1], j[2], j[3]],
        }
    }

    /// Local solution at unfolded position `σ ∈ [0, π]`.
    pub(crate) fn point_at_sigma(&self, sigma: f64) -> Result<LocalPoint> {
        if sigma >= FRAC_PI_2 {
            self.solve_local(true, -(PI - sigma))
        } else {
            self.solve_local(false, sigma)
        }
    }

    /// `k(θ)` on this band. Even and 2π-periodic in `θ`.
    pub fn k_of_theta(&self, theta: f64) -> Result<f64> {
        let (sigma, _) = self.sigma_of_theta(theta);
        Ok(self.point_at_sigma(sigma)?.k)
    }

    /// `λ_n(θ)` with derivatives. At `θ ∈ {0, ±π}` the odd derivatives are
    /// exactly zero and `λ''` is the finite edge limit.
    pub fn lambda_jet(&self, theta: f64) -> Result<ThetaSample> {
        let (sigma, s) = self.sigma_of_theta(theta);
        let p = self.point_at_sigma(sigma)?;
        let kd = p.k_derivs();
        let ld = p.lambda_derivs();
        Ok(ThetaSample {
            theta,
            k: p.k,
            lambda: ld[0],
            d1: s * ld[1],
            d2: ld[2],
            d3: s * ld[3],
            dk_dtheta: s * kd[1],
        })
    }

    /// `λ''` at offset `τ` below the band top.
    pub(crate) fn lambda2_top(&self, tau: f64) -> Result<f64> {
        Ok(self.solve_local(true, tau)?.lambda_derivs()[2])
    }
}

/// Assemble band `n`: `n ≥ 1` for `V > 0`, `n ≥ 2` for `V < 0`.
pub fn build_band(n: u32, v: PotentialStrength) -> Result<Band> {
    check_index(n, v, 1, 2)?;
    let vv = v.value();
    let nn = n as i64;
    let anchored = |base: i64, offset: f64| Anchored { base, offset };
    let (bottom, top) = if vv > 0.0 {
        (anchored(nn - 1, edge_offset(n - 1, v)?), anchored(nn, 0.0))
    } else if vv < 0.0 {
        (anchored(nn - 1, 0.0), anchored(nn, edge_offset(n, v)?))
    } else {
        (anchored(nn - 1, 0.0), anchored(nn, 0.0))
    };
    let band = Band {
        n,
        v,
        l_lo: anchored(nn - 1, critical_offset(n - 1, v)?),
        l_hi: anchored(nn, critical_offset(n, v)?),
        bottom,
        top,
    };
    if vv != 0.0
        && !(band.l_lo() <= band.k_bottom()
            && band.k_bottom() < band.k_top()
            && band.k_top() < band.l_hi())
    {
        return Err(Error::Structural(format!(
            "band {n} edges [{}, {}] not inside critical bracket [{}, {}]",
            band.k_bottom(),
            band.k_top(),
            band.l_lo(),
            band.l_hi()
        )));
    }
    Ok(band)
}

/// Location of the inflection point of `λ_n` below the band top.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Inflection {
    /// Unfolded quasimomentum `θ₀ ∈ ((n−1)π, nπ)`.
    pub theta: f64,
    /// `τ₀ = θ₀ − nπ`.
    pub offset: f64,
    /// The same point as an original quasimomentum in `(0, π)`.
    pub theta_reduced: f64,
}

impl Band {
    fn inflection_from_offset(&self, tau: f64) -> Inflection {
        let sigma_from_top = -tau;
        let theta_reduced = if self.n % 2 == 1 {
            PI - sigma_from_top
        } else {
            sigma_from_top
        };
        Inflection {
            theta: self.n as f64 * PI + tau,
            offset: tau,
            theta_reduced,
        }
    }
}

/// The zero of `λ''` in `[nπ − 2δ^{1/3}, nπ − δ^{1/3}/2]`, `δ = V²/(4nπ)`; the
/// bracket is widened geometrically up to five times.
pub fn inflection_point(band: &Band) -> Result<Inflection> {
    let n = band.n();
    let v = band.v().value();
    if v == 0.0 {
        return Err(Error::NoInflection {
            n,
            reason: "free band has no inflection".into(),
        });
    }
    let d = (v * v / (4.0 * n as f64 * PI)).cbrt();
    let floor = -PI * (1.0 - 1e-9);
    for widen in 0..=5 {
        let scale = f64::powi(2.0, widen);
        let lo = (-2.0 * d * scale).max(floor);
        let hi = -0.5 * d / scale;
        let flo = band.lambda2_top(lo)?;
        let fhi = band.lambda2_top(hi)?;
        if flo.signum() != fhi.signum() {
            let tau = brent(|t| band.lambda2_top(t).unwrap_or(f64::NAN), lo, hi, 1e-15)?;
            return Ok(band.inflection_from_offset(tau));
        }
    }
    Err(Error::NoInflection {
        n,
        reason: "λ'' keeps its sign on every widened bracket".into(),
    })
}

/// All sign changes of `λ''` on `σ ∈ (0, π)`, refined by Brent and returned
/// as unfolded quasimomenta in increasing order.
pub fn lambda2_sign_changes(band: &Band, grid: usize) -> Result<Vec<f64>> {
    let grid = grid.max(8);
    let lam2 = |sigma: f64| -> Result<f64> { Ok(band.point_at_sigma(sigma)?.lambda_derivs()[2]) };
    let base = (band.n() - 1) as f64 * PI;
    let mut out = Vec::new();
    let mut prev_s = 0.0;
    let mut prev = lam2(0.0)?;
    for i in 1..=grid {
        let s = PI * i as f64 / grid as f64;
        let cur = lam2(s)?;
        if prev != 0.0 && cur != 0.0 && prev.signum() != cur.signum() {
            let root = brent(|x| lam2(x).unwrap_or(f64::NAN), prev_s, s, 1e-14)?;
            out.push(base + root);
        }
        prev = cur;
        prev_s = s;
    }
    Ok(out)
}

/// `v_max = |λ'(θ₀)|`.
pub fn max_group_velocity(band: &Band) -> Result<f64> {
    let inf = inflection_point(band)?;
    Ok(band.solve_local(true, inf.offset)?.lambda_derivs()[1].abs())
}
