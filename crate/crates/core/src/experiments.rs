//! Experiment drivers: decay scans, coefficient scaling, completeness of the
//! band projections, figure datasets, and their CSV/JSON output.

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::asymptotics::{edge_taylor, kn_ln_offsets, puiseux_coeffs};
use crate::bands::{band_edge, build_band, critical_offset, edge_offset, inflection_point, Band};
use crate::discriminant::{discriminant, PotentialStrength};
use crate::error::{Error, Result};
use crate::fit::{loglog_fit, PowerFit};
use crate::propagator::{kernel_grid, speed_bound, KernelQuery, QuadratureSpec};
use crate::quad::PanelRule;

/// Fits with a smaller coefficient of determination are flagged.
pub const MIN_R_SQUARED: f64 = 0.98;

/// Geometric grid `t_min · 10^{i/points_per_decade}` up to `t_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometricGrid {
    pub t_min: f64,
    pub t_max: f64,
    pub points_per_decade: u32,
}

impl GeometricGrid {
    pub fn decades(&self) -> f64 {
        (self.t_max / self.t_min).log10()
    }

    pub fn values(&self) -> Vec<f64> {
        let steps = (self.decades() * self.points_per_decade as f64 + 1e-9).floor() as u32;
        (0..=steps)
            .map(|i| self.t_min * 10f64.powf(i as f64 / self.points_per_decade as f64))
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if !(self.t_min > 0.0 && self.t_max > self.t_min && self.t_max.is_finite())
            || self.points_per_decade == 0
        {
            return Err(Error::InvalidArgument(format!("invalid t grid {self:?}")));
        }
        Ok(())
    }
}

impl Default for GeometricGrid {
    fn default() -> Self {
        GeometricGrid {
            t_min: 1e2,
            t_max: 1e5,
            points_per_decade: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "V")]
    pub v: f64,
    pub bands: Vec<u32>,
    pub t_grid: GeometricGrid,
    /// Points per axis of the interior `(x', y')` grid.
    pub xy_grid: usize,
    pub quadrature: QuadratureSpec,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            v: 1.0,
            bands: vec![10],
            t_grid: GeometricGrid::default(),
            xy_grid: 32,
            quadrature: QuadratureSpec::default(),
            output_dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn potential(&self) -> Result<PotentialStrength> {
        PotentialStrength::new(self.v)
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.potential()?;
        if self.bands.is_empty() {
            return Err(Error::InvalidArgument("no bands selected".into()));
        }
        let first = if v.is_repulsive() { 1 } else { 2 };
        if let Some(n) = self.bands.iter().find(|&&n| n < first) {
            return Err(Error::InvalidArgument(format!(
                "band {n} does not exist for V = {}; the first band index is {first}",
                self.v
            )));
        }
        self.t_grid.validate()?;
        if self.xy_grid < 8 {
            return Err(Error::InvalidArgument(format!(
                "xy_grid = {} must be at least 8",
                self.xy_grid
            )));
        }
        if !(self.quadrature.nodes_per_oscillation >= 4.0) || self.quadrature.order == 0 {
            return Err(Error::InvalidArgument(format!(
                "invalid quadrature {:?}",
                self.quadrature
            )));
        }
        Ok(())
    }
}

/// Midpoints of `grid` equal cells of `(0, 1)`.
pub fn cell_grid(grid: usize) -> Vec<f64> {
    (0..grid).map(|i| (i as f64 + 0.5) / grid as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupSample {
    pub sup: f64,
    pub xp: f64,
    pub yp: f64,
    pub nodes: usize,
}

/// `max |K_{n,t}(x' + offset, y')|` over the `grid × grid` interior grid.
pub fn sup_kernel(
    band: &Band,
    t: f64,
    offset: i64,
    grid: usize,
    spec: &QuadratureSpec,
) -> Result<SupSample> {
    if grid < 8 {
        return Err(Error::InvalidArgument(format!(
            "sup grid {grid} must be at least 8"
        )));
    }
    let g = cell_grid(grid);
    let k = kernel_grid(band, t, offset, &g, &g, spec)?;
    let mut best = SupSample {
        sup: -1.0,
        xp: 0.0,
        yp: 0.0,
        nodes: k.nodes,
    };
    for (idx, z) in k.values.iter().enumerate() {
        let a = z.norm();
        if a > best.sup {
            best.sup = a;
            best.xp = g[idx / grid];
            best.yp = g[idx % grid];
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecayMode {
    /// Offset tracking the maximal group velocity.
    Resonant,
    /// Zero offset.
    Generic,
    /// Offset beyond every group velocity by one.
    Super,
}

impl DecayMode {
    pub const ALL: [DecayMode; 3] = [DecayMode::Resonant, DecayMode::Generic, DecayMode::Super];

    pub fn expected_slope(self) -> f64 {
        match self {
            DecayMode::Resonant => -1.0 / 3.0,
            DecayMode::Generic => -0.5,
            DecayMode::Super => -1.0,
        }
    }

    /// Cell offset at time `t` for a band with maximal speed `vmax`.
    pub fn offset(self, t: f64, vmax: f64) -> i64 {
        match self {
            DecayMode::Resonant => (vmax * t).round() as i64,
            DecayMode::Generic => 0,
            DecayMode::Super => ((vmax + 1.0) * t).ceil() as i64,
        }
    }
}

impl fmt::Display for DecayMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecayMode::Resonant => "resonant",
            DecayMode::Generic => "generic",
            DecayMode::Super => "super",
        })
    }
}

impl FromStr for DecayMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "resonant" => Ok(DecayMode::Resonant),
            "generic" => Ok(DecayMode::Generic),
            "super" => Ok(DecayMode::Super),
            other => Err(Error::InvalidArgument(format!(
                "unknown mode {other:?}; expected resonant, generic or super"
            ))),
        }
    }
}

/// One line of the decay CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub n: u32,
    #[serde(rename = "V")]
    pub v: f64,
    pub mode: DecayMode,
    pub t: f64,
    pub s_effective: f64,
    #[serde(rename = "sup_abs_K")]
    pub sup_abs_k: f64,
    pub nodes: usize,
    pub grid: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub n: u32,
    #[serde(rename = "V")]
    pub v: f64,
    pub mode: DecayMode,
    pub vmax: f64,
    pub t_values: Vec<f64>,
    pub sup_abs_kernel: Vec<f64>,
    pub effective_s: Vec<f64>,
    pub rows: Vec<DecayRow>,
    pub fit: Option<PowerFit>,
    pub expected_slope: f64,
    /// Set when the fit is missing or its R² is below [`MIN_R_SQUARED`].
    pub flagged: bool,
    /// The kernel error that cut the scan short, if any.
    pub failure: Option<String>,
}

impl DecayReport {
    pub fn fitted_slope(&self) -> Option<f64> {
        self.fit.map(|f| f.slope)
    }

    pub fn fitted_log_c(&self) -> Option<f64> {
        self.fit.map(|f| f.log_c)
    }
}

/// Sweep `cfg.t_grid` and fit `log sup|K|` against `log t`.
pub fn decay_scan(band: &Band, mode: DecayMode, cfg: &RunConfig) -> Result<DecayReport> {
    cfg.t_grid.validate()?;
    if cfg.t_grid.decades() < 3.0 - 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "slope fits need at least three decades of t, got {:.3}",
            cfg.t_grid.decades()
        )));
    }
    let vmax = speed_bound(band)?;
    let mut report = DecayReport {
        n: band.n(),
        v: band.v().value(),
        mode,
        vmax,
        t_values: Vec::new(),
        sup_abs_kernel: Vec::new(),
        effective_s: Vec::new(),
        rows: Vec::new(),
        fit: None,
        expected_slope: mode.expected_slope(),
        flagged: true,
        failure: None,
    };
    for t in cfg.t_grid.values() {
        let offset = mode.offset(t, vmax);
        match sup_kernel(band, t, offset, cfg.xy_grid, &cfg.quadrature) {
            Ok(s) => {
                let s_eff = offset as f64 / t;
                report.t_values.push(t);
                report.sup_abs_kernel.push(s.sup);
                report.effective_s.push(s_eff);
                report.rows.push(DecayRow {
                    n: band.n(),
                    v: band.v().value(),
                    mode,
                    t,
                    s_effective: s_eff,
                    sup_abs_k: s.sup,
                    nodes: s.nodes,
                    grid: cfg.xy_grid,
                });
            }
            Err(e) => {
                report.failure = Some(e.to_string());
                break;
            }
        }
    }
    if report.failure.is_none() {
        report.fit = loglog_fit(&report.t_values, &report.sup_abs_kernel).ok();
        report.flagged = report.fit.is_none_or(|f| f.r_squared < MIN_R_SQUARED);
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n: u32,
    #[serde(rename = "V")]
    pub v: f64,
    pub t: f64,
    pub resonant_sup: f64,
    pub c2_hat: f64,
    pub c2_hat_scaled: f64,
    pub generic_sup: f64,
    pub c1_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingTable {
    pub rows: Vec<ScalingRow>,
    /// `max/min` of `Ĉ_n n^{1/9}`.
    pub c2_ratio: f64,
    /// `max/min` of the generic-mode proxy `sup|K| t^{1/2}`.
    pub c1_ratio: f64,
    /// Adjacent pairs where `Ĉ_n` fails to decrease.
    pub c2_increases: usize,
}

fn spread(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    let min = values.fold(f64::INFINITY, f64::min);
    max / min
}

/// `Ĉ_n = sup|K| t^{1/3}` (resonant) and `sup|K| t^{1/2}` (generic) at the
/// largest `t` of the grid, for every band of the configuration.
pub fn coefficient_scaling(cfg: &RunConfig) -> Result<ScalingTable> {
    cfg.validate()?;
    let v = cfg.potential()?;
    let t = cfg.t_grid.t_max;
    let mut rows = Vec::with_capacity(cfg.bands.len());
    for &n in &cfg.bands {
        let band = build_band(n, v)?;
        let vmax = speed_bound(&band)?;
        let res = sup_kernel(
            &band,
            t,
            DecayMode::Resonant.offset(t, vmax),
            cfg.xy_grid,
            &cfg.quadrature,
        )?;
        let gen = sup_kernel(&band, t, 0, cfg.xy_grid, &cfg.quadrature)?;
        let c2 = res.sup * t.cbrt();
        rows.push(ScalingRow {
            n,
            v: cfg.v,
            t,
            resonant_sup: res.sup,
            c2_hat: c2,
            c2_hat_scaled: c2 * (n as f64).powf(1.0 / 9.0),
            generic_sup: gen.sup,
            c1_hat: gen.sup * t.sqrt(),
        });
    }
    let c2_increases = rows
        .windows(2)
        .filter(|w| w[1].c2_hat > w[0].c2_hat)
        .count();
    Ok(ScalingTable {
        c2_ratio: spread(rows.iter().map(|r| r.c2_hat_scaled)),
        c1_ratio: spread(rows.iter().map(|r| r.c1_hat)),
        c2_increases,
        rows,
    })
}

/// Test functions for the completeness check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TestFunction {
    Zero,
    /// `exp(−(y − center)²/(2 width²))`, cut off at eight widths.
    Gaussian {
        center: f64,
        width: f64,
    },
}

impl TestFunction {
    pub fn eval(&self, y: f64) -> f64 {
        match *self {
            TestFunction::Zero => 0.0,
            TestFunction::Gaussian { center, width } => {
                let z = (y - center) / width;
                if z.abs() > 8.0 {
                    0.0
                } else {
                    (-0.5 * z * z).exp()
                }
            }
        }
    }

    fn support(&self) -> Option<(f64, f64)> {
        match *self {
            TestFunction::Zero => None,
            TestFunction::Gaussian { center, width } => {
                Some((center - 8.0 * width, center + 8.0 * width))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompletenessRow {
    pub bands: u32,
    pub x: f64,
    pub f_x: f64,
    pub projected: f64,
    pub error: f64,
}

/// `|Σ_{n ≤ N} ∫ K_{n,0}(x, y) f(y) dy − f(x)|` for every `N` in `checkpoints`
/// (the partial sums are shared). Requires `V > 0`, where the bands `n ≥ 1`
/// exhaust the spectrum.
pub fn completeness_check(
    v: PotentialStrength,
    checkpoints: &[u32],
    f: &TestFunction,
    x: f64,
    spec: &QuadratureSpec,
) -> Result<Vec<CompletenessRow>> {
    if !v.is_repulsive() {
        return Err(Error::InvalidArgument(
            "completeness check needs V > 0".into(),
        ));
    }
    if x == x.floor() {
        return Err(Error::InvalidArgument(format!(
            "x = {x} lies on a lattice site"
        )));
    }
    let n_max = checkpoints.iter().copied().max().unwrap_or(0);
    let fx = f.eval(x);
    let Some((lo, hi)) = f.support() else {
        return Ok(checkpoints
            .iter()
            .map(|&n| CompletenessRow {
                bands: n,
                x,
                f_x: fx,
                projected: 0.0,
                error: fx.abs(),
            })
            .collect());
    };
    let rule = PanelRule::new(16);
    let mut cells: Vec<(i64, Vec<f64>, Vec<f64>)> = Vec::new();
    let mut a = lo;
    while a < hi {
        let j = a.floor();
        let b = (j + 1.0).min(hi);
        let panels = ((b - a) / 0.025).ceil().max(1.0) as usize;
        let (mut ys, mut ws) = (Vec::new(), Vec::new());
        for i in 0..panels {
            for (y, w) in rule.panel(a, b, panels, i) {
                ys.push(y - j);
                ws.push(w * f.eval(y));
            }
        }
        cells.push((j as i64, ys, ws));
        a = b;
    }
    let jx = x.floor() as i64;
    let xp = x - x.floor();
    let mut total = 0.0;
    let mut rows = Vec::new();
    for n in 1..=n_max {
        let band = build_band(n, v)?;
        for (jy, ys, ws) in &cells {
            let k = kernel_grid(&band, 0.0, jx - jy, &[xp], ys, spec)?;
            total += k.values.iter().zip(ws).map(|(z, w)| z.re * w).sum::<f64>();
        }
        if checkpoints.contains(&n) {
            rows.push(CompletenessRow {
                bands: n,
                x,
                f_x: fx,
                projected: total,
                error: (total - fx).abs(),
            });
        }
    }
    Ok(rows)
}

/// One line of the bands CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandsRow {
    pub n: u32,
    #[serde(rename = "V")]
    pub v: f64,
    pub l_n: f64,
    pub k_n: f64,
    pub l_n_asym: f64,
    pub k_n_asym: f64,
    pub resid_l: f64,
    pub resid_k: f64,
}

/// Critical points and band edges against their large-`n` series. Residuals
/// are formed from the offsets to `nπ`, so they stay accurate below `ulp(nπ)`.
pub fn bands_table(v: PotentialStrength, bands: &[u32]) -> Result<Vec<BandsRow>> {
    bands
        .iter()
        .map(|&n| {
            let a = n as f64 * PI;
            let l_off = critical_offset(n, v)?;
            let k_off = edge_offset(n, v)?;
            let (ka, la) = kn_ln_offsets(n, v);
            Ok(BandsRow {
                n,
                v: v.value(),
                l_n: a + l_off,
                k_n: band_edge(n, v)?,
                l_n_asym: a + la,
                k_n_asym: a + ka,
                resid_l: (l_off - la).abs(),
                resid_k: (k_off - ka).abs(),
            })
        })
        .collect()
}

/// One line of the asymptotics CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsRow {
    pub n: u32,
    #[serde(rename = "V")]
    pub v: f64,
    pub z_minus_two: f64,
    pub d2: f64,
    pub d3: f64,
    pub d4: f64,
    pub d5: f64,
    pub d6: f64,
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
    pub e4: f64,
    pub e5: f64,
    pub theta0: f64,
    pub theta0_asym: f64,
    pub resid_theta0: f64,
}

/// Taylor and Puiseux coefficients at `l_n` and the inflection point `θ₀`
/// against `nπ − (V²/(4nπ))^{1/3}`.
pub fn asymptotics_table(v: PotentialStrength, bands: &[u32]) -> Result<Vec<AsymptoticsRow>> {
    bands
        .iter()
        .map(|&n| {
            let exp = puiseux_coeffs(edge_taylor(n, v)?)?;
            let band = build_band(n, v)?;
            let infl = inflection_point(&band)?;
            let a = n as f64 * PI;
            let d = (v.value().powi(2) / (4.0 * a)).cbrt();
            Ok(AsymptoticsRow {
                n,
                v: v.value(),
                z_minus_two: exp.z_minus_two,
                d2: exp.d[0],
                d3: exp.d[1],
                d4: exp.d[2],
                d5: exp.d[3],
                d6: exp.d[4],
                e1: exp.e[0],
                e2: exp.e[1],
                e3: exp.e[2],
                e4: exp.e[3],
                e5: exp.e[4],
                theta0: infl.theta,
                theta0_asym: a - d,
                resid_theta0: (infl.offset + d).abs(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandCurveRow {
    pub n: u32,
    #[serde(rename = "V")]
    pub v: f64,
    pub theta: f64,
    pub lambda: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscriminantRow {
    #[serde(rename = "V")]
    pub v: f64,
    pub k: f64,
    #[serde(rename = "D")]
    pub d: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeMarkerRow {
    pub n: u32,
    #[serde(rename = "V")]
    pub v: f64,
    pub k_n: f64,
    pub d_at_k_n: f64,
    pub target: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InflectionRow {
    pub n: u32,
    #[serde(rename = "V")]
    pub v: f64,
    pub theta: f64,
    pub lambda2: f64,
}

/// Band functions with their first two derivatives on `[−π, π]`.
pub fn band_curves(band: &Band, points: usize) -> Result<Vec<BandCurveRow>> {
    (0..points)
        .map(|i| {
            let theta = -PI + 2.0 * PI * i as f64 / (points - 1) as f64;
            let s = band.lambda_jet(theta)?;
            Ok(BandCurveRow {
                n: band.n(),
                v: band.v().value(),
                theta,
                lambda: s.lambda,
                lambda1: s.d1,
                lambda2: s.d2,
            })
        })
        .collect()
}

/// Strict sign changes of `λ''` along the rows of one band.
pub fn count_lambda2_sign_changes(rows: &[BandCurveRow]) -> usize {
    rows.windows(2)
        .filter(|w| {
            w[0].lambda2 != 0.0
                && w[1].lambda2 != 0.0
                && w[0].lambda2.signum() != w[1].lambda2.signum()
        })
        .count()
}

/// `D(k)` on `(0, k_max]`.
pub fn discriminant_curve(v: PotentialStrength, k_max: f64, points: usize) -> Vec<DiscriminantRow> {
    (1..=points)
        .map(|i| {
            let k = k_max * i as f64 / points as f64;
            DiscriminantRow {
                v: v.value(),
                k,
                d: discriminant(k, v),
            }
        })
        .collect()
}

/// `λ''` on `θ ∈ [nπ − 5d/2, nπ − d/4]`, `d = (V²/(4nπ))^{1/3}`, together
/// with the inner window `[nπ − 2d, nπ − d/2]`.
pub fn inflection_curve(band: &Band, points: usize) -> Result<(Vec<InflectionRow>, (f64, f64))> {
    let n = band.n();
    let a = n as f64 * PI;
    let v = band.v().value();
    let d = (v * v / (4.0 * a)).cbrt();
    let rows = (0..points)
        .map(|i| {
            let tau = -2.5 * d + 2.25 * d * i as f64 / (points - 1) as f64;
            Ok(InflectionRow {
                n,
                v,
                theta: a + tau,
                lambda2: band.lambda2_top(tau)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((rows, (a - 2.0 * d, a - 0.5 * d)))
}

/// Unfolded `θ` values where `λ''` changes sign inside `window`.
pub fn inflection_crossings(rows: &[InflectionRow], window: (f64, f64)) -> Vec<f64> {
    rows.windows(2)
        .filter(|w| w[0].lambda2.signum() != w[1].lambda2.signum())
        .map(|w| 0.5 * (w[0].theta + w[1].theta))
        .filter(|&th| th >= window.0 && th <= window.1)
        .collect()
}

/// Index of the band shown in the inflection figure.
pub const INFLECTION_FIGURE_BAND: u32 = 1000;

/// Output file name plus its content hash.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    pub file: String,
    pub sha256: String,
}

/// `sha256("blob <len>\0" ‖ bytes)`, the object hash git uses for content.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn ser_err(e: impl fmt::Display) -> Error {
    Error::Serialize(e.to_string())
}

/// Serialise rows to CSV bytes with the header taken from the row type.
pub fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(ser_err)?;
    }
    w.into_inner().map_err(ser_err)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Write `rows` to `dir/name` and return its hash.
pub fn write_csv<T: Serialize>(dir: &Path, name: &str, rows: &[T]) -> Result<OutputFile> {
    ensure_dir(dir)?;
    let bytes = csv_bytes(rows)?;
    let path = dir.join(name);
    fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
    Ok(OutputFile {
        file: name.to_string(),
        sha256: content_hash(&bytes),
    })
}

#[derive(Serialize)]
struct Sidecar<'a, C: Serialize, S: Serialize> {
    command: &'a str,
    config: &'a C,
    outputs: &'a [OutputFile],
    summary: &'a S,
}

/// Write `dir/<command>.json` echoing the configuration and output hashes.
pub fn write_sidecar<C: Serialize, S: Serialize>(
    dir: &Path,
    command: &str,
    config: &C,
    outputs: &[OutputFile],
    summary: &S,
) -> Result<PathBuf> {
    ensure_dir(dir)?;
    let doc = Sidecar {
        command,
        config,
        outputs,
        summary,
    };
    let mut text = serde_json::to_string_pretty(&doc).map_err(ser_err)?;
    text.push('\n');
    let path = dir.join(format!("{command}.json"));
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureSummary {
    pub outputs: Vec<OutputFile>,
    /// `(n, number of λ'' sign changes on [−π, π])`.
    pub band_sign_changes: Vec<(u32, usize)>,
    pub max_marker_error: f64,
    pub inflection_window: (f64, f64),
    pub inflection_crossings: Vec<f64>,
}

/// Write the figure datasets into `cfg.output_dir`:
///
/// - `fig_bands.csv`: `λ_n, λ_n', λ_n''` on `[−π, π]` for the first three bands,
/// - `fig_discriminant.csv`: `D(k)` for `±|V|`,
/// - `fig_edge_markers.csv`: `D(k_n)` against `2(−1)^n`,
/// - `fig_inflection.csv`: `λ''` near `θ₀` for band 1000.
pub fn emit_figures(cfg: &RunConfig) -> Result<FigureSummary> {
    let v = cfg.potential()?;
    let dir = &cfg.output_dir;
    let first = if v.is_repulsive() { 1 } else { 2 };
    let mut curves = Vec::new();
    let mut band_sign_changes = Vec::new();
    for n in first..first + 3 {
        let rows = band_curves(&build_band(n, v)?, 1441)?;
        band_sign_changes.push((n, count_lambda2_sign_changes(&rows)));
        curves.extend(rows);
    }
    let mut disc = Vec::new();
    let mut markers = Vec::new();
    for w in [v.value().abs(), -v.value().abs()] {
        let pw = PotentialStrength::new(w)?;
        disc.extend(discriminant_curve(pw, 4.0 * PI, 2000));
        let lo = if w > 0.0 { 1 } else { 2 };
        for n in lo..lo + 3 {
            let k = band_edge(n, pw)?;
            markers.push(EdgeMarkerRow {
                n,
                v: w,
                k_n: k,
                d_at_k_n: discriminant(k, pw),
                target: if n % 2 == 0 { 2.0 } else { -2.0 },
            });
        }
    }
    let max_marker_error = markers
        .iter()
        .map(|m| (m.d_at_k_n - m.target).abs())
        .fold(0.0, f64::max);
    let (infl, window) = inflection_curve(&build_band(INFLECTION_FIGURE_BAND, v)?, 801)?;
    let outputs = vec![
        write_csv(dir, "fig_bands.csv", &curves)?,
        write_csv(dir, "fig_discriminant.csv", &disc)?,
        write_csv(dir, "fig_edge_markers.csv", &markers)?,
        write_csv(dir, "fig_inflection.csv", &infl)?,
    ];
    Ok(FigureSummary {
        outputs,
        band_sign_changes,
        max_marker_error,
        inflection_crossings: inflection_crossings(&infl, window),
        inflection_window: window,
    })
}

/// Seeded random kernel queries with `n ≤ n_max`, `|t| ≤ t_max` and
/// positions in `(−3, 3)` off the lattice.
pub fn random_queries(
    seed: u64,
    count: usize,
    v: PotentialStrength,
    n_max: u32,
    t_max: f64,
) -> Vec<KernelQuery> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = if v.is_repulsive() { 1 } else { 2 };
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let n = rng.random_range(first..=n_max.max(first));
        let t = rng.random_range(-t_max..=t_max);
        let x = rng.random_range(-3.0..3.0);
        let y = rng.random_range(-3.0..3.0);
        if let Ok(q) = KernelQuery::new(n, t, x, y) {
            out.push(q);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(v: f64) -> PotentialStrength {
        PotentialStrength::new(v).unwrap()
    }

    #[test]
    fn geometric_grid_has_eight_points_per_decade() {
        let g = GeometricGrid::default().values();
        assert_eq!(g.len(), 25);
        assert!((g[8] - 1e3).abs() < 1e-9 && (g[24] - 1e5).abs() < 1e-6);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn config_validation() {
        assert!(RunConfig::default().validate().is_ok());
        let bad = RunConfig {
            v: -1.0,
            bands: vec![1],
            ..RunConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = RunConfig {
            xy_grid: 4,
            ..RunConfig::default()
        };
        assert!(bad.validate().is_err());
        let toml_cfg: RunConfig = toml::from_str(
            "V = 2.0\nbands = [3, 4]\n[t_grid]\nt_min = 1.0\nt_max = 1e3\npoints_per_decade = 4\n",
        )
        .unwrap();
        assert_eq!(toml_cfg.bands, vec![3, 4]);
        assert_eq!(toml_cfg.xy_grid, 32);
    }

    #[test]
    fn sup_grid_refinement_is_stable() {
        let b = build_band(2, pv(1.0)).unwrap();
        let spec = QuadratureSpec::default();
        let s16 = sup_kernel(&b, 10.0, 0, 16, &spec).unwrap();
        let s32 = sup_kernel(&b, 10.0, 0, 32, &spec).unwrap();
        assert!(
            (s16.sup - s32.sup).abs() < 0.05 * s32.sup,
            "{s16:?} {s32:?}"
        );
        let q = KernelQuery::from_cells(2, 10.0, 0.37, 0.81, 0).unwrap();
        assert!(crate::propagator::kernel(&b, &q, &spec).unwrap().norm() <= s32.sup * 1.05);
    }

    #[test]
    fn sup_at_time_zero_below_amplitude_max() {
        let b = build_band(3, pv(2.0)).unwrap();
        let s = sup_kernel(&b, 0.0, 0, 16, &QuadratureSpec::default()).unwrap();
        let mut amax: f64 = 0.0;
        for i in 0..=400 {
            let th = PI * i as f64 / 400.0;
            for &x in &cell_grid(16) {
                for &y in &cell_grid(16) {
                    amax = amax.max(crate::bloch::amplitude(&b, th, x, y).unwrap().norm());
                }
            }
        }
        assert!(s.sup <= amax, "{} vs {amax}", s.sup);
    }

    #[test]
    fn completeness_improves_with_more_bands() {
        let f = TestFunction::Gaussian {
            center: 0.5,
            width: 0.1,
        };
        let rows =
            completeness_check(pv(1.0), &[5, 20], &f, 0.5, &QuadratureSpec::default()).unwrap();
        assert!(rows[1].error < rows[0].error, "{rows:?}");
        assert!(rows[1].error < 0.1 * rows[1].f_x.abs(), "{rows:?}");
        let zero = completeness_check(
            pv(1.0),
            &[3],
            &TestFunction::Zero,
            0.5,
            &QuadratureSpec::default(),
        )
        .unwrap();
        assert_eq!(zero[0].error, 0.0);
    }

    #[test]
    fn band_rows_use_offsets() {
        let rows = bands_table(pv(1.0), &[20, 40]).unwrap();
        assert!(rows[1].resid_k < rows[0].resid_k);
        assert!(rows[0].resid_k < 1e-8);
        let neg = bands_table(pv(-1.0), &[20]).unwrap();
        assert!(neg[0].k_n < 20.0 * PI);
    }

    #[test]
    fn figure_band_inflections() {
        for v in [1.0, -1.0] {
            let p = pv(v);
            let first = if v > 0.0 { 1 } else { 2 };
            for n in first..first + 3 {
                let rows = band_curves(&build_band(n, p).unwrap(), 1441).unwrap();
                assert_eq!(count_lambda2_sign_changes(&rows), 2, "n={n} V={v}");
            }
        }
    }

    #[test]
    fn csv_is_deterministic_and_hashed() {
        let rows = bands_table(pv(1.0), &[3, 5]).unwrap();
        let a = csv_bytes(&rows).unwrap();
        assert_eq!(a, csv_bytes(&rows).unwrap());
        let text = String::from_utf8(a.clone()).unwrap();
        assert!(text.starts_with("n,V,l_n,k_n,l_n_asym,k_n_asym,resid_l,resid_k\n"));
        assert_eq!(content_hash(b"").len(), 64);
        assert_ne!(content_hash(&a), content_hash(b"x"));
    }

    #[test]
    fn decay_header_schema() {
        let row = DecayRow {
            n: 10,
            v: 1.0,
            mode: DecayMode::Super,
            t: 100.0,
            s_effective: 63.0,
            sup_abs_k: 1e-3,
            nodes: 4096,
            grid: 8,
        };
        let text = String::from_utf8(csv_bytes(&[row]).unwrap()).unwrap();
        assert!(
            text.starts_with("n,V,mode,t,s_effective,sup_abs_K,nodes,grid\n10,1.0,super,"),
            "{text}"
        );
    }

    #[test]
    fn random_queries_are_reproducible() {
        let a = random_queries(7, 10, pv(2.0), 5, 10.0);
        assert_eq!(a, random_queries(7, 10, pv(2.0), 5, 10.0));
        assert!(a.iter().all(|q| q.n >= 1 && q.n <= 5 && q.t.abs() <= 10.0));
        assert_ne!(a, random_queries(8, 10, pv(2.0), 5, 10.0));
    }

    #[test]
    fn short_t_grid_is_rejected() {
        let cfg = RunConfig {
            t_grid: GeometricGrid {
                t_min: 1.0,
                t_max: 10.0,
                points_per_decade: 8,
            },
            ..RunConfig::default()
        };
        let b = build_band(2, pv(1.0)).unwrap();
        assert!(decay_scan(&b, DecayMode::Generic, &cfg).is_err());
    }
}
