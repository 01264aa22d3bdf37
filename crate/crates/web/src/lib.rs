//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every export returns a flat `Float64Array` of `(abscissa, value)` pairs.

use kronig_penney::experiments::cell_grid;
use kronig_penney::propagator::{kernel_grid, QuadratureSpec};
use kronig_penney::{build_band, PotentialStrength};
use wasm_bindgen::prelude::*;

/// Node budget per kernel call, so the page stays responsive.
pub const BROWSER_NODE_CAP: usize = 4_000_000;

fn js_err(e: kronig_penney::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// `(θ, λ_n(θ))` on `[−π, π]`.
pub fn band_curve_values(n: u32, v: f64, points: usize) -> kronig_penney::Result<Vec<f64>> {
    let band = build_band(n, PotentialStrength::new(v)?)?;
    let points = points.max(2);
    let mut out = Vec::with_capacity(2 * points);
    for i in 0..points {
        let m = (points - 1) as f64;
        let theta = std::f64::consts::PI * (2.0 * i as f64 - m) / m;
        out.push(theta);
        out.push(band.lambda_jet(theta)?.lambda);
    }
    Ok(out)
}

/// `(k, D(k))` on `(0, k_max]`.
pub fn discriminant_values(v: f64, k_max: f64, points: usize) -> kronig_penney::Result<Vec<f64>> {
    let v = PotentialStrength::new(v)?;
    let points = points.max(1);
    Ok(
        kronig_penney::experiments::discriminant_curve(v, k_max, points)
            .into_iter()
            .flat_map(|r| [r.k, r.d])
            .collect(),
    )
}

/// `(x, |K_{n,t}(x, y')|)` for `x` over the cells `−cells … cells` with
/// `per_cell` points in each and `y' ∈ (0, 1)` in cell zero.
pub fn kernel_profile_values(
    n: u32,
    v: f64,
    t: f64,
    y: f64,
    cells: u32,
    per_cell: usize,
) -> kronig_penney::Result<Vec<f64>> {
    let band = build_band(n, PotentialStrength::new(v)?)?;
    let spec = QuadratureSpec {
        node_cap: BROWSER_NODE_CAP,
        ..QuadratureSpec::default()
    };
    let xs = cell_grid(per_cell.max(1));
    let c = cells as i64;
    let mut out = Vec::with_capacity(2 * xs.len() * (2 * cells as usize + 1));
    for offset in -c..=c {
        let k = kernel_grid(&band, t, offset, &xs, &[y], &spec)?;
        for (x, z) in xs.iter().zip(&k.values) {
            out.push(offset as f64 + x);
            out.push(z.norm());
        }
    }
    Ok(out)
}

#[wasm_bindgen]
pub fn band_curve(n: u32, v: f64, points: usize) -> Result<Vec<f64>, JsError> {
    band_curve_values(n, v, points).map_err(js_err)
}

#[wasm_bindgen]
pub fn discriminant_curve(v: f64, k_max: f64, points: usize) -> Result<Vec<f64>, JsError> {
    discriminant_values(v, k_max, points).map_err(js_err)
}

#[wasm_bindgen]
pub fn kernel_profile(
    n: u32,
    v: f64,
    t: f64,
    y: f64,
    cells: u32,
    per_cell: usize,
) -> Result<Vec<f64>, JsError> {
    kernel_profile_values(n, v, t, y, cells, per_cell).map_err(js_err)
}
