//! Least-squares power-law fits in log–log coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    pub slope: f64,
    pub log_c: f64,
    pub r_squared: f64,
}

/// Fit `y ≈ C x^slope` by ordinary least squares on `(ln x, ln y)`.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> Result<PowerFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "log-log fit needs two equally long samples of length >= 2, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "log-log fit needs positive finite data".into(),
        ));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let m = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = ly.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument(
            "log-log fit needs distinct abscissae".into(),
        ));
    }
    let slope = sxy / sxx;
    let log_c = my - slope * mx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    Ok(PowerFit {
        slope,
        log_c,
        r_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_power_law() {
        let x = [1.0, 10.0, 100.0, 1000.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-1.0 / 3.0)).collect();
        let fit = loglog_fit(&x, &y).unwrap();
        assert!((fit.slope + 1.0 / 3.0).abs() < 1e-12);
        assert!((fit.log_c - 3.0f64.ln()).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_positive_data() {
        assert!(loglog_fit(&[1.0, 2.0], &[1.0, 0.0]).is_err());
        assert!(loglog_fit(&[1.0], &[1.0]).is_err());
    }
}
