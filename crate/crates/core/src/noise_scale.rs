//! Noise-scale estimators.

use log::warn;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, NspError, Result};
use crate::Design;

/// Gaussian consistency constant of the median absolute deviation.
pub const MAD_CONSTANT: f64 = 1.4826;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleMethod {
    Rice,
    Mad,
    Mols,
    UserSupplied,
}

impl ScaleMethod {
    pub fn name(self) -> &'static str {
        match self {
            ScaleMethod::Rice => "rice",
            ScaleMethod::Mad => "mad",
            ScaleMethod::Mols => "mols",
            ScaleMethod::UserSupplied => "user_supplied",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleEstimate {
    pub method: ScaleMethod,
    pub sigma_hat: f64,
    /// Rolling window length (median-of-OLS only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
}

fn check_len(y: &[f64]) -> Result<()> {
    if y.len() < 2 {
        Err(invalid(format!(
            "need at least 2 observations, got {}",
            y.len()
        )))
    } else {
        Ok(())
    }
}

/// Median with the two middle values averaged for even counts.
pub(crate) fn median(values: &mut [f64]) -> f64 {
    let n = values.len();
    values.sort_by(f64::total_cmp);
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// `sigma^2 = sum (Y_{t+1} - Y_t)^2 / (2 (T - 1))`.
pub fn sigma_rice(y: &[f64]) -> Result<ScaleEstimate> {
    check_len(y)?;
    let ss: f64 = y.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    Ok(ScaleEstimate {
        method: ScaleMethod::Rice,
        sigma_hat: (ss / (2.0 * (y.len() - 1) as f64)).sqrt(),
        window: None,
    })
}

/// MAD of `(Y_{t+1} - Y_t) / sqrt(2)`.
pub fn sigma_mad(y: &[f64]) -> Result<ScaleEstimate> {
    check_len(y)?;
    let mut d: Vec<f64> = y
        .windows(2)
        .map(|w| (w[1] - w[0]) / std::f64::consts::SQRT_2)
        .collect();
    let centre = median(&mut d);
    let mut dev: Vec<f64> = d.iter().map(|v| (v - centre).abs()).collect();
    Ok(ScaleEstimate {
        method: ScaleMethod::Mad,
        sigma_hat: MAD_CONSTANT * median(&mut dev),
        window: None,
    })
}

/// `w = min(T, max(ceil(sqrt(T)), 20))`.
pub fn mols_window(t: usize) -> usize {
    let root = (t as f64).sqrt().ceil() as usize;
    t.min(root.max(20))
}

/// Window length and the per-window OLS residual standard deviations
/// (divisor `w - p`). Rank-deficient windows are left out.
pub fn mols_local_sigmas(y: &[f64], x: &Design) -> Result<(usize, Vec<f64>)> {
    let t = y.len();
    if x.nrows() != t {
        return Err(NspError::Dimension(format!(
            "response has {t} rows, design has {}",
            x.nrows()
        )));
    }
    let p = x.ncols();
    let w = mols_window(t);
    if w <= p {
        return Err(invalid(format!(
            "window length {w} does not exceed {p} regressors"
        )));
    }
    let fits: Vec<Option<f64>> = (0..=t - w)
        .into_par_iter()
        .map(|start| window_sigma(&y[start..start + w], &x.rows(start, w).into_owned()))
        .collect();
    let skipped = fits.iter().filter(|f| f.is_none()).count();
    if skipped > 0 {
        warn!("{skipped} rank-deficient windows left out of the median-of-OLS estimate");
    }
    let sigmas: Vec<f64> = fits.into_iter().flatten().collect();
    if sigmas.is_empty() {
        return Err(NspError::Domain(
            "every rolling window is rank deficient".into(),
        ));
    }
    Ok((w, sigmas))
}

fn window_sigma(y: &[f64], x: &DMatrix<f64>) -> Option<f64> {
    let (n, p) = x.shape();
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * n.max(p) as f64 * f64::EPSILON;
    if smax == 0.0 || svd.singular_values.iter().any(|&s| s <= tol) {
        return None;
    }
    let b = DVector::from_column_slice(y);
    let beta = svd.solve(&b, tol).ok()?;
    let resid = b - x * beta;
    Some((resid.norm_squared() / (n - p) as f64).sqrt())
}

/// Median of rolling-window OLS residual standard deviations.
pub fn sigma_mols(y: &[f64], x: &Design) -> Result<ScaleEstimate> {
    let (w, mut sigmas) = mols_local_sigmas(y, x)?;
    Ok(ScaleEstimate {
        method: ScaleMethod::Mols,
        sigma_hat: median(&mut sigmas),
        window: Some(w),
    })
}

/// `V_T^2 = T / (T - w + 1) * sum_t sigma_t^2` over the rolling windows.
pub fn vt_estimate(y: &[f64], x: &Design) -> Result<f64> {
    let (_, sigmas) = mols_local_sigmas(y, x)?;
    let total: f64 = sigmas.iter().map(|s| s * s).sum();
    Ok(y.len() as f64 / sigmas.len() as f64 * total)
}

pub fn user_supplied(sigma: f64) -> Result<ScaleEstimate> {
    if sigma.is_finite() && sigma > 0.0 {
        Ok(ScaleEstimate {
            method: ScaleMethod::UserSupplied,
            sigma_hat: sigma,
            window: None,
        })
    } else {
        Err(invalid(format!("sigma must be positive, got {sigma}")))
    }
}
