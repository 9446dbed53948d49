//! Design matrices for the supported model families.
//!
//! * piecewise constant: a single column of ones,
//! * piecewise polynomial of degree `q`: columns `(t/T)^(i-1)`, `i = 1..=q+1`,
//! * custom regression: a user-supplied `T x p` matrix,
//!
//! each optionally augmented with `r` autoregressive lags of the response.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, NspError, Result};
use crate::Design;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioKind {
    PiecewiseConstant,
    PiecewisePolynomial { degree: usize },
    CustomRegression,
}

/// A base scenario plus the autoregressive order (`0` for none).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    #[serde(default)]
    pub ar_order: usize,
}

impl ScenarioSpec {
    pub fn new(kind: ScenarioKind) -> Self {
        Self { kind, ar_order: 0 }
    }

    pub fn with_autoregression(kind: ScenarioKind, order: usize) -> Self {
        Self {
            kind,
            ar_order: order,
        }
    }

    /// Whether every window of `p` consecutive rows of the design has full
    /// column rank by construction (true for constant and polynomial designs
    /// without lags).
    pub fn full_rank_windows(&self) -> bool {
        self.ar_order == 0 && !matches!(self.kind, ScenarioKind::CustomRegression)
    }

    /// Column count of the base design (before lags), if it is fixed.
    pub fn base_columns(&self) -> Option<usize> {
        match self.kind {
            ScenarioKind::PiecewiseConstant => Some(1),
            ScenarioKind::PiecewisePolynomial { degree } => Some(degree + 1),
            ScenarioKind::CustomRegression => None,
        }
    }
}

/// Builds the `T x p` base design of `kind`.
pub fn build_design(kind: ScenarioKind, t: usize, custom: Option<&Design>) -> Result<Design> {
    if t == 0 {
        return Err(invalid("series length must be positive"));
    }
    match (kind, custom) {
        (ScenarioKind::CustomRegression, None) => {
            Err(invalid("custom regression requires a design matrix"))
        }
        (ScenarioKind::CustomRegression, Some(x)) => {
            if x.nrows() != t {
                return Err(NspError::Dimension(format!(
                    "design has {} rows, series has {t}",
                    x.nrows()
                )));
            }
            if x.ncols() == 0 {
                return Err(invalid("design matrix has no columns"));
            }
            Ok(x.clone())
        }
        (_, Some(_)) => Err(invalid(
            "a design matrix is only accepted for custom regression",
        )),
        (ScenarioKind::PiecewiseConstant, None) => Ok(Design::from_element(t, 1, 1.0)),
        (ScenarioKind::PiecewisePolynomial { degree }, None) => {
            Ok(Design::from_fn(t, degree + 1, |row, col| {
                ((row + 1) as f64 / t as f64).powi(col as i32)
            }))
        }
    }
}

/// Appends lags `1..=r` of `y` to `x` and drops the first `r` rows of both.
pub fn augment_ar(y: &[f64], x: &Design, r: usize) -> Result<(Vec<f64>, Design)> {
    let t = y.len();
    let p = x.ncols();
    if r == 0 {
        return Err(invalid("autoregressive order must be at least 1"));
    }
    if x.nrows() != t {
        return Err(NspError::Dimension(format!(
            "design has {} rows, series has {t}",
            x.nrows()
        )));
    }
    if t <= r + p {
        return Err(invalid(format!(
            "series of length {t} too short for {p} regressors and {r} lags"
        )));
    }
    let rows = t - r;
    let xa = Design::from_fn(rows, p + r, |i, j| {
        let orig = i + r;
        if j < p {
            x[(orig, j)]
        } else {
            y[orig - (j - p + 1)]
        }
    });
    Ok((y[r..].to_vec(), xa))
}

/// Response and design ready for the engine, with the row offset introduced
/// by autoregressive augmentation.
#[derive(Clone, Debug)]
pub struct SeriesData {
    pub y: Vec<f64>,
    pub x: Design,
    /// Rows dropped from the front of the original series.
    pub offset: usize,
}

impl SeriesData {
    pub fn prepare(spec: &ScenarioSpec, y: &[f64], custom: Option<&Design>) -> Result<Self> {
        let x = build_design(spec.kind, y.len(), custom)?;
        if spec.ar_order == 0 {
            Ok(Self {
                y: y.to_vec(),
                x,
                offset: 0,
            })
        } else {
            let (y, x) = augment_ar(y, &x, spec.ar_order)?;
            Ok(Self {
                y,
                x,
                offset: spec.ar_order,
            })
        }
    }
}
