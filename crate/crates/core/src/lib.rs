//! Narrowest Significance Pursuit (NSP).
//!
//! Given a response series `Y` and a postulated linear model with design
//! matrix `X`, NSP returns the shortest intervals that each must contain a
//! change in the model parameters, at a prescribed global significance level.
//!
//! The crate is organised bottom-up:
//!
//! * [`sequences`]: scaled partial sums and multiresolution sup-norms,
//! * [`minimax`]: sup-norm (Chebyshev-type) fits via linear programming,
//! * [`thresholds`]: calibration of the significance threshold,
//! * [`noise_scale`]: estimators of the noise scale,
//! * [`scenarios`]: design matrices for the supported model families,
//! * [`engine`]: the recursive interval search itself,
//! * [`selection`]: post-inference utilities (location, prominence, p-values),
//! * [`sim`]: signal/noise generators and replicated coverage experiments,
//! * [`pipeline`]: end-to-end calibration and detection used by the CLI.
//!
//! Intervals are 1-based and closed throughout, `[s, e]` with `1 <= s <= e <= T`.

pub mod engine;
pub mod error;
pub mod interval;
mod linalg;
pub mod minimax;
pub mod noise_scale;
pub mod pipeline;
pub mod random;
pub mod scenarios;
pub mod selection;
pub mod sequences;
pub mod sim;
mod simplex;
pub mod thresholds;

pub use engine::{
    nsp_run, Detection, DeviationMode, NspConfig, Overlap, Sampling, SignificanceSet,
};
pub use error::{NspError, Result};
pub use interval::Interval;
pub use nalgebra::DMatrix;

/// Design matrices are dense, column-major `T x p` matrices.
pub type Design = DMatrix<f64>;
