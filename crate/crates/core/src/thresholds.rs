//! Significance thresholds.
//!
//! A threshold `lambda` is calibrated so that the multiresolution sup-norm of
//! pure noise exceeds it with probability at most `alpha`. Four calibrations
//! are provided: the Gaussian extreme-value asymptotics, the light-tailed
//! family, plain Monte Carlo over a noise sampler, and the Wiener functional
//! quantile used by the self-normalised deviation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, NspError, Result};
use crate::random::stream_rng;
use crate::sequences::{dyadic_norm, norm_all_intervals, FamilyKind};
use crate::Interval;

/// Constant `H` of the Gaussian scan-statistic limit.
pub const H_CONSTANT: f64 = 0.82;

/// Default `epsilon` of the self-normalised statistic.
pub const DEFAULT_EPSILON: f64 = 0.03;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMethod {
    GaussianAsymptotic,
    LightTailed,
    MonteCarlo,
    SelfNormalised,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThresholdParams {
    Gaussian {
        h: f64,
    },
    LightTailed {
        d: u32,
        kappa: f64,
    },
    MonteCarlo {
        n_rep: usize,
        seed: u64,
        family: FamilyKind,
    },
    SelfNormalised {
        epsilon: f64,
        c: f64,
        n_rep: usize,
        grid_size: usize,
        seed: u64,
    },
}

/// A calibrated threshold with enough metadata to reproduce it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSpec {
    pub method: ThresholdMethod,
    pub alpha: f64,
    /// Series length the threshold was calibrated for (absent for the
    /// length-free self-normalised quantile).
    pub length: Option<usize>,
    /// Noise scale the threshold is expressed in, if any.
    pub sigma: Option<f64>,
    pub lambda: f64,
    pub gamma: Option<f64>,
    pub params: ThresholdParams,
    /// Name of the noise-scale estimator that produced `sigma`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_estimator: Option<String>,
}

impl ThresholdSpec {
    /// Rescales a unit-noise threshold to noise scale `sigma`.
    pub fn with_sigma(mut self, sigma: f64, estimator: Option<&str>) -> Result<Self> {
        check_sigma(sigma)?;
        let base = self.sigma.unwrap_or(1.0);
        self.lambda *= sigma / base;
        self.sigma = Some(sigma);
        self.sigma_estimator = estimator.map(str::to_owned);
        Ok(self)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma.is_finite() && sigma > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("sigma must be positive, got {sigma}")))
    }
}

/// `gamma = -log(-log(1 - alpha) / 2)`, the inverse of
/// `alpha = 1 - exp(-2 exp(-gamma))`.
pub fn gamma_from_alpha(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(-(-(-alpha).ln_1p() / 2.0).ln())
}

/// Normalising constants `(a_T, b_T)` of the Gaussian limit.
pub fn gaussian_constants(t: usize) -> Result<(f64, f64)> {
    if t < 2 {
        return Err(invalid(format!(
            "series length must be at least 2, got {t}"
        )));
    }
    let log_t = (t as f64).ln();
    let loglog = log_t.ln();
    if loglog <= 0.0 {
        return Err(NspError::Domain(format!(
            "log log T is not positive for T = {t}"
        )));
    }
    let root = (2.0 * log_t).sqrt();
    let a = root + (0.5 * loglog + (H_CONSTANT / (2.0 * std::f64::consts::PI.sqrt())).ln()) / root;
    Ok((a, 1.0 / root))
}

/// `lambda = sigma * (a_T + b_T * gamma)`.
pub fn gaussian_threshold(t: usize, alpha: f64, sigma: f64) -> Result<ThresholdSpec> {
    check_sigma(sigma)?;
    let gamma = gamma_from_alpha(alpha)?;
    let (a, b) = gaussian_constants(t)?;
    Ok(ThresholdSpec {
        method: ThresholdMethod::GaussianAsymptotic,
        alpha,
        length: Some(t),
        sigma: Some(sigma),
        lambda: sigma * (a + b * gamma),
        gamma: Some(gamma),
        params: ThresholdParams::Gaussian { h: H_CONSTANT },
        sigma_estimator: None,
    })
}

/// Upper bound `1 - exp(-2 exp(-gamma(D)))` on the probability that the noise
/// norm exceeds `d`, with `gamma(D) = (D / sigma - a_T) / b_T`.
pub fn pvalue_upper_bound(d: f64, t: usize, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    if !(d >= 0.0) {
        return Err(invalid(format!("deviation must be non-negative, got {d}")));
    }
    let (a, b) = gaussian_constants(t)?;
    let gamma = (d / sigma - a) / b;
    let p = -(-2.0 * (-gamma).exp()).exp_m1();
    Ok(p.clamp(0.0, 1.0))
}

/// `Lambda_{d, kappa} = pi^(-1/2) Gamma(d / (d - 2)) (2 kappa)^(2 / (d - 2))`.
pub fn light_tailed_lambda_constant(d: u32, kappa: f64) -> Result<f64> {
    if d < 3 {
        return Err(invalid(format!("d must be at least 3, got {d}")));
    }
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(invalid(format!("kappa must be positive, got {kappa}")));
    }
    let df = d as f64;
    Ok(
        statrs::function::gamma::gamma(df / (df - 2.0)) * (2.0 * kappa).powf(2.0 / (df - 2.0))
            / std::f64::consts::PI.sqrt(),
    )
}

/// Light-tailed threshold for unit-variance noise. The two-sided level uses
/// `alpha = 1 - exp(-2 Lambda exp(-gamma))`.
pub fn light_tailed_threshold(t: usize, alpha: f64, d: u32, kappa: f64) -> Result<ThresholdSpec> {
    check_alpha(alpha)?;
    let big_lambda = light_tailed_lambda_constant(d, kappa)?;
    if t < 3 {
        return Err(invalid(format!(
            "series length must be at least 3, got {t}"
        )));
    }
    let gamma = -(-(-alpha).ln_1p() / (2.0 * big_lambda)).ln();
    let df = d as f64;
    let log_t = (t as f64).ln();
    let inner = log_t + (df - 6.0) / (2.0 * (df - 2.0)) * log_t.ln() + gamma;
    if inner <= 0.0 {
        return Err(NspError::Domain(format!(
            "light-tailed threshold undefined for T = {t}, alpha = {alpha}"
        )));
    }
    Ok(ThresholdSpec {
        method: ThresholdMethod::LightTailed,
        alpha,
        length: Some(t),
        sigma: Some(1.0),
        lambda: (2.0 * inner).sqrt(),
        gamma: Some(gamma),
        params: ThresholdParams::LightTailed { d, kappa },
        sigma_estimator: None,
    })
}

/// Interpolated order statistic with the midpoint (Hazen) convention: the
/// `i`-th smallest of `n` values sits at probability `(i - 1/2) / n`.
/// `sorted` must be ascending and non-empty.
pub fn hazen_quantile(sorted: &[f64], prob: f64) -> f64 {
    let n = sorted.len();
    let h = n as f64 * prob + 0.5;
    if h <= 1.0 {
        return sorted[0];
    }
    if h >= n as f64 {
        return sorted[n - 1];
    }
    let lo = h.floor();
    let i = lo as usize - 1;
    sorted[i] + (h - lo) * (sorted[i + 1] - sorted[i])
}

/// Sorted noise norms from `n_rep` replicates. Replicate `i` draws from its
/// own stream, so the sample is identical for any thread count.
pub fn monte_carlo_norms<F>(
    t: usize,
    sampler: F,
    family: FamilyKind,
    n_rep: usize,
    seed: u64,
) -> Result<Vec<f64>>
where
    F: Fn(&mut ChaCha8Rng, &mut [f64]) -> Result<()> + Sync,
{
    if t == 0 {
        return Err(invalid("series length must be positive"));
    }
    let mut norms = (0..n_rep)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let mut z = vec![0.0; t];
            sampler(&mut rng, &mut z).map_err(|e| NspError::Replicate {
                index: i,
                source: Box::new(e),
            })?;
            Ok(match family {
                FamilyKind::Dyadic => dyadic_norm(&z).value,
                FamilyKind::All => norm_all_intervals(&z, Interval::new(1, t))?,
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    norms.sort_by(f64::total_cmp);
    Ok(norms)
}

/// Empirical `1 - alpha` quantile of the noise norm.
pub fn monte_carlo_threshold<F>(
    t: usize,
    alpha: f64,
    sampler: F,
    family: FamilyKind,
    n_rep: usize,
    seed: u64,
) -> Result<ThresholdSpec>
where
    F: Fn(&mut ChaCha8Rng, &mut [f64]) -> Result<()> + Sync,
{
    check_alpha(alpha)?;
    if n_rep < 100 {
        return Err(invalid(format!(
            "at least 100 replicates required, got {n_rep}"
        )));
    }
    let norms = monte_carlo_norms(t, sampler, family, n_rep, seed)?;
    Ok(ThresholdSpec {
        method: ThresholdMethod::MonteCarlo,
        alpha,
        length: Some(t),
        sigma: None,
        lambda: hazen_quantile(&norms, 1.0 - alpha),
        gamma: None,
        params: ThresholdParams::MonteCarlo {
            n_rep,
            seed,
            family,
        },
        sigma_estimator: None,
    })
}

/// Standard Gaussian sampler for [`monte_carlo_threshold`].
pub fn gaussian_sampler(rng: &mut ChaCha8Rng, out: &mut [f64]) -> Result<()> {
    out.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
    Ok(())
}

/// `c = exp(1 + 2 epsilon)`.
pub fn self_normalised_c(epsilon: f64) -> f64 {
    (1.0 + 2.0 * epsilon).exp()
}

/// `rho(delta) = sqrt(delta) * log^(1/2 + epsilon)(c / delta)`.
pub fn rho(delta: f64, epsilon: f64) -> f64 {
    let c = self_normalised_c(epsilon);
    delta.sqrt() * (c / delta).ln().powf(0.5 + epsilon)
}

/// `sup_{u < v} |W(v) - W(u)| / rho(v - u)` for a path sampled at
/// `0, h, 2h, ..., 1` with `h = 1 / (w.len() - 1)`.
pub fn wiener_functional(w: &[f64], epsilon: f64) -> f64 {
    let denominators = rho_table(w.len(), epsilon);
    wiener_functional_with(w, &denominators)
}

fn rho_table(points: usize, epsilon: f64) -> Vec<f64> {
    let h = 1.0 / (points - 1) as f64;
    (0..points)
        .map(|lag| {
            if lag == 0 {
                f64::INFINITY
            } else {
                rho(lag as f64 * h, epsilon)
            }
        })
        .collect()
}

fn wiener_functional_with(w: &[f64], denominators: &[f64]) -> f64 {
    let n = w.len();
    let mut best = 0.0f64;
    for lag in 1..n {
        let mut m = 0.0f64;
        for (a, b) in w[..n - lag].iter().zip(&w[lag..]) {
            m = m.max((b - a).abs());
        }
        best = best.max(m / denominators[lag]);
    }
    best
}

fn check_sn_inputs(epsilon: f64, grid_size: usize) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    if grid_size < 2 {
        return Err(invalid(format!(
            "grid size must be at least 2, got {grid_size}"
        )));
    }
    Ok(())
}

/// Sorted draws of the Wiener functional over `n_rep` simulated paths.
pub fn wiener_functional_samples(
    epsilon: f64,
    n_rep: usize,
    grid_size: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    check_sn_inputs(epsilon, grid_size)?;
    let denominators = rho_table(grid_size, epsilon);
    let step_sd = (1.0 / (grid_size - 1) as f64).sqrt();
    let mut draws: Vec<f64> = (0..n_rep)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let mut w = Vec::with_capacity(grid_size);
            let mut acc = 0.0;
            w.push(acc);
            for _ in 1..grid_size {
                acc += step_sd * rng.sample::<f64, _>(StandardNormal);
                w.push(acc);
            }
            wiener_functional_with(&w, &denominators)
        })
        .collect();
    draws.sort_by(f64::total_cmp);
    Ok(draws)
}

/// `1 - alpha` quantile of the Wiener functional; does not depend on `T`.
pub fn self_normalised_quantile(
    alpha: f64,
    epsilon: f64,
    n_rep: usize,
    grid_size: usize,
    seed: u64,
) -> Result<ThresholdSpec> {
    check_alpha(alpha)?;
    if n_rep == 0 {
        return Err(invalid("at least one replicate required"));
    }
    let draws = wiener_functional_samples(epsilon, n_rep, grid_size, seed)?;
    Ok(ThresholdSpec {
        method: ThresholdMethod::SelfNormalised,
        alpha,
        length: None,
        sigma: None,
        lambda: hazen_quantile(&draws, 1.0 - alpha),
        gamma: None,
        params: ThresholdParams::SelfNormalised {
            epsilon,
            c: self_normalised_c(epsilon),
            n_rep,
            grid_size,
            seed,
        },
        sigma_estimator: None,
    })
}

/// Cache key for expensive calibrations.

/// [`self_normalised_quantile`] looked up in, and stored into, `cache`.
pub fn self_normalised_quantile_cached(
    alpha: f64,
    epsilon: f64,
    n_rep: usize,
    grid_size: usize,
    seed: u64,
    cache: Option<&mut ThresholdCache>,
) -> Result<ThresholdSpec> {
    let probe = ThresholdSpec {
        method: ThresholdMethod::SelfNormalised,
        alpha,
        length: None,
        sigma: None,
        lambda: 0.0,
        gamma: None,
        params: ThresholdParams::SelfNormalised {
            epsilon,
            c: self_normalised_c(epsilon),
            n_rep,
            grid_size,
            seed,
        },
        sigma_estimator: None,
    };
    let key = CacheKey::for_spec(&probe);
    if let Some(hit) = cache.as_ref().and_then(|c| c.get(&key)) {
        return Ok(hit.clone());
    }
    let spec = self_normalised_quantile(alpha, epsilon, n_rep, grid_size, seed)?;
    if let Some(c) = cache {
        c.insert(spec.clone());
        c.save()?;
    }
    Ok(spec)
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CacheKey {
    pub method: ThresholdMethod,
    pub length: Option<usize>,
    /// `alpha` in its exact bit pattern, printed as a decimal for readability.
    pub alpha: String,
    pub params: String,
    pub seed: Option<u64>,
}

impl CacheKey {
    pub fn for_spec(spec: &ThresholdSpec) -> Self {
        let seed = match spec.params {
            ThresholdParams::MonteCarlo { seed, .. }
            | ThresholdParams::SelfNormalised { seed, .. } => Some(seed),
            _ => None,
        };
        Self {
            method: spec.method,
            length: spec.length,
            alpha: format!("{:?}", spec.alpha),
            params: serde_json::to_string(&spec.params).unwrap_or_default(),
            seed,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    key: CacheKey,
    spec: ThresholdSpec,
}

/// JSON file of previously calibrated thresholds.
#[derive(Debug, Default)]
pub struct ThresholdCache {
    path: Option<PathBuf>,
    entries: BTreeMap<CacheKey, ThresholdSpec>,
}

impl ThresholdCache {
    /// Opens `path`, starting empty if the file does not exist yet.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let entries = match std::fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str::<Vec<CacheEntry>>(&text)
                .map_err(|e| NspError::Parse(format!("{}: {e}", path.display())))?
                .into_iter()
                .map(|c| (c.key, c.spec))
                .collect(),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => BTreeMap::new(),
            Err(e) => return Err(e.into()),
        };
        Ok(Self {
            path: Some(path),
            entries,
        })
    }

    pub fn get(&self, key: &CacheKey) -> Option<&ThresholdSpec> {
        self.entries.get(key)
    }

    pub fn insert(&mut self, spec: ThresholdSpec) {
        self.entries.insert(CacheKey::for_spec(&spec), spec);
    }

    pub fn save(&self) -> Result<()> {
        let Some(path) = &self.path else {
            return Ok(());
        };
        let entries: Vec<CacheEntry> = self
            .entries
            .iter()
            .map(|(k, s)| CacheEntry {
                key: k.clone(),
                spec: s.clone(),
            })
            .collect();
        let text =
            serde_json::to_string_pretty(&entries).map_err(|e| NspError::Parse(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }
}
