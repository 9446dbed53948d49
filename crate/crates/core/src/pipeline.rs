//! End-to-end detection: design construction, noise-scale estimation,
//! threshold calibration, the search itself and the post-inference reports.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::engine::{nsp_run, DeviationMode, NspConfig, Overlap, Sampling, SignificanceSet};
use crate::error::{invalid, NspError, Result};
use crate::noise_scale::{sigma_mad, sigma_mols, sigma_rice, user_supplied, ScaleEstimate};
use crate::scenarios::{ScenarioKind, ScenarioSpec, SeriesData};
use crate::selection::{
    prominence_order, segment_pvalues, GapPValue, PValueContext, ProminenceReport,
};
use crate::sequences::FamilyKind;
use crate::thresholds::{
    gaussian_sampler, gaussian_threshold, hazen_quantile, light_tailed_threshold,
    monte_carlo_norms, self_normalised_quantile_cached, ThresholdCache, ThresholdMethod,
    ThresholdParams, ThresholdSpec, DEFAULT_EPSILON,
};
use crate::Design;

/// How the noise scale is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SigmaRepr", into = "SigmaRepr")]
pub enum SigmaChoice {
    Rice,
    Mad,
    Mols,
    Value(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SigmaRepr {
    Value(f64),
    Name(String),
}

impl TryFrom<SigmaRepr> for SigmaChoice {
    type Error = String;

    fn try_from(r: SigmaRepr) -> std::result::Result<Self, String> {
        match r {
            SigmaRepr::Value(v) => SigmaChoice::from_str(&v.to_string()),
            SigmaRepr::Name(s) => SigmaChoice::from_str(&s),
        }
    }
}

impl From<SigmaChoice> for SigmaRepr {
    fn from(c: SigmaChoice) -> Self {
        match c {
            SigmaChoice::Value(v) => SigmaRepr::Value(v),
            other => SigmaRepr::Name(other.to_string()),
        }
    }
}

impl FromStr for SigmaChoice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rice" => Ok(SigmaChoice::Rice),
            "mad" => Ok(SigmaChoice::Mad),
            "mols" => Ok(SigmaChoice::Mols),
            other => match other.parse::<f64>() {
                Ok(v) if v.is_finite() && v > 0.0 => Ok(SigmaChoice::Value(v)),
                _ => Err(format!(
                    "expected rice, mad, mols or a positive number, got '{s}'"
                )),
            },
        }
    }
}

impl fmt::Display for SigmaChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SigmaChoice::Rice => f.write_str("rice"),
            SigmaChoice::Mad => f.write_str("mad"),
            SigmaChoice::Mols => f.write_str("mols"),
            SigmaChoice::Value(v) => write!(f, "{v}"),
        }
    }
}

/// Calibration used with the plain deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThresholdChoice {
    Gaussian,
    LightTailed {
        d: u32,
        kappa: f64,
    },
    /// Gaussian noise simulated at unit scale, then rescaled by sigma.
    MonteCarlo {
        n_rep: usize,
        seed: u64,
        family: FamilyKind,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelfNormSettings {
    pub epsilon: f64,
    pub n_rep: usize,
    pub grid_size: usize,
    pub seed: u64,
    /// Overrides the shortest sub-interval of the deviation.
    pub min_length: Option<usize>,
}

impl Default for SelfNormSettings {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            n_rep: 5000,
            grid_size: 1024,
            seed: 1,
            min_length: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectSettings {
    pub scenario: ScenarioSpec,
    pub alpha: f64,
    pub m: usize,
    pub sampling: Sampling,
    pub overlap: Overlap,
    /// Defaults to MAD for constant and polynomial designs without lags and
    /// to median-of-OLS otherwise.
    pub sigma: Option<SigmaChoice>,
    pub threshold: ThresholdChoice,
    /// Switches to the self-normalised deviation and threshold.
    pub selfnorm: Option<SelfNormSettings>,
    pub seed: u64,
    pub two_stage: bool,
    /// Compute deviations and p-value bounds on the gaps between detections.
    pub gap_pvalues: bool,
}

impl Default for DetectSettings {
    fn default() -> Self {
        Self {
            scenario: ScenarioSpec::new(ScenarioKind::PiecewiseConstant),
            alpha: 0.1,
            m: 1000,
            sampling: Sampling::Grid,
            overlap: Overlap::None,
            sigma: None,
            threshold: ThresholdChoice::Gaussian,
            selfnorm: None,
            seed: 0,
            two_stage: true,
            gap_pvalues: true,
        }
    }
}

impl DetectSettings {
    pub fn sigma_choice(&self) -> SigmaChoice {
        self.sigma.unwrap_or(if self.scenario.full_rank_windows() {
            SigmaChoice::Mad
        } else {
            SigmaChoice::Mols
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectOutput {
    /// Detections in the coordinates of the input series.
    pub significance: SignificanceSet,
    pub threshold: ThresholdSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<ScaleEstimate>,
    pub prominence: ProminenceReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gaps: Option<Vec<GapPValue>>,
    pub config: NspConfig,
    /// Sum of `e - s` over the detections.
    pub total_length: usize,
}

/// Settings plus any calibration that does not depend on the data.
#[derive(Clone, Debug)]
pub struct Detector {
    settings: DetectSettings,
    /// Self-normalised quantile.
    sn_threshold: Option<ThresholdSpec>,
    /// Unit-scale Monte Carlo norms for the effective series length.
    mc_norms: Option<(usize, Vec<f64>)>,
}

impl Detector {
    /// Prepares a detector for input series of length `t`.
    pub fn new(settings: DetectSettings, t: usize) -> Result<Self> {
        Self::with_cache(settings, t, None)
    }

    pub fn with_cache(
        settings: DetectSettings,
        t: usize,
        cache: Option<&mut ThresholdCache>,
    ) -> Result<Self> {
        if !(settings.alpha > 0.0 && settings.alpha < 1.0) {
            return Err(invalid(format!(
                "alpha must lie in (0, 1), got {}",
                settings.alpha
            )));
        }
        if settings.m == 0 {
            return Err(invalid("M must be at least 1"));
        }
        let n_eff = t.saturating_sub(settings.scenario.ar_order);
        let sn_threshold = match settings.selfnorm {
            None => None,
            Some(sn) => Some(self_normalised_quantile_cached(
                settings.alpha,
                sn.epsilon,
                sn.n_rep,
                sn.grid_size,
                sn.seed,
                cache,
            )?),
        };
        let mc_norms = match (settings.selfnorm, settings.threshold) {
            (
                None,
                ThresholdChoice::MonteCarlo {
                    n_rep,
                    seed,
                    family,
                },
            ) => {
                if n_rep < 100 {
                    return Err(invalid(format!(
                        "at least 100 replicates required, got {n_rep}"
                    )));
                }
                Some((
                    n_eff,
                    monte_carlo_norms(n_eff, gaussian_sampler, family, n_rep, seed)?,
                ))
            }
            _ => None,
        };
        Ok(Self {
            settings,
            sn_threshold,
            mc_norms,
        })
    }

    pub fn settings(&self) -> &DetectSettings {
        &self.settings
    }

    pub fn detect(&self, y: &[f64], custom: Option<&Design>) -> Result<DetectOutput> {
        self.detect_seeded(y, custom, self.settings.seed)
    }

    /// As [`Detector::detect`] with the sampling seed replaced by `seed`.
    pub fn detect_seeded(
        &self,
        y: &[f64],
        custom: Option<&Design>,
        seed: u64,
    ) -> Result<DetectOutput> {
        let st = &self.settings;
        let data = SeriesData::prepare(&st.scenario, y, custom)?;
        let n = data.y.len();
        let r = st.scenario.ar_order;

        let (scale, threshold, deviation) = match (&self.sn_threshold, st.selfnorm) {
            (Some(th), Some(sn)) => (
                None,
                th.clone(),
                DeviationMode::SelfNormalised {
                    epsilon: sn.epsilon,
                    vt2: None,
                    min_length: sn.min_length,
                },
            ),
            _ => {
                let scale = estimate_scale(st.sigma_choice(), &data)?;
                if !(scale.sigma_hat > 0.0) {
                    return Err(NspError::Domain(
                        "estimated noise scale is zero; supply a positive sigma".into(),
                    ));
                }
                let th = self.plain_threshold(n, scale)?;
                (Some(scale), th, DeviationMode::Plain)
            }
        };

        let config = NspConfig {
            m: st.m,
            threshold: threshold.clone(),
            sampling: st.sampling,
            overlap: st.overlap,
            seed,
            deviation,
            ar_order: r,
            rank_aware: st.scenario.full_rank_windows(),
            two_stage: st.two_stage,
        };
        let set = nsp_run(&data.y, &data.x, &config)?;

        let gaps = match (st.gap_pvalues, scale) {
            (true, Some(scale)) => {
                let ctx = match &self.mc_norms {
                    Some((_, norms)) => PValueContext::Empirical {
                        sorted: norms.iter().map(|v| v * scale.sigma_hat).collect(),
                    },
                    None => PValueContext::Gaussian {
                        length: n,
                        sigma: scale.sigma_hat,
                    },
                };
                let mut gaps = segment_pvalues(&data.y, &data.x, &set, &ctx, r)?;
                for g in &mut gaps {
                    g.segment = g.segment.shift(data.offset);
                }
                Some(gaps)
            }
            _ => None,
        };

        let significance = set.shifted(data.offset);
        let prominence = prominence_order(&significance);
        let total_length = significance
            .detections
            .iter()
            .map(|d| d.interval.width())
            .sum();
        Ok(DetectOutput {
            significance,
            threshold,
            scale,
            prominence,
            gaps,
            config,
            total_length,
        })
    }

    fn plain_threshold(&self, n: usize, scale: ScaleEstimate) -> Result<ThresholdSpec> {
        let st = &self.settings;
        let name = Some(scale.method.name());
        let mut spec = match st.threshold {
            ThresholdChoice::Gaussian => gaussian_threshold(n, st.alpha, scale.sigma_hat)?,
            ThresholdChoice::LightTailed { d, kappa } => {
                light_tailed_threshold(n, st.alpha, d, kappa)?.with_sigma(scale.sigma_hat, name)?
            }
            ThresholdChoice::MonteCarlo {
                n_rep,
                seed,
                family,
            } => {
                let (len, norms) = self.mc_norms.as_ref().expect("prepared in constructor");
                if *len != n {
                    return Err(NspError::Dimension(format!(
                        "detector calibrated for length {len}, series has {n} usable points"
                    )));
                }
                ThresholdSpec {
                    method: ThresholdMethod::MonteCarlo,
                    alpha: st.alpha,
                    length: Some(n),
                    sigma: Some(scale.sigma_hat),
                    lambda: hazen_quantile(norms, 1.0 - st.alpha) * scale.sigma_hat,
                    gamma: None,
                    params: ThresholdParams::MonteCarlo {
                        n_rep,
                        seed,
                        family,
                    },
                    sigma_estimator: None,
                }
            }
        };
        spec.sigma_estimator = name.map(str::to_owned);
        Ok(spec)
    }
}

pub fn estimate_scale(choice: SigmaChoice, data: &SeriesData) -> Result<ScaleEstimate> {
    match choice {
        SigmaChoice::Rice => sigma_rice(&data.y),
        SigmaChoice::Mad => sigma_mad(&data.y),
        SigmaChoice::Mols => sigma_mols(&data.y, &data.x),
        SigmaChoice::Value(v) => user_supplied(v),
    }
}
