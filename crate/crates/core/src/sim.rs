//! Simulation harness: signal and noise generators, coverage experiments and
//! their reports.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, NspError, Result};
use crate::interval::Interval;
use crate::noise_scale::median;
use crate::pipeline::{DetectSettings, Detector, SelfNormSettings, SigmaChoice};
use crate::random::stream_rng;
use crate::scenarios::{build_design, ScenarioKind, ScenarioSpec};

/// A piecewise regression signal `f_t = X_t beta_j` on segment `j`, with
/// optional piecewise autoregression on the response.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    pub length: usize,
    /// Last index of each segment except the final one (1-based, increasing).
    pub change_points: Vec<usize>,
    #[serde(default = "default_design")]
    pub design: ScenarioKind,
    /// One coefficient vector per segment.
    pub coefficients: Vec<Vec<f64>>,
    /// One autoregressive coefficient vector per segment:
    /// `Y_t = f_t + sum_k a_k Y_{t-k} + Z_t`, with `Y_t = 0` before the start.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ar_coefficients: Option<Vec<Vec<f64>>>,
}

fn default_design() -> ScenarioKind {
    ScenarioKind::PiecewiseConstant
}

impl SignalSpec {
    /// Piecewise-constant signal with the given segment levels.
    pub fn piecewise_constant(length: usize, change_points: Vec<usize>, levels: &[f64]) -> Self {
        Self {
            length,
            change_points,
            design: ScenarioKind::PiecewiseConstant,
            coefficients: levels.iter().map(|&l| vec![l]).collect(),
            ar_coefficients: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.length == 0 {
            return Err(invalid("signal length must be positive"));
        }
        let mut prev = 0;
        for &cp in &self.change_points {
            if cp <= prev || cp >= self.length {
                return Err(invalid(format!(
                    "change-points must be increasing and inside 1..{}, got {:?}",
                    self.length, self.change_points
                )));
            }
            prev = cp;
        }
        let segments = self.change_points.len() + 1;
        if self.coefficients.len() != segments {
            return Err(invalid(format!(
                "{} segments need {} coefficient vectors, got {}",
                segments,
                segments,
                self.coefficients.len()
            )));
        }
        if let ScenarioKind::CustomRegression = self.design {
            return Err(invalid("signals cannot be generated for a custom design"));
        }
        let p = ScenarioSpec::new(self.design).base_columns().unwrap_or(1);
        if let Some(c) = self.coefficients.iter().find(|c| c.len() != p) {
            return Err(invalid(format!(
                "expected {p} coefficients per segment, got {}",
                c.len()
            )));
        }
        if let Some(ar) = &self.ar_coefficients {
            if ar.len() != segments {
                return Err(invalid(format!(
                    "{segments} segments need {segments} AR vectors, got {}",
                    ar.len()
                )));
            }
        }
        Ok(())
    }

    /// Segment index of each time point.
    fn segment_of(&self) -> Vec<usize> {
        let mut seg = 0;
        (1..=self.length)
            .map(|t| {
                let current = seg;
                if seg < self.change_points.len() && t == self.change_points[seg] {
                    seg += 1;
                }
                current
            })
            .collect()
    }
}

/// Noise-free mean `f_t`.
pub fn gen_signal(spec: &SignalSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let x = build_design(spec.design, spec.length, None)?;
    Ok(spec
        .segment_of()
        .into_iter()
        .enumerate()
        .map(|(i, j)| {
            spec.coefficients[j]
                .iter()
                .enumerate()
                .map(|(k, b)| x[(i, k)] * b)
                .sum()
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    GaussianIid {
        sigma: f64,
    },
    /// Student-t scaled to unit variance, then multiplied by a standard
    /// deviation moving linearly from `sd_start` at `t = 1` to `sd_end` at `t = T`.
    StudentT {
        df: f64,
        sd_start: f64,
        sd_end: f64,
    },
    /// Stationary Gaussian AR(1): `e_t = phi e_{t-1} + innovation_sd xi_t`.
    Ar1Gaussian {
        coefficient: f64,
        innovation_sd: f64,
    },
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            NoiseSpec::GaussianIid { sigma } => sigma >= 0.0 && sigma.is_finite(),
            NoiseSpec::StudentT {
                df,
                sd_start,
                sd_end,
            } => {
                if !(df > 2.0) {
                    return Err(invalid(format!(
                        "Student-t noise needs df > 2 for finite variance, got {df}"
                    )));
                }
                sd_start >= 0.0 && sd_end >= 0.0 && sd_start.is_finite() && sd_end.is_finite()
            }
            NoiseSpec::Ar1Gaussian {
                coefficient,
                innovation_sd,
            } => {
                if !(coefficient.abs() < 1.0) {
                    return Err(invalid(format!(
                        "AR(1) coefficient must satisfy |phi| < 1, got {coefficient}"
                    )));
                }
                innovation_sd >= 0.0 && innovation_sd.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("invalid noise scale in {self:?}")))
        }
    }

    /// Marginal standard deviation at time `t` (1-based) of a length-`len` draw.
    pub fn marginal_sd(&self, t: usize, len: usize) -> f64 {
        match *self {
            NoiseSpec::GaussianIid { sigma } => sigma,
            NoiseSpec::StudentT {
                sd_start, sd_end, ..
            } => linear_sd(sd_start, sd_end, t, len),
            NoiseSpec::Ar1Gaussian {
                coefficient,
                innovation_sd,
            } => innovation_sd / (1.0 - coefficient * coefficient).sqrt(),
        }
    }
}

fn linear_sd(start: f64, end: f64, t: usize, len: usize) -> f64 {
    if len <= 1 {
        start
    } else {
        start + (end - start) * (t - 1) as f64 / (len - 1) as f64
    }
}

pub fn gen_noise<R: Rng + ?Sized>(noise: &NoiseSpec, len: usize, rng: &mut R) -> Result<Vec<f64>> {
    noise.validate()?;
    Ok(match *noise {
        NoiseSpec::GaussianIid { sigma } => (0..len)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                sigma * z
            })
            .collect(),
        NoiseSpec::StudentT {
            df,
            sd_start,
            sd_end,
        } => {
            let dist = StudentT::new(df).map_err(|e| invalid(e.to_string()))?;
            let unit = (df / (df - 2.0)).sqrt();
            (1..=len)
                .map(|t| linear_sd(sd_start, sd_end, t, len) * dist.sample(rng) / unit)
                .collect()
        }
        NoiseSpec::Ar1Gaussian {
            coefficient,
            innovation_sd,
        } => {
            let mut out = Vec::with_capacity(len);
            let z0: f64 = StandardNormal.sample(rng);
            let mut prev = noise.marginal_sd(1, len) * z0;
            for t in 0..len {
                if t > 0 {
                    let xi: f64 = StandardNormal.sample(rng);
                    prev = coefficient * prev + innovation_sd * xi;
                }
                out.push(prev);
            }
            out
        }
    })
}

/// One draw of the observed series.
pub fn gen_series<R: Rng + ?Sized>(
    signal: &SignalSpec,
    noise: &NoiseSpec,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let f = gen_signal(signal)?;
    let z = gen_noise(noise, signal.length, rng)?;
    let Some(ar) = &signal.ar_coefficients else {
        return Ok(f.iter().zip(&z).map(|(a, b)| a + b).collect());
    };
    let seg = signal.segment_of();
    let mut y = vec![0.0; signal.length];
    for t in 0..signal.length {
        let lagged: f64 = ar[seg[t]]
            .iter()
            .enumerate()
            .filter(|(k, _)| *k < t)
            .map(|(k, a)| a * y[t - k - 1])
            .sum();
        y[t] = f[t] + lagged + z[t];
    }
    Ok(y)
}

/// True when some change-point `eta` satisfies `s <= eta <= e - 1`.
pub fn covers_change(interval: Interval, change_points: &[usize]) -> bool {
    change_points
        .iter()
        .any(|&eta| interval.start <= eta && eta < interval.end)
}

/// Change-points of the model the detector fits. A mean signal observed
/// through a lagged regression of order `r` (with no autoregression in the
/// signal spec itself) changes its regression parameters at every
/// `eta, ..., eta + r`: at `t = eta + k` the lagged responses still carry the
/// old mean.
pub fn model_change_points(spec: &ExperimentSpec) -> Vec<usize> {
    let r = spec.detector.scenario.ar_order;
    let cps = &spec.signal.change_points;
    if r == 0 || spec.signal.ar_coefficients.is_some() {
        return cps.clone();
    }
    let mut out: Vec<usize> = cps
        .iter()
        .flat_map(|&eta| eta..=(eta + r).min(spec.signal.length - 1))
        .collect();
    out.dedup();
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub signal: SignalSpec,
    pub noise: NoiseSpec,
    pub n_rep: usize,
    /// Seeds the noise draws; replicate `i` uses stream `i`.
    pub seed: u64,
    #[serde(default)]
    pub detector: DetectSettings,
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| NspError::Parse(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| NspError::Parse(e.to_string()))
    }

    /// Reads JSON or TOML depending on the file extension.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => Self::from_toml(&text),
            _ => Self::from_json(&text),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.signal.validate()?;
        self.noise.validate()?;
        if self.n_rep == 0 {
            return Err(invalid("at least one replicate required"));
        }
        Ok(())
    }
}

/// Built-in experiments.
pub mod presets {
    use super::*;

    pub const NAMES: [&str; 5] = ["squarewave", "null", "ar", "squarewave-t4", "high-snr"];

    pub fn by_name(name: &str) -> Option<ExperimentSpec> {
        match name {
            "squarewave" => Some(squarewave(3.0)),
            "null" => Some(null_gaussian(512)),
            "ar" => Some(ar_example()),
            "squarewave-t4" => Some(squarewave_t4()),
            "high-snr" => Some(high_snr()),
            _ => None,
        }
    }

    /// `T = 800`, levels `0, 10, 0, 10` switching after 200, 400 and 600.
    pub fn squarewave_signal() -> SignalSpec {
        SignalSpec::piecewise_constant(800, vec![200, 400, 600], &[0.0, 10.0, 0.0, 10.0])
    }

    pub fn squarewave(sigma: f64) -> ExperimentSpec {
        ExperimentSpec {
            name: format!("squarewave-gaussian-{sigma}"),
            signal: squarewave_signal(),
            noise: NoiseSpec::GaussianIid { sigma },
            n_rep: 100,
            seed: 1,
            detector: DetectSettings {
                m: 100,
                gap_pvalues: false,
                ..Default::default()
            },
        }
    }

    /// Pure unit Gaussian noise.
    pub fn null_gaussian(length: usize) -> ExperimentSpec {
        ExperimentSpec {
            name: format!("null-gaussian-{length}"),
            signal: SignalSpec::piecewise_constant(length, vec![], &[0.0]),
            noise: NoiseSpec::GaussianIid { sigma: 1.0 },
            n_rep: 500,
            seed: 2,
            detector: DetectSettings {
                m: 100,
                gap_pvalues: false,
                ..Default::default()
            },
        }
    }

    /// Five level shifts in stationary AR(1) noise with coefficient 0.9 and
    /// innovation sd 0.2, fitted with one lag.
    pub fn ar_example() -> ExperimentSpec {
        ExperimentSpec {
            name: "ar1-five-shifts".into(),
            signal: SignalSpec::piecewise_constant(
                1000,
                vec![150, 350, 500, 650, 850],
                &[0.0, 1.1, 0.0, 1.1, 0.0, 1.1],
            ),
            noise: NoiseSpec::Ar1Gaussian {
                coefficient: 0.9,
                innovation_sd: 0.2,
            },
            n_rep: 100,
            seed: 3,
            detector: DetectSettings {
                scenario: ScenarioSpec::with_autoregression(ScenarioKind::PiecewiseConstant, 1),
                m: 100,
                sigma: Some(SigmaChoice::Mols),
                gap_pvalues: false,
                ..Default::default()
            },
        }
    }

    /// Square wave with Student-t(4) noise whose sd grows from `2 sqrt 2` to
    /// `8 sqrt 2`, analysed with the self-normalised deviation.
    pub fn squarewave_t4() -> ExperimentSpec {
        let r2 = std::f64::consts::SQRT_2;
        ExperimentSpec {
            name: "squarewave-t4-selfnorm".into(),
            signal: squarewave_signal(),
            noise: NoiseSpec::StudentT {
                df: 4.0,
                sd_start: 2.0 * r2,
                sd_end: 8.0 * r2,
            },
            n_rep: 100,
            seed: 4,
            detector: DetectSettings {
                m: 1000,
                selfnorm: Some(SelfNormSettings::default()),
                gap_pvalues: false,
                ..Default::default()
            },
        }
    }

    /// `T = 2048` with eleven level shifts of 8 to 18 noise sds.
    pub fn high_snr_signal() -> SignalSpec {
        let cps = vec![150, 310, 420, 600, 760, 900, 1100, 1300, 1500, 1700, 1880];
        let jumps = [
            12.0, -9.0, 15.0, -18.0, 8.0, 10.0, -14.0, 9.0, 16.0, -11.0, -13.0,
        ];
        let mut levels = vec![0.0];
        for j in jumps {
            levels.push(levels.last().unwrap() + j);
        }
        SignalSpec::piecewise_constant(2048, cps, &levels)
    }

    pub fn high_snr() -> ExperimentSpec {
        ExperimentSpec {
            name: "high-snr-2048".into(),
            signal: high_snr_signal(),
            noise: NoiseSpec::GaussianIid { sigma: 1.0 },
            n_rep: 20,
            seed: 5,
            detector: DetectSettings {
                m: 1000,
                gap_pvalues: false,
                ..Default::default()
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub index: usize,
    /// Seed of the interval sampling in this replicate.
    pub nsp_seed: u64,
    pub intervals: Vec<Interval>,
    /// Detections containing a change-point of the fitted model.
    pub n_covering: usize,
    /// Every detection contains a change-point of the fitted model.
    pub all_cover: bool,
    /// Every detection contains one of the signal change-points proper.
    pub all_cover_signal: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_hat: Option<f64>,
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageResult {
    pub name: String,
    pub n_rep: usize,
    pub alpha: f64,
    /// Percentage of replicates in which every detection covers a change-point
    /// of the fitted model (see [`model_change_points`]).
    pub coverage_pct: f64,
    /// As `coverage_pct`, counting only the signal change-points themselves.
    /// The two differ only for lagged regressions.
    pub signal_coverage_pct: f64,
    /// Percentage of replicates with at least one detection.
    pub detection_pct: f64,
    /// Number of detections -> number of replicates.
    pub count_distribution: BTreeMap<usize, usize>,
    /// Median of `e - s` over all detections of all replicates.
    pub median_interval_length: Option<f64>,
    pub replicates: Vec<ReplicateRecord>,
}

impl CoverageResult {
    pub fn write_summary_json(&self, w: impl Write) -> Result<()> {
        serde_json::to_writer_pretty(w, self).map_err(|e| NspError::Io(e.into()))
    }

    /// One row per replicate; intervals are written as `s-e` separated by `;`.
    pub fn write_replicates_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| NspError::Io(std::io::Error::other(e));
        out.write_record([
            "index",
            "nsp_seed",
            "n_intervals",
            "n_covering",
            "all_cover",
            "all_cover_signal",
            "sigma_hat",
            "threshold",
            "intervals",
        ])
        .map_err(io)?;
        for r in &self.replicates {
            let ivs: Vec<String> = r
                .intervals
                .iter()
                .map(|iv| format!("{}-{}", iv.start, iv.end))
                .collect();
            out.write_record([
                r.index.to_string(),
                r.nsp_seed.to_string(),
                r.intervals.len().to_string(),
                r.n_covering.to_string(),
                r.all_cover.to_string(),
                r.all_cover_signal.to_string(),
                r.sigma_hat.map(|s| s.to_string()).unwrap_or_default(),
                r.threshold.to_string(),
                ivs.join(";"),
            ])
            .map_err(io)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Noise generator stream of replicate `i`.
pub fn replicate_rng(seed: u64, i: usize) -> ChaCha8Rng {
    stream_rng(seed, i as u64)
}

/// Runs every replicate of `spec` in parallel. Results do not depend on the
/// number of threads.
pub fn run_coverage(spec: &ExperimentSpec) -> Result<CoverageResult> {
    spec.validate()?;
    let detector = Detector::new(spec.detector.clone(), spec.signal.length)?;
    let cps = model_change_points(spec);
    let signal_cps = &spec.signal.change_points;
    let replicates = (0..spec.n_rep)
        .into_par_iter()
        .map(|i| {
            let wrap = |e| NspError::Replicate {
                index: i,
                source: Box::new(e),
            };
            let mut rng = replicate_rng(spec.seed, i);
            let y = gen_series(&spec.signal, &spec.noise, &mut rng).map_err(wrap)?;
            let nsp_seed = spec.detector.seed.wrapping_add(i as u64);
            let out = detector.detect_seeded(&y, None, nsp_seed).map_err(wrap)?;
            let intervals = out.significance.intervals();
            let n_covering = intervals
                .iter()
                .filter(|iv| covers_change(**iv, &cps))
                .count();
            let all_cover_signal = intervals.iter().all(|iv| covers_change(*iv, signal_cps));
            Ok(ReplicateRecord {
                index: i,
                nsp_seed,
                all_cover: n_covering == intervals.len(),
                n_covering,
                all_cover_signal,
                intervals,
                sigma_hat: out.scale.map(|s| s.sigma_hat),
                threshold: out.threshold.lambda,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarise(spec, replicates))
}

fn summarise(spec: &ExperimentSpec, replicates: Vec<ReplicateRecord>) -> CoverageResult {
    let n = replicates.len();
    let pct = |k: usize| 100.0 * k as f64 / n as f64;
    let mut count_distribution = BTreeMap::new();
    for r in &replicates {
        *count_distribution.entry(r.intervals.len()).or_insert(0) += 1;
    }
    let mut lengths: Vec<f64> = replicates
        .iter()
        .flat_map(|r| r.intervals.iter().map(|iv| iv.width() as f64))
        .collect();
    CoverageResult {
        name: spec.name.clone(),
        n_rep: n,
        alpha: spec.detector.alpha,
        coverage_pct: pct(replicates.iter().filter(|r| r.all_cover).count()),
        signal_coverage_pct: pct(replicates.iter().filter(|r| r.all_cover_signal).count()),
        detection_pct: pct(replicates
            .iter()
            .filter(|r| !r.intervals.is_empty())
            .count()),
        count_distribution,
        median_interval_length: (!lengths.is_empty()).then(|| median(&mut lengths)),
        replicates,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn squarewave_signal_levels() {
        let f = gen_signal(&presets::squarewave_signal()).unwrap();
        assert_eq!(f.len(), 800);
        assert_eq!(
            (f[199], f[200], f[399], f[400], f[600]),
            (0.0, 10.0, 10.0, 0.0, 10.0)
        );
    }

    #[test]
    fn invalid_signals_rejected() {
        let mut s = presets::squarewave_signal();
        s.change_points = vec![400, 200, 600];
        assert!(gen_signal(&s).is_err());
        let mut s = presets::squarewave_signal();
        s.coefficients.pop();
        assert!(gen_signal(&s).is_err());
        let s = SignalSpec::piecewise_constant(10, vec![10], &[0.0, 1.0]);
        assert!(gen_signal(&s).is_err());
    }

    #[test]
    fn linear_segments() {
        let s = SignalSpec {
            length: 4,
            change_points: vec![2],
            design: ScenarioKind::PiecewisePolynomial { degree: 1 },
            coefficients: vec![vec![0.0, 4.0], vec![1.0, 0.0]],
            ar_coefficients: None,
        };
        assert_eq!(gen_signal(&s).unwrap(), vec![1.0, 2.0, 1.0, 1.0]);
    }

    #[test]
    fn student_t_requires_finite_variance() {
        let n = NoiseSpec::StudentT {
            df: 2.0,
            sd_start: 1.0,
            sd_end: 1.0,
        };
        assert!(gen_noise(&n, 10, &mut stream_rng(0, 0)).is_err());
    }

    #[test]
    fn noise_moments() {
        let mut rng = stream_rng(9, 0);
        let n = 200_000;
        let t = gen_noise(
            &NoiseSpec::StudentT {
                df: 5.0,
                sd_start: 2.0,
                sd_end: 2.0,
            },
            n,
            &mut rng,
        )
        .unwrap();
        let var = t.iter().map(|v| v * v).sum::<f64>() / n as f64;
        assert!((var - 4.0).abs() < 0.15, "{var}");
        let ar = gen_noise(
            &NoiseSpec::Ar1Gaussian {
                coefficient: 0.9,
                innovation_sd: 0.2,
            },
            n,
            &mut rng,
        )
        .unwrap();
        let var = ar.iter().map(|v| v * v).sum::<f64>() / n as f64;
        let target = 0.04 / 0.19;
        assert!((var - target).abs() < 0.02, "{var} vs {target}");
        let lag1 = ar.windows(2).map(|w| w[0] * w[1]).sum::<f64>() / (n - 1) as f64 / var;
        assert!((lag1 - 0.9).abs() < 0.01, "{lag1}");
    }

    #[test]
    fn ar_response_recursion() {
        let s = SignalSpec {
            ar_coefficients: Some(vec![vec![0.5]]),
            ..SignalSpec::piecewise_constant(4, vec![], &[1.0])
        };
        let y = gen_series(
            &s,
            &NoiseSpec::GaussianIid { sigma: 0.0 },
            &mut stream_rng(0, 0),
        )
        .unwrap();
        assert_eq!(y, vec![1.0, 1.5, 1.75, 1.875]);
    }

    #[test]
    fn coverage_definition() {
        assert!(covers_change(Interval::new(199, 201), &[200]));
        assert!(covers_change(Interval::new(200, 201), &[200]));
        assert!(!covers_change(Interval::new(201, 205), &[200]));
        assert!(!covers_change(Interval::new(190, 200), &[200]));
    }

    #[test]
    fn lagged_model_change_points() {
        let spec = presets::ar_example();
        assert_eq!(
            model_change_points(&spec),
            vec![150, 151, 350, 351, 500, 501, 650, 651, 850, 851]
        );
        assert_eq!(
            model_change_points(&presets::squarewave(1.0)),
            vec![200, 400, 600]
        );
    }

    #[test]
    fn presets_are_valid_and_round_trip() {
        for name in presets::NAMES {
            let spec = presets::by_name(name).unwrap();
            spec.validate().unwrap();
            let json = serde_json::to_string(&spec).unwrap();
            assert_eq!(ExperimentSpec::from_json(&json).unwrap(), spec);
            let toml_text = toml::to_string(&spec).unwrap();
            assert_eq!(
                ExperimentSpec::from_toml(&toml_text).unwrap(),
                spec,
                "{toml_text}"
            );
        }
    }
}
