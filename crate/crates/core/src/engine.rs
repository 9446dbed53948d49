//! The recursive interval search.
//!
//! On a search interval `[s, e]` the engine draws up to `M` sub-intervals,
//! measures each one's deviation from linearity and keeps the shortest ones
//! whose deviation exceeds the threshold. Among those it picks the one with the
//! largest deviation, searches inside it again for its own shortest significant
//! sub-interval, records the result and recurses to the left and right.
//!
//! Candidates are evaluated in order of width, so the search stops as soon as
//! the shortest significant width has been fully examined. The outcome is the
//! same as evaluating every candidate.

use log::{debug, warn};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, NspError, Result};
use crate::interval::Interval;
use crate::linalg::solve_pivoted;
use crate::minimax::ConstraintSet;
use crate::noise_scale::vt_estimate;
use crate::random::stream_rng;
use crate::selection::CusumLocator;
use crate::sequences::{IntervalFamily, PrefixSums};
use crate::thresholds::{self_normalised_c, ThresholdMethod, ThresholdSpec};
use crate::Design;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// All pairs from an approximately equispaced grid.
    Grid,
    /// Endpoints drawn uniformly with replacement.
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Overlap {
    /// Children `[s, s~]` and `[e~, e]`.
    None,
    /// Children split at the midpoint of the detection.
    Half,
    /// Children split at a change-point located inside the detection.
    InInference,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DeviationMode {
    Plain,
    /// `vt2` is the global residual sum of squares; estimated from the data
    /// by median-of-OLS when absent.
    SelfNormalised {
        epsilon: f64,
        #[serde(default)]
        vt2: Option<f64>,
        /// Shortest sub-interval entering the weighted norm; defaults to
        /// [`selfnorm_min_length`].
        #[serde(default)]
        min_length: Option<usize>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NspConfig {
    /// Maximum number of sub-intervals drawn per search interval.
    pub m: usize,
    pub threshold: ThresholdSpec,
    pub sampling: Sampling,
    pub overlap: Overlap,
    pub seed: u64,
    pub deviation: DeviationMode,
    /// Autoregressive order; children keep a buffer of this many points.
    pub ar_order: usize,
    /// Treat intervals with `e - s < p` as unable to show a deviation. Only
    /// valid when every `p` consecutive rows of the design have full rank.
    pub rank_aware: bool,
    /// Search inside the first-stage interval for a shorter one.
    pub two_stage: bool,
}

impl NspConfig {
    pub fn new(threshold: ThresholdSpec) -> Self {
        Self {
            m: 1000,
            threshold,
            sampling: Sampling::Grid,
            overlap: Overlap::None,
            seed: 0,
            deviation: DeviationMode::Plain,
            ar_order: 0,
            rank_aware: false,
            two_stage: true,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.threshold.alpha
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(NspError::Config("M must be at least 1".into()));
        }
        let alpha = self.alpha();
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(NspError::Config(format!(
                "alpha must lie in (0, 1), got {alpha}"
            )));
        }
        if !(self.threshold.lambda >= 0.0) {
            return Err(NspError::Config(format!(
                "threshold must be non-negative, got {}",
                self.threshold.lambda
            )));
        }
        let sn_threshold = self.threshold.method == ThresholdMethod::SelfNormalised;
        match self.deviation {
            DeviationMode::Plain if sn_threshold => Err(NspError::Config(
                "a self-normalised threshold requires the self-normalised deviation".into(),
            )),
            DeviationMode::SelfNormalised { .. } if !sn_threshold => Err(NspError::Config(
                "the self-normalised deviation requires a self-normalised threshold".into(),
            )),
            DeviationMode::SelfNormalised { epsilon, .. } if !(epsilon > 0.0) => Err(
                NspError::Config(format!("epsilon must be positive, got {epsilon}")),
            ),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationResult {
    pub interval: Interval,
    pub deviation: f64,
    pub beta: Vec<f64>,
    /// Family member attaining the deviation.
    pub argmax: Interval,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub interval: Interval,
    pub deviation: f64,
    /// 1-based order in which the detection was made.
    pub order: usize,
    /// Search interval the detection was found in.
    pub parent: Interval,
    /// Interval chosen by the first stage, before the second-stage search.
    pub first_stage: Interval,
    /// Change-point located inside the interval (in-inference overlap only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SignificanceSet {
    pub detections: Vec<Detection>,
    pub threshold: f64,
    pub alpha: f64,
    /// Search intervals examined without finding anything significant.
    pub quiet: Vec<Interval>,
}

impl SignificanceSet {
    pub fn len(&self) -> usize {
        self.detections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detections.is_empty()
    }

    pub fn intervals(&self) -> Vec<Interval> {
        self.detections.iter().map(|d| d.interval).collect()
    }

    /// Moves every index by `offset` (e.g. back to the coordinates of a series
    /// whose first rows were dropped).
    pub fn shifted(mut self, offset: usize) -> Self {
        for d in &mut self.detections {
            d.interval = d.interval.shift(offset);
            d.parent = d.parent.shift(offset);
            d.first_stage = d.first_stage.shift(offset);
            d.location = d.location.map(|l| l + offset);
        }
        for q in &mut self.quiet {
            *q = q.shift(offset);
        }
        self
    }
}

/// Change-point locator used by the in-inference overlap. Returns an index
/// `b` in `[s, e - 1]`: the last point before the change.
pub trait Locator: Sync {
    fn locate(&self, y: &[f64], x: &Design, interval: Interval) -> Result<usize>;
}

/// `K` equispaced points on `[s, e]` including both ends, rounded to the
/// nearest integer, duplicates removed.
pub fn grid_points(s: usize, e: usize, k: usize) -> Vec<usize> {
    if k <= 1 {
        return vec![s];
    }
    let step = (e - s) as f64 / (k - 1) as f64;
    let mut pts: Vec<usize> = (0..k)
        .map(|i| s + (i as f64 * step).round() as usize)
        .collect();
    pts.dedup();
    pts
}

/// Smallest `K` with `K (K - 1) / 2 >= m`.
pub fn grid_size_for(m: usize) -> usize {
    let mut k = ((1.0 + (1.0 + 8.0 * m as f64).sqrt()) / 2.0).floor() as usize;
    while k * (k.saturating_sub(1)) / 2 < m {
        k += 1;
    }
    while k > 2 && (k - 1) * (k - 2) / 2 >= m {
        k -= 1;
    }
    k.max(2)
}

/// Sub-intervals of `[s, e]` with `e_m - s_m >= 1`: all of them when `m` is
/// at least their number, otherwise `m` intervals (grid: at least `m`) drawn
/// by `sampling`.
pub fn draw_intervals<R: Rng + ?Sized>(
    s: usize,
    e: usize,
    m: usize,
    sampling: Sampling,
    rng: &mut R,
) -> Vec<Interval> {
    if e <= s {
        return Vec::new();
    }
    let n = e - s + 1;
    let total = n * (n - 1) / 2;
    let all_pairs = |pts: &[usize]| -> Vec<Interval> {
        let mut out = Vec::with_capacity(pts.len() * pts.len() / 2);
        for (i, &a) in pts.iter().enumerate() {
            for &b in &pts[i + 1..] {
                out.push(Interval::new(a, b));
            }
        }
        out
    };
    if m >= total {
        let pts: Vec<usize> = (s..=e).collect();
        return all_pairs(&pts);
    }
    match sampling {
        Sampling::Grid => all_pairs(&grid_points(s, e, grid_size_for(m))),
        Sampling::Random => {
            let mut out = Vec::with_capacity(m);
            while out.len() < m {
                let a = rng.random_range(s..=e);
                let b = rng.random_range(s..=e);
                if a != b {
                    out.push(Interval::new(a.min(b), a.max(b)));
                }
            }
            out
        }
    }
}

fn check_data(y: &[f64], x: &Design) -> Result<()> {
    if y.len() != x.nrows() {
        return Err(NspError::Dimension(format!(
            "response has {} rows, design has {}",
            y.len(),
            x.nrows()
        )));
    }
    if y.is_empty() {
        return Err(invalid("empty series"));
    }
    if x.ncols() == 0 {
        return Err(invalid("design matrix has no columns"));
    }
    if y.iter().chain(x.iter()).any(|v| !v.is_finite()) {
        return Err(invalid("data contain non-finite values"));
    }
    Ok(())
}

/// Deviation from linearity on `[s, e]`: the minimal dyadic sup-norm of the
/// residuals of a linear fit.
pub fn deviation_plain(s: usize, e: usize, y: &[f64], x: &Design) -> Result<DeviationResult> {
    check_data(y, x)?;
    let anchor = Interval::within(s, e, y.len())?;
    plain_unchecked(anchor, y, x)
}

fn plain_unchecked(anchor: Interval, y: &[f64], x: &Design) -> Result<DeviationResult> {
    let fit = ConstraintSet::build(y, x, &IntervalFamily::dyadic(anchor)).fit(None, anchor)?;
    Ok(DeviationResult {
        interval: anchor,
        deviation: fit.deviation,
        beta: fit.beta,
        argmax: fit.binding_interval,
    })
}

/// Self-normalised deviation on `[s, e]`.
///
/// Each dyadic sub-interval of length at least `min_length` (default
/// [`selfnorm_min_length`], never below `p + 2`) gets the weight
/// `(1 + eps) sqrt(RSS) log^(1/2 + eps)(c V_T^2 / RSS)`, where `RSS` is the
/// residual sum of squares of an OLS fit on that sub-interval. Sub-intervals
/// with a non-positive logarithm or an exact OLS fit are left out. The result
/// is the minimum over `beta` of the largest weighted partial sum of residuals.
pub fn deviation_selfnorm(
    s: usize,
    e: usize,
    y: &[f64],
    x: &Design,
    vt2: f64,
    epsilon: f64,
    min_length: Option<usize>,
) -> Result<DeviationResult> {
    check_data(y, x)?;
    let anchor = Interval::within(s, e, y.len())?;
    if !(vt2 > 0.0 && vt2.is_finite()) {
        return Err(invalid(format!("V_T^2 must be positive, got {vt2}")));
    }
    if !(epsilon > 0.0) {
        return Err(invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    let min_length = min_length
        .unwrap_or(selfnorm_min_length(x.ncols(), epsilon))
        .max(x.ncols() + 2);
    selfnorm_unchecked(anchor, y, x, vt2, epsilon, min_length)
}

/// Prefix sums of the upper triangle of `[x_t, y_t]' [x_t, y_t]` over an anchor.
struct CrossProducts {
    q: usize,
    width: usize,
    prefix: Vec<f64>,
}

impl CrossProducts {
    fn new(anchor: Interval, y: &[f64], x: &Design) -> Self {
        let p = x.ncols();
        let q = p + 1;
        let width = q * (q + 1) / 2;
        let n = anchor.len();
        let mut prefix = vec![0.0; (n + 1) * width];
        let mut row = vec![0.0; q];
        for t in 0..n {
            let orig = anchor.start - 1 + t;
            for j in 0..p {
                row[j] = x[(orig, j)];
            }
            row[p] = y[orig];
            let (done, rest) = prefix.split_at_mut((t + 1) * width);
            let prev = &done[t * width..];
            let cur = &mut rest[..width];
            let mut k = 0;
            for a in 0..q {
                for b in a..q {
                    cur[k] = prev[k] + row[a] * row[b];
                    k += 1;
                }
            }
        }
        Self { q, width, prefix }
    }

    /// Residual sum of squares of the OLS fit on local rows `[a, b]` (1-based),
    /// or `None` when the fit is exact to rounding.
    fn rss(&self, a: usize, b: usize) -> Option<f64> {
        let q = self.q;
        let p = q - 1;
        let hi = &self.prefix[b * self.width..(b + 1) * self.width];
        let lo = &self.prefix[(a - 1) * self.width..a * self.width];
        let mut g = vec![0.0; q * q];
        let mut k = 0;
        for i in 0..q {
            for j in i..q {
                let v = hi[k] - lo[k];
                g[i * q + j] = v;
                g[j * q + i] = v;
                k += 1;
            }
        }
        let yty = g[p * q + p];
        let xtx: Vec<f64> = (0..p)
            .flat_map(|i| (0..p).map(move |j| (i, j)))
            .map(|(i, j)| g[i * q + j])
            .collect();
        let xty: Vec<f64> = (0..p).map(|i| g[i * q + p]).collect();
        let (beta, _) = solve_pivoted(&xtx, &xty, p, 1e-12);
        let rss = yty - beta.iter().zip(&xty).map(|(b, v)| b * v).sum::<f64>();
        if rss <= 1e-10 * yty.max(f64::MIN_POSITIVE) {
            None
        } else {
            Some(rss)
        }
    }
}

/// Default shortest sub-interval for the self-normalised deviation: the
/// smallest `n >= p + 2` with `(1 + eps)^2 (n - p) >= n`, so that the inflated
/// OLS residual sum of squares is at least the true one in expectation.
pub fn selfnorm_min_length(p: usize, epsilon: f64) -> usize {
    let g = (1.0 + epsilon).powi(2);
    let n = (p as f64 * g / (g - 1.0)).ceil() as usize;
    n.max(p + 2)
}

fn selfnorm_unchecked(
    anchor: Interval,
    y: &[f64],
    x: &Design,
    vt2: f64,
    epsilon: f64,
    min_length: usize,
) -> Result<DeviationResult> {
    let p = x.ncols();
    let c = self_normalised_c(epsilon);
    let mut constraints = ConstraintSet::build(y, x, &IntervalFamily::dyadic(anchor));
    let cross = CrossProducts::new(anchor, y, x);
    let offset = anchor.start - 1;
    let mut keep = Vec::with_capacity(constraints.len());
    let mut weights = Vec::with_capacity(constraints.len());
    let mut dropped_log = 0usize;
    for iv in &constraints.intervals {
        let len = iv.len();
        let w = if len < min_length {
            None
        } else {
            cross
                .rss(iv.start - offset, iv.end - offset)
                .and_then(|rss| {
                    let arg = c * vt2 / rss;
                    if arg <= 1.0 {
                        dropped_log += 1;
                        None
                    } else {
                        Some((1.0 + epsilon) * rss.sqrt() * arg.ln().powf(0.5 + epsilon))
                    }
                })
        };
        keep.push(w.is_some());
        if let Some(w) = w {
            // Constraint rows hold U = S / sqrt(len); dividing by w / sqrt(len)
            // gives |S| / w.
            weights.push(w / (len as f64).sqrt());
        }
    }
    if dropped_log > 0 {
        warn!("{dropped_log} sub-intervals of {anchor} dropped: RSS not below c * V_T^2");
    }
    constraints.retain(&keep);
    if constraints.len() == 0 {
        return Ok(DeviationResult {
            interval: anchor,
            deviation: 0.0,
            beta: vec![0.0; p],
            argmax: anchor,
        });
    }
    let fit = constraints.fit(Some(&weights), anchor)?;
    Ok(DeviationResult {
        interval: anchor,
        deviation: fit.deviation,
        beta: fit.beta,
        argmax: fit.binding_interval,
    })
}

/// Self-normalised statistic of a known noise vector over the dyadic
/// sub-intervals of `anchor` of length at least `min_length`:
/// `max |sum Z| / (sqrt(sum Z^2) log^(1/2 + eps)(c V_T^2 / sum Z^2))`.
pub fn selfnorm_statistic(
    z: &[f64],
    anchor: Interval,
    vt2: f64,
    epsilon: f64,
    min_length: usize,
) -> Result<f64> {
    Interval::within(anchor.start, anchor.end, z.len())?;
    let c = self_normalised_c(epsilon);
    let sums = PrefixSums::new(z);
    let squares: Vec<f64> = z.iter().map(|v| v * v).collect();
    let sq = PrefixSums::new(&squares);
    let mut best = 0.0f64;
    for iv in IntervalFamily::dyadic(anchor)
        .members()
        .filter(|iv| iv.len() >= min_length)
    {
        let ss = sq.sum(iv.start, iv.end);
        if ss <= 0.0 {
            continue;
        }
        let arg = c * vt2 / ss;
        if arg <= 1.0 {
            continue;
        }
        best =
            best.max(sums.sum(iv.start, iv.end).abs() / (ss.sqrt() * arg.ln().powf(0.5 + epsilon)));
    }
    Ok(best)
}

struct Search<'a> {
    y: &'a [f64],
    x: &'a Design,
    config: &'a NspConfig,
    lambda: f64,
    vt2: f64,
    /// Intervals with `e - s` below this are not examined.
    min_width: usize,
    sn_min_length: usize,
}

impl<'a> Search<'a> {
    fn new(y: &'a [f64], x: &'a Design, config: &'a NspConfig) -> Result<Self> {
        check_data(y, x)?;
        config.validate()?;
        let vt2 = match config.deviation {
            DeviationMode::Plain => 0.0,
            DeviationMode::SelfNormalised { vt2: Some(v), .. } => v,
            DeviationMode::SelfNormalised { vt2: None, .. } => vt_estimate(y, x)?,
        };
        if matches!(config.deviation, DeviationMode::SelfNormalised { .. })
            && !(vt2 > 0.0 && vt2.is_finite())
        {
            return Err(NspError::Domain(format!(
                "V_T^2 estimate is not positive ({vt2})"
            )));
        }
        let min_width = if config.rank_aware {
            x.ncols().max(1)
        } else {
            1
        };
        let p = x.ncols();
        let sn_min_length = match config.deviation {
            DeviationMode::SelfNormalised {
                epsilon,
                min_length,
                ..
            } => min_length
                .unwrap_or(selfnorm_min_length(p, epsilon))
                .max(p + 2),
            DeviationMode::Plain => 0,
        };
        Ok(Self {
            y,
            x,
            config,
            lambda: config.threshold.lambda,
            vt2,
            min_width,
            sn_min_length,
        })
    }

    fn deviation(&self, iv: Interval) -> Result<f64> {
        let d = match self.config.deviation {
            DeviationMode::Plain => plain_unchecked(iv, self.y, self.x)?,
            DeviationMode::SelfNormalised { epsilon, .. } => {
                selfnorm_unchecked(iv, self.y, self.x, self.vt2, epsilon, self.sn_min_length)?
            }
        };
        Ok(d.deviation)
    }

    fn rng_stream(s: usize, e: usize, stage: u64) -> u64 {
        ((s as u64) << 32) ^ ((e as u64) << 1) ^ stage
    }

    /// Lines 2-18 of the search: the shortest significant sampled interval in
    /// `[s, e]` with the largest deviation (ties: smallest start).
    fn shortest_significant(
        &self,
        s: usize,
        e: usize,
        stage: u64,
    ) -> Result<Option<(Interval, f64)>> {
        if e < s || e - s < self.min_width {
            return Ok(None);
        }
        let mut rng = stream_rng(self.config.seed, Self::rng_stream(s, e, stage));
        let mut candidates = draw_intervals(s, e, self.config.m, self.config.sampling, &mut rng);
        candidates.retain(|iv| iv.width() >= self.min_width);
        candidates.sort_by_key(|iv| (iv.width(), iv.start, iv.end));
        candidates.dedup();
        let chunk = (4 * rayon::current_num_threads()).max(8);
        let mut i = 0;
        while i < candidates.len() {
            let mut j = (i + chunk).min(candidates.len());
            while j < candidates.len() && candidates[j].width() == candidates[j - 1].width() {
                j += 1;
            }
            let devs = candidates[i..j]
                .par_iter()
                .map(|&iv| self.deviation(iv))
                .collect::<Result<Vec<f64>>>()?;
            let mut best: Option<(Interval, f64)> = None;
            for (&iv, &d) in candidates[i..j].iter().zip(&devs) {
                if let Some((b, bd)) = best {
                    if iv.width() > b.width() {
                        break;
                    }
                    if d > self.lambda && d > bd {
                        best = Some((iv, d));
                    }
                } else if d > self.lambda {
                    best = Some((iv, d));
                }
            }
            if best.is_some() {
                return Ok(best);
            }
            i = j;
        }
        Ok(None)
    }

    fn second_stage(&self, first: Interval, d: f64) -> Result<(Interval, f64)> {
        Ok(self
            .shortest_significant(first.start, first.end, 1)?
            .unwrap_or((first, d)))
    }
}

/// Second-stage search on its own: the shortest significant sampled
/// sub-interval of `[s, e]`, or `[s, e]` itself if sampling finds none.
pub fn shortest_significant_subinterval(
    s: usize,
    e: usize,
    y: &[f64],
    x: &Design,
    config: &NspConfig,
) -> Result<Interval> {
    let search = Search::new(y, x, config)?;
    let iv = Interval::within(s, e, y.len())?;
    Ok(search.shortest_significant(s, e, 1)?.map_or(iv, |(i, _)| i))
}

/// Runs the search on the whole series with the CUSUM locator for the
/// in-inference overlap.
pub fn nsp_run(y: &[f64], x: &Design, config: &NspConfig) -> Result<SignificanceSet> {
    nsp_run_with_locator(y, x, config, &CusumLocator)
}

pub fn nsp_run_with_locator(
    y: &[f64],
    x: &Design,
    config: &NspConfig,
    locator: &dyn Locator,
) -> Result<SignificanceSet> {
    let search = Search::new(y, x, config)?;
    let t = y.len();
    let r = config.ar_order as i64;
    let mut out = SignificanceSet {
        detections: Vec::new(),
        threshold: search.lambda,
        alpha: config.alpha(),
        quiet: Vec::new(),
    };
    let mut stack: Vec<(i64, i64)> = vec![(1, t as i64)];
    while let Some((s, e)) = stack.pop() {
        if s < 1 || e > t as i64 || e - s < search.min_width as i64 {
            continue;
        }
        let (s, e) = (s as usize, e as usize);
        let Some((first, d1)) = search.shortest_significant(s, e, 0)? else {
            out.quiet.push(Interval::new(s, e));
            continue;
        };
        let (chosen, d) = if config.two_stage {
            search.second_stage(first, d1)?
        } else {
            (first, d1)
        };
        debug!("detection {chosen} (D = {d:.4}) in [{s}, {e}]");
        let location = match config.overlap {
            Overlap::InInference => {
                let b = locator.locate(y, x, chosen)?;
                if b < chosen.start || b >= chosen.end {
                    return Err(invalid(format!(
                        "locator returned {b} outside [{}, {}]",
                        chosen.start,
                        chosen.end - 1
                    )));
                }
                Some(b)
            }
            _ => None,
        };
        out.detections.push(Detection {
            interval: chosen,
            deviation: d,
            order: out.detections.len() + 1,
            parent: Interval::new(s, e),
            first_stage: first,
            location,
        });
        let (left_end, right_start) = match (config.overlap, location) {
            (Overlap::None, _) => (chosen.start as i64, chosen.end as i64),
            (Overlap::Half, _) => {
                let mid = ((chosen.start + chosen.end) / 2) as i64;
                (mid, mid + 1)
            }
            (Overlap::InInference, Some(b)) => (b as i64, b as i64 + 1),
            (Overlap::InInference, None) => unreachable!(),
        };
        stack.push((right_start + r, e as i64));
        stack.push((s as i64, left_end - r));
    }
    Ok(out)
}
