//! Post-inference utilities: change-point location inside a significant
//! interval, prominence ordering and p-value bounds on the gaps between
//! detections.

use serde::{Deserialize, Serialize};

use crate::engine::{deviation_plain, Locator, SignificanceSet};
use crate::error::{invalid, Result};
use crate::interval::Interval;
use crate::sequences::PrefixSums;
use crate::thresholds::pvalue_upper_bound;
use crate::Design;

/// Single change-point location in `[s, e]` by the CUSUM contrast: the `b` in
/// `[s, e - 1]` maximising
/// `sqrt(n1 n2 / n) |mean(Y_s..Y_b) - mean(Y_{b+1}..Y_e)|`, ties to the smallest `b`.
pub fn cusum_locate(y: &[f64], interval: Interval) -> Result<usize> {
    let iv = Interval::within(interval.start, interval.end, y.len())?;
    if iv.len() < 2 {
        return Err(invalid(format!(
            "interval {iv} is too short to locate a change"
        )));
    }
    let local = &y[iv.range()];
    let prefix = PrefixSums::new(local);
    let n = local.len();
    let total = prefix.sum(1, n);
    let mut best = (f64::NEG_INFINITY, iv.start);
    for k in 1..n {
        let left = prefix.sum(1, k);
        let (n1, n2) = (k as f64, (n - k) as f64);
        let diff = left / n1 - (total - left) / n2;
        let stat = (n1 * n2 / n as f64).sqrt() * diff.abs();
        if stat > best.0 {
            best = (stat, iv.start + k - 1);
        }
    }
    Ok(best.1)
}

/// The CUSUM locator as an engine hook.
#[derive(Clone, Copy, Debug, Default)]
pub struct CusumLocator;

impl Locator for CusumLocator {
    fn locate(&self, y: &[f64], _x: &Design, interval: Interval) -> Result<usize> {
        cusum_locate(y, interval)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProminenceEntry {
    /// 1-based rank, 1 being the most prominent (shortest).
    pub rank: usize,
    pub interval: Interval,
    /// `e - s`.
    pub length: usize,
    pub label: String,
    /// Detection order in the originating run.
    pub order: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProminenceReport {
    pub entries: Vec<ProminenceEntry>,
}

/// Detections sorted by length, shortest first; equal lengths keep detection order.
pub fn prominence_order(set: &SignificanceSet) -> ProminenceReport {
    prominence_of(set.detections.iter().map(|d| (d.interval, d.order)))
}

/// As [`prominence_order`], from `(interval, detection order)` pairs.
pub fn prominence_of(items: impl IntoIterator<Item = (Interval, usize)>) -> ProminenceReport {
    let mut items: Vec<_> = items.into_iter().collect();
    items.sort_by_key(|(iv, order)| (iv.width(), *order));
    ProminenceReport {
        entries: items
            .into_iter()
            .enumerate()
            .map(|(i, (interval, order))| ProminenceEntry {
                rank: i + 1,
                interval,
                length: interval.width(),
                label: format!("{}-{}", interval.start, interval.end),
                order,
            })
            .collect(),
    }
}

/// Reference distribution for gap p-values.
#[derive(Clone, Debug, PartialEq)]
pub enum PValueContext {
    /// Gaussian extreme-value bound at series length `length` and scale `sigma`.
    Gaussian { length: usize, sigma: f64 },
    /// Ascending Monte Carlo draws of the noise norm.
    Empirical { sorted: Vec<f64> },
}

impl PValueContext {
    pub fn bound(&self, d: f64) -> Result<f64> {
        match self {
            PValueContext::Gaussian { length, sigma } => pvalue_upper_bound(d, *length, *sigma),
            PValueContext::Empirical { sorted } => {
                if sorted.is_empty() {
                    return Err(invalid("empty reference sample"));
                }
                let below = sorted.partition_point(|&v| v <= d);
                Ok((sorted.len() - below) as f64 / sorted.len() as f64)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapPValue {
    pub segment: Interval,
    pub deviation: f64,
    pub p_bound: f64,
}

/// Segments between consecutive detections (and the two flanks), shaped like
/// the children of a no-overlap run: `[e_i + r, s_{i+1} - r]`. Segments with
/// fewer than two points are left out.
pub fn gap_segments(set: &SignificanceSet, t: usize, buffer: usize) -> Vec<Interval> {
    let mut ivs = set.intervals();
    ivs.sort();
    let mut out = Vec::new();
    let mut start = 1i64;
    let r = buffer as i64;
    let bounds = ivs
        .iter()
        .map(|iv| (iv.start as i64 - r, iv.end as i64 + r))
        .chain(std::iter::once((t as i64, 0)));
    for (end, next_start) in bounds {
        if start >= 1 && end <= t as i64 && end - start >= 1 {
            out.push(Interval::new(start as usize, end as usize));
        }
        start = start.max(next_start);
    }
    out
}

/// Deviation and p-value bound on every gap segment.
pub fn segment_pvalues(
    y: &[f64],
    x: &Design,
    set: &SignificanceSet,
    ctx: &PValueContext,
    buffer: usize,
) -> Result<Vec<GapPValue>> {
    gap_segments(set, y.len(), buffer)
        .into_iter()
        .map(|segment| {
            let d = deviation_plain(segment.start, segment.end, y, x)?.deviation;
            Ok(GapPValue {
                segment,
                deviation: d,
                p_bound: ctx.bound(d)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Detection;

    fn set_of(ivs: &[(usize, usize)]) -> SignificanceSet {
        SignificanceSet {
            detections: ivs
                .iter()
                .enumerate()
                .map(|(i, &(s, e))| Detection {
                    interval: Interval::new(s, e),
                    deviation: 10.0,
                    order: i + 1,
                    parent: Interval::new(1, 100),
                    first_stage: Interval::new(s, e),
                    location: None,
                })
                .collect(),
            threshold: 1.0,
            alpha: 0.1,
            quiet: Vec::new(),
        }
    }

    #[test]
    fn cusum_examples() {
        let y = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        assert_eq!(cusum_locate(&y, Interval::new(1, 6)).unwrap(), 3);
        assert_eq!(cusum_locate(&[2.0; 6], Interval::new(2, 5)).unwrap(), 2);
        assert!(cusum_locate(&y, Interval::new(3, 3)).is_err());
        assert!(cusum_locate(&y, Interval::new(3, 7)).is_err());
    }

    #[test]
    fn prominence_examples() {
        assert!(prominence_order(&SignificanceSet::default())
            .entries
            .is_empty());
        let report = prominence_order(&set_of(&[(40, 71), (10, 17), (80, 87)]));
        let lengths: Vec<usize> = report.entries.iter().map(|e| e.length).collect();
        assert_eq!(lengths, vec![7, 7, 31]);
        let orders: Vec<usize> = report.entries.iter().map(|e| e.order).collect();
        assert_eq!(orders, vec![2, 3, 1]);
        assert_eq!(report.entries[0].label, "10-17");
    }

    #[test]
    fn gaps_follow_no_overlap_children() {
        let set = set_of(&[(50, 52), (10, 12)]);
        let gaps = gap_segments(&set, 100, 0);
        assert_eq!(
            gaps,
            vec![
                Interval::new(1, 10),
                Interval::new(12, 50),
                Interval::new(52, 100)
            ]
        );
        let gaps = gap_segments(&set, 100, 1);
        assert_eq!(
            gaps,
            vec![
                Interval::new(1, 9),
                Interval::new(13, 49),
                Interval::new(53, 100)
            ]
        );
        assert_eq!(
            gap_segments(&SignificanceSet::default(), 7, 0),
            vec![Interval::new(1, 7)]
        );
    }

    #[test]
    fn noiseless_gap_has_unit_bound() {
        let y = vec![1.5; 30];
        let x = Design::from_element(30, 1, 1.0);
        let ctx = PValueContext::Gaussian {
            length: 30,
            sigma: 1.0,
        };
        let gaps = segment_pvalues(&y, &x, &SignificanceSet::default(), &ctx, 0).unwrap();
        assert_eq!(gaps.len(), 1);
        assert!(gaps[0].deviation < 1e-12);
        assert_eq!(gaps[0].p_bound, 1.0);
    }

    #[test]
    fn empirical_context() {
        let ctx = PValueContext::Empirical {
            sorted: vec![1.0, 2.0, 3.0, 4.0],
        };
        assert_eq!(ctx.bound(0.5).unwrap(), 1.0);
        assert_eq!(ctx.bound(2.0).unwrap(), 0.5);
        assert_eq!(ctx.bound(9.0).unwrap(), 0.0);
    }
}
