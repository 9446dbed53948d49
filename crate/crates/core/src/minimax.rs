//! Linear-model fits under the multiresolution sup-norm loss.
//!
//! For a response `y` and design `X` on an interval, the fit returns
//! `beta0 = argmin_beta || y - X beta ||` with the norm taken over an interval
//! family, and the attained minimum (the deviation from linearity). The
//! weighted variant divides each member's scaled partial sum by a positive
//! weight before taking the maximum.

use serde::{Deserialize, Serialize};

use crate::error::{NspError, Result};
use crate::interval::Interval;
use crate::sequences::{dyadic_window_sums, FamilyKind, IntervalFamily, PrefixSums};
use crate::simplex::{self, SupNormLp};
use crate::Design;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimaxFitResult {
    pub beta: Vec<f64>,
    pub deviation: f64,
    /// A member attaining the deviation, in the coordinates of the fitted data.
    pub binding_interval: Interval,
}

/// Scaled partial sums of the response and of each design column over the
/// members of a family: the rows of the linear program.
#[derive(Clone, Debug)]
pub(crate) struct ConstraintSet {
    pub intervals: Vec<Interval>,
    pub response: Vec<f64>,
    /// Row-major `K x p`.
    pub design: Vec<f64>,
    pub p: usize,
}

impl ConstraintSet {
    /// Builds the rows for `family`, whose anchor must lie in `1..=y.len()`.
    pub(crate) fn build(y: &[f64], x: &Design, family: &IntervalFamily) -> Self {
        let anchor = family.anchor;
        let p = x.ncols();
        let offset = anchor.start - 1;
        let n = anchor.len();
        let ylocal = &y[anchor.range()];
        let intervals: Vec<Interval> = family.members().collect();
        let k = intervals.len();
        let scales: Vec<f64> = intervals
            .iter()
            .map(|iv| (iv.len() as f64).sqrt())
            .collect();

        let sums_of = |v: &[f64]| -> Vec<f64> {
            match family.kind {
                FamilyKind::Dyadic => dyadic_window_sums(v),
                FamilyKind::All => {
                    let prefix = PrefixSums::new(v);
                    intervals
                        .iter()
                        .map(|iv| prefix.sum(iv.start - offset, iv.end - offset))
                        .collect()
                }
            }
        };

        let response: Vec<f64> = sums_of(ylocal)
            .iter()
            .zip(&scales)
            .map(|(s, c)| s / c)
            .collect();
        let mut design = vec![0.0; k * p];
        for j in 0..p {
            let col: Vec<f64> = (0..n).map(|t| x[(offset + t, j)]).collect();
            for (row, (s, c)) in sums_of(&col).iter().zip(&scales).enumerate() {
                design[row * p + j] = s / c;
            }
        }
        Self {
            intervals,
            response,
            design,
            p,
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.intervals.len()
    }

    /// Keeps only the rows whose index satisfies `keep`.
    pub(crate) fn retain(&mut self, keep: &[bool]) {
        let p = self.p;
        let mut w = 0;
        for r in 0..self.intervals.len() {
            if keep[r] {
                self.intervals[w] = self.intervals[r];
                self.response[w] = self.response[r];
                for j in 0..p {
                    self.design[w * p + j] = self.design[r * p + j];
                }
                w += 1;
            }
        }
        self.intervals.truncate(w);
        self.response.truncate(w);
        self.design.truncate(w * p);
    }

    /// Weighted sup of residual statistics at `beta`, with the binding member.
    pub(crate) fn evaluate(&self, beta: &[f64], weights: Option<&[f64]>) -> (f64, Interval) {
        let p = self.p;
        let mut best = (f64::NEG_INFINITY, self.intervals[0]);
        for (r, iv) in self.intervals.iter().enumerate() {
            let fitted: f64 = (0..p).map(|j| self.design[r * p + j] * beta[j]).sum();
            let mut v = (self.response[r] - fitted).abs();
            if let Some(w) = weights {
                v /= w[r];
            }
            if v > best.0 || (v == best.0 && iv.start < best.1.start) {
                best = (v, *iv);
            }
        }
        best
    }

    /// Solves the (weighted) fit on these rows. `anchor` is reported on failure.
    pub(crate) fn fit(
        &self,
        weights: Option<&[f64]>,
        anchor: Interval,
    ) -> Result<MinimaxFitResult> {
        if self.intervals.is_empty() {
            return Err(NspError::invalid("interval family is empty"));
        }
        let ones;
        let w = match weights {
            Some(w) => w,
            None => {
                ones = vec![1.0; self.len()];
                &ones
            }
        };
        let lp = SupNormLp {
            response: &self.response,
            design: &self.design,
            weights: w,
            p: self.p,
        };
        let beta = simplex::solve(&lp).map_err(|e| NspError::NumericalFailure {
            interval: anchor,
            iterations: e.0,
        })?;
        let (deviation, binding_interval) = self.evaluate(&beta, weights);
        Ok(MinimaxFitResult {
            beta,
            deviation,
            binding_interval,
        })
    }
}

fn check_inputs(y: &[f64], x: &Design, family: &IntervalFamily) -> Result<()> {
    if y.len() != x.nrows() {
        return Err(NspError::Dimension(format!(
            "response has {} rows, design has {}",
            y.len(),
            x.nrows()
        )));
    }
    if y.is_empty() {
        return Err(NspError::invalid("interval family is empty"));
    }
    Interval::within(family.anchor.start, family.anchor.end, y.len())?;
    Ok(())
}

/// Exact minimiser of `max_{I in family} |U_I(y - X beta)|`.
pub fn fit_minimax(y: &[f64], x: &Design, family: &IntervalFamily) -> Result<MinimaxFitResult> {
    check_inputs(y, x, family)?;
    ConstraintSet::build(y, x, family).fit(None, family.anchor)
}

/// Minimiser of `max_{I in family} |U_I(y - X beta)| / w_I`, with one strictly
/// positive weight per family member in [`IntervalFamily::members`] order.
pub fn fit_minimax_weighted(
    y: &[f64],
    x: &Design,
    family: &IntervalFamily,
    weights: &[f64],
) -> Result<MinimaxFitResult> {
    check_inputs(y, x, family)?;
    if weights.len() != family.size() {
        return Err(NspError::Dimension(format!(
            "{} weights for a family of {} intervals",
            weights.len(),
            family.size()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(NspError::invalid(format!(
            "weights must be finite and positive, got {w}"
        )));
    }
    ConstraintSet::build(y, x, family).fit(Some(weights), family.anchor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequences::multiresolution_norm;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ones(n: usize) -> Design {
        Design::from_element(n, 1, 1.0)
    }

    /// Brute-force oracle for a one-column design: grid over beta, then a
    /// golden-section refinement around the best grid point.
    fn grid_min_1d(y: &[f64], x: &Design, family: &IntervalFamily, weights: Option<&[f64]>) -> f64 {
        let objective = |b: f64| {
            let r: Vec<f64> = y
                .iter()
                .enumerate()
                .map(|(t, v)| v - x[(t, 0)] * b)
                .collect();
            let prefix = PrefixSums::new(&r);
            family
                .members()
                .enumerate()
                .map(|(i, iv)| {
                    let u = (prefix.sum(iv.start, iv.end) / (iv.len() as f64).sqrt()).abs();
                    weights.map_or(u, |w| u / w[i])
                })
                .fold(0.0, f64::max)
        };
        let mut best = (f64::INFINITY, 0.0);
        let mut b = -5.0;
        while b <= 5.0 {
            let v = objective(b);
            if v < best.0 {
                best = (v, b);
            }
            b += 1e-3;
        }
        let (mut lo, mut hi) = (best.1 - 2e-3, best.1 + 2e-3);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..100 {
            let m1 = hi - g * (hi - lo);
            let m2 = lo + g * (hi - lo);
            if objective(m1) < objective(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        objective(0.5 * (lo + hi)).min(best.0)
    }

    #[test]
    fn constant_response_fits_exactly() {
        let y = vec![5.0; 7];
        let fam = IntervalFamily::local(FamilyKind::Dyadic, 7);
        let fit = fit_minimax(&y, &ones(7), &fam).unwrap();
        assert_relative_eq!(fit.beta[0], 5.0, epsilon = 1e-9);
        assert!(fit.deviation < 1e-9);
    }

    #[test]
    fn step_has_known_deviation() {
        let y = [0.0, 0.0, 1.0, 1.0];
        let fam = IntervalFamily::local(FamilyKind::Dyadic, 4);
        let fit = fit_minimax(&y, &ones(4), &fam).unwrap();
        assert_relative_eq!(fit.deviation, 1.0 / 2f64.sqrt(), epsilon = 1e-9);
        assert_relative_eq!(fit.beta[0], 0.5, epsilon = 1e-9);
        assert_relative_eq!(
            grid_min_1d(&y, &ones(4), &fam, None),
            fit.deviation,
            epsilon = 1e-6
        );
    }

    #[test]
    fn exact_linear_response_has_zero_deviation() {
        let n = 9;
        let x = Design::from_fn(n, 2, |t, j| {
            if j == 0 {
                1.0
            } else {
                (t + 1) as f64 / n as f64
            }
        });
        let y: Vec<f64> = (0..n).map(|t| 3.0 - 2.0 * x[(t, 1)]).collect();
        for kind in [FamilyKind::Dyadic, FamilyKind::All] {
            let fit = fit_minimax(&y, &x, &IntervalFamily::local(kind, n)).unwrap();
            assert!(fit.deviation < 1e-9, "{kind:?}: {}", fit.deviation);
        }
    }

    #[test]
    fn deviation_is_the_norm_of_the_residuals() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 37;
        let x = Design::from_fn(
            n,
            2,
            |t, j| if j == 0 { 1.0 } else { (t as f64 * 0.3).sin() },
        );
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let fam = IntervalFamily::local(FamilyKind::Dyadic, n);
        let fit = fit_minimax(&y, &x, &fam).unwrap();
        let r: Vec<f64> = (0..n)
            .map(|t| y[t] - x[(t, 0)] * fit.beta[0] - x[(t, 1)] * fit.beta[1])
            .collect();
        let nv = multiresolution_norm(&r, &fam).unwrap();
        assert_relative_eq!(nv.value, fit.deviation, epsilon = 1e-9);
    }

    #[test]
    fn weighted_with_unit_weights_matches_plain() {
        let y = [0.4, -1.0, 2.0, 0.3, 0.9];
        let fam = IntervalFamily::local(FamilyKind::Dyadic, 5);
        let plain = fit_minimax(&y, &ones(5), &fam).unwrap();
        let w = vec![1.0; fam.size()];
        let weighted = fit_minimax_weighted(&y, &ones(5), &fam, &w).unwrap();
        assert_relative_eq!(plain.deviation, weighted.deviation, epsilon = 1e-12);
        assert_relative_eq!(plain.beta[0], weighted.beta[0], epsilon = 1e-12);
    }

    #[test]
    fn upweighting_a_member_lowers_the_deviation() {
        let y = [0.0, 0.0, 1.0, 1.0];
        let fam = IntervalFamily::local(FamilyKind::Dyadic, 4);
        let mut w = vec![1.0; fam.size()];
        let idx = fam
            .members()
            .position(|iv| iv == Interval::new(1, 2))
            .unwrap();
        w[idx] = 10.0;
        let plain = fit_minimax(&y, &ones(4), &fam).unwrap();
        let weighted = fit_minimax_weighted(&y, &ones(4), &fam, &w).unwrap();
        assert!(weighted.deviation < plain.deviation - 1e-6);
        let oracle = grid_min_1d(&y, &ones(4), &fam, Some(&w));
        assert_relative_eq!(weighted.deviation, oracle, epsilon = 1e-6);
    }

    #[test]
    fn weighted_linear_response_has_zero_deviation() {
        let y = [2.0, 2.0, 2.0, 2.0, 2.0];
        let fam = IntervalFamily::local(FamilyKind::Dyadic, 5);
        let w: Vec<f64> = (0..fam.size()).map(|i| 0.5 + i as f64).collect();
        let fit = fit_minimax_weighted(&y, &ones(5), &fam, &w).unwrap();
        assert!(fit.deviation < 1e-9);
    }

    #[test]
    fn bad_weights_are_rejected() {
        let y = [0.0, 1.0];
        let fam = IntervalFamily::local(FamilyKind::Dyadic, 2);
        let err = fit_minimax_weighted(&y, &ones(2), &fam, &[1.0, 0.0, 1.0]).unwrap_err();
        assert!(matches!(err, NspError::InvalidArgument(_)));
        assert!(matches!(
            fit_minimax_weighted(&y, &ones(2), &fam, &[1.0]),
            Err(NspError::Dimension(_))
        ));
    }

    #[test]
    fn short_anchor_interpolates() {
        // n <= p with a full-rank design: exact interpolation, zero deviation.
        let x = Design::from_row_slice(2, 3, &[1.0, 0.5, 0.25, 1.0, 1.0, 1.0]);
        let y = [3.0, -1.0];
        let fit = fit_minimax(&y, &x, &IntervalFamily::local(FamilyKind::Dyadic, 2)).unwrap();
        assert!(fit.deviation < 1e-9);
    }

    #[test]
    fn scale_equivariance() {
        let y = [0.3, 1.7, -0.4, 2.2, 0.9, 1.1];
        let n = y.len();
        let x = Design::from_fn(n, 2, |t, j| if j == 0 { 1.0 } else { t as f64 });
        let fam = IntervalFamily::local(FamilyKind::Dyadic, n);
        let base = fit_minimax(&y, &x, &fam).unwrap();
        for c in [-3.0, 0.5, 7.0] {
            let yc: Vec<f64> = y.iter().map(|v| c * v).collect();
            let fit = fit_minimax(&yc, &x, &fam).unwrap();
            assert_relative_eq!(fit.deviation, c.abs() * base.deviation, epsilon = 1e-9);
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let fam = IntervalFamily::local(FamilyKind::Dyadic, 3);
        assert!(matches!(
            fit_minimax(&[1.0, 2.0, 3.0], &ones(2), &fam),
            Err(NspError::Dimension(_))
        ));
    }
}
