//! Scaled partial sums and multiresolution sup-norms.
//!
//! The scaled partial sum of `y` over `[s, e]` is
//! `U(s, e) = (e - s + 1)^(-1/2) * sum_{t=s}^{e} y_t`, and the multiresolution
//! sup-norm over a family of intervals is the maximum of `|U|` over the family.
//! Two families are supported: all sub-intervals of an anchor, and the dyadic
//! family of all sub-intervals whose length is a power of two (every start
//! position, no thinning).
//!
//! Dyadic norms are evaluated with a pyramid: level `j` holds the sums of every
//! length-`2^j` window, obtained by adding two adjacent windows of level `j - 1`.
//! That costs `O(n log n)` for an anchor of length `n`.

use serde::{Deserialize, Serialize};

use crate::error::{NspError, Result};
use crate::interval::Interval;

/// Prefix sums `cumsum[0] = 0`, `cumsum[t] = y_1 + ... + y_t`.
///
/// Accumulated with Neumaier compensation so that long series (`T` around
/// `10^6`) do not drift.
#[derive(Clone, Debug)]
pub struct PrefixSums {
    cumsum: Vec<f64>,
}

impl PrefixSums {
    pub fn new(y: &[f64]) -> Self {
        let mut cumsum = Vec::with_capacity(y.len() + 1);
        cumsum.push(0.0);
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for &v in y {
            let t = sum + v;
            if sum.abs() >= v.abs() {
                comp += (sum - t) + v;
            } else {
                comp += (v - t) + sum;
            }
            sum = t;
            cumsum.push(sum + comp);
        }
        Self { cumsum }
    }

    /// Length `T` of the underlying series.
    pub fn len(&self) -> usize {
        self.cumsum.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cumsum(&self) -> &[f64] {
        &self.cumsum
    }

    /// Sum over the 1-based closed interval `[s, e]`. Bounds are not checked.
    #[inline]
    pub fn sum(&self, s: usize, e: usize) -> f64 {
        self.cumsum[e] - self.cumsum[s - 1]
    }
}

/// `U(s, e)` from two prefix-sum reads.
pub fn scaled_partial_sum(prefix: &PrefixSums, s: usize, e: usize) -> Result<f64> {
    let iv = Interval::within(s, e, prefix.len())?;
    Ok(prefix.sum(s, e) / (iv.len() as f64).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Dyadic,
    All,
}

/// A family of sub-intervals of an anchor interval.
///
/// Members are enumerated by length, then by start position. Weighted fits
/// take their weights in this order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IntervalFamily {
    pub kind: FamilyKind,
    pub anchor: Interval,
}

impl IntervalFamily {
    pub fn dyadic(anchor: Interval) -> Self {
        Self {
            kind: FamilyKind::Dyadic,
            anchor,
        }
    }

    pub fn all(anchor: Interval) -> Self {
        Self {
            kind: FamilyKind::All,
            anchor,
        }
    }

    /// Dyadic or all-interval family anchored on `[1, n]`.
    pub fn local(kind: FamilyKind, n: usize) -> Self {
        Self {
            kind,
            anchor: Interval::new(1, n),
        }
    }

    /// Member lengths in enumeration order.
    pub fn lengths(&self) -> Vec<usize> {
        let n = self.anchor.len();
        match self.kind {
            FamilyKind::Dyadic => std::iter::successors(Some(1usize), |l| l.checked_mul(2))
                .take_while(|&l| l <= n)
                .collect(),
            FamilyKind::All => (1..=n).collect(),
        }
    }

    pub fn size(&self) -> usize {
        let n = self.anchor.len();
        self.lengths().into_iter().map(|l| n - l + 1).sum()
    }

    pub fn members(&self) -> impl Iterator<Item = Interval> + '_ {
        let s = self.anchor.start;
        let e = self.anchor.end;
        self.lengths()
            .into_iter()
            .flat_map(move |l| (s..=e + 1 - l).map(move |a| Interval::new(a, a + l - 1)))
    }
}

/// Value of a sup-norm together with a witnessing member interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormValue {
    pub value: f64,
    pub argmax: Interval,
}

impl NormValue {
    /// Keeps the larger value; ties go to the smaller `(start, end)`.
    #[inline]
    pub(crate) fn offer(&mut self, value: f64, iv: Interval) {
        if value > self.value
            || (value == self.value && (iv.start, iv.end) < (self.argmax.start, self.argmax.end))
        {
            self.value = value;
            self.argmax = iv;
        }
    }
}

/// Window sums of every dyadic member of `[1, n]`, in family order, computed by
/// the pyramid. Returned values are raw sums (not scaled).
pub(crate) fn dyadic_window_sums(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let family = IntervalFamily::local(FamilyKind::Dyadic, n);
    let mut out = Vec::with_capacity(family.size());
    let mut level = y.to_vec();
    out.extend_from_slice(&level);
    let mut half = 1usize;
    while 2 * half <= n {
        let count = n - 2 * half + 1;
        for i in 0..count {
            level[i] += level[i + half];
        }
        level.truncate(count);
        out.extend_from_slice(&level);
        half *= 2;
    }
    out
}

/// Dyadic multiresolution norm of a local vector (anchor `[1, n]`).
pub fn dyadic_norm(y: &[f64]) -> NormValue {
    let n = y.len();
    let mut best = NormValue {
        value: f64::NEG_INFINITY,
        argmax: Interval::new(1, 1),
    };
    let mut level = y.to_vec();
    let mut len = 1usize;
    loop {
        let scale = (len as f64).sqrt();
        for (i, &v) in level.iter().enumerate() {
            best.offer((v / scale).abs(), Interval::new(i + 1, i + len));
        }
        if 2 * len > n {
            break;
        }
        let count = n - 2 * len + 1;
        for i in 0..count {
            level[i] += level[i + len];
        }
        level.truncate(count);
        len *= 2;
    }
    best
}

fn all_intervals_norm(y: &[f64]) -> NormValue {
    let n = y.len();
    let prefix = PrefixSums::new(y);
    let mut best = NormValue {
        value: f64::NEG_INFINITY,
        argmax: Interval::new(1, 1),
    };
    for s in 1..=n {
        for e in s..=n {
            let u = prefix.sum(s, e) / ((e - s + 1) as f64).sqrt();
            best.offer(u.abs(), Interval::new(s, e));
        }
    }
    best
}

/// `max |U(s, e)|` over the members of `family`, with a witnessing member.
///
/// The returned argmax is in the coordinates of `y` (i.e. it lies inside the
/// family's anchor).
pub fn multiresolution_norm(y: &[f64], family: &IntervalFamily) -> Result<NormValue> {
    let anchor = family.anchor;
    if y.is_empty() {
        return Err(NspError::invalid("interval family is empty"));
    }
    Interval::within(anchor.start, anchor.end, y.len())?;
    let local = &y[anchor.range()];
    let mut nv = match family.kind {
        FamilyKind::Dyadic => dyadic_norm(local),
        FamilyKind::All => all_intervals_norm(local),
    };
    nv.argmax = nv.argmax.shift(anchor.start - 1);
    Ok(nv)
}

/// Exact all-intervals norm over every sub-interval of `anchor`, `O(n^2)`.
pub fn norm_all_intervals(y: &[f64], anchor: Interval) -> Result<f64> {
    Interval::within(anchor.start, anchor.end, y.len())?;
    Ok(all_intervals_norm(&y[anchor.range()]).value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    // Independent of the pyramid: each dyadic window sum is built by recursive
    // halving, which yields the same association order as the pyramid.
    fn halving_sum(y: &[f64]) -> f64 {
        if y.len() == 1 {
            y[0]
        } else {
            let h = y.len() / 2;
            halving_sum(&y[..h]) + halving_sum(&y[h..])
        }
    }

    fn naive_dyadic(y: &[f64]) -> f64 {
        let n = y.len();
        let mut best = f64::NEG_INFINITY;
        for s in 0..n {
            for e in s..n {
                let len = e - s + 1;
                if len.is_power_of_two() {
                    let u = halving_sum(&y[s..=e]) / (len as f64).sqrt();
                    best = best.max(u.abs());
                }
            }
        }
        best
    }

    #[test]
    fn scaled_partial_sum_examples() {
        let p = PrefixSums::new(&[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(scaled_partial_sum(&p, 1, 4).unwrap(), 2.0);
        let p = PrefixSums::new(&[1.0, -1.0]);
        assert_eq!(scaled_partial_sum(&p, 1, 2).unwrap(), 0.0);
        let p = PrefixSums::new(&[3.0]);
        assert_eq!(scaled_partial_sum(&p, 1, 1).unwrap(), 3.0);
    }

    #[test]
    fn scaled_partial_sum_rejects_bad_indices() {
        let p = PrefixSums::new(&[1.0, 2.0]);
        assert!(matches!(
            scaled_partial_sum(&p, 0, 1),
            Err(NspError::IndexBounds { .. })
        ));
        assert!(scaled_partial_sum(&p, 2, 3).is_err());
        assert!(scaled_partial_sum(&p, 2, 1).is_err());
    }

    #[test]
    fn prefix_differences_recover_inputs() {
        let y = gaussian(500, 3);
        let p = PrefixSums::new(&y);
        for t in 1..=y.len() {
            assert_relative_eq!(p.cumsum()[t] - p.cumsum()[t - 1], y[t - 1], epsilon = 1e-12);
        }
    }

    #[test]
    fn compensated_prefix_sums_do_not_drift() {
        let y = vec![0.1; 1_000_000];
        let p = PrefixSums::new(&y);
        assert!((p.sum(1, 1_000_000) - 100_000.0).abs() < 1e-9);
    }

    #[test]
    fn zero_input_has_zero_norm() {
        let y = vec![0.0; 13];
        for kind in [FamilyKind::Dyadic, FamilyKind::All] {
            let nv = multiresolution_norm(&y, &IntervalFamily::local(kind, 13)).unwrap();
            assert_eq!(nv.value, 0.0);
        }
        assert_eq!(norm_all_intervals(&y, Interval::new(1, 13)).unwrap(), 0.0);
    }

    #[test]
    fn constant_ones_dyadic_norm() {
        let y = [1.0, 1.0, 1.0, 1.0];
        let fam = IntervalFamily::dyadic(Interval::new(1, 4));
        assert_eq!(fam.size(), 4 + 3 + 1);
        let nv = multiresolution_norm(&y, &fam).unwrap();
        assert_eq!(nv.value, 2.0);
        assert_eq!(nv.argmax, Interval::new(1, 4));
        assert_eq!(norm_all_intervals(&y, Interval::new(1, 4)).unwrap(), 2.0);
    }

    #[test]
    fn argmax_ties_prefer_smallest_start() {
        let y = [1.0, -1.0, 1.0];
        let nv = multiresolution_norm(&y, &IntervalFamily::dyadic(Interval::new(1, 3))).unwrap();
        assert_eq!(nv.value, 1.0);
        assert_eq!(nv.argmax, Interval::new(1, 1));
    }

    #[test]
    fn argmax_is_reported_in_series_coordinates() {
        let y = [0.0, 0.0, 5.0, 0.0, 0.0];
        let nv = multiresolution_norm(&y, &IntervalFamily::dyadic(Interval::new(2, 5))).unwrap();
        assert_eq!(nv.argmax, Interval::new(3, 3));
    }

    #[test]
    fn empty_input_is_rejected() {
        let fam = IntervalFamily::dyadic(Interval::new(1, 1));
        assert!(matches!(
            multiresolution_norm(&[], &fam),
            Err(NspError::InvalidArgument(_))
        ));
    }

    #[test]
    fn pyramid_matches_naive_enumeration_on_gaussian_64() {
        let y = gaussian(64, 64);
        let nv = dyadic_norm(&y);
        assert_eq!(nv.value, naive_dyadic(&y));
    }

    #[test]
    fn dyadic_members_are_enumerated_by_length() {
        let fam = IntervalFamily::dyadic(Interval::new(3, 7));
        let members: Vec<_> = fam.members().collect();
        assert_eq!(members.len(), fam.size());
        assert_eq!(members[0], Interval::new(3, 3));
        assert_eq!(members.last(), Some(&Interval::new(4, 7)));
        let all = IntervalFamily::all(Interval::new(3, 7));
        assert!(members.iter().all(|m| all.members().any(|a| a == *m)));
        assert!(members.iter().all(|m| m.len().is_power_of_two()));
    }

    #[test]
    fn window_sums_follow_member_order() {
        let y = gaussian(11, 5);
        let sums = dyadic_window_sums(&y);
        let fam = IntervalFamily::local(FamilyKind::Dyadic, 11);
        assert_eq!(sums.len(), fam.size());
        for (sum, iv) in sums.iter().zip(fam.members()) {
            assert_relative_eq!(*sum, y[iv.range()].iter().sum::<f64>(), epsilon = 1e-12);
        }
    }

    #[test]
    fn all_intervals_dominates_dyadic_on_noise() {
        let y = gaussian(32, 32);
        let d = dyadic_norm(&y).value;
        let a = norm_all_intervals(&y, Interval::new(1, 32)).unwrap();
        assert!(a >= d - 1e-12, "{a} < {d}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn dyadic_below_all_and_all_monotone_in_anchor(
            y in prop::collection::vec(-10.0f64..10.0, 2..40),
            cut in 0usize..40,
        ) {
            let n = y.len();
            let full = Interval::new(1, n);
            let d = multiresolution_norm(&y, &IntervalFamily::dyadic(full)).unwrap().value;
            let a = norm_all_intervals(&y, full).unwrap();
            prop_assert!(d <= a + 1e-12 * (1.0 + a));
            let sub = Interval::new(1 + cut % n, n);
            let a_sub = norm_all_intervals(&y, sub).unwrap();
            prop_assert!(a_sub <= a + 1e-12 * (1.0 + a));
            let d_sub = multiresolution_norm(&y, &IntervalFamily::dyadic(sub)).unwrap().value;
            prop_assert!(d_sub <= d + 1e-12 * (1.0 + d));
        }

        #[test]
        fn norm_is_a_seminorm(
            pair in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..40),
            c in -4.0f64..4.0,
        ) {
            let (y, z): (Vec<f64>, Vec<f64>) = pair.into_iter().unzip();
            let ny = dyadic_norm(&y).value;
            let nz = dyadic_norm(&z).value;
            let scaled: Vec<f64> = y.iter().map(|v| c * v).collect();
            prop_assert!((dyadic_norm(&scaled).value - c.abs() * ny).abs() <= 1e-9 * (1.0 + ny));
            let sum: Vec<f64> = y.iter().zip(&z).map(|(a, b)| a + b).collect();
            prop_assert!(dyadic_norm(&sum).value <= ny + nz + 1e-9);
        }

        #[test]
        fn scaled_partial_sum_is_linear(
            pair in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..30),
            a in -3.0f64..3.0,
        ) {
            let (y, z): (Vec<f64>, Vec<f64>) = pair.into_iter().unzip();
            let combo: Vec<f64> = y.iter().zip(&z).map(|(u, v)| a * u + v).collect();
            let (py, pz, pc) = (PrefixSums::new(&y), PrefixSums::new(&z), PrefixSums::new(&combo));
            let n = y.len();
            let lhs = scaled_partial_sum(&pc, 1, n).unwrap();
            let rhs = a * scaled_partial_sum(&py, 1, n).unwrap() + scaled_partial_sum(&pz, 1, n).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-9);
        }
    }
}
