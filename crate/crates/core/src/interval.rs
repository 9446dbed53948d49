use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{NspError, Result};

/// Closed, 1-based integer interval `[start, end]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Interval {
    pub start: usize,
    pub end: usize,
}

impl Interval {
    pub const fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    /// Checked constructor: `1 <= start <= end <= len`.
    pub fn within(start: usize, end: usize, len: usize) -> Result<Self> {
        if start == 0 || start > end || end > len {
            return Err(NspError::IndexBounds { start, end, len });
        }
        Ok(Self { start, end })
    }

    /// Number of points, `end - start + 1`.
    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `end - start`, the width used when comparing interval lengths.
    pub fn width(&self) -> usize {
        self.end - self.start
    }

    pub fn contains(&self, t: usize) -> bool {
        self.start <= t && t <= self.end
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    /// 0-based half-open range for slicing.
    pub fn range(&self) -> std::ops::Range<usize> {
        self.start - 1..self.end
    }

    /// The set of admissible change-point locations `[start, end - 1]`.
    ///
    /// Returns `None` for a single-point interval.
    pub fn locations(&self) -> Option<Interval> {
        (self.end > self.start).then(|| Interval::new(self.start, self.end - 1))
    }

    pub fn shift(&self, by: usize) -> Interval {
        Interval::new(self.start + by, self.end + by)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.start, self.end)
    }
}
