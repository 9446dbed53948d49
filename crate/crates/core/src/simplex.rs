//! Dense tableau simplex for weighted sup-norm (Chebyshev-type) fits.
//!
//! The fit
//!
//! ```text
//! minimise omega  subject to  |a_k - c_k' beta| <= w_k * omega   for every k
//! ```
//!
//! has `p + 1` free variables and `2K` inequality constraints, with `K` in the
//! tens of thousands for long intervals. We therefore run the simplex method on
//! its dual,
//!
//! ```text
//! maximise  sum_k a_k (u_k - v_k)
//! subject to sum_k w_k (u_k + v_k) = 1,  sum_k c_k (u_k - v_k) = 0,  u, v >= 0,
//! ```
//!
//! whose tableau has only `p + 1` rows. The free `beta` and `omega` of the
//! primal are the simplex multipliers of the optimal dual basis, and are read
//! off the reduced costs of the artificial columns.

const PIVOT_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-9;
/// Degenerate pivots tolerated before switching to Bland's rule for good.
const STALL_LIMIT: usize = 50;

pub(crate) struct SupNormLp<'a> {
    /// `a_k`, one per constraint pair.
    pub response: &'a [f64],
    /// `c_k`, row-major `K x p`.
    pub design: &'a [f64],
    /// `w_k > 0`.
    pub weights: &'a [f64],
    pub p: usize,
}

#[derive(Debug)]
pub(crate) struct IterationLimit(pub usize);

struct Tableau {
    rows: usize,
    /// Structural plus artificial columns, excluding the right-hand side.
    cols: usize,
    structural: usize,
    /// `rows x (cols + 1)` row-major; last entry of each row is the RHS.
    body: Vec<f64>,
    /// Reduced costs, last entry is minus the objective value.
    cost: Vec<f64>,
    basis: Vec<usize>,
    iterations: usize,
    limit: usize,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.body[r * (self.cols + 1) + c]
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let stride = self.cols + 1;
        let piv = self.at(pr, pc);
        let inv = 1.0 / piv;
        {
            let row = &mut self.body[pr * stride..(pr + 1) * stride];
            row.iter_mut().for_each(|v| *v *= inv);
            row[pc] = 1.0;
        }
        let pivot_row: Vec<f64> = self.body[pr * stride..(pr + 1) * stride].to_vec();
        for r in 0..self.rows {
            if r == pr {
                continue;
            }
            let row = &mut self.body[r * stride..(r + 1) * stride];
            let f = row[pc];
            if f != 0.0 {
                row.iter_mut()
                    .zip(&pivot_row)
                    .for_each(|(v, p)| *v -= f * p);
                row[pc] = 0.0;
            }
        }
        let f = self.cost[pc];
        if f != 0.0 {
            self.cost
                .iter_mut()
                .zip(&pivot_row)
                .for_each(|(v, p)| *v -= f * p);
            self.cost[pc] = 0.0;
        }
        self.basis[pr] = pc;
    }

    fn entering(&self, bland: bool) -> Option<usize> {
        let d = &self.cost[..self.structural];
        if bland {
            d.iter().position(|&v| v < -OPT_TOL)
        } else {
            let mut best = -OPT_TOL;
            let mut pick = None;
            for (j, &v) in d.iter().enumerate() {
                if v < best {
                    best = v;
                    pick = Some(j);
                }
            }
            pick
        }
    }

    fn leaving(&self, pc: usize, bland: bool) -> Option<usize> {
        let mut pick: Option<(usize, f64, f64)> = None;
        for r in 0..self.rows {
            let a = self.at(r, pc);
            if a <= PIVOT_TOL {
                continue;
            }
            let ratio = self.at(r, self.cols) / a;
            pick = match pick {
                None => Some((r, ratio, a)),
                Some((br, bratio, ba)) => {
                    let better = if ratio < bratio - 1e-12 {
                        true
                    } else if ratio <= bratio + 1e-12 {
                        if bland {
                            self.basis[r] < self.basis[br]
                        } else {
                            a > ba
                        }
                    } else {
                        false
                    };
                    if better {
                        Some((r, ratio, a))
                    } else {
                        Some((br, bratio, ba))
                    }
                }
            };
        }
        pick.map(|(r, _, _)| r)
    }

    /// Runs simplex iterations on the current cost row until optimal.
    fn optimise(&mut self) -> Result<(), IterationLimit> {
        let mut bland = false;
        let mut stalled = 0usize;
        loop {
            let Some(pc) = self.entering(bland) else {
                return Ok(());
            };
            // The dual is bounded (objective <= max |a_k| / w_k), so a column
            // without a positive entry only appears through rounding: drop it.
            let Some(pr) = self.leaving(pc, bland) else {
                self.cost[pc] = 0.0;
                continue;
            };
            let before = self.cost[self.cols];
            self.pivot(pr, pc);
            self.iterations += 1;
            if self.iterations > self.limit {
                return Err(IterationLimit(self.iterations));
            }
            if (self.cost[self.cols] - before).abs() <= 1e-14 * (1.0 + before.abs()) {
                stalled += 1;
                if stalled > STALL_LIMIT {
                    bland = true;
                }
            } else {
                stalled = 0;
            }
        }
    }
}

/// Returns the optimal `beta` (length `p`).
pub(crate) fn solve(lp: &SupNormLp<'_>) -> Result<Vec<f64>, IterationLimit> {
    let k = lp.response.len();
    let p = lp.p;
    debug_assert_eq!(lp.design.len(), k * p);
    debug_assert_eq!(lp.weights.len(), k);

    let sa = lp.response.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if sa == 0.0 || k == 0 {
        return Ok(vec![0.0; p]);
    }
    let mut sc = vec![0.0f64; p];
    for row in lp
        .design
        .chunks_exact(p.max(1))
        .take(if p == 0 { 0 } else { k })
    {
        for (s, v) in sc.iter_mut().zip(row) {
            *s = s.max(v.abs());
        }
    }
    for s in sc.iter_mut() {
        if *s == 0.0 {
            *s = 1.0;
        }
    }
    let sw = lp.weights.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let rows = p + 1;
    let structural = 2 * k;
    let cols = structural + rows;
    let stride = cols + 1;
    let mut body = vec![0.0f64; rows * stride];
    for j in 0..k {
        let w = lp.weights[j] / sw;
        body[2 * j] = w;
        body[2 * j + 1] = w;
        for i in 0..p {
            let c = lp.design[j * p + i] / sc[i];
            body[(i + 1) * stride + 2 * j] = c;
            body[(i + 1) * stride + 2 * j + 1] = -c;
        }
    }
    for r in 0..rows {
        body[r * stride + structural + r] = 1.0;
    }
    body[cols] = 1.0;

    // Phase one: minimise the sum of artificials.
    let mut cost = vec![0.0f64; stride];
    for r in 0..rows {
        for c in 0..structural {
            cost[c] -= body[r * stride + c];
        }
        cost[cols] -= body[r * stride + cols];
    }
    let mut tab = Tableau {
        rows,
        cols,
        structural,
        body,
        cost,
        basis: (structural..cols).collect(),
        iterations: 0,
        limit: 5_000 + 4 * structural,
    };
    tab.optimise()?;

    // Move remaining (zero-level) artificials out of the basis where possible.
    // Rows that cannot be cleared are redundant; their multiplier stays zero.
    for r in 0..rows {
        if tab.basis[r] >= structural {
            let mut best = (0.0f64, None);
            for c in 0..structural {
                let v = tab.at(r, c).abs();
                if v > best.0 {
                    best = (v, Some(c));
                }
            }
            if let (v, Some(c)) = best {
                if v > PIVOT_TOL {
                    tab.pivot(r, c);
                }
            }
        }
    }

    // Phase two: minimise -sum a_k (u_k - v_k).
    let col_cost = |c: usize| -> f64 {
        if c >= structural {
            0.0
        } else {
            let a = lp.response[c / 2] / sa;
            if c.is_multiple_of(2) {
                -a
            } else {
                a
            }
        }
    };
    let mut cost = vec![0.0f64; stride];
    for c in 0..structural {
        cost[c] = col_cost(c);
    }
    for r in 0..rows {
        let cb = col_cost(tab.basis[r]);
        if cb != 0.0 {
            for c in 0..stride {
                cost[c] -= cb * tab.body[r * stride + c];
            }
        }
    }
    tab.cost = cost;
    tab.optimise()?;

    // Reduced cost of artificial i is -y_i; beta = -y[1..] in scaled units.
    Ok((0..p)
        .map(|i| tab.cost[structural + 1 + i] * sa / sc[i])
        .collect())
}
