//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use nsp_core::Design;

/// Sum in the same pairwise (halving) order as the pyramid, so dyadic window
/// sums agree bit for bit.
pub fn halving_sum(y: &[f64]) -> f64 {
    if y.len() == 1 {
        y[0]
    } else {
        let h = y.len() / 2;
        halving_sum(&y[..h]) + halving_sum(&y[h..])
    }
}

/// Dyadic sup-norm by direct enumeration of every `(s, e)` pair.
pub fn naive_dyadic_norm(y: &[f64]) -> f64 {
    let n = y.len();
    let mut best = f64::NEG_INFINITY;
    for s in 0..n {
        for e in s..n {
            let len = e - s + 1;
            if len.is_power_of_two() {
                best = best.max((halving_sum(&y[s..=e]) / (len as f64).sqrt()).abs());
            }
        }
    }
    best
}

/// Rows `(a_k, b_k)` of the dyadic Chebyshev problem on `[1, n]`:
/// residual `b_k - a_k . beta` is the scaled partial sum of `y - X beta`.
pub fn dyadic_rows(y: &[f64], x: &Design) -> Vec<(Vec<f64>, f64)> {
    let n = y.len();
    let p = x.ncols();
    let mut rows = Vec::new();
    for s in 0..n {
        for e in s..n {
            let len = e - s + 1;
            if !len.is_power_of_two() {
                continue;
            }
            let scale = (len as f64).sqrt();
            let b = y[s..=e].iter().sum::<f64>() / scale;
            let a = (0..p)
                .map(|j| (s..=e).map(|t| x[(t, j)]).sum::<f64>() / scale)
                .collect();
            rows.push((a, b));
        }
    }
    rows
}

fn solve_dense(mut m: Vec<Vec<f64>>, mut r: Vec<f64>) -> Option<Vec<f64>> {
    let n = r.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, piv);
        r.swap(col, piv);
        for i in 0..n {
            if i != col {
                let f = m[i][col] / m[col][col];
                for k in col..n {
                    m[i][k] -= f * m[col][k];
                }
                r[i] -= f * r[col];
            }
        }
    }
    Some((0..n).map(|i| r[i] / m[i][i]).collect())
}

/// Exact Chebyshev optimum by vertex enumeration: every choice of `p + 1`
/// constraints and signs with `sign_k (b_k - a_k beta) = t`, kept when feasible.
pub fn chebyshev_by_vertices(rows: &[(Vec<f64>, f64)], p: usize) -> f64 {
    let k = rows.len();
    let mut best = f64::INFINITY;
    let mut idx: Vec<usize> = (0..=p).collect();
    loop {
        for signs in 0..(1u32 << (p + 1)) {
            let mut m = Vec::with_capacity(p + 1);
            let mut r = Vec::with_capacity(p + 1);
            for (bit, &i) in idx.iter().enumerate() {
                let sg = if signs >> bit & 1 == 1 { -1.0 } else { 1.0 };
                let (a, b) = &rows[i];
                let mut row: Vec<f64> = a.iter().map(|v| sg * v).collect();
                row.push(1.0);
                m.push(row);
                r.push(sg * b);
            }
            let Some(sol) = solve_dense(m, r) else {
                continue;
            };
            let t = sol[p];
            if t < -1e-12 || t >= best {
                continue;
            }
            let beta = &sol[..p];
            let worst = rows
                .iter()
                .map(|(a, b)| (b - a.iter().zip(beta).map(|(u, v)| u * v).sum::<f64>()).abs())
                .fold(0.0, f64::max);
            if worst <= t + 1e-9 {
                best = t.max(0.0);
            }
        }
        // next combination of p + 1 out of k
        let mut i = p as isize;
        while i >= 0 && idx[i as usize] == k - (p + 1) + i as usize {
            i -= 1;
        }
        if i < 0 {
            break;
        }
        idx[i as usize] += 1;
        for j in (i as usize + 1)..=p {
            idx[j] = idx[j - 1] + 1;
        }
    }
    best
}
