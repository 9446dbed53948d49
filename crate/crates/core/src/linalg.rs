//! Small dense helpers for `p x p` systems, `p` in the single digits.

/// Solves the square system `a * x = b` (row-major `a`, `n x n`) by Gaussian
/// elimination with complete pivoting.
///
/// Pivots below `rel_tol * max|a|` are treated as zero: the matching unknowns
/// are set to zero, which yields a valid solution whenever the system is
/// consistent (as normal equations always are). Returns the numerical rank
/// alongside the solution.
pub(crate) fn solve_pivoted(a: &[f64], b: &[f64], n: usize, rel_tol: f64) -> (Vec<f64>, usize) {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    let mut m = a.to_vec();
    let mut rhs = b.to_vec();
    let mut col_perm: Vec<usize> = (0..n).collect();
    let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 {
        return (vec![0.0; n], 0);
    }
    let tol = rel_tol * scale;
    let mut rank = 0;
    for k in 0..n {
        let (mut pr, mut pc, mut best) = (k, k, 0.0f64);
        for r in k..n {
            for c in k..n {
                let v = m[r * n + c].abs();
                if v > best {
                    best = v;
                    pr = r;
                    pc = c;
                }
            }
        }
        if best <= tol {
            break;
        }
        rank += 1;
        if pr != k {
            for c in 0..n {
                m.swap(k * n + c, pr * n + c);
            }
            rhs.swap(k, pr);
        }
        if pc != k {
            for r in 0..n {
                m.swap(r * n + k, r * n + pc);
            }
            col_perm.swap(k, pc);
        }
        let piv = m[k * n + k];
        for r in k + 1..n {
            let f = m[r * n + k] / piv;
            if f != 0.0 {
                for c in k..n {
                    m[r * n + c] -= f * m[k * n + c];
                }
                rhs[r] -= f * rhs[k];
            }
        }
    }
    let mut z = vec![0.0; n];
    for k in (0..rank).rev() {
        let mut acc = rhs[k];
        for c in k + 1..rank {
            acc -= m[k * n + c] * z[c];
        }
        z[k] = acc / m[k * n + k];
    }
    let mut x = vec![0.0; n];
    for (k, &orig) in col_perm.iter().enumerate() {
        x[orig] = z[k];
    }
    (x, rank)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_regular_system() {
        let a = [2.0, 1.0, 1.0, 3.0];
        let (x, rank) = solve_pivoted(&a, &[3.0, 5.0], 2, 1e-12);
        assert_eq!(rank, 2);
        assert!((x[0] - 0.8).abs() < 1e-12 && (x[1] - 1.4).abs() < 1e-12);
    }

    #[test]
    fn singular_consistent_system_gets_a_solution() {
        let a = [1.0, 1.0, 1.0, 1.0];
        let (x, rank) = solve_pivoted(&a, &[2.0, 2.0], 2, 1e-12);
        assert_eq!(rank, 1);
        assert!((x[0] + x[1] - 2.0).abs() < 1e-12);
    }
}
