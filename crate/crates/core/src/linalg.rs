//! Small dense linear solves (Gaussian elimination with partial pivoting).

/// Solves `a · x = b`. Returns the solution and the smallest absolute pivot
/// encountered, or `None` when a pivot is exactly zero or non-finite.
pub(crate) fn solve_with_pivot(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<(Vec<f64>, f64)> {
    let n = b.len();
    debug_assert!(a.len() == n && a.iter().all(|r| r.len() == n));
    let mut min_pivot = f64::INFINITY;
    for col in 0..n {
        let piv_row = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        let piv = a[piv_row][col];
        if piv == 0.0 || !piv.is_finite() {
            return None;
        }
        min_pivot = min_pivot.min(piv.abs());
        a.swap(col, piv_row);
        b.swap(col, piv_row);
        for r in col + 1..n {
            let f = a[r][col] / piv;
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x.iter().all(|v| v.is_finite()).then_some((x, min_pivot))
}

pub(crate) fn solve(a: Vec<Vec<f64>>, b: Vec<f64>) -> Option<Vec<f64>> {
    solve_with_pivot(a, b).map(|(x, _)| x)
}
