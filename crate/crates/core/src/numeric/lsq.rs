//! Dense least squares for the small boundary-fit systems (2–4 unknowns).

/// Solve `min ‖X β − y‖₂` via the normal equations with partial pivoting.
/// `x[i]` is the row of regressors for observation `i`. Returns `(β, rms)`
/// where `rms` is the root-mean-square residual.
pub fn least_squares(x: &[Vec<f64>], y: &[f64]) -> (Vec<f64>, f64) {
    let m = x.len();
    let p = x[0].len();
    assert!(m >= p, "least_squares: underdetermined system");

    let mut ata = vec![vec![0.0; p]; p];
    let mut aty = vec![0.0; p];
    for (row, &yi) in x.iter().zip(y) {
        for i in 0..p {
            aty[i] += row[i] * yi;
            for j in 0..p {
                ata[i][j] += row[i] * row[j];
            }
        }
    }
    let beta = solve_dense(&mut ata, &mut aty);

    let mut ss = 0.0;
    for (row, &yi) in x.iter().zip(y) {
        let pred: f64 = row.iter().zip(&beta).map(|(a, b)| a * b).sum();
        ss += (yi - pred) * (yi - pred);
    }
    (beta, (ss / m as f64).sqrt())
}

/// In-place Gaussian elimination with partial pivoting.
pub fn solve_dense(a: &mut [Vec<f64>], b: &mut [f64]) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        let d = a[col][col];
        for row in col + 1..n {
            let f = a[row][col] / d;
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut sol = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * sol[k];
        }
        sol[row] = acc / a[row][row];
    }
    sol
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_linear_fit() {
        // y = 3 + 2 t, no noise: residual ~ 0.
        let t: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let rows: Vec<Vec<f64>> = t.iter().map(|&ti| vec![1.0, ti]).collect();
        let y: Vec<f64> = t.iter().map(|&ti| 3.0 + 2.0 * ti).collect();
        let (beta, rms) = least_squares(&rows, &y);
        assert!((beta[0] - 3.0).abs() < 1e-12);
        assert!((beta[1] - 2.0).abs() < 1e-12);
        assert!(rms < 1e-12);
    }
}
