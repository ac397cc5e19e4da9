//! Small dense least squares through the normal equations.
//!
//! Problems here have at most three unknowns, so the columns are equilibrated
//! to unit norm, the normal matrix is formed and factored by Cholesky. The
//! condition number of the equilibrated normal matrix comes from its closed
//! form eigenvalues.

use crate::error::{Error, Result};

/// Largest accepted condition number of the equilibrated normal matrix.
pub const MAX_CONDITION: f64 = 1e12;

pub const MAX_UNKNOWNS: usize = 3;

/// Solution of a least-squares problem.
#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares {
    pub coeffs: Vec<f64>,
    pub residual_sum_squares: f64,
    pub condition: f64,
}

/// Minimizes `sum_i (rows[i] . x - targets[i])^2`.
///
/// Every row must have the same length `k` with `1 <= k <= 3`.
pub fn solve(rows: &[Vec<f64>], targets: &[f64]) -> Result<LeastSquares> {
    let k = rows.first().map_or(0, Vec::len);
    if k == 0 || k > MAX_UNKNOWNS {
        return Err(Error::DegenerateFit(format!("unsupported unknown count {k}")));
    }
    if rows.len() != targets.len() || rows.iter().any(|r| r.len() != k) {
        return Err(Error::Shape("design rows and targets disagree".into()));
    }
    if rows.len() < k {
        return Err(Error::UnderDetermined {
            samples: rows.len(),
            params: k,
        });
    }

    let mut norms = vec![0.0; k];
    for row in rows {
        for (n, x) in norms.iter_mut().zip(row) {
            *n += x * x;
        }
    }
    for (j, n) in norms.iter_mut().enumerate() {
        *n = n.sqrt();
        if !(*n > 0.0 && n.is_finite()) {
            return Err(Error::DegenerateFit(format!("regressor column {j} is zero or non-finite")));
        }
    }

    let mut a = [[0.0f64; MAX_UNKNOWNS]; MAX_UNKNOWNS];
    let mut rhs = [0.0f64; MAX_UNKNOWNS];
    for (row, &t) in rows.iter().zip(targets) {
        for i in 0..k {
            let xi = row[i] / norms[i];
            rhs[i] += xi * t;
            for j in 0..=i {
                a[i][j] += xi * row[j] / norms[j];
            }
        }
    }
    for i in 0..k {
        for j in 0..i {
            a[j][i] = a[i][j];
        }
    }

    let condition = condition_number(&a, k);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::DegenerateFit(format!(
            "normal matrix condition number {condition:.3e} exceeds {MAX_CONDITION:.0e}"
        )));
    }

    let scaled = cholesky_solve(&a, &rhs, k)
        .ok_or_else(|| Error::DegenerateFit("normal matrix is not positive definite".into()))?;
    let coeffs: Vec<f64> = scaled.iter().zip(&norms).map(|(c, n)| c / n).collect();

    let residual_sum_squares = rows
        .iter()
        .zip(targets)
        .map(|(row, t)| {
            let r: f64 = row.iter().zip(&coeffs).map(|(x, c)| x * c).sum::<f64>() - t;
            r * r
        })
        .sum();

    Ok(LeastSquares {
        coeffs,
        residual_sum_squares,
        condition,
    })
}

fn cholesky_solve(a: &[[f64; 3]; 3], b: &[f64; 3], k: usize) -> Option<Vec<f64>> {
    let mut l = [[0.0f64; 3]; 3];
    for i in 0..k {
        for j in 0..=i {
            let s: f64 = a[i][j] - (0..j).map(|p| l[i][p] * l[j][p]).sum::<f64>();
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut y = [0.0f64; 3];
    for i in 0..k {
        y[i] = (b[i] - (0..i).map(|p| l[i][p] * y[p]).sum::<f64>()) / l[i][i];
    }
    let mut x = vec![0.0f64; k];
    for i in (0..k).rev() {
        x[i] = (y[i] - (i + 1..k).map(|p| l[p][i] * x[p]).sum::<f64>()) / l[i][i];
    }
    Some(x)
}

/// Ratio of extreme eigenvalues of a symmetric positive semidefinite matrix.
fn condition_number(a: &[[f64; 3]; 3], k: usize) -> f64 {
    let eig = symmetric_eigenvalues(a, k);
    let max = eig.iter().cloned().fold(f64::MIN, f64::max);
    let min = eig.iter().cloned().fold(f64::MAX, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

fn symmetric_eigenvalues(a: &[[f64; 3]; 3], k: usize) -> Vec<f64> {
    match k {
        1 => vec![a[0][0]],
        2 => {
            let mean = 0.5 * (a[0][0] + a[1][1]);
            let half_diff = 0.5 * (a[0][0] - a[1][1]);
            let r = half_diff.hypot(a[0][1]);
            // smaller root via the determinant to avoid cancellation
            let big = mean + r;
            let det = a[0][0] * a[1][1] - a[0][1] * a[0][1];
            vec![big, if big > 0.0 { det / big } else { mean - r }]
        }
        _ => {
            let p1 = a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2);
            let tr = a[0][0] + a[1][1] + a[2][2];
            if p1 == 0.0 {
                return vec![a[0][0], a[1][1], a[2][2]];
            }
            let qm = tr / 3.0;
            let p2 = (a[0][0] - qm).powi(2) + (a[1][1] - qm).powi(2) + (a[2][2] - qm).powi(2) + 2.0 * p1;
            let p = (p2 / 6.0).sqrt();
            let mut b = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    b[i][j] = (a[i][j] - if i == j { qm } else { 0.0 }) / p;
                }
            }
            let det_b = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1])
                - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0])
                + b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
            let r = (det_b / 2.0).clamp(-1.0, 1.0);
            let phi = r.acos() / 3.0;
            let e1 = qm + 2.0 * p * phi.cos();
            let e3 = qm + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
            let e2 = tr - e1 - e3;
            // The smallest eigenvalue loses relative precision when the matrix
            // is nearly singular; recover it from the determinant instead.
            let det_a = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
                - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
                + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
            let small = if e1 * e2 > 0.0 { det_a / (e1 * e2) } else { e3 };
            vec![e1, e2, small]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let rows: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, 1.0]).collect();
        let targets: Vec<f64> = (0..5).map(|i| 3.0 * i as f64 - 2.0).collect();
        let sol = solve(&rows, &targets).unwrap();
        assert!((sol.coeffs[0] - 3.0).abs() < 1e-12);
        assert!((sol.coeffs[1] + 2.0).abs() < 1e-12);
        assert!(sol.residual_sum_squares < 1e-20);
    }

    #[test]
    fn singular_columns_rejected() {
        let rows = vec![vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 6.0]];
        assert!(matches!(solve(&rows, &[1.0, 2.0, 3.0]), Err(Error::DegenerateFit(_))));
        let rows = vec![vec![0.0, 1.0], vec![0.0, 1.0]];
        assert!(matches!(solve(&rows, &[1.0, 2.0]), Err(Error::DegenerateFit(_))));
    }

    #[test]
    fn too_few_rows() {
        let rows = vec![vec![1.0, 1.0, 1.0]];
        assert!(matches!(solve(&rows, &[1.0]), Err(Error::UnderDetermined { .. })));
    }

    #[test]
    fn eigenvalues_of_diagonal_and_full() {
        let mut a = [[0.0; 3]; 3];
        a[0][0] = 4.0;
        a[1][1] = 2.0;
        a[2][2] = 1.0;
        assert!((condition_number(&a, 3) - 4.0).abs() < 1e-12);
        // [[2,1,0],[1,2,1],[0,1,2]] has eigenvalues 2 - sqrt2, 2, 2 + sqrt2
        let a = [[2.0, 1.0, 0.0], [1.0, 2.0, 1.0], [0.0, 1.0, 2.0]];
        let s2 = 2f64.sqrt();
        let expect = (2.0 + s2) / (2.0 - s2);
        assert!((condition_number(&a, 3) - expect).abs() < 1e-9);
        let a = [[2.0, 1.0, 0.0], [1.0, 2.0, 0.0], [0.0; 3]];
        assert!((condition_number(&a, 2) - 3.0).abs() < 1e-12);
    }
}
