//! Small dense helpers for the d×d matrices that dominate this crate.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Eigenvalues of a symmetric matrix in ascending order. Closed form for
/// d ≤ 2, which is the hot path for latent dimension two.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    match m.nrows() {
        0 => Vec::new(),
        1 => vec![m[(0, 0)]],
        2 => {
            let (a, b, c) = (m[(0, 0)], 0.5 * (m[(0, 1)] + m[(1, 0)]), m[(1, 1)]);
            let mean = 0.5 * (a + c);
            let r = (0.25 * (a - c) * (a - c) + b * b).sqrt();
            // Stable small root via the product of the roots.
            let hi = mean + r;
            let det = a * c - b * b;
            let lo = if hi != 0.0 { det / hi } else { mean - r };
            vec![lo.min(hi), lo.max(hi)]
        }
        _ => {
            let mut ev: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
            ev.sort_by(f64::total_cmp);
            ev
        }
    }
}

/// Eigen-decomposition sorted by descending eigenvalue.
pub fn symmetric_eigen_descending(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let SymmetricEigen {
        eigenvalues,
        eigenvectors,
    } = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eigenvalues[j].total_cmp(&eigenvalues[i]));
    let values = order.iter().map(|&i| eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), order.len(), |r, c| eigenvectors[(r, order[c])]);
    (values, vectors)
}

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let s = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = s;
            m[(j, i)] = s;
        }
    }
}

pub fn frobenius_sq(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum()
}

/// `uᵀ M w`
pub fn bilinear(u: &DVector<f64>, m: &DMatrix<f64>, w: &DVector<f64>) -> f64 {
    let mut s = 0.0;
    for i in 0..u.len() {
        let mut row = 0.0;
        for j in 0..w.len() {
            row += m[(i, j)] * w[j];
        }
        s += u[i] * row;
    }
    s
}

/// Neumaier compensated summation in the given order.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_eigenvalues_match_general_solver() {
        let m = DMatrix::from_row_slice(2, 2, &[3.0, 1.2, 1.2, 0.5]);
        let fast = symmetric_eigenvalues(&m);
        let mut slow: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
        slow.sort_by(f64::total_cmp);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let vals = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(vals), 2.0);
    }
}
