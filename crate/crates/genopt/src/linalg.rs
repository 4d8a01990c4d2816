//! Minimal dense linear algebra: SPD Cholesky factorization and solves.
//!
//! Only what the GP surrogate needs. Matrices are row-major and dense;
//! problem sizes stay in the low hundreds so no blocking is attempted.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is not symmetric (max relative asymmetry {0:.3e})")]
    NotSymmetric(f64),
    #[error("matrix is not positive definite (jitter escalated to {0:.3e})")]
    NotPositiveDefinite(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        DenseMatrix { rows: r, cols: c, data }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        DenseMatrix { rows, cols, data }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// `self * v` for a vector `v` of length `cols`.
    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
            })
            .collect()
    }

    fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, &x| m.max(x.abs()))
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Lower-triangular Cholesky factor of a (possibly jittered) SPD matrix.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    /// Lower-triangular factor with strictly positive diagonal.
    pub l: DenseMatrix,
    /// Jitter actually added to the diagonal before factorization succeeded.
    pub jitter: f64,
}

impl CholeskyFactor {
    pub fn dim(&self) -> usize {
        self.l.rows
    }

    /// Solves `L z = b` by forward substitution.
    pub fn solve_lower(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let n = self.dim();
        if b.len() != n {
            return Err(LinalgError::DimensionMismatch {
                expected: n,
                got: b.len(),
            });
        }
        let mut z = b.to_vec();
        for i in 0..n {
            let row = self.l.row(i);
            let mut s = z[i];
            for j in 0..i {
                s -= row[j] * z[j];
            }
            z[i] = s / row[i];
        }
        Ok(z)
    }

    /// Solves `L^T x = z` by back substitution.
    pub fn solve_upper(&self, z: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let n = self.dim();
        if z.len() != n {
            return Err(LinalgError::DimensionMismatch {
                expected: n,
                got: z.len(),
            });
        }
        let mut x = z.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.l[(j, i)] * x[j];
            }
            x[i] = s / self.l[(i, i)];
        }
        Ok(x)
    }

    /// Sum of the logs of the diagonal entries, i.e. `log det(L)`.
    pub fn log_diag_sum(&self) -> f64 {
        (0..self.dim()).map(|i| self.l[(i, i)].ln()).sum()
    }
}

const SYMMETRY_RTOL: f64 = 1e-12;
const MAX_JITTER_ESCALATIONS: usize = 6;

/// Cholesky factorization of a symmetric positive-definite matrix.
///
/// The jitter added to the diagonal starts at `jitter_start` and is multiplied
/// by 10 on each failed attempt, at most 6 escalations. A zero `jitter_start`
/// escalates to 1e-10 on the first failure.
pub fn cholesky(m: &DenseMatrix, jitter_start: f64) -> Result<CholeskyFactor, LinalgError> {
    let n = m.rows;
    if m.cols != n {
        return Err(LinalgError::DimensionMismatch {
            expected: n,
            got: m.cols,
        });
    }
    let scale = m.max_abs().max(1.0);
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in 0..i {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs() / scale);
        }
    }
    if worst > SYMMETRY_RTOL {
        return Err(LinalgError::NotSymmetric(worst));
    }

    let mut jitter = jitter_start;
    for attempt in 0..=MAX_JITTER_ESCALATIONS {
        if let Some(l) = try_factor(m, jitter) {
            return Ok(CholeskyFactor { l, jitter });
        }
        if attempt == MAX_JITTER_ESCALATIONS {
            break;
        }
        jitter = if jitter == 0.0 { 1e-10 } else { jitter * 10.0 };
    }
    Err(LinalgError::NotPositiveDefinite(jitter))
}

fn try_factor(m: &DenseMatrix, jitter: f64) -> Option<DenseMatrix> {
    let n = m.rows;
    let mut l = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = m[(i, j)];
            if i == j {
                s += jitter;
            }
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[(i, i)] = s.sqrt();
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    Some(l)
}

/// Solves `(L L^T) x = b` for a factored SPD system.
pub fn solve_psd(f: &CholeskyFactor, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    let z = f.solve_lower(b)?;
    f.solve_upper(&z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, seed: u64) -> DenseMatrix {
        // A^T A + I is SPD for any A.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = rng.random_range(-1.0..1.0);
            }
        }
        let mut m = DenseMatrix::identity(n);
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += a[(k, i)] * a[(k, j)];
                }
                m[(i, j)] += s;
            }
        }
        m
    }

    fn frobenius(m: &DenseMatrix) -> f64 {
        m.data().iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    #[test]
    fn identity_factors_to_identity() {
        let f = cholesky(&DenseMatrix::identity(3), 0.0).unwrap();
        assert_eq!(f.l, DenseMatrix::identity(3));
        assert_eq!(f.jitter, 0.0);
    }

    #[test]
    fn hand_expandable_2x2() {
        let m = DenseMatrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 3.0]]);
        let f = cholesky(&m, 0.0).unwrap();
        assert!((f.l[(0, 0)] - 2.0).abs() < 1e-15);
        assert!((f.l[(1, 0)] - 1.0).abs() < 1e-15);
        assert!((f.l[(1, 1)] - 2.0_f64.sqrt()).abs() < 1e-15);
        assert_eq!(f.l[(0, 1)], 0.0);
    }

    #[test]
    fn random_spd_reconstruction() {
        let m = random_spd(20, 7);
        let f = cholesky(&m, 0.0).unwrap();
        let mut rec = DenseMatrix::zeros(20, 20);
        for i in 0..20 {
            for j in 0..20 {
                let mut s = 0.0;
                for k in 0..20 {
                    s += f.l[(i, k)] * f.l[(j, k)];
                }
                rec[(i, j)] = s - m[(i, j)];
            }
        }
        assert!(frobenius(&rec) / frobenius(&m) < 1e-10);
    }

    #[test]
    fn solve_identity() {
        let f = cholesky(&DenseMatrix::identity(3), 0.0).unwrap();
        let x = solve_psd(&f, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(x, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn solve_2x2_known() {
        // K = [[4,2],[2,3]], b = (4,1)  =>  x = (1.25, -0.5)
        let m = DenseMatrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 3.0]]);
        let f = cholesky(&m, 0.0).unwrap();
        let x = solve_psd(&f, &[4.0, 1.0]).unwrap();
        assert!((x[0] - 1.25).abs() < 1e-14);
        assert!((x[1] + 0.5).abs() < 1e-14);
    }

    #[test]
    fn solve_residual_random_15x15() {
        let m = random_spd(15, 42);
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let b: Vec<f64> = (0..15).map(|_| rng.random_range(-5.0..5.0)).collect();
        let f = cholesky(&m, 0.0).unwrap();
        let x = solve_psd(&f, &b).unwrap();
        let r = m.matvec(&x);
        let bmax = b.iter().fold(0.0_f64, |a, &v| a.max(v.abs()));
        let rmax = r
            .iter()
            .zip(&b)
            .fold(0.0_f64, |a, (&ri, &bi)| a.max((ri - bi).abs()));
        assert!(rmax < 1e-8 * bmax);
    }

    #[test]
    fn asymmetric_input_rejected() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 0.5], vec![0.2, 1.0]]);
        assert!(matches!(cholesky(&m, 0.0), Err(LinalgError::NotSymmetric(_))));
    }

    #[test]
    fn indefinite_input_rejected_after_escalation() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, -5.0]]);
        assert!(matches!(
            cholesky(&m, 1e-10),
            Err(LinalgError::NotPositiveDefinite(_))
        ));
    }

    #[test]
    fn jitter_escalation_recovers_near_singular() {
        // Rank-deficient: ones everywhere. Needs jitter to factor.
        let m = DenseMatrix::from_vec(4, 4, vec![1.0; 16]);
        let f = cholesky(&m, 1e-10).unwrap();
        assert!(f.jitter > 0.0);
    }

    #[test]
    fn factorization_is_deterministic() {
        let m = random_spd(10, 99);
        let a = cholesky(&m, 1e-10).unwrap();
        let b = cholesky(&m, 1e-10).unwrap();
        assert_eq!(a.l, b.l);
    }

    #[test]
    fn dimension_mismatch_on_solve() {
        let f = cholesky(&DenseMatrix::identity(3), 0.0).unwrap();
        assert!(matches!(
            solve_psd(&f, &[1.0, 2.0]),
            Err(LinalgError::DimensionMismatch { .. })
        ));
    }
}
