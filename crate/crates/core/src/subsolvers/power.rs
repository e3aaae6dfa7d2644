use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

pub const POWER_MAX_ITERS: usize = 5000;
const POWER_REL_TOL: f64 = 1e-10;

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power
/// iteration on the Rayleigh quotient.
pub fn lambda_max(m: &Array2<f64>) -> Result<f64> {
    let (rows, cols) = m.dim();
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    if rows == 0 {
        return Ok(0.0);
    }
    // fixed, non-symmetric start so it is not orthogonal to structured eigenvectors
    let mut v: Array1<f64> = (0..rows).map(|j| 1.0 + 0.37 * ((j as f64 + 1.0) * 1.618).sin()).collect();
    v /= v.dot(&v).sqrt();
    let mut lambda = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        let w = m.dot(&v);
        let next = v.dot(&w);
        let norm = w.dot(&w).sqrt();
        if norm == 0.0 {
            return Ok(0.0);
        }
        v = w / norm;
        if (next - lambda).abs() <= POWER_REL_TOL * next.abs() {
            return Ok(next);
        }
        lambda = next;
    }
    log::debug!("power iteration hit its cap of {POWER_MAX_ITERS}");
    Ok(lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn small_examples() {
        assert!((lambda_max(&Array2::eye(3)).unwrap() - 1.0).abs() < 1e-12);
        let d = Array2::from_diag(&array![1.0, 4.0, 9.0]);
        assert!((lambda_max(&d).unwrap() - 9.0).abs() < 1e-8 * 9.0);
        assert_eq!(lambda_max(&Array2::zeros((2, 2))).unwrap(), 0.0);
        assert!(matches!(lambda_max(&Array2::zeros((2, 3))), Err(Error::NotSquare { rows: 2, cols: 3 })));
    }

    #[test]
    fn gram_matrix_matches_dense_eigensolver() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..5 {
            let a = Array2::from_shape_simple_fn((14, 10), || StandardNormal.sample(&mut rng));
            let gram = a.t().dot(&a);
            let nm = nalgebra::DMatrix::from_fn(10, 10, |i, j| gram[[i, j]]);
            let eig = nalgebra::SymmetricEigen::new(nm);
            let truth = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
            let est = lambda_max(&gram).unwrap();
            assert!((est - truth).abs() <= 1e-6 * truth, "{est} vs {truth}");
        }
    }
}
