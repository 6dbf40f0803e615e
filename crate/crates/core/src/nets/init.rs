use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::diffcore::Tensor;
use crate::{Error, Result};

/// Random `rows x cols` matrix with orthonormal columns (or rows, when
/// `rows < cols`), scaled by `gain`.
///
/// Draws a Gaussian matrix, takes its QR factorization and fixes the signs
/// by `diag(R)` so the result is Haar-distributed.
pub fn orthogonal_init<R: Rng + ?Sized>(rows: usize, cols: usize, gain: f64, rng: &mut R) -> Result<Tensor> {
    if rows == 0 || cols == 0 {
        return Err(Error::Shape(format!("orthogonal_init needs rows, cols >= 1, got {rows}x{cols}")));
    }
    let (tall, short) = (rows.max(cols), rows.min(cols));
    let a = DMatrix::<f64>::from_fn(tall, short, |_, _| rng.sample(StandardNormal));
    let qr = a.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..short {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q *= gain;
    let q = if rows < cols { q.transpose() } else { q };
    // nalgebra is column-major
    let mut data = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            data.push(q[(i, j)]);
        }
    }
    Tensor::matrix(rows, cols, data).map_err(Error::from)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gram_error(q: &Tensor, gain: f64) -> f64 {
        let (r, c) = (q.rows(), q.cols());
        let gram = if r >= c { q.transpose().matmul(q) } else { q.matmul(&q.transpose()) };
        let n = gram.rows();
        let mut err: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { gain * gain } else { 0.0 };
                err = err.max((gram.get(i, j) - target).abs());
            }
        }
        err
    }

    #[test]
    fn square_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let q = orthogonal_init(4, 4, 1.0, &mut rng).unwrap();
        assert!(gram_error(&q, 1.0) < 1e-10);
    }

    #[test]
    fn one_by_one_is_sign() {
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q = orthogonal_init(1, 1, 1.0, &mut rng).unwrap();
            assert_eq!(q.item().abs(), 1.0);
        }
    }

    #[test]
    fn tall_with_gain() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = orthogonal_init(8, 3, 2f64.sqrt(), &mut rng).unwrap();
        assert!(gram_error(&q, 2f64.sqrt()) < 1e-10);
    }

    #[test]
    fn wide_uses_row_gram() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let q = orthogonal_init(3, 7, 0.5, &mut rng).unwrap();
        assert_eq!(q.shape(), &[3, 7]);
        assert!(gram_error(&q, 0.5) < 1e-10);
    }

    #[test]
    fn singular_values_equal_gain() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for &(r, c, gain) in &[(6, 6, 1.0), (64, 2, 1.0), (2, 64, 1.3), (17, 5, 0.01)] {
            let q = orthogonal_init(r, c, gain, &mut rng).unwrap();
            let m = DMatrix::from_row_slice(r, c, q.data());
            for s in m.singular_values().iter() {
                assert!((s - gain).abs() < 1e-8, "{r}x{c}: singular value {s}");
            }
        }
    }

    #[test]
    fn zero_dims_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(orthogonal_init(0, 3, 1.0, &mut rng).is_err());
    }
}
