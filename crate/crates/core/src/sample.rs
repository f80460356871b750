//! Seeded random generators for matrices and tensors.
//!
//! Entries are drawn with real and imaginary parts uniform on [-1, 1]. All
//! samplers take an explicit RNG so every caller is reproducible from a
//! single seed.

use ndarray::prelude::*;
use ndarray_linalg::QR;
use rand::Rng;

use crate::tensor::{condition_number, eye, inverse, ComplexMatrix, C64};

/// One complex scalar with re, im uniform on [-1, 1].
pub fn complex_uniform<R: Rng>(rng: &mut R) -> C64 {
    C64::new(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0))
}

/// Dense matrix of uniform complex entries.
pub fn complex_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_shape_fn((rows, cols), |_| complex_uniform(rng))
}

/// Dense tensor of uniform complex entries with the given shape.
pub fn complex_tensor<R: Rng>(rng: &mut R, shape: &[usize]) -> ArrayD<C64> {
    ArrayD::from_shape_fn(IxDyn(shape), |_| complex_uniform(rng))
}

/// Invertible matrix with condition number at most `max_cond`, found by
/// sampling and retrying. Random complex matrices are well conditioned with
/// overwhelming probability, so this terminates quickly.
pub fn invertible<R: Rng>(rng: &mut R, n: usize, max_cond: f64) -> ComplexMatrix {
    loop {
        let m = complex_matrix(rng, n, n);
        if let Ok(cond) = condition_number(&m) {
            if cond <= max_cond {
                return m;
            }
        }
    }
}

/// Haar-ish unitary from the QR decomposition of a random matrix, with the
/// R diagonal phases absorbed so the distribution is phase-balanced.
pub fn unitary<R: Rng>(rng: &mut R, n: usize) -> ComplexMatrix {
    let m = complex_matrix(rng, n, n);
    let (q, r) = m.qr().expect("QR of a random matrix");
    let mut q = q;
    for j in 0..n {
        let d = r[[j, j]];
        if d.norm() > 0.0 {
            let phase = d / d.norm();
            for i in 0..n {
                q[[i, j]] *= phase;
            }
        }
    }
    q
}

/// Complex symmetric (not Hermitian) invertible matrix: S = M + M^T.
pub fn symmetric_invertible<R: Rng>(rng: &mut R, n: usize, max_cond: f64) -> ComplexMatrix {
    loop {
        let m = complex_matrix(rng, n, n);
        let s = &m + &m.t();
        if let Ok(cond) = condition_number(&s) {
            if cond <= max_cond {
                return s;
            }
        }
    }
}

/// Complex orthogonal matrix (Q^T Q = 1, no conjugate) via the Cayley
/// transform of a complex antisymmetric matrix.
pub fn complex_orthogonal<R: Rng>(rng: &mut R, n: usize) -> ComplexMatrix {
    loop {
        let m = complex_matrix(rng, n, n);
        // Keep the antisymmetric part small so 1 + K stays invertible.
        let k = (&m - &m.t()).mapv(|z| z * C64::new(0.3, 0.0));
        let plus = eye(n) + &k;
        let minus = eye(n) - &k;
        if let Ok(plus_inv) = inverse(&plus) {
            let q = minus.dot(&plus_inv);
            // (1-K)(1+K)^{-1} with K^T = -K satisfies Q^T Q = 1.
            let check = q.t().dot(&q) - eye(n);
            if check.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() < 1e-10 {
                return q;
            }
        }
    }
}

/// Involutive matrix (Z^2 = 1) with eigenvalues +1 and -1 in random
/// non-orthogonal directions: Z = V diag(sign) V^{-1}.
pub fn involution<R: Rng>(rng: &mut R, n: usize) -> ComplexMatrix {
    let v = invertible(rng, n, 50.0);
    let v_inv = inverse(&v).expect("conditioned sample");
    let mut d = ComplexMatrix::zeros((n, n));
    for j in 0..n {
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        d[[j, j]] = C64::new(sign, 0.0);
    }
    v.dot(&d).dot(&v_inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::frobenius;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in [2usize, 3, 5] {
            let u = unitary(&mut rng, n);
            let diff = u.t().mapv(|z| z.conj()).dot(&u) - eye(n);
            assert!(frobenius(&diff) < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn invertible_respects_condition_cap() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let m = invertible(&mut rng, 3, 100.0);
            assert!(condition_number(&m).unwrap() <= 100.0);
        }
    }

    #[test]
    fn symmetric_invertible_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = symmetric_invertible(&mut rng, 4, 200.0);
        let diff = &s - &s.t();
        assert!(frobenius(&diff) < 1e-14);
    }

    #[test]
    fn complex_orthogonal_squares_to_identity_under_transpose() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in [2usize, 3] {
            let q = complex_orthogonal(&mut rng, n);
            let diff = q.t().dot(&q) - eye(n);
            assert!(frobenius(&diff) < 1e-10, "n = {n}");
        }
    }

    #[test]
    fn involution_squares_to_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let z = involution(&mut rng, 3);
        let diff = z.dot(&z) - eye(3);
        assert!(frobenius(&diff) < 1e-9);
    }

    #[test]
    fn seeded_sampling_is_reproducible() {
        let a = complex_matrix(&mut ChaCha8Rng::seed_from_u64(77), 3, 3);
        let b = complex_matrix(&mut ChaCha8Rng::seed_from_u64(77), 3, 3);
        assert_eq!(a, b);
    }
}
