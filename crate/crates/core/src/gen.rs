//! Seeded random fixtures used by tests, benchmarks and the verifier.

use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{self, Matrix};
use crate::tensor::{Slots, Tensor4};

pub fn uniform_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..=1.0))
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Entries drawn uniformly from `{-1, +1}`.
pub fn sign_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
}

/// Dense square tensor with entries uniform on `[-1, 1]`.
pub fn dense_tensor<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Tensor4 {
    dense_tensor_shape(rng, [n; 4])
}

pub fn dense_tensor_shape<R: Rng + ?Sized>(rng: &mut R, shape: [usize; 4]) -> Tensor4 {
    Tensor4::from_fn(shape, |_, _, _, _| rng.random_range(-1.0..=1.0)).expect("finite fixture")
}

/// Product-form square tensor with factor entries uniform on `[-1, 1]`.
pub fn product_tensor<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Tensor4 {
    let c = uniform_matrix(rng, n, n);
    let a = uniform_matrix(rng, n, n);
    Tensor4::product(c, a).expect("finite fixture")
}

fn rescale(t: Tensor4) -> Tensor4 {
    let m = t.max_abs();
    if m > 0.0 {
        t.scale(1.0 / m).expect("finite fixture")
    } else {
        t
    }
}

/// Dense degenerate tensor with `max |d| = 1`.
pub fn degenerate_tensor<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Tensor4 {
    rescale(dense_tensor(rng, n).center(Slots::ALL).expect("square fixture"))
}

/// Product-form degenerate tensor `C̃ ∘ Ã` with `max |d| = 1`.
pub fn degenerate_product<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Tensor4 {
    rescale(product_tensor(rng, n).center(Slots::ALL).expect("square fixture"))
}

/// Doubly centered `n×n` matrix with zero diagonal and `max |c| = 1`.
///
/// Built as a random combination of `E_ab - E_ad - E_cb + E_cd` with
/// `a, b, c, d` distinct, each of which has zero margins and zero diagonal.
pub fn centered_zero_diagonal<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Matrix {
    assert!(n >= 4, "needs four distinct indices");
    let mut m = Matrix::zeros(n, n);
    for _ in 0..n * n {
        let idx = index::sample(rng, n, 4);
        let (a, b, c, d) = (idx.index(0), idx.index(1), idx.index(2), idx.index(3));
        let w: f64 = rng.random_range(-1.0..=1.0);
        m[(a, b)] += w;
        m[(a, d)] -= w;
        m[(c, b)] -= w;
        m[(c, d)] += w;
    }
    let s = linalg::max_abs(&m);
    if s > 0.0 {
        m /= s;
    }
    m
}

/// Doubly centered `n×n` matrix from uniform entries.
pub fn doubly_centered<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Matrix {
    linalg::double_center(&uniform_matrix(rng, n, n))
}

/// Positive semidefinite `V Vᵀ` whose diagonal entries lie in `(0, 1]`.
pub fn psd_bounded_diagonal<R: Rng + ?Sized>(rng: &mut R, n: usize, rank: usize) -> Matrix {
    let mut v = gaussian_matrix(rng, n, rank);
    for mut row in v.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            let target: f64 = rng.random_range(0.0..=1.0f64).sqrt();
            row *= target / norm;
        }
    }
    &v * v.transpose()
}

/// `[N, M, N, M]` product tensor of two doubly centered factors; satisfies
/// `d(·,j,·,l) = d(i,·,k,·) = 0`.
pub fn admissible_rectangular<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize) -> Tensor4 {
    let c = linalg::double_center(&uniform_matrix(rng, n, m));
    let a = linalg::double_center(&uniform_matrix(rng, n, m));
    Tensor4::product(c, a).expect("finite fixture")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perm::RngSeed;
    use crate::tensor::{is_degenerate, DEGENERACY_TOL};

    #[test]
    fn fixtures_have_their_advertised_structure() {
        let mut rng = RngSeed::new(1).rng();
        let c = centered_zero_diagonal(&mut rng, 6);
        assert!(linalg::max_abs_margin_mean(&c) < 1e-14);
        assert!(c.diagonal().iter().all(|&x| x == 0.0));
        assert!((linalg::max_abs(&c) - 1.0).abs() < 1e-15);

        let a = psd_bounded_diagonal(&mut rng, 7, 3);
        assert!(a.diagonal().iter().all(|&x| x <= 1.0 + 1e-12));
        assert!(a.clone().symmetric_eigenvalues().iter().all(|&x| x > -1e-12));

        let d = degenerate_tensor(&mut rng, 4);
        assert!(is_degenerate(&d, DEGENERACY_TOL));
        assert!((d.max_abs() - 1.0).abs() < 1e-15);
        assert!(is_degenerate(&degenerate_product(&mut rng, 5), DEGENERACY_TOL));
    }
}
