//! Helpers for small dense complex matrices on top of `ndarray`.

use ndarray::Array2;
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = Array2<C64>;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> CMat {
    Array2::from_diag_elem(n, C64::new(1.0, 0.0))
}

pub fn zeros(n: usize) -> CMat {
    Array2::zeros((n, n))
}

/// Conjugate transpose.
pub fn adjoint(m: &CMat) -> CMat {
    m.t().mapv(|z| z.conj())
}

pub fn trace(m: &CMat) -> C64 {
    m.diag().sum()
}

/// Tr(a b) without forming the product.
pub fn trace_product(a: &CMat, b: &CMat) -> C64 {
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += a[[i, j]] * b[[j, i]];
        }
    }
    acc
}

/// Largest entrywise modulus.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

/// Largest entrywise modulus of a - b.
pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .fold(0.0f64, |acc, (x, y)| acc.max((x - y).norm()))
}

/// max |m - m^H|.
pub fn hermiticity_deviation(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut dev = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            dev = dev.max((m[[i, j]] - m[[j, i]].conj()).norm());
        }
    }
    dev
}

/// max |U^H U - I|.
pub fn unitarity_deviation(u: &CMat) -> f64 {
    let n = u.nrows();
    max_abs_diff(&adjoint(u).dot(u), &identity(n))
}

/// Kronecker product.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    ndarray::linalg::kron(&a.view(), &b.view())
}

/// Max column sum of entry moduli (the induced 1-norm).
pub fn norm_1(m: &CMat) -> f64 {
    let mut max_sum = 0.0f64;
    for j in 0..m.ncols() {
        let s: f64 = m.column(j).iter().map(|z| z.norm()).sum();
        max_sum = max_sum.max(s);
    }
    max_sum
}

/// Solve A X = B by Gaussian elimination with partial pivoting.
///
/// Returns `None` when a pivot collapses (singular to working precision).
pub fn solve(a: &CMat, b: &CMat) -> Option<CMat> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    assert_eq!(n, b.nrows());
    let m = b.ncols();

    let mut lu = a.clone();
    let mut x = b.clone();

    for col in 0..n {
        let mut pivot_row = col;
        let mut pivot_mag = lu[[col, col]].norm();
        for row in (col + 1)..n {
            let mag = lu[[row, col]].norm();
            if mag > pivot_mag {
                pivot_mag = mag;
                pivot_row = row;
            }
        }
        if pivot_mag < 1e-300 {
            return None;
        }
        if pivot_row != col {
            for j in 0..n {
                lu.swap([col, j], [pivot_row, j]);
            }
            for j in 0..m {
                x.swap([col, j], [pivot_row, j]);
            }
        }
        let pivot = lu[[col, col]];
        for row in (col + 1)..n {
            let factor = lu[[row, col]] / pivot;
            if factor.norm() == 0.0 {
                continue;
            }
            for j in col..n {
                let v = lu[[col, j]];
                lu[[row, j]] -= factor * v;
            }
            for j in 0..m {
                let v = x[[col, j]];
                x[[row, j]] -= factor * v;
            }
        }
    }

    for col in (0..n).rev() {
        let pivot = lu[[col, col]];
        for j in 0..m {
            let mut sum = x[[col, j]];
            for k in (col + 1)..n {
                sum -= lu[[col, k]] * x[[k, j]];
            }
            x[[col, j]] = sum / pivot;
        }
    }
    Some(x)
}

/// Matrix inverse via `solve` against the identity.
pub fn inverse(a: &CMat) -> Option<CMat> {
    solve(a, &identity(a.nrows()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adjoint_and_trace() {
        let m = ndarray::array![
            [c(1.0, 2.0), c(3.0, -1.0)],
            [c(0.0, 4.0), c(-2.0, 0.5)],
        ];
        let ad = adjoint(&m);
        assert_eq!(ad[[0, 1]], c(0.0, -4.0));
        assert_eq!(ad[[1, 0]], c(3.0, 1.0));
        assert_eq!(trace(&m), c(-1.0, 2.5));
    }

    #[test]
    fn trace_product_matches_explicit() {
        let a = ndarray::array![
            [c(1.0, 0.5), c(0.0, 2.0)],
            [c(-1.0, 0.0), c(0.25, -0.75)],
        ];
        let b = ndarray::array![
            [c(2.0, -1.0), c(1.0, 1.0)],
            [c(0.5, 0.0), c(0.0, -3.0)],
        ];
        let direct = trace(&a.dot(&b));
        let fast = trace_product(&a, &b);
        assert!((direct - fast).norm() < 1e-15);
    }

    #[test]
    fn solve_recovers_known_solution() {
        let a = ndarray::array![
            [c(2.0, 1.0), c(-1.0, 0.0), c(0.0, 0.5)],
            [c(0.0, 0.0), c(3.0, -2.0), c(1.0, 0.0)],
            [c(1.0, 0.0), c(0.0, 1.0), c(-2.0, 2.0)],
        ];
        let x_true = ndarray::array![
            [c(1.0, -1.0)],
            [c(0.5, 2.0)],
            [c(-3.0, 0.25)],
        ];
        let b = a.dot(&x_true);
        let x = solve(&a, &b).unwrap();
        assert!(max_abs_diff(&x, &x_true) < 1e-13);
    }

    #[test]
    fn solve_detects_singular() {
        let a = ndarray::array![
            [c(1.0, 0.0), c(2.0, 0.0)],
            [c(2.0, 0.0), c(4.0, 0.0)],
        ];
        assert!(solve(&a, &identity(2)).is_none());
    }

    #[test]
    fn inverse_times_original_is_identity() {
        let a = ndarray::array![
            [c(1.0, 1.0), c(0.0, -2.0)],
            [c(3.0, 0.0), c(1.0, 4.0)],
        ];
        let inv = inverse(&a).unwrap();
        assert!(max_abs_diff(&a.dot(&inv), &identity(2)) < 1e-14);
    }
}
