//! Single-interval propagators U = exp(-i H tau) for H = -B . l, both in
//! closed form (anticommuting triples) and through an independent
//! scaling-and-squaring series oracle.
//!
//! Conventions: hbar = 1, beta = tau |B|, and U = exp(+i beta Bhat . l).

use thiserror::Error;

use crate::basis::SpinSubalgebra;
use crate::cmat::{self, c, CMat};
use crate::tol;

#[derive(Debug, Error)]
pub enum PropagatorError {
    #[error("matrix is not Hermitian (max |H - H^H| = {deviation:.3e})")]
    NotHermitian { deviation: f64 },
    #[error("|H tau| too large for the series oracle (1-norm {norm:.3e} > {cap})")]
    NormTooLarge { norm: f64, cap: f64 },
    #[error("field vector has {got} components, subalgebra couples {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Static field magnitude, coupling axis within a triple, and dwell time.
///
/// The sign convention is fixed: H = -B . l with B = b0 e_axis + b(t).
#[derive(Clone, Copy, Debug)]
pub struct FieldConfig {
    pub b0: f64,
    pub static_axis: usize,
    pub tau: f64,
}

impl FieldConfig {
    pub fn new(b0: f64, static_axis: usize, tau: f64) -> Result<Self, String> {
        if !(tau > 0.0) {
            return Err(format!("dwell time must be positive, got {tau}"));
        }
        Ok(FieldConfig {
            b0,
            static_axis,
            tau,
        })
    }

    /// b0 e_axis + b, as a vector over the triple components.
    pub fn total_field(&self, b: &[f64]) -> Vec<f64> {
        let mut v = b.to_vec();
        v[self.static_axis] += self.b0;
        v
    }
}

/// One-interval unitary with its rotation angle beta = tau |B|.
#[derive(Clone, Debug)]
pub struct Propagator {
    matrix: CMat,
    beta: f64,
}

impl Propagator {
    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn unitarity_deviation(&self) -> f64 {
        cmat::unitarity_deviation(&self.matrix)
    }
}

// Pade(13) numerator/denominator coefficients for the scaling-and-squaring
// exponential (Higham 2005).
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

/// exp(A) for a general complex square matrix via Pade(13) with scaling and
/// squaring.
fn expm(a: &CMat) -> CMat {
    let n = a.nrows();
    let norm = cmat::norm_1(a);
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as u32
    } else {
        0
    };
    let scale = c(1.0 / (1u64 << squarings) as f64, 0.0);
    let a1 = a.mapv(|z| z * scale);

    let eye = cmat::identity(n);
    let a2 = a1.dot(&a1);
    let a4 = a2.dot(&a2);
    let a6 = a2.dot(&a4);

    let w1 = a6.mapv(|z| z * c(PADE13[13], 0.0))
        + a4.mapv(|z| z * c(PADE13[11], 0.0))
        + a2.mapv(|z| z * c(PADE13[9], 0.0));
    let w2 = w1.dot(&a6)
        + a6.mapv(|z| z * c(PADE13[7], 0.0))
        + a4.mapv(|z| z * c(PADE13[5], 0.0))
        + a2.mapv(|z| z * c(PADE13[3], 0.0))
        + eye.mapv(|z| z * c(PADE13[1], 0.0));
    let u = a1.dot(&w2);

    let v1 = a6.mapv(|z| z * c(PADE13[12], 0.0))
        + a4.mapv(|z| z * c(PADE13[10], 0.0))
        + a2.mapv(|z| z * c(PADE13[8], 0.0));
    let v = v1.dot(&a6)
        + a6.mapv(|z| z * c(PADE13[6], 0.0))
        + a4.mapv(|z| z * c(PADE13[4], 0.0))
        + a2.mapv(|z| z * c(PADE13[2], 0.0))
        + eye.mapv(|z| z * c(PADE13[0], 0.0));

    let num = &v + &u;
    let den = &v - &u;
    let mut result = cmat::solve(&den, &num).expect("Pade denominator is singular");
    for _ in 0..squarings {
        result = result.dot(&result);
    }
    result
}

/// Series oracle: exp(-i H tau) for Hermitian H.
///
/// Independent of every closed form in this module; the closed forms are
/// tested against it. The stored angle is tau times the Frobenius norm of H
/// (an upper bound on tau |H|_2, not the triple angle).
pub fn expm_oracle(h: &CMat, tau: f64) -> Result<Propagator, PropagatorError> {
    let t = tol::DEFAULT;
    let herm = cmat::hermiticity_deviation(h);
    if herm > t.state_hermiticity {
        return Err(PropagatorError::NotHermitian { deviation: herm });
    }
    let a = h.mapv(|z| z * c(0.0, -tau));
    let norm = cmat::norm_1(&a);
    if norm > t.expm_norm_cap {
        return Err(PropagatorError::NormTooLarge {
            norm,
            cap: t.expm_norm_cap,
        });
    }
    let matrix = expm(&a);
    debug_assert!(cmat::unitarity_deviation(&matrix) < t.propagator_unitarity);
    let fro: f64 = h.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    Ok(Propagator {
        matrix,
        beta: tau * fro,
    })
}

fn rotation_matrix(m_unit: &CMat, a_mat: &CMat, beta: f64) -> CMat {
    // exp(+i beta M) = I + i sin(beta) M + (cos(beta) - 1) A
    // for M^2 = A idempotent with A M = M.
    let n = m_unit.nrows();
    let mut u = cmat::identity(n);
    u.scaled_add(c(0.0, beta.sin()), m_unit);
    u.scaled_add(c(beta.cos() - 1.0, 0.0), a_mat);
    u
}

/// Closed-form 2x2 propagator exp(+i tau B . sigma) = I cos(beta) +
/// i (Bhat . sigma) sin(beta).
pub fn su2_propagator(bvec: [f64; 3], tau: f64) -> Propagator {
    let norm = (bvec[0] * bvec[0] + bvec[1] * bvec[1] + bvec[2] * bvec[2]).sqrt();
    if norm == 0.0 {
        return Propagator {
            matrix: cmat::identity(2),
            beta: 0.0,
        };
    }
    let beta = tau * norm;
    let (x, y, z) = (bvec[0] / norm, bvec[1] / norm, bvec[2] / norm);
    let m = ndarray::array![
        [c(z, 0.0), c(x, -y)],
        [c(x, y), c(-z, 0.0)],
    ];
    Propagator {
        matrix: rotation_matrix(&m, &cmat::identity(2), beta),
        beta,
    }
}

/// Closed-form propagator exp(+i tau B . l) over a verified anticommuting
/// triple: U = I + i sin(beta) (Bhat . l) + (cos(beta) - 1) A.
///
/// Reduces to `su2_propagator` when A = I. Zero field returns the identity.
pub fn subalgebra_propagator(
    bvec: &[f64],
    tau: f64,
    sub: &SpinSubalgebra,
) -> Result<Propagator, PropagatorError> {
    if bvec.len() != sub.n_components() {
        return Err(PropagatorError::DimensionMismatch {
            expected: sub.n_components(),
            got: bvec.len(),
        });
    }
    let norm = bvec.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Ok(Propagator {
            matrix: cmat::identity(sub.dim()),
            beta: 0.0,
        });
    }
    let beta = tau * norm;
    let unit: Vec<f64> = bvec.iter().map(|x| x / norm).collect();
    let m = sub.weighted_sum(&unit);
    Ok(Propagator {
        matrix: rotation_matrix(&m, sub.idempotent(), beta),
        beta,
    })
}

/// The same exponential written without simplification,
/// I + i beta M + A (cos beta - 1) + i A M (sin beta - beta),
/// kept as a regression twin for `subalgebra_propagator` (equal because
/// A M = M).
pub fn subalgebra_propagator_long_form(
    bvec: &[f64],
    tau: f64,
    sub: &SpinSubalgebra,
) -> Result<CMat, PropagatorError> {
    if bvec.len() != sub.n_components() {
        return Err(PropagatorError::DimensionMismatch {
            expected: sub.n_components(),
            got: bvec.len(),
        });
    }
    let norm = bvec.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Ok(cmat::identity(sub.dim()));
    }
    let beta = tau * norm;
    let unit: Vec<f64> = bvec.iter().map(|x| x / norm).collect();
    let m = sub.weighted_sum(&unit);
    let am = sub.idempotent().dot(&m);
    let mut u = cmat::identity(sub.dim());
    u.scaled_add(c(0.0, beta), &m);
    u.scaled_add(c(beta.cos() - 1.0, 0.0), sub.idempotent());
    u.scaled_add(c(0.0, beta.sin() - beta), &am);
    Ok(u)
}

/// Hamiltonian -B . l over the triple, for feeding the series oracle.
pub fn triple_hamiltonian(bvec: &[f64], sub: &SpinSubalgebra) -> CMat {
    let neg: Vec<f64> = bvec.iter().map(|x| -x).collect();
    sub.weighted_sum(&neg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{
        find_spin_subalgebra, gell_mann_basis, kronecker_first_qubit_triple,
        kronecker_pauli_basis, pauli_basis,
    };
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn pauli_sub() -> crate::basis::SpinSubalgebra {
        let b = pauli_basis();
        find_spin_subalgebra(&b, &[0, 1, 2]).unwrap()
    }

    #[test]
    fn oracle_of_zero_is_identity() {
        let h = cmat::zeros(3);
        let p = expm_oracle(&h, 1.7).unwrap();
        assert!(cmat::max_abs_diff(p.matrix(), &cmat::identity(3)) < 1e-15);
    }

    #[test]
    fn oracle_diagonal_phase() {
        // exp(-i sigma_z pi) = diag(e^{-i pi}, e^{i pi}) = -I
        let b = pauli_basis();
        let p = expm_oracle(b.element(2), PI).unwrap();
        let minus_eye = cmat::identity(2).mapv(|z| -z);
        assert!(cmat::max_abs_diff(p.matrix(), &minus_eye) < 1e-13);
    }

    #[test]
    fn oracle_sigma_x_quarter_turn() {
        // exp(-i (pi/2) sigma_x) = -i sigma_x
        let b = pauli_basis();
        let p = expm_oracle(b.element(0), PI / 2.0).unwrap();
        let expected = b.element(0).mapv(|z| z * c(0.0, -1.0));
        assert!(cmat::max_abs_diff(p.matrix(), &expected) < 1e-14);
    }

    #[test]
    fn oracle_rejects_non_hermitian() {
        let m = ndarray::array![[c(0.0, 0.0), c(1.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]];
        assert!(matches!(
            expm_oracle(&m, 1.0),
            Err(PropagatorError::NotHermitian { .. })
        ));
    }

    #[test]
    fn oracle_rejects_huge_norm() {
        let b = pauli_basis();
        let h = b.element(2).mapv(|z| z * c(100.0, 0.0));
        assert!(matches!(
            expm_oracle(&h, 1.0),
            Err(PropagatorError::NormTooLarge { .. })
        ));
    }

    #[test]
    fn su2_static_field_phases() {
        let b0 = 0.83;
        let tau = 1.21;
        let p = su2_propagator([0.0, 0.0, b0], tau);
        let theta = b0 * tau;
        let expected = ndarray::array![
            [c(theta.cos(), theta.sin()), c(0.0, 0.0)],
            [c(0.0, 0.0), c(theta.cos(), -theta.sin())],
        ];
        assert!(cmat::max_abs_diff(p.matrix(), &expected) < 1e-15);
    }

    #[test]
    fn su2_zero_field_is_identity() {
        let p = su2_propagator([0.0, 0.0, 0.0], 2.0);
        assert!(cmat::max_abs_diff(p.matrix(), &cmat::identity(2)) < 1e-15);
        assert_eq!(p.beta(), 0.0);
    }

    #[test]
    fn su2_matches_oracle_over_seeded_draws() {
        let sub = pauli_sub();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let b = [
                rng.random_range(-1.5..1.5),
                rng.random_range(-1.5..1.5),
                rng.random_range(-1.5..1.5),
            ];
            let tau = rng.random_range(0.01..10.0);
            let closed = su2_propagator(b, tau);
            let h = triple_hamiltonian(&b, &sub);
            let oracle = expm_oracle(&h, tau).unwrap();
            worst = worst.max(cmat::max_abs_diff(closed.matrix(), oracle.matrix()));
        }
        assert!(worst < tol::DEFAULT.oracle_match, "worst dev {worst:.3e}");
    }

    #[test]
    fn qutrit_static_axis_leaves_third_level() {
        let b = gell_mann_basis(3).unwrap();
        let sub = find_spin_subalgebra(&b, &[0, 1, 2]).unwrap();
        let bmag = 0.9;
        let tau = 0.7;
        let p = subalgebra_propagator(&[0.0, 0.0, bmag], tau, &sub).unwrap();
        let beta = bmag * tau;
        let expected = ndarray::array![
            [c(beta.cos(), beta.sin()), c(0.0, 0.0), c(0.0, 0.0)],
            [c(0.0, 0.0), c(beta.cos(), -beta.sin()), c(0.0, 0.0)],
            [c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
        ];
        assert!(cmat::max_abs_diff(p.matrix(), &expected) < 1e-15);
    }

    #[test]
    fn qutrit_matches_oracle_over_seeded_draws() {
        let b = gell_mann_basis(3).unwrap();
        let sub = find_spin_subalgebra(&b, &[0, 1, 2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let bv: Vec<f64> = (0..3).map(|_| rng.random_range(-1.5..1.5)).collect();
            let tau = rng.random_range(0.01..10.0);
            let closed = subalgebra_propagator(&bv, tau, &sub).unwrap();
            let oracle = expm_oracle(&triple_hamiltonian(&bv, &sub), tau).unwrap();
            worst = worst.max(cmat::max_abs_diff(closed.matrix(), oracle.matrix()));
        }
        assert!(worst < tol::DEFAULT.oracle_match, "worst dev {worst:.3e}");
    }

    #[test]
    fn two_qubit_triple_matches_oracle() {
        let b = kronecker_pauli_basis(2).unwrap();
        let sub = find_spin_subalgebra(&b, &kronecker_first_qubit_triple(2)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut worst = 0.0f64;
        for _ in 0..200 {
            let bv: Vec<f64> = (0..3).map(|_| rng.random_range(-1.5..1.5)).collect();
            let tau = rng.random_range(0.01..10.0);
            let closed = subalgebra_propagator(&bv, tau, &sub).unwrap();
            let oracle = expm_oracle(&triple_hamiltonian(&bv, &sub), tau).unwrap();
            worst = worst.max(cmat::max_abs_diff(closed.matrix(), oracle.matrix()));
        }
        assert!(worst < tol::DEFAULT.oracle_match, "worst dev {worst:.3e}");
    }

    #[test]
    fn two_element_subalgebra_supported() {
        // a pair works just as well as a triple: the identity only needs
        // pairwise anticommutation and the common square
        let b = gell_mann_basis(3).unwrap();
        let sub = find_spin_subalgebra(&b, &[0, 1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..100 {
            let bv: Vec<f64> = (0..2).map(|_| rng.random_range(-1.5..1.5)).collect();
            let tau = rng.random_range(0.01..8.0);
            let closed = subalgebra_propagator(&bv, tau, &sub).unwrap();
            let oracle = expm_oracle(&triple_hamiltonian(&bv, &sub), tau).unwrap();
            assert!(cmat::max_abs_diff(closed.matrix(), oracle.matrix()) < tol::DEFAULT.oracle_match);
        }
    }

    #[test]
    fn long_form_equals_simplified() {
        let b = gell_mann_basis(3).unwrap();
        let sub = find_spin_subalgebra(&b, &[0, 1, 2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let mut worst = 0.0f64;
        for _ in 0..500 {
            let bv: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let tau = rng.random_range(0.01..10.0);
            let simplified = subalgebra_propagator(&bv, tau, &sub).unwrap();
            let long = subalgebra_propagator_long_form(&bv, tau, &sub).unwrap();
            worst = worst.max(cmat::max_abs_diff(simplified.matrix(), &long));
        }
        assert!(worst < tol::DEFAULT.long_form_match, "worst dev {worst:.3e}");
    }

    #[test]
    fn composition_adds_angles() {
        let b = kronecker_pauli_basis(2).unwrap();
        let sub = find_spin_subalgebra(&b, &kronecker_first_qubit_triple(2)).unwrap();
        let bv = [0.4, -0.8, 0.3];
        let (t1, t2) = (0.9, 1.7);
        let u1 = subalgebra_propagator(&bv, t1, &sub).unwrap();
        let u2 = subalgebra_propagator(&bv, t2, &sub).unwrap();
        let u12 = subalgebra_propagator(&bv, t1 + t2, &sub).unwrap();
        let prod = u1.matrix().dot(u2.matrix());
        assert!(cmat::max_abs_diff(&prod, u12.matrix()) < 1e-13);
    }

    #[test]
    fn unitarity_of_all_cases() {
        let b3 = gell_mann_basis(3).unwrap();
        let sub3 = find_spin_subalgebra(&b3, &[0, 1, 2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for _ in 0..100 {
            let bv: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let tau = rng.random_range(0.01..10.0);
            let p = subalgebra_propagator(&bv, tau, &sub3).unwrap();
            assert!(p.unitarity_deviation() < tol::DEFAULT.propagator_unitarity);
            let q = su2_propagator([bv[0], bv[1], bv[2]], tau);
            assert!(q.unitarity_deviation() < tol::DEFAULT.propagator_unitarity);
        }
    }

    #[test]
    fn field_config_total() {
        let f = FieldConfig::new(2.0, 2, 0.5).unwrap();
        assert_eq!(f.total_field(&[0.1, 0.0, -0.3]), vec![0.1, 0.0, 1.7]);
        assert!(FieldConfig::new(1.0, 0, 0.0).is_err());
    }
}
