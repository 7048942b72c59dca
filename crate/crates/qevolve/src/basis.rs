//! Operator bases for N-level systems and the spin-like subalgebras that
//! admit closed-form exponentials.
//!
//! A basis is an ordered set of N^2 - 1 traceless Hermitian matrices with
//! Tr(l_a l_b) = c d_ab. The identity is never stored: density matrices are
//! represented as I/N plus a real coefficient vector over the basis, so the
//! bookkeeping problem of products escaping the traceless span never arises.
//!
//! Element orderings are fixed and documented per kind:
//! - `Pauli`: x, y, z.
//! - `GellMann3`: the standard order for N = 3, so the anticommuting triple
//!   sits at indices 0..2.
//! - `GeneralizedGellMann`: all symmetric pairs (j < k, lexicographic), then
//!   all antisymmetric pairs, then the N - 1 diagonal generators. For N = 2
//!   this coincides with `Pauli`.
//! - `KroneckerPauli`: lexicographic in the factor indices (i_1, ..., i_n)
//!   over {I, x, y, z}, identity excluded.

use std::sync::Arc;

use thiserror::Error;

use crate::cmat::{self, c, CMat};
use crate::tol;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BasisKind {
    Pauli,
    GellMann3,
    GeneralizedGellMann,
    KroneckerPauli,
}

impl BasisKind {
    /// Stable tag describing the element ordering of this kind.
    pub fn ordering_tag(self) -> &'static str {
        match self {
            BasisKind::Pauli => "xyz",
            BasisKind::GellMann3 => "standard",
            BasisKind::GeneralizedGellMann => "sym-antisym-diag",
            BasisKind::KroneckerPauli => "lexicographic",
        }
    }
}

#[derive(Debug, Error)]
pub enum BasisError {
    #[error("basis dimension must be at least 2, got {0}")]
    InvalidDimension(usize),
    #[error("qubit count must be at least 1, got {0}")]
    InvalidQubitCount(usize),
    #[error("element index {index} out of range for a basis of {len} elements")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("elements {i} and {j} do not anticommute (max |{{l_i,l_j}}| = {deviation:.3e})")]
    NotAnticommuting { i: usize, j: usize, deviation: f64 },
    #[error("elements {i} and {j} square to different matrices (max dev {deviation:.3e})")]
    InconsistentSquares { i: usize, j: usize, deviation: f64 },
    #[error("common square is not idempotent (max |A^2 - A| = {deviation:.3e})")]
    NotIdempotentSquare { deviation: f64 },
    #[error("matrix is not Hermitian (max |m - m^H| = {deviation:.3e})")]
    NotHermitian { deviation: f64 },
    #[error("matrix trace is not 1 (|Tr - 1| = {deviation:.3e})")]
    NotUnitTrace { deviation: f64 },
    #[error("coefficient vector has length {got}, basis needs {expected}")]
    CoefficientLength { expected: usize, got: usize },
    #[error("state is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPositive { min_eigenvalue: f64 },
    #[error("basis invariant violated: {0}")]
    InvariantViolation(String),
}

/// Ordered set of traceless Hermitian matrices spanning the observables of an
/// N-level system, together with its orthogonality constant.
#[derive(Clone, Debug)]
pub struct OperatorBasis {
    kind: BasisKind,
    dim: usize,
    elements: Vec<CMat>,
    ortho_const: f64,
}

impl OperatorBasis {
    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    /// Hilbert-space dimension N.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of elements, N^2 - 1.
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// c in Tr(l_a l_b) = c d_ab.
    pub fn ortho_const(&self) -> f64 {
        self.ortho_const
    }

    pub fn element(&self, a: usize) -> &CMat {
        &self.elements[a]
    }

    pub fn elements(&self) -> &[CMat] {
        &self.elements
    }

    /// Check Hermiticity, tracelessness, element count and the orthogonality
    /// relation; returns the worst deviation per category on success.
    pub fn verify(&self) -> Result<BasisHealth, BasisError> {
        let t = tol::DEFAULT;
        let expected = self.dim * self.dim - 1;
        if self.elements.len() != expected {
            return Err(BasisError::InvariantViolation(format!(
                "expected {} elements, found {}",
                expected,
                self.elements.len()
            )));
        }
        let mut health = BasisHealth::default();
        for (a, m) in self.elements.iter().enumerate() {
            let herm = cmat::hermiticity_deviation(m);
            if herm > t.basis_hermiticity {
                return Err(BasisError::InvariantViolation(format!(
                    "element {a} is not Hermitian (dev {herm:.3e})"
                )));
            }
            health.hermiticity = health.hermiticity.max(herm);
            let tr = cmat::trace(m).norm();
            if tr > t.basis_traceless {
                return Err(BasisError::InvariantViolation(format!(
                    "element {a} has trace {tr:.3e}"
                )));
            }
            health.trace = health.trace.max(tr);
        }
        for a in 0..self.elements.len() {
            for b in a..self.elements.len() {
                let gram = cmat::trace_product(&self.elements[a], &self.elements[b]);
                let target = if a == b { self.ortho_const } else { 0.0 };
                let dev = (gram - c(target, 0.0)).norm();
                if dev > t.basis_orthogonality {
                    return Err(BasisError::InvariantViolation(format!(
                        "orthogonality fails for pair ({a}, {b}): dev {dev:.3e}"
                    )));
                }
                health.orthogonality = health.orthogonality.max(dev);
            }
        }
        Ok(health)
    }
}

/// Worst observed deviations from an `OperatorBasis::verify` pass.
#[derive(Clone, Copy, Debug, Default)]
pub struct BasisHealth {
    pub hermiticity: f64,
    pub trace: f64,
    pub orthogonality: f64,
}

fn pauli_elements() -> Vec<CMat> {
    let sx = ndarray::array![[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]];
    let sy = ndarray::array![[c(0.0, 0.0), c(0.0, -1.0)], [c(0.0, 1.0), c(0.0, 0.0)]];
    let sz = ndarray::array![[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]];
    vec![sx, sy, sz]
}

/// The Pauli matrices in x, y, z order; c = 2.
pub fn pauli_basis() -> Arc<OperatorBasis> {
    Arc::new(OperatorBasis {
        kind: BasisKind::Pauli,
        dim: 2,
        elements: pauli_elements(),
        ortho_const: 2.0,
    })
}

fn symmetric_pair(n: usize, j: usize, k: usize) -> CMat {
    let mut m = cmat::zeros(n);
    m[[j, k]] = c(1.0, 0.0);
    m[[k, j]] = c(1.0, 0.0);
    m
}

fn antisymmetric_pair(n: usize, j: usize, k: usize) -> CMat {
    let mut m = cmat::zeros(n);
    m[[j, k]] = c(0.0, -1.0);
    m[[k, j]] = c(0.0, 1.0);
    m
}

fn diagonal_generator(n: usize, l: usize) -> CMat {
    // sqrt(2 / (l (l+1))) * (E_00 + ... + E_{l-1,l-1} - l E_ll), l = 1..N-1
    let norm = (2.0 / (l as f64 * (l as f64 + 1.0))).sqrt();
    let mut m = cmat::zeros(n);
    for j in 0..l {
        m[[j, j]] = c(norm, 0.0);
    }
    m[[l, l]] = c(-norm * l as f64, 0.0);
    m
}

/// The N^2 - 1 generalized Gell-Mann matrices; c = 2.
///
/// For N = 3 the standard order is used (pair and diagonal generators
/// interleaved so the anticommuting triple occupies indices 0..2); for any
/// other N the order is all symmetric pairs, all antisymmetric pairs, then
/// the diagonal generators. N = 2 reproduces `pauli_basis` element for
/// element.
pub fn gell_mann_basis(n: usize) -> Result<Arc<OperatorBasis>, BasisError> {
    if n < 2 {
        return Err(BasisError::InvalidDimension(n));
    }
    let elements = if n == 3 {
        vec![
            symmetric_pair(3, 0, 1),
            antisymmetric_pair(3, 0, 1),
            diagonal_generator(3, 1),
            symmetric_pair(3, 0, 2),
            antisymmetric_pair(3, 0, 2),
            symmetric_pair(3, 1, 2),
            antisymmetric_pair(3, 1, 2),
            diagonal_generator(3, 2),
        ]
    } else {
        let mut v = Vec::with_capacity(n * n - 1);
        for j in 0..n {
            for k in (j + 1)..n {
                v.push(symmetric_pair(n, j, k));
            }
        }
        for j in 0..n {
            for k in (j + 1)..n {
                v.push(antisymmetric_pair(n, j, k));
            }
        }
        for l in 1..n {
            v.push(diagonal_generator(n, l));
        }
        v
    };
    Ok(Arc::new(OperatorBasis {
        kind: if n == 3 {
            BasisKind::GellMann3
        } else {
            BasisKind::GeneralizedGellMann
        },
        dim: n,
        elements,
        ortho_const: 2.0,
    }))
}

/// All 4^n - 1 non-identity Kronecker products of Pauli/identity factors,
/// lexicographic in the factor indices; c = 2^n.
pub fn kronecker_pauli_basis(num_qubits: usize) -> Result<Arc<OperatorBasis>, BasisError> {
    if num_qubits < 1 {
        return Err(BasisError::InvalidQubitCount(num_qubits));
    }
    let factors: Vec<CMat> = {
        let mut f = vec![cmat::identity(2)];
        f.extend(pauli_elements());
        f
    };
    let count = 4usize.pow(num_qubits as u32);
    let mut elements = Vec::with_capacity(count - 1);
    for code in 1..count {
        // digits of `code` in base 4, most significant factor first
        let mut digits = vec![0usize; num_qubits];
        let mut rest = code;
        for slot in (0..num_qubits).rev() {
            digits[slot] = rest % 4;
            rest /= 4;
        }
        let mut m = factors[digits[0]].clone();
        for &d in &digits[1..] {
            m = cmat::kron(&m, &factors[d]);
        }
        elements.push(m);
    }
    Ok(Arc::new(OperatorBasis {
        kind: BasisKind::KroneckerPauli,
        dim: 1 << num_qubits,
        elements,
        ortho_const: (1u64 << num_qubits) as f64,
    }))
}

/// Indices of the single-qubit triple {x ⊗ I.., y ⊗ I.., z ⊗ I..} acting on
/// the first qubit, in the lexicographic Kronecker ordering.
pub fn kronecker_first_qubit_triple(num_qubits: usize) -> Vec<usize> {
    let stride = 4usize.pow(num_qubits.saturating_sub(1) as u32);
    (1..=3).map(|i| i * stride - 1).collect()
}

/// Basis elements that pairwise anticommute and share an idempotent square A.
///
/// Fields (B hat . l) built from the selected elements then satisfy
/// (B hat . l)^2 = A with A l = l A = l, which is what the closed-form
/// propagator needs. Instances only exist after verification.
#[derive(Clone, Debug)]
pub struct SpinSubalgebra {
    parent: Arc<OperatorBasis>,
    indices: Vec<usize>,
    idempotent: CMat,
}

impl SpinSubalgebra {
    pub fn parent(&self) -> &Arc<OperatorBasis> {
        &self.parent
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Number of selected elements (the length of coupled field vectors).
    pub fn n_components(&self) -> usize {
        self.indices.len()
    }

    /// The common square A.
    pub fn idempotent(&self) -> &CMat {
        &self.idempotent
    }

    pub fn dim(&self) -> usize {
        self.parent.dim()
    }

    /// k-th selected element.
    pub fn element(&self, k: usize) -> &CMat {
        self.parent.element(self.indices[k])
    }

    /// Sum_k v_k l_{indices[k]}.
    pub fn weighted_sum(&self, v: &[f64]) -> CMat {
        assert_eq!(v.len(), self.indices.len());
        let n = self.parent.dim();
        let mut m = cmat::zeros(n);
        for (vk, &idx) in v.iter().zip(&self.indices) {
            if *vk != 0.0 {
                m.scaled_add(c(*vk, 0.0), self.parent.element(idx));
            }
        }
        m
    }
}

/// Verify that the selected elements pairwise anticommute and square to a
/// common idempotent, and return the subalgebra carrying that square.
pub fn find_spin_subalgebra(
    basis: &Arc<OperatorBasis>,
    indices: &[usize],
) -> Result<SpinSubalgebra, BasisError> {
    let t = tol::DEFAULT;
    for &idx in indices {
        if idx >= basis.len() {
            return Err(BasisError::IndexOutOfRange {
                index: idx,
                len: basis.len(),
            });
        }
    }
    for (a, &i) in indices.iter().enumerate() {
        for &j in &indices[a + 1..] {
            let li = basis.element(i);
            let lj = basis.element(j);
            let anti = li.dot(lj) + lj.dot(li);
            let dev = cmat::max_abs(&anti);
            if dev > t.anticommutation {
                return Err(BasisError::NotAnticommuting { i, j, deviation: dev });
            }
        }
    }
    let first = indices[0];
    let a_mat = basis.element(first).dot(basis.element(first));
    for &j in &indices[1..] {
        let sq = basis.element(j).dot(basis.element(j));
        let dev = cmat::max_abs_diff(&sq, &a_mat);
        if dev > t.idempotent {
            return Err(BasisError::InconsistentSquares {
                i: first,
                j,
                deviation: dev,
            });
        }
    }
    let idem_dev = cmat::max_abs_diff(&a_mat.dot(&a_mat), &a_mat);
    if idem_dev > t.idempotent {
        return Err(BasisError::NotIdempotentSquare { deviation: idem_dev });
    }
    // A absorbs each element; implied by Hermiticity + the checks above, but
    // asserted so the propagator identity can rely on it.
    for &j in indices {
        let l = basis.element(j);
        let dev = cmat::max_abs_diff(&a_mat.dot(l), l).max(cmat::max_abs_diff(&l.dot(&a_mat), l));
        if dev > t.idempotent {
            return Err(BasisError::NotIdempotentSquare { deviation: dev });
        }
    }
    Ok(SpinSubalgebra {
        parent: Arc::clone(basis),
        indices: indices.to_vec(),
        idempotent: a_mat,
    })
}

/// Real coefficient vector of a density matrix over an operator basis.
///
/// The represented state is rho = I/N + sum_a coeffs[a] l_a.
#[derive(Clone, Debug)]
pub struct DensityState {
    basis: Arc<OperatorBasis>,
    coeffs: Vec<f64>,
}

impl DensityState {
    pub fn from_coeffs(basis: &Arc<OperatorBasis>, coeffs: Vec<f64>) -> Result<Self, BasisError> {
        if coeffs.len() != basis.len() {
            return Err(BasisError::CoefficientLength {
                expected: basis.len(),
                got: coeffs.len(),
            });
        }
        Ok(DensityState {
            basis: Arc::clone(basis),
            coeffs,
        })
    }

    pub fn maximally_mixed(basis: &Arc<OperatorBasis>) -> Self {
        DensityState {
            basis: Arc::clone(basis),
            coeffs: vec![0.0; basis.len()],
        }
    }

    pub fn basis(&self) -> &Arc<OperatorBasis> {
        &self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// Tr rho^2 = 1/N + c sum_a coeffs[a]^2.
    pub fn purity(&self) -> f64 {
        let sq: f64 = self.coeffs.iter().map(|x| x * x).sum();
        1.0 / self.basis.dim() as f64 + self.basis.ortho_const() * sq
    }

    /// Check that the reconstructed matrix is positive semidefinite within
    /// the configured floor. Used where states originate (presets, configs).
    pub fn check_physical(&self) -> Result<(), BasisError> {
        let rho = reconstruct(self);
        let min = min_hermitian_eigenvalue(&rho);
        if min < -tol::DEFAULT.positivity_floor {
            return Err(BasisError::NotPositive { min_eigenvalue: min });
        }
        Ok(())
    }
}

/// Smallest eigenvalue of a (numerically) Hermitian matrix.
pub fn min_hermitian_eigenvalue(m: &CMat) -> f64 {
    let n = m.nrows();
    let fm = faer::Mat::from_fn(n, n, |i, j| faer::c64::new(m[[i, j]].re, m[[i, j]].im));
    let evd = fm
        .self_adjoint_eigen(faer::Side::Lower)
        .expect("self-adjoint eigensolve failed");
    let s = evd.S();
    let mut min = f64::INFINITY;
    for i in 0..n {
        min = min.min(s[i].re);
    }
    min
}

/// Extract basis coefficients of a Hermitian unit-trace matrix:
/// coeffs[a] = Tr(l_a rho) / c.
pub fn decompose(rho: &CMat, basis: &Arc<OperatorBasis>) -> Result<DensityState, BasisError> {
    let t = tol::DEFAULT;
    let herm = cmat::hermiticity_deviation(rho);
    if herm > t.state_hermiticity {
        return Err(BasisError::NotHermitian { deviation: herm });
    }
    let tr_dev = (cmat::trace(rho) - c(1.0, 0.0)).norm();
    if tr_dev > t.state_trace {
        return Err(BasisError::NotUnitTrace { deviation: tr_dev });
    }
    let coeffs = decompose_unchecked(rho, basis);
    Ok(DensityState {
        basis: Arc::clone(basis),
        coeffs,
    })
}

/// Coefficient extraction without the Hermiticity/trace gate. Callers own
/// the precondition (e.g. per-step states inside tight propagation loops).
pub(crate) fn decompose_unchecked(rho: &CMat, basis: &Arc<OperatorBasis>) -> Vec<f64> {
    basis
        .elements()
        .iter()
        .map(|l| cmat::trace_product(l, rho).re / basis.ortho_const())
        .collect()
}

/// Rebuild the density matrix I/N + sum_a coeffs[a] l_a.
pub fn reconstruct(state: &DensityState) -> CMat {
    let n = state.basis.dim();
    let mut rho = cmat::identity(n);
    rho.mapv_inplace(|z| z / n as f64);
    for (x, l) in state.coeffs.iter().zip(state.basis.elements()) {
        if *x != 0.0 {
            rho.scaled_add(c(*x, 0.0), l);
        }
    }
    rho
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pauli_basis_is_standard() {
        let b = pauli_basis();
        assert_eq!(b.len(), 3);
        assert_eq!(b.ortho_const(), 2.0);
        let sz = b.element(2);
        assert_eq!(sz[[0, 0]], c(1.0, 0.0));
        assert_eq!(sz[[1, 1]], c(-1.0, 0.0));
        // Tr(sx sy) = 0
        assert!(cmat::trace_product(b.element(0), b.element(1)).norm() < 1e-15);
        // sx sy - sy sx = 2i sz
        let comm = b.element(0).dot(b.element(1)) - b.element(1).dot(b.element(0));
        let expected = b.element(2).mapv(|z| z * c(0.0, 2.0));
        assert!(cmat::max_abs_diff(&comm, &expected) < 1e-15);
        b.verify().unwrap();
    }

    #[test]
    fn gell_mann_3_standard_order() {
        let b = gell_mann_basis(3).unwrap();
        assert_eq!(b.kind(), BasisKind::GellMann3);
        assert_eq!(b.len(), 8);
        let l3 = b.element(2);
        assert_eq!(l3[[0, 0]], c(1.0, 0.0));
        assert_eq!(l3[[1, 1]], c(-1.0, 0.0));
        assert_eq!(l3[[2, 2]], c(0.0, 0.0));
        // all 64 pairs orthogonal with c = 2
        for a in 0..8 {
            for bb in 0..8 {
                let gram = cmat::trace_product(b.element(a), b.element(bb));
                let target = if a == bb { 2.0 } else { 0.0 };
                assert!(
                    (gram - c(target, 0.0)).norm() < 1e-12,
                    "pair ({a},{bb})"
                );
            }
        }
        b.verify().unwrap();
    }

    #[test]
    fn gell_mann_2_coincides_with_pauli() {
        let g = gell_mann_basis(2).unwrap();
        let p = pauli_basis();
        for a in 0..3 {
            assert!(cmat::max_abs_diff(g.element(a), p.element(a)) < 1e-15);
        }
    }

    #[test]
    fn gell_mann_rejects_small_dim() {
        assert!(matches!(
            gell_mann_basis(1),
            Err(BasisError::InvalidDimension(1))
        ));
    }

    #[test]
    fn generalized_gell_mann_verifies_up_to_dim_4() {
        for n in [2usize, 4] {
            let b = gell_mann_basis(n).unwrap();
            assert_eq!(b.len(), n * n - 1);
            b.verify().unwrap();
        }
    }

    #[test]
    fn kronecker_two_qubits() {
        let b = kronecker_pauli_basis(2).unwrap();
        assert_eq!(b.len(), 15);
        assert_eq!(b.ortho_const(), 4.0);
        b.verify().unwrap();
        // x (x) I and y (x) I anticommute
        let tr = kronecker_first_qubit_triple(2);
        assert_eq!(tr, vec![3, 7, 11]);
        let anti = b.element(tr[0]).dot(b.element(tr[1])) + b.element(tr[1]).dot(b.element(tr[0]));
        assert!(cmat::max_abs(&anti) < 1e-15);
    }

    #[test]
    fn kronecker_single_qubit_is_pauli() {
        let b = kronecker_pauli_basis(1).unwrap();
        let p = pauli_basis();
        for a in 0..3 {
            assert!(cmat::max_abs_diff(b.element(a), p.element(a)) < 1e-15);
        }
    }

    #[test]
    fn kronecker_rejects_zero_qubits() {
        assert!(matches!(
            kronecker_pauli_basis(0),
            Err(BasisError::InvalidQubitCount(0))
        ));
    }

    #[test]
    fn qutrit_triple_has_projector_square() {
        let b = gell_mann_basis(3).unwrap();
        let sub = find_spin_subalgebra(&b, &[0, 1, 2]).unwrap();
        let a = sub.idempotent();
        let expected = ndarray::array![
            [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
            [c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
            [c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
        ];
        assert!(cmat::max_abs_diff(a, &expected) < 1e-15);
    }

    #[test]
    fn two_qubit_triple_has_identity_square() {
        let b = kronecker_pauli_basis(2).unwrap();
        let sub = find_spin_subalgebra(&b, &kronecker_first_qubit_triple(2)).unwrap();
        assert!(cmat::max_abs_diff(sub.idempotent(), &cmat::identity(4)) < 1e-15);
    }

    #[test]
    fn mixed_gell_mann_triple_rejected() {
        let b = gell_mann_basis(3).unwrap();
        let err = find_spin_subalgebra(&b, &[0, 1, 3]).unwrap_err();
        match err {
            BasisError::NotAnticommuting { i, j, .. } => {
                assert_eq!((i, j), (0, 3));
            }
            other => panic!("expected NotAnticommuting, got {other}"),
        }
    }

    #[test]
    fn triples_containing_l8_rejected() {
        let b = gell_mann_basis(3).unwrap();
        for &other in &[0usize, 1, 2, 3, 4, 5, 6] {
            for &third in &[0usize, 1, 2, 3, 4, 5, 6] {
                if other == third {
                    continue;
                }
                assert!(
                    find_spin_subalgebra(&b, &[other, third, 7]).is_err(),
                    "triple ({other},{third},7) should fail"
                );
            }
        }
    }

    #[test]
    fn index_out_of_range_reported() {
        let b = pauli_basis();
        assert!(matches!(
            find_spin_subalgebra(&b, &[0, 1, 7]),
            Err(BasisError::IndexOutOfRange { index: 7, len: 3 })
        ));
    }

    #[test]
    fn triple_squares_leave_su2_span() {
        // The cross products of the qutrit triple close like spins
        // (l1 l2 = i l3), but the squares do not: l1^2 needs the final
        // diagonal generator, which is what forces the extended bookkeeping
        // when evolving operator components directly. Pauli squares stay in
        // the identity alone.
        let b = gell_mann_basis(3).unwrap();
        let l1l2 = b.element(0).dot(b.element(1));
        let il3 = b.element(2).mapv(|z| z * c(0.0, 1.0));
        assert!(cmat::max_abs_diff(&l1l2, &il3) < 1e-15);

        let sq = b.element(0).dot(b.element(0));
        let id_coeff = cmat::trace(&sq).re / 3.0;
        assert!((id_coeff - 2.0 / 3.0).abs() < 1e-14); // not 1: A != I
        let l8_coeff = cmat::trace_product(b.element(7), &sq).re / 2.0;
        assert!(l8_coeff.abs() > 0.5); // the square needs l8
        // triple coefficients of the square all vanish
        for a in 0..3 {
            let ca = cmat::trace_product(b.element(a), &sq).re / 2.0;
            assert!(ca.abs() < 1e-14);
        }

        let p = pauli_basis();
        let psq = p.element(0).dot(p.element(0));
        assert!(cmat::max_abs_diff(&psq, &cmat::identity(2)) < 1e-15);
    }

    #[test]
    fn decompose_mixed_state_is_zero() {
        let b = gell_mann_basis(3).unwrap();
        let rho = cmat::identity(3).mapv(|z| z / 3.0);
        let st = decompose(&rho, &b).unwrap();
        assert!(st.coeffs().iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn decompose_qubit_ground_state() {
        let b = pauli_basis();
        let rho = ndarray::array![[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]];
        let st = decompose(&rho, &b).unwrap();
        assert!((st.coeffs()[0]).abs() < 1e-15);
        assert!((st.coeffs()[1]).abs() < 1e-15);
        assert!((st.coeffs()[2] - 0.5).abs() < 1e-15);
        let back = reconstruct(&st);
        assert!(cmat::max_abs_diff(&back, &rho) < 1e-15);
    }

    #[test]
    fn decompose_rejects_non_hermitian() {
        let b = pauli_basis();
        let m = ndarray::array![[c(0.5, 0.0), c(0.3, 0.0)], [c(0.1, 0.0), c(0.5, 0.0)]];
        assert!(matches!(
            decompose(&m, &b),
            Err(BasisError::NotHermitian { .. })
        ));
    }

    #[test]
    fn decompose_rejects_wrong_trace() {
        let b = pauli_basis();
        let m = cmat::identity(2);
        assert!(matches!(
            decompose(&m, &b),
            Err(BasisError::NotUnitTrace { .. })
        ));
    }

    #[test]
    fn positivity_check_flags_unphysical_coeffs() {
        let b = pauli_basis();
        let good = DensityState::from_coeffs(&b, vec![0.5, 0.0, 0.0]).unwrap();
        good.check_physical().unwrap();
        let bad = DensityState::from_coeffs(&b, vec![0.9, 0.0, 0.0]).unwrap();
        assert!(matches!(
            bad.check_physical(),
            Err(BasisError::NotPositive { .. })
        ));
    }

    proptest! {
        // reconstruct then decompose returns the original coefficients
        #[test]
        fn coeff_round_trip_qutrit(raw in proptest::collection::vec(-0.3f64..0.3, 8)) {
            let b = gell_mann_basis(3).unwrap();
            let st = DensityState::from_coeffs(&b, raw.clone()).unwrap();
            let rho = reconstruct(&st);
            let back = decompose(&rho, &b).unwrap();
            for (x, y) in raw.iter().zip(back.coeffs()) {
                prop_assert!((x - y).abs() < tol::DEFAULT.round_trip);
            }
        }

        // decompose then reconstruct reproduces any Hermitian unit-trace
        // matrix (the basis spans the full Hermitian space)
        #[test]
        fn matrix_round_trip_qutrit(seed in proptest::collection::vec(-1.0f64..1.0, 9 + 6)) {
            let b = gell_mann_basis(3).unwrap();
            let mut m = cmat::zeros(3);
            // diagonal
            for i in 0..3 {
                m[[i, i]] = c(seed[i], 0.0);
            }
            let mut k = 3;
            for i in 0..3 {
                for j in (i + 1)..3 {
                    m[[i, j]] = c(seed[k], seed[k + 1]);
                    m[[j, i]] = m[[i, j]].conj();
                    k += 2;
                }
            }
            // force unit trace
            let tr = cmat::trace(&m).re;
            for i in 0..3 {
                m[[i, i]] -= c((tr - 1.0) / 3.0, 0.0);
            }
            let st = decompose(&m, &b).unwrap();
            let back = reconstruct(&st);
            prop_assert!(cmat::max_abs_diff(&back, &m) < tol::DEFAULT.round_trip);
        }
    }
}
