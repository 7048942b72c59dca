//! One-interval transfer matrices for noise-averaged coherence vectors,
//! their spectral decomposition, and multi-interval evolution.
//!
//! The transfer matrix acts on the coefficient vector of the density matrix:
//! rho_c(tau) = sum_b T_cb rho_b(0) with
//! T_cb = (1/c) E[ Tr( l_c U l_b U^H ) ], averaged over the noise law. State
//! coefficients evolve as rho(t) = U rho(0) U^H; the matrix of the adjoint
//! (observable-side) map is the transpose, exposed separately.

use ndarray::{Array1, Array2};
use thiserror::Error;

use crate::basis::{DensityState, OperatorBasis, SpinSubalgebra};
use crate::cmat::{self, c, CMat, C64};
use crate::noise::{NoiseError, NoiseModel};
use crate::propagator::{subalgebra_propagator, FieldConfig, PropagatorError};
use crate::tol;

#[derive(Debug, Error)]
pub enum TransferError {
    #[error("noise couples {got} components, subalgebra has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("subalgebra belongs to a different basis than the one supplied")]
    BasisMismatch,
    #[error("state has {got} coefficients, transfer matrix needs {expected}")]
    StateDimension { expected: usize, got: usize },
    #[error("static axis {axis} out of range for {n} components")]
    AxisOutOfRange { axis: usize, n: usize },
    #[error("transfer entries have imaginary residue {residue:.3e} > {tol:.1e}")]
    ImaginaryResidue { residue: f64, tol: f64 },
    #[error("qubit moment integrals need 3-component noise, got {0}")]
    NotQubit(usize),
    #[error("Monte Carlo settings required to average a continuous law")]
    MissingSampler,
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Propagator(#[from] PropagatorError),
}

/// Monte Carlo averaging parameters for continuous noise laws.
#[derive(Clone, Copy, Debug)]
pub struct McSettings {
    pub n_samples: u64,
    pub seed: u64,
}

/// How a transfer matrix was averaged.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BuildMethod {
    ExactEnumeration,
    MonteCarloAverage { n_samples: u64, seed: u64 },
}

/// Spectral data attached to a transfer matrix by `diagonalize`.
#[derive(Clone, Debug)]
pub struct SpectralDecomp {
    eigenvalues: Vec<C64>,
    /// Eigenvector matrix and its inverse; `None` when the eigenbasis is too
    /// ill-conditioned, in which case evolution falls back to iterated
    /// multiplication.
    eigenbasis: Option<SpectralBasis>,
    condition: f64,
}

#[derive(Clone, Debug)]
pub struct SpectralBasis {
    r: CMat,
    r_inv: CMat,
}

impl SpectralDecomp {
    pub fn eigenvalues(&self) -> &[C64] {
        &self.eigenvalues
    }

    pub fn is_diagonalizable(&self) -> bool {
        self.eigenbasis.is_some()
    }

    /// 1-norm condition estimate of the eigenvector matrix.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn eigenvector_matrix(&self) -> Option<&CMat> {
        self.eigenbasis.as_ref().map(|b| &b.r)
    }

    pub fn eigenvector_inverse(&self) -> Option<&CMat> {
        self.eigenbasis.as_ref().map(|b| &b.r_inv)
    }
}

/// Real (N^2-1) x (N^2-1) map advancing the noise-averaged coefficient
/// vector by one dwell interval.
#[derive(Clone, Debug)]
pub struct TransferMatrix {
    matrix: Array2<f64>,
    tau: f64,
    build_method: BuildMethod,
    spectral: Option<SpectralDecomp>,
    /// Entrywise standard error of the mean for Monte Carlo builds.
    mc_stderr: Option<Array2<f64>>,
}

impl TransferMatrix {
    pub fn from_matrix(matrix: Array2<f64>, tau: f64, build_method: BuildMethod) -> Self {
        assert_eq!(matrix.nrows(), matrix.ncols());
        TransferMatrix {
            matrix,
            tau,
            build_method,
            spectral: None,
            mc_stderr: None,
        }
    }

    /// Side length, N^2 - 1.
    pub fn dim_basis(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn build_method(&self) -> BuildMethod {
        self.build_method
    }

    pub fn spectral(&self) -> Option<&SpectralDecomp> {
        self.spectral.as_ref()
    }

    pub fn mc_stderr(&self) -> Option<&Array2<f64>> {
        self.mc_stderr.as_ref()
    }

    /// The matrix of the observable-side (adjoint) map: the transpose.
    pub fn heisenberg_matrix(&self) -> Array2<f64> {
        self.matrix.t().to_owned()
    }

    /// Largest eigenvalue modulus. Diagonalizes on a copy if needed.
    pub fn spectral_radius(&self) -> f64 {
        match &self.spectral {
            Some(s) => s.eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max),
            None => {
                let evs = eigen_decompose(&self.matrix).0;
                evs.iter().map(|z| z.norm()).fold(0.0, f64::max)
            }
        }
    }

    /// Compute and attach the spectral decomposition.
    ///
    /// When the eigenvector matrix has 1-norm condition above the configured
    /// limit, or the reconstruction residual exceeds its bound, the matrix is
    /// marked non-diagonalizable (eigenvalues are still stored) and `evolve`
    /// uses iterated multiplication. Not a failure path.
    pub fn diagonalize(&mut self) -> &SpectralDecomp {
        if self.spectral.is_none() {
            let t = tol::DEFAULT;
            let (eigenvalues, r) = eigen_decompose(&self.matrix);
            let d = self.dim_basis();
            let decomp = match cmat::inverse(&r) {
                Some(r_inv) => {
                    let condition = cmat::norm_1(&r) * cmat::norm_1(&r_inv);
                    if condition > t.eig_condition_limit {
                        SpectralDecomp {
                            eigenvalues,
                            eigenbasis: None,
                            condition,
                        }
                    } else {
                        // residual check: R D R^-1 must reproduce the matrix
                        let mut rd = r.clone();
                        for (j, ev) in eigenvalues.iter().enumerate() {
                            for i in 0..d {
                                rd[[i, j]] *= *ev;
                            }
                        }
                        let recon = rd.dot(&r_inv);
                        let complex_t = self.matrix.mapv(|x| c(x, 0.0));
                        let residual = cmat::max_abs_diff(&recon, &complex_t);
                        if residual > t.spectral_reconstruction {
                            SpectralDecomp {
                                eigenvalues,
                                eigenbasis: None,
                                condition,
                            }
                        } else {
                            SpectralDecomp {
                                eigenvalues,
                                eigenbasis: Some(SpectralBasis { r, r_inv }),
                                condition,
                            }
                        }
                    }
                }
                None => SpectralDecomp {
                    eigenvalues,
                    eigenbasis: None,
                    condition: f64::INFINITY,
                },
            };
            self.spectral = Some(decomp);
        }
        self.spectral.as_ref().unwrap()
    }

    /// Coefficient vectors at steps 0..=m.
    ///
    /// Uses the spectral form when available and well-conditioned, otherwise
    /// iterated multiplication; the two paths agree within the configured
    /// bound.
    pub fn evolve(
        &self,
        state0: &DensityState,
        m: usize,
    ) -> Result<Vec<DensityState>, TransferError> {
        let d = self.dim_basis();
        if state0.coeffs().len() != d {
            return Err(TransferError::StateDimension {
                expected: d,
                got: state0.coeffs().len(),
            });
        }
        let basis = state0.basis();
        let coeff_steps = match self.spectral.as_ref().and_then(|s| s.eigenbasis.as_ref()) {
            Some(sb) => {
                let eigenvalues = &self.spectral.as_ref().unwrap().eigenvalues;
                let x0: Array1<C64> = state0.coeffs().iter().map(|x| c(*x, 0.0)).collect();
                let mut y = sb.r_inv.dot(&x0);
                let mut steps = Vec::with_capacity(m + 1);
                steps.push(state0.coeffs().to_vec());
                for _ in 1..=m {
                    for (yk, ev) in y.iter_mut().zip(eigenvalues) {
                        *yk *= *ev;
                    }
                    let xk = sb.r.dot(&y);
                    steps.push(xk.iter().map(|z| z.re).collect());
                }
                steps
            }
            None => {
                let mut x: Array1<f64> = Array1::from(state0.coeffs().to_vec());
                let mut steps = Vec::with_capacity(m + 1);
                steps.push(state0.coeffs().to_vec());
                for _ in 1..=m {
                    x = self.matrix.dot(&x);
                    steps.push(x.to_vec());
                }
                steps
            }
        };
        coeff_steps
            .into_iter()
            .map(|coeffs| DensityState::from_coeffs(basis, coeffs).map_err(|_| {
                TransferError::StateDimension {
                    expected: d,
                    got: state0.coeffs().len(),
                }
            }))
            .collect()
    }

    /// Per-eigenvalue decoherence rates -ln|d| / tau.
    ///
    /// `None` until `diagonalize` has been called. Eigenvalues with modulus 1
    /// within the configured tolerance get an exact zero; modulus 0 gives an
    /// infinite rate.
    pub fn decoherence_rates(&self) -> Option<Vec<(C64, f64)>> {
        let spectral = self.spectral.as_ref()?;
        let t = tol::DEFAULT;
        Some(
            spectral
                .eigenvalues
                .iter()
                .map(|ev| {
                    let mag = ev.norm();
                    let rate = if (mag - 1.0).abs() <= t.rate_unit_eigenvalue {
                        0.0
                    } else if mag == 0.0 {
                        f64::INFINITY
                    } else {
                        -mag.ln() / self.tau
                    };
                    (*ev, rate)
                })
                .collect(),
        )
    }
}

/// Eigenvalues and eigenvector matrix of a real square matrix.
fn eigen_decompose(m: &Array2<f64>) -> (Vec<C64>, CMat) {
    let d = m.nrows();
    let fm = faer::Mat::from_fn(d, d, |i, j| m[[i, j]]);
    let evd = fm.eigen().expect("eigendecomposition failed");
    let s = evd.S();
    let u = evd.U();
    let eigenvalues: Vec<C64> = (0..d).map(|i| c(s[i].re, s[i].im)).collect();
    let r = CMat::from_shape_fn((d, d), |(i, j)| c(u[(i, j)].re, u[(i, j)].im));
    (eigenvalues, r)
}

/// Scalar moments of the averaged qubit rotation: I0 = E[cos^2(B tau)],
/// Ii = E[Bhat_i sin(B tau) cos(B tau)], Iij = E[Bhat_i Bhat_j sin^2(B tau)],
/// with B = b0 e_axis + b drawn from the noise law.
#[derive(Clone, Copy, Debug)]
pub struct MomentIntegrals {
    pub i0: f64,
    pub ii: [f64; 3],
    pub iij: [[f64; 3]; 3],
}

impl MomentIntegrals {
    /// I0 + trace(Iij) must equal 1: cos^2 + |Bhat|^2 sin^2 averages to 1.
    pub fn completeness_deviation(&self) -> f64 {
        (self.i0 + self.iij[0][0] + self.iij[1][1] + self.iij[2][2] - 1.0).abs()
    }

    pub fn symmetry_deviation(&self) -> f64 {
        let mut dev = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                dev = dev.max((self.iij[i][j] - self.iij[j][i]).abs());
            }
        }
        dev
    }
}

fn accumulate_moments(acc: &mut MomentIntegrals, weight: f64, total: &[f64], tau: f64) {
    let b = (total[0] * total[0] + total[1] * total[1] + total[2] * total[2]).sqrt();
    let (s, co) = (b * tau).sin_cos();
    acc.i0 += weight * co * co;
    if b > 0.0 {
        let hat = [total[0] / b, total[1] / b, total[2] / b];
        for i in 0..3 {
            acc.ii[i] += weight * hat[i] * s * co;
            for j in 0..3 {
                acc.iij[i][j] += weight * hat[i] * hat[j] * s * s;
            }
        }
    }
}

/// Moment integrals of the noise law for a 3-component qubit field:
/// exact weighted sum over a finite support, Monte Carlo mean otherwise.
pub fn qubit_integrals(
    noise: &NoiseModel,
    field: &FieldConfig,
    mc: Option<McSettings>,
) -> Result<MomentIntegrals, TransferError> {
    if noise.n_components() != 3 {
        return Err(TransferError::NotQubit(noise.n_components()));
    }
    if field.static_axis >= 3 {
        return Err(TransferError::AxisOutOfRange {
            axis: field.static_axis,
            n: 3,
        });
    }
    let mut acc = MomentIntegrals {
        i0: 0.0,
        ii: [0.0; 3],
        iij: [[0.0; 3]; 3],
    };
    if noise.is_enumerable() {
        for atom in noise.enumerate()? {
            let total = field.total_field(&atom.b);
            accumulate_moments(&mut acc, atom.p, &total, field.tau);
        }
    } else {
        let mc = mc.ok_or(TransferError::MissingSampler)?;
        let w = 1.0 / mc.n_samples as f64;
        for k in 0..mc.n_samples {
            let b = noise.sample(mc.seed, k);
            let total = field.total_field(&b);
            accumulate_moments(&mut acc, w, &total, field.tau);
        }
    }
    debug_assert!(acc.completeness_deviation() < 1e-12);
    Ok(acc)
}

/// Assemble the qubit transfer matrix from its moment integrals.
///
/// Diagonal: T_aa = I0 + 2 I_aa - trace(I); off-diagonal: T_cb = 2 I_cb -
/// 2 eps_ibc I_i. Must agree with `general_transfer_matrix` on the Pauli
/// basis to machine precision; that equivalence is an acceptance criterion.
pub fn assemble_qubit_t(m: &MomentIntegrals, tau: f64) -> TransferMatrix {
    let tr = m.iij[0][0] + m.iij[1][1] + m.iij[2][2];
    let mut t = Array2::<f64>::zeros((3, 3));
    for cix in 0..3 {
        for bix in 0..3 {
            if cix == bix {
                t[[cix, bix]] = m.i0 - tr + 2.0 * m.iij[cix][cix];
            } else {
                let mut val = 2.0 * m.iij[cix][bix];
                for i in 0..3 {
                    let eps = levi_civita(i, bix, cix);
                    if eps != 0.0 {
                        val -= 2.0 * eps * m.ii[i];
                    }
                }
                t[[cix, bix]] = val;
            }
        }
    }
    TransferMatrix::from_matrix(t, tau, BuildMethod::ExactEnumeration)
}

fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

/// Build the transfer matrix T_cb = (1/c) E[Tr(l_c U l_b U^H)] in any
/// supported basis, with U the closed-form propagator of the total field
/// over the given triple.
///
/// Finite noise laws are averaged exactly; continuous laws need `mc`.
pub fn general_transfer_matrix(
    basis: &std::sync::Arc<OperatorBasis>,
    sub: &SpinSubalgebra,
    noise: &NoiseModel,
    field: &FieldConfig,
    mc: Option<McSettings>,
) -> Result<TransferMatrix, TransferError> {
    if !std::sync::Arc::ptr_eq(basis, sub.parent()) {
        return Err(TransferError::BasisMismatch);
    }
    if noise.n_components() != sub.n_components() {
        return Err(TransferError::DimensionMismatch {
            expected: sub.n_components(),
            got: noise.n_components(),
        });
    }
    if field.static_axis >= sub.n_components() {
        return Err(TransferError::AxisOutOfRange {
            axis: field.static_axis,
            n: sub.n_components(),
        });
    }
    let d = basis.len();
    let t = tol::DEFAULT;

    let conjugation = |b: &[f64]| -> Result<CMat, TransferError> {
        let total = field.total_field(b);
        let u = subalgebra_propagator(&total, field.tau, sub)?;
        let udag = cmat::adjoint(u.matrix());
        let mut out = CMat::zeros((d, d));
        for bix in 0..d {
            let v = u.matrix().dot(basis.element(bix)).dot(&udag);
            for cix in 0..d {
                out[[cix, bix]] = cmat::trace_product(basis.element(cix), &v);
            }
        }
        Ok(out)
    };

    let (mean_c, stderr, method) = if noise.is_enumerable() {
        let mut acc = CMat::zeros((d, d));
        for atom in noise.enumerate()? {
            let one = conjugation(&atom.b)?;
            acc.scaled_add(c(atom.p, 0.0), &one);
        }
        (acc, None, BuildMethod::ExactEnumeration)
    } else {
        let mc = mc.ok_or(TransferError::MissingSampler)?;
        let n = mc.n_samples;
        let mut sum = CMat::zeros((d, d));
        let mut sumsq = Array2::<f64>::zeros((d, d));
        for k in 0..n {
            let b = noise.sample(mc.seed, k);
            let one = conjugation(&b)?;
            sum += &one;
            for ((i, j), z) in one.indexed_iter() {
                sumsq[[i, j]] += z.re * z.re;
            }
        }
        let nf = n as f64;
        let mean = sum.mapv(|z| z / nf);
        let stderr = if n > 1 {
            let mut se = Array2::<f64>::zeros((d, d));
            for ((i, j), s2) in sumsq.indexed_iter() {
                let mu = mean[[i, j]].re;
                let var = ((s2 - nf * mu * mu) / (nf - 1.0)).max(0.0);
                se[[i, j]] = (var / nf).sqrt();
            }
            Some(se.mapv(|x| x / basis.ortho_const()))
        } else {
            None
        };
        (
            mean,
            stderr,
            BuildMethod::MonteCarloAverage {
                n_samples: n,
                seed: mc.seed,
            },
        )
    };

    // traces of averaged unitary conjugations are real; residue is roundoff
    let mut residue = 0.0f64;
    for z in mean_c.iter() {
        residue = residue.max((z.im / basis.ortho_const()).abs());
    }
    if residue > t.transfer_entry_imag {
        return Err(TransferError::ImaginaryResidue {
            residue,
            tol: t.transfer_entry_imag,
        });
    }
    let matrix = mean_c.mapv(|z| z.re / basis.ortho_const());
    let mut out = TransferMatrix::from_matrix(matrix, field.tau, method);
    out.mc_stderr = stderr;
    Ok(out)
}
