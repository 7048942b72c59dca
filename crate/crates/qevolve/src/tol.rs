//! Centralized numerical tolerances.
//!
//! Every fixed threshold used by the library lives in one record so tests and
//! callers reference the same numbers. `DEFAULT` is the single knob; nothing
//! else in the crate hardcodes a tolerance.

/// Numerical tolerance record used throughout the crate.
#[derive(Clone, Copy, Debug)]
pub struct Tolerances {
    /// Entrywise Hermiticity bound for operator-basis elements.
    pub basis_hermiticity: f64,
    /// Trace bound for basis elements (must be traceless).
    pub basis_traceless: f64,
    /// Pairwise orthogonality bound: |Tr(l_a l_b) - c d_ab|.
    pub basis_orthogonality: f64,
    /// Entrywise bound on {l_i, l_j} for candidate spin triples.
    pub anticommutation: f64,
    /// Entrywise bound on |A^2 - A| and |A l - l| for the common square A.
    pub idempotent: f64,
    /// Hermiticity bound on density matrices entering `decompose`.
    pub state_hermiticity: f64,
    /// |Tr rho - 1| bound for density matrices entering `decompose`.
    pub state_trace: f64,
    /// Eigenvalues of a physical density matrix must be >= -positivity_floor.
    pub positivity_floor: f64,
    /// decompose/reconstruct round-trip bound.
    pub round_trip: f64,
    /// Entrywise unitarity bound |U^H U - I| for propagators.
    pub propagator_unitarity: f64,
    /// Closed-form propagators must match the series oracle entrywise to this.
    pub oracle_match: f64,
    /// Long-form vs simplified triple exponential identity bound.
    pub long_form_match: f64,
    /// 1-norm cap on H*tau accepted by the series-exponential oracle.
    pub expm_norm_cap: f64,
    /// Discrete noise probabilities must sum to 1 within this.
    pub discrete_prob_sum: f64,
    /// |b| deviation from the nominal radius for sphere-law draws.
    pub sphere_radius: f64,
    /// Max imaginary residue tolerated in transfer-matrix entries.
    pub transfer_entry_imag: f64,
    /// Allowed excess of the transfer-matrix spectral radius over 1.
    pub spectral_radius_excess: f64,
    /// |R D R^-1 - T| bound for a stored spectral decomposition.
    pub spectral_reconstruction: f64,
    /// Condition-number limit of the eigenvector matrix before the spectral
    /// evolution path is abandoned for iterated multiplication.
    pub eig_condition_limit: f64,
    /// Spectral vs iterated-multiplication evolution agreement bound.
    pub evolution_path_agreement: f64,
    /// Eigenvalues with | |d| - 1 | below this get a decoherence rate of 0.
    pub rate_unit_eigenvalue: f64,
    /// Transfer-matrix evolution vs exhaustive sequence average bound.
    pub enumeration_match: f64,
    /// Sigma multiplier for Monte Carlo vs exact comparisons.
    pub mc_sigma_bound: f64,
    /// Absolute floor added to statistical bounds so exactly conserved
    /// (zero-variance) coefficients are not failed on machine roundoff.
    pub mc_abs_floor: f64,
    /// Seed condition q(0) = 1 bound.
    pub seed_q0: f64,
    /// Seed condition q'(0) = 0 bound (looser: derivatives may be numerical).
    pub seed_qdot0: f64,
    /// Seed condition q''(0) = -h^2 bound (looser still).
    pub seed_qddot0: f64,
    /// Constraint slack in units of h^2: margin below `slack*h^2` counts as
    /// saturated when flagging degenerate seeds.
    pub seed_slack_factor: f64,
    /// Margin level (in units of h^2) below which the drive quotient is too
    /// cancellation-noisy to evaluate directly; such points are filled by
    /// extrapolation from the first healthy ones.
    pub pulse_extrapolation_margin: f64,
    /// Grid-wise |D+|^2 + |D-|^2 - 1 bound.
    pub pulse_unitarity: f64,
    /// Initial-angle bounds for Phi(0), F(0), K(0).
    pub pulse_initial_angles: f64,
    /// Allowed excess of sin(2 Phi) over 1 before branch recovery fails.
    pub sin2phi_excess: f64,
    /// ODE-integrated vs closed-form propagator bound.
    pub pulse_fidelity: f64,
    /// First-order system residual bound in units of max |J|.
    pub pulse_residual_factor: f64,
    /// Relative tolerance of the adaptive integrator.
    pub ode_rtol: f64,
    /// Absolute tolerance of the adaptive integrator.
    pub ode_atol: f64,
}

/// The default tolerance set.
pub const DEFAULT: Tolerances = Tolerances {
    basis_hermiticity: 1e-14,
    basis_traceless: 1e-14,
    basis_orthogonality: 1e-12,
    anticommutation: 1e-14,
    idempotent: 1e-14,
    state_hermiticity: 1e-12,
    state_trace: 1e-12,
    positivity_floor: 1e-10,
    round_trip: 1e-12,
    propagator_unitarity: 1e-12,
    oracle_match: 1e-12,
    long_form_match: 1e-13,
    expm_norm_cap: 50.0,
    discrete_prob_sum: 1e-12,
    sphere_radius: 1e-14,
    transfer_entry_imag: 1e-12,
    spectral_radius_excess: 1e-10,
    spectral_reconstruction: 1e-10,
    eig_condition_limit: 1e12,
    evolution_path_agreement: 1e-10,
    rate_unit_eigenvalue: 1e-12,
    enumeration_match: 1e-10,
    mc_sigma_bound: 6.0,
    mc_abs_floor: 1e-12,
    seed_q0: 1e-10,
    seed_qdot0: 1e-8,
    seed_qddot0: 1e-6,
    seed_slack_factor: 1e-12,
    pulse_extrapolation_margin: 1e-8,
    pulse_unitarity: 1e-8,
    pulse_initial_angles: 1e-10,
    sin2phi_excess: 1e-9,
    pulse_fidelity: 1e-6,
    pulse_residual_factor: 1e-6,
    ode_rtol: 1e-10,
    ode_atol: 1e-12,
};
