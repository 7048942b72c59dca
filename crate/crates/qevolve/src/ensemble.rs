//! Brute-force trajectory simulation: draw a concrete piecewise-constant
//! noise realization, propagate the density matrix interval by interval,
//! average over trajectories. This is the ground truth the transfer matrix
//! must reproduce.
//!
//! Determinism contract: trajectory t draws interval k from stream
//! t * m + k of the seeded generator, and partial sums are combined in a
//! fixed chunk order, so results are bit-identical for any worker count.

use rayon::prelude::*;
use thiserror::Error;

use crate::basis::{self, DensityState, SpinSubalgebra};
use crate::cmat::{self, CMat};
use crate::noise::{NoiseError, NoiseModel};
use crate::propagator::{subalgebra_propagator, FieldConfig, PropagatorError};

/// Trajectories per work unit. Fixed: the reduction order (sequential within
/// a chunk, chunk-index order across chunks) is part of the determinism
/// contract.
const CHUNK: u64 = 256;

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("noise couples {got} components, subalgebra has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("state basis does not match the subalgebra parent")]
    BasisMismatch,
    #[error("step count must be at least 1")]
    NoSteps,
    #[error("trajectory count must be at least 1")]
    NoTrajectories,
    #[error("law has no finite support to enumerate")]
    NotEnumerable,
    #[error("enumeration over {support}^{steps} sequences exceeds the cap of {cap}")]
    TooManySequences {
        support: usize,
        steps: usize,
        cap: u64,
    },
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Propagator(#[from] PropagatorError),
}

/// Ensemble-averaged coefficient trajectories with standard errors.
#[derive(Clone, Debug)]
pub struct TrajectoryEnsembleResult {
    /// mean[k][a]: ensemble mean of coefficient a after k intervals.
    pub mean: Vec<Vec<f64>>,
    /// Standard error of the mean, same shape.
    pub stderr: Vec<Vec<f64>>,
    pub n_traj: u64,
    pub seed: u64,
}

impl TrajectoryEnsembleResult {
    pub fn steps(&self) -> usize {
        self.mean.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.mean[0].len()
    }
}

/// Per-chunk running statistics (Welford), merged across chunks in fixed
/// index order (Chan). Constant data yields an exactly zero variance, so
/// noiseless ensembles report stderr = 0 rather than summation roundoff.
struct ChunkAccum {
    count: u64,
    mean: Vec<Vec<f64>>,
    m2: Vec<Vec<f64>>,
}

impl ChunkAccum {
    fn new(steps: usize, dim: usize) -> Self {
        ChunkAccum {
            count: 0,
            mean: vec![vec![0.0; dim]; steps],
            m2: vec![vec![0.0; dim]; steps],
        }
    }

    fn merge(&mut self, other: &ChunkAccum) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            self.count = other.count;
            self.mean.clone_from(&other.mean);
            self.m2.clone_from(&other.m2);
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let total = na + nb;
        for k in 0..self.mean.len() {
            for a in 0..self.mean[k].len() {
                let delta = other.mean[k][a] - self.mean[k][a];
                self.mean[k][a] += delta * nb / total;
                self.m2[k][a] += other.m2[k][a] + delta * delta * na * nb / total;
            }
        }
        self.count += other.count;
    }
}

fn propagate_trajectory(
    traj: u64,
    noise: &NoiseModel,
    field: &FieldConfig,
    sub: &SpinSubalgebra,
    state0: &DensityState,
    m: usize,
    seed: u64,
    record: &mut dyn FnMut(usize, &[f64]),
) -> Result<(), EnsembleError> {
    let basis = state0.basis();
    let mut rho = basis::reconstruct(state0);
    for k in 0..m {
        let b = noise.sample(seed, traj * m as u64 + k as u64);
        let total = field.total_field(&b);
        let u = subalgebra_propagator(&total, field.tau, sub)?;
        let udag = cmat::adjoint(u.matrix());
        rho = u.matrix().dot(&rho).dot(&udag);
        let coeffs = basis::decompose_unchecked(&rho, basis);
        record(k + 1, &coeffs);
    }
    Ok(())
}

/// Propagate `n_traj` independent noise realizations for `m` intervals and
/// return per-step means and standard errors of the coefficient vector.
///
/// Step 0 is the initial state itself (no noise applied yet). Deterministic
/// for a given seed regardless of how many workers execute the chunks.
pub fn run_ensemble(
    noise: &NoiseModel,
    field: &FieldConfig,
    sub: &SpinSubalgebra,
    state0: &DensityState,
    m: usize,
    n_traj: u64,
    seed: u64,
) -> Result<TrajectoryEnsembleResult, EnsembleError> {
    validate(noise, sub, state0, field)?;
    if m == 0 {
        return Err(EnsembleError::NoSteps);
    }
    if n_traj == 0 {
        return Err(EnsembleError::NoTrajectories);
    }
    let d = state0.coeffs().len();
    let n_chunks = n_traj.div_ceil(CHUNK);

    let chunks: Vec<Result<ChunkAccum, EnsembleError>> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk_idx| {
            let lo = chunk_idx * CHUNK;
            let hi = ((chunk_idx + 1) * CHUNK).min(n_traj);
            let mut acc = ChunkAccum::new(m + 1, d);
            for traj in lo..hi {
                acc.count += 1;
                let n = acc.count as f64;
                propagate_trajectory(traj, noise, field, sub, state0, m, seed, &mut |k, coeffs| {
                    for (a, &x) in coeffs.iter().enumerate() {
                        let delta = x - acc.mean[k][a];
                        acc.mean[k][a] += delta / n;
                        acc.m2[k][a] += delta * (x - acc.mean[k][a]);
                    }
                })?;
            }
            Ok(acc)
        })
        .collect();

    let mut total = ChunkAccum::new(m + 1, d);
    for chunk in chunks {
        total.merge(&chunk?);
    }

    let n = n_traj as f64;
    let mut mean = vec![vec![0.0; d]; m + 1];
    let mut stderr = vec![vec![0.0; d]; m + 1];
    // step 0: every trajectory starts at exactly state0
    mean[0].copy_from_slice(state0.coeffs());
    for k in 1..=m {
        for a in 0..d {
            mean[k][a] = total.mean[k][a];
            if n_traj > 1 {
                let var = (total.m2[k][a] / (n - 1.0)).max(0.0);
                stderr[k][a] = (var / n).sqrt();
            }
        }
    }
    Ok(TrajectoryEnsembleResult {
        mean,
        stderr,
        n_traj,
        seed,
    })
}

/// Cap on |support|^m for exhaustive averaging.
pub const ENUMERATION_CAP: u64 = 1_000_000;

/// Exact probability-weighted average over every noise sequence of length
/// `m`: the per-step coefficient vectors of sum_sequences P(seq) rho(seq).
///
/// This is the limit of `run_ensemble` as the trajectory count grows, and
/// the reference the transfer-matrix evolution is required to match.
pub fn exact_enumeration(
    noise: &NoiseModel,
    field: &FieldConfig,
    sub: &SpinSubalgebra,
    state0: &DensityState,
    m: usize,
) -> Result<Vec<Vec<f64>>, EnsembleError> {
    validate(noise, sub, state0, field)?;
    if m == 0 {
        return Err(EnsembleError::NoSteps);
    }
    if !noise.is_enumerable() {
        return Err(EnsembleError::NotEnumerable);
    }
    let atoms = noise.enumerate()?;
    let support = atoms.len();
    let sequences = (support as f64).powi(m as i32);
    if !(sequences <= ENUMERATION_CAP as f64) {
        return Err(EnsembleError::TooManySequences {
            support,
            steps: m,
            cap: ENUMERATION_CAP,
        });
    }

    // one propagator per atom, reused along every branch
    let mut us: Vec<(CMat, CMat, f64)> = Vec::with_capacity(support);
    for atom in atoms {
        let u = subalgebra_propagator(&field.total_field(&atom.b), field.tau, sub)?;
        let udag = cmat::adjoint(u.matrix());
        us.push((u.into_matrix(), udag, atom.p));
    }

    let basis = state0.basis();
    let d = state0.coeffs().len();
    let mut sums = vec![vec![0.0; d]; m + 1];
    sums[0].copy_from_slice(state0.coeffs());

    // depth-first over the sequence tree; each prefix is visited once with
    // its cumulative probability
    fn walk(
        rho: &CMat,
        weight: f64,
        depth: usize,
        m: usize,
        us: &[(CMat, CMat, f64)],
        basis: &std::sync::Arc<crate::basis::OperatorBasis>,
        sums: &mut [Vec<f64>],
    ) {
        for (u, udag, p) in us {
            let next = u.dot(rho).dot(udag);
            let w = weight * p;
            let coeffs = basis::decompose_unchecked(&next, basis);
            for (a, x) in coeffs.iter().enumerate() {
                sums[depth + 1][a] += w * x;
            }
            if depth + 1 < m {
                walk(&next, w, depth + 1, m, us, basis, sums);
            }
        }
    }

    let rho0 = basis::reconstruct(state0);
    walk(&rho0, 1.0, 0, m, &us, basis, &mut sums);
    Ok(sums)
}

fn validate(
    noise: &NoiseModel,
    sub: &SpinSubalgebra,
    state0: &DensityState,
    field: &FieldConfig,
) -> Result<(), EnsembleError> {
    if noise.n_components() != sub.n_components() {
        return Err(EnsembleError::DimensionMismatch {
            expected: sub.n_components(),
            got: noise.n_components(),
        });
    }
    if field.static_axis >= sub.n_components() {
        return Err(EnsembleError::DimensionMismatch {
            expected: sub.n_components(),
            got: field.static_axis + 1,
        });
    }
    if !std::sync::Arc::ptr_eq(state0.basis(), sub.parent()) {
        return Err(EnsembleError::BasisMismatch);
    }
    Ok(())
}
