//! Probability laws for the piecewise-constant random field.
//!
//! Draws are addressed by (seed, interval index) instead of consumed from a
//! sequential stream: every interval of every trajectory owns an independent
//! ChaCha stream, so ensembles can be evaluated in any order or in parallel
//! and still reproduce bit-identical results.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::tol;

#[derive(Debug, Error)]
pub enum NoiseError {
    #[error("discrete probabilities sum to {sum} (must be 1 within {tol:.1e})")]
    NotNormalized { sum: f64, tol: f64 },
    #[error("atom {index} has non-positive probability {p}")]
    NonPositiveProbability { index: usize, p: f64 },
    #[error("atom {index} has {got} components, model declares {expected}")]
    ComponentMismatch {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("axis {axis} out of range for {n} components")]
    AxisOutOfRange { axis: usize, n: usize },
    #[error("law has no finite support to enumerate")]
    NotEnumerable,
    #[error("invalid noise parameter: {0}")]
    InvalidParameter(String),
}

/// One support point of a finite law.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseAtom {
    pub b: Vec<f64>,
    pub p: f64,
}

#[derive(Clone, Debug)]
pub enum NoiseLaw {
    /// Finite support with probabilities; enables exact averaging.
    Discrete(Vec<NoiseAtom>),
    /// Independent N(0, sigma^2) per component.
    GaussianIsotropic { sigma: f64 },
    /// Uniform on the sphere |b| = radius.
    UniformSphere { radius: f64 },
    /// Uniform amplitude on [-amplitude, amplitude] along one axis.
    UniformAxis { axis: usize, amplitude: f64 },
}

/// A distribution over noise vectors with a declared component count.
#[derive(Clone, Debug)]
pub struct NoiseModel {
    law: NoiseLaw,
    n_components: usize,
}

impl NoiseModel {
    pub fn new(law: NoiseLaw, n_components: usize) -> Result<Self, NoiseError> {
        if n_components == 0 {
            return Err(NoiseError::InvalidParameter(
                "component count must be positive".into(),
            ));
        }
        match &law {
            NoiseLaw::Discrete(atoms) => {
                if atoms.is_empty() {
                    return Err(NoiseError::InvalidParameter(
                        "discrete law needs at least one atom".into(),
                    ));
                }
                let mut sum = 0.0;
                for (i, atom) in atoms.iter().enumerate() {
                    if atom.b.len() != n_components {
                        return Err(NoiseError::ComponentMismatch {
                            index: i,
                            expected: n_components,
                            got: atom.b.len(),
                        });
                    }
                    if !(atom.p > 0.0) {
                        return Err(NoiseError::NonPositiveProbability { index: i, p: atom.p });
                    }
                    sum += atom.p;
                }
                let t = tol::DEFAULT.discrete_prob_sum;
                if (sum - 1.0).abs() > t {
                    return Err(NoiseError::NotNormalized { sum, tol: t });
                }
            }
            NoiseLaw::GaussianIsotropic { sigma } => {
                if !(*sigma >= 0.0) {
                    return Err(NoiseError::InvalidParameter(format!(
                        "sigma must be nonnegative, got {sigma}"
                    )));
                }
            }
            NoiseLaw::UniformSphere { radius } => {
                if !(*radius >= 0.0) {
                    return Err(NoiseError::InvalidParameter(format!(
                        "radius must be nonnegative, got {radius}"
                    )));
                }
            }
            NoiseLaw::UniformAxis { axis, amplitude } => {
                if *axis >= n_components {
                    return Err(NoiseError::AxisOutOfRange {
                        axis: *axis,
                        n: n_components,
                    });
                }
                if !(*amplitude >= 0.0) {
                    return Err(NoiseError::InvalidParameter(format!(
                        "amplitude must be nonnegative, got {amplitude}"
                    )));
                }
            }
        }
        Ok(NoiseModel { law, n_components })
    }

    /// Two atoms +-b0 along one axis with probability 1/2 each.
    pub fn telegraph(b0: f64, axis: usize, n_components: usize) -> Result<Self, NoiseError> {
        if axis >= n_components {
            return Err(NoiseError::AxisOutOfRange {
                axis,
                n: n_components,
            });
        }
        let mut plus = vec![0.0; n_components];
        let mut minus = vec![0.0; n_components];
        plus[axis] = b0;
        minus[axis] = -b0;
        NoiseModel::new(
            NoiseLaw::Discrete(vec![
                NoiseAtom { b: plus, p: 0.5 },
                NoiseAtom { b: minus, p: 0.5 },
            ]),
            n_components,
        )
    }

    pub fn law(&self) -> &NoiseLaw {
        &self.law
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    pub fn is_enumerable(&self) -> bool {
        matches!(self.law, NoiseLaw::Discrete(_))
    }

    /// Finite support with probabilities, order-stable.
    pub fn enumerate(&self) -> Result<&[NoiseAtom], NoiseError> {
        match &self.law {
            NoiseLaw::Discrete(atoms) => Ok(atoms),
            _ => Err(NoiseError::NotEnumerable),
        }
    }

    /// Deterministic draw: a pure function of (seed, index).
    ///
    /// Each index gets its own ChaCha stream of the seeded generator, so
    /// draws are independent across indices and reproducible across runs,
    /// platforms and worker counts.
    pub fn sample(&self, seed: u64, index: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        match &self.law {
            NoiseLaw::Discrete(atoms) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for atom in atoms {
                    acc += atom.p;
                    if u < acc {
                        return atom.b.clone();
                    }
                }
                // cumulative roundoff can leave u just above the final sum
                atoms.last().expect("validated non-empty").b.clone()
            }
            NoiseLaw::GaussianIsotropic { sigma } => (0..self.n_components)
                .map(|_| {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    sigma * g
                })
                .collect(),
            NoiseLaw::UniformSphere { radius } => {
                if *radius == 0.0 {
                    return vec![0.0; self.n_components];
                }
                loop {
                    let v: Vec<f64> = (0..self.n_components)
                        .map(|_| {
                            let g: f64 = StandardNormal.sample(&mut rng);
                            g
                        })
                        .collect();
                    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if norm > 1e-12 {
                        return v.iter().map(|x| radius * x / norm).collect();
                    }
                }
            }
            NoiseLaw::UniformAxis { axis, amplitude } => {
                let mut b = vec![0.0; self.n_components];
                let u: f64 = rng.random();
                b[*axis] = amplitude * (2.0 * u - 1.0);
                b
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn telegraph_support() {
        let m = NoiseModel::telegraph(0.4, 2, 3).unwrap();
        let atoms = m.enumerate().unwrap();
        assert_eq!(atoms.len(), 2);
        assert_eq!(atoms[0].b, vec![0.0, 0.0, 0.4]);
        assert_eq!(atoms[1].b, vec![0.0, 0.0, -0.4]);
        assert_eq!(atoms[0].p, 0.5);
        for idx in 0..64 {
            let draw = m.sample(9, idx);
            assert!(draw == atoms[0].b || draw == atoms[1].b);
        }
    }

    #[test]
    fn discrete_enumeration_is_order_stable() {
        let atoms = vec![
            NoiseAtom { b: vec![0.1], p: 0.2 },
            NoiseAtom { b: vec![-0.3], p: 0.5 },
            NoiseAtom { b: vec![0.7], p: 0.3 },
        ];
        let m = NoiseModel::new(NoiseLaw::Discrete(atoms.clone()), 1).unwrap();
        assert_eq!(m.enumerate().unwrap(), atoms.as_slice());
    }

    #[test]
    fn continuous_laws_are_not_enumerable() {
        let m = NoiseModel::new(NoiseLaw::GaussianIsotropic { sigma: 1.0 }, 3).unwrap();
        assert!(matches!(m.enumerate(), Err(NoiseError::NotEnumerable)));
        assert!(!m.is_enumerable());
    }

    #[test]
    fn normalization_enforced() {
        let atoms = vec![
            NoiseAtom { b: vec![0.1], p: 0.6 },
            NoiseAtom { b: vec![0.2], p: 0.6 },
        ];
        assert!(matches!(
            NoiseModel::new(NoiseLaw::Discrete(atoms), 1),
            Err(NoiseError::NotNormalized { .. })
        ));
    }

    #[test]
    fn non_positive_probability_rejected() {
        let atoms = vec![
            NoiseAtom { b: vec![0.1], p: 1.0 },
            NoiseAtom { b: vec![0.2], p: 0.0 },
        ];
        assert!(matches!(
            NoiseModel::new(NoiseLaw::Discrete(atoms), 1),
            Err(NoiseError::NonPositiveProbability { index: 1, .. })
        ));
    }

    #[test]
    fn component_mismatch_rejected() {
        let atoms = vec![NoiseAtom { b: vec![0.1, 0.2], p: 1.0 }];
        assert!(matches!(
            NoiseModel::new(NoiseLaw::Discrete(atoms), 3),
            Err(NoiseError::ComponentMismatch { .. })
        ));
    }

    #[test]
    fn sphere_draws_have_exact_radius() {
        let m = NoiseModel::new(NoiseLaw::UniformSphere { radius: 0.75 }, 3).unwrap();
        for idx in 0..200 {
            let b = m.sample(3, idx);
            let norm = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 0.75).abs() < tol::DEFAULT.sphere_radius);
        }
    }

    #[test]
    fn uniform_axis_stays_on_axis() {
        let m = NoiseModel::new(
            NoiseLaw::UniformAxis {
                axis: 1,
                amplitude: 2.0,
            },
            3,
        )
        .unwrap();
        for idx in 0..100 {
            let b = m.sample(17, idx);
            assert_eq!(b[0], 0.0);
            assert_eq!(b[2], 0.0);
            assert!(b[1].abs() <= 2.0);
        }
    }

    #[test]
    fn gaussian_mean_within_statistical_bound() {
        let m = NoiseModel::new(NoiseLaw::GaussianIsotropic { sigma: 1.0 }, 3).unwrap();
        let n = 1_000_000u64;
        let mut sums = [0.0f64; 3];
        for idx in 0..n {
            let b = m.sample(21, idx);
            for (s, x) in sums.iter_mut().zip(&b) {
                *s += x;
            }
        }
        let bound = 5.0 / (n as f64).sqrt();
        for s in sums {
            assert!((s / n as f64).abs() < bound, "mean {} vs {}", s / n as f64, bound);
        }
    }

    proptest! {
        #[test]
        fn sampling_is_deterministic(seed in any::<u64>(), index in any::<u64>()) {
            let m = NoiseModel::new(NoiseLaw::GaussianIsotropic { sigma: 0.8 }, 3).unwrap();
            prop_assert_eq!(m.sample(seed, index), m.sample(seed, index));
        }

        #[test]
        fn neighboring_indices_differ(seed in any::<u64>(), index in 0u64..u64::MAX - 1) {
            let m = NoiseModel::new(NoiseLaw::GaussianIsotropic { sigma: 0.8 }, 3).unwrap();
            prop_assert_ne!(m.sample(seed, index), m.sample(seed, index + 1));
        }
    }
}
