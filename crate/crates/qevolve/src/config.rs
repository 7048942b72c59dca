//! Declarative experiment configuration.
//!
//! One TOML file describes the system, field, noise law, evolution run,
//! Monte Carlo settings, pulse request and output files. Configs round-trip
//! through parse/serialize, so experiments are versionable artifacts. Every
//! file a run writes is named in `[outputs]`.
//!
//! ```toml
//! [system]
//! basis = "pauli"
//! subalgebra = [0, 1, 2]
//!
//! [field]
//! b0 = 0.0
//! axis = 2
//! tau = 0.25
//!
//! [noise]
//! kind = "telegraph"
//! axis = 2
//! amplitude = 0.5
//!
//! [evolution]
//! steps = 20
//! initial_state = "plus"
//!
//! [mc]
//! n_traj = 100000
//! seed = 42
//! ```

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basis::{
    decompose, gell_mann_basis, kronecker_first_qubit_triple, kronecker_pauli_basis, pauli_basis,
    BasisError, DensityState, OperatorBasis,
};
use crate::cmat;
use crate::noise::{NoiseAtom, NoiseError, NoiseLaw, NoiseModel};
use crate::propagator::FieldConfig;
use crate::pulse::{PulseError, SeedFamily, SeedFunction};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("field `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error("section `{0}` is required for this command")]
    MissingSection(&'static str),
    #[error("field `{field}`: {source}")]
    Basis {
        field: String,
        source: BasisError,
    },
    #[error("field `noise`: {source}")]
    Noise {
        #[from]
        source: NoiseError,
    },
    #[error("field `pulse`: {source}")]
    Pulse {
        #[from]
        source: PulseError,
    },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<FieldSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evolution: Option<EvolutionSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pulse: Option<PulseSection>,
    #[serde(default)]
    pub outputs: OutputsSection,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    /// "pauli" | "gell_mann" | "kronecker_pauli"
    pub basis: String,
    /// Hilbert-space dimension, gell_mann only (N >= 2).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    /// Qubit count, kronecker_pauli only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qubits: Option<usize>,
    /// Indices of the anticommuting triple; defaults per basis kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subalgebra: Option<Vec<usize>>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FieldSection {
    pub b0: f64,
    /// Index into the subalgebra triple the static field points along.
    pub axis: usize,
    /// Dwell time per interval.
    pub tau: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    /// "telegraph" | "discrete" | "gaussian_isotropic" | "uniform_sphere"
    /// | "uniform_axis"
    pub kind: String,
    /// telegraph / uniform_axis: coupling axis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<usize>,
    /// telegraph / uniform_axis: field amplitude b0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    /// gaussian_isotropic: per-component standard deviation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// uniform_sphere: radius.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    /// discrete: explicit support.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<AtomSection>>,
    /// Component count; defaults to the subalgebra size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AtomSection {
    pub b: Vec<f64>,
    pub p: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EvolutionSection {
    /// Number of dwell intervals.
    pub steps: usize,
    /// Named preset: "mixed" | "level0" | "level1" | "plus" | "imag_plus".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<String>,
    /// Explicit coefficient vector (overrides the preset).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_coeffs: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    pub n_traj: u64,
    pub seed: u64,
    /// Worker threads; 0 picks the runtime default. Results are identical
    /// for every worker count.
    #[serde(default)]
    pub workers: usize,
    /// Sample count for Monte Carlo averaging of continuous noise laws when
    /// building transfer matrices.
    #[serde(default = "default_n_samples")]
    pub n_samples: u64,
}

fn default_n_samples() -> u64 {
    20_000
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PulseSection {
    /// "cosine_squared" | "quartic_sine" | "cosine" | "samples"
    pub family: String,
    /// Transverse field strength.
    pub h: f64,
    /// quartic_sine shape parameter.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    pub t_end: f64,
    #[serde(default = "default_n_points")]
    pub n_points: usize,
    /// samples: raw q values on the uniform grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_samples: Option<Vec<f64>>,
}

fn default_n_points() -> usize {
    4001
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct OutputsSection {
    /// Output directory; overridden by --out-dir, falls back to
    /// QEVOLVE_OUT_DIR, then the current directory.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    pub transfer_matrix: String,
    pub spectrum: String,
    pub trajectory: String,
    pub ensemble: String,
    pub comparison: String,
    pub validation: String,
    pub pulse: String,
    pub verification: String,
}

impl Default for OutputsSection {
    fn default() -> Self {
        OutputsSection {
            dir: None,
            transfer_matrix: "transfer_matrix.txt".into(),
            spectrum: "spectrum.csv".into(),
            trajectory: "trajectory.csv".into(),
            ensemble: "ensemble.csv".into(),
            comparison: "comparison.csv".into(),
            validation: "pulse_validation.txt".into(),
            pulse: "pulse.csv".into(),
            verification: "pulse_verification.txt".into(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialization cannot fail")
    }

    pub fn system(&self) -> Result<&SystemSection, ConfigError> {
        self.system
            .as_ref()
            .ok_or(ConfigError::MissingSection("system"))
    }

    pub fn field_section(&self) -> Result<&FieldSection, ConfigError> {
        self.field
            .as_ref()
            .ok_or(ConfigError::MissingSection("field"))
    }

    pub fn noise_section(&self) -> Result<&NoiseSection, ConfigError> {
        self.noise
            .as_ref()
            .ok_or(ConfigError::MissingSection("noise"))
    }

    pub fn evolution(&self) -> Result<&EvolutionSection, ConfigError> {
        self.evolution
            .as_ref()
            .ok_or(ConfigError::MissingSection("evolution"))
    }

    pub fn mc_section(&self) -> Result<&McSection, ConfigError> {
        self.mc.as_ref().ok_or(ConfigError::MissingSection("mc"))
    }

    pub fn pulse_section(&self) -> Result<&PulseSection, ConfigError> {
        self.pulse
            .as_ref()
            .ok_or(ConfigError::MissingSection("pulse"))
    }

    /// Build the operator basis named by `[system]`.
    pub fn build_basis(&self) -> Result<Arc<OperatorBasis>, ConfigError> {
        let sys = self.system()?;
        match sys.basis.as_str() {
            "pauli" => Ok(pauli_basis()),
            "gell_mann" => {
                let dim = sys
                    .dim
                    .ok_or_else(|| invalid("system.dim", "required for gell_mann"))?;
                gell_mann_basis(dim).map_err(|source| ConfigError::Basis {
                    field: "system.dim".into(),
                    source,
                })
            }
            "kronecker_pauli" => {
                let qubits = sys
                    .qubits
                    .ok_or_else(|| invalid("system.qubits", "required for kronecker_pauli"))?;
                kronecker_pauli_basis(qubits).map_err(|source| ConfigError::Basis {
                    field: "system.qubits".into(),
                    source,
                })
            }
            other => Err(invalid(
                "system.basis",
                format!("unknown basis `{other}` (pauli | gell_mann | kronecker_pauli)"),
            )),
        }
    }

    /// Triple indices: explicit `subalgebra`, or the default for the kind
    /// (Pauli x,y,z; the first three generators for gell_mann; the
    /// first-qubit triple for kronecker_pauli).
    pub fn subalgebra_indices(&self) -> Result<Vec<usize>, ConfigError> {
        let sys = self.system()?;
        if let Some(idx) = &sys.subalgebra {
            return Ok(idx.clone());
        }
        Ok(match sys.basis.as_str() {
            "kronecker_pauli" => kronecker_first_qubit_triple(sys.qubits.unwrap_or(1)),
            _ => vec![0, 1, 2],
        })
    }

    pub fn build_field(&self, n_components: usize) -> Result<FieldConfig, ConfigError> {
        let f = self.field_section()?;
        if f.axis >= n_components {
            return Err(invalid(
                "field.axis",
                format!("axis {} out of range for a {n_components}-component triple", f.axis),
            ));
        }
        FieldConfig::new(f.b0, f.axis, f.tau).map_err(|m| invalid("field.tau", m))
    }

    pub fn build_noise(&self, n_components: usize) -> Result<NoiseModel, ConfigError> {
        let n = self.noise_section()?;
        let components = n.components.unwrap_or(n_components);
        let need = |field: &str, v: Option<f64>| {
            v.ok_or_else(|| invalid(&format!("noise.{field}"), "required for this kind"))
        };
        let model = match n.kind.as_str() {
            "telegraph" => {
                let axis = n
                    .axis
                    .ok_or_else(|| invalid("noise.axis", "required for telegraph"))?;
                NoiseModel::telegraph(need("amplitude", n.amplitude)?, axis, components)?
            }
            "discrete" => {
                let atoms = n
                    .atoms
                    .as_ref()
                    .ok_or_else(|| invalid("noise.atoms", "required for discrete"))?
                    .iter()
                    .map(|a| NoiseAtom {
                        b: a.b.clone(),
                        p: a.p,
                    })
                    .collect();
                NoiseModel::new(NoiseLaw::Discrete(atoms), components)?
            }
            "gaussian_isotropic" => NoiseModel::new(
                NoiseLaw::GaussianIsotropic {
                    sigma: need("sigma", n.sigma)?,
                },
                components,
            )?,
            "uniform_sphere" => NoiseModel::new(
                NoiseLaw::UniformSphere {
                    radius: need("radius", n.radius)?,
                },
                components,
            )?,
            "uniform_axis" => {
                let axis = n
                    .axis
                    .ok_or_else(|| invalid("noise.axis", "required for uniform_axis"))?;
                NoiseModel::new(
                    NoiseLaw::UniformAxis {
                        axis,
                        amplitude: need("amplitude", n.amplitude)?,
                    },
                    components,
                )?
            }
            other => {
                return Err(invalid(
                    "noise.kind",
                    format!(
                        "unknown kind `{other}` (telegraph | discrete | gaussian_isotropic | \
                         uniform_sphere | uniform_axis)"
                    ),
                ))
            }
        };
        Ok(model)
    }

    /// Initial state from preset or explicit coefficients; positivity is
    /// checked here, where states originate.
    pub fn build_initial_state(
        &self,
        basis: &Arc<OperatorBasis>,
    ) -> Result<DensityState, ConfigError> {
        let evo = self.evolution()?;
        let state = if let Some(coeffs) = &evo.initial_coeffs {
            DensityState::from_coeffs(basis, coeffs.clone()).map_err(|source| {
                ConfigError::Basis {
                    field: "evolution.initial_coeffs".into(),
                    source,
                }
            })?
        } else {
            let name = evo.initial_state.as_deref().unwrap_or("mixed");
            preset_state(name, basis).ok_or_else(|| {
                invalid(
                    "evolution.initial_state",
                    format!(
                        "unknown preset `{name}` (mixed | level0 | level1 | plus | imag_plus)"
                    ),
                )
            })?
        };
        state.check_physical().map_err(|source| ConfigError::Basis {
            field: "evolution.initial_coeffs".into(),
            source,
        })?;
        Ok(state)
    }

    /// Build the requested seed function on its uniform grid.
    pub fn build_seed(&self) -> Result<SeedFunction, ConfigError> {
        let p = self.pulse_section()?;
        let seed = match p.family.as_str() {
            "cosine_squared" => SeedFamily::CosineSquared.build(p.h, p.t_end, p.n_points)?,
            "quartic_sine" => {
                let a = p
                    .a
                    .ok_or_else(|| invalid("pulse.a", "required for quartic_sine"))?;
                SeedFamily::QuarticSine { a }.build(p.h, p.t_end, p.n_points)?
            }
            "cosine" => SeedFamily::Cosine.build(p.h, p.t_end, p.n_points)?,
            "samples" => {
                let q = p
                    .q_samples
                    .clone()
                    .ok_or_else(|| invalid("pulse.q_samples", "required for samples"))?;
                let times = crate::pulse::uniform_grid(p.t_end, q.len());
                SeedFunction::from_samples(p.h, times, q)?
            }
            other => {
                return Err(invalid(
                    "pulse.family",
                    format!(
                        "unknown family `{other}` (cosine_squared | quartic_sine | cosine | \
                         samples)"
                    ),
                ))
            }
        };
        Ok(seed)
    }
}

/// Named initial states valid in any dimension.
fn preset_state(name: &str, basis: &Arc<OperatorBasis>) -> Option<DensityState> {
    let n = basis.dim();
    match name {
        "mixed" => Some(DensityState::maximally_mixed(basis)),
        "level0" | "level1" => {
            let level = if name == "level0" { 0 } else { 1 };
            let mut rho = cmat::zeros(n);
            rho[[level, level]] = cmat::c(1.0, 0.0);
            decompose(&rho, basis).ok()
        }
        "plus" | "imag_plus" => {
            // (|0> + z |1>)/sqrt(2) with z = 1 or i
            let z = if name == "plus" {
                cmat::c(1.0, 0.0)
            } else {
                cmat::c(0.0, 1.0)
            };
            let mut rho = cmat::zeros(n);
            rho[[0, 0]] = cmat::c(0.5, 0.0);
            rho[[1, 1]] = cmat::c(0.5, 0.0);
            rho[[0, 1]] = 0.5 * z.conj();
            rho[[1, 0]] = 0.5 * z;
            decompose(&rho, basis).ok()
        }
        _ => None,
    }
}
