//! Thermal-drift sampling of random Gibbs states.
//!
//! A sampling run starts from the maximally mixed state and applies `N`
//! randomized drift steps `e^{∓τσ_j/2}(·)e^{∓τσ_j/2}`, each with a measured
//! direction bit. The recorded path defines a Hamiltonian label
//! `H = (λ/N) Σ_k m_k σ_{j_k}` and the final state approximates `e^{−βH}/Z`.
//!
//! Modules, bottom up:
//! - [`pauli`]: Pauli words and their O(d) action.
//! - [`operators`]: dense Hermitian algebra (Gibbs states, trace distance).
//! - [`drift`]: the closed-form drift instrument.
//! - [`dilation`]: gate-level dilation circuit used to verify the instrument.
//! - [`sampler`]: ensembles and the sampling loop.
//! - [`walk`]: label-distribution theory.
//! - [`spectra`]: modular-spectrum gap ratios.

pub mod dilation;
pub mod drift;
pub mod error;
pub mod histogram;
pub mod operators;
pub mod pauli;
pub mod sampler;
pub mod spectra;
pub mod walk;

pub use drift::{apply_drift, apply_drift_forced, branch_probabilities, Direction, DriftOutcome, DriftStepSpec};
pub use error::{Error, Result};
pub use operators::{
    expm_hermitian, gibbs_state, log_partition, modular_hamiltonian, trace_distance, DensityMatrix,
    HermitianOperator,
};
pub use pauli::{pauli_exponential, CMatrix, CVector, Letter, PauliWord};
