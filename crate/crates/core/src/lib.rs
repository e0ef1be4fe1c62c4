//! Exact quantum dynamics of N-photon Fock-state wave packets scattering on
//! a two-level emitter in a chiral waveguide.
//!
//! The excited-manifold amplitude factors into prefactor, carrier phase,
//! envelope, and a permutation-sum "bracket"; integrating its modulus
//! squared gives the atomic excitation probability. The crate provides
//! closed forms for one and two photons, deterministic quadrature up to
//! three, importance-sampled Monte Carlo for arbitrary photon numbers, the
//! asymptotic regime formulas (weak field, dispersive, Rabi), and an
//! independent discrete-mode Hamiltonian oracle for cross-validation.

pub mod bracket;
pub mod curve;
mod error;
pub mod model;
pub mod oracle;
pub mod probability;
pub mod quad;
pub mod special;
pub mod wavefunction;

pub use error::{Error, Result, Warning};
pub use model::{
    validate, Method, PhotonConfiguration, ProbabilityCurve, SystemParams, Validated,
    WavepacketSpec,
};

pub type C64 = num_complex::Complex64;
