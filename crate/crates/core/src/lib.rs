//! Approximate ground-space projectors for gapped local Hamiltonians,
//! entanglement spread, and exact simulation of EPR-assisted two-party
//! protocols at desk scale.
//!
//! Every numerical routine is generic over the real scalar `T: Real`
//! (`f64` or `f32`). The aliases below fix `T = f64`.

pub mod agsp_cheby;
pub mod agsp_qpe;
pub mod artifact;
pub mod error;
pub mod hamlib;
pub mod linalg;
pub mod protocol;
pub mod scalar;
pub mod spectra;
pub mod verify;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use scalar::{Complex, Real};

pub type CMat = linalg::CMat<f64>;
pub type CVec = linalg::CVec<f64>;
pub type LocalHamiltonian = hamlib::LocalHamiltonian<f64>;
pub type SplitHamiltonian = hamlib::SplitHamiltonian<f64>;
pub type UnitaryDecomposition = hamlib::UnitaryDecomposition<f64>;
pub type SchmidtSpectrum = spectra::SchmidtSpectrum<f64>;
pub type SpectrumSummary = spectra::SpectrumSummary<f64>;
pub type AgspArtifact = artifact::AgspArtifact<f64>;
pub type TruncatedHamiltonian = agsp_cheby::TruncatedHamiltonian<f64>;
