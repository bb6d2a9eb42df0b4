//! Two-flavor neutrino oscillations in dissipative matter: Lindblad evolution
//! on the Poincare sphere, mixed-state geometric phases and the NMR mapping.

pub mod config;
pub mod dataset;
pub mod error;
pub mod generator;
pub mod geometry;
pub mod hamiltonian;
pub mod nmr;
pub mod ode;
pub mod params;
pub mod phases;
pub mod spectral;
pub mod state;
pub mod sweep;
pub mod trajectory;

pub use error::{Error, Result};
pub use generator::{build_generator, master_rhs, BlochGenerator, GeneratorMode};
pub use params::{make_params, DecayMatrix, DecaySpec, DecayValue, OffDiagonalRule, OscillationParams};
pub use state::{BlochVector, DensityMatrix2, Flavor};
pub use config::{ConfigError, RunConfig};
pub use dataset::Dataset;
pub use phases::PhaseReport;
pub use spectral::{SpectralSolution, SpectralSource};
pub use trajectory::{Propagator, Provenance, Trajectory};
