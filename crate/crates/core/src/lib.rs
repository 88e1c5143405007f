//! Pseudo-spectral simulator and estimate checker for the two-dimensional
//! drift-diffusion–Maxwell system
//!
//! ```text
//! ∂ₜρ + div j = 0,   ∂ₜE − curl B = −j,   ∂ₜB + curl E = 0,
//! div E = ρ,          div B = 0,          j = ρE − ∇ρ,
//! ```
//!
//! posed on a periodic square with ℝ³-valued fields that depend on two space
//! variables. Time stepping is an exponential RK2 scheme in which the heat
//! semigroup, the Maxwell rotation and the linear `∇ρ` current are propagated
//! exactly per Fourier mode; an optional Friedrichs cutoff `J_n` gives the
//! truncated approximation used for convergence studies.

pub mod calibration;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod field;
pub mod grid;
pub mod integrator;
pub mod io;
pub mod littlewood_paley;
pub mod ops;
pub mod presets;
pub mod synth;
pub mod verification;

pub use calibration::Calibration;
pub use config::{CheckName, Preset, RunConfig};
pub use dynamics::{EnergyReport, H1Report, State, Tendency};
pub use error::{ConfigError, DynamicsError, IoError, IntegratorError, SpectralError, VerificationError};
pub use field::{ScalarField, SpectralField, VectorField3};
pub use grid::Grid;
pub use integrator::{Coupling, IntegratorConfig, TrajectoryRecord, TrajectoryRow};
pub use littlewood_paley::{DyadicDecomposition, DyadicFilterBank};
pub use ops::CutoffOperator;
pub use verification::{CheckReport, GrowthConstants};
