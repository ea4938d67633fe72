//! Position-error-bound (PEB) evaluation and spatial signal design for
//! mmWave downlink positioning with a ULA at the base station and a UCA at
//! the user equipment.
//!
//! The crate is organised bottom-up:
//!
//! * [`arrays`]: steering vectors, derivative beams, unit-modulus projection
//!   and beampatterns.
//! * [`geometry`]: scenario geometry, per-path channel parameters and the
//!   OFDM channel with its analytic derivatives.
//! * [`fisher`]: channel- and position-domain Fisher information, the clock
//!   prior and the PEB.
//! * [`design`]: semidefinite precoder design (perfect knowledge, reduced
//!   subspace form, worst case over an uncertainty grid) and precoder
//!   recovery.
//! * [`codebook`]: sum/difference codebooks, beam power allocation and time
//!   sharing.
//!
//! Array and geometry code is generic over the real scalar type; the
//! optimisation layers work in `f64`.

pub mod arrays;
pub mod codebook;
pub mod design;
mod error;
pub mod fisher;
pub mod geometry;
pub mod hermitian;
mod scalar;

pub use conic::{Settings as SolverSettings, Status as SolverStatus};
pub use error::Error;
pub use scalar::Real;

/// Complex `f64`.
pub type C64 = num_complex::Complex<f64>;

pub type UlaConfig = arrays::UlaConfig<f64>;
pub type UcaConfig = arrays::UcaConfig<f64>;
pub type Arrays = arrays::Arrays<f64>;
pub type Beam = arrays::Beam<f64>;
pub type Scenario = geometry::Scenario<f64>;
pub type OfdmConfig = geometry::OfdmConfig<f64>;
pub type ChannelParams = geometry::ChannelParams<f64>;
pub type PositionParams = geometry::PositionParams<f64>;

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Crate version, echoed in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
