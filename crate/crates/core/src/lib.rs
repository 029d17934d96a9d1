//! Modal analysis of dissipative Lagrangian systems with high-loss and lossless parts.

pub mod asymptotics;
pub mod canonical;
pub mod dynamics;
pub mod error;
pub mod examples;
pub mod io;
pub mod linalg;
pub mod model;
pub mod pencil;
pub mod scalar;
pub mod spectral;
pub mod tolerances;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use tolerances::Tolerances;

pub type System = model::LagrangianSystem<f64>;
pub type Canonical = canonical::CanonicalSystem<f64>;
pub type State = model::State<f64>;
pub type Modes = spectral::ModeSet<f64>;
pub type Asymptotics = asymptotics::AsymptoticSpectrum<f64>;
pub type Trajectory = dynamics::Trajectory<f64>;
pub type CMat = scalar::CMat<f64>;
pub type CVec = scalar::CVec<f64>;
pub type RMat = scalar::RMat<f64>;
