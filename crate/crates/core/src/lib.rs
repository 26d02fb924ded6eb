//! Multi-fidelity Bayesian optimisation of coiled-tube reactors.
//!
//! Geometry generation, a fast flow surrogate, residence-time fitting and the
//! optimisation loop. The Gaussian-process and residence-time code is generic
//! over [`Real`]; the aliases below fix the precision.

pub mod analysis;
pub mod evaluator;
pub mod geometry;
pub mod gp;
pub mod interface;
pub mod mfbo;
pub mod optim;
pub mod rtd;
pub mod scalar;
pub mod surrogate;

pub use scalar::Real;

pub type GpModel64 = gp::GpModel<f64>;
pub type GpModel32 = gp::GpModel<f32>;
pub type KernelSpec64 = gp::KernelSpec<f64>;
pub type KernelSpec32 = gp::KernelSpec<f32>;
pub type FittedGp64 = gp::FittedGp<f64>;
pub type FittedGp32 = gp::FittedGp<f32>;
pub type Posterior64 = gp::Posterior<f64>;
pub type RtdCurve64 = rtd::RtdCurve<f64>;
pub type RtdCurve32 = rtd::RtdCurve<f32>;
pub type TanksFit64 = rtd::TanksFit<f64>;
pub type TanksFit32 = rtd::TanksFit<f32>;
