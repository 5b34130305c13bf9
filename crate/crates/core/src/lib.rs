//! Neural output-error modelling of a turbocharged diesel engine and
//! specialized training of a neural speed controller under an exhaust-opacity
//! constraint.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`surrogate`] generates engine logs (pump position, speed, boost
//!    pressure, airflow, fuel flow, opacity) from a deterministic plant.
//! 2. [`sysid`] identifies interconnected MISO output-error networks for
//!    speed, pressure, airflow and opacity, optionally choosing lag orders and
//!    hidden-layer sizes by Final Prediction Error.
//! 3. [`control`] trains a neural controller through the identified model with
//!    a recursive Gauss-Newton update on a speed-plus-opacity criterion.
//! 4. [`closed_loop`] runs controllers against the model or the plant and
//!    extracts tracking and smoke metrics.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the common double-precision instantiations.

pub mod closed_loop;
pub mod config;
pub mod control;
pub mod error;
pub mod linalg;
pub mod neural;
pub mod scalar;
pub mod surrogate;
pub mod sysid;
pub mod textfmt;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Mlp64 = neural::Mlp<f64>;
pub type Mlp32 = neural::Mlp<f32>;
pub type Matrix64 = linalg::Matrix<f64>;
pub type SubModel64 = sysid::SubModel<f64>;
pub type EngineModel64 = sysid::EngineModel<f64>;
pub type EngineModel32 = sysid::EngineModel<f32>;
pub type Controller64 = control::Controller<f64>;
pub type RlsState64 = control::RlsState<f64>;
pub type RlsState32 = control::RlsState<f32>;
