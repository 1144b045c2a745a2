//! Robust rendezvous controller synthesis for near-circular reference orbits.
//!
//! The core is generic over the scalar type ([`Real`], implemented for `f32`
//! and `f64`); the `*64` aliases below cover the usual double-precision use.

pub mod dynamics;
pub mod error;
pub mod lmi;
pub mod scalar;
pub mod sdp;
pub mod simulator;
pub mod synthesis;

pub use error::{Error, Result};
pub use scalar::Real;

pub type OrbitConfig64 = dynamics::OrbitConfig<f64>;
pub type ChaserConfig64 = dynamics::ChaserConfig<f64>;
pub type PlantModel64 = dynamics::PlantModel<f64>;
pub type InPlaneModel64 = dynamics::InPlaneModel<f64>;
pub type OutOfPlaneModel64 = dynamics::OutOfPlaneModel<f64>;
pub type OrbitConfig32 = dynamics::OrbitConfig<f32>;
pub type PlantModel32 = dynamics::PlantModel<f32>;
pub type Trajectory64 = simulator::Trajectory<f64>;
pub type SimConfig64 = simulator::SimConfig<f64>;
