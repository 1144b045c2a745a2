//! Reference-orbit constants, orbital rate terms and the linearized
//! relative-motion plant with its in-plane / out-of-plane split.
//!
//! Everything here is SI: metres, seconds, kilograms, newtons.

mod kepler;
mod orbit;
mod plant;

pub use kepler::solve_kepler;
pub use orbit::{
    exact_orbital_terms, mean_motion, nonlinear_system_matrix, truncated_orbital_terms,
    ChaserConfig, OrbitConfig, OrbitalTerms, RelativeState, EARTH_MU,
};
pub use plant::{
    build_plant, split_in_plane, split_out_of_plane, InPlaneModel, OutOfPlaneModel, PlantModel,
    IN_PLANE_INDICES, OUT_OF_PLANE_INDICES,
};
