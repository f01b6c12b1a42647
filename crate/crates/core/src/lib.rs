//! Semiclassical simulation of a single atom in a bichromatic evanescent-wave
//! cavity trap: the atom moves in the dipole potential of two cavity modes
//! while its position detunes those modes, so the trap itself is dynamic.

pub mod ensemble;
pub mod fields;
mod optimize;
pub mod params;
pub mod sde;

pub use fields::{characterize_trap, FieldError, TrapProfile};
pub use params::{default_paper_params, derive, DerivedParams, Mode, PhysicalParams, TrapModel};
pub use sde::{NoiseCovariance, SdeError, SystemState};
