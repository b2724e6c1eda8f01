// Stencil and parallel-array updates index by position throughout; the
// iterator forms clippy suggests obscure which neighbors are touched.
#![allow(clippy::needless_range_loop)]

//! Incompressible flow of water-saturated granular material whose yield
//! stress is activated by the gap between lithostatic and pore pressure.
//!
//! The crate is organized in layers: pointwise constitutive maps
//! ([`rheology`]), staggered-grid containers and difference operators
//! ([`fields`]), the time stepper ([`solver`]), diagnostic machinery
//! ([`analysis`]), canned simulation setups ([`scenarios`]) and the
//! runnable property suite ([`verify`]).

pub mod analysis;
pub mod fields;
pub mod rheology;
pub mod scenarios;
pub mod solver;
pub mod tensor;
pub mod verify;

pub use solver::{SimConfig, SimState};
