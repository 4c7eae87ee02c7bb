//! Displacement sequences of circle homeomorphisms.
//!
//! A map is given by a degree-one lift ([`Lift`]). From it the crate
//! computes orbits, displacement sequences and rotation numbers, the
//! periodic-orbit structure for rational rotation numbers, and the
//! displacement distribution for irrational ones. [`ifm`] builds lifts from
//! integrate-and-fire models, whose displacement sequences are interspike
//! intervals.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod ifm;
pub mod maps;
pub mod measures;
pub mod numerics;
pub mod orbits;
pub mod rational;
pub mod report;

pub use error::{Error, Result};
pub use maps::{lift_inverse, make_arnold, make_conjugated, make_rotation, make_unit_graph, Lift, MapSpec, UnitGraph};
pub use orbits::{displacement_sequence, iterate, rotation_number, Direction, DisplacementSeries, Orbit};
