//! Vertical light rays in periodic arrays of Eaton lenses and in their flat
//! slit model: lattice geometry, exact `SL(2,Z)` machinery for periodic
//! examples, band-direction prediction, event-driven ray tracing and
//! confinement diagnostics.

pub mod analysis;
pub mod lattice;
pub mod predictor;
pub mod raytrace;
pub mod sl2;
pub mod verify;

pub use lattice::{Lattice2, PositiveBasis, TileIndex, Vec2};
pub use sl2::{GenWord, Mat2, TorusPoint, PSL2Z, SL2Z};
