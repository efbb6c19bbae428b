//! Fluid (quadtree Q2/Q1) and solid (P1 triangle) meshes.

pub mod fluid;
pub mod solid;

pub use fluid::{BoundaryFace, DofMap, FluidCell, FluidMesh, LeafKey, Rect, Side};
pub use solid::SolidMesh;
