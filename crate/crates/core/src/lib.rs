#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod basis;
pub mod convection;
pub mod coupled_solve;
pub mod coupling;
pub mod diagnostics;
pub mod error;
pub mod linalg;
pub mod mesh;
pub mod quadrature;
pub mod simulation;
pub mod solid_state;
pub mod vtk;
pub mod sparse;

pub use error::{FsiError, Result};
pub use mesh::{FluidMesh, Rect, Side, SolidMesh};
pub use sparse::{SparseOperator, TripletBuilder};
