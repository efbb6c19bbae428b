//! Element integration and global assembly of all system operators and loads.

pub mod fluid;
pub mod solid;

pub use fluid::{
    assemble_body_force, assemble_divergence, assemble_fluid_mass, assemble_fluid_stiffness, assemble_gravity,
    assemble_pressure_laplacian, assemble_pressure_mass, assemble_scalar_mass, assemble_traction,
};
pub use solid::{
    assemble_solid_load, assemble_solid_mass, assemble_solid_tangent, SolidStressField, TangentForm,
};

use crate::error::Result;
use crate::mesh::{FluidMesh, Side, SolidMesh};

/// Material and loading data entering `f` and `fˢ`.
#[derive(Debug, Clone, Copy)]
pub struct LoadParameters {
    pub rho_f: f64,
    pub rho_s: f64,
    pub mu_s: f64,
    pub dt: f64,
    pub gravity: [f64; 2],
}

/// Fluid load `f` (gravity plus Neumann traction on `neumann_sides`) and solid load `fˢ`.
pub fn assemble_loads(
    mesh: &FluidMesh,
    solid: Option<(&SolidMesh, &SolidStressField)>,
    params: &LoadParameters,
    neumann_sides: &[Side],
    traction: impl Fn(Side, [f64; 2]) -> [f64; 2],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut f = assemble_gravity(mesh, params.rho_f, params.gravity);
    let t = assemble_traction(mesh, neumann_sides, traction);
    f.iter_mut().zip(&t).for_each(|(a, b)| *a += b);
    let fs = match solid {
        Some((s, field)) => {
            assemble_solid_load(s, field, params.rho_s, params.rho_f, params.mu_s, params.dt, params.gravity)?
        }
        None => Vec::new(),
    };
    Ok((f, fs))
}
