//! Updated-Lagrangian solid state: velocity gradients, stress history, deformation.

use nalgebra::Matrix2;
use rayon::prelude::*;

use crate::basis::p1_gradients;
use crate::error::{check_len, FsiError, Result};
use crate::mesh::SolidMesh;

/// Inputs of one incremental stress update.
#[derive(Debug, Clone)]
pub struct StressUpdateInputs<'a> {
    /// `Gᵢⱼ = ∂uᵢⁿ⁺¹/∂xⱼⁿ` per element.
    pub velocity_gradient: &'a [Matrix2<f64>],
    pub previous: &'a [Matrix2<f64>],
    pub mu_s: f64,
    pub dt: f64,
}

fn asymmetry(t: &Matrix2<f64>) -> f64 {
    (t[(0, 1)] - t[(1, 0)]).abs()
}

/// One-element update
/// `τ' = μsΔt(G + Gᵀ + ΔtGGᵀ) + τ + Δt²GτGᵀ + ΔtGτ + ΔtτGᵀ`.
pub fn update_element_stress(tau: &Matrix2<f64>, g: &Matrix2<f64>, mu_s: f64, dt: f64) -> Matrix2<f64> {
    let gt = g.transpose();
    let mut out = mu_s * dt * (g + gt + dt * g * gt) + tau + dt * dt * g * tau * gt + dt * (g * tau + tau * gt);
    // exact arithmetic gives a symmetric result; remove rounding asymmetry
    let off = 0.5 * (out[(0, 1)] + out[(1, 0)]);
    out[(0, 1)] = off;
    out[(1, 0)] = off;
    out
}

pub fn update_stress(inputs: &StressUpdateInputs<'_>) -> Result<Vec<Matrix2<f64>>> {
    check_len("stress update", inputs.previous.len(), inputs.velocity_gradient.len())?;
    for (e, t) in inputs.previous.iter().enumerate() {
        let a = asymmetry(t);
        if a > 1e-10 * (1.0 + t.amax()) {
            return Err(FsiError::AsymmetricStress { element: e, asymmetry: a });
        }
    }
    Ok(inputs
        .previous
        .par_iter()
        .zip(inputs.velocity_gradient.par_iter())
        .map(|(t, g)| update_element_stress(t, g, inputs.mu_s, inputs.dt))
        .collect())
}

/// Per-element `Gᵢⱼ = ∂uᵢ/∂xⱼ` of a nodal field (block layout) on the current coordinates.
pub fn element_velocity_gradient(solid: &SolidMesh, u_s: &[f64]) -> Result<Vec<Matrix2<f64>>> {
    let n = solid.n_nodes();
    check_len("solid velocity", 2 * n, u_s.len())?;
    (0..solid.n_elements())
        .into_par_iter()
        .map(|e| {
            let (grads, area) = p1_gradients(solid.element_points(e));
            if !(area > 0.0) {
                return Err(FsiError::DegenerateElement { element: e, area });
            }
            let tri = solid.triangles()[e];
            let mut g = Matrix2::zeros();
            for (k, &node) in tri.iter().enumerate() {
                for j in 0..2 {
                    g[(0, j)] += u_s[node] * grads[k][j];
                    g[(1, j)] += u_s[n + node] * grads[k][j];
                }
            }
            Ok(g)
        })
        .collect()
}

/// Per-element deformation gradient `F = ∂x/∂X` from reference and current coordinates.
pub fn accumulate_deformation(solid: &SolidMesh) -> Result<Vec<Matrix2<f64>>> {
    (0..solid.n_elements())
        .into_par_iter()
        .map(|e| {
            let (grads, area) = p1_gradients(solid.reference_points(e));
            if !(area > 0.0) {
                return Err(FsiError::DegenerateElement { element: e, area });
            }
            let x = solid.element_points(e);
            let mut f = Matrix2::zeros();
            for k in 0..3 {
                for i in 0..2 {
                    for j in 0..2 {
                        f[(i, j)] += x[k][i] * grads[k][j];
                    }
                }
            }
            Ok(f)
        })
        .collect()
}

/// Largest `|det F − 1|` over elements.
pub fn incompressibility_drift(f: &[Matrix2<f64>]) -> f64 {
    f.iter().map(|m| (m.determinant() - 1.0).abs()).fold(0.0, f64::max)
}
