//! Solid-mesh operators on the current configuration: density-contrast mass,
//! linearized stress tangent, and the explicit solid load.

use nalgebra::Matrix2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::p1_gradients;
use crate::error::{check_len, FsiError, Result};
use crate::mesh::SolidMesh;
use crate::quadrature::QuadratureRule;
use crate::solid_state::element_velocity_gradient;
use crate::sparse::{SparseOperator, TripletBuilder};

/// How the lower off-diagonal block of the solid tangent is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TangentForm {
    /// `K₂₁ = K₁₂ᵀ`.
    #[default]
    Transposed,
    /// Every block from the full linearization (nonsymmetric once `uⁿ` or `τ` is nonzero).
    Consistent,
}

/// Per-element stress history and velocity gradient of the previous step.
#[derive(Debug, Clone)]
pub struct SolidStressField {
    pub stress: Vec<Matrix2<f64>>,
    /// `∂uⁿ/∂x` on the current coordinates.
    pub velocity_gradient: Vec<Matrix2<f64>>,
}

impl SolidStressField {
    pub fn new(solid: &SolidMesh, u_s: &[f64]) -> Result<Self> {
        Ok(SolidStressField {
            stress: solid.stress().to_vec(),
            velocity_gradient: element_velocity_gradient(solid, u_s)?,
        })
    }

    pub fn at_rest(solid: &SolidMesh) -> Self {
        SolidStressField {
            stress: vec![Matrix2::zeros(); solid.n_elements()],
            velocity_gradient: vec![Matrix2::zeros(); solid.n_elements()],
        }
    }

    fn check(&self, solid: &SolidMesh) -> Result<()> {
        check_len("stress field", solid.n_elements(), self.stress.len())?;
        check_len("velocity gradient field", solid.n_elements(), self.velocity_gradient.len())
    }
}

fn element_gradients(solid: &SolidMesh, e: usize) -> Result<([[f64; 2]; 3], f64)> {
    let (g, area) = p1_gradients(solid.element_points(e));
    if !(area > 0.0) {
        return Err(FsiError::DegenerateElement { element: e, area });
    }
    Ok((g, area))
}

/// `(ρs − ρf)·diag(M₁₁ˢ, M₂₂ˢ)` on the current configuration.
pub fn assemble_solid_mass(solid: &SolidMesh, rho_s: f64, rho_f: f64) -> Result<SparseOperator> {
    let n = solid.n_nodes();
    let contrast = rho_s - rho_f;
    let rule = QuadratureRule::triangle_degree2();
    let mut tb = TripletBuilder::with_capacity(2 * n, 2 * n, 18 * solid.n_elements());
    if contrast == 0.0 {
        return Ok(tb.build(true));
    }
    for (e, tri) in solid.triangles().iter().enumerate() {
        let (_, area) = element_gradients(solid, e)?;
        let mut local = [[0.0; 3]; 3];
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let phi = [1.0 - p[0] - p[1], p[0], p[1]];
            for a in 0..3 {
                for b in 0..3 {
                    local[a][b] += 2.0 * area * w * phi[a] * phi[b];
                }
            }
        }
        for a in 0..3 {
            for b in 0..3 {
                let v = contrast * local[a][b];
                tb.push(tri[a], tri[b], v);
                tb.push(n + tri[a], n + tri[b], v);
            }
        }
    }
    Ok(tb.build(true))
}

/// Bilinear form of the linearized stress for trial gradient `g` and test gradient `v`.
#[inline]
fn tangent_form(g: &Matrix2<f64>, v: &Matrix2<f64>, h: &Matrix2<f64>, tau: &Matrix2<f64>, mu_s: f64, dt: f64) -> f64 {
    let gt = g.transpose();
    let ht = h.transpose();
    let t = mu_s * dt * (g + gt + dt * (g * ht + h * gt)) + dt * dt * (g * tau * ht + h * tau * gt) + dt * (g * tau + tau * gt);
    t.component_mul(v).sum()
}

fn outer(comp: usize, grad: [f64; 2]) -> Matrix2<f64> {
    let mut m = Matrix2::zeros();
    m[(comp, 0)] = grad[0];
    m[(comp, 1)] = grad[1];
    m
}

/// Local 6×6 tangent, index `3·comp + node`; rows test, columns trial.
pub(crate) fn local_tangent(
    grads: &[[f64; 2]; 3],
    area: f64,
    h: &Matrix2<f64>,
    tau: &Matrix2<f64>,
    mu_s: f64,
    dt: f64,
    form: TangentForm,
) -> [[f64; 6]; 6] {
    let mut k = [[0.0; 6]; 6];
    for i in 0..2 {
        for m in 0..3 {
            let v = outer(i, grads[m]);
            for c in 0..2 {
                if form == TangentForm::Transposed && (i, c) == (1, 0) {
                    continue;
                }
                for b in 0..3 {
                    let g = outer(c, grads[b]);
                    k[3 * i + m][3 * c + b] = area * tangent_form(&g, &v, h, tau, mu_s, dt);
                }
            }
        }
    }
    if form == TangentForm::Transposed {
        for m in 0..3 {
            for b in 0..3 {
                k[3 + m][b] = k[b][3 + m];
            }
        }
    }
    k
}

/// Linearized solid stress operator `Kˢ` (not symmetric in general).
pub fn assemble_solid_tangent(
    solid: &SolidMesh,
    field: &SolidStressField,
    mu_s: f64,
    dt: f64,
    form: TangentForm,
) -> Result<SparseOperator> {
    field.check(solid)?;
    let n = solid.n_nodes();
    let locals: Vec<[[f64; 6]; 6]> = (0..solid.n_elements())
        .into_par_iter()
        .map(|e| {
            let (grads, area) = element_gradients(solid, e)?;
            Ok(local_tangent(
                &grads,
                area,
                &field.velocity_gradient[e],
                &field.stress[e],
                mu_s,
                dt,
                form,
            ))
        })
        .collect::<Result<_>>()?;
    let mut tb = TripletBuilder::with_capacity(2 * n, 2 * n, 36 * locals.len());
    for (tri, k) in solid.triangles().iter().zip(&locals) {
        for r in 0..6 {
            for s in 0..6 {
                tb.push((r / 3) * n + tri[r % 3], (s / 3) * n + tri[s % 3], k[r][s]);
            }
        }
    }
    let symmetric = field.velocity_gradient.iter().all(|h| h.amax() == 0.0) && field.stress.iter().all(|t| t.amax() == 0.0);
    Ok(tb.build(symmetric))
}

/// Explicit solid load `fˢ`: density-contrast gravity plus the stress-history terms.
pub fn assemble_solid_load(
    solid: &SolidMesh,
    field: &SolidStressField,
    rho_s: f64,
    rho_f: f64,
    mu_s: f64,
    dt: f64,
    g: [f64; 2],
) -> Result<Vec<f64>> {
    field.check(solid)?;
    let n = solid.n_nodes();
    let contrast = rho_s - rho_f;
    let mut out = vec![0.0; 2 * n];
    for (e, tri) in solid.triangles().iter().enumerate() {
        let (grads, area) = element_gradients(solid, e)?;
        let h = &field.velocity_gradient[e];
        let tau = &field.stress[e];
        let s = mu_s * dt * dt * h * h.transpose() + dt * dt * h * tau * h.transpose() - tau;
        for (k, &node) in tri.iter().enumerate() {
            for i in 0..2 {
                let body = contrast * g[i] * area / 3.0;
                let stress = area * (s[(i, 0)] * grads[k][0] + s[(i, 1)] * grads[k][1]);
                out[i * n + node] += body + stress;
            }
        }
    }
    Ok(out)
}
