//! Fluid-mesh operators: velocity mass, viscous stiffness, divergence, loads.

use rayon::prelude::*;

use crate::basis::{q1_values, Q2Point};
use crate::mesh::{FluidMesh, Side};
use crate::quadrature::{gauss_legendre, QuadratureRule};
use crate::sparse::{SparseOperator, TripletBuilder};

/// Local Q2 values/gradients at the 3×3 Gauss points of one cell.
pub(crate) fn cell_points(mesh: &FluidMesh, cell: usize, rule: &QuadratureRule) -> Vec<Q2Point> {
    let geom = &mesh.cells()[cell].geometry;
    rule.points
        .iter()
        .zip(&rule.weights)
        .map(|(&xi, &w)| Q2Point::evaluate(geom, xi, w))
        .collect()
}

/// Scatters a local `n_loc × n_loc` scalar matrix on the cell's velocity nodes
/// into free velocity dofs, once per listed component block.
fn scatter_scalar(
    tb: &mut TripletBuilder,
    mesh: &FluidMesh,
    cell: usize,
    local: &[[f64; 9]; 9],
    offsets: &[usize],
) {
    let dofs = mesh.velocity_dofs();
    let vn = &mesh.cells()[cell].velocity_nodes;
    for a in 0..9 {
        for b in 0..9 {
            let v = local[a][b];
            if v == 0.0 {
                continue;
            }
            for &(da, wa) in dofs.expansion(vn[a]) {
                for &(db, wb) in dofs.expansion(vn[b]) {
                    for &off in offsets {
                        tb.push(off + da, off + db, wa * wb * v);
                    }
                }
            }
        }
    }
}

fn local_mass(mesh: &FluidMesh, cell: usize, rule: &QuadratureRule) -> [[f64; 9]; 9] {
    let mut m = [[0.0; 9]; 9];
    for q in cell_points(mesh, cell, rule) {
        for a in 0..9 {
            for b in 0..9 {
                m[a][b] += q.values[a] * q.values[b] * q.jxw;
            }
        }
    }
    m
}

/// Scalar Q2 mass matrix `(φₖ, φₘ)` over free velocity dofs.
pub fn assemble_scalar_mass(mesh: &FluidMesh) -> SparseOperator {
    let rule = QuadratureRule::gauss_quad(3);
    let n = mesh.n_velocity_dofs();
    let locals: Vec<[[f64; 9]; 9]> = (0..mesh.n_cells())
        .into_par_iter()
        .map(|c| local_mass(mesh, c, &rule))
        .collect();
    let mut tb = TripletBuilder::with_capacity(n, n, 81 * locals.len());
    for (c, m) in locals.iter().enumerate() {
        scatter_scalar(&mut tb, mesh, c, m, &[0]);
    }
    tb.build(true)
}

/// Block-diagonal velocity mass `ρf·diag(M₁₁, M₂₂)`.
pub fn assemble_fluid_mass(mesh: &FluidMesh, rho_f: f64) -> SparseOperator {
    let rule = QuadratureRule::gauss_quad(3);
    let n = mesh.n_velocity_dofs();
    let locals: Vec<[[f64; 9]; 9]> = (0..mesh.n_cells())
        .into_par_iter()
        .map(|c| {
            let mut m = local_mass(mesh, c, &rule);
            m.iter_mut().flatten().for_each(|v| *v *= rho_f);
            m
        })
        .collect();
    let mut tb = TripletBuilder::with_capacity(2 * n, 2 * n, 2 * 81 * locals.len());
    for (c, m) in locals.iter().enumerate() {
        scatter_scalar(&mut tb, mesh, c, m, &[0, n]);
    }
    tb.build(true)
}

/// Local 18×18 viscous matrix; index `9·comp + node`, rows test, columns trial.
pub(crate) fn local_stiffness(points: &[Q2Point], mu: f64) -> [[f64; 18]; 18] {
    let mut k = [[0.0; 18]; 18];
    for q in points {
        let g = &q.grads;
        let w = mu * q.jxw;
        for m in 0..9 {
            for b in 0..9 {
                let dot = g[m][0] * g[b][0] + g[m][1] * g[b][1];
                // μ[δ_ic ∇φ_b·∇φ_m + ∂_i φ_b ∂_c φ_m]
                for i in 0..2 {
                    for c in 0..2 {
                        let mut v = g[b][i] * g[m][c];
                        if i == c {
                            v += dot;
                        }
                        k[9 * i + m][9 * c + b] += w * v;
                    }
                }
            }
        }
    }
    k
}

pub(crate) fn scatter_vector_block(tb: &mut TripletBuilder, mesh: &FluidMesh, cell: usize, local: &[[f64; 18]; 18]) {
    let n = mesh.n_velocity_dofs();
    let dofs = mesh.velocity_dofs();
    let vn = &mesh.cells()[cell].velocity_nodes;
    for r in 0..18 {
        let (ir, ar) = (r / 9, r % 9);
        for s in 0..18 {
            let v = local[r][s];
            if v == 0.0 {
                continue;
            }
            let (is, as_) = (s / 9, s % 9);
            for &(da, wa) in dofs.expansion(vn[ar]) {
                for &(db, wb) in dofs.expansion(vn[as_]) {
                    tb.push(ir * n + da, is * n + db, wa * wb * v);
                }
            }
        }
    }
}

/// Viscous operator `μf (∇u + ∇uᵀ) : ∇v` on the whole domain.
pub fn assemble_fluid_stiffness(mesh: &FluidMesh, mu_f: f64) -> SparseOperator {
    let rule = QuadratureRule::gauss_quad(3);
    let n = mesh.n_velocity_dofs();
    let locals: Vec<[[f64; 18]; 18]> = (0..mesh.n_cells())
        .into_par_iter()
        .map(|c| local_stiffness(&cell_points(mesh, c, &rule), mu_f))
        .collect();
    let mut tb = TripletBuilder::with_capacity(2 * n, 2 * n, 324 * locals.len());
    for (c, k) in locals.iter().enumerate() {
        scatter_vector_block(&mut tb, mesh, c, k);
    }
    tb.build(true)
}

/// `B` with `(Bᵢ)ₘₖ = −(ϕₖ, ∂φₘ/∂xᵢ)`: rows velocity dofs `[1; 2]`, columns pressure dofs.
pub fn assemble_divergence(mesh: &FluidMesh) -> SparseOperator {
    let rule = QuadratureRule::gauss_quad(3);
    let n = mesh.n_velocity_dofs();
    let np = mesh.n_pressure_dofs();
    let locals: Vec<[[[f64; 4]; 9]; 2]> = (0..mesh.n_cells())
        .into_par_iter()
        .map(|c| {
            let mut b = [[[0.0; 4]; 9]; 2];
            for (q, xi) in cell_points(mesh, c, &rule).iter().zip(&rule.points) {
                let psi = q1_values(*xi);
                for m in 0..9 {
                    for k in 0..4 {
                        for i in 0..2 {
                            b[i][m][k] -= psi[k] * q.grads[m][i] * q.jxw;
                        }
                    }
                }
            }
            b
        })
        .collect();
    let vd = mesh.velocity_dofs();
    let pd = mesh.pressure_dofs();
    let mut tb = TripletBuilder::with_capacity(2 * n, np, 72 * locals.len());
    for (c, b) in locals.iter().enumerate() {
        let cell = &mesh.cells()[c];
        for i in 0..2 {
            for m in 0..9 {
                for k in 0..4 {
                    let v = b[i][m][k];
                    for &(dm, wm) in vd.expansion(cell.velocity_nodes[m]) {
                        for &(dk, wk) in pd.expansion(cell.pressure_nodes[k]) {
                            tb.push(i * n + dm, dk, wm * wk * v);
                        }
                    }
                }
            }
        }
    }
    tb.build(false)
}

/// Q1 pressure mass matrix over free pressure dofs.
pub fn assemble_pressure_mass(mesh: &FluidMesh) -> SparseOperator {
    assemble_pressure_operator(mesh, |psi, _g, w, a, b| psi[a] * psi[b] * w)
}

/// Q1 pressure Laplacian over free pressure dofs.
pub fn assemble_pressure_laplacian(mesh: &FluidMesh) -> SparseOperator {
    assemble_pressure_operator(mesh, |_psi, g, w, a, b| (g[a][0] * g[b][0] + g[a][1] * g[b][1]) * w)
}

fn assemble_pressure_operator(
    mesh: &FluidMesh,
    kernel: impl Fn(&[f64; 4], &[[f64; 2]; 4], f64, usize, usize) -> f64 + Sync,
) -> SparseOperator {
    let rule = QuadratureRule::gauss_quad(2);
    let np = mesh.n_pressure_dofs();
    let locals: Vec<[[f64; 4]; 4]> = (0..mesh.n_cells())
        .into_par_iter()
        .map(|c| {
            let geom = &mesh.cells()[c].geometry;
            let mut m = [[0.0; 4]; 4];
            for (xi, w) in rule.points.iter().zip(&rule.weights) {
                let j = geom.jacobian(*xi);
                let jinv_t = j.try_inverse().expect("singular cell Jacobian").transpose();
                let gref = crate::basis::q1_gradients(*xi);
                let mut g = [[0.0; 2]; 4];
                for a in 0..4 {
                    let v = jinv_t * nalgebra::Vector2::new(gref[a][0], gref[a][1]);
                    g[a] = [v[0], v[1]];
                }
                let psi = q1_values(*xi);
                let jw = j.determinant() * w;
                for a in 0..4 {
                    for b in 0..4 {
                        m[a][b] += kernel(&psi, &g, jw, a, b);
                    }
                }
            }
            m
        })
        .collect();
    let pd = mesh.pressure_dofs();
    let mut tb = TripletBuilder::with_capacity(np, np, 16 * locals.len());
    for (c, m) in locals.iter().enumerate() {
        let pn = &mesh.cells()[c].pressure_nodes;
        for a in 0..4 {
            for b in 0..4 {
                for &(da, wa) in pd.expansion(pn[a]) {
                    for &(db, wb) in pd.expansion(pn[b]) {
                        tb.push(da, db, wa * wb * m[a][b]);
                    }
                }
            }
        }
    }
    tb.build(true)
}

/// `(f, φₘ)` for a body-force density `f(x)`, block layout.
pub fn assemble_body_force(mesh: &FluidMesh, f: impl Fn([f64; 2]) -> [f64; 2] + Sync) -> Vec<f64> {
    let rule = QuadratureRule::gauss_quad(4);
    let n = mesh.n_velocity_dofs();
    let locals: Vec<[[f64; 9]; 2]> = (0..mesh.n_cells())
        .into_par_iter()
        .map(|c| {
            let mut out = [[0.0; 9]; 2];
            for q in cell_points(mesh, c, &rule) {
                let fv = f(q.x);
                for a in 0..9 {
                    out[0][a] += fv[0] * q.values[a] * q.jxw;
                    out[1][a] += fv[1] * q.values[a] * q.jxw;
                }
            }
            out
        })
        .collect();
    let dofs = mesh.velocity_dofs();
    let mut rhs = vec![0.0; 2 * n];
    for (c, l) in locals.iter().enumerate() {
        for (a, &node) in mesh.cells()[c].velocity_nodes.iter().enumerate() {
            for &(d, w) in dofs.expansion(node) {
                rhs[d] += w * l[0][a];
                rhs[n + d] += w * l[1][a];
            }
        }
    }
    rhs
}

/// `ρf (g, φₘ)` for constant gravity.
pub fn assemble_gravity(mesh: &FluidMesh, rho_f: f64, g: [f64; 2]) -> Vec<f64> {
    if g == [0.0, 0.0] || rho_f == 0.0 {
        return vec![0.0; 2 * mesh.n_velocity_dofs()];
    }
    assemble_body_force(mesh, |_| [rho_f * g[0], rho_f * g[1]])
}

/// `(h̄, φₘ)` over the boundary faces of the listed sides.
pub fn assemble_traction(mesh: &FluidMesh, sides: &[Side], h: impl Fn(Side, [f64; 2]) -> [f64; 2]) -> Vec<f64> {
    let n = mesh.n_velocity_dofs();
    let mut rhs = vec![0.0; 2 * n];
    if sides.is_empty() {
        return rhs;
    }
    let (pts, wts) = gauss_legendre(3);
    let dofs = mesh.velocity_dofs();
    let nodes = mesh.nodes();
    for face in mesh.boundary_faces() {
        if !sides.contains(&face.side) {
            continue;
        }
        let x0 = nodes[face.nodes[0]];
        let x1 = nodes[face.nodes[2]];
        let half_len = 0.5 * ((x1[0] - x0[0]).powi(2) + (x1[1] - x0[1]).powi(2)).sqrt();
        for (&s, &w) in pts.iter().zip(&wts) {
            let l = [0.5 * s * (s - 1.0), 1.0 - s * s, 0.5 * s * (s + 1.0)];
            let x = [
                0.5 * (1.0 - s) * x0[0] + 0.5 * (1.0 + s) * x1[0],
                0.5 * (1.0 - s) * x0[1] + 0.5 * (1.0 + s) * x1[1],
            ];
            let hv = h(face.side, x);
            for k in 0..3 {
                for &(d, wd) in dofs.expansion(face.nodes[k]) {
                    rhs[d] += wd * hv[0] * l[k] * w * half_len;
                    rhs[n + d] += wd * hv[1] * l[k] * w * half_len;
                }
            }
        }
    }
    rhs
}
