//! Pure-convection substep `u* + Δt u*·∇u* = uⁿ` producing the intermediate velocity.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::fluid::{cell_points, scatter_vector_block};
use crate::error::{check_len, Result};
use crate::linalg::{conjugate_gradient, eliminate_dirichlet};
use crate::mesh::FluidMesh;
use crate::quadrature::QuadratureRule;
use crate::sparse::{norm2, SparseOperator, TripletBuilder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvectionScheme {
    #[default]
    LeastSquares,
    TaylorGalerkin,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct ConvectionOptions {
    pub scheme: ConvectionScheme,
    /// Linearizations per step for the least-squares scheme (1 = one-shot).
    pub max_fixed_point: usize,
    pub fixed_point_tol: f64,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    /// Weight of the `Δt²/2` stabilization in the Taylor–Galerkin scheme (1 = standard).
    pub tg_stabilization: f64,
}

impl Default for ConvectionOptions {
    fn default() -> Self {
        ConvectionOptions {
            scheme: ConvectionScheme::LeastSquares,
            max_fixed_point: 1,
            fixed_point_tol: 1e-8,
            cg_tol: 1e-10,
            cg_max_iter: 5000,
            tg_stabilization: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConvectionResult {
    pub u_star: Vec<f64>,
    pub cg_iterations: usize,
    pub fixed_point_iterations: usize,
}

/// Velocity and its gradient (`grad[i][j] = ∂uᵢ/∂xⱼ`) at the points of one cell.
fn field_at_points(mesh: &FluidMesh, cell: usize, u: &[f64], pts: &[crate::basis::Q2Point]) -> Vec<([f64; 2], [[f64; 2]; 2])> {
    let n = mesh.n_velocity_dofs();
    let c0 = mesh.cell_values(cell, &u[..n]);
    let c1 = mesh.cell_values(cell, &u[n..]);
    pts.iter()
        .map(|q| {
            let mut v = [0.0; 2];
            let mut g = [[0.0; 2]; 2];
            for a in 0..9 {
                v[0] += c0[a] * q.values[a];
                v[1] += c1[a] * q.values[a];
                for j in 0..2 {
                    g[0][j] += c0[a] * q.grads[a][j];
                    g[1][j] += c1[a] * q.grads[a][j];
                }
            }
            (v, g)
        })
        .collect()
}

/// Least-squares system linearized about `w`: `(L(u*), L(v)) = (uⁿ + Δt w·∇w, L(v))`
/// with `L(v) = v + Δt(v·∇w + w·∇v)`.
fn least_squares_system(mesh: &FluidMesh, u_n: &[f64], w: &[f64], dt: f64) -> (SparseOperator, Vec<f64>) {
    let rule = QuadratureRule::gauss_quad(4);
    let n = mesh.n_velocity_dofs();
    let locals: Vec<([[f64; 18]; 18], [f64; 18])> = (0..mesh.n_cells())
        .into_par_iter()
        .map(|c| {
            let pts = cell_points(mesh, c, &rule);
            let wf = field_at_points(mesh, c, w, &pts);
            let un = field_at_points(mesh, c, u_n, &pts);
            let mut k = [[0.0; 18]; 18];
            let mut f = [0.0; 18];
            for (q, ((wv, wg), (unv, _))) in pts.iter().zip(wf.iter().zip(&un)) {
                // L(φ_a e_c) as a vector, index 9c + a
                let mut l = [[0.0; 2]; 18];
                for a in 0..9 {
                    let adv = q.values[a] + dt * (wv[0] * q.grads[a][0] + wv[1] * q.grads[a][1]);
                    for c in 0..2 {
                        let col = &mut l[9 * c + a];
                        col[c] += adv;
                        col[0] += dt * q.values[a] * wg[0][c];
                        col[1] += dt * q.values[a] * wg[1][c];
                    }
                }
                let r = [
                    unv[0] + dt * (wv[0] * wg[0][0] + wv[1] * wg[0][1]),
                    unv[1] + dt * (wv[0] * wg[1][0] + wv[1] * wg[1][1]),
                ];
                for s in 0..18 {
                    f[s] += (r[0] * l[s][0] + r[1] * l[s][1]) * q.jxw;
                    for t in s..18 {
                        k[s][t] += (l[s][0] * l[t][0] + l[s][1] * l[t][1]) * q.jxw;
                    }
                }
            }
            for s in 0..18 {
                for t in 0..s {
                    k[s][t] = k[t][s];
                }
            }
            (k, f)
        })
        .collect();
    let mut tb = TripletBuilder::with_capacity(2 * n, 2 * n, 324 * locals.len());
    let mut rhs = vec![0.0; 2 * n];
    let dofs = mesh.velocity_dofs();
    for (c, (k, f)) in locals.iter().enumerate() {
        scatter_vector_block(&mut tb, mesh, c, k);
        for (a, &node) in mesh.cells()[c].velocity_nodes.iter().enumerate() {
            for &(d, wd) in dofs.expansion(node) {
                rhs[d] += wd * f[a];
                rhs[n + d] += wd * f[9 + a];
            }
        }
    }
    (tb.build(true), rhs)
}

/// Least-squares convection step; `fixed` lists prescribed `(dof, value)` pairs at tⁿ⁺¹.
pub fn least_squares_step(
    mesh: &FluidMesh,
    u_n: &[f64],
    dt: f64,
    fixed: &[(usize, f64)],
    opts: &ConvectionOptions,
) -> Result<ConvectionResult> {
    check_len("velocity", 2 * mesh.n_velocity_dofs(), u_n.len())?;
    let mut w = u_n.to_vec();
    let mut cg_iterations = 0;
    let mut fp = 0;
    for _ in 0..opts.max_fixed_point.max(1) {
        let (a, mut b) = least_squares_system(mesh, u_n, &w, dt);
        let a = eliminate_dirichlet(&a, &mut b, fixed);
        let sol = conjugate_gradient(&a, &b, Some(&w), opts.cg_tol, opts.cg_max_iter)?;
        cg_iterations += sol.iterations;
        fp += 1;
        let diff: f64 = sol.x.iter().zip(&w).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        let scale = norm2(&sol.x);
        w = sol.x;
        if diff <= opts.fixed_point_tol * scale.max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Ok(ConvectionResult {
        u_star: w,
        cg_iterations,
        fixed_point_iterations: fp,
    })
}

/// Right side of the Taylor–Galerkin step:
/// `(uⁿ − Δt uⁿ·∇uⁿ, v) − s·(Δt²/2)(uⁿ·∇uⁿᵢ, uⁿ·∇vᵢ)`.
pub fn taylor_galerkin_rhs(mesh: &FluidMesh, u_n: &[f64], dt: f64, stabilization: f64) -> Vec<f64> {
    let rule = QuadratureRule::gauss_quad(4);
    let n = mesh.n_velocity_dofs();
    let locals: Vec<[f64; 18]> = (0..mesh.n_cells())
        .into_par_iter()
        .map(|c| {
            let pts = cell_points(mesh, c, &rule);
            let un = field_at_points(mesh, c, u_n, &pts);
            let mut f = [0.0; 18];
            for (q, (v, g)) in pts.iter().zip(&un) {
                let adv = [v[0] * g[0][0] + v[1] * g[0][1], v[0] * g[1][0] + v[1] * g[1][1]];
                for a in 0..9 {
                    let ugrad = v[0] * q.grads[a][0] + v[1] * q.grads[a][1];
                    for i in 0..2 {
                        f[9 * i + a] += ((v[i] - dt * adv[i]) * q.values[a]
                            - stabilization * 0.5 * dt * dt * adv[i] * ugrad)
                            * q.jxw;
                    }
                }
            }
            f
        })
        .collect();
    let dofs = mesh.velocity_dofs();
    let mut rhs = vec![0.0; 2 * n];
    for (c, f) in locals.iter().enumerate() {
        for (a, &node) in mesh.cells()[c].velocity_nodes.iter().enumerate() {
            for &(d, wd) in dofs.expansion(node) {
                rhs[d] += wd * f[a];
                rhs[n + d] += wd * f[9 + a];
            }
        }
    }
    rhs
}

/// Taylor–Galerkin convection step; `mass` is the scalar Q2 mass matrix.
pub fn taylor_galerkin_step(
    mesh: &FluidMesh,
    mass: &SparseOperator,
    u_n: &[f64],
    dt: f64,
    fixed: &[(usize, f64)],
    opts: &ConvectionOptions,
) -> Result<ConvectionResult> {
    let n = mesh.n_velocity_dofs();
    check_len("velocity", 2 * n, u_n.len())?;
    check_len("scalar mass", n, mass.nrows())?;
    let rhs = taylor_galerkin_rhs(mesh, u_n, dt, opts.tg_stabilization);
    let mut u_star = vec![0.0; 2 * n];
    let mut cg_iterations = 0;
    for comp in 0..2 {
        let range = comp * n..(comp + 1) * n;
        let mut b = rhs[range.clone()].to_vec();
        let fixed_c: Vec<(usize, f64)> = fixed
            .iter()
            .filter(|(d, _)| range.contains(d))
            .map(|&(d, v)| (d - comp * n, v))
            .collect();
        let a = eliminate_dirichlet(mass, &mut b, &fixed_c);
        let sol = conjugate_gradient(&a, &b, Some(&u_n[range.clone()]), opts.cg_tol, opts.cg_max_iter)?;
        cg_iterations += sol.iterations;
        u_star[range].copy_from_slice(&sol.x);
    }
    Ok(ConvectionResult {
        u_star,
        cg_iterations,
        fixed_point_iterations: 1,
    })
}

/// Dispatches on the configured scheme.
pub fn convection_step(
    mesh: &FluidMesh,
    mass: &SparseOperator,
    u_n: &[f64],
    dt: f64,
    fixed: &[(usize, f64)],
    opts: &ConvectionOptions,
) -> Result<ConvectionResult> {
    match opts.scheme {
        ConvectionScheme::LeastSquares => least_squares_step(mesh, u_n, dt, fixed, opts),
        ConvectionScheme::TaylorGalerkin => taylor_galerkin_step(mesh, mass, u_n, dt, fixed, opts),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::assemble_scalar_mass;
    use crate::mesh::Rect;

    fn mesh() -> FluidMesh {
        FluidMesh::structured(Rect::new(0.0, 0.0, 1.0, 1.0), 4, 4)
            .unwrap()
            .refine_cells(&[(0, 1, 2)])
            .unwrap()
    }

    #[test]
    fn zero_and_constant_fields_are_fixed_points() {
        let m = mesh();
        let mass = assemble_scalar_mass(&m);
        for scheme in [ConvectionScheme::LeastSquares, ConvectionScheme::TaylorGalerkin] {
            let opts = ConvectionOptions { scheme, ..Default::default() };
            let z = vec![0.0; 2 * m.n_velocity_dofs()];
            let r = convection_step(&m, &mass, &z, 0.1, &[], &opts).unwrap();
            assert!(r.u_star.iter().all(|v| *v == 0.0));
            let c = m.interpolate_velocity(|_| [0.7, -1.1]);
            let r = convection_step(&m, &mass, &c, 0.1, &[], &opts).unwrap();
            for (a, b) in r.u_star.iter().zip(&c) {
                assert!((a - b).abs() < 1e-8, "{scheme:?}");
            }
        }
    }

    #[test]
    fn profiles_move_downstream() {
        let m = FluidMesh::structured(Rect::new(0.0, 0.0, 1.0, 1.0), 16, 4).unwrap();
        let mass = assemble_scalar_mass(&m);
        let (c, dt) = (1.0, 0.01);
        let g = |x: f64| (2.0 * std::f64::consts::PI * x).sin();
        let u = m.interpolate_velocity(|x| [c, g(x[0])]);
        let down = m.interpolate_velocity(|x| [c, g(x[0] - c * dt)]);
        let up = m.interpolate_velocity(|x| [c, g(x[0] + c * dt)]);
        let n = m.n_velocity_dofs();
        for scheme in [ConvectionScheme::LeastSquares, ConvectionScheme::TaylorGalerkin] {
            let opts = ConvectionOptions { scheme, ..Default::default() };
            let r = convection_step(&m, &mass, &u, dt, &[], &opts).unwrap();
            let err = |target: &[f64]| {
                (0..n)
                    .filter(|&d| {
                        let x = m.nodes()[m.velocity_dofs().node_of(d)][0];
                        x > 0.2 && x < 0.8
                    })
                    .map(|d| (r.u_star[n + d] - target[n + d]).abs())
                    .fold(0.0, f64::max)
            };
            let (e_down, e_up) = (err(&down), err(&up));
            assert!(e_down < 0.1 * e_up, "{scheme:?}: {e_down:e} vs {e_up:e}");
        }
    }

    #[test]
    fn least_squares_matrix_is_spd() {
        let m = mesh();
        let u = m.interpolate_velocity(|x| [x[1] * (1.0 - x[1]), 0.3 * x[0]]);
        let (a, _) = least_squares_system(&m, &u, &u, 0.05);
        assert!(a.symmetry_error() <= 1e-12 * a.max_abs());
        assert!(a.diagonal().iter().all(|d| *d > 0.0));
    }
}
