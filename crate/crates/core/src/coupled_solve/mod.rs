//! Monolithic diffusion/coupling step: the saddle-point system
//! `[[A, B], [Bᵀ, 0]] (u, p) = (b, 0)` with
//! `A = M/Δt + K + Dᵀ(Mˢ/Δt + Kˢ)D` and
//! `b = f + Dᵀfˢ + M u*/Δt + DᵀMˢ(uˢ)ⁿ/Δt`.

pub mod boundary;

use std::io::Write;

use faer::prelude::*;
use faer::sparse::linalg::solvers::Lu;
use faer::Col;
use serde::{Deserialize, Serialize};

pub use boundary::{BoundaryConditions, ScalarExpr, SideCondition};

use crate::assembly::{
    assemble_divergence, assemble_fluid_mass, assemble_fluid_stiffness, assemble_pressure_laplacian,
    assemble_pressure_mass, assemble_scalar_mass, assemble_solid_load, assemble_solid_mass, assemble_solid_tangent,
    SolidStressField, TangentForm,
};
use crate::coupling::CouplingMatrix;
use crate::error::{check_len, FsiError, Result};
use crate::linalg::{eliminate_dirichlet, fgmres, SignedLdlt};
use crate::mesh::{FluidMesh, SolidMesh};
use crate::sparse::{norm2, SparseOperator, TripletBuilder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    #[default]
    Direct,
    Krylov,
}

/// Factorization behind the direct solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Factorization {
    /// Regularized `LDLᵀ` of the symmetric part, corrected by FGMRES on the
    /// exact system; falls back to LU if the correction stalls.
    #[default]
    Ldlt,
    /// Pivoted sparse LU with iterative refinement.
    Lu,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub solver: SolverKind,
    pub factorization: Factorization,
    pub krylov_tol: f64,
    pub max_iters: usize,
    pub restart: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            solver: SolverKind::Direct,
            factorization: Factorization::Ldlt,
            krylov_tol: 1e-10,
            max_iters: 2000,
            restart: 200,
        }
    }
}

/// Mesh-only fluid operators, reused until the mesh changes.
#[derive(Debug, Clone)]
pub struct FluidOperators {
    pub rho_f: f64,
    pub mu_f: f64,
    pub dt: f64,
    /// `ρf·diag(M₁₁, M₂₂)`
    pub mass: SparseOperator,
    pub stiffness: SparseOperator,
    pub divergence: SparseOperator,
    /// Scalar Q2 mass (unit density), used by the convection step.
    pub scalar_mass: SparseOperator,
    /// `M/Δt + K`
    pub base: SparseOperator,
}

impl FluidOperators {
    pub fn new(mesh: &FluidMesh, rho_f: f64, mu_f: f64, dt: f64) -> Self {
        let mass = assemble_fluid_mass(mesh, rho_f);
        let stiffness = assemble_fluid_stiffness(mesh, mu_f);
        let base = mass.linear_combination(1.0 / dt, &stiffness, 1.0);
        FluidOperators {
            rho_f,
            mu_f,
            dt,
            divergence: assemble_divergence(mesh),
            scalar_mass: assemble_scalar_mass(mesh),
            mass,
            stiffness,
            base,
        }
    }
}

/// Everything the solid contributes to one step.
#[derive(Debug, Clone, Copy)]
pub struct SolidContribution<'a> {
    pub solid: &'a SolidMesh,
    pub coupling: &'a CouplingMatrix,
    pub field: &'a SolidStressField,
    /// Stored solid velocity `(uˢ)ⁿ`, block layout.
    pub u_s_n: &'a [f64],
    pub rho_s: f64,
    pub mu_s: f64,
    pub gravity: [f64; 2],
    pub tangent_form: TangentForm,
}

/// Velocity block, either assembled or applied through the coupling sandwich.
#[derive(Debug, Clone)]
pub enum VelocityOperator {
    Assembled(SparseOperator),
    MatrixFree {
        fluid: SparseOperator,
        /// `Mˢ/Δt + Kˢ` on the solid nodes.
        solid: SparseOperator,
        coupling: Box<CouplingMatrix>,
    },
}

impl VelocityOperator {
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        match self {
            VelocityOperator::Assembled(a) => a.mul_vec(u),
            VelocityOperator::MatrixFree { fluid, solid, coupling } => {
                let mut y = fluid.mul_vec(u);
                let s = coupling.sandwich_apply(solid, u).expect("consistent dimensions");
                y.iter_mut().zip(&s).for_each(|(a, b)| *a += b);
                y
            }
        }
    }

    pub fn assembled(&self) -> Result<SparseOperator> {
        match self {
            VelocityOperator::Assembled(a) => Ok(a.clone()),
            VelocityOperator::MatrixFree { fluid, solid, coupling } => {
                let s = coupling.assemble_sandwich(solid)?;
                Ok(fluid.linear_combination(1.0, &s, 1.0))
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            VelocityOperator::Assembled(a) => a.nrows(),
            VelocityOperator::MatrixFree { fluid, .. } => fluid.nrows(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MonolithicSystem {
    pub a: VelocityOperator,
    /// `B` (velocity dofs × pressure dofs).
    pub b: SparseOperator,
    pub rhs: Vec<f64>,
    /// Prescribed velocity `(dof, value)` pairs.
    pub dirichlet: Vec<(usize, f64)>,
    /// Pressure dofs held at zero: the reference pin and pressures enclosed by
    /// prescribed velocities.
    pub fixed_pressure: Vec<usize>,
}

impl MonolithicSystem {
    pub fn n_velocity(&self) -> usize {
        self.a.dim()
    }

    pub fn n_pressure(&self) -> usize {
        self.b.ncols()
    }

    /// Unconstrained saddle-point product.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let nu = self.n_velocity();
        let (u, p) = x.split_at(nu);
        let mut y = self.a.apply(u);
        let bp = self.b.mul_vec(p);
        y.iter_mut().zip(&bp).for_each(|(a, b)| *a += b);
        y.extend(self.b.mul_transpose_vec(u));
        y
    }

    /// All prescribed unknowns of the saddle system (velocity values, fixed pressures).
    pub fn fixed_unknowns(&self) -> Vec<(usize, f64)> {
        let nu = self.n_velocity();
        let mut f = self.dirichlet.clone();
        f.extend(self.fixed_pressure.iter().map(|&k| (nu + k, 0.0)));
        f
    }

    /// Assembled saddle matrix `[[A, B], [Bᵀ, 0]]` before constraints.
    pub fn saddle_matrix(&self) -> Result<SparseOperator> {
        let a = self.a.assembled()?;
        let nu = self.n_velocity();
        let n = nu + self.n_pressure();
        let mut tb = TripletBuilder::with_capacity(n, n, a.nnz() + 2 * self.b.nnz());
        tb.push_operator(&a, 1.0, 0, 0);
        tb.push_operator(&self.b, 1.0, 0, nu);
        tb.push_transpose(&self.b, 1.0, nu, 0);
        Ok(tb.build(a.is_symmetric_flagged()))
    }

    /// Right side of the full saddle system.
    pub fn full_rhs(&self) -> Vec<f64> {
        let mut r = self.rhs.clone();
        r.extend(std::iter::repeat_n(0.0, self.n_pressure()));
        r
    }
}

/// Assembles `A` and `b`; the solid terms vanish when `solid` is `None`.
pub fn build_monolithic(
    ops: &FluidOperators,
    solid: Option<SolidContribution<'_>>,
    u_star: &[f64],
    f: &[f64],
    matrix_free: bool,
) -> Result<MonolithicSystem> {
    let nu = ops.base.nrows();
    check_len("intermediate velocity", nu, u_star.len())?;
    check_len("fluid load", nu, f.len())?;
    let dt = ops.dt;
    let mut rhs = ops.mass.mul_vec(u_star);
    rhs.iter_mut().zip(f).for_each(|(r, fi)| *r = fi + *r / dt);
    let a = match solid {
        None => VelocityOperator::Assembled(ops.base.clone()),
        Some(s) => {
            s.coupling.ensure_current(s.solid)?;
            check_len("coupling rows", nu / 2, s.coupling.n_fluid_dofs())?;
            check_len("solid velocity", 2 * s.solid.n_nodes(), s.u_s_n.len())?;
            let ms = assemble_solid_mass(s.solid, s.rho_s, ops.rho_f)?;
            let ks = assemble_solid_tangent(s.solid, s.field, s.mu_s, dt, s.tangent_form)?;
            let solid_op = ms.linear_combination(1.0 / dt, &ks, 1.0);
            let mut fs = assemble_solid_load(s.solid, s.field, s.rho_s, ops.rho_f, s.mu_s, dt, s.gravity)?;
            let inertia = ms.mul_vec(s.u_s_n);
            fs.iter_mut().zip(&inertia).for_each(|(a, b)| *a += b / dt);
            let lifted = s.coupling.restrict_to_fluid(&fs)?;
            rhs.iter_mut().zip(&lifted).for_each(|(a, b)| *a += b);
            if matrix_free {
                VelocityOperator::MatrixFree {
                    fluid: ops.base.clone(),
                    solid: solid_op,
                    coupling: Box::new(s.coupling.clone()),
                }
            } else {
                let sandwich = s.coupling.assemble_sandwich(&solid_op)?;
                VelocityOperator::Assembled(ops.base.linear_combination(1.0, &sandwich, 1.0))
            }
        }
    };
    Ok(MonolithicSystem {
        a,
        b: ops.divergence.clone(),
        rhs,
        dirichlet: Vec::new(),
        fixed_pressure: Vec::new(),
    })
}

/// Records the Dirichlet data at time `t` and the fixed pressures.
pub fn apply_boundary_conditions(
    mut sys: MonolithicSystem,
    mesh: &FluidMesh,
    bcs: &BoundaryConditions,
    t: f64,
) -> Result<MonolithicSystem> {
    bcs.validate()?;
    check_len("velocity system", 2 * mesh.n_velocity_dofs(), sys.n_velocity())?;
    sys.dirichlet = bcs.dirichlet_values(mesh, t);
    let mut fixed_velocity = vec![false; sys.n_velocity()];
    for &(d, _) in &sys.dirichlet {
        fixed_velocity[d] = true;
    }
    let mut coupled = vec![false; sys.n_pressure()];
    for i in (0..sys.n_velocity()).filter(|&i| !fixed_velocity[i]) {
        for (k, v) in sys.b.row(i) {
            if v != 0.0 {
                coupled[k] = true;
            }
        }
    }
    let mut fixed: Vec<usize> = (0..sys.n_pressure()).filter(|&k| !coupled[k]).collect();
    if let Some(k) = bcs.pressure_pin_dof(mesh) {
        if coupled[k] {
            fixed.push(k);
            fixed.sort_unstable();
        }
    }
    sys.fixed_pressure = fixed;
    Ok(sys)
}

#[derive(Debug, Clone)]
pub struct SolveOutput {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    /// ‖K x − r‖ / ‖r‖ of the constrained system.
    pub relative_residual: f64,
    /// ‖Bᵀu‖ over the free pressure rows.
    pub divergence_norm: f64,
}

/// Preconditioner data for the Krylov path, valid for one mesh and Dirichlet pattern.
pub struct KrylovPreconditioner {
    a_lu: Lu<usize, f64>,
    lp_lu: Lu<usize, f64>,
    mp_diag: Vec<f64>,
    mu_f: f64,
    rho_over_dt: f64,
    fixed_velocity: Vec<bool>,
    fixed_pressure: Vec<usize>,
}

impl std::fmt::Debug for KrylovPreconditioner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KrylovPreconditioner").finish_non_exhaustive()
    }
}

fn lu_of(a: &SparseOperator, stage: &'static str) -> Result<Lu<usize, f64>> {
    a.to_faer()?.sp_lu().map_err(|e| FsiError::Solver {
        stage,
        message: format!("sparse LU failed: {e:?}"),
        residual_history: Vec::new(),
    })
}

fn lu_solve(lu: &Lu<usize, f64>, b: &[f64]) -> Vec<f64> {
    let rhs = Col::<f64>::from_fn(b.len(), |i| b[i]);
    let x = lu.solve(&rhs);
    (0..b.len()).map(|i| x[i]).collect()
}

impl KrylovPreconditioner {
    /// `velocity` is the velocity block used for the (1,1) solve: the fluid base
    /// operator, or a recent full operator including the solid sandwich.
    pub fn new(
        mesh: &FluidMesh,
        ops: &FluidOperators,
        velocity: &SparseOperator,
        dirichlet: &[(usize, f64)],
        fixed_pressure: &[usize],
    ) -> Result<Self> {
        check_len("preconditioner velocity block", ops.base.nrows(), velocity.nrows())?;
        let mut scratch = vec![0.0; velocity.nrows()];
        let a = eliminate_dirichlet(velocity, &mut scratch, dirichlet);
        let mp = assemble_pressure_mass(mesh);
        let lp = assemble_pressure_laplacian(mesh);
        let h2 = mesh
            .cells()
            .iter()
            .map(|c| c.geometry.diameter().powi(2))
            .fold(f64::INFINITY, f64::min);
        let mut lp_reg = lp.linear_combination(1.0, &mp, 1e-3 * h2.max(1e-12));
        if !fixed_pressure.is_empty() {
            let mut s = vec![0.0; lp_reg.nrows()];
            let zero: Vec<(usize, f64)> = fixed_pressure.iter().map(|&k| (k, 0.0)).collect();
            lp_reg = eliminate_dirichlet(&lp_reg, &mut s, &zero);
        }
        let mut fixed_velocity = vec![false; ops.base.nrows()];
        for &(d, _) in dirichlet {
            fixed_velocity[d] = true;
        }
        Ok(KrylovPreconditioner {
            a_lu: lu_of(&a, "krylov-preconditioner")?,
            lp_lu: lu_of(&lp_reg, "krylov-preconditioner")?,
            mp_diag: mp.diagonal(),
            mu_f: ops.mu_f,
            rho_over_dt: ops.rho_f / ops.dt,
            fixed_velocity,
            fixed_pressure: fixed_pressure.to_vec(),
        })
    }

    /// Block upper-triangular preconditioner with a viscous + inertial Schur approximation.
    fn apply(&self, b_op: &SparseOperator, r: &[f64]) -> Vec<f64> {
        let nu = self.fixed_velocity.len();
        let (ru, rp) = r.split_at(nu);
        let lp = lu_solve(&self.lp_lu, rp);
        let mut zp: Vec<f64> = rp
            .iter()
            .zip(&self.mp_diag)
            .zip(&lp)
            .map(|((r, m), l)| -(self.mu_f * r / m + self.rho_over_dt * l))
            .collect();
        for &k in &self.fixed_pressure {
            zp[k] = rp[k];
        }
        let bz = b_op.mul_vec(&zp);
        let mut t: Vec<f64> = ru.iter().zip(&bz).map(|(a, b)| a - b).collect();
        for (i, f) in self.fixed_velocity.iter().enumerate() {
            if *f {
                t[i] = ru[i];
            }
        }
        let mut z = lu_solve(&self.a_lu, &t);
        z.extend(zp);
        z
    }
}

/// Solves the constrained system by sparse LU (direct) or FGMRES (Krylov).
pub fn solve(
    sys: &MonolithicSystem,
    opts: &SolverOptions,
    preconditioner: Option<&KrylovPreconditioner>,
) -> Result<SolveOutput> {
    let nu = sys.n_velocity();
    let fixed = sys.fixed_unknowns();
    let (x, iterations, history, rel) = match opts.solver {
        SolverKind::Direct => {
            let k = sys.saddle_matrix()?;
            let mut r = sys.full_rhs();
            let kc = eliminate_dirichlet(&k, &mut r, &fixed);
            match opts.factorization {
                Factorization::Ldlt => match solve_ldlt(&kc, &r, nu, &fixed) {
                    Ok(out) => out,
                    Err(e) => {
                        log::debug!("LDLT correction failed ({e}), refactoring with LU");
                        solve_lu(&kc, &r)?
                    }
                },
                Factorization::Lu => solve_lu(&kc, &r)?,
            }
        }
        SolverKind::Krylov => {
            let pc = preconditioner.ok_or_else(|| FsiError::Solver {
                stage: "krylov-solve",
                message: "no preconditioner supplied".into(),
                residual_history: Vec::new(),
            })?;
            let n = nu + sys.n_pressure();
            let mut is_fixed = vec![false; n];
            let mut g = vec![0.0; n];
            for &(d, v) in &fixed {
                is_fixed[d] = true;
                g[d] = v;
            }
            let kg = sys.apply(&g);
            let mut r = sys.full_rhs();
            for i in 0..n {
                r[i] = if is_fixed[i] { g[i] } else { r[i] - kg[i] };
            }
            let apply = |x: &[f64]| {
                let mut xm = x.to_vec();
                for i in 0..n {
                    if is_fixed[i] {
                        xm[i] = 0.0;
                    }
                }
                let mut y = sys.apply(&xm);
                for i in 0..n {
                    if is_fixed[i] {
                        y[i] = x[i];
                    }
                }
                y
            };
            let prec = |v: &[f64]| pc.apply(&sys.b, v);
            let sol = fgmres(&apply, &prec, &r, opts.krylov_tol, opts.max_iters, opts.restart)?;
            let y = apply(&sol.x);
            let res: Vec<f64> = y.iter().zip(&r).map(|(a, b)| a - b).collect();
            let rel = norm2(&res) / norm2(&r).max(f64::MIN_POSITIVE);
            (sol.x, sol.iterations, sol.history, rel)
        }
    };
    let (u, p) = x.split_at(nu);
    let mut div = sys.b.mul_transpose_vec(u);
    for &k in &sys.fixed_pressure {
        div[k] = 0.0;
    }
    Ok(SolveOutput {
        u: u.to_vec(),
        p: p.to_vec(),
        iterations,
        residual_history: history,
        relative_residual: rel,
        divergence_norm: norm2(&div),
    })
}

type RawSolution = (Vec<f64>, usize, Vec<f64>, f64);

const LDLT_TOL: f64 = 1e-10;
const LDLT_MAX_ITERS: usize = 40;
/// Static pressure regularization relative to the local `B diag(A)⁻¹ Bᵀ` scale.
const PRESSURE_REGULARIZATION: f64 = 1e-8;

/// Upper triangle of the symmetric part of the constrained saddle matrix with
/// a small negative pressure diagonal, and the expected pivot signs.
fn quasi_definite_part(kc: &SparseOperator, nu: usize, fixed: &[(usize, f64)]) -> Result<(SparseOperator, Vec<i8>)> {
    let n = kc.nrows();
    let mut is_fixed = vec![false; n];
    for &(d, _) in fixed {
        is_fixed[d] = true;
    }
    let diag = kc.diagonal();
    let mut shift = vec![0.0; n];
    for i in (0..nu).filter(|&i| !is_fixed[i] && diag[i] > 0.0) {
        for (k, v) in kc.row(i) {
            if k >= nu && !is_fixed[k] {
                shift[k] -= PRESSURE_REGULARIZATION * v * v / diag[i];
            }
        }
    }
    let signs = (0..n).map(|i| if i < nu || is_fixed[i] { 1 } else { -1 }).collect();
    Ok((kc.symmetric_part_upper(&shift)?, signs))
}

fn solve_ldlt(kc: &SparseOperator, r: &[f64], nu: usize, fixed: &[(usize, f64)]) -> Result<RawSolution> {
    let (s, signs) = quasi_definite_part(kc, nu, fixed)?;
    let f = SignedLdlt::new(&s, &signs)?;
    let sol = fgmres(&|x| kc.mul_vec(x), &|v| f.solve(v), r, LDLT_TOL, LDLT_MAX_ITERS, LDLT_MAX_ITERS)?;
    let res = residual(kc, &sol.x, r);
    let rel = norm2(&res) / norm2(r).max(f64::MIN_POSITIVE);
    Ok((sol.x, sol.iterations, sol.history, rel))
}

fn solve_lu(kc: &SparseOperator, r: &[f64]) -> Result<RawSolution> {
    let lu = lu_of(kc, "direct-solve")?;
    let mut x = lu_solve(&lu, r);
    let rnorm = norm2(r).max(f64::MIN_POSITIVE);
    let mut history = Vec::new();
    let mut res = residual(kc, &x, r);
    history.push(norm2(&res) / rnorm);
    // iterative refinement for badly scaled systems (very stiff solids)
    for _ in 0..3 {
        if *history.last().unwrap() <= 1e-13 {
            break;
        }
        let dx = lu_solve(&lu, &res);
        x.iter_mut().zip(&dx).for_each(|(a, b)| *a += b);
        res = residual(kc, &x, r);
        history.push(norm2(&res) / rnorm);
    }
    let rel = *history.last().unwrap();
    Ok((x, 1, history, rel))
}

fn residual(k: &SparseOperator, x: &[f64], r: &[f64]) -> Vec<f64> {
    let mut y = k.mul_vec(x);
    y.iter_mut().zip(r).for_each(|(a, b)| *a = b - *a);
    y
}

/// Writes a residual history as CSV.
pub fn write_residual_csv<W: Write>(mut w: W, history: &[f64]) -> std::io::Result<()> {
    writeln!(w, "iteration,relative_residual")?;
    for (i, r) in history.iter().enumerate() {
        writeln!(w, "{i},{r:.17e}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Rect;

    #[test]
    fn cavity_without_solid_is_divergence_free() {
        let mesh = FluidMesh::structured(Rect::new(0.0, 0.0, 1.0, 1.0), 6, 6)
            .unwrap()
            .refine_cells(&[(0, 2, 3)])
            .unwrap();
        let ops = FluidOperators::new(&mesh, 1.0, 0.01, 0.01);
        let mut bc = BoundaryConditions::all_no_slip();
        bc.top = SideCondition::velocity(ScalarExpr::constant(1.0), ScalarExpr::constant(0.0));
        let z = vec![0.0; 2 * mesh.n_velocity_dofs()];
        let sys = build_monolithic(&ops, None, &z, &z, false).unwrap();
        let sys = apply_boundary_conditions(sys, &mesh, &bc, 0.01).unwrap();
        let out = solve(&sys, &SolverOptions::default(), None).unwrap();
        assert!(out.relative_residual < 1e-9);
        assert!(out.divergence_norm < 1e-8 * norm2(&out.u));
        let pre = KrylovPreconditioner::new(&mesh, &ops, &ops.base, &sys.dirichlet, &sys.fixed_pressure).unwrap();
        let opts = SolverOptions {
            solver: SolverKind::Krylov,
            krylov_tol: 1e-11,
            ..Default::default()
        };
        let kr = solve(&sys, &opts, Some(&pre)).unwrap();
        for (a, b) in kr.u.iter().zip(&out.u) {
            assert!((a - b).abs() < 1e-7);
        }
    }

    #[test]
    fn factorizations_agree_with_stiff_solid_and_obstacle() {
        let mesh = FluidMesh::structured(Rect::new(0.0, 0.0, 2.0, 1.0), 8, 4).unwrap();
        let solid = SolidMesh::disc([1.3, 0.5], 0.2, 24).unwrap();
        let coupling = CouplingMatrix::build(&mesh, &solid).unwrap();
        let field = SolidStressField::at_rest(&solid);
        let ops = FluidOperators::new(&mesh, 1.0, 0.1, 0.01);
        let mut bc = BoundaryConditions::all_no_slip();
        bc.left = SideCondition::velocity(ScalarExpr::parse("y*(1-y)").unwrap(), ScalarExpr::constant(0.0));
        bc.right = SideCondition::traction_free();
        bc.obstacles = vec![Rect::new(0.25, 0.25, 0.75, 0.75)];
        let u_s = vec![0.0; 2 * solid.n_nodes()];
        let z = vec![0.0; 2 * mesh.n_velocity_dofs()];
        let contribution = SolidContribution {
            solid: &solid,
            coupling: &coupling,
            field: &field,
            u_s_n: &u_s,
            rho_s: 2.0,
            mu_s: 1e6,
            gravity: [0.0, -1.0],
            tangent_form: TangentForm::Transposed,
        };
        let sys = build_monolithic(&ops, Some(contribution), &z, &z, false).unwrap();
        let sys = apply_boundary_conditions(sys, &mesh, &bc, 0.01).unwrap();
        // the pressure node at the obstacle centre only sees fixed velocities
        assert!(!sys.fixed_pressure.is_empty());
        let ldlt = solve(&sys, &SolverOptions::default(), None).unwrap();
        let lu = solve(
            &sys,
            &SolverOptions {
                factorization: Factorization::Lu,
                ..Default::default()
            },
            None,
        )
        .unwrap();
        assert!(ldlt.relative_residual <= LDLT_TOL);
        assert!(lu.relative_residual < 1e-9);
        let scale = norm2(&lu.u);
        for (a, b) in ldlt.u.iter().zip(&lu.u) {
            assert!((a - b).abs() < 1e-8 * scale);
        }
    }
}
