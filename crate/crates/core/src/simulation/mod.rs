//! Time loop: convection, monolithic diffusion/coupling solve, solid update,
//! mesh re-adaptation; plus the artifact-producing scenario runner.

pub mod config;
mod output;

pub use config::{
    preset, DomainConfig, InitialCondition, Material, NumericsConfig, OutputConfig, RefinementConfig,
    ScenarioConfig, SolidConfig, TimeConfig, PRESET_NAMES,
};
pub use output::{run_scenario, ColumnStats, RunOptions, RunSummary};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::assembly::{assemble_gravity, assemble_traction, SolidStressField};
use crate::convection::convection_step;
use crate::coupled_solve::{
    apply_boundary_conditions, build_monolithic, solve, FluidOperators, KrylovPreconditioner, SolidContribution,
    SolverKind,
};
use crate::coupling::CouplingMatrix;
use crate::diagnostics::{
    kinetic_energy_fluid, kinetic_energy_solid_correction, potential_energy_solid, probe_tip_displacement,
    solid_area, viscous_dissipation_increment, EnergyBudget,
};
use crate::error::{FsiError, Result};
use crate::mesh::{FluidMesh, LeafKey, SolidMesh};
use crate::solid_state::{element_velocity_gradient, update_stress, StressUpdateInputs};

/// Stable band of the fluid/solid element area ratio.
pub const MESH_RATIO_BAND: (f64, f64) = (1.5, 5.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    pub step: usize,
    pub time: f64,
    /// Fluid velocity, block layout over free dofs.
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    /// Solid nodal velocity, block layout.
    pub u_s: Vec<f64>,
}

/// Everything needed to resume a run bit-for-bit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub state: SystemState,
    pub leaves: Vec<LeafKey>,
    pub solid: Option<SolidMesh>,
    pub dissipation: f64,
    pub initial_energy: f64,
}

impl Checkpoint {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| FsiError::Serde(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| FsiError::Serde(e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone)]
pub struct StepReport {
    pub step: usize,
    pub time: f64,
    pub convection_iterations: usize,
    pub solver_iterations: usize,
    pub relative_residual: f64,
    pub divergence_norm: f64,
    pub residual_history: Vec<f64>,
    pub readapted: bool,
}

/// One row of the time-series output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesRecord {
    pub step: usize,
    pub time: f64,
    pub probe_displacement: [f64; 2],
    pub probe_velocity: [f64; 2],
    pub energy: EnergyBudget,
    pub solid_area: f64,
    pub convection_iterations: usize,
    pub solver_iterations: usize,
    pub relative_residual: f64,
    pub divergence_norm: f64,
}

/// `u = (∂Ψ/∂y, −∂Ψ/∂x)` for `Ψ = Ψ₀ sin(ax) sin(by)` at the velocity nodes.
pub fn initialize_from_stream_function(mesh: &FluidMesh, psi0: f64, a: f64, b: f64) -> Vec<f64> {
    mesh.interpolate_velocity(|x| {
        [
            psi0 * b * (a * x[0]).sin() * (b * x[1]).cos(),
            -psi0 * a * (a * x[0]).cos() * (b * x[1]).sin(),
        ]
    })
}

fn at(step: usize, stage: &'static str) -> impl FnOnce(FsiError) -> FsiError {
    move |e| match e {
        FsiError::Step { .. } => e,
        e => FsiError::Step {
            step,
            stage,
            source: Box::new(e),
        },
    }
}

pub struct Simulation {
    config: ScenarioConfig,
    base: FluidMesh,
    mesh: FluidMesh,
    ops: FluidOperators,
    solid: Option<SolidMesh>,
    coupling: Option<CouplingMatrix>,
    preconditioner: Option<KrylovPreconditioner>,
    state: SystemState,
    probe: Option<usize>,
    dissipation: f64,
    initial_energy: f64,
}

impl Simulation {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let base = config.base_mesh().map_err(at(0, "mesh"))?;
        let solid = config.solid.build().map_err(at(0, "mesh"))?;
        let r = &config.refinement;
        let mesh = match &solid {
            Some(s) => base.refine_near_solid(s, r.levels, r.halo).map_err(at(0, "mesh"))?,
            None => base.clone(),
        };
        let mut u = match config.initial {
            InitialCondition::Rest => vec![0.0; 2 * mesh.n_velocity_dofs()],
            InitialCondition::StreamFunction { psi0, a, b } => initialize_from_stream_function(&mesh, psi0, a, b),
        };
        for (d, v) in config.boundary.dirichlet_values(&mesh, 0.0) {
            u[d] = v;
        }
        let p = vec![0.0; mesh.n_pressure_dofs()];
        let state = SystemState {
            step: 0,
            time: 0.0,
            u,
            p,
            u_s: Vec::new(),
        };
        let mut sim = Self::assemble(config, base, mesh, solid, state, 0.0, 0.0)?;
        if let (Some(c), Some(_)) = (&sim.coupling, &sim.solid) {
            sim.state.u_s = c.interpolate_to_solid(&sim.state.u)?;
        }
        sim.initial_energy = sim.energy()?.total();
        if let Some(rm) = sim.mesh_ratio() {
            if rm < MESH_RATIO_BAND.0 || rm > MESH_RATIO_BAND.1 {
                log::warn!(
                    "mesh ratio rm = {rm:.3} is outside the stable band [{}, {}]",
                    MESH_RATIO_BAND.0,
                    MESH_RATIO_BAND.1
                );
            } else {
                log::info!("mesh ratio rm = {rm:.3}");
            }
        }
        Ok(sim)
    }

    fn assemble(
        config: ScenarioConfig,
        base: FluidMesh,
        mesh: FluidMesh,
        solid: Option<SolidMesh>,
        state: SystemState,
        dissipation: f64,
        initial_energy: f64,
    ) -> Result<Self> {
        let m = &config.material;
        let ops = FluidOperators::new(&mesh, m.rho_f, m.mu_f, config.time.dt);
        let coupling = match &solid {
            Some(s) => Some(CouplingMatrix::build(&mesh, s).map_err(at(state.step, "coupling"))?),
            None => None,
        };
        let probe = match (&solid, config.output.probe.or(config.solid.default_probe())) {
            (Some(s), Some(x)) => Some(s.nearest_reference_node(x)),
            _ => None,
        };
        Ok(Simulation {
            config,
            base,
            mesh,
            ops,
            solid,
            coupling,
            preconditioner: None,
            state,
            probe,
            dissipation,
            initial_energy,
        })
    }

    pub fn from_checkpoint(config: ScenarioConfig, ck: Checkpoint) -> Result<Self> {
        config.validate()?;
        let base = config.base_mesh()?;
        let d = &config.domain;
        let mesh = FluidMesh::from_leaves(d.rect(), d.nx, d.ny, ck.leaves.iter().copied().collect())?;
        if ck.state.u.len() != 2 * mesh.n_velocity_dofs() || ck.state.p.len() != mesh.n_pressure_dofs() {
            return Err(FsiError::Config("checkpoint does not match the configured mesh".into()));
        }
        Self::assemble(config, base, mesh, ck.solid, ck.state, ck.dissipation, ck.initial_energy)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            state: self.state.clone(),
            leaves: self.mesh.leaves().to_vec(),
            solid: self.solid.clone(),
            dissipation: self.dissipation,
            initial_energy: self.initial_energy,
        }
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn state(&self) -> &SystemState {
        &self.state
    }

    pub fn mesh(&self) -> &FluidMesh {
        &self.mesh
    }

    pub fn solid(&self) -> Option<&SolidMesh> {
        self.solid.as_ref()
    }

    pub fn coupling(&self) -> Option<&CouplingMatrix> {
        self.coupling.as_ref()
    }

    pub fn operators(&self) -> &FluidOperators {
        &self.ops
    }

    pub fn probe_node(&self) -> Option<usize> {
        self.probe
    }

    pub fn initial_energy(&self) -> f64 {
        self.initial_energy
    }

    /// Mean area of the fluid cells hosting solid boundary nodes over the mean
    /// solid element area.
    pub fn mesh_ratio(&self) -> Option<f64> {
        let (solid, coupling) = (self.solid.as_ref()?, self.coupling.as_ref()?);
        let hosts = coupling.hosts();
        let boundary = solid.boundary_nodes();
        if hosts.is_empty() || boundary.is_empty() {
            return None;
        }
        let fluid: f64 = boundary
            .iter()
            .map(|&i| {
                let (lo, hi) = self.mesh.cells()[hosts[i].cell].geometry.bounding_box();
                (hi[0] - lo[0]) * (hi[1] - lo[1])
            })
            .sum::<f64>()
            / boundary.len() as f64;
        Some(fluid / solid.mean_element_area())
    }

    pub fn energy(&self) -> Result<EnergyBudget> {
        let m = &self.config.material;
        let mut e = EnergyBudget {
            kinetic_fluid: kinetic_energy_fluid(&self.mesh, &self.state.u, m.rho_f)?,
            dissipation: self.dissipation,
            ..Default::default()
        };
        if let Some(s) = &self.solid {
            e.kinetic_solid = kinetic_energy_solid_correction(s, &self.state.u_s, m.rho_s, m.rho_f)?;
            e.potential = potential_energy_solid(s, m.mu_s)?;
        }
        Ok(e)
    }

    pub fn record(&self, report: Option<&StepReport>) -> Result<TimeSeriesRecord> {
        let (disp, vel) = match (self.probe, &self.solid) {
            (Some(k), Some(s)) => {
                let n = s.n_nodes();
                (probe_tip_displacement(s, k), [self.state.u_s[k], self.state.u_s[n + k]])
            }
            _ => ([0.0; 2], [0.0; 2]),
        };
        Ok(TimeSeriesRecord {
            step: self.state.step,
            time: self.state.time,
            probe_displacement: disp,
            probe_velocity: vel,
            energy: self.energy()?,
            solid_area: self.solid.as_ref().map(solid_area).unwrap_or(0.0),
            convection_iterations: report.map(|r| r.convection_iterations).unwrap_or(0),
            solver_iterations: report.map(|r| r.solver_iterations).unwrap_or(0),
            relative_residual: report.map(|r| r.relative_residual).unwrap_or(0.0),
            divergence_norm: report.map(|r| r.divergence_norm).unwrap_or(0.0),
        })
    }

    fn fluid_load(&self, t: f64) -> Vec<f64> {
        let bc = &self.config.boundary;
        let mut f = assemble_gravity(&self.mesh, self.config.material.rho_f, self.config.material.gravity);
        if bc.has_nonzero_traction() {
            let h = assemble_traction(&self.mesh, &bc.neumann_sides(), |side, x| bc.traction(side, x, t));
            f.iter_mut().zip(&h).for_each(|(a, b)| *a += b);
        }
        f
    }

    fn stress_field(&self) -> Result<Option<SolidStressField>> {
        match &self.solid {
            Some(s) => Ok(Some(SolidStressField::new(s, &self.state.u_s)?)),
            None => Ok(None),
        }
    }

    /// Advances one time step.
    pub fn step(&mut self) -> Result<StepReport> {
        let n1 = self.state.step + 1;
        let dt = self.config.time.dt;
        let t1 = n1 as f64 * dt;
        let bc = &self.config.boundary;
        let m = self.config.material.clone();

        let clock = std::time::Instant::now();
        // (1)–(2) convection with the boundary data of the new time level
        let fixed = bc.dirichlet_values(&self.mesh, t1);
        let conv = convection_step(
            &self.mesh,
            &self.ops.scalar_mass,
            &self.state.u,
            dt,
            &fixed,
            &self.config.convection_options(),
        )
        .map_err(at(n1, "convection"))?;
        let t_conv = clock.elapsed();

        // (3) monolithic solve
        let f = self.fluid_load(t1);
        let field = self.stress_field().map_err(at(n1, "assembly"))?;
        let contribution = match (&self.solid, &self.coupling, &field) {
            (Some(solid), Some(coupling), Some(field)) => Some(SolidContribution {
                solid,
                coupling,
                field,
                u_s_n: &self.state.u_s,
                rho_s: m.rho_s,
                mu_s: m.mu_s,
                gravity: m.gravity,
                tangent_form: self.config.numerics.tangent,
            }),
            _ => None,
        };
        let sys = build_monolithic(&self.ops, contribution, &conv.u_star, &f, self.config.numerics.matrix_free)
            .map_err(at(n1, "assembly"))?;
        let t_assembly = clock.elapsed();
        let sys = apply_boundary_conditions(sys, &self.mesh, bc, t1).map_err(at(n1, "boundary"))?;
        let opts = self.config.solver_options();
        let every = self.config.numerics.precondition_every.max(1);
        if opts.solver == SolverKind::Krylov && (self.preconditioner.is_none() || (n1 - 1).is_multiple_of(every)) {
            let a = sys.a.assembled().map_err(at(n1, "solve"))?;
            self.preconditioner = Some(
                KrylovPreconditioner::new(&self.mesh, &self.ops, &a, &sys.dirichlet, &sys.fixed_pressure)
                    .map_err(at(n1, "solve"))?,
            );
        }
        let out = solve(&sys, &opts, self.preconditioner.as_ref()).map_err(at(n1, "solve"))?;
        let t_solve = clock.elapsed();
        if out.relative_residual > 1e-9 {
            log::warn!("step {n1}: relative residual {:.3e}", out.relative_residual);
        }

        // (4) solid velocity, stress history, coordinates
        let mut next_solid = None;
        let mut u_s = Vec::new();
        if let (Some(solid), Some(coupling)) = (&self.solid, &self.coupling) {
            u_s = coupling.interpolate_to_solid(&out.u).map_err(at(n1, "solid-update"))?;
            let g = element_velocity_gradient(solid, &u_s).map_err(at(n1, "solid-update"))?;
            let tau = update_stress(&StressUpdateInputs {
                velocity_gradient: &g,
                previous: solid.stress(),
                mu_s: m.mu_s,
                dt,
            })
            .map_err(at(n1, "solid-update"))?;
            let mut s = solid.update_coordinates(&u_s, dt).map_err(at(n1, "solid-update"))?;
            s.set_stress(tau).map_err(at(n1, "solid-update"))?;
            next_solid = Some(s);
        }
        self.dissipation += viscous_dissipation_increment(&self.mesh, &out.u, m.mu_f, dt).map_err(at(n1, "diagnostics"))?;
        self.state = SystemState {
            step: n1,
            time: t1,
            u: out.u,
            p: out.p,
            u_s,
        };
        self.solid = next_solid;

        let readapted = self.readapt(n1).map_err(at(n1, "adapt"))?;
        if let Some(s) = &self.solid {
            self.coupling = Some(CouplingMatrix::build(&self.mesh, s).map_err(at(n1, "coupling"))?);
        }
        log::debug!(
            "step {n1}: convection {:?}, assembly {:?}, solve {:?}, update {:?}",
            t_conv,
            t_assembly - t_conv,
            t_solve - t_assembly,
            clock.elapsed() - t_solve
        );
        Ok(StepReport {
            step: n1,
            time: t1,
            convection_iterations: conv.cg_iterations,
            solver_iterations: out.iterations,
            relative_residual: out.relative_residual,
            divergence_norm: out.divergence_norm,
            residual_history: out.residual_history,
            readapted,
        })
    }

    /// Rebuilds the refined mesh around the moved solid and transfers `u`, `p`
    /// through the old finite-element interpolant.
    fn readapt(&mut self, step: usize) -> Result<bool> {
        let r = &self.config.refinement;
        let Some(solid) = &self.solid else { return Ok(false) };
        if r.levels == 0 || r.readapt_every == 0 || !step.is_multiple_of(r.readapt_every) {
            return Ok(false);
        }
        let mesh = self.base.refine_near_solid(solid, r.levels, r.halo)?;
        if mesh.leaves() == self.mesh.leaves() {
            return Ok(false);
        }
        let n = mesh.n_velocity_dofs();
        let mut u = vec![0.0; 2 * n];
        for d in 0..n {
            let v = self
                .mesh
                .evaluate_velocity(&self.state.u, mesh.nodes()[mesh.velocity_dofs().node_of(d)])?;
            u[d] = v[0];
            u[n + d] = v[1];
        }
        let p = (0..mesh.n_pressure_dofs())
            .map(|d| {
                self.mesh
                    .evaluate_pressure(&self.state.p, mesh.pressure_node_position(mesh.pressure_dofs().node_of(d)))
            })
            .collect::<Result<Vec<f64>>>()?;
        let m = &self.config.material;
        self.ops = FluidOperators::new(&mesh, m.rho_f, m.mu_f, self.config.time.dt);
        self.preconditioner = None;
        self.mesh = mesh;
        self.state.u = u;
        self.state.p = p;
        Ok(true)
    }

    /// Writes the current operators (MatrixMarket) into `dir`.
    pub fn dump_matrices(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let file = |name: &str| std::fs::File::create(dir.join(name)).map(std::io::BufWriter::new);
        self.ops.mass.write_matrix_market(file("fluid_mass.mtx")?)?;
        self.ops.stiffness.write_matrix_market(file("fluid_stiffness.mtx")?)?;
        self.ops.divergence.write_matrix_market(file("divergence.mtx")?)?;
        let field = self.stress_field()?;
        let m = &self.config.material;
        let contribution = match (&self.solid, &self.coupling, &field) {
            (Some(solid), Some(coupling), Some(field)) => {
                coupling.write_matrix_market(file("coupling_p.mtx")?)?;
                Some(SolidContribution {
                    solid,
                    coupling,
                    field,
                    u_s_n: &self.state.u_s,
                    rho_s: m.rho_s,
                    mu_s: m.mu_s,
                    gravity: m.gravity,
                    tangent_form: self.config.numerics.tangent,
                })
            }
            _ => None,
        };
        let f = vec![0.0; self.state.u.len()];
        let sys = build_monolithic(&self.ops, contribution, &self.state.u, &f, false)?;
        sys.saddle_matrix()?.write_matrix_market(file("saddle.mtx")?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_disc() -> ScenarioConfig {
        let mut c = preset("oscillating_disc").unwrap();
        c.domain.nx = 8;
        c.domain.ny = 8;
        c.refinement.levels = 1;
        c.refinement.halo = 0.05;
        c.refinement.readapt_every = 2;
        if let SolidConfig::Disc { boundary_nodes, .. } = &mut c.solid {
            *boundary_nodes = 24;
        }
        c.time.dt = 5e-3;
        c.time.end_time = 0.02;
        c
    }

    #[test]
    fn stream_function_values() {
        let mesh = FluidMesh::structured(crate::mesh::Rect::new(0.0, 0.0, 1.0, 1.0), 4, 4).unwrap();
        let tau = 2.0 * std::f64::consts::PI;
        let u = initialize_from_stream_function(&mesh, 5e-2, tau, tau);
        let v = mesh.evaluate_velocity(&u, [0.25, 0.25]).unwrap();
        assert!(v[0].abs() < 1e-15);
        assert!((v[1] + 5e-2 * tau).abs() > 0.0);
        assert!(initialize_from_stream_function(&mesh, 0.0, tau, tau).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn rest_without_forcing_stays_zero() {
        let mut c = small_disc();
        c.initial = InitialCondition::Rest;
        let mut sim = Simulation::new(c).unwrap();
        for _ in 0..3 {
            sim.step().unwrap();
        }
        assert!(sim.state().u.iter().all(|&x| x == 0.0));
        assert!(sim.state().p.iter().all(|&x| x == 0.0));
        assert!(sim.energy().unwrap().total().abs() < 1e-14);
    }

    #[test]
    fn restart_reproduces_next_step() {
        let mut sim = Simulation::new(small_disc()).unwrap();
        sim.step().unwrap();
        sim.step().unwrap();
        let json = sim.checkpoint().to_json().unwrap();
        sim.step().unwrap();
        let mut resumed = Simulation::from_checkpoint(small_disc(), Checkpoint::from_json(&json).unwrap()).unwrap();
        resumed.step().unwrap();
        assert_eq!(sim.state(), resumed.state());
        assert_eq!(
            sim.solid().unwrap().current(),
            resumed.solid().unwrap().current()
        );
    }

    #[test]
    fn errors_carry_step_and_stage() {
        let mut c = small_disc();
        c.solid = SolidConfig::Disc {
            center: [0.5, 0.5],
            radius: 0.2,
            boundary_nodes: 24,
        };
        c.initial = InitialCondition::StreamFunction { psi0: 50.0, a: std::f64::consts::TAU, b: std::f64::consts::TAU };
        c.time.dt = 1.0;
        let mut sim = Simulation::new(c).unwrap();
        let err = sim.step().unwrap_err();
        assert!(matches!(err, FsiError::Step { step: 1, .. }), "{err}");
    }
}
