mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;

use nalgebra::{DMatrix, Matrix2};
use onefield::assembly::{
    assemble_fluid_mass, assemble_fluid_stiffness, assemble_solid_tangent, SolidStressField, TangentForm,
};
use onefield::coupled_solve::{
    apply_boundary_conditions, build_monolithic, solve, FluidOperators, SolidContribution, SolverOptions,
};
use onefield::coupling::CouplingMatrix;
use onefield::diagnostics::potential_energy_solid;
use onefield::solid_state::{update_stress, StressUpdateInputs};
use onefield::simulation::Simulation;

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 24,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn refinement_keeps_one_irregular(seed in any::<u64>(), passes in 1usize..5) {
        let mesh = random_mesh(seed, passes);
        for (a, b) in mesh.edge_adjacent_pairs() {
            let (la, lb) = (mesh.cells()[a].level(), mesh.cells()[b].level());
            prop_assert!(la.abs_diff(lb) <= 1, "cells {a}/{b} at levels {la}/{lb}");
        }
    }

    #[test]
    fn hanging_nodes_reproduce_quadratics(seed in any::<u64>(), c in prop::array::uniform6(-2.0f64..2.0)) {
        let mesh = random_mesh(seed, 3);
        let f = |x: [f64; 2]| c[0] + c[1] * x[0] + c[2] * x[1] + c[3] * x[0] * x[0] + c[4] * x[0] * x[1] + c[5] * x[1] * x[1];
        let u = mesh.interpolate_velocity(|x| [f(x), 0.0]);
        let all = mesh.velocity_dofs().expand_values(&u[..mesh.n_velocity_dofs()]);
        for (node, x) in mesh.nodes().iter().enumerate() {
            prop_assert!((all[node] - f(*x)).abs() <= 1e-12 * (1.0 + f(*x).abs()) * 10.0);
        }
        let lin = |x: [f64; 2]| c[0] + c[1] * x[0] + c[2] * x[1];
        let p = mesh.interpolate_pressure(lin);
        let pall = mesh.pressure_dofs().expand_values(&p);
        for (k, v) in pall.iter().enumerate() {
            let x = mesh.pressure_node_position(k);
            prop_assert!((v - lin(x)).abs() <= 1e-11);
        }
    }

    #[test]
    fn point_location_inverts_the_cell_map(seed in any::<u64>(), xi in prop::array::uniform2(-0.999f64..0.999)) {
        let mesh = random_mesh(seed, 2);
        for cell in 0..mesh.n_cells() {
            let x = mesh.cells()[cell].geometry.map(xi);
            let (found, local) = mesh.locate_point(x, None).unwrap();
            let back = mesh.cells()[found].geometry.map(local);
            prop_assert!((back[0] - x[0]).abs() <= 1e-10 && (back[1] - x[1]).abs() <= 1e-10);
            if found == cell {
                prop_assert!((local[0] - xi[0]).abs() <= 1e-10 && (local[1] - xi[1]).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn coupling_partition_of_unity(seed in any::<u64>()) {
        let mesh = random_mesh(seed, 3);
        let solid = random_disc(&mesh, seed, true);
        let c = CouplingMatrix::build(&mesh, &solid).unwrap();
        prop_assert!(partition_of_unity_error(&c) <= 1e-13);
    }

    #[test]
    fn coupling_reproduces_affine_fields(seed in any::<u64>(), a in prop::array::uniform6(-3.0f64..3.0)) {
        let mesh = random_mesh(seed, 3);
        let solid = random_disc(&mesh, seed, true);
        let c = CouplingMatrix::build(&mesh, &solid).unwrap();
        prop_assert!(linear_reproduction_error(&mesh, &solid, &c, a) <= 1e-12);
    }

    #[test]
    fn staged_sandwich_matches_assembled(seed in any::<u64>()) {
        let mesh = random_mesh(seed, 1);
        let solid = random_disc(&mesh, seed, false);
        let c = CouplingMatrix::build(&mesh, &solid).unwrap();
        prop_assume!(2 * c.n_fluid_dofs() <= 400);
        prop_assert!(sandwich_error(&c, seed) <= 1e-12);
    }

    #[test]
    fn coupling_rebuild_is_stable(seed in any::<u64>()) {
        let mesh = random_mesh(seed, 2);
        let solid = random_disc(&mesh, seed, false);
        let c = CouplingMatrix::build(&mesh, &solid).unwrap();
        let nudged: Vec<[f64; 2]> = solid.current().iter().map(|p| [p[0] + 5e-15, p[1] - 5e-15]).collect();
        let mut moved = solid.clone();
        moved.set_current(nudged).unwrap();
        let r = c.rebuild(&mesh, &moved).unwrap();
        prop_assert_eq!(c.pt().row_ptr(), r.pt().row_ptr());
        prop_assert_eq!(c.pt().col_idx(), r.pt().col_idx());
        for (a, b) in c.pt().values().iter().zip(r.pt().values()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn stiffness_annihilates_rigid_modes(seed in any::<u64>(), mu in 0.01f64..100.0) {
        let mesh = random_mesh(seed, 3);
        let k = assemble_fluid_stiffness(&mesh, mu);
        prop_assert!(rigid_mode_residual(&k, &mesh) <= 1e-12);
    }

    #[test]
    fn assembly_is_bitwise_deterministic(seed in any::<u64>()) {
        let mesh = random_mesh(seed, 2);
        let a = assemble_fluid_stiffness(&mesh, 1.3);
        let b = assemble_fluid_stiffness(&mesh, 1.3);
        prop_assert_eq!(a.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        prop_assert_eq!(a.col_idx(), b.col_idx());
    }

    #[test]
    fn solid_tangent_symmetric_only_without_history(seed in any::<u64>()) {
        let mesh = random_mesh(seed, 0);
        let solid = random_disc(&mesh, seed, true);
        let rest = SolidStressField::at_rest(&solid);
        let k0 = assemble_solid_tangent(&solid, &rest, 10.0, 1e-2, TangentForm::Consistent).unwrap();
        prop_assert!(k0.symmetry_error() <= 1e-12 * k0.max_abs());
        let mut r = rng(seed);
        let n = 2 * solid.n_nodes();
        let u: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
        let field = SolidStressField::new(&solid, &u).unwrap();
        let k1 = assemble_solid_tangent(&solid, &field, 10.0, 1e-2, TangentForm::Consistent).unwrap();
        prop_assert!(k1.symmetry_error() > 1e-10 * k1.max_abs());
    }

    #[test]
    fn stress_stays_symmetric(seed in any::<u64>(), steps in 1usize..30) {
        let mut r = rng(seed);
        let mut tau = vec![Matrix2::zeros(); 4];
        for _ in 0..steps {
            let g: Vec<Matrix2<f64>> = (0..4).map(|_| Matrix2::from_fn(|_, _| r.gen_range(-1.0..1.0))).collect();
            tau = update_stress(&StressUpdateInputs { velocity_gradient: &g, previous: &tau, mu_s: 3.0, dt: 0.05 }).unwrap();
            for t in &tau {
                prop_assert_eq!(t[(0, 1)].to_bits(), t[(1, 0)].to_bits());
            }
        }
    }

    #[test]
    fn solid_update_keeps_reference_areas(seed in any::<u64>()) {
        let mesh = random_mesh(seed, 0);
        let solid = random_disc(&mesh, seed, false);
        let mut r = rng(seed);
        let u: Vec<f64> = (0..2 * solid.n_nodes()).map(|_| r.gen_range(-0.1..0.1)).collect();
        let next = solid.update_coordinates(&u, 0.01).unwrap();
        prop_assert_eq!(solid.reference_areas(), next.reference_areas());
    }

    #[test]
    fn potential_energy_ignores_rigid_motion(seed in any::<u64>(), angle in -3.0f64..3.0, shift in prop::array::uniform2(-0.1f64..0.1)) {
        let mesh = random_mesh(seed, 0);
        let solid = random_disc(&mesh, seed, true);
        let e0 = potential_energy_solid(&solid, 7.0).unwrap();
        let (s, c) = angle.sin_cos();
        let moved: Vec<[f64; 2]> = solid.current().iter().map(|p| [c * p[0] - s * p[1] + shift[0], s * p[0] + c * p[1] + shift[1]]).collect();
        let mut rotated = solid.clone();
        rotated.set_current(moved).unwrap();
        let e1 = potential_energy_solid(&rotated, 7.0).unwrap();
        prop_assert!((e1 - e0).abs() <= 1e-12 * (1.0 + e0.abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    #[test]
    fn fluid_mass_is_spd(seed in any::<u64>()) {
        let mesh = random_mesh(seed, 1);
        let m = assemble_fluid_mass(&mesh, 1.0);
        prop_assume!(m.nrows() <= 500);
        let dense = DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m.get(i, j));
        let eig = dense.symmetric_eigenvalues();
        prop_assert!(eig.min() > 0.0);
    }

    #[test]
    fn solves_are_discretely_divergence_free(seed in any::<u64>(), rho_s in 0.5f64..3.0, mu_s in 0.1f64..1e4) {
        let mut c = tiny_cavity();
        c.material.rho_s = rho_s;
        c.material.mu_s = mu_s;
        let mut r = rng(seed);
        c.solid = onefield::simulation::SolidConfig::Disc {
            center: [r.gen_range(0.35..0.65), r.gen_range(0.35..0.65)],
            radius: r.gen_range(0.1..0.25),
            boundary_nodes: r.gen_range(10..24),
        };
        c.time.end_time = 0.03;
        prop_assert!(max_divergence(c, 3) <= 1e-8);
    }

    #[test]
    fn neutral_solid_leaves_the_fluid_system_unchanged(seed in any::<u64>()) {
        let mesh = random_mesh(seed, 1);
        let solid = random_disc(&mesh, seed, false);
        let ops = FluidOperators::new(&mesh, 1.0, 0.1, 0.01);
        let c = CouplingMatrix::build(&mesh, &solid).unwrap();
        let field = SolidStressField::at_rest(&solid);
        let n = 2 * mesh.n_velocity_dofs();
        let mut r = rng(seed);
        let u_star: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
        let f = vec![0.0; n];
        let u_s = vec![0.0; 2 * solid.n_nodes()];
        let fluid = build_monolithic(&ops, None, &u_star, &f, false).unwrap();
        let fsi = build_monolithic(
            &ops,
            Some(SolidContribution {
                solid: &solid,
                coupling: &c,
                field: &field,
                u_s_n: &u_s,
                rho_s: 1.0,
                mu_s: 0.0,
                gravity: [0.0, 0.0],
                tangent_form: TangentForm::Transposed,
            }),
            &u_star,
            &f,
            false,
        )
        .unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&fluid.rhs), bits(&fsi.rhs));
        let (a, b) = (fluid.a.assembled().unwrap(), fsi.a.assembled().unwrap());
        for i in 0..n {
            for (j, v) in a.row(i) {
                prop_assert_eq!(v.to_bits(), b.get(i, j).to_bits());
            }
            for (j, v) in b.row(i) {
                prop_assert_eq!(v.to_bits(), a.get(i, j).to_bits());
            }
        }
    }
}

#[test]
fn first_step_symmetric_and_general_solvers_agree() {
    let c = tiny_cavity();
    let sim = Simulation::new(c.clone()).unwrap();
    let mesh = sim.mesh();
    let ops = sim.operators();
    let solid = sim.solid().unwrap();
    let coupling = sim.coupling().unwrap();
    let field = SolidStressField::at_rest(solid);
    let n = 2 * mesh.n_velocity_dofs();
    let zeros = vec![0.0; n];
    let u_s = vec![0.0; 2 * solid.n_nodes()];
    let sys = build_monolithic(
        ops,
        Some(SolidContribution {
            solid,
            coupling,
            field: &field,
            u_s_n: &u_s,
            rho_s: c.material.rho_s,
            mu_s: c.material.mu_s,
            gravity: c.material.gravity,
            tangent_form: TangentForm::Transposed,
        }),
        &zeros,
        &zeros,
        false,
    )
    .unwrap();
    let sys = apply_boundary_conditions(sys, mesh, &c.boundary, c.time.dt).unwrap();
    assert!(sys.a.assembled().unwrap().symmetry_error() <= 1e-12 * sys.a.assembled().unwrap().max_abs());
    let ldlt = solve(&sys, &SolverOptions::default(), None).unwrap();
    let lu = solve(
        &sys,
        &SolverOptions {
            factorization: onefield::coupled_solve::Factorization::Lu,
            ..Default::default()
        },
        None,
    )
    .unwrap();
    assert!(rel_diff(&ldlt.u, &lu.u) <= 1e-9);
}

#[test]
fn energy_dissipation_is_monotone() {
    let mut sim = Simulation::new(tiny_cavity()).unwrap();
    let mut last = 0.0;
    for _ in 0..5 {
        sim.step().unwrap();
        let d = sim.energy().unwrap().dissipation;
        assert!(d >= last);
        last = d;
    }
}

#[test]
fn csv_output_is_deterministic() {
    assert!(csv_is_deterministic(&tiny_cavity()));
}

#[test]
fn restart_reproduces_the_next_step_bitwise() {
    let c = tiny_cavity();
    // across a re-adaptation boundary and away from it
    for n in [1, 2, 3] {
        assert!(restart_is_bitwise(&c, n), "restart after step {n}");
    }
}
