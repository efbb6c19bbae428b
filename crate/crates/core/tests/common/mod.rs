//! Shared fixtures and invariant checks for the integration suites.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use onefield::coupling::CouplingMatrix;
use onefield::mesh::LeafKey;
use onefield::simulation::{preset, run_scenario, RunOptions, ScenarioConfig, Simulation, SolidConfig};
use onefield::{FluidMesh, Rect, SolidMesh, SparseOperator, TripletBuilder};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random rectangle, random base grid, a few random refinement passes.
pub fn random_mesh(seed: u64, passes: usize) -> FluidMesh {
    let mut r = rng(seed);
    let x0 = r.gen_range(-1.0..1.0);
    let y0 = r.gen_range(-1.0..1.0);
    let w = r.gen_range(0.5..2.0);
    let h = r.gen_range(0.5..2.0);
    let nx = r.gen_range(2..5);
    let ny = r.gen_range(2..5);
    let mut mesh = FluidMesh::structured(Rect::new(x0, y0, x0 + w, y0 + h), nx, ny).unwrap();
    for _ in 0..passes {
        let leaves = mesh.leaves();
        let k = r.gen_range(1..=leaves.len().min(3));
        let targets: Vec<LeafKey> = (0..k).map(|_| leaves[r.gen_range(0..leaves.len())]).collect();
        mesh = mesh.refine_cells(&targets).unwrap();
    }
    mesh
}

/// A small disc strictly inside `mesh`, optionally with jittered nodes.
pub fn random_disc(mesh: &FluidMesh, seed: u64, jitter: bool) -> SolidMesh {
    let mut r = rng(seed ^ 0x5eed);
    let d = mesh.domain();
    let radius = 0.2 * d.width().min(d.height()) * r.gen_range(0.5..1.0);
    let cx = r.gen_range(d.x0 + 1.1 * radius..d.x1 - 1.1 * radius);
    let cy = r.gen_range(d.y0 + 1.1 * radius..d.y1 - 1.1 * radius);
    let nodes = r.gen_range(8..24);
    let mut s = SolidMesh::disc([cx, cy], radius, nodes).unwrap();
    if jitter {
        let amp = 0.05 * radius / (nodes as f64).sqrt();
        let moved: Vec<[f64; 2]> = s
            .current()
            .iter()
            .map(|p| [p[0] + r.gen_range(-amp..amp), p[1] + r.gen_range(-amp..amp)])
            .collect();
        s.set_current(moved).unwrap();
    }
    s
}

/// Square sparse matrix with roughly `per_row` random entries per row.
pub fn random_sparse(n: usize, per_row: usize, seed: u64) -> SparseOperator {
    let mut r = rng(seed);
    let mut tb = TripletBuilder::new(n, n);
    for i in 0..n {
        tb.push(i, i, r.gen_range(0.5..2.0));
        for _ in 0..per_row {
            tb.push(i, r.gen_range(0..n), r.gen_range(-1.0..1.0));
        }
    }
    tb.build(false)
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-300);
    num / den
}

/// `max_j |Σᵢ Pᵢⱼ − 1|`
pub fn partition_of_unity_error(c: &CouplingMatrix) -> f64 {
    let pt = c.pt();
    (0..pt.nrows())
        .map(|j| (pt.row(j).map(|(_, v)| v).sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max)
}

/// Max error of `D` applied to an affine field, against pointwise evaluation.
pub fn linear_reproduction_error(mesh: &FluidMesh, solid: &SolidMesh, c: &CouplingMatrix, a: [f64; 6]) -> f64 {
    let f = |x: [f64; 2]| [a[0] + a[1] * x[0] + a[2] * x[1], a[3] + a[4] * x[0] + a[5] * x[1]];
    let u = mesh.interpolate_velocity(f);
    let us = c.interpolate_to_solid(&u).unwrap();
    let n = solid.n_nodes();
    let scale = a.iter().map(|v| v.abs()).fold(1.0, f64::max);
    solid
        .current()
        .iter()
        .enumerate()
        .map(|(j, &x)| {
            let e = f(x);
            (us[j] - e[0]).abs().max((us[n + j] - e[1]).abs()) / scale
        })
        .fold(0.0, f64::max)
}

/// Staged `Dᵀ Aˢ D u` against the explicitly assembled sandwich and against a
/// dense triple product; returns the larger relative deviation.
pub fn sandwich_error(c: &CouplingMatrix, seed: u64) -> f64 {
    let ns = 2 * c.n_solid_nodes();
    let nf = 2 * c.n_fluid_dofs();
    let a_s = random_sparse(ns, 3, seed);
    let mut r = rng(seed + 1);
    let u: Vec<f64> = (0..nf).map(|_| r.gen_range(-1.0..1.0)).collect();
    let staged = c.sandwich_apply(&a_s, &u).unwrap();
    let assembled = c.assemble_sandwich(&a_s).unwrap().mul_vec(&u);
    let d = c.d_operator().to_dense();
    let ad = a_s.to_dense();
    let du: Vec<f64> = d.iter().map(|row| row.iter().zip(&u).map(|(x, y)| x * y).sum()).collect();
    let adu: Vec<f64> = ad.iter().map(|row| row.iter().zip(&du).map(|(x, y)| x * y).sum()).collect();
    let dense: Vec<f64> = (0..nf).map(|k| (0..ns).map(|i| d[i][k] * adu[i]).sum()).collect();
    rel_diff(&staged, &assembled).max(rel_diff(&staged, &dense))
}

/// `‖K u‖ / (‖K‖_max ‖u‖)` over two translations and the rotation.
pub fn rigid_mode_residual(k: &SparseOperator, mesh: &FluidMesh) -> f64 {
    type Mode = Box<dyn Fn([f64; 2]) -> [f64; 2]>;
    let modes: [Mode; 3] = [
        Box::new(|_| [1.0, 0.0]),
        Box::new(|_| [0.0, 1.0]),
        Box::new(|x| [-x[1], x[0]]),
    ];
    let kmax = k.max_abs();
    modes
        .iter()
        .map(|m| {
            let u = mesh.interpolate_velocity(m);
            let ku = k.mul_vec(&u);
            let nu = u.iter().map(|v| v * v).sum::<f64>().sqrt();
            ku.iter().map(|v| v * v).sum::<f64>().sqrt() / (kmax * nu)
        })
        .fold(0.0, f64::max)
}

/// Cavity with a soft disc, small enough for a step to take milliseconds.
pub fn tiny_cavity() -> ScenarioConfig {
    let mut c = preset("cavity_disc").unwrap();
    c.domain.nx = 6;
    c.domain.ny = 6;
    c.refinement.levels = 1;
    c.refinement.halo = 0.05;
    c.refinement.readapt_every = 2;
    c.solid = SolidConfig::Disc {
        center: [0.6, 0.5],
        radius: 0.2,
        boundary_nodes: 18,
    };
    c.time.dt = 0.01;
    c.time.end_time = 0.05;
    c.output.every = 1;
    c.output.vtk = false;
    c
}

/// Largest `‖Bᵀu‖` seen over `steps` steps.
pub fn max_divergence(config: ScenarioConfig, steps: usize) -> f64 {
    let mut sim = Simulation::new(config).unwrap();
    (0..steps).map(|_| sim.step().unwrap().divergence_norm).fold(0.0, f64::max)
}

/// Runs the scenario twice into fresh directories; true if the CSVs are identical bytes.
pub fn csv_is_deterministic(config: &ScenarioConfig) -> bool {
    let read = || {
        let dir = tempfile::tempdir().unwrap();
        let opts = RunOptions {
            output_dir: dir.path().into(),
            ..Default::default()
        };
        run_scenario(config, &opts).unwrap();
        std::fs::read(dir.path().join("timeseries.csv")).unwrap()
    };
    read() == read()
}

/// Steps to `n`, checkpoints through JSON, and compares step `n + 1` bitwise.
pub fn restart_is_bitwise(config: &ScenarioConfig, n: usize) -> bool {
    let mut a = Simulation::new(config.clone()).unwrap();
    for _ in 0..n {
        a.step().unwrap();
    }
    let json = a.checkpoint().to_json().unwrap();
    let ck = onefield::simulation::Checkpoint::from_json(&json).unwrap();
    let mut b = Simulation::from_checkpoint(config.clone(), ck).unwrap();
    a.step().unwrap();
    b.step().unwrap();
    let (sa, sb) = (a.state(), b.state());
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    bits(&sa.u) == bits(&sb.u)
        && bits(&sa.p) == bits(&sb.p)
        && bits(&sa.u_s) == bits(&sb.u_s)
        && a.solid().map(|s| s.current().to_vec()) == b.solid().map(|s| s.current().to_vec())
}
