//! Energy budget, solid area, probes and the empirical falling-disc velocity.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::fluid::cell_points;
use crate::basis::triangle_area;
use crate::error::{check_len, Result};
use crate::mesh::{FluidMesh, SolidMesh};
use crate::quadrature::QuadratureRule;
use crate::solid_state::accumulate_deformation;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBudget {
    pub kinetic_fluid: f64,
    pub kinetic_solid: f64,
    pub dissipation: f64,
    pub potential: f64,
}

impl EnergyBudget {
    pub fn total(&self) -> f64 {
        self.kinetic_fluid + self.kinetic_solid + self.dissipation + self.potential
    }
}

fn integrate_cells(mesh: &FluidMesh, u: &[f64], f: impl Fn([f64; 2], [[f64; 2]; 2]) -> f64 + Sync) -> f64 {
    let n = mesh.n_velocity_dofs();
    let rule = QuadratureRule::gauss_quad(4);
    let per_cell: Vec<f64> = (0..mesh.n_cells())
        .into_par_iter()
        .map(|c| {
            let v0 = mesh.cell_values(c, &u[..n]);
            let v1 = mesh.cell_values(c, &u[n..]);
            let mut s = 0.0;
            for q in cell_points(mesh, c, &rule) {
                let mut val = [0.0; 2];
                let mut grad = [[0.0; 2]; 2];
                for a in 0..9 {
                    val[0] += v0[a] * q.values[a];
                    val[1] += v1[a] * q.values[a];
                    for j in 0..2 {
                        grad[0][j] += v0[a] * q.grads[a][j];
                        grad[1][j] += v1[a] * q.grads[a][j];
                    }
                }
                s += f(val, grad) * q.jxw;
            }
            s
        })
        .collect();
    // fixed summation order keeps results bitwise reproducible
    per_cell.iter().sum()
}

/// `(ρf/2)∫_Ω |u|²`.
pub fn kinetic_energy_fluid(mesh: &FluidMesh, u: &[f64], rho_f: f64) -> Result<f64> {
    check_len("velocity", 2 * mesh.n_velocity_dofs(), u.len())?;
    Ok(0.5 * rho_f * integrate_cells(mesh, u, |v, _| v[0] * v[0] + v[1] * v[1]))
}

/// `((ρs − ρf)/2)∫_{Ωˢ} |uˢ|²` with the exact P1 mass on the current triangles.
pub fn kinetic_energy_solid_correction(solid: &SolidMesh, u_s: &[f64], rho_s: f64, rho_f: f64) -> Result<f64> {
    let n = solid.n_nodes();
    check_len("solid velocity", 2 * n, u_s.len())?;
    let mut total = 0.0;
    for (e, tri) in solid.triangles().iter().enumerate() {
        let area = solid.current_area(e);
        for c in 0..2 {
            let v = [u_s[c * n + tri[0]], u_s[c * n + tri[1]], u_s[c * n + tri[2]]];
            let s: f64 = v.iter().sum();
            let sq: f64 = v.iter().map(|x| x * x).sum();
            total += area / 12.0 * (sq + s * s);
        }
    }
    Ok(0.5 * (rho_s - rho_f) * total)
}

/// `Δt ∫_Ω μf(∇u + ∇uᵀ):∇u`.
pub fn viscous_dissipation_increment(mesh: &FluidMesh, u: &[f64], mu_f: f64, dt: f64) -> Result<f64> {
    check_len("velocity", 2 * mesh.n_velocity_dofs(), u.len())?;
    let s = integrate_cells(mesh, u, |_, g| {
        let mut acc = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                acc += (g[i][j] + g[j][i]) * g[i][j];
            }
        }
        acc
    });
    Ok(dt * mu_f * s)
}

/// `(μs/2) Σ (tr FFᵀ − 2) A₀`.
pub fn potential_energy_solid(solid: &SolidMesh, mu_s: f64) -> Result<f64> {
    let f = accumulate_deformation(solid)?;
    Ok(f.iter()
        .zip(solid.reference_areas())
        .map(|(f, a)| 0.5 * mu_s * ((f * f.transpose()).trace() - 2.0) * a)
        .sum())
}

pub fn solid_area(solid: &SolidMesh) -> f64 {
    solid
        .triangles()
        .iter()
        .map(|t| {
            let x = solid.current();
            triangle_area(x[t[0]], x[t[1]], x[t[2]])
        })
        .sum()
}

/// Terminal velocity of a cylinder of radius `r` falling between walls `2L` apart.
pub fn empirical_terminal_velocity(rho_s: f64, rho_f: f64, mu_f: f64, g: f64, r: f64, l: f64) -> f64 {
    let k = r / l;
    (rho_s - rho_f) * g * r * r / (4.0 * mu_f) * ((l / r).ln() - 0.9157 + 1.7244 * k * k - 1.7302 * k.powi(4))
}

pub fn probe_tip_displacement(solid: &SolidMesh, node: usize) -> [f64; 2] {
    let x = solid.current()[node];
    let x0 = solid.reference()[node];
    [x[0] - x0[0], x[1] - x0[1]]
}

/// Relative deviation of a nodal solid velocity from its least-squares rigid fit
/// `v + ω × (x − x̄)`: `max |u − u_rigid| / max |u|`.
pub fn rigid_motion_deviation(solid: &SolidMesh, u_s: &[f64]) -> Result<f64> {
    let n = solid.n_nodes();
    check_len("solid velocity", 2 * n, u_s.len())?;
    let x = solid.current();
    let inv_n = 1.0 / n as f64;
    let c = x.iter().fold([0.0; 2], |a, p| [a[0] + p[0] * inv_n, a[1] + p[1] * inv_n]);
    let v = (0..n).fold([0.0; 2], |a, i| [a[0] + u_s[i] * inv_n, a[1] + u_s[n + i] * inv_n]);
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..n {
        let r = [x[i][0] - c[0], x[i][1] - c[1]];
        num += r[0] * (u_s[n + i] - v[1]) - r[1] * (u_s[i] - v[0]);
        den += r[0] * r[0] + r[1] * r[1];
    }
    let omega = if den > 0.0 { num / den } else { 0.0 };
    let mut dev: f64 = 0.0;
    let mut mag: f64 = 0.0;
    for i in 0..n {
        let r = [x[i][0] - c[0], x[i][1] - c[1]];
        let ur = [v[0] - omega * r[1], v[1] + omega * r[0]];
        dev = dev.max(((u_s[i] - ur[0]).powi(2) + (u_s[n + i] - ur[1]).powi(2)).sqrt());
        mag = mag.max((u_s[i].powi(2) + u_s[n + i].powi(2)).sqrt());
    }
    Ok(if mag > 0.0 { dev / mag } else { 0.0 })
}

/// Amplitude (half peak-to-peak) and frequency of a sampled oscillation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillationStats {
    pub amplitude: f64,
    pub frequency: f64,
    pub n_peaks: usize,
}

/// Peak detection on `(t, y)` restricted to `t ∈ [t0, t1]`; `None` with fewer than two maxima.
pub fn oscillation_stats(t: &[f64], y: &[f64], t0: f64, t1: f64) -> Option<OscillationStats> {
    let idx: Vec<usize> = (0..t.len().min(y.len())).filter(|&i| t[i] >= t0 && t[i] <= t1).collect();
    if idx.len() < 3 {
        return None;
    }
    let mut max_t = Vec::new();
    let mut maxima = Vec::new();
    let mut minima = Vec::new();
    for w in idx.windows(3) {
        let (a, b, c) = (y[w[0]], y[w[1]], y[w[2]]);
        if b > a && b >= c {
            maxima.push(b);
            max_t.push(t[w[1]]);
        } else if b < a && b <= c {
            minima.push(b);
        }
    }
    if maxima.len() < 2 || minima.is_empty() {
        return None;
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let period = (max_t[max_t.len() - 1] - max_t[0]) / (max_t.len() - 1) as f64;
    Some(OscillationStats {
        amplitude: 0.5 * (mean(&maxima) - mean(&minima)),
        frequency: 1.0 / period,
        n_peaks: maxima.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Rect;

    fn unit() -> FluidMesh {
        FluidMesh::structured(Rect::new(0.0, 0.0, 1.0, 1.0), 4, 4).unwrap()
    }

    #[test]
    fn constant_kinetic_energy() {
        let m = unit();
        let u = m.interpolate_velocity(|_| [3.0, 4.0]);
        assert!((kinetic_energy_fluid(&m, &u, 1.0).unwrap() - 12.5).abs() < 1e-12);
        assert!(viscous_dissipation_increment(&m, &u, 1.0, 1.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn shear_and_rotation_dissipation() {
        let m = unit();
        let shear = m.interpolate_velocity(|x| [x[1], 0.0]);
        assert!((viscous_dissipation_increment(&m, &shear, 1.0, 1.0).unwrap() - 1.0).abs() < 1e-12);
        let rot = m.interpolate_velocity(|x| [-x[1], x[0]]);
        assert!(viscous_dissipation_increment(&m, &rot, 1.0, 1.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn stretch_potential() {
        let s = SolidMesh::rectangle([0.0, 0.0], 1.0, 1.0, 3, 3).unwrap();
        assert_eq!(potential_energy_solid(&s, 2.0).unwrap(), 0.0);
        let mut t = s.clone();
        t.set_current(s.reference().iter().map(|p| [2.0 * p[0], 0.5 * p[1]]).collect())
            .unwrap();
        assert!((potential_energy_solid(&t, 2.0).unwrap() - 1.125 * 2.0).abs() < 1e-12);
    }

    #[test]
    fn terminal_velocity_oracle() {
        let u = empirical_terminal_velocity(1.2, 1.0, 1.0, 980.0, 0.0625, 1.0);
        assert!((u - 0.3567).abs() < 5e-5, "{u}");
        assert_eq!(empirical_terminal_velocity(1.0, 1.0, 1.0, 980.0, 0.0625, 1.0), 0.0);
    }

    #[test]
    fn solid_correction_uniform() {
        let s = SolidMesh::disc([0.5, 0.5], 0.2, 24).unwrap();
        let n = s.n_nodes();
        let mut u = vec![2.0; n];
        u.extend(vec![0.0; n]);
        let e = kinetic_energy_solid_correction(&s, &u, 2.0, 1.0).unwrap();
        assert!((e - 0.5 * 4.0 * s.area()).abs() < 1e-13);
    }

    #[test]
    fn rigid_fit_and_peaks() {
        let s = SolidMesh::disc([0.5, 0.5], 0.2, 24).unwrap();
        let n = s.n_nodes();
        let x = s.current();
        let mut u: Vec<f64> = (0..n).map(|i| 1.0 - 0.3 * (x[i][1] - 0.5)).collect();
        u.extend((0..n).map(|i| 0.3 * (x[i][0] - 0.5)));
        assert!(rigid_motion_deviation(&s, &u).unwrap() < 1e-12);
        let t: Vec<f64> = (0..2000).map(|i| i as f64 * 0.005).collect();
        let y: Vec<f64> = t.iter().map(|t| 1.3 * (2.0 * std::f64::consts::PI * 3.0 * t).sin()).collect();
        let st = oscillation_stats(&t, &y, 2.0, 9.9).unwrap();
        assert!((st.amplitude - 1.3).abs() < 1e-2);
        assert!((st.frequency - 3.0).abs() < 1e-2);
    }
}
