//! Legacy ASCII VTK writers for the fluid and solid fields.

use std::io::{self, Write};

use crate::basis::q1_values;
use crate::error::{check_len, Result};
use crate::mesh::{FluidMesh, SolidMesh};
use crate::solid_state::accumulate_deformation;

const VTK_BIQUADRATIC_QUAD: u8 = 28;
const VTK_TRIANGLE: u8 = 5;
/// Local Q2 index in VTK biquadratic-quad order: corners, edge midpoints, centre.
const Q2_TO_VTK: [usize; 9] = [0, 2, 8, 6, 1, 5, 7, 3, 4];

fn header<W: Write>(w: &mut W, title: &str) -> io::Result<()> {
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{title}")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")
}

/// Fluid mesh as biquadratic quads with nodal velocity and pressure.
pub fn write_fluid<W: Write>(mut w: W, mesh: &FluidMesh, u: &[f64], p: &[f64], time: f64) -> Result<()> {
    let n = mesh.n_velocity_dofs();
    check_len("velocity", 2 * n, u.len())?;
    check_len("pressure", mesh.n_pressure_dofs(), p.len())?;
    let vd = mesh.velocity_dofs();
    let ux = vd.expand_values(&u[..n]);
    let uy = vd.expand_values(&u[n..]);
    let pn = mesh.pressure_dofs().expand_values(p);
    let nodes = mesh.nodes();
    let mut pressure = vec![0.0; nodes.len()];
    for cell in mesh.cells() {
        let corner: Vec<f64> = cell.pressure_nodes.iter().map(|&k| pn[k]).collect();
        for (a, &node) in cell.velocity_nodes.iter().enumerate() {
            let xi = [(a % 3) as f64 - 1.0, (a / 3) as f64 - 1.0];
            let phi = q1_values(xi);
            pressure[node] = (0..4).map(|c| phi[c] * corner[c]).sum();
        }
    }

    header(&mut w, &format!("fluid t={time:e}"))?;
    writeln!(w, "POINTS {} double", nodes.len())?;
    for x in nodes {
        writeln!(w, "{:e} {:e} 0", x[0], x[1])?;
    }
    let nc = mesh.n_cells();
    writeln!(w, "CELLS {} {}", nc, nc * 10)?;
    for cell in mesh.cells() {
        write!(w, "9")?;
        for &k in &Q2_TO_VTK {
            write!(w, " {}", cell.velocity_nodes[k])?;
        }
        writeln!(w)?;
    }
    writeln!(w, "CELL_TYPES {nc}")?;
    for _ in 0..nc {
        writeln!(w, "{VTK_BIQUADRATIC_QUAD}")?;
    }
    writeln!(w, "CELL_DATA {nc}")?;
    writeln!(w, "SCALARS level int 1\nLOOKUP_TABLE default")?;
    for cell in mesh.cells() {
        writeln!(w, "{}", cell.level())?;
    }
    writeln!(w, "POINT_DATA {}", nodes.len())?;
    writeln!(w, "VECTORS velocity double")?;
    for i in 0..nodes.len() {
        writeln!(w, "{:e} {:e} 0", ux[i], uy[i])?;
    }
    writeln!(w, "SCALARS pressure double 1\nLOOKUP_TABLE default")?;
    for v in &pressure {
        writeln!(w, "{v:e}")?;
    }
    Ok(())
}

/// Solid mesh in its current configuration with nodal velocity/displacement and
/// per-element stress and deformation gradient.
pub fn write_solid<W: Write>(mut w: W, solid: &SolidMesh, u_s: &[f64], time: f64) -> Result<()> {
    let n = solid.n_nodes();
    check_len("solid velocity", 2 * n, u_s.len())?;
    let f = accumulate_deformation(solid)?;
    header(&mut w, &format!("solid t={time:e}"))?;
    writeln!(w, "POINTS {n} double")?;
    for x in solid.current() {
        writeln!(w, "{:e} {:e} 0", x[0], x[1])?;
    }
    let ne = solid.n_elements();
    writeln!(w, "CELLS {} {}", ne, ne * 4)?;
    for t in solid.triangles() {
        writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    writeln!(w, "CELL_TYPES {ne}")?;
    for _ in 0..ne {
        writeln!(w, "{VTK_TRIANGLE}")?;
    }
    writeln!(w, "CELL_DATA {ne}")?;
    writeln!(w, "TENSORS stress double")?;
    for t in solid.stress() {
        writeln!(w, "{:e} {:e} 0\n{:e} {:e} 0\n0 0 0", t[(0, 0)], t[(0, 1)], t[(1, 0)], t[(1, 1)])?;
    }
    writeln!(w, "TENSORS deformation_gradient double")?;
    for m in &f {
        writeln!(w, "{:e} {:e} 0\n{:e} {:e} 0\n0 0 1", m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)])?;
    }
    writeln!(w, "SCALARS det_F double 1\nLOOKUP_TABLE default")?;
    for m in &f {
        writeln!(w, "{:e}", m.determinant())?;
    }
    writeln!(w, "POINT_DATA {n}")?;
    writeln!(w, "VECTORS velocity double")?;
    for i in 0..n {
        writeln!(w, "{:e} {:e} 0", u_s[i], u_s[n + i])?;
    }
    writeln!(w, "VECTORS displacement double")?;
    for (x, x0) in solid.current().iter().zip(solid.reference()) {
        writeln!(w, "{:e} {:e} 0", x[0] - x0[0], x[1] - x0[1])?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Rect;

    #[test]
    fn fluid_file_layout() {
        let mesh = FluidMesh::structured(Rect::new(0.0, 0.0, 1.0, 1.0), 2, 1).unwrap();
        let u = mesh.interpolate_velocity(|x| [x[0], 0.0]);
        let p = mesh.interpolate_pressure(|x| x[1]);
        let mut buf = Vec::new();
        write_fluid(&mut buf, &mesh, &u, &p, 0.0).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("# vtk DataFile Version 3.0"));
        assert!(s.contains("POINTS 15 double"));
        assert!(s.contains("CELLS 2 20"));
        assert_eq!(s.lines().filter(|l| *l == "28").count(), 2);
    }

    #[test]
    fn solid_file_layout() {
        let s = SolidMesh::rectangle([0.0, 0.0], 1.0, 0.5, 2, 1).unwrap();
        let u = vec![0.0; 2 * s.n_nodes()];
        let mut buf = Vec::new();
        write_solid(&mut buf, &s, &u, 0.5).unwrap();
        let txt = String::from_utf8(buf).unwrap();
        assert!(txt.contains(&format!("CELLS {} {}", s.n_elements(), 4 * s.n_elements())));
        assert!(txt.contains("TENSORS stress double"));
    }
}
