//! Updated-Lagrangian P1 triangle mesh of the solid.

use std::collections::BTreeMap;

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::basis::triangle_area;
use crate::error::{check_len, FsiError, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolidMesh {
    reference: Vec<[f64; 2]>,
    current: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    reference_area: Vec<f64>,
    /// Deviatoric stress history, one symmetric tensor per element.
    stress: Vec<Matrix2<f64>>,
    boundary_nodes: Vec<usize>,
    boundary_edges: Vec<(usize, usize)>,
}

impl SolidMesh {
    /// Builds a mesh in its reference (= current) configuration with zero stress.
    pub fn new(points: Vec<[f64; 2]>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let mut reference_area = Vec::with_capacity(triangles.len());
        for (e, t) in triangles.iter().enumerate() {
            if t.iter().any(|&n| n >= points.len()) {
                return Err(FsiError::InvalidMesh(format!("triangle {e} references a missing node")));
            }
            let a = triangle_area(points[t[0]], points[t[1]], points[t[2]]);
            if a <= 0.0 {
                return Err(FsiError::DegenerateElement { element: e, area: a });
            }
            reference_area.push(a);
        }
        let mut edge_count: BTreeMap<(usize, usize), (usize, usize, usize)> = BTreeMap::new();
        for t in &triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                edge_count.entry(key).or_insert((a, b, 0)).2 += 1;
            }
        }
        let boundary_edges: Vec<(usize, usize)> = edge_count
            .values()
            .filter(|e| e.2 == 1)
            .map(|e| (e.0, e.1))
            .collect();
        let mut boundary_nodes: Vec<usize> = boundary_edges.iter().flat_map(|e| [e.0, e.1]).collect();
        boundary_nodes.sort_unstable();
        boundary_nodes.dedup();
        let n_el = triangles.len();
        Ok(SolidMesh {
            current: points.clone(),
            reference: points,
            triangles,
            reference_area,
            stress: vec![Matrix2::zeros(); n_el],
            boundary_nodes,
            boundary_edges,
        })
    }

    /// Structured triangulation of an axis-aligned rectangle with alternating diagonals.
    pub fn rectangle(origin: [f64; 2], width: f64, height: f64, nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 || !(width > 0.0) || !(height > 0.0) {
            return Err(FsiError::InvalidMesh("rectangle needs positive size and counts".into()));
        }
        let mut pts = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                pts.push([
                    origin[0] + width * i as f64 / nx as f64,
                    origin[1] + height * j as f64 / ny as f64,
                ]);
            }
        }
        let id = |i: usize, j: usize| j * (nx + 1) + i;
        let mut tris = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                if (i + j) % 2 == 0 {
                    tris.push([a, b, c]);
                    tris.push([a, c, d]);
                } else {
                    tris.push([a, b, d]);
                    tris.push([b, c, d]);
                }
            }
        }
        Self::new(pts, tris)
    }

    /// Disc triangulated by concentric rings; node 0 is the centre and the outer
    /// ring carries `boundary_nodes` nodes.
    pub fn disc(center: [f64; 2], radius: f64, boundary_nodes: usize) -> Result<Self> {
        if boundary_nodes < 6 || !(radius > 0.0) {
            return Err(FsiError::InvalidMesh("disc needs radius > 0 and at least 6 boundary nodes".into()));
        }
        let rings = ((boundary_nodes as f64) / (2.0 * std::f64::consts::PI)).round().max(1.0) as usize;
        let mut pts = vec![center];
        let mut ring_start = vec![0usize];
        let mut ring_len = vec![1usize];
        for k in 1..=rings {
            let n = if k == rings {
                boundary_nodes
            } else {
                ((boundary_nodes as f64) * k as f64 / rings as f64).round().max(6.0) as usize
            };
            ring_start.push(pts.len());
            ring_len.push(n);
            let r = radius * k as f64 / rings as f64;
            // stagger alternate rings for better triangle shapes
            let phase = if k % 2 == 0 { 0.5 } else { 0.0 };
            for i in 0..n {
                let th = 2.0 * std::f64::consts::PI * (i as f64 + phase) / n as f64;
                pts.push([center[0] + r * th.cos(), center[1] + r * th.sin()]);
            }
        }
        let mut tris = Vec::new();
        let n1 = ring_len[1];
        for i in 0..n1 {
            tris.push([0, ring_start[1] + i, ring_start[1] + (i + 1) % n1]);
        }
        let two_pi = 2.0 * std::f64::consts::PI;
        let phase = |k: usize| if k.is_multiple_of(2) { 0.5 } else { 0.0 };
        for k in 1..rings {
            let (si, ni) = (ring_start[k], ring_len[k]);
            let (so, no) = (ring_start[k + 1], ring_len[k + 1]);
            let theta_in = |i: usize| two_pi * (i as f64 + phase(k)) / ni as f64;
            // outer start: node whose angle is closest to inner node 0
            let t0 = theta_in(0);
            let o0 = (0..no)
                .min_by(|&a, &b| {
                    let da = (two_pi * (a as f64 + phase(k + 1)) / no as f64 - t0).abs();
                    let db = (two_pi * (b as f64 + phase(k + 1)) / no as f64 - t0).abs();
                    da.partial_cmp(&db).unwrap()
                })
                .unwrap();
            let theta_out = |o: usize| two_pi * ((o0 + o) as f64 + phase(k + 1)) / no as f64;
            let inner_id = |i: usize| si + i % ni;
            let outer_id = |o: usize| so + (o0 + o) % no;
            let (mut i, mut o) = (0usize, 0usize);
            while i < ni || o < no {
                let advance_inner = if i >= ni {
                    false
                } else if o >= no {
                    true
                } else {
                    theta_in(i + 1) < theta_out(o + 1)
                };
                if advance_inner {
                    tris.push([inner_id(i), outer_id(o), inner_id(i + 1)]);
                    i += 1;
                } else {
                    tris.push([inner_id(i), outer_id(o), outer_id(o + 1)]);
                    o += 1;
                }
            }
        }
        // fix orientation
        for t in tris.iter_mut() {
            if triangle_area(pts[t[0]], pts[t[1]], pts[t[2]]) < 0.0 {
                t.swap(1, 2);
            }
        }
        Self::new(pts, tris)
    }

    pub fn n_nodes(&self) -> usize {
        self.current.len()
    }

    pub fn n_elements(&self) -> usize {
        self.triangles.len()
    }

    pub fn reference(&self) -> &[[f64; 2]] {
        &self.reference
    }

    pub fn current(&self) -> &[[f64; 2]] {
        &self.current
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn reference_areas(&self) -> &[f64] {
        &self.reference_area
    }

    pub fn stress(&self) -> &[Matrix2<f64>] {
        &self.stress
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary_nodes
    }

    pub fn boundary_edges(&self) -> &[(usize, usize)] {
        &self.boundary_edges
    }

    pub fn element_points(&self, e: usize) -> [[f64; 2]; 3] {
        let t = self.triangles[e];
        [self.current[t[0]], self.current[t[1]], self.current[t[2]]]
    }

    pub fn reference_points(&self, e: usize) -> [[f64; 2]; 3] {
        let t = self.triangles[e];
        [self.reference[t[0]], self.reference[t[1]], self.reference[t[2]]]
    }

    pub fn current_area(&self, e: usize) -> f64 {
        let p = self.element_points(e);
        triangle_area(p[0], p[1], p[2])
    }

    /// Node nearest to `x` in the reference configuration.
    pub fn nearest_reference_node(&self, x: [f64; 2]) -> usize {
        let mut best = 0;
        let mut bd = f64::MAX;
        for (i, p) in self.reference.iter().enumerate() {
            let d = (p[0] - x[0]).powi(2) + (p[1] - x[1]).powi(2);
            if d < bd {
                bd = d;
                best = i;
            }
        }
        best
    }

    /// Replaces the stress history (checked for symmetry).
    pub fn set_stress(&mut self, stress: Vec<Matrix2<f64>>) -> Result<()> {
        check_len("stress field", self.triangles.len(), stress.len())?;
        for (e, t) in stress.iter().enumerate() {
            let asym = (t[(0, 1)] - t[(1, 0)]).abs();
            if asym > 1e-10 * (1.0 + t.amax()) {
                return Err(FsiError::AsymmetricStress { element: e, asymmetry: asym });
            }
        }
        self.stress = stress;
        Ok(())
    }

    /// Overwrites current coordinates (e.g. restart), validating element areas.
    pub fn set_current(&mut self, current: Vec<[f64; 2]>) -> Result<()> {
        check_len("solid coordinates", self.reference.len(), current.len())?;
        let old = std::mem::replace(&mut self.current, current);
        if let Err(e) = self.validate_areas() {
            self.current = old;
            return Err(e);
        }
        Ok(())
    }

    fn validate_areas(&self) -> Result<()> {
        for e in 0..self.triangles.len() {
            let a = self.current_area(e);
            if !(a > 0.0) {
                return Err(FsiError::InvertedElement { element: e, area: a });
            }
        }
        Ok(())
    }

    /// Moves every node by `dt · u_s` (block layout `[u1; u2]`).
    pub fn update_coordinates(&self, u_s: &[f64], dt: f64) -> Result<SolidMesh> {
        let n = self.n_nodes();
        check_len("solid velocity", 2 * n, u_s.len())?;
        let mut next = self.clone();
        for (i, p) in next.current.iter_mut().enumerate() {
            p[0] += dt * u_s[i];
            p[1] += dt * u_s[n + i];
        }
        next.validate_areas()?;
        Ok(next)
    }

    /// Total current area.
    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|e| self.current_area(e)).sum()
    }

    /// Mean element area in the current configuration.
    pub fn mean_element_area(&self) -> f64 {
        self.area() / self.triangles.len().max(1) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rectangle_counts_and_area() {
        let s = SolidMesh::rectangle([1.0, 0.0], 0.0212, 0.8, 3, 20).unwrap();
        assert_eq!(s.n_nodes(), 4 * 21);
        assert_eq!(s.n_elements(), 120);
        assert!((s.area() - 0.0212 * 0.8).abs() < 1e-15);
        assert_eq!(s.boundary_nodes().len(), 2 * (3 + 20));
    }

    #[test]
    fn disc_mesh_is_valid() {
        for nb in [28, 48, 80, 250] {
            let s = SolidMesh::disc([0.5, 0.5], 0.2, nb).unwrap();
            let b = s.boundary_nodes().len();
            assert_eq!(b, nb);
            let poly = 0.5 * nb as f64 * 0.04 * (2.0 * std::f64::consts::PI / nb as f64).sin();
            assert!((s.area() - poly).abs() < 1e-12, "nb={nb}: {} vs {}", s.area(), poly);
            // Euler characteristic of a triangulated disc
            assert_eq!(s.n_elements(), 2 * s.n_nodes() - b - 2);
        }
    }

    #[test]
    fn translation_preserves_areas() {
        let s = SolidMesh::disc([0.0, 0.0], 1.0, 24).unwrap();
        let n = s.n_nodes();
        let mut u = vec![1.0; n];
        u.extend(vec![0.0; n]);
        let t = s.update_coordinates(&u, 0.1).unwrap();
        for e in 0..s.n_elements() {
            assert!((t.current_area(e) - s.current_area(e)).abs() < 1e-15);
        }
        assert_eq!(t.reference(), s.reference());
        assert!((t.current()[0][0] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn inversion_is_reported() {
        let s = SolidMesh::rectangle([0.0, 0.0], 1.0, 1.0, 1, 1).unwrap();
        let n = s.n_nodes();
        let mut u = vec![0.0; 2 * n];
        u[1] = -5.0; // drag node 1 far left
        match s.update_coordinates(&u, 1.0) {
            Err(FsiError::InvertedElement { .. }) => {}
            other => panic!("expected inversion, got {other:?}"),
        }
    }
}
