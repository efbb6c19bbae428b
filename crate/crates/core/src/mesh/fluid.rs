//! Fixed Eulerian quadrilateral mesh with Taylor–Hood (Q2 velocity / Q1 pressure)
//! nodes and one-irregular hanging-node constraints.
//!
//! Cells are leaves of a quadtree over a structured base grid. Node positions are
//! keyed on an integer lattice (`LATTICE` units per base cell), so nodes shared by
//! cells of different levels are identified exactly.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::basis::{q2_values, QuadGeometry, CORNER_TO_Q2};
use crate::error::{FsiError, Result};
use crate::mesh::solid::SolidMesh;

/// Deepest refinement level supported by the lattice.
pub const MAX_LEVEL: u8 = 12;
const LATTICE: i64 = 1 << (MAX_LEVEL as i64 + 1);

/// `(level, ix, iy)`; indices count cells of that level across the whole domain.
pub type LeafKey = (u8, i64, i64);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Rect { x0, y0, x1, y1 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn contains(&self, p: [f64; 2], tol: f64) -> bool {
        p[0] >= self.x0 - tol && p[0] <= self.x1 + tol && p[1] >= self.y0 - tol && p[1] <= self.y1 + tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Bottom, Side::Right, Side::Top, Side::Left];

    /// Velocity component normal to this side.
    pub fn normal_component(self) -> usize {
        match self {
            Side::Left | Side::Right => 0,
            Side::Bottom | Side::Top => 1,
        }
    }

    pub fn outward_normal(self) -> [f64; 2] {
        match self {
            Side::Bottom => [0.0, -1.0],
            Side::Right => [1.0, 0.0],
            Side::Top => [0.0, 1.0],
            Side::Left => [-1.0, 0.0],
        }
    }
}

/// Expansion of every node onto the free (unconstrained) degrees of freedom.
#[derive(Debug, Clone)]
pub struct DofMap {
    expansion: Vec<Vec<(usize, f64)>>,
    free_to_node: Vec<usize>,
    node_to_free: Vec<Option<usize>>,
}

impl DofMap {
    fn resolve(n_nodes: usize, raw: &HashMap<usize, Vec<(usize, f64)>>) -> Self {
        let mut node_to_free = vec![None; n_nodes];
        let mut free_to_node = Vec::new();
        for (n, slot) in node_to_free.iter_mut().enumerate() {
            if !raw.contains_key(&n) {
                *slot = Some(free_to_node.len());
                free_to_node.push(n);
            }
        }
        fn expand(
            n: usize,
            raw: &HashMap<usize, Vec<(usize, f64)>>,
            node_to_free: &[Option<usize>],
            depth: usize,
            out: &mut Vec<(usize, f64)>,
            w: f64,
        ) {
            assert!(depth < 16, "cyclic hanging-node constraint");
            match raw.get(&n) {
                None => out.push((node_to_free[n].unwrap(), w)),
                Some(masters) => {
                    for &(m, wm) in masters {
                        expand(m, raw, node_to_free, depth + 1, out, w * wm);
                    }
                }
            }
        }
        let mut expansion = Vec::with_capacity(n_nodes);
        for n in 0..n_nodes {
            let mut out = Vec::new();
            expand(n, raw, &node_to_free, 0, &mut out, 1.0);
            out.sort_by_key(|e| e.0);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(out.len());
            for (d, w) in out {
                match merged.last_mut() {
                    Some(last) if last.0 == d => last.1 += w,
                    _ => merged.push((d, w)),
                }
            }
            expansion.push(merged);
        }
        DofMap {
            expansion,
            free_to_node,
            node_to_free,
        }
    }

    pub fn n_free(&self) -> usize {
        self.free_to_node.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.expansion.len()
    }

    #[inline]
    pub fn expansion(&self, node: usize) -> &[(usize, f64)] {
        &self.expansion[node]
    }

    pub fn is_constrained(&self, node: usize) -> bool {
        self.node_to_free[node].is_none()
    }

    pub fn free_dof(&self, node: usize) -> Option<usize> {
        self.node_to_free[node]
    }

    pub fn node_of(&self, dof: usize) -> usize {
        self.free_to_node[dof]
    }

    /// Values at every node (constrained ones interpolated) from free-dof values.
    pub fn expand_values(&self, free: &[f64]) -> Vec<f64> {
        self.expansion
            .iter()
            .map(|e| e.iter().map(|&(d, w)| w * free[d]).sum())
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct FluidCell {
    pub key: LeafKey,
    /// Velocity node ids in local Q2 order.
    pub velocity_nodes: [usize; 9],
    /// Pressure node ids in corner order.
    pub pressure_nodes: [usize; 4],
    pub geometry: QuadGeometry,
}

impl FluidCell {
    pub fn level(&self) -> u8 {
        self.key.0
    }
}

/// A cell edge on the outer boundary.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryFace {
    pub cell: usize,
    pub side: Side,
    /// Velocity nodes along the edge: start vertex, midpoint, end vertex.
    pub nodes: [usize; 3],
}

#[derive(Debug, Clone)]
pub struct FluidMesh {
    domain: Rect,
    nx: usize,
    ny: usize,
    leaves: Vec<LeafKey>,
    leaf_lookup: HashMap<LeafKey, usize>,
    cells: Vec<FluidCell>,
    nodes: Vec<[f64; 2]>,
    lattice: Vec<(i64, i64)>,
    pressure_to_velocity: Vec<usize>,
    velocity_dofs: DofMap,
    pressure_dofs: DofMap,
    boundary_faces: Vec<BoundaryFace>,
    buckets: Vec<Vec<usize>>,
}

fn level_size(level: u8) -> i64 {
    LATTICE >> level
}

fn covering_leaf(leaves: &BTreeSet<LeafKey>, key: LeafKey) -> Option<LeafKey> {
    let (level, ix, iy) = key;
    for l in (0..=level).rev() {
        let shift = level - l;
        let k = (l, ix >> shift, iy >> shift);
        if leaves.contains(&k) {
            return Some(k);
        }
    }
    None
}

fn children(key: LeafKey) -> [LeafKey; 4] {
    let (l, ix, iy) = key;
    [
        (l + 1, 2 * ix, 2 * iy),
        (l + 1, 2 * ix + 1, 2 * iy),
        (l + 1, 2 * ix, 2 * iy + 1),
        (l + 1, 2 * ix + 1, 2 * iy + 1),
    ]
}

fn side_neighbor(key: LeafKey, side: Side) -> LeafKey {
    let (l, ix, iy) = key;
    match side {
        Side::Bottom => (l, ix, iy - 1),
        Side::Right => (l, ix + 1, iy),
        Side::Top => (l, ix, iy + 1),
        Side::Left => (l, ix - 1, iy),
    }
}

impl FluidMesh {
    /// Uniform `nx × ny` mesh of the rectangle.
    pub fn structured(domain: Rect, nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(FsiError::InvalidMesh(format!("cell counts must be positive, got {nx}×{ny}")));
        }
        if !(domain.width() > 0.0 && domain.height() > 0.0) {
            return Err(FsiError::InvalidMesh(format!(
                "domain extents must be positive, got {}×{}",
                domain.width(),
                domain.height()
            )));
        }
        let mut leaves = BTreeSet::new();
        for iy in 0..ny as i64 {
            for ix in 0..nx as i64 {
                leaves.insert((0u8, ix, iy));
            }
        }
        Self::from_leaves(domain, nx, ny, leaves)
    }

    fn in_domain(&self, key: LeafKey) -> bool {
        Self::key_in_domain(self.nx, self.ny, key)
    }

    fn key_in_domain(nx: usize, ny: usize, key: LeafKey) -> bool {
        let (l, ix, iy) = key;
        let n = 1i64 << l;
        ix >= 0 && iy >= 0 && ix < nx as i64 * n && iy < ny as i64 * n
    }

    fn lattice_point(domain: &Rect, nx: usize, ny: usize, k: (i64, i64)) -> [f64; 2] {
        let fx = k.0 as f64 / (nx as i64 * LATTICE) as f64;
        let fy = k.1 as f64 / (ny as i64 * LATTICE) as f64;
        [domain.x0 + domain.width() * fx, domain.y0 + domain.height() * fy]
    }

    /// Builds the mesh for an arbitrary (balanced) set of quadtree leaves.
    pub fn from_leaves(domain: Rect, nx: usize, ny: usize, leaf_set: BTreeSet<LeafKey>) -> Result<Self> {
        let mut leaves: Vec<LeafKey> = leaf_set.iter().copied().collect();
        for &k in &leaves {
            if k.0 > MAX_LEVEL || !Self::key_in_domain(nx, ny, k) {
                return Err(FsiError::InvalidMesh(format!("leaf {k:?} outside the quadtree")));
            }
        }
        // row-major order of lower-left lattice corner gives spatially coherent numbering
        leaves.sort_by_key(|&(l, ix, iy)| {
            let s = level_size(l);
            (iy * s, ix * s, l)
        });

        let mut node_map: HashMap<(i64, i64), usize> = HashMap::new();
        let mut lattice = Vec::new();
        let mut nodes = Vec::new();
        let mut pressure_map: HashMap<usize, usize> = HashMap::new();
        let mut pressure_to_velocity = Vec::new();
        let mut cells = Vec::with_capacity(leaves.len());
        let mut leaf_lookup = HashMap::with_capacity(leaves.len());

        for (ci, &key) in leaves.iter().enumerate() {
            let (l, ix, iy) = key;
            let s = level_size(l);
            let (ox, oy) = (ix * s, iy * s);
            let mut vn = [0usize; 9];
            for b in 0..3i64 {
                for a in 0..3i64 {
                    let k = (ox + a * s / 2, oy + b * s / 2);
                    let id = *node_map.entry(k).or_insert_with(|| {
                        lattice.push(k);
                        nodes.push(Self::lattice_point(&domain, nx, ny, k));
                        nodes.len() - 1
                    });
                    vn[(3 * b + a) as usize] = id;
                }
            }
            let mut pn = [0usize; 4];
            for (c, &q) in CORNER_TO_Q2.iter().enumerate() {
                let v = vn[q];
                pn[c] = *pressure_map.entry(v).or_insert_with(|| {
                    pressure_to_velocity.push(v);
                    pressure_to_velocity.len() - 1
                });
            }
            let corners = [nodes[vn[0]], nodes[vn[2]], nodes[vn[8]], nodes[vn[6]]];
            let geometry = QuadGeometry::new(corners);
            let det = geometry.jacobian([0.0, 0.0]).determinant();
            if det <= 0.0 {
                return Err(FsiError::DegenerateElement { element: ci, area: 4.0 * det });
            }
            cells.push(FluidCell {
                key,
                velocity_nodes: vn,
                pressure_nodes: pn,
                geometry,
            });
            leaf_lookup.insert(key, ci);
        }

        // hanging nodes sit on edges whose neighbour is refined one level further
        let mut vel_constraints: HashMap<usize, Vec<(usize, f64)>> = HashMap::new();
        let mut pres_constraints: HashMap<usize, Vec<(usize, f64)>> = HashMap::new();
        let mut boundary_faces = Vec::new();
        for (ci, cell) in cells.iter().enumerate() {
            let key = cell.key;
            for side in Side::ALL {
                let (e0, em, e1) = match side {
                    Side::Bottom => (0, 1, 2),
                    Side::Right => (2, 5, 8),
                    Side::Top => (6, 7, 8),
                    Side::Left => (0, 3, 6),
                };
                let edge = [cell.velocity_nodes[e0], cell.velocity_nodes[em], cell.velocity_nodes[e1]];
                let nb = side_neighbor(key, side);
                if !Self::key_in_domain(nx, ny, nb) {
                    boundary_faces.push(BoundaryFace { cell: ci, side, nodes: edge });
                    continue;
                }
                if leaf_set.contains(&nb) || covering_leaf(&leaf_set, nb).is_some() {
                    continue;
                }
                // neighbour refined: constrain the fine-side quarter points
                let k0 = lattice[edge[0]];
                let k1 = lattice[edge[2]];
                let q1 = (k0.0 + (k1.0 - k0.0) / 4, k0.1 + (k1.1 - k0.1) / 4);
                let q3 = (k0.0 + 3 * (k1.0 - k0.0) / 4, k0.1 + 3 * (k1.1 - k0.1) / 4);
                let missing = || FsiError::InvalidMesh(format!("mesh is not one-irregular near leaf {key:?}"));
                let n1 = *node_map.get(&q1).ok_or_else(missing)?;
                let n3 = *node_map.get(&q3).ok_or_else(missing)?;
                vel_constraints.insert(n1, vec![(edge[0], 0.375), (edge[1], 0.75), (edge[2], -0.125)]);
                vel_constraints.insert(n3, vec![(edge[0], -0.125), (edge[1], 0.75), (edge[2], 0.375)]);
                let pm = *pressure_map.get(&edge[1]).ok_or_else(missing)?;
                let p0 = pressure_map[&edge[0]];
                let p1 = pressure_map[&edge[2]];
                pres_constraints.insert(pm, vec![(p0, 0.5), (p1, 0.5)]);
            }
        }
        let velocity_dofs = DofMap::resolve(nodes.len(), &vel_constraints);
        let pressure_dofs = DofMap::resolve(pressure_to_velocity.len(), &pres_constraints);

        let mut buckets = vec![Vec::new(); nx * ny];
        for (ci, cell) in cells.iter().enumerate() {
            let (l, ix, iy) = cell.key;
            let bx = (ix >> l) as usize;
            let by = (iy >> l) as usize;
            buckets[by * nx + bx].push(ci);
        }

        Ok(FluidMesh {
            domain,
            nx,
            ny,
            leaves,
            leaf_lookup,
            cells,
            nodes,
            lattice,
            pressure_to_velocity,
            velocity_dofs,
            pressure_dofs,
            boundary_faces,
            buckets,
        })
    }

    pub fn domain(&self) -> Rect {
        self.domain
    }

    pub fn base_dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn cells(&self) -> &[FluidCell] {
        &self.cells
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn leaves(&self) -> &[LeafKey] {
        &self.leaves
    }

    pub fn cell_index(&self, key: LeafKey) -> Option<usize> {
        self.leaf_lookup.get(&key).copied()
    }

    /// Velocity node coordinates (all nodes, hanging ones included).
    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn n_velocity_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_pressure_nodes(&self) -> usize {
        self.pressure_to_velocity.len()
    }

    /// Velocity node hosting pressure node `p`.
    pub fn pressure_node_position(&self, p: usize) -> [f64; 2] {
        self.nodes[self.pressure_to_velocity[p]]
    }

    pub fn pressure_to_velocity(&self) -> &[usize] {
        &self.pressure_to_velocity
    }

    pub fn velocity_dofs(&self) -> &DofMap {
        &self.velocity_dofs
    }

    pub fn pressure_dofs(&self) -> &DofMap {
        &self.pressure_dofs
    }

    /// Free velocity dofs per component.
    pub fn n_velocity_dofs(&self) -> usize {
        self.velocity_dofs.n_free()
    }

    pub fn n_pressure_dofs(&self) -> usize {
        self.pressure_dofs.n_free()
    }

    pub fn boundary_faces(&self) -> &[BoundaryFace] {
        &self.boundary_faces
    }

    pub fn max_level(&self) -> u8 {
        self.cells.iter().map(|c| c.key.0).max().unwrap_or(0)
    }

    /// Velocity nodes lying on the given side of the domain.
    pub fn nodes_on_side(&self, side: Side) -> Vec<usize> {
        let nxl = self.nx as i64 * LATTICE;
        let nyl = self.ny as i64 * LATTICE;
        (0..self.nodes.len())
            .filter(|&n| {
                let (kx, ky) = self.lattice[n];
                match side {
                    Side::Bottom => ky == 0,
                    Side::Top => ky == nyl,
                    Side::Left => kx == 0,
                    Side::Right => kx == nxl,
                }
            })
            .collect()
    }

    /// Samples a vector field at the free velocity nodes, block layout `[u1; u2]`.
    pub fn interpolate_velocity(&self, f: impl Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
        let n = self.n_velocity_dofs();
        let mut u = vec![0.0; 2 * n];
        for d in 0..n {
            let v = f(self.nodes[self.velocity_dofs.node_of(d)]);
            u[d] = v[0];
            u[n + d] = v[1];
        }
        u
    }

    /// Samples a scalar field at the free pressure nodes.
    pub fn interpolate_pressure(&self, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
        (0..self.n_pressure_dofs())
            .map(|d| f(self.pressure_node_position(self.pressure_dofs.node_of(d))))
            .collect()
    }

    /// Q2 coefficients of one velocity component on a cell from free-dof values.
    pub fn cell_values(&self, cell: usize, component: &[f64]) -> [f64; 9] {
        let mut out = [0.0; 9];
        for (a, &n) in self.cells[cell].velocity_nodes.iter().enumerate() {
            out[a] = self
                .velocity_dofs
                .expansion(n)
                .iter()
                .map(|&(d, w)| w * component[d])
                .sum();
        }
        out
    }

    /// Evaluates the discrete velocity (block layout free-dof vector) at a point.
    pub fn evaluate_velocity(&self, u: &[f64], x: [f64; 2]) -> Result<[f64; 2]> {
        let n = self.n_velocity_dofs();
        let (cell, xi) = self.locate_point(x, None)?;
        let phi = q2_values(xi);
        let c0 = self.cell_values(cell, &u[..n]);
        let c1 = self.cell_values(cell, &u[n..]);
        let mut v = [0.0; 2];
        for a in 0..9 {
            v[0] += phi[a] * c0[a];
            v[1] += phi[a] * c1[a];
        }
        Ok(v)
    }

    /// Evaluates the discrete pressure at a point.
    pub fn evaluate_pressure(&self, p: &[f64], x: [f64; 2]) -> Result<f64> {
        let (cell, xi) = self.locate_point(x, None)?;
        let phi = crate::basis::q1_values(xi);
        let mut v = 0.0;
        for (c, &pn) in self.cells[cell].pressure_nodes.iter().enumerate() {
            let pv: f64 = self.pressure_dofs.expansion(pn).iter().map(|&(d, w)| w * p[d]).sum();
            v += phi[c] * pv;
        }
        Ok(v)
    }

    /// Finds the host cell of `x` and its local coordinates. `hint` is tried first.
    pub fn locate_point(&self, x: [f64; 2], hint: Option<usize>) -> Result<(usize, [f64; 2])> {
        let d = &self.domain;
        let tol = 1e-10 * d.width().max(d.height());
        if !d.contains(x, tol) || !x[0].is_finite() || !x[1].is_finite() {
            return Err(FsiError::PointOutsideDomain { x: x[0], y: x[1] });
        }
        if let Some(h) = hint {
            if h < self.cells.len() {
                if let Some(xi) = self.try_cell(h, x) {
                    return Ok((h, xi));
                }
            }
        }
        let hx = d.width() / self.nx as f64;
        let hy = d.height() / self.ny as f64;
        let fx = (x[0] - d.x0) / hx;
        let fy = (x[1] - d.y0) / hy;
        let bx = (fx.floor() as i64).clamp(0, self.nx as i64 - 1);
        let by = (fy.floor() as i64).clamp(0, self.ny as i64 - 1);
        let mut tried_neighbours = false;
        for (dx, dy) in [(0, 0), (-1, 0), (1, 0), (0, -1), (0, 1), (-1, -1), (1, -1), (-1, 1), (1, 1)] {
            if tried_neighbours && (dx, dy) == (0, 0) {
                continue;
            }
            let (cx, cy) = (bx + dx, by + dy);
            if cx < 0 || cy < 0 || cx >= self.nx as i64 || cy >= self.ny as i64 {
                continue;
            }
            for &c in &self.buckets[cy as usize * self.nx + cx as usize] {
                if let Some(xi) = self.try_cell(c, x) {
                    return Ok((c, xi));
                }
            }
            tried_neighbours = true;
        }
        Err(FsiError::PointOutsideDomain { x: x[0], y: x[1] })
    }

    fn try_cell(&self, c: usize, x: [f64; 2]) -> Option<[f64; 2]> {
        let g = &self.cells[c].geometry;
        let (lo, hi) = g.bounding_box();
        let diam = g.diameter();
        let slack = 1e-10 * diam;
        if x[0] < lo[0] - slack || x[0] > hi[0] + slack || x[1] < lo[1] - slack || x[1] > hi[1] + slack {
            return None;
        }
        let (xi, res) = g.inverse_map(x, [0.0, 0.0], 20, 1e-14 * diam);
        let lim = 1.0 + 1e-10;
        if res <= 1e-12 * diam && xi[0].abs() <= lim && xi[1].abs() <= lim {
            Some(xi)
        } else {
            None
        }
    }

    /// Quadrisects the given leaves and restores the one-irregular rule.
    pub fn refine_cells(&self, targets: &[LeafKey]) -> Result<FluidMesh> {
        let mut set: BTreeSet<LeafKey> = self.leaves.iter().copied().collect();
        for &t in targets {
            if t.0 >= MAX_LEVEL {
                return Err(FsiError::InvalidMesh(format!("refinement beyond level {MAX_LEVEL}")));
            }
            if set.remove(&t) {
                set.extend(children(t));
            }
        }
        self.balance(&mut set)?;
        Self::from_leaves(self.domain, self.nx, self.ny, set)
    }

    fn balance(&self, set: &mut BTreeSet<LeafKey>) -> Result<()> {
        let mut work: Vec<LeafKey> = set.iter().copied().collect();
        while let Some(key) = work.pop() {
            if !set.contains(&key) || key.0 < 2 {
                continue;
            }
            for side in Side::ALL {
                let nb = side_neighbor(key, side);
                if !self.in_domain(nb) {
                    continue;
                }
                if let Some(cov) = covering_leaf(set, nb) {
                    if cov.0 + 1 < key.0 {
                        set.remove(&cov);
                        let ch = children(cov);
                        set.extend(ch);
                        work.extend(ch);
                        work.push(key);
                    }
                }
            }
        }
        Ok(())
    }

    /// Refines every cell whose bounding box lies within `halo` of the solid
    /// boundary until those cells reach `levels`.
    pub fn refine_near_solid(&self, solid: &SolidMesh, levels: u8, halo: f64) -> Result<FluidMesh> {
        if levels == 0 {
            return Ok(self.clone());
        }
        if levels > MAX_LEVEL {
            return Err(FsiError::InvalidMesh(format!("levels {levels} exceeds {MAX_LEVEL}")));
        }
        let segments: Vec<([f64; 2], [f64; 2])> = solid
            .boundary_edges()
            .iter()
            .map(|&(a, b)| (solid.current()[a], solid.current()[b]))
            .collect();
        let mut mesh = self.clone();
        for _ in 0..levels {
            let targets: Vec<LeafKey> = mesh
                .cells
                .iter()
                .filter(|c| c.key.0 < levels)
                .filter(|c| {
                    let (lo, hi) = c.geometry.bounding_box();
                    segments.iter().any(|&(a, b)| box_segment_distance(lo, hi, a, b) <= halo)
                })
                .map(|c| c.key)
                .collect();
            if targets.is_empty() {
                break;
            }
            mesh = mesh.refine_cells(&targets)?;
        }
        Ok(mesh)
    }

    /// Pairs of cells sharing an edge segment of positive length.
    pub fn edge_adjacent_pairs(&self) -> Vec<(usize, usize)> {
        let set: BTreeSet<LeafKey> = self.leaves.iter().copied().collect();
        let mut pairs = Vec::new();
        for (ci, cell) in self.cells.iter().enumerate() {
            for side in Side::ALL {
                let nb = side_neighbor(cell.key, side);
                if !self.in_domain(nb) {
                    continue;
                }
                if let Some(cov) = covering_leaf(&set, nb) {
                    pairs.push((ci, self.leaf_lookup[&cov]));
                }
            }
        }
        pairs
    }
}

/// Euclidean distance between an axis-aligned box and a segment.
pub fn box_segment_distance(lo: [f64; 2], hi: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    if segment_intersects_box(lo, hi, a, b) {
        return 0.0;
    }
    let pt_box = |p: [f64; 2]| {
        let dx = (lo[0] - p[0]).max(0.0).max(p[0] - hi[0]);
        let dy = (lo[1] - p[1]).max(0.0).max(p[1] - hi[1]);
        (dx * dx + dy * dy).sqrt()
    };
    let pt_seg = |p: [f64; 2]| {
        let d = [b[0] - a[0], b[1] - a[1]];
        let len2 = d[0] * d[0] + d[1] * d[1];
        let t = if len2 > 0.0 {
            (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let q = [a[0] + t * d[0], a[1] + t * d[1]];
        ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
    };
    let corners = [lo, [hi[0], lo[1]], hi, [lo[0], hi[1]]];
    let mut m = pt_box(a).min(pt_box(b));
    for c in corners {
        m = m.min(pt_seg(c));
    }
    m
}

fn segment_intersects_box(lo: [f64; 2], hi: [f64; 2], a: [f64; 2], b: [f64; 2]) -> bool {
    // Liang–Barsky clipping
    let d = [b[0] - a[0], b[1] - a[1]];
    let mut t0 = 0.0f64;
    let mut t1 = 1.0f64;
    for k in 0..2 {
        if d[k] == 0.0 {
            if a[k] < lo[k] || a[k] > hi[k] {
                return false;
            }
        } else {
            let mut ta = (lo[k] - a[k]) / d[k];
            let mut tb = (hi[k] - a[k]) / d[k];
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
            if t0 > t1 {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> Rect {
        Rect::new(0.0, 0.0, 1.0, 1.0)
    }

    #[test]
    fn structured_counts() {
        let m = FluidMesh::structured(unit(), 20, 20).unwrap();
        assert_eq!(m.n_cells(), 400);
        assert_eq!(m.n_velocity_nodes(), 41 * 41);
        assert_eq!(m.n_pressure_nodes(), 21 * 21);
        assert_eq!(m.n_velocity_dofs(), 41 * 41);
        assert_eq!(m.boundary_faces().len(), 80);
    }

    #[test]
    fn channel_extent() {
        let m = FluidMesh::structured(Rect::new(0.0, 0.0, 4.0, 1.0), 8, 2).unwrap();
        let (mut lo, mut hi) = ([f64::MAX; 2], [f64::MIN; 2]);
        for p in m.nodes() {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        assert_eq!((lo, hi), ([0.0, 0.0], [4.0, 1.0]));
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(FluidMesh::structured(unit(), 0, 3).is_err());
        assert!(FluidMesh::structured(Rect::new(0.0, 0.0, -1.0, 1.0), 2, 2).is_err());
    }

    #[test]
    fn single_refinement_creates_hanging_nodes() {
        let m = FluidMesh::structured(unit(), 3, 3).unwrap();
        let r = m.refine_cells(&[(0, 1, 1)]).unwrap();
        assert_eq!(r.n_cells(), 9 - 1 + 4);
        // four coarse edges around the refined cell, two hanging velocity nodes each
        let hanging_v = (0..r.n_velocity_nodes())
            .filter(|&n| r.velocity_dofs().is_constrained(n))
            .count();
        assert_eq!(hanging_v, 8);
        let hanging_p = (0..r.n_pressure_nodes())
            .filter(|&n| r.pressure_dofs().is_constrained(n))
            .count();
        assert_eq!(hanging_p, 4);
        for n in 0..r.n_velocity_nodes() {
            let s: f64 = r.velocity_dofs().expansion(n).iter().map(|e| e.1).sum();
            assert!((s - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn box_segment_distance_cases() {
        let lo = [0.0, 0.0];
        let hi = [1.0, 1.0];
        assert_eq!(box_segment_distance(lo, hi, [-1.0, 0.5], [2.0, 0.5]), 0.0);
        assert!((box_segment_distance(lo, hi, [2.0, -1.0], [2.0, 3.0]) - 1.0).abs() < 1e-15);
        let d = box_segment_distance(lo, hi, [2.0, 3.0], [3.0, 2.0]);
        assert!((d - (2.0f64).sqrt() * 1.5).abs() < 1e-12);
    }
}
