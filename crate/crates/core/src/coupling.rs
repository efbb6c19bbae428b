//! Interpolation operator between the fluid velocity space and the solid nodes.
//!
//! `P` has one row per free fluid velocity dof and one column per solid node,
//! `P[i][j] = φᵢ(xⱼ)`, with hanging-node constraints folded into the masters.
//! Velocity vectors use the block layout `[u1; u2]`, so `D = diag(Pᵀ, Pᵀ)`.

use std::io::Write;

use rayon::prelude::*;

use crate::basis::q2_values;
use crate::error::{check_len, FsiError, Result};
use crate::mesh::{FluidMesh, SolidMesh};
use crate::sparse::{SparseOperator, TripletBuilder};

/// Where one solid node sits in the fluid mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HostRecord {
    pub cell: usize,
    pub xi: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct CouplingMatrix {
    p: SparseOperator,
    /// `Pᵀ`, kept for fast fluid → solid interpolation.
    pt: SparseOperator,
    hosts: Vec<HostRecord>,
    snapshot: Vec<[f64; 2]>,
    n_fluid: usize,
}

impl CouplingMatrix {
    pub fn build(mesh: &FluidMesh, solid: &SolidMesh) -> Result<Self> {
        Self::build_with_hints(mesh, solid, None)
    }

    /// Rebuilds for the solid's current position, starting each point search
    /// from the previous host cell.
    pub fn rebuild(&self, mesh: &FluidMesh, solid: &SolidMesh) -> Result<Self> {
        let hints = (self.hosts.len() == solid.n_nodes()).then_some(self.hosts.as_slice());
        Self::build_with_hints(mesh, solid, hints)
    }

    fn build_with_hints(mesh: &FluidMesh, solid: &SolidMesh, hints: Option<&[HostRecord]>) -> Result<Self> {
        let pts = solid.current();
        let hosts: Vec<HostRecord> = pts
            .par_iter()
            .enumerate()
            .map(|(j, &x)| {
                let hint = hints.map(|h| h[j].cell);
                mesh.locate_point(x, hint).map(|(cell, xi)| HostRecord { cell, xi })
            })
            .collect::<Result<_>>()?;
        let n_fluid = mesh.n_velocity_dofs();
        let dofs = mesh.velocity_dofs();
        // build Pᵀ row by row (one row per solid node), then transpose
        let mut tb = TripletBuilder::with_capacity(pts.len(), n_fluid, 12 * pts.len());
        for (j, h) in hosts.iter().enumerate() {
            let phi = q2_values(h.xi);
            for (a, &node) in mesh.cells()[h.cell].velocity_nodes.iter().enumerate() {
                for &(d, w) in dofs.expansion(node) {
                    tb.push(j, d, w * phi[a]);
                }
            }
        }
        let pt = tb.build(false);
        let p = pt.transpose();
        Ok(CouplingMatrix {
            p,
            pt,
            hosts,
            snapshot: pts.to_vec(),
            n_fluid,
        })
    }

    /// `P` (fluid dofs × solid nodes).
    pub fn p(&self) -> &SparseOperator {
        &self.p
    }

    pub fn pt(&self) -> &SparseOperator {
        &self.pt
    }

    pub fn hosts(&self) -> &[HostRecord] {
        &self.hosts
    }

    pub fn n_fluid_dofs(&self) -> usize {
        self.n_fluid
    }

    pub fn n_solid_nodes(&self) -> usize {
        self.pt.nrows()
    }

    /// Fails if the solid has moved since this operator was built.
    pub fn ensure_current(&self, solid: &SolidMesh) -> Result<()> {
        let same = self.snapshot.len() == solid.n_nodes()
            && self
                .snapshot
                .iter()
                .zip(solid.current())
                .all(|(a, b)| a[0].to_bits() == b[0].to_bits() && a[1].to_bits() == b[1].to_bits());
        if same {
            Ok(())
        } else {
            Err(FsiError::StaleCoupling)
        }
    }

    /// `uˢ = D u`
    pub fn interpolate_to_solid(&self, u: &[f64]) -> Result<Vec<f64>> {
        let nf = self.n_fluid;
        check_len("fluid velocity", 2 * nf, u.len())?;
        let ns = self.n_solid_nodes();
        let mut out = vec![0.0; 2 * ns];
        let (o1, o2) = out.split_at_mut(ns);
        self.pt.mul_vec_into(&u[..nf], o1);
        self.pt.mul_vec_into(&u[nf..], o2);
        Ok(out)
    }

    /// `Dᵀ v` for a solid-space vector `v`.
    pub fn restrict_to_fluid(&self, v: &[f64]) -> Result<Vec<f64>> {
        let ns = self.n_solid_nodes();
        check_len("solid vector", 2 * ns, v.len())?;
        let nf = self.n_fluid;
        let mut out = vec![0.0; 2 * nf];
        let (o1, o2) = out.split_at_mut(nf);
        self.p.mul_vec_into(&v[..ns], o1);
        self.p.mul_vec_into(&v[ns..], o2);
        Ok(out)
    }

    /// `Dᵀ(Aˢ(D u))` as three staged products.
    pub fn sandwich_apply(&self, a_s: &SparseOperator, u: &[f64]) -> Result<Vec<f64>> {
        let ns = self.n_solid_nodes();
        check_len("solid operator rows", 2 * ns, a_s.nrows())?;
        check_len("solid operator cols", 2 * ns, a_s.ncols())?;
        let us = self.interpolate_to_solid(u)?;
        let w = a_s.mul_vec(&us);
        self.restrict_to_fluid(&w)
    }

    /// Block operator `D` (2·solid nodes × 2·fluid dofs).
    pub fn d_operator(&self) -> SparseOperator {
        let ns = self.n_solid_nodes();
        let nf = self.n_fluid;
        let mut tb = TripletBuilder::with_capacity(2 * ns, 2 * nf, 2 * self.pt.nnz());
        tb.push_operator(&self.pt, 1.0, 0, 0);
        tb.push_operator(&self.pt, 1.0, ns, nf);
        tb.build(false)
    }

    /// Explicitly assembled `Dᵀ Aˢ D`.
    pub fn assemble_sandwich(&self, a_s: &SparseOperator) -> Result<SparseOperator> {
        let ns = self.n_solid_nodes();
        check_len("solid operator rows", 2 * ns, a_s.nrows())?;
        check_len("solid operator cols", 2 * ns, a_s.ncols())?;
        let d = self.d_operator();
        let ad = a_s.matmul(&d)?;
        d.transpose().matmul(&ad)
    }

    pub fn write_matrix_market<W: Write>(&self, w: W) -> std::io::Result<()> {
        self.p.write_matrix_market(w)
    }
}
