//! Per-side boundary conditions on the rectangular fluid domain.

use std::collections::BTreeMap;
use std::fmt;
use serde::{Deserialize, Serialize};

use crate::error::{FsiError, Result};
use crate::mesh::{FluidMesh, Rect, Side};

/// Scalar expression of `x`, `y`, `t` (e.g. `15*y*(2-y)*sin(2*pi*t)`).
#[derive(Clone, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ScalarExpr {
    source: String,
    constant: Option<f64>,
    expr: Option<meval::Expr>,
}

impl ScalarExpr {
    pub fn parse(source: &str) -> Result<Self> {
        let expr: meval::Expr = source
            .parse()
            .map_err(|e| FsiError::Config(format!("cannot parse expression '{source}': {e}")))?;
        let constant = source.trim().parse::<f64>().ok();
        expr.clone()
            .bind3("x", "y", "t")
            .map(drop)
            .map_err(|e| FsiError::Config(format!("expression '{source}': {e}")))?;
        Ok(ScalarExpr {
            source: source.to_string(),
            constant,
            expr: Some(expr),
        })
    }

    pub fn constant(v: f64) -> Self {
        ScalarExpr {
            source: format!("{v:?}"),
            constant: Some(v),
            expr: None,
        }
    }

    #[inline]
    pub fn eval(&self, x: [f64; 2], t: f64) -> f64 {
        match (&self.constant, &self.expr) {
            (Some(c), _) => *c,
            (None, Some(e)) => {
                let mut ctx = meval::Context::new();
                ctx.var("x", x[0]).var("y", x[1]).var("t", t);
                e.eval_with_context(ctx).unwrap_or(f64::NAN)
            }
            (None, None) => f64::NAN,
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn is_zero(&self) -> bool {
        self.constant == Some(0.0)
    }
}

impl fmt::Debug for ScalarExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarExpr({:?})", self.source)
    }
}

impl PartialEq for ScalarExpr {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source
    }
}

impl TryFrom<String> for ScalarExpr {
    type Error = FsiError;
    fn try_from(s: String) -> Result<Self> {
        ScalarExpr::parse(&s)
    }
}

impl From<ScalarExpr> for String {
    fn from(e: ScalarExpr) -> String {
        e.source
    }
}

/// Condition on one side of the domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SideCondition {
    /// Prescribed velocity components; a missing component is traction-free.
    Dirichlet {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ux: Option<ScalarExpr>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        uy: Option<ScalarExpr>,
    },
    /// Prescribed traction `h̄`.
    Neumann {
        #[serde(default = "zero_expr")]
        hx: ScalarExpr,
        #[serde(default = "zero_expr")]
        hy: ScalarExpr,
    },
}

fn zero_expr() -> ScalarExpr {
    ScalarExpr::constant(0.0)
}

impl SideCondition {
    pub fn no_slip() -> Self {
        SideCondition::Dirichlet {
            ux: Some(zero_expr()),
            uy: Some(zero_expr()),
        }
    }

    pub fn velocity(ux: ScalarExpr, uy: ScalarExpr) -> Self {
        SideCondition::Dirichlet {
            ux: Some(ux),
            uy: Some(uy),
        }
    }

    /// Zero normal velocity, free tangential slip.
    pub fn slip(side: Side) -> Self {
        if side.normal_component() == 0 {
            SideCondition::Dirichlet {
                ux: Some(zero_expr()),
                uy: None,
            }
        } else {
            SideCondition::Dirichlet {
                ux: None,
                uy: Some(zero_expr()),
            }
        }
    }

    pub fn traction_free() -> Self {
        SideCondition::Neumann {
            hx: zero_expr(),
            hy: zero_expr(),
        }
    }

    fn component(&self, c: usize) -> Option<&ScalarExpr> {
        match self {
            SideCondition::Dirichlet { ux, uy } => [ux, uy][c].as_ref(),
            SideCondition::Neumann { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryConditions {
    pub bottom: SideCondition,
    pub right: SideCondition,
    pub top: SideCondition,
    pub left: SideCondition,
    /// Fixed rigid obstacles: free velocity nodes inside are held at zero.
    #[serde(default)]
    pub obstacles: Vec<Rect>,
    /// Location of the pressure reference point (defaults to the lower-left corner).
    #[serde(default)]
    pub pressure_reference: Option<[f64; 2]>,
}

impl BoundaryConditions {
    pub fn all_no_slip() -> Self {
        BoundaryConditions {
            bottom: SideCondition::no_slip(),
            right: SideCondition::no_slip(),
            top: SideCondition::no_slip(),
            left: SideCondition::no_slip(),
            obstacles: Vec::new(),
            pressure_reference: None,
        }
    }

    pub fn side(&self, side: Side) -> &SideCondition {
        match side {
            Side::Bottom => &self.bottom,
            Side::Right => &self.right,
            Side::Top => &self.top,
            Side::Left => &self.left,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for side in Side::ALL {
            if let SideCondition::Dirichlet { ux: None, uy: None } = self.side(side) {
                return Err(FsiError::ConflictingBoundary(format!(
                    "{side:?} side is tagged Dirichlet but prescribes no component"
                )));
            }
        }
        for r in &self.obstacles {
            if !(r.width() > 0.0 && r.height() > 0.0) {
                return Err(FsiError::ConflictingBoundary(format!("obstacle {r:?} has no interior")));
            }
        }
        Ok(())
    }

    pub fn neumann_sides(&self) -> Vec<Side> {
        Side::ALL
            .into_iter()
            .filter(|&s| matches!(self.side(s), SideCondition::Neumann { .. }))
            .collect()
    }

    /// Traction on a Neumann side (zero elsewhere).
    pub fn traction(&self, side: Side, x: [f64; 2], t: f64) -> [f64; 2] {
        match self.side(side) {
            SideCondition::Neumann { hx, hy } => [hx.eval(x, t), hy.eval(x, t)],
            SideCondition::Dirichlet { .. } => [0.0, 0.0],
        }
    }

    /// True if some traction on a Neumann side is nonzero.
    pub fn has_nonzero_traction(&self) -> bool {
        Side::ALL.iter().any(|&s| match self.side(s) {
            SideCondition::Neumann { hx, hy } => !(hx.is_zero() && hy.is_zero()),
            _ => false,
        })
    }

    /// The pressure level is fixed by a reference point only when every side
    /// prescribes its normal velocity.
    pub fn needs_pressure_pin(&self) -> bool {
        Side::ALL
            .iter()
            .all(|&s| self.side(s).component(s.normal_component()).is_some())
    }

    /// Free pressure dof closest to the reference point.
    pub fn pressure_pin_dof(&self, mesh: &FluidMesh) -> Option<usize> {
        if !self.needs_pressure_pin() {
            return None;
        }
        let d = mesh.domain();
        let r = self.pressure_reference.unwrap_or([d.x0, d.y0]);
        let pd = mesh.pressure_dofs();
        (0..pd.n_free()).min_by(|&a, &b| {
            let pa = mesh.pressure_node_position(pd.node_of(a));
            let pb = mesh.pressure_node_position(pd.node_of(b));
            let da = (pa[0] - r[0]).powi(2) + (pa[1] - r[1]).powi(2);
            let db = (pb[0] - r[0]).powi(2) + (pb[1] - r[1]).powi(2);
            da.partial_cmp(&db).unwrap().then(a.cmp(&b))
        })
    }

    /// Prescribed `(dof, value)` pairs at time `t`, block layout, sorted by dof.
    /// At corners a component takes the first side (bottom, right, top, left)
    /// that prescribes it.
    pub fn dirichlet_values(&self, mesh: &FluidMesh, t: f64) -> Vec<(usize, f64)> {
        let n = mesh.n_velocity_dofs();
        let dofs = mesh.velocity_dofs();
        let nodes = mesh.nodes();
        let mut out: BTreeMap<usize, f64> = BTreeMap::new();
        for side in Side::ALL {
            let cond = self.side(side);
            for node in mesh.nodes_on_side(side) {
                let Some(d) = dofs.free_dof(node) else { continue };
                for c in 0..2 {
                    if let Some(e) = cond.component(c) {
                        out.entry(c * n + d).or_insert_with(|| e.eval(nodes[node], t));
                    }
                }
            }
        }
        if !self.obstacles.is_empty() {
            let tol = 1e-12 * mesh.domain().width().max(mesh.domain().height());
            for d in 0..n {
                let x = nodes[dofs.node_of(d)];
                if self.obstacles.iter().any(|r| r.contains(x, tol)) {
                    out.entry(d).or_insert(0.0);
                    out.entry(n + d).or_insert(0.0);
                }
            }
        }
        out.into_iter().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expression_evaluation() {
        let e = ScalarExpr::parse("15*y*(2-y)*sin(2*pi*t)").unwrap();
        assert_eq!(e.eval([0.0, 0.5], 0.0), 0.0);
        assert!((e.eval([0.0, 1.0], 0.25) - 15.0).abs() < 1e-12);
        assert!(ScalarExpr::parse("2*").is_err());
        assert!(ScalarExpr::parse("51.3").unwrap().eval([1.0, 1.0], 3.0) == 51.3);
    }

    #[test]
    fn corners_take_first_side() {
        let mesh = FluidMesh::structured(Rect::new(0.0, 0.0, 1.0, 1.0), 2, 2).unwrap();
        let mut bc = BoundaryConditions::all_no_slip();
        bc.top = SideCondition::velocity(ScalarExpr::constant(1.0), ScalarExpr::constant(0.0));
        let vals = bc.dirichlet_values(&mesh, 0.0);
        let n = mesh.n_velocity_dofs();
        let dofs = mesh.velocity_dofs();
        for &(d, v) in &vals {
            if d >= n {
                continue;
            }
            let x = mesh.nodes()[dofs.node_of(d)];
            // right precedes top precedes left
            let expected = if x[1] == 1.0 && x[0] < 1.0 { 1.0 } else { 0.0 };
            assert_eq!(v, expected, "at {x:?}");
        }
        assert!(bc.needs_pressure_pin());
        assert_eq!(
            mesh.pressure_node_position(mesh.pressure_dofs().node_of(bc.pressure_pin_dof(&mesh).unwrap())),
            [0.0, 0.0]
        );
    }

    #[test]
    fn outflow_disables_pin() {
        let mut bc = BoundaryConditions::all_no_slip();
        bc.right = SideCondition::traction_free();
        assert!(!bc.needs_pressure_pin());
        bc.right = SideCondition::slip(Side::Right);
        assert!(bc.needs_pressure_pin());
        bc.top = SideCondition::Dirichlet { ux: None, uy: None };
        assert!(matches!(bc.validate(), Err(FsiError::ConflictingBoundary(_))));
    }

    #[test]
    fn serde_roundtrip() {
        let mut bc = BoundaryConditions::all_no_slip();
        bc.left = SideCondition::velocity(ScalarExpr::parse("y*(1-y)").unwrap(), ScalarExpr::constant(0.0));
        bc.right = SideCondition::traction_free();
        let s = toml::to_string(&bc).unwrap();
        let back: BoundaryConditions = toml::from_str(&s).unwrap();
        assert_eq!(back, bc);
    }
}
