//! Scenario configuration (TOML) and the built-in presets.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::assembly::TangentForm;
use crate::convection::ConvectionScheme;
use crate::coupled_solve::{BoundaryConditions, Factorization, ScalarExpr, SideCondition, SolverKind, SolverOptions};
use crate::error::{FsiError, Result};
use crate::mesh::{FluidMesh, Rect, SolidMesh};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainConfig {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
    pub nx: usize,
    pub ny: usize,
}

impl DomainConfig {
    pub fn rect(&self) -> Rect {
        Rect::new(self.x0, self.y0, self.x1, self.y1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum SolidConfig {
    None,
    Disc {
        center: [f64; 2],
        radius: f64,
        boundary_nodes: usize,
    },
    /// Leaflet: axis-aligned rectangle `origin + [0, width] × [0, height]`.
    Rectangle {
        origin: [f64; 2],
        width: f64,
        height: f64,
        nx: usize,
        ny: usize,
    },
}

impl SolidConfig {
    pub fn build(&self) -> Result<Option<SolidMesh>> {
        match *self {
            SolidConfig::None => Ok(None),
            SolidConfig::Disc {
                center,
                radius,
                boundary_nodes,
            } => SolidMesh::disc(center, radius, boundary_nodes).map(Some),
            SolidConfig::Rectangle {
                origin,
                width,
                height,
                nx,
                ny,
            } => SolidMesh::rectangle(origin, width, height, nx, ny).map(Some),
        }
    }

    /// Default probe: disc centre, or the top right corner of a leaflet.
    pub fn default_probe(&self) -> Option<[f64; 2]> {
        match *self {
            SolidConfig::None => None,
            SolidConfig::Disc { center, .. } => Some(center),
            SolidConfig::Rectangle {
                origin, width, height, ..
            } => Some([origin[0] + width, origin[1] + height]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub rho_f: f64,
    pub rho_s: f64,
    pub mu_f: f64,
    pub mu_s: f64,
    #[serde(default)]
    pub gravity: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InitialCondition {
    Rest,
    /// `Ψ = Ψ₀ sin(ax) sin(by)`, `u = (∂Ψ/∂y, −∂Ψ/∂x)`.
    StreamFunction { psi0: f64, a: f64, b: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeConfig {
    pub dt: f64,
    pub end_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefinementConfig {
    pub levels: u8,
    pub halo: f64,
    /// Steps between re-adaptations of the fluid mesh (0 = never).
    pub readapt_every: usize,
}

impl Default for RefinementConfig {
    fn default() -> Self {
        RefinementConfig {
            levels: 0,
            halo: 0.0,
            readapt_every: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputConfig {
    /// Time-series rows every `every` steps.
    pub every: usize,
    /// VTK snapshots every `vtk_every` steps (0 = only the final state).
    pub vtk_every: usize,
    pub vtk: bool,
    pub residual_history: bool,
    /// Tracked solid point (tip or centre); the nearest reference node is used.
    pub probe: Option<[f64; 2]>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            every: 1,
            vtk_every: 0,
            vtk: true,
            residual_history: false,
            probe: None,
        }
    }
}

/// Less commonly tuned numerical settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NumericsConfig {
    pub tangent: TangentForm,
    pub matrix_free: bool,
    pub restart: usize,
    pub max_fixed_point: usize,
    pub cg_tol: f64,
    pub tg_stabilization: f64,
    /// Steps between refactorizations of the Krylov velocity block, which is
    /// frozen in between.
    pub precondition_every: usize,
    pub factorization: Factorization,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        NumericsConfig {
            tangent: TangentForm::Transposed,
            matrix_free: false,
            restart: 200,
            max_fixed_point: 1,
            cg_tol: 1e-10,
            tg_stabilization: 1.0,
            precondition_every: 10,
            factorization: Factorization::Ldlt,
        }
    }
}

fn default_krylov_tol() -> f64 {
    1e-10
}

fn default_max_iters() -> usize {
    2000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub convection: ConvectionScheme,
    #[serde(default)]
    pub solver: SolverKind,
    #[serde(default = "default_krylov_tol")]
    pub krylov_tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    pub domain: DomainConfig,
    pub solid: SolidConfig,
    pub material: Material,
    pub time: TimeConfig,
    pub initial: InitialCondition,
    pub boundary: BoundaryConditions,
    #[serde(default)]
    pub refinement: RefinementConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub numerics: NumericsConfig,
}

impl ScenarioConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(s).map_err(|e| FsiError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| FsiError::Serde(e.to_string()))
    }

    /// Applies `key=value` overrides with dotted keys (`material.mu_s=1e6`).
    /// Values are read as TOML literals, falling back to plain strings.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self> {
        let mut root = toml::Value::try_from(self).map_err(|e| FsiError::Serde(e.to_string()))?;
        for item in overrides {
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| FsiError::Config(format!("override '{item}' is not key=value")))?;
            let value = parse_literal(raw.trim());
            let path: Vec<&str> = key.trim().split('.').collect();
            let mut node = &mut root;
            for (i, part) in path.iter().enumerate() {
                let table = node
                    .as_table_mut()
                    .ok_or_else(|| FsiError::Config(format!("override key '{key}': '{part}' is not a table")))?;
                if i + 1 == path.len() {
                    table.insert(part.to_string(), value.clone());
                    break;
                }
                node = table
                    .entry(part.to_string())
                    .or_insert_with(|| toml::Value::Table(Default::default()));
            }
        }
        let cfg: ScenarioConfig = root.try_into().map_err(|e: toml::de::Error| FsiError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(FsiError::Config(m.to_string()));
        let d = &self.domain;
        if !(d.x1 > d.x0 && d.y1 > d.y0) || d.nx == 0 || d.ny == 0 {
            return bad("domain needs positive extents and nx, ny >= 1");
        }
        if !(self.time.dt > 0.0) || !(self.time.end_time > 0.0) {
            return bad("dt and end_time must be positive");
        }
        let m = &self.material;
        if !(m.rho_f > 0.0 && m.rho_s > 0.0 && m.mu_f > 0.0 && m.mu_s > 0.0) {
            return bad("densities and moduli must be positive");
        }
        if !(self.refinement.halo >= 0.0) {
            return bad("refinement halo must be non-negative");
        }
        if self.output.every == 0 {
            return bad("output.every must be at least 1");
        }
        self.boundary.validate()
    }

    pub fn n_steps(&self) -> usize {
        (self.time.end_time / self.time.dt - 1e-9).ceil().max(0.0) as usize
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            solver: self.solver,
            factorization: self.numerics.factorization,
            krylov_tol: self.krylov_tol,
            max_iters: self.max_iters,
            restart: self.numerics.restart,
        }
    }

    pub fn convection_options(&self) -> crate::convection::ConvectionOptions {
        crate::convection::ConvectionOptions {
            scheme: self.convection,
            max_fixed_point: self.numerics.max_fixed_point,
            cg_tol: self.numerics.cg_tol,
            tg_stabilization: self.numerics.tg_stabilization,
            ..Default::default()
        }
    }

    pub fn base_mesh(&self) -> Result<FluidMesh> {
        FluidMesh::structured(self.domain.rect(), self.domain.nx, self.domain.ny)
    }
}

fn parse_literal(raw: &str) -> toml::Value {
    #[derive(Deserialize)]
    struct Wrap {
        v: toml::Value,
    }
    toml::from_str::<Wrap>(&format!("v = {raw}"))
        .map(|w| w.v)
        .unwrap_or_else(|_| toml::Value::String(raw.to_string()))
}

fn expr(s: &str) -> ScalarExpr {
    ScalarExpr::parse(s).expect("preset expression")
}

pub const PRESET_NAMES: [&str; 9] = [
    "leaflet_across",
    "oscillating_disc",
    "oscillating_disc_coarse",
    "oscillating_disc_fine",
    "falling_disc",
    "falling_disc_coarse",
    "falling_disc_medium",
    "leaflet_along",
    "cavity_disc",
];

/// Built-in scenarios. The unsuffixed disc presets are the medium oscillating
/// disc and the fine falling disc.
pub fn preset(name: &str) -> Result<ScenarioConfig> {
    let cfg = match name {
        "leaflet_across" => leaflet_across(),
        "oscillating_disc" => oscillating_disc(),
        "oscillating_disc_coarse" => oscillating_disc_at(20, 100, "coarse"),
        "oscillating_disc_fine" => oscillating_disc_at(80, 400, "fine"),
        "falling_disc" => falling_disc(),
        "falling_disc_coarse" => falling_disc_at(28, 3, "coarse"),
        "falling_disc_medium" => falling_disc_at(48, 4, "medium"),
        "leaflet_along" => leaflet_along(),
        "cavity_disc" => cavity_disc(),
        _ => {
            return Err(FsiError::Config(format!(
                "unknown preset '{name}' (available: {})",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    cfg.validate()?;
    Ok(cfg)
}

fn oscillating_disc_at(n: usize, boundary_nodes: usize, tier: &str) -> ScenarioConfig {
    let mut c = oscillating_disc();
    c.name = format!("oscillating_disc_{tier}");
    c.domain.nx = n;
    c.domain.ny = n;
    if let SolidConfig::Disc { boundary_nodes: b, .. } = &mut c.solid {
        *b = boundary_nodes;
    }
    c
}

fn falling_disc_at(boundary_nodes: usize, levels: u8, tier: &str) -> ScenarioConfig {
    let mut c = falling_disc();
    c.name = format!("falling_disc_{tier}");
    c.refinement.levels = levels;
    if let SolidConfig::Disc { boundary_nodes: b, .. } = &mut c.solid {
        *b = boundary_nodes;
    }
    c
}

/// Leaflet across a pulsating channel flow. The top side is the channel's symmetry plane.
fn leaflet_across() -> ScenarioConfig {
    let w = 0.0212;
    let x_leaflet = 1.0;
    ScenarioConfig {
        name: "leaflet_across".into(),
        convection: ConvectionScheme::LeastSquares,
        solver: SolverKind::Direct,
        krylov_tol: default_krylov_tol(),
        max_iters: default_max_iters(),
        domain: DomainConfig {
            x0: 0.0,
            y0: 0.0,
            x1: 4.0,
            y1: 1.0,
            nx: 32,
            ny: 8,
        },
        solid: SolidConfig::Rectangle {
            origin: [x_leaflet - 0.5 * w, 0.0],
            width: w,
            height: 0.8,
            nx: 2,
            ny: 80,
        },
        material: Material {
            rho_f: 100.0,
            rho_s: 100.0,
            mu_f: 10.0,
            mu_s: 1e7,
            gravity: [0.0, 0.0],
        },
        time: TimeConfig {
            dt: 5e-4,
            end_time: 0.8,
        },
        initial: InitialCondition::Rest,
        boundary: BoundaryConditions {
            bottom: SideCondition::no_slip(),
            right: SideCondition::traction_free(),
            top: SideCondition::slip(crate::mesh::Side::Top),
            left: SideCondition::velocity(expr("15*y*(2-y)*sin(2*pi*t)"), ScalarExpr::constant(0.0)),
            obstacles: Vec::new(),
            pressure_reference: None,
        },
        refinement: RefinementConfig {
            levels: 3,
            halo: 0.03,
            readapt_every: 10,
        },
        output: OutputConfig {
            every: 10,
            vtk_every: 400,
            ..Default::default()
        },
        numerics: NumericsConfig::default(),
    }
}

fn oscillating_disc() -> ScenarioConfig {
    ScenarioConfig {
        name: "oscillating_disc".into(),
        convection: ConvectionScheme::LeastSquares,
        solver: SolverKind::Direct,
        krylov_tol: default_krylov_tol(),
        max_iters: default_max_iters(),
        domain: DomainConfig {
            x0: 0.0,
            y0: 0.0,
            x1: 1.0,
            y1: 1.0,
            nx: 40,
            ny: 40,
        },
        solid: SolidConfig::Disc {
            center: [0.5, 0.5],
            radius: 0.2,
            boundary_nodes: 200,
        },
        material: Material {
            rho_f: 1.0,
            rho_s: 1.0,
            mu_f: 1e-3,
            mu_s: 1.0,
            gravity: [0.0, 0.0],
        },
        time: TimeConfig {
            dt: 1e-3,
            end_time: 1.0,
        },
        initial: InitialCondition::StreamFunction {
            psi0: 5.0e-2,
            a: 2.0 * std::f64::consts::PI,
            b: 2.0 * std::f64::consts::PI,
        },
        boundary: BoundaryConditions::all_no_slip(),
        refinement: RefinementConfig {
            levels: 2,
            halo: 0.02,
            readapt_every: 10,
        },
        output: OutputConfig {
            every: 10,
            vtk_every: 250,
            ..Default::default()
        },
        numerics: NumericsConfig::default(),
    }
}

fn falling_disc() -> ScenarioConfig {
    ScenarioConfig {
        name: "falling_disc".into(),
        convection: ConvectionScheme::LeastSquares,
        solver: SolverKind::Direct,
        krylov_tol: default_krylov_tol(),
        max_iters: default_max_iters(),
        domain: DomainConfig {
            x0: 0.0,
            y0: 0.0,
            x1: 2.0,
            y1: 4.0,
            nx: 16,
            ny: 32,
        },
        solid: SolidConfig::Disc {
            center: [1.0, 3.5],
            radius: 0.0625,
            boundary_nodes: 80,
        },
        material: Material {
            rho_f: 1.0,
            rho_s: 1.2,
            mu_f: 1.0,
            mu_s: 1e8,
            gravity: [0.0, -980.0],
        },
        time: TimeConfig {
            dt: 5e-3,
            end_time: 1.0,
        },
        initial: InitialCondition::Rest,
        boundary: BoundaryConditions {
            top: SideCondition::traction_free(),
            ..BoundaryConditions::all_no_slip()
        },
        refinement: RefinementConfig {
            levels: 4,
            halo: 0.02,
            readapt_every: 10,
        },
        output: OutputConfig {
            every: 1,
            vtk_every: 50,
            ..Default::default()
        },
        numerics: NumericsConfig::default(),
    }
}

/// Leaflet behind a square block in a uniform stream.
fn leaflet_along() -> ScenarioConfig {
    ScenarioConfig {
        name: "leaflet_along".into(),
        convection: ConvectionScheme::LeastSquares,
        solver: SolverKind::Direct,
        krylov_tol: default_krylov_tol(),
        max_iters: default_max_iters(),
        domain: DomainConfig {
            x0: 0.0,
            y0: 0.0,
            x1: 19.5,
            y1: 12.0,
            nx: 39,
            ny: 24,
        },
        solid: SolidConfig::Rectangle {
            origin: [5.5, 5.97],
            width: 4.0,
            height: 0.06,
            nx: 100,
            ny: 2,
        },
        material: Material {
            rho_f: 1.18e-3,
            rho_s: 0.1,
            mu_f: 1.82e-4,
            mu_s: 9.2593e5,
            gravity: [0.0, 0.0],
        },
        time: TimeConfig {
            dt: 1e-3,
            end_time: 10.0,
        },
        initial: InitialCondition::Rest,
        boundary: BoundaryConditions {
            bottom: SideCondition::slip(crate::mesh::Side::Bottom),
            right: SideCondition::traction_free(),
            top: SideCondition::slip(crate::mesh::Side::Top),
            left: SideCondition::velocity(ScalarExpr::constant(51.3), ScalarExpr::constant(0.0)),
            obstacles: vec![Rect::new(4.5, 5.5, 5.5, 6.5)],
            pressure_reference: None,
        },
        refinement: RefinementConfig {
            levels: 4,
            halo: 0.1,
            readapt_every: 10,
        },
        output: OutputConfig {
            every: 10,
            vtk_every: 1000,
            ..Default::default()
        },
        numerics: NumericsConfig::default(),
    }
}

fn cavity_disc() -> ScenarioConfig {
    ScenarioConfig {
        name: "cavity_disc".into(),
        convection: ConvectionScheme::LeastSquares,
        solver: SolverKind::Direct,
        krylov_tol: default_krylov_tol(),
        max_iters: default_max_iters(),
        domain: DomainConfig {
            x0: 0.0,
            y0: 0.0,
            x1: 1.0,
            y1: 1.0,
            nx: 32,
            ny: 32,
        },
        solid: SolidConfig::Disc {
            center: [0.6, 0.5],
            radius: 0.2,
            boundary_nodes: 120,
        },
        material: Material {
            rho_f: 1.0,
            rho_s: 1.0,
            mu_f: 0.01,
            mu_s: 0.1,
            gravity: [0.0, 0.0],
        },
        time: TimeConfig {
            dt: 1e-3,
            end_time: 5.0,
        },
        initial: InitialCondition::Rest,
        boundary: BoundaryConditions {
            top: SideCondition::velocity(ScalarExpr::constant(1.0), ScalarExpr::constant(0.0)),
            ..BoundaryConditions::all_no_slip()
        },
        refinement: RefinementConfig {
            levels: 1,
            halo: 0.02,
            readapt_every: 10,
        },
        output: OutputConfig {
            every: 10,
            vtk_every: 500,
            ..Default::default()
        },
        numerics: NumericsConfig::default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_roundtrip_through_toml() {
        for name in PRESET_NAMES {
            let cfg = preset(name).unwrap();
            let s = cfg.to_toml_string().unwrap();
            let back = ScenarioConfig::from_toml_str(&s).unwrap();
            assert_eq!(back, cfg, "{name}");
        }
    }

    #[test]
    fn table_parameters() {
        let c = preset("leaflet_across").unwrap();
        assert_eq!((c.domain.x1, c.domain.y1), (4.0, 1.0));
        assert_eq!((c.material.rho_f, c.material.rho_s, c.material.mu_f, c.material.mu_s), (100.0, 100.0, 10.0, 1e7));
        assert_eq!(c.time.dt, 5e-4);
        let f = preset("falling_disc").unwrap();
        assert_eq!((f.material.rho_s, f.material.mu_s, f.material.gravity[1]), (1.2, 1e8, -980.0));
        assert_eq!((f.domain.x1, f.domain.y1), (2.0, 4.0));
        let o = preset("oscillating_disc").unwrap();
        assert!(matches!(o.initial, InitialCondition::StreamFunction { psi0, .. } if psi0 == 5.0e-2));
    }

    #[test]
    fn overrides() {
        let c = preset("oscillating_disc").unwrap();
        let o = c
            .with_overrides(&[
                "material.rho_s=2.0".into(),
                "convection=taylor_galerkin".into(),
                "domain.nx=20".into(),
                "boundary.top.ux=sin(pi*x)".into(),
            ])
            .unwrap();
        assert_eq!(o.material.rho_s, 2.0);
        assert_eq!(o.convection, ConvectionScheme::TaylorGalerkin);
        assert_eq!(o.domain.nx, 20);
        assert!(c.with_overrides(&["time.dt=-1".into()]).is_err());
        assert!(c.with_overrides(&["nonsense".into()]).is_err());
    }
}
