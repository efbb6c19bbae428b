use thiserror::Error;

/// Errors raised anywhere in the solver pipeline.
#[derive(Debug, Error)]
pub enum FsiError {
    #[error("invalid mesh parameters: {0}")]
    InvalidMesh(String),

    #[error("degenerate element {element}: signed area {area:e}")]
    DegenerateElement { element: usize, area: f64 },

    #[error("inverted solid element {element} after update: signed area {area:e}")]
    InvertedElement { element: usize, area: f64 },

    #[error("point ({x}, {y}) lies outside the fluid domain")]
    PointOutsideDomain { x: f64, y: f64 },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("stress tensor of element {element} is not symmetric (|t12 - t21| = {asymmetry:e})")]
    AsymmetricStress { element: usize, asymmetry: f64 },

    #[error("coupling matrix is stale: the solid moved after it was built")]
    StaleCoupling,

    #[error("conflicting boundary specification: {0}")]
    ConflictingBoundary(String),

    #[error("linear solver failure in {stage}: {message}")]
    Solver {
        stage: &'static str,
        message: String,
        residual_history: Vec<f64>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("step {step} failed during {stage}: {source}")]
    Step {
        step: usize,
        stage: &'static str,
        #[source]
        source: Box<FsiError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(String),
}

impl FsiError {
    /// Short tag naming the pipeline stage, used for CLI exit diagnostics.
    pub fn stage_tag(&self) -> &'static str {
        match self {
            FsiError::InvalidMesh(_) | FsiError::DegenerateElement { .. } => "mesh",
            FsiError::InvertedElement { .. } => "solid-update",
            FsiError::PointOutsideDomain { .. } | FsiError::StaleCoupling => "coupling",
            FsiError::DimensionMismatch { .. } => "dimension",
            FsiError::AsymmetricStress { .. } => "stress",
            FsiError::ConflictingBoundary(_) => "boundary",
            FsiError::Solver { .. } => "solver",
            FsiError::Config(_) => "config",
            FsiError::Step { stage, .. } => stage,
            FsiError::Io(_) | FsiError::Serde(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, FsiError>;

pub(crate) fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(FsiError::DimensionMismatch {
            context,
            expected,
            actual,
        })
    }
}
