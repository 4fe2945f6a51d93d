use thiserror::Error;

use crate::solver::SolveReport;

/// Errors raised by the reconstruction and correspondence pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("lines are parallel (|cross| = {cross:.3e})")]
    Parallel { cross: f64 },

    #[error("value out of range: {0}")]
    Range(String),

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("arccos argument {value:.12} outside [-1, 1]")]
    Domain { value: f64 },

    #[error("tangent pole: angle {angle:.12} is within tolerance of +-pi/2")]
    Pole { angle: f64 },

    #[error("insufficient frames (need {needed})")]
    InsufficientFrames { needed: usize, got: usize },

    #[error("no start converged below tolerance (best rms {:.3e})", .best.residual_rms)]
    NoConvergence { best: Box<SolveReport> },

    #[error("neither delta branch is consistent with the second tangent (best mismatch {mismatch:.3e})")]
    BranchConflict { mismatch: f64 },

    #[error("linear system underdetermined: {frames} frames for {unknowns} unknowns")]
    Underdetermined { frames: usize, unknowns: usize },

    #[error("linear system rank deficient (null space dimension > 1, sigma ratio {ratio:.3e})")]
    RankDeficient { ratio: f64 },

    #[error("endpoints and tangents are coplanar")]
    Coplanar,

    #[error("line does not cross the curve image")]
    NoIntersection,

    #[error("{count} equally plausible crossings")]
    Ambiguity { count: usize },

    #[error("points are not collinear (offset {offset:.3e})")]
    Collinearity { offset: f64 },

    #[error("sample {index}: {source}")]
    AtSample {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Short kebab-case tag used in machine-readable diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parallel { .. } => "parallel",
            Error::Range(_) => "range",
            Error::Degenerate(_) => "degenerate",
            Error::Precondition(_) => "precondition",
            Error::Domain { .. } => "domain",
            Error::Pole { .. } => "pole",
            Error::InsufficientFrames { .. } => "insufficient-frames",
            Error::NoConvergence { .. } => "no-convergence",
            Error::BranchConflict { .. } => "branch-conflict",
            Error::Underdetermined { .. } => "underdetermined",
            Error::RankDeficient { .. } => "rank-deficient",
            Error::Coplanar => "coplanar",
            Error::NoIntersection => "no-intersection",
            Error::Ambiguity { .. } => "ambiguity",
            Error::Collinearity { .. } => "collinearity",
            Error::AtSample { source, .. } => source.kind(),
        }
    }

    pub(crate) fn at_sample(self, index: usize) -> Error {
        Error::AtSample {
            index,
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
