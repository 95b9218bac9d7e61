use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A discrete radius of curvature went non-positive.
    #[error("lost convexity at sample {index} (rho = {rho:e}){}", stage_suffix(*.stage))]
    LostConvexity {
        index: usize,
        rho: f64,
        /// Runge-Kutta stage (1-4) when raised from inside a step.
        stage: Option<usize>,
    },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("ill-conditioned matrix (condition number {condition:e})")]
    Conditioning { condition: f64 },

    #[error("requested {requested} outside available range [{lo}, {hi}]")]
    Range { requested: f64, lo: f64, hi: f64 },

    #[error("grid too coarse: {nodes_across:.1} nodes across the final curve (try --grid {suggested_grid})")]
    Resolution {
        nodes_across: f64,
        suggested_grid: usize,
    },

    /// The flow ended before the requested time.
    #[error("flow stopped early: {0}")]
    Stopped(String),

    /// A check needs values in the region the trajectory never swept.
    #[error("unresolved region: {0}")]
    Unresolved(String),
}

fn stage_suffix(stage: Option<usize>) -> String {
    match stage {
        Some(s) => format!(" in stage {s}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for failures of the numerics rather than of the caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::LostConvexity { .. }
                | Error::Convergence { .. }
                | Error::Conditioning { .. }
                | Error::Stopped(_)
        )
    }
}
