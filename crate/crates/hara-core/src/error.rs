use thiserror::Error;

pub type Result<T> = std::result::Result<T, HaraError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HaraError {
    #[error("configuration: {0}")]
    Config(String),

    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("integrand not finite at theta = {theta}")]
    NonFiniteIntegrand { theta: f64 },

    #[error("all exponents are -inf; nothing to integrate")]
    EmptyMass,

    #[error("degenerate kernel; use boundary value")]
    DegenerateKernel,

    #[error("posterior defined for t>0; at t=0 the posterior is the prior")]
    PosteriorAtOrigin,

    #[error("wealth {x} is outside the utility domain at t = {t}")]
    Domain { t: f64, x: f64 },

    #[error("prior/γ combination numerically divergent: {0}")]
    Divergent(String),

    #[error("quadrature failed to self-converge after {nodes} nodes (difference {difference:e})")]
    NotConverged { nodes: usize, difference: f64 },
}

impl HaraError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        HaraError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors caused by the input rather than the numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            HaraError::Config(_) | HaraError::InvalidPrior(_) | HaraError::InvalidParameter { .. }
        )
    }

    /// True for the errors that signal a divergent or non-convergent
    /// integral rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            HaraError::Divergent(_) | HaraError::NotConverged { .. } | HaraError::EmptyMass
        )
    }
}
