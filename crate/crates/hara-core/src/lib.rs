//! Optimal HARA portfolios when the market price of risk is an unobserved
//! random variable with a known prior.
//!
//! The investor observes `Y_t = Θt + W_t` and updates a Bayesian posterior
//! for Θ ([`bayes_filter`]). Optimal portfolios for power, logarithmic and
//! exponential utilities, their myopic counterparts and the hedging demand
//! are computed in [`policy`]; [`gaussian_oracle`] holds the closed forms
//! for a normal prior and [`simulator`] runs the learning and wealth
//! dynamics by Monte Carlo. [`verify`] turns the structural properties
//! (ratio monotonicity in γ, limits, bounds) into executable checks.

pub mod bayes_filter;
pub mod config;
pub mod error;
pub mod gaussian_oracle;
pub mod numerics;
pub mod policy;
pub mod prior;
pub mod simulator;
pub mod verify;

pub use bayes_filter::{filter_state, FilterState};
pub use error::{HaraError, Result};
pub use numerics::QuadConfig;
pub use policy::{pi_merton, EvalPoint, MarketParams, Model, PolicyReport, SweepRow, Utility};
pub use prior::{Prior, SignClass, SupportBounds};
