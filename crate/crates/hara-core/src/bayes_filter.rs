//! Exact Bayesian filter for a constant market price of risk.
//!
//! Given the observation `Y_t = y`, the posterior of Θ has density
//! `e^{θy - θ²t/2} / F(t, y)` with respect to the prior, where
//! `F(t, y) = ∫ e^{θy - θ²t/2} μ(dθ)`. All quantities are computed in log
//! space. At `t = 0` the same formulas are used; at the only reachable
//! state `(0, 0)` they give `F = 1` and the prior moments.

use crate::error::{HaraError, Result};
use crate::numerics::{log_sum_exp_integrate, TiltPoint};
use crate::prior::Prior;

/// Filter quantities at one observation `(t, y)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterState {
    pub t: f64,
    pub y: f64,
    pub log_f: f64,
    pub theta_hat: f64,
    pub theta_var: f64,
}

impl FilterState {
    /// The same data viewed as a tilt point in `y`: `∂_y log F = Θ̂` and
    /// `∂²_y log F = Var(Θ | y)`.
    pub fn tilt_point(&self) -> TiltPoint {
        TiltPoint {
            log_f: self.log_f,
            slope: self.theta_hat,
            curvature: self.theta_var,
        }
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(HaraError::param(
            "t",
            format!("time must be finite and >= 0, got {t}"),
        ));
    }
    Ok(())
}

/// Log F, posterior mean and posterior variance in one sweep over the atoms.
pub fn filter_state(prior: &Prior, t: f64, y: f64) -> Result<FilterState> {
    check_time(t)?;
    if !y.is_finite() {
        return Err(HaraError::param(
            "y",
            format!("observation must be finite, got {y}"),
        ));
    }
    let atoms = prior.atoms();
    let exponent = |theta: f64| theta * y - 0.5 * theta * theta * t;

    let mut max = f64::NEG_INFINITY;
    let mut pivot = atoms[0].theta;
    let log_w = prior.log_weights();
    for (a, lw) in atoms.iter().zip(log_w) {
        let e = lw + exponent(a.theta);
        if e > max {
            max = e;
            pivot = a.theta;
        }
    }
    if !max.is_finite() {
        return Err(HaraError::EmptyMass);
    }
    // moments about the heaviest atom, then re-centred
    let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
    for (a, lw) in atoms.iter().zip(log_w) {
        let e = (lw + exponent(a.theta) - max).exp();
        let d = a.theta - pivot;
        s0 += e;
        s1 += e * d;
        s2 += e * d * d;
    }
    let shift = s1 / s0;
    Ok(FilterState {
        t,
        y,
        log_f: max + s0.ln(),
        theta_hat: pivot + shift,
        theta_var: (s2 / s0 - shift * shift).max(0.0),
    })
}

/// `log F(t, y)`.
pub fn log_f(prior: &Prior, t: f64, y: f64) -> Result<f64> {
    check_time(t)?;
    log_sum_exp_integrate(prior, |theta| theta * y - 0.5 * theta * theta * t)
}

/// Posterior mean `Θ̂(t, y) = ∂_y log F(t, y)`.
pub fn theta_hat(prior: &Prior, t: f64, y: f64) -> Result<f64> {
    Ok(filter_state(prior, t, y)?.theta_hat)
}

/// Posterior variance of Θ.
pub fn theta_var(prior: &Prior, t: f64, y: f64) -> Result<f64> {
    Ok(filter_state(prior, t, y)?.theta_var)
}

/// Posterior density with respect to the prior measure.
#[derive(Clone, Copy, Debug)]
pub struct PosteriorDensity {
    pub t: f64,
    pub y: f64,
    pub log_f: f64,
}

impl PosteriorDensity {
    pub fn at(&self, theta: f64) -> f64 {
        (theta * self.y - 0.5 * theta * theta * self.t - self.log_f).exp()
    }
}

pub fn posterior_density(prior: &Prior, t: f64, y: f64) -> Result<PosteriorDensity> {
    if !(t > 0.0) {
        return Err(HaraError::PosteriorAtOrigin);
    }
    Ok(PosteriorDensity {
        t,
        y,
        log_f: log_f(prior, t, y)?,
    })
}
