//! Closed forms for a normal prior N(m, v²).
//!
//! These are evaluated directly from the formulas and serve as the
//! independent reference for the quadrature path in [`crate::policy`].

use crate::error::{HaraError, Result};
use crate::policy::{EvalPoint, MarketParams, Utility};

/// Results with an existence margin `(1-γ) - γv²T` below this are flagged.
pub const NEAR_DIVERGENCE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianPriorParams {
    pub m: f64,
    pub v: f64,
}

/// A closed-form value together with a flag for proximity to the
/// existence boundary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleValue {
    pub value: f64,
    pub near_divergent: bool,
}

impl GaussianPriorParams {
    pub fn new(m: f64, v: f64) -> Result<Self> {
        if !m.is_finite() || !(v > 0.0) || !v.is_finite() {
            return Err(HaraError::InvalidPrior(format!(
                "gaussian params m={m}, v={v}"
            )));
        }
        Ok(GaussianPriorParams { m, v })
    }

    fn v2(&self) -> f64 {
        self.v * self.v
    }

    pub fn log_f(&self, t: f64, y: f64) -> f64 {
        let v2 = self.v2();
        (self.m + v2 * y).powi(2) / (2.0 * v2 * (1.0 + v2 * t))
            - self.m * self.m / (2.0 * v2)
            - 0.5 * (1.0 + v2 * t).ln()
    }

    pub fn theta_hat(&self, t: f64, y: f64) -> f64 {
        (self.m + self.v2() * y) / (1.0 + self.v2() * t)
    }

    pub fn theta_var(&self, t: f64) -> f64 {
        self.v2() / (1.0 + self.v2() * t)
    }

    /// `(1-γ) - γ v² T`.
    pub fn existence_margin(&self, market: &MarketParams, gamma: f64) -> f64 {
        (1.0 - gamma) - gamma * self.v2() * market.horizon
    }

    pub fn exists_power(&self, market: &MarketParams, gamma: f64) -> bool {
        self.existence_margin(market, gamma) > 0.0
    }

    fn guarded(&self, market: &MarketParams, gamma: f64, value: f64) -> Result<OracleValue> {
        let margin = self.existence_margin(market, gamma);
        if !(margin > 0.0) {
            return Err(HaraError::Divergent(format!(
                "(1-γ) - γv²T = {margin:e} at γ = {gamma}"
            )));
        }
        Ok(OracleValue {
            value,
            near_divergent: margin < NEAR_DIVERGENCE,
        })
    }

    /// `π̂_γ / π^m_γ = (1-γ)(1+tv²) / ((1-γ) - γv²T + v²t)`.
    pub fn closed_ratio(&self, market: &MarketParams, t: f64, gamma: f64) -> Result<OracleValue> {
        let v2 = self.v2();
        let value =
            (1.0 - gamma) * (1.0 + t * v2) / (self.existence_margin(market, gamma) + v2 * t);
        self.guarded(market, gamma, value)
    }

    /// `(π̂_γ - π^m_γ) / π^m_γ = γv²(T-t) / ((1-γ) - γv²T + v²t)`.
    pub fn closed_relative_hedging(
        &self,
        market: &MarketParams,
        t: f64,
        gamma: f64,
    ) -> Result<OracleValue> {
        let v2 = self.v2();
        let value =
            gamma * v2 * (market.horizon - t) / (self.existence_margin(market, gamma) + v2 * t);
        self.guarded(market, gamma, value)
    }

    fn power_parts(
        &self,
        util: &Utility,
        market: &MarketParams,
        pt: &EvalPoint,
    ) -> Result<(f64, f64)> {
        let Utility::Power { gamma, .. } = *util else {
            return Err(HaraError::param(
                "utility",
                "closed forms are for power utility",
            ));
        };
        util.validate()?;
        let compounded = pt.x * (market.r * (market.horizon - pt.t)).exp();
        if !util.in_domain(compounded) {
            return Err(HaraError::Domain { t: pt.t, x: pt.x });
        }
        Ok((
            gamma,
            util.prefactor(market, pt.t, pt.x) * self.theta_hat(pt.t, pt.y),
        ))
    }

    /// Closed-form optimal power portfolio.
    pub fn closed_pi_hat(
        &self,
        util: &Utility,
        market: &MarketParams,
        pt: &EvalPoint,
    ) -> Result<OracleValue> {
        let (gamma, myopic) = self.power_parts(util, market, pt)?;
        let ratio = self.closed_ratio(market, pt.t, gamma)?;
        Ok(OracleValue {
            value: myopic * ratio.value,
            ..ratio
        })
    }

    /// Closed-form hedging demand `π̂_γ - π^m_γ`.
    pub fn closed_hedging(
        &self,
        util: &Utility,
        market: &MarketParams,
        pt: &EvalPoint,
    ) -> Result<OracleValue> {
        let (gamma, myopic) = self.power_parts(util, market, pt)?;
        let rel = self.closed_relative_hedging(market, pt.t, gamma)?;
        Ok(OracleValue {
            value: myopic * rel.value,
            ..rel
        })
    }

    /// γ at which the relative hedging demand blows up, `(1+v²t)/(1+v²T)`.
    pub fn explosion_gamma(&self, market: &MarketParams, t: f64) -> f64 {
        (1.0 + self.v2() * t) / (1.0 + self.v2() * market.horizon)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn mkt() -> MarketParams {
        MarketParams::new(0.0, 0.2, 1.0).unwrap()
    }

    #[test]
    fn existence() {
        let gp = GaussianPriorParams::new(0.0, 1.0).unwrap();
        assert!(gp.exists_power(&mkt(), -1.0));
        assert!(!gp.exists_power(&mkt(), 0.5));
        assert!(gp.exists_power(&mkt(), 0.25));
        let long = MarketParams::new(0.0, 0.2, 50.0).unwrap();
        assert!(GaussianPriorParams::new(0.3, 3.0)
            .unwrap()
            .exists_power(&long, -1e3));
    }

    #[test]
    fn ratio_examples() {
        let gp = GaussianPriorParams::new(0.5, 1.0).unwrap();
        // at γ = 0 the general formula is continuous; evaluate just off it
        assert_relative_eq!(gp.closed_ratio(&mkt(), 0.3, 1e-300).unwrap().value, 1.0);
        assert_relative_eq!(
            gp.closed_ratio(&mkt(), 0.0, 0.25).unwrap().value,
            1.5,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            gp.closed_ratio(&mkt(), 0.0, -1.0).unwrap().value,
            2.0 / 3.0,
            epsilon = 1e-15
        );
        assert!(gp.closed_ratio(&mkt(), 0.0, 0.5).is_err());
    }

    #[test]
    fn hedging_examples() {
        let gp = GaussianPriorParams::new(0.5, 1.0).unwrap();
        assert_eq!(
            gp.closed_relative_hedging(&mkt(), 1.0, 0.3).unwrap().value,
            0.0
        );
        assert_relative_eq!(
            gp.closed_relative_hedging(&mkt(), 0.0, 0.25).unwrap().value,
            0.5,
            epsilon = 1e-15
        );
        let u = Utility::power(0.25, 1.0, 0.0).unwrap();
        let pt = EvalPoint::new(0.0, 1.0, 0.0);
        let h = gp.closed_hedging(&u, &mkt(), &pt).unwrap().value;
        let p = gp.closed_pi_hat(&u, &mkt(), &pt).unwrap().value;
        let myopic = 1.0 / (0.2 * 0.75) * 0.5;
        assert_relative_eq!(p - myopic, h, epsilon = 1e-14);
    }

    #[test]
    fn zero_posterior_mean_gives_zero_portfolio() {
        let gp = GaussianPriorParams::new(0.0, 1.0).unwrap();
        let u = Utility::power(-2.0, 1.0, 0.0).unwrap();
        let v = gp
            .closed_pi_hat(&u, &mkt(), &EvalPoint::new(0.0, 1.0, 0.0))
            .unwrap();
        assert_eq!(v.value, 0.0);
    }

    #[test]
    fn small_prior_variance_recovers_merton() {
        let gp = GaussianPriorParams::new(0.4, 1e-9).unwrap();
        let u = Utility::power(0.5, 1.0, 0.0).unwrap();
        let v = gp
            .closed_pi_hat(&u, &mkt(), &EvalPoint::new(0.0, 1.0, 0.0))
            .unwrap();
        assert_relative_eq!(v.value, 0.4 / (0.2 * 0.5), max_relative = 1e-12);
    }

    #[test]
    fn near_divergence_flagged() {
        let gp = GaussianPriorParams::new(0.5, 1.0).unwrap();
        // margin = 1 - 2γ
        let v = gp.closed_ratio(&mkt(), 0.0, 0.5 - 1e-10).unwrap();
        assert!(v.near_divergent);
        assert!(!gp.closed_ratio(&mkt(), 0.0, 0.4).unwrap().near_divergent);
    }

    #[test]
    fn explosion_point() {
        let gp = GaussianPriorParams::new(0.5, 1.0).unwrap();
        let g = gp.explosion_gamma(&mkt(), 0.5);
        assert_relative_eq!(g, 0.75);
        // denominator vanishes there
        assert!((gp.existence_margin(&mkt(), g) + 0.5).abs() < 1e-15);
    }
}
