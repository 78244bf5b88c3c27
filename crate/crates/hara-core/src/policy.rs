//! Optimal portfolios under partial observation for the HARA family, their
//! myopic counterparts, hedging demands and value functions.
//!
//! Portfolios are amounts invested in the risky asset. With `s = T - t` and
//! `k = 1/(1-γ)` the power portfolio is
//!
//! ```text
//! π̂_γ(t,x,y) = (x/(σ(1-γ)) + η e^{-r s}/(σβ)) ∫ Θ̂(T, y+z) q(t,y,z;γ) dz
//! q(t,y,z;γ) ∝ F(T, y+z)^k φ_s(z)
//! ```
//!
//! The exponential portfolio uses the untilted kernel (`k = 0`) and the
//! logarithmic one is myopic.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bayes_filter::{filter_state, FilterState};
use crate::error::{HaraError, Result};
use crate::numerics::{log_normal_pdf, QuadConfig, TiltPoint, TiltedIntegrator};
use crate::prior::Prior;

/// Below this γ the power portfolio is evaluated with the limiting
/// (untilted) kernel.
pub const GAMMA_FLOOR: f64 = -1e6;
/// Largest admissible γ.
pub const GAMMA_CEILING: f64 = 1.0 - 1e-6;
/// Posterior means below this magnitude count as zero: the ratio to the
/// myopic portfolio is then undefined.
pub const ZERO_ESTIMATE: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketParams {
    pub r: f64,
    pub sigma: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
}

impl MarketParams {
    pub fn new(r: f64, sigma: f64, horizon: f64) -> Result<Self> {
        let m = MarketParams { r, sigma, horizon };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r >= 0.0) || !self.r.is_finite() {
            return Err(HaraError::param("market.r", "rate must be finite and >= 0"));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(HaraError::param(
                "market.sigma",
                "volatility must be positive",
            ));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(HaraError::param("market.T", "horizon must be positive"));
        }
        Ok(())
    }

    /// `e^{-r(T-t)}`.
    pub fn discount(&self, t: f64) -> f64 {
        (-self.r * (self.horizon - t)).exp()
    }
}

/// Member of the HARA family.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Utility {
    Power { gamma: f64, beta: f64, eta: f64 },
    Log { beta: f64, eta: f64 },
    Exp { beta: f64 },
}

impl Utility {
    pub fn power(gamma: f64, beta: f64, eta: f64) -> Result<Self> {
        let u = Utility::Power { gamma, beta, eta };
        u.validate()?;
        Ok(u)
    }

    pub fn log(beta: f64, eta: f64) -> Result<Self> {
        let u = Utility::Log { beta, eta };
        u.validate()?;
        Ok(u)
    }

    pub fn exp(beta: f64) -> Result<Self> {
        let u = Utility::Exp { beta };
        u.validate()?;
        Ok(u)
    }

    pub fn validate(&self) -> Result<()> {
        let beta = match *self {
            Utility::Power { gamma, beta, eta } => {
                if !gamma.is_finite() || gamma == 0.0 || gamma > GAMMA_CEILING {
                    return Err(HaraError::param(
                        "utility.gamma",
                        format!("need γ < 1 - 1e-6 and γ != 0, got {gamma}"),
                    ));
                }
                if !eta.is_finite() {
                    return Err(HaraError::param("utility.eta", "must be finite"));
                }
                beta
            }
            Utility::Log { beta, eta } => {
                if !eta.is_finite() {
                    return Err(HaraError::param("utility.eta", "must be finite"));
                }
                beta
            }
            Utility::Exp { beta } => beta,
        };
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(HaraError::param("utility.beta", "must be positive"));
        }
        Ok(())
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            Utility::Power { .. } => "power",
            Utility::Log { .. } => "log",
            Utility::Exp { .. } => "exp",
        }
    }

    /// The argument of the power / log, `βx/(1-γ) + η` or `βx + η`.
    pub fn shifted(&self, x: f64) -> f64 {
        match *self {
            Utility::Power { gamma, beta, eta } => beta * x / (1.0 - gamma) + eta,
            Utility::Log { beta, eta } => beta * x + eta,
            Utility::Exp { .. } => f64::INFINITY,
        }
    }

    pub fn in_domain(&self, x: f64) -> bool {
        x.is_finite() && self.shifted(x) > 0.0
    }

    /// `u(x)`, `None` outside the domain.
    pub fn value(&self, x: f64) -> Option<f64> {
        if !self.in_domain(x) {
            return None;
        }
        Some(match *self {
            Utility::Power { gamma, .. } => (1.0 - gamma) / gamma * self.shifted(x).powf(gamma),
            Utility::Log { .. } => self.shifted(x).ln(),
            Utility::Exp { beta } => -(-beta * x).exp(),
        })
    }

    /// Certainty equivalent: the wealth whose utility is `u`.
    pub fn inverse(&self, u: f64) -> Option<f64> {
        let x = match *self {
            Utility::Power { gamma, beta, eta } => {
                let base = u * gamma / (1.0 - gamma);
                if !(base > 0.0) {
                    return None;
                }
                (base.powf(1.0 / gamma) - eta) * (1.0 - gamma) / beta
            }
            Utility::Log { beta, eta } => (u.exp() - eta) / beta,
            Utility::Exp { beta } => {
                if !(u < 0.0) {
                    return None;
                }
                -(-u).ln() / beta
            }
        };
        x.is_finite().then_some(x)
    }

    /// Scalar multiplying θ (or its filtered substitute) in the portfolio.
    pub fn prefactor(&self, market: &MarketParams, t: f64, x: f64) -> f64 {
        let sigma = market.sigma;
        let disc = market.discount(t);
        match *self {
            Utility::Power { gamma, beta, eta } => {
                x / (sigma * (1.0 - gamma)) + eta * disc / (sigma * beta)
            }
            Utility::Log { beta, eta } => x / sigma + eta * disc / (sigma * beta),
            Utility::Exp { beta } => disc / (sigma * beta),
        }
    }
}

/// State at which a portfolio or value function is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

impl EvalPoint {
    pub fn new(t: f64, x: f64, y: f64) -> Self {
        EvalPoint { t, x, y }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolicyReport {
    pub pi_hat: f64,
    pub pi_myopic: f64,
    pub hedging_demand: f64,
    pub relative_hedging: Option<f64>,
    pub ratio: Option<f64>,
}

/// One row of a γ-sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepValues {
    pub pi_hat: f64,
    pub pi_myopic: f64,
    pub ratio: Option<f64>,
    pub hedging: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub gamma: f64,
    pub result: Result<SweepValues>,
}

/// Merton portfolio for a known market price of risk `theta`.
pub fn pi_merton(util: &Utility, market: &MarketParams, pt: &EvalPoint, theta: f64) -> Result<f64> {
    check_point(util, market, pt)?;
    Ok(util.prefactor(market, pt.t, pt.x) * theta)
}

fn check_point(util: &Utility, market: &MarketParams, pt: &EvalPoint) -> Result<()> {
    util.validate()?;
    if !(pt.t >= 0.0) || pt.t > market.horizon {
        return Err(HaraError::param(
            "t",
            format!("evaluation time {} outside [0, {}]", pt.t, market.horizon),
        ));
    }
    if !pt.y.is_finite() {
        return Err(HaraError::param("y", "observation must be finite"));
    }
    let compounded = pt.x * (market.r * (market.horizon - pt.t)).exp();
    if !util.in_domain(compounded) {
        return Err(HaraError::Domain { t: pt.t, x: pt.x });
    }
    Ok(())
}

/// Tilted density `q(t, y, ·; γ)` in z.
pub struct QDensity<'a> {
    model: &'a Model,
    y: f64,
    s: f64,
    k: f64,
    log_mass: f64,
    theta_mean: f64,
}

impl QDensity<'_> {
    pub fn pdf(&self, z: f64) -> Result<f64> {
        let fs = self.model.terminal(self.y + z)?;
        Ok((self.k * fs.log_f + log_normal_pdf(z, self.s) - self.log_mass).exp())
    }

    /// `log ∫ F(T, y+z)^k φ_s(z) dz`.
    pub fn log_normalizer(&self) -> f64 {
        self.log_mass
    }

    /// `∫ Θ̂(T, y+z) q(z) dz`.
    pub fn mean_theta_hat(&self) -> f64 {
        self.theta_mean
    }
}

/// Prior, market and quadrature settings; all portfolio computations hang
/// off this.
#[derive(Clone, Debug)]
pub struct Model {
    prior: Prior,
    market: MarketParams,
    quad: QuadConfig,
}

impl Model {
    pub fn new(prior: Prior, market: MarketParams) -> Result<Self> {
        Self::with_quad(prior, market, QuadConfig::default())
    }

    pub fn with_quad(prior: Prior, market: MarketParams, quad: QuadConfig) -> Result<Self> {
        market.validate()?;
        quad.validate()?;
        Ok(Model {
            prior,
            market,
            quad,
        })
    }

    pub fn prior(&self) -> &Prior {
        &self.prior
    }

    pub fn market(&self) -> &MarketParams {
        &self.market
    }

    pub fn quad(&self) -> &QuadConfig {
        &self.quad
    }

    pub fn filter(&self, t: f64, y: f64) -> Result<FilterState> {
        filter_state(&self.prior, t, y)
    }

    fn terminal(&self, y: f64) -> Result<FilterState> {
        filter_state(&self.prior, self.market.horizon, y)
    }

    fn remaining(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) || t > self.market.horizon {
            return Err(HaraError::param(
                "t",
                format!("time {t} outside [0, {}]", self.market.horizon),
            ));
        }
        Ok(self.market.horizon - t)
    }

    /// Existence of the power problem. Only Gaussian priors have a known
    /// finite-γ blow-up: `(1-γ) - γ v² T > 0`.
    pub fn check_power_existence(&self, gamma: f64) -> Result<()> {
        if let Some((_, v)) = self.prior.gaussian_params() {
            let margin = (1.0 - gamma) - gamma * v * v * self.market.horizon;
            if !(margin > 0.0) {
                return Err(HaraError::Divergent(format!(
                    "gaussian prior requires (1-γ) - γv²T > 0, got {margin:e} at γ = {gamma}"
                )));
            }
        }
        Ok(())
    }

    fn tilt_exponent(gamma: f64) -> Result<f64> {
        if !gamma.is_finite() || gamma >= 1.0 {
            return Err(HaraError::param(
                "gamma",
                format!("need γ < 1, got {gamma}"),
            ));
        }
        Ok(if gamma < GAMMA_FLOOR {
            0.0
        } else {
            1.0 / (1.0 - gamma)
        })
    }

    fn integrator(
        &self,
        s: f64,
        k: f64,
        y: f64,
    ) -> Result<TiltedIntegrator<impl Fn(f64) -> Result<TiltPoint> + '_>> {
        TiltedIntegrator::new(s, k, move |z| Ok(self.terminal(y + z)?.tilt_point()))
    }

    /// Tilted density `q(t, y, ·; γ)`; γ = 0 is allowed here.
    pub fn q_density(&self, t: f64, y: f64, gamma: f64) -> Result<QDensity<'_>> {
        let s = self.remaining(t)?;
        if s == 0.0 {
            return Err(HaraError::DegenerateKernel);
        }
        self.check_power_existence(gamma)?;
        let k = Self::tilt_exponent(gamma)?;
        let m = self
            .integrator(s, k, y)?
            .refined(&self.quad, |_, p| p.slope)?;
        Ok(QDensity {
            model: self,
            y,
            s,
            k,
            log_mass: m.log_mass,
            theta_mean: m.mean,
        })
    }

    /// `∫ Θ̂(T, y+z) q(t, y, z; γ) dz`, or `Θ̂(T, y)` at `t = T`.
    pub fn tilted_theta(&self, t: f64, y: f64, gamma: f64) -> Result<f64> {
        if self.remaining(t)? == 0.0 {
            return Ok(self.terminal(y)?.theta_hat);
        }
        Ok(self.q_density(t, y, gamma)?.mean_theta_hat())
    }

    /// `∫ Θ̂(T, y+z) φ_{T-t}(z) dz`, the exponential investor's estimate.
    pub fn smoothed_theta(&self, t: f64, y: f64) -> Result<f64> {
        let s = self.remaining(t)?;
        if s == 0.0 {
            return Ok(self.terminal(y)?.theta_hat);
        }
        Ok(self
            .integrator(s, 0.0, y)?
            .refined(&self.quad, |_, p| p.slope)?
            .mean)
    }

    /// `log ĥ(t, y; γ)`.
    pub fn log_h(&self, t: f64, y: f64, gamma: f64) -> Result<f64> {
        if gamma == 0.0 {
            return Err(HaraError::param("gamma", "γ = 0 is the logarithmic case"));
        }
        self.check_power_existence(gamma)?;
        let k = Self::tilt_exponent(gamma)?;
        let s = self.remaining(t)?;
        if s == 0.0 {
            return Ok(k * self.terminal(y)?.log_f);
        }
        Ok(self
            .integrator(s, k, y)?
            .refined(&self.quad, |_, p| p.slope)?
            .log_mass)
    }

    pub fn pi_hat(&self, util: &Utility, pt: &EvalPoint) -> Result<f64> {
        check_point(util, &self.market, pt)?;
        let estimate = match *util {
            Utility::Power { gamma, .. } => {
                self.check_power_existence(gamma)?;
                self.tilted_theta(pt.t, pt.y, gamma)?
            }
            Utility::Log { .. } => self.filter(pt.t, pt.y)?.theta_hat,
            Utility::Exp { .. } => self.smoothed_theta(pt.t, pt.y)?,
        };
        Ok(util.prefactor(&self.market, pt.t, pt.x) * estimate)
    }

    pub fn pi_myopic(&self, util: &Utility, pt: &EvalPoint) -> Result<f64> {
        let theta = self.filter(pt.t, pt.y)?.theta_hat;
        pi_merton(util, &self.market, pt, theta)
    }

    pub fn policy_report(&self, util: &Utility, pt: &EvalPoint) -> Result<PolicyReport> {
        let pi_hat = self.pi_hat(util, pt)?;
        let pi_myopic = self.pi_myopic(util, pt)?;
        let hedging_demand = pi_hat - pi_myopic;
        let theta_hat = self.filter(pt.t, pt.y)?.theta_hat;
        let (ratio, relative_hedging) = if pi_myopic != 0.0 && theta_hat.abs() > ZERO_ESTIMATE {
            (Some(pi_hat / pi_myopic), Some(hedging_demand / pi_myopic))
        } else {
            (None, None)
        };
        Ok(PolicyReport {
            pi_hat,
            pi_myopic,
            hedging_demand,
            relative_hedging,
            ratio,
        })
    }

    /// Value function of the reduced (reference-measure) problem.
    pub fn value_function(&self, util: &Utility, pt: &EvalPoint) -> Result<f64> {
        check_point(util, &self.market, pt)?;
        let s = self.remaining(pt.t)?;
        let compounded = pt.x * (self.market.r * s).exp();
        let u = util
            .value(compounded)
            .ok_or(HaraError::Domain { t: pt.t, x: pt.x })?;
        let value = match *util {
            Utility::Power { gamma, .. } => {
                u * ((1.0 - gamma) * self.log_h(pt.t, pt.y, gamma)?).exp()
            }
            Utility::Log { .. } => {
                let log_f_now = self.filter(pt.t, pt.y)?.log_f;
                let f_now = log_f_now.exp();
                // ∫ F ln F φ dz = ∫ F φ dz · E_q1[ln F]
                let tail = if s == 0.0 {
                    let lf = self.terminal(pt.y)?.log_f;
                    lf.exp() * lf
                } else {
                    let m = self
                        .integrator(s, 1.0, pt.y)?
                        .refined(&self.quad, |_, p| p.log_f)?;
                    m.log_mass.exp() * m.mean
                };
                f_now * u - f_now * log_f_now + tail
            }
            Utility::Exp { .. } => {
                let mean_log_f = if s == 0.0 {
                    self.terminal(pt.y)?.log_f
                } else {
                    self.integrator(s, 0.0, pt.y)?
                        .refined(&self.quad, |_, p| p.log_f)?
                        .mean
                };
                u * mean_log_f.exp()
            }
        };
        if !value.is_finite() {
            return Err(HaraError::Divergent(format!("value function is {value}")));
        }
        Ok(value)
    }

    /// Power portfolios over a γ grid; rows come back in ascending γ and
    /// carry their own errors.
    pub fn gamma_sweep(
        &self,
        pt: &EvalPoint,
        beta: f64,
        eta: f64,
        gammas: &[f64],
    ) -> Vec<SweepRow> {
        let mut gammas = gammas.to_vec();
        gammas.sort_by(f64::total_cmp);
        gammas
            .par_iter()
            .map(|&gamma| SweepRow {
                gamma,
                result: Utility::power(gamma, beta, eta)
                    .and_then(|u| self.policy_report(&u, pt))
                    .map(|r| SweepValues {
                        pi_hat: r.pi_hat,
                        pi_myopic: r.pi_myopic,
                        ratio: r.ratio,
                        hedging: r.hedging_demand,
                    }),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn market(r: f64, sigma: f64, horizon: f64) -> MarketParams {
        MarketParams::new(r, sigma, horizon).unwrap()
    }

    #[test]
    fn merton_examples() {
        let mkt = market(0.0, 0.2, 1.0);
        let pt = EvalPoint::new(0.0, 1.0, 0.0);
        let pow = Utility::power(0.5, 1.0, 0.0).unwrap();
        assert_eq!(pi_merton(&pow, &mkt, &pt, 0.0).unwrap(), 0.0);
        assert_relative_eq!(
            pi_merton(&pow, &mkt, &pt, 0.3).unwrap(),
            3.0,
            epsilon = 1e-14
        );
        let mkt = market(0.1, 0.5, 1.0);
        let ex = Utility::exp(2.0).unwrap();
        let v = pi_merton(&ex, &mkt, &pt, 0.4).unwrap();
        assert_relative_eq!(v, (-0.1f64).exp() * 0.4, epsilon = 1e-15);
        assert_relative_eq!(v, 0.36193, epsilon = 1e-5);
    }

    #[test]
    fn point_mass_power_is_merton() {
        let model = Model::new(Prior::point_mass(0.3).unwrap(), market(0.0, 0.2, 1.0)).unwrap();
        let u = Utility::power(0.5, 1.0, 0.0).unwrap();
        for (t, y) in [(0.0, 0.0), (0.4, 1.0), (0.9, -2.0)] {
            let v = model.pi_hat(&u, &EvalPoint::new(t, 1.0, y)).unwrap();
            assert!((v - 3.0).abs() <= 1e-12, "{v}");
        }
    }

    #[test]
    fn log_examples() {
        let model = Model::new(Prior::point_mass(0.3).unwrap(), market(0.0, 0.2, 1.0)).unwrap();
        let u = Utility::log(1.0, 0.0).unwrap();
        let pt = EvalPoint::new(0.2, 1.0, 0.4);
        assert_relative_eq!(model.pi_hat(&u, &pt).unwrap(), 1.5, epsilon = 1e-14);

        let model = Model::new(Prior::gaussian(0.0, 1.0).unwrap(), market(0.0, 1.0, 2.0)).unwrap();
        let pt = EvalPoint::new(1.0, 1.0, 1.0);
        assert_relative_eq!(model.pi_hat(&u, &pt).unwrap(), 0.5, epsilon = 1e-12);
        assert_eq!(
            model.pi_hat(&u, &pt).unwrap(),
            model.pi_myopic(&u, &pt).unwrap()
        );
    }

    #[test]
    fn exp_point_mass() {
        let model = Model::new(Prior::point_mass(0.3).unwrap(), market(0.0, 0.2, 1.0)).unwrap();
        let u = Utility::exp(1.0).unwrap();
        let v = model.pi_hat(&u, &EvalPoint::new(0.3, -50.0, 0.7)).unwrap();
        assert!((v - 1.5).abs() <= 1e-12);
    }

    #[test]
    fn myopic_gaussian_example() {
        let model = Model::new(Prior::gaussian(0.0, 1.0).unwrap(), market(0.0, 1.0, 2.0)).unwrap();
        let u = Utility::power(0.25, 1.0, 0.0).unwrap();
        let v = model.pi_myopic(&u, &EvalPoint::new(1.0, 1.0, 1.0)).unwrap();
        assert_relative_eq!(v, 0.5 / 0.75, epsilon = 1e-12);
    }

    #[test]
    fn gaussian_closed_form_ratio_and_hedging() {
        let model = Model::new(Prior::gaussian(0.5, 1.0).unwrap(), market(0.0, 0.2, 1.0)).unwrap();
        let u = Utility::power(0.25, 1.0, 0.0).unwrap();
        let rep = model
            .policy_report(&u, &EvalPoint::new(0.0, 1.0, 0.0))
            .unwrap();
        assert!((rep.ratio.unwrap() - 1.5).abs() <= 1e-7);
        assert!((rep.relative_hedging.unwrap() - 0.5).abs() <= 1e-7);
        assert_eq!(rep.hedging_demand, rep.pi_hat - rep.pi_myopic);
    }

    #[test]
    fn gaussian_existence_violation_is_divergent() {
        let model = Model::new(Prior::gaussian(0.0, 1.0).unwrap(), market(0.0, 0.2, 1.0)).unwrap();
        let err = model.q_density(0.0, 0.0, 0.5).err().unwrap();
        assert!(matches!(err, HaraError::Divergent(_)));
        let u = Utility::power(0.5, 1.0, 0.0).unwrap();
        assert!(model
            .pi_hat(&u, &EvalPoint::new(0.0, 1.0, 0.0))
            .unwrap_err()
            .is_numerical());
    }

    #[test]
    fn q_density_normalized() {
        let prior = Prior::discrete([(0.1, 0.3), (0.5, 0.7)]).unwrap();
        let model = Model::new(prior, market(0.0, 0.2, 1.0)).unwrap();
        for gamma in [-3.0, 0.0, 0.5, 0.9] {
            let q = model.q_density(0.2, 0.3, gamma).unwrap();
            // brute-force trapezoid over a wide z window
            let (a, b, n) = (-15.0, 25.0, 200_000);
            let h = (b - a) / n as f64;
            let mut acc = 0.0;
            for i in 0..=n {
                let z = a + i as f64 * h;
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                acc += w * q.pdf(z).unwrap();
            }
            assert!((acc * h - 1.0).abs() <= 1e-10, "γ={gamma}: {}", acc * h);
        }
    }

    #[test]
    fn boundary_time_returns_myopic() {
        let prior = Prior::discrete([(0.1, 0.5), (0.5, 0.5)]).unwrap();
        let model = Model::new(prior, market(0.03, 0.2, 1.0)).unwrap();
        let pt = EvalPoint::new(1.0, 2.0, 0.4);
        for u in [
            Utility::power(-2.0, 1.0, 0.5).unwrap(),
            Utility::exp(1.5).unwrap(),
        ] {
            assert_eq!(
                model.pi_hat(&u, &pt).unwrap(),
                model.pi_myopic(&u, &pt).unwrap()
            );
        }
    }

    #[test]
    fn domain_errors() {
        let model = Model::new(Prior::point_mass(0.3).unwrap(), market(0.0, 0.2, 1.0)).unwrap();
        let u = Utility::power(-1.0, 1.0, 0.0).unwrap();
        let err = model
            .pi_hat(&u, &EvalPoint::new(0.0, -1.0, 0.0))
            .unwrap_err();
        assert!(matches!(err, HaraError::Domain { .. }));
        let u = Utility::log(1.0, 0.0).unwrap();
        assert!(model
            .value_function(&u, &EvalPoint::new(0.0, 0.0, 0.0))
            .is_err());
        assert!(model.pi_hat(&u, &EvalPoint::new(1.5, 1.0, 0.0)).is_err());
    }

    #[test]
    fn utility_validation() {
        assert!(Utility::power(0.0, 1.0, 0.0).is_err());
        assert!(Utility::power(1.0, 1.0, 0.0).is_err());
        assert!(Utility::power(0.5, 0.0, 0.0).is_err());
        assert!(Utility::log(-1.0, 0.0).is_err());
        assert!(Utility::exp(f64::NAN).is_err());
        assert!(Utility::power(-1e7, 1.0, 1.0).is_ok());
    }

    #[test]
    fn utility_inverse_round_trips() {
        let us = [
            Utility::power(-1.0, 1.0, 0.0).unwrap(),
            Utility::power(0.4, 2.0, 1.0).unwrap(),
            Utility::log(1.5, 0.2).unwrap(),
            Utility::exp(0.7).unwrap(),
        ];
        for u in us {
            for x in [0.3, 1.0, 4.2] {
                let back = u.inverse(u.value(x).unwrap()).unwrap();
                assert_relative_eq!(back, x, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn value_function_point_mass_zero() {
        let model = Model::new(Prior::point_mass(0.0).unwrap(), market(0.05, 0.2, 2.0)).unwrap();
        let pt = EvalPoint::new(0.5, 1.3, 0.7);
        let comp = 1.3 * (0.05f64 * 1.5).exp();
        for u in [
            Utility::power(-2.0, 1.0, 0.3).unwrap(),
            Utility::power(0.3, 1.0, 0.0).unwrap(),
            Utility::log(1.0, 0.1).unwrap(),
            Utility::exp(0.5).unwrap(),
        ] {
            let v = model.value_function(&u, &pt).unwrap();
            assert_relative_eq!(v, u.value(comp).unwrap(), max_relative = 1e-12);
        }
    }

    #[test]
    fn value_function_at_horizon() {
        let prior = Prior::discrete([(0.1, 0.4), (0.5, 0.6)]).unwrap();
        let model = Model::new(prior.clone(), market(0.02, 0.2, 1.0)).unwrap();
        let pt = EvalPoint::new(1.0, 1.7, 0.6);
        let f = crate::bayes_filter::log_f(&prior, 1.0, 0.6).unwrap().exp();
        for u in [
            Utility::power(-1.5, 1.0, 0.0).unwrap(),
            Utility::log(1.0, 0.0).unwrap(),
            Utility::exp(1.0).unwrap(),
        ] {
            let v = model.value_function(&u, &pt).unwrap();
            assert_relative_eq!(v, u.value(1.7).unwrap() * f, max_relative = 1e-12);
        }
    }

    #[test]
    fn value_function_log_point_mass_closed_form() {
        // E[ln X_T] = ln x + rT + θ²T/2 under the optimal log policy
        let (theta, r, horizon) = (0.4, 0.03, 2.0);
        let model =
            Model::new(Prior::point_mass(theta).unwrap(), market(r, 0.25, horizon)).unwrap();
        let u = Utility::log(1.0, 0.0).unwrap();
        let v = model
            .value_function(&u, &EvalPoint::new(0.0, 1.5, 0.0))
            .unwrap();
        let expected = 1.5f64.ln() + r * horizon + 0.5 * theta * theta * horizon;
        assert_relative_eq!(v, expected, max_relative = 1e-10);
    }

    #[test]
    fn sweep_rows_sorted_and_errors_kept() {
        let model = Model::new(Prior::gaussian(0.5, 1.0).unwrap(), market(0.0, 0.2, 1.0)).unwrap();
        let rows = model.gamma_sweep(&EvalPoint::new(0.0, 1.0, 0.0), 1.0, 0.0, &[0.6, -1.0, 0.25]);
        let gs: Vec<f64> = rows.iter().map(|r| r.gamma).collect();
        assert_eq!(gs, vec![-1.0, 0.25, 0.6]);
        assert!(rows[0].result.is_ok() && rows[1].result.is_ok());
        assert!(rows[2].result.as_ref().unwrap_err().is_numerical());
    }

    #[test]
    fn ratio_undefined_when_estimate_is_zero() {
        let model = Model::new(Prior::gaussian(0.0, 1.0).unwrap(), market(0.0, 0.2, 1.0)).unwrap();
        let u = Utility::power(-1.0, 1.0, 0.0).unwrap();
        let rep = model
            .policy_report(&u, &EvalPoint::new(0.0, 1.0, 0.0))
            .unwrap();
        assert!(rep.pi_myopic.abs() < 1e-13);
        assert!(rep.ratio.is_none());
        assert!(rep.relative_hedging.is_none());
    }
}
