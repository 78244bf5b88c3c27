//! Prior distribution of the market price of risk.
//!
//! Every variant is stored as a finite node/weight rule; downstream code
//! only ever integrates against the prior, so a point mass, a discrete
//! prior, a Gaussian (Gauss–Hermite nodes) and a bounded continuous density
//! (Gauss–Legendre nodes) all share one code path.

use std::f64::consts::PI;

use crate::error::{HaraError, Result};
use crate::numerics::{hermite_rule, legendre_rule, DEFAULT_CONTINUOUS_NODES, DEFAULT_THETA_NODES};

/// Weight tolerance accepted at construction.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Atom {
    pub theta: f64,
    pub weight: f64,
}

/// How the prior was specified.
#[derive(Clone, Debug, PartialEq)]
pub enum PriorKind {
    PointMass {
        theta: f64,
    },
    Discrete,
    Gaussian {
        mean: f64,
        std_dev: f64,
        nodes: usize,
    },
    Continuous {
        lower: f64,
        upper: f64,
        nodes: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SignClass {
    StrictlyPositive,
    StrictlyNegative,
    Mixed,
}

impl SignClass {
    pub fn is_constant(self) -> bool {
        self != SignClass::Mixed
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SupportBounds {
    Bounded { lower: f64, upper: f64 },
    Unbounded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prior {
    kind: PriorKind,
    atoms: Vec<Atom>,
    log_weights: Vec<f64>,
}

impl Prior {
    fn assemble(kind: PriorKind, atoms: Vec<Atom>) -> Prior {
        let log_weights = atoms.iter().map(|a| a.weight.ln()).collect();
        Prior {
            kind,
            atoms,
            log_weights,
        }
    }

    pub fn point_mass(theta: f64) -> Result<Self> {
        if !theta.is_finite() {
            return Err(HaraError::InvalidPrior(format!("point mass at {theta}")));
        }
        Ok(Prior::assemble(
            PriorKind::PointMass { theta },
            vec![Atom { theta, weight: 1.0 }],
        ))
    }

    /// Finite prior with atoms `(θᵢ, wᵢ)`. Weights must be strictly positive
    /// and sum to one within [`WEIGHT_SUM_TOL`]; they are not renormalized
    /// beyond that rounding-level slack.
    pub fn discrete(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let atoms: Vec<Atom> = atoms
            .into_iter()
            .map(|(theta, weight)| Atom { theta, weight })
            .collect();
        if atoms.is_empty() {
            return Err(HaraError::InvalidPrior(
                "discrete prior without atoms".into(),
            ));
        }
        for a in &atoms {
            if !a.theta.is_finite() {
                return Err(HaraError::InvalidPrior(format!(
                    "atom location {}",
                    a.theta
                )));
            }
            if !(a.weight > 0.0) || !a.weight.is_finite() {
                return Err(HaraError::InvalidPrior(format!(
                    "atom weight {} at θ = {} is not strictly positive",
                    a.weight, a.theta
                )));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(HaraError::InvalidPrior(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        let atoms = atoms
            .into_iter()
            .map(|a| Atom {
                theta: a.theta,
                weight: a.weight / total,
            })
            .collect();
        Ok(Prior::assemble(PriorKind::Discrete, atoms))
    }

    pub fn gaussian(mean: f64, std_dev: f64) -> Result<Self> {
        Self::gaussian_with_nodes(mean, std_dev, DEFAULT_THETA_NODES)
    }

    /// Gaussian prior N(mean, std_dev²), discretized with an `nodes`-point
    /// Gauss–Hermite rule.
    pub fn gaussian_with_nodes(mean: f64, std_dev: f64, nodes: usize) -> Result<Self> {
        if !mean.is_finite() {
            return Err(HaraError::InvalidPrior(format!("gaussian mean {mean}")));
        }
        if !(std_dev > 0.0) || !std_dev.is_finite() {
            return Err(HaraError::InvalidPrior(format!(
                "gaussian standard deviation must be positive, got {std_dev}"
            )));
        }
        if nodes < 2 {
            return Err(HaraError::InvalidPrior(
                "need at least 2 Gauss–Hermite nodes".into(),
            ));
        }
        let rule = hermite_rule(nodes);
        let scale = std_dev * 2f64.sqrt();
        let total: f64 = rule.weights.iter().sum();
        let atoms = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .filter(|(_, &w)| w > 0.0)
            .map(|(&x, &w)| Atom {
                theta: mean + scale * x,
                weight: w / total,
            })
            .collect();
        Ok(Prior::assemble(
            PriorKind::Gaussian {
                mean,
                std_dev,
                nodes,
            },
            atoms,
        ))
    }

    pub fn from_density(lower: f64, upper: f64, density: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_density_with_nodes(lower, upper, density, DEFAULT_CONTINUOUS_NODES)
    }

    /// Continuous prior on `[lower, upper]` with (possibly unnormalized)
    /// density, discretized by Gauss–Legendre. Nodes where the density
    /// vanishes are dropped.
    pub fn from_density_with_nodes(
        lower: f64,
        upper: f64,
        density: impl Fn(f64) -> f64,
        nodes: usize,
    ) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return Err(HaraError::InvalidPrior(format!(
                "continuous prior needs a bounded interval, got [{lower}, {upper}]"
            )));
        }
        if nodes < 2 {
            return Err(HaraError::InvalidPrior(
                "need at least 2 Gauss–Legendre nodes".into(),
            ));
        }
        let rule = legendre_rule(nodes);
        let half = 0.5 * (upper - lower);
        let mid = 0.5 * (upper + lower);
        let mut atoms = Vec::with_capacity(nodes);
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            let theta = mid + half * x;
            let rho = density(theta);
            if !rho.is_finite() || rho < 0.0 {
                return Err(HaraError::InvalidPrior(format!(
                    "density is {rho} at θ = {theta}"
                )));
            }
            if rho > 0.0 {
                atoms.push(Atom {
                    theta,
                    weight: w * half * rho,
                });
            }
        }
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        if !(total > 0.0) {
            return Err(HaraError::InvalidPrior(
                "density has no mass on the interval".into(),
            ));
        }
        for a in &mut atoms {
            a.weight /= total;
        }
        Ok(Prior::assemble(
            PriorKind::Continuous {
                lower,
                upper,
                nodes,
            },
            atoms,
        ))
    }

    /// Uniform prior on `[lower, upper]`.
    pub fn uniform(lower: f64, upper: f64) -> Result<Self> {
        Self::from_density(lower, upper, |_| 1.0)
    }

    /// Normal density truncated to `[lower, upper]`.
    pub fn truncated_normal(mean: f64, std_dev: f64, lower: f64, upper: f64) -> Result<Self> {
        if !(std_dev > 0.0) {
            return Err(HaraError::InvalidPrior(
                "truncated normal needs std_dev > 0".into(),
            ));
        }
        Self::from_density(lower, upper, |t| {
            (-(t - mean).powi(2) / (2.0 * std_dev * std_dev)).exp() / (std_dev * (2.0 * PI).sqrt())
        })
    }

    pub fn kind(&self) -> &PriorKind {
        &self.kind
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// `ln wᵢ`, aligned with [`Prior::atoms`].
    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// `(mean, std_dev)` when the prior is Gaussian.
    pub fn gaussian_params(&self) -> Option<(f64, f64)> {
        match self.kind {
            PriorKind::Gaussian { mean, std_dev, .. } => Some((mean, std_dev)),
            _ => None,
        }
    }

    /// `∫ g(θ) μ(dθ)`.
    pub fn integrate(&self, g: impl Fn(f64) -> f64) -> Result<f64> {
        let mut acc = 0.0;
        for a in &self.atoms {
            let v = g(a.theta);
            if !v.is_finite() {
                return Err(HaraError::NonFiniteIntegrand { theta: a.theta });
            }
            acc += a.weight * v;
        }
        Ok(acc)
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight * a.theta).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.atoms
            .iter()
            .map(|a| a.weight * (a.theta - m).powi(2))
            .sum()
    }

    pub fn sign_class(&self) -> SignClass {
        if matches!(self.kind, PriorKind::Gaussian { .. }) {
            return SignClass::Mixed;
        }
        if self.atoms.iter().all(|a| a.theta > 0.0) {
            SignClass::StrictlyPositive
        } else if self.atoms.iter().all(|a| a.theta < 0.0) {
            SignClass::StrictlyNegative
        } else {
            SignClass::Mixed
        }
    }

    /// Smallest interval containing the support of the represented measure.
    pub fn support_bounds(&self) -> SupportBounds {
        if matches!(self.kind, PriorKind::Gaussian { .. }) {
            return SupportBounds::Unbounded;
        }
        let lower = self
            .atoms
            .iter()
            .map(|a| a.theta)
            .fold(f64::INFINITY, f64::min);
        let upper = self
            .atoms
            .iter()
            .map(|a| a.theta)
            .fold(f64::NEG_INFINITY, f64::max);
        SupportBounds::Bounded { lower, upper }
    }
}
