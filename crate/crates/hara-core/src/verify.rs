//! Structural properties as executable checks.
//!
//! Each check evaluates a property on a grid and records the worst
//! observed discrepancy next to its tolerance. Priors whose support changes
//! sign are not covered by the monotonicity result; for them the γ-sweep
//! runs in detection mode and reports where the ratio decreases instead of
//! failing.

use std::fmt;

use crate::bayes_filter::{filter_state, posterior_density};
use crate::error::{HaraError, Result};
use crate::gaussian_oracle::GaussianPriorParams;
use crate::policy::{pi_merton, EvalPoint, MarketParams, Model, Utility};
use crate::prior::{Prior, SignClass};

/// Slack allowed in monotonicity and bound comparisons.
pub const ORDER_SLACK: f64 = 1e-9;
/// γ used for the small-|γ| and log limits.
pub const NEAR_ZERO_GAMMA: f64 = 1e-4;
/// γ used for the exponential limit.
pub const VERY_NEGATIVE_GAMMA: f64 = -1e4;
/// Distance from the horizon for the myopic limit.
pub const HORIZON_GAP: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub cases: usize,
    pub worst: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            passed: true,
            cases: 0,
            worst: 0.0,
            tolerance,
            detail: String::new(),
        }
    }

    /// Records one case with discrepancy `err`; NaN counts as a failure.
    fn record(&mut self, err: f64, what: impl FnOnce() -> String) {
        self.cases += 1;
        let bad = !(err <= self.tolerance);
        if bad || err > self.worst || err.is_nan() {
            self.worst = if err.is_nan() {
                f64::NAN
            } else {
                self.worst.max(err)
            };
        }
        if bad {
            if self.passed {
                self.detail = what();
            }
            self.passed = false;
        }
    }

    fn fail(&mut self, msg: String) {
        self.cases += 1;
        if self.passed {
            self.detail = msg;
        }
        self.passed = false;
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {} cases, worst {:.3e} (tol {:.0e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.cases,
            self.worst,
            self.tolerance
        )?;
        if !self.detail.is_empty() {
            write!(f, "; {}", self.detail)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
    /// Monotonicity failures found on mixed-sign priors.
    pub detections: Vec<String>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// The 50-point γ grid on `[-20, 0.95]`.
pub fn default_gammas() -> Vec<f64> {
    linspace(-20.0, 0.95, 50)
}

/// Relative error of `a` against `b`. Where `|b|` is below `1e-8·scale`
/// the reference is zero to its own precision and the error is taken
/// relative to `scale` instead.
pub fn relative_error(a: f64, b: f64, scale: f64) -> f64 {
    let scale = scale.abs();
    let denom = if b.abs() > 1e-8 * scale {
        b.abs()
    } else {
        scale
    };
    (a - b).abs() / denom
}

/// Natural size of a portfolio at `pt`: prefactor times the posterior
/// mean's magnitude plus one posterior standard deviation.
pub fn portfolio_scale(model: &Model, util: &Utility, pt: &EvalPoint) -> Result<f64> {
    let fs = model.filter(pt.t, pt.y)?;
    Ok(util.prefactor(model.market(), pt.t, pt.x).abs()
        * (fs.theta_hat.abs() + fs.theta_var.sqrt()))
}

/// Quadrature π̂ against the Gaussian closed form over `gammas × points`.
/// Where the problem does not exist the quadrature must report divergence.
pub fn gaussian_oracle_check(
    model: &Model,
    gammas: &[f64],
    points: &[EvalPoint],
    beta: f64,
    eta: f64,
    tol: f64,
) -> Result<Check> {
    let (m, v) = model
        .prior()
        .gaussian_params()
        .ok_or_else(|| HaraError::InvalidPrior("oracle check needs a gaussian prior".into()))?;
    let gp = GaussianPriorParams::new(m, v)?;
    let mut check = Check::new("gaussian oracle equivalence", tol);
    for &gamma in gammas {
        let util = Utility::power(gamma, beta, eta)?;
        for pt in points {
            let quad = model.pi_hat(&util, pt);
            if !gp.exists_power(model.market(), gamma) {
                match quad {
                    Err(HaraError::Divergent(_)) => check.cases += 1,
                    other => check.fail(format!("γ={gamma}: expected divergence, got {other:?}")),
                }
                continue;
            }
            let closed = gp.closed_pi_hat(&util, model.market(), pt)?.value;
            match quad {
                Ok(q) => {
                    let scale = portfolio_scale(model, &util, pt)?;
                    check.record(relative_error(q, closed, scale), || {
                        format!("γ={gamma} t={} y={}: quad {q} closed {closed}", pt.t, pt.y)
                    });
                }
                Err(e) => check.fail(format!("γ={gamma} t={} y={}: {e}", pt.t, pt.y)),
            }
        }
    }
    Ok(check)
}

/// Point-mass priors: every family's optimal portfolio is Merton's.
pub fn point_mass_check(
    thetas: &[f64],
    market: &MarketParams,
    utilities: &[Utility],
    points: &[EvalPoint],
    tol: f64,
) -> Result<Check> {
    let mut check = Check::new("point-mass reduction", tol);
    for &theta in thetas {
        let model = Model::new(Prior::point_mass(theta)?, *market)?;
        for util in utilities {
            for pt in points {
                let merton = pi_merton(util, market, pt, theta)?;
                match model.pi_hat(util, pt) {
                    Ok(p) => check.record((p - merton).abs() / merton.abs().max(1.0), || {
                        format!(
                            "θ₀={theta} {} at {pt:?}: {p} vs {merton}",
                            util.family_name()
                        )
                    }),
                    Err(e) => check.fail(format!("θ₀={theta} {}: {e}", util.family_name())),
                }
            }
        }
    }
    Ok(check)
}

/// Ratio `π̂_γ / π^m_γ` over a γ-grid: positive, nondecreasing, close to 1
/// at `γ = ±1e-4` and inside `[θ₁/θ₂, θ₂/θ₁]` (absolute values) when the
/// prior has constant sign. Mixed-sign priors only report where the ratio
/// is not monotone.
pub fn ratio_order_check(
    model: &Model,
    points: &[EvalPoint],
    gammas: &[f64],
    beta: f64,
    eta: f64,
) -> Result<(Check, Vec<String>)> {
    let strict = model.prior().sign_class().is_constant();
    let name = if strict {
        "ratio positive, monotone in γ, bounded"
    } else {
        "ratio monotonicity (detection mode)"
    };
    let mut check = Check::new(name, ORDER_SLACK);
    let mut detections = Vec::new();
    let abs: Vec<f64> = model
        .prior()
        .atoms()
        .iter()
        .map(|a| a.theta.abs())
        .collect();
    let lo = abs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = abs.iter().copied().fold(0.0, f64::max);
    let (lower, upper) = (lo / hi, hi / lo);

    for pt in points {
        let rows = model.gamma_sweep(pt, beta, eta, gammas);
        let mut prev: Option<(f64, f64)> = None;
        for row in &rows {
            let ratio = match &row.result {
                Ok(v) => v.ratio,
                Err(e) => {
                    if strict {
                        check.fail(format!("γ={} at {pt:?}: {e}", row.gamma));
                    }
                    prev = None;
                    continue;
                }
            };
            let Some(ratio) = ratio else {
                if strict {
                    check.fail(format!("γ={} at {pt:?}: ratio undefined", row.gamma));
                }
                prev = None;
                continue;
            };
            if let Some((g0, r0)) = prev {
                let drop = r0 - ratio;
                if strict {
                    check.record(drop.max(0.0), || {
                        format!(
                            "decrease {drop:e} between γ={g0} and γ={} at {pt:?}",
                            row.gamma
                        )
                    });
                } else {
                    check.cases += 1;
                    if drop > ORDER_SLACK {
                        detections.push(format!(
                            "t={} y={}: ratio falls by {drop:.3e} from γ={g0:.4} to γ={:.4}",
                            pt.t, pt.y, row.gamma
                        ));
                    }
                }
            }
            if strict {
                if !(ratio > 0.0) {
                    check.fail(format!("ratio {ratio} <= 0 at γ={} {pt:?}", row.gamma));
                }
                let out = (lower - ratio).max(ratio - upper).max(0.0);
                check.record(out, || {
                    format!(
                        "ratio {ratio} outside [{lower}, {upper}] at γ={} {pt:?}",
                        row.gamma
                    )
                });
            }
            prev = Some((row.gamma, ratio));
        }
    }
    if strict {
        let mut near = Check::new("", 1e-3);
        for pt in points {
            for g in [-NEAR_ZERO_GAMMA, NEAR_ZERO_GAMMA] {
                let r = model.policy_report(&Utility::power(g, beta, eta)?, pt)?;
                match r.ratio {
                    Some(ratio) => near.record((ratio - 1.0).abs(), || {
                        format!("ratio({g}) = {ratio} at {pt:?}")
                    }),
                    None => near.fail(format!("ratio({g}) undefined at {pt:?}")),
                }
            }
        }
        if !near.passed {
            check.passed = false;
            check.detail = near.detail;
        }
        check.cases += near.cases;
    }
    Ok((check, detections))
}

/// `γ → 0` gives the log portfolio and `γ → -∞` with `η = 1` the
/// exponential one.
pub fn limits_check(
    model: &Model,
    points: &[EvalPoint],
    beta: f64,
    tol: f64,
) -> Result<Vec<Check>> {
    let mut log_check = Check::new("γ→0 limit is the log portfolio", tol);
    let mut exp_check = Check::new("γ→-∞ limit is the exponential portfolio", tol);
    let near_log = Utility::power(NEAR_ZERO_GAMMA, beta, 0.0)?;
    let log = Utility::log(beta, 0.0)?;
    let near_exp = Utility::power(VERY_NEGATIVE_GAMMA, beta, 1.0)?;
    let exp = Utility::exp(beta)?;
    for pt in points {
        let a = model.pi_hat(&near_log, pt)?;
        let b = model.pi_hat(&log, pt)?;
        let scale = portfolio_scale(model, &log, pt)?;
        log_check.record(relative_error(a, b, scale), || {
            format!("{pt:?}: {a} vs {b}")
        });
        let a = model.pi_hat(&near_exp, pt)?;
        let b = model.pi_hat(&exp, pt)?;
        let scale = portfolio_scale(model, &exp, pt)?;
        exp_check.record(relative_error(a, b, scale), || {
            format!("{pt:?}: {a} vs {b}")
        });
    }
    Ok(vec![log_check, exp_check])
}

/// Just before the horizon the optimal portfolio is the myopic one:
/// `|π̂ - π^m| <= tol · scale` at `t = T - 1e-4`.
pub fn horizon_limit_check(
    model: &Model,
    utilities: &[Utility],
    ys: &[f64],
    xs: &[f64],
    tol: f64,
) -> Result<Check> {
    let mut check = Check::new("myopic limit at the horizon", tol);
    let t = model.market().horizon - HORIZON_GAP;
    for util in utilities {
        for &y in ys {
            for &x in xs {
                let pt = EvalPoint::new(t, x, y);
                let r = model.policy_report(util, &pt)?;
                let scale = portfolio_scale(model, util, &pt)?;
                check.record(r.hedging_demand.abs() / scale, || {
                    format!(
                        "{} at y={y} x={x}: π̂={} π^m={}",
                        util.family_name(),
                        r.pi_hat,
                        r.pi_myopic
                    )
                });
            }
        }
    }
    Ok(check)
}

/// `0 <= π̂_exp / π^m_exp <= 1` for positive priors.
pub fn exp_ratio_check(model: &Model, points: &[EvalPoint], beta: f64) -> Result<Check> {
    if model.prior().sign_class() != SignClass::StrictlyPositive {
        return Err(HaraError::InvalidPrior(
            "exponential bound needs a positive prior".into(),
        ));
    }
    let mut check = Check::new("exponential ratio in [0, 1]", 1e-12);
    let util = Utility::exp(beta)?;
    for pt in points {
        let r = model.policy_report(&util, pt)?;
        match r.ratio {
            Some(ratio) => check.record((-ratio).max(ratio - 1.0).max(0.0), || {
                format!("ratio {ratio} at {pt:?}")
            }),
            None => check.fail(format!("ratio undefined at {pt:?}")),
        }
    }
    Ok(check)
}

/// Filter identities: score identity by central differences of F,
/// posterior normalization, the tower property of q at γ = 0 and
/// monotonicity of Θ̂ in y.
pub fn filter_checks(model: &Model, ts: &[f64], ys: &[f64]) -> Result<Vec<Check>> {
    let prior = model.prior();
    let horizon = model.market().horizon;
    let mut score = Check::new("Θ̂ = ∂_y F / F", 1e-6);
    let mut norm = Check::new("posterior normalization", 1e-10);
    let mut tower = Check::new("tower property of q", 1e-8);
    let mut mono = Check::new("Θ̂ nondecreasing in y", 1e-12);
    let h = 1e-4;
    for &t in ts {
        for &y in ys {
            let fs = filter_state(prior, t, y)?;
            let up = (filter_state(prior, t, y + h)?.log_f - fs.log_f).exp();
            let down = (filter_state(prior, t, y - h)?.log_f - fs.log_f).exp();
            let fd = (up - down) / (2.0 * h);
            score.record(
                (fd - fs.theta_hat).abs() / fs.theta_hat.abs().max(1.0),
                || format!("t={t} y={y}: {fd} vs {}", fs.theta_hat),
            );
            if t > 0.0 {
                let d = posterior_density(prior, t, y)?;
                let mass = prior.integrate(|th| d.at(th))?;
                norm.record((mass - 1.0).abs(), || format!("t={t} y={y}: mass {mass}"));
            }
            if t < horizon {
                let q = model.q_density(t, y, 0.0)?;
                let m = q.mean_theta_hat();
                tower.record((m - fs.theta_hat).abs(), || {
                    format!("t={t} y={y}: {m} vs {}", fs.theta_hat)
                });
            }
        }
        let grid = linspace(-5.0, 5.0, 201);
        let mut prev = f64::NEG_INFINITY;
        for &y in &grid {
            let th = filter_state(prior, t, y)?.theta_hat;
            mono.record((prev - th).max(0.0), || {
                format!("t={t}: Θ̂ decreases at y={y}")
            });
            prev = th;
        }
    }
    Ok(vec![score, norm, tower, mono])
}

/// Options for [`run_suite`].
#[derive(Clone, Debug, PartialEq)]
pub struct SuiteOptions {
    pub points: Vec<EvalPoint>,
    pub gammas: Vec<f64>,
    pub beta: f64,
    pub eta: f64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        let mut points = Vec::new();
        for t in [0.0, 0.5, 0.9] {
            for y in [-1.0, 0.0, 1.0] {
                points.push(EvalPoint::new(t, 1.0, y));
            }
        }
        SuiteOptions {
            points,
            gammas: default_gammas(),
            beta: 1.0,
            eta: 0.0,
        }
    }
}

/// Every suite that applies to the model's prior.
pub fn run_suite(model: &Model, opts: &SuiteOptions) -> Result<VerifyReport> {
    let mut report = VerifyReport::default();
    let horizon = model.market().horizon;
    let points: Vec<EvalPoint> = opts
        .points
        .iter()
        .map(|p| EvalPoint::new(p.t.min(horizon), p.x, p.y))
        .collect();
    let mut ts: Vec<f64> = points.iter().map(|p| p.t).collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let mut ys: Vec<f64> = points.iter().map(|p| p.y).collect();
    ys.sort_by(f64::total_cmp);
    ys.dedup();

    report.checks.extend(filter_checks(model, &ts, &ys)?);
    if model.prior().gaussian_params().is_some() {
        report.checks.push(gaussian_oracle_check(
            model,
            &opts.gammas,
            &points,
            opts.beta,
            opts.eta,
            1e-6,
        )?);
    }
    if let crate::prior::PriorKind::PointMass { theta } = *model.prior().kind() {
        let utils = [
            Utility::power(-1.0, opts.beta, opts.eta)?,
            Utility::log(opts.beta, opts.eta)?,
            Utility::exp(opts.beta)?,
        ];
        report.checks.push(point_mass_check(
            &[theta],
            model.market(),
            &utils,
            &points,
            1e-12,
        )?);
    } else {
        let (check, detections) =
            ratio_order_check(model, &points, &opts.gammas, opts.beta, opts.eta)?;
        report.checks.push(check);
        report.detections = detections;
    }
    let interior: Vec<EvalPoint> = points.iter().copied().filter(|p| p.t < horizon).collect();
    report
        .checks
        .extend(limits_check(model, &interior, opts.beta, 1e-3)?);
    let xs: Vec<f64> = {
        let mut v: Vec<f64> = points.iter().map(|p| p.x).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let utils = [
        Utility::power(-1.0, opts.beta, opts.eta)?,
        Utility::exp(opts.beta)?,
    ];
    report
        .checks
        .push(horizon_limit_check(model, &utils, &ys, &xs, 1e-3)?);
    if model.prior().sign_class() == SignClass::StrictlyPositive {
        report
            .checks
            .push(exp_ratio_check(model, &points, opts.beta)?);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mkt() -> MarketParams {
        MarketParams::new(0.02, 0.2, 1.0).unwrap()
    }

    #[test]
    fn positive_two_point_suite_passes() {
        let model = Model::new(Prior::discrete([(0.2, 0.5), (0.6, 0.5)]).unwrap(), mkt()).unwrap();
        let rep = run_suite(&model, &SuiteOptions::default()).unwrap();
        for c in &rep.checks {
            assert!(c.passed, "{c}");
        }
        assert!(rep.detections.is_empty());
    }

    #[test]
    fn gaussian_suite_passes() {
        let model = Model::new(Prior::gaussian(0.5, 0.5).unwrap(), mkt()).unwrap();
        let opts = SuiteOptions {
            gammas: vec![-4.0, -1.0, 0.25, 0.9],
            ..SuiteOptions::default()
        };
        let rep = run_suite(&model, &opts).unwrap();
        assert!(rep.all_passed(), "{:#?}", rep.checks);
        assert!(rep.checks.iter().any(|c| c.name.contains("oracle")));
    }

    #[test]
    fn mixed_prior_runs_in_detection_mode() {
        let model = Model::new(Prior::discrete([(-0.4, 0.5), (0.6, 0.5)]).unwrap(), mkt()).unwrap();
        let opts = SuiteOptions {
            gammas: linspace(-6.0, 0.9, 12),
            ..SuiteOptions::default()
        };
        let (check, _) = ratio_order_check(&model, &opts.points, &opts.gammas, 1.0, 0.0).unwrap();
        assert!(check.passed);
        assert!(check.name.contains("detection"));
    }

    #[test]
    fn point_mass_suite_passes() {
        let model = Model::new(Prior::point_mass(-0.3).unwrap(), mkt()).unwrap();
        let rep = run_suite(&model, &SuiteOptions::default()).unwrap();
        assert!(rep.all_passed(), "{:#?}", rep.checks);
    }

    #[test]
    fn failing_record_is_reported() {
        let mut c = Check::new("x", 1e-3);
        c.record(1e-4, || unreachable!());
        c.record(0.5, || "too big".into());
        c.record(f64::NAN, || "nan".into());
        assert!(!c.passed);
        assert_eq!(c.detail, "too big");
        assert_eq!(c.cases, 3);
        assert!(c.to_string().starts_with("FAIL"));
    }

    #[test]
    fn relative_error_falls_back_to_scale() {
        assert_eq!(relative_error(1.1, 1.0, 1.0), 0.10000000000000009);
        assert_eq!(relative_error(3e-15, 0.0, 0.5), 6e-15);
        assert_eq!(relative_error(2e-8, 1e-8, 0.5), 1.0);
    }

    #[test]
    fn exp_bound_rejects_mixed_priors() {
        let model = Model::new(Prior::discrete([(-0.4, 0.5), (0.6, 0.5)]).unwrap(), mkt()).unwrap();
        assert!(exp_ratio_check(&model, &[], 1.0).is_err());
    }
}
