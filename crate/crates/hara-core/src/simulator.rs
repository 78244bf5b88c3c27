//! Monte Carlo simulation of learning and wealth.
//!
//! Each path draws Θ from the prior and a Brownian path, observes
//! `Y_t = Θt + W_t` and runs every requested strategy on the same
//! `(Θ, dW)`. Wealth is stepped by Euler–Maruyama. Filter values along the
//! path are exact; the filter SDEs themselves are checked separately in
//! [`FilterSdeCheck`].
//!
//! Every path owns a ChaCha substream selected by its index, so results do
//! not depend on thread scheduling, and all reductions are pairwise sums
//! over path-ordered vectors.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::bayes_filter::filter_state;
use crate::error::{HaraError, Result};
use crate::numerics::{pairwise_sum, QuadConfig};
use crate::policy::{MarketParams, Model, Utility};
use crate::prior::{Prior, PriorKind};

/// Paths whose shifted utility argument falls to this level are flagged.
pub const BOUNDARY_EPS: f64 = 1e-12;
/// Default number of y-nodes per time step in the optimal-policy table.
pub const DEFAULT_TABLE_NODES: usize = 64;
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Strategy {
    Optimal,
    Myopic,
    FixedMerton(f64),
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Optimal => write!(f, "optimal"),
            Strategy::Myopic => write!(f, "myopic"),
            Strategy::FixedMerton(theta) => write!(f, "merton({theta})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub strategies: Vec<Strategy>,
    pub utility: Utility,
    pub prior: Prior,
    pub market: MarketParams,
    pub x0: f64,
    /// Pair path `2j+1` with path `2j`: same Θ, negated increments.
    pub antithetic: bool,
    pub quad: QuadConfig,
    /// y-nodes per step for the tabulated optimal policy.
    pub table_nodes: usize,
}

impl SimConfig {
    pub fn new(prior: Prior, market: MarketParams, utility: Utility) -> Self {
        SimConfig {
            n_paths: 10_000,
            n_steps: 250,
            seed: 0,
            strategies: vec![Strategy::Optimal, Strategy::Myopic],
            utility,
            prior,
            market,
            x0: 1.0,
            antithetic: false,
            quad: QuadConfig::default(),
            table_nodes: DEFAULT_TABLE_NODES,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.market.validate()?;
        self.utility.validate()?;
        self.quad.validate()?;
        if self.n_paths == 0 {
            return Err(HaraError::param("sim.n_paths", "need at least one path"));
        }
        if self.n_steps == 0 {
            return Err(HaraError::param("sim.n_steps", "need at least one step"));
        }
        if self.table_nodes < 4 {
            return Err(HaraError::param(
                "sim.table_nodes",
                "cubic interpolation needs >= 4 nodes",
            ));
        }
        if self.strategies.is_empty() {
            return Err(HaraError::param("sim.strategies", "no strategies given"));
        }
        for (i, s) in self.strategies.iter().enumerate() {
            if self.strategies[..i].contains(s) {
                return Err(HaraError::param(
                    "sim.strategies",
                    format!("{s} listed twice"),
                ));
            }
            if let Strategy::FixedMerton(theta) = s {
                if !theta.is_finite() {
                    return Err(HaraError::param("sim.strategies", "fixed θ must be finite"));
                }
            }
        }
        let compounded = self.x0 * (self.market.r * self.market.horizon).exp();
        if !self.utility.in_domain(compounded) {
            return Err(HaraError::Domain { t: 0.0, x: self.x0 });
        }
        Ok(())
    }
}

/// One simulated trajectory. `y`, the filter paths and wealth have
/// `n_steps + 1` entries; wealth is `NaN` after a path leaves the domain.
#[derive(Clone, Debug, PartialEq)]
pub struct SimPath {
    pub index: usize,
    pub theta_draw: f64,
    pub dw: Vec<f64>,
    pub y: Vec<f64>,
    pub theta_hat: Vec<f64>,
    pub theta_var: Vec<f64>,
    pub wealth: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StrategySummary {
    pub strategy: Strategy,
    pub retained: usize,
    pub violations: usize,
    pub mean_utility: f64,
    pub std_error: f64,
    pub certainty_equivalent: Option<f64>,
    pub mean_wealth: f64,
    pub wealth_std_error: f64,
}

/// `first - second` over paths retained by both.
#[derive(Clone, Debug, PartialEq)]
pub struct PairedDifference {
    pub first: Strategy,
    pub second: Strategy,
    pub n: usize,
    pub mean: f64,
    pub std_error: f64,
}

impl PairedDifference {
    /// Two-sided 95% normal confidence interval.
    pub fn ci95(&self) -> (f64, f64) {
        (
            self.mean - Z95 * self.std_error,
            self.mean + Z95 * self.std_error,
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimReport {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub strategies: Vec<StrategySummary>,
    pub paired: Vec<PairedDifference>,
}

impl SimReport {
    pub fn summary(&self, s: Strategy) -> Option<&StrategySummary> {
        self.strategies.iter().find(|x| x.strategy == s)
    }

    pub fn paired(&self, first: Strategy, second: Strategy) -> Option<&PairedDifference> {
        self.paired
            .iter()
            .find(|p| p.first == first && p.second == second)
    }

    pub fn total_violations(&self) -> usize {
        self.strategies.iter().map(|s| s.violations).sum()
    }
}

/// Optimal estimate on a uniform y-grid for one time step.
#[derive(Clone, Debug)]
struct TableRow {
    y0: f64,
    h: f64,
    values: Vec<f64>,
}

impl TableRow {
    fn eval(&self, y: f64) -> f64 {
        let n = self.values.len();
        if self.h == 0.0 {
            return self.values[0];
        }
        let u = (y - self.y0) / self.h;
        let j = (u.floor() as isize).clamp(1, n as isize - 3) as usize;
        let s = u - j as f64;
        let [a, b, c, d] = [
            self.values[j - 1],
            self.values[j],
            self.values[j + 1],
            self.values[j + 2],
        ];
        // Newton form on nodes j-1..j+2; exact for constant data
        let d1 = b - a;
        let d2 = c - 2.0 * b + a;
        let d3 = d - 3.0 * c + 3.0 * b - a;
        let r = s + 1.0;
        a + r * d1 + r * s / 2.0 * d2 + r * s * (s - 1.0) / 6.0 * d3
    }
}

fn draw_theta(prior: &Prior, rng: &mut ChaCha8Rng) -> f64 {
    if let PriorKind::Gaussian { mean, std_dev, .. } = *prior.kind() {
        let z: f64 = rng.sample(StandardNormal);
        return mean + std_dev * z;
    }
    let atoms = prior.atoms();
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for a in atoms {
        acc += a.weight;
        if u < acc {
            return a.theta;
        }
    }
    atoms[atoms.len() - 1].theta
}

/// Θ and Brownian increments for path `index`. Antithetic partners share a
/// substream and differ by the sign of the increments.
fn path_noise(
    prior: &Prior,
    seed: u64,
    index: usize,
    antithetic: bool,
    n: usize,
    dt: f64,
) -> (f64, Vec<f64>) {
    let (stream, flip) = if antithetic {
        (index / 2, index % 2 == 1)
    } else {
        (index, false)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    let theta = draw_theta(prior, &mut rng);
    let sd = dt.sqrt();
    let sign = if flip { -1.0 } else { 1.0 };
    let dw = (0..n)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            sign * sd * z
        })
        .collect();
    (theta, dw)
}

struct PathOutcome {
    utility: Vec<Option<f64>>,
    terminal: Vec<Option<f64>>,
}

struct Engine<'a> {
    cfg: &'a SimConfig,
    model: Model,
    dt: f64,
    table: Option<Vec<TableRow>>,
    needs_filter: bool,
}

impl<'a> Engine<'a> {
    fn new(cfg: &'a SimConfig) -> Result<Self> {
        cfg.validate()?;
        let model = Model::with_quad(cfg.prior.clone(), cfg.market, cfg.quad)?;
        if let Utility::Power { gamma, .. } = cfg.utility {
            model.check_power_existence(gamma)?;
        }
        let dt = cfg.market.horizon / cfg.n_steps as f64;
        let tabulated = cfg.strategies.contains(&Strategy::Optimal)
            && !matches!(cfg.utility, Utility::Log { .. });
        let needs_filter = cfg.strategies.contains(&Strategy::Myopic)
            || (cfg.strategies.contains(&Strategy::Optimal) && !tabulated);
        let mut engine = Engine {
            cfg,
            model,
            dt,
            table: None,
            needs_filter,
        };
        if tabulated {
            engine.table = Some(engine.build_table()?);
        }
        Ok(engine)
    }

    fn noise(&self, index: usize) -> (f64, Vec<f64>) {
        path_noise(
            &self.cfg.prior,
            self.cfg.seed,
            index,
            self.cfg.antithetic,
            self.cfg.n_steps,
            self.dt,
        )
    }

    /// Range of `Y_{t_k}` over all paths, for k < n_steps.
    fn y_ranges(&self) -> Vec<(f64, f64)> {
        let n = self.cfg.n_steps;
        let init = || vec![(f64::INFINITY, f64::NEG_INFINITY); n];
        (0..self.cfg.n_paths)
            .into_par_iter()
            .fold(init, |mut acc, i| {
                let (theta, dw) = self.noise(i);
                let mut y = 0.0;
                for k in 0..n {
                    acc[k].0 = acc[k].0.min(y);
                    acc[k].1 = acc[k].1.max(y);
                    y += theta * self.dt + dw[k];
                }
                acc
            })
            .reduce(init, |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    x.0 = x.0.min(y.0);
                    x.1 = x.1.max(y.1);
                }
                a
            })
    }

    fn optimal_estimate(&self, t: f64, y: f64) -> Result<f64> {
        match self.cfg.utility {
            Utility::Power { gamma, .. } => self.model.tilted_theta(t, y, gamma),
            Utility::Exp { .. } => self.model.smoothed_theta(t, y),
            Utility::Log { .. } => Ok(self.model.filter(t, y)?.theta_hat),
        }
    }

    fn build_table(&self) -> Result<Vec<TableRow>> {
        let g = self.cfg.table_nodes;
        let grids: Vec<(f64, f64)> = self
            .y_ranges()
            .into_iter()
            .map(|(lo, hi)| {
                let pad = 1e-3 + 0.02 * (hi - lo);
                let y0 = lo - pad;
                (y0, (hi + pad - y0) / (g - 1) as f64)
            })
            .collect();
        let cells: Vec<(usize, usize)> = (0..grids.len())
            .flat_map(|k| (0..g).map(move |j| (k, j)))
            .collect();
        let values = cells
            .par_iter()
            .map(|&(k, j)| {
                let (y0, h) = grids[k];
                self.optimal_estimate(k as f64 * self.dt, y0 + j as f64 * h)
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(grids
            .iter()
            .zip(values.chunks(g))
            .map(|(&(y0, h), v)| TableRow {
                y0,
                h,
                values: v.to_vec(),
            })
            .collect())
    }

    fn flagged(&self, x: f64, t: f64) -> bool {
        let compounded = x * (self.cfg.market.r * (self.cfg.market.horizon - t)).exp();
        !compounded.is_finite() || self.cfg.utility.shifted(compounded) <= BOUNDARY_EPS
    }

    fn run_path(&self, index: usize, record: bool) -> Result<(PathOutcome, Option<SimPath>)> {
        let cfg = self.cfg;
        let (theta, dw) = self.noise(index);
        let ns = cfg.strategies.len();
        let mkt = &cfg.market;
        let mut wealth = vec![cfg.x0; ns];
        let mut alive = vec![true; ns];
        let mut y = 0.0;
        let mut rec = record.then(|| SimPath {
            index,
            theta_draw: theta,
            dw: dw.clone(),
            y: Vec::with_capacity(cfg.n_steps + 1),
            theta_hat: Vec::with_capacity(cfg.n_steps + 1),
            theta_var: Vec::with_capacity(cfg.n_steps + 1),
            wealth: vec![Vec::with_capacity(cfg.n_steps + 1); ns],
        });

        for k in 0..=cfg.n_steps {
            let t = k as f64 * self.dt;
            let fs = if self.needs_filter || record {
                Some(filter_state(&cfg.prior, t, y)?)
            } else {
                None
            };
            if let Some(p) = rec.as_mut() {
                let fs = fs.as_ref().expect("filter computed when recording");
                p.y.push(y);
                p.theta_hat.push(fs.theta_hat);
                p.theta_var.push(fs.theta_var);
                for (s, w) in p.wealth.iter_mut().enumerate() {
                    w.push(if alive[s] { wealth[s] } else { f64::NAN });
                }
            }
            if k == cfg.n_steps {
                break;
            }
            let dy = theta * self.dt + dw[k];
            for (s, strategy) in cfg.strategies.iter().enumerate() {
                if !alive[s] {
                    continue;
                }
                let x = wealth[s];
                if self.flagged(x, t) {
                    alive[s] = false;
                    continue;
                }
                let estimate = match *strategy {
                    Strategy::Optimal => match &self.table {
                        Some(rows) => rows[k].eval(y),
                        None => fs.as_ref().expect("filter").theta_hat,
                    },
                    Strategy::Myopic => fs.as_ref().expect("filter").theta_hat,
                    Strategy::FixedMerton(th) => th,
                };
                let pi = cfg.utility.prefactor(mkt, t, x) * estimate;
                wealth[s] = x + mkt.r * x * self.dt + mkt.sigma * pi * dy;
            }
            y += dy;
        }

        let mut out = PathOutcome {
            utility: vec![None; ns],
            terminal: vec![None; ns],
        };
        for s in 0..ns {
            if alive[s] && !self.flagged(wealth[s], mkt.horizon) {
                out.utility[s] = cfg.utility.value(wealth[s]);
                out.terminal[s] = Some(wealth[s]);
            }
        }
        Ok((out, rec))
    }
}

/// Mean and standard error from sampling units. With antithetic pairing a
/// unit is the average of the retained members of a pair.
fn mean_se(values: &[Option<f64>], antithetic: bool) -> (usize, f64, f64) {
    let units: Vec<f64> = if antithetic {
        values
            .chunks(2)
            .filter_map(|c| {
                let kept: Vec<f64> = c.iter().flatten().copied().collect();
                (!kept.is_empty()).then(|| kept.iter().sum::<f64>() / kept.len() as f64)
            })
            .collect()
    } else {
        values.iter().flatten().copied().collect()
    };
    let retained = values.iter().flatten().count();
    let n = units.len();
    if n == 0 {
        return (0, f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(&units) / n as f64;
    if n == 1 {
        return (retained, mean, f64::NAN);
    }
    let dev: Vec<f64> = units.iter().map(|u| (u - mean).powi(2)).collect();
    let var = pairwise_sum(&dev) / (n - 1) as f64;
    (retained, mean, (var / n as f64).sqrt())
}

pub fn simulate(cfg: &SimConfig) -> Result<SimReport> {
    let engine = Engine::new(cfg)?;
    let outcomes = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| engine.run_path(i, false).map(|(o, _)| o))
        .collect::<Result<Vec<_>>>()?;

    let ns = cfg.strategies.len();
    let column = |s: usize| -> Vec<Option<f64>> { outcomes.iter().map(|o| o.utility[s]).collect() };
    let strategies = (0..ns)
        .map(|s| {
            let utils = column(s);
            let wealth: Vec<Option<f64>> = outcomes.iter().map(|o| o.terminal[s]).collect();
            let (retained, mean_utility, std_error) = mean_se(&utils, cfg.antithetic);
            let (_, mean_wealth, wealth_std_error) = mean_se(&wealth, cfg.antithetic);
            StrategySummary {
                strategy: cfg.strategies[s],
                retained,
                violations: cfg.n_paths - retained,
                mean_utility,
                std_error,
                certainty_equivalent: cfg.utility.inverse(mean_utility),
                mean_wealth,
                wealth_std_error,
            }
        })
        .collect();

    let mut paired = Vec::new();
    for a in 0..ns {
        for b in a + 1..ns {
            let diffs: Vec<Option<f64>> = outcomes
                .iter()
                .map(|o| Some(o.utility[a]? - o.utility[b]?))
                .collect();
            let (n, mean, std_error) = mean_se(&diffs, cfg.antithetic);
            paired.push(PairedDifference {
                first: cfg.strategies[a],
                second: cfg.strategies[b],
                n,
                mean,
                std_error,
            });
        }
    }
    Ok(SimReport {
        n_paths: cfg.n_paths,
        n_steps: cfg.n_steps,
        seed: cfg.seed,
        strategies,
        paired,
    })
}

/// Full trajectories for the given path indices, identical to the ones
/// entering [`simulate`] with the same configuration.
pub fn simulate_paths(
    cfg: &SimConfig,
    indices: impl IntoIterator<Item = usize>,
) -> Result<Vec<SimPath>> {
    let engine = Engine::new(cfg)?;
    indices
        .into_iter()
        .map(|i| {
            if i >= cfg.n_paths {
                return Err(HaraError::param(
                    "path index",
                    format!("{i} >= n_paths {}", cfg.n_paths),
                ));
            }
            Ok(engine.run_path(i, true)?.1.expect("recorded"))
        })
        .collect()
}

/// Observation increments from a price path: `dY = (dS/S - r dt)/σ`.
pub fn observation_from_prices(prices: &[f64], dt: f64, market: &MarketParams) -> Result<Vec<f64>> {
    if prices.iter().any(|p| !(*p > 0.0) || !p.is_finite()) {
        return Err(HaraError::param(
            "prices",
            "prices must be positive and finite",
        ));
    }
    let mut y = Vec::with_capacity(prices.len());
    let mut acc = 0.0;
    y.push(acc);
    for w in prices.windows(2) {
        acc += ((w[1] - w[0]) / w[0] - market.r * dt) / market.sigma;
        y.push(acc);
    }
    Ok(y)
}

/// Euler integration of the filter SDEs
/// `dΘ̂ = V (dY - Θ̂ dt)` and `dp̂(θ) = p̂(θ)(θ - Θ̂)(dY - Θ̂ dt)`
/// against the exact filter on shared Brownian paths.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterSdeCheck {
    pub prior: Prior,
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Increments are drawn at this resolution and summed for coarser
    /// grids, so every step count in a comparison sees the same path.
    pub fine_steps: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterSdeError {
    pub n_steps: usize,
    /// Path average of `max_k |Θ̂_euler - Θ̂|`.
    pub theta_hat: f64,
    /// Path average of `max_k max_θ |p̂_euler(θ) - p̂(θ)|`.
    pub density: f64,
    /// `|mean over paths of (Θ̂_euler(T) - Θ̂(T))|`.
    pub terminal_bias: f64,
    /// Largest `|Σ wᵢ p̂ᵢ - 1|` seen along any path.
    pub mass_error: f64,
    /// Smallest posterior weight `wᵢ p̂ᵢ` seen along any path.
    pub min_weight: f64,
}

impl FilterSdeError {
    pub fn max_error(&self) -> f64 {
        self.theta_hat.max(self.density)
    }
}

impl FilterSdeCheck {
    pub fn new(
        prior: Prior,
        horizon: f64,
        n_paths: usize,
        seed: u64,
        fine_steps: usize,
    ) -> Result<Self> {
        if !matches!(
            prior.kind(),
            PriorKind::PointMass { .. } | PriorKind::Discrete
        ) {
            return Err(HaraError::InvalidPrior(
                "filter SDE check needs a discrete prior".into(),
            ));
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(HaraError::param("horizon", "must be positive"));
        }
        if n_paths == 0 || fine_steps == 0 {
            return Err(HaraError::param("n_paths", "need paths and steps"));
        }
        Ok(FilterSdeCheck {
            prior,
            horizon,
            n_paths,
            seed,
            fine_steps,
        })
    }

    pub fn run(&self, n_steps: usize) -> Result<FilterSdeError> {
        if n_steps == 0 || self.fine_steps % n_steps != 0 {
            return Err(HaraError::param(
                "n_steps",
                format!("{n_steps} must divide fine_steps {}", self.fine_steps),
            ));
        }
        let per = self.fine_steps / n_steps;
        let dt = self.horizon / n_steps as f64;
        let fine_dt = self.horizon / self.fine_steps as f64;
        let atoms = self.prior.atoms();

        let rows = (0..self.n_paths)
            .into_par_iter()
            .map(|i| -> Result<[f64; 5]> {
                let (theta, fine) =
                    path_noise(&self.prior, self.seed, i, false, self.fine_steps, fine_dt);
                let mut y = 0.0;
                let mut th = filter_state(&self.prior, 0.0, 0.0)?.theta_hat;
                let mut p = vec![1.0; atoms.len()];
                let (mut e_th, mut e_p, mut mass, mut min_w) =
                    (0.0f64, 0.0f64, 0.0f64, f64::INFINITY);
                for k in 0..n_steps {
                    let t = k as f64 * dt;
                    let v = filter_state(&self.prior, t, y)?.theta_var;
                    let dy = theta * dt + fine[k * per..(k + 1) * per].iter().sum::<f64>();
                    let innov = dy - th * dt;
                    th += v * innov;
                    let mean_p: f64 = atoms
                        .iter()
                        .zip(&p)
                        .map(|(a, q)| a.weight * q * a.theta)
                        .sum();
                    let innov_p = dy - mean_p * dt;
                    for (q, a) in p.iter_mut().zip(atoms) {
                        *q += *q * (a.theta - mean_p) * innov_p;
                    }
                    y += dy;
                    let exact = filter_state(&self.prior, t + dt, y)?;
                    e_th = e_th.max((th - exact.theta_hat).abs());
                    let mut total = 0.0;
                    for (q, a) in p.iter().zip(atoms) {
                        let ex =
                            (a.theta * y - 0.5 * a.theta * a.theta * (t + dt) - exact.log_f).exp();
                        e_p = e_p.max((q - ex).abs());
                        total += a.weight * q;
                        min_w = min_w.min(a.weight * q);
                    }
                    mass = mass.max((total - 1.0).abs());
                }
                let bias = th - filter_state(&self.prior, self.horizon, y)?.theta_hat;
                Ok([e_th, e_p, bias, mass, min_w])
            })
            .collect::<Result<Vec<_>>>()?;

        let col = |j: usize| -> Vec<f64> { rows.iter().map(|r| r[j]).collect() };
        let n = self.n_paths as f64;
        Ok(FilterSdeError {
            n_steps,
            theta_hat: pairwise_sum(&col(0)) / n,
            density: pairwise_sum(&col(1)) / n,
            terminal_bias: (pairwise_sum(&col(2)) / n).abs(),
            mass_error: col(3).into_iter().fold(0.0, f64::max),
            min_weight: col(4).into_iter().fold(f64::INFINITY, f64::min),
        })
    }
}
