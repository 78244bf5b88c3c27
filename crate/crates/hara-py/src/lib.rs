//! Python module `hara`.
//!
//! Bad input raises `ValueError`; divergent or non-convergent integrals
//! raise `hara.DivergenceError`.

use hara_core::policy::EvalPoint;
use hara_core::simulator::{self, SimConfig, Strategy};
use hara_core::{HaraError, MarketParams, Model, Prior, QuadConfig, Utility};
use pyo3::create_exception;
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(hara, DivergenceError, PyArithmeticError);

fn to_py(e: HaraError) -> PyErr {
    if e.is_numerical() {
        DivergenceError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

trait IntoPyResult<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPyResult<T> for hara_core::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

#[pyclass(name = "Prior", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyPrior(Prior);

#[pymethods]
impl PyPrior {
    #[staticmethod]
    fn point_mass(theta: f64) -> PyResult<Self> {
        Ok(Self(Prior::point_mass(theta).py()?))
    }

    /// `atoms` is a list of `(theta, weight)` pairs.
    #[staticmethod]
    fn discrete(atoms: Vec<(f64, f64)>) -> PyResult<Self> {
        Ok(Self(Prior::discrete(atoms).py()?))
    }

    #[staticmethod]
    #[pyo3(signature = (mean, std_dev, nodes = 64))]
    fn gaussian(mean: f64, std_dev: f64, nodes: usize) -> PyResult<Self> {
        Ok(Self(Prior::gaussian_with_nodes(mean, std_dev, nodes).py()?))
    }

    #[staticmethod]
    fn uniform(lower: f64, upper: f64) -> PyResult<Self> {
        Ok(Self(Prior::uniform(lower, upper).py()?))
    }

    #[staticmethod]
    fn truncated_normal(mean: f64, std_dev: f64, lower: f64, upper: f64) -> PyResult<Self> {
        Ok(Self(
            Prior::truncated_normal(mean, std_dev, lower, upper).py()?,
        ))
    }

    fn atoms(&self) -> Vec<(f64, f64)> {
        self.0.atoms().iter().map(|a| (a.theta, a.weight)).collect()
    }

    fn mean(&self) -> f64 {
        self.0.mean()
    }

    fn variance(&self) -> f64 {
        self.0.variance()
    }

    fn sign_class(&self) -> &'static str {
        match self.0.sign_class() {
            hara_core::SignClass::StrictlyPositive => "positive",
            hara_core::SignClass::StrictlyNegative => "negative",
            hara_core::SignClass::Mixed => "mixed",
        }
    }

    fn log_f(&self, t: f64, y: f64) -> PyResult<f64> {
        hara_core::bayes_filter::log_f(&self.0, t, y).py()
    }

    fn theta_hat(&self, t: f64, y: f64) -> PyResult<f64> {
        hara_core::bayes_filter::theta_hat(&self.0, t, y).py()
    }

    fn theta_var(&self, t: f64, y: f64) -> PyResult<f64> {
        hara_core::bayes_filter::theta_var(&self.0, t, y).py()
    }

    fn __repr__(&self) -> String {
        format!("Prior({:?}, {} atoms)", self.0.kind(), self.0.atoms().len())
    }
}

#[pyclass(name = "MarketParams", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyMarket(MarketParams);

#[pymethods]
impl PyMarket {
    #[new]
    #[pyo3(signature = (r, sigma, T))]
    #[allow(non_snake_case)]
    fn new(r: f64, sigma: f64, T: f64) -> PyResult<Self> {
        Ok(Self(MarketParams::new(r, sigma, T).py()?))
    }

    #[getter]
    fn r(&self) -> f64 {
        self.0.r
    }

    #[getter]
    fn sigma(&self) -> f64 {
        self.0.sigma
    }

    #[getter]
    #[allow(non_snake_case)]
    fn T(&self) -> f64 {
        self.0.horizon
    }

    fn __repr__(&self) -> String {
        format!(
            "MarketParams(r={}, sigma={}, T={})",
            self.0.r, self.0.sigma, self.0.horizon
        )
    }
}

#[pyclass(name = "Utility", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyUtility(Utility);

#[pymethods]
impl PyUtility {
    #[staticmethod]
    #[pyo3(signature = (gamma, beta = 1.0, eta = 0.0))]
    fn power(gamma: f64, beta: f64, eta: f64) -> PyResult<Self> {
        Ok(Self(Utility::power(gamma, beta, eta).py()?))
    }

    #[staticmethod]
    #[pyo3(signature = (beta = 1.0, eta = 0.0))]
    fn log(beta: f64, eta: f64) -> PyResult<Self> {
        Ok(Self(Utility::log(beta, eta).py()?))
    }

    #[staticmethod]
    #[pyo3(signature = (beta = 1.0))]
    fn exp(beta: f64) -> PyResult<Self> {
        Ok(Self(Utility::exp(beta).py()?))
    }

    #[getter]
    fn family(&self) -> &'static str {
        self.0.family_name()
    }

    /// `u(x)`, or `None` outside the domain.
    fn value(&self, x: f64) -> Option<f64> {
        self.0.value(x)
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.0)
    }
}

#[pyclass(name = "Model", frozen)]
struct PyModel(Model);

#[pymethods]
impl PyModel {
    #[new]
    #[pyo3(signature = (prior, market, z_nodes = 64, tol = 1e-9))]
    fn new(prior: &PyPrior, market: &PyMarket, z_nodes: usize, tol: f64) -> PyResult<Self> {
        let quad = QuadConfig {
            z_nodes,
            tol,
            ..QuadConfig::default()
        };
        Ok(Self(
            Model::with_quad(prior.0.clone(), market.0, quad).py()?,
        ))
    }

    fn pi_hat(&self, utility: &PyUtility, t: f64, x: f64, y: f64) -> PyResult<f64> {
        self.0.pi_hat(&utility.0, &EvalPoint::new(t, x, y)).py()
    }

    fn pi_myopic(&self, utility: &PyUtility, t: f64, x: f64, y: f64) -> PyResult<f64> {
        self.0.pi_myopic(&utility.0, &EvalPoint::new(t, x, y)).py()
    }

    fn value_function(&self, utility: &PyUtility, t: f64, x: f64, y: f64) -> PyResult<f64> {
        self.0
            .value_function(&utility.0, &EvalPoint::new(t, x, y))
            .py()
    }

    /// Dict with `pi_hat`, `pi_myopic`, `hedging`, `relative_hedging` and
    /// `ratio` (the last two may be `None`).
    fn policy_report<'py>(
        &self,
        py: Python<'py>,
        utility: &PyUtility,
        t: f64,
        x: f64,
        y: f64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let r = self
            .0
            .policy_report(&utility.0, &EvalPoint::new(t, x, y))
            .py()?;
        let d = PyDict::new(py);
        d.set_item("pi_hat", r.pi_hat)?;
        d.set_item("pi_myopic", r.pi_myopic)?;
        d.set_item("hedging", r.hedging_demand)?;
        d.set_item("relative_hedging", r.relative_hedging)?;
        d.set_item("ratio", r.ratio)?;
        Ok(d)
    }

    /// One dict per γ in ascending order; failed rows carry `error`.
    #[pyo3(signature = (gammas, t = 0.0, x = 1.0, y = 0.0, beta = 1.0, eta = 0.0))]
    fn gamma_sweep<'py>(
        &self,
        py: Python<'py>,
        gammas: Vec<f64>,
        t: f64,
        x: f64,
        y: f64,
        beta: f64,
        eta: f64,
    ) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let pt = EvalPoint::new(t, x, y);
        let rows = py.detach(|| self.0.gamma_sweep(&pt, beta, eta, &gammas));
        rows.into_iter()
            .map(|row| {
                let d = PyDict::new(py);
                d.set_item("gamma", row.gamma)?;
                match row.result {
                    Ok(v) => {
                        d.set_item("pi_hat", v.pi_hat)?;
                        d.set_item("pi_myopic", v.pi_myopic)?;
                        d.set_item("hedging", v.hedging)?;
                        d.set_item("ratio", v.ratio)?;
                    }
                    Err(e) => d.set_item("error", e.to_string())?,
                }
                Ok(d)
            })
            .collect()
    }
}

#[pyfunction]
fn pi_merton(
    utility: &PyUtility,
    market: &PyMarket,
    t: f64,
    x: f64,
    y: f64,
    theta: f64,
) -> PyResult<f64> {
    hara_core::pi_merton(&utility.0, &market.0, &EvalPoint::new(t, x, y), theta).py()
}

fn parse_strategy(s: &str) -> PyResult<Strategy> {
    match s {
        "optimal" => Ok(Strategy::Optimal),
        "myopic" => Ok(Strategy::Myopic),
        other => match other.strip_prefix("merton:").map(str::parse::<f64>) {
            Some(Ok(theta)) => Ok(Strategy::FixedMerton(theta)),
            _ => Err(PyValueError::new_err(format!(
                "unknown strategy {other:?}; use optimal, myopic or merton:<theta>"
            ))),
        },
    }
}

/// Monte Carlo run. Returns a dict with `strategies` (one dict each) and
/// `paired` differences, each with a 95% interval.
#[pyfunction]
#[pyo3(signature = (
    prior, market, utility, n_paths = 10_000, n_steps = 250, seed = 0,
    strategies = vec!["optimal".to_string(), "myopic".to_string()],
    x0 = 1.0, antithetic = false
))]
#[allow(clippy::too_many_arguments)]
fn simulate<'py>(
    py: Python<'py>,
    prior: &PyPrior,
    market: &PyMarket,
    utility: &PyUtility,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
    strategies: Vec<String>,
    x0: f64,
    antithetic: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let mut cfg = SimConfig::new(prior.0.clone(), market.0, utility.0);
    cfg.n_paths = n_paths;
    cfg.n_steps = n_steps;
    cfg.seed = seed;
    cfg.strategies = strategies
        .iter()
        .map(|s| parse_strategy(s))
        .collect::<PyResult<_>>()?;
    cfg.x0 = x0;
    cfg.antithetic = antithetic;
    let report = py.detach(|| simulator::simulate(&cfg)).py()?;

    let out = PyDict::new(py);
    let mut rows = Vec::new();
    for s in &report.strategies {
        let d = PyDict::new(py);
        d.set_item("strategy", s.strategy.to_string())?;
        d.set_item("retained", s.retained)?;
        d.set_item("violations", s.violations)?;
        d.set_item("mean_utility", s.mean_utility)?;
        d.set_item("std_error", s.std_error)?;
        d.set_item("certainty_equivalent", s.certainty_equivalent)?;
        d.set_item("mean_wealth", s.mean_wealth)?;
        rows.push(d);
    }
    out.set_item("strategies", rows)?;
    let mut paired = Vec::new();
    for p in &report.paired {
        let d = PyDict::new(py);
        d.set_item("first", p.first.to_string())?;
        d.set_item("second", p.second.to_string())?;
        d.set_item("n", p.n)?;
        d.set_item("mean", p.mean)?;
        d.set_item("std_error", p.std_error)?;
        d.set_item("ci95", p.ci95())?;
        paired.push(d);
    }
    out.set_item("paired", paired)?;
    Ok(out)
}

#[pymodule]
fn hara(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPrior>()?;
    m.add_class::<PyMarket>()?;
    m.add_class::<PyUtility>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(pi_merton, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add("DivergenceError", m.py().get_type::<DivergenceError>())?;
    Ok(())
}
