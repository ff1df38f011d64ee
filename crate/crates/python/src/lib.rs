//! Python bindings for `fpt_exact`.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use fpt_exact::baselines::{grid_fpt, GridScheme, Scheme};
use fpt_exact::bm_fpt;
use fpt_exact::cli::{self, ExperimentConfig};
use fpt_exact::exact::{self, ExactProblem};
use fpt_exact::neuron::{self, NeuronParams, SpikeOptions};
use fpt_exact::parallel::{map_streams, stream_rng};
use fpt_exact::problems;
use fpt_exact::stats;
use fpt_exact::FptError;

create_exception!(fpt_exact, FptException, PyException, "Raised for any library error; `kind` is in args[0].");

fn err(e: FptError) -> PyErr {
    FptException::new_err((e.kind(), e.to_string()))
}

/// One first-passage draw.
#[pyclass(name = "FptDraw", frozen, get_all, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyFptDraw {
    time: f64,
    finite: bool,
    proposals: u64,
    clock_events: u64,
    censored: bool,
}

impl From<bm_fpt::FptDraw> for PyFptDraw {
    fn from(d: bm_fpt::FptDraw) -> Self {
        Self {
            time: d.time,
            finite: d.finite,
            proposals: d.proposals,
            clock_events: d.clock_events,
            censored: d.censored,
        }
    }
}

#[pymethods]
impl PyFptDraw {
    fn __repr__(&self) -> String {
        format!(
            "FptDraw(time={}, finite={}, proposals={}, clock_events={})",
            self.time, self.finite, self.proposals, self.clock_events
        )
    }
}

/// Exact first-passage sampler for one of the built-in problems.
#[pyclass(name = "ExactSampler", frozen)]
struct PyExactSampler {
    problem: ExactProblem,
}

fn scheme(method: &str) -> PyResult<Scheme> {
    match method {
        "euler" => Ok(Scheme::Euler),
        "improved_euler" => Ok(Scheme::ImprovedEuler),
        other => Err(err(FptError::Configuration(format!("unknown grid method '{other}'")))),
    }
}

#[pymethods]
impl PyExactSampler {
    /// Sine drift `K + sin x` against the line `a t + b`.
    #[staticmethod]
    #[pyo3(signature = (k=1.6, a=-1.0, b=0.5, x0=0.0, kappa=None))]
    fn example1(k: f64, a: f64, b: f64, x0: f64, kappa: Option<f64>) -> PyResult<Self> {
        let problem = problems::example1(k, a, b, x0, kappa).map_err(err)?;
        Ok(Self { problem })
    }

    /// Sine drift `K + sin x` against `a exp(-b t)`, with curvy proposals.
    #[staticmethod]
    #[pyo3(signature = (k=1.6, a=1.0, b=1.0, x0=0.0, epsilon=None, kappa=None))]
    fn example2(k: f64, a: f64, b: f64, x0: f64, epsilon: Option<f64>, kappa: Option<f64>) -> PyResult<Self> {
        let problem = problems::example2(k, a, b, x0, epsilon, kappa).map_err(err)?;
        Ok(Self { problem })
    }

    /// Registry problem from a `sample` experiment config (JSON text).
    #[staticmethod]
    fn from_config(text: &str) -> PyResult<Self> {
        match cli::parse_config(text).map_err(err)? {
            ExperimentConfig::Sample(c) => Ok(Self {
                problem: cli::sample_problem(&c).map_err(err)?,
            }),
            other => Err(err(FptError::Configuration(format!(
                "expected a sample config, got '{}'",
                other.name()
            )))),
        }
    }

    #[getter]
    fn kappa(&self) -> Option<f64> {
        self.problem.gammas.kappa
    }

    #[getter]
    fn x0(&self) -> f64 {
        self.problem.sde.x0
    }

    fn threshold(&self, t: f64) -> f64 {
        self.problem.threshold.value(t)
    }

    /// `n` exact draws; draw `i` uses stream `i` of `seed`, whatever `workers` is.
    #[pyo3(signature = (n, seed=0, workers=0, splits=1))]
    fn sample(&self, py: Python<'_>, n: usize, seed: u64, workers: usize, splits: usize) -> PyResult<Vec<PyFptDraw>> {
        let p = &self.problem;
        let draws = py
            .detach(|| {
                map_streams(n, seed, workers, |_, r| {
                    if splits > 1 {
                        exact::sample_exact_split(p, splits, r)
                    } else {
                        exact::sample(p, r)
                    }
                })
            })
            .map_err(err)?;
        Ok(draws.into_iter().map(Into::into).collect())
    }

    /// Passage times only.
    #[pyo3(signature = (n, seed=0, workers=0))]
    fn times(&self, py: Python<'_>, n: usize, seed: u64, workers: usize) -> PyResult<Vec<f64>> {
        Ok(self.sample(py, n, seed, workers, 1)?.into_iter().map(|d| d.time).collect())
    }

    /// Grid-scheme draws (`"euler"` or `"improved_euler"`) for the same problem.
    #[pyo3(signature = (n, delta, method="improved_euler", horizon=20.0, seed=0, workers=0))]
    #[allow(clippy::too_many_arguments)]
    fn grid(
        &self,
        py: Python<'_>,
        n: usize,
        delta: f64,
        method: &str,
        horizon: f64,
        seed: u64,
        workers: usize,
    ) -> PyResult<Vec<PyFptDraw>> {
        let g = GridScheme::new(delta, horizon, scheme(method)?).map_err(err)?;
        let p = &self.problem;
        let draws = py
            .detach(|| map_streams(n, seed, workers, |_, r| Ok(grid_fpt(&p.sde, &p.threshold, &g, r))))
            .map_err(err)?;
        Ok(draws.into_iter().map(Into::into).collect())
    }
}

/// Brownian first-passage times to the constant `level`.
#[pyfunction]
#[pyo3(signature = (level, n, seed=0))]
fn sample_fpt_constant(level: f64, n: usize, seed: u64) -> PyResult<Vec<f64>> {
    map_streams(n, seed, 1, |_, r| Ok(bm_fpt::sample_fpt_constant(level, r)?.time)).map_err(err)
}

/// Brownian first-passage times to `a t + b`; `inf` where the line is never reached.
#[pyfunction]
#[pyo3(signature = (a, b, n, seed=0))]
fn sample_fpt_linear(a: f64, b: f64, n: usize, seed: u64) -> PyResult<Vec<f64>> {
    map_streams(n, seed, 1, |_, r| Ok(bm_fpt::sample_fpt_linear(a, b, r)?.time)).map_err(err)
}

#[pyfunction]
fn inverse_gaussian_cdf(mu: f64, lam: f64, x: f64) -> f64 {
    bm_fpt::inverse_gaussian_cdf(mu, lam, x)
}

/// Two-sample KS statistic and asymptotic p-value.
#[pyfunction]
fn ks_two_sample(xs: Vec<f64>, ys: Vec<f64>) -> PyResult<(f64, f64)> {
    let r = stats::ks_two_sample(&xs, &ys).map_err(err)?;
    Ok((r.statistic, r.p_value))
}

/// `(n, mean, variance, min, max)`.
#[pyfunction]
fn summary_stats(xs: Vec<f64>) -> PyResult<(usize, f64, f64, f64, f64)> {
    let s = stats::SummaryStats::from_sample(&xs).map_err(err)?;
    Ok((s.n, s.mean, s.variance, s.min, s.max))
}

#[pyfunction]
fn iteration_bound_linear(a: f64, b: f64, kappa: f64) -> PyResult<f64> {
    exact::iteration_bound_linear(a, b, kappa).map_err(err)
}

#[pyfunction]
fn choose_split_count(a: f64, b: f64, kappa: f64) -> PyResult<usize> {
    exact::choose_split_count(a, b, kappa).map_err(err)
}

/// Spike times of the adaptive-threshold neuron before `horizon`.
///
/// Unspecified parameters take their defaults (`tau_m=-1`, everything else 1, no input current).
#[pyfunction]
#[pyo3(signature = (horizon, seed=0, current=0.0, tau_m=-1.0, v_r=1.0, sigma=1.0, v0=1.0, theta0=1.0, tau1=1.0, delta=1.0, v_reset=None, epsilon=None))]
#[allow(clippy::too_many_arguments)]
fn simulate_spike_train(
    py: Python<'_>,
    horizon: f64,
    seed: u64,
    current: f64,
    tau_m: f64,
    v_r: f64,
    sigma: f64,
    v0: f64,
    theta0: f64,
    tau1: f64,
    delta: f64,
    v_reset: Option<f64>,
    epsilon: Option<f64>,
) -> PyResult<Vec<f64>> {
    let params = NeuronParams {
        tau_m,
        v_r,
        sigma,
        v0,
        current,
        theta0,
        tau1,
        delta,
        v_reset: v_reset.unwrap_or(v_r),
    };
    let mut opts = SpikeOptions::default();
    if let Some(e) = epsilon {
        opts.epsilon = e;
    }
    let train = py
        .detach(|| neuron::simulate_spike_train(&params, horizon, seed, &opts, &mut stream_rng(seed, 0)))
        .map_err(err)?;
    Ok(train.times)
}

/// Runs an experiment config (JSON text) and returns the written file paths.
#[pyfunction]
#[pyo3(signature = (config, out, workers=0))]
fn run_experiment(py: Python<'_>, config: &str, out: &str, workers: usize) -> PyResult<Vec<String>> {
    let cfg = cli::parse_config(config).map_err(err)?;
    let a = py
        .detach(|| cli::run_experiment(&cfg, std::path::Path::new(out), workers))
        .map_err(err)?;
    Ok(a.files.iter().map(|p| p.to_string_lossy().into_owned()).collect())
}

#[pymodule]
#[pyo3(name = "fpt_exact")]
fn fpt_exact_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("FptError", m.py().get_type::<FptException>())?;
    m.add("__version__", cli::VERSION)?;
    m.add_class::<PyFptDraw>()?;
    m.add_class::<PyExactSampler>()?;
    m.add_function(wrap_pyfunction!(sample_fpt_constant, m)?)?;
    m.add_function(wrap_pyfunction!(sample_fpt_linear, m)?)?;
    m.add_function(wrap_pyfunction!(inverse_gaussian_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(ks_two_sample, m)?)?;
    m.add_function(wrap_pyfunction!(summary_stats, m)?)?;
    m.add_function(wrap_pyfunction!(iteration_bound_linear, m)?)?;
    m.add_function(wrap_pyfunction!(choose_split_count, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_spike_train, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
