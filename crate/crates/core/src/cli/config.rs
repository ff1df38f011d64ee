//! JSON experiment configuration.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bm_fpt::DEFAULT_EPSILON;
use crate::error::{FptError, Result};
use crate::exact::DEFAULT_MAX_PROPOSALS;
use crate::neuron::NeuronParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    Euler,
    ImprovedEuler,
}

fn default_n() -> usize {
    1000
}
fn default_grid_horizon() -> f64 {
    crate::baselines::DEFAULT_GRID_HORIZON
}
fn default_curvy_horizon() -> f64 {
    crate::bm_fpt::DEFAULT_HORIZON
}
fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}
fn default_max_proposals() -> u64 {
    DEFAULT_MAX_PROPOSALS
}
fn default_k() -> f64 {
    1.6
}
fn default_one() -> f64 {
    1.0
}
fn default_method() -> Method {
    Method::Exact
}

/// Sine drift against `a t + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Example1Config {
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(rename = "K", default = "default_k")]
    pub k: f64,
    #[serde(default = "Example1Config::default_a")]
    pub a: f64,
    #[serde(default = "Example1Config::default_b")]
    pub b: f64,
    #[serde(default)]
    pub x0: f64,
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default = "default_grid_horizon")]
    pub grid_horizon: f64,
    #[serde(default)]
    pub kappa: Option<f64>,
    /// Number of chained stages for the exact method.
    #[serde(default = "Example1Config::default_splits")]
    pub splits: usize,
    #[serde(default = "default_max_proposals")]
    pub max_proposals: u64,
}

impl Example1Config {
    fn default_a() -> f64 {
        -1.0
    }
    fn default_b() -> f64 {
        0.5
    }
    fn default_splits() -> usize {
        1
    }
}

/// Sine drift against `a exp(-b t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Example2Config {
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(rename = "K", default = "default_k")]
    pub k: f64,
    #[serde(default = "default_one")]
    pub a: f64,
    #[serde(default = "default_one")]
    pub b: f64,
    #[serde(default)]
    pub x0: f64,
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default = "default_grid_horizon")]
    pub grid_horizon: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub kappa: Option<f64>,
    #[serde(default = "default_max_proposals")]
    pub max_proposals: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchmarkProblem {
    Example1,
    Example2,
}

/// Exact reference against grid schemes over a range of step sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    #[serde(default = "BenchmarkConfig::default_n")]
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "BenchmarkConfig::default_problem")]
    pub problem: BenchmarkProblem,
    #[serde(rename = "K", default = "default_k")]
    pub k: f64,
    /// Defaults to the problem's own value when absent.
    #[serde(default)]
    pub a: Option<f64>,
    #[serde(default)]
    pub b: Option<f64>,
    #[serde(default)]
    pub x0: f64,
    #[serde(default = "BenchmarkConfig::default_deltas")]
    pub deltas: Vec<f64>,
    #[serde(default = "BenchmarkConfig::default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_grid_horizon")]
    pub grid_horizon: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub kappa: Option<f64>,
    #[serde(default = "default_max_proposals")]
    pub max_proposals: u64,
}

impl BenchmarkConfig {
    fn default_n() -> usize {
        10_000
    }
    fn default_problem() -> BenchmarkProblem {
        BenchmarkProblem::Example1
    }
    fn default_deltas() -> Vec<f64> {
        (4..=10).map(|j| 2f64.powi(-j)).collect()
    }
    fn default_methods() -> Vec<Method> {
        vec![Method::Euler, Method::ImprovedEuler]
    }

    pub fn a(&self) -> f64 {
        self.a.unwrap_or(match self.problem {
            BenchmarkProblem::Example1 => -1.0,
            BenchmarkProblem::Example2 => 1.0,
        })
    }

    pub fn b(&self) -> f64 {
        self.b.unwrap_or(match self.problem {
            BenchmarkProblem::Example1 => 0.5,
            BenchmarkProblem::Example2 => 1.0,
        })
    }
}

/// Spike trains of the adaptive-threshold neuron.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeuronConfig {
    #[serde(default = "NeuronConfig::default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "NeuronConfig::default_horizon")]
    pub horizon: f64,
    /// A single input current; mutually exclusive with `currents`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub currents: Option<Vec<f64>>,
    #[serde(default = "NeuronConfig::default_tau_m")]
    pub tau_m: f64,
    #[serde(default = "default_one")]
    pub v_r: f64,
    #[serde(default = "default_one")]
    pub sigma: f64,
    #[serde(default = "default_one")]
    pub v0: f64,
    #[serde(default = "default_one")]
    pub theta0: f64,
    #[serde(default = "default_one")]
    pub tau1: f64,
    #[serde(default = "default_one")]
    pub delta: f64,
    /// Defaults to `v_r`.
    #[serde(default)]
    pub v_reset: Option<f64>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "NeuronConfig::default_max_spikes")]
    pub max_spikes: usize,
    #[serde(default = "default_max_proposals")]
    pub max_proposals: u64,
}

impl NeuronConfig {
    fn default_trials() -> usize {
        5
    }
    fn default_horizon() -> f64 {
        2.0
    }
    fn default_tau_m() -> f64 {
        -1.0
    }
    fn default_max_spikes() -> usize {
        10_000
    }

    pub fn current_list(&self) -> Vec<f64> {
        match (&self.current, &self.currents) {
            (_, Some(cs)) => cs.clone(),
            (Some(c), None) => vec![*c],
            (None, None) => vec![0.0],
        }
    }

    pub fn params(&self, current: f64) -> NeuronParams {
        NeuronParams {
            tau_m: self.tau_m,
            v_r: self.v_r,
            sigma: self.sigma,
            v0: self.v0,
            current,
            theta0: self.theta0,
            tau1: self.tau1,
            delta: self.delta,
            v_reset: self.v_reset.unwrap_or(self.v_r),
        }
    }
}

/// Drifts available to the `sample` experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftSpec {
    Zero,
    Constant { c: f64 },
    /// `K + sin x`.
    Sine {
        #[serde(rename = "K")]
        k: f64,
    },
}

/// Thresholds available to the `sample` experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ThresholdSpec {
    Constant { level: f64 },
    Linear { slope: f64, intercept: f64 },
    /// `a exp(-b t)` with `b > 0`.
    Exponential { a: f64, b: f64 },
}

/// A drift and threshold picked from the registry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    pub drift: DriftSpec,
    pub threshold: ThresholdSpec,
    #[serde(default)]
    pub x0: f64,
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default = "default_grid_horizon")]
    pub grid_horizon: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Time range of the curvy iteration and of the `kappa` search.
    #[serde(default = "default_curvy_horizon")]
    pub horizon: f64,
    #[serde(default)]
    pub kappa: Option<f64>,
    #[serde(default = "default_max_proposals")]
    pub max_proposals: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case")]
pub enum ExperimentConfig {
    Example1(Example1Config),
    Example2(Example2Config),
    Neuron(NeuronConfig),
    Benchmark(BenchmarkConfig),
    Sample(SampleConfig),
}

/// Overrides applied on top of the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub experiment: Option<String>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
}

fn config_err(msg: impl Into<String>) -> FptError {
    FptError::Configuration(msg.into())
}

/// Parses and validates a config document with no overrides.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    parse_config_with(text, &Overrides::default())
}

/// Parses a config document, applies `ov` and validates the result.
pub fn parse_config_with(text: &str, ov: &Overrides) -> Result<ExperimentConfig> {
    let mut doc: Value = serde_json::from_str(text).map_err(|e| config_err(format!("malformed JSON: {e}")))?;
    let obj = doc
        .as_object_mut()
        .ok_or_else(|| config_err("config must be a JSON object"))?;
    if let Some(exp) = &ov.experiment {
        match obj.get("experiment") {
            Some(Value::String(s)) if s != exp => {
                return Err(config_err(format!(
                    "command line asks for '{exp}' but the config is for '{s}'"
                )));
            }
            _ => {
                obj.insert("experiment".into(), Value::String(exp.clone()));
            }
        }
    }
    let is_neuron = obj.get("experiment").and_then(Value::as_str) == Some("neuron");
    if let Some(n) = ov.n {
        let key = if is_neuron { "trials" } else { "n" };
        obj.insert(key.into(), Value::from(n));
    }
    if let Some(seed) = ov.seed {
        obj.insert("seed".into(), Value::from(seed));
    }
    let cfg: ExperimentConfig = serde_json::from_value(doc).map_err(|e| config_err(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn check_count(name: &str, n: usize) -> Result<()> {
    if n < 1 {
        return Err(config_err(format!("{name} must be at least 1")));
    }
    Ok(())
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(config_err(format!("{name} must be positive and finite, got {v}")));
    }
    Ok(())
}

fn check_method(method: Method, delta: Option<f64>, grid_horizon: f64) -> Result<()> {
    if method != Method::Exact {
        let d = delta.ok_or_else(|| config_err("delta is required for grid methods"))?;
        check_positive("delta", d)?;
        check_positive("grid_horizon", grid_horizon)?;
        if d > grid_horizon {
            return Err(config_err("delta must not exceed grid_horizon"));
        }
    }
    Ok(())
}

fn check_finite(values: &[(&str, f64)]) -> Result<()> {
    for (name, v) in values {
        if !v.is_finite() {
            return Err(config_err(format!("{name} must be finite")));
        }
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentConfig::Example1(_) => "example1",
            ExperimentConfig::Example2(_) => "example2",
            ExperimentConfig::Neuron(_) => "neuron",
            ExperimentConfig::Benchmark(_) => "benchmark",
            ExperimentConfig::Sample(_) => "sample",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ExperimentConfig::Example1(c) => {
                check_count("n", c.n)?;
                check_count("splits", c.splits)?;
                check_finite(&[("K", c.k), ("a", c.a), ("b", c.b), ("x0", c.x0)])?;
                check_method(c.method, c.delta, c.grid_horizon)
            }
            ExperimentConfig::Example2(c) => {
                check_count("n", c.n)?;
                check_finite(&[("K", c.k), ("a", c.a), ("b", c.b), ("x0", c.x0)])?;
                check_positive("epsilon", c.epsilon)?;
                check_method(c.method, c.delta, c.grid_horizon)
            }
            ExperimentConfig::Benchmark(c) => {
                check_count("n", c.n)?;
                check_finite(&[("K", c.k), ("a", c.a()), ("b", c.b()), ("x0", c.x0)])?;
                check_positive("epsilon", c.epsilon)?;
                if c.deltas.is_empty() || c.methods.is_empty() {
                    return Err(config_err("benchmark needs at least one delta and one method"));
                }
                if c.methods.contains(&Method::Exact) {
                    return Err(config_err("benchmark methods are grid schemes; the exact sampler is the reference"));
                }
                for &d in &c.deltas {
                    check_method(Method::Euler, Some(d), c.grid_horizon)?;
                }
                Ok(())
            }
            ExperimentConfig::Neuron(c) => {
                check_count("trials", c.trials)?;
                check_positive("horizon", c.horizon)?;
                check_positive("epsilon", c.epsilon)?;
                if c.current.is_some() && c.currents.is_some() {
                    return Err(config_err("give either current or currents, not both"));
                }
                if c.currents.as_ref().is_some_and(|v| v.is_empty()) {
                    return Err(config_err("currents must not be empty"));
                }
                for i in c.current_list() {
                    c.params(i).validate()?;
                }
                Ok(())
            }
            ExperimentConfig::Sample(c) => {
                check_count("n", c.n)?;
                check_finite(&[("x0", c.x0)])?;
                check_positive("epsilon", c.epsilon)?;
                check_positive("horizon", c.horizon)?;
                check_method(c.method, c.delta, c.grid_horizon)?;
                if let ThresholdSpec::Exponential { b, .. } = c.threshold {
                    check_positive("threshold b", b)?;
                }
                Ok(())
            }
        }
    }
}
