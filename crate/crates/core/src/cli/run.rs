//! Experiment runners and artifact writers.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use super::config::{
    BenchmarkConfig, BenchmarkProblem, DriftSpec, Example1Config, Example2Config, ExperimentConfig, Method,
    NeuronConfig, SampleConfig, ThresholdSpec,
};
use crate::baselines::{coupled_pair, grid_fpt, GridScheme, Scheme};
use crate::bm_fpt::{CurvyParams, FptDraw};
use crate::error::{FptError, Result};
use crate::exact::{self, ExactProblem, Proposal};
use crate::model::{make_gamma_pair, Orientation, Threshold, UnitDiffusionSDE};
use crate::neuron::{simulate_spike_train, SpikeOptions, SpikeTrain};
use crate::numerics;
use crate::parallel::{map_streams, mix_seed};
use crate::problems;
use crate::stats::{ks_two_sample, moment_bias, SummaryStats};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Files written by one run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifacts {
    pub files: Vec<PathBuf>,
    /// Wall-clock sidecar; not covered by the reproducibility guarantee.
    pub timings: PathBuf,
}

/// Runs `cfg`, writing its artifacts into `out` (created if missing).
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path, workers: usize) -> Result<Artifacts> {
    cfg.validate()?;
    fs::create_dir_all(out)?;
    let start = Instant::now();
    let mut w = Writer {
        out,
        files: Vec::new(),
        provenance: json!({ "version": VERSION, "config": cfg }),
    };
    let mut timing_rows = Vec::new();
    match cfg {
        ExperimentConfig::Example1(c) => run_example1(c, workers, &mut w)?,
        ExperimentConfig::Example2(c) => run_example2(c, workers, &mut w)?,
        ExperimentConfig::Sample(c) => run_sample(c, workers, &mut w)?,
        ExperimentConfig::Benchmark(c) => timing_rows = run_benchmark(c, workers, &mut w)?,
        ExperimentConfig::Neuron(c) => run_neuron(c, workers, &mut w)?,
    }
    let timings = out.join("timings.json");
    let doc = json!({
        "version": VERSION,
        "experiment": cfg.name(),
        "workers": workers,
        "wall_time_s": start.elapsed().as_secs_f64(),
        "rows": timing_rows,
    });
    write_json(&timings, &doc)?;
    Ok(Artifacts { files: w.files, timings })
}

struct Writer<'a> {
    out: &'a Path,
    files: Vec<PathBuf>,
    provenance: Value,
}

impl Writer<'_> {
    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.out.join(name);
        fs::write(&path, body)?;
        self.files.push(path);
        Ok(())
    }

    /// Writes `body` merged with the provenance block.
    fn summary(&mut self, mut body: Value) -> Result<()> {
        if let (Value::Object(m), Value::Object(p)) = (&mut body, &self.provenance) {
            for (k, v) in p {
                m.insert(k.clone(), v.clone());
            }
        }
        let path = self.out.join("summary.json");
        write_json(&path, &body)?;
        self.files.push(path);
        Ok(())
    }
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| FptError::Data(e.to_string()))?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

/// Shortest round-trip decimal, switching to exponent form for very small or large magnitudes.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn samples_csv(draws: &[FptDraw]) -> String {
    let mut s = String::from("index,time,finite,proposals,clock_events\n");
    for (i, d) in draws.iter().enumerate() {
        let _ = writeln!(s, "{i},{},{},{},{}", num(d.time), d.finite, d.proposals, d.clock_events);
    }
    s
}

fn finite_times(draws: &[FptDraw]) -> Vec<f64> {
    draws.iter().filter(|d| d.finite).map(|d| d.time).collect()
}

fn draw_summary(draws: &[FptDraw]) -> Value {
    let times = finite_times(draws);
    let proposals: u64 = draws.iter().map(|d| d.proposals).sum();
    let events: u64 = draws.iter().map(|d| d.clock_events).sum();
    let n = draws.len() as f64;
    let rate = if proposals > 0 { Some(n / proposals as f64) } else { None };
    json!({
        "n": draws.len(),
        "n_finite": times.len(),
        "stats": SummaryStats::from_sample(&times).ok().map(|s| to_value(&s)),
        "acceptance_rate": rate,
        "mean_proposals": proposals as f64 / n,
        "mean_clock_events": events as f64 / n,
    })
}

fn exact_batch(p: &ExactProblem, splits: usize, n: usize, seed: u64, workers: usize) -> Result<Vec<FptDraw>> {
    map_streams(n, seed, workers, |_, r| {
        if splits > 1 {
            exact::sample_exact_split(p, splits, r)
        } else {
            exact::sample(p, r)
        }
    })
}

fn grid_batch(
    sde: &UnitDiffusionSDE,
    th: &Threshold,
    g: &GridScheme,
    n: usize,
    seed: u64,
    workers: usize,
) -> Result<Vec<FptDraw>> {
    map_streams(n, seed, workers, |_, r| Ok(grid_fpt(sde, th, g, r)))
}

fn scheme(method: Method) -> Option<Scheme> {
    match method {
        Method::Exact => None,
        Method::Euler => Some(Scheme::Euler),
        Method::ImprovedEuler => Some(Scheme::ImprovedEuler),
    }
}

/// Draws with `method` and writes `samples.csv` and `summary.json`.
#[allow(clippy::too_many_arguments)]
fn run_draws(
    p: &ExactProblem,
    method: Method,
    delta: Option<f64>,
    grid_horizon: f64,
    splits: usize,
    n: usize,
    seed: u64,
    workers: usize,
    w: &mut Writer,
) -> Result<()> {
    let draws = match scheme(method) {
        None => exact_batch(p, splits, n, seed, workers)?,
        Some(s) => {
            let delta = delta.ok_or_else(|| FptError::Configuration("delta is required for grid methods".into()))?;
            let g = GridScheme::new(delta, grid_horizon, s)?;
            grid_batch(&p.sde, &p.threshold, &g, n, seed, workers)?
        }
    };
    w.text("samples.csv", &samples_csv(&draws))?;
    let mut body = draw_summary(&draws);
    body["method"] = to_value(&method);
    body["kappa"] = to_value(&p.gammas.kappa);
    body["gamma_shifts"] = json!([p.gammas.shift1, p.gammas.shift2]);
    w.summary(body)
}

fn example1_problem(c: &Example1Config) -> Result<ExactProblem> {
    Ok(problems::example1(c.k, c.a, c.b, c.x0, c.kappa)?.with_max_proposals(c.max_proposals))
}

fn example2_problem(c: &Example2Config) -> Result<ExactProblem> {
    Ok(problems::example2(c.k, c.a, c.b, c.x0, Some(c.epsilon), c.kappa)?.with_max_proposals(c.max_proposals))
}

fn run_example1(c: &Example1Config, workers: usize, w: &mut Writer) -> Result<()> {
    let p = example1_problem(c)?;
    run_draws(&p, c.method, c.delta, c.grid_horizon, c.splits, c.n, c.seed, workers, w)
}

fn run_example2(c: &Example2Config, workers: usize, w: &mut Writer) -> Result<()> {
    let p = example2_problem(c)?;
    run_draws(&p, c.method, c.delta, c.grid_horizon, 1, c.n, c.seed, workers, w)
}

/// Builds the exact problem for a registry drift and threshold.
///
/// `kappa` and the shifts come from grid bounds: `gamma1` over `[0, horizon]`,
/// `gamma2` over one period (sine) or exactly (constant drifts).
pub fn sample_problem(c: &SampleConfig) -> Result<ExactProblem> {
    let (sde, g2_lo, g2_hi) = match c.drift {
        DriftSpec::Zero => (UnitDiffusionSDE::brownian(c.x0), 0.0, 0.0),
        DriftSpec::Constant { c: mu } => (UnitDiffusionSDE::constant_drift(mu, c.x0), 0.5 * mu * mu, 0.5 * mu * mu),
        DriftSpec::Sine { k } => {
            let lo = numerics::linspace(0.0, 2.0 * std::f64::consts::PI, 20_001)
                .into_iter()
                .map(|x| 0.5 * (x.cos() + (k + x.sin()).powi(2)))
                .fold(f64::INFINITY, f64::min);
            (problems::sine_drift(k, c.x0), lo, problems::sine_gamma2_sup(k))
        }
    };
    let build = |o| match c.threshold {
        ThresholdSpec::Constant { level } => Threshold::constant(level, o),
        ThresholdSpec::Linear { slope, intercept } => Threshold::linear(slope, intercept, o),
        ThresholdSpec::Exponential { a, b } => Threshold::exponential(a, b, o),
    };
    let b0 = build(Orientation::AboveStart).value(0.0);
    let orientation = if c.x0 < b0 {
        Orientation::AboveStart
    } else if c.x0 > b0 {
        Orientation::BelowStart
    } else {
        return Err(FptError::Configuration(format!("start x0 = {} lies on the threshold", c.x0)));
    };
    let th = build(orientation);
    let proposal = match c.threshold {
        ThresholdSpec::Constant { .. } => Proposal::Constant,
        ThresholdSpec::Linear { .. } => Proposal::Linear,
        ThresholdSpec::Exponential { .. } => {
            let r = match orientation {
                Orientation::AboveStart => th.inf_slope,
                Orientation::BelowStart => th.sup_slope.map(|s| -s),
            }
            .ok_or_else(|| FptError::Configuration("threshold has no slope bound".into()))?;
            Proposal::Curvy(CurvyParams::new(c.epsilon, r, c.horizon)?)
        }
    };
    let mut gammas = make_gamma_pair(&sde, &th);
    let g1: Vec<f64> = numerics::linspace(0.0, c.horizon, 4001).into_iter().map(|t| gammas.gamma1(t)).collect();
    let g1_lo = g1.iter().copied().fold(f64::INFINITY, f64::min);
    let g1_hi = g1.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(g1_lo.is_finite() && g1_hi.is_finite()) {
        return Err(FptError::Domain("non-finite time intensity".into()));
    }
    gammas.shift1 = g1_lo.min(0.0);
    gammas.shift2 = g2_lo.min(0.0);
    let kappa = match c.kappa {
        Some(k) => k,
        None => {
            let hi1 = g1_hi + 0.05 * g1_hi.abs() - gammas.shift1;
            let hi2 = g2_hi + 0.05 * g2_hi.abs() - gammas.shift2;
            (hi1 + hi2).max(1e-12)
        }
    };
    let gammas = gammas.with_kappa(kappa)?;
    Ok(ExactProblem::new(sde, th, gammas, proposal)?.with_max_proposals(c.max_proposals))
}

fn run_sample(c: &SampleConfig, workers: usize, w: &mut Writer) -> Result<()> {
    let p = sample_problem(c)?;
    run_draws(&p, c.method, c.delta, c.grid_horizon, 1, c.n, c.seed, workers, w)
}

fn benchmark_problem(c: &BenchmarkConfig) -> Result<ExactProblem> {
    let p = match c.problem {
        BenchmarkProblem::Example1 => problems::example1(c.k, c.a(), c.b(), c.x0, c.kappa)?,
        BenchmarkProblem::Example2 => problems::example2(c.k, c.a(), c.b(), c.x0, Some(c.epsilon), c.kappa)?,
    };
    Ok(p.with_max_proposals(c.max_proposals))
}

/// Exact reference plus one coupled plain/improved Euler batch per step size.
fn run_benchmark(c: &BenchmarkConfig, workers: usize, w: &mut Writer) -> Result<Vec<Value>> {
    let p = benchmark_problem(c)?;
    let t0 = Instant::now();
    let reference = exact_batch(&p, 1, c.n, c.seed, workers)?;
    let exact_time = t0.elapsed().as_secs_f64();
    let exact_times = finite_times(&reference);
    let mut csv = String::from("delta,method,ks_D,ks_p,bias1,bias2,n_finite\n");
    let mut rows = Vec::new();
    let mut timings = vec![json!({ "method": "exact", "wall_time_s": exact_time })];
    for (j, &delta) in c.deltas.iter().enumerate() {
        let t = Instant::now();
        let pairs = map_streams(c.n, mix_seed(c.seed, j as u64 + 1), workers, |_, r| {
            coupled_pair(&p.sde, &p.threshold, delta, c.grid_horizon, r)
        })?;
        let wall = t.elapsed().as_secs_f64();
        for &method in &c.methods {
            let draws: Vec<FptDraw> = pairs
                .iter()
                .map(|(e, i)| if method == Method::Euler { *e } else { *i })
                .collect();
            let times = finite_times(&draws);
            let ks = ks_two_sample(&times, &exact_times)?;
            let (b1, b2) = moment_bias(&times, &exact_times)?;
            let name = match method {
                Method::Euler => "euler",
                _ => "improved_euler",
            };
            let _ = writeln!(
                csv,
                "{},{name},{},{},{},{},{}",
                num(delta),
                num(ks.statistic),
                num(ks.p_value),
                num(b1),
                num(b2),
                times.len()
            );
            rows.push(json!({
                "delta": delta, "method": name, "ks_D": ks.statistic, "ks_p": ks.p_value,
                "bias1": b1, "bias2": b2, "n_finite": times.len(),
            }));
            timings.push(json!({ "delta": delta, "method": name, "wall_time_s": wall }));
        }
    }
    w.text("samples.csv", &samples_csv(&reference))?;
    w.text("comparison.csv", &csv)?;
    let mut body = draw_summary(&reference);
    body["method"] = json!("exact");
    body["comparison"] = Value::Array(rows);
    w.summary(body)?;
    Ok(timings)
}

fn coefficient_of_variation(xs: &[f64]) -> Option<f64> {
    let s = SummaryStats::from_sample(xs).ok()?;
    (s.n >= 2 && s.mean > 0.0).then(|| s.variance.sqrt() / s.mean)
}

fn run_neuron(c: &NeuronConfig, workers: usize, w: &mut Writer) -> Result<()> {
    let opts = SpikeOptions {
        epsilon: c.epsilon,
        max_spikes: c.max_spikes,
        max_proposals: c.max_proposals,
        ..SpikeOptions::default()
    };
    let mut csv = String::from("current,trial,spike_index,time\n");
    let mut per_current = Vec::new();
    for (ci, current) in c.current_list().into_iter().enumerate() {
        let params = c.params(current);
        let master = mix_seed(c.seed, ci as u64);
        let trains: Vec<SpikeTrain> = map_streams(c.trials, master, workers, |i, r| {
            simulate_spike_train(&params, c.horizon, mix_seed(master, i as u64), &opts, r)
        })?;
        let mut isis = Vec::new();
        let mut counts = Vec::new();
        let mut jump_err = 0.0f64;
        let mut proposals = 0u64;
        let jump = params.delta / params.tau1;
        for (i, tr) in trains.iter().enumerate() {
            for (k, t) in tr.times.iter().enumerate() {
                let _ = writeln!(csv, "{},{i},{k},{}", num(current), num(*t));
            }
            for s in &tr.spikes {
                jump_err = jump_err.max((s.theta_plus - s.theta_minus - jump).abs());
                proposals += s.proposals;
            }
            counts.push(tr.times.len());
            isis.extend(tr.intervals());
        }
        let mean_count = counts.iter().sum::<usize>() as f64 / counts.len() as f64;
        per_current.push(json!({
            "current": current,
            "trials": c.trials,
            "spike_counts": counts,
            "mean_count": mean_count,
            "isi_cv": coefficient_of_variation(&isis),
            "max_jump_error": jump_err,
            "total_proposals": proposals,
        }));
    }
    w.text("spikes.csv", &csv)?;
    w.summary(json!({ "currents": per_current }))
}
