//! Quadratic leaky integrate-and-fire neuron with an adaptive, exponentially
//! declining firing threshold.
//!
//! The membrane voltage solves
//!
//! ```text
//! dV = (-V (V - V_r) / tau + I V) dt - sigma V dB
//! ```
//!
//! and `X = -ln(V) / sigma` has unit diffusion with drift
//! `alpha(x) = c + e^{-sigma x} / (tau sigma)`, `c = sigma/2 - I/sigma - V_r/(tau sigma)`.
//! A spike is the passage of `V` through `theta(t)`, i.e. of `X` through
//! `beta(t) = -ln(theta(t)) / sigma`, which lies below the start.
//!
//! Each inter-spike interval is an exact draw; intervals whose start and
//! threshold are far apart in `A` (the antiderivative of `alpha`) are drawn in
//! several chained stages. When the passage is not certain (for weak input it
//! may never happen) the draw is conditioned on it happening.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bm_fpt::{CurvyParams, DEFAULT_EPSILON};
use crate::error::{FptError, Result};
use crate::exact::{self, ExactProblem, Proposal};
use crate::model::{real_fn, GammaPair, Orientation, Threshold, UnitDiffusionSDE};
use crate::numerics;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeuronParams {
    /// Integration time constant.
    pub tau_m: f64,
    /// Resting potential.
    pub v_r: f64,
    pub sigma: f64,
    pub v0: f64,
    /// Input current.
    pub current: f64,
    pub theta0: f64,
    pub tau1: f64,
    /// Adaptation strength.
    pub delta: f64,
    pub v_reset: f64,
}

impl Default for NeuronParams {
    fn default() -> Self {
        Self {
            tau_m: -1.0,
            v_r: 1.0,
            sigma: 1.0,
            v0: 1.0,
            current: 0.0,
            theta0: 1.0,
            tau1: 1.0,
            delta: 1.0,
            v_reset: 1.0,
        }
    }
}

impl NeuronParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.tau_m,
            self.v_r,
            self.sigma,
            self.v0,
            self.current,
            self.theta0,
            self.tau1,
            self.delta,
            self.v_reset,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite || self.tau_m == 0.0 {
            return Err(FptError::Parameter("neuron parameters must be finite with tau_m != 0".into()));
        }
        if !(self.sigma > 0.0 && self.tau1 > 0.0 && self.v0 > 0.0 && self.v_reset > 0.0) {
            return Err(FptError::Parameter(
                "neuron needs sigma, tau1, v0 and v_reset positive".into(),
            ));
        }
        if !(self.theta0 + 1.0 > self.v0) {
            return Err(FptError::Parameter(format!(
                "initial threshold theta0 + 1 = {} must exceed v0 = {}",
                self.theta0 + 1.0,
                self.v0
            )));
        }
        Ok(())
    }

    /// Constant part `c` of the transformed drift.
    pub fn drift_constant(&self) -> f64 {
        self.sigma / 2.0 - self.current / self.sigma - self.v_r / (self.tau_m * self.sigma)
    }

    pub fn drift(&self, x: f64) -> f64 {
        self.drift_constant() + (-self.sigma * x).exp() / (self.tau_m * self.sigma)
    }

    pub fn drift_prime(&self, x: f64) -> f64 {
        -(-self.sigma * x).exp() / self.tau_m
    }

    /// Antiderivative `A(x) = c x - e^{-sigma x} / (tau sigma^2)`.
    pub fn antiderivative(&self, x: f64) -> f64 {
        self.drift_constant() * x - (-self.sigma * x).exp() / (self.tau_m * self.sigma * self.sigma)
    }

    /// `(alpha' + alpha^2)/2` written as a quadratic in `u = e^{-sigma x}`:
    /// `(c^2 + u^2/(tau sigma)^2 - 2u/(tau sigma) (I/sigma + V_r/(tau sigma)))/2`.
    pub fn gamma2_of_u(&self, u: f64) -> f64 {
        let c = self.drift_constant();
        let ts = self.tau_m * self.sigma;
        let lin = 2.0 / ts * (self.current / self.sigma + self.v_r / ts);
        0.5 * (c * c + u * u / (ts * ts) - lin * u)
    }

    /// Extremes of [`Self::gamma2_of_u`] over `u` in `[0, u_max]`.
    pub fn gamma2_range(&self, u_max: f64) -> (f64, f64) {
        let ts = self.tau_m * self.sigma;
        let lin = 2.0 / ts * (self.current / self.sigma + self.v_r / ts);
        // Convex quadratic with vertex at lin (tau sigma)^2 / 2.
        let vertex = 0.5 * lin * ts * ts;
        let ends = [self.gamma2_of_u(0.0), self.gamma2_of_u(u_max)];
        let hi = ends[0].max(ends[1]);
        let lo = if vertex > 0.0 && vertex < u_max {
            self.gamma2_of_u(vertex)
        } else {
            ends[0].min(ends[1])
        };
        (lo, hi)
    }

    pub fn state_of_voltage(&self, v: f64) -> f64 {
        -v.ln() / self.sigma
    }
}

/// Threshold bookkeeping across spikes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdaptiveThresholdState {
    pub last_spike: f64,
    pub theta_plus: f64,
}

impl AdaptiveThresholdState {
    /// State before the first spike: `theta(0) = theta0 + 1`.
    pub fn initial(params: &NeuronParams) -> Self {
        Self {
            last_spike: 0.0,
            theta_plus: params.theta0 + 1.0,
        }
    }
}

/// `theta0 + (theta_plus - theta0) exp(-(t - last_spike)/tau1)`.
pub fn threshold_value(s: &AdaptiveThresholdState, params: &NeuronParams, t: f64) -> Result<f64> {
    if t < s.last_spike {
        return Err(FptError::Sequencing(format!(
            "threshold queried at {t} before the last spike at {}",
            s.last_spike
        )));
    }
    Ok(params.theta0 + (s.theta_plus - params.theta0) * (-(t - s.last_spike) / params.tau1).exp())
}

/// Records a spike at `t_spike`: the threshold jumps by `delta / tau1`.
pub fn apply_spike(s: &AdaptiveThresholdState, params: &NeuronParams, t_spike: f64) -> Result<AdaptiveThresholdState> {
    let before = threshold_value(s, params, t_spike)?;
    Ok(AdaptiveThresholdState {
        last_spike: t_spike,
        theta_plus: before + params.delta / params.tau1,
    })
}

/// One inter-spike interval as an exact-sampling problem.
#[derive(Clone, Debug)]
pub struct NeuronInterval {
    pub problem: ExactProblem,
    /// Largest `e^{-sigma x}` the path can reach before the passage.
    pub u_max: f64,
    /// Number of chained stages used for the draw.
    pub stages: usize,
    /// Time range covered by the `gamma1` bound.
    pub time_span: f64,
}

fn interval_threshold(params: &NeuronParams, s: &AdaptiveThresholdState) -> Result<Threshold> {
    let (theta0, jump, tau1, sigma) = (params.theta0, s.theta_plus - params.theta0, params.tau1, params.sigma);
    let theta = move |t: f64| theta0 + jump * (-t / tau1).exp();
    // theta is monotone, so its smallest value is at 0 or in the limit.
    let lo = theta(0.0).min(theta0);
    if !(lo > 0.0) {
        return Err(FptError::Domain(format!("threshold reaches non-positive value {lo}")));
    }
    let slope = move |t: f64| {
        let w = jump * (-t / tau1).exp();
        w / (tau1 * sigma * (theta0 + w))
    };
    let s0 = slope(0.0);
    Ok(Threshold::new(
        real_fn(move |t| -theta(t).ln() / sigma),
        real_fn(slope),
        Orientation::BelowStart,
    )
    .with_slope_bounds(Some(s0.min(0.0)), Some(s0.max(0.0))))
}

/// Builds the exact problem for the interval starting at `s.last_spike` from
/// voltage state `x_start`, with `time_span` bounding the times at which the
/// time intensity may be evaluated.
pub fn transform_neuron(
    params: &NeuronParams,
    s: &AdaptiveThresholdState,
    x_start: f64,
    time_span: f64,
    epsilon: f64,
) -> Result<NeuronInterval> {
    params.validate()?;
    let th = interval_threshold(params, s)?;
    let p = *params;
    let sde = UnitDiffusionSDE::new(
        real_fn(move |x| p.drift(x)),
        real_fn(move |x| p.drift_prime(x)),
        real_fn(move |x| p.antiderivative(x)),
        x_start,
    );
    th.check_orientation(x_start)?;
    // X stays above inf beta before the passage, so u = e^{-sigma X} <= max theta.
    let u_max = s.theta_plus.max(params.theta0);
    let ratio = (params.antiderivative(x_start) - params.antiderivative(th.value(0.0))).abs();
    let stages = (ratio.ceil() as usize).max(1);
    let gammas = interval_gammas(params, &th, u_max, time_span)?;
    let sup_slope = th.sup_slope.unwrap_or(0.0);
    let curvy = CurvyParams::new(epsilon / stages as f64, -sup_slope - 0.1, time_span)?;
    let problem = ExactProblem::new(sde, th, gammas, Proposal::Curvy(curvy))?;
    Ok(NeuronInterval {
        problem,
        u_max,
        stages,
        time_span,
    })
}

/// Intensities for threshold `th`: `gamma2` from the quadratic in `u` with a
/// NaN sentinel past `u_max`, `kappa` from the quadratic bound plus a grid bound on `gamma1`.
fn interval_gammas(params: &NeuronParams, th: &Threshold, u_max: f64, time_span: f64) -> Result<GammaPair> {
    let p = *params;
    let (beta, beta_prime) = (th.beta.clone(), th.beta_prime.clone());
    let gamma1 = real_fn(move |t| -p.drift(beta(t)) * beta_prime(t));
    let limit = u_max * (1.0 + 1e-9);
    let gamma2 = real_fn(move |x| {
        let u = (-p.sigma * x).exp();
        if u > limit {
            f64::NAN
        } else {
            p.gamma2_of_u(u)
        }
    });
    let (g2_lo, g2_hi) = params.gamma2_range(u_max);
    let grid: Vec<f64> = numerics::linspace(0.0, time_span, 2001).into_iter().map(|t| gamma1(t)).collect();
    let g1_hi = grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let g1_lo = grid.iter().copied().fold(f64::INFINITY, f64::min);
    if !(g1_hi.is_finite() && g1_lo.is_finite()) {
        return Err(FptError::Domain("non-finite time intensity on the interval".into()));
    }
    if g1_lo + g2_lo < 0.0 {
        return Err(FptError::Assumption {
            time: 0.0,
            state: th.value(0.0),
            value: g1_lo + g2_lo,
            kappa: f64::NAN,
        });
    }
    let kappa = (g1_hi + 0.05 * g1_hi.abs()) + g2_hi;
    GammaPair::new(gamma1, gamma2).with_kappa(kappa.max(f64::MIN_POSITIVE))
}

/// Stage `i` of `k` of an interval: threshold moved towards the start by
/// `(1 - i/k)` of the initial gap and seen from `t_start`.
fn interval_stage(
    params: &NeuronParams,
    iv: &NeuronInterval,
    i: usize,
    t_start: f64,
    x_start: f64,
) -> Result<ExactProblem> {
    let base = &iv.problem;
    let k = iv.stages;
    let offset = -(base.threshold.value(0.0) - base.sde.x0) * (1.0 - i as f64 / k as f64);
    let th = base.threshold.shifted(t_start, offset);
    let span = (iv.time_span - t_start).max(1.0);
    let gammas = interval_gammas(params, &th, iv.u_max, span)?;
    let proposal = match base.proposal {
        Proposal::Curvy(c) => Proposal::Curvy(CurvyParams { horizon: span, ..c }),
        other => other,
    };
    let sde = base.sde.with_start(x_start);
    Ok(ExactProblem::new(sde, th, gammas, proposal)?.with_max_proposals(base.max_proposals))
}

/// Upper bound `exp(A(beta(0)) - A(x0))` on the probability that the interval
/// ends in a spike at all. It holds because the thinning intensity is
/// non-negative, so the acceptance probability is at most one.
pub fn passage_bound(params: &NeuronParams, s: &AdaptiveThresholdState, x_start: f64) -> f64 {
    let beta0 = params.state_of_voltage(s.theta_plus);
    (params.antiderivative(beta0) - params.antiderivative(x_start)).exp()
}

/// Exact draw of the interval's passage time, chained over `iv.stages` stages.
pub fn sample_interval<R: Rng + ?Sized>(
    params: &NeuronParams,
    iv: &NeuronInterval,
    rng: &mut R,
) -> Result<crate::bm_fpt::FptDraw> {
    if iv.stages == 1 {
        return exact::sample_exact_below(&iv.problem, rng);
    }
    exact::sample_exact_chain(&iv.problem, iv.stages, rng, |i, t, x| interval_stage(params, iv, i, t, x))
}

/// Spike record with the threshold just before and after the spike.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Spike {
    pub time: f64,
    pub theta_minus: f64,
    pub theta_plus: f64,
    pub proposals: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpikeTrain {
    pub times: Vec<f64>,
    pub spikes: Vec<Spike>,
    pub horizon: f64,
    pub params: NeuronParams,
    pub trial_seed: u64,
}

impl SpikeTrain {
    pub fn intervals(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.times
            .iter()
            .map(|&t| {
                let d = t - prev;
                prev = t;
                d
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpikeOptions {
    pub epsilon: f64,
    /// Extra time past the horizon covered by the proposal iteration.
    pub slack: f64,
    pub max_spikes: usize,
    pub max_proposals: u64,
    /// Intervals needing more chained stages than this are refused.
    pub max_stages: usize,
    /// Passage probabilities provably below this end the train.
    pub negligible_passage: f64,
}

impl Default for SpikeOptions {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            slack: 5.0,
            max_spikes: 10_000,
            max_proposals: exact::DEFAULT_MAX_PROPOSALS,
            max_stages: 256,
            negligible_passage: 1e-12,
        }
    }
}

/// Spike times before `horizon`.
pub fn simulate_spike_train<R: Rng + ?Sized>(
    params: &NeuronParams,
    horizon: f64,
    trial_seed: u64,
    opts: &SpikeOptions,
    rng: &mut R,
) -> Result<SpikeTrain> {
    params.validate()?;
    if !(horizon > 0.0) {
        return Err(FptError::Parameter(format!("horizon must be positive, got {horizon}")));
    }
    let mut state = AdaptiveThresholdState::initial(params);
    let mut x = params.state_of_voltage(params.v0);
    let mut spikes = Vec::new();
    loop {
        let remaining = horizon - state.last_spike;
        // Building the interval checks that the intensity is non-negative,
        // which the passage bound relies on.
        let mut iv = transform_neuron(params, &state, x, remaining + opts.slack, opts.epsilon)?;
        if passage_bound(params, &state, x) < opts.negligible_passage {
            break;
        }
        if iv.stages > opts.max_stages {
            return Err(FptError::Unsupported(format!(
                "interval at t={} needs {} chained stages (limit {})",
                state.last_spike, iv.stages, opts.max_stages
            )));
        }
        iv.problem.max_proposals = opts.max_proposals;
        let d = sample_interval(params, &iv, rng)?;
        let t = state.last_spike + d.time;
        if t >= horizon {
            break;
        }
        if spikes.len() >= opts.max_spikes {
            return Err(FptError::NonTermination {
                proposals: spikes.len() as u64,
                acceptance_rate: 0.0,
            });
        }
        let theta_minus = threshold_value(&state, params, t)?;
        state = apply_spike(&state, params, t)?;
        spikes.push(Spike {
            time: t,
            theta_minus,
            theta_plus: state.theta_plus,
            proposals: d.proposals,
        });
        x = params.state_of_voltage(params.v_reset);
    }
    Ok(SpikeTrain {
        times: spikes.iter().map(|s| s.time).collect(),
        spikes,
        horizon,
        params: *params,
        trial_seed,
    })
}
