//! Exact first-passage sampling by Girsanov rejection with Poisson thinning.
//!
//! A proposal `tau_W` is drawn from the Brownian first-passage law. The path
//! between start and threshold is then revealed only at the events of a rate
//! `kappa` Poisson clock, through a Bessel(3) bridge built from a 3-D Brownian
//! bridge, and the proposal is rejected if any event falls under the graph of
//! the thinning intensity.

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::bm_fpt::{self, CurvyParams, FptDraw};
use crate::error::{FptError, Result};
use crate::model::{make_gamma_pair, GammaPair, Orientation, Threshold, ThresholdShape, UnitDiffusionSDE};

pub const DEFAULT_MAX_PROPOSALS: u64 = 1_000_000;

/// 3-D Brownian bridge value and clock bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BridgeState {
    pub l: [f64; 3],
    pub e0: f64,
    pub e1: f64,
    pub rejected: bool,
}

impl Default for BridgeState {
    fn default() -> Self {
        Self {
            l: [0.0; 3],
            e0: 0.0,
            e1: 0.0,
            rejected: false,
        }
    }
}

/// Advances the bridge pinned at zero at `tau_w` from time `e0` to `e1`.
pub fn bridge_step(s: BridgeState, tau_w: f64, g: [f64; 3]) -> Result<BridgeState> {
    if !(s.e0 <= s.e1) || s.e1 > tau_w || !(tau_w > s.e0) {
        return Err(FptError::Sequencing(format!(
            "bridge step needs e0 <= e1 <= tau_w and e0 < tau_w (got {}, {}, {tau_w})",
            s.e0, s.e1
        )));
    }
    let span = tau_w - s.e0;
    let keep = (tau_w - s.e1) / span;
    let noise = ((tau_w - s.e1) * (s.e1 - s.e0) / span).sqrt();
    let mut out = s;
    for i in 0..3 {
        out.l[i] = keep * s.l[i] + noise * g[i];
    }
    Ok(out)
}

/// Runs a rate-`kappa` Poisson clock with uniform marks over `[0, t_end]` and
/// reports whether no point fell under the graph of `g`.
///
/// For `0 <= g <= kappa` the probability of `true` is `exp(-int_0^t_end g)`.
pub fn thinning_pass<R: Rng + ?Sized>(g: &dyn Fn(f64) -> f64, kappa: f64, t_end: f64, rng: &mut R) -> bool {
    let mut t = rng.sample::<f64, _>(Exp1) / kappa;
    while t <= t_end {
        let u: f64 = rng.random();
        if kappa * u <= g(t) {
            return false;
        }
        t += rng.sample::<f64, _>(Exp1) / kappa;
    }
    true
}

/// How proposals are drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Proposal {
    /// Closed-form law for a constant threshold.
    Constant,
    /// Closed-form law for a linear threshold.
    Linear,
    /// Iterated tilted lines; `r` is read in the geometry where the threshold lies above the path.
    Curvy(CurvyParams),
}

/// Everything needed to draw exact first-passage times.
#[derive(Clone, Debug)]
pub struct ExactProblem {
    pub sde: UnitDiffusionSDE,
    pub threshold: Threshold,
    pub gammas: GammaPair,
    pub proposal: Proposal,
    pub max_proposals: u64,
}

impl ExactProblem {
    pub fn new(sde: UnitDiffusionSDE, threshold: Threshold, gammas: GammaPair, proposal: Proposal) -> Result<Self> {
        gammas.kappa()?;
        threshold.check_orientation(sde.x0)?;
        let p = Self {
            sde,
            threshold,
            gammas,
            proposal,
            max_proposals: DEFAULT_MAX_PROPOSALS,
        };
        p.check_proposal()?;
        Ok(p)
    }

    pub fn with_max_proposals(mut self, max_proposals: u64) -> Self {
        self.max_proposals = max_proposals.max(1);
        self
    }

    /// Distance between start and threshold at time zero.
    pub fn gap(&self) -> f64 {
        (self.threshold.value(0.0) - self.sde.x0).abs()
    }

    fn tilt(&self) -> f64 {
        self.gammas.total_shift()
    }

    /// Linear coefficients of the threshold in the above-start, zero-start geometry.
    fn oriented_line(&self) -> Option<(f64, f64)> {
        let gap = self.gap();
        let sign = match self.threshold.orientation {
            Orientation::AboveStart => 1.0,
            Orientation::BelowStart => -1.0,
        };
        match self.threshold.shape {
            ThresholdShape::Constant(_) => Some((0.0, gap)),
            ThresholdShape::Linear { slope, .. } => Some((sign * slope, gap)),
            ThresholdShape::General => None,
        }
    }

    fn check_proposal(&self) -> Result<()> {
        let s = self.tilt();
        match self.proposal {
            Proposal::Constant => {
                if !matches!(self.threshold.shape, ThresholdShape::Constant(_)) {
                    return Err(FptError::Configuration(
                        "constant proposals need a constant threshold".into(),
                    ));
                }
            }
            Proposal::Linear => {
                if matches!(self.threshold.shape, ThresholdShape::General) {
                    return Err(FptError::Configuration(
                        "linear proposals need a constant or linear threshold".into(),
                    ));
                }
            }
            Proposal::Curvy(c) => {
                c.validate()?;
                if s < 0.0 {
                    return Err(FptError::Unsupported(
                        "negative total shift with curvy proposals".into(),
                    ));
                }
            }
        }
        if let (Some((a, _)), Proposal::Constant | Proposal::Linear) = (self.oriented_line(), self.proposal) {
            if a * a + 2.0 * s < 0.0 {
                return Err(FptError::Unsupported(format!(
                    "total shift {s} cannot be compensated for threshold slope {a}"
                )));
            }
        }
        Ok(())
    }

    /// One proposal draw from the Brownian first-passage law, tilted by
    /// `exp(-s t)` when the gammas carry a total shift `s`.
    ///
    /// Shifting multiplies the thinning acceptance probability by `exp(s t)`;
    /// the tilt cancels it so the accepted law is unchanged.
    fn draw_proposal<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<FptDraw> {
        let s = self.tilt();
        match self.proposal {
            Proposal::Constant | Proposal::Linear => {
                let (a, b) = self.oriented_line().expect("checked at construction");
                bm_fpt::sample_fpt_linear_tilted(a, b, s, rng)
            }
            Proposal::Curvy(c) => {
                let th = self.threshold.shifted(0.0, -self.sde.x0);
                let d = bm_fpt::sample_fpt_curvy(&th, &c, rng)?;
                if s > 0.0 && d.finite && !d.censored {
                    let u: f64 = rng.random();
                    if u >= (-s * d.time).exp() {
                        return Ok(FptDraw::infinite());
                    }
                }
                Ok(d)
            }
        }
    }

    /// Reconstructed state of the path at clock time `e1` after a bridge update.
    ///
    /// The Bessel bridge runs backwards from the hitting point, so the bridge
    /// value at `e1` is the gap at time `tau - e1`.
    fn state_at(&self, tau: f64, e1: f64, l: &[f64; 3]) -> f64 {
        let lead = e1 * self.gap() / tau + l[0];
        let r = (lead * lead + l[1] * l[1] + l[2] * l[2]).sqrt();
        let b = self.threshold.value(tau - e1);
        match self.threshold.orientation {
            Orientation::AboveStart => b - r,
            Orientation::BelowStart => b + r,
        }
    }
}

fn run(p: &ExactProblem, rng: &mut (impl Rng + ?Sized)) -> Result<FptDraw> {
    let kappa = p.gammas.kappa()?;
    let mut proposals = 0u64;
    let mut clock_events = 0u64;
    loop {
        if proposals >= p.max_proposals {
            return Err(FptError::NonTermination {
                proposals,
                acceptance_rate: 0.0,
            });
        }
        proposals += 1;
        let draw = p.draw_proposal(rng)?;
        if !draw.finite || draw.censored {
            continue;
        }
        let tau = draw.time;
        let mut st = BridgeState {
            e1: rng.sample::<f64, _>(Exp1) / kappa,
            ..BridgeState::default()
        };
        while st.e1 <= tau {
            let g = [
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
            ];
            let e = rng.sample::<f64, _>(Exp1) / kappa;
            let u: f64 = rng.random();
            st = bridge_step(st, tau, g)?;
            clock_events += 1;
            let x = p.state_at(tau, st.e1, &st.l);
            let v = p.gammas.intensity(tau - st.e1, x)?;
            if kappa * u <= v {
                st.rejected = true;
                break;
            }
            st.e0 = st.e1;
            st.e1 += e;
        }
        if !st.rejected {
            return Ok(FptDraw {
                time: tau,
                finite: true,
                proposals,
                clock_events,
                censored: false,
            });
        }
    }
}

/// Exact first-passage time for a threshold above the start.
pub fn sample_exact<R: Rng + ?Sized>(p: &ExactProblem, rng: &mut R) -> Result<FptDraw> {
    if p.threshold.orientation != Orientation::AboveStart {
        return Err(FptError::Configuration("sample_exact needs an AboveStart threshold".into()));
    }
    run(p, rng)
}

/// Exact first-passage time for a threshold below the start.
pub fn sample_exact_below<R: Rng + ?Sized>(p: &ExactProblem, rng: &mut R) -> Result<FptDraw> {
    if p.threshold.orientation != Orientation::BelowStart {
        return Err(FptError::Configuration("sample_exact_below needs a BelowStart threshold".into()));
    }
    run(p, rng)
}

/// Dispatches on the threshold orientation.
pub fn sample<R: Rng + ?Sized>(p: &ExactProblem, rng: &mut R) -> Result<FptDraw> {
    run(p, rng)
}

/// Stage `i` of `k` of a split problem starting at `(t_start, x_start)`.
///
/// The intermediate thresholds are `beta(t) - (beta(0) - x0)(1 - i/k)`; stage
/// `i` sees the `i`-th one moved to start at `t_start`. The state intensity,
/// shifts and `kappa` are inherited, the time intensity is rebuilt for the
/// moved threshold.
pub fn split_stage(p: &ExactProblem, k: usize, i: usize, t_start: f64, x_start: f64) -> Result<ExactProblem> {
    let offset = -(p.threshold.value(0.0) - p.sde.x0) * (1.0 - i as f64 / k as f64);
    let th = p.threshold.shifted(t_start, offset);
    let sde = p.sde.with_start(x_start);
    let mut gammas = make_gamma_pair(&sde, &th);
    gammas.shift1 = p.gammas.shift1;
    gammas.shift2 = p.gammas.shift2;
    gammas.kappa = p.gammas.kappa;
    Ok(ExactProblem {
        sde,
        threshold: th,
        gammas,
        proposal: p.proposal,
        max_proposals: p.max_proposals,
    })
}

/// Chains `k` exact draws through intermediate thresholds built by `stage`.
///
/// `stage(i, t, x)` returns the problem for stage `i` (1-based) started at
/// time `t` in state `x`, with time measured from `t`. Counters are summed.
pub fn sample_exact_chain<R, F>(p: &ExactProblem, k: usize, rng: &mut R, stage: F) -> Result<FptDraw>
where
    R: Rng + ?Sized,
    F: Fn(usize, f64, f64) -> Result<ExactProblem>,
{
    if k < 1 {
        return Err(FptError::Parameter("split count must be at least 1".into()));
    }
    let (mut t, mut x) = (0.0, p.sde.x0);
    let mut total = FptDraw {
        time: 0.0,
        finite: true,
        proposals: 0,
        clock_events: 0,
        censored: false,
    };
    for i in 1..=k {
        let sp = stage(i, t, x)?;
        let d = run(&sp, rng)?;
        t += d.time;
        x = sp.threshold.value(d.time);
        total.proposals += d.proposals;
        total.clock_events += d.clock_events;
    }
    total.time = t;
    Ok(total)
}

/// Exact first-passage time to a linear threshold via `k` equal vertical splits.
pub fn sample_exact_split<R: Rng + ?Sized>(p: &ExactProblem, k: usize, rng: &mut R) -> Result<FptDraw> {
    if k < 1 {
        return Err(FptError::Parameter("split count must be at least 1".into()));
    }
    if matches!(p.threshold.shape, ThresholdShape::General) {
        return Err(FptError::Unsupported("space splitting needs a linear threshold".into()));
    }
    if p.threshold.orientation != Orientation::AboveStart {
        return Err(FptError::Configuration("space splitting needs an AboveStart threshold".into()));
    }
    if k == 1 {
        return sample_exact(p, rng);
    }
    sample_exact_chain(p, k, rng, |i, t, x| split_stage(p, k, i, t, x))
}

fn check_decreasing_case(a: f64, b: f64, kappa: f64) -> Result<()> {
    if !(a * b < 0.0) {
        return Err(FptError::Unsupported(format!("bound needs ab < 0 (got a={a}, b={b})")));
    }
    if !(kappa > 0.0) {
        return Err(FptError::Parameter(format!("kappa must be positive, got {kappa}")));
    }
    Ok(())
}

/// Upper bound `exp(ab - ab sqrt(1 + 2 kappa / a^2))` on the mean number of proposals
/// for the line `a t + b`.
pub fn iteration_bound_linear(a: f64, b: f64, kappa: f64) -> Result<f64> {
    check_decreasing_case(a, b, kappa)?;
    let ab = a * b;
    Ok((ab - ab * (1.0 + 2.0 * kappa / (a * a)).sqrt()).exp())
}

/// Split count `floor(ab (1 - sqrt(1 + 2 kappa / a^2))) + 1` making each stage's bound at most `e`.
pub fn choose_split_count(a: f64, b: f64, kappa_max: f64) -> Result<usize> {
    check_decreasing_case(a, b, kappa_max)?;
    let v = a * b * (1.0 - (1.0 + 2.0 * kappa_max / (a * a)).sqrt());
    Ok((v.floor() as i64 + 1).max(1) as usize)
}
