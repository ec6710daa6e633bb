//! Deterministic policy mirror descent, its step-size schedules, greedy
//! extraction, and the classical policy / value iteration baselines.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bregman::{prox_step, Geometry, Step};
use crate::error::{Error, Result};
use crate::mdp::{argmin, evaluate, Evaluation, MdpModel, Policy};

/// `⌈x⌉`, snapping values within rounding noise of an integer to it.
fn ceil_snapped(x: f64) -> usize {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r as usize
    } else {
        x.ceil() as usize
    }
}

/// Epoch length `N = ⌈4/(1−γ)⌉`.
pub fn epoch_length(gamma: f64) -> usize {
    ceil_snapped(4.0 / (1.0 - gamma)).max(1)
}

/// Epochs per round `T = ⌈log₂(|S|³|A|/(1−γ)²)⌉ + 1`.
pub fn rounds_per_refresh(num_states: usize, num_actions: usize, gamma: f64) -> usize {
    let s = num_states as f64;
    let x = s * s * s * num_actions as f64 / ((1.0 - gamma) * (1.0 - gamma));
    ceil_snapped(x.log2()) + 1
}

/// `Δ = (1−γ)^{-1} max_s g(s)`.
pub fn gap_constant(gamma: f64, eval: &Evaluation) -> f64 {
    eval.max_gap().max(0.0) / (1.0 - gamma)
}

/// Default bound on the Bregman distance from a uniform start.
pub fn default_distance_bound(geometry: Geometry, num_actions: usize) -> f64 {
    match geometry {
        Geometry::Kl => (num_actions as f64).ln(),
        Geometry::EuclideanSquared => 2.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Constant,
    ScheduledGeometric,
    BoundedAggressive,
    StronglyPoly,
    SqrtHorizon,
    InverseStrong,
}

/// Step-size rule producing `η_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StepSchedule {
    Constant {
        eta: f64,
    },
    /// `η_t = 4^{⌊t/N⌋} D̄₀ / Δ`, with `Δ` optionally refreshed from the
    /// current policy's gap every `refresh_period` iterations.
    ScheduledGeometric {
        epoch_len: usize,
        dbar0: f64,
        delta: f64,
        refresh_period: Option<usize>,
    },
    /// `η_t = 2^t D̄ / Δ₀`.
    BoundedAggressive {
        epoch_len: usize,
        dbar: f64,
        delta0: f64,
    },
    /// `η_t = 2^{t+1} / Δ_{NT⌊t/(NT)⌋}`; `delta` is refreshed every `N·T`.
    StronglyPoly {
        epoch_len: usize,
        rounds: usize,
        delta: f64,
    },
    /// `η_t = α/√k` for a horizon `k` fixed in advance.
    SqrtHorizon {
        alpha: f64,
        horizon_k: usize,
    },
    /// `η_t = 1/(μ_h (t+1))`.
    InverseStrong {
        mu_h: f64,
    },
}

impl StepSchedule {
    pub fn constant(eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidStep(eta));
        }
        Ok(StepSchedule::Constant { eta })
    }

    fn initial_delta(model: &MdpModel, init_eval: &Evaluation) -> Result<f64> {
        let delta = gap_constant(model.gamma(), init_eval);
        if delta <= 0.0 || !delta.is_finite() {
            return Err(Error::ZeroInitialGap(delta));
        }
        Ok(delta)
    }

    pub fn scheduled_geometric(
        model: &MdpModel,
        init_eval: &Evaluation,
        dbar0: f64,
        refresh_period: Option<usize>,
    ) -> Result<Self> {
        positive("dbar0", dbar0)?;
        Ok(StepSchedule::ScheduledGeometric {
            epoch_len: epoch_length(model.gamma()),
            dbar0,
            delta: Self::initial_delta(model, init_eval)?,
            refresh_period,
        })
    }

    pub fn bounded_aggressive(model: &MdpModel, init_eval: &Evaluation, dbar: f64) -> Result<Self> {
        positive("dbar", dbar)?;
        Ok(StepSchedule::BoundedAggressive {
            epoch_len: epoch_length(model.gamma()),
            dbar,
            delta0: Self::initial_delta(model, init_eval)?,
        })
    }

    pub fn strongly_poly(model: &MdpModel, init_eval: &Evaluation) -> Result<Self> {
        Ok(StepSchedule::StronglyPoly {
            epoch_len: epoch_length(model.gamma()),
            rounds: rounds_per_refresh(model.num_states(), model.num_actions(), model.gamma()),
            delta: Self::initial_delta(model, init_eval)?,
        })
    }

    pub fn sqrt_horizon(alpha: f64, horizon_k: usize) -> Result<Self> {
        positive("alpha", alpha)?;
        if horizon_k == 0 {
            return Err(Error::InvalidConfig("horizon_k must be positive".into()));
        }
        Ok(StepSchedule::SqrtHorizon { alpha, horizon_k })
    }

    pub fn inverse_strong(mu_h: f64) -> Result<Self> {
        if !(mu_h > 0.0 && mu_h.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "inverse-strong schedule needs mu_h > 0, got {mu_h}"
            )));
        }
        Ok(StepSchedule::InverseStrong { mu_h })
    }

    pub fn kind(&self) -> ScheduleKind {
        match self {
            StepSchedule::Constant { .. } => ScheduleKind::Constant,
            StepSchedule::ScheduledGeometric { .. } => ScheduleKind::ScheduledGeometric,
            StepSchedule::BoundedAggressive { .. } => ScheduleKind::BoundedAggressive,
            StepSchedule::StronglyPoly { .. } => ScheduleKind::StronglyPoly,
            StepSchedule::SqrtHorizon { .. } => ScheduleKind::SqrtHorizon,
            StepSchedule::InverseStrong { .. } => ScheduleKind::InverseStrong,
        }
    }

    /// Iterations between gap refreshes, if the schedule uses them.
    pub fn refresh_period(&self) -> Option<usize> {
        match *self {
            StepSchedule::ScheduledGeometric { refresh_period, .. } => refresh_period,
            StepSchedule::StronglyPoly { epoch_len, rounds, .. } => Some(epoch_len * rounds),
            _ => None,
        }
    }

    /// Replaces the gap constant `Δ` used by refreshed schedules.
    pub fn refresh(&mut self, new_delta: f64) {
        match self {
            StepSchedule::ScheduledGeometric { delta, .. } | StepSchedule::StronglyPoly { delta, .. } => {
                *delta = new_delta.max(0.0)
            }
            _ => {}
        }
    }

    /// `η_t`. Geometric kinds return the greedy sentinel once `η_t` overflows
    /// or `Δ` has reached zero.
    pub fn step(&self, t: usize) -> Result<Step> {
        let scaled = |pow2: usize, mult: f64, delta: f64| {
            if delta <= 0.0 {
                return Step::Greedy;
            }
            let eta = (pow2 as f64).exp2() * mult / delta;
            if eta.is_finite() {
                Step::Finite(eta)
            } else {
                Step::from_log2(pow2 as f64 + mult.log2() - delta.log2())
            }
        };
        Ok(match *self {
            StepSchedule::Constant { eta } => Step::Finite(eta),
            StepSchedule::ScheduledGeometric {
                epoch_len,
                dbar0,
                delta,
                ..
            } => scaled(2 * (t / epoch_len), dbar0, delta),
            StepSchedule::BoundedAggressive { dbar, delta0, .. } => scaled(t, dbar, delta0),
            StepSchedule::StronglyPoly { delta, .. } => scaled(t + 1, 1.0, delta),
            StepSchedule::SqrtHorizon { alpha, horizon_k } => {
                if t >= horizon_k {
                    return Err(Error::ScheduleExhausted {
                        iter: t,
                        horizon: horizon_k,
                    });
                }
                Step::Finite(alpha / (horizon_k as f64).sqrt())
            }
            StepSchedule::InverseStrong { mu_h } => Step::Finite(1.0 / (mu_h * (t + 1) as f64)),
        })
    }
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{name} must be positive, got {x}")))
    }
}

/// Termination threshold `(1−γ)^{-1}·10^{-14}`.
pub fn default_gap_tolerance(gamma: f64) -> f64 {
    1e-14 / (1.0 - gamma)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub schedule: StepSchedule,
    pub geometry: Geometry,
    pub max_iters: usize,
    pub gap_tolerance: f64,
    /// Also certify through the greedy counterpart and stop once the greedy
    /// policy is a policy-iteration fixed point (unregularized models only).
    pub terminate_on_greedy_match: bool,
    pub trace_every: usize,
    pub record_values: bool,
}

impl RunConfig {
    pub fn new(schedule: StepSchedule, geometry: Geometry, gamma: f64) -> Self {
        Self {
            schedule,
            geometry,
            max_iters: 100_000,
            gap_tolerance: default_gap_tolerance(gamma),
            terminate_on_greedy_match: true,
            trace_every: 1,
            record_values: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        if !(self.gap_tolerance >= 0.0) {
            return Err(Error::InvalidConfig("gap_tolerance must be nonnegative".into()));
        }
        if self.trace_every == 0 {
            return Err(Error::InvalidConfig("trace_every must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GapTolerance,
    GreedyMatch,
    MaxIters,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::GapTolerance => "gap_tolerance",
            Termination::GreedyMatch => "greedy_match",
            Termination::MaxIters => "max_iters",
        }
    }
}

/// One recorded iteration. `eta` is the step taken *from* this iterate
/// (`None` on the terminating iteration, `+∞` for the greedy sentinel).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: usize,
    pub eta: Option<f64>,
    pub max_gap: f64,
    pub mean_value: f64,
    pub values: Option<Vec<f64>>,
    pub wall_millis: f64,
}

/// What an observer sees at each iteration, after exact evaluation.
pub struct IterView<'a> {
    pub iter: usize,
    pub policy: &'a Policy,
    pub eval: &'a Evaluation,
}

#[derive(Debug, Clone)]
pub struct PmdOutcome {
    /// Last iterate `π_t`.
    pub last: Policy,
    /// The policy that met the stopping rule: `π_t` or its greedy counterpart.
    pub solution: Policy,
    pub solution_eval: Evaluation,
    /// Greedy policy of the last iterate.
    pub greedy: Policy,
    pub iterations: usize,
    pub reason: Termination,
    pub trace: Vec<IterRecord>,
}

/// Deterministic greedy policy: mass one on `argmin_a Q(s,a)`, lowest index
/// on ties.
pub fn greedy(eval: &Evaluation) -> Policy {
    let ns = eval.values.len();
    let actions: Vec<usize> = (0..ns).map(|s| argmin(eval.q_row(s))).collect();
    Policy::deterministic(&actions, eval.num_actions()).expect("argmin in range")
}

/// One PMD update applied to every state.
pub fn pmd_update(
    model: &MdpModel,
    policy: &Policy,
    qvalues: &[f64],
    step: Step,
    geometry: Geometry,
) -> Result<Policy> {
    let na = model.num_actions();
    let mut next = policy.clone();
    for s in 0..model.num_states() {
        let row = prox_step(
            policy.row(s),
            &qvalues[s * na..(s + 1) * na],
            step,
            geometry,
            model.regularizer(),
        )?;
        next.row_mut(s).copy_from_slice(&row);
    }
    Ok(next)
}

/// Runs PMD from `pi0`.
pub fn pmd_run(model: &MdpModel, pi0: &Policy, config: &RunConfig) -> Result<PmdOutcome> {
    pmd_run_observed(model, pi0, config, |_| {})
}

/// Runs PMD, calling `observer` with every evaluated iterate.
pub fn pmd_run_observed<F>(model: &MdpModel, pi0: &Policy, config: &RunConfig, mut observer: F) -> Result<PmdOutcome>
where
    F: FnMut(&IterView<'_>),
{
    config.validate()?;
    model.check_policy(pi0)?;
    pi0.validate()?;
    let greedy_checks = config.terminate_on_greedy_match && model.regularizer().is_none();
    let start = Instant::now();
    let mut schedule = config.schedule.clone();
    let mut policy = pi0.clone();
    let mut trace = Vec::new();
    let mut cached_greedy: Option<(Policy, Evaluation)> = None;
    let mut t = 0usize;

    loop {
        let eval = evaluate(model, &policy)?;
        observer(&IterView {
            iter: t,
            policy: &policy,
            eval: &eval,
        });
        let max_gap = eval.max_gap();

        let mut stop: Option<(Termination, Policy, Evaluation)> = None;
        if max_gap <= config.gap_tolerance {
            stop = Some((Termination::GapTolerance, policy.clone(), eval.clone()));
        } else if greedy_checks {
            let g = greedy(&eval);
            let reuse = matches!(&cached_greedy, Some((p, _)) if *p == g);
            if !reuse {
                let ge = evaluate(model, &g)?;
                cached_greedy = Some((g, ge));
            }
            let (g, ge) = cached_greedy.as_ref().expect("cached greedy");
            if ge.max_gap() <= config.gap_tolerance {
                stop = Some((Termination::GapTolerance, g.clone(), ge.clone()));
            } else if greedy(ge) == *g {
                stop = Some((Termination::GreedyMatch, g.clone(), ge.clone()));
            }
        }
        if stop.is_none() && t >= config.max_iters {
            stop = Some((Termination::MaxIters, policy.clone(), eval.clone()));
        }

        if let Some((reason, solution, solution_eval)) = stop {
            trace.push(record(t, None, &eval, config, &start));
            return Ok(PmdOutcome {
                greedy: greedy(&eval),
                last: policy,
                solution,
                solution_eval,
                iterations: t,
                reason,
                trace,
            });
        }

        if let Some(period) = schedule.refresh_period() {
            if t > 0 && t.is_multiple_of(period) {
                schedule.refresh(gap_constant(model.gamma(), &eval));
            }
        }
        let step = schedule.step(t)?;
        if t.is_multiple_of(config.trace_every) {
            trace.push(record(t, Some(step.as_f64()), &eval, config, &start));
        }
        policy = pmd_update(model, &policy, &eval.qvalues, step, config.geometry)?;
        t += 1;
    }
}

fn record(t: usize, eta: Option<f64>, eval: &Evaluation, config: &RunConfig, start: &Instant) -> IterRecord {
    IterRecord {
        iter: t,
        eta,
        max_gap: eval.max_gap(),
        mean_value: eval.mean_value(),
        values: config.record_values.then(|| eval.values.clone()),
        wall_millis: start.elapsed().as_secs_f64() * 1e3,
    }
}

#[derive(Debug, Clone)]
pub struct PolicyIterationResult {
    pub policy: Policy,
    pub iterations: usize,
    pub eval: Evaluation,
}

/// Greedy improvement that keeps the current action unless another one is
/// better by more than round-off, so near-ties cannot make the loop cycle.
fn improve(eval: &Evaluation, current: &Policy) -> Policy {
    let scale = eval.values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-12 * scale;
    let actions: Vec<usize> = (0..eval.values.len())
        .map(|s| {
            let q = eval.q_row(s);
            let best = argmin(q);
            match current.row(s).iter().position(|&p| p == 1.0) {
                Some(a) if q[a] <= q[best] + tol => a,
                _ => best,
            }
        })
        .collect();
    Policy::deterministic(&actions, eval.num_actions()).expect("argmin in range")
}

/// Policy iteration from the deterministic policy that picks action 0 in
/// every state.
pub fn policy_iteration(model: &MdpModel) -> Result<PolicyIterationResult> {
    let pi0 = Policy::deterministic(&vec![0; model.num_states()], model.num_actions())?;
    policy_iteration_from(model, &pi0)
}

/// Policy iteration from `pi0`; `iterations` counts improvement steps,
/// including the final one that confirms the fixed point.
pub fn policy_iteration_from(model: &MdpModel, pi0: &Policy) -> Result<PolicyIterationResult> {
    if !model.regularizer().is_none() {
        return Err(Error::RegularizedModel("policy iteration"));
    }
    model.check_policy(pi0)?;
    pi0.validate()?;
    let mut policy = pi0.clone();
    let mut iterations = 0;
    loop {
        let eval = evaluate(model, &policy)?;
        let next = improve(&eval, &policy);
        iterations += 1;
        if next == policy {
            return Ok(PolicyIterationResult {
                policy,
                iterations,
                eval,
            });
        }
        policy = next;
    }
}

/// Bellman-operator fixed-point iteration. Stops once the sup-norm update is
/// at most `tol (1−γ)/(2γ)`, which guarantees `‖V − V*‖_∞ ≤ tol`.
pub fn value_iteration(model: &MdpModel, tol: f64) -> Result<Vec<f64>> {
    if !model.regularizer().is_none() {
        return Err(Error::RegularizedModel("value iteration"));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidConfig(
            "value iteration tolerance must be positive".into(),
        ));
    }
    let (ns, na, gamma) = (model.num_states(), model.num_actions(), model.gamma());
    let backup = |v: &[f64], s: usize| {
        (0..na)
            .map(|a| model.cost(s, a) + gamma * model.expected_next(s, a, v))
            .fold(f64::INFINITY, f64::min)
    };
    let mut v = vec![0.0; ns];
    if gamma == 0.0 {
        return Ok((0..ns).map(|s| backup(&v, s)).collect());
    }
    let threshold = tol * (1.0 - gamma) / (2.0 * gamma);
    loop {
        let next: Vec<f64> = (0..ns).map(|s| backup(&v, s)).collect();
        let diff = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if diff <= threshold {
            return Ok(v);
        }
    }
}
