//! Stochastic policy mirror descent under a generative model.
//!
//! Each iteration estimates the full `Q̃^{π_t}` table by truncated Monte-Carlo
//! rollouts from every `(s,a)` pair and then applies the usual per-state prox
//! update. Every rollout draws from its own ChaCha stream keyed by
//! `(seed, iteration, s, a, rollout)`, so results do not depend on the order
//! in which pairs are visited.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bregman::Geometry;
use crate::certify::OnlineAccumulator;
use crate::envs::{rng_for, GenerativeSim};
use crate::error::{Error, Result};
use crate::mdp::{evaluate, policy_regularizer, MdpModel, Policy};
use crate::pmd::{pmd_update, ScheduleKind, StepSchedule};

/// Bound on `|c(s,a) + h^p(s)|` over all states, actions and policies.
pub fn effective_cost_bound(model: &MdpModel) -> f64 {
    model.max_abs_stage_cost() + model.regularizer().abs_bound(model.num_actions())
}

/// Default bias target `ς = 10⁻⁶·c_max/(1−γ)`.
pub fn default_bias_target(model: &MdpModel) -> f64 {
    1e-6 * effective_cost_bound(model) / (1.0 - model.gamma())
}

/// Smallest `H` with `γ^H·c_max/(1−γ) ≤ varsigma`.
pub fn horizon_for_bias(model: &MdpModel, varsigma: f64) -> Result<usize> {
    if !(varsigma > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "bias target must be positive, got {varsigma}"
        )));
    }
    let gamma = model.gamma();
    let cmax = effective_cost_bound(model);
    if gamma == 0.0 || cmax == 0.0 {
        return Ok(1);
    }
    let ratio = varsigma * (1.0 - gamma) / cmax;
    if ratio >= 1.0 {
        return Ok(1);
    }
    Ok(((ratio.ln() / gamma.ln()).ceil() as usize).max(1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Rollouts per `(s,a)`; `0` requests the exact Q table instead.
    pub rollouts_per_pair: usize,
    /// Truncation length `H`.
    pub horizon: usize,
    pub seed: u64,
}

impl SamplerConfig {
    pub fn new(rollouts_per_pair: usize, horizon: usize, seed: u64) -> Self {
        Self {
            rollouts_per_pair,
            horizon,
            seed,
        }
    }

    /// `m` rollouts with the horizon meeting the default bias target.
    pub fn with_default_horizon(model: &MdpModel, rollouts_per_pair: usize, seed: u64) -> Result<Self> {
        let horizon = horizon_for_bias(model, default_bias_target(model))?;
        Ok(Self::new(rollouts_per_pair, horizon, seed))
    }

    pub fn exact(seed: u64) -> Self {
        Self::new(0, 1, seed)
    }

    pub fn is_exact(&self) -> bool {
        self.rollouts_per_pair == 0
    }

    /// Analytic truncation bias `γ^H·c_max/(1−γ)`.
    pub fn bias_bound(&self, model: &MdpModel) -> f64 {
        let g = model.gamma();
        g.powi(self.horizon as i32) * effective_cost_bound(model) / (1.0 - g)
    }
}

/// Estimates `Q̃^π` by averaging `m` truncated rollouts per pair. The
/// `iteration` key separates the streams of successive calls.
pub fn sample_q(sim: &GenerativeSim, policy: &Policy, cfg: &SamplerConfig, iteration: u64) -> Result<Vec<f64>> {
    if cfg.rollouts_per_pair == 0 || cfg.horizon == 0 {
        return Err(Error::InvalidConfig(format!(
            "sampler needs m >= 1 and H >= 1, got m = {}, H = {}",
            cfg.rollouts_per_pair, cfg.horizon
        )));
    }
    let model = sim.model();
    let (ns, na) = (model.num_states(), model.num_actions());
    if policy.num_states() != ns || policy.num_actions() != na {
        return Err(Error::ShapeMismatch("policy does not match model".into()));
    }
    policy.validate()?;
    let gamma = model.gamma();
    let h = policy_regularizer(model, policy);
    let action_cdf: Vec<ActionDraw> = (0..ns)
        .map(|s| {
            let row = policy.row(s);
            if let Some(a) = row.iter().position(|&p| p == 1.0) {
                ActionDraw::Fixed(a)
            } else {
                let mut acc = 0.0;
                ActionDraw::Cdf(
                    row.iter()
                        .map(|p| {
                            acc += p;
                            acc
                        })
                        .collect(),
                )
            }
        })
        .collect();
    let m = cfg.rollouts_per_pair;
    let mut q = vec![0.0; ns * na];
    for s0 in 0..ns {
        for a0 in 0..na {
            let mut total = 0.0;
            for r in 0..m {
                let mut rng = rng_for(&[cfg.seed, iteration, s0 as u64, a0 as u64, r as u64]);
                let (mut s, mut a) = (s0, a0);
                let mut disc = 1.0;
                let mut ret = 0.0;
                for t in 0..cfg.horizon {
                    ret += disc * (model.cost(s, a) + h[s]);
                    if t + 1 == cfg.horizon {
                        break;
                    }
                    s = sim.sample_next(s, a, &mut rng);
                    a = match &action_cdf[s] {
                        ActionDraw::Fixed(a) => *a,
                        ActionDraw::Cdf(cdf) => {
                            let u = rng.random::<f64>() * cdf[na - 1];
                            cdf.partition_point(|&c| c <= u).min(na - 1)
                        }
                    };
                    disc *= gamma;
                }
                total += ret;
            }
            q[s0 * na + a0] = total / m as f64;
        }
    }
    Ok(q)
}

enum ActionDraw {
    Fixed(usize),
    Cdf(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpmdConfig {
    /// Number of iterations `k`.
    pub horizon_k: usize,
    pub schedule: StepSchedule,
    pub geometry: Geometry,
    pub sampler: SamplerConfig,
    pub certify: bool,
    pub record_last_iterate: bool,
    pub trace_every: usize,
    /// Also evaluate every iterate exactly and report its gap in the trace.
    pub exact_gaps: bool,
}

impl SpmdConfig {
    pub fn new(horizon_k: usize, schedule: StepSchedule, geometry: Geometry, sampler: SamplerConfig) -> Self {
        Self {
            horizon_k,
            schedule,
            geometry,
            sampler,
            certify: true,
            record_last_iterate: true,
            trace_every: 1,
            exact_gaps: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.horizon_k == 0 {
            return Err(Error::InvalidConfig("horizon_k must be at least 1".into()));
        }
        if self.trace_every == 0 {
            return Err(Error::InvalidConfig("trace_every must be at least 1".into()));
        }
        match self.schedule {
            StepSchedule::SqrtHorizon { horizon_k, .. } if horizon_k < self.horizon_k => {
                Err(Error::InvalidConfig(format!(
                    "sqrt schedule fixed for {horizon_k} iterations, run asks for {}",
                    self.horizon_k
                )))
            }
            StepSchedule::SqrtHorizon { .. } => Ok(()),
            StepSchedule::InverseStrong { mu_h } if !(mu_h > 0.0) => {
                Err(Error::InvalidConfig("inverse-strong schedule needs mu_h > 0".into()))
            }
            StepSchedule::InverseStrong { .. } => Ok(()),
            _ => Err(Error::InvalidConfig(format!(
                "stochastic runs use the sqrt-horizon or inverse-strong schedule, got {:?}",
                self.schedule.kind()
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpmdRecord {
    pub iter: usize,
    pub eta: f64,
    pub max_gap_exact: Option<f64>,
    /// Mean over states of `Ṽ^{π_t}`.
    pub est_mean_value: f64,
    pub wall_ms: f64,
    /// Cumulative simulator transitions drawn so far.
    pub samples_used: u64,
}

/// What the observer sees after iteration `iter` has been estimated (and
/// accumulated, when certification is on) but before the update.
pub struct SpmdView<'a> {
    pub iter: usize,
    pub policy: &'a Policy,
    pub q_tilde: &'a [f64],
    pub accumulator: Option<&'a OnlineAccumulator>,
}

#[derive(Debug, Clone)]
pub struct SpmdOutcome {
    /// `π_k`, produced by the final update.
    pub policy: Policy,
    /// `π_{k−1}`, the last iterate that was estimated.
    pub last_iterate: Option<Policy>,
    pub accumulator: Option<OnlineAccumulator>,
    pub trace: Vec<SpmdRecord>,
    pub samples_used: u64,
}

pub fn spmd_run(sim: &GenerativeSim, pi0: &Policy, config: &SpmdConfig) -> Result<SpmdOutcome> {
    spmd_run_observed(sim, pi0, config, |_| {})
}

/// Runs `k = horizon_k` SPMD iterations from `pi0`.
pub fn spmd_run_observed<F>(
    sim: &GenerativeSim,
    pi0: &Policy,
    config: &SpmdConfig,
    mut observer: F,
) -> Result<SpmdOutcome>
where
    F: FnMut(&SpmdView<'_>),
{
    config.validate()?;
    let model = sim.model();
    if pi0.num_states() != model.num_states() || pi0.num_actions() != model.num_actions() {
        return Err(Error::ShapeMismatch("initial policy does not match model".into()));
    }
    pi0.validate()?;
    if config.schedule.kind() == ScheduleKind::InverseStrong && model.regularizer().mu_h <= 0.0 {
        return Err(Error::InvalidConfig(
            "inverse-strong schedule requires a strongly convex regularizer (mu_h > 0)".into(),
        ));
    }
    let ns = model.num_states();
    let pairs = (ns * model.num_actions()) as u64;
    let per_iter = if config.sampler.is_exact() {
        0
    } else {
        pairs * config.sampler.rollouts_per_pair as u64 * (config.sampler.horizon as u64 - 1)
    };
    let start = Instant::now();
    let mut acc = config.certify.then(|| OnlineAccumulator::for_model(model));
    let mut policy = pi0.clone();
    let mut last_iterate = None;
    let mut trace = Vec::with_capacity(config.horizon_k / config.trace_every + 1);
    let mut samples = 0u64;

    for t in 0..config.horizon_k {
        let exact = if config.sampler.is_exact() || config.exact_gaps {
            Some(evaluate(model, &policy)?)
        } else {
            None
        };
        let q = if config.sampler.is_exact() {
            exact.as_ref().expect("exact evaluation").qvalues.clone()
        } else {
            sample_q(sim, &policy, &config.sampler, t as u64)?
        };
        samples += per_iter;
        if let Some(acc) = acc.as_mut() {
            acc.accumulate(&q, &policy, model)?;
        }
        observer(&SpmdView {
            iter: t,
            policy: &policy,
            q_tilde: &q,
            accumulator: acc.as_ref(),
        });
        let step = config.schedule.step(t)?;
        if t % config.trace_every == 0 || t + 1 == config.horizon_k {
            let na = model.num_actions();
            let est: f64 = (0..ns)
                .map(|s| {
                    q[s * na..(s + 1) * na]
                        .iter()
                        .zip(policy.row(s))
                        .map(|(q, p)| q * p)
                        .sum::<f64>()
                })
                .sum::<f64>()
                / ns as f64;
            trace.push(SpmdRecord {
                iter: t,
                eta: step.as_f64(),
                max_gap_exact: config
                    .exact_gaps
                    .then(|| exact.as_ref().expect("exact evaluation").max_gap()),
                est_mean_value: est,
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
                samples_used: samples,
            });
        }
        let next = pmd_update(model, &policy, &q, step, config.geometry)?;
        if config.record_last_iterate && t + 1 == config.horizon_k {
            last_iterate = Some(policy);
        }
        policy = next;
    }
    Ok(SpmdOutcome {
        policy,
        last_iterate,
        accumulator: acc,
        trace,
        samples_used: samples,
    })
}
