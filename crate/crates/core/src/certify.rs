//! Online and offline validation: value estimates, aggregated-gap estimates
//! and lower bounds on the optimal value computed from sampled Q tables.

use serde::{Deserialize, Serialize};

use crate::envs::GenerativeSim;
use crate::error::{Error, Result};
use crate::mdp::{aggregated_gap, check_distribution, evaluate, policy_regularizer, MdpModel, Policy};
use crate::spmd::{sample_q, SamplerConfig};

/// Noise bounds for sampled Q tables: bias `ς`, standard deviation `σ` and
/// the second-moment bound `Q̄`. Only the worst-case bound reads them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub varsigma: f64,
    pub sigma: f64,
    pub qbar: f64,
}

impl NoiseParams {
    pub fn new(varsigma: f64, sigma: f64, qbar: f64) -> Result<Self> {
        for (name, x) in [("varsigma", varsigma), ("sigma", sigma), ("qbar", qbar)] {
            if !(x.is_finite() && x >= 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be nonnegative, got {x}")));
            }
        }
        Ok(Self { varsigma, sigma, qbar })
    }

    /// Bounds implied by the sampler itself: the truncation bias, and
    /// `Q̄ = σ = c_max/(1−γ)` since every rollout return lies in `[−Q̄, Q̄]`.
    pub fn analytic(model: &MdpModel, sampler: &SamplerConfig) -> Self {
        let qbar = crate::spmd::effective_cost_bound(model) / (1.0 - model.gamma());
        let varsigma = if sampler.is_exact() {
            0.0
        } else {
            sampler.bias_bound(model)
        };
        Self {
            varsigma,
            sigma: qbar,
            qbar,
        }
    }
}

/// Running sums over `k` iterates of `Q̃`, `Ṽ = ⟨Q̃, π⟩` and `h^π`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineAccumulator {
    pub num_states: usize,
    pub num_actions: usize,
    pub k: usize,
    pub v_sum: Vec<f64>,
    /// Row-major `[S][A]`.
    pub q_sum: Vec<f64>,
    pub h_sum: Vec<f64>,
}

impl OnlineAccumulator {
    pub fn new(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_states,
            num_actions,
            k: 0,
            v_sum: vec![0.0; num_states],
            q_sum: vec![0.0; num_states * num_actions],
            h_sum: vec![0.0; num_states],
        }
    }

    pub fn for_model(model: &MdpModel) -> Self {
        Self::new(model.num_states(), model.num_actions())
    }

    /// Adds one iterate's estimate.
    pub fn accumulate(&mut self, q_tilde: &[f64], policy: &Policy, model: &MdpModel) -> Result<()> {
        let (ns, na) = (self.num_states, self.num_actions);
        if model.num_states() != ns
            || model.num_actions() != na
            || policy.num_states() != ns
            || policy.num_actions() != na
            || q_tilde.len() != ns * na
        {
            return Err(Error::ShapeMismatch("accumulator inputs".into()));
        }
        if let Some(x) = q_tilde.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidConfig(format!("non-finite Q estimate {x}")));
        }
        let h = policy_regularizer(model, policy);
        for s in 0..ns {
            let q = &q_tilde[s * na..(s + 1) * na];
            self.v_sum[s] += q.iter().zip(policy.row(s)).map(|(q, p)| q * p).sum::<f64>();
            self.h_sum[s] += h[s];
            for (acc, x) in self.q_sum[s * na..(s + 1) * na].iter_mut().zip(q) {
                *acc += x;
            }
        }
        self.k += 1;
        Ok(())
    }

    /// Sums of two accumulators over the same model.
    pub fn merged(&self, other: &OnlineAccumulator) -> Result<OnlineAccumulator> {
        if self.num_states != other.num_states || self.num_actions != other.num_actions {
            return Err(Error::ShapeMismatch("merging accumulators".into()));
        }
        let add = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + y).collect();
        Ok(OnlineAccumulator {
            num_states: self.num_states,
            num_actions: self.num_actions,
            k: self.k + other.k,
            v_sum: add(&self.v_sum, &other.v_sum),
            q_sum: add(&self.q_sum, &other.q_sum),
            h_sum: add(&self.h_sum, &other.h_sum),
        })
    }

    pub fn vbar(&self) -> Result<Vec<f64>> {
        if self.k == 0 {
            return Err(Error::Empty("accumulator has no iterates"));
        }
        Ok(self.v_sum.iter().map(|v| v / self.k as f64).collect())
    }

    pub fn gtilde(&self, model: &MdpModel) -> Result<Vec<f64>> {
        aggregated_gap(model, &self.q_sum, &self.h_sum, &self.v_sum, self.k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub k: usize,
    pub vbar: Vec<f64>,
    pub gtilde: Vec<f64>,
    pub lb_universal: Vec<f64>,
    pub lb_adaptive: f64,
    pub lb_worst_case: Vec<f64>,
    pub lb_apriori: Option<Vec<f64>>,
    pub rho: Vec<f64>,
}

impl CertificateReport {
    pub fn vbar_rho(&self) -> f64 {
        dot(&self.rho, &self.vbar)
    }

    pub fn lb_universal_rho(&self) -> f64 {
        dot(&self.rho, &self.lb_universal)
    }

    pub fn lb_worst_case_rho(&self) -> f64 {
        dot(&self.rho, &self.lb_worst_case)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Problem-dependent lower bound supplied by the caller, given `k` and `V̄ᵏ`.
pub type AprioriFn<'a> = &'a dyn Fn(usize, &[f64]) -> Vec<f64>;

/// Lower bounds assembled from a value estimate and an aggregated-gap
/// estimate built from `k` tables.
fn assemble(
    model: &MdpModel,
    k: usize,
    vbar: Vec<f64>,
    gtilde: Vec<f64>,
    rho: &[f64],
    noise: &NoiseParams,
    dbar0: f64,
    apriori: Option<AprioriFn<'_>>,
) -> Result<CertificateReport> {
    check_distribution(model, rho)?;
    if !(dbar0.is_finite() && dbar0 >= 0.0) {
        return Err(Error::InvalidConfig(format!("dbar0 must be nonnegative, got {dbar0}")));
    }
    let scale = 1.0 / (1.0 - model.gamma());
    let gmax = gtilde.iter().copied().fold(0.0, f64::max);
    let lb_universal = vbar.iter().map(|v| v - scale * gmax).collect();
    let lb_adaptive = rho
        .iter()
        .zip(vbar.iter().zip(&gtilde))
        .map(|(r, (v, g))| r * (v - scale * g.max(0.0)))
        .sum();
    let m_h = model.regularizer().m_h(model.num_actions());
    let width = 2.0 * (dbar0 * (noise.qbar * noise.qbar + m_h * m_h)).sqrt() * scale / (k as f64).sqrt();
    let lb_worst_case = vbar.iter().map(|v| v - width).collect();
    let lb_apriori = apriori.map(|f| f(k, &vbar));
    if let Some(a) = &lb_apriori {
        if a.len() != model.num_states() {
            return Err(Error::ShapeMismatch("a priori bound length".into()));
        }
    }
    Ok(CertificateReport {
        k,
        vbar,
        gtilde,
        lb_universal,
        lb_adaptive,
        lb_worst_case,
        lb_apriori,
        rho: rho.to_vec(),
    })
}

/// Online certificate from the accumulated iterates. `dbar0` is the
/// distance bound entering the worst-case rate (`ln|A|` from a uniform start
/// under KL).
pub fn online_report(
    acc: &OnlineAccumulator,
    model: &MdpModel,
    rho: &[f64],
    noise: &NoiseParams,
    dbar0: f64,
    apriori: Option<AprioriFn<'_>>,
) -> Result<CertificateReport> {
    if acc.num_states != model.num_states() || acc.num_actions != model.num_actions() {
        return Err(Error::ShapeMismatch("accumulator does not match model".into()));
    }
    let vbar = acc.vbar()?;
    let gtilde = acc.gtilde(model)?;
    assemble(model, acc.k, vbar, gtilde, rho, noise, dbar0, apriori)
}

/// Offline certificate for a fixed policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfflineCertificate {
    /// `vbar` is `Ṽ_N`; gaps and lower bounds use the pooled sums when
    /// online sums were supplied.
    pub report: CertificateReport,
    /// Upper bound `Ṽ_N` per state.
    pub ub: Vec<f64>,
    /// Lower bound per state.
    pub lb: Vec<f64>,
    pub ub_rho: f64,
    pub lb_rho: f64,
    pub n_samples: usize,
    pub pooled_k: Option<usize>,
    /// The fresh offline sums, for later pooling.
    pub sums: OnlineAccumulator,
}

/// Draws `n_samples` fresh Q estimates of `pi_hat` (exact tables when the
/// sampler is in exact mode). With `extra_sums`, the
/// gap (and the value average it is paired with in the lower bound) pool
/// the online and offline tables; the upper bound stays the offline `Ṽ_N`.
pub fn offline_certificate(
    sim: &GenerativeSim,
    pi_hat: &Policy,
    n_samples: usize,
    sampler: &SamplerConfig,
    rho: &[f64],
    noise: &NoiseParams,
    dbar0: f64,
    extra_sums: Option<&OnlineAccumulator>,
) -> Result<OfflineCertificate> {
    if n_samples == 0 {
        return Err(Error::Empty("offline certificate needs at least one sample"));
    }
    let model = sim.model();
    let exact = if sampler.is_exact() {
        Some(evaluate(model, pi_hat)?.qvalues)
    } else {
        None
    };
    let mut acc = OnlineAccumulator::for_model(model);
    for i in 0..n_samples {
        let q = match &exact {
            Some(q) => q.clone(),
            None => sample_q(sim, pi_hat, sampler, OFFLINE_STREAM + i as u64)?,
        };
        acc.accumulate(&q, pi_hat, model)?;
    }
    let ub = acc.vbar()?;
    let (pooled, pooled_k) = match extra_sums {
        Some(extra) => {
            let p = acc.merged(extra)?;
            let k = p.k;
            (p, Some(k))
        }
        None => (acc.clone(), None),
    };
    let lb_vbar = pooled.vbar()?;
    let gtilde = pooled.gtilde(model)?;
    let mut report = assemble(model, pooled.k, lb_vbar, gtilde, rho, noise, dbar0, None)?;
    let lb = report.lb_universal.clone();
    report.vbar = ub.clone();
    let ub_rho = dot(rho, &ub);
    let lb_rho = report.lb_adaptive;
    Ok(OfflineCertificate {
        report,
        lb,
        ub,
        ub_rho,
        lb_rho,
        n_samples,
        pooled_k,
        sums: acc,
    })
}

/// Iteration keys at and above this value are reserved for offline draws so
/// they never reuse an online stream.
pub const OFFLINE_STREAM: u64 = 1 << 62;
