//! MDP model, exact policy evaluation, the advantage gap function and the
//! visitation / occupancy machinery built on top of it.
//!
//! Conventions used throughout:
//!
//! * costs are minimised, so an optimal policy has the smallest values;
//! * `Q(s,a) = c(s,a) + h^{π(·|s)}(s) + γ Σ_{s'} P(s'|s,a) V(s')`, i.e. the
//!   regulariser of the *current* policy at `s` is folded into `Q`;
//! * the entropy regulariser is `h^p(s) = τ Σ_a p(a) ln p(a)` with `0 ln 0 = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::BellmanSystem;

const KERNEL_TOL: f64 = 1e-9;
const POLICY_TOL: f64 = 1e-12;
const SIMPLEX_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegularizerKind {
    None,
    ScaledNegativeEntropy,
}

/// Per-state convex regulariser `h^p(s)`.
///
/// `mu_h` is the strong-convexity modulus with respect to the KL geometry and
/// `m_h` is a Lipschitz-style bound that only enters worst-case certificate
/// formulas. Entropy is not Lipschitz on the simplex boundary, so `m_h` is a
/// configuration value rather than something derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regularizer {
    pub kind: RegularizerKind,
    pub tau: f64,
    pub mu_h: f64,
    pub m_h: Option<f64>,
}

impl Regularizer {
    pub fn none() -> Self {
        Self {
            kind: RegularizerKind::None,
            tau: 0.0,
            mu_h: 0.0,
            m_h: Some(0.0),
        }
    }

    pub fn entropy(tau: f64) -> Self {
        Self {
            kind: RegularizerKind::ScaledNegativeEntropy,
            tau,
            mu_h: tau,
            m_h: None,
        }
    }

    pub fn with_m_h(mut self, m_h: f64) -> Self {
        self.m_h = Some(m_h);
        self
    }

    pub fn is_none(&self) -> bool {
        self.kind == RegularizerKind::None
    }

    /// `m_h`, defaulting to `τ ln|A|` for entropy.
    pub fn m_h(&self, num_actions: usize) -> f64 {
        self.m_h.unwrap_or_else(|| self.tau * (num_actions as f64).ln())
    }

    /// `h^p` for a probability vector `p`.
    pub fn value(&self, p: &[f64]) -> f64 {
        match self.kind {
            RegularizerKind::None => 0.0,
            RegularizerKind::ScaledNegativeEntropy => self.tau * neg_entropy(p),
        }
    }

    /// Bound on `|h^p|` over the simplex.
    pub fn abs_bound(&self, num_actions: usize) -> f64 {
        match self.kind {
            RegularizerKind::None => 0.0,
            RegularizerKind::ScaledNegativeEntropy => self.tau * (num_actions as f64).ln(),
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidModel(m.to_string()));
        if !(self.tau.is_finite() && self.tau >= 0.0) {
            return bad("regularizer tau must be finite and nonnegative");
        }
        if !(self.mu_h.is_finite() && self.mu_h >= 0.0) {
            return bad("regularizer mu_h must be finite and nonnegative");
        }
        if let Some(m) = self.m_h {
            if !(m.is_finite() && m >= 0.0) {
                return bad("regularizer m_h must be finite and nonnegative");
            }
        }
        if self.kind == RegularizerKind::None && (self.tau != 0.0 || self.mu_h != 0.0) {
            return bad("unregularized model must have tau = mu_h = 0");
        }
        Ok(())
    }
}

/// `Σ p ln p` with `0 ln 0 = 0`.
pub fn neg_entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum()
}

/// Max-shifted `ln Σ exp(x_i)`.
pub fn log_sum_exp(xs: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.into_iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Checks that `p` is a probability vector within `tol`.
pub fn check_simplex(p: &[f64], tol: f64) -> Result<()> {
    if p.is_empty() {
        return Err(Error::Empty("probability vector"));
    }
    let mut sum = 0.0;
    for (i, &x) in p.iter().enumerate() {
        if !x.is_finite() || x < -tol {
            return Err(Error::NotInSimplex(format!("entry {i} = {x}")));
        }
        sum += x;
    }
    if (sum - 1.0).abs() > tol {
        return Err(Error::NotInSimplex(format!("entries sum to {sum}")));
    }
    Ok(())
}

/// Finite discounted MDP with a sparse transition kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct MdpModel {
    num_states: usize,
    num_actions: usize,
    gamma: f64,
    /// Row-major `[S][A]`.
    cost: Vec<f64>,
    /// Indexed by `s * A + a`.
    kernel: Vec<Vec<(usize, f64)>>,
    regularizer: Regularizer,
}

impl MdpModel {
    pub fn new(
        num_states: usize,
        num_actions: usize,
        gamma: f64,
        cost: Vec<f64>,
        kernel: Vec<Vec<(usize, f64)>>,
        regularizer: Regularizer,
    ) -> Result<Self> {
        let model = Self {
            num_states,
            num_actions,
            gamma,
            cost,
            kernel,
            regularizer,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidModel(m));
        if self.num_states == 0 || self.num_actions == 0 {
            return bad("state and action counts must be positive".into());
        }
        if !(self.gamma.is_finite() && (0.0..1.0).contains(&self.gamma)) {
            return bad(format!("gamma must lie in [0, 1), got {}", self.gamma));
        }
        let pairs = self.num_states * self.num_actions;
        if self.cost.len() != pairs {
            return bad(format!("cost has {} entries, expected {pairs}", self.cost.len()));
        }
        if let Some(i) = self.cost.iter().position(|c| !c.is_finite()) {
            return bad(format!("cost entry {i} is not finite"));
        }
        if self.kernel.len() != pairs {
            return bad(format!("kernel has {} rows, expected {pairs}", self.kernel.len()));
        }
        for (idx, row) in self.kernel.iter().enumerate() {
            let (s, a) = (idx / self.num_actions, idx % self.num_actions);
            if row.is_empty() {
                return bad(format!("kernel row ({s},{a}) is empty"));
            }
            let mut sum = 0.0;
            for &(next, p) in row {
                if next >= self.num_states {
                    return bad(format!("kernel row ({s},{a}) points to state {next}"));
                }
                if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
                    return bad(format!("kernel row ({s},{a}) has probability {p}"));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > KERNEL_TOL {
                return bad(format!("kernel row ({s},{a}) sums to {sum}"));
            }
        }
        self.regularizer.validate()
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn regularizer(&self) -> &Regularizer {
        &self.regularizer
    }

    pub fn cost(&self, s: usize, a: usize) -> f64 {
        self.cost[s * self.num_actions + a]
    }

    pub fn cost_row(&self, s: usize) -> &[f64] {
        &self.cost[s * self.num_actions..(s + 1) * self.num_actions]
    }

    pub fn costs(&self) -> &[f64] {
        &self.cost
    }

    pub fn transitions(&self, s: usize, a: usize) -> &[(usize, f64)] {
        &self.kernel[s * self.num_actions + a]
    }

    pub fn kernel(&self) -> &[Vec<(usize, f64)>] {
        &self.kernel
    }

    /// Copy with a different discount factor.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        let mut m = self.clone();
        m.gamma = gamma;
        m.validate()?;
        Ok(m)
    }

    /// Copy with a different regulariser.
    pub fn with_regularizer(&self, regularizer: Regularizer) -> Result<Self> {
        let mut m = self.clone();
        m.regularizer = regularizer;
        m.validate()?;
        Ok(m)
    }

    /// Upper bound on `|c(s,a) + h^p(s)|` over all states, actions and `p`.
    pub fn max_abs_stage_cost(&self) -> f64 {
        let c = self.cost.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        c + self.regularizer.abs_bound(self.num_actions)
    }

    /// Dense row-major `P_π`.
    pub fn policy_transition(&self, policy: &Policy) -> Vec<f64> {
        let n = self.num_states;
        let mut p = vec![0.0; n * n];
        for s in 0..n {
            for (a, &w) in policy.row(s).iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                for &(next, prob) in self.transitions(s, a) {
                    p[s * n + next] += w * prob;
                }
            }
        }
        p
    }

    pub fn bellman_system(&self, policy: &Policy) -> BellmanSystem {
        BellmanSystem::new(self.num_states, self.gamma, &self.policy_transition(policy))
    }

    /// `Σ_{s'} P(s'|s,a) v(s')`.
    pub fn expected_next(&self, s: usize, a: usize, v: &[f64]) -> f64 {
        self.transitions(s, a).iter().map(|&(n, p)| p * v[n]).sum()
    }

    pub(crate) fn check_policy(&self, policy: &Policy) -> Result<()> {
        if policy.num_states() != self.num_states || policy.num_actions() != self.num_actions {
            return Err(Error::ShapeMismatch(format!(
                "policy is {}x{}, model is {}x{}",
                policy.num_states(),
                policy.num_actions(),
                self.num_states,
                self.num_actions
            )));
        }
        Ok(())
    }
}

/// Row-stochastic `|S| x |A|` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    num_states: usize,
    num_actions: usize,
    probs: Vec<f64>,
}

impl Policy {
    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_states,
            num_actions,
            probs: vec![1.0 / num_actions as f64; num_states * num_actions],
        }
    }

    pub fn deterministic(actions: &[usize], num_actions: usize) -> Result<Self> {
        let mut probs = vec![0.0; actions.len() * num_actions];
        for (s, &a) in actions.iter().enumerate() {
            if a >= num_actions {
                return Err(Error::InvalidPolicy(format!("action {a} at state {s} out of range")));
            }
            probs[s * num_actions + a] = 1.0;
        }
        Ok(Self {
            num_states: actions.len(),
            num_actions,
            probs,
        })
    }

    /// Builds a policy from a flat row-major table, validating every row.
    pub fn from_flat(num_states: usize, num_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != num_states * num_actions || num_states == 0 || num_actions == 0 {
            return Err(Error::InvalidPolicy(format!(
                "expected {num_states}x{num_actions} entries, got {}",
                probs.len()
            )));
        }
        let p = Self {
            num_states,
            num_actions,
            probs,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let num_states = rows.len();
        let num_actions = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != num_actions) {
            return Err(Error::InvalidPolicy("ragged rows".into()));
        }
        Self::from_flat(num_states, num_actions, rows.concat())
    }

    pub fn validate(&self) -> Result<()> {
        for s in 0..self.num_states {
            check_simplex(self.row(s), POLICY_TOL).map_err(|e| Error::InvalidPolicy(format!("row {s}: {e}")))?;
        }
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.num_actions..(s + 1) * self.num_actions]
    }

    pub(crate) fn row_mut(&mut self, s: usize) -> &mut [f64] {
        &mut self.probs[s * self.num_actions..(s + 1) * self.num_actions]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.num_states).map(|s| self.row(s).to_vec()).collect()
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.probs
    }

    /// The action with the largest probability per state (lowest index on ties).
    pub fn argmax_actions(&self) -> Vec<usize> {
        (0..self.num_states).map(|s| argmax(self.row(s))).collect()
    }

    pub fn is_deterministic(&self) -> bool {
        self.probs.iter().all(|&p| p == 0.0 || p == 1.0)
    }
}

pub(crate) fn argmin(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x < xs[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Exact evaluation of one policy: `V^π`, `Q^π` and the gap `g^π`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub values: Vec<f64>,
    /// Row-major `[S][A]`.
    pub qvalues: Vec<f64>,
    pub gap: Vec<f64>,
    num_actions: usize,
}

impl Evaluation {
    pub fn q_row(&self, s: usize) -> &[f64] {
        &self.qvalues[s * self.num_actions..(s + 1) * self.num_actions]
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn max_gap(&self) -> f64 {
        self.gap.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean_value(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// `⟨ρ, V⟩`.
    pub fn weighted_value(&self, rho: &[f64]) -> f64 {
        self.values.iter().zip(rho).map(|(v, r)| v * r).sum()
    }
}

/// Per-state regulariser values `h^{π(·|s)}(s)`.
pub fn policy_regularizer(model: &MdpModel, policy: &Policy) -> Vec<f64> {
    let reg = model.regularizer();
    (0..model.num_states()).map(|s| reg.value(policy.row(s))).collect()
}

/// Builds `Q(s,a) = c(s,a) + h_pi(s) + γ E[v(s')]`.
pub fn q_from_values(model: &MdpModel, h_pi: &[f64], values: &[f64]) -> Vec<f64> {
    let (ns, na) = (model.num_states(), model.num_actions());
    let mut q = vec![0.0; ns * na];
    for s in 0..ns {
        for a in 0..na {
            q[s * na + a] = model.cost(s, a) + h_pi[s] + model.gamma() * model.expected_next(s, a, values);
        }
    }
    q
}

/// Exact `V^π`, `Q^π` and `g^π` via one dense LU solve.
pub fn evaluate(model: &MdpModel, policy: &Policy) -> Result<Evaluation> {
    model.check_policy(policy)?;
    policy.validate()?;
    let system = model.bellman_system(policy);
    evaluate_with(model, policy, &system)
}

/// Evaluation reusing an already factored system for `policy`.
pub fn evaluate_with(model: &MdpModel, policy: &Policy, system: &BellmanSystem) -> Result<Evaluation> {
    let h_pi = policy_regularizer(model, policy);
    let rhs: Vec<f64> = (0..model.num_states())
        .map(|s| {
            let c: f64 = policy.row(s).iter().zip(model.cost_row(s)).map(|(p, c)| p * c).sum();
            c + h_pi[s]
        })
        .collect();
    let values = system.solve(&rhs)?;
    let qvalues = q_from_values(model, &h_pi, &values);
    let gap = gap_vector(model, policy, &values, &qvalues);
    Ok(Evaluation {
        values,
        qvalues,
        gap,
        num_actions: model.num_actions(),
    })
}

/// Assembles an [`Evaluation`] from externally supplied values and Q table.
pub fn evaluation_from_parts(model: &MdpModel, policy: &Policy, values: Vec<f64>, qvalues: Vec<f64>) -> Evaluation {
    let gap = gap_vector(model, policy, &values, &qvalues);
    Evaluation {
        values,
        qvalues,
        gap,
        num_actions: model.num_actions(),
    }
}

/// `ψ^π(s,p) = ⟨Q(s,·),p⟩ − V(s) + h^p(s) − h^{π(·|s)}(s)`.
pub fn advantage(eval: &Evaluation, model: &MdpModel, policy: &Policy, s: usize, p: &[f64]) -> Result<f64> {
    if p.len() != model.num_actions() {
        return Err(Error::ShapeMismatch(format!(
            "p has {} entries, expected {}",
            p.len(),
            model.num_actions()
        )));
    }
    check_simplex(p, SIMPLEX_TOL)?;
    let reg = model.regularizer();
    let qp: f64 = eval.q_row(s).iter().zip(p).map(|(q, p)| q * p).sum();
    Ok(qp - eval.values[s] + reg.value(p) - reg.value(policy.row(s)))
}

/// `g(s) = max_p −ψ(s,p)` in closed form.
///
/// Unregularized: `max_a (V(s) − Q(s,a))`. Entropy with weight `τ`:
/// `τ ln Σ_a exp((V(s) − Q(s,a))/τ) + h^{π(·|s)}(s)`.
pub fn gap_vector(model: &MdpModel, policy: &Policy, values: &[f64], qvalues: &[f64]) -> Vec<f64> {
    let na = model.num_actions();
    let reg = model.regularizer();
    (0..model.num_states())
        .map(|s| {
            let q = &qvalues[s * na..(s + 1) * na];
            let v = values[s];
            match reg.kind {
                RegularizerKind::None => q.iter().map(|&qa| v - qa).fold(f64::NEG_INFINITY, f64::max),
                RegularizerKind::ScaledNegativeEntropy => {
                    let tau = reg.tau;
                    tau * log_sum_exp(q.iter().map(|&qa| (v - qa) / tau)) + reg.value(policy.row(s))
                }
            }
        })
        .collect()
}

/// Aggregated gap `(1/k) max_p {−Σ_t ψ^{π_t}(s,p)}` from running sums of
/// `Q_t`, `h^{π_t}` and `V_t` over `k` policies.
pub fn aggregated_gap(model: &MdpModel, q_sum: &[f64], h_sum: &[f64], v_sum: &[f64], k: usize) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::Empty("aggregated gap needs k >= 1"));
    }
    let (ns, na) = (model.num_states(), model.num_actions());
    if q_sum.len() != ns * na || h_sum.len() != ns || v_sum.len() != ns {
        return Err(Error::ShapeMismatch("aggregated gap sums".into()));
    }
    let reg = model.regularizer();
    let kf = k as f64;
    Ok((0..ns)
        .map(|s| {
            let q = &q_sum[s * na..(s + 1) * na];
            match reg.kind {
                RegularizerKind::None => q.iter().map(|&qa| v_sum[s] - qa).fold(f64::NEG_INFINITY, f64::max) / kf,
                RegularizerKind::ScaledNegativeEntropy => {
                    let tk = reg.tau * kf;
                    (tk * log_sum_exp(q.iter().map(|&qa| -qa / tk)) + v_sum[s] + h_sum[s]) / kf
                }
            }
        })
        .collect())
}

/// `κ^π_s`: the `(1−γ)`-normalised discounted visitation started at `s`.
pub fn visitation_from_state(model: &MdpModel, policy: &Policy, start: usize) -> Result<Vec<f64>> {
    model.check_policy(policy)?;
    let system = model.bellman_system(policy);
    let mut rhs = vec![0.0; model.num_states()];
    rhs[start] = 1.0 - model.gamma();
    system.solve_transpose(&rhs)
}

/// `κ^π_ρ = Σ_q ρ(q) κ^π_q`, a distribution over states.
pub fn visitation_from_distribution(model: &MdpModel, policy: &Policy, rho: &[f64]) -> Result<Vec<f64>> {
    let eta = weighted_visitation(model, policy, rho)?;
    let scale = 1.0 - model.gamma();
    Ok(eta.into_iter().map(|x| x * scale).collect())
}

/// `η^π_ρ(s) = (1−γ)^{-1} Σ_q ρ(q) κ^π_q(s)`, solved as `(I−γP_π)^T η = ρ`.
pub fn weighted_visitation(model: &MdpModel, policy: &Policy, rho: &[f64]) -> Result<Vec<f64>> {
    model.check_policy(policy)?;
    check_distribution(model, rho)?;
    model.bellman_system(policy).solve_transpose(rho)
}

pub(crate) fn check_distribution(model: &MdpModel, rho: &[f64]) -> Result<()> {
    if rho.len() != model.num_states() {
        return Err(Error::ShapeMismatch(format!(
            "distribution has {} entries, expected {}",
            rho.len(),
            model.num_states()
        )));
    }
    check_simplex(rho, SIMPLEX_TOL)
}

/// Uniform distribution over states.
pub fn uniform_distribution(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

/// State-action occupancy `x(a,s) = η^π_ρ(s) π(a|s)`, stored `[A][S]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyMeasure {
    pub num_states: usize,
    pub num_actions: usize,
    /// Row-major `[A][S]`.
    pub x: Vec<f64>,
}

impl OccupancyMeasure {
    pub fn get(&self, a: usize, s: usize) -> f64 {
        self.x[a * self.num_states + s]
    }

    /// `Σ_a x(a,s)`.
    pub fn state_mass(&self) -> Vec<f64> {
        (0..self.num_states)
            .map(|s| (0..self.num_actions).map(|a| self.get(a, s)).sum())
            .collect()
    }

    /// `‖(Î − γP)^T x − ρ‖_∞`, evaluated entry-wise from the balance equations.
    pub fn balance_residual(&self, model: &MdpModel, rho: &[f64]) -> f64 {
        let ns = self.num_states;
        let mut inflow = vec![0.0; ns];
        for sp in 0..ns {
            for a in 0..self.num_actions {
                let x = self.get(a, sp);
                for &(next, p) in model.transitions(sp, a) {
                    inflow[next] += p * x;
                }
            }
        }
        let mass = self.state_mass();
        (0..ns)
            .map(|s| (mass[s] - model.gamma() * inflow[s] - rho[s]).abs())
            .fold(0.0, f64::max)
    }
}

pub fn occupancy(model: &MdpModel, policy: &Policy, rho: &[f64]) -> Result<OccupancyMeasure> {
    let eta = weighted_visitation(model, policy, rho)?;
    let (ns, na) = (model.num_states(), model.num_actions());
    let mut x = vec![0.0; ns * na];
    for s in 0..ns {
        for (a, &p) in policy.row(s).iter().enumerate() {
            x[a * ns + s] = eta[s] * p;
        }
    }
    Ok(OccupancyMeasure {
        num_states: ns,
        num_actions: na,
        x,
    })
}

/// Dual function value `⟨V^π, ρ⟩ − Σ_s η^{π'}_ρ(s) g^π(s)` where `π'` is
/// `weight_policy` and `(value_vector, gap_of_value_owner)` belong to `π`.
pub fn dual_value(
    model: &MdpModel,
    rho: &[f64],
    weight_policy: &Policy,
    value_vector: &[f64],
    gap_of_value_owner: &[f64],
) -> Result<f64> {
    if value_vector.len() != model.num_states() || gap_of_value_owner.len() != model.num_states() {
        return Err(Error::ShapeMismatch("dual value inputs".into()));
    }
    let eta = weighted_visitation(model, weight_policy, rho)?;
    let vr: f64 = value_vector.iter().zip(rho).map(|(v, r)| v * r).sum();
    let eg: f64 = eta.iter().zip(gap_of_value_owner).map(|(e, g)| e * g).sum();
    Ok(vr - eg)
}

/// `f_ρ(π)` through the occupancy identity `Σ_s [c(s,π) + h^π(s)] η^π_ρ(s)`.
pub fn objective_via_occupancy(model: &MdpModel, policy: &Policy, rho: &[f64]) -> Result<f64> {
    let eta = weighted_visitation(model, policy, rho)?;
    let h = policy_regularizer(model, policy);
    Ok((0..model.num_states())
        .map(|s| {
            let c: f64 = policy.row(s).iter().zip(model.cost_row(s)).map(|(p, c)| p * c).sum();
            (c + h[s]) * eta[s]
        })
        .sum())
}
