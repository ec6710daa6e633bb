use std::path::PathBuf;

use clap::Args;
use pmd_core::certify::{online_report, NoiseParams};
use pmd_core::envs::GenerativeSim;
use pmd_core::mdp::uniform_distribution;
use pmd_core::pmd::default_distance_bound;
use pmd_core::spmd::{default_bias_target, horizon_for_bias, spmd_run_observed};
use pmd_core::{CertificateReport, MdpModel, Policy, Regularizer, SamplerConfig, SpmdConfig, StepSchedule};
use serde::Serialize;
use serde_json::json;

use crate::env::EnvArgs;
use crate::output::{num, opt_num, OutDir};
use crate::solve::GeometryArg;
use crate::{CliError, EXIT_ZERO_MU_H};

#[derive(Args, Debug, Clone, Serialize)]
pub struct SamplerArgs {
    /// Rollouts per (s,a); 0 uses the exact Q table.
    #[arg(long, default_value_t = 2)]
    pub rollouts: usize,
    /// Rollout length H; defaults to the bias target 1e-6·c_max/(1−γ).
    #[arg(long)]
    pub horizon: Option<usize>,
}

impl SamplerArgs {
    pub fn config(&self, model: &MdpModel, seed: u64) -> Result<SamplerConfig, CliError> {
        let horizon = match self.horizon {
            Some(0) => return Err(CliError::usage("--horizon must be at least 1")),
            Some(h) => h,
            None => horizon_for_bias(model, default_bias_target(model))?,
        };
        Ok(SamplerConfig::new(self.rollouts, horizon, seed))
    }
}

#[derive(Args, Debug, Serialize)]
pub struct SpmdArgs {
    #[command(flatten)]
    pub env: EnvArgs,
    /// Iteration count k.
    #[arg(long, default_value_t = 400)]
    pub k: usize,
    /// Step constant for η = α/√k.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Entropy weight; switches to η_t = 1/(μ_h(t+1)).
    #[arg(long)]
    pub mu_h: Option<f64>,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Stream estimates into the online certificate.
    #[arg(long)]
    pub certify: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Trace row and certificate snapshot period.
    #[arg(long, default_value_t = 1)]
    pub trace_every: usize,
    #[arg(long, value_enum, default_value = "kl")]
    pub geometry: GeometryArg,
    /// Evaluate every iterate exactly and fill the max_gap_exact column.
    #[arg(long)]
    pub exact_gaps: bool,
}

pub const TRACE_HEADER: [&str; 6] = [
    "iter",
    "eta",
    "max_gap_exact",
    "est_mean_value",
    "wall_ms",
    "samples_used",
];

pub fn run(args: &SpmdArgs) -> Result<(), CliError> {
    if args.trace_every == 0 {
        return Err(CliError::usage("--trace-every must be at least 1"));
    }
    let schedule = match args.mu_h {
        Some(0.0) => {
            return Err(CliError {
                code: EXIT_ZERO_MU_H,
                message: "--mu-h 0 leaves the inverse-strong step 1/(μ_h(t+1)) undefined".into(),
            })
        }
        Some(mu) => StepSchedule::inverse_strong(mu)?,
        None => StepSchedule::sqrt_horizon(args.alpha, args.k)?,
    };
    let out = OutDir::new(args.out.as_deref())?;
    out.write_manifest("spmd", Some(args.seed), args)?;
    let mut model = args.env.build(args.seed)?;
    if let Some(mu) = args.mu_h {
        model = model.with_regularizer(Regularizer::entropy(mu))?;
    }
    let sampler = args.sampler.config(&model, args.seed)?;
    let mut config = SpmdConfig::new(args.k, schedule, args.geometry.into(), sampler);
    config.certify = args.certify;
    config.trace_every = args.trace_every;
    config.exact_gaps = args.exact_gaps;

    let sim = GenerativeSim::new(model.clone());
    let rho = uniform_distribution(model.num_states());
    let noise = NoiseParams::analytic(&model, &sampler);
    let dbar0 = default_distance_bound(config.geometry, model.num_actions());
    let mut snapshot_err = None;
    let mut last_report: Option<CertificateReport> = None;
    let pi0 = Policy::uniform(model.num_states(), model.num_actions());
    let outcome = spmd_run_observed(&sim, &pi0, &config, |view| {
        let k = view.iter + 1;
        let Some(acc) = view.accumulator else { return };
        if k % args.trace_every != 0 && k != args.k {
            return;
        }
        let report = match online_report(acc, &model, &rho, &noise, dbar0, None) {
            Ok(r) => r,
            Err(e) => {
                snapshot_err.get_or_insert(CliError::from(e));
                return;
            }
        };
        if let Err(e) = out.write_json(&format!("certificate_{k}.json"), &report) {
            snapshot_err.get_or_insert(e);
        }
        last_report = Some(report);
    })?;
    if let Some(e) = snapshot_err {
        return Err(e);
    }

    let rows: Vec<Vec<String>> = outcome
        .trace
        .iter()
        .map(|r| {
            vec![
                r.iter.to_string(),
                num(r.eta),
                opt_num(r.max_gap_exact),
                num(r.est_mean_value),
                format!("{:.3}", r.wall_ms),
                r.samples_used.to_string(),
            ]
        })
        .collect();
    out.write_csv("trace.csv", &TRACE_HEADER, &rows)?;
    out.write_json("final_policy.json", &outcome.policy)?;
    if let Some(p) = &outcome.last_iterate {
        out.write_json("last_iterate.json", p)?;
    }
    if let Some(acc) = &outcome.accumulator {
        out.write_json("online_sums.json", acc)?;
    }
    if let Some(r) = &last_report {
        out.write_json("certificate.json", r)?;
    }
    let summary = json!({
        "env": args.env.env.to_string(),
        "gamma": model.gamma(),
        "k": args.k,
        "termination": "max_iters",
        "rollouts": sampler.rollouts_per_pair,
        "horizon": sampler.horizon,
        "bias_bound": if sampler.is_exact() { 0.0 } else { sampler.bias_bound(&model) },
        "samples_used": outcome.samples_used,
        "vbar_rho": last_report.as_ref().map(|r| r.vbar_rho()),
        "lb_adaptive": last_report.as_ref().map(|r| r.lb_adaptive),
        "lb_universal_rho": last_report.as_ref().map(|r| r.lb_universal_rho()),
        "lb_worst_case_rho": last_report.as_ref().map(|r| r.lb_worst_case_rho()),
    });
    out.write_json("summary.json", &summary)?;
    match &last_report {
        Some(r) => println!(
            "spmd on {}: {} iterations, ρ-averaged value estimate {:.6}, adaptive lower bound {:.6}",
            args.env.env,
            args.k,
            r.vbar_rho(),
            r.lb_adaptive
        ),
        None => println!("spmd on {}: {} iterations", args.env.env, args.k),
    }
    Ok(())
}
