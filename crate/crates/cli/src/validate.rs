use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use pmd_core::certify::{offline_certificate, NoiseParams};
use pmd_core::envs::GenerativeSim;
use pmd_core::mdp::uniform_distribution;
use pmd_core::pmd::default_distance_bound;
use pmd_core::{Geometry, OnlineAccumulator, Policy};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;

use crate::env::EnvArgs;
use crate::output::OutDir;
use crate::stochastic::SamplerArgs;
use crate::CliError;

#[derive(Args, Debug, Serialize)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub env: EnvArgs,
    /// Policy JSON as written by `solve` or `spmd`.
    #[arg(long)]
    pub policy: PathBuf,
    /// Number of fresh Q estimates N.
    #[arg(long, default_value_t = 50)]
    pub n: usize,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Online sums (`online_sums.json`) to pool into the gap estimate.
    #[arg(long)]
    pub pool: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::invalid_model(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::invalid_model(format!("{}: {e}", path.display())))
}

pub fn run(args: &ValidateArgs) -> Result<(), CliError> {
    if args.n == 0 {
        return Err(CliError::usage("--n must be at least 1"));
    }
    let out = OutDir::new(args.out.as_deref())?;
    out.write_manifest("validate", Some(args.seed), args)?;
    let model = args.env.build(args.seed)?;
    let policy: Policy = read_json(&args.policy)?;
    if policy.num_states() != model.num_states() || policy.num_actions() != model.num_actions() {
        return Err(CliError::invalid_model(format!(
            "policy is {}x{}, model is {}x{}",
            policy.num_states(),
            policy.num_actions(),
            model.num_states(),
            model.num_actions()
        )));
    }
    policy.validate()?;
    let pool: Option<OnlineAccumulator> = args.pool.as_deref().map(read_json).transpose()?;

    let sampler = args.sampler.config(&model, args.seed)?;
    let sim = GenerativeSim::new(model.clone());
    let rho = uniform_distribution(model.num_states());
    let noise = NoiseParams::analytic(&model, &sampler);
    let dbar0 = default_distance_bound(Geometry::Kl, model.num_actions());
    let cert = offline_certificate(&sim, &policy, args.n, &sampler, &rho, &noise, dbar0, pool.as_ref())?;

    let bracket = json!({
        "n_samples": cert.n_samples,
        "pooled_k": cert.pooled_k,
        "lb": cert.lb,
        "ub": cert.ub,
        "lb_rho": cert.lb_rho,
        "ub_rho": cert.ub_rho,
        "vtilde_n": cert.report.vbar,
        "gtilde_n": cert.report.gtilde,
    });
    out.write_json("certificate.json", &cert.report)?;
    out.write_json("bracket.json", &bracket)?;
    out.write_json("offline_sums.json", &cert.sums)?;
    out.write_json(
        "summary.json",
        &json!({
            "env": args.env.env.to_string(),
            "gamma": model.gamma(),
            "n": args.n,
            "rollouts": sampler.rollouts_per_pair,
            "horizon": sampler.horizon,
            "lb_rho": cert.lb_rho,
            "ub_rho": cert.ub_rho,
        }),
    )?;
    println!(
        "offline certificate from {} samples: ρ-averaged bracket [{:.6}, {:.6}]",
        args.n, cert.lb_rho, cert.ub_rho
    );
    Ok(())
}
