use std::path::PathBuf;

use clap::{Args, ValueEnum};
use pmd_core::certify::{offline_certificate, NoiseParams};
use pmd_core::envs::GenerativeSim;
use pmd_core::mdp::{evaluate, uniform_distribution};
use pmd_core::pmd::{default_distance_bound, policy_iteration};
use pmd_core::spmd::spmd_run;
use pmd_core::{Geometry, Policy, SpmdConfig, StepSchedule};
use serde::Serialize;

use crate::env::{EnvArgs, EnvSpec};
use crate::output::{num, OutDir};
use crate::solve::{solve_model, Algorithm, SolveOptions};
use crate::stochastic::SamplerArgs;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Table1,
    Table3,
}

#[derive(Args, Debug, Serialize)]
pub struct BenchArgs {
    #[arg(long, value_enum)]
    pub suite: Suite,
    #[arg(long, default_value_t = 10)]
    pub seeds: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Environments to include (table1).
    #[arg(long, value_delimiter = ',', default_value = "gridworld,taxi")]
    pub envs: Vec<String>,
    /// Discount factors to include (table1).
    #[arg(long, value_delimiter = ',', default_value = "0.9,0.99,0.999")]
    pub gammas: Vec<f64>,
    /// Algorithms to include (table1).
    #[arg(long, value_enum, value_delimiter = ',', default_value = "pmd-euc,pmd-euc-agg,pi")]
    pub algs: Vec<Algorithm>,
    #[arg(long, default_value_t = 100_000)]
    pub max_iters: usize,
    /// SPMD iterations (table3).
    #[arg(long, default_value_t = 400)]
    pub k: usize,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// Offline sample sizes (table3).
    #[arg(long, value_delimiter = ',', default_value = "50,125,250")]
    pub n_offline: Vec<usize>,
}

/// Mean and the half-width `1.96·std/√n` of a normal 95% interval.
pub fn mean_ci(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * var.sqrt() / n.sqrt())
}

pub fn run(args: &BenchArgs) -> Result<(), CliError> {
    if args.seeds == 0 {
        return Err(CliError::usage("--seeds must be at least 1"));
    }
    let out = OutDir::new(args.out.as_deref())?;
    out.write_manifest("bench", None, args)?;
    match args.suite {
        Suite::Table1 => table1(args, &out),
        Suite::Table3 => table3(args, &out),
    }
}

fn table1(args: &BenchArgs, out: &OutDir) -> Result<(), CliError> {
    let envs: Vec<EnvSpec> = args
        .envs
        .iter()
        .map(|e| match e.parse::<EnvSpec>() {
            Ok(EnvSpec::File(_)) | Err(_) => Err(CliError::usage(format!("table1 uses gridworld or taxi, got '{e}'"))),
            Ok(spec) => Ok(spec),
        })
        .collect::<Result<_, _>>()?;
    let opts = SolveOptions {
        max_iters: args.max_iters,
        ..SolveOptions::defaults()
    };
    let mut rows = Vec::new();
    let mut md = String::from("| Alg | Env | γ | least \\| most | mean ± 95% CI |\n|---|---|---|---|---|\n");
    for &alg in &args.algs {
        for env in &envs {
            for &gamma in &args.gammas {
                let mut counts = Vec::new();
                let mut unconverged = 0;
                for seed in 0..args.seeds {
                    let model = EnvArgs::for_env(env.clone(), gamma).build(seed)?;
                    let r = solve_model(&model, alg, &opts)?;
                    if r.reason == pmd_core::Termination::MaxIters {
                        unconverged += 1;
                    }
                    counts.push(r.iterations);
                }
                let least = *counts.iter().min().expect("seeds >= 1");
                let most = *counts.iter().max().expect("seeds >= 1");
                let xs: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
                let (mean, ci) = mean_ci(&xs);
                rows.push(vec![
                    alg.name().to_string(),
                    env.to_string(),
                    num(gamma),
                    least.to_string(),
                    most.to_string(),
                    num(mean),
                    num(ci),
                    unconverged.to_string(),
                ]);
                md += &format!(
                    "| {} | {} | {} | {} \\| {} | {:.1} ± {:.1} |\n",
                    alg.name(),
                    env,
                    gamma,
                    least,
                    most,
                    mean,
                    ci
                );
                eprintln!("{} {} γ={}: {} | {}", alg.name(), env, gamma, least, most);
            }
        }
    }
    out.write_csv(
        "table1.csv",
        &["alg", "env", "gamma", "least", "most", "mean", "ci95", "unconverged"],
        &rows,
    )?;
    out.write_text("table1.md", &md)?;
    print!("{md}");
    Ok(())
}

/// GridWorld: SPMD with online certificates, then offline certificates of
/// the returned policy; errors are measured against exact values.
fn table3(args: &BenchArgs, out: &OutDir) -> Result<(), CliError> {
    let gamma = args.gammas.first().copied().unwrap_or(0.9);
    let mut online_ub = Vec::new();
    let mut online_lb = Vec::new();
    let mut offline_ub = vec![Vec::new(); args.n_offline.len()];
    let mut offline_lb = vec![Vec::new(); args.n_offline.len()];
    for seed in 0..args.seeds {
        let model = EnvArgs::for_env(EnvSpec::Gridworld, gamma).build(seed)?;
        let fstar = policy_iteration(&model)?.eval.mean_value();
        let sampler = args.sampler.config(&model, seed)?;
        let sim = GenerativeSim::new(model.clone());
        let config = SpmdConfig::new(
            args.k,
            StepSchedule::sqrt_horizon(args.alpha, args.k)?,
            Geometry::Kl,
            sampler,
        );
        let pi0 = Policy::uniform(model.num_states(), model.num_actions());
        let run = spmd_run(&sim, &pi0, &config)?;
        let rho = uniform_distribution(model.num_states());
        let noise = NoiseParams::analytic(&model, &sampler);
        let dbar0 = default_distance_bound(Geometry::Kl, model.num_actions());
        let acc = run.accumulator.expect("certify enabled");
        let report = pmd_core::certify::online_report(&acc, &model, &rho, &noise, dbar0, None)?;
        let truth = evaluate(&model, &run.policy)?.mean_value();
        online_ub.push((report.vbar_rho() - truth).abs());
        online_lb.push((report.lb_adaptive - fstar).abs());
        for (i, &n) in args.n_offline.iter().enumerate() {
            let mut offline = sampler;
            offline.seed = seed ^ 0x0FF1_1E5E_ED00_0000;
            let cert = offline_certificate(&sim, &run.policy, n, &offline, &rho, &noise, dbar0, Some(&acc))?;
            offline_ub[i].push((cert.ub_rho - truth).abs());
            offline_lb[i].push((cert.lb_rho - fstar).abs());
        }
        eprintln!("seed {seed}: online ub error {:.4}", online_ub.last().expect("pushed"));
    }
    let header = [
        "estimator",
        "n_offline",
        "ub_err_mean",
        "ub_err_ci95",
        "lb_err_mean",
        "lb_err_ci95",
    ];
    let mut rows = Vec::new();
    let mut md = String::from("| Estimator | N | ub error | lb error |\n|---|---|---|---|\n");
    let mut push = |name: &str, n: String, ub: &[f64], lb: &[f64]| {
        let (um, uc) = mean_ci(ub);
        let (lm, lc) = mean_ci(lb);
        rows.push(vec![name.to_string(), n.clone(), num(um), num(uc), num(lm), num(lc)]);
        md += &format!("| {name} | {n} | {um:.4} ± {uc:.4} | {lm:.4} ± {lc:.4} |\n");
    };
    push("online", String::new(), &online_ub, &online_lb);
    for (i, &n) in args.n_offline.iter().enumerate() {
        push("offline", n.to_string(), &offline_ub[i], &offline_lb[i]);
    }
    out.write_csv("table3.csv", &header, &rows)?;
    out.write_text("table3.md", &md)?;
    print!("{md}");
    Ok(())
}
