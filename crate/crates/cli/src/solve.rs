use std::path::PathBuf;

use clap::{Args, ValueEnum};
use pmd_core::mdp::{evaluate, Policy};
use pmd_core::pmd::{
    default_distance_bound, default_gap_tolerance, epoch_length, greedy, pmd_run, policy_iteration, rounds_per_refresh,
    RunConfig, StepSchedule, Termination,
};
use pmd_core::{Geometry, MdpModel};
use serde::Serialize;
use serde_json::json;

use crate::env::EnvArgs;
use crate::output::{num, opt_num, OutDir};
use crate::{CliError, EXIT_NOT_CONVERGED};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// Euclidean PMD, step 4^⌊t/N⌋·D̄₀/Δ₀.
    PmdEuc,
    /// Euclidean PMD, gap-refreshed step 2^(t+1)/Δ.
    PmdEucAgg,
    /// KL PMD with the gap-refreshed step.
    PmdKlAgg,
    /// PMD with the fixed step α/√k for exactly k iterations.
    PmdSqrt,
    /// Howard policy iteration.
    Pi,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::PmdEuc => "pmd-euc",
            Algorithm::PmdEucAgg => "pmd-euc-agg",
            Algorithm::PmdKlAgg => "pmd-kl-agg",
            Algorithm::PmdSqrt => "pmd-sqrt",
            Algorithm::Pi => "pi",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryArg {
    Kl,
    Euclidean,
}

impl From<GeometryArg> for Geometry {
    fn from(g: GeometryArg) -> Self {
        match g {
            GeometryArg::Kl => Geometry::Kl,
            GeometryArg::Euclidean => Geometry::EuclideanSquared,
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct SolveArgs {
    #[command(flatten)]
    pub env: EnvArgs,
    #[arg(long, value_enum)]
    pub alg: Algorithm,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 100_000)]
    pub max_iters: usize,
    /// Stop once the certified gap is at most this; default 1e-14/(1−γ).
    #[arg(long)]
    pub gap_tol: Option<f64>,
    /// Check the final greedy policy against policy iteration.
    #[arg(long)]
    pub verify: bool,
    #[arg(long, default_value_t = 1)]
    pub trace_every: usize,
    /// Step constant α for pmd-sqrt.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Iteration budget k for pmd-sqrt.
    #[arg(long)]
    pub k: Option<usize>,
    /// Geometry for pmd-sqrt.
    #[arg(long, value_enum, default_value = "kl")]
    pub geometry: GeometryArg,
}

pub struct SolveOutcome {
    pub iterations: usize,
    pub reason: Termination,
    pub policy: Policy,
    pub greedy: Policy,
    pub max_gap: f64,
    pub mean_value: f64,
    pub trace: Vec<Vec<String>>,
}

pub const TRACE_HEADER: [&str; 5] = ["iter", "eta", "max_gap", "mean_value", "wall_ms"];

pub struct SolveOptions {
    pub max_iters: usize,
    pub gap_tol: Option<f64>,
    pub trace_every: usize,
    pub alpha: f64,
    pub k: Option<usize>,
    pub geometry: Geometry,
}

impl SolveOptions {
    pub fn defaults() -> Self {
        Self {
            max_iters: 100_000,
            gap_tol: None,
            trace_every: 1,
            alpha: 1.0,
            k: None,
            geometry: Geometry::Kl,
        }
    }
}

pub fn solve_model(model: &MdpModel, alg: Algorithm, opts: &SolveOptions) -> Result<SolveOutcome, CliError> {
    let gamma = model.gamma();
    if alg == Algorithm::Pi {
        let r = policy_iteration(model)?;
        let row = vec![
            r.iterations.to_string(),
            String::new(),
            num(r.eval.max_gap()),
            num(r.eval.mean_value()),
            "0".to_string(),
        ];
        return Ok(SolveOutcome {
            iterations: r.iterations,
            reason: Termination::GreedyMatch,
            greedy: r.policy.clone(),
            max_gap: r.eval.max_gap(),
            mean_value: r.eval.mean_value(),
            policy: r.policy,
            trace: vec![row],
        });
    }
    let pi0 = Policy::uniform(model.num_states(), model.num_actions());
    let e0 = evaluate(model, &pi0)?;
    let (schedule, geometry, max_iters, greedy_stop) = match alg {
        Algorithm::PmdEuc => {
            let refresh = epoch_length(gamma) * rounds_per_refresh(model.num_states(), model.num_actions(), gamma);
            let dbar0 = default_distance_bound(Geometry::EuclideanSquared, model.num_actions());
            (
                StepSchedule::scheduled_geometric(model, &e0, dbar0, Some(refresh)),
                Geometry::EuclideanSquared,
                opts.max_iters,
                true,
            )
        }
        Algorithm::PmdEucAgg => (
            StepSchedule::strongly_poly(model, &e0),
            Geometry::EuclideanSquared,
            opts.max_iters,
            true,
        ),
        Algorithm::PmdKlAgg => (
            StepSchedule::strongly_poly(model, &e0),
            Geometry::Kl,
            opts.max_iters,
            true,
        ),
        Algorithm::PmdSqrt => {
            let k = opts.k.ok_or_else(|| CliError::usage("pmd-sqrt needs --k"))?;
            (StepSchedule::sqrt_horizon(opts.alpha, k), opts.geometry, k, false)
        }
        Algorithm::Pi => unreachable!(),
    };
    let schedule = match schedule {
        Ok(s) => s,
        // Optimal from the start: the gap constant is zero.
        Err(pmd_core::Error::ZeroInitialGap(_)) => StepSchedule::constant(1.0)?,
        Err(e) => return Err(e.into()),
    };
    let mut config = RunConfig::new(schedule, geometry, gamma);
    config.max_iters = max_iters;
    config.gap_tolerance = opts.gap_tol.unwrap_or_else(|| default_gap_tolerance(gamma));
    config.terminate_on_greedy_match = greedy_stop;
    config.trace_every = opts.trace_every;
    let out = pmd_run(model, &pi0, &config)?;
    let trace = out
        .trace
        .iter()
        .map(|r| {
            vec![
                r.iter.to_string(),
                opt_num(r.eta),
                num(r.max_gap),
                num(r.mean_value),
                format!("{:.3}", r.wall_millis),
            ]
        })
        .collect();
    Ok(SolveOutcome {
        iterations: out.iterations,
        reason: out.reason,
        greedy: greedy(&out.solution_eval),
        max_gap: out.solution_eval.max_gap(),
        mean_value: out.solution_eval.mean_value(),
        policy: out.solution,
        trace,
    })
}

pub fn run(args: &SolveArgs) -> Result<(), CliError> {
    if args.trace_every == 0 {
        return Err(CliError::usage("--trace-every must be at least 1"));
    }
    if args.max_iters == 0 {
        return Err(CliError::usage("--max-iters must be at least 1"));
    }
    let out = OutDir::new(args.out.as_deref())?;
    out.write_manifest("solve", Some(args.seed), args)?;
    let model = args.env.build(args.seed)?;
    let opts = SolveOptions {
        max_iters: args.max_iters,
        gap_tol: args.gap_tol,
        trace_every: args.trace_every,
        alpha: args.alpha,
        k: args.k,
        geometry: args.geometry.into(),
    };
    let result = solve_model(&model, args.alg, &opts)?;

    let verified = if args.verify {
        let opt = policy_iteration(&model)?;
        let ge = evaluate(&model, &result.greedy)?;
        let err = ge
            .values
            .iter()
            .zip(&opt.eval.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        Some(json!({
            "greedy_equals_pi_policy": result.greedy == opt.policy,
            "greedy_value_error": err,
            "optimal": err <= 1e-8 * (1.0 + opt.eval.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))),
        }))
    } else {
        None
    };

    out.write_csv("trace.csv", &TRACE_HEADER, &result.trace)?;
    out.write_json("final_policy.json", &result.policy)?;
    out.write_json("greedy_policy.json", &result.greedy)?;
    let summary = json!({
        "env": args.env.env.to_string(),
        "alg": args.alg.name(),
        "gamma": model.gamma(),
        "num_states": model.num_states(),
        "num_actions": model.num_actions(),
        "iterations": result.iterations,
        "termination": result.reason.as_str(),
        "final_max_gap": result.max_gap,
        "final_mean_value": result.mean_value,
        "verify": verified,
    });
    out.write_json("summary.json", &summary)?;
    println!(
        "{} on {}: {} iterations, termination {}, max gap {:e}",
        args.alg.name(),
        args.env.env,
        result.iterations,
        result.reason.as_str(),
        result.max_gap
    );
    if let Some(v) = &verified {
        println!("verify: {v}");
    }
    let fixed_length = args.alg == Algorithm::PmdSqrt;
    if result.reason == Termination::MaxIters && !fixed_length {
        return Err(CliError {
            code: EXIT_NOT_CONVERGED,
            message: format!("no certificate after {} iterations", result.iterations),
        });
    }
    Ok(())
}
