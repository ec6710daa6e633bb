//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.

#![allow(clippy::needless_range_loop)]

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::*;
use pmd_core::bregman::{project_simplex, prox_step};
use pmd_core::certify::{offline_certificate, online_report, NoiseParams};
use pmd_core::envs::{build_gridworld, build_taxi, random_rational_mdp, GenerativeSim, GridWorldConfig};
use pmd_core::mdp::{advantage, evaluate, occupancy, uniform_distribution};
use pmd_core::pmd::{
    epoch_length, gap_constant, greedy, pmd_run, pmd_run_observed, policy_iteration, rounds_per_refresh,
};
use pmd_core::spmd::{spmd_run, spmd_run_observed};
use pmd_core::{
    Geometry, MdpModel, OnlineAccumulator, Policy, Regularizer, RunConfig, SamplerConfig, SpmdConfig, Step,
    StepSchedule,
};
use rand::Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn uniform(model: &MdpModel) -> Policy {
    Policy::uniform(model.num_states(), model.num_actions())
}

fn max_excess(v: &[f64], vstar: &[f64]) -> f64 {
    v.iter()
        .zip(vstar)
        .map(|(a, b)| a - b)
        .fold(f64::NEG_INFINITY, f64::max)
}

fn sandwich() -> Verdict {
    let mut worst_lower = f64::INFINITY;
    let mut worst_upper = f64::INFINITY;
    for seed in 0..100u64 {
        let mut r = rng(&[seed, 0xA1]);
        let ns = r.random_range(1..=20);
        let na = r.random_range(1..=5);
        let gamma = [0.8, 0.9, 0.95][seed as usize % 3];
        let model = random_instance(seed, ns, na, gamma);
        let vstar = vi_oracle(&model, 1e-12);
        for _ in 0..200 {
            let pi = random_policy(&mut r, ns, na);
            let e = evaluate(&model, &pi).unwrap();
            let bound = e.max_gap() / (1.0 - gamma);
            for s in 0..ns {
                let excess = e.values[s] - vstar[s];
                worst_lower = worst_lower.min(excess - e.gap[s]);
                worst_upper = worst_upper.min(bound - excess);
            }
        }
    }
    verdict(
        worst_lower >= -1e-8 && worst_upper >= -1e-8,
        format!("min slack lower {worst_lower:.3e}, upper {worst_upper:.3e}"),
    )
}

fn identities() -> Verdict {
    let mut pd_residual = 0.0f64;
    let mut balance = 0.0f64;
    for seed in 0..100u64 {
        let mut r = rng(&[seed, 0xA2]);
        let ns = r.random_range(2..=12);
        let na = r.random_range(1..=4);
        let base = random_instance(seed, ns, na, 0.9);
        let model = if seed % 2 == 0 {
            base
        } else {
            base.with_regularizer(Regularizer::entropy(0.2)).unwrap()
        };
        let pi = random_policy(&mut r, ns, na);
        let pi2 = random_policy(&mut r, ns, na);
        let e = evaluate(&model, &pi).unwrap();
        let e2 = evaluate(&model, &pi2).unwrap();
        let adv: Vec<f64> = (0..ns)
            .map(|q| advantage(&e, &model, &pi, q, pi2.row(q)).unwrap())
            .collect();
        for s in 0..ns {
            let kappa = visitation_series(&model, &pi2, s);
            let rhs = kappa.iter().zip(&adv).map(|(k, a)| k * a).sum::<f64>() / (1.0 - model.gamma());
            pd_residual = pd_residual.max((e2.values[s] - e.values[s] - rhs).abs());
        }
        let rho = random_row(&mut r, ns);
        balance = balance.max(occupancy(&model, &pi, &rho).unwrap().balance_residual(&model, &rho));
    }
    verdict(
        pd_residual <= 1e-8 && balance <= 1e-8,
        format!("performance difference {pd_residual:.2e}, balance {balance:.2e}"),
    )
}

fn prox_objective(p: &[f64], pi: &[f64], q: &[f64], eta: f64, geom: Geometry, tau: f64) -> f64 {
    let lin: f64 = q.iter().zip(p).map(|(a, b)| a * b).sum();
    let dist = match geom {
        Geometry::Kl => kl(p, pi),
        Geometry::EuclideanSquared => half_sq(p, pi),
    };
    eta * (lin + tau * neg_entropy(p)) + dist
}

fn prox() -> Verdict {
    let mut r = rng(&[0xA3]);
    let pairings = [
        (Geometry::Kl, 0.0),
        (Geometry::Kl, 0.1),
        (Geometry::EuclideanSquared, 0.0),
    ];
    let mut grid_err = 0.0f64;
    let mut proj_err = 0.0f64;
    for case in 0..1000 {
        let n = r.random_range(1..=6);
        let v: Vec<f64> = (0..n).map(|_| r.random_range(-2.0..2.0)).collect();
        proj_err = proj_err.max(sup_diff(&project_simplex(&v).unwrap(), &projection_by_enumeration(&v)));

        let (geom, tau) = pairings[case % 3];
        let pi = match geom {
            Geometry::Kl => random_interior_row(&mut r, n),
            Geometry::EuclideanSquared => random_row(&mut r, n),
        };
        let q: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
        let eta = 10f64.powf(r.random_range(-2.0..1.0));
        let reg = if tau > 0.0 {
            Regularizer::entropy(tau)
        } else {
            Regularizer::none()
        };
        let p = prox_step(&pi, &q, Step::Finite(eta), geom, &reg).unwrap();
        let oracle = grid_minimize(|x| prox_objective(x, &pi, &q, eta, geom, tau), &pi);
        grid_err = grid_err.max(sup_diff(&p, &oracle));
    }
    verdict(
        grid_err <= 1e-5 && proj_err <= 1e-10,
        format!("prox vs grid {grid_err:.2e}, projection vs enumeration {proj_err:.2e}"),
    )
}

/// Checks the epoch envelope and monotonicity for one model; returns the
/// worst envelope ratio and worst monotonicity violation.
fn linear_rate_on(model: &MdpModel) -> (f64, f64) {
    let vstar = policy_iteration(model).unwrap().eval.values;
    let e0 = evaluate(model, &uniform(model)).unwrap();
    let delta0 = gap_constant(model.gamma(), &e0);
    let n = epoch_length(model.gamma());
    let schedule = StepSchedule::scheduled_geometric(model, &e0, 2.0, None).unwrap();
    let mut config = RunConfig::new(schedule, Geometry::EuclideanSquared, model.gamma());
    config.max_iters = 40 * n;
    config.gap_tolerance = 0.0;
    config.terminate_on_greedy_match = false;
    let mut path = Vec::new();
    pmd_run_observed(model, &uniform(model), &config, |v| path.push(v.eval.values.clone())).unwrap();
    let mut ratio = 0.0f64;
    for (t, v) in path.iter().enumerate() {
        let excess = max_excess(v, &vstar);
        let envelope = delta0 * 0.5f64.powi((t / n) as i32);
        ratio = ratio.max(excess / envelope);
        if excess < 1e-10 {
            break;
        }
    }
    let rise = path
        .windows(2)
        .flat_map(|w| w[1].iter().zip(&w[0]).map(|(b, a)| b - a))
        .fold(f64::NEG_INFINITY, f64::max);
    (ratio, rise)
}

fn linear_rate() -> Verdict {
    let mut models = vec![build_gridworld(&GridWorldConfig::default()).unwrap()];
    models.extend((0..20).map(|seed| random_instance(seed, 20, 4, 0.9)));
    let (mut ratio, mut rise) = (0.0f64, f64::NEG_INFINITY);
    for model in &models {
        let (r, d) = linear_rate_on(model);
        ratio = ratio.max(r);
        rise = rise.max(d);
    }
    verdict(
        ratio <= 1.0 + 1e-6 && rise <= 1e-8,
        format!("worst excess / envelope {ratio:.6}, largest value increase {rise:.2e}"),
    )
}

/// Smallest margin between the best and second-best action under Q*.
fn optimal_margin(model: &MdpModel, qstar: &[f64]) -> f64 {
    let na = model.num_actions();
    (0..model.num_states())
        .map(|s| {
            let mut row = qstar[s * na..(s + 1) * na].to_vec();
            row.sort_by(f64::total_cmp);
            if na > 1 {
                row[1] - row[0]
            } else {
                f64::INFINITY
            }
        })
        .fold(f64::INFINITY, f64::min)
}

fn strongly_polynomial() -> Verdict {
    let (mut matched, mut checked, mut skipped) = (0, 0, 0);
    let mut seed = 0u64;
    while checked < 20 {
        let mut r = rng(&[seed, 0xA5]);
        let (ns, na) = (r.random_range(2..=4), r.random_range(2..=3));
        let model = random_rational_mdp(seed, ns, na, 0.8, 8, 5).unwrap();
        seed += 1;
        let opt = policy_iteration(&model).unwrap();
        let e0 = evaluate(&model, &uniform(&model)).unwrap();
        let Ok(schedule) = StepSchedule::strongly_poly(&model, &e0) else {
            skipped += 1;
            continue;
        };
        if optimal_margin(&model, &opt.eval.qvalues) <= 1e-9 {
            skipped += 1;
            continue;
        }
        let budget = ns * (na - 1) * epoch_length(0.8) * rounds_per_refresh(ns, na, 0.8);
        let mut config = RunConfig::new(schedule, Geometry::EuclideanSquared, 0.8);
        config.max_iters = budget;
        config.gap_tolerance = 0.0;
        config.terminate_on_greedy_match = false;
        // A run that certifies a zero gap early stops there; its iterate is
        // then the unique optimum and would stay fixed up to the budget.
        let mut at_budget = None;
        pmd_run_observed(&model, &uniform(&model), &config, |v| at_budget = Some(greedy(v.eval))).unwrap();
        checked += 1;
        if at_budget.as_ref() == Some(&opt.policy) {
            matched += 1;
        }
    }
    verdict(
        matched == checked,
        format!("{matched}/{checked} greedy policies equal the optimum ({skipped} tied or optimal at start skipped)"),
    )
}

fn table1_trend() -> Verdict {
    let taxi_pi = policy_iteration(&build_taxi(0.9).unwrap()).unwrap().iterations;
    let model = build_gridworld(&GridWorldConfig {
        gamma: 0.999,
        ..Default::default()
    })
    .unwrap();
    let pi_iters = policy_iteration(&model).unwrap().iterations;
    let e0 = evaluate(&model, &uniform(&model)).unwrap();
    let refresh = epoch_length(0.999) * rounds_per_refresh(model.num_states(), model.num_actions(), 0.999);
    let run = |schedule| {
        let mut config = RunConfig::new(schedule, Geometry::EuclideanSquared, 0.999);
        config.max_iters = 200_000;
        pmd_run(&model, &uniform(&model), &config).unwrap().iterations
    };
    let euc = run(StepSchedule::scheduled_geometric(&model, &e0, 2.0, Some(refresh)).unwrap());
    let agg = run(StepSchedule::strongly_poly(&model, &e0).unwrap());
    let pass = (12..=20).contains(&taxi_pi) && euc >= 50 * agg && agg <= 5 * pi_iters;
    verdict(
        pass,
        format!("taxi PI {taxi_pi}; gridworld γ=0.999: PMD(Euc) {euc}, PMD(Euc-Agg) {agg}, PI {pi_iters}"),
    )
}

const SNAPSHOTS: [usize; 3] = [100, 200, 400];

/// Everything criteria 7 to 10 need from one SPMD run.
struct SpmdStudy {
    /// Running average of `max_s(V^{π_t} − V*)` for `k' = 1..=k`.
    aggregate_gap: Vec<f64>,
    /// `max_s|V̄ − V*ᵏ|` and `max_s|G − G̃|` at each snapshot.
    value_err: Vec<f64>,
    gap_err: Vec<f64>,
    adaptive_below_fstar: bool,
    adaptive_above_universal: bool,
    online_ub_err: f64,
    offline_ub_err: f64,
}

fn spmd_study(seed: u64, alpha: f64) -> SpmdStudy {
    let k = 400;
    let model = build_gridworld(&GridWorldConfig {
        seed,
        ..Default::default()
    })
    .unwrap();
    let ns = model.num_states();
    let vstar = vi_oracle(&model, 1e-12);
    let rho = uniform_distribution(ns);
    let fstar = rho.iter().zip(&vstar).map(|(a, b)| a * b).sum::<f64>();
    let sim = GenerativeSim::new(model.clone());
    let sampler = SamplerConfig::with_default_horizon(&model, 2, seed).unwrap();
    let noise = NoiseParams::analytic(&model, &sampler);
    let dbar0 = 4f64.ln();
    let config = SpmdConfig::new(k, StepSchedule::sqrt_horizon(alpha, k).unwrap(), Geometry::Kl, sampler);

    let mut exact = OnlineAccumulator::for_model(&model);
    let mut excess_sum = 0.0;
    let mut study = SpmdStudy {
        aggregate_gap: Vec::with_capacity(k),
        value_err: Vec::new(),
        gap_err: Vec::new(),
        adaptive_below_fstar: true,
        adaptive_above_universal: true,
        online_ub_err: 0.0,
        offline_ub_err: 0.0,
    };
    let run = spmd_run_observed(&sim, &uniform(&model), &config, |v| {
        let e = evaluate(&model, v.policy).unwrap();
        exact.accumulate(&e.qvalues, v.policy, &model).unwrap();
        excess_sum += max_excess(&e.values, &vstar);
        study.aggregate_gap.push(excess_sum / exact.k as f64);
        let acc = v.accumulator.expect("certification on");
        let report = online_report(acc, &model, &rho, &noise, dbar0, None).unwrap();
        study.adaptive_above_universal &= report.lb_adaptive >= report.lb_universal_rho();
        if SNAPSHOTS.contains(&acc.k) {
            study.adaptive_below_fstar &= report.lb_adaptive <= fstar;
            study
                .value_err
                .push(sup_diff(&acc.vbar().unwrap(), &exact.vbar().unwrap()));
            study
                .gap_err
                .push(sup_diff(&acc.gtilde(&model).unwrap(), &exact.gtilde(&model).unwrap()));
        }
    })
    .unwrap();

    let acc = run.accumulator.expect("certification on");
    let truth = evaluate(&model, &run.policy).unwrap().weighted_value(&rho);
    let report = online_report(&acc, &model, &rho, &noise, dbar0, None).unwrap();
    study.online_ub_err = (report.vbar_rho() - truth).abs();
    let mut offline = sampler;
    offline.seed = seed ^ 0x0FF1_1E5E_ED00_0000;
    let cert = offline_certificate(&sim, &run.policy, 50, &offline, &rho, &noise, dbar0, Some(&acc)).unwrap();
    study.offline_ub_err = (cert.ub_rho - truth).abs();
    study
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for x in xs {
        s += x;
        n += 1;
    }
    s / n as f64
}

/// Slope of ln(mean aggregate gap) against ln k' on a log-spaced grid of
/// `k'` in [50, 400].
fn aggregate_slope(studies: &[SpmdStudy]) -> f64 {
    let ks: Vec<usize> = (0..=24)
        .map(|j| (50.0 * 2f64.powf(j as f64 / 8.0)).round() as usize)
        .collect();
    let xs: Vec<f64> = ks.iter().map(|&k| (k as f64).ln()).collect();
    let ys: Vec<f64> = ks
        .iter()
        .map(|&k| mean(studies.iter().map(|s| s.aggregate_gap[k - 1])).ln())
        .collect();
    slope(&xs, &ys)
}

fn stochastic_criteria() -> Vec<(&'static str, Verdict)> {
    let alphas = [0.5, 1.0, 2.0];
    let runs: Vec<Vec<SpmdStudy>> = alphas
        .iter()
        .map(|&alpha| (0..10).map(|seed| spmd_study(seed, alpha)).collect())
        .collect();
    let final_gap = |studies: &[SpmdStudy]| mean(studies.iter().map(|s| s.aggregate_gap[399]));
    let best = (0..alphas.len())
        .min_by(|&a, &b| final_gap(&runs[a]).total_cmp(&final_gap(&runs[b])))
        .expect("nonempty");
    let studies = &runs[best];

    let s = aggregate_slope(studies);
    let c7 = verdict(
        (-0.9..=-0.25).contains(&s),
        format!(
            "α={} slope {s:.3} (mean gap at k=400 {:.4})",
            alphas[best],
            final_gap(studies)
        ),
    );

    let v_ratio = mean(studies.iter().map(|s| s.value_err[0])) / mean(studies.iter().map(|s| s.value_err[2]));
    let g_ratio = mean(studies.iter().map(|s| s.gap_err[0])) / mean(studies.iter().map(|s| s.gap_err[2]));
    let c8 = verdict(
        (1.3..=3.1).contains(&v_ratio) && (1.3..=3.1).contains(&g_ratio),
        format!("k=100→400 shrink factors: value {v_ratio:.3}, gap {g_ratio:.3}"),
    );

    let ordered = runs.iter().flatten().all(|s| s.adaptive_above_universal);
    let below = studies.iter().filter(|s| s.adaptive_below_fstar).count();
    let c9 = verdict(
        ordered && below >= 9,
        format!("adaptive ≥ universal on every report: {ordered}; adaptive ≤ f* at every snapshot on {below}/10 seeds"),
    );

    let online = mean(studies.iter().map(|s| s.online_ub_err));
    let offline = mean(studies.iter().map(|s| s.offline_ub_err));
    let c10 = verdict(
        offline < online,
        format!("mean ub error: offline N=50 {offline:.4}, online {online:.4}"),
    );
    vec![
        ("SPMD sublinear trend", c7),
        ("validation consistency", c8),
        ("lower-bound behaviour", c9),
        ("offline vs online", c10),
    ]
}

fn determinism() -> Verdict {
    let grid = || {
        build_gridworld(&GridWorldConfig {
            width: 8,
            height: 8,
            num_traps: 5,
            seed: 3,
            ..Default::default()
        })
    };
    let model = grid().unwrap();
    let same_model = model == grid().unwrap();
    let sim = GenerativeSim::new(model.clone());
    let sampler = SamplerConfig::with_default_horizon(&model, 2, 11).unwrap();
    let config = SpmdConfig::new(40, StepSchedule::sqrt_horizon(1.0, 40).unwrap(), Geometry::Kl, sampler);
    let spmd = || {
        let out = spmd_run(&sim, &uniform(&model), &config).unwrap();
        let trace: Vec<_> = out
            .trace
            .iter()
            .map(|r| (r.iter, r.eta, r.est_mean_value, r.samples_used))
            .collect();
        (out.policy, out.accumulator, trace)
    };
    let same_spmd = spmd() == spmd();
    let rho = uniform_distribution(model.num_states());
    let noise = NoiseParams::analytic(&model, &sampler);
    let pi = uniform(&model);
    let cert = || offline_certificate(&sim, &pi, 20, &sampler, &rho, &noise, 4f64.ln(), None).unwrap();
    let same_cert = cert().report.to_json() == cert().report.to_json();
    let e0 = evaluate(&model, &pi).unwrap();
    let pmd = || {
        let config = RunConfig::new(
            StepSchedule::strongly_poly(&model, &e0).unwrap(),
            Geometry::Kl,
            model.gamma(),
        );
        let out = pmd_run(&model, &pi, &config).unwrap();
        let trace: Vec<_> = out
            .trace
            .iter()
            .map(|r| (r.iter, r.eta, r.max_gap, r.mean_value))
            .collect();
        (out.solution, out.iterations, trace)
    };
    let same_pmd = pmd() == pmd();
    verdict(
        same_model && same_spmd && same_cert && same_pmd,
        format!("model {same_model}, spmd {same_spmd}, offline certificate {same_cert}, pmd {same_pmd}"),
    )
}

fn main() -> ExitCode {
    let mut failures = 0;
    let mut report = |id: usize, name: &str, v: Verdict, secs: f64| {
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("{tag} [{id:>2}] {name}: {} ({secs:.1} s)", v.detail);
        failures += usize::from(!v.pass);
    };
    type Check = (usize, &'static str, fn() -> Verdict);
    let singles: [Check; 6] = [
        (1, "sandwich bounds", sandwich),
        (2, "performance difference and occupancy balance", identities),
        (3, "prox and projection", prox),
        (4, "deterministic linear rate", linear_rate),
        (5, "strongly-polynomial termination", strongly_polynomial),
        (6, "iteration-count trend", table1_trend),
    ];
    for (id, name, check) in singles {
        let start = Instant::now();
        let v = check();
        report(id, name, v, start.elapsed().as_secs_f64());
    }
    let start = Instant::now();
    let shared = stochastic_criteria();
    let secs = start.elapsed().as_secs_f64();
    for (i, (name, v)) in shared.into_iter().enumerate() {
        report(7 + i, name, v, secs);
    }
    let start = Instant::now();
    let v = determinism();
    report(11, "determinism", v, start.elapsed().as_secs_f64());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
