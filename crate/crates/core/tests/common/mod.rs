//! Independent reference computations used by the integration and
//! acceptance tests. Nothing here calls the solver paths under test.

#![allow(dead_code, clippy::needless_range_loop)]

use pmd_core::envs::{random_mdp, rng_for, RandomMdpConfig};
use pmd_core::{MdpModel, Policy};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_instance(seed: u64, ns: usize, na: usize, gamma: f64) -> MdpModel {
    let branching = (ns / 2).max(1);
    random_mdp(&RandomMdpConfig {
        seed,
        num_states: ns,
        num_actions: na,
        branching,
        gamma,
        cost_range: (-1.0, 1.0),
    })
    .unwrap()
}

/// A random probability vector; about a third of the time a vertex.
pub fn random_row(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    if rng.random_bool(0.3) {
        let mut p = vec![0.0; n];
        p[rng.random_range(0..n)] = 1.0;
        return p;
    }
    let w: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let t: f64 = w.iter().sum();
    w.into_iter().map(|x| x / t).collect()
}

pub fn random_interior_row(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| 0.05 + rng.random::<f64>()).collect();
    let t: f64 = w.iter().sum();
    w.into_iter().map(|x| x / t).collect()
}

pub fn random_policy(rng: &mut ChaCha8Rng, ns: usize, na: usize) -> Policy {
    Policy::from_rows((0..ns).map(|_| random_row(rng, na)).collect()).unwrap()
}

pub fn rng(keys: &[u64]) -> ChaCha8Rng {
    rng_for(keys)
}

pub fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Jacobi Bellman optimality iteration until the update is at
/// most `tol·(1−γ)/(2γ)`.
pub fn vi_oracle(model: &MdpModel, tol: f64) -> Vec<f64> {
    let (ns, na, g) = (model.num_states(), model.num_actions(), model.gamma());
    let mut v = vec![0.0; ns];
    let stop = tol * (1.0 - g) / (2.0 * g.max(1e-300));
    loop {
        let mut next = vec![0.0; ns];
        for (s, slot) in next.iter_mut().enumerate() {
            let mut best = f64::INFINITY;
            for a in 0..na {
                let ev: f64 = model.transitions(s, a).iter().map(|&(t, p)| p * v[t]).sum();
                best = best.min(model.cost(s, a) + g * ev);
            }
            *slot = best;
        }
        let d = sup_diff(&next, &v);
        v = next;
        if d <= stop || g == 0.0 {
            return v;
        }
    }
}

/// Policy values by fixed-point iteration `V ← c_π + h_π + γ P_π V`.
pub fn series_values(model: &MdpModel, policy: &Policy, h: &[f64], tol: f64) -> Vec<f64> {
    let (ns, na, g) = (model.num_states(), model.num_actions(), model.gamma());
    let mut v = vec![0.0; ns];
    loop {
        let mut next = vec![0.0; ns];
        for s in 0..ns {
            let mut acc = h[s];
            for a in 0..na {
                let p = policy.row(s)[a];
                if p == 0.0 {
                    continue;
                }
                let ev: f64 = model.transitions(s, a).iter().map(|&(t, q)| q * v[t]).sum();
                acc += p * (model.cost(s, a) + g * ev);
            }
            next[s] = acc;
        }
        let d = sup_diff(&next, &v);
        v = next;
        if d <= tol * (1.0 - g) || g == 0.0 {
            return v;
        }
    }
}

/// Truncated series `Σ_{t≤H} (1−γ)γᵗ Pr{s_t = · | s_0 = start}`.
pub fn visitation_series(model: &MdpModel, policy: &Policy, start: usize) -> Vec<f64> {
    let (ns, na, g) = (model.num_states(), model.num_actions(), model.gamma());
    let horizon = if g == 0.0 {
        0
    } else {
        (1e-12f64.ln() / g.ln()).ceil() as usize
    };
    let mut dist = vec![0.0; ns];
    dist[start] = 1.0;
    let mut out = vec![0.0; ns];
    let mut w = 1.0 - g;
    for _ in 0..=horizon {
        for s in 0..ns {
            out[s] += w * dist[s];
        }
        let mut next = vec![0.0; ns];
        for s in 0..ns {
            for a in 0..na {
                let pa = dist[s] * policy.row(s)[a];
                for &(t, q) in model.transitions(s, a) {
                    next[t] += pa * q;
                }
            }
        }
        dist = next;
        w *= g;
    }
    out
}

/// Euclidean projection onto the simplex by enumerating every support set.
pub fn projection_by_enumeration(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << n) {
        let support: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let lam = (support.iter().map(|&i| v[i]).sum::<f64>() - 1.0) / support.len() as f64;
        let mut p = vec![0.0; n];
        let mut feasible = true;
        for &i in &support {
            p[i] = v[i] - lam;
            if p[i] < -1e-15 {
                feasible = false;
            }
            p[i] = p[i].max(0.0);
        }
        if !feasible {
            continue;
        }
        let d: f64 = p.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
            best = Some((d, p));
        }
    }
    best.expect("the full support with clamping is always available").1
}

/// Minimises a convex `f` over the probability simplex by grid search along
/// pairwise exchange lines: a 64-cell grid over the feasible segment, then
/// grids 20x finer around the best point until the spacing is below 1e-13.
/// Pairs are swept until no exchange improves the objective beyond rounding.
pub fn grid_minimize<F: Fn(&[f64]) -> f64>(f: F, start: &[f64]) -> Vec<f64> {
    let n = start.len();
    let mut p = start.to_vec();
    if n == 1 {
        return p;
    }
    for _ in 0..4000 {
        let mut moved = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                // Exchange line: p_i += t, p_j −= t, t ∈ [−p_i, p_j].
                let (lo0, hi0) = (-p[i], p[j]);
                let eval = |t: f64, q: &mut Vec<f64>| {
                    q[i] = (p[i] + t).max(0.0);
                    q[j] = (p[j] - t).max(0.0);
                    f(q)
                };
                let mut q = p.clone();
                let mut best_t = 0.0;
                let f0 = eval(0.0, &mut q);
                let mut best_f = f0;
                let (mut lo, mut hi) = (lo0, hi0);
                let mut spacing = ((hi0 - lo0) / 64.0).max(1e-300);
                loop {
                    let steps = ((hi - lo) / spacing).ceil().max(1.0) as usize;
                    for k in 0..=steps {
                        let t = (lo + k as f64 * spacing).min(hi);
                        let val = eval(t, &mut q);
                        if val < best_f {
                            best_f = val;
                            best_t = t;
                        }
                    }
                    if spacing < 1e-13 {
                        break;
                    }
                    lo = (best_t - spacing).max(lo0);
                    hi = (best_t + spacing).min(hi0);
                    spacing /= 20.0;
                }
                // Moves within rounding of the current value are noise.
                if best_t != 0.0 && best_f < f0 - 8.0 * f64::EPSILON * (1.0 + f0.abs()) {
                    p[i] = (p[i] + best_t).max(0.0);
                    p[j] = (p[j] - best_t).max(0.0);
                    moved = moved.max(best_t.abs());
                }
            }
        }
        if moved == 0.0 {
            break;
        }
    }
    p
}

pub fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(&a, &b)| if a > 0.0 { a * (a / b).ln() } else { 0.0 })
        .sum()
}

pub fn half_sq(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
}

pub fn neg_entropy(p: &[f64]) -> f64 {
    p.iter().map(|&x| if x > 0.0 { x * x.ln() } else { 0.0 }).sum()
}

/// Calls `visit` with every deterministic action assignment over `ns` states.
pub fn for_each_assignment(ns: usize, na: usize, mut visit: impl FnMut(&[usize])) {
    let mut a = vec![0usize; ns];
    loop {
        visit(&a);
        let mut i = 0;
        while i < ns {
            a[i] += 1;
            if a[i] < na {
                break;
            }
            a[i] = 0;
            i += 1;
        }
        if i == ns {
            return;
        }
    }
}

/// Least-squares slope of `ys` on `xs`.
pub fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
