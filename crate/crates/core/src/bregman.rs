//! Bregman distances, Euclidean simplex projection and the closed-form
//! prox-mappings solving
//!
//! ```text
//! argmin_{p ∈ Δ} η [⟨q, p⟩ + h^p] + D(π, p)
//! ```
//!
//! for the supported (geometry, regulariser) pairs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{argmin, check_simplex, Regularizer, RegularizerKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Geometry {
    /// `½‖p − q‖²`, paired with the ℓ2 norm.
    EuclideanSquared,
    /// `Σ p ln(p/q)`, paired with the ℓ1 norm.
    Kl,
}

/// Step size for one prox update. `Greedy` is the `η = 1/0` sentinel that
/// drops the distance term entirely.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Step {
    Finite(f64),
    Greedy,
}

impl Step {
    /// Finite value, `+∞` for the greedy sentinel.
    pub fn as_f64(&self) -> f64 {
        match *self {
            Step::Finite(e) => e,
            Step::Greedy => f64::INFINITY,
        }
    }

    /// Builds a step from `log2(η)`, falling back to the greedy sentinel when
    /// `η` is not representable.
    pub fn from_log2(log2_eta: f64) -> Step {
        let eta = log2_eta.exp2();
        if eta.is_finite() {
            Step::Finite(eta)
        } else {
            Step::Greedy
        }
    }
}

/// `D(q, p)`: distance from `q` (the prox centre) to `p`.
pub fn bregman_distance(q: &[f64], p: &[f64], geom: Geometry) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::ShapeMismatch("bregman distance operands".into()));
    }
    match geom {
        Geometry::EuclideanSquared => Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()),
        Geometry::Kl => {
            let mut d = 0.0;
            for (i, (&pi, &qi)) in p.iter().zip(q).enumerate() {
                if pi > 0.0 {
                    if qi <= 0.0 {
                        return Err(Error::DivergenceUndefined { index: i });
                    }
                    d += pi * (pi / qi).ln();
                }
            }
            Ok(d.max(0.0))
        }
    }
}

/// Euclidean projection onto the probability simplex (sort and threshold).
pub fn project_simplex(v: &[f64]) -> Result<Vec<f64>> {
    let mut p = project_scaled_simplex(v, 1.0)?;
    renormalize(&mut p);
    Ok(p)
}

/// Projection onto `{p ≥ 0, Σp = z}`.
fn project_scaled_simplex(v: &[f64], z: f64) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::Empty("projection input"));
    }
    if let Some(x) = v.iter().find(|x| !x.is_finite()) {
        return Err(Error::InvalidConfig(format!("non-finite projection input {x}")));
    }
    // Shifting by the maximum leaves the projection unchanged and keeps a
    // tiny mass `z` from being absorbed by large entries.
    let top = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let v: Vec<f64> = v.iter().map(|x| x - top).collect();
    let mut u = v.clone();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - z) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    Ok(v.iter().map(|&x| (x - theta).max(0.0)).collect())
}

fn renormalize(p: &mut [f64]) {
    let sum: f64 = p.iter().sum();
    if sum > 0.0 && sum != 1.0 {
        p.iter_mut().for_each(|x| *x /= sum);
    }
}

/// Normalised `exp(logw)` with max-shift; `-∞` entries map to zero.
fn softmax_from_log(logw: &[f64]) -> Vec<f64> {
    let m = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = logw.iter().map(|&l| (l - m).exp()).collect();
    renormalize(&mut p);
    p
}

/// Minimiser of `⟨q, p⟩ + h^p` over the simplex with no distance term.
fn greedy_row(q_row: &[f64], reg: &Regularizer) -> Vec<f64> {
    match reg.kind {
        RegularizerKind::None => {
            let mut p = vec![0.0; q_row.len()];
            p[argmin(q_row)] = 1.0;
            p
        }
        RegularizerKind::ScaledNegativeEntropy => {
            let logw: Vec<f64> = q_row.iter().map(|&q| -q / reg.tau).collect();
            softmax_from_log(&logw)
        }
    }
}

/// One prox-mapping update for a single state.
pub fn prox_step(pi_row: &[f64], q_row: &[f64], step: Step, geom: Geometry, reg: &Regularizer) -> Result<Vec<f64>> {
    if pi_row.len() != q_row.len() {
        return Err(Error::ShapeMismatch("prox operands".into()));
    }
    let entropy = reg.kind == RegularizerKind::ScaledNegativeEntropy;
    if geom == Geometry::EuclideanSquared && entropy {
        return Err(Error::UnsupportedProx(
            "Euclidean geometry with entropy regularization has no closed form".into(),
        ));
    }
    let eta = match step {
        Step::Greedy => return Ok(greedy_row(q_row, reg)),
        Step::Finite(eta) if eta > 0.0 && eta.is_finite() => eta,
        Step::Finite(eta) => return Err(Error::InvalidStep(eta)),
    };
    match geom {
        Geometry::EuclideanSquared => {
            if eta <= 1.0 {
                let v: Vec<f64> = pi_row.iter().zip(q_row).map(|(p, q)| p - eta * q).collect();
                project_simplex(&v)
            } else {
                // Project pi/η − q onto the simplex of mass 1/η and rescale;
                // this keeps the threshold finite for very large η.
                let v: Vec<f64> = pi_row.iter().zip(q_row).map(|(p, q)| p / eta - q).collect();
                let mut p = project_scaled_simplex(&v, 1.0 / eta)?;
                p.iter_mut().for_each(|x| *x *= eta);
                renormalize(&mut p);
                Ok(p)
            }
        }
        Geometry::Kl => {
            let shrink = if entropy { 1.0 / (1.0 + eta * reg.tau) } else { 1.0 };
            let logw: Vec<f64> = pi_row
                .iter()
                .zip(q_row)
                .map(|(&p, &q)| {
                    if p > 0.0 {
                        shrink * (p.ln() - eta * q)
                    } else {
                        f64::NEG_INFINITY
                    }
                })
                .collect();
            if logw.iter().all(|l| *l == f64::NEG_INFINITY) {
                return Err(Error::NotInSimplex("prox centre has no support".into()));
            }
            Ok(softmax_from_log(&logw))
        }
    }
}

/// Convenience check used by tests and callers.
pub fn is_simplex(p: &[f64]) -> bool {
    check_simplex(p, 1e-12).is_ok() && p.iter().all(|&x| x >= 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_to_self_is_zero() {
        let p = [0.2, 0.3, 0.5];
        for g in [Geometry::EuclideanSquared, Geometry::Kl] {
            assert_eq!(bregman_distance(&p, &p, g).unwrap(), 0.0);
        }
    }

    #[test]
    fn euclidean_vertex_distance() {
        let d = bregman_distance(&[0.0, 1.0], &[1.0, 0.0], Geometry::EuclideanSquared).unwrap();
        assert!((d - 1.0).abs() < 1e-15);
    }

    #[test]
    fn kl_matches_direct_sum() {
        let d = bregman_distance(&[0.25, 0.75], &[0.5, 0.5], Geometry::Kl).unwrap();
        let oracle = 0.5 * (0.5f64 / 0.25).ln() + 0.5 * (0.5f64 / 0.75).ln();
        assert!((d - oracle).abs() < 1e-12);
    }

    #[test]
    fn kl_undefined_outside_support() {
        assert!(matches!(
            bregman_distance(&[1.0, 0.0], &[0.5, 0.5], Geometry::Kl),
            Err(Error::DivergenceUndefined { index: 1 })
        ));
    }

    #[test]
    fn projection_basics() {
        let p = project_simplex(&[0.6, 0.6]).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
        let inside = [0.1, 0.2, 0.7];
        let q = project_simplex(&inside).unwrap();
        for (a, b) in q.iter().zip(&inside) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(matches!(project_simplex(&[]), Err(Error::Empty(_))));
    }

    #[test]
    fn tiny_step_keeps_centre() {
        let pi = [0.2, 0.5, 0.3];
        let q = [3.0, -1.0, 0.5];
        for (g, r) in [
            (Geometry::EuclideanSquared, Regularizer::none()),
            (Geometry::Kl, Regularizer::none()),
            (Geometry::Kl, Regularizer::entropy(0.5)),
        ] {
            let p = prox_step(&pi, &q, Step::Finite(1e-12), g, &r).unwrap();
            for (a, b) in p.iter().zip(&pi) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn constant_q_keeps_centre() {
        let pi = [0.2, 0.5, 0.3];
        let q = [4.0; 3];
        for g in [Geometry::EuclideanSquared, Geometry::Kl] {
            let p = prox_step(&pi, &q, Step::Finite(7.0), g, &Regularizer::none()).unwrap();
            for (a, b) in p.iter().zip(&pi) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn huge_steps_stay_in_simplex() {
        let pi = [0.2, 0.5, 0.3];
        let q = [3.0, -1.0, -0.999];
        for eta in [1e3, 1e8, 1e12, 1e200] {
            for (g, r) in [
                (Geometry::EuclideanSquared, Regularizer::none()),
                (Geometry::Kl, Regularizer::none()),
                (Geometry::Kl, Regularizer::entropy(0.5)),
            ] {
                let p = prox_step(&pi, &q, Step::Finite(eta), g, &r).unwrap();
                assert!(is_simplex(&p), "{g:?} {eta} {p:?}");
            }
        }
    }

    #[test]
    fn greedy_sentinel_picks_lowest_index_minimiser() {
        let p = prox_step(
            &[0.5, 0.5, 0.0],
            &[1.0, 0.0, 0.0],
            Step::Greedy,
            Geometry::EuclideanSquared,
            &Regularizer::none(),
        )
        .unwrap();
        assert_eq!(p, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn rejects_bad_step_and_pairing() {
        let r = Regularizer::none();
        assert!(matches!(
            prox_step(&[1.0], &[0.0], Step::Finite(0.0), Geometry::Kl, &r),
            Err(Error::InvalidStep(_))
        ));
        assert!(matches!(
            prox_step(&[1.0], &[0.0], Step::Finite(-1.0), Geometry::Kl, &r),
            Err(Error::InvalidStep(_))
        ));
        assert!(matches!(
            prox_step(
                &[1.0],
                &[0.0],
                Step::Finite(1.0),
                Geometry::EuclideanSquared,
                &Regularizer::entropy(0.1)
            ),
            Err(Error::UnsupportedProx(_))
        ));
    }

    #[test]
    fn step_from_log2_overflows_to_greedy() {
        assert_eq!(Step::from_log2(3.0), Step::Finite(8.0));
        assert_eq!(Step::from_log2(5000.0), Step::Greedy);
    }
}
