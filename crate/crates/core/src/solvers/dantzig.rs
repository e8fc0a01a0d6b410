use std::time::Instant;

use super::prox::box_prox;
use super::{elapsed, Design, EstimatorConfig, EstimatorKind, SolveResult};
use crate::error::{Error, Result};
use crate::model::{DenseMatrix, ObservationSet, ObservationVector};
use crate::norms::NormSpec;

const CHECK_EVERY: usize = 10;

/// Lower bound on the optimal value from a dual point `z`.
///
/// Weak duality for `min R(Θ) + ι_box(Θ) + ι{R*(KΘ − b) ≤ ρ}` gives
/// `−⟨z, b⟩ − ρR(z) − g*(−Kz)`, with `g*` the conjugate of `R + ι_box`.
/// `g*(w)` is bounded by `bound · ‖w − Π_{R*≤1}(w)‖₁`, or by `0` once `z`
/// is rescaled so that `R*(Kz) ≤ 1`.
fn dual_bound(design: &Design<'_>, spec: &NormSpec, z: &DenseMatrix, rho: f64) -> Result<f64> {
    let w = z.zip_map(&design.counts, |a, c| -a * c);
    let zb = z.dot(&design.backprojected);
    let rz = spec.value(z)?;
    let dual_w = spec.dual_value(&w)?;
    let s = 1.0 / dual_w.max(1.0);
    let mut best = -s * zb - s * rho * rz;
    if design.bound.is_finite() {
        let excess = &w - &spec.project_dual_ball(&w, 1.0)?;
        let l1: f64 = excess.as_slice().iter().map(|v| v.abs()).sum();
        best = best.max(-zb - rho * rz - design.bound * l1);
    }
    Ok(best)
}

/// `min R(Θ)` s.t. `(√(d1d2)/m) R*(P_Ω^*(P_Ω(Θ) − y)) ≤ λ`, `‖Θ‖_∞ ≤ α*/√(d1d2)`.
///
/// Primal-dual splitting on `g(Θ) = R(Θ) + ι_box(Θ)` and `f(W) = ι{R*(W − P_Ω^*y) ≤ ρ}`
/// composed with `K = P_Ω^* P_Ω`, where `ρ = λ m/√(d1d2)`. The `f` step is
/// a projection onto a dual-norm ball and the `g` step is the composite
/// box prox. The certificate is the primal-dual gap.
pub fn solve_dantzig(
    y: &ObservationVector,
    omega: &ObservationSet,
    spec: &NormSpec,
    cfg: &EstimatorConfig,
) -> Result<SolveResult> {
    let start = Instant::now();
    let lambda = match cfg.estimator {
        EstimatorKind::Dantzig { lambda } => lambda,
        other => {
            return Err(Error::InvalidArgument(format!(
                "dantzig solver called with a {} config",
                other.name()
            )))
        }
    };
    let design = Design::new(y, omega, spec, cfg)?;
    let (d1, d2) = omega.shape();
    let m = omega.len().max(1) as f64;
    let scale = ((d1 * d2) as f64).sqrt() / m;
    let rho = lambda / scale;
    let violation = |x: &DenseMatrix| -> Result<f64> {
        Ok((scale * spec.dual_value(&design.normal_residual(x))? - lambda).max(0.0))
    };

    let zero = design.zeros();
    if violation(&zero)? == 0.0 {
        return Ok(SolveResult {
            theta: zero,
            objective: 0.0,
            constraint_residual: 0.0,
            iterations: 0,
            converged: true,
            certificate: 0.0,
            wall_time_s: elapsed(start),
        });
    }

    let norm_k = design.max_count.max(1.0);
    let tau = 1.0 / norm_k;
    let sigma = 0.99 / norm_k;

    let mut x = zero.clone();
    let mut z = zero;
    let mut lower = f64::NEG_INFINITY;
    let mut best: Option<(DenseMatrix, f64)> = None;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iter {
        iterations += 1;
        let kz = z.zip_map(&design.counts, |a, c| a * c);
        let mut v = x.clone();
        v.axpy(-tau, &kz);
        let x_new = box_prox(spec, &v, tau, design.bound)?;
        let mut x_bar = x_new.scaled(2.0);
        x_bar.axpy(-1.0, &x);
        x = x_new;

        let mut u = z.clone();
        u.axpy(sigma, &x_bar.zip_map(&design.counts, |a, c| a * c));
        // v − σ Π_C(v/σ) with Π_C(w) = b + Π_{R* ≤ ρ}(w − b)
        let mut shifted = u.scaled(1.0 / sigma);
        shifted.axpy(-1.0, &design.backprojected);
        let mut proj = spec.project_dual_ball(&shifted, rho)?;
        proj.axpy(1.0, &design.backprojected);
        u.axpy(-sigma, &proj);
        z = u;

        if iterations % CHECK_EVERY == 0 || iterations == cfg.max_iter {
            lower = lower.max(dual_bound(&design, spec, &z, rho)?);
            let value = spec.value(&x)?;
            if violation(&x)? <= cfg.constraint_tol && best.as_ref().is_none_or(|(_, b)| value < *b) {
                best = Some((x.clone(), value));
            }
            if let Some((_, b)) = &best {
                if b - lower <= cfg.objective_tol * b.max(1.0) {
                    converged = true;
                    break;
                }
            }
        }
    }

    let (theta, objective) = match best {
        Some(b) => b,
        None => {
            let v = spec.value(&x)?;
            (x, v)
        }
    };
    let constraint_residual = violation(&theta)?;
    Ok(SolveResult {
        certificate: (objective - lower).max(0.0),
        converged: converged && constraint_residual <= cfg.constraint_tol,
        constraint_residual,
        objective,
        iterations,
        theta,
        wall_time_s: elapsed(start),
    })
}
