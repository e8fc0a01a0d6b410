use std::time::Instant;

use super::prox::{box_prox, fista};
use super::{elapsed, Design, EstimatorConfig, EstimatorKind, SolveResult};
use crate::error::{Error, Result};
use crate::model::{DenseMatrix, ObservationSet, ObservationVector};
use crate::norms::NormSpec;

const MAX_BISECTIONS: usize = 80;

struct PathPoint {
    theta: DenseMatrix,
    value: f64,
    residual: f64,
    iterations: usize,
    converged: bool,
}

/// Penalized problem `μ R(Θ) + ½‖P_Ω(Θ) − y‖²` over the box.
fn solve_penalized(
    design: &Design<'_>,
    spec: &NormSpec,
    mu: f64,
    warm: DenseMatrix,
    cfg: &EstimatorConfig,
) -> Result<PathPoint> {
    let lip = design.max_count.max(1.0);
    let out = fista(
        warm,
        lip,
        |x| design.normal_residual(x),
        |v, step| box_prox(spec, v, step * mu, design.bound),
        cfg.max_iter,
        cfg.objective_tol * 1e-2,
    )?;
    Ok(PathPoint {
        value: spec.value(&out.x)?,
        residual: design.residual_norm(&out.x),
        theta: out.x,
        iterations: out.iterations,
        converged: out.converged,
    })
}

struct Tracker {
    lambda: f64,
    tol_c: f64,
    iterations: usize,
    lower_bound: f64,
    best: Option<PathPoint>,
    all_converged: bool,
}

impl Tracker {
    /// Folds a path point into the bounds; returns whether it is feasible.
    fn record(&mut self, pt: PathPoint, mu: f64) -> bool {
        self.iterations += pt.iterations;
        self.all_converged &= pt.converged;
        let lagrangian = pt.value + (pt.residual * pt.residual - self.lambda * self.lambda) / (2.0 * mu);
        self.lower_bound = self.lower_bound.max(lagrangian);
        let feasible = pt.residual <= self.lambda + self.tol_c;
        if feasible && self.best.as_ref().is_none_or(|b| pt.value < b.value) {
            self.best = Some(pt);
        }
        feasible
    }

    fn gap(&self) -> f64 {
        self.best
            .as_ref()
            .map_or(f64::INFINITY, |b| (b.value - self.lower_bound).max(0.0))
    }
}

/// `min R(Θ)` s.t. `‖P_Ω(Θ) − y‖₂ ≤ λ`, `‖Θ‖_∞ ≤ α*/√(d1d2)`.
///
/// The multiplier `μ` of the penalized problem is located by bisection in
/// log scale until the residual constraint is active. Any `μ` yields the
/// Lagrangian bound `R(Θ_μ) + (‖P_Ω(Θ_μ) − y‖² − λ²)/(2μ)`; the reported
/// certificate is the gap between the best feasible value and the best
/// such bound.
pub fn solve_constrained_norm(
    y: &ObservationVector,
    omega: &ObservationSet,
    spec: &NormSpec,
    cfg: &EstimatorConfig,
) -> Result<SolveResult> {
    let start = Instant::now();
    let lambda = match cfg.estimator {
        EstimatorKind::ConstrainedNorm { lambda } => lambda,
        other => {
            return Err(Error::InvalidArgument(format!(
                "constrained-norm solver called with a {} config",
                other.name()
            )))
        }
    };
    let design = Design::new(y, omega, spec, cfg)?;
    let ynorm = y.norm();
    if ynorm <= lambda {
        return Ok(SolveResult {
            theta: design.zeros(),
            objective: 0.0,
            constraint_residual: 0.0,
            iterations: 0,
            converged: true,
            certificate: 0.0,
            wall_time_s: elapsed(start),
        });
    }
    let tol_c = cfg.constraint_tol;
    let mu_max = spec.dual_value(&design.backprojected)?;

    let mut track = Tracker {
        lambda,
        tol_c,
        iterations: 0,
        lower_bound: 0.0,
        best: None,
        all_converged: true,
    };

    // Find a feasible lower end of the bracket.
    let mut lo = mu_max * 1e-4;
    let mut warm = design.zeros();
    let mut hi = mu_max;
    let mut found = false;
    while lo >= mu_max * 1e-16 {
        let pt = solve_penalized(&design, spec, lo, warm.clone(), cfg)?;
        warm = pt.theta.clone();
        if track.record(pt, lo) {
            found = true;
            break;
        }
        hi = lo;
        lo *= 1e-3;
    }
    if !found {
        let closest = design.residual_norm(&warm);
        return Err(Error::NonConvergence(format!(
            "no point of the box satisfies the residual constraint: smallest residual found {closest:.6e} > lambda {lambda:.6e}"
        )));
    }

    for _ in 0..MAX_BISECTIONS {
        let b = track.best.as_ref().expect("a feasible point was recorded");
        if b.residual >= lambda - tol_c || track.gap() <= cfg.objective_tol * b.value.max(1.0) {
            break;
        }
        if hi / lo < 1.0 + 1e-12 {
            break;
        }
        let mid = (lo * hi).sqrt();
        let pt = solve_penalized(&design, spec, mid, b.theta.clone(), cfg)?;
        if track.record(pt, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    let certificate = track.gap();
    let all_converged = track.all_converged;
    let total_iters = track.iterations;
    let b = track.best.expect("a feasible point was recorded");
    let constraint_residual = (b.residual - lambda).max(0.0);
    let active = b.residual >= lambda - tol_c;
    let converged = all_converged
        && constraint_residual <= tol_c
        && (active || certificate <= cfg.objective_tol * b.value.max(1.0));
    Ok(SolveResult {
        objective: b.value,
        constraint_residual,
        iterations: total_iters,
        converged,
        certificate,
        theta: b.theta,
        wall_time_s: elapsed(start),
    })
}
