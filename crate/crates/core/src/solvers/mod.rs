//! Estimators over the spikiness box `‖Θ‖_∞ ≤ α*/√(d1 d2)`.
//!
//! * [`solve_constrained_norm`]: `min R(Θ)` s.t. `‖P_Ω(Θ) − y‖₂ ≤ λ`.
//! * [`solve_dantzig`]: `min R(Θ)` s.t. `(√(d1d2)/m) R*(P_Ω^*(P_Ω(Θ) − y)) ≤ λ`.
//! * [`solve_glm`]: `min (d1d2/m) Σ_k [A(Θ_k) − y_k Θ_k] + λ R(Θ)`.

mod constrained;
mod dantzig;
mod glm;
mod prox;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{adjoint_slice, DenseMatrix, NoiseKind, ObservationSet, ObservationVector};
use crate::norms::NormSpec;
use crate::rng::{stream_id, stream_rng};

pub use constrained::solve_constrained_norm;
pub use dantzig::solve_dantzig;
pub use glm::{glm_gradient, glm_loss, glm_zero_threshold, solve_glm, GlmLoss};
pub use prox::{box_prox, fista, FistaOutcome};

/// Which program to solve and its regularization level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EstimatorKind {
    ConstrainedNorm { lambda: f64 },
    Dantzig { lambda: f64 },
    GlmRegularized { lambda: f64, loss: GlmLoss },
}

impl EstimatorKind {
    pub fn lambda(&self) -> f64 {
        match *self {
            EstimatorKind::ConstrainedNorm { lambda }
            | EstimatorKind::Dantzig { lambda }
            | EstimatorKind::GlmRegularized { lambda, .. } => lambda,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::ConstrainedNorm { .. } => "constrained-norm",
            EstimatorKind::Dantzig { .. } => "dantzig",
            EstimatorKind::GlmRegularized { .. } => "glm-regularized",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    pub estimator: EstimatorKind,
    /// Spikiness cap; `inf` removes the box.
    pub alpha_star: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_objective_tol")]
    pub objective_tol: f64,
    #[serde(default = "default_constraint_tol")]
    pub constraint_tol: f64,
}

fn default_max_iter() -> usize {
    5000
}

fn default_objective_tol() -> f64 {
    1e-6
}

fn default_constraint_tol() -> f64 {
    1e-6
}

impl EstimatorConfig {
    pub fn new(estimator: EstimatorKind, alpha_star: f64) -> Self {
        Self {
            estimator,
            alpha_star,
            max_iter: default_max_iter(),
            objective_tol: default_objective_tol(),
            constraint_tol: default_constraint_tol(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.objective_tol > 0.0) || !(self.constraint_tol > 0.0) {
            return Err(Error::Config("solver tolerances must be positive".into()));
        }
        if !(self.alpha_star >= 1.0) {
            return Err(Error::Config(format!(
                "alpha_star must be >= 1, got {}",
                self.alpha_star
            )));
        }
        let lambda = self.estimator.lambda();
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::Config(format!(
                "regularization level must be finite and >= 0, got {lambda}"
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be positive".into()));
        }
        Ok(())
    }

    /// Entrywise bound `α*/√(d1 d2)`.
    pub fn box_bound(&self, d1: usize, d2: usize) -> f64 {
        self.alpha_star / ((d1 * d2) as f64).sqrt()
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub theta: DenseMatrix,
    pub objective: f64,
    /// Amount by which the program's constraints are exceeded (0 if feasible).
    pub constraint_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Duality gap for the constrained programs, fixed-point residual for GLM.
    pub certificate: f64,
    pub wall_time_s: f64,
}

/// Flat record written next to a solved matrix.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveSummary {
    pub objective: f64,
    pub constraint_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub certificate: f64,
    pub wall_time_s: f64,
    pub theta_path: Option<String>,
}

impl SolveResult {
    pub fn summary(&self, theta_path: Option<&str>) -> SolveSummary {
        SolveSummary {
            objective: self.objective,
            constraint_residual: self.constraint_residual,
            iterations: self.iterations,
            converged: self.converged,
            certificate: self.certificate,
            wall_time_s: self.wall_time_s,
            theta_path: theta_path.map(str::to_owned),
        }
    }

    pub fn to_json(&self, theta_path: Option<&str>) -> String {
        serde_json::to_string_pretty(&self.summary(theta_path)).expect("summary is plain data")
    }
}

/// Solve whichever program `cfg.estimator` selects.
pub fn solve(
    y: &ObservationVector,
    omega: &ObservationSet,
    spec: &NormSpec,
    cfg: &EstimatorConfig,
) -> Result<SolveResult> {
    match cfg.estimator {
        EstimatorKind::ConstrainedNorm { .. } => solve_constrained_norm(y, omega, spec, cfg),
        EstimatorKind::Dantzig { .. } => solve_dantzig(y, omega, spec, cfg),
        EstimatorKind::GlmRegularized { .. } => solve_glm(y, omega, spec, cfg),
    }
}

/// Quantities shared by every solver: the diagonal of `P_Ω^* P_Ω`, the
/// back-projected data and the box.
pub(crate) struct Design<'a> {
    pub omega: &'a ObservationSet,
    pub y: &'a [f64],
    pub counts: DenseMatrix,
    pub backprojected: DenseMatrix,
    pub max_count: f64,
    pub bound: f64,
}

impl<'a> Design<'a> {
    pub fn new(
        y: &'a ObservationVector,
        omega: &'a ObservationSet,
        spec: &NormSpec,
        cfg: &EstimatorConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        spec.check_dims(omega.d1(), omega.d2())?;
        if y.len() != omega.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} observations for |Ω| = {}",
                y.len(),
                omega.len()
            )));
        }
        if y.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite observation".into()));
        }
        let counts = omega.counts();
        Ok(Self {
            omega,
            y: y.values(),
            max_count: counts.max_abs(),
            backprojected: adjoint_slice(y.values(), omega)?,
            counts,
            bound: cfg.box_bound(omega.d1(), omega.d2()),
        })
    }

    pub fn zeros(&self) -> DenseMatrix {
        DenseMatrix::zeros(self.omega.d1(), self.omega.d2())
    }

    /// `P_Ω^* P_Ω(Θ) − P_Ω^*(y)`.
    pub fn normal_residual(&self, theta: &DenseMatrix) -> DenseMatrix {
        let mut g = theta.zip_map(&self.counts, |t, c| t * c);
        g.axpy(-1.0, &self.backprojected);
        g
    }

    /// `‖P_Ω(Θ) − y‖₂`, evaluated entry by entry.
    pub fn residual_norm(&self, theta: &DenseMatrix) -> f64 {
        self.omega
            .indices()
            .iter()
            .zip(self.y)
            .map(|(&(i, j), &v)| {
                let r = theta.get(i, j) - v;
                r * r
            })
            .sum::<f64>()
            .sqrt()
    }
}

pub(crate) fn elapsed(start: Instant) -> f64 {
    start.elapsed().as_secs_f64()
}

/// Estimator family for [`auto_lambda`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaRule {
    ConstrainedNorm,
    Dantzig,
}

/// Noise-calibrated regularization level.
///
/// Constrained norm: `2ν√m`. Dantzig: the empirical 95th percentile of
/// `2ν (√(d1d2)/m) R*(P_Ω^*(η))` over `draws` fresh noise vectors.
pub fn auto_lambda(
    rule: LambdaRule,
    nu: f64,
    omega: &ObservationSet,
    spec: &NormSpec,
    noise: NoiseKind,
    draws: usize,
    seed: u64,
) -> Result<f64> {
    if !(nu >= 0.0) || !nu.is_finite() {
        return Err(Error::InvalidArgument(format!("noise level must be >= 0, got {nu}")));
    }
    let m = omega.len();
    match rule {
        LambdaRule::ConstrainedNorm => Ok(2.0 * nu * (m as f64).sqrt()),
        LambdaRule::Dantzig => {
            if nu == 0.0 || m == 0 {
                return Ok(0.0);
            }
            if draws == 0 {
                return Err(Error::InvalidArgument("auto_lambda needs at least one draw".into()));
            }
            spec.check_dims(omega.d1(), omega.d2())?;
            let scale = 2.0 * nu * ((omega.d1() * omega.d2()) as f64).sqrt() / m as f64;
            let mut values = Vec::with_capacity(draws);
            for t in 0..draws {
                let mut rng = stream_rng(seed, stream_id(&[0x4c41_4d42, t as u64]));
                let eta: Vec<f64> = (0..m).map(|_| noise.sample(&mut rng)).collect();
                let back = adjoint_slice(&eta, omega)?;
                values.push(scale * spec.dual_value(&back)?);
            }
            Ok(percentile(&mut values, 0.95))
        }
    }
}

/// Nearest-rank percentile.
fn percentile(values: &mut [f64], q: f64) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let rank = ((q * values.len() as f64).ceil() as usize).clamp(1, values.len());
    values[rank - 1]
}
