use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::prox::{box_prox, fista};
use super::{elapsed, Design, EstimatorConfig, EstimatorKind, SolveResult};
use crate::error::{Error, Result};
use crate::model::{DenseMatrix, ObservationSet, ObservationVector};
use crate::norms::NormSpec;

/// Exponential-family log-partition `A`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GlmLoss {
    /// `A(u) = u²/2`
    Gaussian,
    /// `A(u) = log(1 + eᵘ)`
    #[serde(alias = "bernoulli-logistic")]
    Bernoulli,
    /// `A(u) = eᵘ`
    Poisson,
}

impl std::str::FromStr for GlmLoss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(GlmLoss::Gaussian),
            "bernoulli" | "bernoulli-logistic" => Ok(GlmLoss::Bernoulli),
            "poisson" => Ok(GlmLoss::Poisson),
            _ => Err(Error::InvalidArgument(format!("unknown loss '{s}'"))),
        }
    }
}

fn softplus(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

impl GlmLoss {
    pub fn log_partition(self, u: f64) -> f64 {
        match self {
            GlmLoss::Gaussian => 0.5 * u * u,
            GlmLoss::Bernoulli => softplus(u),
            GlmLoss::Poisson => u.exp(),
        }
    }

    /// `A'(u)`, the mean.
    pub fn mean(self, u: f64) -> f64 {
        match self {
            GlmLoss::Gaussian => u,
            GlmLoss::Bernoulli => sigmoid(u),
            GlmLoss::Poisson => u.exp(),
        }
    }

    /// `A''(u)`, the variance.
    pub fn curvature(self, u: f64) -> f64 {
        match self {
            GlmLoss::Gaussian => 1.0,
            GlmLoss::Bernoulli => {
                let s = sigmoid(u);
                s * (1.0 - s)
            }
            GlmLoss::Poisson => u.exp(),
        }
    }

    /// `sup_{|u| ≤ bound} A''(u)`.
    pub fn max_curvature(self, bound: f64) -> f64 {
        match self {
            GlmLoss::Gaussian => 1.0,
            GlmLoss::Bernoulli => 0.25,
            GlmLoss::Poisson => bound.exp(),
        }
    }

    pub fn check_observation(self, y: f64) -> Result<()> {
        let ok = match self {
            GlmLoss::Gaussian => y.is_finite(),
            GlmLoss::Bernoulli => y == 0.0 || y == 1.0,
            GlmLoss::Poisson => y >= 0.0 && y.is_finite() && y.fract() == 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("observation {y} outside the {self:?} domain")))
        }
    }
}

/// `(d1d2/m) Σ_k [A(Θ_{i_k j_k}) − y_k Θ_{i_k j_k}]`.
pub fn glm_loss(theta: &DenseMatrix, y: &ObservationVector, omega: &ObservationSet, loss: GlmLoss) -> Result<f64> {
    check_shapes(theta, y, omega)?;
    let scale = (omega.d1() * omega.d2()) as f64 / omega.len().max(1) as f64;
    let total: f64 = omega
        .indices()
        .iter()
        .zip(y.values())
        .map(|(&(i, j), &v)| {
            let u = theta.get(i, j);
            loss.log_partition(u) - v * u
        })
        .sum();
    Ok(scale * total)
}

/// Gradient of [`glm_loss`].
pub fn glm_gradient(
    theta: &DenseMatrix,
    y: &ObservationVector,
    omega: &ObservationSet,
    loss: GlmLoss,
) -> Result<DenseMatrix> {
    check_shapes(theta, y, omega)?;
    let scale = (omega.d1() * omega.d2()) as f64 / omega.len().max(1) as f64;
    let mut g = DenseMatrix::zeros(omega.d1(), omega.d2());
    for (&(i, j), &v) in omega.indices().iter().zip(y.values()) {
        g.add_at(i, j, scale * (loss.mean(theta.get(i, j)) - v));
    }
    Ok(g)
}

fn check_shapes(theta: &DenseMatrix, y: &ObservationVector, omega: &ObservationSet) -> Result<()> {
    if theta.shape() != omega.shape() || y.len() != omega.len() {
        return Err(Error::DimensionMismatch(format!(
            "theta {}x{}, Ω {}x{} with {} entries, {} observations",
            theta.rows(),
            theta.cols(),
            omega.d1(),
            omega.d2(),
            omega.len(),
            y.len()
        )));
    }
    Ok(())
}

/// Smallest `λ` for which `Θ = 0` solves the GLM program: `R*(∇L(0))`.
pub fn glm_zero_threshold(
    y: &ObservationVector,
    omega: &ObservationSet,
    spec: &NormSpec,
    loss: GlmLoss,
) -> Result<f64> {
    let g = glm_gradient(&DenseMatrix::zeros(omega.d1(), omega.d2()), y, omega, loss)?;
    spec.dual_value(&g)
}

/// `min (d1d2/m) L_Ω(Θ) + λ R(Θ)` over the box, by accelerated proximal
/// gradient. The curvature bound of `A` on the box gives the step size;
/// the certificate is the prox-gradient fixed-point residual.
pub fn solve_glm(
    y: &ObservationVector,
    omega: &ObservationSet,
    spec: &NormSpec,
    cfg: &EstimatorConfig,
) -> Result<SolveResult> {
    let start = Instant::now();
    let (lambda, loss) = match cfg.estimator {
        EstimatorKind::GlmRegularized { lambda, loss } => (lambda, loss),
        other => {
            return Err(Error::InvalidArgument(format!(
                "glm solver called with a {} config",
                other.name()
            )))
        }
    };
    let design = Design::new(y, omega, spec, cfg)?;
    for &v in y.values() {
        loss.check_observation(v)?;
    }
    let curvature = loss.max_curvature(design.bound);
    if !curvature.is_finite() {
        return Err(Error::Config(format!("{loss:?} loss needs a finite alpha_star")));
    }
    let scale = (omega.d1() * omega.d2()) as f64 / omega.len().max(1) as f64;
    let lip = (scale * design.max_count * curvature).max(f64::MIN_POSITIVE);
    let out = fista(
        design.zeros(),
        lip,
        |x| glm_gradient(x, y, omega, loss).expect("shapes checked"),
        |v, step| box_prox(spec, v, step * lambda, design.bound),
        cfg.max_iter,
        cfg.objective_tol,
    )?;
    let objective = glm_loss(&out.x, y, omega, loss)? + lambda * spec.value(&out.x)?;
    Ok(SolveResult {
        objective,
        constraint_residual: 0.0,
        iterations: out.iterations,
        converged: out.converged,
        certificate: out.residual,
        theta: out.x,
        wall_time_s: elapsed(start),
    })
}
