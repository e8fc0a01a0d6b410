use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{batch_mean, estimate, parallel_draws, Direction, GeometryEstimate, WidthSet};
use crate::error::{Error, Result};
use crate::model::{adjoint_slice, DenseMatrix, NoiseKind, ObservationSet};
use crate::norms::{find_kr_threshold, NormSpec, Svd};
use crate::rng::gaussian_matrix;

const WIDTH_TAG: u64 = 0x5749_4454;
const PARTIAL_TAG: u64 = 0x5041_5254;

/// `E_G sup_{X ∈ S} ⟨X, G⟩`, estimated from below for cones (local ascent
/// from the projection of `Θ* + τG`) and exactly per draw for explicit sets.
pub fn gaussian_width_lower(set: &WidthSet, n_gauss: usize, n_ascent: usize, seed: u64) -> Result<GeometryEstimate> {
    if n_gauss < 30 {
        return Err(Error::InvalidArgument(format!(
            "need at least 30 Gaussian draws, got {n_gauss}"
        )));
    }
    let start = Instant::now();
    let (d1, d2) = set.shape()?;
    let values = parallel_draws(n_gauss, seed, WIDTH_TAG, |_, rng| {
        let g = gaussian_matrix(rng, d1, d2);
        set.sup_inner(&g, n_ascent)
    })?;
    let direction = if set.is_exact() {
        Direction::Unbiased
    } else {
        Direction::LowerBound
    };
    Ok(estimate(
        "gaussian-width-lower",
        batch_mean(&values),
        n_gauss,
        direction,
        seed,
        start,
    ))
}

/// How the multiplier of the normal cone is chosen per draw.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolarChoice {
    /// Exact minimization over `t ≥ 0` and the free part.
    Optimal,
    /// `t = ‖P_{T⊥}(G)‖_op` with the free part matching `P_{T⊥}(G)`.
    OperatorNormScale,
}

/// Normal-cone geometry at `Θ*`: tangent space of its rank and the fixed
/// part `E` of the scaled subgradients `t(E + W)`, `W ∈ T⊥`, `‖W‖_op ≤ 1`.
struct NormalCone {
    u: DMatrix<f64>,
    v: DMatrix<f64>,
    e: DMatrix<f64>,
    /// Whether the free part `W` is available.
    free: bool,
}

impl NormalCone {
    fn new(spec: &NormSpec, anchor: &DenseMatrix) -> Result<Self> {
        let svd = Svd::new(anchor);
        let s = svd.rank();
        if s == 0 {
            return Err(Error::Domain("normal cone at the zero matrix".into()));
        }
        let p = svd.s.len();
        let mut weights = vec![0.0; p];
        let free = match spec {
            NormSpec::Nuclear => {
                weights[..s].fill(1.0);
                true
            }
            NormSpec::KSupport { .. } => {
                let k = spec.effective_k(p)?;
                let dec = find_kr_threshold(&svd.s, k)?;
                let tail: f64 = svd.s[dec.tail.clone()].iter().sum();
                if tail > 0.0 {
                    let c = (dec.r + 1) as f64 / tail;
                    for i in dec.head.clone() {
                        weights[i] = c * svd.s[i];
                    }
                    for i in dec.tail.clone() {
                        weights[i] = 1.0;
                    }
                    true
                } else {
                    for i in dec.head.clone() {
                        weights[i] = svd.s[i];
                    }
                    false
                }
            }
            NormSpec::Frobenius => unreachable!("handled separately"),
        };
        let e = svd.compose(&weights).to_nalgebra();
        Ok(Self {
            u: svd.u.columns(0, s).into_owned(),
            v: svd.v.columns(0, s).into_owned(),
            e,
            free,
        })
    }

    /// `(P_T G, P_{T⊥} G)`.
    fn split(&self, g: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let left = &self.u * (self.u.transpose() * g);
        let rest = g - &left;
        let right = (&rest * &self.v) * self.v.transpose();
        let perp = &rest - &right;
        (g - &perp, perp)
    }

    /// `min ‖G − t(E + W)‖_F` for the chosen multiplier rule.
    fn distance(&self, g: &DMatrix<f64>, choice: PolarChoice) -> f64 {
        let (tan, perp) = self.split(g);
        let ee = self.e.norm_squared();
        let ae = tan.dot(&self.e);
        let mut sv: Vec<f64> = perp.singular_values().iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        let phi = |t: f64| {
            let fixed = (&tan - &self.e * t).norm_squared();
            let rest: f64 = if self.free {
                sv.iter().map(|s| (s - t).max(0.0).powi(2)).sum()
            } else {
                sv.iter().map(|s| s * s).sum()
            };
            fixed + rest
        };
        let val = match choice {
            PolarChoice::OperatorNormScale if self.free => phi(sv.first().copied().unwrap_or(0.0)),
            _ => {
                // φ is convex and piecewise quadratic in t; its minimizer is
                // one of the stationary points of the pieces, or 0.
                let mut best = phi(0.0);
                let mut acc = 0.0;
                let pieces = if self.free { sv.len() } else { 0 };
                for j in 0..=pieces {
                    if j > 0 {
                        acc += sv[j - 1];
                    }
                    let t = (ae + acc) / (ee + j as f64);
                    if t > 0.0 {
                        best = best.min(phi(t));
                    }
                }
                best
            }
        };
        val.max(0.0).sqrt()
    }
}

/// `E_G inf_{Y ∈ cone ∂R(Θ*)} ‖G − Y‖_F`, an upper bound on the width of
/// the descent set. Uses the same Gaussian draws as
/// [`gaussian_width_lower`] for equal seeds.
pub fn gaussian_width_upper_polar(
    spec: &NormSpec,
    anchor: &DenseMatrix,
    n_gauss: usize,
    choice: PolarChoice,
    seed: u64,
) -> Result<GeometryEstimate> {
    if !spec.capabilities().has_subdifferential {
        return Err(Error::InvalidArgument(format!("{spec} has no subdifferential")));
    }
    if n_gauss == 0 {
        return Err(Error::InvalidArgument("need at least one Gaussian draw".into()));
    }
    spec.check_dims(anchor.rows(), anchor.cols())?;
    let start = Instant::now();
    let (d1, d2) = anchor.shape();
    let values = if let NormSpec::Frobenius = spec {
        let fro = anchor.frobenius_norm();
        if fro == 0.0 {
            return Err(Error::Domain("normal cone at the zero matrix".into()));
        }
        let unit = anchor.scaled(1.0 / fro);
        parallel_draws(n_gauss, seed, WIDTH_TAG, |_, rng| {
            let g = gaussian_matrix(rng, d1, d2);
            let along = g.dot(&unit).max(0.0);
            Ok((g.frobenius_norm_sq() - along * along).max(0.0).sqrt())
        })?
    } else {
        let cone = NormalCone::new(spec, anchor)?;
        parallel_draws(n_gauss, seed, WIDTH_TAG, |_, rng| {
            let g = gaussian_matrix(rng, d1, d2).to_nalgebra();
            Ok(cone.distance(&g, choice))
        })?
    };
    Ok(estimate(
        "gaussian-width-upper-polar",
        batch_mean(&values),
        n_gauss,
        Direction::UpperBound,
        seed,
        start,
    ))
}

/// How observation sets are drawn for [`partial_complexity`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "law")]
pub enum SamplingLaw {
    /// `m` cells uniformly with replacement.
    Uniform { m: usize },
    /// Every cell once, row-major.
    Full,
}

/// `E_{Ω,η} sup_{X ∈ S−S} ⟨X, P_Ω^*(η)⟩ = 2 E sup_{X ∈ S} ⟨X, P_Ω^*(η)⟩`
/// for symmetric `η`.
pub fn partial_complexity(
    set: &WidthSet,
    law: SamplingLaw,
    noise: NoiseKind,
    n_outer: usize,
    n_ascent: usize,
    seed: u64,
) -> Result<GeometryEstimate> {
    let start = Instant::now();
    let (d1, d2) = set.shape()?;
    if let SamplingLaw::Uniform { m: 0 } = law {
        return Err(Error::InvalidArgument("partial complexity needs m >= 1".into()));
    }
    if n_outer == 0 {
        return Err(Error::InvalidArgument("need at least one outer draw".into()));
    }
    let full = ObservationSet::full(d1, d2)?;
    let values = parallel_draws(n_outer, seed, PARTIAL_TAG, |_, rng| {
        let sampled;
        let omega = match law {
            SamplingLaw::Full => &full,
            SamplingLaw::Uniform { m } => {
                let idx = (0..m)
                    .map(|_| (rng.random_range(0..d1), rng.random_range(0..d2)))
                    .collect();
                sampled = ObservationSet::new(d1, d2, idx)?;
                &sampled
            }
        };
        let eta: Vec<f64> = (0..omega.len()).map(|_| noise.sample(rng)).collect();
        let back = adjoint_slice(&eta, omega)?;
        Ok(2.0 * set.sup_inner(&back, n_ascent)?)
    })?;
    let direction = if set.is_exact() {
        Direction::Unbiased
    } else {
        Direction::LowerBound
    };
    Ok(estimate(
        "partial-complexity",
        batch_mean(&values),
        n_outer,
        direction,
        seed,
        start,
    ))
}
