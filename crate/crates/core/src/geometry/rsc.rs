use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{batch_extreme, estimate, parallel_draws, ConeDirection, Direction, GeometryEstimate, WidthSet};
use crate::error::{Error, Result};
use crate::model::{spikiness, DenseMatrix, ObservationSet};
use crate::norms::NormSpec;
use crate::rng::{gaussian_matrix, StreamRng};

const ASCENT_STEPS: usize = 25;
const COMPAT_TAG: u64 = 0x434f_4d50;
const RSC_TAG: u64 = 0x5253_4321;

/// `{X : α_sp(X) < β}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpikySlice {
    pub beta: f64,
}

impl SpikySlice {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(Error::InvalidArgument(format!("beta must be positive, got {beta}")));
        }
        Ok(Self { beta })
    }

    /// No restriction.
    pub fn unrestricted() -> Self {
        Self { beta: f64::INFINITY }
    }

    pub fn contains(&self, x: &DenseMatrix) -> bool {
        self.beta.is_infinite() || spikiness(x).is_ok_and(|a| a < self.beta)
    }
}

fn ratio(spec: &NormSpec, x: &DenseMatrix) -> Result<f64> {
    Ok(spec.value(x)? / x.frobenius_norm())
}

/// `sup_{X ∈ C∖{0}} R(X)/‖X‖_F`, estimated from below by subgradient
/// ascent from `n` random starts.
pub fn compatibility_constant(set: &WidthSet, spec: &NormSpec, n: usize, seed: u64) -> Result<GeometryEstimate> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one start".into()));
    }
    let start = Instant::now();
    let (d1, d2) = set.shape()?;
    spec.check_dims(d1, d2)?;
    let values = match set {
        WidthSet::Points(points) => points
            .iter()
            .filter(|x| x.frobenius_norm() > 0.0)
            .map(|x| ratio(spec, x))
            .collect::<Result<Vec<_>>>()?,
        WidthSet::Sphere { .. } => parallel_draws(n, seed, COMPAT_TAG, |_, rng| {
            let mut x = gaussian_matrix(rng, d1, d2);
            x.scale_mut(1.0 / x.frobenius_norm());
            let mut best = ratio(spec, &x)?;
            let mut gamma = 0.5;
            for _ in 0..ASCENT_STEPS {
                let w = spec.subgradient(&x, None)?.matrix;
                let mut cand = x.clone();
                cand.axpy(gamma, &w);
                cand.axpy(-gamma * best, &x);
                cand.scale_mut(1.0 / cand.frobenius_norm());
                let v = ratio(spec, &cand)?;
                if v > best {
                    best = v;
                    x = cand;
                } else {
                    gamma *= 0.5;
                }
            }
            Ok(best)
        })?,
        WidthSet::DescentCone(sampler) => parallel_draws(n, seed, COMPAT_TAG, |_, rng| {
            let d = gaussian_matrix(rng, d1, d2);
            let mut best: Option<(ConeDirection, f64)> = None;
            for c in sampler.ray_directions(&d)? {
                let v = ratio(spec, &c.dir)?;
                if best.as_ref().is_none_or(|(_, b)| v > *b) {
                    best = Some((c, v));
                }
            }
            let Some((c, _)) = best else {
                return Ok(f64::NEG_INFINITY);
            };
            let (_, v) = sampler.ascend(
                c,
                ASCENT_STEPS,
                |x| ratio(spec, x),
                |x| Ok(spec.subgradient(x, None)?.matrix),
            )?;
            Ok(v)
        })?,
    };
    let values: Vec<f64> = values.into_iter().filter(|v| v.is_finite()).collect();
    if values.is_empty() {
        return Err(Error::NonConvergence("no admissible direction was produced".into()));
    }
    let samples = values.len();
    Ok(estimate(
        "compatibility-constant",
        batch_extreme(&values, true),
        samples,
        Direction::LowerBound,
        seed,
        start,
    ))
}

/// `(d1d2/m) ‖P_Ω(X)‖² / ‖X‖_F²`, summed in observation order.
pub fn sampled_curvature(omega: &ObservationSet, x: &DenseMatrix) -> f64 {
    let num: f64 = omega.indices().iter().map(|&(i, j)| x.get(i, j).powi(2)).sum();
    let cells = (omega.d1() * omega.d2()) as f64;
    cells / omega.len() as f64 * num / x.frobenius_norm_sq()
}

fn sign_matrix(rng: &mut StreamRng, d1: usize, d2: usize) -> DenseMatrix {
    DenseMatrix::from_fn(d1, d2, |_, _| if rng.random::<bool>() { 1.0 } else { -1.0 })
}

/// `min (d1d2/m)‖P_Ω(X)‖²` over sampled unit directions of the set with
/// `α_sp(X) < β`: an upper estimate of the restricted curvature.
///
/// Each of the `n` draws uses a Gaussian (even draws) or random-sign (odd
/// draws) matrix as the seed direction.
pub fn rsc_verify(
    omega: &ObservationSet,
    set: &WidthSet,
    slice: SpikySlice,
    n: usize,
    seed: u64,
) -> Result<GeometryEstimate> {
    let start = Instant::now();
    let (d1, d2) = set.shape()?;
    if omega.shape() != (d1, d2) {
        return Err(Error::DimensionMismatch(
            "observation set and direction set differ in shape".into(),
        ));
    }
    if omega.is_empty() || n == 0 {
        return Err(Error::InvalidArgument(
            "need a nonempty observation set and n >= 1".into(),
        ));
    }
    let best_of = |dirs: &mut dyn Iterator<Item = DenseMatrix>| -> f64 {
        dirs.filter(|x| x.frobenius_norm() > 0.0 && slice.contains(x))
            .map(|x| sampled_curvature(omega, &x))
            .fold(f64::INFINITY, f64::min)
    };
    let values = match set {
        WidthSet::Points(points) => vec![best_of(&mut points.iter().cloned())],
        WidthSet::Sphere { .. } => parallel_draws(n, seed, RSC_TAG, |i, rng| {
            let d = if i % 2 == 0 {
                gaussian_matrix(rng, d1, d2)
            } else {
                sign_matrix(rng, d1, d2)
            };
            Ok(best_of(&mut std::iter::once(d)))
        })?,
        WidthSet::DescentCone(sampler) => parallel_draws(n, seed, RSC_TAG, |i, rng| {
            let d = if i % 2 == 0 {
                gaussian_matrix(rng, d1, d2)
            } else {
                sign_matrix(rng, d1, d2)
            };
            let dirs = sampler.ray_directions(&d)?;
            Ok(best_of(&mut dirs.into_iter().map(|c| c.dir)))
        })?,
    };
    let admitted: Vec<f64> = values.into_iter().filter(|v| v.is_finite()).collect();
    if admitted.is_empty() {
        return Err(Error::NonConvergence(format!(
            "no sampled direction has spikiness below beta = {}",
            slice.beta
        )));
    }
    let samples = admitted.len();
    Ok(estimate(
        "rsc-curvature",
        batch_extreme(&admitted, false),
        samples,
        Direction::UpperBound,
        seed,
        start,
    ))
}
