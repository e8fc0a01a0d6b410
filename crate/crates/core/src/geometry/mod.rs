//! Monte Carlo estimates of cone complexity: Gaussian width, partial
//! complexity, compatibility and restricted strong convexity constants,
//! plus the closed-form quantities they are compared against.
//!
//! Every estimator draws its `i`-th sample from its own random stream, runs
//! the draws in parallel, collects them in draw order and reduces
//! sequentially, so results do not depend on the thread count.

mod cone;
mod rsc;
mod width;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::Num;
use crate::norms::{find_kr_threshold, spectral::rank_of};
use crate::rng::{stream_id, stream_rng, StreamRng};

pub use cone::{ConeDirection, ConeSampler, SamplerMethod, WidthSet};
pub use rsc::{compatibility_constant, rsc_verify, sampled_curvature, SpikySlice};
pub use width::{gaussian_width_lower, gaussian_width_upper_polar, partial_complexity, PolarChoice, SamplingLaw};

/// What a Monte Carlo estimate bounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    LowerBound,
    UpperBound,
    Unbiased,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::LowerBound => "lower-bound",
            Direction::UpperBound => "upper-bound",
            Direction::Unbiased => "unbiased",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometryEstimate {
    pub estimator: String,
    pub value: f64,
    /// Batch-means standard error.
    pub stderr: f64,
    pub samples: usize,
    pub direction: Direction,
    pub seed: u64,
    pub wall_time_s: f64,
}

impl GeometryEstimate {
    pub const CSV_HEADER: &'static str = "estimator,value,stderr,samples,direction,seed,wall_time_s";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{:.6}",
            self.estimator,
            Num(self.value),
            Num(self.stderr),
            self.samples,
            self.direction.as_str(),
            self.seed,
            self.wall_time_s
        )
    }
}

const BATCHES: usize = 10;

/// Mean and batch-means standard error of an ordered sample.
pub fn batch_mean(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let b = BATCHES.min(n);
    if b < 2 {
        return (mean, 0.0);
    }
    let means: Vec<f64> = (0..b)
        .map(|j| {
            let chunk = &values[j * n / b..(j + 1) * n / b];
            chunk.iter().sum::<f64>() / chunk.len() as f64
        })
        .collect();
    let mb = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|v| (v - mb).powi(2)).sum::<f64>() / (b - 1) as f64;
    (mean, (var / b as f64).sqrt())
}

/// Spread of an extreme value estimate: standard error of the per-batch
/// extremes.
pub(crate) fn batch_extreme(values: &[f64], take_max: bool) -> (f64, f64) {
    let pick = |c: &[f64]| {
        c.iter()
            .copied()
            .fold(if take_max { f64::NEG_INFINITY } else { f64::INFINITY }, |a, v| {
                if take_max {
                    a.max(v)
                } else {
                    a.min(v)
                }
            })
    };
    let n = values.len();
    let best = pick(values);
    let b = BATCHES.min(n);
    if b < 2 {
        return (best, 0.0);
    }
    let ext: Vec<f64> = (0..b).map(|j| pick(&values[j * n / b..(j + 1) * n / b])).collect();
    let (_, se) = batch_mean(&ext);
    (best, se)
}

/// Runs `n` independent draws of `f` in parallel, in draw order.
pub(crate) fn parallel_draws<T: Send>(
    n: usize,
    seed: u64,
    tag: u64,
    f: impl Fn(usize, &mut StreamRng) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, stream_id(&[tag, i as u64]));
            f(i, &mut rng)
        })
        .collect()
}

pub(crate) fn estimate(
    name: &str,
    (value, stderr): (f64, f64),
    samples: usize,
    direction: Direction,
    seed: u64,
    start: Instant,
) -> GeometryEstimate {
    GeometryEstimate {
        estimator: name.to_owned(),
        value,
        stderr,
        samples,
        direction,
        seed,
        wall_time_s: start.elapsed().as_secs_f64(),
    }
}

/// Closed-form upper bound on the squared Gaussian width of the spectral
/// k-support descent set at a `d̄ × d̄` matrix with spectrum `sigma`:
/// `s(2d̄−s) + ((r+1)²‖σ_{I₂}‖₂²/‖σ_{I₁}‖₁² + |I₁|)(2d̄−s)`.
///
/// When `I₁` is empty the ratio term is taken as 0.
pub fn ksupport_width_bound(sigma: &[f64], k: usize, dbar: usize) -> Result<f64> {
    if sigma.len() > dbar {
        return Err(Error::DimensionMismatch(format!(
            "spectrum of length {} exceeds dimension {dbar}",
            sigma.len()
        )));
    }
    if k == 0 || k > dbar {
        return Err(Error::KOutOfRange { k, max: dbar });
    }
    let mut padded = sigma.to_vec();
    padded.resize(dbar, 0.0);
    let dec = find_kr_threshold(&padded, k)?;
    let s = rank_of(&padded) as f64;
    let two_d = 2.0 * dbar as f64 - s;
    let head: f64 = padded[dec.head.clone()].iter().map(|v| v * v).sum();
    let tail: f64 = padded[dec.tail.clone()].iter().sum();
    let ratio = if tail > 0.0 {
        ((dec.r + 1) as f64).powi(2) * head / (tail * tail)
    } else {
        0.0
    };
    Ok(s * two_d + (ratio + dec.tail.len() as f64) * two_d)
}

/// `β = (m / (c₀² w² log d))^{1/4}`.
pub fn beta_threshold(m: usize, width_sq: f64, d: usize, c0: f64) -> Result<f64> {
    check_positive(&[("m", m as f64), ("width_sq", width_sq), ("c0", c0)])?;
    if d < 2 {
        return Err(Error::InvalidArgument("d must be >= 2 so that log d > 0".into()));
    }
    Ok((m as f64 / (c0 * c0 * width_sq * (d as f64).ln())).powf(0.25))
}

/// `4 α*² √(c₀² w² log d / m)`.
pub fn spiky_error_floor(alpha_star: f64, c0: f64, width_sq: f64, d: usize, m: usize) -> Result<f64> {
    check_positive(&[
        ("alpha_star", alpha_star),
        ("c0", c0),
        ("width_sq", width_sq),
        ("m", m as f64),
    ])?;
    if d < 2 {
        return Err(Error::InvalidArgument("d must be >= 2 so that log d > 0".into()));
    }
    Ok(4.0 * alpha_star * alpha_star * (c0 * c0 * width_sq * (d as f64).ln() / m as f64).sqrt())
}

fn check_positive(args: &[(&str, f64)]) -> Result<()> {
    for (name, v) in args {
        if !(*v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
        }
    }
    Ok(())
}
