//! Orthogonally invariant norms on `d1 × d2` matrices.
//!
//! Every registered norm is a symmetric gauge of the singular values, so
//! each matrix operation reduces to an SVD followed by a vector operation
//! on the sorted spectrum. Frobenius skips the SVD where it can.

pub mod ksupport;
pub mod spectral;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DenseMatrix;
pub use ksupport::{find_kr_threshold, vector_ksupport_norm, vector_ksupport_prox, KSupportDecomposition};
pub use spectral::{singular_values, Svd};

/// A registered norm `R`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum NormSpec {
    Frobenius,
    Nuclear,
    /// Spectral k-support norm.
    KSupport {
        k: usize,
    },
}

/// Which operations a norm supports.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Capabilities {
    pub has_prox: bool,
    pub has_subdifferential: bool,
    pub has_cone_sampler: bool,
}

/// A member of `∂R(X)` together with the norm it belongs to.
#[derive(Clone, Debug)]
pub struct SubgradientSample {
    pub matrix: DenseMatrix,
    pub kind: NormSpec,
}

impl fmt::Display for NormSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormSpec::Frobenius => f.write_str("frobenius"),
            NormSpec::Nuclear => f.write_str("nuclear"),
            NormSpec::KSupport { k } => write!(f, "kspectral:k={k}"),
        }
    }
}

impl FromStr for NormSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "frobenius" => return Ok(NormSpec::Frobenius),
            "nuclear" => return Ok(NormSpec::Nuclear),
            _ => {}
        }
        let bad = || Error::InvalidArgument(format!("unknown norm '{s}'"));
        let rest = s.strip_prefix("kspectral:").ok_or_else(bad)?;
        let value = rest.trim().strip_prefix("k=").ok_or_else(bad)?;
        let k: usize = value
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad k in norm '{s}'")))?;
        if k == 0 {
            return Err(Error::KOutOfRange { k, max: usize::MAX });
        }
        Ok(NormSpec::KSupport { k })
    }
}

impl TryFrom<String> for NormSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<NormSpec> for String {
    fn from(n: NormSpec) -> String {
        n.to_string()
    }
}

impl NormSpec {
    pub fn capabilities(&self) -> Capabilities {
        Capabilities {
            has_prox: true,
            has_subdifferential: true,
            has_cone_sampler: true,
        }
    }

    /// Validate against a matrix shape.
    pub fn check_dims(&self, d1: usize, d2: usize) -> Result<()> {
        self.effective_k(d1.min(d2)).map(|_| ())
    }

    /// The `k` of the equivalent spectral k-support norm for spectra of
    /// length `p` (`1` for nuclear, `p` for Frobenius).
    pub fn effective_k(&self, p: usize) -> Result<usize> {
        match *self {
            NormSpec::Frobenius => Ok(p),
            NormSpec::Nuclear => Ok(1),
            NormSpec::KSupport { k } => {
                if k == 0 || k > p {
                    Err(Error::KOutOfRange { k, max: p })
                } else {
                    Ok(k)
                }
            }
        }
    }

    /// Norm of a sorted nonnegative spectrum.
    pub fn spectrum_value(&self, sigma: &[f64]) -> Result<f64> {
        match self {
            NormSpec::Frobenius => Ok(l2(sigma)),
            NormSpec::Nuclear => Ok(sigma.iter().sum()),
            NormSpec::KSupport { .. } => ksupport::sorted_value(sigma, self.effective_k(sigma.len())?),
        }
    }

    /// Dual norm of a sorted nonnegative spectrum.
    pub fn spectrum_dual(&self, sigma: &[f64]) -> Result<f64> {
        let k = self.effective_k(sigma.len())?;
        Ok(ksupport::sorted_dual_value(sigma, k))
    }

    /// Prox of `t R` on a sorted nonnegative spectrum.
    pub fn spectrum_prox(&self, sigma: &[f64], t: f64) -> Result<Vec<f64>> {
        Ok(match self {
            NormSpec::Frobenius => {
                let n = l2(sigma);
                let c = if n > t { 1.0 - t / n } else { 0.0 };
                sigma.iter().map(|v| v * c).collect()
            }
            NormSpec::Nuclear => sigma.iter().map(|v| (v - t).max(0.0)).collect(),
            NormSpec::KSupport { .. } => ksupport::sorted_prox(sigma, self.effective_k(sigma.len())?, t),
        })
    }

    /// Projection of a sorted spectrum onto `{R ≤ radius}`.
    pub fn spectrum_project_ball(&self, sigma: &[f64], radius: f64) -> Result<Vec<f64>> {
        let radius = radius.max(0.0);
        Ok(match self {
            NormSpec::Frobenius => {
                let n = l2(sigma);
                if n <= radius {
                    sigma.to_vec()
                } else {
                    sigma.iter().map(|v| v * radius / n).collect()
                }
            }
            NormSpec::Nuclear => project_sorted_l1(sigma, radius),
            NormSpec::KSupport { .. } => ksupport::project_sorted_ball(sigma, self.effective_k(sigma.len())?, radius),
        })
    }

    /// Projection of a sorted spectrum onto `{R* ≤ radius}`.
    pub fn spectrum_project_dual_ball(&self, sigma: &[f64], radius: f64) -> Result<Vec<f64>> {
        let radius = radius.max(0.0);
        Ok(match self {
            NormSpec::Nuclear => sigma.iter().map(|v| v.min(radius)).collect(),
            _ => ksupport::project_sorted_dual_ball(sigma, self.effective_k(sigma.len())?, radius),
        })
    }

    pub fn value(&self, x: &DenseMatrix) -> Result<f64> {
        self.check_dims(x.rows(), x.cols())?;
        match self {
            NormSpec::Frobenius => Ok(x.frobenius_norm()),
            _ => self.spectrum_value(&singular_values(x)),
        }
    }

    pub fn dual_value(&self, x: &DenseMatrix) -> Result<f64> {
        self.check_dims(x.rows(), x.cols())?;
        match self {
            NormSpec::Frobenius => Ok(x.frobenius_norm()),
            _ => self.spectrum_dual(&singular_values(x)),
        }
    }

    /// `argmin_X ½‖X − Z‖_F² + t R(X)`.
    pub fn prox(&self, z: &DenseMatrix, t: f64) -> Result<DenseMatrix> {
        self.check_dims(z.rows(), z.cols())?;
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::InvalidArgument(format!("prox parameter must be > 0, got {t}")));
        }
        if let NormSpec::Frobenius = self {
            let n = z.frobenius_norm();
            return Ok(if n > t {
                z.scaled(1.0 - t / n)
            } else {
                DenseMatrix::zeros(z.rows(), z.cols())
            });
        }
        let svd = Svd::new(z);
        let d = self.spectrum_prox(&svd.s, t)?;
        Ok(svd.compose(&d))
    }

    /// Euclidean projection onto `{X : R(X) ≤ radius}`.
    pub fn project_ball(&self, z: &DenseMatrix, radius: f64) -> Result<DenseMatrix> {
        self.check_dims(z.rows(), z.cols())?;
        if let NormSpec::Frobenius = self {
            let n = z.frobenius_norm();
            return Ok(if n <= radius {
                z.clone()
            } else {
                z.scaled(radius.max(0.0) / n)
            });
        }
        let svd = Svd::new(z);
        let d = self.spectrum_project_ball(&svd.s, radius)?;
        Ok(svd.compose(&d))
    }

    /// Euclidean projection onto `{X : R*(X) ≤ radius}`.
    pub fn project_dual_ball(&self, z: &DenseMatrix, radius: f64) -> Result<DenseMatrix> {
        self.check_dims(z.rows(), z.cols())?;
        if let NormSpec::Frobenius = self {
            let n = z.frobenius_norm();
            return Ok(if n <= radius {
                z.clone()
            } else {
                z.scaled(radius.max(0.0) / n)
            });
        }
        let svd = Svd::new(z);
        let d = self.spectrum_project_dual_ball(&svd.s, radius)?;
        Ok(svd.compose(&d))
    }

    /// Spectral weights of a subgradient at a sorted spectrum `sigma`.
    /// `h` (same length as `sigma`) fills the positions past the rank.
    pub fn spectrum_subgradient(&self, sigma: &[f64], h: Option<&[f64]>) -> Result<Vec<f64>> {
        let p = sigma.len();
        if let Some(h) = h {
            if h.len() != p {
                return Err(Error::DimensionMismatch(format!(
                    "free parameter has length {}, expected {p}",
                    h.len()
                )));
            }
            if h.iter().any(|v| !(v.abs() <= 1.0)) {
                return Err(Error::InvalidArgument("free parameter must satisfy |h_i| <= 1".into()));
            }
        }
        let s = spectral::rank_of(sigma);
        if s == 0 {
            return Err(Error::Domain("subgradient requested at the zero matrix".into()));
        }
        let hv = |i: usize| h.map_or(0.0, |h| h[i]);
        let mut d = vec![0.0; p];
        match self {
            NormSpec::Frobenius => {
                let n = l2(sigma);
                for (di, si) in d.iter_mut().zip(sigma) {
                    *di = si / n;
                }
            }
            NormSpec::Nuclear => {
                for (i, di) in d.iter_mut().enumerate() {
                    *di = if i < s { 1.0 } else { hv(i) };
                }
            }
            NormSpec::KSupport { .. } => {
                let k = self.effective_k(p)?;
                let dec = find_kr_threshold(sigma, k)?;
                let norm = ksupport::sorted_value(sigma, k)?;
                let pooled: f64 = sigma[dec.tail.clone()].iter().sum();
                let c = pooled / ((dec.r + 1) as f64 * norm);
                for i in dec.head.clone() {
                    d[i] = sigma[i] / norm;
                }
                for i in dec.tail.clone() {
                    d[i] = c;
                }
                for i in dec.null(p) {
                    d[i] = c * hv(i);
                }
            }
        }
        Ok(d)
    }

    /// A member of `∂R(X)`, built from an SVD of `X`.
    pub fn subgradient(&self, x: &DenseMatrix, h: Option<&[f64]>) -> Result<SubgradientSample> {
        self.check_dims(x.rows(), x.cols())?;
        let svd = Svd::new(x);
        let d = self.spectrum_subgradient(&svd.s, h)?;
        let matrix = match self {
            NormSpec::Frobenius => x.scaled(1.0 / x.frobenius_norm()),
            _ => svd.compose(&d),
        };
        Ok(SubgradientSample { matrix, kind: *self })
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Projection of a sorted nonnegative vector onto the ℓ1 ball.
fn project_sorted_l1(sigma: &[f64], radius: f64) -> Vec<f64> {
    let total: f64 = sigma.iter().sum();
    if total <= radius {
        return sigma.to_vec();
    }
    let mut acc = 0.0;
    let mut theta = 0.0;
    for (i, &v) in sigma.iter().enumerate() {
        acc += v;
        let cand = (acc - radius) / (i + 1) as f64;
        if v > cand {
            theta = cand;
        } else {
            break;
        }
    }
    sigma.iter().map(|v| (v - theta).max(0.0)).collect()
}

pub fn norm_value(spec: &NormSpec, x: &DenseMatrix) -> Result<f64> {
    spec.value(x)
}

pub fn dual_norm_value(spec: &NormSpec, x: &DenseMatrix) -> Result<f64> {
    spec.dual_value(x)
}

pub fn prox(spec: &NormSpec, z: &DenseMatrix, t: f64) -> Result<DenseMatrix> {
    spec.prox(z, t)
}

pub fn subgradient(spec: &NormSpec, x: &DenseMatrix, h: Option<&[f64]>) -> Result<SubgradientSample> {
    spec.subgradient(x, h)
}
