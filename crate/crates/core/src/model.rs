//! Ambient matrices, the uniform sampling model and the measurement
//! operators `P_Ω` / `P_Ω^*`.

use std::ops::{Add, Mul, Sub};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// Real `rows × cols` matrix stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite entry at flat index {pos}")));
        }
        Ok(Self { rows, cols, data })
    }

    pub(crate) fn from_vec_unchecked(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_vec_unchecked(rows, cols, vec![0.0; rows * cols])
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self::from_vec_unchecked(rows, cols, vec![value; rows * cols])
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::from_vec_unchecked(rows, cols, data)
    }

    /// Rectangular identity: ones on the leading diagonal.
    pub fn eye(rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn add_at(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] += v;
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.shape() == other.shape()
    }

    fn check_shape(&self, other: &Self) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )))
        }
    }

    /// Trace inner product `⟨self, other⟩`.
    pub fn dot(&self, other: &Self) -> f64 {
        assert!(self.same_shape(other), "dot: shape mismatch");
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn try_dot(&self, other: &Self) -> Result<f64> {
        self.check_shape(other)?;
        Ok(self.dot(other))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Largest absolute entry `‖X‖_∞`.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::from_vec_unchecked(self.rows, self.cols, self.data.iter().map(|v| v * c).collect())
    }

    pub fn scale_mut(&mut self, c: f64) {
        self.data.iter_mut().for_each(|v| *v *= c);
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Self) {
        assert!(self.same_shape(other), "axpy: shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_vec_unchecked(self.rows, self.cols, self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert!(self.same_shape(other), "zip_map: shape mismatch");
        Self::from_vec_unchecked(
            self.rows,
            self.cols,
            self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        )
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul: inner dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self.get(i, l);
                if a == 0.0 {
                    continue;
                }
                let row = &other.data[l * other.cols..(l + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn to_nalgebra(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_nalgebra(m: &nalgebra::DMatrix<f64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

impl Add for &DenseMatrix {
    type Output = DenseMatrix;
    fn add(self, rhs: &DenseMatrix) -> DenseMatrix {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &DenseMatrix {
    type Output = DenseMatrix;
    fn sub(self, rhs: &DenseMatrix) -> DenseMatrix {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Mul<f64> for &DenseMatrix {
    type Output = DenseMatrix;
    fn mul(self, rhs: f64) -> DenseMatrix {
        self.scaled(rhs)
    }
}

/// Ordered list of sampled cells `(i, j)` of a `d1 × d2` matrix. Indices are
/// 0-based; duplicates are meaningful and kept.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObservationSet {
    d1: usize,
    d2: usize,
    indices: Vec<(usize, usize)>,
}

impl ObservationSet {
    pub fn new(d1: usize, d2: usize, indices: Vec<(usize, usize)>) -> Result<Self> {
        if d1 == 0 || d2 == 0 {
            return Err(Error::InvalidArgument(format!(
                "observation dimensions must be positive, got {d1}x{d2}"
            )));
        }
        if let Some(k) = indices.iter().position(|&(i, j)| i >= d1 || j >= d2) {
            let (i, j) = indices[k];
            return Err(Error::InvalidArgument(format!(
                "observation {k} at ({i}, {j}) outside {d1}x{d2}"
            )));
        }
        Ok(Self { d1, d2, indices })
    }

    /// Every cell exactly once, in row-major order.
    pub fn full(d1: usize, d2: usize) -> Result<Self> {
        let indices = (0..d1).flat_map(|i| (0..d2).map(move |j| (i, j))).collect();
        Self::new(d1, d2, indices)
    }

    pub fn d1(&self) -> usize {
        self.d1
    }

    pub fn d2(&self) -> usize {
        self.d2
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.d1, self.d2)
    }

    /// `|Ω|`.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[(usize, usize)] {
        &self.indices
    }

    /// Multiplicity of every cell; this is the diagonal of `P_Ω^* P_Ω`.
    pub fn counts(&self) -> DenseMatrix {
        let mut c = DenseMatrix::zeros(self.d1, self.d2);
        for &(i, j) in &self.indices {
            c.add_at(i, j, 1.0);
        }
        c
    }

    /// Largest cell multiplicity, i.e. the operator norm of `P_Ω^* P_Ω`.
    pub fn max_multiplicity(&self) -> usize {
        let mut c = vec![0usize; self.d1 * self.d2];
        for &(i, j) in &self.indices {
            c[i * self.d2 + j] += 1;
        }
        c.into_iter().max().unwrap_or(0)
    }
}

/// Values attached to an [`ObservationSet`], in the same order.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationVector(pub Vec<f64>);

impl ObservationVector {
    pub fn zeros(m: usize) -> Self {
        Self(vec![0.0; m])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    Gaussian,
    Rademacher,
    /// Uniform on `[-√3, √3]`.
    UniformBounded,
}

impl NoiseKind {
    /// `‖η‖_Ψ₂ = sup_{p≥1} p^{-1/2} (E|η|^p)^{1/p}` of the unit-variance law.
    /// The supremum is attained at `p = 1` for all three families.
    pub fn psi2_bound(self) -> f64 {
        match self {
            NoiseKind::Gaussian => (2.0 / std::f64::consts::PI).sqrt(),
            NoiseKind::Rademacher => 1.0,
            NoiseKind::UniformBounded => 3.0_f64.sqrt() / 2.0,
        }
    }

    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            NoiseKind::Gaussian => StandardNormal.sample(rng),
            NoiseKind::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            NoiseKind::UniformBounded => {
                let a = 3.0_f64.sqrt();
                rng.random_range(-a..a)
            }
        }
    }
}

impl std::str::FromStr for NoiseKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "gaussian" => Ok(Self::Gaussian),
            "rademacher" => Ok(Self::Rademacher),
            "uniform-bounded" | "uniform" => Ok(Self::UniformBounded),
            other => Err(Error::InvalidArgument(format!("unknown noise kind `{other}`"))),
        }
    }
}

/// Zero-mean unit-variance noise scaled by `ν`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub scale: f64,
}

impl NoiseModel {
    pub fn new(kind: NoiseKind, scale: f64) -> Result<Self> {
        if !(scale >= 0.0 && scale.is_finite()) {
            return Err(Error::InvalidArgument(format!("noise scale must be >= 0, got {scale}")));
        }
        Ok(Self { kind, scale })
    }

    pub fn subgaussian_bound(&self) -> f64 {
        self.kind.psi2_bound()
    }

    /// Unscaled draws `η_1..η_m`.
    pub fn draw_unit(&self, m: usize, seed: u64, stream: u64) -> Vec<f64> {
        let mut rng = stream_rng(seed, stream);
        (0..m).map(|_| self.kind.sample(&mut rng)).collect()
    }
}

const OMEGA_STREAM: u64 = 0x4f_4d45_4741;
const NOISE_STREAM: u64 = 0x4e_4f49_5345;

/// `m` cells drawn i.i.d. uniformly with replacement.
pub fn sample_omega(d1: usize, d2: usize, m: usize, seed: u64) -> Result<ObservationSet> {
    if d1 == 0 || d2 == 0 {
        return Err(Error::InvalidArgument("d1 and d2 must be >= 1".into()));
    }
    let mut rng = stream_rng(seed, OMEGA_STREAM);
    let indices = (0..m)
        .map(|_| (rng.random_range(0..d1), rng.random_range(0..d2)))
        .collect();
    ObservationSet::new(d1, d2, indices)
}

/// `P_Ω(X)_k = X[i_k, j_k]`.
pub fn project_omega(x: &DenseMatrix, omega: &ObservationSet) -> Result<ObservationVector> {
    if x.shape() != omega.shape() {
        return Err(Error::DimensionMismatch(format!(
            "matrix {}x{} vs observation set {}x{}",
            x.rows(),
            x.cols(),
            omega.d1(),
            omega.d2()
        )));
    }
    Ok(ObservationVector(
        omega.indices().iter().map(|&(i, j)| x.get(i, j)).collect(),
    ))
}

/// `P_Ω^*(v) = Σ_k v_k e_{i_k} e_{j_k}^⊤`; repeated cells accumulate.
pub fn adjoint_omega(v: &ObservationVector, omega: &ObservationSet) -> Result<DenseMatrix> {
    adjoint_slice(v.values(), omega)
}

pub(crate) fn adjoint_slice(v: &[f64], omega: &ObservationSet) -> Result<DenseMatrix> {
    if v.len() != omega.len() {
        return Err(Error::DimensionMismatch(format!(
            "vector of length {} vs |Ω| = {}",
            v.len(),
            omega.len()
        )));
    }
    let mut out = DenseMatrix::zeros(omega.d1(), omega.d2());
    for (&(i, j), &val) in omega.indices().iter().zip(v) {
        out.add_at(i, j, val);
    }
    Ok(out)
}

/// `α_sp(X) = √(d1 d2) ‖X‖_∞ / ‖X‖_F`.
pub fn spikiness(x: &DenseMatrix) -> Result<f64> {
    let fro = x.frobenius_norm();
    if fro == 0.0 {
        return Err(Error::Domain("spikiness of the zero matrix is undefined".into()));
    }
    let n = (x.rows() * x.cols()) as f64;
    Ok(n.sqrt() * x.max_abs() / fro)
}

/// `y_k = Θ*[i_k, j_k] + ν η_k`.
pub fn generate_observations(
    theta: &DenseMatrix,
    omega: &ObservationSet,
    noise: &NoiseModel,
    seed: u64,
) -> Result<ObservationVector> {
    let clean = project_omega(theta, omega)?;
    if noise.scale == 0.0 {
        return Ok(clean);
    }
    let eta = noise.draw_unit(omega.len(), seed, NOISE_STREAM);
    Ok(ObservationVector(
        clean.0.iter().zip(&eta).map(|(c, e)| c + noise.scale * e).collect(),
    ))
}
