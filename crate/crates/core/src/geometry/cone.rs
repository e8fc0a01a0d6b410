use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DenseMatrix;
use crate::norms::NormSpec;
use crate::rng::{gaussian_matrix, StreamRng};

/// Relative slack allowed on `R(Θ* + Δ) ≤ R(Θ*)`.
pub const MEMBERSHIP_TOL: f64 = 1e-9;
const UNIT_TOL: f64 = 1e-12;
/// Offsets `τ‖D‖_F / ‖Θ*‖_F` tried when projecting `Θ* + τD` onto the ball.
const OFFSETS: [f64; 6] = [1e-4, 1e-3, 1e-2, 0.1, 0.3, 1.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerMethod {
    /// Project `Θ* + τD` onto `{R ≤ R(Θ*)}` and keep the displacement.
    BoundaryRay,
    /// Keep `D` only if a short step along it does not increase `R`.
    Rejection,
}

/// A unit direction of the descent cone, with a step length `reach` at
/// which `R(Θ* + reach·dir) ≤ R(Θ*)` was verified.
#[derive(Clone, Debug)]
pub struct ConeDirection {
    pub dir: DenseMatrix,
    pub reach: f64,
}

/// Sampler for `{Δ : R(Θ* + tΔ) ≤ R(Θ*) for some t > 0, ‖Δ‖_F = 1}`.
#[derive(Clone, Debug)]
pub struct ConeSampler {
    spec: NormSpec,
    anchor: DenseMatrix,
    method: SamplerMethod,
    budget: usize,
    radius: f64,
    anchor_norm: f64,
}

impl ConeSampler {
    pub fn new(spec: NormSpec, anchor: DenseMatrix, method: SamplerMethod, budget: usize) -> Result<Self> {
        spec.check_dims(anchor.rows(), anchor.cols())?;
        let radius = spec.value(&anchor)?;
        if radius == 0.0 {
            return Err(Error::Domain(
                "descent cone at the zero matrix is the whole space".into(),
            ));
        }
        if budget == 0 {
            return Err(Error::InvalidArgument("sampler budget must be positive".into()));
        }
        Ok(Self {
            spec,
            anchor_norm: anchor.frobenius_norm(),
            anchor,
            method,
            budget,
            radius,
        })
    }

    pub fn spec(&self) -> &NormSpec {
        &self.spec
    }

    pub fn anchor(&self) -> &DenseMatrix {
        &self.anchor
    }

    pub fn method(&self) -> SamplerMethod {
        self.method
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    /// `R(Θ*)`.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn shape(&self) -> (usize, usize) {
        self.anchor.shape()
    }

    /// Membership check for an emitted direction.
    pub fn contains(&self, d: &ConeDirection) -> bool {
        if (d.dir.frobenius_norm() - 1.0).abs() > UNIT_TOL || !(d.reach > 0.0) {
            return false;
        }
        let mut x = self.anchor.clone();
        x.axpy(d.reach, &d.dir);
        self.spec
            .value(&x)
            .is_ok_and(|v| v <= self.radius * (1.0 + MEMBERSHIP_TOL))
    }

    /// Projection onto `{X : R(X) ≤ R(Θ*)}`.
    pub fn project(&self, z: &DenseMatrix) -> Result<DenseMatrix> {
        self.spec.project_ball(z, self.radius)
    }

    /// The direction of `x − Θ*` for a point `x` of the ball, if it is
    /// nonzero and passes the membership check.
    pub fn direction_to(&self, x: &DenseMatrix) -> Option<ConeDirection> {
        let delta = x - &self.anchor;
        let reach = delta.frobenius_norm();
        if !(reach > 1e-12 * self.anchor_norm) {
            return None;
        }
        let d = ConeDirection {
            dir: delta.scaled(1.0 / reach),
            reach,
        };
        self.contains(&d).then_some(d)
    }

    /// Directions obtained by projecting `Θ* + τD` for the offset grid.
    pub fn ray_directions(&self, d: &DenseMatrix) -> Result<Vec<ConeDirection>> {
        let dn = d.frobenius_norm();
        if dn == 0.0 {
            return Ok(Vec::new());
        }
        let mut out = Vec::with_capacity(OFFSETS.len());
        for c in OFFSETS {
            let mut z = self.anchor.clone();
            z.axpy(c * self.anchor_norm / dn, d);
            if let Some(dir) = self.direction_to(&self.project(&z)?) {
                out.push(dir);
            }
        }
        Ok(out)
    }

    /// One cone direction from a random draw, or `None` if the budget runs
    /// out.
    pub fn sample(&self, rng: &mut StreamRng) -> Result<Option<ConeDirection>> {
        let (d1, d2) = self.shape();
        for _ in 0..self.budget {
            let d = gaussian_matrix(rng, d1, d2);
            match self.method {
                SamplerMethod::BoundaryRay => {
                    let c = 10f64.powf(rng.random_range(-3.0..0.0));
                    let mut z = self.anchor.clone();
                    z.axpy(c * self.anchor_norm / d.frobenius_norm(), &d);
                    if let Some(dir) = self.direction_to(&self.project(&z)?) {
                        return Ok(Some(dir));
                    }
                }
                SamplerMethod::Rejection => {
                    let unit = d.scaled(1.0 / d.frobenius_norm());
                    let mut t = self.anchor_norm;
                    for _ in 0..20 {
                        let mut x = self.anchor.clone();
                        x.axpy(t, &unit);
                        if self.spec.value(&x)? <= self.radius {
                            return Ok(Some(ConeDirection { dir: unit, reach: t }));
                        }
                        t *= 0.5;
                    }
                }
            }
        }
        Ok(None)
    }

    /// Local ascent of `f(Δ/‖Δ‖)` over `Δ = X − Θ*`, `X` in the ball.
    /// `grad` is the gradient of `f` at a unit direction; returns the best
    /// direction visited and its value.
    pub fn ascend(
        &self,
        start: ConeDirection,
        steps: usize,
        f: impl Fn(&DenseMatrix) -> Result<f64>,
        grad: impl Fn(&DenseMatrix) -> Result<DenseMatrix>,
    ) -> Result<(ConeDirection, f64)> {
        let mut best_val = f(&start.dir)?;
        let mut best = start;
        let mut gamma = 0.5;
        for _ in 0..steps {
            let g = grad(&best.dir)?;
            // tangential part: the radial component does not change f
            let mut tang = g.clone();
            tang.axpy(-g.dot(&best.dir), &best.dir);
            let tn = tang.frobenius_norm();
            if tn <= 1e-15 {
                break;
            }
            let mut x = self.anchor.clone();
            x.axpy(best.reach, &best.dir);
            x.axpy(gamma * best.reach / tn, &tang);
            let cand = self.direction_to(&self.project(&x)?);
            match cand {
                Some(c) => {
                    let v = f(&c.dir)?;
                    if v > best_val {
                        best_val = v;
                        best = c;
                        gamma = (gamma * 1.5).min(4.0);
                    } else {
                        gamma *= 0.5;
                    }
                }
                None => gamma *= 0.5,
            }
        }
        Ok((best, best_val))
    }

    /// Lower estimate of `sup_{Δ ∈ cone, ‖Δ‖=1} ⟨Δ, M⟩`.
    pub fn sup_inner(&self, m: &DenseMatrix, n_ascent: usize) -> Result<f64> {
        let mut best: Option<(ConeDirection, f64)> = None;
        for d in self.ray_directions(m)? {
            let v = d.dir.dot(m);
            if best.as_ref().is_none_or(|(_, b)| v > *b) {
                best = Some((d, v));
            }
        }
        let Some((start, _)) = best else {
            return Ok(0.0);
        };
        let (_, v) = self.ascend(start, n_ascent, |x| Ok(x.dot(m)), |_| Ok(m.clone()))?;
        Ok(v)
    }
}

/// A subset of the unit sphere over which suprema are taken.
#[derive(Clone, Debug)]
pub enum WidthSet {
    /// The whole unit sphere.
    Sphere { rows: usize, cols: usize },
    /// A finite list of points.
    Points(Vec<DenseMatrix>),
    /// The unit directions of a descent cone.
    DescentCone(ConeSampler),
}

impl From<ConeSampler> for WidthSet {
    fn from(s: ConeSampler) -> Self {
        WidthSet::DescentCone(s)
    }
}

impl WidthSet {
    pub fn shape(&self) -> Result<(usize, usize)> {
        match self {
            WidthSet::Sphere { rows, cols } => Ok((*rows, *cols)),
            WidthSet::Points(p) => p
                .first()
                .map(|x| x.shape())
                .ok_or_else(|| Error::InvalidArgument("empty point set".into())),
            WidthSet::DescentCone(s) => Ok(s.shape()),
        }
    }

    /// `sup_{X ∈ S} ⟨X, M⟩` (a lower estimate for cones).
    pub fn sup_inner(&self, m: &DenseMatrix, n_ascent: usize) -> Result<f64> {
        match self {
            WidthSet::Sphere { .. } => Ok(m.frobenius_norm()),
            WidthSet::Points(p) => Ok(p.iter().map(|x| x.dot(m)).fold(f64::NEG_INFINITY, f64::max)),
            WidthSet::DescentCone(s) => s.sup_inner(m, n_ascent),
        }
    }

    /// Whether suprema over this set are exact rather than lower estimates.
    pub fn is_exact(&self) -> bool {
        !matches!(self, WidthSet::DescentCone(_))
    }
}
