use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::NoiseKind;
use crate::norms::NormSpec;
use crate::solvers::{EstimatorConfig, EstimatorKind, GlmLoss, LambdaRule};

/// One point of the sample-size axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SampleSize {
    /// A fixed number of observations.
    Count(usize),
    /// `⌈f · ŵ² · log(d1 + d2)⌉` with the instance's measured width.
    WidthMultiple(f64),
    /// Every cell exactly once.
    Full,
}

impl SampleSize {
    /// Number of observations for an instance with squared width `width_sq`.
    pub fn resolve(self, d1: usize, d2: usize, width_sq: f64) -> usize {
        match self {
            SampleSize::Count(m) => m,
            SampleSize::WidthMultiple(f) => (f * width_sq * ((d1 + d2) as f64).ln()).ceil() as usize,
            SampleSize::Full => d1 * d2,
        }
    }
}

impl fmt::Display for SampleSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SampleSize::Count(m) => write!(f, "{m}"),
            SampleSize::WidthMultiple(x) => write!(f, "{x}*width"),
            SampleSize::Full => f.write_str("full"),
        }
    }
}

impl FromStr for SampleSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "full" {
            return Ok(SampleSize::Full);
        }
        if let Some(f) = s.strip_suffix("*width") {
            let f: f64 = f
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad width multiple `{s}`")))?;
            if !(f > 0.0) || !f.is_finite() {
                return Err(Error::Config(format!("width multiple must be positive, got `{s}`")));
            }
            return Ok(SampleSize::WidthMultiple(f));
        }
        s.parse()
            .map(SampleSize::Count)
            .map_err(|_| Error::Config(format!("bad sample size `{s}` (integer, `full` or `<f>*width`)")))
    }
}

impl Serialize for SampleSize {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            SampleSize::Count(m) => s.serialize_u64(*m as u64),
            other => s.serialize_str(&other.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for SampleSize {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(m) if m >= 0 => Ok(SampleSize::Count(m as usize)),
            Raw::Int(m) => Err(serde::de::Error::custom(format!("sample size must be >= 0, got {m}"))),
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceConfig {
    pub d1: usize,
    pub d2: usize,
    /// Rank with a flat spectrum; exclusive with `spectrum`.
    #[serde(default)]
    pub rank: Option<usize>,
    #[serde(default)]
    pub spectrum: Option<Vec<f64>>,
    pub target_spikiness: f64,
    pub norm: NormSpec,
}

impl InstanceConfig {
    /// The nonincreasing spectrum before normalization.
    pub fn spectrum(&self) -> Result<Vec<f64>> {
        let mut s = match (&self.rank, &self.spectrum) {
            (Some(r), None) => vec![1.0; *r],
            (None, Some(s)) => s.clone(),
            _ => return Err(Error::Config("give exactly one of `rank` and `spectrum`".into())),
        };
        if s.is_empty() || s.len() > self.d1.min(self.d2) {
            return Err(Error::Config(format!(
                "rank must be in 1..={}, got {}",
                self.d1.min(self.d2),
                s.len()
            )));
        }
        if s.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) || s.iter().all(|v| *v == 0.0) {
            return Err(Error::Config(
                "spectrum must be finite, nonnegative and not all zero".into(),
            ));
        }
        s.sort_by(|a, b| b.total_cmp(a));
        Ok(s)
    }
}

fn default_c0() -> Vec<f64> {
    vec![2.0]
}

fn default_noise() -> NoiseKind {
    NoiseKind::Gaussian
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub m: Vec<SampleSize>,
    pub nu: Vec<f64>,
    pub seeds: Vec<u64>,
    #[serde(default = "default_c0")]
    pub c0: Vec<f64>,
    #[serde(default = "default_noise")]
    pub noise: NoiseKind,
    /// Fixed regularization level used instead of the automatic rule.
    #[serde(default)]
    pub lambda: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorChoice {
    ConstrainedNorm,
    Dantzig,
    GlmRegularized,
}

impl EstimatorChoice {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorChoice::ConstrainedNorm => "constrained-norm",
            EstimatorChoice::Dantzig => "dantzig",
            EstimatorChoice::GlmRegularized => "glm-regularized",
        }
    }

    pub fn lambda_rule(self) -> Option<LambdaRule> {
        match self {
            EstimatorChoice::ConstrainedNorm => Some(LambdaRule::ConstrainedNorm),
            EstimatorChoice::Dantzig => Some(LambdaRule::Dantzig),
            EstimatorChoice::GlmRegularized => None,
        }
    }
}

fn default_max_iter() -> usize {
    5000
}

fn default_tol() -> f64 {
    1e-6
}

fn default_lambda_draws() -> usize {
    100
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSection {
    pub kind: EstimatorChoice,
    /// Defaults to the instance's target spikiness.
    #[serde(default)]
    pub alpha_star: Option<f64>,
    #[serde(default)]
    pub loss: Option<GlmLoss>,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_tol")]
    pub objective_tol: f64,
    #[serde(default = "default_tol")]
    pub constraint_tol: f64,
    /// Noise draws behind the automatic Dantzig level.
    #[serde(default = "default_lambda_draws")]
    pub lambda_draws: usize,
}

impl EstimatorSection {
    pub fn build(&self, lambda: f64, alpha_star: f64) -> EstimatorConfig {
        let estimator = match self.kind {
            EstimatorChoice::ConstrainedNorm => EstimatorKind::ConstrainedNorm { lambda },
            EstimatorChoice::Dantzig => EstimatorKind::Dantzig { lambda },
            EstimatorChoice::GlmRegularized => EstimatorKind::GlmRegularized {
                lambda,
                loss: self.loss.unwrap_or(GlmLoss::Gaussian),
            },
        };
        EstimatorConfig {
            estimator,
            alpha_star,
            max_iter: self.max_iter,
            objective_tol: self.objective_tol,
            constraint_tol: self.constraint_tol,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryBudget {
    pub n_gauss: usize,
    pub n_ascent: usize,
    pub n_rsc: usize,
    pub n_compat: usize,
}

impl Default for GeometryBudget {
    fn default() -> Self {
        Self {
            n_gauss: 60,
            n_ascent: 25,
            n_rsc: 40,
            n_compat: 20,
        }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_true() -> bool {
    true
}

/// A complete sweep description, read from one TOML file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Write each instance as a MatrixMarket file.
    #[serde(default = "default_true")]
    pub save_instances: bool,
    pub instance: InstanceConfig,
    pub sweep: SweepConfig,
    pub estimator: EstimatorSection,
    #[serde(default)]
    pub geometry: GeometryBudget,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml_str(&text, &base)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is plain data")
    }

    /// Output directory resolved against the config's directory.
    pub fn output_path(&self) -> PathBuf {
        self.base_dir.join(&self.output_dir)
    }

    pub fn alpha_star(&self) -> f64 {
        self.estimator.alpha_star.unwrap_or(self.instance.target_spikiness)
    }

    /// Replace the seed list by `seed, seed + 1, ...` of the same length.
    pub fn override_seed(&mut self, seed: u64) {
        let n = self.sweep.seeds.len().max(1) as u64;
        self.sweep.seeds = (0..n).map(|i| seed.wrapping_add(i)).collect();
    }

    pub fn validate(&self) -> Result<()> {
        let inst = &self.instance;
        if inst.d1 == 0 || inst.d2 == 0 {
            return Err(Error::Config("d1 and d2 must be >= 1".into()));
        }
        if inst.d1 + inst.d2 < 3 {
            return Err(Error::Config("d1 + d2 must be >= 3".into()));
        }
        inst.spectrum()?;
        if !(inst.target_spikiness >= 1.0) {
            return Err(Error::Config(format!(
                "target spikiness must be >= 1, got {}",
                inst.target_spikiness
            )));
        }
        inst.norm
            .check_dims(inst.d1, inst.d2)
            .map_err(|e| Error::Config(e.to_string()))?;

        let sw = &self.sweep;
        if sw.m.is_empty() || sw.nu.is_empty() || sw.seeds.is_empty() || sw.c0.is_empty() {
            return Err(Error::Config("sweep grids must be nonempty".into()));
        }
        let distinct: HashSet<u64> = sw.seeds.iter().copied().collect();
        if distinct.len() != sw.seeds.len() {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        if sw.m.contains(&SampleSize::Count(0)) {
            return Err(Error::Config("sample sizes must be positive".into()));
        }
        if sw.nu.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Config("noise levels must be finite and >= 0".into()));
        }
        if sw.c0.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::Config("c0 values must be positive".into()));
        }
        if let Some(l) = sw.lambda {
            if !(l >= 0.0) || !l.is_finite() {
                return Err(Error::Config(format!("lambda must be finite and >= 0, got {l}")));
            }
        }

        let est = &self.estimator;
        match est.kind {
            EstimatorChoice::GlmRegularized => {
                if sw.lambda.is_none() {
                    return Err(Error::Config("glm-regularized needs a fixed `sweep.lambda`".into()));
                }
                if est.loss.is_some_and(|l| l != GlmLoss::Gaussian) {
                    return Err(Error::Config(
                        "sweeps generate additive-noise data; only the gaussian loss is supported".into(),
                    ));
                }
            }
            _ if est.loss.is_some() => {
                return Err(Error::Config("`loss` applies to glm-regularized only".into()));
            }
            _ => {}
        }
        if est.kind == EstimatorChoice::Dantzig && est.lambda_draws == 0 && sw.lambda.is_none() {
            return Err(Error::Config("lambda_draws must be positive".into()));
        }
        est.build(sw.lambda.unwrap_or(0.0), self.alpha_star())
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;

        let g = &self.geometry;
        if g.n_gauss < 30 {
            return Err(Error::Config("geometry.n_gauss must be >= 30".into()));
        }
        if g.n_rsc == 0 || (est.kind == EstimatorChoice::Dantzig && g.n_compat == 0) {
            return Err(Error::Config("geometry budgets must be positive".into()));
        }
        Ok(())
    }
}
