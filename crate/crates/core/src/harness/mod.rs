//! Config-driven sweeps over synthetic instances.
//!
//! A sweep draws one instance per seed, measures its cone geometry, then for
//! every `(m, ν, c₀)` samples observations, picks `λ`, solves and records
//! the error next to the predicted bound terms.

mod config;
mod report;
mod verify;

use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{
    beta_threshold, compatibility_constant, gaussian_width_lower, rsc_verify, spiky_error_floor, ConeSampler,
    GeometryEstimate, SamplerMethod, SpikySlice, WidthSet,
};
use crate::io::{self, Num};
use crate::model::{generate_observations, sample_omega, spikiness, DenseMatrix, NoiseModel, ObservationSet};
use crate::rng::{gaussian_matrix, stream_id, stream_rng, StreamRng};
use crate::solvers::{auto_lambda, solve};

pub use config::{
    EstimatorChoice, EstimatorSection, ExperimentConfig, GeometryBudget, InstanceConfig, SampleSize, SweepConfig,
};
pub use report::{report, Summary, SummaryRow};
pub use verify::{verify, Check};

const INSTANCE_TAG: u64 = 0x494e_5354;
const WIDTH_SEED_TAG: u64 = 0x5749_4453;
const COMPAT_SEED_TAG: u64 = 0x4350_5453;
const OMEGA_SEED_TAG: u64 = 0x4f4d_5344;
const NOISE_SEED_TAG: u64 = 0x4e53_4544;
const RSC_SEED_TAG: u64 = 0x5253_5344;
const LAMBDA_SEED_TAG: u64 = 0x4c41_5344;
const MAX_ATTEMPTS: usize = 100;
/// Direction budget of the cone samplers used by a sweep.
const SAMPLER_BUDGET: usize = 10;

/// `Σᵢ σᵢ uᵢvᵢᵀ` with random orthonormal factors, scaled to unit Frobenius
/// norm and redrawn until its spikiness is at most the target.
///
/// The first half of the attempts orthonormalize Gaussian matrices (Haar
/// factors); the second half orthonormalize random sign matrices, whose
/// flatter columns reach targets Haar draws almost never meet.
pub fn generate_instance(cfg: &ExperimentConfig, seed: u64) -> Result<DenseMatrix> {
    let inst = &cfg.instance;
    let target = inst.target_spikiness;
    if !(target >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "spikiness is at least 1, target {target} cannot be met"
        )));
    }
    let sigma = inst.spectrum()?;
    let s = sigma.len();
    let mut best = f64::INFINITY;
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = stream_rng(seed, stream_id(&[INSTANCE_TAG, attempt as u64]));
        let draw = |rng: &mut StreamRng, d: usize| {
            if attempt < MAX_ATTEMPTS / 2 {
                gaussian_matrix(rng, d, s)
            } else {
                DenseMatrix::from_fn(d, s, |_, _| if rng.random::<bool>() { 1.0 } else { -1.0 })
            }
        };
        let u = orthonormal(draw(&mut rng, inst.d1));
        let v = orthonormal(draw(&mut rng, inst.d2));
        let scaled = DMatrix::from_fn(s, s, |i, j| if i == j { sigma[i] } else { 0.0 });
        let mut x = DenseMatrix::from_nalgebra(&(u * scaled * v.transpose()));
        x.scale_mut(1.0 / x.frobenius_norm());
        let a = spikiness(&x)?;
        if a <= target {
            return Ok(x);
        }
        best = best.min(a);
    }
    Err(Error::Domain(format!(
        "no instance with spikiness <= {target} in {MAX_ATTEMPTS} attempts (best {best})"
    )))
}

fn orthonormal(g: DenseMatrix) -> DMatrix<f64> {
    g.to_nalgebra().qr().q()
}

/// Per-instance geometry shared by all trials of a seed.
#[derive(Clone, Debug)]
pub struct InstanceGeometry {
    pub seed: u64,
    pub theta: DenseMatrix,
    pub spikiness: f64,
    pub width: GeometryEstimate,
    pub compat: Option<GeometryEstimate>,
}

impl InstanceGeometry {
    pub fn width_sq(&self) -> f64 {
        self.width.value * self.width.value
    }
}

/// One `(seed, m, ν, c₀)` trial.
///
/// Optional fields are `None` when the quantity does not exist for the
/// trial; `note` says why.
#[derive(Clone, Debug, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub m_spec: String,
    pub m: usize,
    pub nu: f64,
    pub c0: f64,
    pub d1: usize,
    pub d2: usize,
    pub norm: String,
    pub estimator: String,
    pub noise: String,
    pub spikiness: f64,
    pub alpha_star: f64,
    pub lambda: Option<f64>,
    /// Squared lower width estimate of the instance's descent set.
    pub width_sq: f64,
    /// Spikiness level below which cone directions enter the curvature minimum.
    pub spikiness_cutoff: Option<f64>,
    pub curvature: Option<f64>,
    /// `cutoff` when `curvature` was measured below `spikiness_cutoff`, else `unrestricted`.
    pub curvature_slice: String,
    pub compatibility: Option<f64>,
    pub noise_term: Option<f64>,
    pub floor_term: Option<f64>,
    pub bound: Option<f64>,
    /// `‖Θ̂ − Θ*‖_F² / (d1 d2)`.
    pub error: Option<f64>,
    pub bound_satisfied: Option<bool>,
    pub converged: bool,
    pub iterations: usize,
    pub status: String,
    pub note: String,
    pub solve_time_s: f64,
    pub geometry_time_s: f64,
}

impl TrialRecord {
    pub const CSV_HEADER: &'static str = "trial,seed,m_spec,m,nu,c0,d1,d2,norm,estimator,noise,spikiness,alpha_star,lambda,width_sq,spikiness_cutoff,curvature,curvature_slice,compatibility,noise_term,floor_term,bound,error,bound_satisfied,converged,iterations,status,note,solve_time_s,geometry_time_s";

    pub fn csv_row(&self) -> String {
        fn opt(v: Option<f64>) -> String {
            v.map(|x| Num(x).to_string()).unwrap_or_default()
        }
        let clean = |s: &str| s.replace([',', '\n'], ";");
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{:.6},{:.6}",
            self.trial,
            self.seed,
            self.m_spec,
            self.m,
            Num(self.nu),
            Num(self.c0),
            self.d1,
            self.d2,
            self.norm,
            self.estimator,
            self.noise,
            Num(self.spikiness),
            Num(self.alpha_star),
            opt(self.lambda),
            Num(self.width_sq),
            opt(self.spikiness_cutoff),
            opt(self.curvature),
            self.curvature_slice,
            opt(self.compatibility),
            opt(self.noise_term),
            opt(self.floor_term),
            opt(self.bound),
            opt(self.error),
            self.bound_satisfied.map(|b| b.to_string()).unwrap_or_default(),
            self.converged,
            self.iterations,
            clean(&self.status),
            clean(&self.note),
            self.solve_time_s,
            self.geometry_time_s
        )
    }

    /// Failed outright or stopped at the iteration cap.
    pub fn is_nonconverged(&self) -> bool {
        !self.converged
    }
}

pub struct SweepOutput {
    pub instances: Vec<InstanceGeometry>,
    pub records: Vec<TrialRecord>,
}

fn measure_instance(cfg: &ExperimentConfig, seed: u64) -> Result<InstanceGeometry> {
    let theta = generate_instance(cfg, seed)?;
    let realized = spikiness(&theta)?;
    let spec = cfg.instance.norm;
    let sampler = ConeSampler::new(spec, theta.clone(), SamplerMethod::BoundaryRay, SAMPLER_BUDGET)?;
    let set = WidthSet::from(sampler);
    let g = &cfg.geometry;
    let width = gaussian_width_lower(&set, g.n_gauss, g.n_ascent, stream_id(&[WIDTH_SEED_TAG, seed]))?;
    let compat = if cfg.estimator.kind == EstimatorChoice::Dantzig {
        Some(compatibility_constant(
            &set,
            &spec,
            g.n_compat,
            stream_id(&[COMPAT_SEED_TAG, seed]),
        )?)
    } else {
        None
    };
    Ok(InstanceGeometry {
        seed,
        theta,
        spikiness: realized,
        width,
        compat,
    })
}

struct TrialSpec {
    trial: usize,
    instance: usize,
    m_spec: SampleSize,
    nu: f64,
    c0: f64,
}

fn run_trial(cfg: &ExperimentConfig, inst: &InstanceGeometry, t: &TrialSpec) -> TrialRecord {
    let (d1, d2) = (cfg.instance.d1, cfg.instance.d2);
    let spec = cfg.instance.norm;
    let width_sq = inst.width_sq();
    let m = t.m_spec.resolve(d1, d2, width_sq);
    let alpha_star = cfg.alpha_star();
    let mut rec = TrialRecord {
        trial: t.trial,
        seed: inst.seed,
        m_spec: t.m_spec.to_string(),
        m,
        nu: t.nu,
        c0: t.c0,
        d1,
        d2,
        norm: spec.to_string(),
        estimator: cfg.estimator.kind.name().to_owned(),
        noise: format!("{:?}", cfg.sweep.noise).to_lowercase(),
        spikiness: inst.spikiness,
        alpha_star,
        lambda: None,
        width_sq,
        spikiness_cutoff: None,
        curvature: None,
        curvature_slice: String::new(),
        compatibility: inst.compat.as_ref().map(|c| c.value),
        noise_term: None,
        floor_term: None,
        bound: None,
        error: None,
        bound_satisfied: None,
        converged: false,
        iterations: 0,
        status: "ok".into(),
        note: String::new(),
        solve_time_s: 0.0,
        geometry_time_s: 0.0,
    };
    if let Err(e) = fill_trial(cfg, inst, t, &mut rec) {
        rec.status = format!("failed: {e}");
    }
    rec
}

fn fill_trial(cfg: &ExperimentConfig, inst: &InstanceGeometry, t: &TrialSpec, rec: &mut TrialRecord) -> Result<()> {
    let (d1, d2) = (rec.d1, rec.d2);
    let spec = cfg.instance.norm;
    let m = rec.m;
    let d = d1 + d2;
    let key = [inst.seed, m as u64];
    let omega = match t.m_spec {
        SampleSize::Full => ObservationSet::full(d1, d2)?,
        _ => sample_omega(d1, d2, m, stream_id(&[OMEGA_SEED_TAG, key[0], key[1]]))?,
    };
    let noise = NoiseModel::new(cfg.sweep.noise, t.nu)?;
    // the same unit noise for every ν of a (seed, m) pair
    let y = generate_observations(
        &inst.theta,
        &omega,
        &noise,
        stream_id(&[NOISE_SEED_TAG, key[0], key[1]]),
    )?;

    let cutoff = beta_threshold(m, rec.width_sq, d, t.c0)?;
    let floor_term = spiky_error_floor(rec.alpha_star, t.c0, rec.width_sq, d, m)? / (4.0 * (d1 * d2) as f64);
    rec.spikiness_cutoff = Some(cutoff);
    rec.floor_term = Some(floor_term);

    let geo_start = Instant::now();
    let sampler = ConeSampler::new(spec, inst.theta.clone(), SamplerMethod::BoundaryRay, SAMPLER_BUDGET)?;
    let set = WidthSet::from(sampler);
    let rsc_seed = stream_id(&[RSC_SEED_TAG, key[0], key[1]]);
    let mut notes = Vec::new();
    let curvature = match rsc_verify(&omega, &set, SpikySlice::new(cutoff)?, cfg.geometry.n_rsc, rsc_seed) {
        Ok(e) => {
            rec.curvature_slice = "cutoff".into();
            Some(e.value)
        }
        Err(Error::NonConvergence(_)) => {
            rec.curvature_slice = "unrestricted".into();
            notes.push("no sampled cone direction below the spikiness cutoff; curvature measured on the whole cone");
            match rsc_verify(&omega, &set, SpikySlice::unrestricted(), cfg.geometry.n_rsc, rsc_seed) {
                Ok(e) => Some(e.value),
                Err(Error::NonConvergence(_)) => None,
                Err(e) => return Err(e),
            }
        }
        Err(e) => return Err(e),
    };
    rec.geometry_time_s = geo_start.elapsed().as_secs_f64();
    rec.curvature = curvature.filter(|k| k.is_finite() && *k > 0.0);
    if rec.curvature.is_none() {
        notes.push("curvature unavailable (no admitted direction or zero curvature)");
    }

    let lambda = match (cfg.sweep.lambda, cfg.estimator.kind.lambda_rule()) {
        (Some(l), _) => l,
        (None, Some(rule)) => auto_lambda(
            rule,
            t.nu,
            &omega,
            &spec,
            cfg.sweep.noise,
            cfg.estimator.lambda_draws,
            stream_id(&[LAMBDA_SEED_TAG, key[0], key[1]]),
        )?,
        (None, None) => return Err(Error::Config("no regularization level".into())),
    };
    rec.lambda = Some(lambda);

    rec.noise_term = match (cfg.estimator.kind, rec.curvature, rec.compatibility) {
        (EstimatorChoice::ConstrainedNorm, Some(k), _) => Some(t.nu * t.nu / k),
        (EstimatorChoice::Dantzig, Some(k), Some(p)) => Some((lambda * p / k).powi(2)),
        (EstimatorChoice::GlmRegularized, _, _) => {
            notes.push("no error bound is defined for the regularized loss");
            None
        }
        _ => None,
    };
    rec.bound = rec.noise_term.map(|n| {
        let c = if cfg.estimator.kind == EstimatorChoice::Dantzig {
            16.0
        } else {
            4.0
        };
        c * n.max(floor_term)
    });

    let est = cfg.estimator.build(lambda, rec.alpha_star);
    let result = solve(&y, &omega, &spec, &est);
    rec.note = notes.join("; ");
    let result = result?;
    rec.solve_time_s = result.wall_time_s;
    rec.converged = result.converged;
    rec.iterations = result.iterations;
    if !result.converged {
        rec.status = "not-converged".into();
    }
    let err = (&result.theta - &inst.theta).frobenius_norm_sq() / (d1 * d2) as f64;
    rec.error = Some(err);
    rec.bound_satisfied = rec.bound.map(|b| err <= b);
    Ok(())
}

/// Runs every trial of the sweep; trial failures are recorded, not raised.
/// Errors only if an instance cannot be generated or measured.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepOutput> {
    cfg.validate()?;
    let instances: Vec<InstanceGeometry> = cfg
        .sweep
        .seeds
        .par_iter()
        .map(|&seed| measure_instance(cfg, seed))
        .collect::<Result<_>>()?;
    let mut specs = Vec::new();
    for (i, _) in instances.iter().enumerate() {
        for &m_spec in &cfg.sweep.m {
            for &nu in &cfg.sweep.nu {
                for &c0 in &cfg.sweep.c0 {
                    specs.push(TrialSpec {
                        trial: specs.len(),
                        instance: i,
                        m_spec,
                        nu,
                        c0,
                    });
                }
            }
        }
    }
    let records = specs
        .par_iter()
        .map(|t| run_trial(cfg, &instances[t.instance], t))
        .collect();
    Ok(SweepOutput { instances, records })
}

/// Output format of per-trial records.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecordFormat {
    Csv,
    Json,
}

/// Writes `trials.csv` (or `trials.json`), `summary.csv`, `summary.txt`,
/// `geometry.csv` and, if enabled, one MatrixMarket file per instance.
pub fn write_outputs(dir: &Path, cfg: &ExperimentConfig, out: &SweepOutput, format: RecordFormat) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    match format {
        RecordFormat::Csv => {
            let mut s = String::from(TrialRecord::CSV_HEADER);
            s.push('\n');
            for r in &out.records {
                s.push_str(&r.csv_row());
                s.push('\n');
            }
            std::fs::write(dir.join("trials.csv"), s)?;
        }
        RecordFormat::Json => {
            let s = serde_json::to_string_pretty(&out.records).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            std::fs::write(dir.join("trials.json"), s)?;
        }
    }
    let summary = report(cfg, &out.records)?;
    std::fs::write(dir.join("summary.csv"), summary.to_csv())?;
    std::fs::write(dir.join("summary.txt"), summary.to_text())?;

    let mut g = format!("instance_seed,{}\n", GeometryEstimate::CSV_HEADER);
    for inst in &out.instances {
        for e in std::iter::once(&inst.width).chain(inst.compat.as_ref()) {
            g.push_str(&format!("{},{}\n", inst.seed, e.csv_row()));
        }
    }
    std::fs::write(dir.join("geometry.csv"), g)?;
    if cfg.save_instances {
        for inst in &out.instances {
            io::write_matrix(&dir.join(format!("theta_seed{}.mtx", inst.seed)), &inst.theta)?;
        }
    }
    Ok(())
}
