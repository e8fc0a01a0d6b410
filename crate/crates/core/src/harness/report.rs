use std::fmt::Write as _;

use super::{ExperimentConfig, TrialRecord};
use crate::error::{Error, Result};
use crate::io::Num;

/// Aggregate of the trials sharing `(m_spec, ν, c₀)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub m_spec: String,
    pub m_mean: f64,
    pub nu: f64,
    pub c0: f64,
    pub trials: usize,
    /// Trials without an error value.
    pub failed: usize,
    pub error_mean: Option<f64>,
    pub error_se: Option<f64>,
    pub noise_term_mean: Option<f64>,
    pub floor_term_mean: Option<f64>,
    pub bound_mean: Option<f64>,
    pub curvature_mean: Option<f64>,
    /// Fraction of trials with both values present where error ≤ bound.
    pub bound_satisfied: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub provenance: Vec<String>,
    pub rows: Vec<SummaryRow>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Sample standard deviation over `√n`; 0 for a single value.
fn std_err(v: &[f64]) -> Option<f64> {
    let m = mean(v)?;
    if v.len() < 2 {
        return Some(0.0);
    }
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
    Some((var / v.len() as f64).sqrt())
}

fn collect(rows: &[&TrialRecord], f: impl Fn(&TrialRecord) -> Option<f64>) -> Vec<f64> {
    rows.iter().filter_map(|r| f(r)).collect()
}

/// Per-`(m, ν, c₀)` means in first-appearance order. No wall times enter,
/// so equal records give byte-identical output.
pub fn report(cfg: &ExperimentConfig, records: &[TrialRecord]) -> Result<Summary> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("no trial records to summarize".into()));
    }
    let mut keys: Vec<(String, u64, u64)> = Vec::new();
    for r in records {
        let k = (r.m_spec.clone(), r.nu.to_bits(), r.c0.to_bits());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    let rows = keys
        .into_iter()
        .map(|(m_spec, nu, c0)| {
            let group: Vec<&TrialRecord> = records
                .iter()
                .filter(|r| r.m_spec == m_spec && r.nu.to_bits() == nu && r.c0.to_bits() == c0)
                .collect();
            let errors = collect(&group, |r| r.error);
            let judged: Vec<bool> = group.iter().filter_map(|r| r.bound_satisfied).collect();
            SummaryRow {
                m_mean: mean(&collect(&group, |r| Some(r.m as f64))).unwrap_or(0.0),
                nu: f64::from_bits(nu),
                c0: f64::from_bits(c0),
                trials: group.len(),
                failed: group.len() - errors.len(),
                error_mean: mean(&errors),
                error_se: std_err(&errors),
                noise_term_mean: mean(&collect(&group, |r| r.noise_term)),
                floor_term_mean: mean(&collect(&group, |r| r.floor_term)),
                bound_mean: mean(&collect(&group, |r| r.bound)),
                curvature_mean: mean(&collect(&group, |r| r.curvature)),
                bound_satisfied: (!judged.is_empty())
                    .then(|| judged.iter().filter(|b| **b).count() as f64 / judged.len() as f64),
                m_spec,
            }
        })
        .collect();
    Ok(Summary {
        provenance: provenance(cfg),
        rows,
    })
}

fn provenance(cfg: &ExperimentConfig) -> Vec<String> {
    let g = &cfg.geometry;
    let inst = &cfg.instance;
    let mut p = vec![
        format!(
            "instance: d1={} d2={} spectrum={:?} target_spikiness={} norm={}",
            inst.d1,
            inst.d2,
            inst.spectrum().unwrap_or_default(),
            inst.target_spikiness,
            inst.norm
        ),
        format!(
            "estimator: {} alpha_star={} lambda={}",
            cfg.estimator.kind.name(),
            cfg.alpha_star(),
            cfg.sweep
                .lambda
                .map_or_else(|| "automatic".to_owned(), |l| format!("fixed {l}"))
        ),
        format!(
            "width_sq: squared Monte Carlo lower estimate of the descent-set Gaussian width per instance (n_gauss={} n_ascent={})",
            g.n_gauss, g.n_ascent
        ),
        format!(
            "curvature: minimum sampled (d1d2/m)|P_Omega(X)|^2 over {} cone directions with spikiness < spikiness_cutoff on the trial's observations; unrestricted when none qualify (see trials curvature_slice)",
            g.n_rsc
        ),
        "spikiness_cutoff: (m / (c0^2 width_sq log(d1+d2)))^(1/4) with c0 from the sweep".to_owned(),
        "floor_term: alpha_star^2/(d1 d2) * sqrt(c0^2 width_sq log(d1+d2) / m)".to_owned(),
    ];
    p.push(match cfg.estimator.kind {
        super::EstimatorChoice::ConstrainedNorm => "noise_term: nu^2/curvature; bound: 4 max(noise_term, floor_term)".to_owned(),
        super::EstimatorChoice::Dantzig => format!(
            "noise_term: lambda^2 compatibility^2/curvature^2 with the compatibility lower estimate ({} ascents); bound: 16 max(noise_term, floor_term)",
            g.n_compat
        ),
        super::EstimatorChoice::GlmRegularized => "noise_term and bound: not defined for the regularized loss".to_owned(),
    });
    p.push("error: |Theta_hat - Theta_star|_F^2 / (d1 d2); error_se: sample std / sqrt(n)".to_owned());
    p
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| Num(x).to_string()).unwrap_or_default()
}

impl Summary {
    pub const CSV_HEADER: &'static str = "m_spec,m_mean,nu,c0,trials,failed,error_mean,error_se,noise_term_mean,floor_term_mean,bound_mean,curvature_mean,bound_satisfied";

    /// `#`-prefixed provenance lines, the header, then one row per group.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for line in &self.provenance {
            let _ = writeln!(s, "# {line}");
        }
        let _ = writeln!(s, "{}", Self::CSV_HEADER);
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.m_spec,
                Num(r.m_mean),
                Num(r.nu),
                Num(r.c0),
                r.trials,
                r.failed,
                opt(r.error_mean),
                opt(r.error_se),
                opt(r.noise_term_mean),
                opt(r.floor_term_mean),
                opt(r.bound_mean),
                opt(r.curvature_mean),
                opt(r.bound_satisfied)
            );
        }
        s
    }

    pub fn to_text(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_owned(), |x| format!("{x:.4e}"));
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:>12} {:>8} {:>8} {:>6} {:>6} {:>24} {:>11} {:>11} {:>8}",
            "m", "m_mean", "nu", "c0", "n", "error (mean ± se)", "bound", "curvature", "in-bound"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:>12} {:>8.0} {:>8} {:>6} {:>6} {:>11} ± {:>10} {:>11} {:>11} {:>8}",
                r.m_spec,
                r.m_mean,
                r.nu,
                r.c0,
                format!("{}/{}", r.trials - r.failed, r.trials),
                fmt(r.error_mean),
                fmt(r.error_se),
                fmt(r.bound_mean),
                fmt(r.curvature_mean),
                r.bound_satisfied
                    .map_or_else(|| "-".to_owned(), |f| format!("{:.0}%", 100.0 * f)),
            );
        }
        s
    }
}
