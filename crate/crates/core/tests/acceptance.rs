//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits 0
//! either way; library errors and panics are reported as FAIL.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use common::{ksupport_by_groups, latent_prox, low_rank, random_orthogonal, slope, spectrum, JacobiSvd};
use rand::Rng;
use smc_core::geometry::{
    beta_threshold, gaussian_width_lower, gaussian_width_upper_polar, ksupport_width_bound, partial_complexity,
    rsc_verify, ConeSampler, GeometryEstimate, PolarChoice, SamplerMethod, SamplingLaw, SpikySlice, WidthSet,
};
use smc_core::harness::{generate_instance, report, run_sweep, write_outputs, ExperimentConfig, RecordFormat};
use smc_core::model::{sample_omega, spikiness};
use smc_core::rng::{gaussian_matrix, stream_rng};
use smc_core::solvers::{glm_gradient, glm_loss, glm_zero_threshold, solve, EstimatorConfig, EstimatorKind, GlmLoss};
use smc_core::{DenseMatrix, NoiseKind, NormSpec, ObservationVector};

type Check = Result<Outcome, Box<dyn std::error::Error>>;
type Criterion = (&'static str, fn() -> Check);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Check {
    Ok(Outcome { pass, detail })
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

fn cone(spec: NormSpec, anchor: &DenseMatrix) -> Result<WidthSet, smc_core::Error> {
    Ok(WidthSet::from(ConeSampler::new(
        spec,
        anchor.clone(),
        SamplerMethod::BoundaryRay,
        10,
    )?))
}

/// Square of an estimate with its delta-method standard error.
fn squared(e: &GeometryEstimate) -> (f64, f64) {
    (e.value * e.value, 2.0 * e.value.abs() * e.stderr)
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn shipped_config(name: &str) -> Result<String, std::io::Error> {
    std::fs::read_to_string(configs_dir().join(name))
}

fn nondecreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-12))
}

fn fmt(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn norm_oracle() -> Check {
    let mut rng = stream_rng(101, 0);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let d1 = rng.random_range(1..=5);
        let d2 = rng.random_range(1..=5);
        let k = rng.random_range(1..=d1.min(d2).min(3));
        let x = gaussian_matrix(&mut rng, d1, d2);
        let got = NormSpec::KSupport { k }.value(&x)?;
        worst = worst.max(rel(got, ksupport_by_groups(&spectrum(&x), k)));
    }
    outcome(
        worst <= 1e-5,
        format!("max relative error {worst:.2e} over 20 matrices (tolerance 1e-5)"),
    )
}

fn prox_oracle() -> Check {
    let mut rng = stream_rng(102, 0);
    let mut worst_gap = 0.0f64;
    for i in 0..20 {
        let d1 = rng.random_range(1..=6);
        let d2 = rng.random_range(1..=6);
        let t = rng.random_range(0.05..2.0);
        let (spec, k) = if i % 2 == 0 {
            (NormSpec::Nuclear, 1)
        } else {
            let k = rng.random_range(1..=d1.min(d2));
            (NormSpec::KSupport { k }, k)
        };
        let z = gaussian_matrix(&mut rng, d1, d2);
        let p = spec.prox(&z, t)?;
        let got = 0.5 * (&p - &z).frobenius_norm_sq() + t * spec.value(&p)?;
        let (_, want) = latent_prox(&spectrum(&z), k, t, 200_000);
        worst_gap = worst_gap.max(got - want);
    }

    let mut violations = 0;
    for _ in 0..1000 {
        let d1 = rng.random_range(1..=6);
        let d2 = rng.random_range(1..=6);
        let k = rng.random_range(1..=d1.min(d2));
        let spec = if rng.random::<bool>() {
            NormSpec::Nuclear
        } else {
            NormSpec::KSupport { k }
        };
        let t = rng.random_range(0.01..4.0);
        let z = gaussian_matrix(&mut rng, d1, d2).scaled(rng.random_range(0.1..5.0));
        let p = spec.prox(&z, t)?;
        let r = &z - &p;
        let s = JacobiSvd::new(&r.scaled(1.0 / t)).s;
        let dual = match spec {
            NormSpec::KSupport { k } => s.iter().take(k).map(|v| v * v).sum::<f64>().sqrt(),
            _ => s[0],
        };
        let value = spec.value(&p)?;
        let tight = (r.dot(&p) - t * value).abs() <= 1e-8 * (1.0 + t * value);
        if dual > 1.0 + 1e-6 || !tight {
            violations += 1;
        }
    }
    outcome(
        worst_gap <= 1e-7 && violations == 0,
        format!(
            "max objective excess over latent descent {worst_gap:.2e} on 20 triples (tolerance 1e-7); \
             prox characterization violated on {violations}/1000 inputs"
        ),
    )
}

fn width_sandwich() -> Check {
    let mut lines = Vec::new();
    let mut pass = true;
    for seed in 1..=5u64 {
        let anchor = low_rank(30, 30, 2, seed);
        let lo = gaussian_width_lower(&cone(NormSpec::Nuclear, &anchor)?, 100, 25, seed)?;
        let hi = gaussian_width_upper_polar(&NormSpec::Nuclear, &anchor, 100, PolarChoice::Optimal, seed)?;
        let ((l2, lse), (h2, hse)) = (squared(&lo), squared(&hi));
        let ordered = l2 <= h2 + 3.0 * lse.hypot(hse);
        let capped = h2 <= 360.0 + 3.0 * hse;
        pass &= ordered && capped;
        lines.push(format!("{l2:.1}<={h2:.1}<=360"));
    }
    outcome(
        pass,
        format!("lower^2 <= upper^2 <= 3dr with 3 SE, per seed: {}", lines.join(", ")),
    )
}

fn ksupport_bound() -> Check {
    let dbar = 20;
    let mut rng = stream_rng(104, 0);
    let mut lines = Vec::new();
    let mut pass = true;
    for i in 0..5u64 {
        let s = rng.random_range(2..=4usize);
        let k = rng.random_range(1..=s);
        let mut sigma: Vec<f64> = (0..s).map(|_| rng.random_range(0.2..1.0)).collect();
        sigma.sort_by(|a, b| b.total_cmp(a));
        let scale = sigma.iter().map(|v| v * v).sum::<f64>().sqrt();
        sigma.iter_mut().for_each(|v| *v /= scale);
        let u = random_orthogonal(dbar, 1000 + i);
        let v = random_orthogonal(dbar, 2000 + i);
        let anchor = DenseMatrix::from_fn(dbar, dbar, |a, b| {
            (0..s).map(|l| u.get(a, l) * sigma[l] * v.get(b, l)).sum()
        });
        let lo = gaussian_width_lower(&cone(NormSpec::KSupport { k }, &anchor)?, 60, 25, 200 + i)?;
        let (l2, lse) = squared(&lo);
        let bound = ksupport_width_bound(&sigma, k, dbar)?;
        pass &= l2 <= bound + 3.0 * lse;
        lines.push(format!("s={s} k={k}: {l2:.1}<={bound:.1}"));
    }
    outcome(
        pass,
        format!("lower^2 <= closed-form bound with 3 SE: {}", lines.join(", ")),
    )
}

fn rsc_emergence() -> Check {
    let (d, c0) = (60, 2.0);
    let multipliers = [0.5, 1.0, 2.0, 4.0];
    let mut curvature = vec![Vec::new(); multipliers.len()];
    let mut unrestricted = vec![Vec::new(); multipliers.len()];
    let mut sliced = 0;
    let mut good = 0;
    let mut betas = vec![0.0; multipliers.len()];
    for seed in 1..=20u64 {
        let anchor = low_rank(30, 30, 2, seed);
        let set = cone(NormSpec::Nuclear, &anchor)?;
        let w2 = gaussian_width_lower(&set, 60, 25, seed)?.value.powi(2);
        for (i, mult) in multipliers.iter().enumerate() {
            let m = (mult * w2 * (d as f64).ln()).ceil() as usize;
            let omega = sample_omega(30, 30, m, 100 * seed + i as u64)?;
            let beta = beta_threshold(m, w2, d, c0)?;
            betas[i] += beta / 20.0;
            let free = rsc_verify(&omega, &set, SpikySlice::unrestricted(), 40, seed)?.value;
            let restricted = SpikySlice::new(beta)
                .and_then(|slice| rsc_verify(&omega, &set, slice, 40, seed))
                .ok()
                .map(|e| e.value);
            if i == multipliers.len() - 1 {
                sliced += usize::from(restricted.is_some());
                good += usize::from(restricted.is_some_and(|k| k >= 0.25));
            }
            curvature[i].push(restricted.unwrap_or(free));
            unrestricted[i].push(free);
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let means: Vec<f64> = curvature.iter().map(|v| mean(v)).collect();
    let free_at_target = &unrestricted[multipliers.len() - 1];
    let lo = free_at_target.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = free_at_target.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let trend = nondecreasing(&means);
    outcome(
        good >= 19 && trend,
        format!(
            "at m = 4 w^2 log d: spikiness cutoff = {:.3}, slice nonempty in {sliced}/20 seeds, curvature >= 0.25 in {good}/20 \
             (need 19); unrestricted curvature in [{lo:.3}, {hi:.3}]; mean curvature over multipliers {{0.5,1,2,4}} = {} \
             ({}monotone; cutoffs {})",
            betas[3],
            fmt(&means),
            if trend { "" } else { "not " },
            fmt(&betas),
        ),
    )
}

fn constrained_scaling() -> Check {
    let cfg = ExperimentConfig::from_toml_str(&shipped_config("constrained_scaling.toml")?, &configs_dir())?;
    let out = run_sweep(&cfg)?;
    let summary = report(&cfg, &out.records)?;
    let means: Vec<f64> = summary.rows.iter().map(|r| r.error_mean.unwrap_or(f64::NAN)).collect();
    let satisfied = out.records.iter().filter(|r| r.bound_satisfied == Some(true)).count();
    let fraction = satisfied as f64 / out.records.len() as f64;
    let trend = nondecreasing(&means);
    outcome(
        trend && fraction >= 0.8,
        format!(
            "mean error over nu {{0.01,0.05,0.1,0.2}} = {} ({}nondecreasing); bound held in {satisfied}/{} trials (need 80%)",
            fmt(&means),
            if trend { "" } else { "not " },
            out.records.len(),
        ),
    )
}

fn dantzig_scaling() -> Check {
    let text = shipped_config("dantzig_scaling.toml")?
        .replace("seeds = [1, 2, 3, 4, 5]", "seeds = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10]");
    let cfg = ExperimentConfig::from_toml_str(&text, &configs_dir())?;
    let out = run_sweep(&cfg)?;
    let summary = report(&cfg, &out.records)?;
    let nus = &cfg.sweep.nu;
    let m_specs: Vec<String> = cfg.sweep.m.iter().map(|m| m.to_string()).collect();
    let cell = |m: &str, nu: f64| {
        summary
            .rows
            .iter()
            .find(|r| r.m_spec == m && r.nu == nu)
            .and_then(|r| r.error_mean)
            .unwrap_or(f64::NAN)
    };
    let mut in_m = true;
    let mut strict_somewhere = false;
    for &nu in nus {
        let col: Vec<f64> = m_specs.iter().map(|m| cell(m, nu)).collect();
        in_m &= col.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
        strict_somewhere |= col[col.len() - 1] < col[0];
    }
    let mut in_nu = true;
    for m in &m_specs {
        let row: Vec<f64> = nus.iter().map(|&nu| cell(m, nu)).collect();
        let terms: Vec<f64> = nus
            .iter()
            .map(|&nu| {
                summary
                    .rows
                    .iter()
                    .find(|r| &r.m_spec == m && r.nu == nu)
                    .and_then(|r| r.noise_term_mean)
                    .unwrap_or(f64::NAN)
            })
            .collect();
        in_nu &= nondecreasing(&row) && nondecreasing(&terms);
    }
    let compat_max = out
        .records
        .iter()
        .filter_map(|r| r.compatibility)
        .fold(0.0f64, f64::max);
    let compat_ok = compat_max <= 8.0 * 2f64.sqrt() && out.records.iter().all(|r| r.compatibility.is_some());
    let low: Vec<f64> = m_specs.iter().map(|m| cell(m, nus[0])).collect();
    outcome(
        in_m && strict_somewhere && in_nu && compat_ok,
        format!(
            "error over m {{1,2,4,8}}x at nu={} = {} (nonincreasing at every nu: {in_m}); error and first term \
             nondecreasing in nu at every m: {in_nu}; max compatibility {compat_max:.3} <= 8 sqrt 2 = {:.3}",
            nus[0],
            fmt(&low),
            8.0 * 2f64.sqrt(),
        ),
    )
}

fn partial_complexity_trend() -> Check {
    let anchor = low_rank(12, 12, 2, 8);
    let set = cone(NormSpec::Nuclear, &anchor)?;
    let grid = [10usize, 40, 160, 640];
    let mut values = Vec::new();
    for (i, &m) in grid.iter().enumerate() {
        values.push(
            partial_complexity(
                &set,
                SamplingLaw::Uniform { m },
                NoiseKind::Gaussian,
                200,
                25,
                300 + i as u64,
            )?
            .value,
        );
    }
    let xs: Vec<f64> = grid.iter().map(|&m| (m as f64).ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let fitted = slope(&xs, &ys);
    let full = partial_complexity(&set, SamplingLaw::Full, NoiseKind::Gaussian, 200, 25, 310)?;
    let width = gaussian_width_lower(&set, 200, 25, 311)?;
    let gap = (full.value - 2.0 * width.value).abs();
    let tol = 3.0 * full.stderr.hypot(2.0 * width.stderr);
    outcome(
        (0.4..=0.6).contains(&fitted) && gap <= tol,
        format!(
            "log-log slope {fitted:.3} in [0.4, 0.6] (values {}); full observation {:.3} vs 2 x width {:.3}, gap {gap:.3} <= 3 SE {tol:.3}",
            fmt(&values),
            full.value,
            2.0 * width.value,
        ),
    )
}

fn glm_checks() -> Check {
    let mut rng = stream_rng(109, 0);
    let omega = sample_omega(5, 4, 30, 109)?;
    let mut worst = 0.0f64;
    for loss in [GlmLoss::Gaussian, GlmLoss::Bernoulli, GlmLoss::Poisson] {
        let y = ObservationVector(
            (0..30)
                .map(|k| (k % 3).min(1 + usize::from(loss == GlmLoss::Poisson)) as f64)
                .collect(),
        );
        for _ in 0..10 {
            let theta = gaussian_matrix(&mut rng, 5, 4);
            let g = glm_gradient(&theta, &y, &omega, loss)?;
            let h = 1e-5;
            for i in 0..5 {
                for j in 0..4 {
                    let mut a = theta.clone();
                    a.add_at(i, j, h);
                    let mut b = theta.clone();
                    b.add_at(i, j, -h);
                    let fd = (glm_loss(&a, &y, &omega, loss)? - glm_loss(&b, &y, &omega, loss)?) / (2.0 * h);
                    let scale = fd.abs().max(g.get(i, j).abs());
                    if scale > 1e-12 {
                        worst = worst.max((fd - g.get(i, j)).abs() / scale);
                    }
                }
            }
        }
    }

    let dbar = 8;
    let m = (3.0 * dbar as f64 * (dbar as f64).ln()).ceil() as usize;
    let instance = ExperimentConfig::from_toml_str(
        "[instance]\nd1 = 8\nd2 = 8\nrank = 1\ntarget_spikiness = 1.5\nnorm = \"nuclear\"\n\
         [sweep]\nm = [50]\nnu = [0.0]\nseeds = [1]\n[estimator]\nkind = \"constrained-norm\"\n",
        Path::new("."),
    )?;
    let mut rates = Vec::new();
    for seed in 1..=10u64 {
        // Entries of root-mean-square size 3 on the logit scale.
        let logits = generate_instance(&instance, seed)?.scaled(3.0 * dbar as f64);
        let omega = sample_omega(dbar, dbar, m, seed)?;
        let mut draw = stream_rng(seed, 3);
        let y = ObservationVector(
            omega
                .indices()
                .iter()
                .map(|&(i, j)| f64::from(u8::from(draw.random::<f64>() < 1.0 / (1.0 + (-logits.get(i, j)).exp()))))
                .collect(),
        );
        let lambda = 0.2 * glm_zero_threshold(&y, &omega, &NormSpec::Nuclear, GlmLoss::Bernoulli)?;
        let alpha_star = 1.5 * spikiness(&logits)? * logits.frobenius_norm();
        let mut cfg = EstimatorConfig::new(
            EstimatorKind::GlmRegularized {
                lambda,
                loss: GlmLoss::Bernoulli,
            },
            alpha_star,
        );
        cfg.max_iter = 20_000;
        let fit = solve(&y, &omega, &NormSpec::Nuclear, &cfg)?;
        let agree = (0..dbar * dbar)
            .filter(|c| fit.theta.get(c / dbar, c % dbar) * logits.get(c / dbar, c % dbar) > 0.0)
            .count();
        rates.push(agree as f64 / (dbar * dbar) as f64);
    }
    let recovered = rates.iter().filter(|&&r| r >= 0.9).count();
    outcome(
        worst <= 1e-6 && recovered == rates.len(),
        format!(
            "gradient vs central differences max relative error {worst:.2e} (tolerance 1e-6); sign agreement at m = {m} \
             per seed {} (need >= 0.9 on all 10)",
            fmt(&rates),
        ),
    )
}

fn determinism() -> Check {
    let cfg = ExperimentConfig::from_toml_str(&shipped_config("smoke.toml")?, &configs_dir())?;
    let dir = tempfile::tempdir()?;
    let mut summaries = Vec::new();
    for run in ["first", "second"] {
        let out = run_sweep(&cfg)?;
        let path = dir.path().join(run);
        write_outputs(&path, &cfg, &out, RecordFormat::Csv)?;
        summaries.push(std::fs::read(path.join("summary.csv"))?);
    }
    let same = summaries[0] == summaries[1];
    outcome(
        same,
        format!(
            "two runs of the smoke sweep produced {} summary.csv ({} bytes)",
            if same { "identical" } else { "different" },
            summaries[0].len()
        ),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("k-support norm closed form vs group decomposition", norm_oracle),
        ("prox vs latent descent and prox characterization", prox_oracle),
        ("nuclear cone width sandwich", width_sandwich),
        ("k-support width bound", ksupport_bound),
        ("restricted curvature emergence", rsc_emergence),
        ("constrained estimator noise scaling and bound", constrained_scaling),
        ("Dantzig estimator sample and noise scaling", dantzig_scaling),
        ("partial complexity square-root trend", partial_complexity_trend),
        ("GLM gradient and logistic sign recovery", glm_checks),
        ("sweep determinism", determinism),
    ];
    let mut passed = 0;
    for (id, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = match catch_unwind(AssertUnwindSafe(run)) {
            Ok(Ok(o)) => (o.pass, o.detail),
            Ok(Err(e)) => (false, format!("error: {e}")),
            Err(_) => (false, "panicked".to_string()),
        };
        passed += usize::from(pass);
        println!(
            "{} criterion {:>2} {name} [{:.1}s]: {detail}",
            if pass { "PASS" } else { "FAIL" },
            id + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {passed}/{} criteria passed", criteria.len());
}
