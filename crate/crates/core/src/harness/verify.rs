use serde::Serialize;

use crate::error::Result;
use crate::geometry::{
    gaussian_width_lower, gaussian_width_upper_polar, ConeSampler, PolarChoice, SamplerMethod, WidthSet,
};
use crate::model::{adjoint_omega, project_omega, sample_omega, DenseMatrix, ObservationSet, ObservationVector};
use crate::norms::{NormSpec, Svd};
use crate::rng::{gaussian_matrix, gaussian_vec, stream_rng};
use crate::solvers::{glm_gradient, glm_loss, solve, EstimatorConfig, EstimatorKind, GlmLoss};

/// Outcome of one self-check.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check {
        name: name.to_owned(),
        passed,
        detail,
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

fn low_rank(d: usize, s: usize, seed: u64) -> DenseMatrix {
    let mut rng = stream_rng(seed, 1);
    let x = gaussian_matrix(&mut rng, d, d);
    let svd = Svd::new(&x);
    let mut w = vec![0.0; d];
    for (i, v) in w.iter_mut().take(s).enumerate() {
        *v = 1.0 / (i + 1) as f64;
    }
    let x = svd.compose(&w);
    x.scaled(1.0 / x.frobenius_norm())
}

/// Small-instance checks of the identities the library relies on.
pub fn verify(seed: u64) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let mut rng = stream_rng(seed, 0);

    let omega = sample_omega(5, 4, 30, seed)?;
    let x = gaussian_matrix(&mut rng, 5, 4);
    let v = ObservationVector(gaussian_vec(&mut rng, 30));
    let lhs = project_omega(&x, &omega)?.dot(&v);
    let rhs = x.dot(&adjoint_omega(&v, &omega)?);
    out.push(check(
        "adjoint identity",
        rel(lhs, rhs) <= 1e-12,
        format!("{lhs} vs {rhs}"),
    ));

    let z = gaussian_matrix(&mut rng, 5, 5);
    let mut worst: f64 = 0.0;
    for spec in [NormSpec::Nuclear, NormSpec::KSupport { k: 2 }, NormSpec::Frobenius] {
        for t in [0.1, 1.0, 3.0] {
            // p = prox(z) iff R*(z − p) ≤ t and ⟨z − p, p⟩ = t R(p)
            let p = spec.prox(&z, t)?;
            let r = &z - &p;
            let dual_excess = (spec.dual_value(&r)? - t).max(0.0);
            let gap = (r.dot(&p) - t * spec.value(&p)?).abs();
            worst = worst.max(dual_excess).max(gap);
        }
    }
    out.push(check(
        "prox optimality",
        worst <= 1e-8,
        format!("max violation {worst:e}"),
    ));

    let k1 = NormSpec::KSupport { k: 1 }.value(&z)?;
    let kd = NormSpec::KSupport { k: 5 }.value(&z)?;
    let (nuc, fro) = (NormSpec::Nuclear.value(&z)?, z.frobenius_norm());
    out.push(check(
        "k-support limits",
        rel(k1, nuc) <= 1e-10 && rel(kd, fro) <= 1e-10,
        format!("k=1 {k1} vs nuclear {nuc}; k=5 {kd} vs frobenius {fro}"),
    ));

    let anchor = low_rank(6, 2, seed);
    let set = WidthSet::from(ConeSampler::new(
        NormSpec::Nuclear,
        anchor.clone(),
        SamplerMethod::BoundaryRay,
        10,
    )?);
    let lo = gaussian_width_lower(&set, 40, 10, seed)?;
    let hi = gaussian_width_upper_polar(&NormSpec::Nuclear, &anchor, 40, PolarChoice::Optimal, seed)?;
    out.push(check(
        "width sandwich",
        lo.value <= hi.value + 1e-9,
        format!("lower {} upper {}", lo.value, hi.value),
    ));

    let full = ObservationSet::full(6, 6)?;
    let y = project_omega(&anchor, &full)?;
    for kind in [
        EstimatorKind::ConstrainedNorm { lambda: 0.0 },
        EstimatorKind::Dantzig { lambda: 0.0 },
    ] {
        let mut cfg = EstimatorConfig::new(kind, 6.0);
        cfg.max_iter = 20_000;
        let res = solve(&y, &full, &NormSpec::Nuclear, &cfg)?;
        let err = (&res.theta - &anchor).frobenius_norm();
        out.push(check(
            &format!("{} noiseless recovery", kind.name()),
            err <= 1e-4,
            format!("error {err:e}, converged {}", res.converged),
        ));
    }

    let theta = gaussian_matrix(&mut rng, 4, 4).scaled(0.5);
    let om = sample_omega(4, 4, 30, seed + 1)?;
    let yb = ObservationVector((0..om.len()).map(|k| (k % 2) as f64).collect());
    let grad = glm_gradient(&theta, &yb, &om, GlmLoss::Bernoulli)?;
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            let mut a = theta.clone();
            a.add_at(i, j, h);
            let mut b = theta.clone();
            b.add_at(i, j, -h);
            let fd =
                (glm_loss(&a, &yb, &om, GlmLoss::Bernoulli)? - glm_loss(&b, &yb, &om, GlmLoss::Bernoulli)?) / (2.0 * h);
            worst = worst.max((fd - grad.get(i, j)).abs() / grad.get(i, j).abs().max(1.0));
        }
    }
    out.push(check(
        "glm gradient",
        worst <= 1e-6,
        format!("max relative difference {worst:e}"),
    ));
    Ok(out)
}
