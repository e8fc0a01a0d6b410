use crate::error::Result;
use crate::model::DenseMatrix;
use crate::norms::NormSpec;

const DYKSTRA_ITERS: usize = 50;
const DYKSTRA_TOL: f64 = 1e-10;

fn clip(x: &DenseMatrix, bound: f64) -> DenseMatrix {
    x.map(|v| v.clamp(-bound, bound))
}

/// `argmin_X ½‖X − Z‖² + t R(X)` subject to `‖X‖_∞ ≤ bound`.
///
/// Alternates the norm prox and the box projection with Dykstra
/// corrections; the result always lies in the box.
pub fn box_prox(spec: &NormSpec, z: &DenseMatrix, t: f64, bound: f64) -> Result<DenseMatrix> {
    if t <= 0.0 {
        return Ok(clip(z, bound));
    }
    let first = spec.prox(z, t)?;
    if !bound.is_finite() || first.max_abs() <= bound {
        return Ok(first);
    }
    let mut x = z.clone();
    let mut p = DenseMatrix::zeros(z.rows(), z.cols());
    let mut q = p.clone();
    let mut y = first;
    for it in 0..DYKSTRA_ITERS {
        if it > 0 {
            y = spec.prox(&(&x + &p), t)?;
        }
        p = &(&x + &p) - &y;
        let next = clip(&(&y + &q), bound);
        q = &(&y + &q) - &next;
        let moved = (&next - &x).frobenius_norm();
        x = next;
        if moved < DYKSTRA_TOL {
            break;
        }
    }
    Ok(x)
}

#[derive(Clone, Debug)]
pub struct FistaOutcome {
    pub x: DenseMatrix,
    pub iterations: usize,
    pub converged: bool,
    /// `L ‖x − T(x)‖_F` at the returned point, `T` the prox-gradient map.
    pub residual: f64,
}

/// Accelerated proximal gradient with gradient-based restart.
///
/// `prox(v, step)` must return the prox of `step · h` at `v`. Stops when the
/// prox-gradient residual falls below `tol · max(1, L‖x‖)`.
pub fn fista(
    x0: DenseMatrix,
    lipschitz: f64,
    grad: impl Fn(&DenseMatrix) -> DenseMatrix,
    prox: impl Fn(&DenseMatrix, f64) -> Result<DenseMatrix>,
    max_iter: usize,
    tol: f64,
) -> Result<FistaOutcome> {
    let step = 1.0 / lipschitz.max(f64::MIN_POSITIVE);
    let gstep = |x: &DenseMatrix| -> Result<DenseMatrix> {
        let mut v = x.clone();
        v.axpy(-step, &grad(x));
        prox(&v, step)
    };
    let mut x = x0;
    let mut yk = x.clone();
    let mut tk = 1.0_f64;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let next = gstep(&yk)?;
        let fp = lipschitz * (&next - &yk).frobenius_norm();
        let scale = 1.0_f64.max(lipschitz * next.frobenius_norm());
        // restart when momentum points uphill
        let uphill = (&yk - &next).dot(&(&next - &x)) > 0.0;
        let tn = 0.5 * (1.0 + (1.0 + 4.0 * tk * tk).sqrt());
        let beta = if uphill { 0.0 } else { (tk - 1.0) / tn };
        tk = if uphill { 1.0 } else { tn };
        let mut ny = next.clone();
        if beta != 0.0 {
            ny.axpy(beta, &(&next - &x));
        }
        x = next;
        yk = ny;
        if fp <= tol * scale {
            converged = true;
            break;
        }
    }
    let residual = lipschitz * (&x - &gstep(&x)?).frobenius_norm();
    Ok(FistaOutcome {
        x,
        iterations,
        converged,
        residual,
    })
}
