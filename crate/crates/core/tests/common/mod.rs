//! Reference implementations used as oracles by the integration tests.
//! Nothing here calls into the library's norms, prox or solver code.

#![allow(dead_code)]

use smc_core::rng::{gaussian_matrix, stream_rng};
use smc_core::{DenseMatrix, ObservationSet, ObservationVector};

/// Thin SVD by one-sided Jacobi rotations. Columns of `u` and `v` are
/// returned as vectors, singular values sorted nonincreasing.
pub struct JacobiSvd {
    pub u: Vec<Vec<f64>>,
    pub s: Vec<f64>,
    pub v: Vec<Vec<f64>>,
    pub rows: usize,
    pub cols: usize,
}

impl JacobiSvd {
    pub fn new(x: &DenseMatrix) -> Self {
        let (r, c) = x.shape();
        if r < c {
            let t = Self::new(&x.transpose());
            return Self {
                u: t.v,
                s: t.s,
                v: t.u,
                rows: r,
                cols: c,
            };
        }
        let mut a: Vec<Vec<f64>> = (0..c).map(|j| (0..r).map(|i| x.get(i, j)).collect()).collect();
        let mut v: Vec<Vec<f64>> = (0..c)
            .map(|j| (0..c).map(|i| f64::from(u8::from(i == j))).collect())
            .collect();
        for _ in 0..100 {
            let mut rotated = false;
            for p in 0..c {
                for q in p + 1..c {
                    let alpha: f64 = a[p].iter().map(|t| t * t).sum();
                    let beta: f64 = a[q].iter().map(|t| t * t).sum();
                    let gamma: f64 = a[p].iter().zip(&a[q]).map(|(s, t)| s * t).sum();
                    if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                        continue;
                    }
                    rotated = true;
                    let zeta = (beta - alpha) / (2.0 * gamma);
                    let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                    let cs = 1.0 / (1.0 + t * t).sqrt();
                    let sn = cs * t;
                    for cols in [&mut a, &mut v] {
                        let (lo, hi) = cols.split_at_mut(q);
                        for (x, y) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
                            let (xp, xq) = (*x, *y);
                            *x = cs * xp - sn * xq;
                            *y = sn * xp + cs * xq;
                        }
                    }
                }
            }
            if !rotated {
                break;
            }
        }
        let mut order: Vec<(f64, usize)> = a
            .iter()
            .enumerate()
            .map(|(j, col)| (col.iter().map(|t| t * t).sum::<f64>().sqrt(), j))
            .collect();
        order.sort_by(|x, y| y.0.total_cmp(&x.0));
        let s: Vec<f64> = order.iter().map(|o| o.0).collect();
        let u = order
            .iter()
            .map(|&(sv, j)| a[j].iter().map(|t| if sv > 0.0 { t / sv } else { 0.0 }).collect())
            .collect();
        let v = order.iter().map(|&(_, j)| v[j].clone()).collect();
        Self {
            u,
            s,
            v,
            rows: r,
            cols: c,
        }
    }

    pub fn compose(&self, d: &[f64]) -> DenseMatrix {
        DenseMatrix::from_fn(self.rows, self.cols, |i, j| {
            d.iter()
                .enumerate()
                .map(|(l, &w)| w * self.u[l][i] * self.v[l][j])
                .sum()
        })
    }
}

pub fn spectrum(x: &DenseMatrix) -> Vec<f64> {
    JacobiSvd::new(x).s
}

pub fn nuclear(x: &DenseMatrix) -> f64 {
    spectrum(x).iter().sum()
}

/// Singular value soft-thresholding.
pub fn svt(x: &DenseMatrix, tau: f64) -> DenseMatrix {
    let svd = JacobiSvd::new(x);
    let d: Vec<f64> = svd.s.iter().map(|s| (s - tau).max(0.0)).collect();
    svd.compose(&d)
}

/// Projection onto `{‖X‖_op ≤ r}`.
pub fn clip_operator(x: &DenseMatrix, r: f64) -> DenseMatrix {
    let svd = JacobiSvd::new(x);
    let d: Vec<f64> = svd.s.iter().map(|s| s.min(r)).collect();
    svd.compose(&d)
}

/// All `k`-subsets of `0..n` (all of `0..n` when `k ≥ n`).
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let k = k.min(n);
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|t| t * t).sum::<f64>().sqrt()
}

/// Vector k-support norm as the latent group decomposition
/// `min Σ_g ‖v_g‖₂ s.t. Σ_g v_g = z, supp v_g ⊆ g, |g| = k`, by sharing ADMM.
pub fn ksupport_by_groups(z: &[f64], k: usize) -> f64 {
    let n = z.len();
    let groups = subsets(n, k);
    let ng = groups.len();
    let scale = l2(z).max(1e-300);
    let rho = 4.0 / scale;
    let mut v: Vec<Vec<f64>> = vec![vec![0.0; n]; ng];
    let mut u = vec![0.0; n];
    let target: Vec<f64> = z.iter().map(|t| t / ng as f64).collect();
    let mut mean = vec![0.0; n];
    for it in 0..400_000 {
        for (g, vg) in groups.iter().zip(v.iter_mut()) {
            let mut w = vec![0.0; n];
            for &i in g {
                w[i] = vg[i] - mean[i] + target[i] - u[i];
            }
            let nw = l2(&w);
            let shrink = if nw > 0.0 {
                (1.0 - 1.0 / (rho * nw)).max(0.0)
            } else {
                0.0
            };
            for i in 0..n {
                vg[i] = shrink * w[i];
            }
        }
        let new_mean: Vec<f64> = (0..n)
            .map(|i| v.iter().map(|vg| vg[i]).sum::<f64>() / ng as f64)
            .collect();
        let change: f64 = l2(&new_mean.iter().zip(&mean).map(|(a, b)| a - b).collect::<Vec<_>>());
        mean = new_mean;
        for i in 0..n {
            u[i] += mean[i] - target[i];
        }
        let infeas = l2(&mean.iter().zip(&target).map(|(a, b)| a - b).collect::<Vec<_>>());
        if it > 100 && infeas < 1e-14 * scale && change < 1e-14 * scale {
            break;
        }
    }
    // Absorb the remaining infeasibility into the first group covering each
    // index, so the value is that of an exact decomposition.
    for i in 0..n {
        let resid = z[i] - ng as f64 * mean[i];
        let gi = groups
            .iter()
            .position(|g| g.contains(&i))
            .expect("groups cover every index");
        v[gi][i] += resid;
    }
    v.iter().map(|vg| l2(vg)).sum()
}

/// `min_x ½‖x − z‖² + t‖x‖_k` by accelerated proximal gradient on the latent
/// group representation. Returns the minimizer and the objective value.
pub fn latent_prox(z: &[f64], k: usize, t: f64, iters: usize) -> (Vec<f64>, f64) {
    let n = z.len();
    let groups = subsets(n, k);
    let ng = groups.len();
    // ‖A‖² for A(v) = Σ_g v_g: the largest number of groups sharing an index.
    let lip = (0..n)
        .map(|i| groups.iter().filter(|g| g.contains(&i)).count())
        .max()
        .unwrap_or(1) as f64;
    let step = 1.0 / lip;
    let sum = |v: &[Vec<f64>]| -> Vec<f64> { (0..n).map(|i| v.iter().map(|vg| vg[i]).sum()).collect() };
    let objective = |v: &[Vec<f64>]| -> f64 {
        let x = sum(v);
        0.5 * x.iter().zip(z).map(|(a, b)| (a - b).powi(2)).sum::<f64>() + t * v.iter().map(|vg| l2(vg)).sum::<f64>()
    };
    let mut x: Vec<Vec<f64>> = vec![vec![0.0; n]; ng];
    let mut y = x.clone();
    let mut mom = 1.0_f64;
    let mut fx = objective(&x);
    for _ in 0..iters {
        let r: Vec<f64> = sum(&y).iter().zip(z).map(|(a, b)| a - b).collect();
        let mut nx = vec![vec![0.0; n]; ng];
        for (gi, g) in groups.iter().enumerate() {
            let mut w = vec![0.0; n];
            for &i in g {
                w[i] = y[gi][i] - step * r[i];
            }
            let nw = l2(&w);
            let shrink = if nw > 0.0 { (1.0 - step * t / nw).max(0.0) } else { 0.0 };
            for &i in g {
                nx[gi][i] = shrink * w[i];
            }
        }
        let fnx = objective(&nx);
        let next = 0.5 * (1.0 + (1.0 + 4.0 * mom * mom).sqrt());
        if fnx > fx {
            // adaptive restart
            mom = 1.0;
            y = x.clone();
            continue;
        }
        for gi in 0..ng {
            for i in 0..n {
                y[gi][i] = nx[gi][i] + (mom - 1.0) / next * (nx[gi][i] - x[gi][i]);
            }
        }
        mom = next;
        x = nx;
        fx = fnx;
    }
    (sum(&x), fx)
}

/// `sup { ⟨X, Y⟩ : rank Y ≤ k, ‖Y‖_F ≤ 1 }` by orthogonal subspace ascent
/// with random restarts. This is the dual of the spectral k-support norm
/// because its unit ball is the convex hull of those `Y`.
pub fn dual_by_subspace(x: &DenseMatrix, k: usize, restarts: usize, seed: u64) -> f64 {
    let (r, c) = x.shape();
    let k = k.min(r).min(c);
    let gram = x.matmul(&x.transpose());
    let mut best: f64 = 0.0;
    let mut rng = stream_rng(seed, 77);
    for _ in 0..restarts {
        let mut q = gaussian_matrix(&mut rng, r, k);
        for _ in 0..500 {
            q = orthonormalize(&gram.matmul(&q));
        }
        q = orthonormalize(&q);
        let val = q.transpose().matmul(x).frobenius_norm();
        best = best.max(val);
    }
    best
}

/// Modified Gram–Schmidt on the columns.
pub fn orthonormalize(a: &DenseMatrix) -> DenseMatrix {
    let (r, c) = a.shape();
    let mut cols: Vec<Vec<f64>> = (0..c).map(|j| (0..r).map(|i| a.get(i, j)).collect()).collect();
    for j in 0..c {
        for p in 0..j {
            let d: f64 = cols[j].iter().zip(&cols[p]).map(|(s, t)| s * t).sum();
            let prev = cols[p].clone();
            for (x, y) in cols[j].iter_mut().zip(prev) {
                *x -= d * y;
            }
        }
        let n = l2(&cols[j]).max(1e-300);
        for x in cols[j].iter_mut() {
            *x /= n;
        }
    }
    DenseMatrix::from_fn(r, c, |i, j| cols[j][i])
}

/// Haar-distributed orthogonal matrix.
pub fn random_orthogonal(n: usize, seed: u64) -> DenseMatrix {
    let mut rng = stream_rng(seed, 99);
    orthonormalize(&gaussian_matrix(&mut rng, n, n))
}

/// Per-cell observation counts and sums.
pub struct CellStats {
    pub count: DenseMatrix,
    pub sum: DenseMatrix,
    pub sum_sq: f64,
}

impl CellStats {
    pub fn new(y: &ObservationVector, omega: &ObservationSet) -> Self {
        let (d1, d2) = omega.shape();
        let mut count = DenseMatrix::zeros(d1, d2);
        let mut sum = DenseMatrix::zeros(d1, d2);
        for (&(i, j), &v) in omega.indices().iter().zip(&y.0) {
            count.add_at(i, j, 1.0);
            sum.add_at(i, j, v);
        }
        Self {
            count,
            sum,
            sum_sq: y.0.iter().map(|v| v * v).sum(),
        }
    }

    /// `‖P_Ω(Θ) − y‖₂²` from cell statistics.
    pub fn residual_sq(&self, theta: &DenseMatrix) -> f64 {
        let mut r = self.sum_sq;
        for (idx, &n) in self.count.as_slice().iter().enumerate() {
            let t = theta.as_slice()[idx];
            r += n * t * t - 2.0 * t * self.sum.as_slice()[idx];
        }
        r.max(0.0)
    }
}

/// Projection onto `{Θ : ‖P_Ω(Θ) − y‖₂ ≤ λ, ‖Θ‖_∞ ≤ b}`. The cellwise
/// minimizer for a fixed multiplier is a clipped weighted average, and the
/// multiplier is found by bisection.
pub fn project_residual_ball(v: &DenseMatrix, cells: &CellStats, lambda: f64, bound: f64) -> DenseMatrix {
    let at = |mu: f64| -> DenseMatrix {
        let mut out = v.clone();
        for (idx, o) in out.as_mut_slice().iter_mut().enumerate() {
            let n = cells.count.as_slice()[idx];
            let s = cells.sum.as_slice()[idx];
            *o = ((*o + mu * s) / (1.0 + mu * n)).clamp(-bound, bound);
        }
        out
    };
    let budget = lambda * lambda;
    let p = at(0.0);
    if cells.residual_sq(&p) <= budget {
        return p;
    }
    let mut hi = 1.0;
    while cells.residual_sq(&at(hi)) > budget {
        hi *= 2.0;
        assert!(hi < 1e30, "residual ball does not meet the box");
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cells.residual_sq(&at(mid)) > budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(hi)
}

/// Oracle for `min ‖Θ‖_* s.t. ‖P_Ω(Θ) − y‖₂ ≤ λ, ‖Θ‖_∞ ≤ b` by two-block
/// ADMM on `Θ = W`. Returns a feasible point.
pub fn constrained_nuclear_admm(
    y: &ObservationVector,
    omega: &ObservationSet,
    lambda: f64,
    bound: f64,
    iters: usize,
) -> DenseMatrix {
    let cells = CellStats::new(y, omega);
    let (d1, d2) = omega.shape();
    let rho = 2.0;
    let mut w = DenseMatrix::zeros(d1, d2);
    let mut u = DenseMatrix::zeros(d1, d2);
    let mut theta = w.clone();
    for _ in 0..iters {
        theta = project_residual_ball(&(&w - &u), &cells, lambda, bound);
        w = svt(&(&theta + &u), 1.0 / rho);
        u = &u + &(&theta - &w);
    }
    theta
}

/// Oracle for the Dantzig program
/// `min ‖Θ‖_* s.t. ‖N∘Θ − B‖_op ≤ λ', ‖Θ‖_∞ ≤ b`, where `N∘Θ − B = P_Ω^*(P_Ω Θ − y)`,
/// by ADMM with the splitting `Θ = W`, `N∘Θ − B = S`.
pub fn dantzig_nuclear_admm(
    y: &ObservationVector,
    omega: &ObservationSet,
    op_radius: f64,
    bound: f64,
    iters: usize,
) -> DenseMatrix {
    let cells = CellStats::new(y, omega);
    let (d1, d2) = omega.shape();
    let n = &cells.count;
    let b = &cells.sum;
    let rho = 2.0;
    let mut w = DenseMatrix::zeros(d1, d2);
    let mut s = DenseMatrix::zeros(d1, d2);
    let mut u1 = DenseMatrix::zeros(d1, d2);
    let mut u2 = DenseMatrix::zeros(d1, d2);
    let mut theta = w.clone();
    let apply = |t: &DenseMatrix| t.zip_map(n, |a, c| a * c);
    for _ in 0..iters {
        let a = &w - &u1;
        let c = &(&s + b) - &u2;
        theta = DenseMatrix::from_fn(d1, d2, |i, j| {
            let nc = n.get(i, j);
            ((a.get(i, j) + nc * c.get(i, j)) / (1.0 + nc * nc)).clamp(-bound, bound)
        });
        w = svt(&(&theta + &u1), 1.0 / rho);
        let resid = &apply(&theta) - b;
        s = clip_operator(&(&resid + &u2), op_radius);
        u1 = &u1 + &(&theta - &w);
        u2 = &u2 + &(&resid - &s);
    }
    theta
}

/// Oracle for `min (d1d2/m) Σ_k [A(Θ_k) − y_k Θ_k] + λ‖Θ‖_*` over the box
/// with the logistic `A`, by ADMM on `Θ = W`; the cellwise step is solved by
/// bisection on the derivative.
pub fn logistic_nuclear_admm(
    y: &ObservationVector,
    omega: &ObservationSet,
    lambda: f64,
    bound: f64,
    iters: usize,
) -> DenseMatrix {
    let cells = CellStats::new(y, omega);
    let (d1, d2) = omega.shape();
    let scale = (d1 * d2) as f64 / omega.len() as f64;
    let sigmoid = |t: f64| 1.0 / (1.0 + (-t).exp());
    let rho = 1.0;
    let mut w = DenseMatrix::zeros(d1, d2);
    let mut u = DenseMatrix::zeros(d1, d2);
    let mut theta = w.clone();
    for _ in 0..iters {
        let v = &w - &u;
        theta = DenseMatrix::from_fn(d1, d2, |i, j| {
            let (n, s, vc) = (cells.count.get(i, j), cells.sum.get(i, j), v.get(i, j));
            let deriv = |t: f64| scale * (n * sigmoid(t) - s) + rho * (t - vc);
            let (mut lo, mut hi) = (-bound, bound);
            if deriv(lo) >= 0.0 {
                return lo;
            }
            if deriv(hi) <= 0.0 {
                return hi;
            }
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if deriv(mid) > 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        });
        w = svt(&(&theta + &u), lambda / rho);
        u = &u + &(&theta - &w);
    }
    theta
}

/// Logistic objective evaluated directly, for comparing solutions.
pub fn logistic_objective(theta: &DenseMatrix, y: &ObservationVector, omega: &ObservationSet, lambda: f64) -> f64 {
    let (d1, d2) = omega.shape();
    let scale = (d1 * d2) as f64 / omega.len() as f64;
    let loss: f64 = omega
        .indices()
        .iter()
        .zip(&y.0)
        .map(|(&(i, j), &v)| {
            let t = theta.get(i, j);
            let a = if t > 0.0 {
                t + (-t).exp().ln_1p()
            } else {
                t.exp().ln_1p()
            };
            a - v * t
        })
        .sum();
    scale * loss + lambda * nuclear(theta)
}

/// Unit-Frobenius rank-`r` matrix with Gaussian factors.
pub fn low_rank(d1: usize, d2: usize, r: usize, seed: u64) -> DenseMatrix {
    let mut rng = stream_rng(seed, 5);
    let a = gaussian_matrix(&mut rng, d1, r);
    let b = gaussian_matrix(&mut rng, r, d2);
    let x = a.matmul(&b);
    x.scaled(1.0 / x.frobenius_norm())
}

/// Least-squares slope of `ys` against `xs`.
pub fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
