//! Vector k-support norm on nonincreasing nonnegative vectors (the singular
//! value level of the spectral k-support norm), and the signed-vector prox.

use std::ops::Range;

use crate::error::{Error, Result};

/// Threshold structure of a sorted vector for the k-support norm.
///
/// Ranges are 0-based positions into the sorted vector. `head` holds the
/// positions `1..=k-r-1` (1-based) that keep their own magnitude, `tail`
/// holds `k-r..=s` whose mass is pooled, and `s` is the numerical rank.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KSupportDecomposition {
    pub k: usize,
    pub r: usize,
    pub s: usize,
    /// Index set `I₂`.
    pub head: Range<usize>,
    /// Index set `I₁`.
    pub tail: Range<usize>,
}

impl KSupportDecomposition {
    /// Positions past the rank (`I₀`), given the vector length.
    pub fn null(&self, len: usize) -> Range<usize> {
        self.s.min(len)..len
    }
}

fn check_sorted(sigma: &[f64]) -> Result<()> {
    if let Some(pos) = sigma.iter().position(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Domain(format!(
            "entry {pos} of the spectrum is negative or non-finite"
        )));
    }
    if let Some(pos) = sigma.windows(2).position(|w| w[1] > w[0]) {
        return Err(Error::Unsorted(pos + 1));
    }
    Ok(())
}

fn check_k(k: usize, len: usize) -> Result<()> {
    if k == 0 || k > len {
        Err(Error::KOutOfRange { k, max: len })
    } else {
        Ok(())
    }
}

/// Slack of the defining inequality
/// `σ_{k-r-1} > (1/(r+1)) Σ_{i≥k-r} σ_i ≥ σ_{k-r}` (1-based, `σ₀ = +∞`).
/// Returns `(upper_slack, lower_slack)`; both must be positive / nonnegative.
fn threshold_slack(sigma: &[f64], tail_sum: &[f64], k: usize, r: usize) -> (f64, f64) {
    // 0-based positions of σ_{k-r-1} and σ_{k-r}
    let b = k - r - 1;
    let avg = tail_sum[b] / (r + 1) as f64;
    let upper = if b == 0 { f64::INFINITY } else { sigma[b - 1] - avg };
    (upper, avg - sigma[b])
}

/// The unique `r ∈ {0..k-1}` of the threshold structure, with the index
/// sets it induces.
pub fn find_kr_threshold(sigma: &[f64], k: usize) -> Result<KSupportDecomposition> {
    check_sorted(sigma)?;
    check_k(k, sigma.len())?;
    let p = sigma.len();
    let mut tail_sum = vec![0.0; p + 1];
    for i in (0..p).rev() {
        tail_sum[i] = tail_sum[i + 1] + sigma[i];
    }
    let scale = sigma[0].max(f64::MIN_POSITIVE);
    let tol = 1e-13 * scale;

    let mut chosen = None;
    let mut best = (f64::NEG_INFINITY, 0usize);
    for r in 0..k {
        let (upper, lower) = threshold_slack(sigma, &tail_sum, k, r);
        if upper > 0.0 && lower >= -tol {
            chosen = Some(r);
            break;
        }
        let worst = upper.min(lower);
        if worst > best.0 {
            best = (worst, r);
        }
    }
    // Rounding can break an exact tie; fall back to the least-violating r.
    let r = chosen.unwrap_or(best.1);
    let s = super::spectral::rank_of(sigma);
    let split = (k - r - 1).min(s);
    Ok(KSupportDecomposition {
        k,
        r,
        s,
        head: 0..split,
        tail: split..s.max(split),
    })
}

/// Closed form `(Σ_{I₂} σ_i² + (Σ_{i≥k-r} σ_i)²/(r+1))^{1/2}`.
pub fn sorted_value(sigma: &[f64], k: usize) -> Result<f64> {
    let dec = find_kr_threshold(sigma, k)?;
    let head: f64 = sigma[dec.head.clone()].iter().map(|v| v * v).sum();
    let pooled: f64 = sigma[dec.head.end..].iter().sum();
    Ok((head + pooled * pooled / (dec.r + 1) as f64).sqrt())
}

/// Dual norm: ℓ2 norm of the `k` largest entries.
pub fn sorted_dual_value(sigma: &[f64], k: usize) -> f64 {
    sigma.iter().take(k).map(|v| v * v).sum::<f64>().sqrt()
}

/// Euclidean projection of a sorted nonnegative vector onto
/// `{w : ‖w‖_(k)* ≤ radius}` (ℓ2 norm of the top-k entries bounded).
///
/// The projection keeps the order of `z` and has the shape
/// `w = (z_head/(1+μ), θ…θ, z_rest)`: a scaled head, a plateau at level `θ`
/// that shares the remaining `k - |head|` top slots, and an untouched rest.
/// All (head, plateau) splits are scanned and the one meeting the
/// optimality conditions is returned.
pub fn project_sorted_dual_ball(z: &[f64], k: usize, radius: f64) -> Vec<f64> {
    let p = z.len();
    if radius <= 0.0 {
        return vec![0.0; p];
    }
    if sorted_dual_value(z, k) <= radius {
        return z.to_vec();
    }
    let mut s1 = vec![0.0; p + 1];
    let mut s2 = vec![0.0; p + 1];
    for i in 0..p {
        s1[i + 1] = s1[i] + z[i];
        s2[i + 1] = s2[i] + z[i] * z[i];
    }
    let rho2 = radius * radius;
    let tol = 1e-12 * z[0];

    let mut fallback: Option<(f64, Vec<f64>)> = None;
    for head in 0..k {
        let a = s2[head];
        let q = (k - head) as f64;
        for end in k..=p {
            let n = (end - head) as f64;
            let s = s1[end] - s1[head];
            let phi = |mu: f64| {
                let th = s / (n + q * mu);
                a / ((1.0 + mu) * (1.0 + mu)) + q * th * th - rho2
            };
            if phi(0.0) <= 0.0 {
                continue;
            }
            // φ is convex and decreasing; Newton from the left is monotone.
            let mut mu = 0.0_f64;
            for _ in 0..200 {
                let f = phi(mu);
                let d1 = 1.0 + mu;
                let d2 = n + q * mu;
                let df = -2.0 * a / (d1 * d1 * d1) - 2.0 * q * q * s * s / (d2 * d2 * d2);
                if df >= 0.0 {
                    break;
                }
                let step = f / df;
                mu -= step;
                if step.abs() <= 1e-15 * mu.max(1.0) {
                    break;
                }
            }
            let theta = s / (n + q * mu);
            let mut viol: f64 = 0.0;
            if head > 0 {
                viol = viol.max(theta * (1.0 + mu) - z[head - 1]);
            }
            viol = viol.max(z[head] - theta * (1.0 + mu));
            viol = viol.max(theta - z[end - 1]);
            if end < p {
                viol = viol.max(z[end] - theta);
            }
            let build = || {
                let mut w = z.to_vec();
                for v in &mut w[..head] {
                    *v /= 1.0 + mu;
                }
                for v in &mut w[head..end] {
                    *v = theta;
                }
                w
            };
            if viol <= tol {
                return build();
            }
            if fallback.as_ref().is_none_or(|(best, _)| viol < *best) {
                fallback = Some((viol, build()));
            }
        }
    }
    fallback.map(|(_, w)| w).unwrap_or_else(|| vec![0.0; p])
}

/// Prox of `t ‖·‖_(k)` on a sorted nonnegative vector, via the Moreau
/// identity `prox(z) = z − Π_{t·dual ball}(z)`.
pub fn sorted_prox(z: &[f64], k: usize, t: f64) -> Vec<f64> {
    let w = project_sorted_dual_ball(z, k, t);
    z.iter().zip(&w).map(|(a, b)| (a - b).max(0.0)).collect()
}

/// Projection of a sorted nonnegative vector onto `{x : ‖x‖_(k) ≤ radius}`.
/// The projection is `prox_{τ‖·‖}(z)` for the multiplier `τ` at which the
/// norm constraint is tight; `τ` is located by bisection, keeping the
/// feasible side.
pub fn project_sorted_ball(z: &[f64], k: usize, radius: f64) -> Vec<f64> {
    if radius <= 0.0 {
        return vec![0.0; z.len()];
    }
    let value = |x: &[f64]| sorted_value(x, k).unwrap_or(f64::INFINITY);
    if value(z) <= radius {
        return z.to_vec();
    }
    let mut lo = 0.0;
    let mut hi = sorted_dual_value(z, k);
    let mut best = vec![0.0; z.len()];
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let x = sorted_prox(z, k, mid);
        if value(&x) <= radius {
            hi = mid;
            best = x;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    best
}

/// `argmin_x ½‖x − z‖² + t‖x‖_(k)` for an arbitrary real vector.
/// The result keeps the sign pattern and magnitude ordering of `z`.
pub fn vector_ksupport_prox(z: &[f64], k: usize, t: f64) -> Result<Vec<f64>> {
    check_k(k, z.len())?;
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("prox parameter must be > 0, got {t}")));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite input to prox".into()));
    }
    let mut order: Vec<usize> = (0..z.len()).collect();
    order.sort_by(|&a, &b| z[b].abs().total_cmp(&z[a].abs()));
    let sorted: Vec<f64> = order.iter().map(|&i| z[i].abs()).collect();
    let shrunk = sorted_prox(&sorted, k, t);
    let mut out = vec![0.0; z.len()];
    for (pos, &i) in order.iter().enumerate() {
        out[i] = shrunk[pos].copysign(z[i]);
    }
    Ok(out)
}

/// Vector k-support norm of an arbitrary real vector.
pub fn vector_ksupport_norm(z: &[f64], k: usize) -> Result<f64> {
    let mut a: Vec<f64> = z.iter().map(|v| v.abs()).collect();
    a.sort_by(|x, y| y.total_cmp(x));
    sorted_value(&a, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_vec, stream_rng};

    fn brute_r(sigma: &[f64], k: usize) -> Vec<usize> {
        let mut tail = vec![0.0; sigma.len() + 1];
        for i in (0..sigma.len()).rev() {
            tail[i] = tail[i + 1] + sigma[i];
        }
        (0..k)
            .filter(|&r| {
                let b = k - r - 1;
                let avg = tail[b] / (r + 1) as f64;
                let up = if b == 0 { f64::INFINITY } else { sigma[b - 1] };
                up > avg && avg >= sigma[b]
            })
            .collect()
    }

    #[test]
    fn threshold_hand_examples() {
        let d = find_kr_threshold(&[5.0, 1.0, 1.0, 1.0], 2).unwrap();
        assert_eq!(d.r, 0);
        assert_eq!(d.head, 0..1);
        assert_eq!(d.tail, 1..4);
        let d = find_kr_threshold(&[1.0, 1.0, 1.0, 1.0], 2).unwrap();
        assert_eq!(d.r, 1);
        assert_eq!(d.head, 0..0);
        assert_eq!(d.tail, 0..4);
    }

    #[test]
    fn threshold_errors() {
        assert!(matches!(find_kr_threshold(&[1.0, 2.0], 1), Err(Error::Unsorted(1))));
        assert!(matches!(
            find_kr_threshold(&[2.0, 1.0], 3),
            Err(Error::KOutOfRange { .. })
        ));
        assert!(matches!(
            find_kr_threshold(&[2.0, 1.0], 0),
            Err(Error::KOutOfRange { .. })
        ));
        assert!(find_kr_threshold(&[2.0, -1.0], 1).is_err());
    }

    #[test]
    fn threshold_matches_exhaustive_scan() {
        let mut rng = stream_rng(21, 0);
        for trial in 0..200 {
            let d = 2 + trial % 9;
            let mut s: Vec<f64> = gaussian_vec(&mut rng, d).iter().map(|v| v.abs()).collect();
            s.sort_by(|a, b| b.total_cmp(a));
            for k in 1..=d {
                let found = brute_r(&s, k);
                assert_eq!(found.len(), 1, "non-unique r for {s:?}, k={k}");
                assert_eq!(find_kr_threshold(&s, k).unwrap().r, found[0]);
            }
        }
    }

    #[test]
    fn low_rank_threshold_has_empty_tail() {
        let s = [3.0, 2.0, 0.0, 0.0, 0.0];
        let d = find_kr_threshold(&s, 4).unwrap();
        assert_eq!(d.s, 2);
        assert_eq!(d.head, 0..2);
        assert!(d.tail.is_empty());
        assert!((sorted_value(&s, 4).unwrap() - 13f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn value_limits() {
        let s = [4.0, 2.5, 1.0, 0.5];
        assert!((sorted_value(&s, 1).unwrap() - 8.0).abs() < 1e-14);
        let l2 = s.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((sorted_value(&s, 4).unwrap() - l2).abs() < 1e-14);
        assert!(sorted_value(&[0.0, 0.0], 1).unwrap() == 0.0);
    }

    #[test]
    fn prox_limits() {
        let z = [1.5, -0.2, 0.7, -2.0, 0.05];
        let t = 0.4;
        // k = 1 is the ℓ1 norm: soft thresholding
        let p1 = vector_ksupport_prox(&z, 1, t).unwrap();
        for (a, b) in p1.iter().zip(&z) {
            let st = b.signum() * (b.abs() - t).max(0.0);
            assert!((a - st).abs() < 1e-12);
        }
        // k = dim is the ℓ2 norm: block shrinkage
        let pd = vector_ksupport_prox(&z, z.len(), t).unwrap();
        let nz = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (a, b) in pd.iter().zip(&z) {
            assert!((a - b * (1.0 - t / nz)).abs() < 1e-12);
        }
    }

    #[test]
    fn prox_errors() {
        assert!(vector_ksupport_prox(&[1.0, 2.0], 3, 0.1).is_err());
        assert!(vector_ksupport_prox(&[1.0, 2.0], 1, 0.0).is_err());
        assert!(vector_ksupport_prox(&[1.0, 2.0], 1, -1.0).is_err());
    }

    #[test]
    fn dual_ball_projection_is_feasible_and_optimal() {
        let mut rng = stream_rng(4, 4);
        for trial in 0..300 {
            let d = 2 + trial % 8;
            let mut z: Vec<f64> = gaussian_vec(&mut rng, d).iter().map(|v| v.abs()).collect();
            z.sort_by(|a, b| b.total_cmp(a));
            let k = 1 + trial % d;
            let radius = 0.3 + 0.1 * (trial % 5) as f64;
            let w = project_sorted_dual_ball(&z, k, radius);
            let mut ws = w.clone();
            ws.sort_by(|a, b| b.total_cmp(a));
            assert!(sorted_dual_value(&ws, k) <= radius * (1.0 + 1e-10));
            // Variational inequality against random feasible points.
            for _ in 0..20 {
                let mut c: Vec<f64> = gaussian_vec(&mut rng, d).iter().map(|v| v.abs()).collect();
                c.sort_by(|a, b| b.total_cmp(a));
                let scale = radius / sorted_dual_value(&c, k).max(1e-300);
                let c: Vec<f64> = c.iter().map(|v| v * scale * 0.99).collect();
                let ip: f64 = z
                    .iter()
                    .zip(&w)
                    .zip(&c)
                    .map(|((zi, wi), ci)| (zi - wi) * (ci - wi))
                    .sum();
                assert!(ip <= 1e-10, "trial {trial}: ip {ip}");
            }
        }
    }

    #[test]
    fn ball_projection_hits_the_boundary() {
        let z = [3.0, 2.0, 1.0, 0.5];
        for k in 1..=4 {
            let x = project_sorted_ball(&z, k, 1.0);
            let v = sorted_value(&x, k).unwrap();
            assert!(v <= 1.0 && v > 1.0 - 1e-12, "k={k}: {v}");
        }
        assert_eq!(project_sorted_ball(&z, 2, 100.0), z.to_vec());
    }
}
