use nalgebra::DMatrix;

use crate::model::DenseMatrix;

/// Thin SVD `X = U diag(s) Vᵀ` with `s` sorted nonincreasing.
#[derive(Clone, Debug)]
pub struct Svd {
    /// `d1 × p`
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    /// `d2 × p`
    pub v: DMatrix<f64>,
}

impl Svd {
    pub fn new(x: &DenseMatrix) -> Self {
        let svd = nalgebra::SVD::new(x.to_nalgebra(), true, true);
        let u = svd.u.expect("left singular vectors requested");
        let v = svd.v_t.expect("right singular vectors requested").transpose();
        Svd {
            u,
            s: svd.singular_values.iter().copied().collect(),
            v,
        }
    }

    pub fn rank(&self) -> usize {
        rank_of(&self.s)
    }

    /// `U diag(d) Vᵀ` for a replacement spectrum `d` (len ≤ p).
    pub fn compose(&self, d: &[f64]) -> DenseMatrix {
        let (rows, cols) = (self.u.nrows(), self.v.nrows());
        let mut out = DenseMatrix::zeros(rows, cols);
        let data = out.as_mut_slice();
        for (l, &dl) in d.iter().enumerate() {
            if dl == 0.0 {
                continue;
            }
            let ucol = self.u.column(l);
            let vcol = self.v.column(l);
            for i in 0..rows {
                let a = dl * ucol[i];
                if a == 0.0 {
                    continue;
                }
                let row = &mut data[i * cols..(i + 1) * cols];
                for (dst, &b) in row.iter_mut().zip(vcol.iter()) {
                    *dst += a * b;
                }
            }
        }
        out
    }
}

/// Numerical rank: count of `σ_i > 1e-12 σ_1`.
pub fn rank_of(s: &[f64]) -> usize {
    let top = s.first().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return 0;
    }
    s.iter().take_while(|&&v| v > 1e-12 * top).count()
}

pub fn singular_values(x: &DenseMatrix) -> Vec<f64> {
    let sv = x.to_nalgebra().singular_values();
    let mut s: Vec<f64> = sv.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}
