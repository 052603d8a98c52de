//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of the symmetric part of `m`, ascending.
pub fn sym_eigenvalues(m: &Mat) -> Vec<f64> {
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    vals
}

pub fn min_eigenvalue(m: &Mat) -> f64 {
    sym_eigenvalues(m).first().copied().unwrap_or(0.0)
}

pub fn max_eigenvalue(m: &Mat) -> f64 {
    sym_eigenvalues(m).last().copied().unwrap_or(0.0)
}

/// Spectral norm (largest singular value).
pub fn op_norm(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0, |acc: f64, &s| acc.max(s))
}

/// Spectral norm of a symmetric matrix via its eigenvalues.
pub fn sym_op_norm(m: &Mat) -> f64 {
    let vals = sym_eigenvalues(m);
    match (vals.first(), vals.last()) {
        (Some(lo), Some(hi)) => lo.abs().max(hi.abs()),
        _ => 0.0,
    }
}

/// `lhs ⪯ rhs` up to an absolute tolerance on the smallest eigenvalue of `rhs - lhs`.
pub fn psd_le(lhs: &Mat, rhs: &Mat, tol: f64) -> bool {
    min_eigenvalue(&(rhs - lhs)) >= -tol
}

pub fn is_psd(m: &Mat, tol: f64) -> bool {
    let asym = (m - m.transpose()).amax();
    asym <= tol && min_eigenvalue(m) >= -tol
}

/// Symmetric square root of a PSD matrix (negative eigenvalues clamped to zero).
pub fn sym_sqrt(m: &Mat) -> Mat {
    map_spectrum(m, |v| v.max(0.0).sqrt())
}

/// Inverse symmetric square root; `None` when the matrix is not positive definite.
pub fn sym_inv_sqrt(m: &Mat, floor: f64) -> Option<Mat> {
    let eig = SymmetricEigen::new(symmetrize(m));
    if eig.eigenvalues.iter().any(|&v| v <= floor) {
        return None;
    }
    Some(rebuild(&eig, |v| 1.0 / v.sqrt()))
}

/// Moore-Penrose inverse square root on the range of a PSD matrix.
pub fn sym_pinv_sqrt(m: &Mat, rel_tol: f64) -> Mat {
    let eig = SymmetricEigen::new(symmetrize(m));
    let top = eig.eigenvalues.iter().fold(0.0_f64, |a, &v| a.max(v));
    let cut = top * rel_tol;
    rebuild(&eig, |v| if v > cut && v > 0.0 { 1.0 / v.sqrt() } else { 0.0 })
}

pub fn map_spectrum(m: &Mat, f: impl Fn(f64) -> f64) -> Mat {
    let eig = SymmetricEigen::new(symmetrize(m));
    rebuild(&eig, f)
}

fn rebuild(eig: &SymmetricEigen<f64, nalgebra::Dyn>, f: impl Fn(f64) -> f64) -> Mat {
    let n = eig.eigenvalues.len();
    let mut out = Mat::zeros(n, n);
    for k in 0..n {
        let w = f(eig.eigenvalues[k]);
        if w == 0.0 {
            continue;
        }
        let u = eig.eigenvectors.column(k);
        out += w * (u * u.transpose());
    }
    out
}

/// Outer product `a bᵀ`.
pub fn outer(a: &Vector, b: &Vector) -> Mat {
    a * b.transpose()
}

/// Kahan-compensated running sum of vectors.
#[derive(Debug, Clone)]
pub struct KahanSum {
    sum: Vec<f64>,
    comp: Vec<f64>,
}

impl KahanSum {
    pub fn new(dim: usize) -> Self {
        Self {
            sum: vec![0.0; dim],
            comp: vec![0.0; dim],
        }
    }

    #[inline]
    pub fn add(&mut self, x: &[f64]) {
        for ((s, c), &v) in self.sum.iter_mut().zip(self.comp.iter_mut()).zip(x) {
            let y = v - *c;
            let t = *s + y;
            *c = (t - *s) - y;
            *s = t;
        }
    }

    pub fn total(&self) -> &[f64] {
        &self.sum
    }
}
