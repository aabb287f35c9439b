//! Small dense complex linear algebra.
//!
//! Matrices here are tiny (n ≤ 16 or so), so everything is plain dense
//! storage. Linear solves use our own partial-pivot LU so that the pivot
//! magnitudes are available as a cheap conditioning signal; rank decisions
//! and subspace projectors go through nalgebra's SVD.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// The n×n all-ones matrix 𝒥.
pub fn all_ones(n: usize) -> CMatrix {
    CMatrix::from_element(n, n, Complex64::new(1.0, 0.0))
}

pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> CMatrix {
    CMatrix::from_row_iterator(rows, cols, data.iter().map(|&x| Complex64::new(x, 0.0)))
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// LU factorization with partial (row) pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: CMatrix,
    perm: Vec<usize>,
    pivot_ratio: f64,
}

impl Lu {
    pub fn new(a: &CMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "LU needs a square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let n = a.nrows();
        let scale = max_abs(a);
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut min_pivot = f64::INFINITY;
        for k in 0..n {
            let (mut p, mut best) = (k, lu[(k, k)].norm());
            for r in k + 1..n {
                let v = lu[(r, k)].norm();
                if v > best {
                    p = r;
                    best = v;
                }
            }
            min_pivot = min_pivot.min(best);
            if best == 0.0 {
                continue;
            }
            if p != k {
                lu.swap_rows(p, k);
                perm.swap(p, k);
            }
            let pivot = lu[(k, k)];
            for r in k + 1..n {
                let factor = lu[(r, k)] / pivot;
                lu[(r, k)] = factor;
                for col in k + 1..n {
                    let sub = factor * lu[(k, col)];
                    lu[(r, col)] -= sub;
                }
            }
        }
        let pivot_ratio = if n == 0 {
            1.0
        } else if scale == 0.0 {
            0.0
        } else {
            min_pivot / scale
        };
        Ok(Lu {
            lu,
            perm,
            pivot_ratio,
        })
    }

    /// Smallest pivot magnitude relative to the largest entry of the input.
    pub fn pivot_ratio(&self) -> f64 {
        self.pivot_ratio
    }

    pub fn is_singular(&self, tol: f64) -> bool {
        !(self.pivot_ratio > tol)
    }

    pub fn solve(&self, b: &CMatrix) -> CMatrix {
        let n = self.lu.nrows();
        assert_eq!(b.nrows(), n, "right-hand side has wrong row count");
        let mut x = CMatrix::zeros(n, b.ncols());
        for col in 0..b.ncols() {
            for r in 0..n {
                x[(r, col)] = b[(self.perm[r], col)];
            }
            for r in 0..n {
                let mut s = x[(r, col)];
                for k in 0..r {
                    s -= self.lu[(r, k)] * x[(k, col)];
                }
                x[(r, col)] = s;
            }
            for r in (0..n).rev() {
                let mut s = x[(r, col)];
                for k in r + 1..n {
                    s -= self.lu[(r, k)] * x[(k, col)];
                }
                x[(r, col)] = s / self.lu[(r, r)];
            }
        }
        x
    }
}

/// Solves `A X = B`, failing when the pivot ratio drops to `tol` or below.
pub fn solve(a: &CMatrix, b: &CMatrix, tol: f64) -> Result<CMatrix> {
    let lu = Lu::new(a)?;
    if lu.is_singular(tol) {
        return Err(Error::SingularMatrix {
            pivot_ratio: lu.pivot_ratio(),
        });
    }
    Ok(lu.solve(b))
}

pub fn inverse(a: &CMatrix, tol: f64) -> Result<CMatrix> {
    solve(a, &identity(a.nrows()), tol)
}

pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Number of singular values above `tol · σ_max`.
pub fn numerical_rank(m: &CMatrix, tol: f64) -> usize {
    let sv = singular_values(m);
    let Some(&smax) = sv.first() else { return 0 };
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * smax).count()
}

pub fn spectral_norm(m: &CMatrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// `‖U* U − I‖_F`.
pub fn unitarity_residual(u: &CMatrix) -> f64 {
    (u.adjoint() * u - identity(u.ncols())).norm()
}

/// Orthogonal projector onto the span of the rows of `m` (i.e. onto the
/// column space of `m*`). Requires full row rank at tolerance `tol`.
pub fn row_space_projector(m: &CMatrix, tol: f64) -> Result<CMatrix> {
    let rows = m.nrows();
    let svd = m.adjoint().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let sv = &svd.singular_values;
    let smax = sv.iter().fold(0.0_f64, |a, &s| a.max(s));
    let keep: Vec<usize> = (0..sv.len()).filter(|&i| smax > 0.0 && sv[i] > tol * smax).collect();
    if keep.len() < rows {
        return Err(Error::RankDeficient {
            rank: keep.len(),
            expected: rows,
        });
    }
    let basis = u.select_columns(keep.iter());
    Ok(&basis * basis.adjoint())
}

/// Gap between the row spaces of two full-row-rank matrices: the spectral
/// norm of the difference of the orthogonal projectors. Lies in `[0, 1]`.
pub fn subspace_gap(m1: &CMatrix, m2: &CMatrix, tol: f64) -> Result<f64> {
    if m1.ncols() != m2.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "subspaces live in C^{} and C^{}",
            m1.ncols(),
            m2.ncols()
        )));
    }
    let p1 = row_space_projector(m1, tol)?;
    let p2 = row_space_projector(m2, tol)?;
    Ok(spectral_norm(&(p1 - p2)))
}

/// Horizontal block `(A | B)`.
pub fn hstack(a: &CMatrix, b: &CMatrix) -> CMatrix {
    assert_eq!(a.nrows(), b.nrows());
    let mut out = CMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), (a.nrows(), a.ncols())).copy_from(a);
    out.view_mut((0, a.ncols()), (b.nrows(), b.ncols())).copy_from(b);
    out
}

/// Complex `expm1`, accurate for small `|z|`.
pub fn expm1(z: Complex64) -> Complex64 {
    let (re, im) = (z.re, z.im);
    let em1 = re.exp_m1();
    let half = (0.5 * im).sin();
    // e^re (cos im + i sin im) - 1 = em1 cos im + (cos im - 1) + i e^re sin im
    Complex64::new(em1 * im.cos() - 2.0 * half * half, re.exp() * im.sin())
}
