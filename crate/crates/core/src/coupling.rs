//! Vertex couplings of a star graph with `n` edges.
//!
//! A coupling is the linear condition `A Ψ(0) + B Ψ'(0) = 0` on the boundary
//! values and outward derivatives at the centre. It defines a self-adjoint
//! operator iff `rank(A|B) = n` and `A B*` is Hermitian. The same condition
//! can be written `(U − I) Ψ(0) + i (U + I) Ψ'(0) = 0` with `U` unitary,
//! which removes the left-multiplication freedom `(A, B) → (CA, CB)`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, all_ones, hstack, identity, CMatrix, Lu, I};
use crate::serde_complex::{self, ExtendedReal, MatrixJson};
use crate::DEFAULT_TOL;

/// Outcome of [`validate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub n: usize,
    pub rank: usize,
    pub rank_ok: bool,
    pub hermitian_ok: bool,
    /// `‖AB* − (AB*)*‖_F`
    pub hermitian_residual: f64,
    /// `‖AB*‖_F`
    pub ab_star_norm: f64,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.rank_ok && self.hermitian_ok
    }
}

/// Checks the self-adjointness conditions on `(A, B)`.
///
/// Rank is decided by singular values above `tol · σ_max` of the `n × 2n`
/// block; the Hermitian test is `‖AB* − (AB*)*‖ ≤ tol · (1 + ‖AB*‖)`.
pub fn validate(a: &CMatrix, b: &CMatrix, tol: f64) -> Result<ValidationReport> {
    let n = a.nrows();
    if !a.is_square() || !b.is_square() || b.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "A is {}x{}, B is {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    if n < 1 {
        return Err(Error::DimensionMismatch("empty coupling matrices".into()));
    }
    let rank = linalg::numerical_rank(&hstack(a, b), tol);
    let ab = a * b.adjoint();
    let hermitian_residual = (&ab - ab.adjoint()).norm();
    let ab_star_norm = ab.norm();
    Ok(ValidationReport {
        n,
        rank,
        rank_ok: rank == n,
        hermitian_ok: hermitian_residual <= tol * (1.0 + ab_star_norm),
        hermitian_residual,
        ab_star_norm,
    })
}

/// A validated vertex coupling. Values of this type always satisfy the
/// rank and Hermiticity conditions at [`DEFAULT_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct VertexCoupling {
    a: CMatrix,
    b: CMatrix,
    unitary: Option<CMatrix>,
}

impl VertexCoupling {
    pub fn new(a: CMatrix, b: CMatrix) -> Result<Self> {
        let report = validate(&a, &b, DEFAULT_TOL)?;
        if !report.is_valid() {
            return Err(Error::InvalidCoupling {
                rank_ok: report.rank_ok,
                hermitian_ok: report.hermitian_ok,
            });
        }
        Ok(VertexCoupling { a, b, unitary: None })
    }

    /// Attaches a known unitary form, checking that it is unitary and that
    /// it describes the same boundary subspace as `(A, B)`.
    pub fn with_unitary(mut self, u: CMatrix) -> Result<Self> {
        if u.nrows() != self.n() || !u.is_square() {
            return Err(Error::DimensionMismatch("U must be n x n".into()));
        }
        let residual = linalg::unitarity_residual(&u);
        if residual > 1e-9 {
            return Err(Error::NonUnitary { residual });
        }
        let (ua, ub) = unitary_rows(&u);
        let gap = linalg::subspace_gap(&hstack(&self.a, &self.b), &hstack(&ua, &ub), DEFAULT_TOL)?;
        if gap > 1e-8 {
            return Err(Error::InvalidParams(format!(
                "unitary form disagrees with (A, B): subspace gap {gap:.3e}"
            )));
        }
        self.unitary = Some(u);
        Ok(self)
    }

    pub fn from_unitary(u: CMatrix) -> Result<Self> {
        let (a, b) = u_to_ab(&u, 1e-9)?;
        Ok(VertexCoupling {
            a,
            b,
            unitary: Some(u),
        })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &CMatrix {
        &self.a
    }

    pub fn b(&self) -> &CMatrix {
        &self.b
    }

    /// The `n × 2n` block `(A | B)`.
    pub fn block(&self) -> CMatrix {
        hstack(&self.a, &self.b)
    }

    pub fn cached_unitary(&self) -> Option<&CMatrix> {
        self.unitary.as_ref()
    }

    /// `U`, from the cache if present, otherwise via [`ab_to_u`].
    pub fn unitary(&self) -> Result<CMatrix> {
        match &self.unitary {
            Some(u) => Ok(u.clone()),
            None => ab_to_u(self, DEFAULT_TOL),
        }
    }

    pub fn is_real(&self, tol: f64) -> bool {
        self.a.iter().chain(self.b.iter()).all(|z| z.im.abs() <= tol * (1.0 + z.re.abs()))
    }

    /// `(CA, CB)` for an invertible `C`; same operator, different rows.
    pub fn left_multiply(&self, cmat: &CMatrix) -> Result<Self> {
        VertexCoupling::new(cmat * &self.a, cmat * &self.b)
    }
}

fn unitary_rows(u: &CMatrix) -> (CMatrix, CMatrix) {
    let id = identity(u.nrows());
    (u - &id, (u + &id) * I)
}

/// `U = −(A + iB)⁻¹ (A − iB)`.
pub fn ab_to_u(coupling: &VertexCoupling, tol: f64) -> Result<CMatrix> {
    let a = coupling.a();
    let b = coupling.b();
    let plus = a + b * I;
    let minus = a - b * I;
    let lu = Lu::new(&plus)?;
    if lu.is_singular(tol) {
        return Err(Error::SingularPencil {
            pivot_ratio: lu.pivot_ratio(),
        });
    }
    Ok(-lu.solve(&minus))
}

/// `(A, B) = (U − I, i (U + I))`.
pub fn u_to_ab(u: &CMatrix, tol: f64) -> Result<(CMatrix, CMatrix)> {
    if !u.is_square() {
        return Err(Error::DimensionMismatch("U must be square".into()));
    }
    let residual = linalg::unitarity_residual(u);
    if residual > tol {
        return Err(Error::NonUnitary { residual });
    }
    Ok(unitary_rows(u))
}

/// On-shell vertex scattering matrix `S(k) = −(A + ikB)⁻¹ (A − ikB)`.
pub fn scattering_matrix(coupling: &VertexCoupling, k: f64) -> Result<CMatrix> {
    if !(k > 0.0) {
        return Err(Error::InvalidParams(format!("scattering needs k > 0, got {k}")));
    }
    let ik = Complex64::new(0.0, k);
    let plus = coupling.a() + coupling.b() * ik;
    let minus = coupling.a() - coupling.b() * ik;
    let lu = Lu::new(&plus)?;
    if lu.is_singular(1e-14) {
        return Err(Error::SingularMatrix {
            pivot_ratio: lu.pivot_ratio(),
        });
    }
    Ok(-lu.solve(&minus))
}

/// The 2n-parameter family: `θ, c₂..cₙ, t₂..tₙ, ρ`, normalized so that
/// `c₁ + i t₁ = e^{iθ}` and the constant `cⱼτⱼ − γⱼtⱼ` equals one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generic2n {
    pub theta: f64,
    /// `c₂, …, cₙ`
    pub c: Vec<f64>,
    /// `t₂, …, tₙ`
    pub t: Vec<f64>,
    pub rho: f64,
}

impl Generic2n {
    pub fn n(&self) -> usize {
        self.c.len() + 1
    }

    fn check(&self) -> Result<()> {
        if self.c.len() != self.t.len() || self.c.is_empty() {
            return Err(Error::InvalidParams(format!(
                "generic_2n needs c and t of equal length n-1 >= 1, got {} and {}",
                self.c.len(),
                self.t.len()
            )));
        }
        let finite = [self.theta, self.rho]
            .iter()
            .chain(&self.c)
            .chain(&self.t)
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidParams("generic_2n parameters must be finite".into()));
        }
        for (j, (c, t)) in self.c.iter().zip(&self.t).enumerate() {
            if c.hypot(*t) == 0.0 {
                return Err(Error::InvalidParams(format!("c_{0} + i t_{0} vanishes", j + 2)));
            }
        }
        Ok(())
    }

    /// Full vectors `c₁..cₙ`, `t₁..tₙ` with `c₁ = cos θ`, `t₁ = sin θ`.
    pub fn full_ct(&self) -> (Vec<f64>, Vec<f64>) {
        let mut c = vec![self.theta.cos()];
        c.extend(&self.c);
        let mut t = vec![self.theta.sin()];
        t.extend(&self.t);
        (c, t)
    }

    fn z(&self) -> Vec<Complex64> {
        let (c, t) = self.full_ct();
        c.iter().zip(&t).map(|(&c, &t)| Complex64::new(c, t)).collect()
    }

    /// `S = ρ + i (1 + Σ_{ℓ≥2} 1/(c_ℓ² + t_ℓ²))`.
    pub fn s_quantity(&self) -> Complex64 {
        let im = 1.0 + self.c.iter().zip(&self.t).map(|(c, t)| 1.0 / (c * c + t * t)).sum::<f64>();
        Complex64::new(self.rho, im)
    }

    /// Real coefficient rows `(c, t, γ, τ)` of the un-normalized condition
    /// matrix, with `cⱼτⱼ − γⱼtⱼ = 1` for every `j` and `Re S = ρ`.
    pub fn real_rows(&self) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> {
        self.check()?;
        let n = self.n();
        let (c, t) = self.full_ct();
        let share = self.rho / n as f64;
        let mut gamma = Vec::with_capacity(n);
        let mut tau = Vec::with_capacity(n);
        for (&cj, &tj) in c.iter().zip(&t) {
            // (γ + iτ)/(c + it) = share + i/(c² + t²)
            let z = Complex64::new(cj, tj);
            let g = z * share + I * z / z.norm_sqr();
            gamma.push(g.re);
            tau.push(g.im);
        }
        Ok((c, t, gamma, tau))
    }

    /// Parameters of the two-δ-per-edge form; needs `t₂..tₙ ≠ 0` and `θ ≠ 0`.
    pub fn to_omega_alpha_beta(&self) -> Result<OmegaAlphaBeta> {
        self.check()?;
        let half = 0.5 * self.theta;
        if half.sin().abs() < 1e-14 {
            return Err(Error::InvalidParams("theta = 0 corresponds to beta_1 = infinity".into()));
        }
        let beta1 = -half.cos() / half.sin();
        let mut alpha = vec![2.0 * beta1 / (beta1 * beta1 + 1.0)];
        let mut beta = vec![beta1];
        for (&c, &t) in self.c.iter().zip(&self.t) {
            if t == 0.0 {
                return Err(Error::InvalidParams("t_j = 0 gives alpha_j = 0, beta_j undetermined".into()));
            }
            let a = -t;
            alpha.push(a);
            beta.push((c + 1.0) / a);
        }
        let omega = oab_rho_sum(&alpha, &beta) - self.rho;
        OmegaAlphaBeta::new(omega, alpha, beta)
    }
}

fn oab_rho_sum(alpha: &[f64], beta: &[f64]) -> f64 {
    alpha
        .iter()
        .zip(beta)
        .map(|(&a, &b)| {
            let c = a * b - 1.0;
            (b * c + a) / (c * c + a * a)
        })
        .sum()
}

/// Coupling reached by the two-δ-per-edge approximation, parameters
/// `(ω, α⃗, β⃗)` with `α₁ = 2β₁/(β₁² + 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaAlphaBeta {
    pub omega: f64,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl OmegaAlphaBeta {
    pub fn new(omega: f64, alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        let p = OmegaAlphaBeta { omega, alpha, beta };
        p.check()?;
        Ok(p)
    }

    /// Builds the parameters from `β⃗` and `α₂..αₙ`, deriving `α₁`.
    pub fn from_free(omega: f64, alpha_rest: &[f64], beta: Vec<f64>) -> Result<Self> {
        let b1 = *beta
            .first()
            .ok_or_else(|| Error::InvalidParams("beta must be nonempty".into()))?;
        let mut alpha = vec![2.0 * b1 / (b1 * b1 + 1.0)];
        alpha.extend_from_slice(alpha_rest);
        OmegaAlphaBeta::new(omega, alpha, beta)
    }

    pub fn n(&self) -> usize {
        self.alpha.len()
    }

    fn check(&self) -> Result<()> {
        if self.alpha.len() != self.beta.len() || self.alpha.len() < 2 {
            return Err(Error::InvalidParams(format!(
                "alpha and beta need equal length >= 2, got {} and {}",
                self.alpha.len(),
                self.beta.len()
            )));
        }
        if !self.omega.is_finite() || !self.alpha.iter().chain(&self.beta).all(|x| x.is_finite()) {
            return Err(Error::InvalidParams("omega, alpha, beta must be finite".into()));
        }
        let b1 = self.beta[0];
        let want = 2.0 * b1 / (b1 * b1 + 1.0);
        if (self.alpha[0] - want).abs() > 1e-10 * (1.0 + want.abs()) {
            return Err(Error::InvalidParams(format!(
                "alpha_1 must equal 2 beta_1/(beta_1^2+1) = {want}, got {}",
                self.alpha[0]
            )));
        }
        Ok(())
    }

    pub fn to_generic2n(&self) -> Result<Generic2n> {
        self.check()?;
        let b1 = self.beta[0];
        let e = (Complex64::new(b1, -1.0)) / Complex64::new(b1, 1.0);
        let c = self.alpha[1..]
            .iter()
            .zip(&self.beta[1..])
            .map(|(a, b)| a * b - 1.0)
            .collect();
        let t = self.alpha[1..].iter().map(|a| -a).collect();
        Ok(Generic2n {
            theta: e.arg(),
            c,
            t,
            rho: oab_rho_sum(&self.alpha, &self.beta) - self.omega,
        })
    }
}

/// Diagonal-plus-off-diagonal target `Ψ'(0) = (D + S) Ψ(0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagPlusOffdiag {
    pub d: Vec<f64>,
    pub s: Vec<Vec<f64>>,
}

impl DiagPlusOffdiag {
    pub fn n(&self) -> usize {
        self.d.len()
    }

    pub fn check(&self) -> Result<()> {
        let n = self.d.len();
        if self.s.len() != n || self.s.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch(format!("D has length {n}, S must be {n}x{n}")));
        }
        for j in 0..n {
            if self.s[j][j] != 0.0 {
                return Err(Error::InvalidParams(format!("S[{j}][{j}] must vanish")));
            }
            for k in 0..j {
                if self.s[j][k] != self.s[k][j] {
                    return Err(Error::InvalidParams(format!("S is not symmetric at ({j},{k})")));
                }
            }
        }
        if !self.d.iter().chain(self.s.iter().flatten()).all(|x| x.is_finite()) {
            return Err(Error::InvalidParams("D and S must be finite".into()));
        }
        Ok(())
    }

    /// The real matrix `D + S`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(n, n, |j, k| if j == k { self.d[j] } else { self.s[j][k] })
    }
}

/// Named coupling families, tagged by `family` with fields under `params`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum CouplingParams {
    Delta {
        alpha: f64,
    },
    DeltaPrimeS {
        beta: ExtendedReal,
    },
    DeltaPrime {
        beta: ExtendedReal,
    },
    PermSymmetric {
        #[serde(with = "serde_complex::scalar")]
        a: Complex64,
        #[serde(with = "serde_complex::scalar")]
        b: Complex64,
    },
    #[serde(rename = "generic_2n")]
    Generic2n(Generic2n),
    OmegaAlphaBeta(OmegaAlphaBeta),
    Separated {
        theta: Vec<f64>,
    },
    DiagPlusOffdiag(DiagPlusOffdiag),
}

fn check_len(name: &str, got: usize, n: usize) -> Result<()> {
    if got != n {
        return Err(Error::DimensionMismatch(format!("{name} describes {got} edges, n = {n}")));
    }
    Ok(())
}

/// Builds the coupling of a named family on `n` edges. The unitary form is
/// attached from the family's closed form and cross-checked against `(A, B)`.
pub fn build_family(params: &CouplingParams, n: usize) -> Result<VertexCoupling> {
    if n < 2 {
        return Err(Error::InvalidParams(format!("a star vertex needs n >= 2 edges, got {n}")));
    }
    let nf = n as f64;
    let one = Complex64::new(1.0, 0.0);
    let id = identity(n);
    let jj = all_ones(n);
    match params {
        CouplingParams::Delta { alpha } => {
            let mut a = CMatrix::zeros(n, n);
            let mut b = CMatrix::zeros(n, n);
            for r in 0..n - 1 {
                a[(r, r)] = one;
                a[(r, r + 1)] = -one;
            }
            for k in 0..n {
                a[(n - 1, k)] = Complex64::from(-alpha / nf);
                b[(n - 1, k)] = one;
            }
            let u = &jj * (Complex64::new(2.0, 0.0) / Complex64::new(nf, *alpha)) - &id;
            VertexCoupling::new(a, b)?.with_unitary(u)
        }
        CouplingParams::DeltaPrimeS { beta } => match beta {
            ExtendedReal::Infinite => VertexCoupling::new(CMatrix::zeros(n, n), id.clone())?.with_unitary(id),
            ExtendedReal::Finite(beta) => {
                let mut a = CMatrix::zeros(n, n);
                let mut b = CMatrix::zeros(n, n);
                for r in 0..n - 1 {
                    b[(r, r)] = one;
                    b[(r, r + 1)] = -one;
                }
                for k in 0..n {
                    a[(n - 1, k)] = one;
                    b[(n - 1, k)] = Complex64::from(-beta / nf);
                }
                let u = &id - &jj * (Complex64::new(2.0, 0.0) / Complex64::new(nf, -beta));
                VertexCoupling::new(a, b)?.with_unitary(u)
            }
        },
        CouplingParams::DeltaPrime { beta } => match beta {
            ExtendedReal::Infinite => VertexCoupling::new(CMatrix::zeros(n, n), id.clone())?.with_unitary(id),
            ExtendedReal::Finite(beta) => {
                let mut a = CMatrix::zeros(n, n);
                let mut b = CMatrix::zeros(n, n);
                for r in 0..n - 1 {
                    a[(r, r)] = one;
                    a[(r, r + 1)] = -one;
                    b[(r, r)] = Complex64::from(-beta / nf);
                    b[(r, r + 1)] = Complex64::from(beta / nf);
                }
                for k in 0..n {
                    b[(n - 1, k)] = one;
                }
                let denom = Complex64::new(nf, -beta);
                let u = &id * (-Complex64::new(nf, *beta) / denom) + &jj * (Complex64::new(2.0, 0.0) / denom);
                VertexCoupling::new(a, b)?.with_unitary(u)
            }
        },
        CouplingParams::PermSymmetric { a, b } => {
            let (a, b) = (*a, *b);
            let outer = a + b * nf;
            if (a.norm() - 1.0).abs() > 1e-10 || (outer.norm() - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidParams(format!(
                    "permutation-symmetric coupling needs |a| = 1 and |a + n b| = 1, got {} and {}",
                    a.norm(),
                    outer.norm()
                )));
            }
            let mut am = CMatrix::zeros(n, n);
            let mut bm = CMatrix::zeros(n, n);
            for r in 0..n - 1 {
                am[(r, r)] = a - 1.0;
                am[(r, r + 1)] = -(a - 1.0);
                bm[(r, r)] = I * (a + 1.0);
                bm[(r, r + 1)] = -I * (a + 1.0);
            }
            for k in 0..n {
                am[(n - 1, k)] = outer - 1.0;
                bm[(n - 1, k)] = I * (outer + 1.0);
            }
            let u = &id * a + &jj * b;
            VertexCoupling::new(am, bm)?.with_unitary(u)
        }
        CouplingParams::Generic2n(p) => {
            check_len("generic_2n", p.n(), n)?;
            generic2n_to_coupling(p)
        }
        CouplingParams::OmegaAlphaBeta(p) => {
            check_len("omega_alpha_beta", p.n(), n)?;
            oab_to_coupling(p)
        }
        CouplingParams::Separated { theta } => {
            check_len("separated", theta.len(), n)?;
            if !theta.iter().all(|x| x.is_finite()) {
                return Err(Error::InvalidParams("theta must be finite".into()));
            }
            let a = CMatrix::from_diagonal(&theta.iter().map(|t| Complex64::from((0.5 * t).sin())).collect::<Vec<_>>().into());
            let b = CMatrix::from_diagonal(&theta.iter().map(|t| Complex64::from((0.5 * t).cos())).collect::<Vec<_>>().into());
            let u = CMatrix::from_diagonal(&theta.iter().map(|&t| Complex64::from_polar(1.0, t)).collect::<Vec<_>>().into());
            VertexCoupling::new(a, b)?.with_unitary(u)
        }
        CouplingParams::DiagPlusOffdiag(p) => {
            check_len("diag_plus_offdiag", p.n(), n)?;
            p.check()?;
            let m = p.matrix();
            let a = CMatrix::from_fn(n, n, |j, k| Complex64::from(-m[(j, k)]));
            VertexCoupling::new(a, id)
        }
    }
}

/// `U` of the 2n-parameter family in closed form.
pub fn generic2n_unitary(p: &Generic2n) -> Result<CMatrix> {
    p.check()?;
    let n = p.n();
    let z = p.z();
    let s = p.s_quantity();
    Ok(CMatrix::from_fn(n, n, |j, k| {
        let off = 2.0 * I / (z[j] * z[k] * s);
        if j == k {
            off - z[j].conj() / z[j]
        } else {
            off
        }
    }))
}

/// Explicit `(A, B)` of the 2n-parameter family: rows
/// `cos θ ψ₁ − cⱼ ψⱼ + sin θ ψ₁′ − tⱼ ψⱼ′ = 0` and a last row with entries
/// `S cⱼ − i n/zⱼ` and `S tⱼ + n/zⱼ`, `zⱼ = cⱼ + i tⱼ`.
pub fn generic2n_ab(p: &Generic2n) -> Result<(CMatrix, CMatrix)> {
    p.check()?;
    let n = p.n();
    let nf = n as f64;
    let (c, t) = p.full_ct();
    let z = p.z();
    let s = p.s_quantity();
    let mut a = CMatrix::zeros(n, n);
    let mut b = CMatrix::zeros(n, n);
    for r in 0..n - 1 {
        a[(r, 0)] = c[0].into();
        a[(r, r + 1)] = (-c[r + 1]).into();
        b[(r, 0)] = t[0].into();
        b[(r, r + 1)] = (-t[r + 1]).into();
    }
    for k in 0..n {
        a[(n - 1, k)] = s * c[k] - I * nf / z[k];
        b[(n - 1, k)] = s * t[k] + nf / z[k];
    }
    Ok((a, b))
}

/// The same coupling with real matrices: rows `(c₁, −cⱼ | t₁, −tⱼ)` and a
/// last row `(γ | τ)` reconstructed from [`Generic2n::real_rows`].
pub fn generic2n_real_ab(p: &Generic2n) -> Result<(CMatrix, CMatrix)> {
    let (c, t, gamma, tau) = p.real_rows()?;
    let n = p.n();
    let mut a = CMatrix::zeros(n, n);
    let mut b = CMatrix::zeros(n, n);
    for r in 0..n - 1 {
        a[(r, 0)] = c[0].into();
        a[(r, r + 1)] = (-c[r + 1]).into();
        b[(r, 0)] = t[0].into();
        b[(r, r + 1)] = (-t[r + 1]).into();
    }
    for k in 0..n {
        a[(n - 1, k)] = gamma[k].into();
        b[(n - 1, k)] = tau[k].into();
    }
    Ok((a, b))
}

/// Coupling of the 2n-parameter family: `(A, B)` from [`generic2n_ab`] with
/// the closed-form `U` attached.
pub fn generic2n_to_coupling(p: &Generic2n) -> Result<VertexCoupling> {
    let u = generic2n_unitary(p)?;
    let (a, b) = generic2n_ab(p)?;
    VertexCoupling::new(a, b)?.with_unitary(u)
}

/// `(A, B)` of the `(ω, α⃗, β⃗)` coupling:
/// rows `(α₁β₁−1)ψ₁ − (αⱼβⱼ−1)ψⱼ − α₁ψ₁′ + αⱼψⱼ′ = 0` and
/// `Σ γ̃ⱼψⱼ + Σ τ̃ⱼψⱼ′ = 0` with `γ̃ⱼ = (ω/n)(αⱼβⱼ−1) − βⱼ`, `τ̃ⱼ = 1 − (ω/n)αⱼ`.
pub fn oab_ab(p: &OmegaAlphaBeta) -> Result<(CMatrix, CMatrix)> {
    p.check()?;
    let n = p.n();
    let w = p.omega / n as f64;
    let cj: Vec<f64> = p.alpha.iter().zip(&p.beta).map(|(a, b)| a * b - 1.0).collect();
    let mut a = CMatrix::zeros(n, n);
    let mut b = CMatrix::zeros(n, n);
    for r in 0..n - 1 {
        a[(r, 0)] = cj[0].into();
        a[(r, r + 1)] = (-cj[r + 1]).into();
        b[(r, 0)] = (-p.alpha[0]).into();
        b[(r, r + 1)] = p.alpha[r + 1].into();
    }
    for k in 0..n {
        a[(n - 1, k)] = (w * cj[k] - p.beta[k]).into();
        b[(n - 1, k)] = (1.0 - w * p.alpha[k]).into();
    }
    Ok((a, b))
}

pub fn oab_to_coupling(p: &OmegaAlphaBeta) -> Result<VertexCoupling> {
    let (a, b) = oab_ab(p)?;
    VertexCoupling::new(a, b)
}

/// JSON coupling descriptor: either a named family or raw `(A, B)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CouplingDescriptor {
    Family {
        n: usize,
        #[serde(flatten)]
        params: CouplingParams,
    },
    Raw {
        n: usize,
        #[serde(rename = "A")]
        a: MatrixJson,
        #[serde(rename = "B")]
        b: MatrixJson,
    },
}

impl CouplingDescriptor {
    pub fn n(&self) -> usize {
        match self {
            CouplingDescriptor::Family { n, .. } | CouplingDescriptor::Raw { n, .. } => *n,
        }
    }

    /// Matrices as given, without validation.
    pub fn raw_matrices(&self) -> Result<Option<(CMatrix, CMatrix)>> {
        match self {
            CouplingDescriptor::Raw { n, a, b } => {
                let a = serde_complex::matrix_from_json(a)?;
                let b = serde_complex::matrix_from_json(b)?;
                if a.nrows() != *n || b.nrows() != *n {
                    return Err(Error::DimensionMismatch(format!("descriptor says n = {n}")));
                }
                Ok(Some((a, b)))
            }
            CouplingDescriptor::Family { .. } => Ok(None),
        }
    }

    pub fn build(&self) -> Result<VertexCoupling> {
        match self {
            CouplingDescriptor::Family { n, params } => build_family(params, *n),
            CouplingDescriptor::Raw { .. } => {
                let (a, b) = self.raw_matrices()?.expect("raw descriptor");
                VertexCoupling::new(a, b)
            }
        }
    }

    pub fn from_coupling(coupling: &VertexCoupling) -> Self {
        CouplingDescriptor::Raw {
            n: coupling.n(),
            a: serde_complex::matrix_to_json(coupling.a()),
            b: serde_complex::matrix_to_json(coupling.b()),
        }
    }
}
