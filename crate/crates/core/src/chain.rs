//! δ-interaction chains on the edges of a star and the boundary condition
//! they induce at an outer radius.
//!
//! Everything is transported exactly with 2×2 transfer matrices of the free
//! equation `−ψ'' = −κ²ψ`. At `κ = 0` solutions are piecewise affine, so the
//! effective condition carries no discretization error at all.

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::convergence::SweepRecord;
use crate::coupling::{build_family, oab_to_coupling, CouplingParams, OmegaAlphaBeta, VertexCoupling};
use crate::error::{Error, Result};
use crate::linalg::{self, hstack, CMatrix, I};
use crate::serde_complex;
use crate::DEFAULT_TOL;

pub type Transfer = Matrix2<Complex64>;

/// Singular-value floor, relative to the largest, below which an effective
/// condition is reported as a resonance.
pub const RESONANCE_TOL: f64 = 1e-12;

/// `sinh(z)/z`, with the removable singularity at zero filled in.
fn sinhc(z: Complex64) -> Complex64 {
    if z.norm() < 1e-4 {
        let z2 = z * z;
        1.0 + z2 / 6.0 * (1.0 + z2 / 20.0)
    } else {
        z.sinh() / z
    }
}

/// Maps `(ψ, ψ')` at `x` to `(ψ, ψ')` at `x + len` for the free equation at
/// spectral parameter `κ`.
pub fn interval_transfer(len: f64, kappa: Complex64) -> Transfer {
    let z = kappa * len;
    let ch = z.cosh();
    let s = sinhc(z);
    Transfer::new(ch, s * len, kappa * kappa * len * s, ch)
}

/// Crossing a δ of the given strength: value continuous, derivative jumps
/// by `strength · value`.
pub fn delta_jump(strength: f64) -> Matrix2<f64> {
    Matrix2::new(1.0, 0.0, strength, 1.0)
}

fn jump_c(strength: f64) -> Transfer {
    delta_jump(strength).map(Complex64::from)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaSite {
    pub pos: f64,
    pub strength: f64,
}

/// A star with a δ coupling of strength `u` at the centre and finitely many
/// δ interactions on each edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub n: usize,
    pub u: f64,
    pub edges: Vec<Vec<DeltaSite>>,
    /// Scale parameter the chain was generated from, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
}

impl ChainSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 1 || self.edges.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "chain declares n = {} with {} edges",
                self.n,
                self.edges.len()
            )));
        }
        if !self.u.is_finite() {
            return Err(Error::InvalidParams("central strength must be finite".into()));
        }
        for (j, edge) in self.edges.iter().enumerate() {
            let mut last = 0.0;
            for site in edge {
                if !(site.pos > last) || !site.pos.is_finite() || !site.strength.is_finite() {
                    return Err(Error::InvalidParams(format!(
                        "edge {j}: positions must be finite, positive and strictly increasing"
                    )));
                }
                last = site.pos;
            }
        }
        Ok(())
    }

    /// Largest δ position over all edges (zero for an empty chain).
    pub fn outer_radius(&self) -> f64 {
        self.edges
            .iter()
            .filter_map(|e| e.last())
            .fold(0.0, |acc, s| acc.max(s.pos))
    }

    /// Transfer from `(ψⱼ(0), ψⱼ'(0))` to `(ψⱼ(R), ψⱼ'(R₊))`; a δ sitting
    /// exactly at `R` is crossed.
    pub fn edge_transfer(&self, j: usize, r: f64, kappa: Complex64) -> Result<Transfer> {
        let mut t = Transfer::identity();
        let mut x = 0.0;
        for site in &self.edges[j] {
            if site.pos > r {
                return Err(Error::InvalidParams(format!(
                    "radius {r} lies inside the chain on edge {j} (site at {})",
                    site.pos
                )));
            }
            t = jump_c(site.strength) * interval_transfer(site.pos - x, kappa) * t;
            x = site.pos;
        }
        Ok(interval_transfer(r - x, kappa) * t)
    }
}

/// A boundary condition `A Ψ + B Ψ' = 0`, not necessarily self-adjoint.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCondition {
    pub a: CMatrix,
    pub b: CMatrix,
}

impl BoundaryCondition {
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn block(&self) -> CMatrix {
        hstack(&self.a, &self.b)
    }

    /// Divides each row of `(A|B)` by its largest-magnitude entry.
    pub fn normalized(mut self) -> Self {
        for r in 0..self.a.nrows() {
            let scale = self
                .a
                .row(r)
                .iter()
                .chain(self.b.row(r).iter())
                .fold(Complex64::new(0.0, 0.0), |best, z| if z.norm() > best.norm() { *z } else { best });
            if scale.norm() > 0.0 {
                let inv = 1.0 / scale;
                for k in 0..self.a.ncols() {
                    self.a[(r, k)] *= inv;
                    self.b[(r, k)] *= inv;
                }
            }
        }
        self
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "n": self.n(),
            "A": serde_complex::matrix_to_json(&self.a),
            "B": serde_complex::matrix_to_json(&self.b),
        })
    }
}

impl From<&VertexCoupling> for BoundaryCondition {
    fn from(c: &VertexCoupling) -> Self {
        BoundaryCondition {
            a: c.a().clone(),
            b: c.b().clone(),
        }
    }
}

/// The condition on `(Ψ(R), Ψ'(R₊))` satisfied by every solution of the
/// chain operator at spectral parameter `κ`.
pub fn effective_bc(chain: &ChainSpec, r: f64, kappa: Complex64) -> Result<BoundaryCondition> {
    chain.validate()?;
    let n = chain.n;
    let u_share = Complex64::from(chain.u / n as f64);
    let mut a = CMatrix::zeros(n, n);
    let mut b = CMatrix::zeros(n, n);
    // inverse transfers give (ψⱼ(0), ψⱼ'(0)) as rows acting on outer data
    let mut value_rows = Vec::with_capacity(n);
    let mut deriv_rows = Vec::with_capacity(n);
    for j in 0..n {
        let t = chain.edge_transfer(j, r, kappa)?;
        let inv = t.try_inverse().ok_or(Error::Resonance { pivot: 0.0 })?;
        value_rows.push((inv[(0, 0)], inv[(0, 1)]));
        deriv_rows.push((inv[(1, 0)], inv[(1, 1)]));
    }
    for row in 0..n.saturating_sub(1) {
        let (p, q) = value_rows[row];
        let (p2, q2) = value_rows[row + 1];
        a[(row, row)] = p;
        b[(row, row)] = q;
        a[(row, row + 1)] = -p2;
        b[(row, row + 1)] = -q2;
    }
    for j in 0..n {
        let (p, q) = value_rows[j];
        let (pd, qd) = deriv_rows[j];
        a[(n - 1, j)] = pd - u_share * p;
        b[(n - 1, j)] = qd - u_share * q;
    }
    let bc = BoundaryCondition { a, b }.normalized();
    let sv = linalg::singular_values(&bc.block());
    let ratio = sv.last().copied().unwrap_or(0.0) / sv.first().copied().unwrap_or(1.0);
    if !(ratio > RESONANCE_TOL) {
        return Err(Error::Resonance { pivot: ratio });
    }
    Ok(bc)
}

/// Gap between the subspaces defined by two boundary conditions, in `[0, 1]`.
pub fn bc_distance(c1: &BoundaryCondition, c2: &BoundaryCondition) -> Result<f64> {
    linalg::subspace_gap(&c1.block(), &c2.block(), DEFAULT_TOL)
}

/// Scaling of the central strength for the one-δ-per-edge schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CentralScaling {
    /// `u(d) = i (n/d²) (…)⁻¹`, valid away from the two special cases.
    Generic,
    /// `u(d) = −n/d`, for `a + 1 + nb = 0`.
    MinusNOverD,
    /// `u(d) = ζ d^{−ν}` with `ν > 2`, for the decoupled target `b = 0`.
    Power { zeta: f64, nu: f64 },
}

/// A `d`-indexed family of chains approximating a singular coupling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "schedule", rename_all = "snake_case")]
pub enum Schedule {
    /// Two δ's per edge at `d³` and `d + d³`.
    TwoDelta(OmegaAlphaBeta),
    /// One δ per edge at distance `d`, for `U = aI + b𝒥`.
    OneDeltaPermSym {
        n: usize,
        #[serde(with = "serde_complex::scalar")]
        a: Complex64,
        #[serde(with = "serde_complex::scalar")]
        b: Complex64,
        central: CentralScaling,
    },
}

const SPECIAL_CASE_TOL: f64 = 1e-12;

impl Schedule {
    /// One-δ schedule for `(a, b)`, choosing the central scaling from the
    /// parameters: `a + nb = −1` gets `−n/d` and `b = 0` gets `d^{−3}`.
    pub fn one_delta(n: usize, a: Complex64, b: Complex64) -> Self {
        let nb = b * n as f64;
        let central = if (a + 1.0 + nb).norm() < SPECIAL_CASE_TOL {
            CentralScaling::MinusNOverD
        } else if nb.norm() < SPECIAL_CASE_TOL {
            CentralScaling::Power { zeta: 1.0, nu: 3.0 }
        } else {
            CentralScaling::Generic
        };
        Schedule::OneDeltaPermSym { n, a, b, central }
    }

    /// The δ′_s coupling as a permutation-symmetric one: `a = 1`,
    /// `b = −2/(n − iβ)`; this yields `u = −β/d²`, `v = −1/d`.
    pub fn delta_prime_s(n: usize, beta: f64) -> Self {
        Schedule::one_delta(n, Complex64::new(1.0, 0.0), -2.0 / Complex64::new(n as f64, -beta))
    }

    pub fn n(&self) -> usize {
        match self {
            Schedule::TwoDelta(p) => p.n(),
            Schedule::OneDeltaPermSym { n, .. } => *n,
        }
    }

    /// The coupling the schedule is designed to approach.
    pub fn target(&self) -> Result<VertexCoupling> {
        match self {
            Schedule::TwoDelta(p) => oab_to_coupling(p),
            Schedule::OneDeltaPermSym { n, a, b, .. } => {
                build_family(&CouplingParams::PermSymmetric { a: *a, b: *b }, *n)
            }
        }
    }

    /// Position of the outermost δ at scale `d`.
    pub fn radius(&self, d: f64) -> f64 {
        match self {
            Schedule::TwoDelta(_) => d + d * d * d,
            Schedule::OneDeltaPermSym { .. } => d,
        }
    }

    /// `(u, v)` of the one-δ schedule at scale `d`.
    fn one_delta_strengths(n: usize, a: Complex64, b: Complex64, central: CentralScaling, d: f64) -> Result<(f64, f64)> {
        if (a + 1.0).norm() < SPECIAL_CASE_TOL {
            return Err(Error::InvalidParams("one-δ schedule needs a ≠ −1".into()));
        }
        let nf = n as f64;
        // ψ′ = iμψ on the sum-free subspace, ψ′ = iλ̃ψ on constants, with
        // μ, λ̃ the Cayley images of a and a + nb
        let mu = (a - 1.0) / (a + 1.0);
        let v = -1.0 / d + I * mu;
        let u = match central {
            CentralScaling::Generic => {
                let k = (a - 1.0 + b * nf) / (a + 1.0 + b * nf) - mu;
                if k.norm() < SPECIAL_CASE_TOL {
                    return Err(Error::InvalidParams("b = 0 needs the power-law central scaling".into()));
                }
                I * (nf / (d * d)) / k
            }
            CentralScaling::MinusNOverD => Complex64::from(-nf / d),
            CentralScaling::Power { zeta, nu } => {
                if !(nu > 2.0) || zeta == 0.0 {
                    return Err(Error::InvalidParams("power-law scaling needs ν > 2, ζ ≠ 0".into()));
                }
                Complex64::from(zeta * d.powf(-nu))
            }
        };
        Ok((real_strength(u, "u")?, real_strength(v, "v")?))
    }

    /// The chain at scale `d`.
    pub fn chain(&self, d: f64) -> Result<ChainSpec> {
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::InvalidParams(format!("scale d must be positive, got {d}")));
        }
        match self {
            Schedule::TwoDelta(p) => {
                let s = two_delta_strengths(p, d);
                let inner = d * d * d;
                let edges = (0..p.n())
                    .map(|j| {
                        vec![
                            DeltaSite { pos: inner, strength: s.v[j] },
                            DeltaSite { pos: inner + d, strength: s.w[j] },
                        ]
                    })
                    .collect();
                Ok(ChainSpec {
                    n: p.n(),
                    u: s.u,
                    edges,
                    d: Some(d),
                })
            }
            Schedule::OneDeltaPermSym { n, a, b, central } => {
                let (u, v) = Self::one_delta_strengths(*n, *a, *b, *central, d)?;
                Ok(ChainSpec {
                    n: *n,
                    u,
                    edges: vec![vec![DeltaSite { pos: d, strength: v }]; *n],
                    d: Some(d),
                })
            }
        }
    }
}

fn real_strength(z: Complex64, name: &str) -> Result<f64> {
    if z.im.abs() > 1e-9 * (1.0 + z.re.abs()) {
        return Err(Error::InvalidParams(format!(
            "strength {name} = {z} is not real; (a, b) violate |a| = |a + nb| = 1"
        )));
    }
    Ok(z.re)
}

/// Strengths of the two-δ schedule at scale `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoDeltaStrengths {
    pub u: f64,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
}

/// `u = ω/d⁴`, `vⱼ = −1/d³ + αⱼ/d²`, `wⱼ = −1/d + βⱼ`.
pub fn two_delta_strengths(p: &OmegaAlphaBeta, d: f64) -> TwoDeltaStrengths {
    let d2 = d * d;
    let d3 = d2 * d;
    TwoDeltaStrengths {
        u: p.omega / (d2 * d2),
        v: p.alpha.iter().map(|a| -1.0 / d3 + a / d2).collect(),
        w: p.beta.iter().map(|b| -1.0 / d + b).collect(),
    }
}

/// Coefficients of `ψⱼ(R)` and `ψⱼ'(R₊)` in the expression for `ψⱼ(0)` for
/// two δ's of strengths `v`, `w` at `D` and `D + d`, evaluated at zero energy:
/// `((1 + vD)(1 + wd) + wD, D + d(1 + vD))`.
pub fn two_delta_coefficients(v: f64, w: f64, big_d: f64, d: f64) -> (f64, f64) {
    let t = 1.0 + v * big_d;
    (t * (1.0 + w * d) + w * big_d, big_d + d * t)
}

/// For each `d`, the distance between the zero-energy effective condition
/// at the outermost δ and the target.
pub fn schedule_limit_check(
    schedule: &Schedule,
    target: &BoundaryCondition,
    ds: &[f64],
) -> Result<Vec<SweepRecord>> {
    ds.iter()
        .map(|&d| {
            let chain = schedule.chain(d)?;
            let bc = effective_bc(&chain, schedule.radius(d), Complex64::new(0.0, 0.0))?;
            Ok(SweepRecord {
                d,
                value: bc_distance(&bc, target)?,
            })
        })
        .collect()
}
