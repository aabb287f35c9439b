//! Resolvent kernels of star-graph operators at `k² = −κ²`, `Re κ > 0`.
//!
//! All kernels are built from the Dirichlet halfline kernel by rank-one
//! Krein corrections, one per δ interaction, and a final rank-`n`
//! correction at the vertex. Evaluators precompute every scalar that does
//! not depend on the evaluation point, so `eval` is O(1) per point.

use std::io::{self, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chain::{two_delta_strengths, ChainSpec, DeltaSite};
use crate::coupling::{OmegaAlphaBeta, VertexCoupling};
use crate::error::{Error, Result};
use crate::linalg::{self, expm1, CMatrix};

/// A spectral parameter `κ` with `Re κ > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct SpectralPoint(Complex64);

impl SpectralPoint {
    pub fn new(kappa: Complex64) -> Result<Self> {
        if !(kappa.re > 0.0) || !kappa.im.is_finite() || !kappa.re.is_finite() {
            return Err(Error::InvalidParams(format!("spectral parameter needs Re κ > 0, got {kappa}")));
        }
        Ok(SpectralPoint(kappa))
    }

    pub fn real(kappa: f64) -> Result<Self> {
        Self::new(Complex64::new(kappa, 0.0))
    }

    pub fn kappa(&self) -> Complex64 {
        self.0
    }
}

impl TryFrom<[f64; 2]> for SpectralPoint {
    type Error = Error;
    fn try_from(v: [f64; 2]) -> Result<Self> {
        Self::new(Complex64::new(v[0], v[1]))
    }
}

impl From<SpectralPoint> for [f64; 2] {
    fn from(s: SpectralPoint) -> Self {
        [s.0.re, s.0.im]
    }
}

/// An `n × n` matrix-valued kernel on the star, `(j, l, x, y) ↦ G_{jl}(x, y)`
/// with `x` on edge `j` and `y` on edge `l`.
pub trait KernelEvaluator: Send + Sync {
    fn n(&self) -> usize;

    fn kappa(&self) -> SpectralPoint;

    fn eval(&self, j: usize, l: usize, x: f64, y: f64) -> Complex64;

    /// Points on edge `j` where the kernel has derivative kinks besides the
    /// diagonal `x = y`.
    fn breakpoints(&self, _j: usize) -> Vec<f64> {
        Vec::new()
    }
}

fn exp_neg(kappa: Complex64, x: f64) -> Complex64 {
    (-kappa * x).exp()
}

/// `sinh(κ x_<) e^{−κ x_>} / κ`, evaluated as
/// `e^{−κ(x_> − x_<)} (1 − e^{−2κ x_<}) / (2κ)` to avoid overflow.
pub fn dirichlet_kernel(kappa: Complex64, x: f64, y: f64) -> Complex64 {
    let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
    exp_neg(kappa, hi - lo) * (-expm1(-2.0 * kappa * lo)) / (2.0 * kappa)
}

/// Krein coefficient matrix `Λ = −(A − κB)⁻¹ B`.
pub fn krein_lambda(a: &CMatrix, b: &CMatrix, kappa: SpectralPoint) -> Result<CMatrix> {
    let k = kappa.kappa();
    let m = a - b * k;
    match linalg::solve(&m, b, 1e-13) {
        Ok(x) => Ok(-x),
        Err(Error::SingularMatrix { pivot_ratio }) => Err(Error::Pole(format!(
            "A − κB is singular at κ = {k} (pivot ratio {pivot_ratio:.3e})"
        ))),
        Err(e) => Err(e),
    }
}

/// Closed form of `Λ` for the `(ω, α⃗, β⃗)` coupling: with
/// `qⱼ = αⱼ(βⱼ + κ) − 1` and `Q = ω − Σₘ (βₘ + κ)/qₘ`,
/// `Λⱼₗ = 1/(Q qⱼ qₗ) + δⱼₗ αⱼ/qⱼ`.
pub fn oab_lambda(p: &OmegaAlphaBeta, kappa: SpectralPoint) -> Result<CMatrix> {
    let k = kappa.kappa();
    let n = p.n();
    let q: Vec<Complex64> = p.alpha.iter().zip(&p.beta).map(|(a, b)| a * (b + k) - 1.0).collect();
    if let Some(j) = q.iter().position(|z| z.norm() < 1e-14) {
        return Err(Error::Pole(format!("α_j(β_j + κ) = 1 on edge {j}")));
    }
    let big_q = p.omega - p.beta.iter().zip(&q).map(|(b, qm)| (b + k) / qm).sum::<Complex64>();
    if big_q.norm() < 1e-14 {
        return Err(Error::Pole("vertex denominator of the limit kernel vanishes".into()));
    }
    Ok(CMatrix::from_fn(n, n, |j, l| {
        let off = 1.0 / (big_q * q[j] * q[l]);
        if j == l {
            off + p.alpha[j] / q[j]
        } else {
            off
        }
    }))
}

/// Kernel of the star with vertex condition `(A, B)` and free edges:
/// `δⱼₗ G(x, y) + Λⱼₗ e^{−κx} e^{−κy}`.
#[derive(Debug, Clone)]
pub struct LimitKernel {
    kappa: SpectralPoint,
    lambda: CMatrix,
}

impl LimitKernel {
    pub fn new(coupling: &VertexCoupling, kappa: SpectralPoint) -> Result<Self> {
        Ok(LimitKernel {
            kappa,
            lambda: krein_lambda(coupling.a(), coupling.b(), kappa)?,
        })
    }

    pub fn from_lambda(lambda: CMatrix, kappa: SpectralPoint) -> Self {
        LimitKernel { kappa, lambda }
    }

    pub fn lambda(&self) -> &CMatrix {
        &self.lambda
    }
}

impl KernelEvaluator for LimitKernel {
    fn n(&self) -> usize {
        self.lambda.nrows()
    }

    fn kappa(&self) -> SpectralPoint {
        self.kappa
    }

    fn eval(&self, j: usize, l: usize, x: f64, y: f64) -> Complex64 {
        let k = self.kappa.0;
        let cross = self.lambda[(j, l)] * exp_neg(k, x + y);
        if j == l {
            dirichlet_kernel(k, x, y) + cross
        } else {
            cross
        }
    }
}

/// Relative size below which a Krein denominator counts as zero.
const POLE_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
struct Level {
    pos: f64,
    /// `v / (1 + v G_prev(p, p))`
    coef: Complex64,
    /// `∂_y G_prev(p, y)` at `y = 0`
    edge_flux: Complex64,
}

/// Halfline kernel with Dirichlet condition at the origin and δ
/// interactions at given positions, built one δ at a time:
/// `G⁺(x, y) = G(x, y) − v/(1 + v G(p, p)) · G(x, p) G(y, p)`.
#[derive(Debug, Clone)]
pub struct EdgeKernel {
    kappa: SpectralPoint,
    levels: Vec<Level>,
    /// `∂_x ∂_y G(x, y)` at `x = y = 0`
    d00: Complex64,
}

impl EdgeKernel {
    pub fn new(sites: &[DeltaSite], kappa: SpectralPoint) -> Result<Self> {
        let k = kappa.0;
        let mut kernel = EdgeKernel {
            kappa,
            levels: Vec::with_capacity(sites.len()),
            d00: -k,
        };
        for site in sites {
            let g = kernel.eval_level(kernel.levels.len(), site.pos, site.pos);
            let denom = 1.0 + site.strength * g;
            if denom.norm() <= POLE_TOL * (1.0 + (site.strength * g).norm()) {
                return Err(Error::Pole(format!(
                    "Krein denominator vanishes for the δ at {} (strength {})",
                    site.pos, site.strength
                )));
            }
            let edge_flux = kernel.dy0_level(kernel.levels.len(), site.pos);
            let coef = site.strength / denom;
            kernel.d00 -= coef * edge_flux * edge_flux;
            kernel.levels.push(Level {
                pos: site.pos,
                coef,
                edge_flux,
            });
        }
        Ok(kernel)
    }

    fn eval_level(&self, level: usize, x: f64, y: f64) -> Complex64 {
        if level == 0 {
            return dirichlet_kernel(self.kappa.0, x, y);
        }
        let l = &self.levels[level - 1];
        self.eval_level(level - 1, x, y) - l.coef * self.eval_level(level - 1, x, l.pos) * self.eval_level(level - 1, y, l.pos)
    }

    fn dy0_level(&self, level: usize, x: f64) -> Complex64 {
        if level == 0 {
            return exp_neg(self.kappa.0, x);
        }
        let l = &self.levels[level - 1];
        self.dy0_level(level - 1, x) - l.coef * self.eval_level(level - 1, x, l.pos) * l.edge_flux
    }

    pub fn eval(&self, x: f64, y: f64) -> Complex64 {
        self.eval_level(self.levels.len(), x, y)
    }

    /// `∂_y G(x, y)` at `y = 0`.
    pub fn dy_at_origin(&self, x: f64) -> Complex64 {
        self.dy0_level(self.levels.len(), x)
    }

    /// `∂_x ∂_y G(x, y)` at `x = y = 0`.
    pub fn dxdy_at_origin(&self) -> Complex64 {
        self.d00
    }

    pub fn positions(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.pos).collect()
    }
}

/// One δ of strength `v` at `p`.
pub fn one_delta_kernel(v: f64, p: f64, kappa: SpectralPoint) -> Result<EdgeKernel> {
    EdgeKernel::new(&[DeltaSite { pos: p, strength: v }], kappa)
}

/// δ's of strengths `v` at `d³` and `w` at `d + d³`.
pub fn two_delta_kernel(v: f64, w: f64, d: f64, kappa: SpectralPoint) -> Result<EdgeKernel> {
    let inner = d * d * d;
    EdgeKernel::new(
        &[
            DeltaSite { pos: inner, strength: v },
            DeltaSite { pos: inner + d, strength: w },
        ],
        kappa,
    )
}

/// Kernel of the star with a δ of strength `u` at the centre and δ chains
/// on the edges:
/// `δⱼₗ Gⱼ(x, y) + ∂_y Gⱼ(x, 0) ∂_y Gₗ(y, 0) / (u − Σₘ ∂_x∂_y Gₘ(0, 0))`.
#[derive(Debug, Clone)]
pub struct ApproxStarKernel {
    kappa: SpectralPoint,
    edges: Vec<EdgeKernel>,
    inv_bracket: Complex64,
}

impl ApproxStarKernel {
    pub fn from_chain(chain: &ChainSpec, kappa: SpectralPoint) -> Result<Self> {
        chain.validate()?;
        let edges = chain
            .edges
            .iter()
            .map(|sites| EdgeKernel::new(sites, kappa))
            .collect::<Result<Vec<_>>>()?;
        let sum: Complex64 = edges.iter().map(EdgeKernel::dxdy_at_origin).sum();
        let bracket = chain.u - sum;
        let scale = chain.u.abs() + edges.iter().map(|e| e.dxdy_at_origin().norm()).sum::<f64>();
        if bracket.norm() <= POLE_TOL * scale {
            return Err(Error::Pole(format!("vertex bracket vanishes at κ = {}", kappa.0)));
        }
        Ok(ApproxStarKernel {
            kappa,
            edges,
            inv_bracket: 1.0 / bracket,
        })
    }

    /// Kernel of the two-δ schedule for `(ω, α⃗, β⃗)` at scale `d`.
    pub fn two_delta(p: &OmegaAlphaBeta, d: f64, kappa: SpectralPoint) -> Result<Self> {
        let s = two_delta_strengths(p, d);
        let inner = d * d * d;
        let chain = ChainSpec {
            n: p.n(),
            u: s.u,
            edges: (0..p.n())
                .map(|j| {
                    vec![
                        DeltaSite { pos: inner, strength: s.v[j] },
                        DeltaSite { pos: inner + d, strength: s.w[j] },
                    ]
                })
                .collect(),
            d: Some(d),
        };
        Self::from_chain(&chain, kappa)
    }

    pub fn edge(&self, j: usize) -> &EdgeKernel {
        &self.edges[j]
    }

    /// `1 / (u − Σₘ ∂_x∂_y Gₘ(0, 0))`.
    pub fn vertex_coefficient(&self) -> Complex64 {
        self.inv_bracket
    }
}

impl KernelEvaluator for ApproxStarKernel {
    fn n(&self) -> usize {
        self.edges.len()
    }

    fn kappa(&self) -> SpectralPoint {
        self.kappa
    }

    fn eval(&self, j: usize, l: usize, x: f64, y: f64) -> Complex64 {
        let cross = self.edges[j].dy_at_origin(x) * self.edges[l].dy_at_origin(y) * self.inv_bracket;
        if j == l {
            self.edges[j].eval(x, y) + cross
        } else {
            cross
        }
    }

    fn breakpoints(&self, j: usize) -> Vec<f64> {
        self.edges[j].positions()
    }
}

/// Writes `j,l,x,y,re,im` rows for all edge pairs on the tensor grid
/// `xs × ys`, edges numbered from 1.
pub fn write_kernel_csv<W: Write>(kernel: &dyn KernelEvaluator, xs: &[f64], ys: &[f64], out: &mut W) -> io::Result<()> {
    writeln!(out, "j,l,x,y,re,im")?;
    let n = kernel.n();
    for j in 0..n {
        for l in 0..n {
            for &x in xs {
                for &y in ys {
                    let g = kernel.eval(j, l, x, y);
                    writeln!(out, "{},{},{:.16e},{:.16e},{:.16e},{:.16e}", j + 1, l + 1, x, y, g.re, g.im)?;
                }
            }
        }
    }
    Ok(())
}
