//! A star whose edges are joined pairwise near the centre by short V-shaped
//! connectors carrying δ interactions, tuned so that the induced condition
//! at radius `d` tends to `Ψ'(0) = (D + S) Ψ(0)`.
//!
//! Layout: δ of strength `u` at the centre, δ of strength `vⱼ` on edge `j`
//! at distance `d`, and for every `Sⱼₖ ≠ 0` a connector between the points
//! at distance `d` on edges `j` and `k`, made of two arms of length `Lⱼₖ`
//! meeting at a tip with a δ of strength `wⱼₖ`. Arm coordinates start at
//! the tip.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chain::{bc_distance, interval_transfer, BoundaryCondition, ChainSpec, DeltaSite, Transfer};
use crate::convergence::{rate_fit, RateFit, SweepRecord};
use crate::coupling::DiagPlusOffdiag;
use crate::error::{Error, Result};
use crate::linalg::{identity, CMatrix};

/// A connector between edges `j < k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Connector {
    pub j: usize,
    pub k: usize,
    /// Index of the pair `{j, k}` among all pairs, from 1.
    pub label: usize,
    /// Length of each arm, `d √(1 + (label·d)²)`.
    pub arm_length: f64,
    /// Tip strength `−1/(Sⱼₖ d²) − 2/d`.
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedGraph {
    pub n: usize,
    pub target: DiagPlusOffdiag,
    pub d: f64,
    /// `u = 1/d³ − n/d²`
    pub u: f64,
    /// `vⱼ = Dⱼ − (#Nⱼ + 1)/d − Σ_{k∈Nⱼ} Sⱼₖ`
    pub v: Vec<f64>,
    pub connectors: Vec<Connector>,
}

/// Label of the unordered pair `{j, k}` (`j ≠ k`, zero-based) in
/// lexicographic order, from 1 to `n(n−1)/2`.
pub fn pair_label(n: usize, j: usize, k: usize) -> usize {
    let (a, b) = if j < k { (j, k) } else { (k, j) };
    // pairs (a', ·) with a' < a come first
    a * (2 * n - a - 1) / 2 + (b - a)
}

/// Builds the connectors and strengths for `Ψ'(0) = (D + S)Ψ(0)` at scale `d`.
pub fn build_augmented(target: &DiagPlusOffdiag, d: f64) -> Result<AugmentedGraph> {
    target.check()?;
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::InvalidParams(format!("scale d must be positive, got {d}")));
    }
    let n = target.n();
    if n < 2 {
        return Err(Error::InvalidParams("augmented star needs n >= 2".into()));
    }
    let s = &target.s;
    let mut connectors = Vec::new();
    for j in 0..n {
        for k in j + 1..n {
            if s[j][k] != 0.0 {
                let label = pair_label(n, j, k);
                let bd = label as f64 * d;
                connectors.push(Connector {
                    j,
                    k,
                    label,
                    arm_length: d * (1.0 + bd * bd).sqrt(),
                    w: -1.0 / (s[j][k] * d * d) - 2.0 / d,
                });
            }
        }
    }
    let v = (0..n)
        .map(|j| {
            let neighbours = (0..n).filter(|&k| k != j && s[j][k] != 0.0);
            let (count, sum) = neighbours.fold((0usize, 0.0), |(c, acc), k| (c + 1, acc + s[j][k]));
            target.d[j] - (count as f64 + 1.0) / d - sum
        })
        .collect();
    Ok(AugmentedGraph {
        n,
        target: target.clone(),
        d,
        u: 1.0 / (d * d * d) - n as f64 / (d * d),
        v,
        connectors,
    })
}

impl AugmentedGraph {
    /// Indices `k` with `Sⱼₖ ≠ 0`.
    pub fn neighbours(&self, j: usize) -> Vec<usize> {
        (0..self.n).filter(|&k| k != j && self.target.s[j][k] != 0.0).collect()
    }

    /// The same star without connectors, as a δ chain.
    pub fn as_chain(&self) -> ChainSpec {
        ChainSpec {
            n: self.n,
            u: self.u,
            edges: self.v.iter().map(|&v| vec![DeltaSite { pos: self.d, strength: v }]).collect(),
            d: Some(self.d),
        }
    }

    /// `(A, B) = (−(D + S), I)`.
    pub fn target_bc(&self) -> BoundaryCondition {
        let m = self.target.matrix();
        BoundaryCondition {
            a: CMatrix::from_fn(self.n, self.n, |j, k| Complex64::from(-m[(j, k)])),
            b: identity(self.n),
        }
    }

    /// Left side of the diagonal limit requirement; tends to `Dⱼ`.
    pub fn diagonal_limit_expr(&self, j: usize) -> f64 {
        let d = self.d;
        let mut inner = 1.0;
        for c in self.connectors.iter().filter(|c| c.j == j || c.k == j) {
            let root = c.arm_length / d;
            inner += 1.0 / root - 1.0 / (2.0 + c.arm_length * c.w);
        }
        self.v[j] + inner / d
    }

    /// Left side of the off-diagonal limit requirement; tends to `Sⱼₖ`.
    pub fn offdiagonal_limit_expr(&self, c: &Connector) -> f64 {
        let d = self.d;
        let root = c.arm_length / d;
        (1.0 / d) * (1.0 / root) * (-1.0 / (2.0 + c.arm_length * c.w))
    }

    /// `1/(d(n + du))`; of order `d`.
    pub fn vertex_limit_expr(&self) -> f64 {
        1.0 / (self.d * (self.n as f64 + self.d * self.u))
    }
}

/// Every quantity of a solution of the free equation on the compact part,
/// given the values `Ψ(d)` on the halflines.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSolution {
    /// Common value at the centre.
    pub centre: Complex64,
    /// `ψⱼ'(0₊)`
    pub centre_derivs: Vec<Complex64>,
    /// `ψⱼ(d)`
    pub values: Vec<Complex64>,
    /// `ψⱼ'(d₋)`
    pub inner_derivs: Vec<Complex64>,
    /// `ψⱼ'(d₊)`
    pub outer_derivs: Vec<Complex64>,
    /// Per connector: tip value, arm derivatives at the tip towards `j` and `k`.
    pub tips: Vec<(Complex64, Complex64, Complex64)>,
}

fn checked_div(num: Complex64, den: Complex64, scale: f64) -> Result<Complex64> {
    if den.norm() <= 1e-13 * scale {
        return Err(Error::Resonance { pivot: den.norm() });
    }
    Ok(num / den)
}

/// Interior elimination, shared by the condition and the solution builder.
struct Elimination {
    spoke: Transfer,
    arms: Vec<Transfer>,
    /// `ψ(0) = Σ Xⱼ · centre_weight`
    centre_weight: Complex64,
    /// per connector, `φ(0) = (Xⱼ + Xₖ) · tip_weight`
    tip_weights: Vec<Complex64>,
}

impl Elimination {
    fn new(g: &AugmentedGraph, kappa: Complex64) -> Result<Self> {
        let nf = g.n as f64;
        let spoke = interval_transfer(g.d, kappa);
        let centre_den = spoke[(0, 1)] * g.u + spoke[(0, 0)] * nf;
        let centre_weight = checked_div(
            Complex64::new(1.0, 0.0),
            centre_den,
            (spoke[(0, 1)] * g.u).norm() + nf * spoke[(0, 0)].norm(),
        )?;
        checked_div(Complex64::new(1.0, 0.0), spoke[(0, 1)], spoke[(0, 0)].norm())?;
        let mut arms = Vec::with_capacity(g.connectors.len());
        let mut tip_weights = Vec::with_capacity(g.connectors.len());
        for c in &g.connectors {
            let arm = interval_transfer(c.arm_length, kappa);
            checked_div(Complex64::new(1.0, 0.0), arm[(0, 1)], arm[(0, 0)].norm())?;
            let den = arm[(0, 1)] * c.w + arm[(0, 0)] * 2.0;
            let scale = (arm[(0, 1)] * c.w).norm() + 2.0 * arm[(0, 0)].norm();
            tip_weights.push(checked_div(Complex64::new(1.0, 0.0), den, scale)?);
            arms.push(arm);
        }
        Ok(Elimination {
            spoke,
            arms,
            centre_weight,
            tip_weights,
        })
    }
}

/// The relation `Ψ'(d₊) = M Ψ(d)` induced by the compact part, returned as
/// `(A, B) = (−M, I)` with rows normalized by their largest entry.
///
/// Each spoke and arm is a free interval with transfer matrix `T`; writing
/// the far-end derivative through the values at both ends,
/// `ψ'(ℓ) = (T₂₂/T₁₂) ψ(ℓ) − ψ(0)/T₁₂`, eliminates every interior unknown
/// in closed form.
pub fn effective_bc_augmented(g: &AugmentedGraph, kappa: Complex64) -> Result<BoundaryCondition> {
    let n = g.n;
    let e = Elimination::new(g, kappa)?;
    let t = &e.spoke;
    let mut m = CMatrix::zeros(n, n);
    for j in 0..n {
        m[(j, j)] += g.v[j] + t[(1, 1)] / t[(0, 1)];
        for k in 0..n {
            m[(j, k)] -= e.centre_weight / t[(0, 1)];
        }
    }
    for (c, (arm, tw)) in g.connectors.iter().zip(e.arms.iter().zip(&e.tip_weights)) {
        let ratio = arm[(1, 1)] / arm[(0, 1)];
        let cross = tw / arm[(0, 1)];
        for (a, b) in [(c.j, c.k), (c.k, c.j)] {
            m[(a, a)] += ratio - cross;
            m[(a, b)] -= cross;
        }
    }
    Ok(BoundaryCondition {
        a: -m,
        b: identity(n),
    }
    .normalized())
}

/// Reconstructs the full solution on the compact part from `Ψ(d)`.
pub fn solve_augmented(g: &AugmentedGraph, kappa: Complex64, values: &[Complex64]) -> Result<AugmentedSolution> {
    if values.len() != g.n {
        return Err(Error::DimensionMismatch(format!("{} values for {} edges", values.len(), g.n)));
    }
    let e = Elimination::new(g, kappa)?;
    let t = &e.spoke;
    let centre = values.iter().sum::<Complex64>() * e.centre_weight;
    let centre_derivs: Vec<_> = values.iter().map(|x| (x - t[(0, 0)] * centre) / t[(0, 1)]).collect();
    let inner_derivs: Vec<_> = centre_derivs.iter().map(|p| t[(1, 0)] * centre + t[(1, 1)] * p).collect();
    let mut outer_derivs: Vec<_> = (0..g.n).map(|j| inner_derivs[j] + g.v[j] * values[j]).collect();
    let mut tips = Vec::with_capacity(g.connectors.len());
    for (c, (arm, tw)) in g.connectors.iter().zip(e.arms.iter().zip(&e.tip_weights)) {
        let phi0 = (values[c.j] + values[c.k]) * tw;
        let qj = (values[c.j] - arm[(0, 0)] * phi0) / arm[(0, 1)];
        let qk = (values[c.k] - arm[(0, 0)] * phi0) / arm[(0, 1)];
        outer_derivs[c.j] += arm[(1, 0)] * phi0 + arm[(1, 1)] * qj;
        outer_derivs[c.k] += arm[(1, 0)] * phi0 + arm[(1, 1)] * qk;
        tips.push((phi0, qj, qk));
    }
    Ok(AugmentedSolution {
        centre,
        centre_derivs,
        values: values.to_vec(),
        inner_derivs,
        outer_derivs,
        tips,
    })
}

impl AugmentedSolution {
    /// Largest violation of the transport relations and the centre, tip and
    /// attachment conditions, relative to the size of the data involved.
    pub fn residual(&self, g: &AugmentedGraph, kappa: Complex64) -> f64 {
        let spoke = interval_transfer(g.d, kappa);
        let mut worst = 0.0_f64;
        let mut note = |lhs: Complex64, rhs: Complex64| {
            let scale = 1.0 + lhs.norm().max(rhs.norm());
            worst = worst.max((lhs - rhs).norm() / scale);
        };
        note(self.centre_derivs.iter().sum(), self.centre * g.u);
        for j in 0..g.n {
            note(spoke[(0, 0)] * self.centre + spoke[(0, 1)] * self.centre_derivs[j], self.values[j]);
            note(spoke[(1, 0)] * self.centre + spoke[(1, 1)] * self.centre_derivs[j], self.inner_derivs[j]);
        }
        let mut arm_sums = vec![Complex64::new(0.0, 0.0); g.n];
        for (c, &(phi0, qj, qk)) in g.connectors.iter().zip(&self.tips) {
            let arm = interval_transfer(c.arm_length, kappa);
            note(qj + qk, phi0 * c.w);
            note(arm[(0, 0)] * phi0 + arm[(0, 1)] * qj, self.values[c.j]);
            note(arm[(0, 0)] * phi0 + arm[(0, 1)] * qk, self.values[c.k]);
            arm_sums[c.j] += arm[(1, 0)] * phi0 + arm[(1, 1)] * qj;
            arm_sums[c.k] += arm[(1, 0)] * phi0 + arm[(1, 1)] * qk;
        }
        for j in 0..g.n {
            note(self.outer_derivs[j] - self.inner_derivs[j] - arm_sums[j], self.values[j] * g.v[j]);
        }
        worst
    }
}

/// JSON input of the augmented sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedInput {
    #[serde(rename = "D")]
    pub diag: Vec<f64>,
    #[serde(rename = "S")]
    pub s: Vec<Vec<f64>>,
    #[serde(default)]
    pub ds: Vec<f64>,
}

impl AugmentedInput {
    pub fn target(&self) -> DiagPlusOffdiag {
        DiagPlusOffdiag {
            d: self.diag.clone(),
            s: self.s.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedReport {
    pub records: Vec<SweepRecord>,
    pub fit: Option<RateFit>,
}

/// Zero-energy distance to `(−(D + S), I)` along `ds`, with a rate fit when
/// at least four distances are positive.
pub fn augmented_convergence_experiment(target: &DiagPlusOffdiag, ds: &[f64]) -> Result<AugmentedReport> {
    let records = ds
        .iter()
        .map(|&d| {
            let g = build_augmented(target, d)?;
            let bc = effective_bc_augmented(&g, Complex64::new(0.0, 0.0))?;
            Ok(SweepRecord {
                d,
                value: bc_distance(&bc, &g.target_bc())?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let fit = if records.len() >= 4 && records.iter().all(|r| r.value > 0.0) {
        Some(rate_fit(&records)?)
    } else {
        None
    };
    Ok(AugmentedReport { records, fit })
}
