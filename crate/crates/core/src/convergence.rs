//! Hilbert–Schmidt distances between kernels, power-law rate fits and the
//! resolvent convergence sweep for the two-δ schedule.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use serde::{Deserialize, Serialize};

use crate::coupling::{oab_to_coupling, OmegaAlphaBeta};
use crate::error::{Error, Result};
use crate::kernels::{ApproxStarKernel, KernelEvaluator, LimitKernel, SpectralPoint};

/// One point of a `d`-sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub d: f64,
    pub value: f64,
}

pub const MIN_NODES: usize = 64;
pub const MIN_TRUNCATION: f64 = 20.0;

/// Tensor Gauss–Legendre quadrature on `[0, R]²`, one rule per panel axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub radius: f64,
    pub nodes: usize,
}

impl QuadratureSpec {
    /// `R = trunc_factor / Re κ`.
    pub fn for_kappa(kappa: SpectralPoint, trunc_factor: f64, nodes: usize) -> Result<Self> {
        let spec = QuadratureSpec {
            radius: trunc_factor / kappa.kappa().re,
            nodes,
        };
        spec.check(kappa)?;
        Ok(spec)
    }

    pub fn check(&self, kappa: SpectralPoint) -> Result<()> {
        if self.nodes < MIN_NODES {
            return Err(Error::InvalidParams(format!(
                "quadrature needs at least {MIN_NODES} nodes per panel, got {}",
                self.nodes
            )));
        }
        // small slack so that R = 20/Re κ itself passes
        if !(self.radius * kappa.kappa().re >= MIN_TRUNCATION * (1.0 - 1e-12)) {
            return Err(Error::InvalidParams(format!(
                "truncation radius {} is below {MIN_TRUNCATION}/Re κ",
                self.radius
            )));
        }
        Ok(())
    }
}

/// Nodes and weights of a panelled rule on `[lo, hi]` split at `cuts`.
fn panel_rule(rule: &GaussLegendre, lo: f64, hi: f64, cuts: &[f64]) -> Vec<(f64, f64)> {
    let mut edges: Vec<f64> = std::iter::once(lo)
        .chain(cuts.iter().copied().filter(|&c| c > lo && c < hi))
        .chain(std::iter::once(hi))
        .collect();
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    let mut out = Vec::with_capacity(rule.degree() * (edges.len() - 1));
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for &(t, wt) in rule.as_node_weight_pairs() {
            out.push((mid + half * t, half * wt));
        }
    }
    out
}

fn gauss_rule(nodes: usize) -> Result<GaussLegendre> {
    let degree = NonZeroUsize::new(nodes).ok_or_else(|| Error::InvalidParams("zero quadrature nodes".into()))?;
    Ok(GaussLegendre::new(degree))
}

fn merged_breakpoints(k1: &dyn KernelEvaluator, k2: &dyn KernelEvaluator, j: usize) -> Vec<f64> {
    let mut v = k1.breakpoints(j);
    v.extend(k2.breakpoints(j));
    v
}

/// `√(Σⱼₗ ∬ |k1 − k2|²)` over `[lower, R]²` per block.
fn hs_norm_on(
    k1: &dyn KernelEvaluator,
    k2: &dyn KernelEvaluator,
    q: &QuadratureSpec,
    lower: f64,
) -> Result<f64> {
    if k1.n() != k2.n() {
        return Err(Error::DimensionMismatch(format!("kernels act on {} and {} edges", k1.n(), k2.n())));
    }
    let kappa = k1.kappa();
    q.check(kappa)?;
    if k1.kappa() != k2.kappa() {
        return Err(Error::InvalidParams("kernels are evaluated at different κ".into()));
    }
    let rule = gauss_rule(q.nodes)?;
    let n = k1.n();
    let axes: Vec<Vec<(f64, f64)>> = (0..n)
        .map(|j| panel_rule(&rule, lower, q.radius, &merged_breakpoints(k1, k2, j)))
        .collect();
    let mut total = 0.0;
    for j in 0..n {
        for l in 0..n {
            let mut block = 0.0;
            for &(x, wx) in &axes[j] {
                let mut row = 0.0;
                for &(y, wy) in &axes[l] {
                    row += wy * (k1.eval(j, l, x, y) - k2.eval(j, l, x, y)).norm_sqr();
                }
                block += wx * row;
            }
            total += block;
        }
    }
    Ok(total.sqrt())
}

/// Hilbert–Schmidt norm of the difference of two kernels, truncated to
/// `[0, R]²` on every block. Each axis is split into panels at the δ sites
/// of either kernel; panels are summed in a fixed order.
pub fn hs_norm_diff(k1: &dyn KernelEvaluator, k2: &dyn KernelEvaluator, q: &QuadratureSpec) -> Result<f64> {
    hs_norm_on(k1, k2, q, 0.0)
}

/// The same norm restricted to `[r0, R]²`, i.e. to points outside all
/// interactions when `r0` is the outermost δ position.
pub fn hs_norm_diff_outer(
    k1: &dyn KernelEvaluator,
    k2: &dyn KernelEvaluator,
    q: &QuadratureSpec,
    r0: f64,
) -> Result<f64> {
    hs_norm_on(k1, k2, q, r0)
}

/// Least-squares fit `log value = log C + p log d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    #[serde(rename = "C")]
    pub c: f64,
    pub p: f64,
    /// RMS of the log residuals.
    pub residual: f64,
}

pub fn rate_fit(records: &[SweepRecord]) -> Result<RateFit> {
    if records.len() < 4 {
        return Err(Error::InvalidParams(format!(
            "rate fit needs at least 4 records, got {}",
            records.len()
        )));
    }
    if let Some(r) = records.iter().find(|r| !(r.value > 0.0)) {
        return Err(Error::NonPositive { value: r.value });
    }
    if let Some(r) = records.iter().find(|r| !(r.d > 0.0)) {
        return Err(Error::NonPositive { value: r.d });
    }
    let m = records.len() as f64;
    let xs: Vec<f64> = records.iter().map(|r| r.d.ln()).collect();
    let ys: Vec<f64> = records.iter().map(|r| r.value.ln()).collect();
    let xbar = xs.iter().sum::<f64>() / m;
    let ybar = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - xbar).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParams("rate fit needs at least two distinct d".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let p = sxy / sxx;
    let log_c = ybar - p * xbar;
    let ss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - log_c - p * x).powi(2)).sum();
    Ok(RateFit {
        c: log_c.exp(),
        p,
        residual: (ss / m).sqrt(),
    })
}

/// `count` points from `d_max` down to `d_min`, geometrically spaced,
/// endpoints included.
pub fn geometric_ds(d_max: f64, d_min: f64, count: usize) -> Result<Vec<f64>> {
    if !(d_min > 0.0) || !(d_min < d_max) || !d_max.is_finite() || count < 4 {
        return Err(Error::InvalidParams(format!(
            "geometric sweep needs 0 < d_min < d_max and count >= 4, got {d_min}, {d_max}, {count}"
        )));
    }
    let r = (d_min / d_max).powf(1.0 / (count - 1) as f64);
    Ok((0..count)
        .map(|i| if i + 1 == count { d_min } else { d_max * r.powi(i as i32) })
        .collect())
}

/// A `d` at which the approximating kernel could not be built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedPoint {
    pub d: f64,
    pub reason: String,
}

/// Result of [`resolvent_convergence_experiment`]. `outer_records` holds
/// the norm over `[d + d³, R]²` alongside the full one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub records: Vec<SweepRecord>,
    pub outer_records: Vec<SweepRecord>,
    pub excluded: Vec<ExcludedPoint>,
    pub fit: Option<RateFit>,
    pub outer_fit: Option<RateFit>,
}

impl ConvergenceReport {
    pub fn excluded_ds(&self) -> Vec<f64> {
        self.excluded.iter().map(|e| e.d).collect()
    }

    /// Whether the values strictly decrease as `d` decreases.
    pub fn is_monotone(&self) -> bool {
        let mut recs = self.records.clone();
        recs.sort_by(|a, b| b.d.total_cmp(&a.d));
        recs.windows(2).all(|w| w[1].value < w[0].value)
    }
}

/// For each `d`, the HS distance between the resolvent kernel of the two-δ
/// schedule and that of the `(ω, α⃗, β⃗)` coupling, then a rate fit.
/// A pole at some `d` excludes that point instead of failing the sweep.
pub fn resolvent_convergence_experiment(
    params: &OmegaAlphaBeta,
    kappa: SpectralPoint,
    ds: &[f64],
    q: &QuadratureSpec,
) -> Result<ConvergenceReport> {
    q.check(kappa)?;
    let limit = LimitKernel::new(&oab_to_coupling(params)?, kappa)?;
    let mut records = Vec::new();
    let mut outer_records = Vec::new();
    let mut excluded = Vec::new();
    for &d in ds {
        let approx = match ApproxStarKernel::two_delta(params, d, kappa) {
            Ok(k) => k,
            Err(e @ Error::Pole(_)) => {
                excluded.push(ExcludedPoint { d, reason: e.to_string() });
                continue;
            }
            Err(e) => return Err(e),
        };
        records.push(SweepRecord {
            d,
            value: hs_norm_diff(&approx, &limit, q)?,
        });
        outer_records.push(SweepRecord {
            d,
            value: hs_norm_diff_outer(&approx, &limit, q, d + d * d * d)?,
        });
    }
    let fit = if records.len() >= 4 { Some(rate_fit(&records)?) } else { None };
    let outer_fit = if outer_records.len() >= 4 {
        Some(rate_fit(&outer_records)?)
    } else {
        None
    };
    Ok(ConvergenceReport {
        records,
        outer_records,
        excluded,
        fit,
        outer_fit,
    })
}

/// Largest `|k1 − k2| / (d e^{−Re κ (x + y)})` over the given points, all
/// edge pairs included.
pub fn pointwise_bound_ratio(
    k1: &dyn KernelEvaluator,
    k2: &dyn KernelEvaluator,
    d: f64,
    points: &[(f64, f64)],
) -> f64 {
    let re = k1.kappa().kappa().re;
    let n = k1.n();
    let mut worst = 0.0_f64;
    for j in 0..n {
        for l in 0..n {
            for &(x, y) in points {
                let diff = (k1.eval(j, l, x, y) - k2.eval(j, l, x, y)).norm();
                worst = worst.max(diff / (d * (-re * (x + y)).exp()));
            }
        }
    }
    worst
}
