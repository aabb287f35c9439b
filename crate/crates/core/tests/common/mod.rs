#![allow(dead_code)]

use qgraph_core::chain::ChainSpec;
use qgraph_core::coupling::{Generic2n, OmegaAlphaBeta};
use qgraph_core::linalg::CMatrix;
use qgraph_core::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_complex_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

/// Haar-like unitary from the QR factor of a random complex matrix, with
/// the phases of R's diagonal folded back in.
pub fn random_unitary(rng: &mut impl Rng, n: usize) -> CMatrix {
    let m = random_complex_matrix(rng, n, n);
    let qr = m.qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..n {
        let ph = r[(k, k)] / r[(k, k)].norm();
        for i in 0..n {
            q[(i, k)] *= ph;
        }
    }
    q
}

/// Magnitude in `[lo, hi]` with a random sign.
pub fn signed(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    let x = rng.random_range(lo..hi);
    if rng.random_bool(0.5) {
        x
    } else {
        -x
    }
}

pub fn random_generic2n(rng: &mut impl Rng, n: usize) -> Generic2n {
    Generic2n {
        theta: rng.random_range(-3.0..3.0),
        c: (1..n).map(|_| rng.random_range(-2.0..2.0)).collect(),
        t: (1..n).map(|_| signed(rng, 0.2, 2.0)).collect(),
        rho: rng.random_range(-2.0..2.0),
    }
}

/// Parameters with every `αⱼ` bounded away from zero.
pub fn random_oab(rng: &mut impl Rng, n: usize) -> OmegaAlphaBeta {
    let beta: Vec<f64> = (0..n)
        .map(|j| if j == 0 { signed(rng, 0.3, 2.0) } else { rng.random_range(-2.0..2.0) })
        .collect();
    let alpha_rest: Vec<f64> = (1..n).map(|_| signed(rng, 0.4, 2.0)).collect();
    OmegaAlphaBeta::from_free(rng.random_range(-2.0..2.0), &alpha_rest, beta).unwrap()
}

pub fn geometric(d_max: f64, d_min: f64, count: usize) -> Vec<f64> {
    qgraph_core::convergence::geometric_ds(d_max, d_min, count).unwrap()
}

/// Finite-difference star: flux-form three-point stencil on each edge,
/// δ's at grid nodes, Dirichlet at `R`, half-cell balance at the centre.
/// Returns `ψ_j(x_i)` for a unit source at node `src` of edge `l`.
pub fn fd_green_column(chain: &ChainSpec, kappa: Complex64, h: f64, radius: f64, l: usize, src: usize) -> Vec<Vec<Complex64>> {
    let m = (radius / h).round() as usize;
    let k2h2 = kappa * kappa * h * h;
    let solve = |diag: &[Complex64], rhs: &[Complex64]| -> Vec<Complex64> {
        // −1 off the diagonal; Thomas sweep
        let len = diag.len();
        let mut cp = vec![Complex64::new(0.0, 0.0); len];
        let mut dp = vec![Complex64::new(0.0, 0.0); len];
        cp[0] = -1.0 / diag[0];
        dp[0] = rhs[0] / diag[0];
        for i in 1..len {
            let denom = diag[i] + cp[i - 1];
            cp[i] = -1.0 / denom;
            dp[i] = (rhs[i] + dp[i - 1]) / denom;
        }
        let mut x = vec![Complex64::new(0.0, 0.0); len];
        x[len - 1] = dp[len - 1];
        for i in (0..len - 1).rev() {
            x[i] = dp[i] - cp[i] * x[i + 1];
        }
        x
    };
    let mut particular = Vec::new();
    let mut homogeneous = Vec::new();
    for (j, sites) in chain.edges.iter().enumerate() {
        // unknowns at nodes 1..m−1
        let mut diag = vec![2.0 + k2h2; m - 1];
        for s in sites {
            let node = (s.pos / h).round() as usize;
            assert!((node as f64 * h - s.pos).abs() < 1e-12, "δ off grid");
            diag[node - 1] += h * s.strength;
        }
        let mut rhs = vec![Complex64::new(0.0, 0.0); m - 1];
        if j == l {
            rhs[src - 1] = Complex64::new(h, 0.0);
        }
        particular.push(solve(&diag, &rhs));
        let mut e1 = vec![Complex64::new(0.0, 0.0); m - 1];
        e1[0] = Complex64::new(1.0, 0.0);
        homogeneous.push(solve(&diag, &e1));
    }
    let nf = chain.n as f64;
    let lhs: Complex64 = nf / h - homogeneous.iter().map(|b| b[0]).sum::<Complex64>() / h + chain.u + nf * kappa * kappa * h / 2.0;
    let centre = particular.iter().map(|a| a[0]).sum::<Complex64>() / h / lhs;
    particular
        .iter()
        .zip(&homogeneous)
        .map(|(a, b)| {
            std::iter::once(centre)
                .chain(a.iter().zip(b).map(|(a, b)| a + b * centre))
                .collect()
        })
        .collect()
}
