mod common;

use common::*;
use proptest::prelude::*;
use qgraph_core::chain::{two_delta_strengths, ChainSpec, DeltaSite};
use qgraph_core::convergence::pointwise_bound_ratio;
use qgraph_core::coupling::*;
use qgraph_core::kernels::*;
use qgraph_core::linalg::{identity, CMatrix};
use qgraph_core::Complex64;

const H: f64 = 1e-4;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn kappa(re: f64, im: f64) -> SpectralPoint {
    SpectralPoint::new(c(re, im)).unwrap()
}

/// Derivatives from one side, second order: `+` looks right of `x`.
fn right_derivative(f: impl Fn(f64) -> Complex64, x: f64) -> Complex64 {
    (-3.0 * f(x) + 4.0 * f(x + H) - f(x + 2.0 * H)) / (2.0 * H)
}

fn left_derivative(f: impl Fn(f64) -> Complex64, x: f64) -> Complex64 {
    (3.0 * f(x) - 4.0 * f(x - H) + f(x - 2.0 * H)) / (2.0 * H)
}

fn oab_sample() -> OmegaAlphaBeta {
    OmegaAlphaBeta::from_free(0.7, &[0.8, -1.3], vec![1.0, 0.5, -0.4]).unwrap()
}

fn approx_sample(k: SpectralPoint) -> ApproxStarKernel {
    ApproxStarKernel::two_delta(&oab_sample(), 0.3, k).unwrap()
}

fn limit_sample(k: SpectralPoint) -> LimitKernel {
    LimitKernel::new(&oab_to_coupling(&oab_sample()).unwrap(), k).unwrap()
}

#[test]
fn dirichlet_kernel_values() {
    let k = c(1.0, 0.0);
    assert_eq!(dirichlet_kernel(k, 0.0, 2.0), c(0.0, 0.0));
    assert_eq!(dirichlet_kernel(k, 1.0, 2.0), dirichlet_kernel(k, 2.0, 1.0));
    // Taylor series of sinh(1) e^{-1}
    let mut term = 1.0;
    let mut sinh1 = 0.0;
    for m in 0..20 {
        sinh1 += term;
        term /= ((2 * m + 2) * (2 * m + 3)) as f64;
    }
    let want = sinh1 * (-1.0f64).exp();
    assert!((dirichlet_kernel(k, 1.0, 1.0).re - want).abs() < 1e-15);
    assert!((want - 0.432332).abs() < 1e-6);
    // large arguments stay finite
    let far = dirichlet_kernel(c(3.0, 2.0), 400.0, 401.0);
    assert!(far.re.is_finite() && far.norm() < 1.0);
}

#[test]
fn lambda_simple_couplings() {
    let k = kappa(1.7, 0.4);
    let n = 3;
    let dir = krein_lambda(&identity(n), &CMatrix::zeros(n, n), k).unwrap();
    assert!(dir.norm() == 0.0);
    let neu = krein_lambda(&CMatrix::zeros(n, n), &identity(n), k).unwrap();
    assert!((neu - identity(n) / k.kappa()).norm() < 1e-14);
}

#[test]
fn oab_lambda_matches_krein_solve() {
    let mut rng = rng(31);
    for i in 0..20 {
        let p = random_oab(&mut rng, 2 + i % 4);
        let k = kappa(0.5 + 0.1 * i as f64, 0.3);
        let coupling = oab_to_coupling(&p).unwrap();
        let (Ok(closed), Ok(solved)) = (oab_lambda(&p, k), krein_lambda(coupling.a(), coupling.b(), k)) else {
            continue;
        };
        assert!((&closed - &solved).norm() <= 1e-10 * (1.0 + solved.norm()), "{p:?}");
    }
}

#[test]
fn kernels_are_symmetric() {
    let mut rng = rng(32);
    use rand::Rng;
    for k in [kappa(1.0, 0.0), kappa(0.8, 0.6)] {
        let kernels: Vec<Box<dyn KernelEvaluator>> = vec![Box::new(limit_sample(k)), Box::new(approx_sample(k))];
        for kernel in &kernels {
            let n = kernel.n();
            for _ in 0..200 {
                let j = rng.random_range(0..n);
                let l = rng.random_range(0..n);
                let x = rng.random_range(0.0..4.0);
                let y = rng.random_range(0.0..4.0);
                let a = kernel.eval(j, l, x, y);
                let b = kernel.eval(l, j, y, x);
                assert!((a - b).norm() <= 1e-10 * a.norm().max(1e-300), "{a} vs {b}");
            }
        }
    }
}

#[test]
fn kernels_solve_free_equation_off_diagonal() {
    let k = kappa(1.0, 0.3);
    let kappa2 = k.kappa() * k.kappa();
    let kernels: Vec<Box<dyn KernelEvaluator>> = vec![Box::new(limit_sample(k)), Box::new(approx_sample(k))];
    // avoids the diagonal and δ sites at 0.027, 0.327
    let points = [(0.15, 1.1), (0.6, 0.2), (1.7, 0.9), (2.5, 3.0), (0.9, 0.45)];
    for kernel in &kernels {
        for j in 0..kernel.n() {
            for l in 0..kernel.n() {
                for &(x, y) in &points {
                    let f = |x: f64| kernel.eval(j, l, x, y);
                    let second = (f(x + H) - 2.0 * f(x) + f(x - H)) / (H * H);
                    let residual = (-second + kappa2 * f(x)).norm();
                    assert!(residual <= 1e-5 * (kappa2 * f(x)).norm(), "({j},{l},{x},{y}): {residual}");
                }
            }
        }
    }
}

#[test]
fn diagonal_derivative_jump() {
    let k = kappa(1.2, -0.5);
    let kernels: Vec<Box<dyn KernelEvaluator>> = vec![Box::new(limit_sample(k)), Box::new(approx_sample(k))];
    for kernel in &kernels {
        for j in 0..kernel.n() {
            for y in [0.2, 0.8, 2.0] {
                let f = |x: f64| kernel.eval(j, j, x, y);
                let jump = right_derivative(f, y) - left_derivative(f, y);
                assert!((jump + 1.0).norm() <= 1e-4, "edge {j}, y = {y}: {jump}");
            }
        }
    }
}

#[test]
fn delta_site_jumps() {
    let k = kappa(1.0, 0.2);
    let p = oab_sample();
    let d = 0.3;
    let s = two_delta_strengths(&p, d);
    let star = approx_sample(k);
    let sites = [d * d * d, d + d * d * d];
    for j in 0..p.n() {
        let strengths = [s.v[j], s.w[j]];
        for (&pos, &v) in sites.iter().zip(&strengths) {
            for l in 0..p.n() {
                let y = 1.4;
                let f = |x: f64| star.eval(j, l, x, y);
                let jump = right_derivative(f, pos) - left_derivative(f, pos);
                let want = v * f(pos);
                assert!((jump - want).norm() <= 1e-4 * (1.0 + want.norm()), "edge {j} at {pos}: {jump} vs {want}");
            }
        }
        // the single-edge kernels obey the same rule
        let edge = two_delta_kernel(s.v[j], s.w[j], d, k).unwrap();
        for (&pos, &v) in sites.iter().zip(&strengths) {
            let f = |x: f64| edge.eval(x, 0.9);
            let jump = right_derivative(f, pos) - left_derivative(f, pos);
            assert!((jump - v * f(pos)).norm() <= 1e-4 * (1.0 + (v * f(pos)).norm()));
        }
    }
}

#[test]
fn edge_kernel_reductions() {
    let k = kappa(0.9, 0.1);
    let free = two_delta_kernel(0.0, 0.0, 0.4, k).unwrap();
    let one = one_delta_kernel(-2.0, 0.4 * 0.4 * 0.4, k).unwrap();
    let two = two_delta_kernel(-2.0, 0.0, 0.4, k).unwrap();
    for (x, y) in [(0.1, 0.3), (0.5, 1.5), (2.0, 0.05)] {
        assert!((free.eval(x, y) - dirichlet_kernel(k.kappa(), x, y)).norm() < 1e-15);
        assert!((one.eval(x, y) - two.eval(x, y)).norm() < 1e-15);
        assert!((one.eval(x, y) - one.eval(y, x)).norm() < 1e-15);
    }
}

#[test]
fn limit_kernel_meets_vertex_condition() {
    let k = kappa(1.1, 0.4);
    let mut rng = rng(33);
    let couplings = vec![
        oab_to_coupling(&oab_sample()).unwrap(),
        build_family(&CouplingParams::Delta { alpha: 1.5 }, 3).unwrap(),
        generic2n_to_coupling(&random_generic2n(&mut rng, 4)).unwrap(),
    ];
    for coupling in &couplings {
        let kernel = LimitKernel::new(coupling, k).unwrap();
        let n = coupling.n();
        for l in 0..n {
            let y = 0.7;
            let psi = CMatrix::from_fn(n, 1, |j, _| kernel.eval(j, l, 0.0, y));
            let dpsi = CMatrix::from_fn(n, 1, |j, _| right_derivative(|x| kernel.eval(j, l, x, y), 0.0));
            let residual = (coupling.a() * &psi + coupling.b() * &dpsi).norm();
            let scale = (coupling.a() * &psi).norm() + (coupling.b() * &dpsi).norm();
            assert!(residual <= 1e-6 * scale.max(1.0), "l = {l}: {residual}");
        }
    }
}

#[test]
fn approx_kernel_meets_central_delta() {
    let k = kappa(1.0, -0.3);
    let p = oab_sample();
    let star = approx_sample(k);
    let u = two_delta_strengths(&p, 0.3).u;
    for l in 0..p.n() {
        let y = 0.8;
        let values: Vec<Complex64> = (0..p.n()).map(|j| star.eval(j, l, 0.0, y)).collect();
        for v in &values[1..] {
            assert!((v - values[0]).norm() <= 1e-12 * values[0].norm());
        }
        let flux: Complex64 = (0..p.n()).map(|j| right_derivative(|x| star.eval(j, l, x, y), 0.0)).sum();
        let want = u * values[0];
        assert!((flux - want).norm() <= 1e-6 * want.norm().max(1.0), "{flux} vs {want}");
    }
}

#[test]
fn boundary_flux_normalised() {
    let k = kappa(1.0, 0.0);
    let s = two_delta_strengths(&oab_sample(), 0.1);
    for j in 0..3 {
        let edge = two_delta_kernel(s.v[j], s.w[j], 0.1, k).unwrap();
        assert!((edge.dy_at_origin(0.0) - 1.0).norm() <= 1e-12);
        // closed-form flux against a numerical derivative in y
        for x in [0.05, 0.5, 2.0] {
            let numeric = right_derivative(|y| edge.eval(x, y), 0.0);
            assert!((numeric - edge.dy_at_origin(x)).norm() <= 1e-5 * (1.0 + numeric.norm()));
        }
    }
}

#[test]
fn vertex_bracket_small_d_expansion() {
    let p = oab_sample();
    let k = kappa(1.0, 0.0);
    let kp = k.kappa();
    for j in 0..p.n() {
        let want = (p.beta[j] + kp) / (p.alpha[j] * (p.beta[j] + kp) - 1.0);
        let err = |d: f64| {
            let s = two_delta_strengths(&p, d);
            let edge = two_delta_kernel(s.v[j], s.w[j], d, k).unwrap();
            (edge.dxdy_at_origin() * d.powi(4) - want).norm()
        };
        let (e3, e4) = (err(1e-3), err(1e-4));
        assert!(e4 < 1e-2 * (1.0 + want.norm()), "edge {j}: {e4}");
        let ratio = e3 / e4;
        assert!((5.0..20.0).contains(&ratio), "edge {j}: error ratio {ratio}");
    }
}

#[test]
fn outer_region_bound_constant_stays_bounded() {
    let p = OmegaAlphaBeta::from_free(0.0, &[1.0], vec![1.0, 1.0]).unwrap();
    let k = kappa(1.0, 0.0);
    let limit = LimitKernel::new(&oab_to_coupling(&p).unwrap(), k).unwrap();
    let mut ratios = Vec::new();
    for d in [1e-1, 1e-2, 1e-3] {
        let approx = ApproxStarKernel::two_delta(&p, d, k).unwrap();
        let r0 = d + d * d * d;
        let points: Vec<(f64, f64)> = [0.0, 0.3, 1.0, 3.0, 8.0]
            .iter()
            .flat_map(|&a| [0.0, 0.5, 2.0, 6.0].map(move |b| (r0 + a, r0 + b)))
            .collect();
        ratios.push(pointwise_bound_ratio(&approx, &limit, d, &points));
    }
    let max = ratios.iter().copied().fold(0.0, f64::max);
    assert!(max < 50.0, "{ratios:?}");
    assert!(ratios[2] <= 2.0 * ratios[0] + 1.0, "{ratios:?}");
}

#[test]
fn finite_difference_star_agrees_with_closed_form() {
    let p = OmegaAlphaBeta::from_free(0.4, &[1.0], vec![1.0, 0.5]).unwrap();
    let d = 0.5;
    let s = two_delta_strengths(&p, d);
    let schedule_chain = ChainSpec {
        n: 2,
        u: s.u,
        edges: (0..2)
            .map(|j| {
                vec![
                    DeltaSite { pos: d * d * d, strength: s.v[j] },
                    DeltaSite { pos: d + d * d * d, strength: s.w[j] },
                ]
            })
            .collect(),
        d: Some(d),
    };
    let mixed_chain = ChainSpec {
        n: 3,
        u: 0.7,
        edges: vec![
            vec![DeltaSite { pos: 0.25, strength: 1.5 }, DeltaSite { pos: 0.5, strength: -0.8 }],
            vec![DeltaSite { pos: 0.125, strength: 2.0 }],
            vec![],
        ],
        d: None,
    };
    for (chain, kp) in [(&schedule_chain, c(1.0, 0.0)), (&mixed_chain, c(1.0, 0.5))] {
        let k = SpectralPoint::new(kp).unwrap();
        let star = ApproxStarKernel::from_chain(chain, k).unwrap();
        let radius = 20.0 / kp.re;
        let y = 0.75;
        let sample_x = [0.0, 0.0625, 0.125, 0.375, 0.625, 1.0, 2.5];
        let mut errors = Vec::new();
        for h in [1.0f64 / 256.0, 1.0 / 512.0, 1.0 / 1024.0] {
            let src = (y / h).round() as usize;
            let mut worst = 0.0_f64;
            for l in 0..chain.n {
                let column = fd_green_column(chain, kp, h, radius, l, src);
                for j in 0..chain.n {
                    for &x in &sample_x {
                        let i = (x / h).round() as usize;
                        let exact = star.eval(j, l, x, y);
                        worst = worst.max((column[j][i] - exact).norm());
                    }
                }
            }
            errors.push(worst);
        }
        let r1 = errors[0] / errors[1];
        let r2 = errors[1] / errors[2];
        println!("fd oracle errors {errors:?}, ratios {r1:.2}, {r2:.2}");
        assert!(errors[2] < 1e-4, "{errors:?}");
        assert!((3.0..5.0).contains(&r2), "not second order: {errors:?}");
    }
}

#[test]
fn kernel_csv_layout() {
    let k = kappa(1.0, 0.0);
    let kernel = limit_sample(k);
    let mut out = Vec::new();
    write_kernel_csv(&kernel, &[0.5, 1.0], &[0.25], &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "j,l,x,y,re,im");
    assert_eq!(lines.len(), 1 + 9 * 2);
    let fields: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(&fields[..2], &["1", "1"]);
    let re: f64 = fields[4].parse().unwrap();
    assert_eq!(re, kernel.eval(0, 0, 0.5, 0.25).re);
}

#[test]
fn poles_are_reported() {
    // 1 + v G(p, p) = 0 for v = −1/G(p, p)
    let k = kappa(1.0, 0.0);
    let p = 0.5;
    let v = -1.0 / dirichlet_kernel(k.kappa(), p, p).re;
    assert!(matches!(one_delta_kernel(v, p, k), Err(qgraph_core::Error::Pole(_))));
    assert!(SpectralPoint::new(c(0.0, 1.0)).is_err());
    assert!(SpectralPoint::new(c(-1.0, 0.0)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn star_kernel_symmetric_for_random_chains(
        u in -3.0f64..3.0,
        s in proptest::collection::vec((0.05f64..2.0, -3.0f64..3.0), 0..4),
        x in 0.0f64..3.0,
        y in 0.0f64..3.0,
        re in 0.3f64..2.0,
        im in -1.0f64..1.0,
    ) {
        let mut sites: Vec<DeltaSite> = s.iter().map(|&(pos, strength)| DeltaSite { pos, strength }).collect();
        sites.sort_by(|a, b| a.pos.total_cmp(&b.pos));
        sites.dedup_by(|a, b| (a.pos - b.pos).abs() < 1e-3);
        let chain = ChainSpec { n: 2, u, edges: vec![sites, vec![DeltaSite { pos: 0.4, strength: 1.0 }]], d: None };
        let k = SpectralPoint::new(c(re, im)).unwrap();
        if let Ok(star) = ApproxStarKernel::from_chain(&chain, k) {
            for (j, l) in [(0, 0), (0, 1), (1, 1)] {
                let a = star.eval(j, l, x, y);
                let b = star.eval(l, j, y, x);
                prop_assert!((a - b).norm() <= 1e-10 * a.norm().max(1e-12));
            }
        }
    }
}
