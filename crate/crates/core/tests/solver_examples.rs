use std::sync::Arc;

use mixreg_core::error::Error;
use mixreg_core::kernels::{FractionalOrder, KernelSpec};
use mixreg_core::pv_quadrature::{lk_apply, GlobalFunction, QuadratureParams, Support};
use mixreg_core::regularity::dist;
use mixreg_core::solver1d::*;

fn kernel(s: f64) -> KernelSpec {
    KernelSpec::fractional(FractionalOrder::new(s).unwrap())
}

#[test]
fn unit_load_is_positive_and_below_laplace_only() {
    let g = Grid1D::uniform(1024).unwrap();
    let mixed = solve_direct(&Problem1D::constant_coeffs(kernel(0.75), 1.0, 1.0, 0.0, constant(1.0)).unwrap(), &g).unwrap();
    let local = solve_direct(&Problem1D::constant_coeffs(kernel(0.75), 1.0, 0.0, 0.0, constant(1.0)).unwrap(), &g).unwrap();
    assert!(mixed.values.iter().all(|v| *v >= 0.0));
    let m = mixed.values.iter().copied().fold(0.0, f64::max);
    assert!(m <= local.values.iter().copied().fold(0.0, f64::max));
    assert!(m <= 0.125 + 1e-12);
    assert!(mixed.stats.residual_norm <= 1e-10);
}

#[test]
fn manufactured_consistency_and_convergence() {
    let k = kernel(0.75);
    let f = manufactured_rhs(&k, constant(1.0), constant(1.0), constant(0.0), QuadratureParams::default());
    let pr = Problem1D::constant_coeffs(k, 1.0, 1.0, 0.0, f).unwrap();
    let g = Grid1D::uniform(512).unwrap();
    let op = assemble(&pr, &g).unwrap();
    let ustar = nalgebra::DVector::from_iterator(g.len(), g.nodes.iter().map(|x| x * (1.0 - x)));
    let consistency = (&op.a * &ustar - &op.f).amax();
    assert!(consistency <= 5e-3, "{consistency}");

    let mut errs = Vec::new();
    for n in [128, 256, 512] {
        let sol = solve_direct(&pr, &Grid1D::uniform(n).unwrap()).unwrap();
        errs.push(sol.nodes.iter().zip(&sol.values).map(|(x, u)| (u - x * (1.0 - x)).abs()).fold(0.0, f64::max));
    }
    assert!(errs.windows(2).all(|w| w[1] <= w[0]), "{errs:?}");
}

#[test]
fn custom_kernel_assembly_is_consistent_with_oracle() {
    let k = KernelSpec::from_registry("oscillating", FractionalOrder::new(0.4).unwrap()).unwrap();
    let g = Grid1D::uniform(32).unwrap();
    let pr = Problem1D::constant_coeffs(k.clone(), 1.0, 1.0, 0.0, constant(0.0)).unwrap();
    let op = assemble(&pr, &g).unwrap();
    let tent = |x: f64| (0.25 - (x - 0.5).abs()).max(0.0);
    let u = nalgebra::DVector::from_iterator(g.len(), g.nodes.iter().map(|x| tent(*x)));
    let ku = &op.parts.nonlocal * &u;
    let gf = GlobalFunction::new(tent).with_kinks(&[0.5]).with_support(Support {
        lo: 0.25,
        hi: 0.75,
        left: 0.0,
        right: 0.0,
    });
    for (i, x) in g.nodes.iter().enumerate().filter(|(i, x)| i % 3 == 1 && ![0.25, 0.5, 0.75].contains(*x)) {
        let oracle = lk_apply(&k, &gf, *x, &QuadratureParams::default()).unwrap().value;
        assert!((ku[i] - oracle).abs() < 1e-7 * (1.0 + oracle.abs()), "x = {x}");
    }
    assert!(matrix_structure(&op.a, &[3]).unwrap().is_m_matrix);
}

#[test]
fn quarter_order_hessian_stays_bounded() {
    let g = Grid1D::uniform(512).unwrap();
    let sol = solve_direct(&Problem1D::constant_coeffs(kernel(0.25), 1.0, 1.0, 0.0, constant(1.0)).unwrap(), &g).unwrap();
    let interior = sol
        .nodes
        .iter()
        .zip(&sol.d2u)
        .filter(|(x, _)| dist(**x) >= 0.1)
        .map(|(_, v)| v.abs())
        .fold(0.0, f64::max);
    let edge = sol
        .nodes
        .iter()
        .zip(&sol.d2u)
        .filter(|(x, _)| dist(**x) <= 10.0 / 512.0)
        .map(|(_, v)| v.abs())
        .fold(0.0, f64::max);
    assert!(edge <= 2.0 * interior, "{edge} vs {interior}");
}

#[test]
fn strongly_nonlocal_fixed_point_needs_damping() {
    let pr = Problem1D::constant_coeffs(kernel(0.9), 1.0, 10.0, 0.0, constant(1.0)).unwrap();
    let g = Grid1D::uniform(64).unwrap();
    match solve_fixed_point(&pr, &g, 0.25, 500) {
        Ok(sol) => {
            let direct = solve_direct(&pr, &g).unwrap();
            assert!(sol.max_abs_diff(&direct.values) < 1e-8);
            assert!(sol.stats.iterations <= 500);
        }
        Err(Error::FixedPointDiverged { history }) => assert_eq!(history.len(), 499),
        Err(e) => panic!("{e}"),
    }
}

#[test]
fn linear_growth_is_refinement_stable() {
    let pr = Problem1D::constant_coeffs(kernel(0.75), 1.0, 1.0, 0.0, constant(1.0)).unwrap();
    let r: Vec<f64> = [512, 1024]
        .iter()
        .map(|n| {
            let sol = solve_direct(&pr, &Grid1D::uniform(*n).unwrap()).unwrap();
            linear_growth_check(&sol, &vec![1.0; sol.nodes.len()]).c01_norm_over_fplus
        })
        .collect();
    assert!(r[0].is_finite() && (r[0] - r[1]).abs() <= 0.1 * r[1], "{r:?}");
}

#[test]
fn gradient_term_with_upwinding_still_gives_positive_solutions() {
    let pr = Problem1D::new(
        kernel(0.5),
        Arc::new(|x: f64| 0.01 + x),
        constant(1.0),
        Arc::new(|x: f64| 20.0 * (x - 0.5)),
        constant(1.0),
        0.01,
    )
    .unwrap();
    let g = Grid1D::uniform(128).unwrap();
    let sol = solve_direct(&pr, &g).unwrap();
    assert!(sol.values.iter().all(|v| *v > 0.0));
    let op = assemble(&pr, &g).unwrap();
    assert!(op.parts.upwind_rows > 0);
    assert!(matrix_structure(&op.a, &[0, 60]).unwrap().max_off_diagonal <= 1e-12);
}

#[test]
fn weighted_poisson_examples() {
    let r = solve_weighted_poisson_1d(Arc::new(|x: f64| x.powf(-0.5)), 0.5, 0.5, 0.9, 60);
    assert!(matches!(r, Err(Error::Model(_))));
    let r = solve_weighted_poisson_1d(Arc::new(|x: f64| x.powf(-0.5)), 0.5, 0.5, 1.0, 60).unwrap();
    for x in [1e-6f64, 1e-3, 0.2, 0.7, 0.999] {
        let exact = (x - x.powf(1.5)) / (0.5 * 1.5);
        assert!((r.solution.u(x) - exact).abs() < 1e-8);
    }
    assert!(r.norm_report.c2gamma_star >= 1.0 - 1e-9);
    let one = solve_weighted_poisson_1d(constant(1.0), 0.5, 0.5, 1.0, 40).unwrap();
    assert!((one.solution.u(0.5) - 0.125).abs() < 1e-13);
}
