use mixreg_core::kernels::{FractionalOrder, KernelSpec};
use mixreg_core::powerlog::{atom_function, fractional_expansion, PowerLogAtom, DEFAULT_TRUNC_TOL};
use mixreg_core::pv_quadrature::{lk_apply, GlobalFunction, QuadratureParams};
use mixreg_core::regularity::{weighted_holder_seminorm, weighted_sup, Channel, PairSet, SampledFunction};
use mixreg_core::solver1d::{assemble, constant, matrix_structure, Grid1D, Problem1D};
use num_rational::Ratio;
use proptest::prelude::*;

fn kernel(s: f64) -> KernelSpec {
    KernelSpec::fractional(FractionalOrder::new(s).unwrap())
}

fn bump() -> GlobalFunction {
    GlobalFunction::new(|x| (-x * x).exp()).with_deriv(|x, k| {
        let e = (-x * x).exp();
        match k {
            0 => e,
            1 => -2.0 * x * e,
            2 => (4.0 * x * x - 2.0) * e,
            _ => (12.0 * x - 8.0 * x * x * x) * e,
        }
    })
}

fn lk(s: f64, u: &GlobalFunction, x: f64) -> f64 {
    lk_apply(&kernel(s), u, x, &QuadratureParams::default()).unwrap().value
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    #[test]
    fn lk_is_linear(s in 0.1f64..0.9, a1 in 1.05f64..3.0, j1 in 0u32..3, a2 in 1.05f64..3.0, j2 in 0u32..3,
                    a in -2.0f64..2.0, b in -2.0f64..2.0, x in 0.01f64..0.45) {
        let u = atom_function(&PowerLogAtom::new(a1, j1).unwrap());
        let v = atom_function(&PowerLogAtom::new(a2, j2).unwrap());
        let w = GlobalFunction::linear_combination(a, &u, b, &v);
        let lhs = lk(s, &w, x);
        let rhs = a * lk(s, &u, x) + b * lk(s, &v, x);
        prop_assert!((lhs - rhs).abs() <= 1e-7 * (1.0 + lhs.abs()), "{lhs} vs {rhs}");
    }

    #[test]
    fn lk_commutes_with_translation(s in 0.1f64..0.9, x in -1.5f64..1.5, t in -3.0f64..3.0) {
        let u = bump();
        let a = lk(s, &u, x);
        let b = lk(s, &u.shifted(t), x + t);
        prop_assert!((a - b).abs() <= 1e-8 * (1.0 + a.abs()), "{a} vs {b}");
    }

    #[test]
    fn lk_scales_with_order(s in 0.1f64..0.9, x in -1.0f64..1.0, lambda in 0.2f64..5.0) {
        let u = bump();
        let a = lk(s, &u.rescaled(lambda), x);
        let b = lambda.powf(2.0 * s) * lk(s, &u, lambda * x);
        prop_assert!((a - b).abs() <= 1e-8 * (1.0 + a.abs()), "{a} vs {b}");
    }

    #[test]
    fn resonance_dichotomy(num in 1i64..8, den in 2i64..9, shift in 0i64..3, j in 0u32..3, off in 0.05f64..0.45) {
        prop_assume!(num < den);
        let s = FractionalOrder::rational(num, den).unwrap();
        let sr = Ratio::new(num, den);
        let alpha = sr * 2 + Ratio::from_integer(shift);
        prop_assume!(alpha > Ratio::from_integer(0));
        let res = fractional_expansion(&s, &PowerLogAtom::exact(alpha, j).unwrap(), DEFAULT_TRUNC_TOL).unwrap();
        prop_assert!(res.resonant);
        prop_assert_eq!(res.a[0], 0.0);
        if j == 0 {
            prop_assert!(res.a[1] > 0.0);
        }
        let alpha_off = alpha + Ratio::new((off * 1000.0).round() as i64, 1000);
        let non = fractional_expansion(&s, &PowerLogAtom::exact(alpha_off, j).unwrap(), DEFAULT_TRUNC_TOL).unwrap();
        prop_assert!(!non.resonant);
        prop_assert!(non.a.len() <= j as usize + 1 || non.a[j as usize + 1] == 0.0);
    }

    #[test]
    fn assembled_operator_is_m_matrix(s in 0.05f64..0.95, n in 8usize..64, p in 0.1f64..5.0, q in 0.0f64..5.0, graded in any::<bool>()) {
        let grid = if graded { Grid1D::graded(2 * (n / 2).max(4), 2.0).unwrap() } else { Grid1D::uniform(n).unwrap() };
        let pr = Problem1D::constant_coeffs(kernel(s), p, q, 0.0, constant(1.0)).unwrap();
        let op = assemble(&pr, &grid).unwrap();
        let st = matrix_structure(&op.a, &[0, grid.len() / 2, grid.len() - 1]).unwrap();
        prop_assert!(st.is_m_matrix, "{st:?}");
    }

    #[test]
    fn pair_sampling_is_deterministic_and_monotone(seed in any::<u64>(), n in 20usize..120, budget in 50usize..2000) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut xs: Vec<f64> = (0..n).map(|_| rng.gen_range(1e-4..1.0 - 1e-4)).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        xs.dedup();
        let d: Vec<f64> = xs.iter().map(|x| x.min(1.0 - x)).collect();
        prop_assert_eq!(PairSet::new(&xs, &d, budget).pairs, PairSet::new(&xs, &d, budget).pairs);

        let f = |x: f64| (7.0 * x).sin() * x.sqrt();
        let sub: Vec<f64> = xs.iter().step_by(2).copied().collect();
        let small = SampledFunction::values_only(sub.clone(), sub.iter().map(|x| f(*x)).collect()).unwrap();
        let big = SampledFunction::values_only(xs.clone(), xs.iter().map(|x| f(*x)).collect()).unwrap();
        prop_assert!(weighted_sup(&big, Channel::Values, 0.5).unwrap() >= weighted_sup(&small, Channel::Values, 0.5).unwrap());
        let all = n * n;
        let a = weighted_holder_seminorm(&small, Channel::Values, 0.5, 0.5, all).unwrap();
        let b = weighted_holder_seminorm(&big, Channel::Values, 0.5, 0.5, all).unwrap();
        prop_assert!(b >= a);
    }
}
