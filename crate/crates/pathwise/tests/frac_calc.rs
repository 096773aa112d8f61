use pathwise::frac_calc::{
    dyda_terms, norm_w0, norm_wt, rl_integral_left, rl_integral_right, weighted_lp_term, wm_derivative_left,
    wm_derivative_right_adjusted, FracParams,
};
use pathwise::grid_paths::{make_fbm, GridFunction, TimeGrid};
use pathwise::numerics::linear_fit;
use pathwise::variability::gagliardo_sum;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::gamma;

type Operator<'a> = Box<dyn Fn(&GridFunction) -> GridFunction + 'a>;

fn grid(t: f64, n: usize) -> TimeGrid {
    TimeGrid::new(t, n).unwrap()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Random trigonometric polynomial with `terms` modes on `[0, T]`.
fn random_smooth(rng: &mut ChaCha8Rng, terms: usize) -> impl Fn(f64) -> f64 {
    let coeffs: Vec<(f64, f64, f64)> = (0..terms)
        .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(0.5..6.0), rng.random_range(0.0..6.3)))
        .collect();
    move |t| coeffs.iter().map(|(a, w, p)| a * (w * t + p).sin()).sum()
}

#[test]
fn left_integral_of_one_matches_power() {
    let g = grid(1.0, 1 << 12);
    for theta in [0.2, 0.5, 0.8] {
        let out = rl_integral_left(&GridFunction::constant(g, 1.0), theta).unwrap();
        assert_eq!(out.value(0), 0.0);
        for i in 1..g.len() {
            let exact = g.time(i).powf(theta) / gamma(theta + 1.0);
            let rel = (out.value(i) - exact).abs() / exact;
            assert!(rel < 1e-4, "theta {theta} index {i}: rel {rel}");
        }
    }
}

#[test]
fn right_integral_of_one_matches_power() {
    let g = grid(2.0, 1024);
    let theta = 0.35;
    let out = rl_integral_right(&GridFunction::constant(g, 1.0), theta).unwrap();
    assert_eq!(out.value(1024), 0.0);
    for i in 0..1024 {
        let exact = (2.0 - g.time(i)).powf(theta) / gamma(theta + 1.0);
        assert!((out.value(i) - exact).abs() / exact < 1e-10);
    }
}

#[test]
fn integrals_of_zero_vanish() {
    let g = grid(1.0, 64);
    let zero = GridFunction::constant(g, 0.0);
    assert!(rl_integral_left(&zero, 0.4).unwrap().values().iter().all(|v| *v == 0.0));
    assert!(rl_integral_right(&zero, 0.4).unwrap().values().iter().all(|v| *v == 0.0));
}

#[test]
fn left_integral_semigroup_on_identity() {
    let g = grid(1.0, 1 << 12);
    let f = GridFunction::from_fn(g, |t| t);
    let (a, b) = (0.3, 0.45);
    let twice = rl_integral_left(&rl_integral_left(&f, b).unwrap(), a).unwrap();
    let order = 1.0 + a + b;
    let top = 1.0 / gamma(order + 1.0);
    for i in 1..g.len() {
        let exact = g.time(i).powf(order) / gamma(order + 1.0);
        assert!((twice.value(i) - exact).abs() < 1e-3 * top, "index {i}");
    }
}

#[test]
fn left_integral_rejects_invalid_order() {
    let f = GridFunction::constant(grid(1.0, 8), 1.0);
    assert!(rl_integral_left(&f, 0.0).is_err());
    assert!(rl_integral_right(&f, 1.0).is_err());
}

#[test]
fn derivative_of_constant() {
    let g = grid(1.0, 512);
    for theta in [0.1, 0.5, 0.9] {
        let params = [FracParams::new(theta), FracParams::trapezoid(theta, 1.0)];
        for p in params {
            let d = wm_derivative_left(&GridFunction::constant(g, 2.5), &p).unwrap();
            assert!(d.singular_at_origin);
            assert_eq!(d.values.value(0), 0.0);
            for i in 1..g.len() {
                let exact = 2.5 * g.time(i).powf(-theta) / gamma(1.0 - theta);
                assert!((d.values.value(i) - exact).abs() < 1e-6, "{p:?} index {i}");
            }
        }
    }
}

#[test]
fn derivative_of_identity_at_half() {
    let g = grid(1.0, 1 << 12);
    let d = wm_derivative_left(&GridFunction::from_fn(g, |t| t), &FracParams::new(0.5)).unwrap();
    assert!(!d.singular_at_origin);
    for i in 1..g.len() {
        let exact = gamma(2.0) / gamma(1.5) * g.time(i).sqrt();
        assert!((d.values.value(i) - exact).abs() < 1e-3, "index {i}");
    }
}

#[test]
fn trapezoid_scheme_approaches_product_integration() {
    let f = |t: f64| t * t + t;
    let errs: Vec<f64> = [256usize, 1024, 4096]
        .iter()
        .map(|&n| {
            let g = grid(1.0, n);
            let fun = GridFunction::from_fn(g, f);
            let a = wm_derivative_left(&fun, &FracParams::new(0.3)).unwrap();
            let b = wm_derivative_left(&fun, &FracParams::trapezoid(0.3, 1.0)).unwrap();
            (n / 2..=n).map(|i| (a.values.value(i) - b.values.value(i)).abs()).fold(0.0, f64::max)
        })
        .collect();
    assert!(errs[1] < errs[0] && errs[2] < errs[1], "{errs:?}");
    assert!(errs[2] < 1e-2, "{errs:?}");
}

fn inverse_error(n: usize, theta: f64) -> f64 {
    let g = grid(1.0, n);
    let f = GridFunction::from_fn(g, f64::sin);
    let back = wm_derivative_left(&rl_integral_left(&f, theta).unwrap(), &FracParams::new(theta)).unwrap();
    max_abs_diff(&back.values.values()[1..], &f.values()[1..])
}

#[test]
fn derivative_inverts_integral_on_sine() {
    for theta in [0.25, 0.5, 0.75] {
        let e = inverse_error(1 << 12, theta);
        assert!(e < 1e-2, "theta {theta}: {e}");
    }
}

#[test]
fn inverse_identity_error_decays_with_mesh() {
    for theta in [0.3, 0.6] {
        let ns = [1usize << 10, 1 << 12, 1 << 14];
        let x: Vec<f64> = ns.iter().map(|&n| (1.0 / n as f64).ln()).collect();
        let y: Vec<f64> = ns.iter().map(|&n| inverse_error(n, theta).ln()).collect();
        let fit = linear_fit(&x, &y).unwrap();
        assert!(fit.slope >= 0.5 * (1.0 - theta), "theta {theta}: order {}", fit.slope);
    }
}

#[test]
fn right_adjusted_derivative_of_constant_is_zero() {
    let g = grid(1.0, 256);
    for p in [FracParams::new(0.4), FracParams::trapezoid(0.4, 2.0)] {
        let d = wm_derivative_right_adjusted(&GridFunction::constant(g, -3.0), &p).unwrap();
        assert!(d.values().iter().all(|v| *v == 0.0));
    }
}

#[test]
fn right_adjusted_derivative_of_linear_function() {
    let t_end = 1.5;
    let g = grid(t_end, 1 << 12);
    let d = wm_derivative_right_adjusted(&GridFunction::from_fn(g, |t| t_end - t), &FracParams::new(0.5)).unwrap();
    for i in 0..g.len() {
        let exact = gamma(2.0) / gamma(1.5) * (t_end - g.time(i)).sqrt();
        assert!((d.value(i).abs() - exact).abs() < 1e-3, "index {i}");
    }
}

#[test]
fn weighted_term_of_one() {
    for t_end in [1.0, 2.0] {
        let one = GridFunction::constant(grid(t_end, 1024), 1.0);
        let w = weighted_lp_term(&one, 0.25, 1.0).unwrap();
        let exact = f64::powf(t_end, 0.75) / 0.75;
        assert!((w - exact).abs() < 1e-3, "{w} vs {exact}");
        assert_eq!(gagliardo_sum(&one, 0.25, 1.0).unwrap(), 0.0);
        assert!((norm_w0(&one, 0.25, 1.0).unwrap() - w).abs() < 1e-15);
    }
}

#[test]
fn norms_of_zero_vanish() {
    let zero = GridFunction::constant(grid(1.0, 128), 0.0);
    assert_eq!(norm_w0(&zero, 0.3, 2.0).unwrap(), 0.0);
    assert_eq!(norm_wt(&zero, 0.3).unwrap(), 0.0);
}

#[test]
fn weighted_term_requires_integrable_weight() {
    let one = GridFunction::constant(grid(1.0, 16), 1.0);
    assert!(weighted_lp_term(&one, 0.5, 2.0).is_err());
    assert!(weighted_lp_term(&one, 0.6, 2.0).is_err());
    assert!(weighted_lp_term(&one, 0.5, 0.5).is_err());
}

#[test]
fn weighted_term_of_power_function() {
    let f = GridFunction::from_fn(grid(1.0, 4096), |t| t);
    // int_0^1 t^2 t^(-0.6) dt = 1 / 2.4
    let w = weighted_lp_term(&f, 0.3, 2.0).unwrap();
    assert!((w - 1.0 / 2.4).abs() < 1e-6, "{w}");
}

#[test]
fn norm_wt_of_linear_function() {
    // g(t) = t on [0, 1]: the first sup is sup (1-t)^(1-theta) = 1 and the
    // inner integral is (1-t)^(1-theta) / (1-theta), largest at t = 0.
    let theta = 0.4;
    let g = GridFunction::from_fn(grid(1.0, 2048), |t| t);
    let n = norm_wt(&g, theta).unwrap();
    let exact = 1.0 + 1.0 / (1.0 - theta);
    assert!((n - exact).abs() < 1e-6, "{n} vs {exact}");
}

#[test]
fn norm_wt_of_holder_path_is_stable_under_refinement() {
    let fine = make_fbm(0.8, 1, grid(1.0, 1 << 14), 17).unwrap();
    let values: Vec<f64> = [64usize, 16, 4, 1]
        .iter()
        .map(|&s| norm_wt(&fine.subsample(s).unwrap().coordinate(0), 0.4).unwrap())
        .collect();
    assert!(values.iter().all(|v| v.is_finite() && *v > 0.0));
    let last = (values[3] - values[2]).abs() / values[3];
    let first = (values[1] - values[0]).abs() / values[1];
    assert!(last < 0.05, "{values:?}");
    assert!(last < first, "{values:?}");
}

#[test]
fn dyda_inequality_holds_with_one_constant() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let g = grid(1.0, 1024);
    let (theta, p) = (0.4, 2.0);
    let ratios: Vec<f64> = (0..20)
        .map(|k| {
            let f = if k % 2 == 0 {
                GridFunction::from_fn(g, random_smooth(&mut rng, 4))
            } else {
                make_fbm(rng.random_range(0.5..0.95), 1, g, k).unwrap().coordinate(0)
            };
            let d = dyda_terms(&f, theta, p).unwrap();
            d.weighted / (d.seminorm + d.lp)
        })
        .collect();
    let calibrated = ratios[..10].iter().copied().fold(0.0, f64::max);
    assert!(calibrated.is_finite() && calibrated > 0.0);
    for r in &ratios[10..] {
        assert!(*r <= 2.0 * calibrated, "ratio {r} vs calibrated {calibrated}: {ratios:?}");
    }
}

#[test]
fn params_validation() {
    assert!(FracParams::new(0.5).validate().is_ok());
    assert!(FracParams::new(1.0).validate().is_err());
    assert!(FracParams::trapezoid(0.5, 0.5).validate().is_err());
    let f = GridFunction::constant(grid(1.0, 8), 1.0);
    assert!(wm_derivative_left(&f, &FracParams::new(-0.1)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn operators_are_linear(seed in 0u64..1000, a in -3.0f64..3.0, b in -3.0f64..3.0, theta in 0.05f64..0.95) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = grid(1.0, 128);
        let f1 = GridFunction::from_fn(g, random_smooth(&mut rng, 3));
        let f2 = GridFunction::from_fn(g, random_smooth(&mut rng, 3));
        let mix = f1.combine(a, &f2, b).unwrap();
        let params = FracParams::new(theta);
        let ops: Vec<Operator> = vec![
            Box::new(|f| rl_integral_left(f, theta).unwrap()),
            Box::new(|f| rl_integral_right(f, theta).unwrap()),
            Box::new(|f| wm_derivative_left(f, &params).unwrap().values),
            Box::new(|f| wm_derivative_right_adjusted(f, &params).unwrap()),
        ];
        for op in &ops {
            let lhs = op(&mix);
            let rhs = op(&f1).combine(a, &op(&f2), b).unwrap();
            let scale = lhs.values().iter().fold(1.0f64, |m, v| m.max(v.abs()));
            prop_assert!(max_abs_diff(lhs.values(), rhs.values()) <= 1e-11 * scale);
        }
    }

    #[test]
    fn left_integral_preserves_positivity(seed in 0u64..1000, theta in 0.05f64..0.95) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = grid(1.0, 200);
        let values: Vec<f64> = (0..g.len()).map(|_| rng.random_range(0.0..1.0) * rng.random_range(0.0..1.0)).collect();
        let f = GridFunction::new(g, values).unwrap();
        let out = rl_integral_left(&f, theta).unwrap();
        prop_assert!(out.values().iter().all(|v| *v >= 0.0));
    }
}
