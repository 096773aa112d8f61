use std::sync::Arc;

use nalgebra::DMatrix;
use pathwise::bv_library::{
    cone_matrix, jump_line_matrix, Constant, MatrixBv, Profile1d, Region, ScalarRef,
};
use pathwise::doss::{
    build_solution, change_of_variable_check, closed_form_f, closed_form_maps, linear_maps, residual, s_witness,
    solve_nd, solve_scalar, uniqueness_check, BvMap, ClosedForm, DossMaps, MapSource, SolveConfig, WitnessOptions,
};
use pathwise::error::Error;
use pathwise::grid_paths::{estimate_holder, make_fbm, SampledPath, TimeGrid};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const JUMP: ClosedForm = ClosedForm::JumpLine { c: 2.0 };

fn grid(t: f64, n: usize) -> TimeGrid {
    TimeGrid::new(t, n).unwrap()
}

fn no_witness() -> WitnessOptions {
    WitnessOptions {
        check: false,
        ..WitnessOptions::default()
    }
}

fn random_points(seed: u64, count: usize, r: f64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| vec![rng.random_range(-r..r), rng.random_range(-r..r)])
        .collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn scalar_path(g: TimeGrid, f: impl Fn(f64) -> f64) -> SampledPath {
    SampledPath::new(g, 1, (0..g.len()).map(|i| f(g.time(i))).collect()).unwrap()
}

fn matrix_1x1(c: f64) -> MatrixBv {
    MatrixBv::constant(&DMatrix::from_element(1, 1, c)).unwrap()
}

#[test]
fn scalar_constant_coefficient() {
    let maps = solve_scalar(&Constant::new(1, 2.5), (-2.0, 2.0), &SolveConfig::scalar()).unwrap();
    assert_eq!(maps.source(), &MapSource::Solved);
    for x in [-1.5, -0.2, 0.0, 0.7, 1.9] {
        assert!((maps.g(&[x]).unwrap()[0] - x / 2.5).abs() < 1e-9);
    }
    for y in [-0.5, 0.0, 0.3, 0.75] {
        assert!((maps.f(&[y]).unwrap()[0] - 2.5 * y).abs() < 1e-8);
    }
    assert!(maps.lip_f() <= 2.5 * (1.0 + 1e-6), "lip_f {}", maps.lip_f());
}

#[test]
fn scalar_power_well_passes_through_zero() {
    let kappa = 0.5;
    let sigma = Profile1d::power_well(kappa).unwrap();
    let maps = solve_scalar(&sigma, (-2.0, 2.0), &SolveConfig::scalar()).unwrap();
    // g(x) = sign(x) |x|^(1-kappa) / (1-kappa) inside (-1, 1)
    for x in [-0.9f64, -0.3, -0.01, 0.0, 0.04, 0.5, 0.99] {
        let exact = x.signum() * f64::abs(x).powf(1.0 - kappa) / (1.0 - kappa);
        assert!((maps.g(&[x]).unwrap()[0] - exact).abs() < 1e-2, "x {x}");
    }
    let probes: Vec<Vec<f64>> = (0..50).map(|k| vec![-1.9 + 3.8 * k as f64 / 49.0]).collect();
    assert!(maps.roundtrip_error(&probes).unwrap() < 1e-6);
    assert!(maps.lip_f() <= 1.0 + 1e-2);
}

#[test]
fn scalar_solution_satisfies_the_equation() {
    let sigma = Profile1d::power_well(0.3).unwrap();
    let maps = solve_scalar(&sigma, (-2.0, 2.0), &SolveConfig::scalar()).unwrap();
    let h = 1e-3;
    for y in [-1.5, -0.8, 0.4, 0.9, 1.2] {
        let x = maps.f(&[y]).unwrap()[0];
        let slope = (maps.f(&[y + h]).unwrap()[0] - maps.f(&[y - h]).unwrap()[0]) / (2.0 * h);
        assert!((slope - sigma.at(x)).abs() < 1e-2, "y {y}: {slope} vs {}", sigma.at(x));
    }
}

#[test]
fn scalar_cantor_well_is_integrable() {
    let maps = solve_scalar(&Profile1d::cantor_well(), (-4.0, 4.0), &SolveConfig::scalar()).unwrap();
    let xs: Vec<f64> = (0..81).map(|k| -4.0 + 0.1 * k as f64).collect();
    let gs: Vec<f64> = xs.iter().map(|&x| maps.g(&[x]).unwrap()[0]).collect();
    assert!(gs.iter().all(|v| v.is_finite()));
    assert!(gs.windows(2).all(|w| w[1] > w[0]));
    let probes: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
    assert!(maps.roundtrip_error(&probes).unwrap() < 1e-6);
}

#[test]
fn scalar_refuses_non_integrable_coefficient() {
    let sigma = Profile1d::new(Arc::new(|x: f64| x.abs().powf(1.5)), Vec::new(), None, "steep");
    match solve_scalar(&sigma, (-1.0, 1.0), &SolveConfig::scalar()) {
        Err(Error::QuadratureDivergence { lo, hi }) => assert!(lo <= 0.0 && hi >= 0.0, "[{lo}, {hi}]"),
        other => panic!("unexpected {other:?}"),
    }
    assert!(solve_scalar(&Constant::new(2, 1.0), (-1.0, 1.0), &SolveConfig::scalar()).is_err());
}

#[test]
fn nd_identity_coefficient() {
    let id = MatrixBv::constant(&DMatrix::identity(2, 2)).unwrap();
    let maps = solve_nd(&id, &[0.0, 0.0], &Region::cube(2, 1.0), &SolveConfig::default()).unwrap();
    for p in random_points(1, 50, 0.6) {
        assert!(max_diff(&maps.g(&p).unwrap(), &p) < 1e-8);
        assert!(max_diff(&maps.f(&p).unwrap(), &p) < 1e-8);
    }
}

#[test]
fn nd_jump_line_matches_closed_form() {
    let maps = solve_nd(&jump_line_matrix(2.0).unwrap(), &[0.0, 0.0], &Region::cube(2, 3.2), &SolveConfig::default())
        .unwrap();
    // The image of the locus y1 = 0 is the line x2 = 2 x1; probes keep twice
    // the mollification radius away from it.
    let eps = 2.0 * SolveConfig::default().spacing;
    let probes: Vec<Vec<f64>> = random_points(2, 1200, 0.9)
        .into_iter()
        .filter(|y| {
            let x = closed_form_f(JUMP, y);
            (2.0 * x[0] - x[1]).abs() / 5f64.sqrt() > 2.0 * eps
        })
        .take(1000)
        .collect();
    assert_eq!(probes.len(), 1000);
    for y in &probes {
        let solved = maps.f(y).unwrap();
        let exact = closed_form_f(JUMP, y);
        assert!(max_diff(&solved, &exact) < 1e-3, "y {y:?}: {solved:?} vs {exact:?}");
    }
    let xs: Vec<Vec<f64>> = probes.iter().map(|y| closed_form_f(JUMP, y)).collect();
    assert!(maps.roundtrip_error(&xs).unwrap() < 1e-8);
}

#[test]
fn nd_refuses_curl_defect_of_cone() {
    let err = solve_nd(&cone_matrix(1.0, 2.0).unwrap(), &[0.0, 0.0], &Region::cube(2, 3.2), &SolveConfig::default());
    match err {
        Err(Error::CurlRefusal { report, threshold }) => assert!(report.max_residual * report.eps > threshold * report.eps),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn nd_validates_inputs() {
    let id = MatrixBv::constant(&DMatrix::identity(2, 2)).unwrap();
    let cfg = SolveConfig::default();
    assert!(solve_nd(&id, &[5.0, 0.0], &Region::cube(2, 1.0), &cfg).is_err());
    assert!(solve_nd(&id, &[0.0], &Region::cube(2, 1.0), &cfg).is_err());
    assert!(solve_nd(&matrix_1x1(1.0), &[0.0], &Region::cube(1, 1.0), &cfg).is_err());
    let bad = SolveConfig {
        spacing: 0.0,
        ..SolveConfig::default()
    };
    assert!(solve_nd(&id, &[0.0, 0.0], &Region::cube(2, 1.0), &bad).is_err());
}

#[test]
fn closed_form_printed_values() {
    assert_eq!(closed_form_f(JUMP, &[1.0, 1.0]), vec![3.0, 2.0]);
    assert_eq!(closed_form_f(JUMP, &[-1.0, 1.0]), vec![-1.0, 1.0]);
    assert_eq!(closed_form_f(ClosedForm::Cone { a: 1.0, b: 2.0 }, &[1.0, 1.0]), vec![3.0, 3.0]);
    assert_eq!(closed_form_f(ClosedForm::Cone { a: 1.0, b: 2.0 }, &[-1.0, 1.0]), vec![-2.0, 2.0]);
    let shear = closed_form_f(ClosedForm::CantorShear, &[0.5, 0.0]);
    assert_eq!(shear[0], 0.5);
    assert!((shear[1] - 0.5).abs() < 1e-12);
}

#[test]
fn closed_form_parameters_are_validated() {
    assert!(closed_form_maps(ClosedForm::JumpLine { c: 1.0 }).is_err());
    assert!(closed_form_maps(ClosedForm::Cone { a: 2.0, b: 1.0 }).is_err());
    assert!(closed_form_maps(ClosedForm::Cone { a: 0.0, b: 1.0 }).is_err());
    assert!(linear_maps(&DMatrix::zeros(2, 2)).is_err());
}

#[test]
fn maps_roundtrip_at_random_probes() {
    let families: Vec<DossMaps> = vec![
        closed_form_maps(JUMP).unwrap(),
        closed_form_maps(ClosedForm::JumpLine { c: 3.5 }).unwrap(),
        closed_form_maps(ClosedForm::Cone { a: 1.0, b: 2.0 }).unwrap(),
        closed_form_maps(ClosedForm::CantorShear).unwrap(),
        linear_maps(&DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.5, 3.0])).unwrap(),
    ];
    let probes = random_points(3, 1000, 2.0);
    for maps in &families {
        let image: Vec<Vec<f64>> = probes.iter().map(|y| maps.f(y).unwrap()).collect();
        assert!(maps.roundtrip_error(&image).unwrap() < 1e-9, "{:?}", maps.source());
        for y in &probes {
            let x = maps.f(y).unwrap();
            assert!(max_diff(&maps.g(&x).unwrap(), y) < 1e-9, "{:?} at {y:?}", maps.source());
        }
    }
}

#[test]
fn closed_form_maps_solve_the_equation() {
    let probes: Vec<Vec<f64>> = random_points(4, 200, 1.5)
        .into_iter()
        .filter(|y| y[0].abs() > 1e-2 && y[1].abs() > 1e-2)
        .collect();
    let maps = closed_form_maps(JUMP).unwrap();
    assert!(maps.derivative_error(&jump_line_matrix(2.0).unwrap(), &probes, 1e-4).unwrap() < 1e-6);
}

#[test]
fn build_solution_with_identity_and_scalar_maps() {
    let g = grid(1.0, 256);
    let y = make_fbm(0.7, 2, g, 5).unwrap();
    let id = linear_maps(&DMatrix::identity(2, 2)).unwrap();
    let x = build_solution(&id, &y, &[0.5, -1.0]).unwrap();
    for (a, b) in x.points().zip(y.points()) {
        assert!((a[0] - b[0] - 0.5).abs() < 1e-12 && (a[1] - b[1] + 1.0).abs() < 1e-12);
    }
    let y1 = make_fbm(0.7, 1, g, 6).unwrap();
    let maps = solve_scalar(&Constant::new(1, 3.0), (-10.0, 10.0), &SolveConfig::scalar()).unwrap();
    let x = build_solution(&maps, &y1, &[0.25]).unwrap();
    for (a, b) in x.points().zip(y1.points()) {
        assert!((a[0] - 3.0 * b[0] - 0.25).abs() < 1e-8);
    }
}

#[test]
fn build_solution_rejects_shifted_driver() {
    let g = grid(1.0, 16);
    let y = SampledPath::constant(g, &[1.0, 0.0]).unwrap();
    let id = linear_maps(&DMatrix::identity(2, 2)).unwrap();
    assert!(build_solution(&id, &y, &[0.0, 0.0]).is_err());
    assert!(build_solution(&id, &y, &[0.0]).is_err());
}

#[test]
fn jump_line_solution_keeps_driver_exponent() {
    let g = grid(1.0, 1 << 13);
    let maps = closed_form_maps(JUMP).unwrap();
    for seed in 0..3 {
        let y = make_fbm(0.75, 2, g, seed).unwrap();
        let x = build_solution(&maps, &y, &[1.0, 1.0]).unwrap();
        assert!((x.point(0)[0] - 1.0).abs() < 1e-12 && (x.point(0)[1] - 1.0).abs() < 1e-12);
        let ex = estimate_holder(&x).unwrap();
        let ey = estimate_holder(&y).unwrap();
        assert!((ex.exponent - ey.exponent).abs() < 0.05, "{} vs {}", ex.exponent, ey.exponent);
        assert!(ex.seminorm <= maps.lip_f() * ey.seminorm * 1.5);
    }
}

#[test]
fn residual_of_constant_coefficient() {
    let g = grid(1.0, 1 << 12);
    let y = scalar_path(g, |t| (2.0 * t).sin() + t * t);
    let c = 1.7;
    let x = scalar_path(g, |t| c * ((2.0 * t).sin() + t * t) + 0.4);
    let report = residual(&x, &matrix_1x1(c), &y, &[0.4], 0.5, &WitnessOptions::default()).unwrap();
    assert!(report.sup < 1e-3, "{report:?}");
    assert!(report.classifier.is_some());
    assert_eq!(report.s_witness, s_witness(report.alpha, report.gamma).unwrap());
}

#[test]
fn residual_detects_a_wrong_candidate() {
    let g = grid(1.0, 1 << 10);
    let y = scalar_path(g, |t| t);
    let x = scalar_path(g, |t| 2.0 * t);
    let report = residual(&x, &matrix_1x1(1.0), &y, &[0.0], 0.5, &no_witness()).unwrap();
    assert!((report.sup - 1.0).abs() < 1e-3, "{report:?}");
}

/// `sup_t |X^2_t - x0_2 - sum_i (sigma(X_i) + sigma(X_{i+1})) / 2 dY_i|`,
/// the trapezoid Riemann-Stieltjes residual of the second component.
fn trapezoid_residual(x: &SampledPath, sigma: &MatrixBv, y: &SampledPath, x0: &[f64]) -> f64 {
    let mut acc = 0.0;
    let mut worst: f64 = 0.0;
    for i in 0..y.grid().steps() {
        let a = sigma.evaluate(x.point(i));
        let b = sigma.evaluate(x.point(i + 1));
        for k in 0..2 {
            acc += 0.5 * (a[(1, k)] + b[(1, k)]) * (y.point(i + 1)[k] - y.point(i)[k]);
        }
        worst = worst.max((x.point(i + 1)[1] - x0[1] - acc).abs());
    }
    worst
}

#[test]
fn jump_line_residual_decays_under_refinement() {
    let maps = closed_form_maps(JUMP).unwrap();
    let sigma = jump_line_matrix(2.0).unwrap();
    let x0 = [1.0, 1.0];
    let mut means = [0.0; 3];
    for seed in 0..20u64 {
        let y = make_fbm(0.75, 2, grid(1.0, 1 << 14), 100 + seed).unwrap();
        for (k, stride) in [16usize, 4, 1].into_iter().enumerate() {
            let yc = y.subsample(stride).unwrap();
            let x = build_solution(&maps, &yc, &x0).unwrap();
            let r = residual(&x, &sigma, &yc, &x0, 0.5, &no_witness()).unwrap();
            let oracle = trapezoid_residual(&x, &sigma, &yc, &x0);
            assert!((r.per_component[1] - oracle).abs() < 5e-5, "seed {seed}: {} vs {oracle}", r.per_component[1]);
            means[k] += r.sup / 20.0;
        }
    }
    assert!(means[1] < means[0] && means[2] < means[1], "{means:?}");
}

#[test]
fn uniqueness_of_built_solution_and_impostors() {
    let g = grid(1.0, 1024);
    let maps = closed_form_maps(JUMP).unwrap();
    let y = make_fbm(0.75, 2, g, 8).unwrap();
    let x0 = [1.0, 1.0];
    let x = build_solution(&maps, &y, &x0).unwrap();
    let built = uniqueness_check(&x, &maps, &y, &x0).unwrap();
    assert!(built <= 1e-9 * maps.lip_g().max(1.0), "{built}");

    let mut bumped = x.values().to_vec();
    for i in 512..=1024 {
        bumped[2 * i] += 0.1;
    }
    let impostor = SampledPath::new(g, 2, bumped).unwrap();
    let sup = uniqueness_check(&impostor, &maps, &y, &x0).unwrap();
    assert!(sup >= 0.1 / maps.lip_f(), "{sup}");

    let id = linear_maps(&DMatrix::identity(2, 2)).unwrap();
    let still = SampledPath::constant(g, &x0).unwrap();
    let sup = uniqueness_check(&still, &id, &y, &x0).unwrap();
    let sup_y = y.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!((sup - sup_y).abs() < 1e-12 && sup > 0.0);
}

#[test]
fn change_of_variable_for_linear_map() {
    let path = make_fbm(0.75, 2, grid(1.0, 1 << 12), 9).unwrap();
    let map = BvMap::linear(vec![2.0, -1.0], 0.3);
    let r = change_of_variable_check(&map, &path, 0.5, &WitnessOptions::default()).unwrap();
    assert!(r.sup < 1e-3, "{}", r.sup);
    assert_eq!(r.classifiers.len(), 2);
}

#[test]
fn change_of_variable_for_half_square_decays() {
    let fine = make_fbm(0.75, 2, grid(1.0, 1 << 14), 10).unwrap();
    let map = BvMap::half_square(2).unwrap();
    let sups: Vec<f64> = [16usize, 4, 1]
        .iter()
        .map(|&s| change_of_variable_check(&map, &fine.subsample(s).unwrap(), 0.5, &no_witness()).unwrap().sup)
        .collect();
    assert!(sups[1] < sups[0] && sups[2] < sups[1], "{sups:?}");
}

#[test]
fn change_of_variable_for_jump_line_component_decays() {
    let fine = make_fbm(0.75, 2, grid(1.0, 1 << 14), 11).unwrap();
    let path = pathwise::grid_paths::apply_map(&fine, |x| Ok(vec![x[0] + 0.3, x[1] - 0.2])).unwrap();
    let map = BvMap::jump_line_component(2.0, 1).unwrap();
    let sups: Vec<f64> = [16usize, 4, 1]
        .iter()
        .map(|&s| change_of_variable_check(&map, &path.subsample(s).unwrap(), 0.5, &no_witness()).unwrap().sup)
        .collect();
    assert!(sups[2] < sups[0], "{sups:?}");
}

#[test]
fn change_of_variable_is_invariant_under_constants() {
    let path = make_fbm(0.8, 2, grid(1.0, 1024), 12).unwrap();
    let plain = BvMap::linear(vec![1.0, 0.5], 0.0);
    let shifted = BvMap::linear(vec![1.0, 0.5], 7.25);
    let a = change_of_variable_check(&plain, &path, 0.5, &no_witness()).unwrap();
    let b = change_of_variable_check(&shifted, &path, 0.5, &no_witness()).unwrap();
    assert!((a.sup - b.sup).abs() < 1e-12, "{} vs {}", a.sup, b.sup);
}

#[test]
fn change_of_variable_refuses_rough_paths() {
    let path = make_fbm(0.3, 2, grid(1.0, 1024), 13).unwrap();
    let map = BvMap::half_square(2).unwrap();
    assert!(matches!(
        change_of_variable_check(&map, &path, 0.5, &no_witness()),
        Err(Error::ExponentTooLow { .. })
    ));
}

#[test]
fn witness_order_is_the_midpoint() {
    assert_eq!(s_witness(0.8, 0.8), Some(0.5 * (0.25 + 1.0)));
    assert_eq!(s_witness(1.0, 1.0), Some(0.5));
    assert_eq!(s_witness(0.3, 0.3), None);
}

#[test]
fn config_validation() {
    assert!(SolveConfig::default().validate().is_ok());
    assert!(SolveConfig::scalar().with_spacing(-1.0).validate().is_err());
    let bad = SolveConfig {
        curl_eps_factor: 1.0,
        ..SolveConfig::default()
    };
    assert!(bad.validate().is_err());
    let entries: Vec<ScalarRef> = vec![Arc::new(Constant::new(1, 1.0))];
    let sigma = MatrixBv::new(1, entries, None, "one").unwrap();
    assert_eq!(sigma.entry(0, 0).evaluate(&[0.3]), 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn jump_line_maps_are_inverse(c in 1.1f64..5.0, y1 in -3.0f64..3.0, y2 in -3.0f64..3.0) {
        let maps = closed_form_maps(ClosedForm::JumpLine { c }).unwrap();
        let x = maps.f(&[y1, y2]).unwrap();
        let back = maps.g(&x).unwrap();
        prop_assert!(max_diff(&back, &[y1, y2]) <= 1e-12 * (1.0 + c) * (1.0 + y1.abs() + y2.abs()));
    }

    #[test]
    fn closed_form_maps_are_bi_lipschitz(y in proptest::collection::vec(-2.0f64..2.0, 4)) {
        let maps = closed_form_maps(JUMP).unwrap();
        let (a, b) = (&y[0..2], &y[2..4]);
        let fa = maps.f(a).unwrap();
        let fb = maps.f(b).unwrap();
        let d = |u: &[f64], v: &[f64]| ((u[0] - v[0]).powi(2) + (u[1] - v[1]).powi(2)).sqrt();
        prop_assert!(d(&fa, &fb) <= maps.lip_f() * d(a, b) * (1.0 + 1e-12) + 1e-12);
        prop_assert!(d(a, b) <= maps.lip_g() * d(&fa, &fb) * (1.0 + 1e-12) + 1e-12);
    }
}
