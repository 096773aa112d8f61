use std::sync::Arc;

use pathwise::bv_library::{
    cantor_coefficient, cantor_function, indicator_domain, lipschitz_wrap, Constant, Domain, HalfSpace, Region,
    ScalarBv,
};
use pathwise::error::Error;
use pathwise::grid_paths::{make_fbm, GridFunction, SampledPath, TimeGrid};
use pathwise::measures::{mutual_energy, occupation_measure, KernelPolicy};
use pathwise::numerics::median;
use pathwise::variability::{
    classify, composition_bound_check, compose, fbm_energy_bound, gagliardo_seminorm, lp_norm, meanvalue_check,
    moment_condition_check, variability_statistic, VariabilityParams, Verdict,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grid(n: usize) -> TimeGrid {
    TimeGrid::new(1.0, n).unwrap()
}

fn d_cantor() -> f64 {
    2f64.ln() / 3f64.ln()
}

#[test]
fn statistic_of_distant_constant_path_obeys_kernel_bound() {
    let phi = cantor_coefficient(2).unwrap();
    let x = [2.0, 0.5];
    let path = SampledPath::constant(grid(64), &x).unwrap();
    let params = VariabilityParams::new(0.5, 1.0).with_margin(1.5);
    let v = variability_statistic(&path, &phi, &params, 6).unwrap();
    let first = v.value(0);
    assert!(v.values().iter().all(|&u| u == first));
    let region = Region::around_path(&path, 1.5);
    let mass = phi.gradient_measure(&region, 6).unwrap().measure.total_mass();
    // Distance from x to the support [0,1] x R is 1.
    let r: f64 = 1.0;
    assert!(first <= mass * r.powf(1.0 - 0.5 - 2.0) + 1e-12);
}

#[test]
fn cantor_dichotomy_for_constant_paths() {
    let phi = cantor_coefficient(2).unwrap();
    let s = 0.8;
    assert!(s > d_cantor());
    let params = VariabilityParams::new(s, 1.0);
    let at_origin = SampledPath::constant(grid(16), &[0.0, 0.0]).unwrap();
    let report = classify(&at_origin, &phi, &params).unwrap();
    assert_eq!(report.verdict, Verdict::Diverging, "{report:?}");
    let in_gap = SampledPath::constant(grid(16), &[0.5, 0.0]).unwrap();
    let report = classify(&in_gap, &phi, &params).unwrap();
    assert_eq!(report.verdict, Verdict::Finite, "{report:?}");
}

#[test]
fn vertical_segment_on_cantor_point_diverges() {
    let phi = cantor_coefficient(2).unwrap();
    let seg = SampledPath::linear(grid(1024), &[1.0 / 3.0, 0.0], &[0.0, 1.0]).unwrap();
    let report = classify(&seg, &phi, &VariabilityParams::new(0.8, 1.0)).unwrap();
    assert_eq!(report.verdict, Verdict::Diverging, "{report:?}");
}

#[test]
fn lipschitz_coefficient_is_always_finite() {
    let phi = lipschitz_wrap(2, Arc::new(|x: &[f64]| x[0].sin() * x[1].cos()), 1.0).unwrap();
    for seed in 0..3 {
        let p = make_fbm(0.6, 2, grid(1024), seed).unwrap();
        let params = VariabilityParams::new(0.5, f64::INFINITY).with_levels(vec![4, 5, 6]);
        let report = classify(&p, &phi, &params).unwrap();
        assert_eq!(report.verdict, Verdict::Finite, "{report:?}");
        assert!(report.growth_exponent.abs() < report.threshold, "{report:?}");
    }
}

#[test]
fn fbm_against_disk_indicator_has_bounded_l1_norm() {
    let disk = indicator_domain(Domain::Disk {
        center: [0.0, 0.0],
        radius: 0.3,
    })
    .unwrap();
    // n - 1 + s = 1.4 < 1/H = 1.43.
    let params = VariabilityParams::new(0.4, 1.0);
    let mut finite = 0;
    for seed in 0..20 {
        let p = make_fbm(0.7, 2, grid(2048), seed).unwrap();
        let report = classify(&p, &disk, &params).unwrap();
        if report.verdict == Verdict::Finite {
            finite += 1;
        }
        assert_ne!(report.verdict, Verdict::Diverging, "seed {seed}: {report:?}");
    }
    assert!(finite >= 18);
}

#[test]
fn l1_norm_equals_mutual_energy() {
    let phi = cantor_coefficient(2).unwrap();
    let p = make_fbm(0.7, 2, grid(256), 3).unwrap();
    let params = VariabilityParams::new(0.6, 1.0)
        .with_levels(vec![5, 7])
        .with_energy_crosscheck(true);
    let report = classify(&p, &phi, &params).unwrap();
    assert!(report.energy_crosscheck.unwrap() < 1e-9);

    // The same identity computed here from the public pieces.
    let level = params.levels[0];
    let v = variability_statistic(&p, &phi, &params, level).unwrap();
    let gm = phi.gradient_measure(&report.region, level).unwrap();
    let occ = occupation_measure(&p);
    let energy = mutual_energy(&gm.measure, &occ, &KernelPolicy::new(1.0 - params.s, gm.scale)).unwrap();
    let l1 = lp_norm(&v, 1.0);
    assert!((l1 - energy).abs() <= 1e-9 * energy);
}

#[test]
fn verdicts_are_monotone_in_p() {
    let phi = cantor_coefficient(2).unwrap();
    for (x, s) in [([0.5, 0.0], 0.8), ([0.25, 0.0], 0.5)] {
        let p = SampledPath::linear(grid(256), &x, &[0.05, 0.3]).unwrap();
        let strong = classify(&p, &phi, &VariabilityParams::new(s, f64::INFINITY)).unwrap();
        if strong.verdict == Verdict::Finite {
            let weak = classify(&p, &phi, &VariabilityParams::new(s, 1.0)).unwrap();
            assert_eq!(weak.verdict, Verdict::Finite);
        }
    }
}

#[test]
fn statistic_is_monotone_in_s_on_unit_box() {
    let phi = cantor_coefficient(2).unwrap();
    let p = SampledPath::linear(grid(128), &[0.1, 0.1], &[0.5, 0.3]).unwrap();
    // Margin 0.05 keeps every atom within distance 1 of the path, so
    // |x - y|^(1 - s - n) grows with s.
    let mut previous: Option<GridFunction> = None;
    for s in [0.2, 0.4, 0.6, 0.8] {
        let v = variability_statistic(&p, &phi, &VariabilityParams::new(s, 1.0), 6).unwrap();
        if let Some(prev) = &previous {
            assert!(v.values().iter().zip(prev.values()).all(|(a, b)| a >= b));
        }
        previous = Some(v);
    }
}

#[test]
fn compose_examples() {
    let g = grid(300);
    let p = make_fbm(0.6, 2, g, 1).unwrap();
    let c = compose(&Constant::new(2, 1.7), &p).unwrap();
    assert!(c.values().iter().all(|&v| v == 1.7));

    let disk = indicator_domain(Domain::Disk {
        center: [0.0, 0.0],
        radius: 10.0,
    })
    .unwrap();
    assert!(compose(&disk, &p).unwrap().values().iter().all(|&v| v == 1.0));

    let lin = SampledPath::linear(g, &[0.0, 0.0], &[1.0, 0.0]).unwrap();
    let cantor = compose(&cantor_coefficient(2).unwrap(), &lin).unwrap();
    for (i, w) in cantor.values().windows(2).enumerate() {
        assert!(w[1] >= w[0]);
        assert_eq!(w[0], cantor_function(g.time(i)));
    }
}

#[test]
fn gagliardo_of_identity_matches_closed_form() {
    let f = GridFunction::from_fn(grid(1 << 12), |t| t);
    let v = gagliardo_seminorm(&f, 0.5, 1.0).unwrap();
    let exact = 2.0 / (0.5 * 1.5);
    assert!((v - exact).abs() / exact < 0.02, "{v} vs {exact}");
    let c = GridFunction::constant(grid(64), 4.0);
    assert_eq!(gagliardo_seminorm(&c, 0.3, 2.0).unwrap(), 0.0);
}

#[test]
fn composition_bound_for_constant_and_lipschitz() {
    let p = make_fbm(0.7, 1, grid(1024), 2).unwrap();
    let params = VariabilityParams::new(0.5, 1.0);
    let b = composition_bound_check(&Constant::new(1, 3.0), &p, &params, 0.2).unwrap();
    assert_eq!(b.lhs, 0.0);
    assert!(b.rhs >= 0.0);

    let phi = lipschitz_wrap(1, Arc::new(|x: &[f64]| x[0].sin()), 1.0).unwrap();
    let ratios: Vec<f64> = [1 << 10, 1 << 12, 1 << 14]
        .iter()
        .map(|&n| {
            let lin = SampledPath::linear(grid(n), &[0.0], &[1.0]).unwrap();
            composition_bound_check(&phi, &lin, &params, 0.3).unwrap().ratio
        })
        .collect();
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
    assert!(hi / lo < 2.0, "{ratios:?}");
}

#[test]
fn composition_bound_for_step_is_bounded_across_seeds() {
    let step = HalfSpace::new(vec![1.0], 0.5).unwrap();
    let params = VariabilityParams::new(0.4, 1.0);
    let mut ratios = Vec::new();
    for seed in 0..20 {
        let p = make_fbm(0.8, 1, grid(2048), 100 + seed).unwrap();
        match composition_bound_check(&step, &p, &params, 0.25) {
            Ok(b) => ratios.push(b.ratio),
            Err(Error::NotVariable { .. }) => {}
            Err(e) => panic!("{e}"),
        }
    }
    assert!(ratios.len() >= 15);
    assert!(ratios.iter().all(|r| r.is_finite()));
    // Paths that never reach the step give lhs = 0; the others share one
    // constant up to a small factor.
    let positive: Vec<f64> = ratios.iter().copied().filter(|r| *r > 0.0).collect();
    assert!(positive.len() >= 5);
    let m = median(&positive);
    assert!(positive.iter().all(|r| *r < 3.0 * m), "{ratios:?}");
}

#[test]
fn composition_bound_refuses_diverging_variability() {
    let phi = cantor_coefficient(2).unwrap();
    let seg = SampledPath::linear(grid(512), &[1.0 / 3.0, 0.0], &[0.0, 1.0]).unwrap();
    let r = composition_bound_check(&phi, &seg, &VariabilityParams::new(0.8, 1.0), 0.1);
    assert!(matches!(r, Err(Error::NotVariable { .. })));
}

#[test]
fn mean_value_examples() {
    let phi = lipschitz_wrap(2, Arc::new(|x: &[f64]| x[0]), 1.0).unwrap();
    let m = meanvalue_check(&phi, &[0.3, 0.3], &[0.3, 0.3], 0.5, 6).unwrap();
    assert_eq!((m.lhs, m.rhs), (0.0, 0.0));
    let m = meanvalue_check(&phi, &[0.3, 0.3], &[0.4, 0.3], 0.5, 7).unwrap();
    assert!((m.lhs - 0.1).abs() < 1e-12);
    assert!(m.rhs > 0.0 && m.lhs <= 10.0 * m.rhs);
}

#[test]
fn mean_value_constant_is_stable_for_cantor() {
    let phi = cantor_coefficient(1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut ratios = Vec::new();
    while ratios.len() < 100 {
        let x: f64 = rng.random_range(0.0..1.0);
        let y: f64 = rng.random_range(0.0..1.0);
        let m = meanvalue_check(&phi, &[x], &[y], 0.5, 10).unwrap();
        if m.lhs > 0.0 {
            ratios.push(m.lhs / m.rhs);
        }
    }
    let c = ratios.iter().copied().fold(0.0, f64::max);
    assert!(c.is_finite() && c < 10.0, "calibrated constant {c}");
    // Pairs straddling the middle gap obey the same constant.
    for (x, y) in [(0.2, 0.8), (0.3, 0.7), (0.1, 0.9)] {
        let m = meanvalue_check(&phi, &[x], &[y], 0.5, 10).unwrap();
        assert!(m.lhs <= c * m.rhs * (1.0 + 1e-9));
    }
}

#[test]
fn fbm_energy_far_from_range() {
    let r = fbm_energy_bound(0.5, 2, 0.5, &[50.0, 0.0], 20, grid(512), 0).unwrap();
    let expected = 50f64.powf(-1.5);
    assert!((r.mean - expected).abs() / expected < 0.05, "{r:?}");
}

#[test]
fn fbm_energy_phase_condition() {
    let holds = fbm_energy_bound(0.5, 2, 0.5, &[0.0, 0.0], 20, grid(1 << 12), 1).unwrap();
    assert!(!holds.diverging, "{holds:?}");
    let fails = fbm_energy_bound(0.9, 2, 0.5, &[0.0, 0.0], 20, grid(1 << 12), 1).unwrap();
    assert!(fails.diverging, "{fails:?}");
    assert!(fbm_energy_bound(0.5, 2, 0.5, &[0.0, 0.0], 5, grid(64), 1).is_err());
}

#[test]
fn moment_condition_examples() {
    let phi = cantor_coefficient(2).unwrap();
    let far = moment_condition_check(&phi, &[3.0, 0.0], -0.5, 1.0, &[6, 8]).unwrap();
    assert_eq!(far.value, 0.0);

    let gap = moment_condition_check(&phi, &[0.5, 0.0], -1.5, 1.0, &[6, 8, 10]).unwrap();
    assert!(!gap.diverging && gap.value.is_finite() && gap.value > 0.0, "{gap:?}");
    let region = Region::new(vec![-0.5, -1.0], vec![1.5, 1.0]).unwrap();
    let mass = phi.gradient_measure(&region, 10).unwrap().measure.total_mass();
    assert!(gap.value <= mass * (1.0f64 / 6.0).powf(-1.5) * (1.0 + 1e-9));

    let disk = indicator_domain(Domain::Disk {
        center: [0.0, 0.0],
        radius: 0.5,
    })
    .unwrap();
    let (h, s) = (0.75, 0.5);
    let exponent = -2.0 + 1.0 - s + 1.0 / h;
    let on_boundary = moment_condition_check(&disk, &[0.5, 0.0], exponent, 1.0, &[6, 8, 10]).unwrap();
    assert!(!on_boundary.diverging, "{on_boundary:?}");
}

#[test]
fn params_validation() {
    assert!(VariabilityParams::new(0.0, 1.0).validate().is_err());
    assert!(VariabilityParams::new(0.5, 0.5).validate().is_err());
    assert!(VariabilityParams::new(0.5, 1.0).with_levels(vec![6]).validate().is_err());
    assert!(VariabilityParams::new(0.5, f64::INFINITY).validate().is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn gagliardo_is_homogeneous(seed in 0u64..1000, lambda in -10.0f64..10.0, theta in 0.05f64..0.95) {
        let p = make_fbm(0.7, 1, grid(128), seed).unwrap();
        let f = p.coordinate(0);
        let a = gagliardo_seminorm(&f, theta, 1.0).unwrap();
        let b = gagliardo_seminorm(&f.map(|v| lambda * v), theta, 1.0).unwrap();
        prop_assert!((b - lambda.abs() * a).abs() <= 1e-12 * b.max(1e-300));
    }

    #[test]
    fn compose_respects_sup_bound(seed in 0u64..1000, h in 0.3f64..0.9) {
        let p = make_fbm(h, 2, grid(256), seed).unwrap();
        let phi = cantor_coefficient(2).unwrap();
        let v = compose(&phi, &p).unwrap();
        prop_assert!(v.sup_norm() <= phi.sup_bound().unwrap());
    }
}
