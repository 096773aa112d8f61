use pathwise::bv_library::cantor_left_endpoints;
use pathwise::grid_paths::{make_fbm, make_power_path, SampledPath, TimeGrid};
use pathwise::measures::{
    convolution_identity_check, energy_trading_check, fractional_maximal, local_time_density, mutual_energy,
    occupation_measure, riesz_convolution_1d, riesz_potential, upper_regularity_exponent, DiscreteMeasure,
    KernelPolicy,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cantor_measure(level: u32) -> DiscreteMeasure {
    let pts = cantor_left_endpoints(level);
    let w = 0.5f64.powi(level as i32);
    let n = pts.len();
    DiscreteMeasure::from_atoms(1, pts, vec![w; n]).unwrap()
}

fn random_measure(rng: &mut ChaCha8Rng, dim: usize, atoms: usize) -> DiscreteMeasure {
    let locs: Vec<f64> = (0..dim * atoms).map(|_| rng.random_range(-1.0..1.0)).collect();
    let ws: Vec<f64> = (0..atoms).map(|_| rng.random_range(0.0..1.0)).collect();
    DiscreteMeasure::from_atoms(dim, locs, ws).unwrap()
}

fn geometric(start: f64, ratio: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| start * ratio.powi(k as i32)).collect()
}

#[test]
fn occupation_of_constant_path_is_single_location() {
    let g = TimeGrid::new(2.5, 100).unwrap();
    let p = SampledPath::constant(g, &[0.3, -0.2]).unwrap();
    let mu = occupation_measure(&p);
    assert_eq!(mu.total_mass(), 2.5);
    assert!(mu.atoms().all(|(x, _)| x == [0.3, -0.2]));
    assert!((mu.weights().iter().sum::<f64>() - 2.5).abs() < 1e-12);
}

#[test]
fn occupation_of_unit_speed_segment_counts_arc_length() {
    let g = TimeGrid::new(1.0, 1 << 14).unwrap();
    let p = SampledPath::linear(g, &[0.0, 0.0], &[0.6, 0.8]).unwrap();
    let mu = occupation_measure(&p);
    for (t, r) in [(0.5, 0.1), (0.3, 0.05), (0.7, 0.2)] {
        let x = [0.6 * t, 0.8 * t];
        let m = mu.ball_mass(&x, r);
        assert!((m - 2.0 * r).abs() < 2.0 * g.dt(), "mass {m} vs {}", 2.0 * r);
    }
}

#[test]
fn riesz_potential_single_and_symmetric_atoms() {
    let mu = DiscreteMeasure::point_mass(&[0.0, 0.0], 1.0).unwrap();
    let v = riesz_potential(&mu, &KernelPolicy::new(0.5, 0.0), &[1.0, 0.0]).unwrap();
    assert!((v - 1.0).abs() < 1e-15);

    let two = DiscreteMeasure::from_atoms(2, vec![1.0, 0.0, -1.0, 0.0], vec![1.0, 1.0]).unwrap();
    let v = riesz_potential(&two, &KernelPolicy::new(1.0, 0.0), &[0.0, 0.0]).unwrap();
    assert!((v - 2.0).abs() < 1e-15);

    let at_atom = riesz_potential(&mu, &KernelPolicy::new(0.5, 0.0), &[0.0, 0.0]).unwrap();
    assert!(at_atom.is_infinite());
    assert!(riesz_potential(&mu, &KernelPolicy::new(2.0, 0.0), &[1.0, 0.0]).is_err());
}

#[test]
fn cantor_potential_is_stable_across_levels() {
    let policy = KernelPolicy::new(0.5, 0.0);
    let values: Vec<f64> = [6, 8, 10]
        .iter()
        .map(|&l| riesz_potential(&cantor_measure(l), &policy, &[0.5]).unwrap())
        .collect();
    for w in values.windows(2) {
        assert!((w[1] - w[0]).abs() / w[1] < 0.02, "{values:?}");
    }
}

#[test]
fn mutual_energy_of_unit_masses() {
    for gamma in [0.3, 1.0, 1.7] {
        let a = DiscreteMeasure::point_mass(&[0.0, 0.0], 1.0).unwrap();
        let b = DiscreteMeasure::point_mass(&[2.0, 0.0], 1.0).unwrap();
        let e = mutual_energy(&a, &b, &KernelPolicy::new(gamma, 0.0)).unwrap();
        assert!((e - 2f64.powf(gamma - 2.0)).abs() < 1e-14);
    }
}

#[test]
fn mutual_energy_is_exactly_symmetric_and_sums_potentials() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let policy = KernelPolicy::new(0.8, 1e-3);
    for _ in 0..10 {
        let mu = random_measure(&mut rng, 2, 100);
        let nu = random_measure(&mut rng, 2, 100);
        let a = mutual_energy(&mu, &nu, &policy).unwrap();
        let b = mutual_energy(&nu, &mu, &policy).unwrap();
        assert_eq!(a, b);
        let direct: f64 = nu
            .atoms()
            .map(|(y, w)| w * riesz_potential(&mu, &policy, y).unwrap())
            .sum();
        assert!((a - direct).abs() <= 1e-12 * a);
    }
}

#[test]
fn mutual_energy_satisfies_cauchy_schwarz() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let policy = KernelPolicy::new(1.2, 1e-2);
    for _ in 0..20 {
        let mu = random_measure(&mut rng, 2, 60);
        let nu = random_measure(&mut rng, 2, 60);
        let i_mn = mutual_energy(&mu, &nu, &policy).unwrap();
        let i_mm = mutual_energy(&mu, &mu, &policy).unwrap();
        let i_nn = mutual_energy(&nu, &nu, &policy).unwrap();
        assert!(i_mn * i_mn <= i_mm * i_nn * (1.0 + 1e-12));
    }
}

#[test]
fn fractional_maximal_basic_values() {
    let empty = DiscreteMeasure::empty(1);
    assert_eq!(fractional_maximal(&empty, 0.5, 2.0, &[0.0]).unwrap(), 0.0);
    let mu = DiscreteMeasure::point_mass(&[0.0], 1.0).unwrap();
    let v = fractional_maximal(&mu, 0.5, 2.0, &[1.0]).unwrap();
    assert!((v - 1.0).abs() < 1e-15);
}

#[test]
fn fractional_maximal_is_dominated_by_potential() {
    // r^(gamma-n) mu(B(x,r)) <= sum_{|y-x| <= r} w |x-y|^(gamma-n), so the
    // brute-force constant on the suite never exceeds one.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let dim = rng.random_range(1..=2);
        let gamma = rng.random_range(0.1..0.9);
        let mu = random_measure(&mut rng, dim, 40);
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let m = fractional_maximal(&mu, gamma, 4.0, &x).unwrap();
        let u = riesz_potential(&mu, &KernelPolicy::new(gamma, 0.0), &x).unwrap();
        worst = worst.max(m / u);
    }
    assert!(worst <= 1.0 + 1e-12, "effective constant {worst}");
}

#[test]
fn regularity_of_cantor_measure() {
    let est = upper_regularity_exponent(&cantor_measure(10), &geometric(1.0 / 9.0, 1.0 / 3.0, 6), 1).unwrap();
    let d_c = 2f64.ln() / 3f64.ln();
    assert!((est.exponent - d_c).abs() < 0.05, "{}", est.exponent);
}

#[test]
fn regularity_of_single_atom_is_zero() {
    let mu = DiscreteMeasure::point_mass(&[0.2, 0.4], 1.0).unwrap();
    let est = upper_regularity_exponent(&mu, &geometric(0.5, 0.5, 5), 1).unwrap();
    assert!(est.exponent.abs() < 1e-12);
    assert!(upper_regularity_exponent(&mu, &[0.1, 0.2], 1).is_err());
}

#[test]
fn regularity_of_segment_and_power_path() {
    let g = TimeGrid::new(1.0, 1 << 14).unwrap();
    let seg = occupation_measure(&SampledPath::linear(g, &[0.0, 0.0], &[1.0, 0.0]).unwrap());
    let est = upper_regularity_exponent(&seg, &geometric(0.1, 0.5, 6), 64).unwrap();
    assert!((est.exponent - 1.0).abs() < 0.1, "{}", est.exponent);

    let pw = occupation_measure(&make_power_path(0.5, g).unwrap());
    let est = upper_regularity_exponent(&pw, &geometric(0.1, 0.5, 6), 1).unwrap();
    assert!((est.exponent - 0.5).abs() < 0.1, "{}", est.exponent);
}

#[test]
fn power_path_occupation_of_initial_intervals() {
    let g = TimeGrid::new(1.0, 1 << 14).unwrap();
    let mu = occupation_measure(&make_power_path(0.5, g).unwrap());
    for r in [0.01, 0.04, 0.16, 0.64] {
        let mass: f64 = mu.atoms().filter(|(x, _)| x[0] < r).map(|(_, w)| w).sum();
        assert!((mass - r.sqrt()).abs() < 2.0 * g.dt());
    }
}

#[test]
fn local_time_density_of_simple_measures() {
    let g = TimeGrid::new(2.0, 1 << 12).unwrap();
    let seg = occupation_measure(&SampledPath::linear(g, &[0.0], &[0.5]).unwrap());
    let h = local_time_density(&seg, 0.125).unwrap();
    assert!((h.integral() - 2.0).abs() < 1e-9);
    for (_, d) in &h.bins {
        assert!((d - 2.0).abs() < 1e-9);
    }

    let atom = DiscreteMeasure::point_mass(&[0.3], 2.0).unwrap();
    let h = local_time_density(&atom, 0.1).unwrap();
    assert_eq!(h.bins.len(), 1);
    assert!((h.integral() - 2.0).abs() < 1e-12);
}

#[test]
fn brownian_local_time_is_bounded_under_refinement() {
    let g = TimeGrid::new(1.0, 1 << 14).unwrap();
    let mu = occupation_measure(&make_fbm(0.5, 1, g, 77).unwrap());
    let sups: Vec<f64> = [0.1, 0.05, 0.025, 0.0125]
        .iter()
        .map(|&c| local_time_density(&mu, c).unwrap().sup_density())
        .collect();
    for w in sups.windows(2) {
        assert!(w[1] / w[0] < 1.5, "{sups:?}");
    }
}

#[test]
fn riesz_convolution_scaling_law() {
    let check = convolution_identity_check(0.3, 0.3, 1.0, 2.0, 1e-10).unwrap();
    assert!(check.relative_error < 0.01, "{check:?}");
    let a = riesz_convolution_1d(0.3, 0.3, 1.0, 1e-10).unwrap();
    let b = riesz_convolution_1d(0.3, 0.3, 2.0, 1e-10).unwrap();
    assert!((b / a - 2f64.powf(-0.4)).abs() < 0.01 * 2f64.powf(-0.4));
    let c = riesz_convolution_1d(0.3, 0.3, -2.0, 1e-10).unwrap();
    assert_eq!(b, c);
    assert!(convolution_identity_check(0.6, 0.5, 1.0, 2.0, 1e-10).is_err());
}

#[test]
fn energy_trading_identity_on_small_atom_sets() {
    let mu = DiscreteMeasure::from_atoms(1, vec![0.0, 0.7, 1.3], vec![1.0, 0.5, 0.25]).unwrap();
    let nu = DiscreteMeasure::from_atoms(1, vec![0.35, 1.0], vec![0.6, 0.4]).unwrap();
    let s = 0.5;
    for gamma in [0.2 * (1.0 - s), 0.5 * (1.0 - s)] {
        let t = energy_trading_check(&mu, &nu, s, gamma, 1e-9).unwrap();
        assert!((t.ratio - 1.0).abs() < 1e-3, "gamma {gamma}: {t:?}");
    }
}

#[test]
fn measure_csv_has_weight_column() {
    let mu = DiscreteMeasure::from_atoms(2, vec![0.0, 1.0, 2.0, 3.0], vec![0.5, 0.25]).unwrap();
    let mut buf = Vec::new();
    mu.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("x1,x2,weight\n"));
    assert_eq!(text.lines().count(), 3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn occupation_mass_equals_horizon(seed in 0u64..1000, t in 0.1f64..10.0, n in 2usize..400, dim in 1usize..4) {
        let p = make_fbm(0.6, dim, TimeGrid::new(t, n).unwrap(), seed).unwrap();
        let mu = occupation_measure(&p);
        prop_assert_eq!(mu.total_mass(), t);
        prop_assert_eq!(mu.len(), n);
    }

    #[test]
    fn potential_nonincreasing_in_cap(seed in 0u64..1000, h1 in 0.0f64..0.5, dh in 0.0f64..0.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mu = random_measure(&mut rng, 2, 30);
        let x = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let a = riesz_potential(&mu, &KernelPolicy::new(1.3, h1), &x).unwrap();
        let b = riesz_potential(&mu, &KernelPolicy::new(1.3, h1 + dh), &x).unwrap();
        prop_assert!(b <= a);
    }

    #[test]
    fn energy_symmetry(seed in 0u64..1000, gamma in 0.05f64..1.95, h in 0.0f64..0.1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mu = random_measure(&mut rng, 2, 25);
        let nu = random_measure(&mut rng, 2, 17);
        let policy = KernelPolicy::new(gamma, h);
        prop_assert_eq!(mutual_energy(&mu, &nu, &policy).unwrap(), mutual_energy(&nu, &mu, &policy).unwrap());
    }
}
