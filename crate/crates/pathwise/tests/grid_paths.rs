use pathwise::grid_paths::{
    apply_map, estimate_holder, fbm_covariance, make_fbm, make_fbm_with_method, make_power_path, FbmMethod,
    SampledPath, TimeGrid,
};
use pathwise::numerics::median;
use proptest::prelude::*;

fn grid(t: f64, n: usize) -> TimeGrid {
    TimeGrid::new(t, n).unwrap()
}

#[test]
fn time_grid_endpoints_and_spacing() {
    let g = grid(2.0, 8);
    assert_eq!(g.time(0), 0.0);
    assert_eq!(g.time(8), 2.0);
    assert!((g.dt() - 0.25).abs() < 1e-15);
    assert_eq!(g.len(), 9);
    assert!(TimeGrid::new(1.0, 1).is_err());
    assert!(TimeGrid::new(0.0, 4).is_err());
}

#[test]
fn brownian_increment_variance_matches_dt() {
    let g = grid(1.0, 4096);
    let dt = g.dt();
    let seeds = 200;
    let per_seed: Vec<f64> = (0..seeds)
        .map(|seed| {
            let p = make_fbm(0.5, 1, g, seed).unwrap();
            let v = p.values();
            v.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>() / 4096.0
        })
        .collect();
    let mean = per_seed.iter().sum::<f64>() / seeds as f64;
    // Each per-seed mean of squared Gaussian increments has standard
    // deviation dt * sqrt(2 / 4096).
    let band = 3.0 * dt * (2.0 / 4096.0f64).sqrt() / (seeds as f64).sqrt();
    assert!((mean - dt).abs() < band, "mean {mean} vs dt {dt} band {band}");
}

#[test]
fn fbm_starts_at_origin_for_small_grids() {
    for h in [0.1, 0.5, 0.9] {
        let (p, method) = make_fbm_with_method(h, 3, grid(1.0, 2), 11).unwrap();
        assert_eq!(method, FbmMethod::Cholesky);
        assert_eq!(p.point(0), &[0.0, 0.0, 0.0]);
    }
}

#[test]
fn fbm_large_grid_uses_circulant_embedding() {
    let (_, method) = make_fbm_with_method(0.7, 1, grid(1.0, 1024), 1).unwrap();
    assert_eq!(method, FbmMethod::CirculantEmbedding);
}

#[test]
fn fbm_is_bit_reproducible() {
    let g = grid(1.0, 512);
    let a = make_fbm(0.65, 2, g, 42).unwrap();
    let b = make_fbm(0.65, 2, g, 42).unwrap();
    let c = make_fbm(0.65, 2, g, 43).unwrap();
    assert_eq!(a.values(), b.values());
    assert_ne!(a.values(), c.values());
}

#[test]
fn fbm_rejects_invalid_hurst() {
    assert!(make_fbm(0.0, 1, grid(1.0, 16), 0).is_err());
    assert!(make_fbm(1.0, 1, grid(1.0, 16), 0).is_err());
}

#[test]
fn fbm_covariance_matches_closed_form() {
    let g = grid(1.0, 256);
    let seeds = 400u64;
    let pairs = [(32, 64), (64, 64), (100, 200), (16, 256), (128, 192)];
    let samples: Vec<SampledPath> = (0..seeds).map(|s| make_fbm(0.7, 1, g, 1000 + s).unwrap()).collect();
    for (i, j) in pairs {
        let products: Vec<f64> = samples.iter().map(|p| p.values()[i] * p.values()[j]).collect();
        let mean = products.iter().sum::<f64>() / seeds as f64;
        let var = products.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (seeds as f64 - 1.0);
        let se = (var / seeds as f64).sqrt();
        let exact = fbm_covariance(0.7, g.time(i), g.time(j));
        assert!((mean - exact).abs() < 4.0 * se, "pair ({i},{j}): {mean} vs {exact} (se {se})");
    }
}

#[test]
fn fbm_holder_exponent_is_slightly_below_hurst() {
    let g = grid(1.0, 1 << 14);
    let est: Vec<f64> = (0..5)
        .map(|seed| estimate_holder(&make_fbm(0.75, 1, g, seed).unwrap()).unwrap().exponent)
        .collect();
    let m = median(&est);
    assert!((0.70..=0.75).contains(&m), "median exponent {m}");
}

#[test]
fn fbm_holder_exponent_median_over_seeds() {
    let g = grid(1.0, 1 << 14);
    let est: Vec<f64> = (0..50)
        .map(|seed| estimate_holder(&make_fbm(0.6, 1, g, 500 + seed).unwrap()).unwrap().exponent)
        .collect();
    let m = median(&est);
    assert!((m - 0.6).abs() < 0.05, "median exponent {m}");
}

#[test]
fn power_path_values() {
    let g = grid(2.0, 64);
    let id = make_power_path(1.0, g).unwrap();
    for (i, p) in id.points().enumerate() {
        assert!((p[0] - g.time(i)).abs() < 1e-15);
    }
    let sq = make_power_path(0.5, g).unwrap();
    assert!((sq.point(64)[0] - 4.0).abs() < 1e-12);
    assert!(make_power_path(0.0, g).is_err());
    assert!(make_power_path(1.5, g).is_err());
}

#[test]
fn holder_of_linear_and_constant_paths() {
    let g = grid(1.0, 1024);
    let lin = SampledPath::linear(g, &[0.0], &[3.0]).unwrap();
    let e = estimate_holder(&lin).unwrap();
    assert!((e.exponent - 1.0).abs() < 1e-6);
    assert!((e.seminorm - 3.0).abs() < 1e-6);
    assert!(!e.degenerate);

    let c = SampledPath::constant(g, &[1.0, 2.0]).unwrap();
    let e = estimate_holder(&c).unwrap();
    assert!(e.degenerate);
    assert_eq!(e.exponent, 1.0);
    assert_eq!(e.seminorm, 0.0);
}

#[test]
fn holder_requires_four_steps() {
    let p = SampledPath::linear(grid(1.0, 2), &[0.0], &[1.0]).unwrap();
    assert!(estimate_holder(&p).is_err());
}

#[test]
fn apply_map_identity_and_shift() {
    let p = make_fbm(0.6, 2, grid(1.0, 128), 3).unwrap();
    let id = apply_map(&p, |x| Ok(x.to_vec())).unwrap();
    assert_eq!(id.values(), p.values());
    let shifted = apply_map(&p, |x| Ok(vec![x[0] + 1.5, x[1] - 2.0])).unwrap();
    for (a, b) in p.points().zip(shifted.points()) {
        assert_eq!(b[0], a[0] + 1.5);
        assert_eq!(b[1], a[1] - 2.0);
    }
    assert_eq!(shifted.grid(), p.grid());
}

#[test]
fn apply_map_names_failing_index() {
    let p = SampledPath::linear(grid(1.0, 10), &[0.0], &[1.0]).unwrap();
    let err = apply_map(&p, |x| if x[0] > 0.55 { Err("out of domain".into()) } else { Ok(x.to_vec()) });
    match err {
        Err(pathwise::error::Error::MapUndefined { index, .. }) => assert_eq!(index, 6),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn lipschitz_image_has_controlled_seminorm() {
    let p = make_fbm(0.7, 1, grid(1.0, 4096), 9).unwrap();
    let est = estimate_holder(&p).unwrap();
    let image = apply_map(&p, |x| Ok(vec![2.0 * x[0].sin()])).unwrap();
    // Direct pairwise check of |f(x) - f(y)| <= 2 |x - y| at dyadic lags.
    let v = p.values();
    let w = image.values();
    let mut lag = 1;
    while lag < v.len() {
        for i in 0..v.len() - lag {
            assert!((w[i + lag] - w[i]).abs() <= 2.0 * (v[i + lag] - v[i]).abs() * (1.0 + 1e-12));
        }
        lag *= 2;
    }
    let alpha = est.exponent;
    let dt = p.grid().dt();
    let mut image_semi: f64 = 0.0;
    let mut lag = 1;
    while lag < v.len() {
        let h = (lag as f64 * dt).powf(alpha);
        for i in 0..v.len() - lag {
            image_semi = image_semi.max((w[i + lag] - w[i]).abs() / h);
        }
        lag *= 2;
    }
    assert!(image_semi <= 2.0 * est.seminorm * (1.0 + 1e-9));
}

#[test]
fn csv_roundtrip_preserves_values() {
    let p = make_fbm(0.55, 2, grid(1.5, 64), 4).unwrap();
    let mut buf = Vec::new();
    p.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("t,x1,x2\n"));
    let back = SampledPath::read_csv(buf.as_slice()).unwrap();
    assert_eq!(back.values(), p.values());
    assert_eq!(back.grid(), p.grid());
}

#[test]
fn subsample_keeps_every_stride_point() {
    let p = make_fbm(0.55, 1, grid(1.0, 64), 4).unwrap();
    let q = p.subsample(4).unwrap();
    assert_eq!(q.grid().steps(), 16);
    for i in 0..=16 {
        assert_eq!(q.point(i), p.point(4 * i));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn holder_scales_linearly(seed in 0u64..1000, lambda in -5.0f64..5.0) {
        prop_assume!(lambda.abs() > 1e-3);
        let p = make_fbm(0.65, 1, grid(1.0, 512), seed).unwrap();
        let scaled = apply_map(&p, |x| Ok(vec![lambda * x[0]])).unwrap();
        let a = estimate_holder(&p).unwrap();
        let b = estimate_holder(&scaled).unwrap();
        prop_assert!((a.exponent - b.exponent).abs() < 1e-9);
        prop_assert!((b.seminorm - lambda.abs() * a.seminorm).abs() <= 1e-9 * b.seminorm.max(1.0));
    }

    #[test]
    fn generated_paths_start_at_origin(seed in 0u64..10_000, h in 0.05f64..0.95, dim in 1usize..4, n in 2usize..600) {
        let p = make_fbm(h, dim, grid(1.0, n), seed).unwrap();
        prop_assert!(p.point(0).iter().all(|v| *v == 0.0));
        prop_assert!(p.values().iter().all(|v| v.is_finite()));
    }
}
