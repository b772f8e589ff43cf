use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use coverage_lab::geometry::{cap_approx_volume, unit_ball_volume, Region};

fn region(kind: usize) -> Region {
    match kind {
        0 => Region::square(1.0).unwrap(),
        1 => Region::disk(1.0).unwrap(),
        2 => Region::ball(3, 1.0).unwrap(),
        3 => Region::torus(2, 1.0).unwrap(),
        4 => Region::polygon(vec![[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [1.0, 2.0], [0.0, 2.0]]).unwrap(),
        _ => Region::ball(4, 1.0).unwrap(),
    }
}

fn hit_fraction(region: &Region, x: &[f64], r: f64, samples: usize, rng: &mut ChaCha8Rng) -> f64 {
    let mut p = vec![0.0; x.len()];
    let (mut hits, mut drawn) = (0, 0);
    while drawn < samples {
        for (pi, xi) in p.iter_mut().zip(x) {
            *pi = xi + r * rng.random_range(-1.0..1.0);
        }
        if p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() > r * r {
            continue;
        }
        drawn += 1;
        if region.is_torus() || region.contains(&p) {
            hits += 1;
        }
    }
    hits as f64 / samples as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn samples_lie_in_region(kind in 0usize..6, seed: u64) {
        let a = region(kind);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..200 {
            let x = a.sample_uniform(&mut rng);
            prop_assert!(a.contains(&x));
        }
    }

    #[test]
    fn ball_volume_bounds_and_monotone(kind in 0usize..6, seed: u64, r in 0.01f64..0.45) {
        let a = region(kind);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = a.sample_uniform(&mut rng);
        let full = unit_ball_volume(a.dim()).unwrap() * r.powi(a.dim() as i32);
        let v = a.ball_intersection_volume(&x, r).unwrap();
        prop_assert!(v > 0.0 && v <= full * (1.0 + 1e-12));
        let v2 = a.ball_intersection_volume(&x, 1.1 * r).unwrap();
        prop_assert!(v2 >= v);
        if a.is_torus() || a.distance_to_boundary(&x).unwrap() >= r {
            prop_assert!((v - full).abs() <= 1e-12 * full);
        }
    }

    #[test]
    fn ball_volume_matches_sampling(kind in 0usize..6, seed: u64, r in 0.05f64..0.5) {
        let a = region(kind);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = a.sample_uniform(&mut rng);
        let full = unit_ball_volume(a.dim()).unwrap() * r.powi(a.dim() as i32);
        let exact = a.ball_intersection_volume(&x, r).unwrap() / full;
        let n = 200_000;
        let est = hit_fraction(&a, &x, r, n, &mut rng);
        let se = (exact * (1.0 - exact) / n as f64).sqrt();
        prop_assert!((est - exact).abs() <= 5.0 * se + 1e-12, "exact {} est {} se {}", exact, est, se);
    }

    #[test]
    fn cap_approximation_error_bound(kind in 0usize..2, seed: u64, r in 1e-3f64..0.1) {
        let a = if kind == 0 { Region::disk(1.0).unwrap() } else { Region::ball(3, 1.0).unwrap() };
        let d = a.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = rng.random_range(0.0..r);
        let mut x = vec![0.0; d];
        x[0] = 1.0 - dist;
        let exact = a.ball_intersection_volume(&x, r).unwrap();
        let approx = cap_approx_volume(dist, r, d).unwrap();
        let bound = 2.0 * unit_ball_volume(d - 1).unwrap() * r.powi(d as i32 + 1) / a.reach();
        prop_assert!((exact - approx).abs() <= bound);
    }
}
