use proptest::prelude::*;

use coverage_lab::geometry::{DomainPair, Region};
use coverage_lab::knn::{build_index, coverage_threshold_points};
use coverage_lab::sampler::{sample_binomial, PointSet};

fn region(kind: usize, scale: f64) -> Region {
    match kind {
        0 => Region::square(scale).unwrap(),
        1 => Region::disk(scale).unwrap(),
        2 => Region::ball(3, scale).unwrap(),
        3 => Region::torus(2, scale).unwrap(),
        4 => Region::torus(3, scale).unwrap(),
        _ => Region::polygon(vec![[0.0, 0.0], [scale, 0.0], [0.4 * scale, scale]]).unwrap(),
    }
}

fn brute(xs: &PointSet, ys: &PointSet, k: usize, side: Option<f64>) -> f64 {
    if xs.len() < k {
        return f64::INFINITY;
    }
    let mut worst = 0.0f64;
    for y in ys.iter() {
        let mut d: Vec<f64> = xs
            .iter()
            .map(|x| {
                x.iter()
                    .zip(y)
                    .map(|(a, b)| {
                        let t = (a - b).abs();
                        let t = side.map_or(t, |s| t.min(s - t));
                        t * t
                    })
                    .sum::<f64>()
            })
            .collect();
        d.sort_by(f64::total_cmp);
        worst = worst.max(d[k - 1]);
    }
    worst.sqrt()
}

fn union(a: &PointSet, b: &PointSet) -> PointSet {
    let mut out = a.clone();
    for p in b.iter() {
        out.push(p).unwrap();
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn matches_brute_force(kind in 0usize..6, n in 1u64..300, m in 1u64..150, k in 1usize..6, seed: u64) {
        let a = region(kind, 1.0);
        let p = sample_binomial(&DomainPair::same(a.clone()), n, m, seed).unwrap();
        let side = a.is_torus().then(|| a.side().unwrap());
        let fast = coverage_threshold_points(&p.xs, &p.ys, &a, k).unwrap();
        prop_assert_eq!(fast.to_bits(), brute(&p.xs, &p.ys, k, side).to_bits());
    }

    #[test]
    fn nondecreasing_in_k(kind in 0usize..6, n in 8u64..300, m in 1u64..150, seed: u64) {
        let a = region(kind, 1.0);
        let p = sample_binomial(&DomainPair::same(a.clone()), n, m, seed).unwrap();
        let mut prev = 0.0;
        for k in 1..=6 {
            let r = coverage_threshold_points(&p.xs, &p.ys, &a, k).unwrap();
            prop_assert!(r >= prev);
            prev = r;
        }
    }

    #[test]
    fn more_sources_never_raise_the_threshold(kind in 0usize..6, n in 1u64..200, extra in 1u64..200, m in 1u64..100, k in 1usize..4, seed: u64) {
        let a = region(kind, 1.0);
        let pair = DomainPair::same(a.clone());
        let p = sample_binomial(&pair, n, m, seed).unwrap();
        let q = sample_binomial(&pair, extra, 1, seed ^ 0x5555).unwrap();
        let r = coverage_threshold_points(&p.xs, &p.ys, &a, k).unwrap();
        let bigger = union(&p.xs, &q.xs);
        prop_assert!(coverage_threshold_points(&bigger, &p.ys, &a, k).unwrap() <= r);
        let more_targets = union(&p.ys, &q.xs);
        prop_assert!(coverage_threshold_points(&p.xs, &more_targets, &a, k).unwrap() >= r);
    }

    #[test]
    fn scales_with_the_domain(kind in 0usize..6, n in 5u64..300, m in 1u64..150, k in 1usize..5, seed: u64) {
        let lambda = 2.5;
        let a = region(kind, 1.0);
        let p = sample_binomial(&DomainPair::same(a.clone()), n, m, seed).unwrap();
        let r = coverage_threshold_points(&p.xs, &p.ys, &a, k).unwrap();
        let big = region(kind, lambda);
        let rs = coverage_threshold_points(&p.xs.scaled(lambda), &p.ys.scaled(lambda), &big, k).unwrap();
        prop_assert!((rs - lambda * r).abs() <= 1e-12 * lambda * r);
    }

    #[test]
    fn threshold_is_the_smallest_covering_radius(kind in 0usize..6, n in 5u64..300, m in 1u64..150, k in 1usize..5, seed: u64) {
        let a = region(kind, 1.0);
        let p = sample_binomial(&DomainPair::same(a.clone()), n, m, seed).unwrap();
        let r = coverage_threshold_points(&p.xs, &p.ys, &a, k).unwrap();
        let index = build_index(&p.xs, &a).unwrap();
        let below = r * (1.0 - 1e-9);
        let mut tight = false;
        for y in p.ys.iter() {
            prop_assert!(index.count_in_ball(y, r).unwrap() >= k);
            tight |= index.count_in_ball(y, below).unwrap() < k;
        }
        prop_assert!(tight);
    }
}

#[test]
fn conventions() {
    let a = Region::square(1.0).unwrap();
    let xs = PointSet::from_points(2, &[[0.5, 0.5]]).unwrap();
    let ys = PointSet::from_points(2, &[[0.1, 0.1]]).unwrap();
    assert_eq!(coverage_threshold_points(&xs, &ys, &a, 2).unwrap(), f64::INFINITY);
    assert_eq!(coverage_threshold_points(&xs, &PointSet::new(2), &a, 1).unwrap(), 0.0);
    assert!(coverage_threshold_points(&xs, &ys, &a, 0).is_err());
}
