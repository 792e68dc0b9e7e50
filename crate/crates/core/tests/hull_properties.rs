use proptest::prelude::*;
use rand::Rng;

use forest_transfer::hull::CalibrationEnvelope;
use forest_transfer::model::Standardizer;
use forest_transfer::rng::stream_rng;

fn names(d: usize) -> Vec<String> {
    (0..d).map(|k| format!("x{k}")).collect()
}

fn identity(points: &[Vec<f64>]) -> CalibrationEnvelope {
    CalibrationEnvelope::from_raw_points(Standardizer::identity(names(points[0].len())), points).unwrap()
}

fn standardized(points: &[Vec<f64>]) -> CalibrationEnvelope {
    let d = points[0].len();
    let cols: Vec<Vec<f64>> = (0..d).map(|k| points.iter().map(|p| p[k]).collect()).collect();
    let s = Standardizer::fit_columns(names(d), &cols).unwrap();
    CalibrationEnvelope::from_raw_points(s, points).unwrap()
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Counter-clockwise hull by the monotone chain.
fn monotone_chain(mut pts: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let mut hull: Vec<[f64; 2]> = Vec::new();
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

fn polygon_margin(poly: &[[f64; 2]], q: [f64; 2]) -> f64 {
    (0..poly.len())
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
            cross(a, b, q) / (b[0] - a[0]).hypot(b[1] - a[1])
        })
        .fold(f64::INFINITY, f64::min)
}

fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    (0..poly.len())
        .map(|i| cross([0.0, 0.0], poly[i], poly[(i + 1) % poly.len()]))
        .sum::<f64>()
        / 2.0
}

#[test]
fn unit_square_cloud_matches_monotone_chain_and_area() {
    let mut rng = stream_rng(21, 0);
    for _ in 0..5 {
        let pts: Vec<[f64; 2]> = (0..30).map(|_| [rng.gen::<f64>(), rng.gen::<f64>()]).collect();
        let poly = monotone_chain(pts.clone());
        let env = identity(&pts.iter().map(|p| p.to_vec()).collect::<Vec<_>>());
        let n = 20_000;
        let mut inside = 0;
        for _ in 0..n {
            let q = [rng.gen_range(-0.5..1.5), rng.gen_range(-0.5..1.5)];
            let got = env.in_hull(&q).unwrap();
            let margin = polygon_margin(&poly, q);
            if margin.abs() > 1e-9 {
                assert_eq!(got, margin > 0.0, "query {q:?}");
            }
            inside += usize::from(got);
        }
        let estimate = 4.0 * inside as f64 / n as f64;
        let area = polygon_area(&poly);
        assert!((estimate - area).abs() < 0.02 * 4.0, "MC area {estimate} vs {area}");
    }
}

fn cloud(seed: u64, n: usize, d: usize) -> Vec<Vec<f64>> {
    let mut rng = stream_rng(seed, 0);
    (0..n).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn membership_is_invariant_under_axis_scaling_and_shift(
        seed in 0u64..1000,
        d in 2usize..5,
        scales in prop::collection::vec(0.01f64..100.0, 4),
        shifts in prop::collection::vec(-1e3f64..1e3, 4),
    ) {
        let pts = cloud(seed, 12, d);
        let queries = cloud(seed + 1, 40, d);
        let map = |v: &Vec<f64>| -> Vec<f64> { v.iter().enumerate().map(|(k, x)| x * scales[k] + shifts[k]).collect() };
        let a = standardized(&pts);
        let b = standardized(&pts.iter().map(map).collect::<Vec<_>>());
        for q in &queries {
            prop_assert_eq!(a.in_hull(q).unwrap(), b.in_hull(&map(q)).unwrap());
        }
    }

    #[test]
    fn adding_points_only_grows_the_hull(seed in 0u64..1000, d in 2usize..5) {
        let pts = cloud(seed, 10, d);
        let mut more = pts.clone();
        more.extend(cloud(seed + 7, 5, d).into_iter().map(|p| p.iter().map(|x| x * 1.5).collect::<Vec<_>>()));
        let small = identity(&pts);
        let large = identity(&more);
        for q in cloud(seed + 3, 60, d) {
            if small.in_hull(&q).unwrap() {
                prop_assert!(large.in_hull(&q).unwrap());
            }
        }
    }

    #[test]
    fn inflating_about_the_centroid_is_monotone(seed in 0u64..1000, d in 2usize..5, t in 0.0f64..1.0) {
        let pts = cloud(seed, 10, d);
        let env = identity(&pts);
        let c: Vec<f64> = (0..d).map(|k| pts.iter().map(|p| p[k]).sum::<f64>() / pts.len() as f64).collect();
        for q in cloud(seed + 5, 30, d) {
            if env.in_hull(&q).unwrap() {
                let pulled: Vec<f64> = q.iter().zip(&c).map(|(x, m)| m + t * (x - m)).collect();
                prop_assert!(env.in_hull(&pulled).unwrap());
            }
        }
    }

    #[test]
    fn generators_are_inside_and_exterior_points_have_positive_distance(seed in 0u64..1000, d in 1usize..5) {
        let pts = cloud(seed, 8, d);
        let env = identity(&pts);
        for p in &pts {
            prop_assert!(env.in_hull(p).unwrap());
        }
        for q in cloud(seed + 11, 30, d) {
            let q: Vec<f64> = q.iter().map(|x| x * 3.0).collect();
            let c = env.classify(&q).unwrap();
            match c.distance() {
                Some(dist) => prop_assert!(dist > 0.0),
                None => prop_assert!(env.in_hull(&q).unwrap()),
            }
        }
    }
}
