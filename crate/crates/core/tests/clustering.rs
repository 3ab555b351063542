use evorobo::clustering::kmeans_traced;
use evorobo::{epsilon_means, kmeans, nearest_cluster, ClusterSet, Error, SimRng};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn uniform_points(rng: &mut SimRng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect()
}

#[test]
fn epsilon_means_matches_leader_oracle_on_1000_points() {
    let mut rng = SimRng::seed_from_u64(1);
    let pts = uniform_points(&mut rng, 1000, 4);
    for eps in [0.05, 0.2, 0.5, 1.0] {
        let set = epsilon_means(&pts, eps).unwrap();
        let mut centers: Vec<&Vec<f64>> = Vec::new();
        let mut counts: Vec<u64> = Vec::new();
        for p in &pts {
            let best = centers
                .iter()
                .enumerate()
                .map(|(i, c)| (i, dist(c, p)))
                .fold(None, |acc: Option<(usize, f64)>, (i, d)| match acc {
                    Some((_, bd)) if bd <= d => acc,
                    _ => Some((i, d)),
                });
            match best {
                Some((i, d)) if d <= eps => counts[i] += 1,
                _ => {
                    centers.push(p);
                    counts.push(1);
                }
            }
        }
        assert_eq!(set.len(), centers.len(), "eps {eps}");
        assert_eq!(set.counts(), counts.as_slice(), "eps {eps}");
        for (i, c) in centers.iter().enumerate() {
            assert_eq!(set.center(i), c.as_slice());
        }
    }
}

#[test]
fn epsilon_means_boundaries() {
    let pts = [[0.0], [0.5], [1.0]];
    assert_eq!(epsilon_means(&pts, 0.5).unwrap().counts(), &[2, 1]);
    assert_eq!(epsilon_means(&pts, 10.0).unwrap().len(), 1);
    assert!(matches!(ClusterSet::with_epsilon(0.0), Err(Error::InvalidParameter(_))));
    let mut set = ClusterSet::with_epsilon(0.1).unwrap();
    set.epsilon_update(&[0.0, 0.0]).unwrap();
    assert!(matches!(set.epsilon_update(&[0.0]), Err(Error::DimensionMismatch { .. })));
}

#[test]
fn nearest_cluster_agrees_with_linear_scan() {
    let mut rng = SimRng::seed_from_u64(2);
    let set = epsilon_means(&uniform_points(&mut rng, 500, 10), 0.6).unwrap();
    assert!(set.len() > 20);
    for q in uniform_points(&mut rng, 500, 10) {
        let (i, d) = nearest_cluster(&set, &q).unwrap();
        let (j, e) = (0..set.len())
            .map(|k| (k, dist(set.center(k), &q)))
            .fold((usize::MAX, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        assert_eq!(i, j);
        assert!((d - e).abs() < 1e-12);
    }
    let empty = ClusterSet::with_epsilon(0.1).unwrap();
    assert!(matches!(nearest_cluster(&empty, &[0.0]), Err(Error::EmptyClusterSet)));
}

#[test]
fn kmeans_terminates_with_nearest_assignment() {
    let mut rng = SimRng::seed_from_u64(3);
    let pts = uniform_points(&mut rng, 400, 3);
    for k in [1, 4, 12] {
        let (set, trace) = kmeans_traced(&pts, k, &mut rng).unwrap();
        assert!(trace.iterations <= 200);
        assert_eq!(set.total(), pts.len() as u64);
        if trace.converged {
            for (p, &a) in pts.iter().zip(&trace.assignment) {
                let (n, _) = nearest_cluster(&set, p).unwrap();
                assert!((dist(set.center(n), p) - dist(set.center(a), p)).abs() < 1e-12);
            }
        }
        for w in trace.wcss.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
    }
}

#[test]
fn kmeans_rejects_bad_k() {
    let mut rng = SimRng::seed_from_u64(4);
    let pts = [[0.0, 1.0], [1.0, 0.0]];
    assert!(matches!(kmeans(&pts, 0, &mut rng), Err(Error::InvalidParameter(_))));
    assert!(matches!(kmeans(&pts, 3, &mut rng), Err(Error::TooFewPoints { .. })));
}

proptest! {
    #[test]
    fn epsilon_means_invariants(seed in any::<u64>(), n in 1usize..300, eps in 0.05f64..1.5) {
        let mut rng = SimRng::seed_from_u64(seed);
        let pts = uniform_points(&mut rng, n, 5);
        let set = epsilon_means(&pts, eps).unwrap();
        prop_assert_eq!(set.total(), n as u64);
        prop_assert!(set.counts().iter().all(|&c| c >= 1));
        for i in 0..set.len() {
            for j in 0..i {
                prop_assert!(dist(set.center(i), set.center(j)) > eps);
            }
        }
        for p in &pts {
            prop_assert!(nearest_cluster(&set, p).unwrap().1 <= eps);
        }
    }
}
