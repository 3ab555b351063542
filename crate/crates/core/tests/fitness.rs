use std::path::PathBuf;

use evorobo::fitness::entropy_of_counts;
use evorobo::{
    curiosity_fitness, discovery_fitness, displacement_fitness, entropy, epsilon_means,
    novelty_fitness, random_genotype, run_episode, Arena, DiscoveryArchive, EpisodeConfig,
    FitnessKind, InitScale, NoveltyArchive, Point, SensoriMotorStream, SensoriMotorVector, SimRng,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

fn random_stream(rng: &mut SimRng, len: usize) -> SensoriMotorStream {
    (0..len)
        .map(|_| SensoriMotorVector(std::array::from_fn(|_| rng.random::<f64>())))
        .collect()
}

#[test]
fn entropy_bounds() {
    let mut rng = SimRng::seed_from_u64(1);
    for _ in 0..200 {
        let counts: Vec<u64> = (0..rng.random_range(1..60)).map(|_| rng.random_range(1..500)).collect();
        let h = entropy_of_counts(&counts);
        assert!(h >= 0.0 && h <= (counts.len() as f64).ln() + 1e-12);
    }
    assert_eq!(entropy_of_counts(&[5, 0, 0]), 0.0);
}

#[test]
fn epsilon_extremes() {
    let mut rng = SimRng::seed_from_u64(2);
    let s = random_stream(&mut rng, 400);
    assert_eq!(curiosity_fitness(&s, 100.0).unwrap().0, 0.0);
    let (h, set) = curiosity_fitness(&s, 1e-9).unwrap();
    assert_eq!(set.len(), 400);
    assert!((h - 400f64.ln()).abs() < 1e-12);
}

#[test]
fn stationary_stream_scores_zero() {
    let v = SensoriMotorVector::new([0.2; 8], [0.0, 0.0]);
    let s: SensoriMotorStream = std::iter::repeat_n(v, 2000).collect();
    assert_eq!(curiosity_fitness(&s, 0.2).unwrap().0, 0.0);
    assert_eq!(displacement_fitness(&s), 0.0);
}

#[test]
fn discovery_accumulates_and_checks_epsilon() {
    let mut rng = SimRng::seed_from_u64(3);
    let mut archive = DiscoveryArchive::new(0.4).unwrap();
    let mut total = 0;
    for _ in 0..5 {
        let s = random_stream(&mut rng, 100);
        total += s.len() as u64;
        let (h, next) = discovery_fitness(&archive, &s, 0.4).unwrap();
        assert!(next.clusters().len() >= archive.clusters().len());
        assert_eq!(entropy(next.clusters()).unwrap(), h);
        archive = next;
    }
    assert_eq!(archive.total(), total);
    assert!(discovery_fitness(&archive, &random_stream(&mut rng, 3), 0.2).is_err());
}

#[test]
fn novelty_matches_brute_force_knn() {
    let mut rng = SimRng::seed_from_u64(4);
    let mut archive = NoveltyArchive::new(99.0);
    assert_eq!(novelty_fitness(Point::new(1.0, 1.0), &archive, 15), 99.0);
    let pts: Vec<Point> = (0..100)
        .map(|_| Point::new(rng.random_range(0.0..50.0), rng.random_range(0.0..30.0)))
        .collect();
    for &p in &pts {
        archive.push(p);
    }
    for _ in 0..100 {
        let q = Point::new(rng.random_range(0.0..50.0), rng.random_range(0.0..30.0));
        let mut d: Vec<f64> = pts.iter().map(|p| ((p.x - q.x).powi(2) + (p.y - q.y).powi(2)).sqrt()).collect();
        d.sort_by(f64::total_cmp);
        let want = d[..15].iter().sum::<f64>() / 15.0;
        assert!((novelty_fitness(q, &archive, 15) - want).abs() < 1e-9);
    }
    let mut small = NoveltyArchive::new(0.0);
    small.push(Point::new(0.0, 0.0));
    small.push(Point::new(3.0, 4.0));
    assert!((novelty_fitness(Point::new(0.0, 0.0), &small, 15) - 2.5).abs() < 1e-12);
}

#[test]
fn displacement_rewards_straight_unobstructed_motion() {
    let straight = SensoriMotorVector::new([0.0; 8], [1.0, 1.0]);
    let spin = SensoriMotorVector::new([0.0; 8], [1.0, -1.0]);
    let near_wall = SensoriMotorVector::new([0.0, 0.0, 0.75, 0.0, 0.0, 0.0, 0.0, 0.0], [1.0, 1.0]);
    let f = |v: SensoriMotorVector| displacement_fitness(&std::iter::repeat_n(v, 10).collect());
    assert!((f(straight) - 1.0).abs() < 1e-12);
    assert_eq!(f(spin), 0.0);
    assert!((f(near_wall) - 0.25).abs() < 1e-12);
}

#[test]
fn fitness_kinds_parse_by_name() {
    for k in [FitnessKind::curiosity(), FitnessKind::discovery(), FitnessKind::novelty(), FitnessKind::Displacement] {
        let parsed: FitnessKind = k.name().parse().unwrap();
        assert_eq!(parsed, k);
    }
    assert!("entropy".parse::<FitnessKind>().is_err());
}

#[test]
fn outliers_barely_move_evolved_style_streams() {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("arenas/medium.txt");
    let a = Arena::from_path(p).unwrap();
    let cfg = EpisodeConfig::for_arena(&a);
    let mut rng = SimRng::seed_from_u64(10);
    for _ in 0..5 {
        let g = random_genotype(&mut rng, InitScale::default());
        let s = run_episode(&a, &g, &cfg).unwrap().stream;
        let (base, _) = curiosity_fitness(&s, 0.2).unwrap();
        if base < 1.0 {
            continue;
        }
        let mut samples = s.samples().to_vec();
        for _ in 0..samples.len() / 100 {
            let at = rng.random_range(0..=samples.len());
            samples.insert(at, SensoriMotorVector(std::array::from_fn(|_| rng.random::<f64>())));
        }
        let (noisy, _) = curiosity_fitness(&SensoriMotorStream::new(samples), 0.2).unwrap();
        assert!((noisy - base).abs() / base < 0.1, "{base} -> {noisy}");
    }
}

proptest! {
    #[test]
    fn discovery_from_empty_is_curiosity(seed in any::<u64>(), len in 1usize..200) {
        let mut rng = SimRng::seed_from_u64(seed);
        let s = random_stream(&mut rng, len);
        let (c, cs) = curiosity_fitness(&s, 0.4).unwrap();
        let (d, arch) = discovery_fitness(&DiscoveryArchive::new(0.4).unwrap(), &s, 0.4).unwrap();
        prop_assert_eq!(c.to_bits(), d.to_bits());
        prop_assert_eq!(arch.clusters(), &cs);
    }

    #[test]
    fn entropy_is_permutation_invariant(mut counts in prop::collection::vec(1u64..1000, 1..50)) {
        let h = entropy_of_counts(&counts);
        counts.reverse();
        prop_assert!((h - entropy_of_counts(&counts)).abs() < 1e-12);
        let set = epsilon_means(&[[0.0]], 1.0).unwrap();
        prop_assert_eq!(entropy(&set).unwrap(), 0.0);
    }
}
