use std::path::PathBuf;

use evorobo::sim::{Noise, SENSOR_ANGLES};
use evorobo::{random_genotype, run_episode, sense, step, Arena, EpisodeConfig, InitScale, Pose, SimRng};
use rand::SeedableRng;

fn bundled(name: &str) -> Arena {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("arenas").join(name);
    Arena::from_path(p).unwrap()
}

const ROOM: &str = "arena 6 6 1\n######\n#....#\n#....#\n#..S.#\n#....#\n######\n";

#[test]
fn sensors_near_a_corner_match_sampling() {
    let a = Arena::parse(ROOM).unwrap();
    let cfg = EpisodeConfig::for_arena(&a);
    let pose = Pose { x: 1.3, y: 1.2, heading: 0.4 };
    let got = sense(&a, &pose, &cfg).unwrap();
    for (i, off) in SENSOR_ANGLES.iter().enumerate() {
        let angle = pose.heading + off;
        let mut t = 0.0;
        while t < cfg.sensor_range && a.is_free(pose.position().advance(angle, t)) {
            t += 1e-5;
        }
        let want = 1.0 - t.min(cfg.sensor_range) / cfg.sensor_range;
        assert!((got[i] - want).abs() < 1e-3, "sensor {i}: {} vs {want}", got[i]);
    }
    assert!(got.iter().any(|&s| s > 0.5), "a wall 0.2 away should register: {got:?}");
}

#[test]
fn open_space_reads_zero() {
    let mut text = String::from("arena 21 21 1\n");
    for r in 0..21 {
        let row: String = (0..21)
            .map(|c| {
                if r == 0 || r == 20 || c == 0 || c == 20 {
                    '#'
                } else if r == 10 && c == 10 {
                    'S'
                } else {
                    '.'
                }
            })
            .collect();
        text.push_str(&row);
        text.push('\n');
    }
    let a = Arena::parse(&text).unwrap();
    let cfg = EpisodeConfig::for_arena(&a);
    let s = sense(&a, &a.start_pose(), &cfg).unwrap();
    assert!(s.iter().all(|&v| v == 0.0), "{s:?}");
}

#[test]
fn step_kinematics() {
    let a = Arena::parse(ROOM).unwrap();
    let cfg = EpisodeConfig::for_arena(&a);
    let p0 = a.start_pose();
    let fwd = step(&a, &p0, [1.0, 1.0], &cfg);
    assert!((fwd.x - p0.x - cfg.max_speed).abs() < 1e-12 && (fwd.y - p0.y).abs() < 1e-12);
    let spin = step(&a, &p0, [-1.0, 1.0], &cfg);
    assert_eq!((spin.x, spin.y), (p0.x, p0.y));
    assert!((spin.heading - 2.0 * cfg.max_speed / cfg.axle).abs() < 1e-12);
    // Driving into the east wall eventually stops at the wall.
    let mut p = p0;
    for _ in 0..20 {
        p = step(&a, &p, [1.0, 1.0], &cfg);
    }
    assert!(a.is_free(p.position()));
    assert!(p.x < 5.0 && p.x > 4.0, "{p:?}");
}

#[test]
fn episodes_are_deterministic_and_contained() {
    let a = bundled("medium.txt");
    let cfg = EpisodeConfig::for_arena(&a);
    let mut rng = SimRng::seed_from_u64(31);
    for _ in 0..10 {
        let g = random_genotype(&mut rng, InitScale::default());
        let r1 = run_episode(&a, &g, &cfg).unwrap();
        let r2 = run_episode(&a, &g, &cfg).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(r1.stream.len(), cfg.steps);
        assert_eq!(r1.patrol.total(), cfg.steps as u64);
        let origin = a.start_pose().position();
        let mut max = 0.0f64;
        for p in r1.poses.iter().skip(1).map(|p| p.position()).chain([r1.end_point]) {
            assert!(a.is_free(p), "robot left free space at {p:?}");
            max = max.max(p.distance(origin));
        }
        assert!((max - r1.max_distance_from_start).abs() < 1e-12);
        for s in r1.stream.iter() {
            assert!(s.0.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}

#[test]
fn noise_is_seeded() {
    let a = bundled("medium.txt");
    let mut cfg = EpisodeConfig::for_arena(&a).with_steps(300);
    let g = random_genotype(&mut SimRng::seed_from_u64(3), InitScale::default());
    let clean = run_episode(&a, &g, &cfg).unwrap();
    cfg.noise = Some(Noise { sensor_std: 0.05, motor_std: 0.05, seed: 8 });
    let n1 = run_episode(&a, &g, &cfg).unwrap();
    let n2 = run_episode(&a, &g, &cfg).unwrap();
    assert_eq!(n1, n2);
    assert_ne!(clean.stream, n1.stream);
}

#[test]
fn trajectory_dump_has_one_row_per_step() {
    let a = Arena::parse(ROOM).unwrap();
    let cfg = EpisodeConfig::for_arena(&a).with_steps(25);
    let g = random_genotype(&mut SimRng::seed_from_u64(1), InitScale::default());
    let csv = run_episode(&a, &g, &cfg).unwrap().trajectory_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap().split(',').count(), 4 + 10);
    assert_eq!(lines.count(), 25);
}
