//! Differential-drive robot with eight range sensors in a grid arena.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_6, PI, TAU};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::arena::{Arena, PatrolGrid, Point, Pose};
use crate::controller::{mlp_forward, Genotype, GENOTYPE_LEN};
use crate::error::{Error, Result};

pub const SENSORS: usize = 8;
pub const MOTORS: usize = 2;
/// Sensor plus motor values per time step.
pub const SMS_DIM: usize = SENSORS + MOTORS;

/// Default sensor fan relative to the heading: front-dense plus rear.
pub const SENSOR_ANGLES: [f64; SENSORS] = [
    0.0,
    FRAC_PI_6,
    -FRAC_PI_6,
    FRAC_PI_2,
    -FRAC_PI_2,
    5.0 * FRAC_PI_6,
    -5.0 * FRAC_PI_6,
    PI,
];

pub type RobotState = Pose;

/// One time step of normalized readings: 8 sensor activations then the two
/// motor commands mapped from `[-1, 1]` onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensoriMotorVector(pub [f64; SMS_DIM]);

impl SensoriMotorVector {
    pub fn new(sensors: [f64; SENSORS], motors: [f64; MOTORS]) -> Self {
        let mut v = [0.0; SMS_DIM];
        v[..SENSORS].copy_from_slice(&sensors);
        for (dst, m) in v[SENSORS..].iter_mut().zip(motors) {
            *dst = (m.clamp(-1.0, 1.0) + 1.0) / 2.0;
        }
        SensoriMotorVector(v)
    }

    pub fn sensors(&self) -> &[f64] {
        &self.0[..SENSORS]
    }

    /// Motor commands in `[0, 1]`.
    pub fn motors(&self) -> &[f64] {
        &self.0[SENSORS..]
    }
}

impl AsRef<[f64]> for SensoriMotorVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Time-ordered sensori-motor samples of one episode.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SensoriMotorStream {
    samples: Vec<SensoriMotorVector>,
}

impl SensoriMotorStream {
    pub fn new(samples: Vec<SensoriMotorVector>) -> Self {
        SensoriMotorStream { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[SensoriMotorVector] {
        &self.samples
    }

    pub fn iter(&self) -> std::slice::Iter<'_, SensoriMotorVector> {
        self.samples.iter()
    }
}

impl FromIterator<SensoriMotorVector> for SensoriMotorStream {
    fn from_iter<I: IntoIterator<Item = SensoriMotorVector>>(iter: I) -> Self {
        SensoriMotorStream::new(iter.into_iter().collect())
    }
}

/// Gaussian sensor and motor noise. Off by default.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Noise {
    pub sensor_std: f64,
    pub motor_std: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeConfig {
    pub steps: usize,
    pub dt: f64,
    pub max_speed: f64,
    pub axle: f64,
    pub sensor_range: f64,
    pub sensor_angles: [f64; SENSORS],
    pub noise: Option<Noise>,
}

impl EpisodeConfig {
    pub const DEFAULT_STEPS: usize = 2000;

    /// Defaults scaled to the arena: a full-speed robot covers half a cell
    /// per step, turns one radian per step when spinning in place, and
    /// senses walls up to four cells away.
    pub fn for_arena(arena: &Arena) -> Self {
        let cs = arena.cell_size();
        EpisodeConfig {
            steps: Self::DEFAULT_STEPS,
            dt: 1.0,
            max_speed: 0.5 * cs,
            axle: cs,
            sensor_range: 4.0 * cs,
            sensor_angles: SENSOR_ANGLES,
            noise: None,
        }
    }

    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps = steps;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dt", self.dt),
            ("max_speed", self.max_speed),
            ("axle", self.axle),
            ("sensor_range", self.sensor_range),
        ];
        if self.steps == 0 {
            return Err(Error::InvalidParameter("steps must be at least 1".into()));
        }
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub stream: SensoriMotorStream,
    pub patrol: PatrolGrid,
    pub end_point: Point,
    pub max_distance_from_start: f64,
    /// Pose before each step, aligned with `stream`.
    pub poses: Vec<Pose>,
}

impl EpisodeResult {
    /// Trajectory dump, one row per step: the pose the robot sensed from
    /// and the normalized sensori-motor sample recorded there.
    pub fn trajectory_csv(&self) -> String {
        let mut out = String::from("t,x,y,heading");
        for i in 0..SENSORS {
            write!(out, ",s{i}").unwrap();
        }
        out.push_str(",m0,m1\n");
        for (t, (pose, sample)) in self.poses.iter().zip(self.stream.iter()).enumerate() {
            write!(out, "{},{},{},{}", t + 1, pose.x, pose.y, pose.heading).unwrap();
            for v in sample.0 {
                write!(out, ",{v}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Activations in `[0, 1]`: 1 touching a wall, 0 nothing within range.
pub fn sense(arena: &Arena, state: &RobotState, cfg: &EpisodeConfig) -> Result<[f64; SENSORS]> {
    let origin = state.position();
    let mut out = [0.0; SENSORS];
    for (a, offset) in out.iter_mut().zip(cfg.sensor_angles) {
        let d = arena.raycast(origin, state.heading + offset, cfg.sensor_range)?;
        *a = 1.0 - d / cfg.sensor_range;
    }
    Ok(out)
}

/// Kinematic differential-drive update. The heading always turns; the
/// position only moves when the straight path to the new point is clear.
pub fn step(arena: &Arena, state: &RobotState, motors: [f64; MOTORS], cfg: &EpisodeConfig) -> RobotState {
    let left = motors[0].clamp(-1.0, 1.0);
    let right = motors[1].clamp(-1.0, 1.0);
    let v = (left + right) / 2.0 * cfg.max_speed;
    let omega = (right - left) / cfg.axle * cfg.max_speed;
    let heading = (state.heading + omega * cfg.dt).rem_euclid(TAU);
    let dist = v * cfg.dt;
    let from = state.position();
    let mut next = RobotState {
        x: state.x,
        y: state.y,
        heading,
    };
    if dist == 0.0 {
        return next;
    }
    let to = from.advance(heading, dist);
    let travel_dir = if dist > 0.0 { heading } else { heading + PI };
    let clear = arena
        .raycast(from, travel_dir, dist.abs())
        .is_ok_and(|free_run| free_run >= dist.abs());
    if clear && arena.is_free(to) {
        next.x = to.x;
        next.y = to.y;
    }
    next
}

/// Runs `cfg.steps` steps of sense, act, record, move from the arena's start.
pub fn run_episode(arena: &Arena, controller: &Genotype, cfg: &EpisodeConfig) -> Result<EpisodeResult> {
    run_episode_with_weights(arena, controller.weights(), cfg)
}

pub fn run_episode_with_weights(
    arena: &Arena,
    weights: &[f64],
    cfg: &EpisodeConfig,
) -> Result<EpisodeResult> {
    if weights.len() != GENOTYPE_LEN {
        return Err(Error::DimensionMismatch {
            expected: GENOTYPE_LEN,
            got: weights.len(),
        });
    }
    run_episode_with(arena, cfg, |sensors| mlp_forward(weights, sensors))
}

/// Episode loop over an arbitrary policy mapping sensor activations to
/// motor commands.
pub fn run_episode_with<F>(arena: &Arena, cfg: &EpisodeConfig, mut policy: F) -> Result<EpisodeResult>
where
    F: FnMut(&[f64; SENSORS]) -> [f64; MOTORS],
{
    cfg.validate()?;
    let start = arena.start_pose();
    let origin = start.position();
    let mut state = start;
    let mut samples = Vec::with_capacity(cfg.steps);
    let mut poses = Vec::with_capacity(cfg.steps);
    let mut patrol = PatrolGrid::new(arena);
    let mut max_distance = 0.0f64;
    let mut noise = cfg
        .noise
        .map(|n| (n, ChaCha8Rng::seed_from_u64(n.seed)));

    for _ in 0..cfg.steps {
        let mut sensors = sense(arena, &state, cfg)?;
        if let Some((n, rng)) = noise.as_mut() {
            for s in &mut sensors {
                *s = (*s + n.sensor_std * rng.sample::<f64, _>(StandardNormal)).clamp(0.0, 1.0);
            }
        }
        let mut motors = policy(&sensors).map(|m| m.clamp(-1.0, 1.0));
        if let Some((n, rng)) = noise.as_mut() {
            for m in &mut motors {
                *m = (*m + n.motor_std * rng.sample::<f64, _>(StandardNormal)).clamp(-1.0, 1.0);
            }
        }
        samples.push(SensoriMotorVector::new(sensors, motors));
        poses.push(state);
        state = step(arena, &state, motors, cfg);
        let p = state.position();
        patrol.record_visit(p);
        max_distance = max_distance.max(p.distance(origin));
    }

    Ok(EpisodeResult {
        stream: SensoriMotorStream::new(samples),
        patrol,
        end_point: state.position(),
        max_distance_from_start: max_distance,
        poses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    // 12x8 room, cell size 1, start at (1.5, 1.5).
    const ROOM: &str = "\
arena 12 8 1
############
#S.........#
#..........#
#..........#
#..........#
#..........#
#..........#
############
";

    fn room() -> (Arena, EpisodeConfig) {
        let a = Arena::parse(ROOM).unwrap();
        let cfg = EpisodeConfig::for_arena(&a);
        (a, cfg)
    }

    #[test]
    fn open_space_senses_nothing() {
        let mut text = String::from("arena 13 13 1\n");
        for row in 0..13 {
            for col in 0..13 {
                text.push(match (row, col) {
                    (0 | 12, _) | (_, 0 | 12) => '#',
                    (6, 6) => 'S',
                    _ => '.',
                });
            }
            text.push('\n');
        }
        let a = Arena::parse(&text).unwrap();
        let mut cfg = EpisodeConfig::for_arena(&a);
        cfg.sensor_range = 2.0;
        let s = sense(&a, &a.start_pose(), &cfg).unwrap();
        assert_eq!(s, [0.0; SENSORS]);
    }

    #[test]
    fn front_sensor_half_range() {
        let (a, cfg) = room();
        // Right wall at x = 11, sensor range 4.
        let state = RobotState { x: 9.0, y: 4.5, heading: 0.0 };
        let s = sense(&a, &state, &cfg).unwrap();
        assert!((s[0] - 0.5).abs() < 1e-6, "{s:?}");
        assert_eq!(s[7], 0.0);
    }

    #[test]
    fn stationary_motors() {
        let (a, cfg) = room();
        let s0 = RobotState { x: 4.2, y: 3.3, heading: 1.0 };
        assert_eq!(step(&a, &s0, [0.0, 0.0], &cfg), s0);
    }

    #[test]
    fn straight_drive() {
        let (a, cfg) = room();
        let s0 = RobotState { x: 4.2, y: 3.3, heading: 0.0 };
        let s1 = step(&a, &s0, [1.0, 1.0], &cfg);
        assert_eq!(s1.x, 4.2 + cfg.max_speed * cfg.dt);
        assert_eq!(s1.y, 3.3);
        assert_eq!(s1.heading, 0.0);
        let back = step(&a, &s1, [-1.0, -1.0], &cfg);
        assert!((back.x - 4.2).abs() < 1e-12);
    }

    #[test]
    fn blocked_by_wall() {
        let (a, cfg) = room();
        let s0 = RobotState { x: 10.8, y: 3.3, heading: 0.0 };
        assert_eq!(step(&a, &s0, [1.0, 1.0], &cfg), s0);
    }

    #[test]
    fn spin_in_place_turns_only() {
        let (a, cfg) = room();
        let s0 = RobotState { x: 4.5, y: 4.5, heading: 0.0 };
        let s1 = step(&a, &s0, [-1.0, 1.0], &cfg);
        assert_eq!((s1.x, s1.y), (4.5, 4.5));
        assert!((s1.heading - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_controller_never_moves() {
        let (a, cfg) = room();
        let cfg = cfg.with_steps(50);
        let r = run_episode(&a, &Genotype::zeros(), &cfg).unwrap();
        assert_eq!(r.stream.len(), 50);
        assert!(r.stream.iter().all(|s| *s == r.stream.samples()[0]));
        assert_eq!(r.patrol.total(), 50);
        assert_eq!(r.patrol.cells_at_least(1), 1);
        assert_eq!(r.end_point, a.start_pose().position());
        assert_eq!(r.max_distance_from_start, 0.0);
    }

    #[test]
    fn trajectory_dump_header() {
        let (a, cfg) = room();
        let r = run_episode(&a, &Genotype::zeros(), &cfg.with_steps(3)).unwrap();
        let csv = r.trajectory_csv();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,x,y,heading,s0,s1,s2,s3,s4,s5,s6,s7,m0,m1"
        );
        assert_eq!(lines.count(), 3);
    }

    #[test]
    fn bad_config_rejected() {
        let (a, cfg) = room();
        assert!(run_episode(&a, &Genotype::zeros(), &cfg.clone().with_steps(0)).is_err());
        let mut bad = cfg;
        bad.sensor_range = 0.0;
        assert!(bad.validate().is_err());
    }
}
