//! Fitness functions: Curiosity and Discovery (entropy of ε-means visit
//! counts), plus the Novelty and displacement baselines.

use std::fmt;
use std::str::FromStr;

use crate::arena::{Arena, Point};
use crate::clustering::{ClusterBuild, ClusterSet};
use crate::error::{Error, Result};
use crate::sim::SensoriMotorStream;

pub const CURIOSITY_EPSILON: f64 = 0.2;
pub const DISCOVERY_EPSILON: f64 = 0.4;
pub const NOVELTY_K: usize = 15;

/// When a Discovery offspring's visits are folded into the archive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CommitPolicy {
    /// Every evaluated individual adds its experience.
    #[default]
    All,
    /// Only offspring that replace the champion (and restart draws) do.
    Accepted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitnessKind {
    Curiosity {
        epsilon: f64,
    },
    Discovery {
        epsilon: f64,
        commit: CommitPolicy,
        reset_on_restart: bool,
    },
    Novelty {
        k: usize,
        reset_on_restart: bool,
    },
    Displacement,
}

impl FitnessKind {
    pub fn curiosity() -> Self {
        FitnessKind::Curiosity {
            epsilon: CURIOSITY_EPSILON,
        }
    }

    pub fn discovery() -> Self {
        FitnessKind::Discovery {
            epsilon: DISCOVERY_EPSILON,
            commit: CommitPolicy::All,
            reset_on_restart: false,
        }
    }

    pub fn novelty() -> Self {
        FitnessKind::Novelty {
            k: NOVELTY_K,
            reset_on_restart: false,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FitnessKind::Curiosity { .. } => "curiosity",
            FitnessKind::Discovery { .. } => "discovery",
            FitnessKind::Novelty { .. } => "novelty",
            FitnessKind::Displacement => "displacement",
        }
    }

    /// Clustering radius for the entropy-based kinds.
    pub fn epsilon(&self) -> Option<f64> {
        match *self {
            FitnessKind::Curiosity { epsilon } | FitnessKind::Discovery { epsilon, .. } => {
                Some(epsilon)
            }
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            FitnessKind::Curiosity { epsilon } | FitnessKind::Discovery { epsilon, .. }
                if !(epsilon > 0.0) =>
            {
                Err(Error::InvalidParameter(format!(
                    "epsilon must be positive, got {epsilon}"
                )))
            }
            FitnessKind::Novelty { k: 0, .. } => {
                Err(Error::InvalidParameter("novelty k must be at least 1".into()))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for FitnessKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FitnessKind {
    type Err = Error;

    /// Parses a kind name into its default parameters.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "curiosity" => Ok(FitnessKind::curiosity()),
            "discovery" => Ok(FitnessKind::discovery()),
            "novelty" => Ok(FitnessKind::novelty()),
            "displacement" => Ok(FitnessKind::Displacement),
            other => Err(Error::InvalidParameter(format!(
                "unknown fitness kind {other:?}"
            ))),
        }
    }
}

/// Shannon entropy (natural log) of the normalized cluster counts.
pub fn entropy(set: &ClusterSet) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::EmptyClusterSet);
    }
    Ok(entropy_of_counts(set.counts()))
}

/// Entropy of a count vector; zero counts contribute nothing.
pub fn entropy_of_counts(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let total = total as f64;
    let h: f64 = counts
        .iter()
        .filter(|&&n| n > 0)
        .map(|&n| {
            let p = n as f64 / total;
            -p * p.ln()
        })
        .sum();
    h.max(0.0)
}

/// Entropy of a fresh ε-means clustering of `stream`.
pub fn curiosity_fitness(stream: &SensoriMotorStream, epsilon: f64) -> Result<(f64, ClusterSet)> {
    let mut set = ClusterSet::with_epsilon(epsilon)?;
    absorb(&mut set, stream)?;
    Ok((entropy(&set)?, set))
}

/// Cluster set inherited along a lineage. Counts only grow.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscoveryArchive {
    clusters: ClusterSet,
}

impl DiscoveryArchive {
    pub fn new(epsilon: f64) -> Result<Self> {
        Ok(DiscoveryArchive {
            clusters: ClusterSet::with_epsilon(epsilon)?,
        })
    }

    pub fn clusters(&self) -> &ClusterSet {
        &self.clusters
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.clusters.total()
    }

    pub fn epsilon(&self) -> f64 {
        match self.clusters.build() {
            ClusterBuild::Epsilon(e) => e,
            ClusterBuild::KMeans(_) => unreachable!("archives are ε-means built"),
        }
    }
}

/// Seeds ε-means with the archive, runs it over `stream`, and returns the
/// entropy of the cumulative set with the updated archive. The input
/// archive is left untouched; the caller decides whether to keep the update.
pub fn discovery_fitness(
    archive: &DiscoveryArchive,
    stream: &SensoriMotorStream,
    epsilon: f64,
) -> Result<(f64, DiscoveryArchive)> {
    if archive.epsilon() != epsilon {
        return Err(Error::InvalidParameter(format!(
            "archive was built with epsilon {} but {epsilon} was requested",
            archive.epsilon()
        )));
    }
    let mut clusters = archive.clusters.clone();
    absorb(&mut clusters, stream)?;
    let h = entropy(&clusters)?;
    Ok((h, DiscoveryArchive { clusters }))
}

fn absorb(set: &mut ClusterSet, stream: &SensoriMotorStream) -> Result<()> {
    for sample in stream.iter() {
        set.epsilon_update(&sample.0)?;
    }
    Ok(())
}

/// Trajectory end points seen so far.
#[derive(Debug, Clone, PartialEq)]
pub struct NoveltyArchive {
    points: Vec<Point>,
    empty_novelty: f64,
}

impl NoveltyArchive {
    /// `empty_novelty` is the score handed to anything compared against an
    /// empty archive.
    pub fn new(empty_novelty: f64) -> Self {
        NoveltyArchive {
            points: Vec::new(),
            empty_novelty,
        }
    }

    /// Empty archive whose first entry scores the arena diagonal.
    pub fn for_arena(arena: &Arena) -> Self {
        NoveltyArchive::new(arena.diagonal())
    }

    pub fn push(&mut self, p: Point) {
        self.points.push(p);
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn clear(&mut self) {
        self.points.clear();
    }
}

/// Mean distance from `end_point` to its `k` nearest archived points.
pub fn novelty_fitness(end_point: Point, archive: &NoveltyArchive, k: usize) -> f64 {
    if archive.is_empty() {
        return archive.empty_novelty;
    }
    let mut dists: Vec<f64> = archive.points.iter().map(|p| p.distance(end_point)).collect();
    let k = k.max(1).min(dists.len());
    if k < dists.len() {
        dists.select_nth_unstable_by(k - 1, f64::total_cmp);
    }
    dists[..k].iter().sum::<f64>() / k as f64
}

/// Average per-step `V (1 - sqrt(dv)) (1 - i)` over the stream: `V` the
/// absolute mean wheel speed, `dv` the absolute wheel-speed difference, both
/// normalized to `[0, 1]`, and `i` the strongest sensor activation.
pub fn displacement_fitness(stream: &SensoriMotorStream) -> f64 {
    if stream.is_empty() {
        return 0.0;
    }
    let total: f64 = stream
        .iter()
        .map(|s| {
            let m = s.motors();
            let left = 2.0 * m[0] - 1.0;
            let right = 2.0 * m[1] - 1.0;
            let speed = (left + right).abs() / 2.0;
            let diff = (left - right).abs() / 2.0;
            let proximity = s.sensors().iter().copied().fold(0.0, f64::max);
            speed * (1.0 - diff.sqrt()) * (1.0 - proximity)
        })
        .sum();
    total / stream.len() as f64
}
