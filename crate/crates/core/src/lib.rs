//! Embedded evolutionary robotics with entropy-driven fitness.
//!
//! A differential-drive robot with eight range sensors explores a grid
//! maze under an evolved perceptron controller. Its sensori-motor stream is
//! clustered online with ε-means and the entropy of the cluster visit
//! counts serves as fitness (Curiosity), optionally accumulated over the
//! whole lineage (Discovery). Novelty and displacement baselines, a (1+1)
//! evolution strategy and the patrolling experiment harness complete the
//! toolkit.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arena;
pub mod clustering;
pub mod controller;
pub mod error;
pub mod evolution;
pub mod experiment;
pub mod fitness;
pub mod sim;

pub use arena::{load_arena, Arena, Cell, PatrolGrid, Point, Pose};
pub use clustering::{epsilon_means, epsilon_means_update, kmeans, nearest_cluster, ClusterBuild, ClusterSet};
pub use controller::{random_genotype, Genotype, InitScale, GENOTYPE_LEN};
pub use error::{Error, Result};
pub use evolution::{es_run, one_fifth_update, select_best, EsConfig, EsState, EvalRecord, RunLog};
pub use experiment::{heatmap, patrol_percentage, run_experiment, ExperimentConfig, PatrolMetrics};
pub use fitness::{
    curiosity_fitness, discovery_fitness, displacement_fitness, entropy, novelty_fitness,
    DiscoveryArchive, FitnessKind, NoveltyArchive,
};
pub use sim::{
    run_episode, sense, step, EpisodeConfig, EpisodeResult, RobotState, SensoriMotorStream,
    SensoriMotorVector,
};

/// Deterministic RNG used throughout; seeded explicitly, never from the clock.
pub type SimRng = rand_chacha::ChaCha8Rng;
