//! (1+1) evolution strategy with one-fifth success rule and restarts.
//!
//! Every fitness evaluation, restart draws included, consumes one unit of
//! budget and produces exactly one [`EvalRecord`].

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::SeedableRng;
use sha2::{Digest, Sha256};

use crate::arena::{Arena, Point};
use crate::controller::{gaussian_vector, perturb, Genotype, InitScale, GENOTYPE_LEN, INITIAL_SIGMA};
use crate::error::{Error, Result};
use crate::fitness::{
    curiosity_fitness, discovery_fitness, displacement_fitness, novelty_fitness, CommitPolicy,
    DiscoveryArchive, FitnessKind, NoveltyArchive,
};
use crate::sim::{run_episode_with_weights, EpisodeConfig};
use crate::SimRng;

pub const RESTART_AFTER: usize = 30;
/// Step-size multiplier on success; failures apply its inverse fourth root.
pub const SUCCESS_FACTOR: f64 = 1.5;
pub const SIGMA_MIN: f64 = 1e-6;
pub const SIGMA_MAX: f64 = 10.0;

/// Step-size adaptation flavour.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    /// Multiply by 1.5 on success and by 1.5^(-1/4) on failure, every
    /// evaluation. Stationary at a one-in-five success rate.
    OneFifth,
    /// Rechenberg's windowed rule: every `length` mutations, divide sigma by
    /// `factor` when more than a fifth succeeded, multiply when fewer did.
    Window { length: usize, factor: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EsConfig {
    pub budget: usize,
    pub restart_after: usize,
    pub initial_sigma: f64,
    pub init: InitScale,
    pub step_rule: StepRule,
}

impl Default for EsConfig {
    fn default() -> Self {
        EsConfig {
            budget: 2000,
            restart_after: RESTART_AFTER,
            initial_sigma: INITIAL_SIGMA,
            init: InitScale::default(),
            step_rule: StepRule::OneFifth,
        }
    }
}

impl EsConfig {
    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EsState {
    pub champion: Vec<f64>,
    pub champion_fitness: f64,
    pub sigma: f64,
    pub evals_done: usize,
    pub evals_since_improvement: usize,
    pub success_window: VecDeque<bool>,
}

impl EsState {
    pub fn new(champion: Vec<f64>, champion_fitness: f64, sigma: f64) -> Self {
        EsState {
            champion,
            champion_fitness,
            sigma: sigma.clamp(SIGMA_MIN, SIGMA_MAX),
            evals_done: 0,
            evals_since_improvement: 0,
            success_window: VecDeque::new(),
        }
    }

    fn adapt(&mut self, accepted: bool, rule: StepRule) {
        match rule {
            StepRule::OneFifth => self.sigma = next_sigma(self.sigma, accepted),
            StepRule::Window { length, factor } => {
                self.success_window.push_back(accepted);
                if self.success_window.len() >= length.max(1) {
                    let wins = self.success_window.iter().filter(|&&w| w).count();
                    let rate = wins as f64 / self.success_window.len() as f64;
                    if rate > 0.2 {
                        self.sigma /= factor;
                    } else if rate < 0.2 {
                        self.sigma *= factor;
                    }
                    self.sigma = self.sigma.clamp(SIGMA_MIN, SIGMA_MAX);
                    self.success_window.clear();
                }
            }
        }
    }
}

/// Per-evaluation one-fifth rule on a bare step size.
pub fn next_sigma(sigma: f64, accepted: bool) -> f64 {
    let factor = if accepted {
        SUCCESS_FACTOR
    } else {
        SUCCESS_FACTOR.powf(-0.25)
    };
    (sigma * factor).clamp(SIGMA_MIN, SIGMA_MAX)
}

pub fn one_fifth_update(mut state: EsState, accepted: bool) -> EsState {
    state.sigma = next_sigma(state.sigma, accepted);
    state
}

/// What an objective reports for one candidate.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Evaluation {
    pub fitness: f64,
    pub end_point: Point,
    pub max_distance: f64,
    /// Sparse `(cell index, count)` patrol visits of the episode.
    pub visits: Vec<(u32, u32)>,
}

impl Evaluation {
    pub fn fitness_only(fitness: f64) -> Self {
        Evaluation {
            fitness,
            ..Default::default()
        }
    }
}

/// Something the ES can maximize.
pub trait Objective {
    fn dim(&self) -> usize;

    fn evaluate(&mut self, candidate: &[f64], restart: bool) -> Result<Evaluation>;

    /// Called once per evaluation, after the acceptance decision.
    fn decide(&mut self, _accepted: bool) {}

    /// Called before a restart draw (not before the very first one).
    fn on_restart(&mut self) {}
}

/// Wraps a plain function of the candidate vector.
pub struct FnObjective<F> {
    dim: usize,
    f: F,
}

impl<F: FnMut(&[f64]) -> f64> FnObjective<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnObjective { dim, f }
    }
}

impl<F: FnMut(&[f64]) -> f64> Objective for FnObjective<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&mut self, candidate: &[f64], _restart: bool) -> Result<Evaluation> {
        Ok(Evaluation::fitness_only((self.f)(candidate)))
    }
}

/// One fitness evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    /// 1-based, dense.
    pub eval: usize,
    pub fitness: f64,
    pub accepted: bool,
    /// Step size after this evaluation's adaptation.
    pub sigma: f64,
    pub end_point: Point,
    pub restart: bool,
    pub max_distance: f64,
    pub visits: Vec<(u32, u32)>,
    /// Weights of accepted individuals, `None` for rejected offspring.
    pub champion: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub fitness_kind: String,
    pub seed: u64,
    pub config_hash: String,
    pub records: Vec<EvalRecord>,
}

pub const RUNLOG_HEADER: &str = "eval,fitness,accepted,sigma,end_x,end_y,restart";

impl RunLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn restarts(&self) -> usize {
        self.records.iter().filter(|r| r.restart).count().saturating_sub(1)
    }

    pub fn best(&self) -> Option<&EvalRecord> {
        select_best(self, 1).ok().and_then(|v| v.into_iter().next())
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# fitness={} seed={} config_hash={}\n{RUNLOG_HEADER}\n",
            self.fitness_kind, self.seed, self.config_hash
        );
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.eval,
                r.fitness,
                r.accepted as u8,
                r.sigma,
                r.end_point.x,
                r.end_point.y,
                r.restart as u8
            )
            .unwrap();
        }
        out
    }

    /// Parses a run log CSV. Visits, distances and champion weights live in
    /// sidecar files and come back empty.
    pub fn from_csv(text: &str) -> std::result::Result<RunLog, String> {
        let mut log = RunLog {
            fitness_kind: String::new(),
            seed: 0,
            config_hash: String::new(),
            records: Vec::new(),
        };
        let mut saw_header = false;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                for kv in meta.split_whitespace() {
                    match kv.split_once('=') {
                        Some(("fitness", v)) => log.fitness_kind = v.to_string(),
                        Some(("seed", v)) => {
                            log.seed = v.parse().map_err(|_| format!("line {}: bad seed", i + 1))?
                        }
                        Some(("config_hash", v)) => log.config_hash = v.to_string(),
                        _ => {}
                    }
                }
                continue;
            }
            if !saw_header {
                if line != RUNLOG_HEADER {
                    return Err(format!("line {}: expected header {RUNLOG_HEADER:?}", i + 1));
                }
                saw_header = true;
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(format!("line {}: expected 7 fields", i + 1));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| format!("line {}: bad number {s:?}", i + 1));
            let flag = |s: &str| match s {
                "1" => Ok(true),
                "0" => Ok(false),
                _ => Err(format!("line {}: bad flag {s:?}", i + 1)),
            };
            log.records.push(EvalRecord {
                eval: f[0].parse().map_err(|_| format!("line {}: bad eval index", i + 1))?,
                fitness: num(f[1])?,
                accepted: flag(f[2])?,
                sigma: num(f[3])?,
                end_point: Point::new(num(f[4])?, num(f[5])?),
                restart: flag(f[6])?,
                max_distance: 0.0,
                visits: Vec::new(),
                champion: None,
            });
        }
        if !saw_header {
            return Err("missing header".into());
        }
        Ok(log)
    }
}

/// Drives `objective` through `cfg.budget` evaluations.
pub fn run_es<O: Objective>(objective: &mut O, cfg: &EsConfig, seed: u64) -> Result<Vec<EvalRecord>> {
    if cfg.budget == 0 {
        return Err(Error::InvalidParameter("budget must be at least 1".into()));
    }
    if cfg.restart_after == 0 {
        return Err(Error::InvalidParameter("restart_after must be at least 1".into()));
    }
    let dim = objective.dim();
    let mut rng = SimRng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(cfg.budget);
    let mut state: Option<EsState> = None;

    while records.len() < cfg.budget {
        let eval = records.len() + 1;
        let restart = state
            .as_ref()
            .is_none_or(|s| s.evals_since_improvement >= cfg.restart_after);

        if restart {
            if state.is_some() {
                objective.on_restart();
            }
            let x = gaussian_vector(&mut rng, dim, cfg.init.std_dev());
            let ev = objective.evaluate(&x, true)?;
            objective.decide(true);
            let mut s = EsState::new(x, ev.fitness, cfg.initial_sigma);
            s.evals_done = eval;
            records.push(EvalRecord {
                eval,
                fitness: ev.fitness,
                accepted: true,
                sigma: s.sigma,
                end_point: ev.end_point,
                restart: true,
                max_distance: ev.max_distance,
                visits: ev.visits,
                champion: Some(s.champion.clone()),
            });
            state = Some(s);
            continue;
        }

        let s = state.as_mut().expect("initialized by the first restart");
        let child = perturb(&s.champion, s.sigma, &mut rng);
        let ev = objective.evaluate(&child, false)?;
        let accepted = ev.fitness >= s.champion_fitness;
        let improved = ev.fitness > s.champion_fitness;
        objective.decide(accepted);
        let champion = if accepted {
            s.champion_fitness = ev.fitness;
            s.champion = child;
            Some(s.champion.clone())
        } else {
            None
        };
        if improved {
            s.evals_since_improvement = 0;
        } else {
            s.evals_since_improvement += 1;
        }
        s.adapt(accepted, cfg.step_rule);
        s.evals_done = eval;
        records.push(EvalRecord {
            eval,
            fitness: ev.fitness,
            accepted,
            sigma: s.sigma,
            end_point: ev.end_point,
            restart: false,
            max_distance: ev.max_distance,
            visits: ev.visits,
            champion,
        });
    }
    Ok(records)
}

/// Robot episodes scored by one of the four fitness kinds. Holds the
/// Novelty and Discovery archives across evaluations.
#[derive(Debug)]
pub struct RobotObjective<'a> {
    arena: &'a Arena,
    episode: EpisodeConfig,
    kind: FitnessKind,
    discovery: Option<DiscoveryArchive>,
    pending: Option<DiscoveryArchive>,
    novelty: NoveltyArchive,
}

impl<'a> RobotObjective<'a> {
    pub fn new(arena: &'a Arena, kind: FitnessKind, episode: EpisodeConfig) -> Result<Self> {
        kind.validate()?;
        episode.validate()?;
        let discovery = match kind {
            FitnessKind::Discovery { epsilon, .. } => Some(DiscoveryArchive::new(epsilon)?),
            _ => None,
        };
        Ok(RobotObjective {
            arena,
            episode,
            kind,
            discovery,
            pending: None,
            novelty: NoveltyArchive::for_arena(arena),
        })
    }

    pub fn discovery_archive(&self) -> Option<&DiscoveryArchive> {
        self.discovery.as_ref()
    }

    pub fn novelty_archive(&self) -> &NoveltyArchive {
        &self.novelty
    }
}

impl Objective for RobotObjective<'_> {
    fn dim(&self) -> usize {
        GENOTYPE_LEN
    }

    fn evaluate(&mut self, candidate: &[f64], _restart: bool) -> Result<Evaluation> {
        let episode = run_episode_with_weights(self.arena, candidate, &self.episode)?;
        let fitness = match self.kind {
            FitnessKind::Curiosity { epsilon } => curiosity_fitness(&episode.stream, epsilon)?.0,
            FitnessKind::Discovery { epsilon, commit, .. } => {
                let archive = self.discovery.as_ref().expect("discovery archive");
                let (f, updated) = discovery_fitness(archive, &episode.stream, epsilon)?;
                match commit {
                    CommitPolicy::All => self.discovery = Some(updated),
                    CommitPolicy::Accepted => self.pending = Some(updated),
                }
                f
            }
            FitnessKind::Novelty { k, .. } => {
                let f = novelty_fitness(episode.end_point, &self.novelty, k);
                self.novelty.push(episode.end_point);
                f
            }
            FitnessKind::Displacement => displacement_fitness(&episode.stream),
        };
        Ok(Evaluation {
            fitness,
            end_point: episode.end_point,
            max_distance: episode.max_distance_from_start,
            visits: episode.patrol.to_sparse(),
        })
    }

    fn decide(&mut self, accepted: bool) {
        if let Some(updated) = self.pending.take() {
            if accepted {
                self.discovery = Some(updated);
            }
        }
    }

    fn on_restart(&mut self) {
        match self.kind {
            FitnessKind::Discovery {
                epsilon,
                reset_on_restart: true,
                ..
            } => {
                self.discovery = Some(DiscoveryArchive::new(epsilon).expect("validated epsilon"));
            }
            FitnessKind::Novelty {
                reset_on_restart: true,
                ..
            } => self.novelty.clear(),
            _ => {}
        }
    }
}

/// Hash of everything that determines a run besides its seed.
pub fn config_hash(kind: &FitnessKind, es: &EsConfig, episode: &EpisodeConfig, arena: &Arena) -> String {
    let mut h = Sha256::new();
    h.update(format!("{kind:?}|{es:?}|{episode:?}|{arena}").as_bytes());
    hex::encode(&h.finalize()[..8])
}

/// Evolves controllers on `arena` under `kind`.
pub fn es_run(
    arena: &Arena,
    kind: FitnessKind,
    es: &EsConfig,
    episode: &EpisodeConfig,
    seed: u64,
) -> Result<RunLog> {
    es_run_with_archive(arena, kind, es, episode, seed).map(|(log, _)| log)
}

/// Like [`es_run`], also returning the final Discovery archive when there is one.
pub fn es_run_with_archive(
    arena: &Arena,
    kind: FitnessKind,
    es: &EsConfig,
    episode: &EpisodeConfig,
    seed: u64,
) -> Result<(RunLog, Option<DiscoveryArchive>)> {
    let mut objective = RobotObjective::new(arena, kind, episode.clone())?;
    let records = run_es(&mut objective, es, seed)?;
    let log = RunLog {
        fitness_kind: kind.name().to_string(),
        seed,
        config_hash: config_hash(&kind, es, episode, arena),
        records,
    };
    Ok((log, objective.discovery))
}

/// The `n` highest-fitness records, ties to the earlier evaluation.
pub fn select_best(log: &RunLog, n: usize) -> Result<Vec<&EvalRecord>> {
    Ok(select_best_pooled(std::slice::from_ref(log), n)?
        .into_iter()
        .map(|(_, r)| r)
        .collect())
}

/// The `n` best records across several runs, as `(run index, record)`.
/// Ties go to the earlier evaluation, then the earlier run.
pub fn select_best_pooled(logs: &[RunLog], n: usize) -> Result<Vec<(usize, &EvalRecord)>> {
    let available: usize = logs.iter().map(RunLog::len).sum();
    if n > available {
        return Err(Error::SelectionTooLarge {
            requested: n,
            available,
        });
    }
    let mut all: Vec<(usize, &EvalRecord)> = logs
        .iter()
        .enumerate()
        .flat_map(|(run, log)| log.records.iter().map(move |r| (run, r)))
        .collect();
    all.sort_by(|a, b| {
        b.1.fitness
            .total_cmp(&a.1.fitness)
            .then(a.1.eval.cmp(&b.1.eval))
            .then(a.0.cmp(&b.0))
    });
    all.truncate(n);
    Ok(all)
}

/// Champion genotypes of a run, one `eval,w0..w111,sigma` line each.
pub fn champions_csv(log: &RunLog) -> String {
    let mut out = String::from("eval");
    for i in 0..GENOTYPE_LEN {
        write!(out, ",w{i}").unwrap();
    }
    out.push_str(",sigma\n");
    for r in &log.records {
        if let Some(w) = &r.champion {
            if let Ok(g) = Genotype::new(w.clone(), r.sigma) {
                writeln!(out, "{},{}", r.eval, g.to_csv_line()).unwrap();
            }
        }
    }
    out
}
