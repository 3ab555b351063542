//! Batch experiments: seeded ES runs, patrol metrics and heatmaps.
//!
//! A run directory holds, per seed, `runlog_<seed>.csv`, `visits_<seed>.csv`
//! (sparse `eval,cell,count` patrol visits), `distance_<seed>.csv`,
//! `champions_<seed>.csv` and `clusters_<seed>.csv`; plus the shared
//! `arena.txt`, `run.meta`, `metrics.csv` and `heatmap_<selection>_<ell>.pgm`.
//! Metrics and heatmaps can be recomputed from the directory alone.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::arena::{Arena, PatrolGrid};
use crate::clustering::ClusterSet;
use crate::controller::{InitScale, INITIAL_SIGMA};
use crate::error::{Error, Result};
use crate::evolution::{
    champions_csv, es_run_with_archive, select_best, select_best_pooled, EsConfig, RunLog, StepRule,
};
use crate::fitness::{curiosity_fitness, CommitPolicy, FitnessKind, CURIOSITY_EPSILON};
use crate::sim::{run_episode_with_weights, EpisodeConfig};

pub const DEFAULT_ELLS: [u32; 3] = [2, 5, 10];
pub const DEFAULT_HEATMAP_ELL: u32 = 10;

/// Which individuals' episodes feed the patrol grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Selection {
    /// The `n` fittest individuals.
    Best(usize),
    All,
}

impl fmt::Display for Selection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Selection::Best(n) => write!(f, "best_{n}"),
            Selection::All => f.write_str("all"),
        }
    }
}

impl FromStr for Selection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "all" {
            return Ok(Selection::All);
        }
        s.strip_prefix("best_")
            .and_then(|n| n.parse().ok())
            .filter(|&n| n > 0)
            .map(Selection::Best)
            .ok_or_else(|| Error::Config(format!("unknown selection {s:?}")))
    }
}

/// How the best-n selection is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BestPool {
    /// The n best over all runs together.
    #[default]
    Pooled,
    /// The n best of each run.
    PerRun,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub arena: PathBuf,
    pub fitness: FitnessKind,
    pub runs: usize,
    pub budget: usize,
    pub steps: usize,
    pub seeds: Vec<u64>,
    pub output: PathBuf,
    pub selections: Vec<Selection>,
    pub best_pool: BestPool,
    pub ells: Vec<u32>,
    pub heatmap_ell: u32,
    pub workers: usize,
    pub init: InitScale,
    pub step_rule: StepRule,
}

impl ExperimentConfig {
    /// Defaults for everything except the arena, fitness and output.
    pub fn new(arena: impl Into<PathBuf>, fitness: FitnessKind, output: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            arena: arena.into(),
            fitness,
            runs: 11,
            budget: 2000,
            steps: EpisodeConfig::DEFAULT_STEPS,
            seeds: (1..=11).collect(),
            output: output.into(),
            selections: vec![Selection::Best(100), Selection::All],
            best_pool: BestPool::Pooled,
            ells: DEFAULT_ELLS.to_vec(),
            heatmap_ell: DEFAULT_HEATMAP_ELL,
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            init: InitScale::default(),
            step_rule: StepRule::OneFifth,
        }
    }

    /// Parses the `key = value` config format. Relative paths are resolved
    /// against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let entries = parse_key_values(text)?;
        let get = |key: &str| entries.get(key).map(|(line, v)| (*line, v.as_str()));
        let (_, arena) = get("arena").ok_or_else(|| Error::Config("missing key `arena`".into()))?;
        let (_, output) = get("output").ok_or_else(|| Error::Config("missing key `output`".into()))?;
        let (fline, fitness) =
            get("fitness").ok_or_else(|| Error::Config("missing key `fitness`".into()))?;
        let mut fitness: FitnessKind = fitness.parse().map_err(|e: Error| Error::ConfigParse {
            line: fline,
            msg: e.to_string(),
        })?;

        let mut cfg = ExperimentConfig::new(base_dir.join(arena), fitness, base_dir.join(output));

        for (key, (line, value)) in &entries {
            let line = *line;
            let bad = |what: &str| Error::ConfigParse {
                line,
                msg: format!("bad {what} {value:?}"),
            };
            match key.as_str() {
                "arena" | "output" | "fitness" => {}
                "runs" => cfg.runs = value.parse().map_err(|_| bad("runs"))?,
                "budget" => cfg.budget = value.parse().map_err(|_| bad("budget"))?,
                "steps" => cfg.steps = value.parse().map_err(|_| bad("steps"))?,
                "workers" => cfg.workers = value.parse().map_err(|_| bad("workers"))?,
                "heatmap_ell" => cfg.heatmap_ell = value.parse().map_err(|_| bad("heatmap_ell"))?,
                "seeds" => cfg.seeds = parse_list(value).map_err(|_| bad("seeds"))?,
                "ells" => cfg.ells = parse_list(value).map_err(|_| bad("ells"))?,
                "selection" => {
                    cfg.selections = value
                        .split(',')
                        .map(str::parse)
                        .collect::<Result<_>>()
                        .map_err(|_| bad("selection"))?
                }
                "best_pool" => {
                    cfg.best_pool = match value.as_str() {
                        "pooled" => BestPool::Pooled,
                        "per_run" => BestPool::PerRun,
                        _ => return Err(bad("best_pool")),
                    }
                }
                "init_variance" => {
                    cfg.init = InitScale::Variance(value.parse().map_err(|_| bad("init_variance"))?)
                }
                "init_std" => cfg.init = InitScale::StdDev(value.parse().map_err(|_| bad("init_std"))?),
                "step_rule" => {
                    cfg.step_rule = match value.as_str() {
                        "one_fifth" => StepRule::OneFifth,
                        "window" => StepRule::Window {
                            length: 10,
                            factor: 0.85,
                        },
                        _ => return Err(bad("step_rule")),
                    }
                }
                "epsilon" => {
                    let eps: f64 = value.parse().map_err(|_| bad("epsilon"))?;
                    match &mut fitness {
                        FitnessKind::Curiosity { epsilon } | FitnessKind::Discovery { epsilon, .. } => {
                            *epsilon = eps
                        }
                        _ => return Err(bad("epsilon for this fitness kind")),
                    }
                }
                "novelty_k" => match &mut fitness {
                    FitnessKind::Novelty { k, .. } => *k = value.parse().map_err(|_| bad("novelty_k"))?,
                    _ => return Err(bad("novelty_k for this fitness kind")),
                },
                "discovery_commit" => match &mut fitness {
                    FitnessKind::Discovery { commit, .. } => {
                        *commit = match value.as_str() {
                            "all" => CommitPolicy::All,
                            "accepted" => CommitPolicy::Accepted,
                            _ => return Err(bad("discovery_commit")),
                        }
                    }
                    _ => return Err(bad("discovery_commit for this fitness kind")),
                },
                "reset_on_restart" => {
                    let flag = parse_bool(value).ok_or_else(|| bad("reset_on_restart"))?;
                    match &mut fitness {
                        FitnessKind::Discovery { reset_on_restart, .. }
                        | FitnessKind::Novelty { reset_on_restart, .. } => *reset_on_restart = flag,
                        _ => return Err(bad("reset_on_restart for this fitness kind")),
                    }
                }
                other => {
                    return Err(Error::ConfigParse {
                        line,
                        msg: format!("unknown key {other:?}"),
                    })
                }
            }
        }
        cfg.fitness = fitness;
        if !entries.contains_key("seeds") {
            cfg.seeds = (1..=cfg.runs as u64).collect();
        }
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        ExperimentConfig::parse(&text, base)
    }

    /// Checks everything that can fail before any simulation starts and
    /// loads the arena.
    pub fn validate(&self) -> Result<Arena> {
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if self.seeds.len() != self.runs {
            return Err(Error::Config(format!(
                "{} seeds given for {} runs",
                self.seeds.len(),
                self.runs
            )));
        }
        let mut unique = self.seeds.clone();
        unique.sort_unstable();
        unique.dedup();
        if unique.len() != self.seeds.len() {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        if self.budget == 0 || self.steps == 0 {
            return Err(Error::Config("budget and steps must be at least 1".into()));
        }
        if self.ells.is_empty() || self.ells.contains(&0) || self.heatmap_ell == 0 {
            return Err(Error::Config("visit thresholds must be at least 1".into()));
        }
        if self.selections.is_empty() {
            return Err(Error::Config("no selection mode given".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        self.fitness.validate()?;
        Arena::from_path(&self.arena)
    }

    pub fn arena_name(&self) -> String {
        self.arena
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "arena".into())
    }

    fn es_config(&self) -> EsConfig {
        EsConfig {
            budget: self.budget,
            initial_sigma: INITIAL_SIGMA,
            init: self.init,
            step_rule: self.step_rule,
            ..EsConfig::default()
        }
    }
}

fn parse_key_values(text: &str) -> Result<BTreeMap<String, (usize, String)>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        // `#` starts a comment anywhere on the line.
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::ConfigParse {
            line: i + 1,
            msg: format!("expected `key = value`, got {line:?}"),
        })?;
        let key = k.trim().to_string();
        if out.insert(key.clone(), (i + 1, v.trim().to_string())).is_some() {
            return Err(Error::ConfigParse {
                line: i + 1,
                msg: format!("duplicate key {key:?}"),
            });
        }
    }
    Ok(out)
}

fn parse_list<T: FromStr>(s: &str) -> std::result::Result<Vec<T>, ()> {
    s.split(',')
        .map(|x| x.trim().parse().map_err(|_| ()))
        .collect()
}

fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "true" | "yes" | "1" => Some(true),
        "false" | "no" | "0" => Some(false),
        _ => None,
    }
}

/// Percentage of free cells visited at least `ell` times.
pub fn patrol_percentage(grid: &PatrolGrid, ell: u32) -> f64 {
    let free = grid.free_cells();
    if free == 0 {
        return 0.0;
    }
    100.0 * grid.cells_at_least(ell) as f64 / free as f64
}

/// 8-bit grayscale image, one pixel per arena cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

pub const WALL_PIXEL: u8 = 0;
pub const UNDER_PIXEL: u8 = 128;
pub const VISITED_PIXEL: u8 = 255;

impl GrayImage {
    /// Plain (P2) PGM.
    pub fn to_pgm(&self) -> String {
        let mut out = format!("P2\n{} {}\n255\n", self.width, self.height);
        for row in self.pixels.chunks(self.width) {
            let line: Vec<String> = row.iter().map(u8::to_string).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }
}

/// Walls black, cells visited at least `ell` times white, the rest gray.
pub fn heatmap(grid: &PatrolGrid, ell: u32) -> GrayImage {
    let pixels = grid
        .counts()
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            if !grid.is_free_index(i) {
                WALL_PIXEL
            } else if c >= ell {
                VISITED_PIXEL
            } else {
                UNDER_PIXEL
            }
        })
        .collect();
    GrayImage {
        width: grid.width(),
        height: grid.height(),
        pixels,
    }
}

/// Patrol coverage for one selection mode.
#[derive(Debug, Clone, PartialEq)]
pub struct PatrolMetrics {
    pub selection: Selection,
    pub ells: Vec<u32>,
    /// `per_run[run][i]` is p(ells[i]) for that run.
    pub per_run: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    /// Sample standard deviation across runs (0 for a single run).
    pub std: Vec<f64>,
}

impl PatrolMetrics {
    pub fn p_of_ell(&self, ell: u32) -> Option<(f64, f64)> {
        let i = self.ells.iter().position(|&e| e == ell)?;
        Some((self.mean[i], self.std[i]))
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Merged patrol grid per run for one selection mode.
pub fn selection_grids(
    arena: &Arena,
    logs: &[RunLog],
    selection: Selection,
    pool: BestPool,
) -> Result<Vec<PatrolGrid>> {
    let mut grids: Vec<PatrolGrid> = logs.iter().map(|_| PatrolGrid::new(arena)).collect();
    match (selection, pool) {
        (Selection::All, _) => {
            for (grid, log) in grids.iter_mut().zip(logs) {
                for r in &log.records {
                    grid.add_sparse(&r.visits);
                }
            }
        }
        (Selection::Best(n), BestPool::Pooled) => {
            for (run, r) in select_best_pooled(logs, n)? {
                grids[run].add_sparse(&r.visits);
            }
        }
        (Selection::Best(n), BestPool::PerRun) => {
            for (grid, log) in grids.iter_mut().zip(logs) {
                for r in select_best(log, n)? {
                    grid.add_sparse(&r.visits);
                }
            }
        }
    }
    Ok(grids)
}

pub fn metrics_for(grids: &[PatrolGrid], selection: Selection, ells: &[u32]) -> PatrolMetrics {
    let per_run: Vec<Vec<f64>> = grids
        .iter()
        .map(|g| ells.iter().map(|&e| patrol_percentage(g, e)).collect())
        .collect();
    let (mean, std) = (0..ells.len())
        .map(|i| mean_std(&per_run.iter().map(|r| r[i]).collect::<Vec<_>>()))
        .unzip();
    PatrolMetrics {
        selection,
        ells: ells.to_vec(),
        per_run,
        mean,
        std,
    }
}

/// Ordering checks on a set of metrics: p(ℓ) non-increasing in ℓ per run
/// and in aggregate, and the all-individuals selection covering at least as
/// much as any best-n selection, run by run. Returns one message per
/// violation.
pub fn monotonicity_violations(metrics: &[PatrolMetrics]) -> Vec<String> {
    let mut out = Vec::new();
    for m in metrics {
        let mut order: Vec<usize> = (0..m.ells.len()).collect();
        order.sort_by_key(|&i| m.ells[i]);
        for w in order.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            for (run, r) in m.per_run.iter().enumerate() {
                if r[hi] > r[lo] {
                    out.push(format!(
                        "{}: run {run} p({}) = {} exceeds p({}) = {}",
                        m.selection, m.ells[hi], r[hi], m.ells[lo], r[lo]
                    ));
                }
            }
            if m.mean[hi] > m.mean[lo] {
                out.push(format!(
                    "{}: mean p({}) exceeds mean p({})",
                    m.selection, m.ells[hi], m.ells[lo]
                ));
            }
        }
    }
    if let Some(all) = metrics.iter().find(|m| m.selection == Selection::All) {
        for best in metrics.iter().filter(|m| m.selection != Selection::All) {
            for (i, &ell) in best.ells.iter().enumerate() {
                let Some(j) = all.ells.iter().position(|&e| e == ell) else {
                    continue;
                };
                for (run, (b, a)) in best.per_run.iter().zip(&all.per_run).enumerate() {
                    if b[i] > a[j] {
                        out.push(format!(
                            "run {run}: {} p({ell}) = {} exceeds all-individuals {}",
                            best.selection, b[i], a[j]
                        ));
                    }
                }
            }
        }
    }
    out
}

pub const METRICS_HEADER: &str = "fitness_kind,arena,selection,ell,mean,std";

pub fn metrics_csv(fitness_kind: &str, arena_name: &str, metrics: &[PatrolMetrics]) -> String {
    let mut out = format!("{METRICS_HEADER}\n");
    for m in metrics {
        for (i, ell) in m.ells.iter().enumerate() {
            writeln!(
                out,
                "{fitness_kind},{arena_name},{},{ell},{:.2},{:.2}",
                m.selection, m.mean[i], m.std[i]
            )
            .unwrap();
        }
    }
    out
}

/// Everything produced by [`run_experiment`].
#[derive(Debug)]
pub struct ExperimentReport {
    pub output: PathBuf,
    pub logs: Vec<RunLog>,
    pub metrics: Vec<PatrolMetrics>,
    pub violations: Vec<String>,
}

impl ExperimentReport {
    pub fn metrics(&self, selection: Selection) -> Option<&PatrolMetrics> {
        self.metrics.iter().find(|m| m.selection == selection)
    }
}

/// Runs every seed, then aggregates and writes all output files.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let arena = cfg.validate()?;
    std::fs::create_dir_all(&cfg.output).map_err(|e| Error::io(&cfg.output, e))?;

    let es = cfg.es_config();
    let episode = EpisodeConfig::for_arena(&arena).with_steps(cfg.steps);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let runs: Vec<Result<(RunLog, ClusterSet)>> = pool.install(|| {
        cfg.seeds
            .par_iter()
            .map(|&seed| {
                let (log, archive) = es_run_with_archive(&arena, cfg.fitness, &es, &episode, seed)?;
                let clusters = match archive {
                    Some(a) => a.clusters().clone(),
                    None => best_individual_clusters(&arena, &log, cfg.fitness, &episode)?,
                };
                Ok((log, clusters))
            })
            .collect()
    });
    let mut logs = Vec::with_capacity(runs.len());
    for run in runs {
        let (log, clusters) = run?;
        let seed = log.seed;
        write_atomic(&cfg.output.join(format!("runlog_{seed}.csv")), &log.to_csv())?;
        write_atomic(&cfg.output.join(format!("visits_{seed}.csv")), &visits_csv(&log))?;
        write_atomic(&cfg.output.join(format!("distance_{seed}.csv")), &distance_csv(&log))?;
        write_atomic(&cfg.output.join(format!("champions_{seed}.csv")), &champions_csv(&log))?;
        write_atomic(&cfg.output.join(format!("clusters_{seed}.csv")), &clusters.to_csv())?;
        logs.push(log);
    }
    write_atomic(&cfg.output.join("arena.txt"), &arena.to_string())?;
    let meta = RunMeta {
        fitness_kind: cfg.fitness.name().to_string(),
        arena_name: cfg.arena_name(),
        seeds: cfg.seeds.clone(),
        selections: cfg.selections.clone(),
        best_pool: cfg.best_pool,
        ells: cfg.ells.clone(),
        heatmap_ell: cfg.heatmap_ell,
    };
    write_atomic(&cfg.output.join(RunMeta::FILE), &meta.to_text())?;

    let (metrics, violations) = aggregate(&cfg.output, &arena, &logs, &meta)?;
    Ok(ExperimentReport {
        output: cfg.output.clone(),
        logs,
        metrics,
        violations,
    })
}

fn aggregate(
    dir: &Path,
    arena: &Arena,
    logs: &[RunLog],
    meta: &RunMeta,
) -> Result<(Vec<PatrolMetrics>, Vec<String>)> {
    let mut metrics = Vec::new();
    for &selection in &meta.selections {
        let grids = selection_grids(arena, logs, selection, meta.best_pool)?;
        metrics.push(metrics_for(&grids, selection, &meta.ells));
        let merged = merge_all(arena, &grids);
        write_atomic(
            &dir.join(format!("heatmap_{selection}_{}.pgm", meta.heatmap_ell)),
            &heatmap(&merged, meta.heatmap_ell).to_pgm(),
        )?;
    }
    write_atomic(
        &dir.join("metrics.csv"),
        &metrics_csv(&meta.fitness_kind, &meta.arena_name, &metrics),
    )?;
    let violations = monotonicity_violations(&metrics);
    Ok((metrics, violations))
}

fn merge_all(arena: &Arena, grids: &[PatrolGrid]) -> PatrolGrid {
    let mut merged = PatrolGrid::new(arena);
    for g in grids {
        merged.merge(g);
    }
    merged
}

/// ε-means clusters of the best individual's stream, for inspection.
fn best_individual_clusters(
    arena: &Arena,
    log: &RunLog,
    kind: FitnessKind,
    episode: &EpisodeConfig,
) -> Result<ClusterSet> {
    let best = log.best().expect("a run has at least one record");
    let weights = best
        .champion
        .as_ref()
        .expect("the best record was accepted as champion");
    let result = run_episode_with_weights(arena, weights, episode)?;
    let epsilon = kind.epsilon().unwrap_or(CURIOSITY_EPSILON);
    Ok(curiosity_fitness(&result.stream, epsilon)?.1)
}

fn visits_csv(log: &RunLog) -> String {
    let mut out = String::from("eval,cell,count\n");
    for r in &log.records {
        for (cell, n) in &r.visits {
            writeln!(out, "{},{cell},{n}", r.eval).unwrap();
        }
    }
    out
}

fn distance_csv(log: &RunLog) -> String {
    let mut out = String::from("eval,max_distance\n");
    for r in &log.records {
        writeln!(out, "{},{}", r.eval, r.max_distance).unwrap();
    }
    out
}

/// Writes through a temporary sibling file, then renames into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Aggregation settings saved next to the run logs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMeta {
    pub fitness_kind: String,
    pub arena_name: String,
    pub seeds: Vec<u64>,
    pub selections: Vec<Selection>,
    pub best_pool: BestPool,
    pub ells: Vec<u32>,
    pub heatmap_ell: u32,
}

impl RunMeta {
    pub const FILE: &'static str = "run.meta";

    fn to_text(&self) -> String {
        let join = |v: Vec<String>| v.join(",");
        format!(
            "fitness = {}\narena_name = {}\nseeds = {}\nselection = {}\nbest_pool = {}\nells = {}\nheatmap_ell = {}\npatrol_cell = arena cell\nlog_base = e\n",
            self.fitness_kind,
            self.arena_name,
            join(self.seeds.iter().map(u64::to_string).collect()),
            join(self.selections.iter().map(Selection::to_string).collect()),
            match self.best_pool {
                BestPool::Pooled => "pooled",
                BestPool::PerRun => "per_run",
            },
            join(self.ells.iter().map(u32::to_string).collect()),
            self.heatmap_ell,
        )
    }

    fn parse(text: &str, path: &Path) -> Result<Self> {
        let kv = parse_key_values(text)?;
        let bad = |msg: String| Error::RunOutput {
            path: path.to_path_buf(),
            msg,
        };
        let get = |k: &str| {
            kv.get(k)
                .map(|(_, v)| v.as_str())
                .ok_or_else(|| bad(format!("missing key {k:?}")))
        };
        Ok(RunMeta {
            fitness_kind: get("fitness")?.to_string(),
            arena_name: get("arena_name")?.to_string(),
            seeds: parse_list(get("seeds")?).map_err(|_| bad("bad seeds".into()))?,
            selections: get("selection")?
                .split(',')
                .map(str::parse)
                .collect::<Result<_>>()?,
            best_pool: match get("best_pool")? {
                "pooled" => BestPool::Pooled,
                "per_run" => BestPool::PerRun,
                other => return Err(bad(format!("bad best_pool {other:?}"))),
            },
            ells: parse_list(get("ells")?).map_err(|_| bad("bad ells".into()))?,
            heatmap_ell: get("heatmap_ell")?
                .parse()
                .map_err(|_| bad("bad heatmap_ell".into()))?,
        })
    }
}

/// A run directory read back from disk.
#[derive(Debug)]
pub struct RunDir {
    pub arena: Arena,
    pub meta: RunMeta,
    pub logs: Vec<RunLog>,
}

impl RunDir {
    pub fn load(dir: &Path) -> Result<RunDir> {
        let read = |name: &str| {
            let p = dir.join(name);
            std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))
        };
        let arena = Arena::parse(&read("arena.txt")?)?;
        let meta = RunMeta::parse(&read(RunMeta::FILE)?, &dir.join(RunMeta::FILE))?;
        let mut logs = Vec::with_capacity(meta.seeds.len());
        for seed in &meta.seeds {
            let log_name = format!("runlog_{seed}.csv");
            let mut log = RunLog::from_csv(&read(&log_name)?).map_err(|msg| Error::RunOutput {
                path: dir.join(&log_name),
                msg,
            })?;
            let visits_name = format!("visits_{seed}.csv");
            attach_visits(&mut log, &read(&visits_name)?).map_err(|msg| Error::RunOutput {
                path: dir.join(&visits_name),
                msg,
            })?;
            logs.push(log);
        }
        Ok(RunDir { arena, meta, logs })
    }

    /// Recomputes metrics from the logs and rewrites `metrics.csv` and the
    /// heatmaps.
    pub fn recompute(&self, dir: &Path) -> Result<(Vec<PatrolMetrics>, Vec<String>)> {
        aggregate(dir, &self.arena, &self.logs, &self.meta)
    }

    /// Per-run merged grids summed over all runs, for one selection.
    pub fn merged_grid(&self, selection: Selection) -> Result<PatrolGrid> {
        let grids = selection_grids(&self.arena, &self.logs, selection, self.meta.best_pool)?;
        Ok(merge_all(&self.arena, &grids))
    }
}

fn attach_visits(log: &mut RunLog, text: &str) -> std::result::Result<(), String> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "eval,cell,count")) => {}
        _ => return Err("expected header eval,cell,count".into()),
    }
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<u64> = line
            .split(',')
            .map(|x| x.trim().parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| format!("line {}: bad number", i + 1))?;
        let [eval, cell, count] = f[..] else {
            return Err(format!("line {}: expected 3 fields", i + 1));
        };
        let rec = log
            .records
            .get_mut((eval as usize).wrapping_sub(1))
            .filter(|r| r.eval == eval as usize)
            .ok_or_else(|| format!("line {}: unknown eval {eval}", i + 1))?;
        rec.visits.push((cell as u32, count as u32));
    }
    Ok(())
}
