//! Discrete-time robot/human simulation with disturbance and coverage
//! metrics, batch evaluation over seeded restarts, and an exhaustive offline
//! oracle for small instances.
//!
//! Time runs over steps `t = 0..T`. At every step the robot and the human each
//! occupy one room; a step where they share a room counts as one disturbance.
//! The robot stays `T_r` steps in every room it enters and replans when that
//! stay ends. Coverage holds once the robot has spent at least `T_r` steps in
//! every room; `t_c` is the number of steps elapsed when that first happens.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::activity::OccupancyTrace;
use crate::error::{Error, Result};
use crate::map::SemanticMap;
use crate::narrator::{narrate, ObservationHistory, TemplateRegistry, DEFAULT_WINDOW};
use crate::policy::{select_next_partition, PolicyKind};
use crate::reasoner::{Grounding, ScoreMode, DEFAULT_BINDING};
use crate::scorer::Backend;

pub const DEFAULT_HORIZON: u32 = 500;
pub const HISTOGRAM_BIN_WIDTH: u32 = 10;
/// Largest number of room sequences the oracle will enumerate.
pub const ORACLE_LIMIT: u128 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Steps the robot spends in a room once it enters (`T_r`).
    pub room_time: u32,
    /// Number of simulated steps (`T`).
    pub horizon: u32,
    pub master_seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            room_time: 25,
            horizon: DEFAULT_HORIZON,
            master_seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.room_time == 0 || self.room_time > self.horizon {
            return Err(Error::Config(format!(
                "room time {} must lie in [1, horizon = {}]",
                self.room_time, self.horizon
            )));
        }
        Ok(())
    }

    /// Generator for one restart: the master seed selects the key and the
    /// restart index the stream, so restarts never share random numbers.
    pub fn restart_rng(&self, restart: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(restart);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunMetrics {
    /// Total disturbance steps.
    pub d_t: u32,
    /// Steps elapsed when coverage first held.
    pub t_c: Option<u32>,
    /// Coverage never reached within the horizon.
    pub failed: bool,
    pub start_room: usize,
}

/// Per-step robot rooms alongside the metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub metrics: RunMetrics,
    pub robot_rooms: Vec<usize>,
    pub decisions: Vec<Decision>,
}

/// One replanning step.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub time: u32,
    pub scores: Arc<BTreeMap<u32, f64>>,
    pub partition: u32,
}

/// Everything a run needs besides the policy and the seed.
pub struct Scenario<'a> {
    map: &'a SemanticMap,
    trace: &'a OccupancyTrace,
    backend: &'a dyn Backend,
    templates: TemplateRegistry,
    template: String,
    binding: String,
    window: usize,
    mode: ScoreMode,
    grounding: Grounding<'a>,
    partition_rooms: BTreeMap<u32, usize>,
    /// Every partition at score zero, handed to the naive policy.
    unscored: Arc<BTreeMap<u32, f64>>,
    cache: Mutex<HashMap<String, Arc<BTreeMap<u32, f64>>>>,
}

impl<'a> Scenario<'a> {
    pub fn new(map: &'a SemanticMap, trace: &'a OccupancyTrace, backend: &'a dyn Backend) -> Self {
        Scenario {
            map,
            trace,
            backend,
            templates: TemplateRegistry::default(),
            template: "default".into(),
            binding: DEFAULT_BINDING.into(),
            window: DEFAULT_WINDOW,
            mode: ScoreMode::default(),
            grounding: Grounding::new(map),
            partition_rooms: map.partitions().iter().map(|p| (p.id, p.room_index)).collect(),
            unscored: Arc::new(map.partitions().iter().map(|p| (p.id, 0.0)).collect()),
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_templates(mut self, templates: TemplateRegistry) -> Self {
        self.templates = templates;
        self
    }

    pub fn with_template(mut self, id: &str) -> Self {
        self.template = id.to_string();
        self
    }

    pub fn with_binding(mut self, binding: &str) -> Self {
        self.binding = binding.to_string();
        self
    }

    pub fn with_window(mut self, n: usize) -> Self {
        self.window = n;
        self
    }

    pub fn with_score_mode(mut self, mode: ScoreMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn map(&self) -> &SemanticMap {
        self.map
    }

    pub fn trace(&self) -> &OccupancyTrace {
        self.trace
    }

    /// Prompt the robot would build at step `t`.
    pub fn prompt_at(&self, t: u32) -> Result<String> {
        let history = ObservationHistory::from_log(self.trace.completed_by(t), self.window, Some(self.map));
        Ok(narrate(&history, &self.template, &self.templates)?.text + &self.binding)
    }

    /// Partition scores for the prompt at step `t`, memoized by prompt text.
    pub fn partition_scores_at(&self, t: u32) -> Result<Arc<BTreeMap<u32, f64>>> {
        let prompt = self.prompt_at(t)?;
        if let Some(hit) = self.cache.lock().expect("cache lock").get(&prompt) {
            return Ok(Arc::clone(hit));
        }
        let scores = Arc::new(
            self.grounding
                .relevancy(&prompt, self.backend, self.mode)?
                .partition_scores,
        );
        self.cache
            .lock()
            .expect("cache lock")
            .insert(prompt, Arc::clone(&scores));
        Ok(scores)
    }

    fn check(&self, config: &SimConfig) -> Result<()> {
        config.validate()?;
        if self.trace.horizon() < config.horizon {
            return Err(Error::Config(format!(
                "human trace covers {} steps but the horizon is {}",
                self.trace.horizon(),
                config.horizon
            )));
        }
        if self.trace.n_rooms != self.map.n_rooms() {
            return Err(Error::Config(format!(
                "trace has {} rooms, map has {}",
                self.trace.n_rooms,
                self.map.n_rooms()
            )));
        }
        self.templates.get(&self.template)?;
        Ok(())
    }
}

/// Runs one seeded restart.
pub fn run_once(scenario: &Scenario<'_>, policy: PolicyKind, config: &SimConfig, restart: u64) -> Result<RunMetrics> {
    run_inner(scenario, policy, config, restart, false).map(|r| r.metrics)
}

/// Like [`run_once`], also returning the robot's room at every step.
pub fn run_traced(scenario: &Scenario<'_>, policy: PolicyKind, config: &SimConfig, restart: u64) -> Result<RunTrace> {
    run_inner(scenario, policy, config, restart, true)
}

fn run_inner(
    scenario: &Scenario<'_>,
    policy: PolicyKind,
    config: &SimConfig,
    restart: u64,
    keep_trace: bool,
) -> Result<RunTrace> {
    scenario.check(config)?;
    let n_rooms = scenario.map.n_rooms();
    let tr = config.room_time;
    let mut rng = config.restart_rng(restart);
    let start_room = rng.random_range(0..n_rooms);
    let mut room = start_room;
    let mut timer = tr;
    let mut time_in = vec![0u32; n_rooms];
    let mut d_t = 0u32;
    let mut t_c = None;
    let mut robot_rooms = Vec::new();
    let mut decisions = Vec::new();
    for t in 0..config.horizon {
        if timer == 0 {
            // naive ignores the scores, so the backend is not consulted
            let scores = if policy == PolicyKind::Naive {
                scenario.unscored.clone()
            } else {
                scenario.partition_scores_at(t)?
            };
            let part = if scores.len() == 1 {
                *scores.keys().next().expect("one partition")
            } else {
                select_next_partition(policy, &scores, &mut rng)?
            };
            room = scenario.partition_rooms[&part];
            timer = tr;
            if keep_trace {
                decisions.push(Decision {
                    time: t,
                    scores,
                    partition: part,
                });
            }
        }
        debug_assert!(room < n_rooms && timer <= tr);
        let human = scenario.trace.room_at(t);
        if human == room {
            d_t += 1;
        }
        time_in[room] += 1;
        timer -= 1;
        if t_c.is_none() && time_in.iter().all(|&x| x >= tr) {
            t_c = Some(t + 1);
        }
        if keep_trace {
            robot_rooms.push(room);
        }
    }
    Ok(RunTrace {
        metrics: RunMetrics {
            d_t,
            t_c,
            failed: t_c.is_none(),
            start_room,
        },
        robot_rooms,
        decisions,
    })
}

/// Disturbance and coverage of a fixed per-step robot room sequence.
pub fn evaluate_rooms(robot_rooms: &[usize], trace: &OccupancyTrace, room_time: u32) -> RunMetrics {
    let mut time_in = vec![0u32; trace.n_rooms];
    let mut d_t = 0;
    let mut t_c = None;
    for (t, &r) in robot_rooms.iter().enumerate() {
        d_t += u32::from(trace.room_at(t as u32) == r);
        time_in[r] += 1;
        if t_c.is_none() && time_in.iter().all(|&x| x >= room_time) {
            t_c = Some(t as u32 + 1);
        }
    }
    RunMetrics {
        d_t,
        t_c,
        failed: t_c.is_none(),
        start_room: robot_rooms.first().copied().unwrap_or(0),
    }
}

/// Result of one restart inside a batch.
#[derive(Debug, Clone, PartialEq)]
pub enum RunOutcome {
    Completed(RunMetrics),
    /// The scoring backend failed; excluded from the summary statistics.
    Aborted(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub restarts: usize,
    pub completed: usize,
    pub aborted: usize,
    pub mean_d_t: f64,
    pub std_d_t: f64,
    /// Over runs that reached coverage.
    pub mean_t_c: Option<f64>,
    pub std_t_c: Option<f64>,
    pub failure_pct: f64,
    pub histogram_bin_width: u32,
    /// `histogram[k]` counts runs with `D_T` in `[k*w, (k+1)*w)`.
    pub histogram: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchResult {
    /// Indexed by restart.
    pub outcomes: Vec<RunOutcome>,
    pub summary: BatchSummary,
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

pub fn summarize(outcomes: &[RunOutcome], horizon: u32) -> BatchSummary {
    let done: Vec<&RunMetrics> = outcomes
        .iter()
        .filter_map(|o| match o {
            RunOutcome::Completed(m) => Some(m),
            RunOutcome::Aborted(_) => None,
        })
        .collect();
    let d: Vec<f64> = done.iter().map(|m| m.d_t as f64).collect();
    let tc: Vec<f64> = done.iter().filter_map(|m| m.t_c).map(f64::from).collect();
    let (mean_d_t, std_d_t) = mean_std(&d).unwrap_or((f64::NAN, f64::NAN));
    let tc_stats = mean_std(&tc);
    let failures = done.iter().filter(|m| m.failed).count();
    let mut histogram = vec![0u64; (horizon / HISTOGRAM_BIN_WIDTH) as usize + 1];
    for m in &done {
        histogram[(m.d_t / HISTOGRAM_BIN_WIDTH) as usize] += 1;
    }
    BatchSummary {
        restarts: outcomes.len(),
        completed: done.len(),
        aborted: outcomes.len() - done.len(),
        mean_d_t,
        std_d_t,
        mean_t_c: tc_stats.map(|s| s.0),
        std_t_c: tc_stats.map(|s| s.1),
        failure_pct: if done.is_empty() {
            f64::NAN
        } else {
            100.0 * failures as f64 / done.len() as f64
        },
        histogram_bin_width: HISTOGRAM_BIN_WIDTH,
        histogram,
    }
}

/// Runs `restarts` seeded restarts on up to `jobs` threads (0 = all cores).
/// Results are ordered by restart index whatever the thread count.
pub fn run_batch(
    scenario: &Scenario<'_>,
    policy: PolicyKind,
    config: &SimConfig,
    restarts: usize,
    jobs: usize,
) -> Result<BatchResult> {
    if restarts == 0 {
        return Err(Error::Config("restarts must be at least 1".into()));
    }
    scenario.check(config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let results: Vec<Result<RunMetrics>> = pool.install(|| {
        (0..restarts)
            .into_par_iter()
            .map(|i| run_once(scenario, policy, config, i as u64))
            .collect()
    });
    let mut outcomes = Vec::with_capacity(restarts);
    for r in results {
        match r {
            Ok(m) => outcomes.push(RunOutcome::Completed(m)),
            Err(e) if e.is_backend() => outcomes.push(RunOutcome::Aborted(e.to_string())),
            Err(e) => return Err(e),
        }
    }
    let summary = summarize(&outcomes, config.horizon);
    Ok(BatchResult { outcomes, summary })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleOptions {
    /// Room the robot must occupy in the first slot.
    pub start: Option<usize>,
    /// Only accept sequences that reach coverage.
    pub require_coverage: bool,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            start: None,
            require_coverage: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleSolution {
    pub d_t: u32,
    /// Robot room for each `T_r`-step slot; the last slot may be shorter.
    pub sequence: Vec<usize>,
    pub t_c: Option<u32>,
}

/// Minimum achievable `D_T` over all covering room sequences, or `None` when
/// no sequence reaches coverage within the horizon.
pub fn offline_oracle(map: &SemanticMap, trace: &OccupancyTrace, config: &SimConfig) -> Result<Option<OracleSolution>> {
    offline_oracle_with(map.n_rooms(), trace, config, OracleOptions::default())
}

/// Exhaustive search over one room per `T_r` slot. Among equally good
/// sequences the lexicographically smallest is returned.
pub fn offline_oracle_with(
    n_rooms: usize,
    trace: &OccupancyTrace,
    config: &SimConfig,
    opts: OracleOptions,
) -> Result<Option<OracleSolution>> {
    config.validate()?;
    if trace.horizon() < config.horizon {
        return Err(Error::Config("human trace shorter than the horizon".into()));
    }
    if let Some(s) = opts.start {
        if s >= n_rooms {
            return Err(Error::Config(format!("start room {s} out of range")));
        }
    }
    let tr = config.room_time;
    let slots = config.horizon.div_ceil(tr) as usize;
    let free_slots = if opts.start.is_some() { slots - 1 } else { slots };
    let size = (n_rooms as u128)
        .checked_pow(free_slots as u32)
        .filter(|&s| s <= ORACLE_LIMIT)
        .ok_or_else(|| Error::OracleTooLarge {
            size: (n_rooms as u128).checked_pow(free_slots as u32).unwrap_or(u128::MAX),
            limit: ORACLE_LIMIT,
        })?;
    debug_assert!(size <= ORACLE_LIMIT);

    let slot_len: Vec<u32> = (0..slots as u32).map(|k| (config.horizon - k * tr).min(tr)).collect();
    let cost: Vec<Vec<u32>> = (0..slots as u32)
        .map(|k| {
            let mut c = vec![0u32; n_rooms];
            for t in k * tr..k * tr + slot_len[k as usize] {
                c[trace.room_at(t)] += 1;
            }
            c
        })
        .collect();

    let mut search = Search {
        n_rooms,
        tr,
        cost: &cost,
        slot_len: &slot_len,
        start: opts.start,
        require_coverage: opts.require_coverage,
        seq: Vec::with_capacity(slots),
        time_in: vec![0; n_rooms],
        best: None,
    };
    search.descend(0, 0);
    Ok(search.best.map(|(d_t, sequence)| {
        let per_step: Vec<usize> = sequence
            .iter()
            .zip(&slot_len)
            .flat_map(|(&r, &len)| std::iter::repeat_n(r, len as usize))
            .collect();
        let t_c = evaluate_rooms(&per_step, trace, tr).t_c;
        OracleSolution { d_t, sequence, t_c }
    }))
}

struct Search<'c> {
    n_rooms: usize,
    tr: u32,
    cost: &'c [Vec<u32>],
    slot_len: &'c [u32],
    start: Option<usize>,
    require_coverage: bool,
    seq: Vec<usize>,
    time_in: Vec<u32>,
    best: Option<(u32, Vec<usize>)>,
}

impl Search<'_> {
    fn descend(&mut self, k: usize, acc: u32) {
        // strict improvement only, so the first optimum found (lex smallest) stays
        if self.best.as_ref().is_some_and(|(b, _)| acc >= *b) {
            return;
        }
        let slots = self.cost.len();
        if self.require_coverage {
            let uncovered = self.time_in.iter().filter(|&&x| x < self.tr).count();
            if uncovered > slots - k {
                return;
            }
        }
        if k == slots {
            if !self.require_coverage || self.time_in.iter().all(|&x| x >= self.tr) {
                self.best = Some((acc, self.seq.clone()));
            }
            return;
        }
        let rooms: Vec<usize> = match (k, self.start) {
            (0, Some(s)) => vec![s],
            _ => (0..self.n_rooms).collect(),
        };
        for r in rooms {
            self.seq.push(r);
            self.time_in[r] += self.slot_len[k];
            self.descend(k + 1, acc + self.cost[k][r]);
            self.time_in[r] -= self.slot_len[k];
            self.seq.pop();
        }
    }
}
