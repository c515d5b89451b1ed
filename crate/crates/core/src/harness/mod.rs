//! Scenario generation, seeded trial batches and result export.

mod export;
mod scenario;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use export::{export_svgs, render_svg, replay, snapshot_steps, LogStep, TrajectoryLog};
pub use scenario::{generate_scene, u_object, ScenarioSpec, MAX_PLACEMENT_ATTEMPTS};

use crate::baselines::{GreedyOneStepPlanner, GreedyRolloutPlanner, IlsPlanner};
use crate::error::{Error, Result};
use crate::physics::PhysicsConfig;
use crate::planner::{
    derive_rng, run_closed_loop, FailureReason, MctsPlanner, ModelExecutor, Outcome, StepPlanner, TrialRecord,
    TrajectoryStep, UniformRandomPolicy,
};
use crate::scene::{BackupMode, PlannerConfig, Scene, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algo {
    Mcts,
    MctsAvg,
    MctsNoRollout,
    Greedy1,
    GreedyRollout,
    Ils3,
    Ils6,
}

impl Algo {
    pub const ALL: [Algo; 7] = [
        Algo::Mcts,
        Algo::MctsAvg,
        Algo::MctsNoRollout,
        Algo::Greedy1,
        Algo::GreedyRollout,
        Algo::Ils3,
        Algo::Ils6,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algo::Mcts => "mcts",
            Algo::MctsAvg => "mcts-avg",
            Algo::MctsNoRollout => "mcts-no-rollout",
            Algo::Greedy1 => "greedy1",
            Algo::GreedyRollout => "greedy-rollout",
            Algo::Ils3 => "ils3",
            Algo::Ils6 => "ils6",
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algo::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown algorithm {s:?}")))
    }
}

/// Planner and physics parameters read from one flat JSON object.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    pub planner: PlannerConfig,
    pub physics: PhysicsConfig,
}

impl RunConfig {
    pub fn from_json(text: &str) -> std::result::Result<Self, String> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let serde_json::Value::Object(map) = value else {
            return Err("config must be a JSON object".into());
        };
        let keys_of = |v: serde_json::Value| match v {
            serde_json::Value::Object(m) => m.into_iter().map(|(k, _)| k).collect::<Vec<_>>(),
            _ => Vec::new(),
        };
        let planner_keys = keys_of(serde_json::to_value(PlannerConfig::default()).expect("config serializes"));
        let physics_keys = keys_of(serde_json::to_value(PhysicsConfig::default()).expect("config serializes"));
        let mut planner = serde_json::Map::new();
        let mut physics = serde_json::Map::new();
        for (k, v) in map {
            if planner_keys.contains(&k) {
                planner.insert(k, v);
            } else if physics_keys.contains(&k) {
                physics.insert(k, v);
            } else {
                return Err(format!("unknown config key {k:?}"));
            }
        }
        Ok(Self {
            planner: serde_json::from_value(planner.into()).map_err(|e| e.to_string())?,
            physics: serde_json::from_value(physics.into()).map_err(|e| e.to_string())?,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg = Self::from_json(&text).map_err(|m| Error::InvalidConfig(format!("{}: {m}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        let mut map = serde_json::Map::new();
        for v in [
            serde_json::to_value(&self.planner).expect("config serializes"),
            serde_json::to_value(&self.physics).expect("config serializes"),
        ] {
            if let serde_json::Value::Object(m) = v {
                map.extend(m);
            }
        }
        serde_json::to_string_pretty(&map).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.planner.validate()?;
        self.physics.validate()
    }
}

/// Seed of trial `index` under `master`; independent of scheduling.
pub fn trial_seed(master: u64, index: u64) -> u64 {
    derive_rng(master, index).next_u64()
}

/// Runs one closed-loop trial of `algo` from `start`.
///
/// Planning always uses the noiseless model; execution samples friction
/// noise when `physics.noise_std_frac` is positive. Errors are folded into
/// a failed record.
pub fn run_trial(
    scene: &Scene,
    start: &WorldState,
    algo: Algo,
    cfg: &PlannerConfig,
    physics: &PhysicsConfig,
    seed: u64,
) -> TrialRecord {
    let mut cfg = cfg.clone();
    cfg.rng_seed = seed;
    if algo == Algo::MctsAvg {
        cfg.backup_mode = BackupMode::Avg;
    }
    let model = PhysicsConfig {
        noise_std_frac: 0.0,
        ..physics.clone()
    };
    let mut executor = if physics.noise_std_frac > 0.0 {
        ModelExecutor::noisy(physics.clone(), derive_rng(seed, 2))
    } else {
        ModelExecutor::noiseless(model.clone())
    };
    let mut rng = derive_rng(seed, 1);
    let policy = UniformRandomPolicy;

    let mut mcts;
    let mut greedy1;
    let mut greedy_rollout;
    let mut ils;
    let planner: &mut dyn StepPlanner = match algo {
        Algo::Mcts | Algo::MctsAvg => {
            mcts = MctsPlanner::new(&cfg, &model, &policy);
            &mut mcts
        }
        Algo::MctsNoRollout => {
            mcts = MctsPlanner::new(&cfg, &model, &policy);
            mcts.rollout_depth = 0;
            &mut mcts
        }
        Algo::Greedy1 => {
            greedy1 = GreedyOneStepPlanner {
                cfg: &cfg,
                physics: &model,
            };
            &mut greedy1
        }
        Algo::GreedyRollout => {
            greedy_rollout = GreedyRolloutPlanner {
                cfg: &cfg,
                physics: &model,
                policy: &policy,
            };
            &mut greedy_rollout
        }
        Algo::Ils3 | Algo::Ils6 => {
            ils = IlsPlanner::new(&cfg, &model, if algo == Algo::Ils3 { 3 } else { 6 });
            &mut ils
        }
    };
    match run_closed_loop(scene, start, &cfg, planner, &mut executor, &mut rng) {
        Ok(record) => record,
        Err(e) => TrialRecord {
            outcome: Outcome::Failure(FailureReason::Error),
            steps: 0,
            trajectory: vec![TrajectoryStep {
                action: None,
                g: f64::NAN,
                contacted: false,
                state: start.clone(),
            }],
            wall_time: 0.0,
            plan_time: 0.0,
            seed,
            error: Some(e.to_string()),
        },
    }
}

/// Result of one trial within a batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub index: usize,
    pub seed: u64,
    pub outcome: Outcome,
    pub steps: usize,
    pub error: Option<String>,
    /// Seconds of planning per executed action.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plan_time_per_action: Option<f64>,
}

/// Aggregate statistics over a batch. Step statistics cover successful
/// trials only and are absent when there are none.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub algo: Algo,
    pub spec: ScenarioSpec,
    pub noise_p: f64,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub steps_mean: Option<f64>,
    /// Sample standard deviation over `sqrt(n)`.
    pub steps_stderr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plan_time_mean_s: Option<f64>,
    pub failures: BTreeMap<String, usize>,
    pub records: Vec<TrialSummary>,
}

/// Mean and standard error; the error needs at least two samples.
pub fn mean_stderr(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    let n = xs.len();
    if n == 0 {
        return (None, None);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (Some(mean), None);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (Some(mean), Some((var / n as f64).sqrt()))
}

impl BatchSummary {
    pub fn from_trials(algo: Algo, spec: &ScenarioSpec, noise_p: f64, mut records: Vec<TrialSummary>) -> Self {
        records.sort_by_key(|r| r.index);
        let trials = records.len();
        let steps: Vec<f64> = records
            .iter()
            .filter(|r| r.outcome.is_success())
            .map(|r| r.steps as f64)
            .collect();
        let successes = steps.len();
        let (steps_mean, steps_stderr) = mean_stderr(&steps);
        let times: Vec<f64> = records.iter().filter_map(|r| r.plan_time_per_action).collect();
        let mut failures = BTreeMap::new();
        for r in &records {
            if let Outcome::Failure(reason) = r.outcome {
                *failures.entry(reason.as_str().to_string()).or_insert(0) += 1;
            }
        }
        Self {
            algo,
            spec: spec.clone(),
            noise_p,
            trials,
            successes,
            success_rate: if trials == 0 { 0.0 } else { successes as f64 / trials as f64 },
            steps_mean,
            steps_stderr,
            plan_time_mean_s: mean_stderr(&times).0,
            failures,
            records,
        }
    }

    /// Copy with every wall-clock measurement removed.
    pub fn without_timing(&self) -> Self {
        let mut s = self.clone();
        s.plan_time_mean_s = None;
        for r in &mut s.records {
            r.plan_time_per_action = None;
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }

    pub const CSV_HEADER: &'static str = "algo,objects,classes,obstacles,nonconvex,noise_p,trials,successes,success_rate,steps_mean,steps_stderr,plan_time_mean_s";

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>, digits: usize| v.map_or("N.A.".to_string(), |v| format!("{v:.digits$}"));
        format!(
            "{},{},{},{},{},{},{},{},{:.4},{},{},{}",
            self.algo,
            self.spec.n_objects,
            self.spec.n_classes,
            self.spec.n_obstacles,
            self.spec.ratio_nonconvex,
            self.noise_p,
            self.trials,
            self.successes,
            self.success_rate,
            opt(self.steps_mean, 3),
            opt(self.steps_stderr, 3),
            opt(self.plan_time_mean_s, 6),
        )
    }

    /// Writes the CSV header and this summary's row.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        export::write_file(path, &format!("{}\n{}\n", Self::CSV_HEADER, self.csv_row()))
    }
}

/// Scene and start state of trial `index`.
pub fn trial_scene(spec: &ScenarioSpec, index: usize) -> Result<(u64, Scene, WorldState)> {
    let seed = trial_seed(spec.seed, index as u64);
    let (scene, state) = generate_scene(spec, &mut derive_rng(seed, 0))?;
    Ok((seed, scene, state))
}

fn summarize(index: usize, seed: u64, record: &TrialRecord) -> TrialSummary {
    TrialSummary {
        index,
        seed,
        outcome: record.outcome,
        steps: record.steps,
        error: record.error.clone(),
        plan_time_per_action: record.plan_time_per_action(),
    }
}

/// Runs trial `index` of a batch, scene generation included.
pub fn run_indexed_trial(
    spec: &ScenarioSpec,
    index: usize,
    algo: Algo,
    cfg: &PlannerConfig,
    physics: &PhysicsConfig,
) -> TrialSummary {
    match trial_scene(spec, index) {
        Ok((seed, scene, start)) => summarize(index, seed, &run_trial(&scene, &start, algo, cfg, physics, seed)),
        Err(e) => TrialSummary {
            index,
            seed: trial_seed(spec.seed, index as u64),
            outcome: Outcome::Failure(FailureReason::Error),
            steps: 0,
            error: Some(e.to_string()),
            plan_time_per_action: None,
        },
    }
}

/// Runs `trials` seeded trials on a pool of `workers` threads.
///
/// With more than one batch worker each trial searches single-threaded.
pub fn run_batch(
    spec: &ScenarioSpec,
    algo: Algo,
    cfg: &PlannerConfig,
    physics: &PhysicsConfig,
    trials: usize,
    workers: usize,
) -> Result<BatchSummary> {
    spec.validate()?;
    cfg.validate()?;
    physics.validate()?;
    if trials == 0 {
        return Err(Error::InvalidConfig("trials must be positive".into()));
    }
    let mut cfg = cfg.clone();
    let workers = workers.max(1);
    if workers > 1 {
        cfg.workers = 1;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let records: Vec<TrialSummary> = pool.install(|| {
        (0..trials)
            .into_par_iter()
            .map(|i| run_indexed_trial(spec, i, algo, &cfg, physics))
            .collect()
    });
    Ok(BatchSummary::from_trials(algo, spec, physics.noise_std_frac, records))
}
