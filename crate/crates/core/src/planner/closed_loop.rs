use std::time::Instant;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{relative_improvement, MctsPlanner, RolloutPolicy, SimRng};
use crate::error::{Error, Result};
use crate::objective::{is_sorted, reward_value};
use crate::physics::{step, PhysicsConfig, TransitionResult};
use crate::scene::{is_valid_with_tol, Action, PlannerConfig, Scene, WorldState};

/// True when the best simulated reward offers no relative improvement of at
/// least `nu` over the current one.
pub fn is_trapped(g_current: f64, g_hat: f64, cfg: &PlannerConfig) -> bool {
    relative_improvement(g_current, g_hat) < cfg.nu
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub action: Action,
    /// Best reward the planner expects to reach; `None` skips the trap test.
    pub g_hat: Option<f64>,
}

/// One replanning step of a closed-loop controller.
pub trait StepPlanner {
    fn decide(&mut self, scene: &Scene, state: &WorldState, rng: &mut SimRng) -> Result<Decision>;
}

/// Carries out chosen actions in the (possibly perturbed) world.
pub trait Executor {
    fn execute(&mut self, scene: &Scene, state: &WorldState, action: Action) -> Result<TransitionResult>;
}

/// Executes through the pushing model, sampling friction noise per action
/// when a noise generator is present.
pub struct ModelExecutor {
    pub physics: PhysicsConfig,
    pub noise_rng: Option<SimRng>,
}

impl ModelExecutor {
    pub fn noiseless(physics: PhysicsConfig) -> Self {
        Self {
            physics,
            noise_rng: None,
        }
    }

    pub fn noisy(physics: PhysicsConfig, rng: SimRng) -> Self {
        Self {
            physics,
            noise_rng: Some(rng),
        }
    }
}

impl Executor for ModelExecutor {
    fn execute(&mut self, scene: &Scene, state: &WorldState, action: Action) -> Result<TransitionResult> {
        let rng = self.noise_rng.as_mut().map(|r| r as &mut dyn RngCore);
        step(scene, state, action, &self.physics, rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    Trapped,
    NoContact,
    OutOfBounds,
    StepLimit,
    Error,
}

impl FailureReason {
    pub fn as_str(self) -> &'static str {
        match self {
            FailureReason::Trapped => "trapped",
            FailureReason::NoContact => "no_contact",
            FailureReason::OutOfBounds => "out_of_bounds",
            FailureReason::StepLimit => "step_limit",
            FailureReason::Error => "error",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "reason")]
pub enum Outcome {
    Success,
    Failure(FailureReason),
}

impl Outcome {
    pub fn is_success(self) -> bool {
        self == Outcome::Success
    }
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Outcome::Success => f.write_str("success"),
            Outcome::Failure(r) => write!(f, "failure({})", r.as_str()),
        }
    }
}

/// Observed state after each executed action; the first entry is the start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub action: Option<Action>,
    pub g: f64,
    pub contacted: bool,
    pub state: WorldState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub outcome: Outcome,
    pub steps: usize,
    pub trajectory: Vec<TrajectoryStep>,
    /// Total seconds, planning included.
    pub wall_time: f64,
    /// Seconds spent in the planner.
    pub plan_time: f64,
    pub seed: u64,
    /// Error text when the trial ended with [`FailureReason::Error`].
    pub error: Option<String>,
}

impl TrialRecord {
    pub fn final_state(&self) -> &WorldState {
        &self.trajectory.last().expect("trajectory holds the start state").state
    }

    /// Mean planning seconds per executed action.
    pub fn plan_time_per_action(&self) -> Option<f64> {
        (self.steps > 0).then(|| self.plan_time / self.steps as f64)
    }
}

/// Sorting loop: replan, check the trap condition, execute, observe.
///
/// Ends with success once the observed state is sorted; fails when the
/// planner sees no improvement (`trapped`), after more than
/// `no_contact_limit` consecutive actions without touching a movable, when
/// execution pushes an object out of the workspace, or after `max_actions`.
pub fn run_closed_loop(
    scene: &Scene,
    start: &WorldState,
    cfg: &PlannerConfig,
    planner: &mut dyn StepPlanner,
    executor: &mut dyn Executor,
    rng: &mut SimRng,
) -> Result<TrialRecord> {
    scene.check_state(start)?;
    if !is_valid_with_tol(scene, start, crate::scene::PENETRATION_TOL) {
        return Err(Error::InvalidStartState);
    }
    let t0 = Instant::now();
    let mut plan_time = 0.0;
    let mut state = start.clone();
    let mut g = reward_value(scene, &state, cfg);
    let mut trajectory = vec![TrajectoryStep {
        action: None,
        g,
        contacted: false,
        state: state.clone(),
    }];
    let mut idle = 0usize;

    let outcome = loop {
        if is_sorted(scene, &state, cfg) {
            break Outcome::Success;
        }
        if trajectory.len() > cfg.max_actions {
            break Outcome::Failure(FailureReason::StepLimit);
        }
        let tp = Instant::now();
        let decision = planner.decide(scene, &state, rng)?;
        plan_time += tp.elapsed().as_secs_f64();
        if let Some(g_hat) = decision.g_hat {
            if is_trapped(g, g_hat, cfg) {
                break Outcome::Failure(FailureReason::Trapped);
            }
        }
        let tr = executor.execute(scene, &state, decision.action)?;
        state = tr.next_state;
        g = reward_value(scene, &state, cfg);
        trajectory.push(TrajectoryStep {
            action: Some(decision.action),
            g,
            contacted: tr.contacted_any,
            state: state.clone(),
        });
        if tr.out_of_bounds {
            break Outcome::Failure(FailureReason::OutOfBounds);
        }
        if tr.contacted_any {
            idle = 0;
        } else {
            idle += 1;
            if idle > cfg.no_contact_limit {
                break Outcome::Failure(FailureReason::NoContact);
            }
        }
    };

    Ok(TrialRecord {
        outcome,
        steps: trajectory.len() - 1,
        trajectory,
        wall_time: t0.elapsed().as_secs_f64(),
        plan_time,
        seed: cfg.rng_seed,
        error: None,
    })
}

/// The full sorting planner: MCTS replanning after every executed action.
pub fn plan_and_execute(
    scene: &Scene,
    start: &WorldState,
    cfg: &PlannerConfig,
    physics: &PhysicsConfig,
    policy: &dyn RolloutPolicy,
    executor: &mut dyn Executor,
    rng: &mut SimRng,
) -> Result<TrialRecord> {
    let mut planner = MctsPlanner::new(cfg, physics, policy);
    run_closed_loop(scene, start, cfg, &mut planner, executor, rng)
}
