//! Comparison planners: one-step greedy, greedy over random rollouts, tree
//! search without rollouts, and iterated local search over fixed-length
//! action sequences.

use rand::Rng;

use crate::error::{Error, Result};
use crate::objective::{is_sorted, reward_value};
use crate::physics::{step_unchecked, PhysicsConfig};
use crate::planner::{Decision, Mcts, RolloutPolicy, SearchOutcome, SimRng, StepPlanner};
use crate::scene::{is_valid_with_tol, Action, PlannerConfig, Scene, WorldState, ACTION_COUNT};

/// Rewards closer than this count as tied.
pub const TIE_TOL: f64 = 1e-12;

fn check_start(scene: &Scene, state: &WorldState, physics: &PhysicsConfig) -> Result<()> {
    scene.check_state(state)?;
    if !is_valid_with_tol(scene, state, physics.penetration_tol) {
        return Err(Error::InvalidStartState);
    }
    Ok(())
}

/// Uniform choice among the candidates within [`TIE_TOL`] of the best score.
fn pick_best<T: Copy>(scored: &[(T, f64)], rng: &mut SimRng) -> Option<(T, f64)> {
    let best = scored.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    if best == f64::NEG_INFINITY {
        return None;
    }
    let tied: Vec<_> = scored.iter().filter(|s| s.1 >= best - TIE_TOL).collect();
    let pick = *tied[rng.random_range(0..tied.len())];
    Some(pick)
}

/// Reward after each single action; `None` where the action loses an object.
pub fn successor_rewards(
    scene: &Scene,
    state: &WorldState,
    cfg: &PlannerConfig,
    physics: &PhysicsConfig,
) -> [Option<f64>; ACTION_COUNT] {
    std::array::from_fn(|i| {
        let tr = step_unchecked(scene, state, Action::from_index(i), physics);
        (!tr.out_of_bounds).then(|| reward_value(scene, &tr.next_state, cfg))
    })
}

/// Action with the best one-step successor reward. When every action loses
/// an object, any action is returned.
pub fn greedy_one_step(
    scene: &Scene,
    state: &WorldState,
    cfg: &PlannerConfig,
    physics: &PhysicsConfig,
    rng: &mut SimRng,
) -> Result<Action> {
    check_start(scene, state, physics)?;
    let scored: Vec<(Action, f64)> = successor_rewards(scene, state, cfg, physics)
        .iter()
        .enumerate()
        .filter_map(|(i, g)| g.map(|g| (Action::from_index(i), g)))
        .collect();
    Ok(match pick_best(&scored, rng) {
        Some((a, _)) => a,
        None => Action::from_index(rng.random_range(0..ACTION_COUNT)),
    })
}

/// First action of the random rollout that reaches the highest reward, and
/// that reward. Rollouts have `cfg.d_max` steps; `cfg.greedy_rollouts` of
/// them are drawn.
pub fn greedy_rollout(
    scene: &Scene,
    state: &WorldState,
    cfg: &PlannerConfig,
    physics: &PhysicsConfig,
    policy: &dyn RolloutPolicy,
    rng: &mut SimRng,
) -> Result<(Action, f64)> {
    check_start(scene, state, physics)?;
    let mut scored = Vec::with_capacity(cfg.greedy_rollouts);
    for _ in 0..cfg.greedy_rollouts {
        let mut s = state.clone();
        let mut first = None;
        let mut g_max = f64::NEG_INFINITY;
        for _ in 0..cfg.d_max.max(1) {
            let a = policy.choose(scene, &s, rng);
            let tr = step_unchecked(scene, &s, a, physics);
            first.get_or_insert(a);
            if tr.out_of_bounds {
                break;
            }
            s = tr.next_state;
            g_max = g_max.max(reward_value(scene, &s, cfg));
        }
        if let Some(a) = first {
            scored.push((a, g_max));
        }
    }
    Ok(match pick_best(&scored, rng) {
        Some(best) => best,
        None => (scored.first().map_or(Action::from_index(0), |s| s.0), f64::NEG_INFINITY),
    })
}

/// Tree search backing up each expanded node's own reward.
pub fn mcts_no_rollout(
    scene: &Scene,
    state: &WorldState,
    cfg: &PlannerConfig,
    physics: &PhysicsConfig,
    policy: &dyn RolloutPolicy,
    rng: &mut SimRng,
) -> Result<SearchOutcome> {
    let mut mcts = Mcts::new(scene, cfg, physics, policy);
    mcts.rollout_depth = 0;
    mcts.search(state, rng).map(|(o, _)| o)
}

/// A planned action sequence and what the noiseless model predicts for it.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPlan {
    pub actions: Vec<Action>,
    /// Reward of the predicted end state; `-inf` if the sequence loses an object.
    pub predicted_g: f64,
    pub predicts_sorted: bool,
    /// Index of the next action to execute.
    pub cursor: usize,
}

impl TrajectoryPlan {
    pub fn evaluate(
        scene: &Scene,
        state: &WorldState,
        actions: Vec<Action>,
        cfg: &PlannerConfig,
        physics: &PhysicsConfig,
    ) -> Self {
        let (predicted_g, predicts_sorted) = predict(scene, state, &actions, cfg, physics);
        Self {
            actions,
            predicted_g,
            predicts_sorted,
            cursor: 0,
        }
    }

    pub fn remaining(&self) -> &[Action] {
        &self.actions[self.cursor..]
    }

    pub fn is_exhausted(&self) -> bool {
        self.cursor >= self.actions.len()
    }
}

/// End-state reward and sortedness of `actions` executed from `state`.
pub fn predict(
    scene: &Scene,
    state: &WorldState,
    actions: &[Action],
    cfg: &PlannerConfig,
    physics: &PhysicsConfig,
) -> (f64, bool) {
    let mut s = state.clone();
    for &a in actions {
        let tr = step_unchecked(scene, &s, a, physics);
        if tr.out_of_bounds {
            return (f64::NEG_INFINITY, false);
        }
        s = tr.next_state;
    }
    (reward_value(scene, &s, cfg), is_sorted(scene, &s, cfg))
}

fn random_sequence(depth: usize, rng: &mut SimRng) -> Vec<Action> {
    (0..depth)
        .map(|_| Action::from_index(rng.random_range(0..ACTION_COUNT)))
        .collect()
}

/// Iterated local search over sequences of `depth` actions.
///
/// Each iteration resamples one position of the current sequence and keeps
/// the change if the predicted end-state reward improves. After
/// `cfg.ils_restart_interval` consecutive rejections the search restarts
/// from a fresh random sequence. Runs `cfg.ils_iterations` iterations and
/// returns the best sequence seen.
pub fn ils_plan(
    scene: &Scene,
    state: &WorldState,
    cfg: &PlannerConfig,
    physics: &PhysicsConfig,
    depth: usize,
    rng: &mut SimRng,
) -> Result<TrajectoryPlan> {
    check_start(scene, state, physics)?;
    if depth == 0 {
        return Err(Error::InvalidConfig("local search depth must be positive".into()));
    }
    let mut current = TrajectoryPlan::evaluate(scene, state, random_sequence(depth, rng), cfg, physics);
    let mut best = current.clone();
    let mut stale = 0usize;
    for _ in 0..cfg.ils_iterations {
        if stale >= cfg.ils_restart_interval {
            current = TrajectoryPlan::evaluate(scene, state, random_sequence(depth, rng), cfg, physics);
            stale = 0;
        } else {
            let mut actions = current.actions.clone();
            let pos = rng.random_range(0..depth);
            actions[pos] = Action::from_index(rng.random_range(0..ACTION_COUNT));
            let candidate = TrajectoryPlan::evaluate(scene, state, actions, cfg, physics);
            if candidate.predicted_g > current.predicted_g {
                current = candidate;
                stale = 0;
            } else {
                stale += 1;
            }
        }
        if current.predicted_g > best.predicted_g {
            best = current.clone();
        }
    }
    Ok(best)
}

/// One-step greedy as a closed-loop planner. Never reports trapped.
pub struct GreedyOneStepPlanner<'a> {
    pub cfg: &'a PlannerConfig,
    pub physics: &'a PhysicsConfig,
}

impl StepPlanner for GreedyOneStepPlanner<'_> {
    fn decide(&mut self, scene: &Scene, state: &WorldState, rng: &mut SimRng) -> Result<Decision> {
        Ok(Decision {
            action: greedy_one_step(scene, state, self.cfg, self.physics, rng)?,
            g_hat: None,
        })
    }
}

/// Greedy over random rollouts as a closed-loop planner. Never reports trapped.
pub struct GreedyRolloutPlanner<'a> {
    pub cfg: &'a PlannerConfig,
    pub physics: &'a PhysicsConfig,
    pub policy: &'a dyn RolloutPolicy,
}

impl StepPlanner for GreedyRolloutPlanner<'_> {
    fn decide(&mut self, scene: &Scene, state: &WorldState, rng: &mut SimRng) -> Result<Decision> {
        let (action, _) = greedy_rollout(scene, state, self.cfg, self.physics, self.policy, rng)?;
        Ok(Decision { action, g_hat: None })
    }
}

/// Iterated local search with plan switching.
///
/// Replans every step but only abandons the plan under execution when the
/// new one predicts a sorted state or a higher end reward than what is left
/// of the old plan, re-predicted from the observed state.
pub struct IlsPlanner<'a> {
    pub cfg: &'a PlannerConfig,
    pub physics: &'a PhysicsConfig,
    pub depth: usize,
    pub current: Option<TrajectoryPlan>,
}

impl<'a> IlsPlanner<'a> {
    pub fn new(cfg: &'a PlannerConfig, physics: &'a PhysicsConfig, depth: usize) -> Self {
        Self {
            cfg,
            physics,
            depth,
            current: None,
        }
    }
}

impl StepPlanner for IlsPlanner<'_> {
    fn decide(&mut self, scene: &Scene, state: &WorldState, rng: &mut SimRng) -> Result<Decision> {
        let fresh = ils_plan(scene, state, self.cfg, self.physics, self.depth, rng)?;
        let kept = self.current.take().filter(|p| !p.is_exhausted()).map(|mut p| {
            let (g, sorted) = predict(scene, state, p.remaining(), self.cfg, self.physics);
            p.predicted_g = g;
            p.predicts_sorted = sorted;
            p
        });
        let mut plan = match kept {
            Some(old) if !fresh.predicts_sorted && fresh.predicted_g <= old.predicted_g => old,
            _ => fresh,
        };
        let action = plan.actions[plan.cursor];
        plan.cursor += 1;
        let g_hat = (!plan.predicts_sorted).then_some(plan.predicted_g);
        self.current = Some(plan);
        Ok(Decision { action, g_hat })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::{derive_rng, UniformRandomPolicy};
    use crate::scene::{Pose2, Shape, Workspace};

    fn scene(workspace: f64, cubes: &[(f64, f64, usize)], classes: usize) -> Scene {
        Scene::new(
            Workspace::centered_square(workspace),
            Shape::rectangle(0.025, 0.05),
            cubes.iter().map(|&(_, _, c)| (Shape::cube(0.025), c)).collect(),
            vec![],
            classes,
        )
        .unwrap()
    }

    fn state(robot: (f64, f64), cubes: &[(f64, f64, usize)]) -> WorldState {
        WorldState::new(
            Pose2::new(robot.0, robot.1, 0.0),
            cubes.iter().map(|&(x, y, _)| Pose2::new(x, y, 0.0)).collect(),
        )
    }

    #[test]
    fn free_space_ties_are_uniform() {
        let cubes = [(0.15, 0.15, 0), (0.2, 0.15, 0)];
        let sc = scene(0.5, &cubes, 1);
        let st = state((-0.1, -0.1), &cubes);
        let cfg = PlannerConfig::default();
        let physics = PhysicsConfig::default();
        let table = successor_rewards(&sc, &st, &cfg, &physics);
        assert!(table.iter().all(|g| *g == table[0]));
        let mut rng = derive_rng(17, 0);
        let mut counts = [0f64; ACTION_COUNT];
        let n = 10_000;
        for _ in 0..n {
            counts[greedy_one_step(&sc, &st, &cfg, &physics, &mut rng).unwrap().index()] += 1.0;
        }
        let e = n as f64 / ACTION_COUNT as f64;
        let chi2: f64 = counts.iter().map(|c| (c - e).powi(2) / e).sum();
        // 99th percentile of chi-square with 9 degrees of freedom.
        assert!(chi2 < 21.666, "chi2 = {chi2}");
    }

    #[test]
    fn greedy_matches_exhaustive_successor_table() {
        let cubes = [(0.0, 0.0, 0), (0.15, 0.0, 0)];
        let sc = scene(0.5, &cubes, 1);
        let st = state((-0.0255, 0.0), &cubes);
        let cfg = PlannerConfig::default();
        let physics = PhysicsConfig::default();
        let mut table = Vec::new();
        for a in Action::all() {
            let next = crate::physics::step(&sc, &st, a, &physics, None).unwrap();
            table.push(reward_value(&sc, &next.next_state, &cfg));
        }
        let best = table.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let argmax: Vec<usize> = (0..ACTION_COUNT).filter(|&i| table[i] >= best - TIE_TOL).collect();
        assert_eq!(argmax, vec![0]);
        for seed in 0..20 {
            let a = greedy_one_step(&sc, &st, &cfg, &physics, &mut derive_rng(seed, 0)).unwrap();
            assert_eq!(a, Action::from_index(0));
        }
    }

    #[test]
    fn out_of_bounds_successors_are_excluded() {
        // Pushing east drops the cube over the edge, which would otherwise
        // be the only way to raise the reward.
        let cubes = [(0.085, 0.0, 0), (-0.06, 0.0, 0)];
        let sc = scene(0.2, &cubes, 1);
        let st = state((0.06, 0.0), &cubes);
        let cfg = PlannerConfig::default();
        let physics = PhysicsConfig {
            boundary: crate::physics::BoundaryMode::Cliff,
            ..PhysicsConfig::default()
        };
        let table = successor_rewards(&sc, &st, &cfg, &physics);
        assert_eq!(table[0], None);
        for seed in 0..50 {
            let a = greedy_one_step(&sc, &st, &cfg, &physics, &mut derive_rng(seed, 0)).unwrap();
            assert_ne!(a, Action::from_index(0));
        }
    }

    #[test]
    fn single_rollout_returns_its_first_action() {
        let cubes = [(0.0, 0.0, 0), (0.15, 0.0, 0)];
        let sc = scene(0.5, &cubes, 1);
        let st = state((-0.0255, 0.0), &cubes);
        let cfg = PlannerConfig {
            greedy_rollouts: 1,
            ..PlannerConfig::default()
        };
        let physics = PhysicsConfig::default();
        for seed in 0..20 {
            let mut rng = derive_rng(seed, 0);
            let mut probe = rng.clone();
            let expected = UniformRandomPolicy.choose(&sc, &st, &mut probe);
            let (a, _) = greedy_rollout(&sc, &st, &cfg, &physics, &UniformRandomPolicy, &mut rng).unwrap();
            assert_eq!(a, expected);
        }
    }

    #[test]
    fn greedy_rollout_finds_the_unique_improving_first_action() {
        // Two eastward pushes close the gap between the cubes; no other
        // opening reaches the same reward within three steps.
        let cubes = [(0.0, 0.0, 0), (0.124, 0.0, 0)];
        let sc = scene(0.5, &cubes, 1);
        let st = state((-0.0251, 0.0), &cubes);
        let cfg = PlannerConfig::default();
        let physics = PhysicsConfig::default();
        let mut table = Vec::new();
        for a in Action::all() {
            for b in Action::all() {
                for c in Action::all() {
                    let mut s = st.clone();
                    let mut g_max = f64::NEG_INFINITY;
                    for x in [a, b, c] {
                        let tr = step_unchecked(&sc, &s, x, &physics);
                        if tr.out_of_bounds {
                            break;
                        }
                        s = tr.next_state;
                        g_max = g_max.max(reward_value(&sc, &s, &cfg));
                    }
                    table.push(([a, b, c], g_max));
                }
            }
        }
        let best = table.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
        let optimal: Vec<[Action; 3]> = table.iter().filter(|t| t.1 >= best - TIE_TOL).map(|t| t.0).collect();
        assert!(optimal.iter().all(|seq| seq[0] == Action::from_index(0)), "{optimal:?}");
        assert!(optimal.len() >= 6, "{optimal:?}");
        let hits = (0..100)
            .filter(|&seed| {
                greedy_rollout(&sc, &st, &cfg, &physics, &UniformRandomPolicy, &mut derive_rng(seed, 0))
                    .unwrap()
                    .0
                    == Action::from_index(0)
            })
            .count();
        assert!(hits >= 95, "hits = {hits}");
    }

    #[test]
    fn no_rollout_ranking_matches_greedy_table() {
        let cubes = [(0.0, 0.0, 0), (0.15, 0.0, 0)];
        let sc = scene(0.5, &cubes, 1);
        let st = state((-0.0255, 0.0), &cubes);
        let cfg = PlannerConfig {
            n_min: 10,
            n_max: 10,
            ..PlannerConfig::default()
        };
        let physics = PhysicsConfig::default();
        let mut mcts = Mcts::new(&sc, &cfg, &physics, &UniformRandomPolicy);
        mcts.rollout_depth = 0;
        let (o, tree) = mcts.search(&st, &mut derive_rng(0, 0)).unwrap();
        let table = successor_rewards(&sc, &st, &cfg, &physics);
        for (a, child) in tree.children(crate::planner::SearchTree::ROOT) {
            assert_eq!(Some(child.v_upper), table[a.index()]);
        }
        let greedy = greedy_one_step(&sc, &st, &cfg, &physics, &mut derive_rng(0, 0)).unwrap();
        assert_eq!(o.best_action, greedy);
    }

    #[test]
    fn no_rollout_grows_a_deep_tree_on_open_scenes() {
        let cubes = [(0.0, 0.0, 0), (0.05, 0.08, 1), (-0.1, 0.05, 0), (0.1, -0.1, 1)];
        let sc = scene(0.4, &cubes, 2);
        let st = state((-0.04, 0.0), &cubes);
        let cfg = PlannerConfig {
            n_min: 500,
            n_max: 500,
            ..PlannerConfig::default()
        };
        let physics = PhysicsConfig::default();
        let mut mcts = Mcts::new(&sc, &cfg, &physics, &UniformRandomPolicy);
        mcts.rollout_depth = 0;
        let (o, tree) = mcts.search(&st, &mut derive_rng(1, 0)).unwrap();
        assert_eq!(o.iterations_used, 500);
        assert!(tree.internal_count() >= 50, "{}", tree.internal_count());
    }

    #[test]
    fn ils_zero_iterations_returns_initial_sequence() {
        let cubes = [(0.0, 0.0, 0), (0.15, 0.0, 0)];
        let sc = scene(0.5, &cubes, 1);
        let st = state((-0.0255, 0.0), &cubes);
        let cfg = PlannerConfig {
            ils_iterations: 0,
            ..PlannerConfig::default()
        };
        let physics = PhysicsConfig::default();
        let mut rng = derive_rng(9, 0);
        let mut probe = rng.clone();
        let plan = ils_plan(&sc, &st, &cfg, &physics, 3, &mut rng).unwrap();
        assert_eq!(plan.actions, random_sequence(3, &mut probe));
        assert_eq!(plan.cursor, 0);
    }

    #[test]
    fn ils_best_is_monotone_in_iterations() {
        let cubes = [(0.0, 0.0, 0), (0.15, 0.0, 0)];
        let sc = scene(0.5, &cubes, 1);
        let st = state((-0.0255, 0.0), &cubes);
        let physics = PhysicsConfig::default();
        let mut prev = f64::NEG_INFINITY;
        for n in (0..=120).step_by(6) {
            let cfg = PlannerConfig {
                ils_iterations: n,
                ..PlannerConfig::default()
            };
            let plan = ils_plan(&sc, &st, &cfg, &physics, 3, &mut derive_rng(2, 0)).unwrap();
            assert!(plan.predicted_g >= prev);
            prev = plan.predicted_g;
        }
    }

    #[test]
    fn ils_finds_the_best_three_step_sequence() {
        let cubes = [(0.0, 0.0, 0), (0.2, 0.0, 0)];
        let sc = scene(0.5, &cubes, 1);
        let st = state((-0.0255, 0.0), &cubes);
        let cfg = PlannerConfig::default();
        let physics = PhysicsConfig::default();
        let mut best = f64::NEG_INFINITY;
        let mut argbest = Vec::new();
        for a in Action::all() {
            for b in Action::all() {
                for c in Action::all() {
                    let (g, _) = predict(&sc, &st, &[a, b, c], &cfg, &physics);
                    if g > best + 1e-12 {
                        best = g;
                        argbest = vec![[a, b, c]];
                    } else if (g - best).abs() <= 1e-12 {
                        argbest.push([a, b, c]);
                    }
                }
            }
        }
        assert_eq!(argbest, vec![[Action::from_index(0); 3]]);
        let hits = (0..100)
            .filter(|&seed| {
                let plan = ils_plan(&sc, &st, &cfg, &physics, 3, &mut derive_rng(seed, 0)).unwrap();
                (plan.predicted_g - best).abs() <= 1e-12
            })
            .count();
        assert!(hits >= 50, "hits = {hits}");
    }

    fn plan(actions: &[usize], g: f64, sorted: bool, cursor: usize) -> TrajectoryPlan {
        TrajectoryPlan {
            actions: actions.iter().map(|&i| Action::from_index(i)).collect(),
            predicted_g: g,
            predicts_sorted: sorted,
            cursor,
        }
    }

    #[test]
    fn ils_keeps_a_better_old_plan() {
        let cubes = [(0.0, 0.0, 0), (0.2, 0.0, 0), (0.1, 0.05, 1)];
        let sc = scene(0.5, &cubes, 2);
        let st = state((-0.0255, 0.0), &cubes);
        // A tiny budget makes the fresh plan worse than pushing east twice.
        let cfg = PlannerConfig {
            ils_iterations: 0,
            ..PlannerConfig::default()
        };
        let physics = PhysicsConfig::default();
        let mut rng = derive_rng(3, 0);
        let fresh = ils_plan(&sc, &st, &cfg, &physics, 3, &mut rng.clone()).unwrap();
        let (old_g, _) = predict(&sc, &st, &[Action::from_index(0); 2], &cfg, &physics);
        assert!(fresh.predicted_g < old_g);
        let mut p = IlsPlanner::new(&cfg, &physics, 3);
        p.current = Some(plan(&[0, 0, 0], -1e9, false, 1));
        let d = p.decide(&sc, &st, &mut rng).unwrap();
        assert_eq!(d.action, Action::from_index(0));
        let cur = p.current.as_ref().unwrap();
        assert_eq!(cur.cursor, 2);
        assert_eq!(cur.predicted_g, old_g);
        assert_eq!(d.g_hat, Some(old_g));
    }

    #[test]
    fn ils_adopts_a_fresh_plan_when_old_one_is_used_up() {
        let cubes = [(0.0, 0.0, 0), (0.2, 0.0, 0), (0.1, 0.05, 1)];
        let sc = scene(0.5, &cubes, 2);
        let st = state((-0.0255, 0.0), &cubes);
        let cfg = PlannerConfig {
            ils_iterations: 0,
            ..PlannerConfig::default()
        };
        let physics = PhysicsConfig::default();
        let mut rng = derive_rng(3, 0);
        let fresh = ils_plan(&sc, &st, &cfg, &physics, 3, &mut rng.clone()).unwrap();
        let mut p = IlsPlanner::new(&cfg, &physics, 3);
        p.current = Some(plan(&[0, 0, 0], 0.0, false, 3));
        let d = p.decide(&sc, &st, &mut rng).unwrap();
        assert_eq!(d.action, fresh.actions[0]);
        assert_eq!(p.current.as_ref().unwrap().actions, fresh.actions);
    }

    #[test]
    fn ils_switches_to_a_plan_predicting_sorted() {
        // Two classes side by side; stepping away from them changes nothing,
        // so any fresh plan predicts sorted.
        let cubes = [(-0.1, 0.0, 0), (0.1, 0.0, 1)];
        let sc = scene(0.5, &cubes, 2);
        let st = state((0.0, -0.15), &cubes);
        let cfg = PlannerConfig {
            ils_iterations: 0,
            ..PlannerConfig::default()
        };
        let physics = PhysicsConfig::default();
        let mut rng = derive_rng(0, 0);
        let fresh = ils_plan(&sc, &st, &cfg, &physics, 3, &mut rng.clone()).unwrap();
        assert!(fresh.predicts_sorted);
        let mut p = IlsPlanner::new(&cfg, &physics, 3);
        p.current = Some(plan(&[6, 6, 6], 0.0, false, 0));
        let d = p.decide(&sc, &st, &mut rng).unwrap();
        assert_eq!(p.current.as_ref().unwrap().actions, fresh.actions);
        assert_eq!(d.g_hat, None);
    }
}
