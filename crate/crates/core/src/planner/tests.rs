use super::*;
use crate::physics::{step, BoundaryMode};
use crate::scene::{Pose2, Shape, Workspace};

fn cfg_with_budget(n: usize) -> PlannerConfig {
    PlannerConfig {
        n_min: n,
        n_max: n,
        ..PlannerConfig::default()
    }
}

/// Two same-class cubes 0.15 m apart with the robot touching the west cube,
/// far enough from the walls that no searched sequence reaches them.
fn pair_scene() -> (Scene, WorldState) {
    let scene = Scene::new(
        Workspace::centered_square(1.2),
        Shape::rectangle(0.025, 0.05),
        vec![(Shape::cube(0.025), 0), (Shape::cube(0.025), 0)],
        vec![],
        1,
    )
    .unwrap();
    let state = WorldState::new(
        Pose2::new(-0.0255, 0.0, 0.0),
        vec![Pose2::new(0.0, 0.0, 0.0), Pose2::new(0.15, 0.0, 0.0)],
    );
    (scene, state)
}

fn stats(visits: u32, v_upper: f64, v_lower: f64) -> Node {
    Node::with_stats(visits, v_upper, v_lower)
}

#[test]
fn ucb_hand_value() {
    let cfg = PlannerConfig::default();
    let parent = stats(10, -2.0, -10.0);
    let child = stats(2, -4.0, -9.0);
    let expected = 0.75 + std::f64::consts::FRAC_1_SQRT_2 * (2.0 * 10f64.ln() / 2.0).sqrt();
    assert!((ucb_score(&parent, &child, &cfg) - expected).abs() < 1e-12);
    assert!((ucb_score(&parent, &child, &cfg) - 1.8229830131446736).abs() < 1e-12);
}

#[test]
fn ucb_degenerate_span_exploits_one() {
    let cfg = PlannerConfig::default();
    let parent = stats(6, -3.0, -3.0);
    let a = stats(1, -3.0, -3.0);
    let b = stats(5, -3.0, -3.0);
    assert_eq!(exploit_term(&parent, &a, cfg.backup_mode), 1.0);
    assert_eq!(exploit_term(&parent, &b, cfg.backup_mode), 1.0);
    assert!(ucb_score(&parent, &a, &cfg) > ucb_score(&parent, &b, &cfg));
}

#[test]
fn ucb_child_at_parent_upper_exploits_exactly_one() {
    let parent = stats(7, -1.5, -8.25);
    let child = stats(3, -1.5, -6.0);
    assert_eq!(exploit_term(&parent, &child, BackupMode::Max), 1.0);
}

#[test]
fn avg_mode_uses_mean_return() {
    let parent = stats(4, 0.0, -4.0);
    let mut child = stats(2, -1.0, -3.0);
    child.return_sum = -4.0;
    assert!((exploit_term(&parent, &child, BackupMode::Avg) - 0.5).abs() < 1e-15);
    assert!((exploit_term(&parent, &child, BackupMode::Max) - 0.75).abs() < 1e-15);
}

#[test]
fn terminal_child_exploits_zero() {
    let parent = stats(4, 0.0, -4.0);
    let mut child = stats(1, 0.0, 0.0);
    child.terminal = true;
    assert_eq!(exploit_term(&parent, &child, BackupMode::Max), 0.0);
}

#[test]
fn relative_improvement_examples() {
    let cfg = PlannerConfig::default();
    assert!(is_trapped(-10.0, -10.0, &cfg));
    assert!(!is_trapped(-10.0, -9.0, &cfg));
    assert!(is_trapped(-10.0, -9.8, &cfg));
}

#[test]
fn budget_cap_is_exact() {
    let (scene, state) = pair_scene();
    let cfg = PlannerConfig {
        nu_t: 1e9,
        ..cfg_with_budget(500)
    };
    let mut rng = derive_rng(3, 0);
    let o = mcts_search(&scene, &state, &cfg, &PhysicsConfig::default(), &UniformRandomPolicy, &mut rng).unwrap();
    assert_eq!(o.iterations_used, 500);
}

#[test]
fn blocks_continue_until_improvement() {
    let (scene, state) = pair_scene();
    let physics = PhysicsConfig::default();
    let cfg = PlannerConfig {
        n_min: 20,
        n_max: 100,
        nu_t: 1e9,
        ..PlannerConfig::default()
    };
    let o = mcts_search(&scene, &state, &cfg, &physics, &UniformRandomPolicy, &mut derive_rng(1, 0)).unwrap();
    assert_eq!(o.iterations_used, 100);

    let cfg = PlannerConfig {
        nu_t: -1e9,
        ..cfg
    };
    let o = mcts_search(&scene, &state, &cfg, &physics, &UniformRandomPolicy, &mut derive_rng(1, 0)).unwrap();
    assert_eq!(o.iterations_used, 20);
}

#[test]
fn g_hat_includes_root() {
    // A lone cube per class keeps every state at the same reward.
    let scene = Scene::new(
        Workspace::centered_square(0.5),
        Shape::rectangle(0.025, 0.05),
        vec![(Shape::cube(0.025), 0)],
        vec![],
        1,
    )
    .unwrap();
    let state = WorldState::new(Pose2::new(-0.1, 0.0, 0.0), vec![Pose2::new(0.1, 0.0, 0.0)]);
    let cfg = cfg_with_budget(50);
    let root_g = reward_value(&scene, &state, &cfg);
    let o = mcts_search(&scene, &state, &cfg, &PhysicsConfig::default(), &UniformRandomPolicy, &mut derive_rng(0, 0)).unwrap();
    assert_eq!(o.g_hat, root_g);
    assert_eq!(o.root_g, root_g);
}

/// Best reward reachable within two actions, per first action.
fn two_ply_table(scene: &Scene, state: &WorldState, cfg: &PlannerConfig, physics: &PhysicsConfig) -> Vec<Option<f64>> {
    Action::all()
        .map(|a| {
            let r1 = step(scene, state, a, physics, None).unwrap();
            if r1.out_of_bounds {
                return None;
            }
            let g1 = reward_value(scene, &r1.next_state, cfg);
            let mut best = g1;
            for b in Action::all() {
                let r2 = step(scene, &r1.next_state, b, physics, None).unwrap();
                if !r2.out_of_bounds {
                    best = best.max(reward_value(scene, &r2.next_state, cfg));
                }
            }
            Some(best)
        })
        .collect()
}

#[test]
fn search_agrees_with_two_ply_enumeration() {
    let (scene, state) = pair_scene();
    let physics = PhysicsConfig::default();
    let cfg = cfg_with_budget(200);
    let table = two_ply_table(&scene, &state, &cfg, &physics);
    let best = table.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max);
    let winners: Vec<usize> = (0..ACTION_COUNT).filter(|&i| table[i] == Some(best)).collect();
    assert_eq!(winners, vec![0], "oracle should single out the eastward push: {table:?}");
    for seed in 0..5 {
        let o = mcts_search(&scene, &state, &cfg, &physics, &UniformRandomPolicy, &mut derive_rng(seed, 0)).unwrap();
        assert_eq!(o.best_action, Action::from_index(0), "seed {seed}");
    }
}

fn check_tree(tree: &SearchTree, g_hat: f64) {
    let mut through = vec![0u32; tree.nodes.len()];
    for (id, node) in tree.nodes.iter().enumerate() {
        assert!(node.children.iter().flatten().count() <= ACTION_COUNT);
        assert_eq!(node.children.iter().flatten().count(), usize::from(node.expanded));
        if node.terminal {
            assert_eq!(node.visits, 0);
            assert!(node.children.iter().all(Option::is_none));
            continue;
        }
        if node.visits >= 1 {
            assert!(node.v_lower <= node.v_upper);
            assert!(node.v_upper <= g_hat);
        }
        if id != SearchTree::ROOT {
            assert!(node.v_upper >= node.g, "a node's first rollout starts at its own state");
        }
        let has_grandchild = node
            .children
            .iter()
            .flatten()
            .any(|&c| tree.nodes[c].children.iter().any(Option::is_some));
        if has_grandchild {
            assert!(node.is_fully_expanded(), "descended through a partially expanded node");
        }
        for &c in node.children.iter().flatten() {
            let child = &tree.nodes[c];
            assert_eq!(child.parent, Some(id));
            if child.visits > 0 {
                assert!(child.v_upper <= node.v_upper);
                assert!(child.v_lower >= node.v_lower);
            }
            through[id] += child.visits;
        }
        assert_eq!(node.virtual_visits, 0);
    }
    for (id, node) in tree.nodes.iter().enumerate() {
        let own = if id == SearchTree::ROOT { 0 } else { 1 };
        assert_eq!(node.visits, through[id] + own * u32::from(node.visits > 0), "node {id}");
    }
}

#[test]
fn tree_bounds_and_expansion_discipline() {
    let (scene, state) = pair_scene();
    let physics = PhysicsConfig::default();
    for seed in 0..3 {
        let cfg = cfg_with_budget(300);
        let mcts = Mcts::new(&scene, &cfg, &physics, &UniformRandomPolicy);
        let (o, tree) = mcts.search(&state, &mut derive_rng(seed, 0)).unwrap();
        check_tree(&tree, o.g_hat);
        assert_eq!(tree.root().visits as usize, o.iterations_used - terminal_count(&tree));
    }
}

fn cliff() -> PhysicsConfig {
    PhysicsConfig {
        boundary: BoundaryMode::Cliff,
        ..PhysicsConfig::default()
    }
}

fn terminal_count(tree: &SearchTree) -> usize {
    tree.nodes.iter().filter(|n| n.terminal).count()
}

#[test]
fn out_of_bounds_children_are_terminal_and_never_descended() {
    // Cube flush against the east edge with the robot behind it.
    let scene = Scene::new(
        Workspace::centered_square(0.2),
        Shape::rectangle(0.025, 0.05),
        vec![(Shape::cube(0.025), 0), (Shape::cube(0.025), 0)],
        vec![],
        1,
    )
    .unwrap();
    let state = WorldState::new(
        Pose2::new(0.06, 0.0, 0.0),
        vec![Pose2::new(0.085, 0.0, 0.0), Pose2::new(-0.05, 0.05, 0.0)],
    );
    let physics = cliff();
    assert!(step(&scene, &state, Action::from_index(0), &physics, None).unwrap().out_of_bounds);
    let cfg = cfg_with_budget(200);
    let mcts = Mcts::new(&scene, &cfg, &physics, &UniformRandomPolicy);
    let (o, tree) = mcts.search(&state, &mut derive_rng(7, 0)).unwrap();
    let east = tree.nodes[tree.root().children[0].unwrap()].clone();
    assert!(east.terminal && east.exhausted);
    assert_ne!(o.best_action, Action::from_index(0));
    check_tree(&tree, o.g_hat);
}

#[test]
fn all_dead_root_stops_early() {
    // Every action from this wedged state loses a cube over the edge.
    let scene = Scene::new(
        Workspace::new(-0.05, -0.05, 0.05, 0.05),
        Shape::cube(0.02),
        vec![(Shape::cube(0.02), 0)],
        vec![],
        1,
    )
    .unwrap();
    let state = WorldState::new(Pose2::new(0.0, 0.0, 0.0), vec![Pose2::new(0.0395, 0.0, 0.0)]);
    let physics = cliff();
    let dead: Vec<bool> = Action::all()
        .map(|a| step(&scene, &state, a, &physics, None).unwrap().out_of_bounds)
        .collect();
    let cfg = cfg_with_budget(100);
    let mcts = Mcts::new(&scene, &cfg, &physics, &UniformRandomPolicy);
    let (o, tree) = mcts.search(&state, &mut derive_rng(0, 0)).unwrap();
    check_tree(&tree, o.g_hat);
    if dead.iter().all(|&d| d) {
        assert_eq!(o.iterations_used, ACTION_COUNT);
        assert!(tree.root().exhausted);
    } else {
        assert_eq!(o.iterations_used, 100);
    }
}

#[test]
fn single_worker_search_is_deterministic() {
    let (scene, state) = pair_scene();
    let physics = PhysicsConfig::default();
    let cfg = cfg_with_budget(150);
    let mcts = Mcts::new(&scene, &cfg, &physics, &UniformRandomPolicy);
    let (a, ta) = mcts.search(&state, &mut derive_rng(11, 2)).unwrap();
    let (b, tb) = mcts.search(&state, &mut derive_rng(11, 2)).unwrap();
    assert_eq!(a, b);
    assert_eq!(ta.nodes.len(), tb.nodes.len());
    for (x, y) in ta.nodes.iter().zip(&tb.nodes) {
        assert_eq!(x.state, y.state);
        assert_eq!(x.visits, y.visits);
        assert_eq!(x.v_upper.to_bits(), y.v_upper.to_bits());
        assert_eq!(x.v_lower.to_bits(), y.v_lower.to_bits());
    }
}

#[test]
fn g_hat_is_monotone_in_iterations() {
    let (scene, state) = pair_scene();
    let physics = PhysicsConfig::default();
    let mut prev = f64::NEG_INFINITY;
    for n in 1..=40 {
        let cfg = cfg_with_budget(n);
        let o = mcts_search(&scene, &state, &cfg, &physics, &UniformRandomPolicy, &mut derive_rng(5, 0)).unwrap();
        assert!(o.g_hat >= prev, "n={n}");
        prev = o.g_hat;
    }
}

#[test]
fn parallel_workers_respect_budget_and_bounds() {
    let (scene, state) = pair_scene();
    let physics = PhysicsConfig::default();
    let cfg = PlannerConfig {
        workers: 3,
        ..cfg_with_budget(120)
    };
    let mcts = Mcts::new(&scene, &cfg, &physics, &UniformRandomPolicy);
    let (o, tree) = mcts.search(&state, &mut derive_rng(2, 0)).unwrap();
    assert_eq!(o.iterations_used, 120);
    check_tree(&tree, o.g_hat);
}

#[test]
fn no_rollout_children_hold_one_step_rewards() {
    let (scene, state) = pair_scene();
    let physics = PhysicsConfig::default();
    let cfg = cfg_with_budget(10);
    let mut mcts = Mcts::new(&scene, &cfg, &physics, &UniformRandomPolicy);
    mcts.rollout_depth = 0;
    let (_, tree) = mcts.search(&state, &mut derive_rng(0, 0)).unwrap();
    for (a, child) in tree.children(SearchTree::ROOT) {
        let next = step(&scene, &state, a, &physics, None).unwrap().next_state;
        assert_eq!(child.v_upper, reward_value(&scene, &next, &cfg));
    }
    assert_eq!(tree.children(SearchTree::ROOT).count(), ACTION_COUNT);
}

#[test]
fn invalid_root_is_rejected() {
    let (scene, mut state) = pair_scene();
    state.movables[1] = state.movables[0];
    let err = mcts_search(&scene, &state, &PlannerConfig::default(), &PhysicsConfig::default(), &UniformRandomPolicy, &mut derive_rng(0, 0));
    assert!(matches!(err, Err(Error::InvalidStartState)));
}

struct Scripted {
    actions: Vec<Action>,
    next: usize,
    ratio: Option<f64>,
    cfg: PlannerConfig,
}

impl Scripted {
    fn new(actions: Vec<Action>, ratio: Option<f64>) -> Self {
        Self {
            actions,
            next: 0,
            ratio,
            cfg: PlannerConfig::default(),
        }
    }
}

impl StepPlanner for Scripted {
    fn decide(&mut self, scene: &Scene, state: &WorldState, _rng: &mut SimRng) -> Result<Decision> {
        let action = self.actions[self.next % self.actions.len()];
        self.next += 1;
        let g = reward_value(scene, state, &self.cfg);
        Ok(Decision {
            action,
            g_hat: self.ratio.map(|r| g + r * g.abs()),
        })
    }
}

/// Two classes whose cubes sit 0.035 m apart, well short of sorted.
fn mixed_scene(workspace: f64, cubes: [Pose2; 2], robot: Pose2) -> (Scene, WorldState) {
    let scene = Scene::new(
        Workspace::centered_square(workspace),
        Shape::rectangle(0.025, 0.05),
        vec![(Shape::cube(0.025), 0), (Shape::cube(0.025), 1)],
        vec![],
        2,
    )
    .unwrap();
    (scene, WorldState::new(robot, cubes.to_vec()))
}

fn run_script(scene: &Scene, state: &WorldState, cfg: &PlannerConfig, planner: &mut Scripted) -> TrialRecord {
    run_script_with(scene, state, cfg, planner, PhysicsConfig::default())
}

fn run_script_with(
    scene: &Scene,
    state: &WorldState,
    cfg: &PlannerConfig,
    planner: &mut Scripted,
    physics: PhysicsConfig,
) -> TrialRecord {
    let mut exec = ModelExecutor::noiseless(physics);
    run_closed_loop(scene, state, cfg, planner, &mut exec, &mut derive_rng(0, 0)).unwrap()
}

const EAST: usize = 0;
const NORTH: usize = 2;
const WEST: usize = 4;
const SOUTH: usize = 6;

fn acts(ids: &[usize]) -> Vec<Action> {
    ids.iter().map(|&i| Action::from_index(i)).collect()
}

#[test]
fn sixteenth_contact_free_action_fails() {
    let (scene, state) = mixed_scene(
        0.5,
        [Pose2::new(0.0, 0.0, 0.0), Pose2::new(0.06, 0.0, 0.0)],
        Pose2::new(-0.15, 0.0, 0.0),
    );
    let cfg = PlannerConfig::default();
    let rec = run_script(&scene, &state, &cfg, &mut Scripted::new(acts(&[WEST, EAST]), None));
    assert_eq!(rec.outcome, Outcome::Failure(FailureReason::NoContact));
    assert_eq!(rec.steps, 16);
    assert!(rec.trajectory[1..].iter().all(|s| !s.contacted));

    let cfg = PlannerConfig {
        no_contact_limit: 3,
        ..cfg
    };
    let rec = run_script(&scene, &state, &cfg, &mut Scripted::new(acts(&[WEST, EAST]), None));
    assert_eq!(rec.steps, 4);
}

#[test]
fn contact_resets_idle_counter() {
    let (scene, state) = mixed_scene(
        0.5,
        [Pose2::new(0.0, 0.0, 0.0), Pose2::new(0.06, 0.0, 0.0)],
        Pose2::new(-0.12, 0.0, 0.0),
    );
    let cfg = PlannerConfig::default();
    // Ten idle moves, two eastward moves (the second one reaches the cube),
    // then idle until failure.
    let mut seq = [NORTH, SOUTH].repeat(5);
    seq.extend([EAST, EAST]);
    seq.extend([WEST, EAST].repeat(20));
    let rec = run_script(&scene, &state, &cfg, &mut Scripted::new(acts(&seq), None));
    let contacts: Vec<usize> = (1..rec.trajectory.len()).filter(|&i| rec.trajectory[i].contacted).collect();
    assert_eq!(contacts, vec![12]);
    assert_eq!(rec.outcome, Outcome::Failure(FailureReason::NoContact));
    assert_eq!(rec.steps, 12 + 16);
}

#[test]
fn small_relative_gain_is_trapped() {
    let (scene, state) = mixed_scene(
        0.5,
        [Pose2::new(0.0, 0.0, 0.0), Pose2::new(0.06, 0.0, 0.0)],
        Pose2::new(-0.15, 0.0, 0.0),
    );
    let cfg = PlannerConfig::default();
    let rec = run_script(&scene, &state, &cfg, &mut Scripted::new(acts(&[EAST]), Some(0.01)));
    assert_eq!(rec.outcome, Outcome::Failure(FailureReason::Trapped));
    assert_eq!(rec.steps, 0);

    let rec = run_script(&scene, &state, &cfg, &mut Scripted::new(acts(&[EAST, WEST]), Some(0.05)));
    assert_ne!(rec.outcome, Outcome::Failure(FailureReason::Trapped), "ratio equal to nu is not a trap");

    let cfg = PlannerConfig {
        max_actions: 3,
        ..cfg
    };
    let rec = run_script(&scene, &state, &cfg, &mut Scripted::new(acts(&[WEST, EAST]), Some(0.1)));
    assert_eq!(rec.outcome, Outcome::Failure(FailureReason::StepLimit));
    assert_eq!(rec.steps, 3);
}

#[test]
fn sorted_start_succeeds_without_acting() {
    let (scene, state) = mixed_scene(
        0.5,
        [Pose2::new(-0.15, 0.0, 0.0), Pose2::new(0.15, 0.0, 0.0)],
        Pose2::new(0.0, -0.2, 0.0),
    );
    let cfg = PlannerConfig::default();
    let physics = PhysicsConfig::default();
    let mut exec = ModelExecutor::noiseless(physics.clone());
    let rec = plan_and_execute(&scene, &state, &cfg, &physics, &UniformRandomPolicy, &mut exec, &mut derive_rng(0, 0)).unwrap();
    assert_eq!(rec.outcome, Outcome::Success);
    assert_eq!(rec.steps, 0);
    assert_eq!(rec.trajectory.len(), 1);
}

#[test]
fn out_of_bounds_execution_fails() {
    let (scene, state) = mixed_scene(
        0.2,
        [Pose2::new(0.085, 0.0, 0.0), Pose2::new(0.085, 0.05, 0.0)],
        Pose2::new(0.06, 0.0, 0.0),
    );
    let cfg = PlannerConfig::default();
    let rec = run_script_with(&scene, &state, &cfg, &mut Scripted::new(acts(&[EAST]), None), cliff());
    assert_eq!(rec.outcome, Outcome::Failure(FailureReason::OutOfBounds));
    assert_eq!(rec.steps, 1);
}

#[test]
fn mcts_closes_the_loop_on_an_easy_scene() {
    let (scene, state) = mixed_scene(
        0.4,
        [Pose2::new(-0.02, 0.0, 0.0), Pose2::new(0.02, 0.0, 0.0)],
        Pose2::new(0.0, -0.1, 0.0),
    );
    let cfg = PlannerConfig {
        n_min: 100,
        n_max: 300,
        ..PlannerConfig::default()
    };
    let physics = PhysicsConfig::default();
    let mut exec = ModelExecutor::noiseless(physics.clone());
    let rec = plan_and_execute(&scene, &state, &cfg, &physics, &UniformRandomPolicy, &mut exec, &mut derive_rng(4, 0)).unwrap();
    assert_eq!(rec.outcome, Outcome::Success, "{:?}", rec.trajectory.iter().map(|s| s.g).collect::<Vec<_>>());
    assert!(crate::objective::is_sorted(&scene, rec.final_state(), &cfg));
}
