//! Max-backup Monte Carlo tree search.
//!
//! Every node keeps the best and worst rollout return seen below it
//! (`v_upper`, `v_lower`). Selection normalizes a child's upper bound into
//! the parent's range and adds a UCB1 exploration bonus; rollouts are
//! truncated after `d_max` steps and report the best reward met on the way.
//! The iteration budget grows in blocks of `n_min` (up to `n_max`) while the
//! best reward found stays within `nu_t` of the root's.

mod closed_loop;

use std::sync::Mutex;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use closed_loop::{
    is_trapped, plan_and_execute, run_closed_loop, Decision, Executor, FailureReason, ModelExecutor,
    Outcome, StepPlanner, TrajectoryStep, TrialRecord,
};

use crate::error::{Error, Result};
use crate::objective::reward_value;
use crate::physics::{step_unchecked, PhysicsConfig};
use crate::scene::{is_valid_with_tol, Action, BackupMode, PlannerConfig, Scene, WorldState, ACTION_COUNT};

/// Seeded generator used for every stochastic choice in planning.
pub type SimRng = ChaCha8Rng;

/// Derives an independent generator from `seed` and a stream index.
pub fn derive_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Action choice inside rollouts. Must be deterministic given the RNG state.
pub trait RolloutPolicy: Send + Sync {
    fn choose(&self, scene: &Scene, state: &WorldState, rng: &mut SimRng) -> Action;
}

/// Uniform over the ten actions.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformRandomPolicy;

impl RolloutPolicy for UniformRandomPolicy {
    fn choose(&self, _scene: &Scene, _state: &WorldState, rng: &mut SimRng) -> Action {
        Action::from_index(rng.random_range(0..ACTION_COUNT))
    }
}

pub type NodeId = usize;

#[derive(Debug, Clone)]
pub struct Node {
    pub state: WorldState,
    /// Reward of `state`.
    pub g: f64,
    pub visits: u32,
    pub v_upper: f64,
    pub v_lower: f64,
    pub return_sum: f64,
    pub children: [Option<NodeId>; ACTION_COUNT],
    pub expansion_order: [u8; ACTION_COUNT],
    /// Number of actions taken from `expansion_order`.
    pub expanded: u8,
    /// Reached through an out-of-bounds transition; never selected.
    pub terminal: bool,
    /// Terminal, or fully expanded with every child exhausted.
    pub exhausted: bool,
    pub parent: Option<NodeId>,
    pub action: Option<Action>,
    virtual_visits: u32,
}

impl Node {
    pub fn new(state: WorldState, g: f64) -> Self {
        Self {
            state,
            g,
            visits: 0,
            v_upper: f64::NEG_INFINITY,
            v_lower: f64::INFINITY,
            return_sum: 0.0,
            children: [None; ACTION_COUNT],
            expansion_order: std::array::from_fn(|i| i as u8),
            expanded: 0,
            terminal: false,
            exhausted: false,
            parent: None,
            action: None,
            virtual_visits: 0,
        }
    }

    /// A detached node carrying only search statistics.
    pub fn with_stats(visits: u32, v_upper: f64, v_lower: f64) -> Self {
        let mut n = Node::new(WorldState::new(Default::default(), Vec::new()), v_upper);
        n.visits = visits;
        n.v_upper = v_upper;
        n.v_lower = v_lower;
        n.return_sum = v_upper * f64::from(visits);
        n
    }

    pub fn is_fully_expanded(&self) -> bool {
        usize::from(self.expanded) == ACTION_COUNT
    }

    pub fn mean_return(&self) -> f64 {
        self.return_sum / f64::from(self.visits.max(1))
    }

    fn record(&mut self, g_max: f64) {
        self.visits += 1;
        self.return_sum += g_max;
        if g_max > self.v_upper {
            self.v_upper = g_max;
        }
        if g_max < self.v_lower {
            self.v_lower = g_max;
        }
    }
}

/// Normalized exploitation term of `child` under `parent`.
pub fn exploit_term(parent: &Node, child: &Node, mode: BackupMode) -> f64 {
    if child.terminal {
        return 0.0;
    }
    let span = parent.v_upper - parent.v_lower;
    if !(span >= 1e-12) {
        return 1.0;
    }
    let value = match mode {
        BackupMode::Max => child.v_upper,
        BackupMode::Avg => child.mean_return(),
    };
    (value - parent.v_lower) / span
}

/// Tree-policy score: normalized exploitation plus `C * sqrt(2 ln N / N_i)`.
pub fn ucb_score(parent: &Node, child: &Node, cfg: &PlannerConfig) -> f64 {
    let n_parent = f64::from(parent.visits + parent.virtual_visits);
    let n_child = f64::from(child.visits + child.virtual_visits);
    exploit_term(parent, child, cfg.backup_mode) + cfg.c_explore * (2.0 * n_parent.ln() / n_child).sqrt()
}

#[derive(Debug, Clone)]
pub struct SearchTree {
    pub nodes: Vec<Node>,
}

impl SearchTree {
    pub const ROOT: NodeId = 0;

    pub fn root(&self) -> &Node {
        &self.nodes[Self::ROOT]
    }

    pub fn children(&self, id: NodeId) -> impl Iterator<Item = (Action, &Node)> {
        self.nodes[id]
            .children
            .iter()
            .enumerate()
            .filter_map(move |(a, c)| c.map(|c| (Action::from_index(a), &self.nodes[c])))
    }

    /// Nodes with at least one child.
    pub fn internal_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.children.iter().any(Option::is_some)).count()
    }

    pub fn depth(&self) -> usize {
        let mut best = 0;
        for id in 0..self.nodes.len() {
            let mut d = 0;
            let mut cur = id;
            while let Some(p) = self.nodes[cur].parent {
                d += 1;
                cur = p;
            }
            best = best.max(d);
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub best_action: Action,
    /// Best reward observed at the root or in any simulated state.
    pub g_hat: f64,
    pub iterations_used: usize,
    pub root_g: f64,
}

/// Relative reward improvement `(g_hat - g) / |g|`.
pub fn relative_improvement(g_current: f64, g_hat: f64) -> f64 {
    (g_hat - g_current) / g_current.abs()
}

struct Reservation {
    path: Vec<NodeId>,
    leaf: NodeId,
    action: Action,
}

struct Expansion {
    state: WorldState,
    g: f64,
    terminal: bool,
    g_max: f64,
}

enum Selected {
    Expand(Reservation),
    /// Every remaining branch below the root is a dead end.
    Exhausted,
    /// Only pending (in-flight) branches remain; retry later.
    Busy,
}

/// MCTS over the pushing model.
pub struct Mcts<'a> {
    pub scene: &'a Scene,
    pub cfg: &'a PlannerConfig,
    pub physics: &'a PhysicsConfig,
    pub policy: &'a dyn RolloutPolicy,
    /// Rollout depth; 0 backs up the expanded node's own reward.
    pub rollout_depth: usize,
}

struct SearchState {
    tree: SearchTree,
    g_hat: f64,
}

impl<'a> Mcts<'a> {
    pub fn new(scene: &'a Scene, cfg: &'a PlannerConfig, physics: &'a PhysicsConfig, policy: &'a dyn RolloutPolicy) -> Self {
        Self {
            scene,
            cfg,
            physics,
            policy,
            rollout_depth: cfg.d_max,
        }
    }

    fn new_node(&self, state: WorldState, g: f64, rng: &mut SimRng) -> Node {
        let mut node = Node::new(state, g);
        node.expansion_order.shuffle(rng);
        node
    }

    /// Runs the search and returns the outcome together with the final tree.
    pub fn search(&self, root: &WorldState, rng: &mut SimRng) -> Result<(SearchOutcome, SearchTree)> {
        self.scene.check_state(root)?;
        if !is_valid_with_tol(self.scene, root, self.physics.penetration_tol) {
            return Err(Error::InvalidStartState);
        }
        let root_g = reward_value(self.scene, root, self.cfg);
        let root_node = self.new_node(root.clone(), root_g, rng);
        let mut st = SearchState {
            tree: SearchTree { nodes: vec![root_node] },
            g_hat: root_g,
        };

        let mut iterations = 0usize;
        let workers = self.cfg.workers.max(1);
        let mut exhausted = false;
        loop {
            let block_end = (iterations + self.cfg.n_min).min(self.cfg.n_max);
            let budget = block_end - iterations;
            let (done, dead) = if workers == 1 {
                self.run_serial(&mut st, budget, rng)
            } else {
                self.run_parallel(&mut st, budget, workers, rng)
            };
            iterations += done;
            exhausted |= dead;
            if exhausted
                || iterations >= self.cfg.n_max
                || relative_improvement(root_g, st.g_hat) >= self.cfg.nu_t
            {
                break;
            }
        }

        let best_action = self.best_action(&st.tree, rng);
        Ok((
            SearchOutcome {
                best_action,
                g_hat: st.g_hat,
                iterations_used: iterations,
                root_g,
            },
            st.tree,
        ))
    }

    fn run_serial(&self, st: &mut SearchState, budget: usize, rng: &mut SimRng) -> (usize, bool) {
        for done in 0..budget {
            match self.select(&mut st.tree) {
                Selected::Expand(r) => {
                    let e = self.simulate(&st.tree.nodes[r.leaf].state, r.action, rng);
                    self.complete(st, r, e, rng);
                }
                Selected::Exhausted => return (done, true),
                Selected::Busy => unreachable!("no pending expansions in serial search"),
            }
        }
        (budget, false)
    }

    fn run_parallel(&self, st: &mut SearchState, budget: usize, workers: usize, rng: &mut SimRng) -> (usize, bool) {
        struct Shared<'s> {
            st: &'s mut SearchState,
            started: usize,
            dead: bool,
        }
        let seeds: Vec<u64> = (0..workers).map(|_| rng.random()).collect();
        let shared = Mutex::new(Shared {
            st,
            started: 0,
            dead: false,
        });
        std::thread::scope(|s| {
            for &seed in &seeds {
                let shared = &shared;
                s.spawn(move || {
                    let mut wrng = SimRng::seed_from_u64(seed);
                    loop {
                        let (reservation, leaf_state) = {
                            let mut guard = shared.lock().expect("search lock");
                            if guard.dead || guard.started >= budget {
                                return;
                            }
                            match self.select(&mut guard.st.tree) {
                                Selected::Expand(r) => {
                                    guard.started += 1;
                                    let leaf_state = guard.st.tree.nodes[r.leaf].state.clone();
                                    (r, leaf_state)
                                }
                                Selected::Exhausted => {
                                    guard.dead = true;
                                    return;
                                }
                                Selected::Busy => {
                                    drop(guard);
                                    std::thread::yield_now();
                                    continue;
                                }
                            }
                        };
                        let e = self.simulate(&leaf_state, reservation.action, &mut wrng);
                        let mut guard = shared.lock().expect("search lock");
                        self.complete(guard.st, reservation, e, &mut wrng);
                    }
                });
            }
        });
        let shared = shared.into_inner().expect("search lock");
        (shared.started, shared.dead)
    }

    /// Descends through fully expanded nodes and reserves the next
    /// unexpanded action of the leaf.
    fn select(&self, tree: &mut SearchTree) -> Selected {
        let mut path = vec![SearchTree::ROOT];
        let mut id = SearchTree::ROOT;
        loop {
            let node = &tree.nodes[id];
            if node.exhausted {
                return Selected::Exhausted;
            }
            if !node.is_fully_expanded() {
                break;
            }
            let mut best: Option<(f64, NodeId)> = None;
            for &a in &node.expansion_order {
                let Some(c) = node.children[usize::from(a)] else { continue };
                let child = &tree.nodes[c];
                if child.exhausted {
                    continue;
                }
                let score = ucb_score(node, child, self.cfg);
                if best.is_none_or(|(s, _)| score > s) {
                    best = Some((score, c));
                }
            }
            match best {
                Some((_, c)) => {
                    id = c;
                    path.push(c);
                }
                None => return Selected::Busy,
            }
        }
        let node = &mut tree.nodes[id];
        let action = Action::from_index(usize::from(node.expansion_order[usize::from(node.expanded)]));
        node.expanded += 1;
        for &p in &path {
            tree.nodes[p].virtual_visits += 1;
        }
        Selected::Expand(Reservation { path, leaf: id, action })
    }

    /// Expansion transition plus truncated rollout; runs without the tree.
    fn simulate(&self, leaf_state: &WorldState, action: Action, rng: &mut SimRng) -> Expansion {
        let tr = step_unchecked(self.scene, leaf_state, action, self.physics);
        if tr.out_of_bounds {
            return Expansion {
                state: tr.next_state,
                g: f64::NEG_INFINITY,
                terminal: true,
                g_max: f64::NEG_INFINITY,
            };
        }
        let g = reward_value(self.scene, &tr.next_state, self.cfg);
        let mut g_max = g;
        let mut state = tr.next_state.clone();
        for _ in 0..self.rollout_depth {
            let a = self.policy.choose(self.scene, &state, rng);
            let r = step_unchecked(self.scene, &state, a, self.physics);
            if r.out_of_bounds {
                break;
            }
            state = r.next_state;
            g_max = g_max.max(reward_value(self.scene, &state, self.cfg));
        }
        Expansion {
            state: tr.next_state,
            g,
            terminal: false,
            g_max,
        }
    }

    fn complete(&self, st: &mut SearchState, r: Reservation, e: Expansion, rng: &mut SimRng) {
        let tree = &mut st.tree;
        for &p in &r.path {
            tree.nodes[p].virtual_visits -= 1;
        }
        let mut child = self.new_node(e.state, e.g, rng);
        child.parent = Some(r.leaf);
        child.action = Some(r.action);
        child.terminal = e.terminal;
        child.exhausted = e.terminal;
        let cid = tree.nodes.len();
        tree.nodes.push(child);
        tree.nodes[r.leaf].children[r.action.index()] = Some(cid);

        if e.terminal {
            self.propagate_exhaustion(tree, r.leaf);
            return;
        }
        tree.nodes[cid].record(e.g_max);
        for &p in &r.path {
            tree.nodes[p].record(e.g_max);
        }
        if e.g_max > st.g_hat {
            st.g_hat = e.g_max;
        }
    }

    fn propagate_exhaustion(&self, tree: &mut SearchTree, from: NodeId) {
        let mut id = from;
        loop {
            let node = &tree.nodes[id];
            let dead = node.is_fully_expanded()
                && node
                    .children
                    .iter()
                    .all(|c| c.is_some_and(|c| tree.nodes[c].exhausted));
            if !dead {
                return;
            }
            tree.nodes[id].exhausted = true;
            match tree.nodes[id].parent {
                Some(p) => id = p,
                None => return,
            }
        }
    }

    /// Argmax of the exploitation term over non-terminal root children;
    /// ties go to more visits, then to a seeded coin.
    fn best_action(&self, tree: &SearchTree, rng: &mut SimRng) -> Action {
        let root = tree.root();
        let mut best: Vec<(Action, f64, u32)> = Vec::new();
        for (a, child) in tree.children(SearchTree::ROOT) {
            if child.terminal {
                continue;
            }
            let q = exploit_term(root, child, self.cfg.backup_mode);
            match best.first() {
                None => best.push((a, q, child.visits)),
                Some(&(_, bq, bn)) => {
                    if q > bq || (q == bq && child.visits > bn) {
                        best.clear();
                        best.push((a, q, child.visits));
                    } else if q == bq && child.visits == bn {
                        best.push((a, q, child.visits));
                    }
                }
            }
        }
        match best.len() {
            0 => Action::from_index(usize::from(root.expansion_order[0])),
            1 => best[0].0,
            n => best[rng.random_range(0..n)].0,
        }
    }
}

/// Runs one search with the configured rollout depth.
pub fn mcts_search(
    scene: &Scene,
    root: &WorldState,
    cfg: &PlannerConfig,
    physics: &PhysicsConfig,
    policy: &dyn RolloutPolicy,
    rng: &mut SimRng,
) -> Result<SearchOutcome> {
    Mcts::new(scene, cfg, physics, policy).search(root, rng).map(|(o, _)| o)
}

/// Closed-loop adapter around [`Mcts`].
pub struct MctsPlanner<'a> {
    pub cfg: &'a PlannerConfig,
    pub physics: &'a PhysicsConfig,
    pub policy: &'a dyn RolloutPolicy,
    pub rollout_depth: usize,
}

impl<'a> MctsPlanner<'a> {
    pub fn new(cfg: &'a PlannerConfig, physics: &'a PhysicsConfig, policy: &'a dyn RolloutPolicy) -> Self {
        Self {
            cfg,
            physics,
            policy,
            rollout_depth: cfg.d_max,
        }
    }
}

impl StepPlanner for MctsPlanner<'_> {
    fn decide(&mut self, scene: &Scene, state: &WorldState, rng: &mut SimRng) -> Result<Decision> {
        let mut mcts = Mcts::new(scene, self.cfg, self.physics, self.policy);
        mcts.rollout_depth = self.rollout_depth;
        let (o, _) = mcts.search(state, rng)?;
        Ok(Decision {
            action: o.best_action,
            g_hat: Some(o.g_hat),
        })
    }
}

#[cfg(test)]
mod tests;
