//! Deterministic quasistatic pushing model.
//!
//! The robot is kinematic: each action moves it along a straight line (or
//! rotates it in place) in equal substeps. After every substep the solver
//! projects interpenetrating bodies apart in a fixed index order:
//!
//! * the robot pushes movables, and movables push each other along the
//!   separating-axis normal by the full depth; the body farther from the
//!   robot along the contact chain is the one that moves,
//! * obstacles push movables back, which lets pushed objects slide along
//!   obstacle faces,
//! * tangential drag is the pusher's relative tangential motion clamped to
//!   `friction_coeff` times the normal correction,
//! * off-center contacts rotate the pushed body about the contact point.
//!
//! A substep that cannot be resolved (robot against an obstacle or the
//! workspace edge, or a movable jammed between the robot and a static body)
//! is shortened by bisection, and the rest of the action is cancelled.
//! The workspace edge either blocks movables like an obstacle
//! ([`BoundaryMode::Wall`]) or lets them fall off, which ends the action with
//! `out_of_bounds` ([`BoundaryMode::Cliff`]).
//! Bodies without a contact chain to the robot never move.

use rand::RngCore;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{penetration_polygons, polygon_contains, vertex_mean, Vec2};
use crate::scene::{is_valid_with_tol, Action, ActionKind, BodyRef, Pose2, Scene, WorldState};

/// Corrections at or below this depth are treated as resting contact.
const CONTACT_SLOP: f64 = 1e-9;

/// Cap on the contact-induced rotation of one body within one substep, radians.
const MAX_ROTATION_PER_SUBSTEP: f64 = 0.2;

/// Bisection rounds used to advance a blocked substep up to contact.
const STALL_BISECTIONS: usize = 6;

/// How the workspace edge acts on movables. The robot is always blocked.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    #[default]
    Wall,
    Cliff,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsConfig {
    pub substeps_per_action: usize,
    pub solver_iterations: usize,
    /// Coulomb coefficient bounding tangential drag.
    pub friction_coeff: f64,
    /// Rotation per meter of tangential lever arm per meter of normal push.
    pub rot_compliance: f64,
    pub penetration_tol: f64,
    /// Relative std of the execution-time friction noise.
    pub noise_std_frac: f64,
    /// Translation stride, meters.
    pub trans_step: f64,
    /// Rotation stride, radians.
    pub rot_step: f64,
    pub boundary: BoundaryMode,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self {
            substeps_per_action: 10,
            solver_iterations: 8,
            friction_coeff: 0.5,
            rot_compliance: 1.0,
            penetration_tol: crate::scene::PENETRATION_TOL,
            noise_std_frac: 0.0,
            trans_step: 0.05,
            rot_step: std::f64::consts::FRAC_PI_4,
            boundary: BoundaryMode::Wall,
        }
    }
}

impl PhysicsConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.substeps_per_action < 1 || self.solver_iterations < 1 {
            return fail("substeps_per_action and solver_iterations must be at least 1");
        }
        if !(self.friction_coeff >= 0.0) {
            return fail("friction_coeff must be non-negative");
        }
        if !(self.noise_std_frac >= 0.0 && self.noise_std_frac < 1.5) {
            return fail("noise_std_frac must lie in [0, 1.5)");
        }
        if !(self.penetration_tol > 0.0 && self.trans_step > 0.0 && self.rot_step > 0.0) {
            return fail("penetration_tol, trans_step and rot_step must be positive");
        }
        Ok(())
    }
}

/// A pusher-pushed pair observed while resolving contacts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PushContact {
    /// `None` for the robot.
    pub pusher: Option<usize>,
    pub pushed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionResult {
    pub next_state: WorldState,
    /// The robot pushed at least one movable.
    pub contacted_any: bool,
    pub out_of_bounds: bool,
    /// The robot was blocked before completing the action.
    pub stalled: bool,
    /// Sorted movable indices moved during the action.
    pub pushed_indices: Vec<usize>,
    /// Distinct push relations, in first-seen order.
    pub contacts: Vec<PushContact>,
}

/// Draws an execution friction coefficient: `max(0, c_f + N(0, p * c_f))`.
pub fn sample_friction(cfg: &PhysicsConfig, rng: &mut dyn RngCore) -> f64 {
    let cf = cfg.friction_coeff;
    if cfg.noise_std_frac == 0.0 || cf == 0.0 {
        return cf;
    }
    let normal = Normal::new(cf, cfg.noise_std_frac * cf).expect("finite std");
    normal.sample(rng).max(0.0)
}

/// Executes one action. Fails if `state` is not valid.
///
/// With `noise_rng`, one friction coefficient is sampled for the whole
/// action via [`sample_friction`].
pub fn step(
    scene: &Scene,
    state: &WorldState,
    action: Action,
    cfg: &PhysicsConfig,
    noise_rng: Option<&mut dyn RngCore>,
) -> Result<TransitionResult> {
    scene.check_state(state)?;
    if !is_valid_with_tol(scene, state, cfg.penetration_tol) {
        return Err(Error::InvalidStartState);
    }
    let friction = match noise_rng {
        Some(rng) => sample_friction(cfg, rng),
        None => cfg.friction_coeff,
    };
    Ok(step_with_friction(scene, state, action, cfg, friction))
}

/// [`step`] without the start-state validity check, for states produced by
/// the model itself.
pub fn step_unchecked(scene: &Scene, state: &WorldState, action: Action, cfg: &PhysicsConfig) -> TransitionResult {
    step_with_friction(scene, state, action, cfg, cfg.friction_coeff)
}

fn step_with_friction(
    scene: &Scene,
    state: &WorldState,
    action: Action,
    cfg: &PhysicsConfig,
    friction: f64,
) -> TransitionResult {
    let mut solver = Solver::new(scene, cfg, friction, state);
    let n = cfg.substeps_per_action as f64;
    let increment = match action.kind() {
        ActionKind::Translate { .. } => RobotIncrement {
            shift: action.direction().expect("translation") * (cfg.trans_step / n),
            turn: 0.0,
        },
        ActionKind::Rotate { sign } => RobotIncrement {
            shift: Vec2::ZERO,
            turn: f64::from(sign) * cfg.rot_step / n,
        },
    };

    let mut stalled = false;
    let mut out_of_bounds = false;
    for _ in 0..cfg.substeps_per_action {
        match solver.try_substep(increment, 1.0) {
            Substep::Resolved => solver.commit(),
            Substep::OutOfBounds => {
                out_of_bounds = true;
                break;
            }
            Substep::Blocked => {
                stalled = true;
                let (mut lo, mut hi) = (0.0, 1.0);
                for _ in 0..STALL_BISECTIONS {
                    let mid = 0.5 * (lo + hi);
                    if solver.try_substep(increment, mid) == Substep::Resolved {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                if lo > 0.0 && solver.try_substep(increment, lo) == Substep::Resolved {
                    solver.commit();
                }
                break;
            }
        }
    }
    solver.finish(stalled, out_of_bounds)
}

#[derive(Clone, Copy)]
struct RobotIncrement {
    shift: Vec2,
    turn: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Substep {
    Resolved,
    Blocked,
    OutOfBounds,
}

const INACTIVE: u32 = u32::MAX;

struct Solver<'a> {
    scene: &'a Scene,
    cfg: &'a PhysicsConfig,
    friction: f64,

    // committed state
    robot: Pose2,
    poses: Vec<Pose2>,
    verts: Vec<Vec<Vec<Vec2>>>,
    pushed: Vec<bool>,
    contacted: bool,
    contacts: Vec<PushContact>,

    // substep scratch
    w_robot: Pose2,
    w_robot_verts: Vec<Vec<Vec2>>,
    w_poses: Vec<Pose2>,
    w_verts: Vec<Vec<Vec<Vec2>>>,
    chain: Vec<u32>,
    turned: Vec<f64>,
    active: Vec<usize>,
    w_contacted: bool,
    w_contacts: Vec<PushContact>,
}

fn transform_into(shape_parts: &[Vec<Vec2>], pose: &Pose2, out: &mut [Vec<Vec2>]) {
    let (s, c) = pose.theta.sin_cos();
    let t = pose.position();
    for (src, dst) in shape_parts.iter().zip(out.iter_mut()) {
        for (v, d) in src.iter().zip(dst.iter_mut()) {
            *d = v.rotated_sc(s, c) + t;
        }
    }
}

/// Mean of the vertices of either polygon lying inside the other.
fn contact_point(a: &[Vec2], b: &[Vec2]) -> Vec2 {
    let mut sum = Vec2::ZERO;
    let mut n = 0usize;
    for &v in b {
        if polygon_contains(a, v) {
            sum += v;
            n += 1;
        }
    }
    for &v in a {
        if polygon_contains(b, v) {
            sum += v;
            n += 1;
        }
    }
    if n > 0 {
        sum * (1.0 / n as f64)
    } else {
        (vertex_mean(a) + vertex_mean(b)) * 0.5
    }
}

#[inline]
fn circles_overlap(p: Vec2, rp: f64, q: Vec2, rq: f64) -> bool {
    let r = rp + rq;
    (p - q).norm_sq() <= r * r
}

impl<'a> Solver<'a> {
    fn new(scene: &'a Scene, cfg: &'a PhysicsConfig, friction: f64, state: &WorldState) -> Self {
        let verts: Vec<Vec<Vec<Vec2>>> = scene
            .movables()
            .iter()
            .zip(&state.movables)
            .map(|(m, p)| m.shape.world_parts(p))
            .collect();
        let n = verts.len();
        Self {
            scene,
            cfg,
            friction,
            robot: state.robot,
            poses: state.movables.clone(),
            w_robot: state.robot,
            w_robot_verts: scene.robot_shape().world_parts(&state.robot),
            w_poses: state.movables.clone(),
            w_verts: verts.clone(),
            verts,
            pushed: vec![false; n],
            contacted: false,
            contacts: Vec::new(),
            chain: vec![INACTIVE; n],
            turned: vec![0.0; n],
            active: Vec::with_capacity(n),
            w_contacted: false,
            w_contacts: Vec::new(),
        }
    }

    fn reset_scratch(&mut self) {
        for &i in &self.active {
            self.w_poses[i] = self.poses[i];
            self.w_verts[i].clone_from(&self.verts[i]);
            self.chain[i] = INACTIVE;
            self.turned[i] = 0.0;
        }
        self.active.clear();
        self.w_contacted = false;
        self.w_contacts.clear();
    }

    fn commit(&mut self) {
        self.robot = self.w_robot;
        for &i in &self.active {
            self.poses[i] = self.w_poses[i];
            self.verts[i].clone_from(&self.w_verts[i]);
            self.pushed[i] = true;
            self.chain[i] = INACTIVE;
            self.turned[i] = 0.0;
        }
        self.active.clear();
        self.contacted |= self.w_contacted;
        for c in self.w_contacts.drain(..) {
            if !self.contacts.contains(&c) {
                self.contacts.push(c);
            }
        }
    }

    fn finish(self, stalled: bool, out_of_bounds: bool) -> TransitionResult {
        TransitionResult {
            next_state: WorldState::new(self.robot, self.poses),
            contacted_any: self.contacted,
            out_of_bounds,
            stalled,
            pushed_indices: self
                .pushed
                .iter()
                .enumerate()
                .filter_map(|(i, &p)| p.then_some(i))
                .collect(),
            contacts: self.contacts,
        }
    }

    fn robot_blocked(&self) -> bool {
        let ws = self.scene.workspace();
        if !self.w_robot_verts.iter().flatten().all(|&v| ws.contains(v)) {
            return true;
        }
        let rpos = self.w_robot.position();
        let rr = self.scene.robot_radius();
        self.scene.obstacles().iter().any(|o| {
            circles_overlap(rpos, rr, o.pose.position(), o.radius)
                && o.world_parts.iter().any(|op| {
                    self.w_robot_verts.iter().any(|rp| {
                        penetration_polygons(op, rp).is_some_and(|p| p.depth > self.cfg.penetration_tol)
                    })
                })
        })
    }

    /// Runs one substep scaled by `frac` from the committed state.
    fn try_substep(&mut self, inc: RobotIncrement, frac: f64) -> Substep {
        self.reset_scratch();
        self.w_robot = Pose2::new(
            self.robot.x + inc.shift.x * frac,
            self.robot.y + inc.shift.y * frac,
            self.robot.theta + inc.turn * frac,
        );
        transform_into(self.scene.robot_shape().parts(), &self.w_robot, &mut self.w_robot_verts);
        if self.robot_blocked() {
            return Substep::Blocked;
        }

        let mut settled = false;
        for _ in 0..self.cfg.solver_iterations {
            if !self.solve_round() {
                settled = true;
                break;
            }
        }
        if !settled && self.max_residual() > self.cfg.penetration_tol {
            return Substep::Blocked;
        }

        let ws = self.scene.workspace();
        let outside = self
            .active
            .iter()
            .any(|&i| !self.w_verts[i].iter().flatten().all(|&v| ws.contains(v)));
        if outside {
            match self.cfg.boundary {
                BoundaryMode::Wall => Substep::Blocked,
                BoundaryMode::Cliff => Substep::OutOfBounds,
            }
        } else {
            Substep::Resolved
        }
    }

    fn refresh(&mut self, i: usize) {
        transform_into(self.scene.movables()[i].shape.parts(), &self.w_poses[i], &mut self.w_verts[i]);
    }

    fn activate(&mut self, i: usize, depth: u32) {
        if self.chain[i] == INACTIVE {
            self.active.push(i);
        }
        self.chain[i] = self.chain[i].min(depth);
    }

    /// Velocity (substep displacement) of a point rigidly attached to a pusher.
    fn pusher_motion(&self, pusher: Option<usize>, at: Vec2) -> Vec2 {
        let (before, now) = match pusher {
            None => (self.robot, self.w_robot),
            Some(j) => (self.poses[j], self.w_poses[j]),
        };
        let turn = crate::scene::normalize_angle(now.theta - before.theta);
        (now.position() - before.position()) + (at - now.position()).perp() * turn
    }

    /// Moves movable `i` out by `depth` along `normal` as pushed by `pusher`,
    /// with tangential drag and contact rotation.
    fn push(&mut self, i: usize, pusher: Option<usize>, normal: Vec2, depth: f64, contact: Vec2) {
        let pusher_depth = match pusher {
            None => 0,
            Some(j) => self.chain[j],
        };
        self.activate(i, pusher_depth.saturating_add(1));
        let c = PushContact { pusher, pushed: i };
        if !self.w_contacts.contains(&c) {
            self.w_contacts.push(c);
        }

        let mut pose = self.w_poses[i].translated(normal * depth);

        let tangent = normal.perp();
        let relative = self.pusher_motion(pusher, contact) - self.pusher_motion(Some(i), contact);
        let limit = self.friction * depth;
        let drag = relative.dot(tangent).clamp(-limit, limit);
        pose = pose.translated(tangent * drag);

        let centroid = pose.transform(self.scene.movables()[i].local_centroid());
        let arm = (contact - centroid).cross(normal);
        let budget = MAX_ROTATION_PER_SUBSTEP - self.turned[i].abs();
        let angle = (self.cfg.rot_compliance * arm * depth).clamp(-budget, budget);
        if angle != 0.0 {
            pose = pose.rotated_about(contact, angle);
            self.turned[i] += angle;
        }

        self.w_poses[i] = pose;
        self.refresh(i);
    }

    fn shift(&mut self, i: usize, d: Vec2) {
        self.w_poses[i] = self.w_poses[i].translated(d);
        self.refresh(i);
    }

    /// One Gauss-Seidel sweep; returns whether anything moved.
    fn solve_round(&mut self) -> bool {
        let mut moved = false;
        let n = self.w_poses.len();
        let rpos = self.w_robot.position();
        let rr = self.scene.robot_radius();

        for i in 0..n {
            let m = &self.scene.movables()[i];
            if !circles_overlap(rpos, rr, self.w_poses[i].position(), m.radius) {
                continue;
            }
            for rp in 0..self.w_robot_verts.len() {
                for k in 0..self.w_verts[i].len() {
                    let (a, b) = (&self.w_robot_verts[rp], &self.w_verts[i][k]);
                    if let Some(p) = penetration_polygons(a, b) {
                        if p.depth > CONTACT_SLOP {
                            let c = contact_point(a, b);
                            self.push(i, None, p.normal, p.depth, c);
                            self.w_contacted = true;
                            moved = true;
                        }
                    }
                }
            }
        }

        // `active` may grow while iterating; new entries are visited too.
        let mut idx = 0;
        while idx < self.active.len() {
            let i = self.active[idx];
            idx += 1;
            for j in 0..n {
                if j == i || (self.chain[j] != INACTIVE && j < i) {
                    // active-active pairs are handled once, from the lower index
                    continue;
                }
                moved |= self.resolve_pair(i, j);
            }
            moved |= self.resolve_obstacles(i);
            if self.cfg.boundary == BoundaryMode::Wall {
                moved |= self.resolve_boundary(i);
            }
        }
        moved
    }

    /// Translation that brings the footprint of movable `i` inside the workspace.
    fn boundary_correction(&self, i: usize) -> Vec2 {
        let ws = self.scene.workspace();
        let (mut lo, mut hi) = (Vec2::new(f64::INFINITY, f64::INFINITY), Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
        for &v in self.w_verts[i].iter().flatten() {
            lo = Vec2::new(lo.x.min(v.x), lo.y.min(v.y));
            hi = Vec2::new(hi.x.max(v.x), hi.y.max(v.y));
        }
        let axis = |lo: f64, hi: f64, min: f64, max: f64| {
            if lo < min {
                min - lo
            } else if hi > max {
                max - hi
            } else {
                0.0
            }
        };
        Vec2::new(axis(lo.x, hi.x, ws.min.x, ws.max.x), axis(lo.y, hi.y, ws.min.y, ws.max.y))
    }

    fn resolve_boundary(&mut self, i: usize) -> bool {
        let d = self.boundary_correction(i);
        if d.x.abs() > CONTACT_SLOP || d.y.abs() > CONTACT_SLOP {
            self.shift(i, d);
            true
        } else {
            false
        }
    }

    fn resolve_pair(&mut self, i: usize, j: usize) -> bool {
        let (ri, rj) = (self.scene.movables()[i].radius, self.scene.movables()[j].radius);
        if !circles_overlap(self.w_poses[i].position(), ri, self.w_poses[j].position(), rj) {
            return false;
        }
        let mut moved = false;
        for ki in 0..self.w_verts[i].len() {
            for kj in 0..self.w_verts[j].len() {
                let (a, b) = (&self.w_verts[i][ki], &self.w_verts[j][kj]);
                let Some(p) = penetration_polygons(a, b) else { continue };
                if p.depth <= CONTACT_SLOP {
                    continue;
                }
                let c = contact_point(a, b);
                let (ci, cj) = (self.chain[i], self.chain[j]);
                if ci < cj {
                    self.push(j, Some(i), p.normal, p.depth, c);
                } else if cj < ci {
                    self.push(i, Some(j), -p.normal, p.depth, c);
                } else {
                    self.shift(i, p.normal * (-0.5 * p.depth));
                    self.shift(j, p.normal * (0.5 * p.depth));
                }
                moved = true;
            }
        }
        moved
    }

    fn resolve_obstacles(&mut self, i: usize) -> bool {
        let scene = self.scene;
        let r = scene.movables()[i].radius;
        let mut moved = false;
        for o in scene.obstacles() {
            if !circles_overlap(self.w_poses[i].position(), r, o.pose.position(), o.radius) {
                continue;
            }
            for op in &o.world_parts {
                for k in 0..self.w_verts[i].len() {
                    if let Some(p) = penetration_polygons(op, &self.w_verts[i][k]) {
                        if p.depth > CONTACT_SLOP {
                            self.shift(i, p.normal * p.depth);
                            moved = true;
                        }
                    }
                }
            }
        }
        moved
    }

    /// Deepest remaining overlap involving the robot or a moved body.
    fn max_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        let mut deepest = |a: &[Vec<Vec2>], b: &[Vec<Vec2>]| {
            for pa in a {
                for pb in b {
                    if let Some(p) = penetration_polygons(pa, pb) {
                        worst = worst.max(p.depth);
                    }
                }
            }
        };
        let n = self.w_poses.len();
        for i in 0..n {
            if circles_overlap(
                self.w_robot.position(),
                self.scene.robot_radius(),
                self.w_poses[i].position(),
                self.scene.movables()[i].radius,
            ) {
                deepest(&self.w_robot_verts, &self.w_verts[i]);
            }
        }
        for &i in &self.active {
            let ri = self.scene.movables()[i].radius;
            for j in 0..n {
                if j == i || (self.chain[j] != INACTIVE && j < i) {
                    continue;
                }
                if circles_overlap(self.w_poses[i].position(), ri, self.w_poses[j].position(), self.scene.movables()[j].radius) {
                    deepest(&self.w_verts[i], &self.w_verts[j]);
                }
            }
            for o in self.scene.obstacles() {
                if circles_overlap(self.w_poses[i].position(), ri, o.pose.position(), o.radius) {
                    deepest(&o.world_parts, &self.w_verts[i]);
                }
            }
        }
        if self.cfg.boundary == BoundaryMode::Wall {
            for &i in &self.active {
                let d = self.boundary_correction(i);
                worst = worst.max(d.x.abs()).max(d.y.abs());
            }
        }
        worst
    }
}

/// Builds the contact graph of a transition and returns the movables not
/// reachable from the robot. Empty for sound transitions.
pub fn unreachable_pushed(result: &TransitionResult) -> Vec<usize> {
    let mut reached: Vec<usize> = Vec::new();
    let mut frontier: Vec<Option<usize>> = vec![None];
    while let Some(p) = frontier.pop() {
        for c in &result.contacts {
            if c.pusher == p && !reached.contains(&c.pushed) {
                reached.push(c.pushed);
                frontier.push(Some(c.pushed));
            }
        }
    }
    result
        .pushed_indices
        .iter()
        .copied()
        .filter(|i| !reached.contains(i))
        .collect()
}

/// Convenience used by tests and tools: the body a contact refers to.
pub fn pusher_body(c: &PushContact) -> BodyRef {
    match c.pusher {
        None => BodyRef::Robot,
        Some(j) => BodyRef::Movable(j),
    }
}
