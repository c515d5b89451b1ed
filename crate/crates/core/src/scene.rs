//! Domain types: workspace, bodies, poses, the discrete action space and the
//! planner configuration.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, Vec2};

/// Interpenetration depth (meters) below which two bodies count as touching.
pub const PENETRATION_TOL: f64 = 1e-4;

/// Slack (meters) for workspace containment of vertices.
pub const BOUNDARY_TOL: f64 = 1e-9;

/// Wraps an angle into (-π, π].
pub fn normalize_angle(theta: f64) -> f64 {
    let mut t = theta % (2.0 * PI);
    if t <= -PI {
        t += 2.0 * PI;
    } else if t > PI {
        t -= 2.0 * PI;
    }
    t
}

/// Planar rigid pose. Serialized as `[x, y, theta]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    #[inline]
    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    #[inline]
    pub fn transform(&self, p: Vec2) -> Vec2 {
        p.rotated(self.theta) + self.position()
    }

    pub fn translated(&self, d: Vec2) -> Pose2 {
        Pose2 {
            x: self.x + d.x,
            y: self.y + d.y,
            theta: self.theta,
        }
    }

    /// Rotates the pose by `angle` about the world point `pivot`.
    pub fn rotated_about(&self, pivot: Vec2, angle: f64) -> Pose2 {
        let p = (self.position() - pivot).rotated(angle) + pivot;
        Pose2::new(p.x, p.y, self.theta + angle)
    }
}

impl From<[f64; 3]> for Pose2 {
    fn from(a: [f64; 3]) -> Self {
        Pose2::new(a[0], a[1], a[2])
    }
}

impl From<Pose2> for [f64; 3] {
    fn from(p: Pose2) -> Self {
        [p.x, p.y, p.theta]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShapeKind {
    ConvexPolygon,
    CompositePolygon,
}

/// Rigid footprint made of one or more convex CCW parts in the body frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ShapeRepr", into = "ShapeRepr")]
pub struct Shape {
    parts: Vec<Vec<Vec2>>,
}

#[derive(Serialize, Deserialize)]
struct ShapeRepr {
    parts: Vec<Vec<Vec2>>,
}

impl TryFrom<ShapeRepr> for Shape {
    type Error = Error;
    fn try_from(r: ShapeRepr) -> Result<Self> {
        Shape::new(r.parts)
    }
}

impl From<Shape> for ShapeRepr {
    fn from(s: Shape) -> Self {
        ShapeRepr { parts: s.parts }
    }
}

impl Shape {
    pub fn new(parts: Vec<Vec<Vec2>>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidScene("shape has no parts".into()));
        }
        for (i, part) in parts.iter().enumerate() {
            if !part.iter().all(|v| v.is_finite()) || !geometry::is_convex_ccw(part) {
                return Err(Error::InvalidScene(format!(
                    "shape part {i} is not a convex counter-clockwise polygon"
                )));
            }
        }
        Ok(Self { parts })
    }

    /// Axis-aligned rectangle centered on the body origin.
    pub fn rectangle(width: f64, height: f64) -> Self {
        let (w, h) = (width / 2.0, height / 2.0);
        Self {
            parts: vec![vec![
                Vec2::new(-w, -h),
                Vec2::new(w, -h),
                Vec2::new(w, h),
                Vec2::new(-w, h),
            ]],
        }
    }

    pub fn cube(side: f64) -> Self {
        Self::rectangle(side, side)
    }

    /// U-shaped body: two arms joined by a base, opening towards +y, built
    /// from three touching rectangles. `inner` is the gap between the arms.
    pub fn u_shape(inner: f64, wall: f64, depth: f64) -> Self {
        let outer = inner + 2.0 * wall;
        let rect = |x0: f64, y0: f64, x1: f64, y1: f64| {
            vec![
                Vec2::new(x0, y0),
                Vec2::new(x1, y0),
                Vec2::new(x1, y1),
                Vec2::new(x0, y1),
            ]
        };
        let (l, r) = (-outer / 2.0, outer / 2.0);
        let (b, t) = (-depth / 2.0, depth / 2.0);
        Self {
            parts: vec![
                rect(l, b + wall, l + wall, t),
                rect(r - wall, b + wall, r, t),
                rect(l, b, r, b + wall),
            ],
        }
    }

    pub fn parts(&self) -> &[Vec<Vec2>] {
        &self.parts
    }

    pub fn kind(&self) -> ShapeKind {
        if self.parts.len() == 1 {
            ShapeKind::ConvexPolygon
        } else {
            ShapeKind::CompositePolygon
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.parts.iter().map(Vec::len).sum()
    }

    pub fn area(&self) -> f64 {
        self.parts.iter().map(|p| geometry::polygon_area(p)).sum()
    }

    /// Area centroid in the body frame.
    pub fn centroid(&self) -> Vec2 {
        let mut acc = Vec2::ZERO;
        let mut area = 0.0;
        for p in &self.parts {
            let a = geometry::polygon_area(p);
            acc += geometry::polygon_centroid(p) * a;
            area += a;
        }
        acc * (1.0 / area)
    }

    /// Largest distance from the body origin to any vertex.
    pub fn bounding_radius(&self) -> f64 {
        self.parts
            .iter()
            .flatten()
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }

    pub fn world_parts(&self, pose: &Pose2) -> Vec<Vec<Vec2>> {
        let (s, c) = pose.theta.sin_cos();
        let t = pose.position();
        self.parts
            .iter()
            .map(|p| p.iter().map(|v| v.rotated_sc(s, c) + t).collect())
            .collect()
    }
}

/// Axis-aligned workspace rectangle, serialized as `[xmin, ymin, xmax, ymax]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Workspace {
    pub min: Vec2,
    pub max: Vec2,
}

impl Workspace {
    pub fn new(xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> Self {
        Self {
            min: Vec2::new(xmin, ymin),
            max: Vec2::new(xmax, ymax),
        }
    }

    /// Square of side `side` centered on the origin.
    pub fn centered_square(side: f64) -> Self {
        Self::new(-side / 2.0, -side / 2.0, side / 2.0, side / 2.0)
    }

    #[inline]
    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x - BOUNDARY_TOL
            && p.x <= self.max.x + BOUNDARY_TOL
            && p.y >= self.min.y - BOUNDARY_TOL
            && p.y <= self.max.y + BOUNDARY_TOL
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn diagonal(&self) -> f64 {
        (self.max - self.min).norm()
    }
}

impl From<[f64; 4]> for Workspace {
    fn from(a: [f64; 4]) -> Self {
        Workspace::new(a[0], a[1], a[2], a[3])
    }
}

impl From<Workspace> for [f64; 4] {
    fn from(w: Workspace) -> Self {
        [w.min.x, w.min.y, w.max.x, w.max.y]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Movable {
    pub shape: Shape,
    pub class_id: usize,
    pub(crate) centroid: Vec2,
    pub(crate) radius: f64,
}

impl Movable {
    pub fn new(shape: Shape, class_id: usize) -> Self {
        let centroid = shape.centroid();
        let radius = shape.bounding_radius();
        Self {
            shape,
            class_id,
            centroid,
            radius,
        }
    }

    /// Body-frame area centroid.
    pub fn local_centroid(&self) -> Vec2 {
        self.centroid
    }
}

/// Fixed obstacle with its world-frame geometry cached.
#[derive(Debug, Clone, PartialEq)]
pub struct Obstacle {
    pub shape: Shape,
    pub pose: Pose2,
    pub(crate) world_parts: Vec<Vec<Vec2>>,
    pub(crate) centroid: Vec2,
    pub(crate) radius: f64,
}

impl Obstacle {
    pub fn new(shape: Shape, pose: Pose2) -> Self {
        let world_parts = shape.world_parts(&pose);
        let centroid = pose.transform(shape.centroid());
        let radius = shape.bounding_radius();
        Self {
            shape,
            pose,
            world_parts,
            centroid,
            radius,
        }
    }

    pub fn world_parts(&self) -> &[Vec<Vec2>] {
        &self.world_parts
    }

    /// World-frame area centroid.
    pub fn centroid(&self) -> Vec2 {
        self.centroid
    }
}

/// Immutable problem description. Shareable across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    workspace: Workspace,
    robot_shape: Shape,
    robot_radius: f64,
    movables: Vec<Movable>,
    obstacles: Vec<Obstacle>,
    class_count: usize,
    class_members: Vec<Vec<usize>>,
}

impl Scene {
    pub fn new(
        workspace: Workspace,
        robot_shape: Shape,
        movables: Vec<(Shape, usize)>,
        obstacles: Vec<(Shape, Pose2)>,
        class_count: usize,
    ) -> Result<Self> {
        if !(workspace.width() > 0.0 && workspace.height() > 0.0) {
            return Err(Error::InvalidScene("workspace has no area".into()));
        }
        if class_count == 0 {
            return Err(Error::InvalidScene("class_count must be positive".into()));
        }
        let mut class_members = vec![Vec::new(); class_count];
        for (i, (_, class)) in movables.iter().enumerate() {
            if *class >= class_count {
                return Err(Error::InvalidScene(format!(
                    "movable {i} has class {class} >= class_count {class_count}"
                )));
            }
            class_members[*class].push(i);
        }
        if let Some(c) = class_members.iter().position(Vec::is_empty) {
            return Err(Error::InvalidScene(format!("class {c} has no members")));
        }
        Ok(Self {
            workspace,
            robot_radius: robot_shape.bounding_radius(),
            robot_shape,
            movables: movables
                .into_iter()
                .map(|(s, c)| Movable::new(s, c))
                .collect(),
            obstacles: obstacles
                .into_iter()
                .map(|(s, p)| Obstacle::new(s, p))
                .collect(),
            class_count,
            class_members,
        })
    }

    pub fn workspace(&self) -> &Workspace {
        &self.workspace
    }

    pub fn robot_shape(&self) -> &Shape {
        &self.robot_shape
    }

    pub(crate) fn robot_radius(&self) -> f64 {
        self.robot_radius
    }

    pub fn movables(&self) -> &[Movable] {
        &self.movables
    }

    pub fn obstacles(&self) -> &[Obstacle] {
        &self.obstacles
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    /// Movable indices belonging to `class_id`.
    pub fn class_members(&self, class_id: usize) -> &[usize] {
        &self.class_members[class_id]
    }

    pub fn shape_of(&self, body: BodyRef) -> &Shape {
        match body {
            BodyRef::Robot => &self.robot_shape,
            BodyRef::Movable(i) => &self.movables[i].shape,
            BodyRef::Obstacle(i) => &self.obstacles[i].shape,
        }
    }

    pub fn check_state(&self, state: &WorldState) -> Result<()> {
        if state.movables.len() != self.movables.len() {
            return Err(Error::StateMismatch(format!(
                "{} movable poses for {} movables",
                state.movables.len(),
                self.movables.len()
            )));
        }
        Ok(())
    }

    /// World-frame centroid of movable `i`.
    pub fn movable_centroid(&self, state: &WorldState, i: usize) -> Vec2 {
        state.movables[i].transform(self.movables[i].centroid)
    }

    /// Returns a copy with movables reordered: new movable `k` is old `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Scene> {
        Scene::new(
            self.workspace,
            self.robot_shape.clone(),
            perm.iter()
                .map(|&i| (self.movables[i].shape.clone(), self.movables[i].class_id))
                .collect(),
            self.obstacles
                .iter()
                .map(|o| (o.shape.clone(), o.pose))
                .collect(),
            self.class_count,
        )
    }
}

/// Mutable part of the world: robot and movable poses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub robot: Pose2,
    pub movables: Vec<Pose2>,
}

impl WorldState {
    pub fn new(robot: Pose2, movables: Vec<Pose2>) -> Self {
        Self { robot, movables }
    }

    pub fn pose(&self, body: BodyRef, scene: &Scene) -> Pose2 {
        match body {
            BodyRef::Robot => self.robot,
            BodyRef::Movable(i) => self.movables[i],
            BodyRef::Obstacle(i) => scene.obstacles[i].pose,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BodyRef {
    Robot,
    Movable(usize),
    Obstacle(usize),
}

/// All part vertices of `body`, transformed into the world frame.
pub fn world_vertices(scene: &Scene, state: &WorldState, body: BodyRef) -> Vec<Vec2> {
    let pose = state.pose(body, scene);
    let (s, c) = pose.theta.sin_cos();
    let t = pose.position();
    scene
        .shape_of(body)
        .parts()
        .iter()
        .flatten()
        .map(|v| v.rotated_sc(s, c) + t)
        .collect()
}

fn parts_penetration(a: &[Vec<Vec2>], b: &[Vec<Vec2>]) -> f64 {
    let mut depth = 0.0f64;
    for pa in a {
        for pb in b {
            if let Some(p) = geometry::penetration_polygons(pa, pb) {
                depth = depth.max(p.depth);
            }
        }
    }
    depth
}

/// Validity with the default [`PENETRATION_TOL`].
pub fn is_valid(scene: &Scene, state: &WorldState) -> bool {
    is_valid_with_tol(scene, state, PENETRATION_TOL)
}

/// No pairwise interpenetration deeper than `tol`, every footprint inside the workspace.
pub fn is_valid_with_tol(scene: &Scene, state: &WorldState, tol: f64) -> bool {
    if scene.check_state(state).is_err() {
        return false;
    }
    let ws = scene.workspace();
    let robot = scene.robot_shape.world_parts(&state.robot);
    let movables: Vec<Vec<Vec<Vec2>>> = scene
        .movables
        .iter()
        .zip(&state.movables)
        .map(|(m, p)| m.shape.world_parts(p))
        .collect();

    let inside = |parts: &[Vec<Vec2>]| parts.iter().flatten().all(|&v| ws.contains(v));
    if !inside(&robot) || !movables.iter().all(|m| inside(m)) {
        return false;
    }

    let near = |p: Vec2, rp: f64, q: Vec2, rq: f64| (p - q).norm_sq() <= (rp + rq) * (rp + rq);
    let rpos = state.robot.position();
    for o in &scene.obstacles {
        if near(rpos, scene.robot_radius, o.pose.position(), o.radius)
            && parts_penetration(&robot, &o.world_parts) > tol
        {
            return false;
        }
    }
    for (i, mi) in movables.iter().enumerate() {
        let pi = state.movables[i].position();
        let ri = scene.movables[i].radius;
        if near(pi, ri, rpos, scene.robot_radius) && parts_penetration(&robot, mi) > tol {
            return false;
        }
        for o in &scene.obstacles {
            if near(pi, ri, o.pose.position(), o.radius) && parts_penetration(mi, &o.world_parts) > tol {
                return false;
            }
        }
        for (j, mj) in movables.iter().enumerate().skip(i + 1) {
            let pj = state.movables[j].position();
            if near(pi, ri, pj, scene.movables[j].radius) && parts_penetration(mi, mj) > tol {
                return false;
            }
        }
    }
    true
}

/// One of the ten robot motions: ids 0..8 translate along the compass
/// directions (0 = east, counter-clockwise in 45° steps), 8 rotates
/// counter-clockwise, 9 clockwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Action(u8);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionKind {
    Translate { direction: u8 },
    Rotate { sign: i8 },
}

pub const ACTION_COUNT: usize = 10;

impl Action {
    pub fn new(id: u8) -> Option<Self> {
        (usize::from(id) < ACTION_COUNT).then_some(Action(id))
    }

    pub fn from_index(i: usize) -> Self {
        assert!(i < ACTION_COUNT, "action id {i} out of range");
        Action(i as u8)
    }

    pub fn all() -> impl Iterator<Item = Action> + Clone {
        (0..ACTION_COUNT as u8).map(Action)
    }

    pub fn id(self) -> u8 {
        self.0
    }

    pub fn index(self) -> usize {
        usize::from(self.0)
    }

    pub fn kind(self) -> ActionKind {
        match self.0 {
            d @ 0..=7 => ActionKind::Translate { direction: d },
            8 => ActionKind::Rotate { sign: 1 },
            _ => ActionKind::Rotate { sign: -1 },
        }
    }

    /// Unit direction of a translation; `None` for rotations.
    pub fn direction(self) -> Option<Vec2> {
        match self.kind() {
            ActionKind::Translate { direction } => {
                let a = f64::from(direction) * PI / 4.0;
                Some(Vec2::new(a.cos(), a.sin()))
            }
            ActionKind::Rotate { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BackupMode {
    #[default]
    Max,
    Avg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum HullMode {
    /// Class hulls span the members' footprint vertices.
    #[default]
    Footprints,
    /// Class hulls span member centroids only.
    Centers,
}

/// Planner parameters. Field names double as config-file keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    /// Minimum hull gap for a sorted state, meters.
    pub epsilon: f64,
    /// Trap threshold on the relative reward improvement.
    pub nu: f64,
    /// Relative improvement below which another block of iterations runs.
    pub nu_t: f64,
    pub d_max: usize,
    pub n_min: usize,
    pub n_max: usize,
    pub c_explore: f64,
    /// Sharpness of the class Gaussian, 1/m².
    pub lambda: f64,
    pub no_contact_limit: usize,
    pub rng_seed: u64,
    pub backup_mode: BackupMode,
    pub hull_mode: HullMode,
    /// Parallel rollout workers inside one search.
    pub workers: usize,
    /// Hard cap on executed actions per trial.
    pub max_actions: usize,
    /// Rollouts per decision for the greedy-rollout baseline.
    pub greedy_rollouts: usize,
    pub ils_iterations: usize,
    pub ils_restart_interval: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.05,
            nu: 0.05,
            nu_t: 0.2,
            d_max: 3,
            n_min: 500,
            n_max: 1500,
            c_explore: std::f64::consts::FRAC_1_SQRT_2,
            lambda: 50.0,
            no_contact_limit: 15,
            rng_seed: 0,
            backup_mode: BackupMode::Max,
            hull_mode: HullMode::Footprints,
            workers: 1,
            max_actions: 1000,
            greedy_rollouts: 500,
            ils_iterations: 500,
            ils_restart_interval: 50,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidConfig(m.into()));
        if !(self.epsilon > 0.0) {
            return fail("epsilon must be positive");
        }
        if !(self.nu > 0.0 && self.nu <= self.nu_t) {
            return fail("need 0 < nu <= nu_t");
        }
        if self.n_min > self.n_max {
            return fail("need n_min <= n_max");
        }
        if self.n_min == 0 {
            return fail("n_min must be positive");
        }
        if self.d_max < 1 {
            return fail("d_max must be at least 1");
        }
        if !(self.lambda > 0.0) {
            return fail("lambda must be positive");
        }
        if self.workers == 0 {
            return fail("workers must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RobotEntry {
    shape: Shape,
    pose: Pose2,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MovableEntry {
    shape: Shape,
    class: usize,
    pose: Pose2,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ObstacleEntry {
    shape: Shape,
    pose: Pose2,
}

/// On-disk scene: static description plus the initial poses.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneFile {
    workspace: Workspace,
    robot: RobotEntry,
    movables: Vec<MovableEntry>,
    obstacles: Vec<ObstacleEntry>,
    class_count: usize,
}

impl SceneFile {
    pub fn from_parts(scene: &Scene, state: &WorldState) -> Self {
        Self {
            workspace: scene.workspace,
            robot: RobotEntry {
                shape: scene.robot_shape.clone(),
                pose: state.robot,
            },
            movables: scene
                .movables
                .iter()
                .zip(&state.movables)
                .map(|(m, p)| MovableEntry {
                    shape: m.shape.clone(),
                    class: m.class_id,
                    pose: *p,
                })
                .collect(),
            obstacles: scene
                .obstacles
                .iter()
                .map(|o| ObstacleEntry {
                    shape: o.shape.clone(),
                    pose: o.pose,
                })
                .collect(),
            class_count: scene.class_count,
        }
    }

    pub fn into_parts(self) -> Result<(Scene, WorldState)> {
        let state = WorldState::new(
            self.robot.pose,
            self.movables.iter().map(|m| m.pose).collect(),
        );
        let scene = Scene::new(
            self.workspace,
            self.robot.shape,
            self.movables.into_iter().map(|m| (m.shape, m.class)).collect(),
            self.obstacles.into_iter().map(|o| (o.shape, o.pose)).collect(),
            self.class_count,
        )?;
        Ok((scene, state))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> Result<(Scene, WorldState)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
            .map_err(|e| Error::json(path, e))?
            .into_parts()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}
