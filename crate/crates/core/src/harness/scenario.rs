use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{penetration_polygons, Vec2};
use crate::planner::SimRng;
use crate::scene::{Pose2, Scene, Shape, Workspace, WorldState};

/// Placement attempts per body before giving up.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 100_000;

/// Random scene family. Field names double as spec-file keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSpec {
    pub n_objects: usize,
    pub n_classes: usize,
    /// Fraction of objects that are U-shaped instead of cubes.
    pub ratio_nonconvex: f64,
    pub n_obstacles: usize,
    /// Side of the square workspace, meters.
    pub workspace_side: f64,
    /// Cube side, meters.
    pub cube_side: f64,
    /// Robot footprint (width, height), meters.
    pub robot_size: [f64; 2],
    pub seed: u64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            n_objects: 8,
            n_classes: 2,
            ratio_nonconvex: 0.0,
            n_obstacles: 0,
            workspace_side: 0.5,
            cube_side: 0.025,
            robot_size: [0.025, 0.05],
            seed: 0,
        }
    }
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidConfig(m));
        if self.n_objects == 0 {
            return fail("n_objects must be positive".into());
        }
        if self.n_classes == 0 || self.n_classes > self.n_objects {
            return fail(format!(
                "n_classes must be in 1..={}, got {}",
                self.n_objects, self.n_classes
            ));
        }
        if !(0.0..=1.0).contains(&self.ratio_nonconvex) {
            return fail(format!("ratio_nonconvex {} outside [0, 1]", self.ratio_nonconvex));
        }
        if !(self.workspace_side > 0.0 && self.cube_side > 0.0) {
            return fail("workspace_side and cube_side must be positive".into());
        }
        if !(self.robot_size[0] > 0.0 && self.robot_size[1] > 0.0) {
            return fail("robot_size must be positive".into());
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, String> {
        serde_json::from_str(text).map_err(|e| e.to_string())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }

    pub fn nonconvex_count(&self) -> usize {
        (self.ratio_nonconvex * self.n_objects as f64).round() as usize
    }
}

/// U-shape with the footprint of two cubes side by side.
pub fn u_object(cube: f64) -> Shape {
    Shape::u_shape(cube, cube / 2.0, 1.5 * cube)
}

/// Random rectangle with at most twice the area of a cube.
fn random_obstacle(cube: f64, rng: &mut SimRng) -> Shape {
    let w = rng.random_range(0.5 * cube..=2.0 * cube);
    let h_max = (2.0 * cube * cube / w).min(2.0 * cube);
    let h = rng.random_range(0.5 * cube..=h_max);
    Shape::rectangle(w, h)
}

struct Placed {
    center: Vec2,
    radius: f64,
    parts: Vec<Vec<Vec2>>,
}

fn overlaps(a: &Placed, b: &Placed) -> bool {
    let r = a.radius + b.radius;
    if (a.center - b.center).norm_sq() > r * r {
        return false;
    }
    a.parts
        .iter()
        .any(|pa| b.parts.iter().any(|pb| penetration_polygons(pa, pb).is_some()))
}

/// Uniform pose whose footprint is inside `ws` and clear of `placed`.
fn place(shape: &Shape, ws: &Workspace, placed: &[Placed], rng: &mut SimRng) -> Result<(Pose2, Placed)> {
    let radius = shape.bounding_radius();
    for _ in 0..MAX_PLACEMENT_ATTEMPTS {
        let pose = Pose2::new(
            rng.random_range(ws.min.x..ws.max.x),
            rng.random_range(ws.min.y..ws.max.y),
            rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        );
        let parts = shape.world_parts(&pose);
        if !parts.iter().flatten().all(|&v| ws.contains(v)) {
            continue;
        }
        let body = Placed {
            center: pose.position(),
            radius,
            parts,
        };
        if placed.iter().all(|p| !overlaps(p, &body)) {
            return Ok((pose, body));
        }
    }
    Err(Error::SceneTooDense)
}

/// Samples a scene: obstacles first, then movables, then the robot, each at
/// a uniform pose that fits in the workspace without touching earlier bodies.
pub fn generate_scene(spec: &ScenarioSpec, rng: &mut SimRng) -> Result<(Scene, WorldState)> {
    spec.validate()?;
    let ws = Workspace::centered_square(spec.workspace_side);
    let cube = spec.cube_side;
    let mut placed = Vec::new();

    let mut obstacles = Vec::with_capacity(spec.n_obstacles);
    for _ in 0..spec.n_obstacles {
        let shape = random_obstacle(cube, rng);
        let (pose, body) = place(&shape, &ws, &placed, rng)?;
        placed.push(body);
        obstacles.push((shape, pose));
    }

    let mut classes: Vec<usize> = (0..spec.n_objects).map(|i| i % spec.n_classes).collect();
    classes.shuffle(rng);
    let mut nonconvex = vec![false; spec.n_objects];
    for flag in nonconvex.iter_mut().take(spec.nonconvex_count()) {
        *flag = true;
    }
    nonconvex.shuffle(rng);

    let mut movables = Vec::with_capacity(spec.n_objects);
    let mut poses = Vec::with_capacity(spec.n_objects);
    for (class, u) in classes.into_iter().zip(nonconvex) {
        let shape = if u { u_object(cube) } else { Shape::cube(cube) };
        let (pose, body) = place(&shape, &ws, &placed, rng)?;
        placed.push(body);
        movables.push((shape, class));
        poses.push(pose);
    }

    let robot_shape = Shape::rectangle(spec.robot_size[0], spec.robot_size[1]);
    let (robot, _) = place(&robot_shape, &ws, &placed, rng)?;

    let scene = Scene::new(ws, robot_shape, movables, obstacles, spec.n_classes)?;
    Ok((scene, WorldState::new(robot, poses)))
}
