use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::reward_value;
use crate::physics::{step, PhysicsConfig};
use crate::planner::{Outcome, TrialRecord};
use crate::scene::{Action, PlannerConfig, Scene, WorldState};

/// One entry of a trajectory log; the first has no action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogStep {
    pub action: Option<Action>,
    pub g: f64,
    pub contacted: bool,
    pub state: WorldState,
}

/// Replayable record of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub scene_ref: String,
    pub seed: u64,
    pub steps: Vec<LogStep>,
    pub outcome: Outcome,
}

impl TrajectoryLog {
    pub fn from_record(record: &TrialRecord, scene_ref: impl Into<String>) -> Self {
        Self {
            scene_ref: scene_ref.into(),
            seed: record.seed,
            steps: record
                .trajectory
                .iter()
                .map(|s| LogStep {
                    action: s.action,
                    g: s.g,
                    contacted: s.contacted,
                    state: s.state.clone(),
                })
                .collect(),
            outcome: record.outcome,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("log serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_json())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Re-executes the logged actions from the logged start state through the
/// noiseless model and returns the reward after every step, start included.
pub fn replay(scene: &Scene, log: &TrajectoryLog, cfg: &PlannerConfig, physics: &PhysicsConfig) -> Result<Vec<f64>> {
    let noiseless = PhysicsConfig {
        noise_std_frac: 0.0,
        ..physics.clone()
    };
    let first = log
        .steps
        .first()
        .ok_or_else(|| Error::InvalidScene("trajectory log has no start state".into()))?;
    let mut state = first.state.clone();
    let mut gs = vec![reward_value(scene, &state, cfg)];
    for s in &log.steps[1..] {
        let action = s
            .action
            .ok_or_else(|| Error::InvalidScene("trajectory step without an action".into()))?;
        state = step(scene, &state, action, &noiseless, None)?.next_state;
        gs.push(reward_value(scene, &state, cfg));
    }
    Ok(gs)
}

/// Step indices that get a snapshot: every `k`-th step plus the last one.
pub fn snapshot_steps(steps: usize, k: usize) -> Vec<usize> {
    let k = k.max(1);
    let mut out: Vec<usize> = (0..steps).step_by(k).collect();
    out.push(steps);
    out
}

const CLASS_COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn svg_polygon(out: &mut String, pts: &[crate::geometry::Vec2], fill: &str, flip: f64) {
    let coords: Vec<String> = pts.iter().map(|p| format!("{:.5},{:.5}", p.x, flip - p.y)).collect();
    let _ = writeln!(
        out,
        r#"<polygon points="{}" fill="{fill}" stroke="black" stroke-width="0.0008"/>"#,
        coords.join(" ")
    );
}

/// Top view of `state` in meters, y pointing up.
pub fn render_svg(scene: &Scene, state: &WorldState, caption: &str) -> String {
    let ws = scene.workspace();
    let flip = ws.min.y + ws.max.y;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{} {} {} {}" width="600" height="{:.0}">"#,
        ws.min.x,
        ws.min.y,
        ws.width(),
        ws.height(),
        600.0 * ws.height() / ws.width()
    );
    let _ = writeln!(
        out,
        r##"<rect x="{}" y="{}" width="{}" height="{}" fill="#fafafa" stroke="black" stroke-width="0.001"/>"##,
        ws.min.x,
        ws.min.y,
        ws.width(),
        ws.height()
    );
    for o in scene.obstacles() {
        for part in o.world_parts() {
            svg_polygon(&mut out, part, "#555555", flip);
        }
    }
    for (m, pose) in scene.movables().iter().zip(&state.movables) {
        let fill = CLASS_COLORS[m.class_id % CLASS_COLORS.len()];
        for part in m.shape.world_parts(pose) {
            svg_polygon(&mut out, &part, fill, flip);
        }
    }
    for part in scene.robot_shape().world_parts(&state.robot) {
        svg_polygon(&mut out, &part, "#222222", flip);
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.4}" y="{:.4}" font-size="{:.4}" font-family="monospace">{caption}</text>"#,
        ws.min.x + 0.01 * ws.width(),
        ws.min.y + 0.04 * ws.height(),
        0.03 * ws.height()
    );
    out.push_str("</svg>\n");
    out
}

/// Writes `step_NNNNN.svg` snapshots of a log into `dir`; returns the paths.
pub fn export_svgs(scene: &Scene, log: &TrajectoryLog, k: usize, dir: &Path) -> Result<Vec<PathBuf>> {
    let steps = log.steps.len().saturating_sub(1);
    let mut paths = Vec::new();
    for i in snapshot_steps(steps, k) {
        let s = &log.steps[i];
        let path = dir.join(format!("step_{i:05}.svg"));
        write_file(&path, &render_svg(scene, &s.state, &format!("step {i}  g={:.4}", s.g)))?;
        paths.push(path);
    }
    Ok(paths)
}
