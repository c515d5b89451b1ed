//! Sorted-state discriminator and the heuristic sorting reward.
//!
//! The reward rewards compact classes (`e_self`), well separated class means
//! (`e_other`) and class means away from obstacles (`e_obst`), scaled by the
//! distance between the two closest class means:
//!
//! ```text
//! g = Σ_i (e_self_i + Σ_{j<i} e_other_ij + e_obst_i) / d_cent
//! ```
//!
//! with `p_i(q) = exp(-λ |q - μ_i|²)`, `e_self_i` the mean of `ln p_i` over
//! the members of class `i`, `e_other_ij = ln(1 - p_i(μ_j))` and
//! `e_obst_i = Σ_o ln(1 - p_i(μ_o))`.

use serde::{Deserialize, Serialize};

use crate::geometry::{convex_hull, polygon_distance, set_distance, ConvexSet, Vec2};
use crate::scene::{HullMode, PlannerConfig, Scene, WorldState};

/// Lower clamp for arguments of `ln`.
pub const LN_FLOOR: f64 = 1e-9;

/// Lower clamp for the class-center distance, meters.
pub const D_CENT_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    /// Per class.
    pub e_self: Vec<f64>,
    /// Per unordered class pair `(i, j)`, `j < i`, in row-major order:
    /// (1,0), (2,0), (2,1), ...
    pub e_other: Vec<f64>,
    /// Per class.
    pub e_obst: Vec<f64>,
    pub d_cent: f64,
    pub g: f64,
}

#[inline]
fn clamped_ln(x: f64) -> f64 {
    x.max(LN_FLOOR).ln()
}

/// Mean of the member centroids of `class_id`.
pub fn class_mean(scene: &Scene, state: &WorldState, class_id: usize) -> Vec2 {
    let members = scene.class_members(class_id);
    let mut acc = Vec2::ZERO;
    for &m in members {
        acc += scene.movable_centroid(state, m);
    }
    acc * (1.0 / members.len() as f64)
}

pub fn class_means(scene: &Scene, state: &WorldState) -> Vec<Vec2> {
    (0..scene.class_count())
        .map(|c| class_mean(scene, state, c))
        .collect()
}

/// Full reward breakdown for `state`.
pub fn reward(scene: &Scene, state: &WorldState, cfg: &PlannerConfig) -> RewardBreakdown {
    let k = scene.class_count();
    let lambda = cfg.lambda;
    let means = class_means(scene, state);
    let affinity = |center: Vec2, q: Vec2| (-lambda * (q - center).norm_sq()).exp();

    let e_self: Vec<f64> = (0..k)
        .map(|c| {
            let members = scene.class_members(c);
            let total: f64 = members
                .iter()
                .map(|&m| clamped_ln(affinity(means[c], scene.movable_centroid(state, m))))
                .sum();
            total / members.len() as f64
        })
        .collect();

    let mut e_other = Vec::with_capacity(k * k.saturating_sub(1) / 2);
    let mut d_cent = f64::INFINITY;
    for i in 1..k {
        for j in 0..i {
            e_other.push(clamped_ln(1.0 - affinity(means[i], means[j])));
            d_cent = d_cent.min(means[i].distance(means[j]));
        }
    }
    if k < 2 {
        d_cent = scene.workspace().diagonal();
    }
    let d_cent = d_cent.max(D_CENT_FLOOR);

    let e_obst: Vec<f64> = means
        .iter()
        .map(|&mu| {
            scene
                .obstacles()
                .iter()
                .map(|o| clamped_ln(1.0 - affinity(mu, o.centroid())))
                .sum()
        })
        .collect();

    let total: f64 = e_self.iter().sum::<f64>() + e_other.iter().sum::<f64>() + e_obst.iter().sum::<f64>();
    RewardBreakdown {
        e_self,
        e_other,
        e_obst,
        d_cent,
        g: total / d_cent,
    }
}

/// Scalar reward only.
pub fn reward_value(scene: &Scene, state: &WorldState, cfg: &PlannerConfig) -> f64 {
    reward(scene, state, cfg).g
}

/// Convex hull of class `class_id` under the configured hull mode.
pub fn class_hull(scene: &Scene, state: &WorldState, class_id: usize, mode: HullMode) -> ConvexSet {
    let mut points = Vec::new();
    for &m in scene.class_members(class_id) {
        match mode {
            HullMode::Footprints => {
                let pose = state.movables[m];
                let (s, c) = pose.theta.sin_cos();
                for v in scene.movables()[m].shape.parts().iter().flatten() {
                    points.push(v.rotated_sc(s, c) + pose.position());
                }
            }
            HullMode::Centers => points.push(scene.movable_centroid(state, m)),
        }
    }
    convex_hull(&points).expect("classes are non-empty")
}

/// Smallest hull-to-hull gap and smallest hull-to-obstacle gap.
/// Either is `+inf` when its set of pairs is empty.
pub fn separation_gaps(scene: &Scene, state: &WorldState, mode: HullMode) -> (f64, f64) {
    let hulls: Vec<ConvexSet> = (0..scene.class_count())
        .map(|c| class_hull(scene, state, c, mode))
        .collect();
    let mut class_gap = f64::INFINITY;
    for i in 0..hulls.len() {
        for j in i + 1..hulls.len() {
            class_gap = class_gap.min(set_distance(&hulls[i], &hulls[j]));
        }
    }
    let mut obstacle_gap = f64::INFINITY;
    for h in &hulls {
        for o in scene.obstacles() {
            for part in o.world_parts() {
                obstacle_gap = obstacle_gap.min(polygon_distance(h.vertices(), part));
            }
        }
    }
    (class_gap, obstacle_gap)
}

/// Every pair of class hulls, and every hull and obstacle, are more than
/// `epsilon` apart.
pub fn is_sorted(scene: &Scene, state: &WorldState, cfg: &PlannerConfig) -> bool {
    let (class_gap, obstacle_gap) = separation_gaps(scene, state, cfg.hull_mode);
    class_gap > cfg.epsilon && obstacle_gap > cfg.epsilon
}
