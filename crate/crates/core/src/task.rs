//! Task observations, contact rewards, completion predicates, and the
//! step sequencer.
//!
//! For one pair, the engine picks the part point nearest the joint and
//! forms the observation `{v_np - v_j, c, d}`. The per-pair reward is
//!
//! ```text
//! contact:      w_dis * exp(-w_dk * |d|) + w_dir * max(dhat_obs . dhat, 0)
//! not contact:  1 - exp(-w_dk * |d|)
//! not care:     1
//! ```
//!
//! and pair weights adapt to the optimization state:
//! `w_k = (1 - R_k) / (n - sum(R) + e)`, so unsatisfied pairs dominate.
//! A step completes when every pair meets its threshold predicate
//! (contact: `|d| < 0.1` and alignment `> 0.8`; not contact: `|d| > 0.1`;
//! not care: always).
//!
//! Two singular cases are defined explicitly: when the joint sits on the
//! target (`|d| < 1e-6`) or the pair's direction is `none`, the direction
//! term takes its maximum and the alignment clause is satisfied.

use crate::coc::{encode_pair, ChainOfContacts, ContactPair, ContactStep, ContactType, Direction, JointId};
use crate::geom::{rot_z, Vec3};
use crate::sceneplan::{resolve_part, PartCloud, ResolvedPart, SceneError, SceneInstance};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Distance below which a contact counts as exactly on target and the
/// direction preference becomes moot.
pub const SINGULAR_DISTANCE: f64 = 1e-6;

/// Standoff from the object bounds when resolving a navigation target.
pub const NAV_STANDOFF: f64 = 0.5;

/// Pelvis reference height for navigation targets.
pub const NAV_PELVIS_HEIGHT: f64 = 0.9;

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("part cloud `{0}` has no points")]
    EmptyCloud(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("navigation target requires a pseudo-contact pair with a direction")]
    NotPseudo,
}

/// World-frame positions of the 15 joints plus the root heading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanoidPose {
    joints: [Vec3; 15],
    pub root_yaw: f64,
}

impl HumanoidPose {
    /// Build from per-joint positions. Coordinates must be finite.
    pub fn new(joints: [Vec3; 15], root_yaw: f64) -> Self {
        debug_assert!(
            joints.iter().all(|p| p.iter().all(|c| c.is_finite())),
            "joint positions must be finite"
        );
        HumanoidPose { joints, root_yaw }
    }

    pub fn joint(&self, id: JointId) -> Vec3 {
        self.joints[id.index()]
    }

    pub fn set_joint(&mut self, id: JointId, position: Vec3) {
        self.joints[id.index()] = position;
    }

    pub fn joints(&self) -> impl Iterator<Item = (JointId, Vec3)> + '_ {
        JointId::ALL.iter().map(|&j| (j, self.joint(j)))
    }
}

/// Observation for a single pair: joint-to-target offset plus the
/// encoded contact type and direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairObservation {
    /// `v_np - v_j`: vector from the joint to the nearest target point.
    pub delta: Vec3,
    pub contact_code: u8,
    /// Direction vector in world frame (object yaw applied); zero means
    /// "no direction preference".
    pub direction_vec: Vec3,
}

/// Weights and thresholds of the reward and completion machinery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub w_dis: f64,
    pub w_dir: f64,
    pub w_dk: f64,
    pub epsilon_e: f64,
    pub dist_threshold: f64,
    pub align_threshold: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            w_dis: 0.7,
            w_dir: 0.3,
            w_dk: 2.0,
            epsilon_e: 1e-6,
            dist_threshold: 0.1,
            align_threshold: 0.8,
        }
    }
}

impl RewardConfig {
    /// Check the documented invariants: positive fields, w_dis + w_dir <= 1.
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("w_dis", self.w_dis),
            ("w_dir", self.w_dir),
            ("w_dk", self.w_dk),
            ("epsilon_e", self.epsilon_e),
            ("dist_threshold", self.dist_threshold),
            ("align_threshold", self.align_threshold),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if self.w_dis + self.w_dir > 1.0 + 1e-12 {
            return Err(format!(
                "w_dis + w_dir must be <= 1, got {}",
                self.w_dis + self.w_dir
            ));
        }
        Ok(())
    }
}

/// Per-pair rewards with their adaptive weights and the weighted total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    /// `(R_k, w_k)` per pair, in step order.
    pub per_pair: Vec<(f64, f64)>,
    /// `sum(w_k * R_k)`, in `[0, 1]`.
    pub total: f64,
}

/// Find the cloud point nearest to `joint_pos`; ties break to the lowest
/// index.
pub fn nearest_point(joint_pos: &Vec3, cloud: &PartCloud) -> Result<(Vec3, usize), TaskError> {
    if cloud.points.is_empty() {
        return Err(TaskError::EmptyCloud(cloud.part_name.clone()));
    }
    let mut best = 0;
    let mut best_d2 = f64::INFINITY;
    for (i, p) in cloud.points.iter().enumerate() {
        let d2 = (p - joint_pos).norm_squared();
        if d2 < best_d2 {
            best_d2 = d2;
            best = i;
        }
    }
    Ok((cloud.points[best], best))
}

fn nearest_of_resolved(joint_pos: &Vec3, resolved: &ResolvedPart<'_>) -> Result<Vec3, TaskError> {
    match resolved {
        ResolvedPart::Cloud(cloud) => Ok(nearest_point(joint_pos, cloud)?.0),
        ResolvedPart::Point(p) => Ok(*p),
    }
}

/// The joint a pair drives: the named joint, or the pelvis for
/// pseudo-contacts.
pub fn driven_joint(pair: &ContactPair) -> JointId {
    pair.joint.unwrap_or(JointId::Pelvis)
}

/// Contact type a pair is scored under: its declared type, or `contact`
/// for pseudo-contacts (walk-to is pelvis-to-point contact).
pub fn scored_contact(pair: &ContactPair) -> ContactType {
    pair.contact.unwrap_or(ContactType::Contact)
}

/// Direction a pair is scored under, in the world frame. Real directions
/// are yawed by the object's net z-rotation; pseudo-contacts score with
/// no direction preference.
fn scored_direction_vec(pair: &ContactPair, scene: &SceneInstance) -> Result<Vec3, TaskError> {
    if pair.is_pseudo() || pair.direction == Direction::None {
        return Ok(Vec3::zeros());
    }
    let yaw = scene.object(&pair.object).map(|o| o.yaw).unwrap_or(0.0);
    let (_, local) = encode_pair(scored_contact(pair), pair.direction);
    Ok(rot_z(yaw) * local)
}

/// Build the uniform observation for one pair against the current pose.
pub fn pair_observation(
    pair: &ContactPair,
    pose: &HumanoidPose,
    scene: &SceneInstance,
) -> Result<PairObservation, TaskError> {
    let joint_pos = pose.joint(driven_joint(pair));
    let resolved = resolve_part(scene, pair, pose)?;
    let target = nearest_of_resolved(&joint_pos, &resolved)?;
    Ok(PairObservation {
        delta: target - joint_pos,
        contact_code: scored_contact(pair).code(),
        direction_vec: scored_direction_vec(pair, scene)?,
    })
}

/// Per-pair contact reward, in `[0, 1]`.
pub fn pair_reward(obs: &PairObservation, contact: ContactType, cfg: &RewardConfig) -> f64 {
    let dist = obs.delta.norm();
    match contact {
        ContactType::NotCare => 1.0,
        ContactType::NotContact => 1.0 - (-cfg.w_dk * dist).exp(),
        ContactType::Contact => {
            let distance_term = cfg.w_dis * (-cfg.w_dk * dist).exp();
            let no_preference = obs.direction_vec == Vec3::zeros();
            let direction_term = if no_preference || dist < SINGULAR_DISTANCE {
                cfg.w_dir
            } else {
                let alignment = (obs.delta / dist).dot(&obs.direction_vec);
                cfg.w_dir * alignment.max(0.0)
            };
            distance_term + direction_term
        }
    }
}

/// Adaptive pair weights `w_k = (1 - R_k) / (n - sum(R) + e)`.
pub fn adaptive_weights(rewards: &[f64], epsilon_e: f64) -> Vec<f64> {
    let n = rewards.len() as f64;
    let sum: f64 = rewards.iter().sum();
    let denom = n - sum + epsilon_e;
    rewards.iter().map(|r| (1.0 - r) / denom).collect()
}

/// Whether one pair currently meets its completion predicate.
pub fn pair_satisfied(obs: &PairObservation, contact: ContactType, cfg: &RewardConfig) -> bool {
    let dist = obs.delta.norm();
    match contact {
        ContactType::NotCare => true,
        ContactType::NotContact => dist > cfg.dist_threshold,
        ContactType::Contact => {
            if dist >= cfg.dist_threshold {
                return false;
            }
            let no_preference = obs.direction_vec == Vec3::zeros();
            if no_preference || dist < SINGULAR_DISTANCE {
                return true;
            }
            (obs.delta / dist).dot(&obs.direction_vec) > cfg.align_threshold
        }
    }
}

/// Score a whole step: per-pair rewards, adaptive weights, weighted sum.
pub fn step_reward(
    step: &ContactStep,
    pose: &HumanoidPose,
    scene: &SceneInstance,
    cfg: &RewardConfig,
) -> Result<RewardBreakdown, TaskError> {
    let mut rewards = Vec::with_capacity(step.pairs.len());
    for pair in &step.pairs {
        let obs = pair_observation(pair, pose, scene)?;
        rewards.push(pair_reward(&obs, scored_contact(pair), cfg));
    }
    let weights = adaptive_weights(&rewards, cfg.epsilon_e);
    let total = rewards.iter().zip(&weights).map(|(r, w)| r * w).sum();
    Ok(RewardBreakdown {
        per_pair: rewards.into_iter().zip(weights).collect(),
        total,
    })
}

/// Whether every pair of a step is satisfied.
pub fn step_complete(
    step: &ContactStep,
    pose: &HumanoidPose,
    scene: &SceneInstance,
    cfg: &RewardConfig,
) -> Result<bool, TaskError> {
    for pair in &step.pairs {
        let obs = pair_observation(pair, pose, scene)?;
        if !pair_satisfied(&obs, scored_contact(pair), cfg) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Navigation point beside an object: its bounding-box center pushed
/// past the extent along `direction` (taken in the object's yawed
/// frame), at pelvis height above the ground.
pub fn nav_target_for(object: &crate::sceneplan::SceneObject, direction: Direction, ground_height: f64) -> Vec3 {
    let local = crate::coc::direction_unit(direction);
    let world_dir = rot_z(object.yaw) * local;
    let half = object.bbox.half_extents();
    // extent of the box along the offset direction
    let reach = half.x * world_dir.x.abs() + half.y * world_dir.y.abs() + half.z * world_dir.z.abs();
    let mut target = object.bbox.center() + world_dir * (reach + NAV_STANDOFF);
    target.z = ground_height + NAV_PELVIS_HEIGHT;
    target
}

/// Navigation target for a pseudo-contact pair.
pub fn resolve_nav_target(pair: &ContactPair, scene: &SceneInstance) -> Result<Vec3, TaskError> {
    if !pair.is_pseudo() || pair.direction == Direction::None {
        return Err(TaskError::NotPseudo);
    }
    let object = scene.object(&pair.object)?;
    Ok(nav_target_for(object, pair.direction, scene.ground_height))
}

/// Outcome snapshot for one pair at a step's final frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairOutcome {
    /// The pair's declared contact type (`None` for pseudo-contacts).
    pub contact: Option<ContactType>,
    pub delta: Vec3,
}

/// Outcome of one attempted step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub completed: bool,
    /// Seconds spent on this step.
    pub time_used: f64,
    /// Final-frame observations per pair, in step order.
    pub pairs: Vec<PairOutcome>,
}

/// Sequencing options: dwell before advancing, and whether the time
/// budget is pooled (`n * budget_per_step` total) or per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SequencerOptions {
    /// Seconds a step must remain complete before the sequencer advances.
    pub dwell_seconds: f64,
    /// Budget granted per step, in seconds.
    pub budget_per_step: f64,
    /// If set, each step must finish within `budget_per_step` on its own;
    /// otherwise the whole chain shares `n * budget_per_step`.
    pub per_step_budget: bool,
}

impl Default for SequencerOptions {
    fn default() -> Self {
        SequencerOptions {
            dwell_seconds: 0.0,
            budget_per_step: 10.0,
            per_step_budget: false,
        }
    }
}

/// Progress through a chain: current step, elapsed clocks, outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequencerState {
    pub current_step: usize,
    pub elapsed_in_step: f64,
    pub elapsed_total: f64,
    pub finished: bool,
    pub per_step_outcome: Vec<StepOutcome>,
    /// Seconds the current step has been continuously complete.
    dwell_accum: f64,
}

impl SequencerState {
    pub fn new() -> Self {
        SequencerState {
            current_step: 0,
            elapsed_in_step: 0.0,
            elapsed_total: 0.0,
            finished: false,
            per_step_outcome: Vec::new(),
            dwell_accum: 0.0,
        }
    }

    /// True once finished with every step completed.
    pub fn succeeded(&self, chain: &ChainOfContacts) -> bool {
        self.finished
            && self.per_step_outcome.len() == chain.len()
            && self.per_step_outcome.iter().all(|o| o.completed)
    }

    fn record(&mut self, step: &ContactStep, pose: &HumanoidPose, scene: &SceneInstance, completed: bool) {
        let pairs = step
            .pairs
            .iter()
            .map(|pair| {
                let delta = pair_observation(pair, pose, scene)
                    .map(|o| o.delta)
                    .unwrap_or_else(|_| Vec3::zeros());
                PairOutcome { contact: pair.contact, delta }
            })
            .collect();
        self.per_step_outcome.push(StepOutcome {
            completed,
            time_used: self.elapsed_in_step,
            pairs,
        });
    }

    /// Advance the sequencer by `dt`: bump clocks, move past the current
    /// step if it is (and has dwelled) complete, and fail the trial when
    /// the time budget runs out. Must not be called once finished.
    pub fn advance(
        &mut self,
        chain: &ChainOfContacts,
        pose: &HumanoidPose,
        scene: &SceneInstance,
        dt: f64,
        cfg: &RewardConfig,
        opts: &SequencerOptions,
    ) -> Result<(), TaskError> {
        assert!(dt > 0.0, "dt must be positive");
        assert!(!self.finished, "advance called on a finished sequencer");

        self.elapsed_in_step += dt;
        self.elapsed_total += dt;

        let step = &chain.steps[self.current_step];
        if step_complete(step, pose, scene, cfg)? {
            self.dwell_accum += dt;
            if self.dwell_accum >= opts.dwell_seconds {
                self.record(step, pose, scene, true);
                self.current_step += 1;
                self.elapsed_in_step = 0.0;
                self.dwell_accum = 0.0;
                if self.current_step == chain.len() {
                    self.finished = true;
                }
                return Ok(());
            }
        } else {
            self.dwell_accum = 0.0;
        }

        let over_budget = if opts.per_step_budget {
            self.elapsed_in_step > opts.budget_per_step
        } else {
            self.elapsed_total > opts.budget_per_step * chain.len() as f64
        };
        if over_budget {
            self.record(step, pose, scene, false);
            self.finished = true;
        }
        Ok(())
    }
}

impl Default for SequencerState {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coc::PartRef;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn cloud(points: Vec<Vec3>) -> PartCloud {
        PartCloud::new("test", points).unwrap()
    }

    fn obs(delta: Vec3, contact: ContactType, dir: Vec3) -> PairObservation {
        PairObservation { delta, contact_code: contact.code(), direction_vec: dir }
    }

    fn t_pose_at(pelvis: Vec3) -> HumanoidPose {
        let mut joints = [Vec3::zeros(); 15];
        for (i, j) in JointId::ALL.iter().enumerate() {
            joints[i] = pelvis + crate::executor::rest_offset(*j);
        }
        HumanoidPose::new(joints, 0.0)
    }

    // single-object scene: one "slab" part of three points around `at`
    fn tiny_scene(at: Vec3, yaw: f64) -> SceneInstance {
        let points = vec![at, at + Vec3::new(0.2, 0.0, 0.0), at + Vec3::new(0.0, 0.2, 0.0)];
        let part = PartCloud::new("top", points.clone()).unwrap();
        let bbox = crate::geom::Aabb::from_points(&points).unwrap();
        let mut objects = BTreeMap::new();
        objects.insert("box000".to_string(), crate::sceneplan::SceneObject { parts: vec![part], bbox, yaw });
        SceneInstance { objects, ground_height: 0.0 }
    }

    #[test]
    fn nearest_point_singleton() {
        let c = cloud(vec![Vec3::new(1.0, 1.0, 1.0)]);
        let (p, i) = nearest_point(&Vec3::zeros(), &c).unwrap();
        assert_eq!((p, i), (Vec3::new(1.0, 1.0, 1.0), 0));
    }

    #[test]
    fn nearest_point_tie_breaks_to_lowest_index() {
        let c = cloud(vec![
            Vec3::new(2.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
        ]);
        let (p, i) = nearest_point(&Vec3::zeros(), &c).unwrap();
        assert_eq!((p, i), (Vec3::new(1.0, 0.0, 0.0), 1));
    }

    #[test]
    fn nearest_point_zero_distance() {
        let c = cloud(vec![Vec3::new(0.5, 0.5, 0.5), Vec3::new(1.0, 0.0, 0.0)]);
        let q = Vec3::new(1.0, 0.0, 0.0);
        let (p, _) = nearest_point(&q, &c).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn nearest_point_empty_cloud_errors() {
        let c = PartCloud { part_name: "empty".into(), points: vec![] };
        assert!(matches!(nearest_point(&Vec3::zeros(), &c), Err(TaskError::EmptyCloud(_))));
    }

    #[test]
    fn pair_reward_not_care_is_one() {
        let o = obs(Vec3::new(5.0, 0.0, 0.0), ContactType::NotCare, Vec3::zeros());
        assert_eq!(pair_reward(&o, ContactType::NotCare, &RewardConfig::default()), 1.0);
    }

    #[test]
    fn pair_reward_contact_at_half_meter_aligned() {
        let o = obs(
            Vec3::new(0.0, 0.0, 0.5),
            ContactType::Contact,
            Vec3::new(0.0, 0.0, 1.0),
        );
        let r = pair_reward(&o, ContactType::Contact, &RewardConfig::default());
        assert!((r - 0.557516).abs() < 1e-6, "got {r}");
    }

    #[test]
    fn pair_reward_not_contact_cases() {
        let cfg = RewardConfig::default();
        let at_zero = obs(Vec3::zeros(), ContactType::NotContact, Vec3::zeros());
        assert_eq!(pair_reward(&at_zero, ContactType::NotContact, &cfg), 0.0);
        let at_one = obs(Vec3::new(1.0, 0.0, 0.0), ContactType::NotContact, Vec3::zeros());
        let r = pair_reward(&at_one, ContactType::NotContact, &cfg);
        assert!((r - 0.864665).abs() < 1e-6, "got {r}");
    }

    #[test]
    fn pair_reward_singular_distance_grants_direction_term() {
        let cfg = RewardConfig::default();
        let o = obs(
            Vec3::new(0.0, 0.0, 1e-9),
            ContactType::Contact,
            Vec3::new(0.0, 0.0, -1.0), // anti-aligned, but distance is singular
        );
        let r = pair_reward(&o, ContactType::Contact, &cfg);
        assert!((r - (cfg.w_dis * 1.0 + cfg.w_dir)).abs() < 1e-8);
    }

    #[test]
    fn pair_reward_none_direction_grants_direction_term() {
        let cfg = RewardConfig::default();
        let o = obs(Vec3::new(0.0, 0.0, 0.5), ContactType::Contact, Vec3::zeros());
        let expected = cfg.w_dis * (-cfg.w_dk * 0.5).exp() + cfg.w_dir;
        assert!((pair_reward(&o, ContactType::Contact, &cfg) - expected).abs() < 1e-12);
    }

    #[test]
    fn adaptive_weight_examples() {
        let w = adaptive_weights(&[0.0], 1e-6);
        assert!((w[0] - 1.0).abs() < 1e-5);
        let w = adaptive_weights(&[1.0, 1.0], 1e-6);
        assert_eq!(w, vec![0.0, 0.0]);
        let w = adaptive_weights(&[0.5, 0.9], 1e-6);
        assert!((w[0] - 0.833333).abs() < 1e-4, "got {}", w[0]);
        assert!((w[1] - 0.166666).abs() < 1e-4, "got {}", w[1]);
    }

    #[test]
    fn pair_satisfied_thresholds() {
        let cfg = RewardConfig::default();
        // contact: close and aligned
        let mk = |dist: f64, align: f64| {
            // delta such that normalized . (0,0,1) == align
            let z = align * dist;
            let x = (dist * dist - z * z).max(0.0).sqrt();
            obs(Vec3::new(x, 0.0, z), ContactType::Contact, Vec3::new(0.0, 0.0, 1.0))
        };
        assert!(pair_satisfied(&mk(0.05, 0.9), ContactType::Contact, &cfg));
        assert!(!pair_satisfied(&mk(0.05, 0.5), ContactType::Contact, &cfg));
        // boundaries are strict; exactly representable boundary values
        let at_dist = obs(Vec3::new(0.0, 0.0, 0.1), ContactType::Contact, Vec3::new(0.0, 0.0, 1.0));
        assert!(!pair_satisfied(&at_dist, ContactType::Contact, &cfg));
        // delta (3,0,4)*2^-7: |d| = 5*2^-7 < 0.1, alignment exactly 4/5
        let at_align = obs(
            Vec3::new(3.0 / 128.0, 0.0, 4.0 / 128.0),
            ContactType::Contact,
            Vec3::new(0.0, 0.0, 1.0),
        );
        assert!(!pair_satisfied(&at_align, ContactType::Contact, &cfg));
        // not contact: must be farther than the threshold
        let near = obs(Vec3::new(0.05, 0.0, 0.0), ContactType::NotContact, Vec3::zeros());
        assert!(!pair_satisfied(&near, ContactType::NotContact, &cfg));
        let far = obs(Vec3::new(0.2, 0.0, 0.0), ContactType::NotContact, Vec3::zeros());
        assert!(pair_satisfied(&far, ContactType::NotContact, &cfg));
        // not care: anything
        let anything = obs(Vec3::new(9.0, 9.0, 9.0), ContactType::NotCare, Vec3::zeros());
        assert!(pair_satisfied(&anything, ContactType::NotCare, &cfg));
    }

    #[test]
    fn pair_observation_direct_evaluation() {
        let scene = tiny_scene(Vec3::new(0.0, 0.0, 2.0), 0.0);
        let pose = t_pose_at(Vec3::new(0.0, 0.0, 0.0));
        // joint pelvis at origin-ish; move pelvis to exactly origin
        let mut pose = pose;
        pose.set_joint(JointId::Pelvis, Vec3::zeros());
        let pair = ContactPair::full(
            "box000",
            PartRef::ObjectPart("top".into()),
            JointId::Pelvis,
            ContactType::Contact,
            Direction::Up,
        )
        .unwrap();
        let o = pair_observation(&pair, &pose, &scene).unwrap();
        assert_eq!(o.delta, Vec3::new(0.0, 0.0, 2.0));
        assert_eq!(o.contact_code, 1);
        assert_eq!(o.direction_vec, Vec3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn pair_observation_joint_target() {
        let scene = tiny_scene(Vec3::new(5.0, 5.0, 5.0), 0.0);
        let mut pose = t_pose_at(Vec3::new(0.0, 0.0, 0.9));
        pose.set_joint(JointId::LeftKnee, Vec3::new(1.0, 2.0, 3.0));
        pose.set_joint(JointId::RightFoot, Vec3::new(1.0, 2.0, 2.0));
        let pair = ContactPair::full(
            "box000",
            PartRef::JointTarget(JointId::LeftKnee),
            JointId::RightFoot,
            ContactType::Contact,
            Direction::None,
        )
        .unwrap();
        let o = pair_observation(&pair, &pose, &scene).unwrap();
        assert_eq!(o.delta, Vec3::new(0.0, 0.0, 1.0));
        assert_eq!(o.direction_vec, Vec3::zeros());
    }

    #[test]
    fn direction_vec_follows_object_yaw() {
        use std::f64::consts::FRAC_PI_2;
        let scene = tiny_scene(Vec3::new(0.0, 0.0, 1.0), -FRAC_PI_2);
        let pose = t_pose_at(Vec3::new(0.0, 0.0, 0.9));
        let pair = ContactPair::full(
            "box000",
            PartRef::ObjectPart("top".into()),
            JointId::Pelvis,
            ContactType::Contact,
            Direction::Front,
        )
        .unwrap();
        let o = pair_observation(&pair, &pose, &scene).unwrap();
        // front (0,-1,0) yawed by -pi/2 lands on (-1,0,0)
        assert!((o.direction_vec - Vec3::new(-1.0, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn step_reward_all_not_care_totals_zero() {
        let scene = tiny_scene(Vec3::new(0.0, 0.0, 1.0), 0.0);
        let pose = t_pose_at(Vec3::new(0.0, 0.0, 0.9));
        let mk = |j: JointId| {
            ContactPair::full(
                "box000",
                PartRef::ObjectPart("top".into()),
                j,
                ContactType::NotCare,
                Direction::None,
            )
            .unwrap()
        };
        let step = ContactStep::new("rest", vec![mk(JointId::LeftHand), mk(JointId::RightHand)]).unwrap();
        let b = step_reward(&step, &pose, &scene, &RewardConfig::default()).unwrap();
        assert!(b.per_pair.iter().all(|&(r, w)| r == 1.0 && w == 0.0));
        assert_eq!(b.total, 0.0);
    }

    #[test]
    fn step_reward_single_contact_pair_composes_formulas() {
        let scene = tiny_scene(Vec3::new(0.0, 0.0, 1.4), 0.0);
        let mut pose = t_pose_at(Vec3::new(0.0, 0.0, 0.9));
        pose.set_joint(JointId::Pelvis, Vec3::new(0.0, 0.0, 0.9));
        let pair = ContactPair::full(
            "box000",
            PartRef::ObjectPart("top".into()),
            JointId::Pelvis,
            ContactType::Contact,
            Direction::Up,
        )
        .unwrap();
        let step = ContactStep::new("reach", vec![pair]).unwrap();
        let b = step_reward(&step, &pose, &scene, &RewardConfig::default()).unwrap();
        // |d| = 0.5 straight up: R = 0.557516, w = (1-R)/(1-R+1e-6)
        assert!((b.total - 0.557515).abs() < 1e-5, "got {}", b.total);
        assert!((b.total - b.per_pair[0].0 * b.per_pair[0].1).abs() < 1e-12);
    }

    #[test]
    fn step_reward_identical_pairs_weigh_equally() {
        let scene = tiny_scene(Vec3::new(0.0, 0.0, 1.5), 0.0);
        let pose = t_pose_at(Vec3::new(0.3, 0.2, 0.9));
        let mk = || {
            ContactPair::full(
                "box000",
                PartRef::ObjectPart("top".into()),
                JointId::Pelvis,
                ContactType::Contact,
                Direction::Up,
            )
            .unwrap()
        };
        let step = ContactStep::new("", vec![mk(), mk()]).unwrap();
        let b = step_reward(&step, &pose, &scene, &RewardConfig::default()).unwrap();
        assert_eq!(b.per_pair[0], b.per_pair[1]);
    }

    #[test]
    fn nav_target_unit_cube() {
        // unit cube centered at the origin, no yaw
        let points = vec![Vec3::new(-0.5, -0.5, -0.5), Vec3::new(0.5, 0.5, 0.5)];
        let part = PartCloud::new("body", points.clone()).unwrap();
        let bbox = crate::geom::Aabb::from_points(&points).unwrap();
        let mut objects = BTreeMap::new();
        objects.insert("cube000".to_string(), crate::sceneplan::SceneObject { parts: vec![part], bbox, yaw: 0.0 });
        let scene = SceneInstance { objects, ground_height: 0.0 };

        let front = ContactPair::pseudo("cube000", Direction::Front).unwrap();
        let t = resolve_nav_target(&front, &scene).unwrap();
        assert!((t - Vec3::new(0.0, -1.0, 0.9)).norm() < 1e-12, "got {t:?}");

        let back = ContactPair::pseudo("cube000", Direction::Back).unwrap();
        let t = resolve_nav_target(&back, &scene).unwrap();
        assert!((t - Vec3::new(0.0, 1.0, 0.9)).norm() < 1e-12);

        // direction none violates the contract
        let mut bad = front;
        bad.direction = Direction::None;
        assert!(matches!(resolve_nav_target(&bad, &scene), Err(TaskError::NotPseudo)));
    }

    #[test]
    fn sequencer_immediate_completion() {
        let scene = tiny_scene(Vec3::new(0.0, 0.0, 0.9), 0.0);
        let mut pose = t_pose_at(Vec3::new(0.0, 0.0, 0.9));
        pose.set_joint(JointId::Pelvis, Vec3::new(0.0, 0.0, 0.9));
        let pair = ContactPair::full(
            "box000",
            PartRef::ObjectPart("top".into()),
            JointId::Pelvis,
            ContactType::Contact,
            Direction::Up,
        )
        .unwrap();
        let chain = ChainOfContacts::new(vec![ContactStep::new("touch", vec![pair]).unwrap()]).unwrap();
        let mut state = SequencerState::new();
        state
            .advance(&chain, &pose, &scene, 1.0 / 30.0, &RewardConfig::default(), &SequencerOptions::default())
            .unwrap();
        assert!(state.finished);
        assert!(state.succeeded(&chain));
        assert_eq!(state.per_step_outcome.len(), 1);
        assert!(state.per_step_outcome[0].completed);
    }

    #[test]
    fn sequencer_budget_exhaustion_fails_current_step() {
        // pelvis far away and static: the 3-step chain can never complete
        let scene = tiny_scene(Vec3::new(100.0, 0.0, 0.9), 0.0);
        let pose = t_pose_at(Vec3::new(0.0, 0.0, 0.9));
        let pair = || {
            ContactPair::full(
                "box000",
                PartRef::ObjectPart("top".into()),
                JointId::Pelvis,
                ContactType::Contact,
                Direction::Up,
            )
            .unwrap()
        };
        let chain = ChainOfContacts::new(vec![
            ContactStep::new("a", vec![pair()]).unwrap(),
            ContactStep::new("b", vec![pair()]).unwrap(),
            ContactStep::new("c", vec![pair()]).unwrap(),
        ])
        .unwrap();
        let cfg = RewardConfig::default();
        let opts = SequencerOptions::default();
        let mut state = SequencerState::new();
        let dt = 0.5;
        let mut guard = 0;
        while !state.finished {
            state.advance(&chain, &pose, &scene, dt, &cfg, &opts).unwrap();
            guard += 1;
            assert!(guard < 100, "sequencer failed to hit the budget");
        }
        assert!(state.elapsed_total > 30.0);
        assert!(state.elapsed_total <= 30.0 + dt + 1e-9);
        assert!(!state.succeeded(&chain));
        assert_eq!(state.per_step_outcome.len(), 1);
        assert!(!state.per_step_outcome[0].completed);
        assert_eq!(state.current_step, 0);
    }

    #[test]
    fn sequencer_records_completion_time() {
        let scene = tiny_scene(Vec3::new(0.0, 0.0, 0.9), 0.0);
        let far = t_pose_at(Vec3::new(50.0, 0.0, 0.9));
        let mut near = t_pose_at(Vec3::new(0.0, 0.0, 0.9));
        near.set_joint(JointId::Pelvis, Vec3::new(0.0, 0.0, 0.9));
        let pair = ContactPair::full(
            "box000",
            PartRef::ObjectPart("top".into()),
            JointId::Pelvis,
            ContactType::Contact,
            Direction::Up,
        )
        .unwrap();
        let chain = ChainOfContacts::new(vec![ContactStep::new("touch", vec![pair]).unwrap()]).unwrap();
        let cfg = RewardConfig::default();
        let opts = SequencerOptions::default();
        let mut state = SequencerState::new();
        let dt = 0.6;
        // scripted poses: 6 frames away, then on target at t = 4.2
        for _ in 0..6 {
            state.advance(&chain, &far, &scene, dt, &cfg, &opts).unwrap();
        }
        state.advance(&chain, &near, &scene, dt, &cfg, &opts).unwrap();
        assert!(state.finished);
        let outcome = &state.per_step_outcome[0];
        assert!(outcome.completed);
        assert!((outcome.time_used - 4.2).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn reward_always_in_unit_interval(
            d in (-10.0..10.0f64, -10.0..10.0f64, -10.0..10.0f64),
            contact in 0u8..3,
            dir in 0usize..7,
        ) {
            let contact = ContactType::from_code(contact).unwrap();
            let dirs = [
                Direction::Up, Direction::Down, Direction::Front,
                Direction::Back, Direction::Left, Direction::Right, Direction::None,
            ];
            let o = obs(Vec3::new(d.0, d.1, d.2), contact, crate::coc::direction_unit(dirs[dir]));
            let r = pair_reward(&o, contact, &RewardConfig::default());
            prop_assert!((0.0..=1.0).contains(&r), "reward {r} out of range");
        }

        #[test]
        fn contact_reward_decreases_with_distance(
            d1 in 0.0..5.0f64,
            extra in 0.001..5.0f64,
        ) {
            let cfg = RewardConfig::default();
            let dir = Vec3::new(0.0, 0.0, 1.0);
            let near = obs(Vec3::new(0.0, 0.0, d1.max(1e-5)), ContactType::Contact, dir);
            let far = obs(Vec3::new(0.0, 0.0, d1.max(1e-5) + extra), ContactType::Contact, dir);
            prop_assert!(
                pair_reward(&near, ContactType::Contact, &cfg)
                    > pair_reward(&far, ContactType::Contact, &cfg)
            );
        }

        #[test]
        fn not_contact_reward_increases_with_distance(
            d1 in 0.0..5.0f64,
            extra in 0.001..5.0f64,
        ) {
            let cfg = RewardConfig::default();
            let near = obs(Vec3::new(d1, 0.0, 0.0), ContactType::NotContact, Vec3::zeros());
            let far = obs(Vec3::new(d1 + extra, 0.0, 0.0), ContactType::NotContact, Vec3::zeros());
            prop_assert!(
                pair_reward(&far, ContactType::NotContact, &cfg)
                    > pair_reward(&near, ContactType::NotContact, &cfg)
            );
        }

        #[test]
        fn weights_nonnegative_sum_below_one(
            rewards in proptest::collection::vec(0.0..=1.0f64, 1..8),
        ) {
            let w = adaptive_weights(&rewards, 1e-6);
            prop_assert!(w.iter().all(|&x| x >= 0.0));
            let n = rewards.len() as f64;
            let sum_r: f64 = rewards.iter().sum();
            let expect: f64 = (n - sum_r) / (n - sum_r + 1e-6);
            prop_assert!((w.iter().sum::<f64>() - expect).abs() < 1e-12);
            prop_assert!(w.iter().sum::<f64>() <= 1.0 + 1e-12);
        }

        #[test]
        fn weights_permutation_equivariant(
            rewards in proptest::collection::vec(0.0..=1.0f64, 2..8),
        ) {
            let w = adaptive_weights(&rewards, 1e-6);
            let mut rev: Vec<f64> = rewards.clone();
            rev.reverse();
            let mut w_rev = adaptive_weights(&rev, 1e-6);
            w_rev.reverse();
            for (a, b) in w.iter().zip(&w_rev) {
                prop_assert!((a - b).abs() < 1e-15);
            }
        }

        #[test]
        fn satisfied_contact_reward_exceeds_threshold_bound(
            dist in 0.0..0.0999f64,
            align in 0.801..1.0f64,
        ) {
            let cfg = RewardConfig::default();
            let z = align * dist;
            let x = (dist * dist - z * z).max(0.0).sqrt();
            let o = obs(Vec3::new(x, 0.0, z), ContactType::Contact, Vec3::new(0.0, 0.0, 1.0));
            prop_assume!(pair_satisfied(&o, ContactType::Contact, &cfg));
            let bound = 0.7 * (-0.2f64).exp() + 0.24;
            prop_assert!(pair_reward(&o, ContactType::Contact, &cfg) >= bound - 1e-6);
        }

        #[test]
        fn nearest_point_matches_exhaustive_scan(
            pts in proptest::collection::vec((-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64), 1..300),
            q in (-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64),
        ) {
            let points: Vec<Vec3> = pts.iter().map(|&(x, y, z)| Vec3::new(x, y, z)).collect();
            let c = cloud(points.clone());
            let query = Vec3::new(q.0, q.1, q.2);
            let (engine_p, engine_i) = nearest_point(&query, &c).unwrap();
            // independent scan: walk backwards, keep <= so earliest index wins
            let sq = |i: usize| {
                let dx = points[i].x - query.x;
                let dy = points[i].y - query.y;
                let dz = points[i].z - query.z;
                dx * dx + dy * dy + dz * dz
            };
            let mut oracle_i = points.len() - 1;
            let mut oracle_d = sq(oracle_i);
            for i in (0..points.len()).rev() {
                let d = sq(i);
                if d <= oracle_d {
                    oracle_d = d;
                    oracle_i = i;
                }
            }
            prop_assert_eq!(engine_i, oracle_i);
            prop_assert_eq!(engine_p, points[oracle_i]);
        }
    }
}
