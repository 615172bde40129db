//! Deterministic kinematic executor.
//!
//! Stands in for a trained control policy: each frame it moves every
//! driven joint straight toward (or away from) its current target at a
//! clamped speed, with undriven joints tracking a T-pose around the
//! pelvis. No physics, no randomness — a feasible plan always completes,
//! which makes the reward, completion, and metric machinery testable end
//! to end.

use crate::coc::{ChainOfContacts, ContactType, JointId};
use crate::geom::{rot_z, Vec3};
use crate::sceneplan::{resolve_part, PlanEntry, ResolvedPart, SceneInstance};
use crate::task::{
    nearest_point, resolve_nav_target, scored_contact, step_reward, HumanoidPose, RewardBreakdown,
    RewardConfig, SequencerOptions, SequencerState, StepOutcome, TaskError,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Extra clearance beyond the not-contact threshold so a repelled joint
/// settles clear of the predicate boundary instead of chattering on it.
pub const REPULSION_MARGIN: f64 = 0.05;

/// T-pose offset of a joint from the pelvis. The humanoid faces -y
/// (front) at zero yaw with arms spread along x; pelvis rest height is
/// 0.9 m.
pub fn rest_offset(joint: JointId) -> Vec3 {
    match joint {
        JointId::Pelvis => Vec3::new(0.0, 0.0, 0.0),
        JointId::Torso => Vec3::new(0.0, 0.0, 0.25),
        JointId::Head => Vec3::new(0.0, 0.0, 0.60),
        JointId::LeftShoulder => Vec3::new(0.20, 0.0, 0.45),
        JointId::LeftElbow => Vec3::new(0.45, 0.0, 0.45),
        JointId::LeftHand => Vec3::new(0.70, 0.0, 0.45),
        JointId::RightShoulder => Vec3::new(-0.20, 0.0, 0.45),
        JointId::RightElbow => Vec3::new(-0.45, 0.0, 0.45),
        JointId::RightHand => Vec3::new(-0.70, 0.0, 0.45),
        JointId::LeftHip => Vec3::new(0.10, 0.0, -0.10),
        JointId::LeftKnee => Vec3::new(0.10, 0.0, -0.45),
        JointId::LeftFoot => Vec3::new(0.10, 0.0, -0.85),
        JointId::RightHip => Vec3::new(-0.10, 0.0, -0.10),
        JointId::RightKnee => Vec3::new(-0.10, 0.0, -0.45),
        JointId::RightFoot => Vec3::new(-0.10, 0.0, -0.85),
    }
}

/// Kinematic stepping parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExecutorConfig {
    /// Simulation tick, seconds.
    pub dt: f64,
    /// Speed cap for limb joints, m/s.
    pub joint_speed: f64,
    /// Speed cap for the pelvis, m/s.
    pub root_speed: f64,
    /// Rest offsets from the pelvis, indexed by `JointId::index()`.
    pub rest_offsets: [Vec3; 15],
}

impl Default for ExecutorConfig {
    fn default() -> Self {
        let mut rest_offsets = [Vec3::zeros(); 15];
        for j in JointId::ALL {
            rest_offsets[j.index()] = rest_offset(j);
        }
        ExecutorConfig {
            dt: 1.0 / 30.0,
            joint_speed: 1.5,
            root_speed: 1.0,
            rest_offsets,
        }
    }
}

impl ExecutorConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.dt > 0.0) {
            return Err(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.joint_speed > 0.0) || !(self.root_speed > 0.0) {
            return Err("speeds must be positive".into());
        }
        Ok(())
    }

    /// Rest pose with the pelvis at `pelvis` and the given heading.
    pub fn rest_pose(&self, pelvis: Vec3, root_yaw: f64) -> HumanoidPose {
        let rot = rot_z(root_yaw);
        let mut joints = [Vec3::zeros(); 15];
        for j in JointId::ALL {
            joints[j.index()] = pelvis + rot * self.rest_offsets[j.index()];
        }
        HumanoidPose::new(joints, root_yaw)
    }
}

/// Per-frame motion goal for one joint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MotionTarget {
    /// Move straight toward the point.
    Approach(Vec3),
    /// Move away from the point until at least `min_dist` from it.
    Avoid { point: Vec3, min_dist: f64 },
}

fn step_toward(from: Vec3, to: Vec3, max_step: f64) -> Vec3 {
    let delta = to - from;
    let dist = delta.norm();
    if dist <= max_step {
        to
    } else {
        from + delta * (max_step / dist)
    }
}

/// Advance every joint one tick toward its target.
///
/// Targeted joints move straight toward (or away from) their goal,
/// clamped to `joint_speed * dt` (`root_speed * dt` for the pelvis).
/// Untargeted joints track pelvis + rest offset. Root yaw is preserved.
pub fn step_dynamics(
    pose: &HumanoidPose,
    targets: &BTreeMap<JointId, MotionTarget>,
    cfg: &ExecutorConfig,
) -> HumanoidPose {
    let rot = rot_z(pose.root_yaw);
    let goal_of = |joint: JointId, current: Vec3, pelvis: Vec3| -> Vec3 {
        match targets.get(&joint) {
            Some(MotionTarget::Approach(p)) => *p,
            Some(MotionTarget::Avoid { point, min_dist }) => {
                let away = current - point;
                let dist = away.norm();
                if dist >= *min_dist {
                    current
                } else if dist < 1e-9 {
                    // sitting exactly on the point: escape straight up
                    point + Vec3::new(0.0, 0.0, *min_dist)
                } else {
                    point + away * (*min_dist / dist)
                }
            }
            None => {
                if joint == JointId::Pelvis {
                    current
                } else {
                    pelvis + rot * cfg.rest_offsets[joint.index()]
                }
            }
        }
    };

    let mut next = pose.clone();
    let old_pelvis = pose.joint(JointId::Pelvis);
    let pelvis_goal = goal_of(JointId::Pelvis, old_pelvis, old_pelvis);
    let new_pelvis = step_toward(old_pelvis, pelvis_goal, cfg.root_speed * cfg.dt);
    next.set_joint(JointId::Pelvis, new_pelvis);

    for joint in JointId::ALL {
        if joint == JointId::Pelvis {
            continue;
        }
        let current = pose.joint(joint);
        let goal = goal_of(joint, current, new_pelvis);
        next.set_joint(joint, step_toward(current, goal, cfg.joint_speed * cfg.dt));
    }
    next
}

/// One recorded executor frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    /// Simulated time after this frame's update.
    pub time: f64,
    /// Step that was active while this frame was simulated.
    pub step_index: usize,
    pub pose: HumanoidPose,
    pub reward: RewardBreakdown,
}

/// Full record of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialLog {
    pub plan_id: String,
    pub chain: ChainOfContacts,
    pub frames: Vec<Frame>,
    pub per_step_outcome: Vec<StepOutcome>,
    pub succeeded: bool,
}

/// Build this frame's motion targets from the active step.
///
/// Contact pairs approach the nearest point of their resolved part,
/// pseudo-contacts walk the pelvis to the navigation target, not-contact
/// pairs repel past the threshold, not-care pairs leave the joint to rest
/// tracking. If two pairs drive the same joint, the later pair wins.
fn frame_targets(
    chain: &ChainOfContacts,
    step_index: usize,
    pose: &HumanoidPose,
    scene: &SceneInstance,
    reward_cfg: &RewardConfig,
) -> Result<BTreeMap<JointId, MotionTarget>, TaskError> {
    let mut targets = BTreeMap::new();
    for pair in &chain.steps[step_index].pairs {
        if pair.is_pseudo() {
            targets.insert(JointId::Pelvis, MotionTarget::Approach(resolve_nav_target(pair, scene)?));
            continue;
        }
        let joint = pair.joint.expect("full pair has a joint");
        let joint_pos = pose.joint(joint);
        let resolved = resolve_part(scene, pair, pose)?;
        let near = match &resolved {
            ResolvedPart::Cloud(cloud) => nearest_point(&joint_pos, cloud)?.0,
            ResolvedPart::Point(p) => *p,
        };
        match scored_contact(pair) {
            ContactType::Contact => {
                targets.insert(joint, MotionTarget::Approach(near));
            }
            ContactType::NotContact => {
                targets.insert(
                    joint,
                    MotionTarget::Avoid {
                        point: near,
                        min_dist: reward_cfg.dist_threshold + REPULSION_MARGIN,
                    },
                );
            }
            ContactType::NotCare => {}
        }
    }
    Ok(targets)
}

/// Run one plan entry to completion or budget exhaustion, recording every
/// frame. The humanoid starts in a rest pose at the world origin.
pub fn run_trial(
    entry: &PlanEntry,
    scene: &SceneInstance,
    reward_cfg: &RewardConfig,
    exec_cfg: &ExecutorConfig,
) -> Result<TrialLog, TaskError> {
    let start = exec_cfg.rest_pose(Vec3::new(0.0, 0.0, NAV_START_HEIGHT), 0.0);
    run_trial_from(entry, scene, reward_cfg, exec_cfg, &SequencerOptions::default(), start)
}

const NAV_START_HEIGHT: f64 = crate::task::NAV_PELVIS_HEIGHT;

/// [`run_trial`] with an explicit start pose and sequencer options.
pub fn run_trial_from(
    entry: &PlanEntry,
    scene: &SceneInstance,
    reward_cfg: &RewardConfig,
    exec_cfg: &ExecutorConfig,
    seq_opts: &SequencerOptions,
    start: HumanoidPose,
) -> Result<TrialLog, TaskError> {
    let chain = &entry.chain;
    let mut pose = start;
    let mut state = SequencerState::new();
    let mut frames = Vec::new();

    while !state.finished {
        let step_index = state.current_step;
        let targets = frame_targets(chain, step_index, &pose, scene, reward_cfg)?;
        pose = step_dynamics(&pose, &targets, exec_cfg);
        let reward = step_reward(&chain.steps[step_index], &pose, scene, reward_cfg)?;
        state.advance(chain, &pose, scene, exec_cfg.dt, reward_cfg, seq_opts)?;
        frames.push(Frame {
            time: state.elapsed_total,
            step_index,
            pose: pose.clone(),
            reward,
        });
    }

    let succeeded = state.succeeded(chain);
    Ok(TrialLog {
        plan_id: entry.entry_id.clone(),
        chain: chain.clone(),
        frames,
        per_step_outcome: state.per_step_outcome,
        succeeded,
    })
}

/// Re-score a recorded trial offline: recompute each frame's reward
/// breakdown from its logged pose. With the recording config this equals
/// the logged values; with another config it re-grades the same motion.
pub fn replay_score(
    log: &TrialLog,
    scene: &SceneInstance,
    reward_cfg: &RewardConfig,
) -> Result<Vec<RewardBreakdown>, TaskError> {
    log.frames
        .iter()
        .map(|f| step_reward(&log.chain.steps[f.step_index], &f.pose, scene, reward_cfg))
        .collect()
}

/// Serialize a trial as line-delimited JSON: a `meta` line, one `frame`
/// line per frame, and a closing `result` line.
pub fn write_ndjson(log: &TrialLog) -> String {
    #[derive(Serialize)]
    #[serde(tag = "t", rename_all = "snake_case")]
    enum Record<'a> {
        Meta { plan_id: &'a str, chain: &'a ChainOfContacts },
        Frame(&'a Frame),
        Result { succeeded: bool, per_step_outcome: &'a [StepOutcome] },
    }
    let mut out = String::new();
    let mut push = |r: &Record<'_>| {
        out.push_str(&serde_json::to_string(r).expect("trial record serializes"));
        out.push('\n');
    };
    push(&Record::Meta { plan_id: &log.plan_id, chain: &log.chain });
    for frame in &log.frames {
        push(&Record::Frame(frame));
    }
    push(&Record::Result { succeeded: log.succeeded, per_step_outcome: &log.per_step_outcome });
    out
}

/// Parse a trial back from its line-delimited JSON form.
pub fn read_ndjson(text: &str) -> Result<TrialLog, serde_json::Error> {
    #[derive(Deserialize)]
    #[serde(tag = "t", rename_all = "snake_case")]
    enum Record {
        Meta { plan_id: String, chain: ChainOfContacts },
        Frame(Frame),
        Result { succeeded: bool, per_step_outcome: Vec<StepOutcome> },
    }
    let mut plan_id = String::new();
    let mut chain: Option<ChainOfContacts> = None;
    let mut frames = Vec::new();
    let mut succeeded = false;
    let mut per_step_outcome = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        match serde_json::from_str::<Record>(line)? {
            Record::Meta { plan_id: id, chain: c } => {
                plan_id = id;
                chain = Some(c);
            }
            Record::Frame(f) => frames.push(f),
            Record::Result { succeeded: s, per_step_outcome: o } => {
                succeeded = s;
                per_step_outcome = o;
            }
        }
    }
    use serde::de::Error as _;
    let chain = chain.ok_or_else(|| serde_json::Error::custom("missing meta record"))?;
    Ok(TrialLog { plan_id, chain, frames, per_step_outcome, succeeded })
}
