//! Chain-of-contacts data model.
//!
//! An interaction is an ordered list of steps; each step is a set of
//! contact pairs `{object, part, joint, contact type, direction}`. A
//! "walk to" step carries no real contact and is encoded as the pseudo
//! shape `{object, none, none, none, direction}`.
//!
//! Conventions fixed here and used everywhere else in the crate:
//! - the world frame is z-up and `front` is the -y axis,
//! - contact types encode to integers 0 (`not contact`), 1 (`contact`),
//!   2 (`not care`),
//! - joint and part names are lowercase with underscores; parsers accept
//!   spaced forms ("left hand") and normalize them.

use crate::geom::Vec3;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

/// Errors from constructing or binding chain-of-contacts values.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum CocError {
    #[error("unknown joint name `{0}`")]
    UnknownJoint(String),
    #[error("unknown contact type `{0}`")]
    UnknownContactType(String),
    #[error("unknown direction `{0}`")]
    UnknownDirection(String),
    #[error("malformed contact pair: {0}")]
    MalformedPair(String),
    #[error("contact step must contain at least one pair")]
    EmptyStep,
    #[error("a pseudo-contact must be the only pair in its step")]
    MixedPseudoStep,
    #[error("chain must contain at least one step")]
    EmptyChain,
}

/// The 15 controlled humanoid joints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointId {
    Pelvis,
    LeftHip,
    LeftKnee,
    LeftFoot,
    RightHip,
    RightKnee,
    RightFoot,
    Torso,
    Head,
    LeftShoulder,
    LeftElbow,
    LeftHand,
    RightShoulder,
    RightElbow,
    RightHand,
}

impl JointId {
    /// All joints, in canonical order.
    pub const ALL: [JointId; 15] = [
        JointId::Pelvis,
        JointId::LeftHip,
        JointId::LeftKnee,
        JointId::LeftFoot,
        JointId::RightHip,
        JointId::RightKnee,
        JointId::RightFoot,
        JointId::Torso,
        JointId::Head,
        JointId::LeftShoulder,
        JointId::LeftElbow,
        JointId::LeftHand,
        JointId::RightShoulder,
        JointId::RightElbow,
        JointId::RightHand,
    ];

    /// Canonical underscored name.
    pub fn name(self) -> &'static str {
        match self {
            JointId::Pelvis => "pelvis",
            JointId::LeftHip => "left_hip",
            JointId::LeftKnee => "left_knee",
            JointId::LeftFoot => "left_foot",
            JointId::RightHip => "right_hip",
            JointId::RightKnee => "right_knee",
            JointId::RightFoot => "right_foot",
            JointId::Torso => "torso",
            JointId::Head => "head",
            JointId::LeftShoulder => "left_shoulder",
            JointId::LeftElbow => "left_elbow",
            JointId::LeftHand => "left_hand",
            JointId::RightShoulder => "right_shoulder",
            JointId::RightElbow => "right_elbow",
            JointId::RightHand => "right_hand",
        }
    }

    /// Spaced form used in prompts ("left hand").
    pub fn prompt_name(self) -> String {
        self.name().replace('_', " ")
    }

    /// Dense index into per-joint arrays; inverse of `ALL[i]`.
    pub fn index(self) -> usize {
        Self::ALL.iter().position(|j| *j == self).expect("joint in ALL")
    }

    /// Parse a canonical (underscored, lowercase) joint name.
    pub fn parse(name: &str) -> Result<Self, CocError> {
        Self::ALL
            .into_iter()
            .find(|j| j.name() == name)
            .ok_or_else(|| CocError::UnknownJoint(name.to_string()))
    }
}

impl fmt::Display for JointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Whether a joint should touch, avoid, or ignore its part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ContactType {
    #[serde(rename = "contact")]
    Contact,
    #[serde(rename = "not contact")]
    NotContact,
    #[serde(rename = "not care")]
    NotCare,
}

impl ContactType {
    /// Stable integer code used in observations and serialized logs.
    pub fn code(self) -> u8 {
        match self {
            ContactType::NotContact => 0,
            ContactType::Contact => 1,
            ContactType::NotCare => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(ContactType::NotContact),
            1 => Some(ContactType::Contact),
            2 => Some(ContactType::NotCare),
            _ => None,
        }
    }

    /// Parse a canonical token ("contact", "not_contact", "not_care").
    pub fn parse(token: &str) -> Result<Self, CocError> {
        match token {
            "contact" => Ok(ContactType::Contact),
            "not_contact" => Ok(ContactType::NotContact),
            "not_care" => Ok(ContactType::NotCare),
            other => Err(CocError::UnknownContactType(other.to_string())),
        }
    }

    /// Spaced display form used in plan text and documents.
    pub fn name(self) -> &'static str {
        match self {
            ContactType::Contact => "contact",
            ContactType::NotContact => "not contact",
            ContactType::NotCare => "not care",
        }
    }
}

impl fmt::Display for ContactType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Relative direction from joint to part, in the object's yawed frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
    Front,
    Back,
    Left,
    Right,
    None,
}

impl Direction {
    pub fn parse(token: &str) -> Result<Self, CocError> {
        match token {
            "up" => Ok(Direction::Up),
            "down" => Ok(Direction::Down),
            "front" => Ok(Direction::Front),
            "back" => Ok(Direction::Back),
            "left" => Ok(Direction::Left),
            "right" => Ok(Direction::Right),
            "none" => Ok(Direction::None),
            other => Err(CocError::UnknownDirection(other.to_string())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Direction::Up => "up",
            Direction::Down => "down",
            Direction::Front => "front",
            Direction::Back => "back",
            Direction::Left => "left",
            Direction::Right => "right",
            Direction::None => "none",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Unit vector for a direction in the reference frame of the caller.
/// Axes: z-up, front = -y, right = +x. `None` maps to the zero vector,
/// which downstream scoring treats as "no direction preference".
pub fn direction_unit(d: Direction) -> Vec3 {
    match d {
        Direction::Up => Vec3::new(0.0, 0.0, 1.0),
        Direction::Down => Vec3::new(0.0, 0.0, -1.0),
        Direction::Front => Vec3::new(0.0, -1.0, 0.0),
        Direction::Back => Vec3::new(0.0, 1.0, 0.0),
        Direction::Left => Vec3::new(-1.0, 0.0, 0.0),
        Direction::Right => Vec3::new(1.0, 0.0, 0.0),
        Direction::None => Vec3::zeros(),
    }
}

/// Numeric encoding of a pair's contact type and direction.
pub fn encode_pair(c: ContactType, d: Direction) -> (u8, Vec3) {
    (c.code(), direction_unit(d))
}

/// What a pair's "part" slot refers to.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PartRef {
    /// A named part of the pair's object; resolves to its point cloud.
    ObjectPart(String),
    /// A humanoid joint standing in for the part; resolves to that
    /// joint's current position.
    JointTarget(JointId),
    /// No geometry: the pair is a pseudo-contact navigation step.
    NavTarget,
}

impl PartRef {
    pub fn display_token(&self) -> String {
        match self {
            PartRef::ObjectPart(name) => name.clone(),
            PartRef::JointTarget(j) => j.name().to_string(),
            PartRef::NavTarget => "none".to_string(),
        }
    }
}

/// One joint-part contact pair: the 5-tuple `{o, p, j, c, d}`.
///
/// Two shapes are legal:
/// - a full pair with part, joint, and contact type all present,
/// - a pseudo-contact `{object, none, none, none, direction}` with a
///   non-`none` direction, meaning "walk to the object from `direction`".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactPair {
    /// Object reference, e.g. `bed000` (object name + plan key).
    pub object: String,
    pub part: PartRef,
    pub joint: Option<JointId>,
    pub contact: Option<ContactType>,
    pub direction: Direction,
}

impl ContactPair {
    /// Full 5-tuple pair.
    pub fn full(
        object: impl Into<String>,
        part: PartRef,
        joint: JointId,
        contact: ContactType,
        direction: Direction,
    ) -> Result<Self, CocError> {
        if matches!(part, PartRef::NavTarget) {
            return Err(CocError::MalformedPair(
                "full pair cannot use a `none` part".into(),
            ));
        }
        Ok(ContactPair {
            object: object.into(),
            part,
            joint: Some(joint),
            contact: Some(contact),
            direction,
        })
    }

    /// Pseudo-contact ("walk to") pair. Direction must not be `none`.
    pub fn pseudo(object: impl Into<String>, direction: Direction) -> Result<Self, CocError> {
        if direction == Direction::None {
            return Err(CocError::MalformedPair(
                "pseudo-contact requires a direction".into(),
            ));
        }
        Ok(ContactPair {
            object: object.into(),
            part: PartRef::NavTarget,
            joint: None,
            contact: None,
            direction,
        })
    }

    /// Build a pair from five canonical tokens (already normalized:
    /// lowercase, underscored). A part token naming a humanoid joint
    /// becomes a joint target.
    pub fn from_tokens(tokens: [&str; 5]) -> Result<Self, CocError> {
        let [object, part, joint, contact, direction] = tokens;
        if object.is_empty() || object == "none" {
            return Err(CocError::MalformedPair("missing object".into()));
        }
        let direction = Direction::parse(direction)?;
        let part_is_none = part == "none";
        let joint_is_none = joint == "none";
        let contact_is_none = contact == "none";
        if part_is_none && joint_is_none && contact_is_none {
            return Self::pseudo(object, direction);
        }
        if part_is_none || joint_is_none || contact_is_none {
            return Err(CocError::MalformedPair(format!(
                "pair {{{object}, {part}, {joint}, {contact}, {}}} is neither a full pair nor a pseudo-contact",
                direction.name()
            )));
        }
        let part_ref = match JointId::parse(part) {
            Ok(j) => PartRef::JointTarget(j),
            Err(_) => PartRef::ObjectPart(part.to_string()),
        };
        Ok(ContactPair {
            object: object.to_string(),
            part: part_ref,
            joint: Some(JointId::parse(joint)?),
            contact: Some(ContactType::parse(contact)?),
            direction,
        })
    }

    /// Canonical five-token form (inverse of `from_tokens`).
    pub fn to_tokens(&self) -> [String; 5] {
        [
            self.object.clone(),
            self.part.display_token(),
            self.joint.map_or_else(|| "none".into(), |j| j.name().to_string()),
            self.contact.map_or_else(|| "none".into(), |c| c.name().to_string()),
            self.direction.name().to_string(),
        ]
    }

    pub fn is_pseudo(&self) -> bool {
        matches!(self.part, PartRef::NavTarget)
    }
}

/// One interaction step: a described set of pairs that must hold together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactStep {
    /// Free-text description kept for logs; carries no semantics.
    pub description: String,
    pub pairs: Vec<ContactPair>,
}

impl ContactStep {
    pub fn new(description: impl Into<String>, pairs: Vec<ContactPair>) -> Result<Self, CocError> {
        if pairs.is_empty() {
            return Err(CocError::EmptyStep);
        }
        let pseudo_count = pairs.iter().filter(|p| p.is_pseudo()).count();
        if pseudo_count > 1 || (pseudo_count == 1 && pairs.len() > 1) {
            return Err(CocError::MixedPseudoStep);
        }
        Ok(ContactStep { description: description.into(), pairs })
    }

    pub fn is_pseudo(&self) -> bool {
        self.pairs.len() == 1 && self.pairs[0].is_pseudo()
    }
}

/// An ordered, nonempty sequence of contact steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainOfContacts {
    pub steps: Vec<ContactStep>,
}

impl ChainOfContacts {
    pub fn new(steps: Vec<ContactStep>) -> Result<Self, CocError> {
        if steps.is_empty() {
            return Err(CocError::EmptyChain);
        }
        Ok(ChainOfContacts { steps })
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Distinct object references named anywhere in the chain.
    pub fn objects(&self) -> BTreeSet<&str> {
        self.steps
            .iter()
            .flat_map(|s| s.pairs.iter())
            .map(|p| p.object.as_str())
            .collect()
    }
}

/// Scene vocabulary: which `(object, part)` names exist, and which parts
/// accept interaction. Parts default to interactable.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneVocab {
    objects: BTreeMap<String, BTreeMap<String, bool>>,
}

impl SceneVocab {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<I, S>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, S)>,
        S: Into<String>,
    {
        let mut vocab = Self::new();
        for (object, part) in pairs {
            vocab.insert(object, part);
        }
        vocab
    }

    pub fn insert(&mut self, object: impl Into<String>, part: impl Into<String>) {
        self.objects
            .entry(object.into())
            .or_default()
            .insert(part.into(), true);
    }

    /// Keep the part listed but flag it as not accepting interaction
    /// (e.g. a laptop screen that plans should not touch).
    pub fn mark_non_interactable(&mut self, object: &str, part: &str) {
        if let Some(parts) = self.objects.get_mut(object) {
            if let Some(flag) = parts.get_mut(part) {
                *flag = false;
            }
        }
    }

    pub fn contains_object(&self, object: &str) -> bool {
        self.objects.contains_key(object)
    }

    pub fn contains(&self, object: &str, part: &str) -> bool {
        self.objects
            .get(object)
            .is_some_and(|parts| parts.contains_key(part))
    }

    pub fn is_interactable(&self, object: &str, part: &str) -> bool {
        self.objects
            .get(object)
            .and_then(|parts| parts.get(part))
            .copied()
            .unwrap_or(false)
    }

    pub fn objects(&self) -> impl Iterator<Item = (&str, impl Iterator<Item = &str>)> {
        self.objects
            .iter()
            .map(|(o, parts)| (o.as_str(), parts.keys().map(String::as_str)))
    }
}

/// Severity of a validation finding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

/// Kind of validation finding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    UnknownObject,
    UnknownPart,
    NonInteractablePart,
}

/// One validation finding, located by step and pair index (0-based, in
/// input order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub step: usize,
    pub pair: usize,
    pub kind: ViolationKind,
    pub severity: Severity,
    pub message: String,
}

/// Outcome of validating a chain against a scene vocabulary.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has_errors(&self) -> bool {
        self.violations.iter().any(|v| v.severity == Severity::Error)
    }
}

/// Check every pair's object/part against the scene vocabulary.
///
/// Joint-target and pseudo-contact pairs are exempt from vocabulary
/// lookup. In strict mode unknown names are errors; in lenient mode they
/// are warnings. Non-interactable parts are always warnings (advisory).
/// Violations preserve input order.
pub fn validate_chain(chain: &ChainOfContacts, vocab: &SceneVocab, strict: bool) -> ValidationReport {
    let unknown_severity = if strict { Severity::Error } else { Severity::Warning };
    let mut report = ValidationReport::default();
    for (si, step) in chain.steps.iter().enumerate() {
        for (pi, pair) in step.pairs.iter().enumerate() {
            let part_name = match &pair.part {
                PartRef::ObjectPart(name) => name,
                PartRef::JointTarget(_) | PartRef::NavTarget => continue,
            };
            if !vocab.contains_object(&pair.object) {
                report.violations.push(Violation {
                    step: si,
                    pair: pi,
                    kind: ViolationKind::UnknownObject,
                    severity: unknown_severity,
                    message: format!("unknown object `{}`", pair.object),
                });
            } else if !vocab.contains(&pair.object, part_name) {
                report.violations.push(Violation {
                    step: si,
                    pair: pi,
                    kind: ViolationKind::UnknownPart,
                    severity: unknown_severity,
                    message: format!("unknown part `{}` of object `{}`", part_name, pair.object),
                });
            } else if !vocab.is_interactable(&pair.object, part_name) {
                report.violations.push(Violation {
                    step: si,
                    pair: pi,
                    kind: ViolationKind::NonInteractablePart,
                    severity: Severity::Warning,
                    message: format!(
                        "part `{}` of object `{}` is not interactable",
                        part_name, pair.object
                    ),
                });
            }
        }
    }
    report
}
