//! Scene-plan documents and world-space scene assembly.
//!
//! A scene-plan document is a JSON map from entry id to an entry holding
//! an `"obj"` map (object specs with `id`, `name`, `rotate`, `scale`,
//! `transfer`) and a `"chain_of_contacts"` (steps of 5-token pairs).
//! Chains reference objects by name + key, e.g. `bed000`.
//!
//! Object geometry comes from part-cloud assets keyed by asset id (see
//! [`crate::assets`]); this module applies each object's transform —
//! rotate (a list of extrinsic-XYZ Euler triples, applied in order), then
//! scale, then translate — and assembles a [`SceneInstance`].

use crate::assets::AssetLibrary;
use crate::coc::{ChainOfContacts, ContactPair, ContactStep, PartRef, SceneVocab};
use crate::geom::{euler_xyz, yaw_of, Aabb, Vec3};
use crate::plan_text::normalize_token;
use crate::task::HumanoidPose;
use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("chain references object `{0}` with no matching entry in the obj map")]
    DanglingObjectRef(String),
    #[error("unknown object `{0}` in scene")]
    UnknownObject(String),
    #[error("unknown part `{part}` of object `{object}`")]
    UnknownPart { object: String, part: String },
    #[error("no part-cloud asset for id `{0}`")]
    UnknownAsset(String),
    #[error("part cloud `{0}` is empty")]
    EmptyCloud(String),
    #[error("invalid object spec `{key}`: {reason}")]
    InvalidSpec { key: String, reason: String },
}

/// Placement of one object: asset id plus its transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    /// Key within the entry's obj map (e.g. `"000"`); not serialized,
    /// filled from the map key on load.
    #[serde(skip)]
    pub key: String,
    /// Part-cloud asset id (e.g. `"12747"`).
    pub id: String,
    /// Object kind name (e.g. `"bed"`).
    pub name: String,
    /// Euler-angle triples in radians, applied in order; each triple is
    /// extrinsic X-then-Y-then-Z.
    pub rotate: Vec<[f64; 3]>,
    /// Uniform scale, > 0.
    pub scale: f64,
    /// Translation in meters, applied last.
    pub transfer: [f64; 3],
}

impl ObjectSpec {
    /// Chain-side reference: name + key, e.g. `bed000`.
    pub fn object_ref(&self) -> String {
        format!("{}{}", self.name, self.key)
    }

    /// Net rotation matrix of all Euler triples.
    pub fn rotation(&self) -> Matrix3<f64> {
        self.rotate
            .iter()
            .fold(Matrix3::identity(), |acc, t| euler_xyz(t[0], t[1], t[2]) * acc)
    }

    /// Net heading of the transform about the z axis; directions named in
    /// plans ("front" of a bed) are interpreted in this yawed frame.
    pub fn net_yaw(&self) -> f64 {
        yaw_of(&self.rotation())
    }

    fn validate(&self) -> Result<(), SceneError> {
        if !(self.scale > 0.0) {
            return Err(SceneError::InvalidSpec {
                key: self.key.clone(),
                reason: format!("scale must be > 0, got {}", self.scale),
            });
        }
        Ok(())
    }
}

/// One scene-plan entry: placed objects plus the chain acting on them.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanEntry {
    pub entry_id: String,
    pub objects: BTreeMap<String, ObjectSpec>,
    pub chain: ChainOfContacts,
}

impl PlanEntry {
    /// Look up the object spec a chain-side reference points at.
    pub fn object_by_ref(&self, object_ref: &str) -> Option<&ObjectSpec> {
        self.objects.values().find(|s| s.object_ref() == object_ref)
    }
}

#[derive(Serialize, Deserialize)]
struct RawEntry {
    obj: BTreeMap<String, ObjectSpec>,
    chain_of_contacts: Vec<Vec<[String; 5]>>,
}

/// Parse a scene-plan document. Entries come back sorted by id.
pub fn load_sceneplan(document: &str) -> Result<Vec<PlanEntry>, SceneError> {
    let raw: BTreeMap<String, RawEntry> =
        serde_json::from_str(document).map_err(|e| SceneError::Schema(e.to_string()))?;
    let mut entries = Vec::with_capacity(raw.len());
    for (entry_id, raw_entry) in raw {
        let mut objects = raw_entry.obj;
        for (key, spec) in objects.iter_mut() {
            spec.key = key.clone();
            spec.validate()?;
        }
        let mut steps = Vec::with_capacity(raw_entry.chain_of_contacts.len());
        for raw_step in &raw_entry.chain_of_contacts {
            let mut pairs = Vec::with_capacity(raw_step.len());
            for raw_pair in raw_step {
                let tokens: Vec<String> = raw_pair.iter().map(|t| normalize_token(t)).collect();
                let pair = ContactPair::from_tokens([
                    &tokens[0], &tokens[1], &tokens[2], &tokens[3], &tokens[4],
                ])
                .map_err(|e| SceneError::Schema(format!("entry {entry_id}: {e}")))?;
                pairs.push(pair);
            }
            steps.push(
                ContactStep::new("", pairs)
                    .map_err(|e| SceneError::Schema(format!("entry {entry_id}: {e}")))?,
            );
        }
        let chain = ChainOfContacts::new(steps)
            .map_err(|e| SceneError::Schema(format!("entry {entry_id}: {e}")))?;
        let entry = PlanEntry { entry_id, objects, chain };
        for object_ref in entry.chain.objects() {
            if entry.object_by_ref(object_ref).is_none() {
                return Err(SceneError::DanglingObjectRef(object_ref.to_string()));
            }
        }
        entries.push(entry);
    }
    Ok(entries)
}

/// Serialize entries back to document form: sorted keys, shortest
/// round-trip float formatting. Step descriptions are not part of the
/// document format and are dropped.
pub fn save_sceneplan(entries: &[PlanEntry]) -> String {
    let raw: BTreeMap<&str, RawEntry> = entries
        .iter()
        .map(|entry| {
            let chain_of_contacts = entry
                .chain
                .steps
                .iter()
                .map(|step| step.pairs.iter().map(ContactPair::to_tokens).collect())
                .collect();
            (
                entry.entry_id.as_str(),
                RawEntry { obj: entry.objects.clone(), chain_of_contacts },
            )
        })
        .collect();
    serde_json::to_string_pretty(&raw).expect("scene-plan document serializes")
}

/// Apply an object transform to raw asset points: rotate by each Euler
/// triple in order, scale, then translate.
pub fn apply_transform(points: &[Vec3], spec: &ObjectSpec) -> Vec<Vec3> {
    let rotation = spec.rotation();
    let transfer = Vec3::new(spec.transfer[0], spec.transfer[1], spec.transfer[2]);
    points
        .iter()
        .map(|p| rotation * p * spec.scale + transfer)
        .collect()
}

/// A named point cloud for one object part, in world coordinates once
/// assembled into a scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartCloud {
    pub part_name: String,
    pub points: Vec<Vec3>,
}

impl PartCloud {
    pub fn new(part_name: impl Into<String>, points: Vec<Vec3>) -> Result<Self, SceneError> {
        let part_name = part_name.into();
        if points.is_empty() {
            return Err(SceneError::EmptyCloud(part_name));
        }
        if points.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(SceneError::Schema(format!(
                "part cloud `{part_name}` contains non-finite coordinates"
            )));
        }
        Ok(PartCloud { part_name, points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// One placed object: its transformed part clouds, bounds, and heading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub parts: Vec<PartCloud>,
    pub bbox: Aabb,
    /// Net z-rotation of the object's transform.
    pub yaw: f64,
}

impl SceneObject {
    pub fn part(&self, name: &str) -> Option<&PartCloud> {
        self.parts.iter().find(|p| p.part_name == name)
    }
}

/// World-space realization of a plan entry's objects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneInstance {
    pub objects: BTreeMap<String, SceneObject>,
    pub ground_height: f64,
}

impl SceneInstance {
    /// Assemble world geometry for an entry from a part-cloud library.
    pub fn from_entry(entry: &PlanEntry, assets: &AssetLibrary) -> Result<Self, SceneError> {
        let mut objects = BTreeMap::new();
        for spec in entry.objects.values() {
            let raw_parts = assets
                .part_clouds(&spec.id)
                .ok_or_else(|| SceneError::UnknownAsset(spec.id.clone()))?;
            let mut parts = Vec::with_capacity(raw_parts.len());
            let mut bbox: Option<Aabb> = None;
            for (part_name, raw_points) in raw_parts {
                let points = apply_transform(raw_points, spec);
                if let Some(part_box) = Aabb::from_points(&points) {
                    match &mut bbox {
                        Some(b) => b.merge(&part_box),
                        None => bbox = Some(part_box),
                    }
                }
                parts.push(PartCloud::new(part_name.clone(), points)?);
            }
            let bbox = bbox.ok_or_else(|| SceneError::UnknownAsset(spec.id.clone()))?;
            objects.insert(spec.object_ref(), SceneObject { parts, bbox, yaw: spec.net_yaw() });
        }
        Ok(SceneInstance { objects, ground_height: 0.0 })
    }

    pub fn object(&self, object_ref: &str) -> Result<&SceneObject, SceneError> {
        self.objects
            .get(object_ref)
            .ok_or_else(|| SceneError::UnknownObject(object_ref.to_string()))
    }

    /// Every point in the scene (all parts of all objects).
    pub fn all_points(&self) -> impl Iterator<Item = &Vec3> {
        self.objects
            .values()
            .flat_map(|o| o.parts.iter())
            .flat_map(|p| p.points.iter())
    }

    /// Vocabulary of `(object_ref, part_name)` present in this scene.
    pub fn vocab(&self) -> SceneVocab {
        let mut vocab = SceneVocab::new();
        for (object_ref, object) in &self.objects {
            for part in &object.parts {
                vocab.insert(object_ref.clone(), part.part_name.clone());
            }
        }
        vocab
    }
}

/// What a contact pair's part slot resolves to in a concrete scene.
#[derive(Debug, Clone, PartialEq)]
pub enum ResolvedPart<'a> {
    /// A real part: the whole cloud is the candidate target set.
    Cloud(&'a PartCloud),
    /// A single target point (joint target or navigation target).
    Point(Vec3),
}

/// Resolve a pair's target point set: object parts map to their cloud,
/// joint targets to the named joint's current position, and pseudo
/// contacts to the navigation target point.
pub fn resolve_part<'a>(
    scene: &'a SceneInstance,
    pair: &ContactPair,
    pose: &HumanoidPose,
) -> Result<ResolvedPart<'a>, SceneError> {
    match &pair.part {
        PartRef::ObjectPart(part_name) => {
            let object = scene.object(&pair.object)?;
            let cloud = object.part(part_name).ok_or_else(|| SceneError::UnknownPart {
                object: pair.object.clone(),
                part: part_name.clone(),
            })?;
            Ok(ResolvedPart::Cloud(cloud))
        }
        PartRef::JointTarget(joint) => Ok(ResolvedPart::Point(pose.joint(*joint))),
        PartRef::NavTarget => {
            // pseudo-contact construction guarantees a real direction
            let object = scene.object(&pair.object)?;
            Ok(ResolvedPart::Point(crate::task::nav_target_for(
                object,
                pair.direction,
                scene.ground_height,
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coc::JointId;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn identity_spec() -> ObjectSpec {
        ObjectSpec {
            key: "000".into(),
            id: "x".into(),
            name: "box".into(),
            rotate: vec![],
            scale: 1.0,
            transfer: [0.0, 0.0, 0.0],
        }
    }

    #[test]
    fn identity_transform_keeps_points() {
        let points = vec![Vec3::new(1.0, 2.0, 3.0), Vec3::new(-0.5, 0.0, 0.25)];
        assert_eq!(apply_transform(&points, &identity_spec()), points);
    }

    #[test]
    fn scale_doubles_pairwise_distances() {
        let points = vec![Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 2.0, 1.0), Vec3::new(3.0, 1.0, -1.0)];
        let spec = ObjectSpec { scale: 2.0, ..identity_spec() };
        let out = apply_transform(&points, &spec);
        for i in 0..points.len() {
            for j in 0..points.len() {
                let before = (points[i] - points[j]).norm();
                let after = (out[i] - out[j]).norm();
                assert!((after - 2.0 * before).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn quarter_turn_about_z() {
        let spec = ObjectSpec { rotate: vec![[0.0, 0.0, FRAC_PI_2]], ..identity_spec() };
        let out = apply_transform(&[Vec3::new(1.0, 0.0, 0.0)], &spec);
        assert!((out[0] - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn net_yaw_of_stacked_triples() {
        let spec = ObjectSpec {
            rotate: vec![[FRAC_PI_2, 0.0, 0.0], [0.0, 0.0, -FRAC_PI_2]],
            ..identity_spec()
        };
        assert!((spec.net_yaw() + FRAC_PI_2).abs() < 1e-12);
    }

    fn simple_doc() -> &'static str {
        r#"{
            "0000": {
                "obj": {
                    "000": {
                        "id": "12747",
                        "name": "bed",
                        "rotate": [[1.5707963267948966, 0, 0], [0, 0, -1.5707963267948966]],
                        "scale": 2.5,
                        "transfer": [0, -2, 0]
                    }
                },
                "chain_of_contacts": [
                    [["bed000", "none", "none", "none", "front"]],
                    [["bed000", "mattress25", "pelvis", "contact", "up"],
                     ["bed000", "mattress25", "head", "not contact", "up"]],
                    [["bed000", "mattress25", "pelvis", "contact", "up"],
                     ["bed000", "mattress25", "left_foot", "contact", "up"],
                     ["bed000", "mattress25", "right_foot", "contact", "up"],
                     ["bed000", "mattress25", "head", "contact", "up"]]
                ]
            }
        }"#
    }

    #[test]
    fn loads_simple_document() {
        let entries = load_sceneplan(simple_doc()).unwrap();
        assert_eq!(entries.len(), 1);
        let entry = &entries[0];
        assert_eq!(entry.entry_id, "0000");
        let bed = &entry.objects["000"];
        assert_eq!(bed.name, "bed");
        assert_eq!(bed.scale, 2.5);
        assert_eq!(bed.transfer, [0.0, -2.0, 0.0]);
        assert_eq!(entry.chain.len(), 3);
        assert!(entry.chain.steps[0].is_pseudo());
        assert_eq!(entry.chain.steps[1].pairs[1].joint, Some(JointId::Head));
        assert_eq!(entry.object_by_ref("bed000").unwrap().id, "12747");
    }

    #[test]
    fn dangling_object_ref_is_rejected() {
        let doc = r#"{
            "0000": {
                "obj": {"000": {"id": "1", "name": "bed", "rotate": [], "scale": 1.0, "transfer": [0,0,0]}},
                "chain_of_contacts": [[["sofa000", "none", "none", "none", "front"]]]
            }
        }"#;
        match load_sceneplan(doc) {
            Err(SceneError::DanglingObjectRef(r)) => assert_eq!(r, "sofa000"),
            other => panic!("expected DanglingObjectRef, got {other:?}"),
        }
    }

    #[test]
    fn wrong_pair_arity_is_schema_error() {
        let doc = r#"{
            "0000": {
                "obj": {"000": {"id": "1", "name": "bed", "rotate": [], "scale": 1.0, "transfer": [0,0,0]}},
                "chain_of_contacts": [[["bed000", "none", "none", "front"]]]
            }
        }"#;
        assert!(matches!(load_sceneplan(doc), Err(SceneError::Schema(_))));
    }

    #[test]
    fn nonpositive_scale_is_rejected() {
        let doc = r#"{
            "0000": {
                "obj": {"000": {"id": "1", "name": "bed", "rotate": [], "scale": 0.0, "transfer": [0,0,0]}},
                "chain_of_contacts": [[["bed000", "none", "none", "none", "front"]]]
            }
        }"#;
        assert!(matches!(load_sceneplan(doc), Err(SceneError::InvalidSpec { .. })));
    }

    #[test]
    fn save_load_round_trip() {
        let entries = load_sceneplan(simple_doc()).unwrap();
        let saved = save_sceneplan(&entries);
        let reloaded = load_sceneplan(&saved).unwrap();
        assert_eq!(entries, reloaded);
        // canonical form is a fixpoint
        assert_eq!(save_sceneplan(&reloaded), saved);
    }

    #[test]
    fn empty_save_is_empty_document() {
        assert_eq!(save_sceneplan(&[]), "{}");
    }

    #[test]
    fn object_keys_serialize_in_ascending_order() {
        let doc = r#"{
            "0000": {
                "obj": {
                    "001": {"id": "2", "name": "table", "rotate": [], "scale": 1.0, "transfer": [0,0,0]},
                    "000": {"id": "1", "name": "chair", "rotate": [], "scale": 1.0, "transfer": [0,0,0]}
                },
                "chain_of_contacts": [[["chair000", "none", "none", "none", "front"]]]
            }
        }"#;
        let saved = save_sceneplan(&load_sceneplan(doc).unwrap());
        let chair_at = saved.find("\"chair\"").unwrap();
        let table_at = saved.find("\"table\"").unwrap();
        assert!(chair_at < table_at);
    }

    proptest! {
        #[test]
        fn transform_preserves_count_and_scales_distances(
            pts in proptest::collection::vec((-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64), 2..40),
            scale in 0.1..4.0f64,
            rot in proptest::collection::vec(
                (-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64), 0..3),
            t in (-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64),
        ) {
            let points: Vec<Vec3> = pts.iter().map(|&(x, y, z)| Vec3::new(x, y, z)).collect();
            let spec = ObjectSpec {
                rotate: rot.iter().map(|&(a, b, c)| [a, b, c]).collect(),
                scale,
                transfer: [t.0, t.1, t.2],
                ..identity_spec()
            };
            let out = apply_transform(&points, &spec);
            prop_assert_eq!(out.len(), points.len());
            prop_assert!(out.iter().all(|p| p.iter().all(|c| c.is_finite())));
            for i in 1..points.len() {
                let before = (points[i] - points[0]).norm();
                let after = (out[i] - out[0]).norm();
                prop_assert!((after - scale * before).abs() < 1e-9,
                    "distance {} scaled to {}, expected {}", before, after, scale * before);
            }
        }
    }
}
