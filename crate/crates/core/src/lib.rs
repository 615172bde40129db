//! Contact-driven human-scene interaction toolkit.
//!
//! Interactions are modeled as *chains of contacts*: ordered steps, each a
//! set of `{object, part, joint, contact type, direction}` pairs between a
//! 15-joint humanoid and point-cloud object parts. The crate covers the
//! full desk-scale pipeline around that representation:
//!
//! - [`coc`] — the contact-pair data model and vocabulary validation
//! - [`plan_text`] — the `Step N:` / `Pair k: {...}` plan-text grammar
//! - [`sceneplan`] — scene-plan documents, object transforms, part clouds
//! - [`task`] — task observations, contact rewards, adaptive weights,
//!   step completion, and the step sequencer
//! - [`heightmap`] — ego-centric height sampling around the humanoid root
//! - [`executor`] — a deterministic kinematic stand-in that drives joints
//!   toward step targets so plans can be executed end to end
//! - [`metrics`] — success rate, contact error, success steps, reports
//! - [`planner`] — prompt construction and the chat-completion client
//!   (online or transcript replay)

pub mod assets;
pub mod coc;
pub mod executor;
pub mod geom;
pub mod heightmap;
pub mod metrics;
pub mod plan_text;
pub mod planner;
pub mod sceneplan;
pub mod task;

pub use coc::{ChainOfContacts, ContactPair, ContactStep, ContactType, Direction, JointId, PartRef};
pub use geom::Vec3;
