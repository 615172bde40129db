//! Plan generation: prompt construction for a chat-completion service,
//! the request client (online with retry/backoff, or offline transcript
//! replay), and response parsing into a validated chain.

use crate::coc::{validate_chain, ChainOfContacts, SceneVocab, ValidationReport};
use crate::plan_text::{parse_plan, ParseDiagnostic, PlanTextError};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlannerError {
    #[error("auth token unavailable: {0}")]
    AuthMissing(String),
    #[error("request timed out")]
    Timeout,
    #[error("service returned status {0}")]
    ServiceError(u16),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("malformed completion response: {0}")]
    BadResponse(String),
    #[error("no transcript entry for prompt hash {0}")]
    TranscriptMiss(String),
    #[error("transcript file {path}: {reason}")]
    Transcript { path: String, reason: String },
    #[error("online mode unavailable: enable the `online` feature or inject a transport")]
    NoTransport,
    #[error(transparent)]
    Parse(#[from] PlanTextError),
}

/// One worked example embedded in the prompt: instruction, background
/// lines, and the plan text the model should imitate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptExample {
    pub instruction: String,
    pub background: Vec<String>,
    pub plan: String,
}

/// Everything needed to build a planning prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub instruction: String,
    /// `(object name, part names)` in presentation order.
    pub objects: Vec<(String, Vec<String>)>,
    pub layout_sentences: Vec<String>,
    pub n_plans: usize,
    pub rules: Vec<String>,
    pub examples: Vec<PromptExample>,
}

impl PromptSpec {
    pub fn new(instruction: impl Into<String>, objects: Vec<(String, Vec<String>)>) -> Self {
        PromptSpec {
            instruction: instruction.into(),
            objects,
            layout_sentences: Vec::new(),
            n_plans: 1,
            rules: default_rules(),
            examples: vec![default_example()],
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.n_plans < 1 {
            return Err("n_plans must be >= 1".into());
        }
        if self.objects.is_empty() {
            return Err("prompt needs at least one object".into());
        }
        Ok(())
    }

    /// Vocabulary declared by this prompt, keyed by plain object name
    /// (plan text refers to objects without placement keys).
    pub fn vocab(&self) -> SceneVocab {
        let mut vocab = SceneVocab::new();
        for (object, parts) in &self.objects {
            for part in parts {
                vocab.insert(object.clone(), part.clone());
            }
        }
        vocab
    }
}

/// The standing plan-format rules included in every prompt by default.
pub fn default_rules() -> Vec<String> {
    vec![
        "Each task plan should be composite into detailed steps. If the human is not close to \
         the target object, the first step should be to get close to the object."
            .into(),
        "Each step should contain meaningful joint-part pairs.".into(),
        "Each joint-part pair should be formatted into {OBJECT, PART, JOINT, Contact type, \
         Contact Direcion}. Or if the step is getting close to an object, the step should be \
         formatted into {none, none, none, none, relative direction of the target object}. \
         JOINT should replace JOINT in the format in the background information. Important: \
         PART in the format should only be replaced by PART or JOINT in the background \
         information. The choices of Contact type include [contact, not contact]. The choices \
         of Contact Direction include [front, back, left, right, up, down, none]."
            .into(),
        "Be plausible. Do not generate uncommon interactions.".into(),
        "Only interact with still objects. Do not move objects.".into(),
    ]
}

/// The standing worked example: a six-step chair interaction.
pub fn default_example() -> PromptExample {
    PromptExample {
        instruction: "Generate a 6-step interaction with the object.".into(),
        background: vec![
            "The room has a [OBJECT: chair].".into(),
            "The [OBJECT: chair] has PARTS: [back_soft_surface, armrest_hard_surface, \
             armrest_hard_surface, seat_surface]."
                .into(),
            format!("The human has JOINTS: [{}].", joint_prompt_list()),
            "The human is several meters away from the [OBJECT: chair].".into(),
        ],
        plan: "Step 1: Get close to the chair.\n\
               Pair 1: {chair, none, none, none, front}\n\
               Step 2: Sit on the chair.\n\
               Pair 1: {chair, seat_surface, pelvis, contact, up}\n\
               Step 3: Rest the right hand on the right arm of the chair.\n\
               Pair 1: {chair, seat_surfac, pelvis, contact, up}\n\
               Pair 2: {chair, armrest_hard_surface, right hand, contact, up}\n\
               Step 4: Place the right foot on the left knee.\n\
               Pair 1: {chair, seat_surface, pelvis, contact, up}\n\
               Pair 2: {chair, left knee, right foot, contact, up}\n\
               Step 5: Stand up.\n\
               Pair 1: {chair, none, none, none, front}\n\
               Step 6: Sit on the chair.\n\
               Pair 1: {chair, seat_surface, pelvis, contact, up}"
            .into(),
    }
}

fn joint_prompt_list() -> String {
    crate::coc::JointId::ALL
        .iter()
        .map(|j| j.prompt_name())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Render the full prompt. Output is byte-stable for a fixed spec:
/// instruction, a bracketed background block (objects, layout, parts,
/// joints), the generation directive, the rules block, then each example
/// block.
pub fn build_prompt(spec: &PromptSpec) -> String {
    debug_assert!(spec.validate().is_ok());
    let mut out = String::new();
    let _ = writeln!(out, "Instruction: {}", spec.instruction);
    let _ = writeln!(out, "Background Information:");
    let _ = writeln!(out, "[start of background Information]");
    let names: Vec<&str> = spec.objects.iter().map(|(n, _)| n.as_str()).collect();
    let _ = writeln!(out, "The room has OBJECTS: [{}].", names.join(", "));
    if !spec.layout_sentences.is_empty() {
        let _ = writeln!(out, "{}", spec.layout_sentences.join(" "));
    }
    let parts_sentences: Vec<String> = spec
        .objects
        .iter()
        .map(|(name, parts)| format!("The [OBJECT: {name}] has PARTS: [{}].", parts.join(", ")))
        .collect();
    let _ = writeln!(out, "{}", parts_sentences.join(" "));
    let _ = writeln!(out, "The human has JOINTS: [{}].", joint_prompt_list());
    let _ = writeln!(out, "[end of background Information]");
    let plural = if spec.n_plans == 1 { "task plan" } else { "task plans" };
    let _ = writeln!(
        out,
        "Given the instruction and background information, generate {} {} according to the \
         following rules and examples.",
        spec.n_plans, plural
    );
    let _ = writeln!(out, "[start of rules]");
    for (i, rule) in spec.rules.iter().enumerate() {
        let _ = writeln!(out, "{}. {}", i + 1, rule);
    }
    let _ = writeln!(out, "[end of rules]");
    for example in &spec.examples {
        let _ = writeln!(out, "[start of an example]");
        let _ = writeln!(out, "Instruction: {}", example.instruction);
        let _ = writeln!(out, "[start of background Information]");
        for line in &example.background {
            let _ = writeln!(out, "{line}");
        }
        let _ = writeln!(out, "[end of background Information]");
        let _ = writeln!(out, "{}", example.plan);
        let _ = writeln!(out, "[end of an example]");
    }
    out
}

/// Client configuration for the chat-completion service.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerClientConfig {
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    pub token_env: String,
    pub timeout_secs: u64,
    pub max_retries: u32,
    /// First retry delay; doubles per retry.
    pub initial_backoff_ms: u64,
    /// When set, requests replay from this transcript instead of the
    /// network.
    pub offline_transcript: Option<PathBuf>,
}

impl Default for PlannerClientConfig {
    fn default() -> Self {
        PlannerClientConfig {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4".into(),
            token_env: "HSI_PLANNER_TOKEN".into(),
            timeout_secs: 60,
            max_retries: 3,
            initial_backoff_ms: 500,
            offline_transcript: None,
        }
    }
}

/// Raw HTTP reply as seen by the retry loop.
#[derive(Debug, Clone)]
pub struct HttpReply {
    pub status: u16,
    pub body: String,
}

/// Injectable POST transport so tests can stub the service.
pub trait Transport {
    fn post_json(
        &self,
        url: &str,
        bearer: &str,
        body: &serde_json::Value,
        timeout: Duration,
    ) -> Result<HttpReply, PlannerError>;
}

/// reqwest-backed transport.
#[cfg(feature = "online")]
pub struct HttpTransport;

#[cfg(feature = "online")]
impl Transport for HttpTransport {
    fn post_json(
        &self,
        url: &str,
        bearer: &str,
        body: &serde_json::Value,
        timeout: Duration,
    ) -> Result<HttpReply, PlannerError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| PlannerError::Transport(e.to_string()))?;
        let response = client
            .post(url)
            .bearer_auth(bearer)
            .json(body)
            .send()
            .map_err(|e| {
                if e.is_timeout() {
                    PlannerError::Timeout
                } else {
                    PlannerError::Transport(e.to_string())
                }
            })?;
        let status = response.status().as_u16();
        let body = response.text().map_err(|e| PlannerError::Transport(e.to_string()))?;
        Ok(HttpReply { status, body })
    }
}

/// Hex SHA-256 of a prompt; keys transcript entries.
pub fn prompt_hash(prompt: &str) -> String {
    let digest = Sha256::digest(prompt.as_bytes());
    let mut out = String::with_capacity(64);
    for byte in digest {
        let _ = write!(out, "{byte:02x}");
    }
    out
}

/// Serialize a transcript map (prompt hash to recorded response).
pub fn write_transcript(entries: &BTreeMap<String, String>) -> String {
    serde_json::to_string_pretty(entries).expect("transcript serializes")
}

fn replay_transcript(path: &Path, prompt: &str) -> Result<String, PlannerError> {
    let text = std::fs::read_to_string(path).map_err(|e| PlannerError::Transcript {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let map: BTreeMap<String, String> =
        serde_json::from_str(&text).map_err(|e| PlannerError::Transcript {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
    let key = prompt_hash(prompt);
    map.get(&key).cloned().ok_or(PlannerError::TranscriptMiss(key))
}

fn retryable(status: u16) -> bool {
    status == 429 || (500..=599).contains(&status)
}

fn extract_content(body: &str) -> Result<String, PlannerError> {
    #[derive(Deserialize)]
    struct Message {
        content: String,
    }
    #[derive(Deserialize)]
    struct Choice {
        message: Message,
    }
    #[derive(Deserialize)]
    struct Completion {
        choices: Vec<Choice>,
    }
    let completion: Completion =
        serde_json::from_str(body).map_err(|e| PlannerError::BadResponse(e.to_string()))?;
    completion
        .choices
        .into_iter()
        .next()
        .map(|c| c.message.content)
        .ok_or_else(|| PlannerError::BadResponse("response has no choices".into()))
}

/// Issue the request through an injected transport (or replay offline —
/// offline mode never touches the transport).
///
/// Retries 429/5xx statuses, connection failures, and timeouts with
/// exponential backoff up to `max_retries`; auth failures (401/403, or a
/// missing token variable) surface immediately.
pub fn request_plan_with(
    prompt: &str,
    cfg: &PlannerClientConfig,
    transport: &dyn Transport,
) -> Result<String, PlannerError> {
    if let Some(path) = &cfg.offline_transcript {
        return replay_transcript(path, prompt);
    }
    let token = std::env::var(&cfg.token_env)
        .map_err(|_| PlannerError::AuthMissing(format!("environment variable {} not set", cfg.token_env)))?;
    let body = serde_json::json!({
        "model": cfg.model,
        "messages": [{"role": "user", "content": prompt}],
    });
    let timeout = Duration::from_secs(cfg.timeout_secs);
    let mut attempt: u32 = 0;
    loop {
        let outcome = transport.post_json(&cfg.endpoint, &token, &body, timeout);
        let transient = match outcome {
            Ok(reply) if reply.status == 200 => return extract_content(&reply.body),
            Ok(reply) if reply.status == 401 || reply.status == 403 => {
                return Err(PlannerError::AuthMissing(format!(
                    "service rejected the token (status {})",
                    reply.status
                )));
            }
            Ok(reply) if retryable(reply.status) => PlannerError::ServiceError(reply.status),
            Ok(reply) => return Err(PlannerError::ServiceError(reply.status)),
            Err(e @ (PlannerError::Timeout | PlannerError::Transport(_))) => e,
            Err(e) => return Err(e),
        };
        if attempt >= cfg.max_retries {
            return Err(transient);
        }
        let delay = cfg.initial_backoff_ms.saturating_mul(1u64 << attempt.min(16));
        std::thread::sleep(Duration::from_millis(delay));
        attempt += 1;
    }
}

/// Issue the request with the built-in HTTP transport, or replay offline.
pub fn request_plan(prompt: &str, cfg: &PlannerClientConfig) -> Result<String, PlannerError> {
    if let Some(path) = &cfg.offline_transcript {
        return replay_transcript(path, prompt);
    }
    #[cfg(feature = "online")]
    {
        request_plan_with(prompt, cfg, &HttpTransport)
    }
    #[cfg(not(feature = "online"))]
    {
        Err(PlannerError::NoTransport)
    }
}

/// Parse a model response into a chain and validate it against the scene
/// vocabulary. Every returned pair corresponds to a `Pair` line in the
/// input; questionable content surfaces as violations or diagnostics,
/// never silently.
pub fn plan_from_response(
    text: &str,
    vocab: &SceneVocab,
    strict: bool,
) -> Result<(ChainOfContacts, ValidationReport, Vec<ParseDiagnostic>), PlannerError> {
    let (chain, diagnostics) = parse_plan(text)?;
    let report = validate_chain(&chain, vocab, strict);
    Ok((chain, report, diagnostics))
}

/// Prompt spec for the bundled demo room (bed, chair, table, laptop),
/// matching the bundled transcript in `assets/transcripts/demo.json`.
pub fn demo_prompt_spec() -> PromptSpec {
    let mut spec = PromptSpec::new(
        "I want to play video games for a while, then go to sleep.",
        vec![
            ("bed".into(), vec!["pillow".into(), "mattress".into()]),
            (
                "chair".into(),
                vec![
                    "back_soft_surface".into(),
                    "seat_surface".into(),
                    "left_armrest_hard_surface".into(),
                    "right_armrest_hard_surface".into(),
                ],
            ),
            ("table".into(), vec!["board".into()]),
            ("laptop".into(), vec!["screen".into(), "keyboard".into()]),
        ],
    );
    spec.layout_sentences = vec![
        "The [OBJECT: laptop] is upon the [OBJECT: table].".into(),
        "The [OBJECT: table] is in front of the [OBJECT: chair].".into(),
        "The [OBJECT: bed] is several meters away from [OBJECT: table].".into(),
        "The human is several meters away from these objects.".into(),
    ];
    spec
}

/// The recorded demo response: a seven-step play-then-sleep plan.
pub const DEMO_PLAN_RESPONSE: &str = "Step 1: Get close to the chair.\n\
    Pair 1: {chair, none, none, none, front}\n\
    Step 2: Sit on the chair.\n\
    Pair 1: {chair, seat_surface, pelvis, contact, up}\n\
    Step 3: Use the laptop to play video games.\n\
    Pair 1: {chair, seat_surface, pelvis, contact, up}\n\
    Pair 2: {laptop, keyboard, left hand, contact, up}\n\
    Pair 3: {laptop, keyboard, right hand, contact, up}\n\
    Step 4: Stand up from the chair.\n\
    Pair 1: {chair, none, none, none, front}\n\
    Step 5: Get close to the bed.\n\
    Pair 1: {bed, none, none, none, front}\n\
    Step 6: Sit on the bed.\n\
    Pair 1: {bed, mattress, pelvis, contact, up}\n\
    Step 7: Lie down on the bed.\n\
    Pair 1: {bed, mattress, pelvis, contact, up}\n\
    Pair 2: {bed, mattress, torso, contact, up}\n\
    Pair 3: {bed, pillow, head, contact, up}";

/// Transcript containing the demo prompt/response pair.
pub fn demo_transcript() -> BTreeMap<String, String> {
    let prompt = build_prompt(&demo_prompt_spec());
    let mut map = BTreeMap::new();
    map.insert(prompt_hash(&prompt), DEMO_PLAN_RESPONSE.to_string());
    map
}
