//! Parser and renderer for the textual plan grammar:
//!
//! ```text
//! Step 1: Get close to the chair.
//! Pair 1: {chair, none, none, none, front}
//! Step 2: Sit on the chair.
//! Pair 1: {chair, seat_surface, pelvis, contact, up}
//! ```
//!
//! Plan text comes from language models, so the parser treats input as
//! adversarial: any line it cannot understand becomes a diagnostic and is
//! skipped, and it must never panic.

use crate::coc::{ChainOfContacts, CocError, ContactPair, ContactStep};
use regex::Regex;
use std::fmt::Write as _;
use std::sync::OnceLock;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PlanTextError {
    /// No step could be recovered from the input.
    #[error("no plan steps found in input")]
    EmptyPlan,
}

/// Severity of a parse diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagnosticSeverity {
    Warning,
    Error,
}

/// A note about one input line (1-based) the parser could not fully use.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseDiagnostic {
    pub line: usize,
    pub severity: DiagnosticSeverity,
    pub message: String,
}

/// Lowercase, trim, and collapse internal whitespace to underscores:
/// `" Left Hand "` becomes `"left_hand"`.
pub fn normalize_token(raw: &str) -> String {
    raw.trim()
        .to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join("_")
}

fn step_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)^\s*step\s*(\d+)\s*:\s*(.*)$").unwrap())
}

fn pair_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)^\s*pair\s*(\d+)\s*:\s*\{(.*)\}\s*$").unwrap())
}

struct PendingStep {
    number: u64,
    description: String,
    pairs: Vec<ContactPair>,
    header_line: usize,
}

/// Parse plan text into a chain of contacts.
///
/// Accepts LF or CRLF line endings. Joint, part, contact, and direction
/// tokens are normalized via [`normalize_token`]; step descriptions are
/// kept verbatim. Unparseable lines and malformed pairs are skipped with
/// a diagnostic; steps that end up with no pairs are dropped the same
/// way. Non-consecutive step numbering is a warning.
pub fn parse_plan(text: &str) -> Result<(ChainOfContacts, Vec<ParseDiagnostic>), PlanTextError> {
    let mut diagnostics = Vec::new();
    let mut steps: Vec<ContactStep> = Vec::new();
    let mut pending: Option<PendingStep> = None;
    let mut expected_number: u64 = 1;

    let flush = |pending: &mut Option<PendingStep>,
                     steps: &mut Vec<ContactStep>,
                     diagnostics: &mut Vec<ParseDiagnostic>| {
        if let Some(p) = pending.take() {
            match ContactStep::new(p.description, p.pairs) {
                Ok(step) => steps.push(step),
                Err(err) => diagnostics.push(ParseDiagnostic {
                    line: p.header_line,
                    severity: DiagnosticSeverity::Error,
                    message: format!("step {} dropped: {}", p.number, err),
                }),
            }
        }
    };

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if let Some(caps) = step_re().captures(line) {
            flush(&mut pending, &mut steps, &mut diagnostics);
            let number: u64 = caps[1].parse().unwrap_or(0);
            if number != expected_number {
                diagnostics.push(ParseDiagnostic {
                    line: line_no,
                    severity: DiagnosticSeverity::Warning,
                    message: format!("expected step {expected_number}, found step {number}"),
                });
            }
            expected_number = number.saturating_add(1);
            pending = Some(PendingStep {
                number,
                description: caps[2].trim().to_string(),
                pairs: Vec::new(),
                header_line: line_no,
            });
            continue;
        }
        if let Some(caps) = pair_re().captures(line) {
            let Some(step) = pending.as_mut() else {
                diagnostics.push(ParseDiagnostic {
                    line: line_no,
                    severity: DiagnosticSeverity::Error,
                    message: "pair line before any step header; skipped".into(),
                });
                continue;
            };
            let fields: Vec<String> = caps[2].split(',').map(normalize_token).collect();
            if fields.len() != 5 {
                diagnostics.push(ParseDiagnostic {
                    line: line_no,
                    severity: DiagnosticSeverity::Error,
                    message: format!("pair must have 5 comma-separated fields, found {}", fields.len()),
                });
                continue;
            }
            match ContactPair::from_tokens([
                &fields[0], &fields[1], &fields[2], &fields[3], &fields[4],
            ]) {
                Ok(pair) => step.pairs.push(pair),
                Err(err) => diagnostics.push(ParseDiagnostic {
                    line: line_no,
                    severity: DiagnosticSeverity::Error,
                    message: format!("pair skipped: {err}"),
                }),
            }
            continue;
        }
        diagnostics.push(ParseDiagnostic {
            line: line_no,
            severity: DiagnosticSeverity::Warning,
            message: "unrecognized line; skipped".into(),
        });
    }
    flush(&mut pending, &mut steps, &mut diagnostics);

    match ChainOfContacts::new(steps) {
        Ok(chain) => Ok((chain, diagnostics)),
        Err(CocError::EmptyChain) => Err(PlanTextError::EmptyPlan),
        Err(_) => unreachable!("steps are validated individually"),
    }
}

/// Render a chain back to canonical plan text.
///
/// Uses `Step i:` / `Pair k:` headers with 1-based numbering, spaced
/// contact tokens (`not contact`), and LF line endings without a trailing
/// newline. `parse_plan(render_plan(chain))` recovers `chain` exactly.
pub fn render_plan(chain: &ChainOfContacts) -> String {
    let mut out = String::new();
    for (si, step) in chain.steps.iter().enumerate() {
        if si > 0 {
            out.push('\n');
        }
        let _ = write!(out, "Step {}: {}", si + 1, step.description);
        for (pi, pair) in step.pairs.iter().enumerate() {
            let [o, p, j, c, d] = pair.to_tokens();
            let _ = write!(out, "\nPair {}: {{{o}, {p}, {j}, {c}, {d}}}", pi + 1);
        }
    }
    out
}
