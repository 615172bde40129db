//! Trial metrics and report building: success rate, contact error,
//! success steps, with per-difficulty-level breakdowns.

use crate::coc::ContactType;
use crate::executor::TrialLog;
use crate::sceneplan::PlanEntry;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use thiserror::Error;

/// Clamp anchor for not-contact error: a pair that ends closer than this
/// contributes `margin - |d|`, farther contributes zero.
pub const NOT_CONTACT_ERROR_MARGIN: f64 = 0.3;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("metric requires a nonempty batch of trials")]
    EmptyBatch,
    #[error("no pair with contact type `contact` or `not contact` in the batch")]
    NoEligiblePairs,
    #[error("trial `{0}` has no matching plan entry")]
    MismatchedIds(String),
}

/// Task difficulty buckets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Simple,
    Mid,
    Hard,
}

impl Level {
    pub fn name(self) -> &'static str {
        match self {
            Level::Simple => "simple",
            Level::Mid => "mid",
            Level::Hard => "hard",
        }
    }
}

/// Classify an entry: multi-object plans are hard, short plans (up to 3
/// steps) are simple, longer single-object plans are mid.
pub fn classify_level(entry: &PlanEntry) -> Level {
    if entry.objects.len() > 1 {
        Level::Hard
    } else if entry.chain.len() <= 3 {
        Level::Simple
    } else {
        Level::Mid
    }
}

/// How a not-contact pair's final distance maps to error. `Clamped` (the
/// default) reads `max(margin - |d|, 0)`; `Signed` keeps the raw
/// `min(margin - |d|, 0)`, which credits well-separated pairs with
/// negative error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NotContactErrorMode {
    #[default]
    Clamped,
    Signed,
}

/// Percentage of trials that completed every step.
pub fn success_rate(trials: &[TrialLog]) -> Result<f64, MetricsError> {
    if trials.is_empty() {
        return Err(MetricsError::EmptyBatch);
    }
    let wins = trials.iter().filter(|t| t.succeeded).count();
    Ok(100.0 * wins as f64 / trials.len() as f64)
}

/// Mean final-frame error over all contact / not-contact pairs; not-care
/// and pseudo pairs are excluded. Measured at each attempted step's final
/// frame (completion, or budget exhaustion for the failing step).
pub fn contact_error(trials: &[TrialLog]) -> Result<f64, MetricsError> {
    contact_error_with(trials, NotContactErrorMode::Clamped)
}

/// [`contact_error`] with an explicit not-contact clamping mode.
pub fn contact_error_with(
    trials: &[TrialLog],
    mode: NotContactErrorMode,
) -> Result<f64, MetricsError> {
    if trials.is_empty() {
        return Err(MetricsError::EmptyBatch);
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for trial in trials {
        for outcome in &trial.per_step_outcome {
            for pair in &outcome.pairs {
                let dist = pair.delta.norm();
                let err = match pair.contact {
                    Some(ContactType::Contact) => dist,
                    Some(ContactType::NotContact) => match mode {
                        NotContactErrorMode::Clamped => (NOT_CONTACT_ERROR_MARGIN - dist).max(0.0),
                        NotContactErrorMode::Signed => (NOT_CONTACT_ERROR_MARGIN - dist).min(0.0),
                    },
                    Some(ContactType::NotCare) | None => continue,
                };
                sum += err;
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(MetricsError::NoEligiblePairs);
    }
    Ok(sum / count as f64)
}

/// Mean number of completed steps per trial.
pub fn success_steps(trials: &[TrialLog]) -> Result<f64, MetricsError> {
    if trials.is_empty() {
        return Err(MetricsError::EmptyBatch);
    }
    let total: usize = trials
        .iter()
        .map(|t| t.per_step_outcome.iter().filter(|o| o.completed).count())
        .sum();
    Ok(total as f64 / trials.len() as f64)
}

/// The three metrics for one group of trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelMetrics {
    pub n_trials: usize,
    pub success_rate: f64,
    /// Absent when the group has no contact / not-contact pairs.
    pub contact_error: Option<f64>,
    pub success_steps: f64,
}

fn group_metrics(trials: &[TrialLog]) -> Result<LevelMetrics, MetricsError> {
    Ok(LevelMetrics {
        n_trials: trials.len(),
        success_rate: success_rate(trials)?,
        contact_error: match contact_error(trials) {
            Ok(e) => Some(e),
            Err(MetricsError::NoEligiblePairs) => None,
            Err(e) => return Err(e),
        },
        success_steps: success_steps(trials)?,
    })
}

/// Aggregate report over a batch, overall and per difficulty level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub overall: LevelMetrics,
    pub per_level: BTreeMap<Level, LevelMetrics>,
}

impl EvalReport {
    /// Aligned plain-text table, one row per populated level plus the
    /// overall row.
    pub fn to_text_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<8} {:>7} {:>18} {:>15} {:>15}",
            "Level", "Trials", "Success Rate (%)", "Contact Error", "Success Steps"
        );
        let mut row = |name: &str, m: &LevelMetrics| {
            let err = m
                .contact_error
                .map_or_else(|| "-".to_string(), |e| format!("{e:.3}"));
            let _ = writeln!(
                out,
                "{:<8} {:>7} {:>18.1} {:>15} {:>15.1}",
                name, m.n_trials, m.success_rate, err, m.success_steps
            );
        };
        for (level, metrics) in &self.per_level {
            row(level.name(), metrics);
        }
        row("overall", &self.overall);
        out
    }
}

/// Build the report, matching each trial to its plan entry by id.
pub fn build_report(trials: &[TrialLog], entries: &[PlanEntry]) -> Result<EvalReport, MetricsError> {
    if trials.is_empty() {
        return Err(MetricsError::EmptyBatch);
    }
    let by_id: BTreeMap<&str, &PlanEntry> =
        entries.iter().map(|e| (e.entry_id.as_str(), e)).collect();
    let mut groups: BTreeMap<Level, Vec<TrialLog>> = BTreeMap::new();
    for trial in trials {
        let entry = by_id
            .get(trial.plan_id.as_str())
            .ok_or_else(|| MetricsError::MismatchedIds(trial.plan_id.clone()))?;
        groups.entry(classify_level(entry)).or_default().push(trial.clone());
    }
    let mut per_level = BTreeMap::new();
    for (level, group) in &groups {
        per_level.insert(*level, group_metrics(group)?);
    }
    Ok(EvalReport { overall: group_metrics(trials)?, per_level })
}
