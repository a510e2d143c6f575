use serde::{Deserialize, Serialize};

use super::{prompts, DiscoveryError, TargetMetric};
use crate::llm::{estimate_tokens, ChatMessage, Role};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryRole {
    System,
    User,
    Assistant,
    Feedback,
}

/// What an iteration's entries are about; used to summarize them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntryOutcome {
    pub valid: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_kind: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextEntry {
    pub role: EntryRole,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iteration: Option<usize>,
    #[serde(default)]
    pub compressed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<EntryOutcome>,
}

impl ContextEntry {
    pub fn new(role: EntryRole, text: impl Into<String>) -> Self {
        ContextEntry {
            role,
            text: text.into(),
            iteration: None,
            compressed: false,
            outcome: None,
        }
    }

    pub fn for_iteration(role: EntryRole, text: impl Into<String>, iteration: usize, outcome: EntryOutcome) -> Self {
        ContextEntry {
            iteration: Some(iteration),
            outcome: Some(outcome),
            ..ContextEntry::new(role, text)
        }
    }

    fn summary(iteration: usize, outcome: &EntryOutcome) -> Self {
        let what = match (outcome.valid, outcome.score, &outcome.error_kind) {
            (true, Some(s), _) => format!("valid, score {s:.3}"),
            (true, None, _) => "valid".to_string(),
            (false, _, Some(kind)) => format!("invalid, {kind} error"),
            (false, _, None) => "invalid".to_string(),
        };
        ContextEntry {
            role: EntryRole::Feedback,
            text: format!("(iteration {iteration}: {what})"),
            iteration: Some(iteration),
            compressed: true,
            outcome: Some(outcome.clone()),
        }
    }
}

/// Conversation history: system prompt, user prompt, then per-iteration entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Context {
    pub target: TargetMetric,
    pub entries: Vec<ContextEntry>,
}

impl Context {
    pub fn tokens(&self) -> u64 {
        self.entries.iter().map(|e| estimate_tokens(&e.text)).sum()
    }

    pub fn push(&mut self, entry: ContextEntry) {
        self.entries.push(entry);
    }

    /// Feedback is sent with the user role.
    pub fn to_messages(&self) -> Vec<ChatMessage> {
        self.entries
            .iter()
            .map(|e| {
                let role = match e.role {
                    EntryRole::System => Role::System,
                    EntryRole::User | EntryRole::Feedback => Role::User,
                    EntryRole::Assistant => Role::Assistant,
                };
                ChatMessage::new(role, e.text.clone())
            })
            .collect()
    }

    /// Iterations in order of first appearance.
    fn iterations(&self) -> Vec<usize> {
        let mut out: Vec<usize> = Vec::new();
        for it in self.entries.iter().filter_map(|e| e.iteration) {
            if out.last() != Some(&it) && !out.contains(&it) {
                out.push(it);
            }
        }
        out
    }

    fn outcome_of(&self, iteration: usize) -> Option<&EntryOutcome> {
        self.entries
            .iter()
            .filter(|e| e.iteration == Some(iteration))
            .find_map(|e| e.outcome.as_ref())
    }

    /// Best-scoring iteration, earliest on ties.
    pub fn best_iteration(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for it in self.iterations() {
            let Some(score) = self.outcome_of(it).filter(|o| o.valid).and_then(|o| o.score) else {
                continue;
            };
            if best.is_none_or(|(_, b)| self.target.better(score, b)) {
                best = Some((it, score));
            }
        }
        best.map(|(it, _)| it)
    }
}

pub fn build_initial_context(target: TargetMetric) -> Context {
    Context {
        target,
        entries: vec![
            ContextEntry::new(EntryRole::System, prompts::system_prompt()),
            ContextEntry::new(EntryRole::User, prompts::user_prompt(target)),
        ],
    }
}

/// Fits the context into `budget` tokens.
///
/// The two prompts, the best iteration and the last three iterations are
/// kept verbatim; every other iteration becomes a one-line summary, and
/// summaries are dropped oldest first while still over budget.
pub fn compress_context(context: &Context, budget: u64) -> Result<Context, DiscoveryError> {
    if context.tokens() <= budget {
        return Ok(context.clone());
    }
    let iterations = context.iterations();
    let mut keep: Vec<usize> = iterations.iter().rev().take(3).copied().collect();
    keep.extend(context.best_iteration());

    let prompts: Vec<ContextEntry> = context
        .entries
        .iter()
        .filter(|e| e.iteration.is_none())
        .cloned()
        .collect();
    let mut blocks: Vec<(usize, Vec<ContextEntry>, bool)> = Vec::new();
    for &it in &iterations {
        let entries: Vec<&ContextEntry> = context.entries.iter().filter(|e| e.iteration == Some(it)).collect();
        if keep.contains(&it) {
            blocks.push((it, entries.into_iter().cloned().collect(), true));
        } else {
            let summary = match context.outcome_of(it) {
                Some(outcome) => ContextEntry::summary(it, outcome),
                None => entries
                    .iter()
                    .find(|e| e.compressed)
                    .map(|e| (*e).clone())
                    .unwrap_or_else(|| {
                        ContextEntry::summary(
                            it,
                            &EntryOutcome {
                                valid: false,
                                score: None,
                                error_kind: None,
                            },
                        )
                    }),
            };
            blocks.push((it, vec![summary], false));
        }
    }

    let mandatory: u64 = prompts.iter().map(|e| estimate_tokens(&e.text)).sum::<u64>()
        + blocks
            .iter()
            .filter(|(_, _, verbatim)| *verbatim)
            .flat_map(|(_, es, _)| es)
            .map(|e| estimate_tokens(&e.text))
            .sum::<u64>();
    if mandatory > budget {
        return Err(DiscoveryError::BudgetImpossible {
            needed: mandatory,
            budget,
        });
    }

    let mut total: u64 = mandatory
        + blocks
            .iter()
            .filter(|(_, _, verbatim)| !*verbatim)
            .flat_map(|(_, es, _)| es)
            .map(|e| estimate_tokens(&e.text))
            .sum::<u64>();
    let mut i = 0;
    while total > budget {
        // blocks are in iteration order, so the first summary is the oldest
        while blocks[i].2 {
            i += 1;
        }
        total -= blocks[i].1.iter().map(|e| estimate_tokens(&e.text)).sum::<u64>();
        blocks.remove(i);
    }

    let mut entries = prompts;
    entries.extend(blocks.into_iter().flat_map(|(_, es, _)| es));
    Ok(Context {
        target: context.target,
        entries,
    })
}
