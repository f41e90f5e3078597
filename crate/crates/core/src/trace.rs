//! Improvement-step traces and replay.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::game::{CoalitionId, GameSpec, Structure};

/// Justification for an insertion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleUsed {
    SelfGenerating,
    /// Index into the spec's generation rule list.
    Generation(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub inserted: CoalitionId,
    pub deleted: BTreeSet<CoalitionId>,
    pub rule: RuleUsed,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Trace {
    pub steps: Vec<Step>,
}

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("step {index}: inserted coalition {inserted} is not blocking")]
    NotBlocking { index: usize, inserted: CoalitionId },
    #[error("step {index}: recorded rule does not justify inserting {inserted}")]
    RuleNotApplicable { index: usize, inserted: CoalitionId },
    #[error("step {index}: recorded deletions {recorded:?} differ from computed {computed:?}")]
    DeletionMismatch {
        index: usize,
        recorded: BTreeSet<CoalitionId>,
        computed: BTreeSet<CoalitionId>,
    },
    #[error("start structure invalid: {0}")]
    BadStart(String),
}

impl Trace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    fn rule_applies(spec: &GameSpec, s: &Structure, step: &Step) -> bool {
        match step.rule {
            RuleUsed::SelfGenerating => spec.self_generating.contains(&step.inserted),
            RuleUsed::Generation(i) => spec.generation_rules.get(i).is_some_and(|rule| {
                rule.target == step.inserted && rule.pre.iter().all(|&p| s.contains(p))
            }),
        }
    }

    /// Replays from `s0`, checking each step's rule, blocking status and the
    /// recorded deletion set. Returns the end structure.
    pub fn replay(&self, spec: &GameSpec, s0: &Structure) -> Result<Structure, ReplayError> {
        self.replay_inner(spec, s0, true)
    }

    /// Replays checking rule and blocking status only; deletions are
    /// recomputed rather than compared.
    pub fn replay_lenient(&self, spec: &GameSpec, s0: &Structure) -> Result<Structure, ReplayError> {
        self.replay_inner(spec, s0, false)
    }

    fn replay_inner(
        &self,
        spec: &GameSpec,
        s0: &Structure,
        strict: bool,
    ) -> Result<Structure, ReplayError> {
        spec.check_feasible(s0)
            .map_err(|e| ReplayError::BadStart(e.to_string()))?;
        let mut state = s0.clone();
        for (index, step) in self.steps.iter().enumerate() {
            if !Self::rule_applies(spec, &state, step) {
                return Err(ReplayError::RuleNotApplicable { index, inserted: step.inserted });
            }
            let (next, deleted) = spec
                .resolve(&state, step.inserted)
                .map_err(|_| ReplayError::NotBlocking { index, inserted: step.inserted })?;
            if strict && deleted != step.deleted {
                return Err(ReplayError::DeletionMismatch {
                    index,
                    recorded: step.deleted.clone(),
                    computed: deleted,
                });
            }
            state = next;
        }
        Ok(state)
    }

    /// One JSON object per line, as in the trace file format.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for step in &self.steps {
            out.push_str(&serde_json::to_string(step).expect("step serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, serde_json::Error> {
        let mut steps = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            steps.push(serde_json::from_str(line)?);
        }
        Ok(Trace { steps })
    }
}
