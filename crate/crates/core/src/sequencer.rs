//! Two-phase polynomial convergence (Theorem 1) and improvement-sequence
//! truncation (Theorem 2).


use serde::{Deserialize, Serialize};

use crate::game::{GameError, GameSpec, SpecError, Structure, Violation};
use crate::movement::{MovementGraph, MovementError};
use crate::trace::{ReplayError, RuleUsed, Step, Trace};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub trace: Trace,
    pub phase1_steps: usize,
    pub phase2_steps: usize,
    /// The n·m² + n·m comparison figure.
    pub bound: usize,
    pub end: Structure,
}

#[derive(Debug, thiserror::Error)]
pub enum ConvergeError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("spec has inconsistent rules; convergence requires consistency")]
    InconsistentSpec(Vec<Violation>),
    #[error("infeasible start structure: {0}")]
    InfeasibleStart(GameError),
    #[error("convergence exceeded the theoretical step bound; this is a bug")]
    BoundExceeded,
}

impl From<MovementError> for ConvergeError {
    fn from(e: MovementError) -> Self {
        match e {
            MovementError::Spec(s) => ConvergeError::Spec(s),
            MovementError::InconsistentSpec(v) => ConvergeError::InconsistentSpec(v),
            MovementError::IllegalAction(_) => ConvergeError::BoundExceeded,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TruncateError {
    #[error("trace does not replay from the given start: {0}")]
    InvalidTrace(#[from] ReplayError),
}

/// One pending exchange-edge improvement: a marked source with an unmarked
/// undominated heavier target. Deterministic choice: lowest target, then
/// lowest source.
fn direct_move(g: &MovementGraph, s: &Structure) -> Option<(usize, usize, usize)> {
    g.exchange_edges
        .iter()
        .filter(|e| s.contains(e.source) && !s.contains(e.target) && g.undominated(s, e.target))
        .map(|e| (e.target, e.source, e.rule))
        .min()
        .map(|(t, src, rule)| (src, t, rule))
}

struct Runner<'a> {
    spec: &'a GameSpec,
    graph: MovementGraph,
    s: Structure,
    steps: Vec<Step>,
    cap: usize,
}

impl Runner<'_> {
    fn exec(&mut self, inserted: usize, rule: RuleUsed) -> Result<(), ConvergeError> {
        if self.steps.len() >= self.cap {
            return Err(ConvergeError::BoundExceeded);
        }
        let (next, deleted) = self
            .spec
            .resolve(&self.s, inserted)
            .map_err(|_| ConvergeError::BoundExceeded)?;
        self.steps.push(Step { inserted, deleted, rule });
        self.s = next;
        Ok(())
    }

    /// Creates at the head of `path` and walks the exchange edges to its
    /// end. Returns false if an intermediate deletion invalidated the path;
    /// the caller then re-runs the search.
    fn walk(&mut self, path: &[usize]) -> Result<bool, ConvergeError> {
        let head = path[0];
        if self.s.contains(head) || !self.graph.undominated(&self.s, head) {
            return Ok(false);
        }
        self.exec(head, RuleUsed::SelfGenerating)?;
        for pair in path.windows(2) {
            let (from, to) = (pair[0], pair[1]);
            if !self.s.contains(from) || self.s.contains(to) || !self.graph.undominated(&self.s, to)
            {
                return Ok(false);
            }
            let rule = self
                .graph
                .exchange_edges
                .iter()
                .find(|e| e.source == from && e.target == to)
                .expect("path follows exchange edges")
                .rule;
            self.exec(to, RuleUsed::Generation(rule))?;
        }
        Ok(true)
    }
}

/// Theorem 1's procedure. Phase 1 makes exchange-edge improvements and
/// create-and-walks to positions that weight-dominate an existing mark,
/// shrinking the incumbent set; Phase 2 repeatedly creates and walks to the
/// heaviest reachable position until none remains. The returned trace
/// replays in the game to a stable structure.
pub fn converge(spec: &GameSpec, s0: &Structure) -> Result<ConvergenceReport, ConvergeError> {
    let graph = MovementGraph::build(spec)?;
    spec.check_feasible(s0).map_err(ConvergeError::InfeasibleStart)?;
    let n = spec.agents;
    let m = spec.coalitions.len();
    let bound = n * m * m + n * m;
    let mut runner = Runner {
        spec,
        graph,
        s: s0.clone(),
        steps: Vec::new(),
        cap: 2 * bound + 16,
    };
    let mut phase1_steps = 0usize;
    let mut in_phase1 = true;

    loop {
        if let Some((_, target, rule)) = direct_move(&runner.graph, &runner.s) {
            runner.exec(target, RuleUsed::Generation(rule))?;
        } else {
            let positions = runner.graph.reachable_positions(&runner.s);
            let dominates_mark = |v: usize| {
                runner.s.active.iter().any(|&u| {
                    runner.graph.hyper_in[u]
                        .iter()
                        .any(|h| h.weight_based && h.sources[0] == v)
                })
            };
            let mut chosen: Option<&Vec<usize>> = None;
            if in_phase1 {
                // first position (fixed generator order) displacing a mark
                'outer: for found in positions.values() {
                    for (v, path) in found {
                        if dominates_mark(*v) {
                            chosen = Some(path);
                            break 'outer;
                        }
                    }
                }
            }
            if chosen.is_none() {
                if in_phase1 {
                    phase1_steps = runner.steps.len();
                    in_phase1 = false;
                }
                // heaviest reachable position, lowest id on ties
                chosen = positions
                    .values()
                    .flatten()
                    .map(|(v, path)| ((std::cmp::Reverse(runner.graph.weights[*v]), *v), path))
                    .min_by(|a, b| a.0.cmp(&b.0))
                    .map(|(_, path)| path);
            }
            match chosen {
                Some(path) => {
                    let path = path.clone();
                    runner.walk(&path)?;
                }
                None => break,
            }
        }
    }
    if in_phase1 {
        phase1_steps = runner.steps.len();
    }
    let phase2_steps = runner.steps.len() - phase1_steps;
    debug_assert!(spec.is_stable(&runner.s));
    Ok(ConvergenceReport {
        trace: Trace { steps: runner.steps },
        phase1_steps,
        phase2_steps,
        bound,
        end: runner.s,
    })
}

/// Theorem 2's truncation: repeatedly drops steps whose coalition is later
/// deleted without having fathered a kept coalition via a generation rule
/// or deleted a kept coalition. Endpoint-preserving and idempotent.
pub fn truncate(spec: &GameSpec, s0: &Structure, trace: &Trace) -> Result<Trace, TruncateError> {
    // the input must replay as recorded
    trace.replay(spec, s0)?;
    let mut steps: Vec<Step> = trace.steps.clone();
    loop {
        // lenient replay of the current candidate, tracking per-step
        // deletions, ownership, and uses
        let n = steps.len();
        let mut deleted_later = vec![false; n]; // this step's insertion got removed
        let mut used_as_pre = vec![false; n];
        let mut del_count = vec![0usize; n];
        let mut owner: std::collections::BTreeMap<usize, usize> = Default::default();
        let mut s = s0.clone();
        for (i, step) in steps.iter_mut().enumerate() {
            if let RuleUsed::Generation(r) = step.rule {
                for &p in &spec.generation_rules[r].pre {
                    if let Some(&o) = owner.get(&p) {
                        used_as_pre[o] = true;
                    }
                }
            }
            let (next, removed) = spec
                .resolve(&s, step.inserted)
                .map_err(|_| ReplayError::NotBlocking { index: i, inserted: step.inserted })?;
            for &d in &removed {
                if let Some(o) = owner.remove(&d) {
                    deleted_later[o] = true;
                }
                del_count[i] += 1;
            }
            step.deleted = removed;
            owner.insert(step.inserted, i);
            s = next;
        }
        let keep: Vec<bool> = (0..n)
            .map(|i| !(deleted_later[i] && !used_as_pre[i] && del_count[i] == 0))
            .collect();
        if keep.iter().all(|&k| k) {
            return Ok(Trace { steps });
        }
        steps = steps
            .into_iter()
            .zip(keep)
            .filter_map(|(st, k)| k.then_some(st))
            .collect();
    }
}

/// Deletion-chain length check used by property tests: following
/// generation-rule predecessors from any inserted coalition visits strictly
/// increasing weights.
pub fn predecessor_weights_increase(spec: &GameSpec, trace: &Trace) -> bool {
    trace.steps.iter().all(|step| match step.rule {
        RuleUsed::SelfGenerating => true,
        RuleUsed::Generation(r) => {
            let rule = &spec.generation_rules[r];
            rule.pre.len() != 1
                || spec.coalitions[rule.pre[0]].weight < spec.coalitions[step.inserted].weight
        }
    })
}
