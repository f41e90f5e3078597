//! Coalition formation games with constraints.
//!
//! A game consists of weighted coalitions over a set of agents, a set of
//! self-generating coalitions, generation rules that make coalitions
//! candidates, and domination rules that forbid candidates. The weight
//! domination relation `D_w` (heavier-or-equal overlapping coalition present)
//! is always in effect when `include_weight_domination` is set; it is computed
//! on demand from the weights and never stored.

use std::collections::BTreeSet;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::trace::{RuleUsed, Step, Trace};
use crate::weight::Weight;

pub type AgentId = usize;
pub type CoalitionId = usize;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coalition {
    pub id: CoalitionId,
    /// Strictly increasing list of members (canonical form).
    pub members: Vec<AgentId>,
    pub weight: Weight,
}

impl Coalition {
    pub fn new(id: CoalitionId, mut members: Vec<AgentId>, weight: Weight) -> Self {
        members.sort_unstable();
        members.dedup();
        Coalition { id, members, weight }
    }

    pub fn overlaps(&self, other: &Coalition) -> bool {
        let (mut i, mut j) = (0, 0);
        while i < self.members.len() && j < other.members.len() {
            match self.members[i].cmp(&other.members[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => return true,
            }
        }
        false
    }
}

/// A generation or domination rule: if every coalition of `pre` is active,
/// `target` becomes a candidate (generation) or is forbidden (domination).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub pre: Vec<CoalitionId>,
    pub target: CoalitionId,
}

impl Rule {
    pub fn new(mut pre: Vec<CoalitionId>, target: CoalitionId) -> Self {
        pre.sort_unstable();
        pre.dedup();
        Rule { pre, target }
    }
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameSpec {
    pub agents: usize,
    pub coalitions: Vec<Coalition>,
    pub self_generating: BTreeSet<CoalitionId>,
    pub generation_rules: Vec<Rule>,
    pub domination_rules: Vec<Rule>,
    #[serde(default = "default_true")]
    pub include_weight_domination: bool,
}

/// A coalition structure: set of pairwise agent-disjoint active coalitions.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Structure {
    pub active: BTreeSet<CoalitionId>,
}

impl Structure {
    pub fn empty() -> Self {
        Structure { active: BTreeSet::new() }
    }

    pub fn from_ids<I: IntoIterator<Item = CoalitionId>>(ids: I) -> Self {
        Structure { active: ids.into_iter().collect() }
    }

    pub fn contains(&self, c: CoalitionId) -> bool {
        self.active.contains(&c)
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, c) in self.active.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "}}")
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SpecError {
    #[error("coalition #{index} declares id {found}, expected dense id {index}")]
    NonDenseId { index: usize, found: CoalitionId },
    #[error("coalition {id} is empty")]
    EmptyCoalition { id: CoalitionId },
    #[error("coalition {id} references agent {agent} but only {agents} agents are declared")]
    AgentOutOfRange { id: CoalitionId, agent: AgentId, agents: usize },
    #[error("coalition {id} has non-positive weight {weight}")]
    NonPositiveWeight { id: CoalitionId, weight: Weight },
    #[error("{kind} rule #{index} references unknown coalition {id}")]
    DanglingRule { kind: &'static str, index: usize, id: CoalitionId },
    #[error("generation rule #{index} has an empty precondition (use self_generating instead)")]
    EmptyPrecondition { index: usize },
    #[error("generation rule #{index} contains its target {target} in the precondition")]
    SelfReferential { index: usize, target: CoalitionId },
    #[error("self_generating references unknown coalition {id}")]
    DanglingSelfGenerating { id: CoalitionId },
}

#[derive(Debug, thiserror::Error)]
pub enum GameError {
    #[error("coalition {0} is not blocking in the given structure")]
    NotBlocking(CoalitionId),
    #[error("structure is infeasible: agent {agent} appears in coalitions {a} and {b}")]
    Infeasible { agent: AgentId, a: CoalitionId, b: CoalitionId },
    #[error("structure references unknown coalition {0}")]
    UnknownCoalition(CoalitionId),
    #[error(transparent)]
    Spec(#[from] SpecError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    Generation,
    Domination,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: RuleKind,
    pub index: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub generation_ok: bool,
    pub domination_ok: bool,
    pub violations: Vec<Violation>,
}

impl ConsistencyReport {
    pub fn is_consistent(&self) -> bool {
        self.generation_ok && self.domination_ok
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreak {
    /// Lowest coalition id first (the reproducibility default).
    LexMinId,
    MaxWeightThenMinId,
    SeededUniformRandom,
}

impl Default for TieBreak {
    fn default() -> Self {
        TieBreak::LexMinId
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum SimulationOutcome {
    Stable { trace: Trace, end: Structure },
    CycleDetected { trace: Trace, period: usize, first_seen_at: usize },
    StepBudgetExceeded { trace: Trace, end: Structure },
}

impl GameSpec {
    pub fn coalition(&self, id: CoalitionId) -> &Coalition {
        &self.coalitions[id]
    }

    pub fn weight(&self, id: CoalitionId) -> Weight {
        self.coalitions[id].weight
    }

    pub fn num_coalitions(&self) -> usize {
        self.coalitions.len()
    }

    pub fn overlap(&self, a: CoalitionId, b: CoalitionId) -> bool {
        self.coalitions[a].overlaps(&self.coalitions[b])
    }

    /// Structural validation: dense ids, resolvable references, positive
    /// weights, well-formed generation rules.
    pub fn validate(&self) -> Result<(), SpecError> {
        for (index, c) in self.coalitions.iter().enumerate() {
            if c.id != index {
                return Err(SpecError::NonDenseId { index, found: c.id });
            }
            if c.members.is_empty() {
                return Err(SpecError::EmptyCoalition { id: c.id });
            }
            for &agent in &c.members {
                if agent >= self.agents {
                    return Err(SpecError::AgentOutOfRange { id: c.id, agent, agents: self.agents });
                }
            }
            if !c.weight.is_positive() {
                return Err(SpecError::NonPositiveWeight { id: c.id, weight: c.weight });
            }
        }
        let m = self.coalitions.len();
        for &id in &self.self_generating {
            if id >= m {
                return Err(SpecError::DanglingSelfGenerating { id });
            }
        }
        for (index, rule) in self.generation_rules.iter().enumerate() {
            if rule.pre.is_empty() {
                return Err(SpecError::EmptyPrecondition { index });
            }
            if rule.pre.contains(&rule.target) {
                return Err(SpecError::SelfReferential { index, target: rule.target });
            }
            for &id in rule.pre.iter().chain(std::iter::once(&rule.target)) {
                if id >= m {
                    return Err(SpecError::DanglingRule { kind: "generation", index, id });
                }
            }
        }
        for (index, rule) in self.domination_rules.iter().enumerate() {
            for &id in rule.pre.iter().chain(std::iter::once(&rule.target)) {
                if id >= m {
                    return Err(SpecError::DanglingRule { kind: "domination", index, id });
                }
            }
        }
        Ok(())
    }

    /// Checks the two consistency conditions: every generation rule has a
    /// single precondition coalition overlapping its target, and every
    /// domination rule's target is absent from its precondition and overlaps
    /// at least one precondition coalition.
    pub fn check_consistency(&self) -> Result<ConsistencyReport, SpecError> {
        self.validate()?;
        let mut violations = Vec::new();
        let mut generation_ok = true;
        let mut domination_ok = true;
        for (index, rule) in self.generation_rules.iter().enumerate() {
            if rule.pre.len() != 1 {
                generation_ok = false;
                violations.push(Violation {
                    kind: RuleKind::Generation,
                    index,
                    reason: format!("precondition has {} coalitions, expected exactly 1", rule.pre.len()),
                });
            } else if !self.overlap(rule.pre[0], rule.target) {
                generation_ok = false;
                violations.push(Violation {
                    kind: RuleKind::Generation,
                    index,
                    reason: format!(
                        "precondition {} does not overlap target {}",
                        rule.pre[0], rule.target
                    ),
                });
            }
        }
        for (index, rule) in self.domination_rules.iter().enumerate() {
            if rule.pre.contains(&rule.target) {
                domination_ok = false;
                violations.push(Violation {
                    kind: RuleKind::Domination,
                    index,
                    reason: format!("target {} appears in its own precondition", rule.target),
                });
                continue;
            }
            if !rule.pre.iter().any(|&p| self.overlap(p, rule.target)) {
                domination_ok = false;
                violations.push(Violation {
                    kind: RuleKind::Domination,
                    index,
                    reason: format!("no precondition coalition overlaps target {}", rule.target),
                });
            }
        }
        Ok(ConsistencyReport { generation_ok, domination_ok, violations })
    }

    /// Feasibility: all referenced coalitions exist and are pairwise
    /// agent-disjoint.
    pub fn check_feasible(&self, s: &Structure) -> Result<(), GameError> {
        let mut owner: Vec<Option<CoalitionId>> = vec![None; self.agents];
        for &c in &s.active {
            if c >= self.coalitions.len() {
                return Err(GameError::UnknownCoalition(c));
            }
            for &agent in &self.coalitions[c].members {
                if let Some(prev) = owner[agent] {
                    return Err(GameError::Infeasible { agent, a: prev, b: c });
                }
                owner[agent] = Some(c);
            }
        }
        Ok(())
    }

    pub fn is_feasible(&self, s: &Structure) -> bool {
        self.check_feasible(s).is_ok()
    }

    /// A structure violates a stored domination rule when the full
    /// precondition and the target are all present. Consistent rules cannot
    /// be violated by an agent-disjoint structure (the overlapping
    /// precondition and the target would share an agent), so this only
    /// rejects additional structures for inconsistent specs.
    pub fn respects_domination(&self, s: &Structure) -> bool {
        self.domination_rules.iter().all(|r| {
            !s.active.contains(&r.target) || r.pre.iter().any(|p| !s.active.contains(p))
        })
    }

    /// Candidate coalitions for `s`: self-generating coalitions not in `s`
    /// plus targets of generation rules with satisfied preconditions.
    pub fn candidate_coalitions(&self, s: &Structure) -> BTreeSet<CoalitionId> {
        let mut out: BTreeSet<CoalitionId> = self
            .self_generating
            .iter()
            .copied()
            .filter(|c| !s.contains(*c))
            .collect();
        for rule in &self.generation_rules {
            if !s.contains(rule.target) && rule.pre.iter().all(|&p| s.contains(p)) {
                out.insert(rule.target);
            }
        }
        out
    }

    /// Whether `c` is dominated in `s` by a stored rule or (when enabled) by
    /// weight domination.
    pub fn is_dominated(&self, s: &Structure, c: CoalitionId) -> bool {
        if self.include_weight_domination {
            let w = self.weight(c);
            for &other in &s.active {
                if other != c && self.weight(other) >= w && self.overlap(other, c) {
                    return true;
                }
            }
        }
        self.domination_rules
            .iter()
            .any(|rule| rule.target == c && rule.pre.iter().all(|&p| s.contains(p)))
    }

    pub fn blocking_coalitions(&self, s: &Structure) -> BTreeSet<CoalitionId> {
        self.candidate_coalitions(s)
            .into_iter()
            .filter(|&c| !self.is_dominated(s, c))
            .collect()
    }

    pub fn is_stable(&self, s: &Structure) -> bool {
        self.blocking_coalitions(s).is_empty()
    }

    /// Resolves blocking coalition `c`: inserts it, then removes every
    /// coalition dominated in `s ∪ {c}`. The removal is a single simultaneous
    /// pass; preconditions are judged against `s ∪ {c}`.
    pub fn resolve(
        &self,
        s: &Structure,
        c: CoalitionId,
    ) -> Result<(Structure, BTreeSet<CoalitionId>), GameError> {
        if !self.blocking_coalitions(s).contains(&c) {
            return Err(GameError::NotBlocking(c));
        }
        let mut tentative = s.clone();
        tentative.active.insert(c);
        let deleted: BTreeSet<CoalitionId> = tentative
            .active
            .iter()
            .copied()
            .filter(|&victim| self.is_dominated_in(&tentative, victim))
            .collect();
        let mut result = tentative;
        for d in &deleted {
            result.active.remove(d);
        }
        self.check_feasible(&result)?;
        Ok((result, deleted))
    }

    /// Domination of `victim` judged inside a structure that contains it.
    fn is_dominated_in(&self, s: &Structure, victim: CoalitionId) -> bool {
        if self.include_weight_domination {
            let w = self.weight(victim);
            for &other in &s.active {
                if other != victim && self.weight(other) >= w && self.overlap(other, victim) {
                    return true;
                }
            }
        }
        self.domination_rules.iter().any(|rule| {
            rule.target == victim
                && rule.pre.iter().all(|&p| p != victim && s.contains(p))
        })
    }

    /// Picks the rule justification for inserting `c` in `s`: self-generation
    /// when available, otherwise the lowest-index applicable generation rule.
    pub fn find_rule(&self, s: &Structure, c: CoalitionId) -> Option<RuleUsed> {
        if self.self_generating.contains(&c) {
            return Some(RuleUsed::SelfGenerating);
        }
        self.generation_rules
            .iter()
            .position(|rule| rule.target == c && rule.pre.iter().all(|&p| s.contains(p)))
            .map(RuleUsed::Generation)
    }

    /// Iterates `resolve` under a tie-break policy until a stable state, a
    /// repeated structure, or the step budget.
    pub fn simulate(
        &self,
        s0: &Structure,
        policy: TieBreak,
        seed: u64,
        max_steps: usize,
    ) -> Result<SimulationOutcome, GameError> {
        self.check_feasible(s0)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut seen: std::collections::HashMap<Structure, usize> = std::collections::HashMap::new();
        let mut state = s0.clone();
        let mut trace = Trace::default();
        seen.insert(state.clone(), 0);
        for step_idx in 0..max_steps {
            let blocking: Vec<CoalitionId> = self.blocking_coalitions(&state).into_iter().collect();
            if blocking.is_empty() {
                return Ok(SimulationOutcome::Stable { trace, end: state });
            }
            let chosen = match policy {
                TieBreak::LexMinId => blocking[0],
                TieBreak::MaxWeightThenMinId => {
                    *blocking
                        .iter()
                        .max_by(|&&a, &&b| {
                            self.weight(a).cmp(&self.weight(b)).then(b.cmp(&a))
                        })
                        .unwrap()
                }
                TieBreak::SeededUniformRandom => *blocking.choose(&mut rng).unwrap(),
            };
            let rule = self.find_rule(&state, chosen).expect("blocking coalition has a rule");
            let (next, deleted) = self.resolve(&state, chosen)?;
            trace.steps.push(Step { inserted: chosen, deleted, rule });
            if let Some(&first_seen_at) = seen.get(&next) {
                return Ok(SimulationOutcome::CycleDetected {
                    period: step_idx + 1 - first_seen_at,
                    first_seen_at,
                    trace,
                });
            }
            seen.insert(next.clone(), step_idx + 1);
            state = next;
        }
        Ok(SimulationOutcome::StepBudgetExceeded { trace, end: state })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances;

    #[test]
    fn empty_rule_sets_are_vacuously_consistent() {
        let spec = GameSpec {
            agents: 4,
            coalitions: vec![
                Coalition::new(0, vec![0, 1], Weight::from_int(1)),
                Coalition::new(1, vec![2, 3], Weight::from_int(2)),
            ],
            self_generating: [0, 1].into_iter().collect(),
            generation_rules: vec![],
            domination_rules: vec![],
            include_weight_domination: true,
        };
        let report = spec.check_consistency().unwrap();
        assert!(report.generation_ok && report.domination_ok);
        assert!(report.violations.is_empty());
    }

    #[test]
    fn cycle_instance_has_three_domination_violations() {
        let (spec, _) = instances::gen_cycle_example();
        let report = spec.check_consistency().unwrap();
        assert!(report.generation_ok);
        assert!(!report.domination_ok);
        assert_eq!(report.violations.len(), 3);
    }

    #[test]
    fn exponential_chain_generation_is_inconsistent() {
        for k in 1..=3 {
            let (spec, _) = instances::gen_exponential_chain(k);
            let report = spec.check_consistency().unwrap();
            assert!(!report.generation_ok, "k={k}");
            assert!(report.domination_ok, "k={k}");
        }
    }

    #[test]
    fn cycle_candidates_and_blocking() {
        let (spec, start) = instances::gen_cycle_example();
        // start = {{1,2}}; both other coalitions are self-generating candidates
        let cands = spec.candidate_coalitions(&start);
        assert_eq!(cands, [1, 2].into_iter().collect());
        // {3,4} is dominated by the stored rule ({{1,2}},{3,4})
        let blocking = spec.blocking_coalitions(&start);
        assert_eq!(blocking, [2].into_iter().collect());
    }

    #[test]
    fn cycle_resolve_removes_dominated_disjoint_coalition() {
        let (spec, start) = instances::gen_cycle_example();
        let (next, deleted) = spec.resolve(&start, 2).unwrap();
        assert_eq!(next, Structure::from_ids([2]));
        assert_eq!(deleted, [0].into_iter().collect());
    }

    #[test]
    fn cycle_simulation_detects_period_three() {
        let (spec, start) = instances::gen_cycle_example();
        for policy in [TieBreak::LexMinId, TieBreak::MaxWeightThenMinId] {
            match spec.simulate(&start, policy, 0, 100).unwrap() {
                SimulationOutcome::CycleDetected { period, .. } => assert_eq!(period, 3),
                other => panic!("expected cycle, got {other:?}"),
            }
        }
        // no state on the cycle is stable
        let mut s = start.clone();
        for _ in 0..3 {
            assert!(!spec.is_stable(&s));
            let c = *spec.blocking_coalitions(&s).iter().next().unwrap();
            s = spec.resolve(&s, c).unwrap().0;
        }
        assert_eq!(s, start);
    }

    #[test]
    fn resolve_on_empty_structure_inserts_only() {
        let (spec, _) = instances::gen_cycle_example();
        let (next, deleted) = spec.resolve(&Structure::empty(), 0).unwrap();
        assert_eq!(next, Structure::from_ids([0]));
        assert!(deleted.is_empty());
    }

    #[test]
    fn empty_spec_is_stable() {
        let spec = GameSpec {
            agents: 0,
            coalitions: vec![],
            self_generating: BTreeSet::new(),
            generation_rules: vec![],
            domination_rules: vec![],
            include_weight_domination: true,
        };
        assert!(spec.is_stable(&Structure::empty()));
        match spec.simulate(&Structure::empty(), TieBreak::LexMinId, 0, 10).unwrap() {
            SimulationOutcome::Stable { trace, .. } => assert!(trace.steps.is_empty()),
            other => panic!("expected stable, got {other:?}"),
        }
    }

    #[test]
    fn expchain_candidates_follow_chain_rule() {
        // k=2 start {C_{4,2}}: the only candidate is C_{4,1} via ({C_{4,2}},C_{4,1}).
        let (spec, start) = instances::gen_exponential_chain(2);
        let c41 = instances::expchain_coalition_id(1, 4);
        let c42 = instances::expchain_coalition_id(2, 4);
        assert_eq!(start, Structure::from_ids([c42]));
        assert_eq!(spec.candidate_coalitions(&start), [c41].into_iter().collect());
    }

    #[test]
    fn expchain_gadget_resolve_drops_both_overlapping() {
        // s = {C_{2,1}, C_{4,1}}, resolving C_{3,1} deletes both.
        let (spec, _) = instances::gen_exponential_chain(1);
        let id = |j| instances::expchain_coalition_id(1, j);
        let s = Structure::from_ids([id(2), id(4)]);
        let (next, deleted) = spec.resolve(&s, id(3)).unwrap();
        assert_eq!(next, Structure::from_ids([id(3)]));
        assert_eq!(deleted, [id(2), id(4)].into_iter().collect());
    }

    #[test]
    fn expchain_k1_simulation_inserts_c11_twice_and_stabilizes() {
        let (spec, start) = instances::gen_exponential_chain(1);
        let c11 = instances::expchain_coalition_id(1, 1);
        match spec.simulate(&start, TieBreak::LexMinId, 0, 100).unwrap() {
            SimulationOutcome::Stable { trace, end } => {
                let count = trace.steps.iter().filter(|s| s.inserted == c11).count();
                assert_eq!(count, 2);
                assert!(spec.is_stable(&end));
            }
            other => panic!("expected stable run, got {other:?}"),
        }
    }

    #[test]
    fn validate_reports_first_broken_reference() {
        let spec = GameSpec {
            agents: 2,
            coalitions: vec![Coalition::new(0, vec![0, 1], Weight::from_int(1))],
            self_generating: BTreeSet::new(),
            generation_rules: vec![Rule::new(vec![0], 5)],
            domination_rules: vec![],
            include_weight_domination: true,
        };
        assert!(matches!(
            spec.validate(),
            Err(SpecError::DanglingRule { kind: "generation", id: 5, .. })
        ));
    }

    #[test]
    fn spec_json_round_trip() {
        let (spec, _) = instances::gen_cycle_example();
        let json = serde_json::to_string_pretty(&spec).unwrap();
        let back: GameSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(spec, back);
    }
}
