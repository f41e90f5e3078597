//! Brute-force ground truth: exhaustive exploration of the improvement-step
//! transition system for small instances, reachability with shortest
//! witnesses, and stable-state enumeration.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Debug;
use std::hash::Hash;

use rayon::prelude::*;
use serde::Serialize;

use crate::game::{GameSpec, Structure};
use crate::matching::{EdgeId, Matching, MatchingInstance};
use crate::trace::{Step, Trace};

pub const DEFAULT_BUDGET: usize = 1_000_000;

/// Budget from `MATCHDYN_BUDGET`, or the default.
pub fn budget_from_env() -> usize {
    std::env::var("MATCHDYN_BUDGET")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(DEFAULT_BUDGET)
}

/// A transition system of improvement steps. Implemented by game specs
/// (states are structures, actions are coalition ids) and matching
/// instances (states are matchings, actions are edge ids).
pub trait Dynamics {
    type State: Clone + Ord + Hash + Eq + Debug + Send + Sync + Serialize;
    type Action: Copy + Ord + Debug + Send + Sync + Serialize;

    /// All legal improvement steps out of `s`, deterministically ordered.
    fn successors(&self, s: &Self::State) -> Vec<(Self::Action, Self::State)>;

    /// All feasible states, or `None` if there are more than `cap`.
    fn enumerate_feasible(&self, cap: usize) -> Option<Vec<Self::State>>;
}

impl Dynamics for GameSpec {
    type State = Structure;
    type Action = usize;

    fn successors(&self, s: &Structure) -> Vec<(usize, Structure)> {
        self.blocking_coalitions(s)
            .into_iter()
            .map(|c| {
                let (next, _) = self.resolve(s, c).expect("blocking coalitions resolve");
                (c, next)
            })
            .collect()
    }

    fn enumerate_feasible(&self, cap: usize) -> Option<Vec<Structure>> {
        let m = self.coalitions.len();
        let mut out = Vec::new();
        let mut stack: Vec<(usize, Structure)> = vec![(0, Structure::empty())];
        while let Some((i, s)) = stack.pop() {
            if i == m {
                if out.len() == cap {
                    return None;
                }
                out.push(s);
                continue;
            }
            let mut with = s.clone();
            with.active.insert(i);
            if self.check_feasible(&with).is_ok() && self.respects_domination(&with) {
                stack.push((i + 1, with));
            }
            stack.push((i + 1, s));
        }
        out.sort();
        Some(out)
    }
}

impl Dynamics for MatchingInstance {
    type State = Matching;
    type Action = EdgeId;

    fn successors(&self, m: &Matching) -> Vec<(EdgeId, Matching)> {
        self.blocking_pairs(m)
            .into_iter()
            .map(|e| {
                let (next, _) = self.resolve_pair(m, e).expect("blocking pairs resolve");
                (e, next)
            })
            .collect()
    }

    fn enumerate_feasible(&self, cap: usize) -> Option<Vec<Matching>> {
        let n = self.edges.len();
        let mut out = Vec::new();
        let mut stack: Vec<(usize, Matching)> = vec![(0, Matching::empty())];
        while let Some((i, m)) = stack.pop() {
            if i == n {
                if out.len() == cap {
                    return None;
                }
                out.push(m);
                continue;
            }
            let mut with = m.clone();
            with.edges.insert(i);
            if self.is_feasible(&with) {
                stack.push((i + 1, with));
            }
            stack.push((i + 1, m));
        }
        out.sort();
        Some(out)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TransitionGraph<S, A> {
    pub states: Vec<S>,
    /// (source index, action label, target index), sorted.
    pub edges: Vec<(usize, A, usize)>,
    /// BFS distance from the start state, per state.
    pub depth: Vec<usize>,
    /// True when the node budget cut exploration short.
    pub overflow: bool,
}

impl<S: Serialize, A: Serialize + Copy> TransitionGraph<S, A> {
    pub fn sinks(&self) -> Vec<usize> {
        let with_out: BTreeSet<usize> = self.edges.iter().map(|&(s, _, _)| s).collect();
        (0..self.states.len()).filter(|i| !with_out.contains(i)).collect()
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph transitions {\n");
        for (i, s) in self.states.iter().enumerate() {
            let label = serde_json::to_string(s).unwrap_or_default().replace('"', "'");
            out.push_str(&format!("  s{i} [label=\"{label}\"];\n"));
        }
        for (a, act, b) in &self.edges {
            let label = serde_json::to_string(act).unwrap_or_default().replace('"', "'");
            out.push_str(&format!("  s{a} -> s{b} [label=\"{label}\"];\n"));
        }
        out.push_str("}\n");
        out
    }
}

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("exploration exceeded the node budget of {0} states")]
    BudgetExceeded(usize),
    #[error("instance too large to enumerate (more than {0} feasible states)")]
    TooLarge(usize),
    #[error("state is not feasible: {0}")]
    Infeasible(String),
}

/// Layer-synchronous BFS closure of `s0` under all blocking resolutions.
/// Successor computation is sharded across workers per layer; the merge is
/// sequential and deterministic, so results do not depend on worker count.
pub fn explore<D: Dynamics + Sync>(
    dynamics: &D,
    s0: &D::State,
    node_budget: usize,
) -> TransitionGraph<D::State, D::Action> {
    assert!(node_budget >= 1);
    let mut index: HashMap<D::State, usize> = HashMap::new();
    let mut states = vec![s0.clone()];
    let mut depth = vec![0usize];
    index.insert(s0.clone(), 0);
    let mut edges = Vec::new();
    let mut frontier: Vec<usize> = vec![0];
    let mut overflow = false;
    let mut layer = 0usize;
    while !frontier.is_empty() {
        layer += 1;
        let expanded: Vec<(usize, Vec<(D::Action, D::State)>)> = frontier
            .par_iter()
            .map(|&i| (i, dynamics.successors(&states[i])))
            .collect();
        let mut next_frontier = Vec::new();
        for (src, succs) in expanded {
            for (action, state) in succs {
                let id = match index.get(&state) {
                    Some(&id) => id,
                    None => {
                        if states.len() >= node_budget {
                            overflow = true;
                            continue;
                        }
                        let id = states.len();
                        index.insert(state.clone(), id);
                        states.push(state);
                        depth.push(layer);
                        next_frontier.push(id);
                        id
                    }
                };
                edges.push((src, action, id));
            }
        }
        frontier = next_frontier;
    }
    edges.sort_by(|a, b| (a.0, a.1, a.2).cmp(&(b.0, b.1, b.2)));
    edges.dedup_by(|a, b| (a.0, a.1, a.2) == (b.0, b.1, b.2));
    TransitionGraph { states, edges, depth, overflow }
}

#[derive(Clone, Debug, Serialize)]
pub struct ReachReport<A> {
    pub reachable: bool,
    /// Shortest action sequence from start to target, when reachable.
    pub witness: Option<Vec<A>>,
    pub shortest_length: Option<usize>,
}

/// Exact reachability by exhaustion. Errors out when the budget truncates
/// exploration without finding the target.
pub fn reachable<D: Dynamics + Sync>(
    dynamics: &D,
    s0: &D::State,
    target: &D::State,
    node_budget: usize,
) -> Result<ReachReport<D::Action>, OracleError> {
    let graph = explore(dynamics, s0, node_budget);
    let hit = graph.states.iter().position(|s| s == target);
    match hit {
        None if graph.overflow => Err(OracleError::BudgetExceeded(node_budget)),
        None => Ok(ReachReport { reachable: false, witness: None, shortest_length: None }),
        Some(t) => {
            // walk BFS parents: pick, per state, any in-edge from the
            // previous layer (lowest action for determinism)
            let mut witness = Vec::new();
            let mut at = t;
            while at != 0 {
                let d = graph.depth[at];
                let (src, action, _) = graph
                    .edges
                    .iter()
                    .filter(|&&(s, _, t2)| t2 == at && graph.depth[s] == d - 1)
                    .min_by_key(|&&(s, a, _)| (s, a))
                    .expect("BFS tree edge exists");
                witness.push(*action);
                at = *src;
            }
            witness.reverse();
            Ok(ReachReport {
                reachable: true,
                shortest_length: Some(witness.len()),
                witness: Some(witness),
            })
        }
    }
}

/// Converts a witness action sequence over a game spec into a replayable
/// trace.
pub fn witness_to_trace(
    spec: &GameSpec,
    s0: &Structure,
    actions: &[usize],
) -> Result<Trace, OracleError> {
    let mut s = s0.clone();
    let mut steps = Vec::new();
    for &c in actions {
        let rule = spec
            .find_rule(&s, c)
            .ok_or_else(|| OracleError::Infeasible(format!("no rule generates {c}")))?;
        let (next, deleted) = spec
            .resolve(&s, c)
            .map_err(|e| OracleError::Infeasible(e.to_string()))?;
        steps.push(Step { inserted: c, deleted, rule });
        s = next;
    }
    Ok(Trace { steps })
}

/// All stable states over the whole feasible state space (not only the
/// reachable part).
pub fn enumerate_stable<D: Dynamics + Sync>(
    dynamics: &D,
    cap: usize,
) -> Result<Vec<D::State>, OracleError> {
    let all = dynamics.enumerate_feasible(cap).ok_or(OracleError::TooLarge(cap))?;
    Ok(all
        .into_iter()
        .filter(|s| dynamics.successors(s).is_empty())
        .collect())
}
