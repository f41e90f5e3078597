//! Object movement hypergraph: one vertex per coalition, exchange edges for
//! weight-increasing generation rules, domination hyperedges for stored
//! rules plus weight domination. Marking dynamics on this graph mirror the
//! improvement dynamics of consistent games.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::game::{GameSpec, SpecError, Structure, Violation};
use crate::weight::Weight;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExchangeEdge {
    pub source: usize,
    pub target: usize,
    /// Index of the generation rule this edge came from.
    pub rule: usize,
}

/// A hyperedge (sources, target): the target is dominated while every
/// source is marked.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hyperedge {
    pub sources: Vec<usize>,
    pub target: usize,
    /// True for the implicit weight-domination pairs, false for stored rules.
    pub weight_based: bool,
}

#[derive(Clone, Debug)]
pub struct MovementGraph {
    pub weights: Vec<Weight>,
    pub generators: BTreeSet<usize>,
    pub exchange_edges: Vec<ExchangeEdge>,
    /// Incoming hyperedges per target vertex.
    pub hyper_in: Vec<Vec<Hyperedge>>,
    /// Outgoing exchange edges per source vertex.
    out_edges: Vec<Vec<usize>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    CreateAt { vertex: usize },
    MoveAlong { source: usize, target: usize },
}

impl Action {
    pub fn target(&self) -> usize {
        match *self {
            Action::CreateAt { vertex } => vertex,
            Action::MoveAlong { target, .. } => target,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum MovementError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("spec has inconsistent rules; movement graph construction requires consistency")]
    InconsistentSpec(Vec<Violation>),
    #[error("illegal action: {0}")]
    IllegalAction(String),
}

/// A marking is a structure over the same coalition ids; the alias keeps
/// call sites readable.
pub type MarkingState = Structure;

impl MovementGraph {
    pub fn build(spec: &GameSpec) -> Result<Self, MovementError> {
        let report = spec.check_consistency()?;
        if !report.is_consistent() {
            return Err(MovementError::InconsistentSpec(report.violations));
        }
        let m = spec.coalitions.len();
        let weights: Vec<Weight> = spec.coalitions.iter().map(|c| c.weight).collect();
        let mut exchange_edges = Vec::new();
        let mut out_edges: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (rule, r) in spec.generation_rules.iter().enumerate() {
            let source = r.pre[0];
            if weights[source] < weights[r.target] {
                out_edges[source].push(exchange_edges.len());
                exchange_edges.push(ExchangeEdge { source, target: r.target, rule });
            }
        }
        let mut hyper_in: Vec<Vec<Hyperedge>> = vec![Vec::new(); m];
        for r in &spec.domination_rules {
            hyper_in[r.target].push(Hyperedge {
                sources: r.pre.clone(),
                target: r.target,
                weight_based: false,
            });
        }
        if spec.include_weight_domination {
            for c1 in 0..m {
                for c2 in 0..m {
                    if c1 != c2
                        && weights[c1] >= weights[c2]
                        && spec.coalitions[c1].overlaps(&spec.coalitions[c2])
                    {
                        hyper_in[c2].push(Hyperedge {
                            sources: vec![c1],
                            target: c2,
                            weight_based: true,
                        });
                    }
                }
            }
        }
        Ok(MovementGraph {
            weights,
            generators: spec.self_generating.clone(),
            exchange_edges,
            hyper_in,
            out_edges,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.weights.len()
    }

    /// No incoming hyperedge has all sources marked.
    pub fn undominated(&self, m: &MarkingState, v: usize) -> bool {
        self.hyper_in[v]
            .iter()
            .all(|h| h.sources.iter().any(|s| !m.contains(*s)))
    }

    fn check_target(&self, m: &MarkingState, v: usize) -> Result<(), MovementError> {
        if m.contains(v) {
            return Err(MovementError::IllegalAction(format!("vertex {v} is already marked")));
        }
        if !self.undominated(m, v) {
            return Err(MovementError::IllegalAction(format!("vertex {v} is dominated")));
        }
        Ok(())
    }

    /// Executes a marking action: marks the target (unmarking the source of
    /// a move), then unmarks every vertex dominated under the new marking.
    /// Only weight domination can fire on marked vertices of a consistent
    /// spec, so deletion consults the weight-based hyperedges.
    pub fn step(&self, m: &MarkingState, action: Action) -> Result<MarkingState, MovementError> {
        let target = action.target();
        self.check_target(m, target)?;
        let mut next = m.clone();
        if let Action::MoveAlong { source, .. } = action {
            if !m.contains(source) {
                return Err(MovementError::IllegalAction(format!(
                    "move source {source} is not marked"
                )));
            }
            if !self.exchange_edges.iter().any(|e| e.source == source && e.target == target) {
                return Err(MovementError::IllegalAction(format!(
                    "no exchange edge from {source} to {target}"
                )));
            }
            next.active.remove(&source);
        }
        next.active.insert(target);
        let doomed: Vec<usize> = next
            .active
            .iter()
            .copied()
            .filter(|&v| {
                self.hyper_in[v].iter().any(|h| {
                    h.weight_based && h.sources.iter().all(|&s| s != v && next.contains(s))
                })
            })
            .collect();
        for v in doomed {
            next.active.remove(&v);
        }
        Ok(next)
    }

    /// All currently legal actions.
    pub fn legal_actions(&self, m: &MarkingState) -> Vec<Action> {
        let mut out = Vec::new();
        for &g in &self.generators {
            if !m.contains(g) && self.undominated(m, g) {
                out.push(Action::CreateAt { vertex: g });
            }
        }
        for e in &self.exchange_edges {
            if m.contains(e.source) && !m.contains(e.target) && self.undominated(m, e.target) {
                out.push(Action::MoveAlong { source: e.source, target: e.target });
            }
        }
        out.sort();
        out.dedup();
        out
    }

    /// Forward search from every unmarked undominated generator along
    /// exchange edges; a vertex qualifies when it is unmarked and
    /// undominated given the existing marks plus a mark on the edge's
    /// source. Paths are full vertex sequences starting at the generator.
    pub fn reachable_positions(
        &self,
        m: &MarkingState,
    ) -> BTreeMap<usize, Vec<(usize, Vec<usize>)>> {
        let mut result = BTreeMap::new();
        for &g in &self.generators {
            if m.contains(g) || !self.undominated(m, g) {
                continue;
            }
            let mut found: Vec<(usize, Vec<usize>)> = vec![(g, vec![g])];
            let mut seen: BTreeSet<usize> = [g].into_iter().collect();
            let mut queue: Vec<(usize, Vec<usize>)> = vec![(g, vec![g])];
            while let Some((at, path)) = queue.pop() {
                for &ei in &self.out_edges[at] {
                    let edge = &self.exchange_edges[ei];
                    let t = edge.target;
                    if seen.contains(&t) || m.contains(t) {
                        continue;
                    }
                    let mut probe = m.clone();
                    probe.active.insert(at);
                    if !self.undominated(&probe, t) {
                        continue;
                    }
                    let mut next_path = path.clone();
                    next_path.push(t);
                    seen.insert(t);
                    found.push((t, next_path.clone()));
                    queue.push((t, next_path));
                }
            }
            found.sort();
            result.insert(g, found);
        }
        result
    }

    /// DOT rendering. Default styling: solid exchange edges, dashed
    /// domination hyperedges; `invert` swaps the two (the appendix figures
    /// use the inverted convention).
    pub fn to_dot(&self, invert: bool) -> String {
        let (gen_style, dom_style) = if invert { ("dashed", "solid") } else { ("solid", "dashed") };
        let mut out = String::from("digraph movement {\n");
        for v in 0..self.num_vertices() {
            let shape = if self.generators.contains(&v) { "doublecircle" } else { "circle" };
            out.push_str(&format!(
                "  v{v} [label=\"C{v}:{}\", shape={shape}];\n",
                self.weights[v]
            ));
        }
        for e in &self.exchange_edges {
            out.push_str(&format!(
                "  v{} -> v{} [style={gen_style}, label=\"t{}\"];\n",
                e.source, e.target, e.rule
            ));
        }
        let mut group = 0usize;
        for edges in &self.hyper_in {
            for h in edges {
                if h.weight_based {
                    out.push_str(&format!(
                        "  v{} -> v{} [style={dom_style}, color=gray];\n",
                        h.sources[0], h.target
                    ));
                } else {
                    for s in &h.sources {
                        out.push_str(&format!(
                            "  v{s} -> v{} [style={dom_style}, label=\"d{group}\"];\n",
                            h.target
                        ));
                    }
                    group += 1;
                }
            }
        }
        out.push_str("}\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances;
    use crate::matching::{Edge, MatchingInstance, Variant};
    use crate::weight::Weight;
    use std::collections::{BTreeMap, BTreeSet};

    #[test]
    fn rejects_inconsistent_specs() {
        let (spec, _) = instances::gen_cycle_example();
        assert!(matches!(
            MovementGraph::build(&spec),
            Err(MovementError::InconsistentSpec(_))
        ));
        let (spec, _) = instances::gen_exponential_chain(2);
        assert!(matches!(
            MovementGraph::build(&spec),
            Err(MovementError::InconsistentSpec(_))
        ));
    }

    #[test]
    fn social_embedding_has_no_exchange_edges() {
        let inst = MatchingInstance {
            vertices: 4,
            edges: vec![
                Edge::correlated(0, 1, Weight::from_int(1)),
                Edge::correlated(1, 2, Weight::from_int(2)),
                Edge::correlated(2, 3, Weight::from_int(3)),
            ],
            links: [(0, 1), (2, 3)].into_iter().collect(),
            alphas: BTreeMap::new(),
            variant: Variant::Social,
            k: 1,
            lookahead: 2,
            bipartition: None,
            preferences: None,
            considerate_symmetric: true,
        };
        let (spec, _) = inst.embed().unwrap();
        let g = MovementGraph::build(&spec).unwrap();
        assert!(g.exchange_edges.is_empty());
        assert_eq!(g.generators, [0, 2].into_iter().collect());
        // each generator reaches only itself
        let empty = Structure::empty();
        let reached = g.reachable_positions(&empty);
        assert_eq!(reached[&0], vec![(0, vec![0])]);
        assert_eq!(reached[&2], vec![(2, vec![2])]);
    }

    #[test]
    fn local_path_embedding_edges_increase_in_weight() {
        // path of increasing-benefit edges; links {0,2} and {1,3} make each
        // next edge accessible from the previous matching edge
        let inst = MatchingInstance {
            vertices: 4,
            edges: vec![
                Edge::correlated(0, 1, Weight::from_int(1)),
                Edge::correlated(1, 2, Weight::from_int(2)),
                Edge::correlated(2, 3, Weight::from_int(3)),
            ],
            links: [(0, 1), (0, 2), (1, 3)].into_iter().collect(),
            alphas: BTreeMap::new(),
            variant: Variant::Local,
            k: 1,
            lookahead: 2,
            bipartition: None,
            preferences: None,
            considerate_symmetric: true,
        };
        let (spec, _) = inst.embed().unwrap();
        let g = MovementGraph::build(&spec).unwrap();
        for e in &g.exchange_edges {
            assert!(g.weights[e.source] < g.weights[e.target]);
        }
        // T1 rules exist in both directions over shared vertices, but only
        // the weight-increasing ones become edges: 0->1 and 1->2
        let pairs: BTreeSet<(usize, usize)> =
            g.exchange_edges.iter().map(|e| (e.source, e.target)).collect();
        assert_eq!(pairs, [(0, 1), (1, 2)].into_iter().collect());
    }

    #[test]
    fn fully_marked_domination_source_blocks_target() {
        use crate::game::{Coalition, GameSpec, Rule};
        let spec = GameSpec {
            agents: 4,
            coalitions: vec![
                Coalition::new(0, vec![0, 1], Weight::from_int(1)),
                Coalition::new(1, vec![1, 2, 3], Weight::from_int(2)),
            ],
            self_generating: [0, 1].into_iter().collect(),
            generation_rules: Vec::new(),
            domination_rules: vec![Rule::new(vec![1], 0)],
            include_weight_domination: true,
        };
        let g = MovementGraph::build(&spec).unwrap();
        let empty = Structure::empty();
        assert!(g.undominated(&empty, 0));
        let marked = Structure::from_ids([1]);
        assert!(!g.undominated(&marked, 0));
        assert!(matches!(
            g.step(&marked, Action::CreateAt { vertex: 0 }),
            Err(MovementError::IllegalAction(_))
        ));
    }

    fn chain_fragment() -> GameSpec {
        // consistent slice of the gadget shape: C2={1,3}:2, C3={3,4,5}:4,
        // C4={4,6}:3, one generation rule C2 -> C3
        use crate::game::{Coalition, GameSpec, Rule};
        GameSpec {
            agents: 7,
            coalitions: vec![
                Coalition::new(0, vec![1, 3], Weight::from_int(2)),
                Coalition::new(1, vec![3, 4, 5], Weight::from_int(4)),
                Coalition::new(2, vec![4, 6], Weight::from_int(3)),
            ],
            self_generating: [0, 2].into_iter().collect(),
            generation_rules: vec![Rule::new(vec![0], 1)],
            domination_rules: Vec::new(),
            include_weight_domination: true,
        }
    }

    #[test]
    fn create_on_empty_marking_has_no_deletions() {
        let g = MovementGraph::build(&chain_fragment()).unwrap();
        let m = g.step(&Structure::empty(), Action::CreateAt { vertex: 0 }).unwrap();
        assert_eq!(m, Structure::from_ids([0]));
    }

    #[test]
    fn step_mirrors_game_resolve() {
        let spec = chain_fragment();
        let g = MovementGraph::build(&spec).unwrap();
        // C2 and C4 marked; moving to C3 deletes both via weight domination
        let m = Structure::from_ids([0, 2]);
        let next = g.step(&m, Action::MoveAlong { source: 0, target: 1 }).unwrap();
        assert_eq!(next, Structure::from_ids([1]));
        let (resolved, _) = spec.resolve(&m, 1).unwrap();
        assert_eq!(next, resolved);
        // the same legality menu the game sees
        assert_eq!(
            g.legal_actions(&m),
            vec![Action::MoveAlong { source: 0, target: 1 }]
        );
    }
}
