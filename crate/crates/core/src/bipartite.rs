//! Two-phase convergence for bipartite instances with general preferences:
//! Phase 1 resolves only blocking pairs whose W-endpoint is matched, Phase 2
//! repeatedly gives an unmatched W-vertex its most preferred blocking pair.
//! Terminates in at most 2·|U|·|W| steps with a variant-stable matching.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::matching::{EdgeId, Matching, MatchingInstance, Variant, VertexId};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchStep {
    pub edge: EdgeId,
    pub removed: BTreeSet<EdgeId>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MatchTrace {
    pub steps: Vec<MatchStep>,
}

impl MatchTrace {
    pub fn replay(&self, inst: &MatchingInstance, m0: &Matching) -> Option<Matching> {
        let mut m = m0.clone();
        for step in &self.steps {
            let (next, removed) = inst.resolve_pair(&m, step.edge).ok()?;
            if removed != step.removed {
                return None;
            }
            m = next;
        }
        Some(m)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BipartiteError {
    #[error("instance has no bipartition")]
    NotBipartite,
    #[error("two-phase convergence requires k = 1, instance has k = {0}")]
    ManyToMany(usize),
    #[error("locally stable matching admits no convergence guarantee with general preferences")]
    UnsupportedVariant,
    #[error("considerate convergence requires no links inside W; found {{{0}, {1}}}")]
    LinkInsideW(VertexId, VertexId),
    #[error("friendship convergence requires alpha > 0 only inside U; found alpha({0}, {1}) > 0")]
    AlphaOutsideU(VertexId, VertexId),
    #[error("start matching is infeasible: {0}")]
    InfeasibleStart(String),
    #[error("phase invariant violated after {0} steps; this is a bug")]
    InvariantViolated(usize),
}

fn check_preconditions(inst: &MatchingInstance) -> Result<(&[VertexId], &[VertexId]), BipartiteError> {
    let (us, ws) = inst.bipartition.as_ref().ok_or(BipartiteError::NotBipartite)?;
    if inst.k != 1 {
        return Err(BipartiteError::ManyToMany(inst.k));
    }
    if inst.variant == Variant::Local {
        return Err(BipartiteError::UnsupportedVariant);
    }
    let w_set: BTreeSet<VertexId> = ws.iter().copied().collect();
    if inst.variant == Variant::Considerate {
        for &(a, b) in &inst.links {
            if w_set.contains(&a) && w_set.contains(&b) {
                return Err(BipartiteError::LinkInsideW(a, b));
            }
        }
    }
    if inst.variant == Variant::Friendship {
        let u_set: BTreeSet<VertexId> = us.iter().copied().collect();
        for (&(a, b), v) in &inst.alphas {
            if v.is_positive() && !(u_set.contains(&a) && u_set.contains(&b)) {
                return Err(BipartiteError::AlphaOutsideU(a, b));
            }
        }
    }
    Ok((us, ws))
}

/// The §4 algorithm (Theorems 5-7).
pub fn two_phase_converge(
    inst: &MatchingInstance,
    m0: &Matching,
) -> Result<MatchTrace, BipartiteError> {
    let (us, ws) = check_preconditions(inst)?;
    inst.check_feasible(m0)
        .map_err(|e| BipartiteError::InfeasibleStart(e.to_string()))?;
    let w_set: BTreeSet<VertexId> = ws.iter().copied().collect();
    let w_of = |e: EdgeId| {
        let edge = &inst.edges[e];
        if w_set.contains(&edge.u) {
            edge.u
        } else {
            edge.v
        }
    };
    let u_of = |e: EdgeId| {
        let edge = &inst.edges[e];
        if w_set.contains(&edge.u) {
            edge.v
        } else {
            edge.u
        }
    };
    let cap = 2 * us.len() * ws.len();
    let mut m = m0.clone();
    let mut steps = Vec::new();
    // Phase 1: only pairs whose w is matched; lexicographic (w, u)
    loop {
        let pick = inst
            .blocking_pairs(&m)
            .into_iter()
            .filter(|&e| !inst.matched_edges(&m, w_of(e)).is_empty())
            .min_by_key(|&e| (w_of(e), u_of(e)));
        match pick {
            None => break,
            Some(e) => {
                let (next, removed) = inst
                    .resolve_pair(&m, e)
                    .expect("scanner returned a blocking pair");
                steps.push(MatchStep { edge: e, removed });
                m = next;
                if steps.len() > cap {
                    return Err(BipartiteError::InvariantViolated(steps.len()));
                }
            }
        }
    }
    // Phase 2: unmatched w, its most preferred blocking pair
    loop {
        let blocking = inst.blocking_pairs(&m);
        let w = blocking
            .iter()
            .map(|&e| w_of(e))
            .filter(|&w| inst.matched_edges(&m, w).is_empty())
            .min();
        let Some(w) = w else {
            if blocking.is_empty() {
                break;
            }
            // a matched w still blocks: the phase invariant failed
            return Err(BipartiteError::InvariantViolated(steps.len()));
        };
        let candidates: Vec<EdgeId> =
            blocking.iter().copied().filter(|&e| w_of(e) == w).collect();
        let best = if inst.variant == Variant::Friendship {
            // largest perceived welfare for w after resolving
            candidates
                .into_iter()
                .max_by(|&a, &b| {
                    let pa = inst
                        .perceived_utility(&inst.resolve_pair(&m, a).unwrap().0, w)
                        .unwrap();
                    let pb = inst
                        .perceived_utility(&inst.resolve_pair(&m, b).unwrap().0, w)
                        .unwrap();
                    pa.cmp(&pb).then(u_of(b).cmp(&u_of(a)))
                })
                .unwrap()
        } else if let Some(prefs) = &inst.preferences {
            candidates
                .into_iter()
                .min_by_key(|&e| (prefs.rank(w, e).unwrap_or(usize::MAX), u_of(e)))
                .unwrap()
        } else {
            candidates
                .into_iter()
                .max_by(|&a, &b| {
                    inst.edges[a]
                        .benefit_for(w)
                        .cmp(&inst.edges[b].benefit_for(w))
                        .then(u_of(b).cmp(&u_of(a)))
                })
                .unwrap()
        };
        let (next, removed) = inst
            .resolve_pair(&m, best)
            .expect("scanner returned a blocking pair");
        steps.push(MatchStep { edge: best, removed });
        m = next;
        if steps.len() > cap {
            return Err(BipartiteError::InvariantViolated(steps.len()));
        }
    }
    debug_assert!(inst.is_stable(&m));
    Ok(MatchTrace { steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances;
    use crate::matching::Edge;
    use crate::weight::Weight;
    use std::collections::BTreeMap;

    fn simple(variant: Variant) -> MatchingInstance {
        MatchingInstance {
            vertices: 4,
            edges: vec![
                Edge::correlated(0, 2, Weight::from_int(2)),
                Edge::correlated(0, 3, Weight::from_int(1)),
                Edge::correlated(1, 2, Weight::from_int(3)),
            ],
            links: BTreeSet::new(),
            alphas: BTreeMap::new(),
            variant,
            k: 1,
            lookahead: 2,
            bipartition: Some((vec![0, 1], vec![2, 3])),
            preferences: None,
            considerate_symmetric: true,
        }
    }

    #[test]
    fn plain_two_phase_reaches_stability() {
        let inst = simple(Variant::Plain);
        let trace = two_phase_converge(&inst, &Matching::empty()).unwrap();
        let end = trace.replay(&inst, &Matching::empty()).unwrap();
        assert!(inst.is_stable(&end));
        assert!(trace.steps.len() <= 2 * 2 * 2);
        // stable start gives an empty trace
        let again = two_phase_converge(&inst, &end).unwrap();
        assert!(again.steps.is_empty());
    }

    #[test]
    fn preconditions_are_enforced() {
        let mut inst = simple(Variant::Considerate);
        inst.links.insert((2, 3));
        assert!(matches!(
            two_phase_converge(&inst, &Matching::empty()),
            Err(BipartiteError::LinkInsideW(2, 3))
        ));
        let mut inst = simple(Variant::Friendship);
        inst.alphas.insert((0, 2), Weight::new(1, 2));
        assert!(matches!(
            two_phase_converge(&inst, &Matching::empty()),
            Err(BipartiteError::AlphaOutsideU(0, 2))
        ));
        let mut inst = simple(Variant::Plain);
        inst.bipartition = None;
        assert!(matches!(
            two_phase_converge(&inst, &Matching::empty()),
            Err(BipartiteError::NotBipartite)
        ));
        let mut inst = simple(Variant::Local);
        inst.k = 1;
        assert!(matches!(
            two_phase_converge(&inst, &Matching::empty()),
            Err(BipartiteError::UnsupportedVariant)
        ));
    }

    #[test]
    fn random_bipartite_instances_converge() {
        for variant in [Variant::Plain, Variant::Social, Variant::Considerate, Variant::Friendship]
        {
            for seed in 0..30 {
                let inst = instances::gen_random_bipartite(4, 4, variant, seed);
                let m0 = instances::gen_random_matching_state(&inst, seed ^ 0x5eed);
                let trace = two_phase_converge(&inst, &m0).unwrap();
                let end = trace.replay(&inst, &m0).unwrap();
                assert!(inst.is_stable(&end), "{variant:?} seed {seed}");
                assert!(trace.steps.len() <= 2 * 4 * 4);
            }
        }
    }
}
