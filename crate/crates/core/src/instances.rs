//! Instance factory: the worked examples from the theory (exponential
//! chain, domination cycle, the 3-SAT reachability reduction) plus seeded
//! random families used for testing.

use std::collections::{BTreeMap, BTreeSet};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::game::{Coalition, GameSpec, Rule, Structure};
use crate::matching::{
    Edge, Matching, MatchingInstance, PreferenceTable, Variant, VertexId,
};
use crate::weight::Weight;

/// Three mutually disjoint coalitions whose stored domination rules form a
/// cycle: every structure has a blocking coalition, so improvement
/// sequences cycle forever. The rule set is deliberately inconsistent.
pub fn gen_cycle_example() -> (GameSpec, Structure) {
    let one = Weight::from_int(1);
    let spec = GameSpec {
        agents: 6,
        coalitions: vec![
            Coalition::new(0, vec![0, 1], one),
            Coalition::new(1, vec![2, 3], one),
            Coalition::new(2, vec![4, 5], one),
        ],
        self_generating: [0, 1, 2].into_iter().collect(),
        generation_rules: Vec::new(),
        domination_rules: vec![
            Rule::new(vec![0], 1),
            Rule::new(vec![1], 2),
            Rule::new(vec![2], 0),
        ],
        include_weight_domination: true,
    };
    (spec, Structure::from_ids([0]))
}

/// Coalition id of `C_{j,i}` (gadget `i` from 1, coalition `j` in 1..=6) in
/// the exponential chain.
pub fn expchain_coalition_id(i: usize, j: usize) -> usize {
    6 * (i - 1) + (j - 1)
}

/// Chain of `k` gadgets with a deterministic improvement sequence of length
/// `Omega(2^k)`: gadget `i` must be re-run once for every completion of
/// gadget `i+1`. Starts from `{C_{4,k}}`.
pub fn gen_exponential_chain(k: usize) -> (GameSpec, Structure) {
    assert!(k >= 1);
    let agent = |i: usize, j: usize| 8 * (i - 1) + j;
    let mut coalitions = Vec::with_capacity(6 * k);
    let mut generation_rules = Vec::new();
    for i in 1..=k {
        let members: [Vec<usize>; 6] = [
            vec![agent(i, 0), agent(i, 1), agent(i, 2)],
            vec![agent(i, 1), agent(i, 3)],
            vec![agent(i, 3), agent(i, 4), agent(i, 5)],
            vec![agent(i, 4), agent(i, 6)],
            vec![agent(i, 2), agent(i, 6), agent(i, 7)],
            vec![agent(i, 5), agent(i, 7), agent(i, 8)],
        ];
        let x = 5 * (i as i64 - 1);
        let offsets = [1, 2, 4, 3, 2, 5];
        for (j, m) in members.into_iter().enumerate() {
            coalitions.push(Coalition::new(
                expchain_coalition_id(i, j + 1),
                m,
                Weight::from_int(x + offsets[j]),
            ));
        }
        let id = |j: usize| expchain_coalition_id(i, j);
        generation_rules.push(Rule::new(vec![id(1)], id(2)));
        generation_rules.push(Rule::new(vec![id(1)], id(5)));
        generation_rules.push(Rule::new(vec![id(2)], id(3)));
        if i == 1 {
            generation_rules.push(Rule::new(vec![id(3)], id(1)));
            generation_rules.push(Rule::new(vec![id(4)], id(1)));
        } else {
            generation_rules.push(Rule::new(vec![id(3)], expchain_coalition_id(i - 1, 4)));
            generation_rules.push(Rule::new(vec![id(4)], expchain_coalition_id(i - 1, 4)));
            generation_rules.push(Rule::new(
                vec![expchain_coalition_id(i - 1, 6)],
                id(1),
            ));
        }
        generation_rules.push(Rule::new(vec![id(5)], id(6)));
    }
    let spec = GameSpec {
        agents: 8 * k + 1,
        coalitions,
        self_generating: BTreeSet::new(),
        generation_rules,
        domination_rules: Vec::new(),
        include_weight_domination: true,
    };
    (spec, Structure::from_ids([expchain_coalition_id(k, 4)]))
}

/// Seeded random consistent game: distinct half-integer weights, coalitions
/// of 2-3 agents, weight-increasing overlapping generation rules and
/// overlapping single-precondition domination rules sampled with the given
/// density.
pub fn gen_random_consistent(
    agents: usize,
    num_coalitions: usize,
    density: f64,
    seed: u64,
) -> GameSpec {
    assert!(agents >= 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut numerators: Vec<i64> = (1..=3 * num_coalitions as i64).collect();
    numerators.shuffle(&mut rng);
    let mut coalitions = Vec::with_capacity(num_coalitions);
    for id in 0..num_coalitions {
        let size = rng.gen_range(2..=3.min(agents));
        let mut members: Vec<usize> = (0..agents).collect();
        members.shuffle(&mut rng);
        members.truncate(size);
        coalitions.push(Coalition::new(id, members, Weight::new(numerators[id], 2)));
    }
    let self_generating = (0..num_coalitions)
        .filter(|_| rng.gen_bool(0.5))
        .collect();
    let overlaps = |a: usize, b: usize| coalitions[a].overlaps(&coalitions[b]);
    let mut generation_rules = Vec::new();
    let mut domination_rules = Vec::new();
    for a in 0..num_coalitions {
        for b in 0..num_coalitions {
            if a == b || !overlaps(a, b) {
                continue;
            }
            if coalitions[a].weight < coalitions[b].weight && rng.gen_bool(density) {
                generation_rules.push(Rule::new(vec![a], b));
            }
            if rng.gen_bool(density / 2.0) {
                let mut pre = vec![a];
                if num_coalitions > 2 && rng.gen_bool(0.3) {
                    let extra = rng.gen_range(0..num_coalitions);
                    if extra != a && extra != b {
                        pre.push(extra);
                    }
                }
                domination_rules.push(Rule::new(pre, b));
            }
        }
    }
    GameSpec {
        agents,
        coalitions,
        self_generating,
        generation_rules,
        domination_rules,
        include_weight_domination: true,
    }
}

/// Greedy random feasible structure for a spec.
pub fn gen_random_structure(spec: &GameSpec, seed: u64) -> Structure {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids: Vec<usize> = (0..spec.coalitions.len()).collect();
    ids.shuffle(&mut rng);
    let mut s = Structure::empty();
    for id in ids {
        if !rng.gen_bool(0.5) {
            continue;
        }
        let mut trial = s.clone();
        trial.active.insert(id);
        if spec.check_feasible(&trial).is_ok() {
            s = trial;
        }
    }
    s
}

/// A CNF formula with at most three literals per clause. Literals are
/// 1-based DIMACS style: `3` is variable 3, `-3` its negation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CnfFormula {
    pub num_vars: usize,
    pub clauses: Vec<Vec<i64>>,
}

#[derive(Debug, thiserror::Error)]
pub enum CnfError {
    #[error("missing DIMACS header line `p cnf <vars> <clauses>`")]
    MissingHeader,
    #[error("malformed DIMACS token: {0}")]
    BadToken(String),
    #[error("literal {0} is out of range for {1} variables")]
    LiteralOutOfRange(i64, usize),
    #[error("clause #{0} has {1} literals; 1 to 3 are supported")]
    BadClauseSize(usize, usize),
    #[error("expected {expected} clauses, found {found}")]
    ClauseCountMismatch { expected: usize, found: usize },
}

impl CnfFormula {
    pub fn new(num_vars: usize, clauses: Vec<Vec<i64>>) -> Result<Self, CnfError> {
        let formula = CnfFormula { num_vars, clauses };
        formula.check()?;
        Ok(formula)
    }

    fn check(&self) -> Result<(), CnfError> {
        for (j, clause) in self.clauses.iter().enumerate() {
            if clause.is_empty() || clause.len() > 3 {
                return Err(CnfError::BadClauseSize(j + 1, clause.len()));
            }
            for &lit in clause {
                if lit == 0 || lit.unsigned_abs() as usize > self.num_vars {
                    return Err(CnfError::LiteralOutOfRange(lit, self.num_vars));
                }
            }
        }
        Ok(())
    }

    /// Parses DIMACS CNF text.
    pub fn parse_dimacs(text: &str) -> Result<Self, CnfError> {
        let mut num_vars = None;
        let mut expected_clauses = 0usize;
        let mut clauses = Vec::new();
        let mut current = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('c') {
                continue;
            }
            if line.starts_with('p') {
                let fields: Vec<&str> = line.split_whitespace().collect();
                if fields.len() != 4 || fields[1] != "cnf" {
                    return Err(CnfError::BadToken(line.to_string()));
                }
                num_vars = Some(
                    fields[2]
                        .parse::<usize>()
                        .map_err(|_| CnfError::BadToken(fields[2].to_string()))?,
                );
                expected_clauses = fields[3]
                    .parse::<usize>()
                    .map_err(|_| CnfError::BadToken(fields[3].to_string()))?;
                continue;
            }
            if num_vars.is_none() {
                return Err(CnfError::MissingHeader);
            }
            for token in line.split_whitespace() {
                let lit: i64 = token
                    .parse()
                    .map_err(|_| CnfError::BadToken(token.to_string()))?;
                if lit == 0 {
                    clauses.push(std::mem::take(&mut current));
                } else {
                    current.push(lit);
                }
            }
        }
        let num_vars = num_vars.ok_or(CnfError::MissingHeader)?;
        if !current.is_empty() {
            clauses.push(current);
        }
        if clauses.len() != expected_clauses {
            return Err(CnfError::ClauseCountMismatch {
                expected: expected_clauses,
                found: clauses.len(),
            });
        }
        CnfFormula::new(num_vars, clauses)
    }
}

/// Which matching setting the reachability reduction targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SatVariant {
    Social,
    Local,
    Considerate,
    Friendship,
    /// Plain correlated preferences with ties.
    CorrelatedTies,
    /// Plain strict (possibly uncorrelated) preferences via explicit lists.
    StrictPreferences,
}

impl std::str::FromStr for SatVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "social" => Ok(SatVariant::Social),
            "local" => Ok(SatVariant::Local),
            "considerate" => Ok(SatVariant::Considerate),
            "friendship" => Ok(SatVariant::Friendship),
            "ties" => Ok(SatVariant::CorrelatedTies),
            "strict" => Ok(SatVariant::StrictPreferences),
            other => Err(format!(
                "unknown reduction variant {other:?} (expected one of \
                 social, local, considerate, friendship, ties, strict)"
            )),
        }
    }
}

/// Output of the reachability reduction: the matching `m_star` is reachable
/// from `m0` by improvement steps iff the formula is satisfiable.
#[derive(Clone, Debug)]
pub struct SatReduction {
    pub instance: MatchingInstance,
    pub m0: Matching,
    pub m_star: Matching,
}

/// Reduction from 3-SAT to improvement-sequence reachability: a central
/// double-edge gadget per variable, a clause vertex per clause connected to
/// its literals' w-vertices, plus a per-variant clause gadget forcing every
/// clause vertex to get matched centrally at least once.
pub fn gen_sat_reduction(formula: &CnfFormula, variant: SatVariant) -> SatReduction {
    let k = formula.num_vars;
    let l = formula.clauses.len();
    // vertex layout
    let u_pos = |i: usize| i; // u_{x_i}
    let u_neg = |i: usize| k + i; // u_{!x_i}
    let x_c = |j: usize| 2 * k + j;
    let w_pos = |i: usize| 2 * k + l + i;
    let w_neg = |i: usize| 3 * k + l + i;
    let w_of_lit = |lit: i64| {
        let i = lit.unsigned_abs() as usize - 1;
        if lit > 0 {
            w_pos(i)
        } else {
            w_neg(i)
        }
    };
    let gadget_base = 4 * k + l;

    let mut edges = Vec::new();
    let push = |edges: &mut Vec<Edge>, u: usize, v: usize, num: i64, den: i64| -> usize {
        edges.push(Edge::correlated(u, v, Weight::new(num, den)));
        edges.len() - 1
    };
    let mut m0 = BTreeSet::new();
    let mut m_star = BTreeSet::new();
    // E3 first; duplicate literals in a clause keep the strongest position
    for (j, clause) in formula.clauses.iter().enumerate() {
        let mut best: BTreeMap<usize, i64> = BTreeMap::new();
        for (pos, &lit) in clause.iter().enumerate() {
            let b = (pos as i64 + 1) * l as i64 + (j as i64 + 1);
            let entry = best.entry(w_of_lit(lit)).or_insert(b);
            *entry = (*entry).max(b);
        }
        for (w, b) in best {
            push(&mut edges, x_c(j), w, b, 1);
        }
    }
    for i in 0..k {
        let base = 4 * l as i64;
        let i1 = i as i64 + 1;
        m0.insert(push(&mut edges, u_pos(i), w_neg(i), base + i1, 1));
        m0.insert(push(&mut edges, u_neg(i), w_pos(i), base + k as i64 + i1, 1));
        m_star.insert(push(&mut edges, u_pos(i), w_pos(i), base + 2 * k as i64 + i1, 1));
        m_star.insert(push(&mut edges, u_neg(i), w_neg(i), base + 3 * k as i64 + i1, 1));
    }

    let mut links = BTreeSet::new();
    let mut alphas = BTreeMap::new();
    let mut preferences: Option<PreferenceTable> = None;
    let mut u_side: Vec<VertexId> = (0..k).map(u_pos).chain((0..k).map(u_neg)).collect();
    u_side.extend((0..l).map(x_c));
    let mut w_side: Vec<VertexId> = (0..k).map(w_pos).chain((0..k).map(w_neg)).collect();

    let vertices;
    match variant {
        SatVariant::Social | SatVariant::Local => {
            // one unreachable partner y_{C_j} per clause, no links to it
            for j in 0..l {
                let y = gadget_base + j;
                w_side.push(y);
                m0.insert(push(&mut edges, x_c(j), y, j as i64 + 1, 1));
            }
            for &u in &u_side {
                for &w in &w_side[..2 * k] {
                    links.insert((u.min(w), u.max(w)));
                }
            }
            vertices = gadget_base + l;
        }
        SatVariant::Considerate => {
            for j in 0..l {
                let (y, yp) = (gadget_base + 2 * j, gadget_base + 2 * j + 1);
                w_side.push(y);
                w_side.push(yp);
                let j1 = j as i64 + 1;
                m0.insert(push(&mut edges, x_c(j), y, 2 * j1 - 1, 2));
                m_star.insert(push(&mut edges, x_c(j), yp, j1, 1));
                links.insert((y.min(yp), y.max(yp)));
            }
            vertices = gadget_base + 2 * l;
        }
        SatVariant::Friendship => {
            for j in 0..l {
                let (y, yp) = (gadget_base + 2 * j, gadget_base + 2 * j + 1);
                w_side.push(y);
                w_side.push(yp);
                let j1 = j as i64 + 1;
                m0.insert(push(&mut edges, x_c(j), y, 2 * j1 - 1, 2));
                m_star.insert(push(&mut edges, x_c(j), yp, j1, 1));
                // perceived value of the y-edge for x_C becomes exactly j
                alphas.insert((x_c(j), y), Weight::new(1, 2 * j1 - 1));
            }
            vertices = gadget_base + 2 * l;
        }
        SatVariant::CorrelatedTies => {
            for j in 0..l {
                let (y, yp) = (gadget_base + 2 * j, gadget_base + 2 * j + 1);
                w_side.push(y);
                w_side.push(yp);
                let j1 = j as i64 + 1;
                m0.insert(push(&mut edges, x_c(j), y, j1, 1));
                m_star.insert(push(&mut edges, x_c(j), yp, j1, 1));
            }
            vertices = gadget_base + 2 * l;
        }
        SatVariant::StrictPreferences => {
            let mut clause_edges = Vec::new();
            for j in 0..l {
                let xp = gadget_base + 3 * j;
                let y = gadget_base + 3 * j + 1;
                let yp = gadget_base + 3 * j + 2;
                u_side.push(xp);
                w_side.push(y);
                w_side.push(yp);
                let j1 = j as i64 + 1;
                let xy = push(&mut edges, x_c(j), y, 2 * j1 - 1, 2);
                let xyp = push(&mut edges, x_c(j), yp, j1, 1);
                let xpy = push(&mut edges, xp, y, j1, 1);
                let xpyp = push(&mut edges, xp, yp, 2 * j1 - 1, 2);
                m0.insert(xy);
                m0.insert(xpyp);
                m_star.insert(xyp);
                m_star.insert(xpy);
                clause_edges.push((xy, xyp, xpy, xpyp));
            }
            vertices = gadget_base + 3 * l;
            // strict lists: central edges by descending benefit, clause
            // gadget edges appended at the bottom in the stated order
            let mut groups: BTreeMap<VertexId, Vec<Vec<usize>>> = BTreeMap::new();
            for x in 0..vertices {
                let mut central: Vec<usize> = (0..edges.len())
                    .filter(|&e| edges[e].contains(x) && edges[e].u < gadget_base && edges[e].v < gadget_base)
                    .collect();
                central.sort_by(|&a, &b| edges[b].bu.cmp(&edges[a].bu));
                let ranked: Vec<Vec<usize>> = central.into_iter().map(|e| vec![e]).collect();
                if !ranked.is_empty() {
                    groups.insert(x, ranked);
                }
            }
            for (j, &(xy, xyp, xpy, xpyp)) in clause_edges.iter().enumerate() {
                let xp = gadget_base + 3 * j;
                let y = gadget_base + 3 * j + 1;
                let yp = gadget_base + 3 * j + 2;
                let bottom = groups.entry(x_c(j)).or_default();
                bottom.push(vec![xy]);
                bottom.push(vec![xyp]);
                groups.insert(xp, vec![vec![xpyp], vec![xpy]]);
                groups.insert(y, vec![vec![xpy], vec![xy]]);
                groups.insert(yp, vec![vec![xyp], vec![xpyp]]);
            }
            preferences = Some(PreferenceTable { groups });
        }
    }

    let instance = MatchingInstance {
        vertices,
        edges,
        links,
        alphas,
        variant: match variant {
            SatVariant::Social => Variant::Social,
            SatVariant::Local => Variant::Local,
            SatVariant::Considerate => Variant::Considerate,
            SatVariant::Friendship => Variant::Friendship,
            SatVariant::CorrelatedTies | SatVariant::StrictPreferences => Variant::Plain,
        },
        k: 1,
        lookahead: 2,
        bipartition: Some((u_side, w_side)),
        preferences,
        considerate_symmetric: true,
    };
    SatReduction {
        instance,
        m0: Matching::from_ids(m0),
        m_star: Matching::from_ids(m_star),
    }
}

/// Seeded random matching instance suitable for the embedding (correlated
/// benefits, symmetric alphas for friendship).
pub fn gen_random_matching(
    vertices: usize,
    variant: Variant,
    k: usize,
    seed: u64,
) -> MatchingInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..vertices {
        for v in u + 1..vertices {
            if rng.gen_bool(0.6) {
                let b = Weight::new(rng.gen_range(1..=10), *[1, 2].choose(&mut rng).unwrap());
                edges.push(Edge::correlated(u, v, b));
            }
        }
    }
    let mut links = BTreeSet::new();
    if matches!(variant, Variant::Social | Variant::Local | Variant::Considerate) {
        for u in 0..vertices {
            for v in u + 1..vertices {
                if rng.gen_bool(0.5) {
                    links.insert((u, v));
                }
            }
        }
    }
    let mut alphas = BTreeMap::new();
    if variant == Variant::Friendship {
        for u in 0..vertices {
            for v in u + 1..vertices {
                if rng.gen_bool(0.4) {
                    let a = Weight::new(rng.gen_range(1..=3), rng.gen_range(2..=4));
                    alphas.insert((u, v), a);
                    alphas.insert((v, u), a);
                }
            }
        }
    }
    MatchingInstance {
        vertices,
        edges,
        links,
        alphas,
        variant,
        k,
        lookahead: 2,
        bipartition: None,
        preferences: None,
        considerate_symmetric: true,
    }
}

/// Greedy random feasible matching for an instance.
pub fn gen_random_matching_state(inst: &MatchingInstance, seed: u64) -> Matching {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids: Vec<usize> = (0..inst.edges.len()).collect();
    ids.shuffle(&mut rng);
    let mut deg = vec![0usize; inst.vertices];
    let mut m = Matching::empty();
    for e in ids {
        if !rng.gen_bool(0.5) {
            continue;
        }
        let (u, v) = (inst.edges[e].u, inst.edges[e].v);
        if deg[u] < inst.k && deg[v] < inst.k {
            deg[u] += 1;
            deg[v] += 1;
            m.edges.insert(e);
        }
    }
    m
}

/// Seeded random bipartite instance for the two-phase convergence paths.
/// Non-friendship variants carry general preference lists (with ties and
/// unacceptable partners); friendship carries per-endpoint cardinal
/// benefits with alphas only inside U.
pub fn gen_random_bipartite(
    nu: usize,
    nw: usize,
    variant: Variant,
    seed: u64,
) -> MatchingInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vertices = nu + nw;
    let mut edges = Vec::new();
    for u in 0..nu {
        for w in nu..vertices {
            if rng.gen_bool(0.7) {
                let bu = Weight::new(rng.gen_range(1..=8), 1);
                let bv = Weight::new(rng.gen_range(1..=8), 1);
                edges.push(Edge::per_endpoint(u, w, bu, bv));
            }
        }
    }
    let mut links = BTreeSet::new();
    if variant == Variant::Social {
        for e in &edges {
            if rng.gen_bool(0.6) {
                links.insert((e.u, e.v));
            }
        }
    }
    if variant == Variant::Considerate {
        // arbitrary links except inside W
        for a in 0..vertices {
            for b in a + 1..vertices {
                if (a < nu || b < nu) && rng.gen_bool(0.3) {
                    links.insert((a, b));
                }
            }
        }
    }
    let mut alphas = BTreeMap::new();
    let preferences = if variant == Variant::Friendship {
        for u in 0..nu {
            for up in 0..nu {
                if u != up && rng.gen_bool(0.4) {
                    alphas.insert((u, up), Weight::new(rng.gen_range(1..=2), 3));
                }
            }
        }
        None
    } else {
        // random rankings with ties; a listed edge may be dropped to make
        // the partner unacceptable
        let mut groups: BTreeMap<VertexId, Vec<Vec<usize>>> = BTreeMap::new();
        for x in 0..vertices {
            let mut incident: Vec<usize> = (0..edges.len())
                .filter(|&e| edges[e].contains(x))
                .collect();
            incident.shuffle(&mut rng);
            let mut vertex_groups: Vec<Vec<usize>> = Vec::new();
            for e in incident {
                if rng.gen_bool(0.15) {
                    continue; // unacceptable
                }
                if !vertex_groups.is_empty() && rng.gen_bool(0.25) {
                    vertex_groups.last_mut().unwrap().push(e);
                } else {
                    vertex_groups.push(vec![e]);
                }
            }
            for group in &mut vertex_groups {
                group.sort_unstable();
            }
            if !vertex_groups.is_empty() {
                groups.insert(x, vertex_groups);
            }
        }
        Some(PreferenceTable { groups })
    };
    MatchingInstance {
        vertices,
        edges,
        links,
        alphas,
        variant,
        k: 1,
        lookahead: 2,
        bipartition: Some(((0..nu).collect(), (nu..vertices).collect())),
        preferences,
        considerate_symmetric: true,
    }
}
