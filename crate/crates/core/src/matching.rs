//! Matching instances, per-variant blocking semantics, and the embeddings
//! into coalition formation games with constraints.
//!
//! Variants: plain, socially stable (static link visibility), locally stable
//! (hop-distance lookahead in links plus matching), considerate (link-based
//! consideration of displaced partners), friendship (perceived utilities with
//! nonnegative care coefficients).

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::game::{Coalition, GameSpec, Rule, Structure};
use crate::weight::Weight;

pub type VertexId = usize;
pub type EdgeId = usize;

/// An undirected benefit-weighted edge in canonical `u < v` form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub u: VertexId,
    pub v: VertexId,
    pub bu: Weight,
    pub bv: Weight,
}

impl Edge {
    pub fn correlated(u: VertexId, v: VertexId, b: Weight) -> Self {
        Edge::per_endpoint(u, v, b, b)
    }

    pub fn per_endpoint(u: VertexId, v: VertexId, bu: Weight, bv: Weight) -> Self {
        if u <= v {
            Edge { u, v, bu, bv }
        } else {
            Edge { u: v, v: u, bu: bv, bv: bu }
        }
    }

    pub fn is_correlated(&self) -> bool {
        self.bu == self.bv
    }

    pub fn contains(&self, x: VertexId) -> bool {
        self.u == x || self.v == x
    }

    pub fn other(&self, x: VertexId) -> VertexId {
        if x == self.u {
            self.v
        } else {
            self.u
        }
    }

    pub fn benefit_for(&self, x: VertexId) -> Weight {
        if x == self.u {
            self.bu
        } else {
            self.bv
        }
    }
}

impl Serialize for Edge {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = serializer.serialize_map(None)?;
        map.serialize_entry("u", &self.u)?;
        map.serialize_entry("v", &self.v)?;
        if self.is_correlated() {
            map.serialize_entry("b", &self.bu)?;
        } else {
            map.serialize_entry("bu", &self.bu)?;
            map.serialize_entry("bv", &self.bv)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for Edge {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            u: VertexId,
            v: VertexId,
            #[serde(default)]
            b: Option<Weight>,
            #[serde(default)]
            bu: Option<Weight>,
            #[serde(default)]
            bv: Option<Weight>,
        }
        let r = Repr::deserialize(deserializer)?;
        match (r.b, r.bu, r.bv) {
            (Some(b), None, None) => Ok(Edge::correlated(r.u, r.v, b)),
            (None, Some(bu), Some(bv)) => Ok(Edge::per_endpoint(r.u, r.v, bu, bv)),
            _ => Err(serde::de::Error::custom(
                "edge needs either \"b\" or both \"bu\" and \"bv\"",
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Plain,
    Social,
    Local,
    Considerate,
    Friendship,
}

/// Per-vertex rankings over incident edges; inner groups are ties, best
/// group first. Edges absent from a vertex's table are unacceptable to it.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PreferenceTable {
    pub groups: BTreeMap<VertexId, Vec<Vec<EdgeId>>>,
}

impl PreferenceTable {
    /// Rank of `e` for `x` (0 = best group); `None` when unacceptable.
    pub fn rank(&self, x: VertexId, e: EdgeId) -> Option<usize> {
        self.groups
            .get(&x)?
            .iter()
            .position(|group| group.contains(&e))
    }

    /// Cardinal benefits induce a table with ties at equal benefit.
    pub fn from_benefits(inst: &MatchingInstance) -> Self {
        let mut groups = BTreeMap::new();
        for x in 0..inst.vertices {
            let mut incident: Vec<EdgeId> = (0..inst.edges.len())
                .filter(|&e| inst.edges[e].contains(x))
                .collect();
            incident.sort_by(|&a, &b| {
                inst.edges[b]
                    .benefit_for(x)
                    .cmp(&inst.edges[a].benefit_for(x))
                    .then(a.cmp(&b))
            });
            let mut vertex_groups: Vec<Vec<EdgeId>> = Vec::new();
            for e in incident {
                match vertex_groups.last_mut() {
                    Some(group)
                        if inst.edges[group[0]].benefit_for(x)
                            == inst.edges[e].benefit_for(x) =>
                    {
                        group.push(e)
                    }
                    _ => vertex_groups.push(vec![e]),
                }
            }
            if !vertex_groups.is_empty() {
                groups.insert(x, vertex_groups);
            }
        }
        PreferenceTable { groups }
    }
}

mod alpha_serde {
    use super::*;
    use serde::ser::SerializeSeq;

    pub fn serialize<S: serde::Serializer>(
        map: &BTreeMap<(VertexId, VertexId), Weight>,
        serializer: S,
    ) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(map.len()))?;
        for (&(u, v), w) in map {
            seq.serialize_element(&(u, v, *w))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> Result<BTreeMap<(VertexId, VertexId), Weight>, D::Error> {
        let triples: Vec<(VertexId, VertexId, Weight)> = Vec::deserialize(deserializer)?;
        Ok(triples.into_iter().map(|(u, v, w)| ((u, v), w)).collect())
    }
}

fn default_k() -> usize {
    1
}
fn default_lookahead() -> usize {
    2
}
fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchingInstance {
    pub vertices: usize,
    pub edges: Vec<Edge>,
    /// Social / visibility links, canonical unordered pairs.
    #[serde(default)]
    pub links: BTreeSet<(VertexId, VertexId)>,
    /// Friendship coefficients, keyed by ordered pair: `alphas[(u,v)]` is how
    /// much `u` cares about `v`. Missing entries are zero.
    #[serde(default, with = "alpha_serde")]
    pub alphas: BTreeMap<(VertexId, VertexId), Weight>,
    pub variant: Variant,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_lookahead")]
    pub lookahead: usize,
    #[serde(default)]
    pub bipartition: Option<(Vec<VertexId>, Vec<VertexId>)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preferences: Option<PreferenceTable>,
    /// Considerate accessibility checked from both endpoints (default) or
    /// only from the canonical first endpoint of the stored edge.
    #[serde(default = "default_true")]
    pub considerate_symmetric: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Matching {
    pub edges: BTreeSet<EdgeId>,
}

impl Matching {
    pub fn empty() -> Self {
        Matching::default()
    }

    pub fn from_ids<I: IntoIterator<Item = EdgeId>>(ids: I) -> Self {
        Matching { edges: ids.into_iter().collect() }
    }

    pub fn contains(&self, e: EdgeId) -> bool {
        self.edges.contains(&e)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum InstanceError {
    #[error("edge #{index} references vertex {vertex} but only {vertices} are declared")]
    VertexOutOfRange { index: usize, vertex: VertexId, vertices: usize },
    #[error("edge #{index} is a self-loop at vertex {vertex}")]
    SelfLoop { index: usize, vertex: VertexId },
    #[error("edge #{index} duplicates the vertex pair of edge #{first}")]
    DuplicateEdge { index: usize, first: usize },
    #[error("edge #{index} has a non-positive benefit")]
    NonPositiveBenefit { index: usize },
    #[error("negative friendship value for pair ({0}, {1})")]
    NegativeAlpha(VertexId, VertexId),
    #[error("k must be at least 1")]
    BadK,
    #[error("lookahead must be at least 2")]
    BadLookahead,
    #[error("friendship matching requires cardinal benefits, not preference lists")]
    FriendshipNeedsCardinal,
    #[error("preference table for vertex {vertex} lists non-incident edge {edge}")]
    NonIncidentPreference { vertex: VertexId, edge: EdgeId },
    #[error("bipartition does not cover vertex {0} exactly once")]
    BadBipartition(VertexId),
    #[error("edge #{index} does not cross the declared bipartition")]
    NonCrossingEdge { index: usize },
}

#[derive(Debug, thiserror::Error)]
pub enum MatchError {
    #[error("pair (edge {0}) is not a blocking pair of the given matching")]
    NotBlocking(EdgeId),
    #[error("matching is infeasible: vertex {vertex} is covered more than k={k} times")]
    OverCovered { vertex: VertexId, k: usize },
    #[error("matching references unknown edge {0}")]
    UnknownEdge(EdgeId),
    #[error("operation requires variant {expected:?}, instance has {found:?}")]
    WrongVariant { expected: Variant, found: Variant },
}

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("no consistent embedding exists for locally stable matching with {0}")]
    UnsupportedEmbedding(String),
    #[error("the friendship embedding requires symmetric alpha values; ({0}, {1}) is asymmetric")]
    AsymmetricAlpha(VertexId, VertexId),
    #[error("the embedding requires correlated benefits; edge {0} has per-endpoint benefits")]
    NotCorrelated(EdgeId),
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

/// How an endpoint accommodates a new edge: use a free slot, or displace a
/// strictly worse current partner.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Slot {
    Free,
    Drop(EdgeId),
}

impl MatchingInstance {
    pub fn alpha(&self, u: VertexId, v: VertexId) -> Weight {
        self.alphas.get(&(u, v)).copied().unwrap_or_else(Weight::zero)
    }

    pub fn has_link(&self, a: VertexId, b: VertexId) -> bool {
        self.links.contains(&(a.min(b), a.max(b)))
    }

    pub fn validate(&self) -> Result<(), InstanceError> {
        if self.k < 1 {
            return Err(InstanceError::BadK);
        }
        if self.lookahead < 2 {
            return Err(InstanceError::BadLookahead);
        }
        let mut seen: BTreeMap<(VertexId, VertexId), usize> = BTreeMap::new();
        for (index, e) in self.edges.iter().enumerate() {
            for x in [e.u, e.v] {
                if x >= self.vertices {
                    return Err(InstanceError::VertexOutOfRange {
                        index,
                        vertex: x,
                        vertices: self.vertices,
                    });
                }
            }
            if e.u == e.v {
                return Err(InstanceError::SelfLoop { index, vertex: e.u });
            }
            if let Some(&first) = seen.get(&(e.u, e.v)) {
                return Err(InstanceError::DuplicateEdge { index, first });
            }
            seen.insert((e.u, e.v), index);
            if !e.bu.is_positive() || !e.bv.is_positive() {
                return Err(InstanceError::NonPositiveBenefit { index });
            }
        }
        for (&(u, v), w) in &self.alphas {
            if *w < Weight::zero() {
                return Err(InstanceError::NegativeAlpha(u, v));
            }
        }
        if self.variant == Variant::Friendship && self.preferences.is_some() {
            return Err(InstanceError::FriendshipNeedsCardinal);
        }
        if let Some(prefs) = &self.preferences {
            for (&vertex, groups) in &prefs.groups {
                for group in groups {
                    for &edge in group {
                        if edge >= self.edges.len() || !self.edges[edge].contains(vertex) {
                            return Err(InstanceError::NonIncidentPreference { vertex, edge });
                        }
                    }
                }
            }
        }
        if let Some((us, ws)) = &self.bipartition {
            let mut side = vec![0u8; self.vertices];
            for &u in us {
                if u >= self.vertices || side[u] != 0 {
                    return Err(InstanceError::BadBipartition(u));
                }
                side[u] = 1;
            }
            for &w in ws {
                if w >= self.vertices || side[w] != 0 {
                    return Err(InstanceError::BadBipartition(w));
                }
                side[w] = 2;
            }
            if let Some(v) = side.iter().position(|&s| s == 0) {
                return Err(InstanceError::BadBipartition(v));
            }
            for (index, e) in self.edges.iter().enumerate() {
                if side[e.u] == side[e.v] {
                    return Err(InstanceError::NonCrossingEdge { index });
                }
            }
        }
        Ok(())
    }

    pub fn check_feasible(&self, m: &Matching) -> Result<(), MatchError> {
        let mut deg = vec![0usize; self.vertices];
        for &e in &m.edges {
            if e >= self.edges.len() {
                return Err(MatchError::UnknownEdge(e));
            }
            for x in [self.edges[e].u, self.edges[e].v] {
                deg[x] += 1;
                if deg[x] > self.k {
                    return Err(MatchError::OverCovered { vertex: x, k: self.k });
                }
            }
        }
        Ok(())
    }

    pub fn is_feasible(&self, m: &Matching) -> bool {
        self.check_feasible(m).is_ok()
    }

    pub fn matched_edges(&self, m: &Matching, x: VertexId) -> Vec<EdgeId> {
        m.edges
            .iter()
            .copied()
            .filter(|&e| self.edges[e].contains(x))
            .collect()
    }

    /// Sum of `x`'s matched-edge benefits (0 when unmatched).
    pub fn utility(&self, m: &Matching, x: VertexId) -> Weight {
        self.matched_edges(m, x)
            .into_iter()
            .map(|e| self.edges[e].benefit_for(x))
            .sum()
    }

    fn perceived(&self, m: &Matching, x: VertexId) -> Weight {
        let mut total = self.utility(m, x);
        for v in 0..self.vertices {
            if v != x {
                let a = self.alpha(x, v);
                if !a.is_zero() {
                    total = total + a * self.utility(m, v);
                }
            }
        }
        total
    }

    /// Perceived utility `B_p(M,x)`: own benefit plus alpha-weighted benefits
    /// of everyone else. Only defined for the friendship variant.
    pub fn perceived_utility(&self, m: &Matching, x: VertexId) -> Result<Weight, MatchError> {
        if self.variant != Variant::Friendship {
            return Err(MatchError::WrongVariant {
                expected: Variant::Friendship,
                found: self.variant,
            });
        }
        Ok(self.perceived(m, x))
    }

    /// Strictly prefers `a` over `b` from `x`'s point of view, using the
    /// preference table when present and cardinal benefits otherwise.
    fn prefers(&self, x: VertexId, a: EdgeId, b: EdgeId) -> bool {
        if let Some(prefs) = &self.preferences {
            match (prefs.rank(x, a), prefs.rank(x, b)) {
                (Some(ra), Some(rb)) => ra < rb,
                (Some(_), None) => true,
                _ => false,
            }
        } else {
            self.edges[a].benefit_for(x) > self.edges[b].benefit_for(x)
        }
    }

    fn acceptable(&self, x: VertexId, e: EdgeId) -> bool {
        match &self.preferences {
            Some(prefs) => prefs.rank(x, e).is_some(),
            None => true,
        }
    }

    /// Slot options for endpoint `x` taking on edge `e`, in canonical order:
    /// a free slot first, then current edges worst-first.
    fn slot_options(&self, m: &Matching, x: VertexId) -> Vec<Slot> {
        let mut current = self.matched_edges(m, x);
        current.sort_by(|&a, &b| {
            if let Some(prefs) = &self.preferences {
                // worst first: higher rank first, unlisted worst of all
                let ra = prefs.rank(x, a);
                let rb = prefs.rank(x, b);
                match (ra, rb) {
                    (None, None) => a.cmp(&b),
                    (None, Some(_)) => std::cmp::Ordering::Less,
                    (Some(_), None) => std::cmp::Ordering::Greater,
                    (Some(ra), Some(rb)) => rb.cmp(&ra).then(a.cmp(&b)),
                }
            } else {
                self.edges[a]
                    .benefit_for(x)
                    .cmp(&self.edges[b].benefit_for(x))
                    .then(a.cmp(&b))
            }
        });
        let mut slots = Vec::with_capacity(current.len() + 1);
        if current.len() < self.k {
            slots.push(Slot::Free);
        }
        slots.extend(current.into_iter().map(Slot::Drop));
        slots
    }

    /// Strict improvement for `x` if edge `e` fills the given slot.
    fn slot_improves(&self, x: VertexId, e: EdgeId, slot: Slot) -> bool {
        if !self.acceptable(x, e) {
            return false;
        }
        match slot {
            Slot::Free => true,
            Slot::Drop(old) => self.prefers(x, e, old),
        }
    }

    /// Considerate clause for endpoint `x` displacing the partner of `slot`
    /// in favour of `y`: blocked when the dropped partner is a friend of `x`
    /// or a friend of `y`.
    fn considerate_slot_allowed(&self, x: VertexId, y: VertexId, slot: Slot) -> bool {
        match slot {
            Slot::Free => true,
            Slot::Drop(old) => {
                let partner = self.edges[old].other(x);
                !(self.has_link(x, partner) || self.has_link(partner, y))
            }
        }
    }

    /// Hop distance between the endpoints of `e` in `(V, L ∪ M)` is at most
    /// the lookahead.
    fn locally_accessible(&self, m: &Matching, e: EdgeId) -> bool {
        let (src, dst) = (self.edges[e].u, self.edges[e].v);
        let mut adj: Vec<Vec<VertexId>> = vec![Vec::new(); self.vertices];
        for &(a, b) in &self.links {
            adj[a].push(b);
            adj[b].push(a);
        }
        for &me in &m.edges {
            let ed = &self.edges[me];
            adj[ed.u].push(ed.v);
            adj[ed.v].push(ed.u);
        }
        let mut dist = vec![usize::MAX; self.vertices];
        let mut queue = VecDeque::new();
        dist[src] = 0;
        queue.push_back(src);
        while let Some(x) = queue.pop_front() {
            if dist[x] >= self.lookahead {
                continue;
            }
            for &y in &adj[x] {
                if dist[y] == usize::MAX {
                    dist[y] = dist[x] + 1;
                    if y == dst {
                        return true;
                    }
                    queue.push_back(y);
                }
            }
        }
        dist[dst] <= self.lookahead
    }

    /// A valid slot for endpoint `x`: strict improvement plus, for the
    /// considerate variant, the link clause on the displaced partner.
    fn valid_slots(&self, m: &Matching, x: VertexId, e: EdgeId, considerate: bool) -> Vec<Slot> {
        let y = self.edges[e].other(x);
        self.slot_options(m, x)
            .into_iter()
            .filter(|&slot| {
                self.slot_improves(x, e, slot)
                    && (!considerate || self.considerate_slot_allowed(x, y, slot))
            })
            .collect()
    }

    fn friendship_blocking_slots(&self, m: &Matching, e: EdgeId) -> Option<(Slot, Slot)> {
        let (u, v) = (self.edges[e].u, self.edges[e].v);
        let bu = self.perceived(m, u);
        let bv = self.perceived(m, v);
        for &su in &self.slot_options(m, u) {
            for &sv in &self.slot_options(m, v) {
                let next = self.apply_slots(m, e, su, sv);
                if self.perceived(&next, u) > bu && self.perceived(&next, v) > bv {
                    return Some((su, sv));
                }
            }
        }
        None
    }

    fn apply_slots(&self, m: &Matching, e: EdgeId, su: Slot, sv: Slot) -> Matching {
        let mut next = m.clone();
        for slot in [su, sv] {
            if let Slot::Drop(old) = slot {
                next.edges.remove(&old);
            }
        }
        next.edges.insert(e);
        next
    }

    /// The slot pair `resolve_pair` would use for blocking edge `e`, if any.
    fn blocking_slots(&self, m: &Matching, e: EdgeId) -> Option<(Slot, Slot)> {
        if m.contains(e) {
            return None;
        }
        let (u, v) = (self.edges[e].u, self.edges[e].v);
        match self.variant {
            Variant::Friendship => self.friendship_blocking_slots(m, e),
            variant => {
                let accessible = match variant {
                    Variant::Plain | Variant::Considerate => true,
                    Variant::Social => self.has_link(u, v),
                    Variant::Local => self.locally_accessible(m, e),
                    Variant::Friendship => unreachable!(),
                };
                if !accessible {
                    return None;
                }
                let considerate_u = variant == Variant::Considerate;
                let considerate_v =
                    variant == Variant::Considerate && self.considerate_symmetric;
                let su = *self.valid_slots(m, u, e, considerate_u).first()?;
                let sv = *self.valid_slots(m, v, e, considerate_v).first()?;
                Some((su, sv))
            }
        }
    }

    pub fn is_blocking(&self, m: &Matching, e: EdgeId) -> bool {
        self.blocking_slots(m, e).is_some()
    }

    /// All blocking pairs of `m` under the instance's variant, as edge ids.
    pub fn blocking_pairs(&self, m: &Matching) -> BTreeSet<EdgeId> {
        (0..self.edges.len())
            .filter(|&e| self.is_blocking(m, e))
            .collect()
    }

    pub fn is_stable(&self, m: &Matching) -> bool {
        self.blocking_pairs(m).is_empty()
    }

    /// Resolves blocking pair `e`: inserts it and removes the displaced
    /// edges (one per endpoint at capacity, the worst eligible one).
    pub fn resolve_pair(
        &self,
        m: &Matching,
        e: EdgeId,
    ) -> Result<(Matching, BTreeSet<EdgeId>), MatchError> {
        let (su, sv) = self.blocking_slots(m, e).ok_or(MatchError::NotBlocking(e))?;
        let next = self.apply_slots(m, e, su, sv);
        let removed = m.edges.difference(&next.edges).copied().collect();
        Ok((next, removed))
    }

    /// Consistent embedding into a coalition formation game with constraints
    /// plus the matching/structure correspondence.
    pub fn embed(&self) -> Result<(GameSpec, StateMap), EmbedError> {
        self.validate()?;
        if let Some(e) = self.edges.iter().position(|e| !e.is_correlated()) {
            return Err(EmbedError::NotCorrelated(e));
        }
        if self.variant == Variant::Local {
            if self.k > 1 {
                return Err(EmbedError::UnsupportedEmbedding(format!("k = {}", self.k)));
            }
            if self.lookahead > 3 {
                return Err(EmbedError::UnsupportedEmbedding(format!(
                    "lookahead = {}",
                    self.lookahead
                )));
            }
        }
        if self.variant == Variant::Friendship {
            for (&(u, v), w) in &self.alphas {
                if self.alpha(v, u) != *w {
                    return Err(EmbedError::AsymmetricAlpha(u, v));
                }
            }
        }
        let map = StateMap { k: self.k, vertices: self.vertices, num_edges: self.edges.len() };
        let spec = if self.k == 1 {
            self.embed_k1(&map)
        } else {
            self.embed_many(&map)
        };
        Ok((spec, map))
    }

    fn coalition_weight(&self, e: EdgeId) -> Weight {
        let edge = &self.edges[e];
        match self.variant {
            Variant::Friendship => {
                let one = Weight::from_int(1);
                edge.bu * (one + self.alpha(edge.u, edge.v))
            }
            _ => edge.bu,
        }
    }

    fn link_distances(&self) -> Vec<Vec<usize>> {
        let mut adj: Vec<Vec<VertexId>> = vec![Vec::new(); self.vertices];
        for &(a, b) in &self.links {
            adj[a].push(b);
            adj[b].push(a);
        }
        (0..self.vertices)
            .map(|src| {
                let mut dist = vec![usize::MAX; self.vertices];
                let mut queue = VecDeque::new();
                dist[src] = 0;
                queue.push_back(src);
                while let Some(x) = queue.pop_front() {
                    for &y in &adj[x] {
                        if dist[y] == usize::MAX {
                            dist[y] = dist[x] + 1;
                            queue.push_back(y);
                        }
                    }
                }
                dist
            })
            .collect()
    }

    fn self_generating_edges(&self) -> BTreeSet<EdgeId> {
        match self.variant {
            Variant::Plain | Variant::Considerate | Variant::Friendship => {
                (0..self.edges.len()).collect()
            }
            Variant::Social => (0..self.edges.len())
                .filter(|&e| self.has_link(self.edges[e].u, self.edges[e].v))
                .collect(),
            Variant::Local => {
                let dist = self.link_distances();
                (0..self.edges.len())
                    .filter(|&e| dist[self.edges[e].u][self.edges[e].v] <= self.lookahead)
                    .collect()
            }
        }
    }

    /// Generation rules for the locally stable embedding. Lookahead 2 yields
    /// only single-matching-edge rules; lookahead 3 adds the two- and
    /// three-hop patterns, the last of which has two preconditions.
    fn local_generation_rules(&self) -> Vec<Rule> {
        let m = self.edges.len();
        let mut rules: BTreeSet<(Vec<EdgeId>, EdgeId)> = BTreeSet::new();
        for pre in 0..m {
            for target in 0..m {
                if pre == target {
                    continue;
                }
                let (pe, te) = (&self.edges[pre], &self.edges[target]);
                // one shared endpoint u, pre = {u,v}, target = {u,v'}, {v,v'} in L
                for u in [te.u, te.v] {
                    if pe.contains(u) {
                        let v = pe.other(u);
                        let vp = te.other(u);
                        if v != vp && self.has_link(v, vp) {
                            rules.insert((vec![pre], target));
                        }
                    }
                }
                if self.lookahead >= 3 {
                    // disjoint pre = {u,v}, target = {u',v'}, links {u',v},{u,v'}
                    if !pe.contains(te.u) && !pe.contains(te.v) {
                        let (u, v) = (pe.u, pe.v);
                        let (up, vp) = (te.u, te.v);
                        if (self.has_link(up, v) && self.has_link(u, vp))
                            || (self.has_link(up, u) && self.has_link(v, vp))
                        {
                            rules.insert((vec![pre], target));
                        }
                    }
                }
            }
        }
        if self.lookahead >= 3 {
            // two matching edges {u',v}, {u,v'} plus link {u',v'} make {u,v}
            // accessible: two-coalition precondition.
            for target in 0..m {
                let te = &self.edges[target];
                let (u, v) = (te.u, te.v);
                for p1 in 0..m {
                    for p2 in 0..m {
                        if p1 == target || p2 == target || p1 == p2 {
                            continue;
                        }
                        let (e1, e2) = (&self.edges[p1], &self.edges[p2]);
                        if !e1.contains(v) || e1.contains(u) || !e2.contains(u) || e2.contains(v) {
                            continue;
                        }
                        let up = e1.other(v);
                        let vp = e2.other(u);
                        if self.has_link(up, vp) {
                            let mut pre = vec![p1, p2];
                            pre.sort_unstable();
                            rules.insert((pre, target));
                        }
                    }
                }
            }
        }
        rules
            .into_iter()
            .map(|(pre, target)| Rule::new(pre, target))
            .collect()
    }

    /// Ordered configurations (shared endpoint, displaced partner, newcomer)
    /// over distinct edge pairs sharing a vertex.
    fn adjacent_edge_configs(&self) -> Vec<(EdgeId, EdgeId, VertexId, VertexId, VertexId)> {
        let m = self.edges.len();
        let mut out = Vec::new();
        for pre in 0..m {
            for target in 0..m {
                if pre == target {
                    continue;
                }
                let (pe, te) = (&self.edges[pre], &self.edges[target]);
                for u in [te.u, te.v] {
                    if pe.contains(u) {
                        let v = pe.other(u);
                        let vp = te.other(u);
                        if v != vp {
                            out.push((pre, target, u, v, vp));
                        }
                    }
                }
            }
        }
        out
    }

    fn considerate_rule_pairs(&self) -> Vec<(EdgeId, EdgeId)> {
        self.adjacent_edge_configs()
            .into_iter()
            .filter(|&(_, _, u, v, vp)| self.has_link(u, v) || self.has_link(v, vp))
            .map(|(pre, target, _, _, _)| (pre, target))
            .collect()
    }

    fn friendship_d1_pairs(&self) -> Vec<(EdgeId, EdgeId)> {
        self.adjacent_edge_configs()
            .into_iter()
            .filter(|&(pre, target, u, v, vp)| {
                let b1 = self.edges[pre].bu;
                let b2 = self.edges[target].bu;
                // v' gains at least as much from the standing edge {u,v}
                // through friendship as from matching u directly
                self.alpha(vp, v) * b1 + self.alpha(vp, u) * b1 >= b2 + self.alpha(vp, u) * b2
            })
            .map(|(pre, target, _, _, _)| (pre, target))
            .collect()
    }

    /// Friendship rules with two preconditions: the edges of both endpoints
    /// of the candidate, when their combined perceived value for the shared
    /// endpoint outweighs the candidate.
    fn friendship_d2_triples(&self) -> Vec<(EdgeId, EdgeId, EdgeId)> {
        let m = self.edges.len();
        let mut out = Vec::new();
        for target in 0..m {
            let te = &self.edges[target];
            for (u, vp) in [(te.u, te.v), (te.v, te.u)] {
                for p1 in 0..m {
                    if p1 == target || !self.edges[p1].contains(u) || self.edges[p1].contains(vp) {
                        continue;
                    }
                    let v = self.edges[p1].other(u);
                    for p2 in 0..m {
                        if p2 == target
                            || p2 == p1
                            || !self.edges[p2].contains(vp)
                            || self.edges[p2].contains(u)
                        {
                            continue;
                        }
                        // preconditions must be able to coexist
                        if self.edges[p2].contains(v) {
                            continue;
                        }
                        let up = self.edges[p2].other(vp);
                        let b1 = self.edges[p1].bu;
                        let b2 = te.bu;
                        let b3 = self.edges[p2].bu;
                        if b3 + self.alpha(vp, up) * b3
                            + self.alpha(vp, v) * b1
                            + self.alpha(vp, u) * b1
                            >= b2 + self.alpha(vp, u) * b2
                        {
                            out.push((p1, p2, target));
                        }
                    }
                }
            }
        }
        out
    }

    fn embed_k1(&self, _map: &StateMap) -> GameSpec {
        let coalitions = self
            .edges
            .iter()
            .enumerate()
            .map(|(e, edge)| Coalition::new(e, vec![edge.u, edge.v], self.coalition_weight(e)))
            .collect();
        let generation_rules = match self.variant {
            Variant::Local => self.local_generation_rules(),
            _ => Vec::new(),
        };
        let domination_rules = match self.variant {
            Variant::Considerate => self
                .considerate_rule_pairs()
                .into_iter()
                .map(|(pre, target)| Rule::new(vec![pre], target))
                .collect(),
            Variant::Friendship => {
                let mut rules: Vec<Rule> = self
                    .friendship_d1_pairs()
                    .into_iter()
                    .map(|(pre, target)| Rule::new(vec![pre], target))
                    .collect();
                rules.extend(
                    self.friendship_d2_triples()
                        .into_iter()
                        .map(|(p1, p2, target)| Rule::new(vec![p1, p2], target)),
                );
                rules
            }
            _ => Vec::new(),
        };
        GameSpec {
            agents: self.vertices,
            coalitions,
            self_generating: self.self_generating_edges(),
            generation_rules,
            domination_rules,
            include_weight_domination: true,
        }
    }

    /// k > 1: every vertex becomes k copy agents and every edge gets an
    /// auxiliary agent; coalitions are copy pairs plus the auxiliary agent.
    /// Domination rules are instantiated per shared copy so that every rule
    /// keeps an overlapping precondition.
    fn embed_many(&self, map: &StateMap) -> GameSpec {
        let k = self.k;
        let mut coalitions = Vec::with_capacity(self.edges.len() * k * k);
        for (e, edge) in self.edges.iter().enumerate() {
            for i in 0..k {
                for j in 0..k {
                    let members = vec![
                        edge.u * k + i,
                        edge.v * k + j,
                        self.vertices * k + e,
                    ];
                    coalitions.push(Coalition::new(
                        map.copy_coalition(e, i, j),
                        members,
                        self.coalition_weight(e),
                    ));
                }
            }
        }
        let self_generating = self
            .self_generating_edges()
            .into_iter()
            .flat_map(|e| {
                (0..k * k).map(move |c| e * k * k + c)
            })
            .collect();
        let mut domination_rules = Vec::new();
        let mut push_d1 = |pairs: Vec<(EdgeId, EdgeId)>| {
            for (pre, target) in pairs {
                // the shared vertex keeps the same copy in pre and target
                for (u, _, _) in self.shared_vertex(pre, target) {
                    for a in 0..k {
                        for j in 0..k {
                            for b in 0..k {
                                domination_rules.push(Rule::new(
                                    vec![map.copy_coalition_at(self, pre, u, a, j)],
                                    map.copy_coalition_at(self, target, u, a, b),
                                ));
                            }
                        }
                    }
                }
            }
        };
        match self.variant {
            Variant::Considerate => push_d1(self.considerate_rule_pairs()),
            Variant::Friendship => {
                push_d1(self.friendship_d1_pairs());
                for (p1, p2, target) in self.friendship_d2_triples() {
                    let te = &self.edges[target];
                    // p1 shares u with the target, p2 shares v'
                    let (u, vp) = if self.edges[p1].contains(te.u) {
                        (te.u, te.v)
                    } else {
                        (te.v, te.u)
                    };
                    for a in 0..k {
                        for j in 0..k {
                            for ip in 0..k {
                                for b in 0..k {
                                    domination_rules.push(Rule::new(
                                        vec![
                                            map.copy_coalition_at(self, p1, u, a, j),
                                            map.copy_coalition_at(self, p2, vp, b, ip),
                                        ],
                                        map.copy_coalition_at(self, target, u, a, b),
                                    ));
                                }
                            }
                        }
                    }
                }
            }
            _ => {}
        }
        domination_rules.sort_by(|x, y| (&x.pre, x.target).cmp(&(&y.pre, y.target)));
        domination_rules.dedup();
        GameSpec {
            agents: self.vertices * k + self.edges.len(),
            coalitions,
            self_generating,
            generation_rules: Vec::new(),
            domination_rules,
            include_weight_domination: true,
        }
    }

    /// Shared endpoints of two distinct edges with the respective other ends.
    fn shared_vertex(&self, a: EdgeId, b: EdgeId) -> Vec<(VertexId, VertexId, VertexId)> {
        let (ea, eb) = (&self.edges[a], &self.edges[b]);
        let mut out = Vec::new();
        for u in [ea.u, ea.v] {
            if eb.contains(u) {
                out.push((u, ea.other(u), eb.other(u)));
            }
        }
        out
    }
}

/// Correspondence between matchings and coalition structures of the
/// embedded game.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateMap {
    pub k: usize,
    pub vertices: usize,
    pub num_edges: usize,
}

impl StateMap {
    /// Coalition id for edge `e` with copy `i` of `edges[e].u` and copy `j`
    /// of `edges[e].v`. For k = 1 this is the edge id itself.
    pub fn copy_coalition(&self, e: EdgeId, i: usize, j: usize) -> usize {
        e * self.k * self.k + i * self.k + j
    }

    /// Coalition id for edge `e` where vertex `x` (an endpoint of `e`) uses
    /// copy `cx` and the other endpoint copy `cother`.
    fn copy_coalition_at(
        &self,
        inst: &MatchingInstance,
        e: EdgeId,
        x: VertexId,
        cx: usize,
        cother: usize,
    ) -> usize {
        if inst.edges[e].u == x {
            self.copy_coalition(e, cx, cother)
        } else {
            self.copy_coalition(e, cother, cx)
        }
    }

    pub fn coalition_edge(&self, c: usize) -> EdgeId {
        c / (self.k * self.k)
    }

    /// Copy index a vertex's matched edges receive under the canonical
    /// assignment: rank in its id-sorted list of matched edges.
    fn copy_index(&self, inst: &MatchingInstance, m: &Matching, x: VertexId, e: EdgeId) -> usize {
        inst.matched_edges(m, x)
            .into_iter()
            .position(|f| f == e)
            .expect("edge is matched at x")
    }

    /// Canonical structure for a matching.
    pub fn encode(&self, inst: &MatchingInstance, m: &Matching) -> Structure {
        if self.k == 1 {
            return Structure::from_ids(m.edges.iter().copied());
        }
        Structure::from_ids(m.edges.iter().map(|&e| {
            let i = self.copy_index(inst, m, inst.edges[e].u, e);
            let j = self.copy_index(inst, m, inst.edges[e].v, e);
            self.copy_coalition(e, i, j)
        }))
    }

    /// Matching represented by a structure (copy assignment forgotten).
    pub fn decode(&self, s: &Structure) -> Matching {
        Matching::from_ids(s.active.iter().map(|&c| self.coalition_edge(c)))
    }

    /// The coalition whose game-side resolution mirrors
    /// `resolve_pair(m, e)`: each endpoint uses the copy of the slot the
    /// matching-side resolution would pick (its displaced edge's copy, or
    /// the first free copy).
    pub fn canonical_blocking_coalition(
        &self,
        inst: &MatchingInstance,
        m: &Matching,
        e: EdgeId,
    ) -> Option<usize> {
        let (su, sv) = inst.blocking_slots(m, e)?;
        if self.k == 1 {
            return Some(e);
        }
        let copy_for = |x: VertexId, slot: Slot| match slot {
            Slot::Free => inst.matched_edges(m, x).len(),
            Slot::Drop(old) => self.copy_index(inst, m, x, old),
        };
        let i = copy_for(inst.edges[e].u, su);
        let j = copy_for(inst.edges[e].v, sv);
        Some(self.copy_coalition(e, i, j))
    }
}
