//! Dynamics of matching and coalition formation under constraints:
//! coalition formation games with generation/domination rules, the object
//! movement hypergraph, polynomial convergence and trace truncation,
//! matching variants with their game embeddings, bipartite two-phase
//! convergence, constructed and random instances, and a brute-force oracle.

pub mod bipartite;
pub mod game;
pub mod instances;
pub mod matching;
pub mod movement;
pub mod oracle;
pub mod sequencer;
pub mod trace;
pub mod weight;

pub use game::{Coalition, GameSpec, Rule, Structure};
pub use matching::{Matching, MatchingInstance, Variant};
pub use weight::Weight;
