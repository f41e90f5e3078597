//! Cross-checks the BFS oracle against an independently coded DFS and pins
//! CLI determinism.

use std::collections::BTreeSet;
use std::process::Command;

use matchdyn::instances::gen_random_consistent;
use matchdyn::oracle::{self, Dynamics};
use matchdyn::{GameSpec, Structure};

/// Second implementation of reachability closure: recursive DFS over
/// resolutions, no layering, no parallelism.
fn dfs_closure(spec: &GameSpec, s0: &Structure) -> (BTreeSet<Structure>, usize) {
    let mut seen: BTreeSet<Structure> = BTreeSet::new();
    let mut edges = 0usize;
    let mut stack = vec![s0.clone()];
    seen.insert(s0.clone());
    while let Some(s) = stack.pop() {
        for (_, next) in spec.successors(&s) {
            edges += 1;
            if seen.insert(next.clone()) {
                stack.push(next);
            }
        }
    }
    (seen, edges)
}

#[test]
fn bfs_matches_independent_dfs_on_random_specs() {
    for seed in 0..50u64 {
        let n = 2 + (seed % 6) as usize;
        let m = 1 + (seed % 8) as usize;
        let spec = gen_random_consistent(n, m, 0.45, seed);
        let s0 = Structure::empty();
        let graph = oracle::explore(&spec, &s0, 1_000_000);
        assert!(!graph.overflow);
        let (dfs_states, dfs_edges) = dfs_closure(&spec, &s0);
        let bfs_states: BTreeSet<Structure> = graph.states.iter().cloned().collect();
        assert_eq!(bfs_states, dfs_states, "state sets differ at seed {seed}");
        assert_eq!(graph.edges.len(), dfs_edges, "edge counts differ at seed {seed}");
    }
}

fn run_cli(args: &[&str]) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_matchdyn"))
        .args(args)
        .output()
        .expect("binary runs");
    assert!(out.status.success(), "cli failed: {}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

#[test]
fn cli_output_is_deterministic_per_seed() {
    for args in [
        vec!["gen", "random", "--n", "6", "--m", "8", "--density", "0.4", "--seed", "17"],
        vec!["gen", "matching", "--vertices", "5", "--variant", "friendship", "--seed", "3"],
        vec!["gen", "bipartite", "--nu", "4", "--nw", "4", "--variant", "social", "--seed", "9"],
        vec!["gen", "expchain", "--k", "2"],
    ] {
        let a = run_cli(&args);
        let b = run_cli(&args);
        assert_eq!(a, b, "non-deterministic output for {args:?}");
        assert!(!a.is_empty());
    }
}

#[test]
fn cli_spec_round_trip_is_identity() {
    let dir = std::env::temp_dir().join(format!("matchdyn-roundtrip-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("spec.json");
    let spec = gen_random_consistent(6, 8, 0.4, 42);
    std::fs::write(&path, serde_json::to_string_pretty(&spec).unwrap()).unwrap();
    let parsed: GameSpec =
        serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(serde_json::to_string(&parsed).unwrap(), serde_json::to_string(&spec).unwrap());
    run_cli(&["validate", "--spec", path.to_str().unwrap()]);
    std::fs::remove_dir_all(&dir).ok();
}
