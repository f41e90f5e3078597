//! Command-line entry point. Reads specs/instances as JSON (`-` = stdin),
//! writes JSON/DOT artifacts (`-` = stdout). Exit codes: 0 success, 1 domain
//! failure, 2 usage error.

use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;

use matchdyn::bipartite::two_phase_converge;
use matchdyn::game::TieBreak;
use matchdyn::instances::{self, CnfFormula, SatVariant};
use matchdyn::movement::MovementGraph;
use matchdyn::oracle;
use matchdyn::sequencer;
use matchdyn::trace::Trace;
use matchdyn::{GameSpec, Matching, MatchingInstance, Structure, Variant};

#[derive(Parser)]
#[command(name = "matchdyn", about = "Matching dynamics with constraints", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Input {
    /// Game spec JSON file (`-` for stdin).
    #[arg(long, conflicts_with = "instance")]
    spec: Option<PathBuf>,
    /// Matching instance JSON file (`-` for stdin).
    #[arg(long)]
    instance: Option<PathBuf>,
}

#[derive(Args)]
struct OutFile {
    /// Output file (`-` or omitted for stdout).
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Policy {
    Lex,
    MaxWeight,
    Random,
}

impl From<Policy> for TieBreak {
    fn from(p: Policy) -> TieBreak {
        match p {
            Policy::Lex => TieBreak::LexMinId,
            Policy::MaxWeight => TieBreak::MaxWeightThenMinId,
            Policy::Random => TieBreak::SeededUniformRandom,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Structural validation plus, for specs, the consistency report.
    Validate {
        #[command(flatten)]
        input: Input,
    },
    /// Run improvement dynamics under a tie-break policy.
    Simulate {
        #[arg(long)]
        spec: PathBuf,
        /// Start structure as a JSON id array, e.g. "[0,2]".
        #[arg(long, default_value = "[]")]
        start: String,
        #[arg(long, value_enum, default_value = "lex")]
        policy: Policy,
        /// Seed for the random policy (mandatory when --policy random).
        #[arg(long, required_if_eq("policy", "random"), default_value = "0")]
        seed: u64,
        #[arg(long, default_value = "10000")]
        max_steps: usize,
        #[command(flatten)]
        out: OutFile,
    },
    /// Two-phase polynomial convergence (consistent specs only).
    Converge {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value = "[]")]
        start: String,
        #[command(flatten)]
        out: OutFile,
        /// Also write the trace as JSON lines.
        #[arg(long)]
        trace_out: Option<PathBuf>,
    },
    /// Drop steps that contribute nothing to a trace's endpoint.
    Truncate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value = "[]")]
        start: String,
        /// Trace file in JSON-lines format (`-` for stdin).
        #[arg(long)]
        trace: PathBuf,
        #[command(flatten)]
        out: OutFile,
    },
    /// Embed a matching instance into a coalition formation game.
    Embed {
        #[arg(long)]
        instance: PathBuf,
        #[command(flatten)]
        out: OutFile,
    },
    /// Bipartite two-phase convergence for general preferences.
    Bipartite {
        #[arg(long)]
        instance: PathBuf,
        /// Start matching as a JSON edge-id array.
        #[arg(long, default_value = "[]")]
        start: String,
        #[command(flatten)]
        out: OutFile,
    },
    /// Decide reachability between two states by exhaustive search.
    Reach {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value = "[]")]
        start: String,
        #[arg(long)]
        target: String,
        #[command(flatten)]
        out: OutFile,
    },
    /// Enumerate all stable states of a small spec or instance.
    Stable {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        out: OutFile,
    },
    /// Generate paper instances and random families.
    #[command(subcommand)]
    Gen(GenCommand),
    /// DOT renderings of the movement graph or the transition system.
    ExportDot {
        #[command(flatten)]
        input: Input,
        /// Render the reachable transition system from this start state
        /// instead of the movement graph.
        #[arg(long)]
        transitions_from: Option<String>,
        /// Swap exchange/domination edge styling (appendix convention).
        #[arg(long)]
        invert_style: bool,
        #[command(flatten)]
        out: OutFile,
    },
}

#[derive(Subcommand)]
enum GenCommand {
    /// The three-coalition domination cycle (no stable state).
    Cycle {
        #[command(flatten)]
        out: OutFile,
    },
    /// The exponential improvement-sequence chain of k gadgets.
    Expchain {
        #[arg(long, default_value = "1")]
        k: usize,
        #[command(flatten)]
        out: OutFile,
    },
    /// The 3-SAT reachability reduction for a chosen matching variant.
    Sat {
        /// DIMACS CNF file (`-` for stdin).
        #[arg(long)]
        formula: PathBuf,
        /// social | local | considerate | friendship | ties | strict
        #[arg(long)]
        variant: SatVariant,
        #[command(flatten)]
        out: OutFile,
    },
    /// Seeded random consistent game spec.
    Random {
        #[arg(long, default_value = "6")]
        n: usize,
        #[arg(long, default_value = "8")]
        m: usize,
        #[arg(long, default_value = "0.3")]
        density: f64,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        out: OutFile,
    },
    /// Seeded random matching instance.
    Matching {
        #[arg(long, default_value = "5")]
        vertices: usize,
        #[arg(long, value_enum, default_value = "plain")]
        variant: CliVariant,
        #[arg(long, default_value = "1")]
        k: usize,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        out: OutFile,
    },
    /// Seeded random bipartite instance with general preferences.
    Bipartite {
        #[arg(long, default_value = "4")]
        nu: usize,
        #[arg(long, default_value = "4")]
        nw: usize,
        #[arg(long, value_enum, default_value = "social")]
        variant: CliVariant,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        out: OutFile,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CliVariant {
    Plain,
    Social,
    Local,
    Considerate,
    Friendship,
}

impl From<CliVariant> for Variant {
    fn from(v: CliVariant) -> Variant {
        match v {
            CliVariant::Plain => Variant::Plain,
            CliVariant::Social => Variant::Social,
            CliVariant::Local => Variant::Local,
            CliVariant::Considerate => Variant::Considerate,
            CliVariant::Friendship => Variant::Friendship,
        }
    }
}

fn read_text(path: &PathBuf) -> Result<String, String> {
    if path.as_os_str() == "-" {
        let mut buf = String::new();
        std::io::stdin()
            .read_to_string(&mut buf)
            .map_err(|e| format!("reading stdin: {e}"))?;
        Ok(buf)
    } else {
        std::fs::read_to_string(path).map_err(|e| format!("reading {}: {e}", path.display()))
    }
}

fn read_json<T: DeserializeOwned>(path: &PathBuf) -> Result<T, String> {
    serde_json::from_str(&read_text(path)?).map_err(|e| format!("parsing {}: {e}", path.display()))
}

fn write_text(out: &OutFile, text: &str) -> Result<(), String> {
    match &out.out {
        None => {
            println!("{text}");
            Ok(())
        }
        Some(p) if p.as_os_str() == "-" => {
            println!("{text}");
            Ok(())
        }
        Some(p) => std::fs::write(p, format!("{text}\n"))
            .map_err(|e| format!("writing {}: {e}", p.display())),
    }
}

fn write_json<T: Serialize>(out: &OutFile, value: &T) -> Result<(), String> {
    write_text(out, &serde_json::to_string_pretty(value).map_err(|e| e.to_string())?)
}

fn parse_ids(text: &str) -> Result<Vec<usize>, String> {
    serde_json::from_str(text).map_err(|e| format!("parsing id list {text:?}: {e}"))
}

fn parse_structure(text: &str) -> Result<Structure, String> {
    Ok(Structure::from_ids(parse_ids(text)?))
}

fn parse_matching(text: &str) -> Result<Matching, String> {
    Ok(Matching::from_ids(parse_ids(text)?))
}

fn run(cli: Cli) -> Result<(), String> {
    let budget = oracle::budget_from_env();
    match cli.command {
        Command::Validate { input } => match (&input.spec, &input.instance) {
            (Some(path), None) => {
                let spec: GameSpec = read_json(path)?;
                let report = spec.check_consistency().map_err(|e| e.to_string())?;
                write_json(&OutFile { out: None }, &serde_json::json!({
                    "valid": true,
                    "consistent": report.is_consistent(),
                    "generation_ok": report.generation_ok,
                    "domination_ok": report.domination_ok,
                    "violations": report.violations,
                }))
            }
            (None, Some(path)) => {
                let inst: MatchingInstance = read_json(path)?;
                inst.validate().map_err(|e| e.to_string())?;
                write_json(&OutFile { out: None }, &serde_json::json!({ "valid": true }))
            }
            _ => Err("exactly one of --spec or --instance is required".into()),
        },
        Command::Simulate { spec, start, policy, seed, max_steps, out } => {
            let spec: GameSpec = read_json(&spec)?;
            spec.validate().map_err(|e| e.to_string())?;
            let s0 = parse_structure(&start)?;
            let outcome = spec
                .simulate(&s0, policy.into(), seed, max_steps)
                .map_err(|e| e.to_string())?;
            write_json(&out, &outcome)
        }
        Command::Converge { spec, start, out, trace_out } => {
            let spec: GameSpec = read_json(&spec)?;
            let s0 = parse_structure(&start)?;
            let report = sequencer::converge(&spec, &s0).map_err(|e| e.to_string())?;
            if let Some(path) = trace_out {
                std::fs::write(&path, report.trace.to_jsonl())
                    .map_err(|e| format!("writing {}: {e}", path.display()))?;
            }
            write_json(&out, &report)
        }
        Command::Truncate { spec, start, trace, out } => {
            let spec: GameSpec = read_json(&spec)?;
            let s0 = parse_structure(&start)?;
            let trace = Trace::from_jsonl(&read_text(&trace)?).map_err(|e| e.to_string())?;
            let truncated =
                sequencer::truncate(&spec, &s0, &trace).map_err(|e| e.to_string())?;
            write_text(&out, truncated.to_jsonl().trim_end())
        }
        Command::Embed { instance, out } => {
            let inst: MatchingInstance = read_json(&instance)?;
            let (spec, map) = inst.embed().map_err(|e| e.to_string())?;
            write_json(&out, &serde_json::json!({ "spec": spec, "state_map": map }))
        }
        Command::Bipartite { instance, start, out } => {
            let inst: MatchingInstance = read_json(&instance)?;
            inst.validate().map_err(|e| e.to_string())?;
            let m0 = parse_matching(&start)?;
            let trace = two_phase_converge(&inst, &m0).map_err(|e| e.to_string())?;
            let end = trace.replay(&inst, &m0).expect("own trace replays");
            write_json(&out, &serde_json::json!({ "steps": trace, "end": end }))
        }
        Command::Reach { input, start, target, out } => match (&input.spec, &input.instance) {
            (Some(path), None) => {
                let spec: GameSpec = read_json(path)?;
                let s0 = parse_structure(&start)?;
                let tgt = parse_structure(&target)?;
                let report =
                    oracle::reachable(&spec, &s0, &tgt, budget).map_err(|e| e.to_string())?;
                write_json(&out, &report)
            }
            (None, Some(path)) => {
                let inst: MatchingInstance = read_json(path)?;
                let m0 = parse_matching(&start)?;
                let tgt = parse_matching(&target)?;
                let report =
                    oracle::reachable(&inst, &m0, &tgt, budget).map_err(|e| e.to_string())?;
                write_json(&out, &report)
            }
            _ => Err("exactly one of --spec or --instance is required".into()),
        },
        Command::Stable { input, out } => match (&input.spec, &input.instance) {
            (Some(path), None) => {
                let spec: GameSpec = read_json(path)?;
                let stable =
                    oracle::enumerate_stable(&spec, budget).map_err(|e| e.to_string())?;
                write_json(&out, &stable)
            }
            (None, Some(path)) => {
                let inst: MatchingInstance = read_json(path)?;
                let stable =
                    oracle::enumerate_stable(&inst, budget).map_err(|e| e.to_string())?;
                write_json(&out, &stable)
            }
            _ => Err("exactly one of --spec or --instance is required".into()),
        },
        Command::Gen(gen) => match gen {
            GenCommand::Cycle { out } => {
                let (spec, start) = instances::gen_cycle_example();
                write_json(&out, &serde_json::json!({ "spec": spec, "start": start }))
            }
            GenCommand::Expchain { k, out } => {
                if k < 1 {
                    return Err("--k must be at least 1".into());
                }
                let (spec, start) = instances::gen_exponential_chain(k);
                write_json(&out, &serde_json::json!({ "spec": spec, "start": start }))
            }
            GenCommand::Sat { formula, variant, out } => {
                let cnf =
                    CnfFormula::parse_dimacs(&read_text(&formula)?).map_err(|e| e.to_string())?;
                let red = instances::gen_sat_reduction(&cnf, variant);
                write_json(&out, &serde_json::json!({
                    "instance": red.instance,
                    "m0": red.m0,
                    "m_star": red.m_star,
                }))
            }
            GenCommand::Random { n, m, density, seed, out } => {
                if n < 2 || m < 1 {
                    return Err("need --n >= 2 and --m >= 1".into());
                }
                if !(0.0..=1.0).contains(&density) {
                    return Err("--density must be in [0, 1]".into());
                }
                let spec = instances::gen_random_consistent(n, m, density, seed);
                write_json(&out, &spec)
            }
            GenCommand::Matching { vertices, variant, k, seed, out } => {
                let inst = instances::gen_random_matching(vertices, variant.into(), k, seed);
                write_json(&out, &inst)
            }
            GenCommand::Bipartite { nu, nw, variant, seed, out } => {
                let inst = instances::gen_random_bipartite(nu, nw, variant.into(), seed);
                write_json(&out, &inst)
            }
        },
        Command::ExportDot { input, transitions_from, invert_style, out } => {
            match (&input.spec, &input.instance, transitions_from) {
                (Some(path), None, None) => {
                    let spec: GameSpec = read_json(path)?;
                    let graph = MovementGraph::build(&spec).map_err(|e| e.to_string())?;
                    write_text(&out, graph.to_dot(invert_style).trim_end())
                }
                (Some(path), None, Some(start)) => {
                    let spec: GameSpec = read_json(path)?;
                    let s0 = parse_structure(&start)?;
                    let graph = oracle::explore(&spec, &s0, budget);
                    write_text(&out, graph.to_dot().trim_end())
                }
                (None, Some(path), Some(start)) => {
                    let inst: MatchingInstance = read_json(path)?;
                    let m0 = parse_matching(&start)?;
                    let graph = oracle::explore(&inst, &m0, budget);
                    write_text(&out, graph.to_dot().trim_end())
                }
                (None, Some(_), None) => {
                    Err("movement graphs are defined for specs; pass --transitions-from for instances".into())
                }
                _ => Err("exactly one of --spec or --instance is required".into()),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
