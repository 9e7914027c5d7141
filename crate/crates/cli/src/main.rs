use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ksync::conflict::{buffer_state, check_causal, conflict_graph, msc_table};
use ksync::degree::{degree_of, synchronizable, theoretical_bound, DegreeVerdict, SyncVerdict};
use ksync::dot;
use ksync::exchange::{build_asr, ExchangeError, ReachGraph};
use ksync::fsa::enumerate_language;
use ksync::prime::{abstract_run, full_pgraph, is_prime_oracle};
use ksync::sim::{explore_distinct, run, ExploreBounds};
use ksync::{
    global_product, parse_actions, parse_system_with, parse_word, GlobalState, GuardExceeded,
    Guards, Msc, ParseOptions, ProcessTable, System,
};
use serde_json::json;

#[derive(Parser, Debug)]
#[command(name = "ksync", version, about = "Synchronizability analysis of mailbox systems")]
struct Cli {
    /// Maximum number of states of any constructed automaton or graph.
    #[arg(long, global = true, default_value_t = 1_000_000, value_parser = positive)]
    state_guard: usize,
    /// Maximum number of words printed by language enumeration.
    #[arg(long, global = true, default_value_t = 10_000, value_parser = positive)]
    enumerate_cap: usize,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Dot,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse and print a system.
    Parse {
        file: PathBuf,
        /// Reject self-sends.
        #[arg(long)]
        strict: bool,
    },
    /// Run a sequence of actions such as "!a(p->q) ?a(p->q)".
    Simulate {
        file: PathBuf,
        #[arg(long)]
        actions: String,
    },
    /// List executions up to the bounds, one per distinct MSC and configuration.
    Explore {
        file: PathBuf,
        #[arg(long, default_value_t = 6)]
        max_actions: usize,
        #[arg(long, default_value_t = 2, value_parser = positive)]
        max_buffer: usize,
    },
    /// Causal delivery of the MSC of a Σ-word.
    Causal {
        #[arg(long)]
        msc_word: String,
    },
    /// Primality of the MSC of a Σ-word.
    Prime {
        #[arg(long)]
        word: String,
    },
    /// Language of the send/receive control automaton.
    Asr {
        file: PathBuf,
        #[arg(long = "in")]
        l_in: String,
        #[arg(long)]
        mid: String,
        #[arg(long)]
        fin: String,
        /// Longest enumerated word.
        #[arg(long, default_value_t = 8)]
        max_len: usize,
        #[arg(long)]
        dot: bool,
    },
    /// Reachable control and buffer states with their exchange languages.
    Reach {
        file: PathBuf,
        #[arg(long)]
        dot: bool,
    },
    /// Size of the largest prime reachable exchange.
    Degree { file: PathBuf },
    /// Degree followed by a bounded check of k-synchronizability.
    Synchronizable {
        file: PathBuf,
        #[arg(long, default_value_t = 8)]
        max_actions: usize,
        #[arg(long, default_value_t = 3, value_parser = positive)]
        max_buffer: usize,
    },
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be positive".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

enum Failure {
    Input(String),
    Guard(GuardExceeded),
}

impl From<GuardExceeded> for Failure {
    fn from(g: GuardExceeded) -> Self {
        Failure::Guard(g)
    }
}

impl From<ExchangeError> for Failure {
    fn from(e: ExchangeError) -> Self {
        match e {
            ExchangeError::Guard(g) => Failure::Guard(g),
            other => Failure::Input(other.to_string()),
        }
    }
}

/// Printed output and exit code: 1 when the analysis answered negatively,
/// 3 when it gave up.
struct Report {
    text: String,
    code: u8,
}

impl Report {
    fn ok(text: String) -> Self {
        Self { text, code: 0 }
    }
}

fn input<E: std::fmt::Display>(context: &str) -> impl FnOnce(E) -> Failure + '_ {
    move |e| Failure::Input(format!("{context}: {e}"))
}

fn load(path: &Path, strict: bool) -> Result<System, Failure> {
    let text = std::fs::read_to_string(path).map_err(input(&path.display().to_string()))?;
    parse_system_with(&text, ParseOptions { strict }).map_err(input(&path.display().to_string()))
}

fn json_text(v: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(v).expect("reports serialize") + "\n"
}

fn execute(cli: &Cli) -> Result<Report, Failure> {
    let guards = Guards {
        states: cli.state_guard,
        enumerate: cli.enumerate_cap,
    };
    let fmt = cli.format;
    match &cli.command {
        Command::Parse { file, strict } => {
            let sys = load(file, *strict)?;
            Ok(Report::ok(match fmt {
                Format::Json => json_text(&json!({
                    "name": sys.name,
                    "processes": sys.process_ids().map(|p| p.to_string()).collect::<Vec<_>>(),
                    "local_states": sys.local_state_count(),
                    "sigma": sys.sigma().iter().map(|s| s.to_string()).collect::<Vec<_>>(),
                })),
                _ => sys.to_string(),
            }))
        }
        Command::Simulate { file, actions } => {
            let sys = load(file, false)?;
            let actions = parse_actions(actions).map_err(input("actions"))?;
            match run(&sys, &actions) {
                Ok(e) => Ok(Report::ok(match fmt {
                    Format::Json => json_text(&e),
                    Format::Dot => dot::msc_dot(&e.msc()),
                    Format::Text => format!("{e}final {}\n", e.final_config.display(&sys)),
                })),
                Err(err) => Ok(Report {
                    text: match fmt {
                        Format::Json => json_text(&json!({ "error": err.to_string() })),
                        _ => format!("blocked: {err}\n"),
                    },
                    code: 1,
                }),
            }
        }
        Command::Explore {
            file,
            max_actions,
            max_buffer,
        } => {
            let sys = load(file, false)?;
            let runs = explore_distinct(&sys, ExploreBounds::new(*max_actions, *max_buffer))?;
            Ok(Report::ok(match fmt {
                Format::Json => json_text(&runs),
                _ => {
                    let mut out = format!("{} executions\n", runs.len());
                    for e in &runs {
                        let acts: Vec<String> = e.actions.iter().map(|a| a.to_string()).collect();
                        let acts = if acts.is_empty() { "ε".to_string() } else { acts.join(" ") };
                        let _ = writeln!(out, "{acts} => {}", e.final_config.display(&sys));
                    }
                    out
                }
            }))
        }
        Command::Causal { msc_word } => {
            let w = parse_word(msc_word).map_err(input("word"))?;
            let m = Msc::of_word(&w);
            let causal = check_causal(&m);
            let b = buffer_state(&m, &msc_table(&m));
            Ok(Report::ok(match fmt {
                Format::Json => json_text(&json!({
                    "causal": causal,
                    "buffers": b.display(&msc_table(&m)),
                })),
                Format::Dot => dot::conflict_dot(&conflict_graph(&m), true),
                Format::Text => format!(
                    "{}\n{}\n",
                    if causal { "causal" } else { "not causal" },
                    b.display(&msc_table(&m))
                ),
            }))
        }
        Command::Prime { word } => {
            let w = parse_word(word).map_err(input("word"))?;
            let prime = is_prime_oracle(&w);
            let table = ProcessTable::of_word(&w);
            Ok(Report::ok(match fmt {
                Format::Json => json_text(&json!({
                    "prime": prime,
                    "abstract_state": abstract_run(&w, &table).display(&table),
                })),
                Format::Dot => dot::pgraph_dot(&full_pgraph(&w, &table), &table),
                Format::Text => format!("{}\n", if prime { "prime" } else { "not prime" }),
            }))
        }
        Command::Asr {
            file,
            l_in,
            mid,
            fin,
            max_len,
            dot: as_dot,
        } => {
            let sys = load(file, false)?;
            let ga = global_product(&sys, guards.states)?;
            let state = |t: &str| {
                GlobalState::parse(t, &sys)
                    .ok_or_else(|| Failure::Input(format!("bad global state {t:?}")))
            };
            let nfa = build_asr(&sys, &ga, &state(l_in)?, &state(mid)?, &state(fin)?, guards)?;
            if *as_dot || fmt == Format::Dot {
                return Ok(Report::ok(dot::nfa_dot(&nfa)));
            }
            let words = enumerate_language(&nfa, *max_len, guards.enumerate)
                .map_err(|e| GuardExceeded::new("enumeration", e.0))?;
            let words: Vec<String> = words.iter().map(|w| w.to_string()).collect();
            Ok(Report::ok(match fmt {
                Format::Json => json_text(&json!({ "words": words })),
                _ => words.iter().map(|w| format!("{w}\n")).collect(),
            }))
        }
        Command::Reach { file, dot: as_dot } => {
            let sys = load(file, false)?;
            let g = ReachGraph::build(&sys, guards)?;
            if *as_dot || fmt == Format::Dot {
                return Ok(Report::ok(dot::reach_dot(&g)));
            }
            let nodes: Vec<String> = (0..g.nodes.len()).map(|n| g.describe_node(n)).collect();
            let edges: Vec<(usize, usize, String)> = g
                .edges
                .iter()
                .map(|&(a, b)| (a, b, g.products[a].witnesses[&b].to_string()))
                .collect();
            Ok(Report::ok(match fmt {
                Format::Json => json_text(&json!({ "nodes": nodes, "edges": edges })),
                _ => {
                    let mut out = String::new();
                    for (i, n) in nodes.iter().enumerate() {
                        let _ = writeln!(out, "node {i}: {n}");
                    }
                    for (a, b, w) in &edges {
                        let _ = writeln!(out, "edge {a} -> {b}: {w}");
                    }
                    out
                }
            }))
        }
        Command::Degree { file } => {
            let sys = load(file, false)?;
            let verdict = degree_of(&ReachGraph::build(&sys, guards)?);
            if let DegreeVerdict::GuardExceeded(g) = verdict {
                return Err(Failure::Guard(g));
            }
            let code = u8::from(matches!(verdict, DegreeVerdict::Unbounded { .. }));
            let text = match fmt {
                Format::Json => json_text(&verdict),
                _ => format!("{verdict}\nbound: {}\n", theoretical_bound(&sys)),
            };
            Ok(Report { text, code })
        }
        Command::Synchronizable {
            file,
            max_actions,
            max_buffer,
        } => {
            let sys = load(file, false)?;
            let verdict = synchronizable(&sys, guards, ExploreBounds::new(*max_actions, *max_buffer));
            let code = match verdict {
                SyncVerdict::Synchronizable { .. } => 0,
                SyncVerdict::NotSynchronizable { .. } => 1,
                SyncVerdict::Inconclusive { .. } => 3,
            };
            let text = match fmt {
                Format::Json => json_text(&verdict),
                _ => format!("{verdict}\n"),
            };
            Ok(Report { text, code })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(r) => {
            print!("{}", r.text);
            ExitCode::from(r.code)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Guard(g)) => {
            eprintln!("error: {g}");
            ExitCode::from(3)
        }
    }
}
