//! GraphViz exports. Nodes and edges are emitted in sorted order so equal
//! inputs give byte-identical output.

use std::fmt::Write;

use crate::conflict::{extended_closure, ConflictGraph};
use crate::exchange::ReachGraph;
use crate::fsa::Nfa;
use crate::model::ProcessTable;
use crate::msc::Msc;
use crate::prime::PGraph;

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// One cluster per process with its events top to bottom; dotted arrows
/// join sends to their receives.
pub fn msc_dot(m: &Msc) -> String {
    let mut out = String::from("digraph msc {\n  rankdir=TB;\n  node [shape=box];\n");
    for (i, (pid, events)) in m.timelines().iter().enumerate() {
        let _ = writeln!(out, "  subgraph cluster_{i} {{\n    label={};", quote(pid.as_str()));
        for &e in events {
            let _ = writeln!(out, "    e{e} [label={}];", quote(&m.event(e).action.to_string()));
        }
        for w in events.windows(2) {
            let _ = writeln!(out, "    e{} -> e{};", w[0], w[1]);
        }
        out.push_str("  }\n");
    }
    for v in m.messages() {
        if let Some(r) = v.receive {
            let _ = writeln!(out, "  e{} -> e{r} [style=dotted, constraint=false];", v.send);
        }
    }
    out.push_str("}\n");
    out
}

fn message_label(g: &ConflictGraph, v: usize) -> String {
    let m = &g.vertices()[v];
    let kind = if m.is_matched() { "!?" } else { "!" };
    format!("v{} {kind}{}({}->{})", v + 1, m.payload, m.sender, m.receiver)
}

/// Base edges solid, edges added by the closure dashed.
pub fn conflict_dot(g: &ConflictGraph, extended: bool) -> String {
    let mut out = String::from("digraph conflict {\n");
    for v in 0..g.len() {
        let _ = writeln!(out, "  v{v} [label={}];", quote(&message_label(g, v)));
    }
    for (v, d, w) in g.edges() {
        let _ = writeln!(out, "  v{v} -> v{w} [label=\"{d}\"];");
    }
    if extended {
        for (v, d, w) in extended_closure(g).extended_only() {
            let _ = writeln!(out, "  v{v} -> v{w} [label=\"{d}\", style=dashed];");
        }
    }
    out.push_str("}\n");
    out
}

pub fn nfa_dot(nfa: &Nfa) -> String {
    let mut out = String::from("digraph nfa {\n  rankdir=LR;\n  init [shape=point];\n");
    for s in 0..nfa.len() {
        let shape = if nfa.finals.contains(&s) {
            "doublecircle"
        } else {
            "circle"
        };
        let label = nfa.labels.get(s).cloned().unwrap_or_else(|| s.to_string());
        let _ = writeln!(out, "  s{s} [shape={shape}, label={}];", quote(&label));
    }
    let mut initial = nfa.initial.clone();
    initial.sort_unstable();
    for s in initial {
        let _ = writeln!(out, "  init -> s{s};");
    }
    for (s, ts) in nfa.transitions.iter().enumerate() {
        for (a, t) in ts {
            let _ = writeln!(out, "  s{s} -> s{t} [label={}];", quote(&a.to_string()));
        }
    }
    out.push_str("}\n");
    out
}

/// Nodes of the reach graph; each edge is labelled with its shortest word.
pub fn reach_dot(g: &ReachGraph) -> String {
    let mut out = String::from("digraph reach {\n  rankdir=LR;\n");
    for n in 0..g.nodes.len() {
        let shape = if n == ReachGraph::ROOT { "doubleoctagon" } else { "box" };
        let _ = writeln!(out, "  n{n} [shape={shape}, label={}];", quote(&g.describe_node(n)));
    }
    for &(a, b) in &g.edges {
        let label = g.products[a]
            .witnesses
            .get(&b)
            .map(|w| w.to_string())
            .unwrap_or_default();
        let _ = writeln!(out, "  n{a} -> n{b} [label={}];", quote(&label));
    }
    out.push_str("}\n");
    out
}

pub fn pgraph_dot(g: &PGraph, table: &ProcessTable) -> String {
    let mut out = String::from("digraph pgraph {\n");
    for v in 0..g.len() {
        let label = format!(
            "S:{} R:{}",
            table.format_set(g.ls[v]),
            table.format_set(g.lr[v])
        );
        let _ = writeln!(out, "  g{v} [label={}];", quote(&label));
    }
    for (u, v) in &g.edges {
        let _ = writeln!(out, "  g{u} -> g{v};");
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conflict::conflict_graph;
    use crate::model::parse_word;
    use crate::msc::tests::mu3;
    use crate::prime::full_pgraph;

    #[test]
    fn conflict_of_mu3() {
        let dot = conflict_dot(&conflict_graph(&mu3()), true);
        assert!(dot.starts_with("digraph conflict {"));
        assert!(dot.contains("v0 -> v1 [label=\"SS\"];"));
        assert!(dot.contains("style=dashed"));
        assert_eq!(dot, conflict_dot(&conflict_graph(&mu3()), true));
    }

    #[test]
    fn word_exports() {
        let w = parse_word("!?m1(p->q) !?m2(q->p)").unwrap();
        let dot = msc_dot(&Msc::of_word(&w));
        assert_eq!(dot.matches("style=dotted").count(), 2);
        let t = ProcessTable::of_word(&w);
        let dot = pgraph_dot(&full_pgraph(&w, &t), &t);
        assert!(dot.contains("g0 -> g1;") && dot.contains("g1 -> g0;"));
        assert!(dot.contains("S:{p} R:{q}"));
        let nfa = Nfa::from_words([&w]);
        assert!(nfa_dot(&nfa).contains("doublecircle"));
    }

    #[test]
    fn quoting() {
        assert_eq!(quote("a\"b"), "\"a\\\"b\"");
    }
}
