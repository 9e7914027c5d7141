//! Conflict graphs of MSCs, their extension under the mailbox deduction
//! rules, buffer states and the checks built on them.

use std::collections::BTreeSet;
use std::fmt;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ProcessId, ProcessTable};
use crate::msc::{MessageVertex, Msc};

/// Event kind of a message: its send or its receive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum End {
    S,
    R,
}

/// An `XY` dependency label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Dep(pub End, pub End);

impl Dep {
    pub const SS: Dep = Dep(End::S, End::S);
    pub const SR: Dep = Dep(End::S, End::R);
    pub const RS: Dep = Dep(End::R, End::S);
    pub const RR: Dep = Dep(End::R, End::R);
    pub const ALL: [Dep; 4] = [Dep::SS, Dep::SR, Dep::RS, Dep::RR];

    fn index(self) -> usize {
        (self.0 as usize) * 2 + self.1 as usize
    }
}

impl fmt::Display for Dep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = |e: End| if e == End::S { 'S' } else { 'R' };
        write!(f, "{}{}", c(self.0), c(self.1))
    }
}

type Matrix = Vec<Vec<bool>>;

fn matrix(n: usize) -> Matrix {
    vec![vec![false; n]; n]
}

fn edges_of(rel: &[Matrix; 4]) -> Vec<(usize, Dep, usize)> {
    let mut out = Vec::new();
    for d in Dep::ALL {
        for (v, row) in rel[d.index()].iter().enumerate() {
            for (w, &b) in row.iter().enumerate() {
                if b {
                    out.push((v, d, w));
                }
            }
        }
    }
    out.sort();
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConflictGraph {
    vertices: Vec<MessageVertex>,
    rel: [Matrix; 4],
}

impl ConflictGraph {
    pub fn vertices(&self) -> &[MessageVertex] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn has_edge(&self, v: usize, dep: Dep, w: usize) -> bool {
        self.rel[dep.index()][v][w]
    }

    /// Sorted `(v, XY, v')` triples.
    pub fn edges(&self) -> Vec<(usize, Dep, usize)> {
        edges_of(&self.rel)
    }

    pub fn connected(&self, v: usize, w: usize) -> bool {
        Dep::ALL.iter().any(|&d| self.has_edge(v, d, w))
    }
}

/// One vertex per send event and an `XY` edge `v → v'` whenever the `X`
/// event of `v` precedes the `Y` event of `v'` on a process.
pub fn conflict_graph(m: &Msc) -> ConflictGraph {
    let vertices = m.messages();
    let n = vertices.len();
    let mut rel = [matrix(n), matrix(n), matrix(n), matrix(n)];
    let event = |v: &MessageVertex, e: End| match e {
        End::S => Some(v.send),
        End::R => v.receive,
    };
    for (i, v) in vertices.iter().enumerate() {
        for (j, w) in vertices.iter().enumerate() {
            for d in Dep::ALL {
                if let (Some(a), Some(b)) = (event(v, d.0), event(w, d.1)) {
                    rel[d.index()][i][j] = m.po_before(a, b);
                }
            }
        }
    }
    ConflictGraph { vertices, rel }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtendedConflictGraph {
    base: ConflictGraph,
    rel: [Matrix; 4],
}

impl ExtendedConflictGraph {
    pub fn base(&self) -> &ConflictGraph {
        &self.base
    }

    pub fn has_edge(&self, v: usize, dep: Dep, w: usize) -> bool {
        self.rel[dep.index()][v][w]
    }

    pub fn edges(&self) -> Vec<(usize, Dep, usize)> {
        edges_of(&self.rel)
    }

    /// Edges derived by the rules but absent from the base graph.
    pub fn extended_only(&self) -> Vec<(usize, Dep, usize)> {
        self.edges()
            .into_iter()
            .filter(|&(v, d, w)| !self.base.has_edge(v, d, w))
            .collect()
    }

    /// Some `v ⇒SS v`.
    pub fn has_ss_cycle(&self) -> bool {
        (0..self.base.len()).any(|v| self.has_edge(v, Dep::SS, v))
    }

    /// Some self-loop other than the `SR` loops of matched messages.
    pub fn has_non_sr_cycle(&self) -> bool {
        (0..self.base.len()).any(|v| {
            [Dep::SS, Dep::RS, Dep::RR]
                .iter()
                .any(|&d| self.has_edge(v, d, v))
        })
    }

    /// Reapplying the rules adds nothing.
    pub fn is_fixpoint(&self) -> bool {
        close(&self.base, self.rel.clone()) == self.rel
    }
}

fn close(base: &ConflictGraph, mut rel: [Matrix; 4]) -> [Matrix; 4] {
    let n = base.len();
    let vs = &base.vertices;
    for v in 0..n {
        for w in 0..n {
            for d in Dep::ALL {
                rel[d.index()][v][w] |= base.has_edge(v, d, w);
            }
            rel[Dep::SS.index()][v][w] |= base.has_edge(v, Dep::RR, w);
            if vs[v].is_matched() && !vs[w].is_matched() && vs[v].receiver == vs[w].receiver {
                rel[Dep::SS.index()][v][w] = true;
            }
        }
        if vs[v].is_matched() {
            rel[Dep::SR.index()][v][v] = true;
        }
    }
    loop {
        let mut changed = false;
        for mid in 0..n {
            for xy in Dep::ALL {
                for yz in Dep::ALL.iter().filter(|d| d.0 == xy.1) {
                    let xz = Dep(xy.0, yz.1).index();
                    for v in 0..n {
                        if !rel[xy.index()][v][mid] {
                            continue;
                        }
                        for w in 0..n {
                            if rel[yz.index()][mid][w] && !rel[xz][v][w] {
                                rel[xz][v][w] = true;
                                changed = true;
                            }
                        }
                    }
                }
            }
        }
        if !changed {
            return rel;
        }
    }
}

/// Least fixed point of the five deduction rules: base edges, `SR` loops on
/// matched messages, `RR ⇒ SS`, matched-before-unmatched into the same
/// mailbox, and composition.
pub fn extended_closure(g: &ConflictGraph) -> ExtendedConflictGraph {
    let n = g.len();
    let rel = close(g, [matrix(n), matrix(n), matrix(n), matrix(n)]);
    ExtendedConflictGraph {
        base: g.clone(),
        rel,
    }
}

/// `(C_S,p, C_R,p)` for every process `p` of a [`ProcessTable`], as bitmasks.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BufferState {
    pub cs: Vec<u64>,
    pub cr: Vec<u64>,
}

impl BufferState {
    pub fn empty(processes: usize) -> Self {
        Self {
            cs: vec![0; processes],
            cr: vec![0; processes],
        }
    }

    pub fn processes(&self) -> usize {
        self.cs.len()
    }

    /// `p ∉ C_R,p` for every `p`.
    pub fn is_good(&self) -> bool {
        self.cr.iter().enumerate().all(|(p, &r)| r & (1 << p) == 0)
    }

    pub fn is_empty(&self) -> bool {
        self.cs.iter().chain(&self.cr).all(|&m| m == 0)
    }

    /// Componentwise inclusion.
    pub fn is_subset(&self, other: &BufferState) -> bool {
        let sub = |a: &[u64], b: &[u64]| a.iter().zip(b).all(|(x, y)| x & !y == 0);
        sub(&self.cs, &other.cs) && sub(&self.cr, &other.cr)
    }

    /// Nonempty sets only, e.g. `C_S(q)={p} C_R(q)={r}`.
    pub fn display(&self, table: &ProcessTable) -> String {
        let mut parts = Vec::new();
        for p in 0..self.processes() {
            let pid = table.id(p);
            if self.cs[p] != 0 {
                parts.push(format!("C_S({pid})={}", table.format_set(self.cs[p])));
            }
            if self.cr[p] != 0 {
                parts.push(format!("C_R({pid})={}", table.format_set(self.cr[p])));
            }
        }
        if parts.is_empty() {
            "B_empty".to_string()
        } else {
            parts.join(" ")
        }
    }

    /// Builds a state from named sets; unknown names panic.
    pub fn from_sets(table: &ProcessTable, sets: &[(&str, &[&str], &[&str])]) -> Self {
        let mask = |names: &[&str]| {
            names.iter().fold(0u64, |acc, n| {
                acc | 1 << table.index(&ProcessId::new(*n)).expect("known process")
            })
        };
        let mut b = Self::empty(table.len());
        for (p, s, r) in sets {
            let i = table.index(&ProcessId::new(*p)).expect("known process");
            b.cs[i] |= mask(s);
            b.cr[i] |= mask(r);
        }
        b
    }
}

/// `absBr(m)` over the processes of `table`, which must contain every
/// process of `m`.
pub fn buffer_state(m: &Msc, table: &ProcessTable) -> BufferState {
    let g = conflict_graph(m);
    let ecg = extended_closure(&g);
    let vs = g.vertices();
    let idx = |p: &ProcessId| table.index(p).expect("process missing from table");
    let mut b = BufferState::empty(table.len());
    for (u, unmatched) in vs.iter().enumerate().filter(|(_, v)| !v.is_matched()) {
        let p = idx(&unmatched.receiver);
        b.cs[p] |= 1 << idx(&unmatched.sender);
        for (v, after) in vs.iter().enumerate() {
            if ecg.has_edge(u, Dep::SS, v) {
                b.cs[p] |= 1 << idx(&after.sender);
                if after.is_matched() {
                    b.cr[p] |= 1 << idx(&after.receiver);
                }
            }
        }
    }
    b
}

/// Processes of `m` in name order.
pub fn msc_table(m: &Msc) -> ProcessTable {
    let mut set: BTreeSet<ProcessId> = BTreeSet::new();
    for e in m.events() {
        set.insert(e.action.sender.clone());
        set.insert(e.action.receiver.clone());
    }
    ProcessTable::new(set)
}

/// `absBr(m) ∈ ℬ_good`. Equivalent to causal delivery when `m` is the MSC
/// of a Σ-word.
pub fn check_causal(m: &Msc) -> bool {
    buffer_state(m, &msc_table(m)).is_good()
}

/// No `v ⇒SS v` in the extended conflict graph.
pub fn ecg_acyclic(m: &Msc) -> bool {
    !extended_closure(&conflict_graph(m)).has_ss_cycle()
}

/// Strongly connected components of a conflict graph in topological order,
/// with the deduplicated edges between them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Condensation {
    pub components: Vec<Vec<usize>>,
    pub edges: BTreeSet<(usize, usize)>,
}

pub fn sccs(g: &ConflictGraph) -> Condensation {
    let mut graph: DiGraph<(), ()> = DiGraph::new();
    let nodes: Vec<_> = (0..g.len()).map(|_| graph.add_node(())).collect();
    for v in 0..g.len() {
        for w in 0..g.len() {
            if v != w && g.connected(v, w) {
                graph.add_edge(nodes[v], nodes[w], ());
            }
        }
    }
    // tarjan_scc yields components in reverse topological order
    let components: Vec<Vec<usize>> = tarjan_scc(&graph)
        .into_iter()
        .rev()
        .map(|c| {
            let mut c: Vec<usize> = c.into_iter().map(|n| n.index()).collect();
            c.sort();
            c
        })
        .collect();
    let mut comp_of = vec![0; g.len()];
    for (i, c) in components.iter().enumerate() {
        for &v in c {
            comp_of[v] = i;
        }
    }
    let mut edges = BTreeSet::new();
    for v in 0..g.len() {
        for w in 0..g.len() {
            if comp_of[v] != comp_of[w] && g.connected(v, w) {
                edges.insert((comp_of[v], comp_of[w]));
            }
        }
    }
    Condensation { components, edges }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("the MSC is not an exchange")]
pub struct NotAnExchange;

/// A nonempty exchange whose conflict graph is strongly connected.
pub fn is_prime_msc(m: &Msc) -> Result<bool, NotAnExchange> {
    if !m.is_exchange() {
        return Err(NotAnExchange);
    }
    Ok(!m.is_empty() && sccs(&conflict_graph(m)).components.len() == 1)
}

/// `m` splits into a sequence of `k`-exchanges; `usize::MAX` asks for
/// exchanges of any size. Each strongly connected component of the conflict
/// graph must be such an exchange, and the components then chop `m` in
/// topological order.
pub fn is_k_synchronizable_msc(m: &Msc, k: usize) -> bool {
    let cond = sccs(&conflict_graph(m));
    cond.components
        .iter()
        .all(|c| m.restrict(c).is_k_exchange(k))
}
