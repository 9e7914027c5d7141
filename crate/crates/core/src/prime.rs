//! Recognizer of prime exchanges. A Σ-word is read into a P-graph, whose
//! vertices carry the senders (`λ_S`) and receivers (`λ_R`) of the
//! messages they stand for; the word is prime iff its full P-graph is
//! strongly connected. The abstraction `alpha` keeps the graph bounded.

use std::cell::RefCell;
use std::collections::{BTreeSet, HashMap};

use crate::fsa::{Automaton, Nfa};
use crate::model::{ProcessTable, SigmaSymbol, SigmaWord};
use crate::GuardExceeded;

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PGraph {
    /// `λ_S` per vertex, as a process bitmask.
    pub ls: Vec<u64>,
    /// `λ_R` per vertex.
    pub lr: Vec<u64>,
    pub edges: BTreeSet<(usize, usize)>,
}

impl PGraph {
    pub fn len(&self) -> usize {
        self.ls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ls.is_empty()
    }

    /// Reflexive-free transitive closure as a reachability matrix.
    fn reach(&self) -> Vec<Vec<bool>> {
        let n = self.len();
        let mut r = vec![vec![false; n]; n];
        for &(u, v) in &self.edges {
            r[u][v] = true;
        }
        for k in 0..n {
            for i in 0..n {
                if r[i][k] {
                    for j in 0..n {
                        if r[k][j] {
                            r[i][j] = true;
                        }
                    }
                }
            }
        }
        r
    }

    pub fn is_strongly_connected(&self) -> bool {
        let r = self.reach();
        let n = self.len();
        n > 0 && (0..n).all(|u| (0..n).all(|v| u == v || r[u][v]))
    }

    pub fn display(&self, table: &ProcessTable) -> String {
        let vs: Vec<String> = (0..self.len())
            .map(|v| {
                format!(
                    "{v}:S{}R{}",
                    table.format_set(self.ls[v]),
                    table.format_set(self.lr[v])
                )
            })
            .collect();
        let es: Vec<String> = self.edges.iter().map(|(u, v)| format!("{u}->{v}")).collect();
        format!("[{}] [{}]", vs.join(" "), es.join(" "))
    }
}

fn bit(table: &ProcessTable, s: &SigmaSymbol) -> (usize, usize) {
    let idx = |p| {
        table
            .index(p)
            .unwrap_or_else(|| panic!("process {p} missing from table"))
    };
    (idx(&s.sender), idx(&s.receiver))
}

/// Adds the vertex of `s` with its edges to and from the existing vertices.
pub fn pstep_full(g: &PGraph, s: &SigmaSymbol, table: &ProcessTable) -> PGraph {
    let (p, q) = bit(table, s);
    let mut out = g.clone();
    let v0 = g.len();
    out.ls.push(1 << p);
    out.lr.push(if s.is_matched() { 1 << q } else { 0 });
    for v in 0..v0 {
        if g.ls[v] & (1 << p) != 0 {
            out.edges.insert((v, v0));
        }
        if g.lr[v] & (1 << p) != 0 {
            out.edges.insert((v0, v));
        }
        if s.is_matched() && (g.ls[v] | g.lr[v]) & (1 << q) != 0 {
            out.edges.insert((v, v0));
        }
    }
    out
}

pub fn full_pgraph(w: &SigmaWord, table: &ProcessTable) -> PGraph {
    w.iter()
        .fold(PGraph::default(), |g, s| pstep_full(&g, s, table))
}

/// Prime iff nonempty with a strongly connected full P-graph.
pub fn is_prime_oracle(w: &SigmaWord) -> bool {
    full_pgraph(w, &ProcessTable::of_word(w)).is_strongly_connected()
}

/// Merge, erase and sweep. The result stores its edge relation transitively
/// closed and is canonically numbered. The second component maps every
/// vertex of `g` to the vertex it was merged into, if retained.
pub fn alpha_with_map(g: &PGraph) -> (PGraph, Vec<Option<usize>>) {
    let n = g.len();
    let r = g.reach();

    // merge: one vertex per strongly connected component
    let mut comp = vec![usize::MAX; n];
    let mut count = 0;
    for u in 0..n {
        if comp[u] == usize::MAX {
            for v in u..n {
                if v == u || (r[u][v] && r[v][u]) {
                    comp[v] = count;
                }
            }
            count += 1;
        }
    }
    let mut ls = vec![0u64; count];
    let mut lr = vec![0u64; count];
    let mut reach = vec![vec![false; count]; count];
    for u in 0..n {
        ls[comp[u]] |= g.ls[u];
        lr[comp[u]] |= g.lr[u];
        for v in 0..n {
            if r[u][v] && comp[u] != comp[v] {
                reach[comp[u]][comp[v]] = true;
            }
        }
    }

    // erase: p stays in λ_S only on the last holder, in λ_R on the first and last
    let processes = 64 - ls.iter().chain(&lr).fold(0u64, |a, &b| a | b).leading_zeros() as usize;
    for p in 0..processes {
        let b = 1u64 << p;
        for (labels, keep_min) in [(&mut ls, false), (&mut lr, true)] {
            let holders: Vec<usize> = (0..count).filter(|&v| labels[v] & b != 0).collect();
            if holders.len() < 2 {
                continue;
            }
            for (i, &u) in holders.iter().enumerate() {
                for &v in &holders[i + 1..] {
                    assert!(
                        reach[u][v] || reach[v][u],
                        "holders of a label are not totally ordered"
                    );
                }
            }
            let max = *holders
                .iter()
                .find(|&&u| holders.iter().all(|&v| v == u || reach[v][u]))
                .expect("chain has a maximum");
            let min = *holders
                .iter()
                .find(|&&u| holders.iter().all(|&v| v == u || reach[u][v]))
                .expect("chain has a minimum");
            for &v in &holders {
                if v != max && !(keep_min && v == min) {
                    labels[v] &= !b;
                }
            }
        }
    }

    // sweep labelless vertices sitting between others; merge labelless
    // sources (sinks) with identical successors (predecessors)
    let has_pred = |v: usize| (0..count).any(|u| reach[u][v]);
    let has_succ = |v: usize| (0..count).any(|w| reach[v][w]);
    let mut keep = vec![true; count];
    for v in 0..count {
        if ls[v] == 0 && lr[v] == 0 && has_pred(v) && has_succ(v) {
            keep[v] = false;
        }
    }
    let mut rep: Vec<usize> = (0..count).collect();
    for v in 0..count {
        if !keep[v] || ls[v] != 0 || lr[v] != 0 {
            continue;
        }
        for u in 0..v {
            if !keep[u] || ls[u] != 0 || lr[u] != 0 {
                continue;
            }
            let same_succ = (0..count).all(|w| !keep[w] || reach[u][w] == reach[v][w]);
            let same_pred = (0..count).all(|w| !keep[w] || reach[w][u] == reach[w][v]);
            let source = !has_pred(u) && !has_pred(v);
            let sink = !has_succ(u) && !has_succ(v);
            if (source && same_succ) || (sink && same_pred) {
                keep[v] = false;
                rep[v] = u;
                break;
            }
        }
    }

    let retained: Vec<usize> = (0..count).filter(|&v| keep[v]).collect();
    let mut local = vec![usize::MAX; count];
    for (i, &v) in retained.iter().enumerate() {
        local[v] = i;
    }
    let sub = PGraph {
        ls: retained.iter().map(|&v| ls[v]).collect(),
        lr: retained.iter().map(|&v| lr[v]).collect(),
        edges: retained
            .iter()
            .flat_map(|&u| retained.iter().map(move |&v| (u, v)))
            .filter(|&(u, v)| reach[u][v])
            .map(|(u, v)| (local[u], local[v]))
            .collect(),
    };
    let (canon, perm) = canonicalize(&sub);
    let map = (0..n)
        .map(|u| {
            let c = rep[comp[u]];
            keep[c].then(|| perm[local[c]])
        })
        .collect();
    (canon, map)
}

pub fn alpha(g: &PGraph) -> PGraph {
    alpha_with_map(g).0
}

const PERMUTATION_BUDGET: usize = 5040;

/// Renumbers vertices by (ancestors, labels, descendants), breaking ties by
/// the smallest edge list over permutations within tied groups. Returns the
/// graph and the old-to-new vertex map.
fn canonicalize(g: &PGraph) -> (PGraph, Vec<usize>) {
    let n = g.len();
    let anc = |v: usize| g.edges.iter().filter(|e| e.1 == v).count();
    let desc = |v: usize| g.edges.iter().filter(|e| e.0 == v).count();
    let keys: Vec<_> = (0..n).map(|v| (anc(v), g.ls[v], g.lr[v], desc(v))).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&v| keys[v]);
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for &v in &order {
        match groups.last_mut() {
            Some(gr) if keys[gr[0]] == keys[v] => gr.push(v),
            _ => groups.push(vec![v]),
        }
    }
    let total: usize = groups
        .iter()
        .map(|gr| (1..=gr.len()).product::<usize>())
        .try_fold(1usize, |acc, f| acc.checked_mul(f))
        .unwrap_or(usize::MAX);
    let apply = |order: &[usize]| {
        let mut pos = vec![0; n];
        for (i, &v) in order.iter().enumerate() {
            pos[v] = i;
        }
        let edges: BTreeSet<(usize, usize)> =
            g.edges.iter().map(|&(u, v)| (pos[u], pos[v])).collect();
        (edges, pos)
    };
    let mut best = apply(&order);
    if total > 1 && total <= PERMUTATION_BUDGET {
        let mut current: Vec<Vec<usize>> = groups.clone();
        search(&mut current, 0, &mut |cand: &[Vec<usize>]| {
            let flat: Vec<usize> = cand.iter().flatten().copied().collect();
            let c = apply(&flat);
            if c.0 < best.0 {
                best = c;
            }
        });
    }
    let (edges, pos) = best;
    let mut ls = vec![0; n];
    let mut lr = vec![0; n];
    for v in 0..n {
        ls[pos[v]] = g.ls[v];
        lr[pos[v]] = g.lr[v];
    }
    (PGraph { ls, lr, edges }, pos)
}

fn search(groups: &mut Vec<Vec<usize>>, g: usize, visit: &mut dyn FnMut(&[Vec<usize>])) {
    if g == groups.len() {
        visit(groups);
        return;
    }
    let len = groups[g].len();
    permute(groups, g, 0, len, visit);
}

fn permute(
    groups: &mut Vec<Vec<usize>>,
    g: usize,
    k: usize,
    len: usize,
    visit: &mut dyn FnMut(&[Vec<usize>]),
) {
    if k == len {
        search(groups, g + 1, visit);
        return;
    }
    for i in k..len {
        groups[g].swap(k, i);
        permute(groups, g, k + 1, len, visit);
        groups[g].swap(k, i);
    }
}

/// Transition of the prime recognizer on abstract states.
pub fn prime_step(g: &PGraph, s: &SigmaSymbol, table: &ProcessTable) -> PGraph {
    alpha(&pstep_full(g, s, table))
}

/// Abstract state reached on `w` from the empty graph.
pub fn abstract_run(w: &SigmaWord, table: &ProcessTable) -> PGraph {
    w.iter()
        .fold(PGraph::default(), |g, s| prime_step(&g, s, table))
}

/// The deterministic recognizer of prime words over `alphabet`, expanded
/// lazily with memoized transitions. Accepting states have one vertex.
pub struct PrimeDfa<'a> {
    pub table: &'a ProcessTable,
    pub alphabet: &'a [SigmaSymbol],
    memo: RefCell<HashMap<(PGraph, SigmaSymbol), PGraph>>,
}

impl<'a> PrimeDfa<'a> {
    pub fn new(table: &'a ProcessTable, alphabet: &'a [SigmaSymbol]) -> Self {
        Self {
            table,
            alphabet,
            memo: RefCell::new(HashMap::new()),
        }
    }

    pub fn accepts(&self, w: &SigmaWord) -> bool {
        let mut g = PGraph::default();
        for s in w.iter() {
            g = self.step(&g, s).remove(0);
        }
        self.is_final(&g)
    }
}

impl Automaton for PrimeDfa<'_> {
    type State = PGraph;

    fn initial(&self) -> Vec<PGraph> {
        vec![PGraph::default()]
    }

    fn is_final(&self, g: &PGraph) -> bool {
        g.len() == 1
    }

    fn successors(&self, g: &PGraph) -> Vec<(SigmaSymbol, PGraph)> {
        self.alphabet
            .iter()
            .map(|s| (s.clone(), self.step(g, s).remove(0)))
            .collect()
    }

    fn step(&self, g: &PGraph, s: &SigmaSymbol) -> Vec<PGraph> {
        let key = (g.clone(), s.clone());
        if let Some(t) = self.memo.borrow().get(&key) {
            return vec![t.clone()];
        }
        let t = prime_step(g, s, self.table);
        self.memo.borrow_mut().insert(key, t.clone());
        vec![t]
    }

    fn describe(&self, g: &PGraph) -> String {
        g.display(self.table)
    }
}

/// Bound on abstract states, `2^{6|P|²}`, clamped to `limit`.
pub fn state_bound(processes: usize, limit: usize) -> usize {
    let exp = 6 * processes * processes;
    if exp >= usize::BITS as usize - 1 {
        limit
    } else {
        limit.min(1usize << exp)
    }
}

/// Materializes the prime recognizer over `alphabet`.
pub fn prime_nfa(
    table: &ProcessTable,
    alphabet: &[SigmaSymbol],
    limit: usize,
) -> Result<Nfa, GuardExceeded> {
    let dfa = PrimeDfa::new(table, alphabet);
    Nfa::materialize(&dfa, state_bound(table.len(), limit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conflict::is_prime_msc;
    use crate::fsa::enumerate_language;
    use crate::model::{parse_word, ProcessId};
    use crate::msc::Msc;

    fn w(t: &str) -> SigmaWord {
        parse_word(t).unwrap()
    }

    fn pqr() -> ProcessTable {
        ProcessTable::new(["p", "q", "r"].map(ProcessId::new))
    }

    #[test]
    fn full_steps() {
        let t = pqr();
        let g = full_pgraph(&w("!?m(p->q)"), &t);
        assert_eq!((g.ls.clone(), g.lr.clone()), (vec![1], vec![2]));
        assert!(g.edges.is_empty());
        let g = full_pgraph(&w("!?m1(p->q) !?m2(q->p)"), &t);
        assert_eq!(g.edges, BTreeSet::from([(0, 1), (1, 0)]));
        let g = full_pgraph(&w("!m1(p->q) !m2(p->r)"), &t);
        assert_eq!(g.edges, BTreeSet::from([(0, 1)]));
    }

    #[test]
    fn oracle_examples() {
        assert!(!is_prime_oracle(&w("!?m1(p->q) !?m2(r->q)")));
        assert!(is_prime_oracle(&w("!?m1(p->q) !?m2(q->p)")));
        assert!(!is_prime_oracle(&SigmaWord::default()));
    }

    #[test]
    fn alpha_examples() {
        let t = pqr();
        let cyc = full_pgraph(&w("!?m1(p->q) !?m2(q->p)"), &t);
        let a = alpha(&cyc);
        assert_eq!(a.len(), 1);
        assert_eq!((a.ls[0], a.lr[0]), (0b11, 0b11));
        // chain 0 -> 1 -> 2 with an unlabeled middle vertex
        let chain = PGraph {
            ls: vec![0, 0, 1],
            lr: vec![0, 0, 0],
            edges: BTreeSet::from([(0, 1), (1, 2)]),
        };
        let (a, map) = alpha_with_map(&chain);
        assert_eq!(a.len(), 2);
        assert_eq!(map[1], None);
        assert!(a.edges.contains(&(map[0].unwrap(), map[2].unwrap())));
        let single = full_pgraph(&w("!?m(p->q)"), &t);
        assert_eq!(alpha(&single), single);
        assert_eq!(alpha(&alpha(&chain)), alpha(&chain));
    }

    #[test]
    fn recognizer_examples() {
        let t = pqr();
        assert_eq!(abstract_run(&w("!?m(p->q)"), &t).len(), 1);
        let g = abstract_run(&w("!m1(p->q) !m2(p->r)"), &t);
        assert_eq!(g.len(), 2);
        let alphabet = vec![w("!?m1(p->q)").0[0].clone(), w("!?m2(r->q)").0[0].clone()];
        let dfa = PrimeDfa::new(&t, &alphabet);
        assert!(!dfa.accepts(&SigmaWord::default()));
        let nfa = prime_nfa(&t, &alphabet, 10_000).unwrap();
        for word in enumerate_language(&Nfa::universal(&alphabet), 3, 1000).unwrap() {
            let want = !word.is_empty() && is_prime_msc(&Msc::of_word(&word)).unwrap();
            assert_eq!(nfa.accepts(&word), want, "{word}");
        }
        let x = w("!?m1(p->q) !?m2(q->p) !?m3(p->q)");
        assert_eq!(
            PrimeDfa::new(&t, &[]).accepts(&x),
            is_prime_oracle(&x)
        );
    }

    #[test]
    fn bound() {
        assert_eq!(state_bound(1, 1_000_000), 64);
        assert_eq!(state_bound(3, 1_000_000), 1_000_000);
    }
}
