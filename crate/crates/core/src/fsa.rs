//! Finite automata over Σ: lazy construction through a successor function,
//! products, emptiness, longest words and enumeration.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt::Debug;
use std::hash::Hash;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{SigmaSymbol, SigmaWord};
use crate::GuardExceeded;

/// An automaton given by its initial states, acceptance test and successor
/// function; only the part reachable from the initial states is ever built.
pub trait Automaton {
    type State: Clone + Eq + Hash + Debug;

    fn initial(&self) -> Vec<Self::State>;

    fn is_final(&self, s: &Self::State) -> bool;

    fn successors(&self, s: &Self::State) -> Vec<(SigmaSymbol, Self::State)>;

    fn step(&self, s: &Self::State, sym: &SigmaSymbol) -> Vec<Self::State> {
        self.successors(s)
            .into_iter()
            .filter(|(a, _)| a == sym)
            .map(|(_, t)| t)
            .collect()
    }

    fn describe(&self, s: &Self::State) -> String {
        format!("{s:?}")
    }
}

/// A materialized automaton with states `0..len`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Nfa {
    pub initial: Vec<usize>,
    pub finals: BTreeSet<usize>,
    /// Sorted outgoing transitions per state.
    pub transitions: Vec<Vec<(SigmaSymbol, usize)>>,
    pub labels: Vec<String>,
}

impl Nfa {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn add_state(&mut self, label: impl Into<String>) -> usize {
        self.transitions.push(Vec::new());
        self.labels.push(label.into());
        self.transitions.len() - 1
    }

    pub fn add_transition(&mut self, from: usize, sym: SigmaSymbol, to: usize) {
        let out = &mut self.transitions[from];
        if let Err(pos) = out.binary_search(&(sym.clone(), to)) {
            out.insert(pos, (sym, to));
        }
    }

    pub fn transition_count(&self) -> usize {
        self.transitions.iter().map(Vec::len).sum()
    }

    /// Explores `a` from its initial states.
    pub fn materialize<A: Automaton>(a: &A, limit: usize) -> Result<Nfa, GuardExceeded> {
        Self::materialize_with(a, limit).map(|(nfa, _)| nfa)
    }

    /// As [`Nfa::materialize`], also returning the state behind each index.
    pub fn materialize_with<A: Automaton>(
        a: &A,
        limit: usize,
    ) -> Result<(Nfa, Vec<A::State>), GuardExceeded> {
        let mut nfa = Nfa::default();
        let mut states: Vec<A::State> = Vec::new();
        let mut index: HashMap<A::State, usize> = HashMap::new();
        let mut queue = VecDeque::new();
        let mut intern = |s: A::State,
                          nfa: &mut Nfa,
                          states: &mut Vec<A::State>,
                          queue: &mut VecDeque<usize>|
         -> Result<usize, GuardExceeded> {
            if let Some(&i) = index.get(&s) {
                return Ok(i);
            }
            if states.len() >= limit {
                return Err(GuardExceeded::new("automaton construction", limit));
            }
            let i = nfa.add_state(a.describe(&s));
            if a.is_final(&s) {
                nfa.finals.insert(i);
            }
            index.insert(s.clone(), i);
            states.push(s);
            queue.push_back(i);
            Ok(i)
        };
        for s in a.initial() {
            let i = intern(s, &mut nfa, &mut states, &mut queue)?;
            if !nfa.initial.contains(&i) {
                nfa.initial.push(i);
            }
        }
        while let Some(i) = queue.pop_front() {
            for (sym, t) in a.successors(&states[i].clone()) {
                let j = intern(t, &mut nfa, &mut states, &mut queue)?;
                nfa.add_transition(i, sym, j);
            }
        }
        Ok((nfa, states))
    }

    /// Accepts exactly the given words.
    pub fn from_words<'a>(words: impl IntoIterator<Item = &'a SigmaWord>) -> Nfa {
        let mut nfa = Nfa::default();
        let root = nfa.add_state("");
        nfa.initial.push(root);
        for w in words {
            let mut s = root;
            for sym in w.iter() {
                s = match nfa.transitions[s].iter().find(|(a, _)| a == sym) {
                    Some(&(_, t)) => t,
                    None => {
                        let t = nfa.add_state("");
                        nfa.add_transition(s, sym.clone(), t);
                        t
                    }
                };
            }
            nfa.finals.insert(s);
        }
        nfa
    }

    /// Σ* over `alphabet`.
    pub fn universal(alphabet: &[SigmaSymbol]) -> Nfa {
        let mut nfa = Nfa::default();
        let s = nfa.add_state("*");
        nfa.initial.push(s);
        nfa.finals.insert(s);
        for a in alphabet {
            nfa.add_transition(s, a.clone(), s);
        }
        nfa
    }

    /// Disjoint union.
    pub fn union(parts: &[Nfa]) -> Nfa {
        let mut out = Nfa::default();
        for part in parts {
            let offset = out.len();
            for (i, label) in part.labels.iter().enumerate() {
                out.add_state(label.clone());
                out.transitions[offset + i] = part.transitions[i]
                    .iter()
                    .map(|(a, t)| (a.clone(), t + offset))
                    .collect();
            }
            out.initial.extend(part.initial.iter().map(|i| i + offset));
            out.finals.extend(part.finals.iter().map(|i| i + offset));
        }
        out
    }

    pub fn accepts(&self, word: &SigmaWord) -> bool {
        let mut current: BTreeSet<usize> = self.initial.iter().copied().collect();
        for sym in word.iter() {
            current = self.step_set(&current, sym);
            if current.is_empty() {
                return false;
            }
        }
        current.iter().any(|s| self.finals.contains(s))
    }

    /// Symbols used by some transition, sorted.
    pub fn alphabet(&self) -> Vec<SigmaSymbol> {
        let set: BTreeSet<&SigmaSymbol> =
            self.transitions.iter().flatten().map(|(a, _)| a).collect();
        set.into_iter().cloned().collect()
    }

    fn reachable(&self) -> Vec<bool> {
        let mut seen = vec![false; self.len()];
        let mut stack: Vec<usize> = self.initial.clone();
        for &i in &stack {
            seen[i] = true;
        }
        while let Some(s) = stack.pop() {
            for &(_, t) in &self.transitions[s] {
                if !seen[t] {
                    seen[t] = true;
                    stack.push(t);
                }
            }
        }
        seen
    }

    fn coreachable(&self) -> Vec<bool> {
        let mut rev: Vec<Vec<usize>> = vec![Vec::new(); self.len()];
        for (s, out) in self.transitions.iter().enumerate() {
            for &(_, t) in out {
                rev[t].push(s);
            }
        }
        let mut seen = vec![false; self.len()];
        let mut stack: Vec<usize> = self.finals.iter().copied().collect();
        for &i in &stack {
            seen[i] = true;
        }
        while let Some(s) = stack.pop() {
            for &p in &rev[s] {
                if !seen[p] {
                    seen[p] = true;
                    stack.push(p);
                }
            }
        }
        seen
    }

    /// States both reachable and co-reachable.
    pub fn useful(&self) -> Vec<bool> {
        let r = self.reachable();
        let c = self.coreachable();
        r.iter().zip(&c).map(|(a, b)| *a && *b).collect()
    }

    pub fn is_language_empty(&self) -> bool {
        !self.useful().iter().any(|&u| u)
    }

    /// Restricts to useful states, renumbering them.
    pub fn trim(&self) -> Nfa {
        let useful = self.useful();
        let mut map = vec![usize::MAX; self.len()];
        let mut out = Nfa::default();
        for s in (0..self.len()).filter(|&s| useful[s]) {
            map[s] = out.add_state(self.labels[s].clone());
        }
        for s in (0..self.len()).filter(|&s| useful[s]) {
            for (a, t) in &self.transitions[s] {
                if useful[*t] {
                    out.add_transition(map[s], a.clone(), map[*t]);
                }
            }
        }
        out.initial = self.initial.iter().filter(|&&i| useful[i]).map(|&i| map[i]).collect();
        out.finals = self.finals.iter().filter(|&&i| useful[i]).map(|&i| map[i]).collect();
        out
    }
}

impl Automaton for Nfa {
    type State = usize;

    fn initial(&self) -> Vec<usize> {
        self.initial.clone()
    }

    fn is_final(&self, s: &usize) -> bool {
        self.finals.contains(s)
    }

    fn successors(&self, s: &usize) -> Vec<(SigmaSymbol, usize)> {
        self.transitions[*s].clone()
    }

    fn step(&self, s: &usize, sym: &SigmaSymbol) -> Vec<usize> {
        let out = &self.transitions[*s];
        let start = out.partition_point(|(a, _)| a < sym);
        out[start..]
            .iter()
            .take_while(|(a, _)| a == sym)
            .map(|&(_, t)| t)
            .collect()
    }

    fn describe(&self, s: &usize) -> String {
        self.labels[*s].clone()
    }
}

impl Nfa {
    fn step_set(&self, current: &BTreeSet<usize>, sym: &SigmaSymbol) -> BTreeSet<usize> {
        current
            .iter()
            .flat_map(|s| Automaton::step(self, s, sym))
            .collect()
    }
}

/// Synchronous product of two automata.
pub struct Product<'a, A, B> {
    pub left: &'a A,
    pub right: &'a B,
}

impl<A: Automaton, B: Automaton> Automaton for Product<'_, A, B> {
    type State = (A::State, B::State);

    fn initial(&self) -> Vec<Self::State> {
        let mut out = Vec::new();
        for a in self.left.initial() {
            for b in self.right.initial() {
                out.push((a.clone(), b));
            }
        }
        out
    }

    fn is_final(&self, s: &Self::State) -> bool {
        self.left.is_final(&s.0) && self.right.is_final(&s.1)
    }

    fn successors(&self, s: &Self::State) -> Vec<(SigmaSymbol, Self::State)> {
        let mut out = Vec::new();
        for (sym, a) in self.left.successors(&s.0) {
            for b in self.right.step(&s.1, &sym) {
                out.push((sym.clone(), (a.clone(), b)));
            }
        }
        out
    }

    fn describe(&self, s: &Self::State) -> String {
        format!("{} | {}", self.left.describe(&s.0), self.right.describe(&s.1))
    }
}

/// `L(a) ∩ L(b)`, built from the initial pairs.
pub fn intersect(a: &Nfa, b: &Nfa, limit: usize) -> Result<Nfa, GuardExceeded> {
    Nfa::materialize(&Product { left: a, right: b }, limit)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum LengthVerdict {
    Empty,
    Finite { length: usize, witness: SigmaWord },
    /// `prefix · cycle^n · suffix` is accepted for every `n`.
    Infinite {
        prefix: SigmaWord,
        cycle: SigmaWord,
        suffix: SigmaWord,
        /// State index (in the untrimmed automaton) where the cycle starts.
        state: usize,
    },
}

fn path_word(nfa: &Nfa, from: &[usize], to: usize, allowed: &[bool]) -> Option<SigmaWord> {
    let mut prev: HashMap<usize, Option<(usize, SigmaSymbol)>> = HashMap::new();
    let mut queue = VecDeque::new();
    for &s in from {
        if allowed[s] && !prev.contains_key(&s) {
            prev.insert(s, None);
            queue.push_back(s);
        }
    }
    while let Some(s) = queue.pop_front() {
        if s == to {
            let mut word = Vec::new();
            let mut cur = s;
            while let Some(Some((p, a))) = prev.get(&cur) {
                word.push(a.clone());
                cur = *p;
            }
            word.reverse();
            return Some(SigmaWord(word));
        }
        for (a, t) in &nfa.transitions[s] {
            if allowed[*t] && !prev.contains_key(t) {
                prev.insert(*t, Some((s, a.clone())));
                queue.push_back(*t);
            }
        }
    }
    None
}

/// Finiteness and longest accepted word.
pub fn longest_word(nfa: &Nfa) -> LengthVerdict {
    let useful = nfa.useful();
    if !useful.iter().any(|&u| u) {
        return LengthVerdict::Empty;
    }
    // Kahn's algorithm over useful states; leftovers lie on or behind cycles
    let n = nfa.len();
    let mut indegree = vec![0usize; n];
    for s in (0..n).filter(|&s| useful[s]) {
        for &(_, t) in &nfa.transitions[s] {
            if useful[t] {
                indegree[t] += 1;
            }
        }
    }
    let mut order = Vec::new();
    let mut queue: VecDeque<usize> = (0..n).filter(|&s| useful[s] && indegree[s] == 0).collect();
    while let Some(s) = queue.pop_front() {
        order.push(s);
        for &(_, t) in &nfa.transitions[s] {
            if useful[t] {
                indegree[t] -= 1;
                if indegree[t] == 0 {
                    queue.push_back(t);
                }
            }
        }
    }
    if order.len() < useful.iter().filter(|&&u| u).count() {
        // some useful state lies on a cycle: find one and its cycle word
        for s in (0..n).filter(|&s| useful[s] && indegree[s] > 0) {
            let back = nfa.transitions[s]
                .iter()
                .filter(|(_, t)| useful[*t])
                .find_map(|(a, t)| {
                    path_word(nfa, &[*t], s, &useful).map(|w| {
                        let mut c = vec![a.clone()];
                        c.extend(w.0);
                        SigmaWord(c)
                    })
                });
            if let Some(cycle) = back {
                let prefix = path_word(nfa, &nfa.initial, s, &useful).expect("reachable");
                let suffix = nfa
                    .finals
                    .iter()
                    .filter(|&&f| useful[f])
                    .filter_map(|&f| path_word(nfa, &[s], f, &useful))
                    .min_by_key(SigmaWord::len)
                    .expect("co-reachable");
                return LengthVerdict::Infinite {
                    prefix,
                    cycle,
                    suffix,
                    state: s,
                };
            }
        }
        unreachable!("a useful state with positive residual in-degree lies on a cycle");
    }
    let mut best: Vec<Option<(usize, Option<(usize, SigmaSymbol)>)>> = vec![None; n];
    for &i in &nfa.initial {
        if useful[i] {
            best[i] = Some((0, None));
        }
    }
    for &s in &order {
        let Some((d, _)) = best[s].clone() else { continue };
        for (a, t) in &nfa.transitions[s] {
            if useful[*t] && best[*t].as_ref().is_none_or(|(e, _)| *e < d + 1) {
                best[*t] = Some((d + 1, Some((s, a.clone()))));
            }
        }
    }
    let (end, length) = nfa
        .finals
        .iter()
        .filter_map(|&f| best[f].as_ref().map(|(d, _)| (f, *d)))
        .max_by_key(|&(f, d)| (d, std::cmp::Reverse(f)))
        .expect("a useful final state exists");
    let mut word = Vec::new();
    let mut cur = end;
    while let Some((_, Some((p, a)))) = &best[cur] {
        word.push(a.clone());
        cur = *p;
    }
    word.reverse();
    LengthVerdict::Finite {
        length,
        witness: SigmaWord(word),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("more than {0} words")]
pub struct EnumerationCap(pub usize);

/// Accepted words of length at most `max_len`, shortest first, then in
/// lexicographic symbol order.
pub fn enumerate_language(
    nfa: &Nfa,
    max_len: usize,
    cap: usize,
) -> Result<Vec<SigmaWord>, EnumerationCap> {
    let useful = nfa.useful();
    let alphabet = nfa.alphabet();
    let start: BTreeSet<usize> = nfa.initial.iter().copied().filter(|&s| useful[s]).collect();
    let mut out = Vec::new();
    for len in 0..=max_len {
        let mut stack: Vec<SigmaSymbol> = Vec::new();
        collect(nfa, &useful, &alphabet, &start, len, &mut stack, &mut out, cap)?;
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn collect(
    nfa: &Nfa,
    useful: &[bool],
    alphabet: &[SigmaSymbol],
    current: &BTreeSet<usize>,
    remaining: usize,
    stack: &mut Vec<SigmaSymbol>,
    out: &mut Vec<SigmaWord>,
    cap: usize,
) -> Result<(), EnumerationCap> {
    if remaining == 0 {
        if current.iter().any(|s| nfa.finals.contains(s)) {
            if out.len() >= cap {
                return Err(EnumerationCap(cap));
            }
            out.push(SigmaWord(stack.clone()));
        }
        return Ok(());
    }
    for a in alphabet {
        let next: BTreeSet<usize> = nfa
            .step_set(current, a)
            .into_iter()
            .filter(|&s| useful[s])
            .collect();
        if next.is_empty() {
            continue;
        }
        stack.push(a.clone());
        collect(nfa, useful, alphabet, &next, remaining - 1, stack, out, cap)?;
        stack.pop();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_word;

    fn w(t: &str) -> SigmaWord {
        parse_word(t).unwrap()
    }

    fn example1() -> Vec<SigmaWord> {
        vec![
            w("!?a(p->r) !c(p->q) !?b(r->q)"),
            w("!?a(p->r) !?b(r->q) !c(p->q)"),
            w("!?b(r->q) !?a(p->r) !c(p->q)"),
        ]
    }

    #[test]
    fn intersection_with_universal() {
        let words = example1();
        let b = Nfa::from_words(&words);
        let all = Nfa::universal(&b.alphabet());
        let p = intersect(&all, &b, 1000).unwrap();
        assert_eq!(
            enumerate_language(&p, 4, 100).unwrap(),
            enumerate_language(&b, 4, 100).unwrap()
        );
        let x = Nfa::from_words(&[w("!?a(p->r)")]);
        let y = Nfa::from_words(&[w("!?b(r->q)")]);
        assert!(intersect(&x, &y, 100).unwrap().is_language_empty());
    }

    #[test]
    fn longest() {
        let nfa = Nfa::from_words(&example1());
        match longest_word(&nfa) {
            LengthVerdict::Finite { length, witness } => {
                assert_eq!(length, 3);
                assert!(nfa.accepts(&witness));
            }
            v => panic!("{v:?}"),
        }
        assert_eq!(longest_word(&Nfa::default()), LengthVerdict::Empty);
        let sym = w("!a(p->q)").0[0].clone();
        let looped = Nfa::universal(&[sym]);
        assert!(matches!(longest_word(&looped), LengthVerdict::Infinite { .. }));
    }

    #[test]
    fn enumeration_order() {
        let mut nfa = Nfa::from_words(&example1());
        let got = enumerate_language(&nfa, 3, 100).unwrap();
        let mut want = example1();
        want.sort();
        assert_eq!(got, want);
        assert!(enumerate_language(&nfa, 0, 100).unwrap().is_empty());
        nfa.finals.insert(nfa.initial[0]);
        assert_eq!(enumerate_language(&nfa, 0, 100).unwrap(), vec![SigmaWord::default()]);
        assert!(enumerate_language(&Nfa::default(), 3, 100).unwrap().is_empty());
        assert_eq!(enumerate_language(&nfa, 3, 2), Err(EnumerationCap(2)));
    }

    #[test]
    fn union_and_trim() {
        let a = Nfa::from_words(&[w("!?a(p->r)")]);
        let b = Nfa::from_words(&[w("!?b(r->q)")]);
        let u = Nfa::union(&[a, b]);
        assert!(u.accepts(&w("!?a(p->r)")));
        assert!(u.accepts(&w("!?b(r->q)")));
        assert!(!u.accepts(&w("!?a(p->r) !?b(r->q)")));
        let mut dead = u.clone();
        let d = dead.add_state("dead");
        dead.add_transition(0, w("!c(p->q)").0[0].clone(), d);
        assert_eq!(dead.trim().len(), u.len());
    }
}
