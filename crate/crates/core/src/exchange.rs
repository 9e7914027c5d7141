//! Automata for exchanges: control-state automata pairing sends with
//! receives, the causal-exchange automaton over buffer states, feasible
//! languages and the fixpoint of reachable languages.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use thiserror::Error;

use crate::conflict::BufferState;
use crate::fsa::{Automaton, Nfa, Product};
use crate::model::{
    global_product, Action, GlobalAutomaton, GlobalState, ProcessTable, SigmaKind, SigmaSymbol,
    SigmaWord, System,
};
use crate::{GuardExceeded, Guards};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExchangeError {
    #[error("{0} is not a reachable global state")]
    UnknownState(String),
    #[error(transparent)]
    Guard(#[from] GuardExceeded),
}

/// Send and receive transitions of every global state.
#[derive(Debug, Clone)]
pub struct ControlIndex {
    sends: Vec<Vec<(Action, usize)>>,
    receives: Vec<Vec<(Action, usize)>>,
    names: Vec<String>,
}

impl ControlIndex {
    pub fn new(ga: &GlobalAutomaton, sys: &System) -> Self {
        let mut sends = vec![Vec::new(); ga.len()];
        let mut receives = vec![Vec::new(); ga.len()];
        for s in 0..ga.len() {
            for (a, t) in ga.successors(s) {
                if a.is_send() {
                    sends[s].push((a.clone(), *t));
                } else {
                    receives[s].push((a.clone(), *t));
                }
            }
        }
        let names = ga.states().iter().map(|g| g.display(sys)).collect();
        Self {
            sends,
            receives,
            names,
        }
    }

    pub fn name(&self, state: usize) -> &str {
        &self.names[state]
    }

    pub fn len(&self) -> usize {
        self.sends.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sends.is_empty()
    }

    /// One control-automaton move from `(send_side, recv_side)`.
    fn asr_moves(&self, send_side: usize, recv_side: usize) -> Vec<(SigmaSymbol, (usize, usize))> {
        let mut out = Vec::new();
        for (a, s2) in &self.sends[send_side] {
            out.push((
                SigmaSymbol::from_send(SigmaKind::Unmatched, a),
                (*s2, recv_side),
            ));
            let dual = a.dual();
            for (b, r2) in &self.receives[recv_side] {
                if *b == dual {
                    out.push((SigmaSymbol::from_send(SigmaKind::Matched, a), (*s2, *r2)));
                }
            }
        }
        out
    }
}

/// Control automaton over pairs `(send_side, recv_side)` of global states:
/// starts at `(in, mid)` and accepts at `(mid, fin)`.
pub struct Asr<'a> {
    pub control: &'a ControlIndex,
    pub start: (usize, usize),
    pub accept: (usize, usize),
}

impl Automaton for Asr<'_> {
    type State = (usize, usize);

    fn initial(&self) -> Vec<(usize, usize)> {
        vec![self.start]
    }

    fn is_final(&self, s: &(usize, usize)) -> bool {
        *s == self.accept
    }

    fn successors(&self, s: &(usize, usize)) -> Vec<(SigmaSymbol, (usize, usize))> {
        self.control.asr_moves(s.0, s.1)
    }

    fn describe(&self, s: &(usize, usize)) -> String {
        format!("({}|{})", self.control.name(s.0), self.control.name(s.1))
    }
}

fn state_id(ga: &GlobalAutomaton, s: &GlobalState, sys: &System) -> Result<usize, ExchangeError> {
    ga.id_of(s)
        .ok_or_else(|| ExchangeError::UnknownState(s.display(sys)))
}

pub fn build_asr(
    sys: &System,
    ga: &GlobalAutomaton,
    l_in: &GlobalState,
    l_mid: &GlobalState,
    l_fin: &GlobalState,
    guards: Guards,
) -> Result<Nfa, ExchangeError> {
    let (i, m, f) = (
        state_id(ga, l_in, sys)?,
        state_id(ga, l_mid, sys)?,
        state_id(ga, l_fin, sys)?,
    );
    let control = ControlIndex::new(ga, sys);
    let asr = Asr {
        control: &control,
        start: (i, m),
        accept: (m, f),
    };
    Ok(Nfa::materialize(&asr, guards.states)?)
}

fn bit(table: &ProcessTable, pid: &crate::model::ProcessId) -> usize {
    table
        .index(pid)
        .unwrap_or_else(|| panic!("process {pid} missing from table"))
}

/// One transition of the causal-exchange automaton with initial state `b0`.
pub fn cd_step(
    b: &BufferState,
    sym: &SigmaSymbol,
    b0: &BufferState,
    table: &ProcessTable,
) -> BufferState {
    let p = bit(table, &sym.sender);
    let q = bit(table, &sym.receiver);
    let has = |mask: u64, i: usize| mask & (1 << i) != 0;
    let mut next = b.clone();
    for r in 0..b.processes() {
        match sym.kind {
            SigmaKind::Matched => {
                let mut c2 = b.cs[r];
                if has(b0.cr[r], p) || has(b.cr[r], q) {
                    c2 |= 1 << p;
                }
                if has(c2, p) {
                    next.cs[r] = c2 | b.cs[q];
                    next.cr[r] = b.cr[r] | 1 << q | b.cr[q];
                }
            }
            SigmaKind::Unmatched => {
                // p's receives from the past precede this send too
                if q == r || has(b.cr[r], q) || has(b0.cr[r], p) {
                    next.cs[r] |= 1 << p;
                }
            }
        }
    }
    next
}

/// Accepting condition of a causal-exchange automaton.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CdTarget {
    Exactly(BufferState),
    AnyGood,
}

/// The causal-exchange automaton: deterministic over `alphabet`, starting
/// from `b0`. States that can no longer reach the target are cut.
pub struct Cd<'a> {
    pub table: &'a ProcessTable,
    pub alphabet: &'a [SigmaSymbol],
    pub b0: BufferState,
    pub target: CdTarget,
}

impl Cd<'_> {
    fn alive(&self, b: &BufferState) -> bool {
        match &self.target {
            CdTarget::Exactly(b1) => b.is_subset(b1),
            CdTarget::AnyGood => b.is_good(),
        }
    }
}

impl Automaton for Cd<'_> {
    type State = BufferState;

    fn initial(&self) -> Vec<BufferState> {
        vec![self.b0.clone()]
    }

    fn is_final(&self, s: &BufferState) -> bool {
        match &self.target {
            CdTarget::Exactly(b1) => s == b1,
            CdTarget::AnyGood => s.is_good(),
        }
    }

    fn successors(&self, s: &BufferState) -> Vec<(SigmaSymbol, BufferState)> {
        self.alphabet
            .iter()
            .flat_map(|a| self.step(s, a).into_iter().map(move |t| (a.clone(), t)))
            .collect()
    }

    fn step(&self, s: &BufferState, sym: &SigmaSymbol) -> Vec<BufferState> {
        if !self.alive(s) {
            return Vec::new();
        }
        let t = cd_step(s, sym, &self.b0, self.table);
        if self.alive(&t) {
            vec![t]
        } else {
            Vec::new()
        }
    }

    fn describe(&self, s: &BufferState) -> String {
        s.display(self.table)
    }
}

pub fn build_cd(
    table: &ProcessTable,
    alphabet: &[SigmaSymbol],
    b0: &BufferState,
    b1: &BufferState,
    guards: Guards,
) -> Result<Nfa, GuardExceeded> {
    let cd = Cd {
        table,
        alphabet,
        b0: b0.clone(),
        target: CdTarget::Exactly(b1.clone()),
    };
    Nfa::materialize(&cd, guards.states)
}

/// The system-level data shared by the exchange constructions.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub system: System,
    pub global: GlobalAutomaton,
    pub control: ControlIndex,
    pub table: ProcessTable,
    pub sigma: Vec<SigmaSymbol>,
    pub guards: Guards,
}

impl Analysis {
    pub fn new(sys: &System, guards: Guards) -> Result<Self, GuardExceeded> {
        let global = global_product(sys, guards.states)?;
        Ok(Self {
            system: sys.clone(),
            control: ControlIndex::new(&global, sys),
            global,
            table: sys.process_table(),
            sigma: sys.sigma(),
            guards,
        })
    }

    pub fn state(&self, text: &str) -> Result<usize, ExchangeError> {
        GlobalState::parse(text, &self.system)
            .and_then(|s| self.global.id_of(&s))
            .ok_or_else(|| ExchangeError::UnknownState(text.to_string()))
    }

    pub fn empty_buffers(&self) -> BufferState {
        BufferState::empty(self.table.len())
    }

    /// `⋃_mid L(A_SR(in, mid, fin)) ∩ 𝓛(B, B')`, one product per `mid`.
    pub fn feasible(
        &self,
        l_in: usize,
        l_fin: usize,
        b: &BufferState,
        b2: &BufferState,
    ) -> Result<Nfa, GuardExceeded> {
        let mut parts = Vec::new();
        for mid in 0..self.global.len() {
            let asr = Asr {
                control: &self.control,
                start: (l_in, mid),
                accept: (mid, l_fin),
            };
            let cd = Cd {
                table: &self.table,
                alphabet: &self.sigma,
                b0: b.clone(),
                target: CdTarget::Exactly(b2.clone()),
            };
            let part = Nfa::materialize(&Product { left: &asr, right: &cd }, self.guards.states)?;
            if !part.is_language_empty() {
                parts.push(part.trim());
            }
        }
        Ok(Nfa::union(&parts))
    }
}

/// A vertex of the reach graph: a global control state with a buffer state
/// in ℬ_good.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ReachNode {
    pub control: usize,
    pub buffers: BufferState,
}

/// State of [`NodeLanguage`]: `(mid, send_side, recv_side, buffers)`.
pub type NodeState = (usize, usize, usize, BufferState);

/// All exchanges leaving a node: the union over `mid` of the control
/// automata from the node's control state, in product with the
/// causal-exchange automaton from its buffer state, accepting with any good
/// buffer state. A final state `(mid, mid, fin, B)` leads to node `(fin, B)`.
pub struct NodeLanguage<'a> {
    pub analysis: &'a Analysis,
    pub source: ReachNode,
}

impl Automaton for NodeLanguage<'_> {
    type State = NodeState;

    fn initial(&self) -> Vec<NodeState> {
        (0..self.analysis.global.len())
            .map(|mid| (mid, self.source.control, mid, self.source.buffers.clone()))
            .collect()
    }

    fn is_final(&self, s: &NodeState) -> bool {
        s.0 == s.1 && s.3.is_good()
    }

    fn successors(&self, s: &NodeState) -> Vec<(SigmaSymbol, NodeState)> {
        let (mid, send, recv, b) = s;
        self.analysis
            .control
            .asr_moves(*send, *recv)
            .into_iter()
            .filter_map(|(sym, (s2, r2))| {
                let b2 = cd_step(b, &sym, &self.source.buffers, &self.analysis.table);
                b2.is_good().then_some((sym, (*mid, s2, r2, b2)))
            })
            .collect()
    }

    fn describe(&self, s: &NodeState) -> String {
        let c = &self.analysis.control;
        format!(
            "mid {} | {} | {} | {}",
            c.name(s.0),
            c.name(s.1),
            c.name(s.2),
            s.3.display(&self.analysis.table)
        )
    }
}

/// The materialized exchanges leaving one reach node.
#[derive(Debug, Clone)]
pub struct NodeProduct {
    pub nfa: Nfa,
    /// Target node of each final state.
    pub targets: BTreeMap<usize, usize>,
    /// Shortest word per target node.
    pub witnesses: BTreeMap<usize, SigmaWord>,
}

impl NodeProduct {
    /// `F(l1, l2, B1, B2)` for the target node `target`.
    pub fn edge_language(&self, target: usize) -> Nfa {
        let mut nfa = self.nfa.clone();
        nfa.finals = self
            .targets
            .iter()
            .filter(|(_, &t)| t == target)
            .map(|(&s, _)| s)
            .collect();
        nfa
    }

    /// Target nodes reached by `word`.
    pub fn targets_of(&self, word: &SigmaWord) -> BTreeSet<usize> {
        let mut current: BTreeSet<usize> = self.nfa.initial.iter().copied().collect();
        for sym in word.iter() {
            current = current
                .iter()
                .flat_map(|s| Automaton::step(&self.nfa, s, sym))
                .collect();
        }
        current
            .iter()
            .filter_map(|s| self.targets.get(s).copied())
            .collect()
    }
}

/// Least fixpoint of reachable languages, rooted at the initial control
/// state with empty buffers; edges carry nonempty feasible languages.
#[derive(Debug, Clone)]
pub struct ReachGraph {
    pub analysis: Analysis,
    pub nodes: Vec<ReachNode>,
    pub products: Vec<NodeProduct>,
    pub edges: BTreeSet<(usize, usize)>,
}

impl ReachGraph {
    pub const ROOT: usize = 0;

    pub fn build(sys: &System, guards: Guards) -> Result<Self, GuardExceeded> {
        let analysis = Analysis::new(sys, guards)?;
        let root = ReachNode {
            control: GlobalAutomaton::INITIAL,
            buffers: analysis.empty_buffers(),
        };
        let mut nodes = vec![root.clone()];
        let mut index = HashMap::from([(root, 0usize)]);
        let mut products = Vec::new();
        let mut edges = BTreeSet::new();
        let mut queue = VecDeque::from([0usize]);
        while let Some(n) = queue.pop_front() {
            let lang = NodeLanguage {
                analysis: &analysis,
                source: nodes[n].clone(),
            };
            let (nfa, states) = Nfa::materialize_with(&lang, guards.states)?;
            let mut entered = vec![false; nfa.len()];
            for &(_, t) in nfa.transitions.iter().flatten() {
                entered[t] = true;
            }
            let mut targets = BTreeMap::new();
            for &f in &nfa.finals {
                let (_, _, fin, b) = &states[f];
                let node = ReachNode {
                    control: *fin,
                    buffers: b.clone(),
                };
                let id = match index.get(&node) {
                    Some(&id) => id,
                    // only ε leads here: the source itself
                    None if !entered[f] => n,
                    None => {
                        if nodes.len() >= guards.states {
                            return Err(GuardExceeded::new("reach fixpoint", guards.states));
                        }
                        let id = nodes.len();
                        nodes.push(node.clone());
                        index.insert(node, id);
                        queue.push_back(id);
                        id
                    }
                };
                targets.insert(f, id);
                if entered[f] {
                    edges.insert((n, id));
                }
            }
            let witnesses = shortest_witnesses(&nfa, &targets);
            products.push(NodeProduct {
                nfa,
                targets,
                witnesses,
            });
        }
        Ok(Self {
            analysis,
            nodes,
            products,
            edges,
        })
    }

    /// Recognizer of reachable exchanges: the union of every node's
    /// outgoing languages.
    pub fn language(&self) -> Nfa {
        let parts: Vec<Nfa> = self.products.iter().map(|p| p.nfa.trim()).collect();
        Nfa::union(&parts)
    }

    /// Shortest sequence of edge witness words leading from the root to
    /// `node`.
    pub fn path_to(&self, node: usize) -> Option<Vec<SigmaWord>> {
        let mut prev: HashMap<usize, Option<usize>> = HashMap::from([(Self::ROOT, None)]);
        let mut queue = VecDeque::from([Self::ROOT]);
        while let Some(n) = queue.pop_front() {
            if n == node {
                let mut path = Vec::new();
                let mut cur = n;
                while let Some(Some(p)) = prev.get(&cur) {
                    path.push(self.products[*p].witnesses[&cur].clone());
                    cur = *p;
                }
                path.reverse();
                return Some(path);
            }
            for &(_, t) in self.edges.range((n, 0)..(n + 1, 0)) {
                if let std::collections::hash_map::Entry::Vacant(e) = prev.entry(t) {
                    e.insert(Some(n));
                    queue.push_back(t);
                }
            }
        }
        None
    }

    pub fn describe_node(&self, node: usize) -> String {
        let n = &self.nodes[node];
        format!(
            "({}) {}",
            self.analysis.global.state(n.control).display(&self.analysis.system),
            n.buffers.display(&self.analysis.table)
        )
    }
}

fn shortest_witnesses(nfa: &Nfa, targets: &BTreeMap<usize, usize>) -> BTreeMap<usize, SigmaWord> {
    let mut prev: HashMap<usize, Option<(usize, SigmaSymbol)>> = HashMap::new();
    let mut queue = VecDeque::new();
    for &i in &nfa.initial {
        prev.insert(i, None);
        queue.push_back(i);
    }
    let mut out = BTreeMap::new();
    while let Some(s) = queue.pop_front() {
        if let Some(&t) = targets.get(&s) {
            out.entry(t).or_insert_with(|| {
                let mut word = Vec::new();
                let mut cur = s;
                while let Some(Some((p, a))) = prev.get(&cur) {
                    word.push(a.clone());
                    cur = *p;
                }
                word.reverse();
                SigmaWord(word)
            });
        }
        for (a, t) in &nfa.transitions[s] {
            if !prev.contains_key(t) {
                prev.insert(*t, Some((s, a.clone())));
                queue.push_back(*t);
            }
        }
    }
    out
}

/// Recognizer of `L_reach`.
pub fn reach_language(sys: &System, guards: Guards) -> Result<Nfa, GuardExceeded> {
    Ok(ReachGraph::build(sys, guards)?.language())
}
