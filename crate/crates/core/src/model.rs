//! Processes, actions, systems of communicating automata and their control
//! product, plus the exchange alphabet (Σ) and the on-disk formats.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::GuardExceeded;

/// Name of a process.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProcessId(String);

impl ProcessId {
    pub fn new(name: impl Into<String>) -> Self {
        Self(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ProcessId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Name of a message.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Payload(String);

impl Payload {
    pub fn new(name: impl Into<String>) -> Self {
        Self(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Payload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ActionKind {
    Send,
    Receive,
}

/// `send(m, p, q)` or `rec(m, p, q)`. A send executes on `sender`, a receive
/// on `receiver`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Action {
    pub kind: ActionKind,
    pub sender: ProcessId,
    pub receiver: ProcessId,
    pub payload: Payload,
}

impl Action {
    pub fn send(payload: &str, sender: &str, receiver: &str) -> Self {
        Self {
            kind: ActionKind::Send,
            sender: ProcessId::new(sender),
            receiver: ProcessId::new(receiver),
            payload: Payload::new(payload),
        }
    }

    pub fn receive(payload: &str, sender: &str, receiver: &str) -> Self {
        Self {
            kind: ActionKind::Receive,
            ..Self::send(payload, sender, receiver)
        }
    }

    pub fn is_send(&self) -> bool {
        self.kind == ActionKind::Send
    }

    /// The process executing this action.
    pub fn process(&self) -> &ProcessId {
        match self.kind {
            ActionKind::Send => &self.sender,
            ActionKind::Receive => &self.receiver,
        }
    }

    /// The receive matching this send (or the send matching this receive).
    pub fn dual(&self) -> Action {
        Action {
            kind: match self.kind {
                ActionKind::Send => ActionKind::Receive,
                ActionKind::Receive => ActionKind::Send,
            },
            ..self.clone()
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mark = match self.kind {
            ActionKind::Send => "!",
            ActionKind::Receive => "?",
        };
        write!(f, "{mark}{}({}->{})", self.payload, self.sender, self.receiver)
    }
}

/// One transition of a local automaton. States are indices into
/// [`LocalAutomaton::states`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Transition {
    pub from: usize,
    pub action: Action,
    pub to: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalAutomaton {
    pub states: Vec<String>,
    pub initial: usize,
    pub transitions: Vec<Transition>,
}

impl LocalAutomaton {
    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }
}

/// A system: an ordered family of local automata over a common message set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct System {
    pub name: String,
    processes: Vec<(ProcessId, LocalAutomaton)>,
    payloads: BTreeSet<Payload>,
}

impl System {
    /// Validates and assembles a system. The payload set is the set of
    /// payloads used by transitions.
    pub fn new(
        name: impl Into<String>,
        processes: Vec<(ProcessId, LocalAutomaton)>,
    ) -> Result<Self, SystemError> {
        if processes.is_empty() {
            return Err(SystemError::NoProcesses);
        }
        let mut seen = BTreeSet::new();
        for (pid, _) in &processes {
            if pid.as_str().is_empty() {
                return Err(SystemError::EmptyName);
            }
            if !seen.insert(pid.clone()) {
                return Err(SystemError::DuplicateProcess(pid.clone()));
            }
        }
        let mut payloads = BTreeSet::new();
        for (pid, aut) in &processes {
            if aut.initial >= aut.states.len() {
                return Err(SystemError::MissingInit(pid.clone()));
            }
            let mut names = BTreeSet::new();
            for s in &aut.states {
                if !names.insert(s) {
                    return Err(SystemError::DuplicateState(pid.clone(), s.clone()));
                }
            }
            for t in &aut.transitions {
                if t.from >= aut.states.len() || t.to >= aut.states.len() {
                    return Err(SystemError::UnknownState(pid.clone()));
                }
                for other in [&t.action.sender, &t.action.receiver] {
                    if !seen.contains(other) {
                        return Err(SystemError::UndeclaredProcess(other.clone()));
                    }
                }
                if t.action.process() != pid {
                    return Err(SystemError::WrongOwner {
                        process: pid.clone(),
                        action: t.action.to_string(),
                    });
                }
                payloads.insert(t.action.payload.clone());
            }
        }
        Ok(Self {
            name: name.into(),
            processes,
            payloads,
        })
    }

    pub fn processes(&self) -> &[(ProcessId, LocalAutomaton)] {
        &self.processes
    }

    pub fn process_ids(&self) -> impl Iterator<Item = &ProcessId> {
        self.processes.iter().map(|(p, _)| p)
    }

    pub fn process_count(&self) -> usize {
        self.processes.len()
    }

    pub fn process_index(&self, pid: &ProcessId) -> Option<usize> {
        self.processes.iter().position(|(p, _)| p == pid)
    }

    pub fn automaton(&self, index: usize) -> &LocalAutomaton {
        &self.processes[index].1
    }

    pub fn payloads(&self) -> &BTreeSet<Payload> {
        &self.payloads
    }

    pub fn local_state_count(&self) -> usize {
        self.processes.iter().map(|(_, a)| a.states.len()).sum()
    }

    pub fn process_table(&self) -> ProcessTable {
        ProcessTable::new(self.process_ids().cloned())
    }

    /// Σ restricted to the channels and payloads of send transitions, both
    /// matched and unmatched.
    pub fn sigma(&self) -> Vec<SigmaSymbol> {
        let mut out = BTreeSet::new();
        for (_, aut) in &self.processes {
            for t in aut.transitions.iter().filter(|t| t.action.is_send()) {
                for kind in [SigmaKind::Matched, SigmaKind::Unmatched] {
                    out.insert(SigmaSymbol::from_send(kind, &t.action));
                }
            }
        }
        out.into_iter().collect()
    }

    pub fn has_self_sends(&self) -> bool {
        self.processes
            .iter()
            .flat_map(|(_, a)| a.transitions.iter())
            .any(|t| t.action.sender == t.action.receiver)
    }
}

/// Writes the line-based system format accepted by [`parse_system`].
impl fmt::Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "system {}", self.name)?;
        for (pid, aut) in &self.processes {
            writeln!(f, "process {pid}")?;
            writeln!(f, "  init {}", aut.states[aut.initial])?;
            for t in &aut.transitions {
                let (from, to) = (&aut.states[t.from], &aut.states[t.to]);
                match t.action.kind {
                    ActionKind::Send => writeln!(
                        f,
                        "  {from} -> {to} : ! {} to {}",
                        t.action.payload, t.action.receiver
                    )?,
                    ActionKind::Receive => writeln!(
                        f,
                        "  {from} -> {to} : ? {} from {}",
                        t.action.payload, t.action.sender
                    )?,
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SystemError {
    #[error("no processes")]
    NoProcesses,
    #[error("empty process name")]
    EmptyName,
    #[error("duplicate process {0}")]
    DuplicateProcess(ProcessId),
    #[error("duplicate state {1} in process {0}")]
    DuplicateState(ProcessId, String),
    #[error("process {0} has no init state")]
    MissingInit(ProcessId),
    #[error("transition of process {0} references an unknown state")]
    UnknownState(ProcessId),
    #[error("undeclared process {0}")]
    UndeclaredProcess(ProcessId),
    #[error("action {action} does not execute on process {process}")]
    WrongOwner { process: ProcessId, action: String },
    #[error("self-send {0} rejected in strict mode")]
    SelfSend(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("{0}")]
    Syntax(String),
    #[error("duplicate init for process {0}")]
    DuplicateInit(String),
    #[error("duplicate process {0}")]
    DuplicateProcess(String),
    #[error(transparent)]
    Invalid(#[from] SystemError),
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Reject transitions whose sender and receiver coincide.
    pub strict: bool,
}

pub fn parse_system(text: &str) -> Result<System, ParseError> {
    parse_system_with(text, ParseOptions::default())
}


pub fn parse_system_with(text: &str, options: ParseOptions) -> Result<System, ParseError> {
    struct Draft {
        pid: ProcessId,
        line: usize,
        states: Vec<String>,
        initial: Option<usize>,
        transitions: Vec<(usize, Transition)>,
    }
    fn intern(states: &mut Vec<String>, name: &str) -> usize {
        match states.iter().position(|s| s == name) {
            Some(i) => i,
            None => {
                states.push(name.to_string());
                states.len() - 1
            }
        }
    }

    let mut name = String::from("system");
    let mut drafts: Vec<Draft> = Vec::new();
    // position of every process named by a transition, for error reporting
    let mut mentions: Vec<(usize, usize, String)> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("");
        let tokens = tokenize(content);
        let Some(&(col, first)) = tokens.first() else {
            continue;
        };
        let syntax = |column: usize, msg: &str| ParseError {
            line,
            column,
            kind: ParseErrorKind::Syntax(msg.to_string()),
        };
        match first {
            "system" => {
                if tokens.len() != 2 {
                    return Err(syntax(col, "expected `system <name>`"));
                }
                name = tokens[1].1.to_string();
            }
            "process" => {
                if tokens.len() != 2 || !is_ident(tokens[1].1) {
                    return Err(syntax(col, "expected `process <pid>`"));
                }
                let pid = tokens[1].1;
                if drafts.iter().any(|d| d.pid.as_str() == pid) {
                    return Err(ParseError {
                        line,
                        column: tokens[1].0,
                        kind: ParseErrorKind::DuplicateProcess(pid.into()),
                    });
                }
                drafts.push(Draft {
                    pid: ProcessId::new(pid),
                    line,
                    states: Vec::new(),
                    initial: None,
                    transitions: Vec::new(),
                });
            }
            "init" => {
                let Some(draft) = drafts.last_mut() else {
                    return Err(syntax(col, "`init` outside of a process"));
                };
                if tokens.len() != 2 || !is_ident(tokens[1].1) {
                    return Err(syntax(col, "expected `init <state>`"));
                }
                if draft.initial.is_some() {
                    return Err(ParseError {
                        line,
                        column: col,
                        kind: ParseErrorKind::DuplicateInit(draft.pid.to_string()),
                    });
                }
                draft.initial = Some(intern(&mut draft.states, tokens[1].1));
            }
            _ => {
                let Some(draft) = drafts.last_mut() else {
                    return Err(syntax(col, &format!("unexpected `{first}`")));
                };
                // `!a` and `! a` are both accepted
                let mut toks: Vec<(usize, &str)> = Vec::with_capacity(8);
                for (i, &(c, t)) in tokens.iter().enumerate() {
                    if i == 4 && t.len() > 1 && (t.starts_with('!') || t.starts_with('?')) {
                        toks.push((c, &t[..1]));
                        toks.push((c + 1, &t[1..]));
                    } else {
                        toks.push((c, t));
                    }
                }
                const SHAPE: &str = "expected `<state> -> <state> : ! <payload> to <pid>` \
                                     or `<state> -> <state> : ? <payload> from <pid>`";
                if toks.len() != 8 || toks[1].1 != "->" || toks[3].1 != ":" {
                    return Err(syntax(col, SHAPE));
                }
                for &i in &[0usize, 2, 5, 7] {
                    if !is_ident(toks[i].1) {
                        return Err(syntax(toks[i].0, &format!("bad identifier `{}`", toks[i].1)));
                    }
                }
                let (payload, peer) = (toks[5].1, toks[7].1);
                let me = draft.pid.as_str();
                let action = match (toks[4].1, toks[6].1) {
                    ("!", "to") => Action::send(payload, me, peer),
                    ("?", "from") => Action::receive(payload, peer, me),
                    _ => return Err(syntax(toks[4].0, SHAPE)),
                };
                if options.strict && action.sender == action.receiver {
                    return Err(ParseError {
                        line,
                        column: toks[7].0,
                        kind: SystemError::SelfSend(action.to_string()).into(),
                    });
                }
                mentions.push((line, toks[7].0, peer.to_string()));
                let from = intern(&mut draft.states, toks[0].1);
                let to = intern(&mut draft.states, toks[2].1);
                draft.transitions.push((line, Transition { from, action, to }));
            }
        }
    }

    if drafts.is_empty() {
        let line = text.lines().count().max(1);
        return Err(ParseError {
            line,
            column: 1,
            kind: SystemError::NoProcesses.into(),
        });
    }
    for (line, column, peer) in &mentions {
        if !drafts.iter().any(|d| d.pid.as_str() == peer) {
            return Err(ParseError {
                line: *line,
                column: *column,
                kind: SystemError::UndeclaredProcess(ProcessId::new(peer.as_str())).into(),
            });
        }
    }
    let mut processes = Vec::with_capacity(drafts.len());
    for d in drafts {
        let Some(initial) = d.initial else {
            return Err(ParseError {
                line: d.line,
                column: 1,
                kind: SystemError::MissingInit(d.pid).into(),
            });
        };
        let transitions = d.transitions.into_iter().map(|(_, t)| t).collect();
        processes.push((
            d.pid,
            LocalAutomaton {
                states: d.states,
                initial,
                transitions,
            },
        ));
    }
    System::new(name, processes).map_err(|e| ParseError {
        line: 1,
        column: 1,
        kind: e.into(),
    })
}

fn tokenize(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in line.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((s + 1, &line[s..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((s + 1, &line[s..]));
    }
    out
}

fn is_ident(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '\'')
}

/// Ordered process universe used to index bitmask-based structures
/// (buffer states, P-graph labels).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ProcessTable {
    ids: Vec<ProcessId>,
}

impl ProcessTable {
    pub const MAX: usize = 64;

    /// Deduplicates while keeping first-occurrence order.
    pub fn new(ids: impl IntoIterator<Item = ProcessId>) -> Self {
        let mut out: Vec<ProcessId> = Vec::new();
        for id in ids {
            if !out.contains(&id) {
                out.push(id);
            }
        }
        assert!(out.len() <= Self::MAX, "at most 64 processes are supported");
        Self { ids: out }
    }

    /// Table of the processes mentioned by `word`, sorted by name.
    pub fn of_word(word: &SigmaWord) -> Self {
        let set: BTreeSet<ProcessId> = word
            .iter()
            .flat_map(|s| [s.sender.clone(), s.receiver.clone()])
            .collect();
        Self::new(set)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn index(&self, pid: &ProcessId) -> Option<usize> {
        self.ids.iter().position(|p| p == pid)
    }

    pub fn id(&self, index: usize) -> &ProcessId {
        &self.ids[index]
    }

    pub fn ids(&self) -> &[ProcessId] {
        &self.ids
    }

    /// Renders a bitmask as `{p,q}`.
    pub fn format_set(&self, mask: u64) -> String {
        let names: Vec<&str> = (0..self.ids.len())
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| self.ids[i].as_str())
            .collect();
        format!("{{{}}}", names.join(","))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SigmaKind {
    /// `!?`: a send together with its matching receive.
    Matched,
    /// `!`: a send whose message stays in the buffer.
    Unmatched,
}

/// A letter of the exchange alphabet Σ = {!?, !} × payloads × processes².
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SigmaSymbol {
    pub kind: SigmaKind,
    pub payload: Payload,
    pub sender: ProcessId,
    pub receiver: ProcessId,
}

impl SigmaSymbol {
    pub fn matched(payload: &str, sender: &str, receiver: &str) -> Self {
        Self {
            kind: SigmaKind::Matched,
            payload: Payload::new(payload),
            sender: ProcessId::new(sender),
            receiver: ProcessId::new(receiver),
        }
    }

    pub fn unmatched(payload: &str, sender: &str, receiver: &str) -> Self {
        Self {
            kind: SigmaKind::Unmatched,
            ..Self::matched(payload, sender, receiver)
        }
    }

    pub fn from_send(kind: SigmaKind, send: &Action) -> Self {
        Self {
            kind,
            payload: send.payload.clone(),
            sender: send.sender.clone(),
            receiver: send.receiver.clone(),
        }
    }

    pub fn is_matched(&self) -> bool {
        self.kind == SigmaKind::Matched
    }

    /// σ1: the send action.
    pub fn send_action(&self) -> Action {
        Action {
            kind: ActionKind::Send,
            sender: self.sender.clone(),
            receiver: self.receiver.clone(),
            payload: self.payload.clone(),
        }
    }

    /// σ2: the receive action, or nothing for an unmatched symbol.
    pub fn receive_action(&self) -> Option<Action> {
        self.is_matched().then(|| self.send_action().dual())
    }
}

impl fmt::Display for SigmaSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mark = match self.kind {
            SigmaKind::Matched => "!?",
            SigmaKind::Unmatched => "!",
        };
        write!(f, "{mark}{}({}->{})", self.payload, self.sender, self.receiver)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SigmaWord(pub Vec<SigmaSymbol>);

impl SigmaWord {
    pub fn new(symbols: Vec<SigmaSymbol>) -> Self {
        Self(symbols)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, SigmaSymbol> {
        self.0.iter()
    }

    /// σ1(w)·σ2(w): all sends in order, then the receives of matched symbols
    /// in the same order.
    pub fn to_actions(&self) -> Vec<Action> {
        let sends = self.0.iter().map(SigmaSymbol::send_action);
        let receives = self.0.iter().filter_map(SigmaSymbol::receive_action);
        sends.chain(receives).collect()
    }
}

impl fmt::Display for SigmaWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

impl FromIterator<SigmaSymbol> for SigmaWord {
    fn from_iter<T: IntoIterator<Item = SigmaSymbol>>(iter: T) -> Self {
        Self(iter.into_iter().collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WordError {
    #[error("token {index}: malformed `{token}`")]
    Malformed { index: usize, token: String },
    #[error("token {index}: unknown process {name}")]
    UnknownProcess { index: usize, name: String },
    #[error("token {index}: unknown payload {name}")]
    UnknownPayload { index: usize, name: String },
}

/// Splits `m(p->q)` into its three names.
fn split_message(body: &str) -> Option<(&str, &str, &str)> {
    let open = body.find('(')?;
    let inner = body[open + 1..].strip_suffix(')')?;
    let (p, q) = inner.split_once("->")?;
    let m = &body[..open];
    (is_ident(m) && is_ident(p) && is_ident(q)).then_some((m, p, q))
}

/// Parses whitespace-separated `!?m(p->q)` / `!m(p->q)` tokens.
pub fn parse_word(text: &str) -> Result<SigmaWord, WordError> {
    text.split_whitespace()
        .enumerate()
        .map(|(i, tok)| {
            let index = i + 1;
            let malformed = || WordError::Malformed {
                index,
                token: tok.to_string(),
            };
            let (kind, body) = if let Some(rest) = tok.strip_prefix("!?") {
                (SigmaKind::Matched, rest)
            } else if let Some(rest) = tok.strip_prefix('!') {
                (SigmaKind::Unmatched, rest)
            } else {
                return Err(malformed());
            };
            let (m, p, q) = split_message(body).ok_or_else(malformed)?;
            Ok(SigmaSymbol {
                kind,
                payload: Payload::new(m),
                sender: ProcessId::new(p),
                receiver: ProcessId::new(q),
            })
        })
        .collect::<Result<Vec<_>, _>>()
        .map(SigmaWord)
}

/// [`parse_word`] with names checked against a system.
pub fn parse_word_in(text: &str, sys: &System) -> Result<SigmaWord, WordError> {
    let word = parse_word(text)?;
    for (i, s) in word.iter().enumerate() {
        for pid in [&s.sender, &s.receiver] {
            if sys.process_index(pid).is_none() {
                return Err(WordError::UnknownProcess {
                    index: i + 1,
                    name: pid.to_string(),
                });
            }
        }
        if !sys.payloads().contains(&s.payload) {
            return Err(WordError::UnknownPayload {
                index: i + 1,
                name: s.payload.to_string(),
            });
        }
    }
    Ok(word)
}

/// Parses whitespace-separated `!m(p->q)` / `?m(p->q)` action tokens.
pub fn parse_actions(text: &str) -> Result<Vec<Action>, WordError> {
    text.split_whitespace()
        .enumerate()
        .map(|(i, tok)| {
            let malformed = || WordError::Malformed {
                index: i + 1,
                token: tok.to_string(),
            };
            let (kind, body) = match tok.as_bytes().first() {
                Some(b'!') => (ActionKind::Send, &tok[1..]),
                Some(b'?') => (ActionKind::Receive, &tok[1..]),
                _ => return Err(malformed()),
            };
            let (m, p, q) = split_message(body).ok_or_else(malformed)?;
            Ok(Action {
                kind,
                ..Action::send(m, p, q)
            })
        })
        .collect()
}

/// One local state index per process, in declared process order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GlobalState(pub Vec<usize>);

impl GlobalState {
    pub fn initial(sys: &System) -> Self {
        Self(sys.processes().iter().map(|(_, a)| a.initial).collect())
    }

    /// Comma-separated local state names.
    pub fn display(&self, sys: &System) -> String {
        self.0
            .iter()
            .enumerate()
            .map(|(i, &s)| sys.automaton(i).states[s].as_str())
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn parse(text: &str, sys: &System) -> Option<Self> {
        let parts: Vec<&str> = text.split(',').map(str::trim).collect();
        if parts.len() != sys.process_count() {
            return None;
        }
        parts
            .iter()
            .enumerate()
            .map(|(i, name)| sys.automaton(i).state_index(name))
            .collect::<Option<Vec<_>>>()
            .map(Self)
    }
}

/// Control-reachable part of the product of the local automata. States are
/// numbered in breadth-first discovery order; state 0 is the initial one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlobalAutomaton {
    states: Vec<GlobalState>,
    index: HashMap<GlobalState, usize>,
    transitions: Vec<Vec<(Action, usize)>>,
}

impl GlobalAutomaton {
    pub const INITIAL: usize = 0;

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, id: usize) -> &GlobalState {
        &self.states[id]
    }

    pub fn states(&self) -> &[GlobalState] {
        &self.states
    }

    pub fn id_of(&self, state: &GlobalState) -> Option<usize> {
        self.index.get(state).copied()
    }

    pub fn successors(&self, id: usize) -> &[(Action, usize)] {
        &self.transitions[id]
    }

    pub fn transition_count(&self) -> usize {
        self.transitions.iter().map(Vec::len).sum()
    }

    /// Global states reached from `from` by executing `actions` in order.
    pub fn run(&self, from: usize, actions: &[Action]) -> BTreeSet<usize> {
        let mut current: BTreeSet<usize> = [from].into();
        for a in actions {
            current = current
                .iter()
                .flat_map(|&s| {
                    self.transitions[s]
                        .iter()
                        .filter(|(b, _)| b == a)
                        .map(|&(_, t)| t)
                })
                .collect();
        }
        current
    }
}

/// Builds the control product, trimmed to states reachable from the initial
/// global state.
pub fn global_product(sys: &System, limit: usize) -> Result<GlobalAutomaton, GuardExceeded> {
    let initial = GlobalState::initial(sys);
    let mut states = vec![initial.clone()];
    let mut index = HashMap::from([(initial, 0)]);
    let mut transitions: Vec<Vec<(Action, usize)>> = vec![Vec::new()];
    let mut queue = VecDeque::from([0usize]);
    while let Some(id) = queue.pop_front() {
        let current = states[id].clone();
        let mut out = Vec::new();
        for (p, (_, aut)) in sys.processes().iter().enumerate() {
            for t in aut.transitions.iter().filter(|t| t.from == current.0[p]) {
                let mut next = current.clone();
                next.0[p] = t.to;
                let target = match index.get(&next) {
                    Some(&n) => n,
                    None => {
                        if states.len() >= limit {
                            return Err(GuardExceeded::new("global product", limit));
                        }
                        let n = states.len();
                        states.push(next.clone());
                        index.insert(next, n);
                        transitions.push(Vec::new());
                        queue.push_back(n);
                        n
                    }
                };
                out.push((t.action.clone(), target));
            }
        }
        out.sort();
        out.dedup();
        transitions[id] = out;
    }
    Ok(GlobalAutomaton {
        states,
        index,
        transitions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::tests::S1;

    #[test]
    fn parses_s1() {
        let sys = parse_system(S1).unwrap();
        assert_eq!(sys.process_count(), 3);
        assert_eq!(sys.local_state_count(), 8);
        assert_eq!(sys.payloads().len(), 3);
        assert_eq!(parse_system(&sys.to_string()).unwrap(), sys);
    }

    #[test]
    fn parse_errors() {
        let e = parse_system("system empty\n# nothing\n").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Invalid(SystemError::NoProcesses));
        let e = parse_system("process p\n init 0\n 0 -> 1 : ! a to s\n").unwrap_err();
        assert_eq!((e.line, e.column), (3, 18));
        assert!(e.to_string().contains("undeclared process s"));
        let e = parse_system("process p\n 0 -> 1 : ! a to p\n").unwrap_err();
        assert_eq!(e.kind, SystemError::MissingInit(ProcessId::new("p")).into());
        let e = parse_system("process p\n init 0\n init 1\n").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::DuplicateInit("p".into()));
        let e = parse_system("process p\n init 0\nprocess p\n init 0\n").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::DuplicateProcess("p".into()));
        let e = parse_system("process p\n init 0\n 0 -> 1 : ! a from q\n").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Syntax(_)));
    }

    #[test]
    fn strict_mode_rejects_self_sends() {
        let text = "process p\n init 0\n 0 -> 1 : !a to p\n";
        assert!(parse_system(text).unwrap().has_self_sends());
        let e = parse_system_with(text, ParseOptions { strict: true }).unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Invalid(SystemError::SelfSend(_))));
    }

    #[test]
    fn product_of_s1() {
        let sys = parse_system(S1).unwrap();
        let g = global_product(&sys, 1000).unwrap();
        assert_eq!(g.state(GlobalAutomaton::INITIAL).display(&sys), "0,0,0");
        let s100 = g.id_of(&GlobalState::parse("1,0,0", &sys).unwrap()).unwrap();
        assert!(g
            .successors(GlobalAutomaton::INITIAL)
            .contains(&(Action::send("a", "p", "r"), s100)));
        assert!(g.id_of(&GlobalState::parse("2,1,2", &sys).unwrap()).is_some());
        assert_eq!(global_product(&sys, 1000).unwrap(), g);
        for id in 0..g.len() {
            for (a, t) in g.successors(id) {
                let (from, to) = (g.state(id), g.state(*t));
                let moved: Vec<usize> = (0..from.0.len()).filter(|&i| from.0[i] != to.0[i]).collect();
                let p = sys.process_index(a.process()).unwrap();
                assert!(moved.is_empty() || moved == vec![p]);
                assert!(sys
                    .automaton(p)
                    .transitions
                    .iter()
                    .any(|tr| tr.from == from.0[p] && tr.to == to.0[p] && &tr.action == a));
            }
        }
        assert!(global_product(&sys, 3).is_err());
    }

    #[test]
    fn idle_product() {
        let sys = parse_system("process p\n init 0\n").unwrap();
        let g = global_product(&sys, 10).unwrap();
        assert_eq!((g.len(), g.transition_count()), (1, 0));
    }

    #[test]
    fn words() {
        let w = parse_word("!?a(p->r) !c(p->q)").unwrap();
        assert_eq!(
            w.0,
            vec![SigmaSymbol::matched("a", "p", "r"), SigmaSymbol::unmatched("c", "p", "q")]
        );
        assert_eq!(w.to_string(), "!?a(p->r) !c(p->q)");
        assert!(parse_word("").unwrap().is_empty());
        assert_eq!(
            parse_word("!?a(p->r"),
            Err(WordError::Malformed {
                index: 1,
                token: "!?a(p->r".into()
            })
        );
        let sys = parse_system(S1).unwrap();
        assert!(matches!(
            parse_word_in("!?a(p->s)", &sys),
            Err(WordError::UnknownProcess { index: 1, .. })
        ));
        assert!(matches!(
            parse_word_in("!a(p->r) !z(p->r)", &sys),
            Err(WordError::UnknownPayload { index: 2, .. })
        ));
    }

    #[test]
    fn sigma_of_s1() {
        let sys = parse_system(S1).unwrap();
        assert_eq!(sys.sigma().len(), 6);
    }
}
