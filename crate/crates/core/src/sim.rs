//! Mailbox semantics: one FIFO buffer per process, shared by all senders.

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Action, ActionKind, GlobalState, Payload, ProcessId, System};
use crate::msc::{CanonicalMsc, EventId, Msc};
use crate::GuardExceeded;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Configuration {
    pub control: GlobalState,
    /// Indexed like the system's processes.
    pub buffers: Vec<VecDeque<(ProcessId, Payload)>>,
}

impl Configuration {
    pub fn initial(sys: &System) -> Self {
        Self {
            control: GlobalState::initial(sys),
            buffers: vec![VecDeque::new(); sys.process_count()],
        }
    }

    pub fn buffer(&self, sys: &System, pid: &ProcessId) -> Option<&VecDeque<(ProcessId, Payload)>> {
        sys.process_index(pid).map(|i| &self.buffers[i])
    }

    pub fn max_buffer_len(&self) -> usize {
        self.buffers.iter().map(VecDeque::len).max().unwrap_or(0)
    }

    pub fn display(&self, sys: &System) -> String {
        let buffers: Vec<String> = sys
            .process_ids()
            .zip(&self.buffers)
            .filter(|(_, b)| !b.is_empty())
            .map(|(p, b)| {
                let items: Vec<String> = b.iter().map(|(s, m)| format!("{m}<{s}")).collect();
                format!("{p}=[{}]", items.join(","))
            })
            .collect();
        format!("({}) {}", self.control.display(sys), buffers.join(" "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StepError {
    #[error("{0} does not involve a process of the system")]
    UnknownProcess(Action),
    #[error("no control transition for {0}")]
    NoTransition(Action),
    #[error("empty buffer for {0}")]
    EmptyBuffer(Action),
    #[error("buffer head is {found_payload} from {found_sender}, not {action}")]
    HeadMismatch {
        action: Action,
        found_sender: ProcessId,
        found_payload: Payload,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("action {index}: {error}")]
pub struct RunError {
    pub index: usize,
    pub error: StepError,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Execution {
    pub actions: Vec<Action>,
    pub final_config: Configuration,
}

impl Execution {
    pub fn msc(&self) -> Msc {
        Msc::of_execution(&self.actions).expect("executions match every receive")
    }
}

impl fmt::Display for Execution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in &self.actions {
            writeln!(f, "{a}")?;
        }
        Ok(())
    }
}

/// All successors of `c` by `a`, one per matching local transition.
pub fn successors(
    sys: &System,
    c: &Configuration,
    a: &Action,
) -> Result<Vec<Configuration>, StepError> {
    let p = sys
        .process_index(a.process())
        .ok_or_else(|| StepError::UnknownProcess(a.clone()))?;
    let local = c.control.0[p];
    let targets: Vec<usize> = sys
        .automaton(p)
        .transitions
        .iter()
        .filter(|t| t.from == local && &t.action == a)
        .map(|t| t.to)
        .collect();
    if targets.is_empty() {
        return Err(StepError::NoTransition(a.clone()));
    }
    let mut buffers = c.buffers.clone();
    match a.kind {
        ActionKind::Send => {
            let q = sys
                .process_index(&a.receiver)
                .ok_or_else(|| StepError::UnknownProcess(a.clone()))?;
            buffers[q].push_back((a.sender.clone(), a.payload.clone()));
        }
        ActionKind::Receive => match buffers[p].front() {
            None => return Err(StepError::EmptyBuffer(a.clone())),
            Some((s, m)) if *s != a.sender || *m != a.payload => {
                return Err(StepError::HeadMismatch {
                    action: a.clone(),
                    found_sender: s.clone(),
                    found_payload: m.clone(),
                })
            }
            Some(_) => {
                buffers[p].pop_front();
            }
        },
    }
    Ok(targets
        .into_iter()
        .map(|to| {
            let mut control = c.control.clone();
            control.0[p] = to;
            Configuration {
                control,
                buffers: buffers.clone(),
            }
        })
        .collect())
}

/// [SEND]/[RECEIVE] rule application, following the first matching local
/// transition in declaration order.
pub fn step(sys: &System, c: &Configuration, a: &Action) -> Result<Configuration, StepError> {
    successors(sys, c, a).map(|mut v| v.swap_remove(0))
}

pub fn run(sys: &System, actions: &[Action]) -> Result<Execution, RunError> {
    let mut c = Configuration::initial(sys);
    for (index, a) in actions.iter().enumerate() {
        c = step(sys, &c, a).map_err(|error| RunError { index, error })?;
    }
    Ok(Execution {
        actions: actions.to_vec(),
        final_config: c,
    })
}

/// Bounds for [`explore`] and [`is_trace_bounded`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExploreBounds {
    pub max_actions: usize,
    pub max_buffer: usize,
    /// Maximum number of executions or search states.
    pub max_results: usize,
}

impl ExploreBounds {
    pub fn new(max_actions: usize, max_buffer: usize) -> Self {
        Self {
            max_actions,
            max_buffer,
            max_results: 2_000_000,
        }
    }
}

/// Actions enabled in `c` together with their successors.
pub fn enabled(sys: &System, c: &Configuration, max_buffer: usize) -> Vec<(Action, Configuration)> {
    let mut out = Vec::new();
    for (p, (_, aut)) in sys.processes().iter().enumerate() {
        for t in aut.transitions.iter().filter(|t| t.from == c.control.0[p]) {
            let a = &t.action;
            let mut buffers = c.buffers.clone();
            match a.kind {
                ActionKind::Send => {
                    let q = sys.process_index(&a.receiver).expect("validated system");
                    if buffers[q].len() >= max_buffer {
                        continue;
                    }
                    buffers[q].push_back((a.sender.clone(), a.payload.clone()));
                }
                ActionKind::Receive => match buffers[p].front() {
                    Some((s, m)) if *s == a.sender && *m == a.payload => {
                        buffers[p].pop_front();
                    }
                    _ => continue,
                },
            }
            let mut control = c.control.clone();
            control.0[p] = t.to;
            out.push((a.clone(), Configuration { control, buffers }));
        }
    }
    out.sort();
    out.dedup();
    out
}

/// Every execution of at most `max_actions` actions whose buffers never
/// hold more than `max_buffer` messages, sorted.
pub fn explore(sys: &System, bounds: ExploreBounds) -> Result<Vec<Execution>, GuardExceeded> {
    let mut out = Vec::new();
    let mut stack = vec![(Vec::new(), Configuration::initial(sys))];
    while let Some((actions, c)) = stack.pop() {
        if out.len() >= bounds.max_results {
            return Err(GuardExceeded::new("explore", bounds.max_results));
        }
        if actions.len() < bounds.max_actions {
            for (a, next) in enabled(sys, &c, bounds.max_buffer) {
                let mut longer: Vec<Action> = actions.clone();
                longer.push(a);
                stack.push((longer, next));
            }
        }
        out.push(Execution {
            actions,
            final_config: c,
        });
    }
    out.sort();
    Ok(out)
}

/// One representative execution per distinct `(MSC, configuration)` pair
/// within the bounds of [`explore`].
pub fn explore_distinct(
    sys: &System,
    bounds: ExploreBounds,
) -> Result<Vec<Execution>, GuardExceeded> {
    let mut seen: HashSet<(CanonicalMsc, Configuration)> = HashSet::new();
    let mut out = Vec::new();
    let mut queue = VecDeque::from([(Vec::<Action>::new(), Configuration::initial(sys))]);
    seen.insert((Msc::empty().canonical(), Configuration::initial(sys)));
    while let Some((actions, c)) = queue.pop_front() {
        if actions.len() < bounds.max_actions {
            for (a, next) in enabled(sys, &c, bounds.max_buffer) {
                let mut longer = actions.clone();
                longer.push(a);
                let key = (
                    Msc::of_execution(&longer).expect("valid execution").canonical(),
                    next.clone(),
                );
                if seen.insert(key) {
                    if seen.len() > bounds.max_results {
                        return Err(GuardExceeded::new("explore", bounds.max_results));
                    }
                    queue.push_back((longer, next));
                }
            }
        }
        out.push(Execution {
            actions,
            final_config: c,
        });
    }
    out.sort();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceVerdict {
    Yes(Execution),
    /// No execution within the bounds realizes the MSC; inconclusive beyond.
    NotFound,
}

/// Looks for an execution whose MSC is isomorphic to `m`: the events of `m`
/// are executed along some linearization, a receive being enabled only when
/// the buffer head is the message of its partner send.
pub fn is_trace_bounded(sys: &System, m: &Msc, bounds: ExploreBounds) -> TraceVerdict {
    if m.len() > 64 || m.len() > bounds.max_actions {
        return TraceVerdict::NotFound;
    }
    type Buffers = Vec<VecDeque<EventId>>;
    let n = m.len();
    let pidx: Option<Vec<usize>> = m
        .events()
        .iter()
        .map(|e| sys.process_index(e.action.process()))
        .collect();
    let Some(pidx) = pidx else {
        return TraceVerdict::NotFound;
    };
    let mut preds = vec![0u64; n];
    for line in m.timelines().values() {
        for w in line.windows(2) {
            preds[w[1]] |= 1 << w[0];
        }
    }
    let mut seen: HashSet<(u64, GlobalState, Buffers)> = HashSet::new();
    let start = (0u64, GlobalState::initial(sys), vec![VecDeque::new(); sys.process_count()]);
    let mut stack = vec![(start, Vec::<EventId>::new())];
    while let Some(((done, control, buffers), path)) = stack.pop() {
        if done.count_ones() as usize == n {
            let actions: Vec<Action> = path.iter().map(|&e| m.event(e).action.clone()).collect();
            let final_config = Configuration {
                control,
                buffers: buffers
                    .iter()
                    .map(|b| {
                        b.iter()
                            .map(|&e| {
                                let a = &m.event(e).action;
                                (a.sender.clone(), a.payload.clone())
                            })
                            .collect()
                    })
                    .collect(),
            };
            return TraceVerdict::Yes(Execution {
                actions,
                final_config,
            });
        }
        if seen.len() >= bounds.max_results
            || !seen.insert((done, control.clone(), buffers.clone()))
        {
            continue;
        }
        for e in (0..n).rev() {
            if done & (1 << e) != 0 || preds[e] & !done != 0 {
                continue;
            }
            let ev = m.event(e);
            let p = pidx[e];
            let mut next_buffers = buffers.clone();
            match ev.action.kind {
                ActionKind::Send => {
                    let q = sys.process_index(&ev.action.receiver);
                    let Some(q) = q else { continue };
                    if next_buffers[q].len() >= bounds.max_buffer {
                        continue;
                    }
                    next_buffers[q].push_back(e);
                }
                ActionKind::Receive => {
                    if next_buffers[p].front() != ev.partner.as_ref() {
                        continue;
                    }
                    next_buffers[p].pop_front();
                }
            }
            let local = control.0[p];
            let targets: BTreeSet<usize> = sys
                .automaton(p)
                .transitions
                .iter()
                .filter(|t| t.from == local && t.action == ev.action)
                .map(|t| t.to)
                .collect();
            for to in targets {
                let mut next_control = control.clone();
                next_control.0[p] = to;
                let mut next_path = path.clone();
                next_path.push(e);
                stack.push((
                    (done | (1 << e), next_control, next_buffers.clone()),
                    next_path,
                ));
            }
        }
    }
    TraceVerdict::NotFound
}
