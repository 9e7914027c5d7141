//! Message sequence charts: construction from executions and Σ-words,
//! concatenation, linearizations and the causal-delivery oracle.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Action, ActionKind, Payload, ProcessId, SigmaWord};

pub type EventId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    pub action: Action,
    /// The matching receive of a send, or the matching send of a receive.
    pub partner: Option<EventId>,
}

/// One message of an MSC, identified by its send event.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MessageVertex {
    pub id: usize,
    pub send: EventId,
    pub receive: Option<EventId>,
    pub sender: ProcessId,
    pub receiver: ProcessId,
    pub payload: Payload,
}

impl MessageVertex {
    pub fn is_matched(&self) -> bool {
        self.receive.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MscError {
    #[error("receive at index {0} has no matching send")]
    UnmatchedReceive(usize),
    #[error("event {0} is not a receive of an earlier send with the same label")]
    BadPartner(usize),
    #[error("send {0} is matched twice")]
    DoubleMatch(usize),
    #[error("MSC has {events} events, oracle cap is {cap}")]
    TooManyEvents { events: usize, cap: usize },
    #[error("more than {0} linearizations")]
    TooManyLinearizations(usize),
}

/// Bounds for the exhaustive linearization-based oracles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleCaps {
    pub events: usize,
    pub linearizations: usize,
}

impl Default for OracleCaps {
    fn default() -> Self {
        Self {
            events: 10,
            linearizations: 1_000_000,
        }
    }
}

/// Per-process sequence of `(action, partner as (process, position))`; two
/// MSCs are isomorphic iff their canonical forms are equal.
pub type CanonicalMsc = BTreeMap<ProcessId, Vec<(Action, Option<(ProcessId, usize)>)>>;

/// A finite MSC. Events are stored in an order compatible with
/// `(po ∪ src)*`; each process's timeline lists its events in `po` order.
#[derive(Debug, Clone, Default)]
pub struct Msc {
    events: Vec<Event>,
    timelines: BTreeMap<ProcessId, Vec<EventId>>,
    position: Vec<usize>,
}

impl PartialEq for Msc {
    fn eq(&self, other: &Self) -> bool {
        self.canonical() == other.canonical()
    }
}

impl Eq for Msc {}

impl Msc {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds an MSC from events listed along one of its linearizations.
    /// `partner` of a receive names the index of its send.
    pub fn from_events(events: Vec<(Action, Option<EventId>)>) -> Result<Self, MscError> {
        let mut msc = Msc::empty();
        for (i, (action, partner)) in events.into_iter().enumerate() {
            let partner = match action.kind {
                ActionKind::Send => None,
                ActionKind::Receive => {
                    let s = partner.ok_or(MscError::UnmatchedReceive(i))?;
                    if s >= i || msc.events[s].action != action.dual() {
                        return Err(MscError::BadPartner(i));
                    }
                    if msc.events[s].partner.is_some() {
                        return Err(MscError::DoubleMatch(s));
                    }
                    Some(s)
                }
            };
            msc.push(action, partner);
        }
        Ok(msc)
    }

    fn push(&mut self, action: Action, partner: Option<EventId>) -> EventId {
        let id = self.events.len();
        let line = self.timelines.entry(action.process().clone()).or_default();
        self.position.push(line.len());
        line.push(id);
        if let Some(s) = partner {
            self.events[s].partner = Some(id);
        }
        self.events.push(Event { action, partner });
        id
    }

    /// The MSC of an execution: the ℓ-th receive of `(p, q, m)` is matched
    /// with the ℓ-th send of `(p, q, m)`.
    pub fn of_execution(actions: &[Action]) -> Result<Self, MscError> {
        let mut sends: HashMap<&Action, Vec<EventId>> = HashMap::new();
        let mut consumed: HashMap<Action, usize> = HashMap::new();
        let mut msc = Msc::empty();
        for (i, a) in actions.iter().enumerate() {
            match a.kind {
                ActionKind::Send => {
                    sends.entry(a).or_default().push(i);
                    msc.push(a.clone(), None);
                }
                ActionKind::Receive => {
                    let key = a.dual();
                    let l = consumed.entry(key.clone()).or_default();
                    let s = sends
                        .get(&key)
                        .and_then(|v| v.get(*l).copied())
                        .ok_or(MscError::UnmatchedReceive(i))?;
                    *l += 1;
                    msc.push(a.clone(), Some(s));
                }
            }
        }
        Ok(msc)
    }

    /// `msc(w) = msc(σ1(w)·σ2(w))`.
    pub fn of_word(word: &SigmaWord) -> Self {
        let mut msc = Msc::empty();
        let sends: Vec<EventId> = word
            .iter()
            .map(|s| msc.push(s.send_action(), None))
            .collect();
        for (s, sym) in sends.into_iter().zip(word.iter()) {
            if let Some(r) = sym.receive_action() {
                msc.push(r, Some(s));
            }
        }
        msc
    }

    pub fn concat(&self, other: &Msc) -> Msc {
        let mut out = self.clone();
        let offset = self.events.len();
        for e in &other.events {
            let partner = match e.action.kind {
                ActionKind::Receive => e.partner.map(|s| s + offset),
                ActionKind::Send => None,
            };
            out.push(e.action.clone(), partner);
        }
        out
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn event(&self, id: EventId) -> &Event {
        &self.events[id]
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn processes(&self) -> impl Iterator<Item = &ProcessId> {
        self.timelines.keys()
    }

    pub fn timeline(&self, pid: &ProcessId) -> &[EventId] {
        self.timelines.get(pid).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn timelines(&self) -> &BTreeMap<ProcessId, Vec<EventId>> {
        &self.timelines
    }

    /// Strict process order: same process, `a` earlier than `b`.
    pub fn po_before(&self, a: EventId, b: EventId) -> bool {
        self.events[a].action.process() == self.events[b].action.process()
            && self.position[a] < self.position[b]
    }

    /// Messages in order of their send events.
    pub fn messages(&self) -> Vec<MessageVertex> {
        self.events
            .iter()
            .enumerate()
            .filter(|(_, e)| e.action.is_send())
            .enumerate()
            .map(|(id, (send, e))| MessageVertex {
                id,
                send,
                receive: e.partner,
                sender: e.action.sender.clone(),
                receiver: e.action.receiver.clone(),
                payload: e.action.payload.clone(),
            })
            .collect()
    }

    pub fn send_count(&self) -> usize {
        self.events.iter().filter(|e| e.action.is_send()).count()
    }

    pub fn receive_count(&self) -> usize {
        self.events.len() - self.send_count()
    }

    pub fn canonical(&self) -> CanonicalMsc {
        self.timelines
            .iter()
            .map(|(pid, line)| {
                let row = line
                    .iter()
                    .map(|&e| {
                        let ev = &self.events[e];
                        let partner = ev.partner.map(|o| {
                            (self.events[o].action.process().clone(), self.position[o])
                        });
                        (ev.action.clone(), partner)
                    })
                    .collect();
                (pid.clone(), row)
            })
            .collect()
    }

    pub fn isomorphic(&self, other: &Msc) -> bool {
        self == other
    }

    /// The sub-MSC formed by the given messages (indices into
    /// [`Msc::messages`]) and their receives.
    pub fn restrict(&self, messages: &[usize]) -> Msc {
        let all = self.messages();
        let mut keep = vec![false; self.events.len()];
        for &m in messages {
            keep[all[m].send] = true;
            if let Some(r) = all[m].receive {
                keep[r] = true;
            }
        }
        let mut renumber = vec![usize::MAX; self.events.len()];
        let mut out = Msc::empty();
        for (i, e) in self.events.iter().enumerate().filter(|(i, _)| keep[*i]) {
            let partner = match e.action.kind {
                ActionKind::Receive => e.partner.map(|s| renumber[s]),
                ActionKind::Send => None,
            };
            renumber[i] = out.push(e.action.clone(), partner);
        }
        out
    }

    /// No process performs a receive followed by a send, i.e. the MSC
    /// admits a linearization in `S*R*`.
    pub fn is_exchange(&self) -> bool {
        self.timelines.values().all(|line| {
            let first_send_after_receive = line
                .iter()
                .skip_while(|&&e| self.events[e].action.is_send())
                .any(|&e| self.events[e].action.is_send());
            !first_send_after_receive
        })
    }

    /// Some linearization lies in `S^{≤k} R^{≤k}`.
    pub fn is_k_exchange(&self, k: usize) -> bool {
        self.is_exchange() && self.send_count() <= k && self.receive_count() <= k
    }

    /// Every event with all its `(po ∪ src)` predecessors, as bitmasks.
    fn predecessor_masks(&self) -> Vec<u64> {
        let mut preds = vec![0u64; self.events.len()];
        for line in self.timelines.values() {
            for w in line.windows(2) {
                preds[w[1]] |= 1 << w[0];
            }
        }
        for (i, e) in self.events.iter().enumerate() {
            if !e.action.is_send() {
                if let Some(s) = e.partner {
                    preds[i] |= 1 << s;
                }
            }
        }
        preds
    }

    /// All topological orders of `(po ∪ src)*`.
    pub fn linearizations(&self, caps: OracleCaps) -> Result<Vec<Vec<Action>>, MscError> {
        self.check_cap(caps)?;
        let preds = self.predecessor_masks();
        let mut out = Vec::new();
        let mut stack = Vec::new();
        self.linearize(&preds, 0, &mut stack, &mut out, caps.linearizations)?;
        Ok(out)
    }

    fn linearize(
        &self,
        preds: &[u64],
        placed: u64,
        stack: &mut Vec<EventId>,
        out: &mut Vec<Vec<Action>>,
        cap: usize,
    ) -> Result<(), MscError> {
        if stack.len() == self.events.len() {
            if out.len() >= cap {
                return Err(MscError::TooManyLinearizations(cap));
            }
            out.push(stack.iter().map(|&e| self.events[e].action.clone()).collect());
            return Ok(());
        }
        for e in 0..self.events.len() {
            if placed & (1 << e) == 0 && preds[e] & !placed == 0 {
                stack.push(e);
                self.linearize(preds, placed | (1 << e), stack, out, cap)?;
                stack.pop();
            }
        }
        Ok(())
    }

    fn check_cap(&self, caps: OracleCaps) -> Result<(), MscError> {
        if self.events.len() > caps.events.min(64) {
            return Err(MscError::TooManyEvents {
                events: self.events.len(),
                cap: caps.events.min(64),
            });
        }
        Ok(())
    }

    /// Searches for a linearization in which, for any two sends `s1` before
    /// `s2` to the same process, either `s2` is unmatched or both are
    /// matched and received in the same order.
    pub fn satisfies_causal_delivery(&self, caps: OracleCaps) -> Result<bool, MscError> {
        self.check_cap(caps)?;
        let preds = self.predecessor_masks();
        let mut budget = caps.linearizations;
        let mut order: BTreeMap<ProcessId, Vec<EventId>> = BTreeMap::new();
        self.causal_search(&preds, 0, &mut order, &mut budget)
    }

    fn causal_search(
        &self,
        preds: &[u64],
        placed: u64,
        order: &mut BTreeMap<ProcessId, Vec<EventId>>,
        budget: &mut usize,
    ) -> Result<bool, MscError> {
        if placed.count_ones() as usize == self.events.len() {
            return Ok(true);
        }
        if *budget == 0 {
            return Err(MscError::TooManyLinearizations(0));
        }
        *budget -= 1;
        for e in 0..self.events.len() {
            if placed & (1 << e) != 0 || preds[e] & !placed != 0 {
                continue;
            }
            let ev = &self.events[e];
            let queue = order.entry(ev.action.receiver.clone()).or_default();
            let ok = match ev.action.kind {
                // a matched send may not overtake an unmatched one
                ActionKind::Send => {
                    ev.partner.is_none()
                        || queue.iter().all(|&s| self.events[s].partner.is_some())
                }
                // every earlier send to the same mailbox is already received
                ActionKind::Receive => {
                    let s = ev.partner.expect("receives are matched");
                    queue
                        .iter()
                        .take_while(|&&x| x != s)
                        .all(|&x| self.events[x].partner.is_some_and(|r| placed & (1 << r) != 0))
                }
            };
            if !ok {
                continue;
            }
            if ev.action.is_send() {
                queue.push(e);
            }
            let found = self.causal_search(preds, placed | (1 << e), order, budget)?;
            if ev.action.is_send() {
                order.get_mut(&ev.action.receiver).unwrap().pop();
            }
            if found {
                return Ok(true);
            }
        }
        Ok(false)
    }
}
