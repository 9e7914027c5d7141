//! Independent oracles and generators shared by the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;

use ksync::model::{LocalAutomaton, Transition};
use ksync::msc::OracleCaps;
use ksync::sim::{explore_distinct, ExploreBounds};
use ksync::{parse_system, Action, Msc, ProcessId, SigmaKind, SigmaSymbol, SigmaWord, System};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const S1: &str = "\
system s1
process p
  init 0
  0 -> 1 : ! a to r
  1 -> 2 : ! c to q
process q
  init 0
  0 -> 1 : ? b from r
process r
  init 0
  0 -> 1 : ! b to q
  1 -> 2 : ? a from p
";

/// Each process floods the other, then drains its own mailbox.
pub const FLOOD: &str = "\
system flood
process p
  init 0
  0 -> 0 : ! m to q
  0 -> 1 : ? n from q
  1 -> 1 : ? n from q
process q
  init 0
  0 -> 0 : ! n to p
  0 -> 1 : ? m from p
  1 -> 1 : ? m from p
";

pub fn s1() -> System {
    parse_system(S1).unwrap()
}

pub fn flood() -> System {
    parse_system(FLOOD).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn caps() -> OracleCaps {
    OracleCaps {
        events: 12,
        linearizations: 5_000_000,
    }
}

/// Linearization-based causal delivery.
pub fn causal_oracle(m: &Msc) -> bool {
    m.satisfies_causal_delivery(caps()).unwrap()
}

fn all_messages(m: &Msc) -> Vec<usize> {
    (0..m.messages().len()).collect()
}

fn subset(ids: &[usize], mask: u32) -> (Vec<usize>, Vec<usize>) {
    ids.iter()
        .enumerate()
        .fold((vec![], vec![]), |(mut a, mut b), (i, &v)| {
            if mask & (1 << i) != 0 {
                a.push(v);
            } else {
                b.push(v);
            }
            (a, b)
        })
}

/// `m ≅ m|first · m|rest`.
fn splits_as(m: &Msc, first: &[usize], rest: &[usize]) -> bool {
    m.restrict(first).concat(&m.restrict(rest)).isomorphic(m)
}

/// Nonempty exchange admitting no split into two nonempty exchanges.
pub fn split_prime(m: &Msc) -> Option<bool> {
    if !m.is_exchange() {
        return None;
    }
    let ids = all_messages(m);
    if ids.is_empty() {
        return Some(false);
    }
    let n = ids.len() as u32;
    let split = (1..(1u32 << n) - 1).any(|mask| {
        let (a, b) = subset(&ids, mask);
        let (ma, mb) = (m.restrict(&a), m.restrict(&b));
        ma.is_exchange() && mb.is_exchange() && splits_as(m, &a, &b)
    });
    Some(!split)
}

/// `m` chops into exchanges of at most `k` sends and `k` receives, by
/// search over message subsets.
pub fn chop_oracle(m: &Msc, k: usize) -> bool {
    let ids = all_messages(m);
    let mut memo = HashMap::new();
    chop_rec(m, &ids, k, &mut memo)
}

fn chop_rec(m: &Msc, ids: &[usize], k: usize, memo: &mut HashMap<Vec<usize>, bool>) -> bool {
    if ids.is_empty() {
        return true;
    }
    if let Some(&r) = memo.get(ids) {
        return r;
    }
    let sub = m.restrict(ids);
    let n = ids.len() as u32;
    let mut ok = false;
    for mask in 1..(1u32 << n) {
        let (a, b) = subset(ids, mask);
        let (ma, mb) = (m.restrict(&a), m.restrict(&b));
        if ma.is_k_exchange(k) && ma.concat(&mb).isomorphic(&sub) && chop_rec(m, &b, k, memo) {
            ok = true;
            break;
        }
    }
    memo.insert(ids.to_vec(), ok);
    ok
}

/// An arbitrary MSC with at most `max_events` events, built along a random
/// linearization; receives pick any pending message of their process.
pub fn random_msc(r: &mut impl Rng, procs: &[&str], payloads: &[&str], max_events: usize) -> Msc {
    let len = r.gen_range(0..=max_events);
    let mut events: Vec<(Action, Option<usize>)> = Vec::new();
    let mut pending: Vec<usize> = Vec::new();
    while events.len() < len {
        let receive = !pending.is_empty() && r.gen_bool(0.5);
        if receive {
            let i = r.gen_range(0..pending.len());
            let s = pending.swap_remove(i);
            events.push((events[s].0.dual(), Some(s)));
        } else {
            let p = procs.choose(r).unwrap();
            let q = procs.iter().filter(|q| *q != p).collect::<Vec<_>>();
            let q = q.choose(r).unwrap();
            let m = payloads.choose(r).unwrap();
            pending.push(events.len());
            events.push((Action::send(m, p, q), None));
        }
    }
    Msc::from_events(events).unwrap()
}

pub fn random_word(r: &mut impl Rng, alphabet: &[SigmaSymbol], max_len: usize) -> SigmaWord {
    let len = r.gen_range(0..=max_len);
    (0..len).map(|_| alphabet.choose(r).unwrap().clone()).collect()
}

/// Every symbol over `procs` and `payloads`, both kinds.
pub fn full_alphabet(procs: &[&str], payloads: &[&str]) -> Vec<SigmaSymbol> {
    let mut out = Vec::new();
    for p in procs {
        for q in procs.iter().filter(|q| *q != p) {
            for m in payloads {
                out.push(SigmaSymbol::matched(m, p, q));
                out.push(SigmaSymbol::unmatched(m, p, q));
            }
        }
    }
    out
}

/// All words of length at most `n`.
pub fn all_words(alphabet: &[SigmaSymbol], n: usize) -> Vec<SigmaWord> {
    let mut out = vec![SigmaWord::default()];
    let mut layer = vec![SigmaWord::default()];
    for _ in 0..n {
        layer = layer
            .iter()
            .flat_map(|w| {
                alphabet.iter().map(move |a| {
                    let mut v = w.0.clone();
                    v.push(a.clone());
                    SigmaWord(v)
                })
            })
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}

/// A system of two or three processes with at most three states each.
pub fn random_system(r: &mut impl Rng) -> System {
    let names = ["p", "q", "r"];
    let n = r.gen_range(2..=3);
    let procs = &names[..n];
    let payloads = ["a", "b"];
    let mut out = Vec::new();
    for p in procs {
        let states = r.gen_range(1..=3);
        let mut transitions = Vec::new();
        for from in 0..states {
            for _ in 0..r.gen_range(1..=2) {
                let to = r.gen_range(0..states);
                let other = *procs.iter().filter(|q| *q != p).collect::<Vec<_>>().choose(r).unwrap();
                let m = payloads.choose(r).unwrap();
                let action = if r.gen_bool(0.5) {
                    Action::send(m, p, other)
                } else {
                    Action::receive(m, other, p)
                };
                transitions.push(Transition { from, action, to });
            }
        }
        transitions.sort_by(|a, b| (a.from, &a.action, a.to).cmp(&(b.from, &b.action, b.to)));
        transitions.dedup();
        out.push((
            ProcessId::new(*p),
            LocalAutomaton {
                states: (0..states).map(|s| s.to_string()).collect(),
                initial: 0,
                transitions,
            },
        ));
    }
    System::new("random", out).unwrap()
}

/// Both processes send before receiving: one prime exchange of size 2.
pub const SWAP: &str = "\
system swap
process p
  init 0
  0 -> 1 : ! a to q
  1 -> 2 : ? b from q
process q
  init 0
  0 -> 1 : ! b to p
  1 -> 2 : ? a from p
";

/// Every process sends to its successor on a ring, then receives.
pub const RING: &str = "\
system ring
process p
  init 0
  0 -> 1 : ! a to q
  1 -> 0 : ? c from r
process q
  init 0
  0 -> 1 : ! b to r
  1 -> 0 : ? a from p
process r
  init 0
  0 -> 1 : ! c to p
  1 -> 0 : ? b from q
";

/// A client that may fire a second request before reading the reply.
pub const CLIENT: &str = "\
system client
process c
  init 0
  0 -> 1 : ! req to s
  1 -> 2 : ! req to s
  1 -> 0 : ? ack from s
  2 -> 1 : ? ack from s
process s
  init 0
  0 -> 1 : ? req from c
  1 -> 0 : ! ack to c
";

/// The corpus of criteria 6 and 7: fixed systems followed by seeded random
/// ones.
pub fn corpus(random: usize) -> Vec<(String, System)> {
    let mut r = rng(0x5eed);
    let mut out = vec![("s1".to_string(), s1())];
    for (name, text) in [("swap", SWAP), ("ring", RING), ("client", CLIENT)] {
        out.push((name.to_string(), parse_system(text).unwrap()));
    }
    for i in 0..random {
        out.push((format!("random-{i}"), random_system(&mut r)));
    }
    out
}

/// An exchange observed at the end of an explored execution.
#[derive(Debug, Clone)]
pub struct Harvested {
    pub word: SigmaWord,
    pub prime: bool,
    pub actions: Vec<Action>,
}

/// Exchanges `X` closing some explored execution `μ ≅ μ' · X`, where `μ'`
/// chops into exchanges. Words list the sends of `X` in execution order.
pub fn harvest(sys: &System, bounds: ExploreBounds) -> Vec<Harvested> {
    let mut out = Vec::new();
    for e in explore_distinct(sys, bounds).unwrap() {
        let m = e.msc();
        let ids = all_messages(&m);
        let n = ids.len() as u32;
        let messages = m.messages();
        for mask in 1..(1u32 << n) {
            let (x, rest) = subset(&ids, mask);
            let mx = m.restrict(&x);
            if !mx.is_exchange() || !splits_as(&m, &rest, &x) {
                continue;
            }
            if !chop_oracle(&m.restrict(&rest), usize::MAX) {
                continue;
            }
            let word: SigmaWord = x
                .iter()
                .map(|&i| {
                    let v = &messages[i];
                    let kind = if v.is_matched() {
                        SigmaKind::Matched
                    } else {
                        SigmaKind::Unmatched
                    };
                    SigmaSymbol::from_send(kind, &m.event(v.send).action)
                })
                .collect();
            out.push(Harvested {
                prime: split_prime(&mx).unwrap(),
                word,
                actions: e.actions.clone(),
            });
        }
    }
    out
}
