//! Synchronizability degree: the supremum of the sizes of prime reachable
//! exchanges, and the bounded check that the system is synchronizable at
//! that degree.

use std::fmt;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::conflict::is_k_synchronizable_msc;
use crate::exchange::ReachGraph;
use crate::fsa::{longest_word, LengthVerdict, Nfa, Product};
use crate::model::{Action, SigmaWord, System};
use crate::prime::PrimeDfa;
use crate::sim::{explore_distinct, Execution, ExploreBounds};
use crate::{GuardExceeded, Guards};

/// Where a witness word lives in the reach graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeContext {
    /// Source node of the exchange.
    pub source: String,
    /// Nodes the exchange can lead to.
    pub targets: Vec<String>,
    /// Edge witnesses leading from the initial node to the source.
    pub path: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DegreeVerdict {
    /// Largest prime reachable exchange has `k` messages. No witness when
    /// there is no prime reachable exchange at all.
    Degree {
        k: usize,
        witness: Option<String>,
        context: Option<NodeContext>,
    },
    /// `prefix · cycle^n · suffix` is a prime reachable exchange for all `n`.
    Unbounded {
        prefix: String,
        cycle: String,
        suffix: String,
        context: NodeContext,
    },
    GuardExceeded(GuardExceeded),
}

impl DegreeVerdict {
    pub fn k(&self) -> Option<usize> {
        match self {
            DegreeVerdict::Degree { k, .. } => Some(*k),
            _ => None,
        }
    }
}

impl fmt::Display for DegreeVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DegreeVerdict::Degree { k, witness, context } => {
                write!(f, "degree {k}")?;
                if let (Some(w), Some(c)) = (witness, context) {
                    write!(f, "\nwitness: {w}")?;
                    fmt_context(f, c)?;
                }
                Ok(())
            }
            DegreeVerdict::Unbounded {
                prefix,
                cycle,
                suffix,
                context,
            } => {
                write!(f, "unbounded\nprefix: {prefix}\ncycle: {cycle}\nsuffix: {suffix}")?;
                fmt_context(f, context)
            }
            DegreeVerdict::GuardExceeded(g) => write!(f, "{g}"),
        }
    }
}

fn fmt_context(f: &mut fmt::Formatter<'_>, c: &NodeContext) -> fmt::Result {
    write!(f, "\nfrom: {}", c.source)?;
    for t in &c.targets {
        write!(f, "\nto: {t}")?;
    }
    for (i, w) in c.path.iter().enumerate() {
        write!(f, "\npath[{i}]: {w}")?;
    }
    Ok(())
}

fn context(graph: &ReachGraph, node: usize, word: &SigmaWord) -> NodeContext {
    NodeContext {
        source: graph.describe_node(node),
        targets: graph.products[node]
            .targets_of(word)
            .into_iter()
            .map(|t| graph.describe_node(t))
            .collect(),
        path: graph
            .path_to(node)
            .unwrap_or_default()
            .iter()
            .map(|w| w.to_string())
            .collect(),
    }
}

/// Per node, the exchanges leaving it intersected with the prime words.
pub fn prime_products(graph: &ReachGraph) -> Result<Vec<Nfa>, GuardExceeded> {
    let a = &graph.analysis;
    let dfa = PrimeDfa::new(&a.table, &a.sigma);
    graph
        .products
        .iter()
        .map(|p| {
            Nfa::materialize(
                &Product {
                    left: &p.nfa,
                    right: &dfa,
                },
                a.guards.states,
            )
        })
        .collect()
}

/// Degree of an already built reach graph.
pub fn degree_of(graph: &ReachGraph) -> DegreeVerdict {
    let products = match prime_products(graph) {
        Ok(p) => p,
        Err(e) => return DegreeVerdict::GuardExceeded(e),
    };
    let mut best: Option<(usize, SigmaWord, usize)> = None;
    for (node, nfa) in products.iter().enumerate() {
        match longest_word(nfa) {
            LengthVerdict::Empty => {}
            LengthVerdict::Finite { length, witness } => {
                if best.as_ref().is_none_or(|b| length > b.0) {
                    best = Some((length, witness, node));
                }
            }
            LengthVerdict::Infinite {
                prefix,
                cycle,
                suffix,
                ..
            } => {
                let word: SigmaWord = prefix
                    .iter()
                    .chain(cycle.iter())
                    .chain(suffix.iter())
                    .cloned()
                    .collect();
                return DegreeVerdict::Unbounded {
                    prefix: prefix.to_string(),
                    cycle: cycle.to_string(),
                    suffix: suffix.to_string(),
                    context: context(graph, node, &word),
                };
            }
        }
    }
    match best {
        None => DegreeVerdict::Degree {
            k: 0,
            witness: None,
            context: None,
        },
        Some((k, w, node)) => DegreeVerdict::Degree {
            k,
            witness: Some(w.to_string()),
            context: Some(context(graph, node, &w)),
        },
    }
}

pub fn degree_bound(sys: &System, guards: Guards) -> DegreeVerdict {
    match ReachGraph::build(sys, guards) {
        Ok(g) => degree_of(&g),
        Err(e) => DegreeVerdict::GuardExceeded(e),
    }
}

/// `|L_S|² · 2^{8|P|²}`, an upper bound on any finite degree.
pub fn theoretical_bound(sys: &System) -> BigUint {
    let states = BigUint::from(sys.local_state_count());
    let p = sys.process_count();
    &states * &states * (BigUint::from(1u8) << (8 * p * p))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KCheck {
    /// No execution within the bounds violates k-synchronizability.
    Pass,
    Fail(Execution),
    Inconclusive(GuardExceeded),
}

/// Explores executions within `bounds` and returns a shortest one whose MSC
/// is not k-synchronizable.
pub fn check_k_bounded(sys: &System, k: usize, bounds: ExploreBounds) -> KCheck {
    let runs = match explore_distinct(sys, bounds) {
        Ok(r) => r,
        Err(e) => return KCheck::Inconclusive(e),
    };
    runs.into_iter()
        .filter(|e| !is_k_synchronizable_msc(&e.msc(), k))
        .min_by_key(|e| e.actions.len())
        .map_or(KCheck::Pass, KCheck::Fail)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SyncVerdict {
    /// Degree `k` and no counterexample within the exploration bounds.
    Synchronizable { k: usize, note: String },
    NotSynchronizable { reason: NotSyncReason },
    Inconclusive {
        reason: String,
        guards: Guards,
        bounds: ExploreBounds,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NotSyncReason {
    UnboundedExchange { degree: DegreeVerdict },
    BoundedCounterexample { k: usize, execution: Vec<Action> },
}

pub const BOUNDED_NOTE: &str = "verified up to bounds";

impl fmt::Display for SyncVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SyncVerdict::Synchronizable { k, note } => {
                write!(f, "synchronizable with degree {k} ({note})")
            }
            SyncVerdict::NotSynchronizable { reason } => match reason {
                NotSyncReason::UnboundedExchange { degree } => {
                    write!(f, "not synchronizable: prime exchanges of unbounded size\n{degree}")
                }
                NotSyncReason::BoundedCounterexample { k, execution } => {
                    write!(f, "not synchronizable: execution not {k}-synchronizable")?;
                    for a in execution {
                        write!(f, "\n  {a}")?;
                    }
                    Ok(())
                }
            },
            SyncVerdict::Inconclusive { reason, .. } => write!(f, "inconclusive: {reason}"),
        }
    }
}

pub fn synchronizable(sys: &System, guards: Guards, bounds: ExploreBounds) -> SyncVerdict {
    let inconclusive = |reason: String| SyncVerdict::Inconclusive {
        reason,
        guards,
        bounds,
    };
    let degree = degree_bound(sys, guards);
    let k = match &degree {
        DegreeVerdict::Degree { k, .. } => *k,
        DegreeVerdict::Unbounded { .. } => {
            return SyncVerdict::NotSynchronizable {
                reason: NotSyncReason::UnboundedExchange { degree },
            }
        }
        DegreeVerdict::GuardExceeded(g) => return inconclusive(g.to_string()),
    };
    match check_k_bounded(sys, k, bounds) {
        KCheck::Pass => SyncVerdict::Synchronizable {
            k,
            note: BOUNDED_NOTE.to_string(),
        },
        KCheck::Fail(e) => SyncVerdict::NotSynchronizable {
            reason: NotSyncReason::BoundedCounterexample {
                k,
                execution: e.actions,
            },
        },
        KCheck::Inconclusive(g) => inconclusive(g.to_string()),
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::conflict::{check_causal, is_prime_msc};
    use crate::model::{parse_system, parse_word};
    use crate::msc::Msc;
    use crate::sim::tests::S1;

    pub(crate) const FLOOD: &str = "\
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

    #[test]
    fn idle_degree() {
        let sys = parse_system("process p\n  init 0\n").unwrap();
        assert_eq!(degree_bound(&sys, Guards::default()).k(), Some(0));
        let v = synchronizable(&sys, Guards::default(), ExploreBounds::new(4, 2));
        assert!(matches!(v, SyncVerdict::Synchronizable { k: 0, .. }));
    }

    #[test]
    fn s1_degree() {
        let sys = parse_system(S1).unwrap();
        let v = degree_bound(&sys, Guards::default());
        let DegreeVerdict::Degree { k, witness, .. } = &v else {
            panic!("{v}");
        };
        let w = parse_word(witness.as_deref().unwrap()).unwrap();
        assert_eq!(w.len(), *k);
        let m = Msc::of_word(&w);
        assert!(is_prime_msc(&m).unwrap() && check_causal(&m));
        assert!(theoretical_bound(&sys) > BigUint::from(*k));
        assert_eq!(check_k_bounded(&sys, *k, ExploreBounds::new(8, 3)), KCheck::Pass);
        assert!(matches!(
            check_k_bounded(&sys, 0, ExploreBounds::new(8, 3)),
            KCheck::Fail(e) if e.actions.len() == 1
        ));
    }

    #[test]
    fn flood_is_unbounded() {
        let sys = parse_system(FLOOD).unwrap();
        let v = degree_bound(&sys, Guards::default());
        assert!(matches!(v, DegreeVerdict::Unbounded { .. }), "{v}");
        let s = synchronizable(&sys, Guards::default(), ExploreBounds::new(6, 3));
        assert!(matches!(s, SyncVerdict::NotSynchronizable { .. }));
        assert!(matches!(
            check_k_bounded(&sys, 1, ExploreBounds::new(8, 2)),
            KCheck::Fail(_)
        ));
    }

    #[test]
    fn bound_arithmetic() {
        let sys = parse_system("process p\n  init 0\n").unwrap();
        assert_eq!(theoretical_bound(&sys), BigUint::from(256u32));
    }
}
