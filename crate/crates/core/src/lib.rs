//! Analysis of communicating finite-state machines under mailbox semantics:
//! k-synchronizability, reachable and prime exchanges, and the
//! synchronizability degree.

pub mod conflict;
pub mod degree;
pub mod dot;
pub mod exchange;
pub mod fsa;
pub mod model;
pub mod msc;
pub mod prime;
pub mod sim;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use model::{
    global_product, parse_actions, parse_system, parse_system_with, parse_word, parse_word_in,
    Action, ActionKind, GlobalAutomaton, GlobalState, LocalAutomaton, ParseError, ParseOptions,
    Payload, ProcessId, ProcessTable, SigmaKind, SigmaSymbol, SigmaWord, System,
};
pub use msc::Msc;

/// A configured state-count limit was reached.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("guard exceeded in {stage} (limit {limit})")]
pub struct GuardExceeded {
    pub stage: String,
    pub limit: usize,
}

impl GuardExceeded {
    pub fn new(stage: impl Into<String>, limit: usize) -> Self {
        Self {
            stage: stage.into(),
            limit,
        }
    }
}

/// Limits applied by every lazily built structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Guards {
    /// Maximum number of materialized states per automaton or graph.
    pub states: usize,
    /// Maximum number of words produced by language enumeration.
    pub enumerate: usize,
}

impl Default for Guards {
    fn default() -> Self {
        Self {
            states: 1_000_000,
            enumerate: 100_000,
        }
    }
}

impl fmt::Display for Guards {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "states={} enumerate={}", self.states, self.enumerate)
    }
}
