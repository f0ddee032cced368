//! Document spanners defined by regular ref-languages.
//!
//! The central representation is [`Nfa`], an automaton over terminals,
//! variable markers and variable references. Everything else (word-level
//! semantics, classification, evaluation, static analysis and the
//! core-spanner compilers) is built on top of it.

pub mod algebra;
pub mod analysis;
pub mod classify;
pub mod demo;
mod error;
pub mod eval;
pub mod nfa;
pub mod refx;
pub mod span;
pub mod symbol;
pub mod transform;
pub mod word;

pub use error::{Error, Result};
pub use nfa::Nfa;
pub use span::{Span, SpanRelation, SpanTuple};
pub use symbol::{Alphabet, ExtSymbol, Marker, ValidOrder};
