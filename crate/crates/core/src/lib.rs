//! Tooling for compositional-generalization experiments in semantic parsing:
//! corpus normalization and anonymization, program templates and
//! template-disjoint splits, grammar parsing with context-sensitive decoding
//! constraints, word alignment for attention supervision, attention loss
//! terms, and evaluation metrics.

pub mod aligner;
pub mod attention;
pub mod corpus;
pub mod decoder;
pub mod exec;
pub mod grammar;
pub mod metrics;
pub mod normalizer;
pub mod splitter;

pub use corpus::{Binding, Corpus, Example, Schema};
pub use exec::Jobs;
pub use grammar::{Derivation, Grammar, ParseTree, RuleId};
