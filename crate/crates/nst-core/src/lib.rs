//! Workbench for reasoning about fragments of naive set theory.
//!
//! The library is organized around five pieces:
//!
//! - [`syntax`]: first-order formulas over `in` and `=` with composite-term
//!   sugar (unordered pair, ordered pair, extraction), parsing, printing,
//!   substitution and abbreviation expansion.
//! - [`catalog`]: named comprehension instances and theory fragments
//!   (Russell, co-Russell, Curry, Mirimanoff, paradoxical groups, the
//!   fixed-point construction, ...).
//! - [`semantics`]: finite membership structures and a Tarskian evaluator,
//!   both a naive recursive one and a relational (set-at-a-time) one.
//! - [`finder`]: exhaustive finite-model search with constant-assignment
//!   search and isomorphism reduction.
//! - [`refuter`]: clausification, ground instantiation, an embedded CDCL
//!   SAT procedure and independently checkable refutation certificates.

pub mod catalog;
pub mod finder;
pub mod fragment;
pub mod model;
pub mod parser;
pub mod refuter;
pub mod semantics;
pub mod syntax;
