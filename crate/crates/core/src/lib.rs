//! Meta-properties for mini-C programs.
//!
//! A meta-property names a context (weak or strong invariant, writing,
//! reading), a set of target functions and a predicate over global state.
//! This crate parses programs carrying such properties, lowers them into
//! ordinary contracts and point assertions, and checks the result by
//! interpretation against an unpruned reference checker.

pub mod checker;
pub mod corpus;
pub mod minic;
pub mod normalize;
pub mod spec;
pub mod transform;
