//! A small position-based columnar engine for subqueries whose inner
//! predicate combines a non-correlated part (NC) with a correlated part (C):
//!
//! ```text
//! SELECT ... FROM outer WHERE x IN | <SOME (SELECT v FROM inner WHERE NC AND|OR C)
//! ```
//!
//! Queries are rewritten so that the NC part is evaluated once, and OR
//! queries can be run through the LP operator, which only sends outer rows
//! failing the NC branch into the correlated branch.

pub mod bench;
pub mod costmodel;
pub mod error;
pub mod exec;
pub mod expr;
pub mod lp;
pub mod oracle;
pub mod par;
pub mod planner;
pub mod storage;
pub mod types;
pub mod workload;

pub use error::{Error, Result};
