//! The LP (logical predicate) operator for `X OP (NC) OR X OP (C)`.
//!
//! ```text
//!              Merger ──────────────┐
//!                │                  │
//!            Inverter          right subplan (correlated)
//!             │    │                │
//!  left subplan    │           RightProxy
//!  (non-corr.)     │                ▲ excluded slices
//!       │          └── cached ──────┘
//!  LeftProxy            slices
//!       │                 │
//!       └──── Modulator ──┘
//!                 │
//!           outer Datasource
//! ```
//!
//! The Modulator pulls one outer block (a slice), caches it and forwards it
//! to the left subplan. The Inverter takes the left result for that slice,
//! removes it from the cached slice and hands the remainder to the right
//! subplan. The Merger joins both results into one ascending block per slice.
//! Only outer rows that fail the non-correlated branch ever reach the
//! correlated one.

use std::cell::{Cell, RefCell};
use std::collections::VecDeque;
use std::rc::Rc;

use crate::error::{Error, Result};
use crate::exec::{BoxedOperator, Metrics, PositionalOperator};
use crate::types::{Position, PositionBlock};

/// `cached \ nc_pass`, both ascending. `nc_pass` must be a subset of `cached`.
pub fn lp_exclude(cached: &[Position], nc_pass: &[Position]) -> Result<Vec<Position>> {
    let mut out = Vec::with_capacity(cached.len().saturating_sub(nc_pass.len()));
    let mut pass = nc_pass.iter().peekable();
    for &p in cached {
        match pass.peek() {
            Some(&&q) if q == p => {
                pass.next();
            }
            Some(&&q) if q < p => {
                return Err(Error::Invariant(format!(
                    "position {q} passed the left branch but is not in the cached slice"
                )));
            }
            _ => out.push(p),
        }
    }
    if let Some(q) = pass.next() {
        return Err(Error::Invariant(format!(
            "position {q} passed the left branch but is not in the cached slice"
        )));
    }
    Ok(out)
}

/// Ascending union of two disjoint ascending lists.
fn merge_disjoint(a: &[Position], b: &[Position]) -> Result<Vec<Position>> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i] < b[j] {
            out.push(a[i]);
            i += 1;
        } else if b[j] < a[i] {
            out.push(b[j]);
            j += 1;
        } else {
            return Err(Error::Invariant(format!(
                "position {} emitted by both branches",
                a[i]
            )));
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LpStats {
    pub slices: u64,
    /// Outer positions cached by the Modulator.
    pub cached: u64,
    /// Positions that passed the left (non-correlated) branch.
    pub nc_pass: u64,
    /// Positions forwarded to the right (correlated) branch.
    pub excluded: u64,
    /// Positions that passed the right branch.
    pub corr_pass: u64,
}

struct Modulator {
    outer: BoxedOperator,
    pending: VecDeque<PositionBlock>,
    exhausted: bool,
}

struct Shared {
    modulator: Modulator,
    right_queue: VecDeque<PositionBlock>,
    stats: LpStats,
}

struct LeftProxy(Rc<RefCell<Shared>>);

impl PositionalOperator for LeftProxy {
    fn open(&mut self) -> Result<()> {
        self.0.borrow_mut().modulator.outer.open()
    }

    fn next_block(&mut self) -> Result<Option<PositionBlock>> {
        let mut shared = self.0.borrow_mut();
        let m = &mut shared.modulator;
        if m.exhausted {
            return Ok(None);
        }
        match m.outer.next_block()? {
            Some(block) => {
                m.pending.push_back(block.clone());
                shared.stats.slices += 1;
                shared.stats.cached += block.len() as u64;
                Ok(Some(block))
            }
            None => {
                m.exhausted = true;
                Ok(None)
            }
        }
    }

    fn close(&mut self) {
        self.0.borrow_mut().modulator.outer.close()
    }
}

struct RightProxy(Rc<RefCell<Shared>>);

impl PositionalOperator for RightProxy {
    fn open(&mut self) -> Result<()> {
        Ok(())
    }

    fn next_block(&mut self) -> Result<Option<PositionBlock>> {
        Ok(self.0.borrow_mut().right_queue.pop_front())
    }
}

pub struct LpOperator {
    shared: Rc<RefCell<Shared>>,
    left: BoxedOperator,
    right: BoxedOperator,
    done: bool,
    emitted: Option<Rc<Cell<u64>>>,
}

impl LpOperator {
    /// `build_left` and `build_right` receive the proxy each subplan reads
    /// from and return the subplan root.
    pub fn new<L, R>(outer: BoxedOperator, build_left: L, build_right: R) -> Self
    where
        L: FnOnce(BoxedOperator) -> BoxedOperator,
        R: FnOnce(BoxedOperator) -> BoxedOperator,
    {
        let shared = Rc::new(RefCell::new(Shared {
            modulator: Modulator {
                outer,
                pending: VecDeque::new(),
                exhausted: false,
            },
            right_queue: VecDeque::new(),
            stats: LpStats::default(),
        }));
        let left = build_left(Box::new(LeftProxy(shared.clone())));
        let right = build_right(Box::new(RightProxy(shared.clone())));
        LpOperator {
            shared,
            left,
            right,
            done: false,
            emitted: None,
        }
    }

    pub fn with_metrics(mut self, metrics: &Metrics) -> Self {
        self.emitted = Some(metrics.counter("lp"));
        self
    }

    pub fn stats(&self) -> LpStats {
        self.shared.borrow().stats
    }

    /// Inverter: pairs the left result with its cached slice and queues the
    /// excluded remainder for the right subplan.
    fn invert(&mut self, nc_pass: &PositionBlock) -> Result<()> {
        let mut shared = self.shared.borrow_mut();
        let cached = shared.modulator.pending.pop_front().ok_or_else(|| {
            Error::Invariant(format!("left branch emitted unknown slice {}", nc_pass.slice()))
        })?;
        if cached.slice() != nc_pass.slice() {
            return Err(Error::Invariant(format!(
                "left branch emitted slice {} while slice {} was pending",
                nc_pass.slice(),
                cached.slice()
            )));
        }
        let excluded = lp_exclude(cached.positions(), nc_pass.positions())?;
        shared.stats.nc_pass += nc_pass.len() as u64;
        shared.stats.excluded += excluded.len() as u64;
        let block = cached.derive(excluded);
        shared.right_queue.push_back(block);
        Ok(())
    }
}

impl PositionalOperator for LpOperator {
    fn open(&mut self) -> Result<()> {
        self.done = false;
        self.left.open()?;
        self.right.open()
    }

    fn next_block(&mut self) -> Result<Option<PositionBlock>> {
        if self.done {
            return Ok(None);
        }
        let Some(nc_pass) = self.left.next_block()? else {
            self.done = true;
            let shared = self.shared.borrow();
            if !shared.modulator.pending.is_empty() || !shared.right_queue.is_empty() {
                return Err(Error::Invariant("LP finished with undrained slices".into()));
            }
            return Ok(None);
        };
        self.invert(&nc_pass)?;
        let corr_pass = self.right.next_block()?.ok_or_else(|| {
            Error::Invariant(format!("right branch dropped slice {}", nc_pass.slice()))
        })?;
        if corr_pass.slice() != nc_pass.slice() {
            return Err(Error::Invariant(format!(
                "right branch emitted slice {} for slice {}",
                corr_pass.slice(),
                nc_pass.slice()
            )));
        }
        self.shared.borrow_mut().stats.corr_pass += corr_pass.len() as u64;
        let merged = merge_disjoint(nc_pass.positions(), corr_pass.positions())?;
        if let Some(c) = &self.emitted {
            c.set(c.get() + merged.len() as u64);
        }
        Ok(Some(nc_pass.derive(merged)))
    }

    fn close(&mut self) {
        self.left.close();
        self.right.close();
    }
}
