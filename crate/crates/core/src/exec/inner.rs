use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::{Expr, ExprType};
use crate::types::{ColumnTable, DataType, Position, Scalar};

use super::eval::{value_type, CompiledExpr, Vector};

/// Which inner rows a subplan scans, always in storage order.
#[derive(Debug, Clone)]
pub enum InnerSource {
    Table,
    /// A precomputed ascending position list, e.g. the rows passing a prefilter.
    Positions(Arc<[Position]>),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ScanOutcome {
    /// Inner rows consumed in scan order, up to and including the deciding row.
    pub rows_examined: u64,
    pub stopped_early: bool,
}

/// The inner query of a subquery predicate: a value expression over the rows
/// of the inner table that pass a (possibly correlated) predicate.
///
/// Correlation parameters are bound positionally: a binding lists the outer
/// row's values for [`slots`](Self::slots), in order.
#[derive(Debug, Clone)]
pub struct InnerSubplan {
    table: Arc<ColumnTable>,
    source: InnerSource,
    value: CompiledExpr,
    value_type: DataType,
    predicate: CompiledExpr,
    slots: Vec<String>,
    capacity: usize,
}

impl InnerSubplan {
    pub fn new(
        table: Arc<ColumnTable>,
        outer: Option<&ColumnTable>,
        value: &Expr,
        predicate: &Expr,
        source: InnerSource,
        capacity: usize,
    ) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("block capacity must be at least 1".into()));
        }
        if value.is_correlated() {
            return Err(Error::Planning(format!(
                "inner value expression `{value}` must not reference the outer row"
            )));
        }
        let slots = predicate.params();
        let value = CompiledExpr::compile(value, &table, None, &[])?;
        let value_type = value_type(value.ty())?;
        let predicate = CompiledExpr::compile(predicate, &table, outer, &slots)?;
        if predicate.ty() != ExprType::Bool {
            return Err(Error::Type("inner predicate is not boolean".into()));
        }
        if let InnerSource::Positions(p) = &source {
            if p.windows(2).any(|w| w[0] >= w[1])
                || p.last().is_some_and(|&l| l as usize >= table.row_count())
            {
                return Err(Error::Invariant(
                    "inner position list is not an ascending list of valid rows".into(),
                ));
            }
        }
        Ok(InnerSubplan {
            table,
            source,
            value,
            value_type,
            predicate,
            slots,
            capacity,
        })
    }

    pub fn table(&self) -> &Arc<ColumnTable> {
        &self.table
    }

    pub fn slots(&self) -> &[String] {
        &self.slots
    }

    pub fn is_correlated(&self) -> bool {
        self.predicate.is_correlated()
    }

    pub fn value_type(&self) -> DataType {
        self.value_type
    }

    /// Number of inner rows a full scan examines.
    pub fn source_len(&self) -> usize {
        match &self.source {
            InnerSource::Table => self.table.row_count(),
            InnerSource::Positions(p) => p.len(),
        }
    }

    fn check_binding(&self, binding: Option<&[Scalar]>) -> Result<Vec<Scalar>> {
        match binding {
            Some(b) if b.len() >= self.slots.len() => Ok(b.to_vec()),
            _ if self.slots.is_empty() => Ok(Vec::new()),
            _ => Err(Error::Execution(format!(
                "inner subplan needs bindings for {:?}",
                self.slots
            ))),
        }
    }

    /// Scans qualifying inner rows block by block. `visit` gets each block's
    /// values and may return the index of a deciding value to stop the scan.
    pub fn scan<F>(&self, binding: Option<&[Scalar]>, mut visit: F) -> Result<ScanOutcome>
    where
        F: FnMut(&Vector) -> Result<Option<usize>>,
    {
        let binding = self.check_binding(binding)?;
        let total = self.source_len();
        let mut block: Vec<Position> = Vec::with_capacity(self.capacity.min(total));
        let mut outcome = ScanOutcome::default();
        let mut start = 0;
        while start < total {
            let end = (start + self.capacity).min(total);
            block.clear();
            match &self.source {
                InnerSource::Table => block.extend(start as Position..end as Position),
                InnerSource::Positions(p) => block.extend_from_slice(&p[start..end]),
            }
            let mask = self.predicate.eval_mask(&self.table, &block, &binding)?;
            let mut selected_at = Vec::new();
            let mut selected = Vec::new();
            for (i, (&p, &keep)) in block.iter().zip(&mask).enumerate() {
                if keep {
                    selected_at.push(i);
                    selected.push(p);
                }
            }
            let values = self.value.eval(&self.table, &selected, &binding)?;
            if let Some(k) = visit(&values)? {
                outcome.rows_examined += selected_at[k] as u64 + 1;
                outcome.stopped_early = true;
                return Ok(outcome);
            }
            outcome.rows_examined += block.len() as u64;
            start = end;
        }
        Ok(outcome)
    }

    /// The full multiset of inner values under `binding`, in scan order.
    pub fn eval_multiset(&self, binding: Option<&[Scalar]>) -> Result<Vec<Scalar>> {
        let mut out = Vec::new();
        self.scan(binding, |values| {
            out.extend(values.clone().into_scalars()?);
            Ok(None)
        })?;
        Ok(out)
    }
}
