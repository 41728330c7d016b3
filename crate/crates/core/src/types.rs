//! Scalars, column storage and positional intermediates.
//!
//! A [`ColumnTable`] is an immutable set of equally long columns. Operators
//! never pass rows around; they pass [`PositionBlock`]s, ascending lists of
//! row indices into one table, and read values through a [`Reader`] only
//! where a value is actually needed.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use crate::error::{Error, Result};

/// Row index into a base table (0-based).
pub type Position = u32;

pub const DEFAULT_BLOCK_CAPACITY: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DataType {
    Int64,
    Float64,
    Text,
}

impl fmt::Display for DataType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DataType::Int64 => "int64",
            DataType::Float64 => "float64",
            DataType::Text => "text",
        })
    }
}

#[derive(Debug, Clone)]
pub enum Scalar {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Scalar {
    pub fn data_type(&self) -> DataType {
        match self {
            Scalar::Int(_) => DataType::Int64,
            Scalar::Float(_) => DataType::Float64,
            Scalar::Text(_) => DataType::Text,
        }
    }

    /// Total order between scalars of the same tag. Text compares byte-wise.
    pub fn try_cmp(&self, other: &Scalar) -> Result<Ordering> {
        match (self, other) {
            (Scalar::Int(a), Scalar::Int(b)) => Ok(a.cmp(b)),
            (Scalar::Float(a), Scalar::Float(b)) => Ok(float_cmp(*a, *b)),
            (Scalar::Text(a), Scalar::Text(b)) => Ok(a.as_bytes().cmp(b.as_bytes())),
            _ => Err(Error::Type(format!(
                "cannot compare {} with {}",
                self.data_type(),
                other.data_type()
            ))),
        }
    }

    /// Numeric value as a float; `None` for text.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Scalar::Int(v) => Some(*v as f64),
            Scalar::Float(v) => Some(*v),
            _ => None,
        }
    }
}

/// Total order on floats with `-0.0 == 0.0`, matching scalar equality.
pub fn float_cmp(a: f64, b: f64) -> Ordering {
    (a + 0.0).total_cmp(&(b + 0.0))
}

// Floats are always finite, so bitwise identity (with -0.0 folded into 0.0)
// is a lawful equivalence and lets scalars key hash sets.
fn canonical_bits(v: f64) -> u64 {
    if v == 0.0 {
        0
    } else {
        v.to_bits()
    }
}

impl PartialEq for Scalar {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Scalar::Int(a), Scalar::Int(b)) => a == b,
            (Scalar::Float(a), Scalar::Float(b)) => canonical_bits(*a) == canonical_bits(*b),
            (Scalar::Text(a), Scalar::Text(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for Scalar {}

impl Hash for Scalar {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match self {
            Scalar::Int(v) => {
                0u8.hash(state);
                v.hash(state)
            }
            Scalar::Float(v) => {
                1u8.hash(state);
                canonical_bits(*v).hash(state)
            }
            Scalar::Text(v) => {
                2u8.hash(state);
                v.hash(state)
            }
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Int(v) => write!(f, "{v}"),
            // `{:?}` is the shortest representation that parses back exactly.
            Scalar::Float(v) => write!(f, "{v:?}"),
            Scalar::Text(v) => f.write_str(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Int(Vec<i64>),
    Float(Vec<f64>),
    Text(Vec<String>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Int(v) => v.len(),
            ColumnData::Float(v) => v.len(),
            ColumnData::Text(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn data_type(&self) -> DataType {
        match self {
            ColumnData::Int(_) => DataType::Int64,
            ColumnData::Float(_) => DataType::Float64,
            ColumnData::Text(_) => DataType::Text,
        }
    }

    pub fn empty(ty: DataType) -> Self {
        match ty {
            DataType::Int64 => ColumnData::Int(Vec::new()),
            DataType::Float64 => ColumnData::Float(Vec::new()),
            DataType::Text => ColumnData::Text(Vec::new()),
        }
    }

    /// Value at `pos`. Panics when out of range; callers check bounds.
    pub fn get(&self, pos: usize) -> Scalar {
        match self {
            ColumnData::Int(v) => Scalar::Int(v[pos]),
            ColumnData::Float(v) => Scalar::Float(v[pos]),
            ColumnData::Text(v) => Scalar::Text(v[pos].clone()),
        }
    }

    pub(crate) fn push(&mut self, value: Scalar) -> Result<()> {
        match (self, value) {
            (ColumnData::Int(v), Scalar::Int(x)) => v.push(x),
            (ColumnData::Float(v), Scalar::Float(x)) => v.push(x),
            (ColumnData::Text(v), Scalar::Text(x)) => v.push(x),
            (col, value) => {
                return Err(Error::Type(format!(
                    "cannot store {} in a {} column",
                    value.data_type(),
                    col.data_type()
                )))
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub data: ColumnData,
}

impl Column {
    pub fn new(name: impl Into<String>, data: ColumnData) -> Self {
        Column {
            name: name.into(),
            data,
        }
    }
}

/// Immutable columnar relation.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnTable {
    name: String,
    columns: Vec<Column>,
    row_count: usize,
}

impl ColumnTable {
    /// Validates equal column lengths, unique names and finite floats.
    pub fn new(name: impl Into<String>, columns: Vec<Column>) -> Result<Self> {
        let name = name.into();
        let row_count = columns.first().map_or(0, |c| c.data.len());
        let mut seen = HashSet::new();
        for col in &columns {
            if !seen.insert(col.name.as_str()) {
                return Err(Error::Schema(format!(
                    "duplicate column `{}` in table `{name}`",
                    col.name
                )));
            }
            if col.data.len() != row_count {
                return Err(Error::Schema(format!(
                    "column `{}` of table `{name}` has {} values, expected {row_count}",
                    col.name,
                    col.data.len()
                )));
            }
            if let ColumnData::Float(values) = &col.data {
                if let Some(i) = values.iter().position(|v| !v.is_finite()) {
                    return Err(Error::Type(format!(
                        "non-finite value in `{name}.{}` at row {i}",
                        col.name
                    )));
                }
            }
        }
        if row_count > Position::MAX as usize {
            return Err(Error::Schema(format!("table `{name}` is too large")));
        }
        Ok(ColumnTable {
            name,
            columns,
            row_count,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn row_count(&self) -> usize {
        self.row_count
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| Error::Schema(format!("no column `{name}` in table `{}`", self.name)))
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        Ok(&self.columns[self.column_index(name)?])
    }

    pub fn schema(&self) -> Vec<(String, DataType)> {
        self.columns
            .iter()
            .map(|c| (c.name.clone(), c.data.data_type()))
            .collect()
    }

    /// Full row at `pos`, in column order.
    pub fn row(&self, pos: usize) -> Vec<Scalar> {
        self.columns.iter().map(|c| c.data.get(pos)).collect()
    }
}

/// A block of ascending row positions into one table.
///
/// `slice` is the sequence number of the datasource block the positions
/// descend from; positional filters keep it so that operators splitting and
/// re-joining a stream (LP) can line blocks up again.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PositionBlock {
    table: Arc<str>,
    positions: Vec<Position>,
    capacity: usize,
    slice: u64,
}

impl PositionBlock {
    pub fn new(
        table: Arc<str>,
        positions: Vec<Position>,
        capacity: usize,
        slice: u64,
    ) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("block capacity must be at least 1".into()));
        }
        if positions.len() > capacity {
            return Err(Error::Invariant(format!(
                "block of {} positions exceeds capacity {capacity}",
                positions.len()
            )));
        }
        if positions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Invariant(
                "block positions are not strictly increasing".into(),
            ));
        }
        Ok(PositionBlock {
            table,
            positions,
            capacity,
            slice,
        })
    }

    /// Derive a block over the same table and slice. `positions` must be an
    /// ascending subset of the parent's positions.
    pub(crate) fn derive(&self, positions: Vec<Position>) -> Self {
        debug_assert!(positions.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(positions.len() <= self.capacity);
        PositionBlock {
            table: self.table.clone(),
            positions,
            capacity: self.capacity,
            slice: self.slice,
        }
    }

    pub fn table(&self) -> &str {
        &self.table
    }

    pub fn positions(&self) -> &[Position] {
        &self.positions
    }

    pub fn into_positions(self) -> Vec<Position> {
        self.positions
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn slice(&self) -> u64 {
        self.slice
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Splits an ascending position list into blocks of `capacity`.
pub fn block_slice(
    table: &Arc<str>,
    positions: &[Position],
    capacity: usize,
) -> Result<Vec<PositionBlock>> {
    if capacity == 0 {
        return Err(Error::Config("block capacity must be at least 1".into()));
    }
    positions
        .chunks(capacity)
        .enumerate()
        .map(|(i, chunk)| PositionBlock::new(table.clone(), chunk.to_vec(), capacity, i as u64))
        .collect()
}

/// Value access for one column of one table.
#[derive(Debug, Clone)]
pub struct Reader {
    table: Arc<ColumnTable>,
    column: usize,
}

impl Reader {
    pub fn new(table: Arc<ColumnTable>, column: &str) -> Result<Self> {
        let column = table.column_index(column)?;
        Ok(Reader { table, column })
    }

    pub fn column_name(&self) -> &str {
        &self.table.columns()[self.column].name
    }

    pub fn data_type(&self) -> DataType {
        self.table.columns()[self.column].data.data_type()
    }

    pub fn read(&self, block: &PositionBlock) -> Result<Vec<Scalar>> {
        if block.table() != self.table.name() {
            return Err(Error::Schema(format!(
                "reader for `{}.{}` applied to a block of `{}`",
                self.table.name(),
                self.column_name(),
                block.table()
            )));
        }
        let data = &self.table.columns()[self.column].data;
        let rows = self.table.row_count();
        block
            .positions()
            .iter()
            .map(|&p| {
                if (p as usize) < rows {
                    Ok(data.get(p as usize))
                } else {
                    Err(Error::Invariant(format!(
                        "position {p} out of range for `{}` ({rows} rows)",
                        self.table.name()
                    )))
                }
            })
            .collect()
    }
}
