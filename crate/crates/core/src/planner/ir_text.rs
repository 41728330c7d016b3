//! Text form of [`SubqueryQuery`]: a TOML document with two tables.
//!
//! ```toml
//! [outer]
//! table = "part"
//! output = ["partkey"]
//! probe = "(col retailprice)"
//!
//! [subquery]
//! op = "lt_some"            # in | lt_some | gt_some | lt_all | gt_all
//! table = "lineitem"
//! value = "(* 3.0 (col extendedprice) (col discount) (col tax))"
//! nc = "(= (col suppkey) 39)"
//! c = "(= (corr size) (col quantity))"
//! connective = "or"         # and | or
//! ```
//!
//! Expressions use the prefix grammar of [`Expr::parse`]. Unknown keys,
//! operators and connectives are rejected.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;

use super::SubqueryQuery;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    outer: OuterPart,
    subquery: InnerPart,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OuterPart {
    table: String,
    output: Vec<String>,
    probe: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InnerPart {
    op: String,
    table: String,
    value: String,
    nc: String,
    c: String,
    connective: String,
}

fn expr(field: &str, text: &str) -> Result<Expr> {
    Expr::parse(text).map_err(|e| Error::Parse(format!("{field}: {e}")))
}

pub fn parse_query(text: &str) -> Result<SubqueryQuery> {
    let doc: Document = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    Ok(SubqueryQuery {
        outer_table: doc.outer.table,
        output_columns: doc.outer.output,
        probe: expr("outer.probe", &doc.outer.probe)?,
        op: doc.subquery.op.parse()?,
        inner_table: doc.subquery.table,
        inner_value: expr("subquery.value", &doc.subquery.value)?,
        nc: expr("subquery.nc", &doc.subquery.nc)?,
        c: expr("subquery.c", &doc.subquery.c)?,
        connective: doc.subquery.connective.parse()?,
    })
}

pub fn query_to_toml(q: &SubqueryQuery) -> String {
    let doc = Document {
        outer: OuterPart {
            table: q.outer_table.clone(),
            output: q.output_columns.clone(),
            probe: q.probe.to_string(),
        },
        subquery: InnerPart {
            op: q.op.to_string(),
            table: q.inner_table.clone(),
            value: q.inner_value.to_string(),
            nc: q.nc.to_string(),
            c: q.c.to_string(),
            connective: q.connective.to_string(),
        },
    };
    toml::to_string(&doc).expect("query document always serializes")
}
