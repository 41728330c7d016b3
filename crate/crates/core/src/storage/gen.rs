use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::types::{Column, ColumnData, ColumnTable, DataType};

pub const PART_BASE_ROWS: f64 = 200_000.0;
pub const LINEITEM_BASE_ROWS: f64 = 6_000_000.0;

const PART_STREAM: u64 = 1;
const LINEITEM_STREAM: u64 = 2;
const ADVERSARIAL_STREAM: u64 = 3;

/// Scale and seed of a generated dataset. All randomness comes from ChaCha8
/// seeded with `seed`, one stream per table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenSpec {
    pub scale: f64,
    pub seed: u64,
}

impl GenSpec {
    pub fn new(scale: f64, seed: u64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::Config(format!("scale must be positive, got {scale}")));
        }
        Ok(GenSpec { scale, seed })
    }

    pub fn part_rows(&self) -> usize {
        (PART_BASE_ROWS * self.scale).round() as usize
    }

    pub fn lineitem_rows(&self) -> usize {
        (LINEITEM_BASE_ROWS * self.scale).round() as usize
    }

    pub fn supplier_count(&self) -> i64 {
        ((10_000.0 * self.scale).round() as i64).max(100)
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

fn schema(cols: &[(&str, DataType)]) -> Vec<(String, DataType)> {
    cols.iter().map(|(n, t)| (n.to_string(), *t)).collect()
}

pub fn part_schema() -> Vec<(String, DataType)> {
    schema(&[
        ("partkey", DataType::Int64),
        ("retailprice", DataType::Float64),
        ("size", DataType::Int64),
    ])
}

pub fn lineitem_schema() -> Vec<(String, DataType)> {
    schema(&[
        ("suppkey", DataType::Int64),
        ("extendedprice", DataType::Float64),
        ("discount", DataType::Float64),
        ("tax", DataType::Float64),
        ("quantity", DataType::Int64),
    ])
}

/// `part(partkey, retailprice, size)`: partkey 1..=n, retailprice uniform
/// over [900, 1900), size uniform over [1, 50].
pub fn generate_part(spec: &GenSpec) -> ColumnTable {
    let n = spec.part_rows();
    let mut rng = spec.rng(PART_STREAM);
    let mut price = Vec::with_capacity(n);
    let mut size = Vec::with_capacity(n);
    for _ in 0..n {
        price.push(rng.random_range(900.0..1900.0));
        size.push(rng.random_range(1..=50));
    }
    ColumnTable::new(
        "part",
        vec![
            Column::new("partkey", ColumnData::Int((1..=n as i64).collect())),
            Column::new("retailprice", ColumnData::Float(price)),
            Column::new("size", ColumnData::Int(size)),
        ],
    )
    .expect("generated part table is well formed")
}

/// `lineitem(suppkey, extendedprice, discount, tax, quantity)`.
///
/// suppkey is uniform over [1, max(100, round(10000 * scale))], quantity over
/// [1, 50], extendedprice is quantity times a unit price uniform over
/// [901, 2099), discount uniform over [0, 0.10) and tax over [0, 0.08).
pub fn generate_lineitem(spec: &GenSpec) -> ColumnTable {
    let n = spec.lineitem_rows();
    let suppliers = spec.supplier_count();
    let mut rng = spec.rng(LINEITEM_STREAM);
    let mut suppkey = Vec::with_capacity(n);
    let mut price = Vec::with_capacity(n);
    let mut discount = Vec::with_capacity(n);
    let mut tax = Vec::with_capacity(n);
    let mut quantity = Vec::with_capacity(n);
    for _ in 0..n {
        suppkey.push(rng.random_range(1..=suppliers));
        let q: i64 = rng.random_range(1..=50);
        quantity.push(q);
        price.push(q as f64 * rng.random_range(901.0..2099.0));
        discount.push(rng.random_range(0.0..0.10));
        tax.push(rng.random_range(0.0..0.08));
    }
    ColumnTable::new(
        "lineitem",
        vec![
            Column::new("suppkey", ColumnData::Int(suppkey)),
            Column::new("extendedprice", ColumnData::Float(price)),
            Column::new("discount", ColumnData::Float(discount)),
            Column::new("tax", ColumnData::Float(tax)),
            Column::new("quantity", ColumnData::Int(quantity)),
        ],
    )
    .expect("generated lineitem table is well formed")
}

/// A dataset for the early-exit experiment, with two NC parameter values:
/// `lucky` reaches its maximum on the first inner row and lets 80% of the
/// parts pass, `unlucky` lets 99.9% pass but only reaches its maximum at 60%
/// of the inner scan.
#[derive(Debug, Clone)]
pub struct Adversarial {
    pub part: ColumnTable,
    pub lineitem: ColumnTable,
    pub lucky: i64,
    pub unlucky: i64,
    /// Inner position of the unlucky maximum.
    pub unlucky_max_at: usize,
}

/// Every value `3 * extendedprice * discount * tax` is below 900 (so below
/// every retailprice) except the two maxima. The two special rows have
/// quantity 0 so the correlated branch never sees them.
pub fn adversarial_dataset(seed: u64) -> Adversarial {
    const PARTS: usize = 4000;
    const ITEMS: usize = 40_000;
    const UNLUCKY_ROWS: usize = 400;
    let part = generate_part(&GenSpec { scale: PARTS as f64 / PART_BASE_ROWS, seed });
    let mut prices: Vec<f64> = match &part.column("retailprice").unwrap().data {
        ColumnData::Float(v) => v.clone(),
        _ => unreachable!(),
    };
    prices.sort_by(f64::total_cmp);
    let threshold = |fraction: f64| {
        let k = (fraction * PARTS as f64).round() as usize;
        (prices[k - 1] + prices[k]) / 2.0
    };
    let (lucky, unlucky) = (1, 2);
    let unlucky_max_at = ITEMS * 6 / 10;

    let spec = GenSpec { scale: 1.0, seed };
    let mut rng = spec.rng(ADVERSARIAL_STREAM);
    let mut suppkey = Vec::with_capacity(ITEMS);
    let mut price = Vec::with_capacity(ITEMS);
    let mut discount = Vec::with_capacity(ITEMS);
    let mut tax = Vec::with_capacity(ITEMS);
    let mut quantity = Vec::with_capacity(ITEMS);
    for i in 0..ITEMS {
        let special = if i == 0 {
            Some(threshold(0.8))
        } else if i == unlucky_max_at {
            Some(threshold(0.999))
        } else {
            None
        };
        if let Some(value) = special {
            suppkey.push(if i == 0 { lucky } else { unlucky });
            quantity.push(0);
            discount.push(0.1);
            tax.push(0.08);
            price.push(value / 0.024);
            continue;
        }
        let s = if i % (ITEMS / UNLUCKY_ROWS) == 1 {
            unlucky
        } else {
            rng.random_range(3..=100)
        };
        let q: i64 = rng.random_range(1..=50);
        suppkey.push(s);
        quantity.push(q);
        price.push(q as f64 * rng.random_range(901.0..2099.0));
        // 3 * 104950 * 0.02 * 0.08 < 504
        discount.push(rng.random_range(0.0..0.02));
        tax.push(rng.random_range(0.0..0.08));
    }
    let lineitem = ColumnTable::new(
        "lineitem",
        vec![
            Column::new("suppkey", ColumnData::Int(suppkey)),
            Column::new("extendedprice", ColumnData::Float(price)),
            Column::new("discount", ColumnData::Float(discount)),
            Column::new("tax", ColumnData::Float(tax)),
            Column::new("quantity", ColumnData::Int(quantity)),
        ],
    )
    .expect("adversarial lineitem table is well formed");
    Adversarial {
        part,
        lineitem,
        lucky,
        unlucky,
        unlucky_max_at,
    }
}
