//! Tuple bubbles: horizontal partitions of relations and of FK-joined
//! partition pairs, plus the compact per-bubble attribute index used to
//! steer bubble selection.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::catalog::{Attribute, Database, FkEdge, Schema, Table};
use crate::error::{Error, Result};
use crate::inference::Region;

/// Target false-positive rate of the membership filters.
pub const DEFAULT_FALSE_POSITIVE_RATE: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionConfig {
    /// Relations with more rows than this are split.
    pub theta: usize,
    /// Number of partitions for a split relation.
    pub k: usize,
    /// Also build bubbles over FK-joined partition pairs.
    pub join_mode: bool,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        Self {
            theta: 500_000,
            k: 3,
            join_mode: false,
        }
    }
}

impl PartitionConfig {
    pub fn new(theta: usize, k: usize, join_mode: bool) -> Result<Self> {
        if theta == 0 || k == 0 {
            return Err(Error::InvalidArgument(format!(
                "partitioning needs theta >= 1 and k >= 1 (got theta={theta}, k={k})"
            )));
        }
        Ok(Self { theta, k, join_mode })
    }

    /// Contiguous near-equal row ranges for a relation of `n` rows; earlier
    /// ranges take the remainder.
    pub fn partition_ranges(&self, n: usize) -> Vec<Range<usize>> {
        if n <= self.theta {
            return vec![0..n];
        }
        let parts = self.k.min(n);
        let (base, extra) = (n / parts, n % parts);
        let mut start = 0;
        (0..parts)
            .map(|i| {
                let len = base + usize::from(i < extra);
                let r = start..start + len;
                start += len;
                r
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BubbleSource {
    Relation {
        relation: String,
        partition: usize,
    },
    Join {
        left: String,
        left_partition: usize,
        right: String,
        right_partition: usize,
        left_attribute: String,
        right_attribute: String,
    },
}

impl BubbleSource {
    pub fn relations(&self) -> Vec<&str> {
        match self {
            BubbleSource::Relation { relation, .. } => vec![relation],
            BubbleSource::Join { left, right, .. } => vec![left, right],
        }
    }

    pub fn is_join(&self) -> bool {
        matches!(self, BubbleSource::Join { .. })
    }
}

/// A partition of one relation, or of an FK-joined pair of partitions,
/// materialized as a table whose attributes are named `relation.attribute`.
#[derive(Clone, Debug)]
pub struct TupleBubble {
    pub id: String,
    pub source: BubbleSource,
    pub table: Table,
    /// Qualified names that resolve to another column (the dropped side of a
    /// join attribute).
    pub aliases: BTreeMap<String, String>,
}

impl TupleBubble {
    pub fn n_rows(&self) -> usize {
        self.table.n_rows()
    }

    pub fn is_empty(&self) -> bool {
        self.table.n_rows() == 0
    }

    pub fn resolve<'a>(&'a self, qualified: &'a str) -> &'a str {
        self.aliases.get(qualified).map_or(qualified, String::as_str)
    }

    pub fn attribute_position(&self, qualified: &str) -> Option<usize> {
        self.table.schema().position(self.resolve(qualified))
    }
}

fn qualified_schema(id: &str, schemas: &[(&Schema, Option<&str>)]) -> Result<Schema> {
    let attributes = schemas
        .iter()
        .flat_map(|(schema, skip)| {
            schema
                .attributes
                .iter()
                .filter(move |a| Some(a.name.as_str()) != *skip)
                .map(move |a| Attribute {
                    name: format!("{}.{}", schema.relation, a.name),
                    kind: a.kind,
                })
        })
        .collect();
    Schema::new(id, attributes)
}

fn relation_partitions(table: &Table, cfg: &PartitionConfig) -> Result<Vec<(usize, Table)>> {
    let schema = qualified_schema(table.name(), &[(table.schema(), None)])?;
    Ok(cfg
        .partition_ranges(table.n_rows())
        .into_iter()
        .enumerate()
        .map(|(i, r)| (i, table.slice(r).with_schema(schema.clone())))
        .collect())
}

/// One bubble per relation with at most `theta` rows, otherwise `k`
/// contiguous partitions. Bubbles follow relation-name order.
pub fn create_bubbles(db: &Database, cfg: &PartitionConfig) -> Result<Vec<TupleBubble>> {
    let mut out = Vec::new();
    for table in db.tables() {
        for (partition, part) in relation_partitions(table, cfg)? {
            let id = format!("{}#{partition}", table.name());
            let schema = Schema {
                relation: id.clone(),
                ..part.schema().clone()
            };
            out.push(TupleBubble {
                id,
                source: BubbleSource::Relation {
                    relation: table.name().to_string(),
                    partition,
                },
                table: part.with_schema(schema),
                aliases: BTreeMap::new(),
            });
        }
    }
    Ok(out)
}

/// Bubbles over FK-joined partition pairs, one per (left partition, right
/// partition) of every FK edge. Pairs without matches are kept as empty
/// bubbles.
pub fn create_join_bubbles(db: &Database, cfg: &PartitionConfig) -> Result<Vec<TupleBubble>> {
    let mut out = Vec::new();
    for edge in &db.fk_graph().edges {
        let left = db.table(&edge.from)?;
        let right = db.table(&edge.to)?;
        let lpos = left
            .schema()
            .position(&edge.attribute)
            .ok_or_else(|| Error::UnknownAttribute(format!("{}.{}", edge.from, edge.attribute)))?;
        let rpos = right
            .schema()
            .position(&edge.to_attribute)
            .ok_or_else(|| Error::UnknownAttribute(format!("{}.{}", edge.to, edge.to_attribute)))?;
        let (lk, rk) = (
            left.schema().attributes[lpos].kind,
            right.schema().attributes[rpos].kind,
        );
        if lk != rk {
            return Err(Error::TypeMismatch(format!(
                "join attributes of {edge} are {lk} and {rk}"
            )));
        }
        for (li, lrange) in cfg.partition_ranges(left.n_rows()).into_iter().enumerate() {
            for (ri, rrange) in cfg.partition_ranges(right.n_rows()).into_iter().enumerate() {
                out.push(join_pair(
                    left,
                    lrange.clone(),
                    li,
                    right,
                    rrange,
                    ri,
                    edge,
                    lpos,
                    rpos,
                )?);
            }
        }
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn join_pair(
    left: &Table,
    lrange: Range<usize>,
    li: usize,
    right: &Table,
    rrange: Range<usize>,
    ri: usize,
    edge: &FkEdge,
    lpos: usize,
    rpos: usize,
) -> Result<TupleBubble> {
    let id = format!("{}#{li}+{}#{ri}", left.name(), right.name());
    let null = left.dictionary(lpos).null_code();

    let mut by_key: HashMap<u32, Vec<usize>> = HashMap::new();
    for row in rrange {
        by_key.entry(right.column(rpos)[row]).or_default().push(row);
    }
    let mut pairs = Vec::new();
    for row in lrange {
        let key = left.column(lpos)[row];
        if Some(key) == null {
            continue;
        }
        if let Some(matches) = by_key.get(&key) {
            pairs.extend(matches.iter().map(|&r| (row, r)));
        }
    }

    let mut columns = Vec::new();
    let mut dictionaries = Vec::new();
    for c in 0..left.schema().attributes.len() {
        columns.push(pairs.iter().map(|&(l, _)| left.column(c)[l]).collect());
        dictionaries.push(left.dictionary(c).clone());
    }
    for c in (0..right.schema().attributes.len()).filter(|&c| c != rpos) {
        columns.push(pairs.iter().map(|&(_, r)| right.column(c)[r]).collect());
        dictionaries.push(right.dictionary(c).clone());
    }
    let schema = qualified_schema(
        &id,
        &[(left.schema(), None), (right.schema(), Some(&edge.to_attribute))],
    )?;
    let mut aliases = BTreeMap::new();
    aliases.insert(
        format!("{}.{}", edge.to, edge.to_attribute),
        format!("{}.{}", edge.from, edge.attribute),
    );
    Ok(TupleBubble {
        id,
        source: BubbleSource::Join {
            left: left.name().to_string(),
            left_partition: li,
            right: right.name().to_string(),
            right_partition: ri,
            left_attribute: edge.attribute.clone(),
            right_attribute: edge.to_attribute.clone(),
        },
        table: Table::new(schema, columns, dictionaries)?,
        aliases,
    })
}

#[inline]
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Bloom filter over dictionary codes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BloomFilter {
    words: Vec<u64>,
    n_bits: u64,
    hashes: u32,
}

impl BloomFilter {
    pub fn with_rate(expected: usize, rate: f64) -> Self {
        let n = expected.max(1) as f64;
        let ln2 = std::f64::consts::LN_2;
        let n_bits = ((-n * rate.ln()) / (ln2 * ln2)).ceil().max(64.0) as u64;
        let hashes = ((n_bits as f64 / n) * ln2).round().clamp(1.0, 16.0) as u32;
        Self {
            words: vec![0; n_bits.div_ceil(64) as usize],
            n_bits,
            hashes,
        }
    }

    fn positions(&self, code: u32) -> impl Iterator<Item = u64> + '_ {
        let h1 = splitmix64(u64::from(code));
        let h2 = splitmix64(h1) | 1;
        (0..u64::from(self.hashes)).map(move |i| h1.wrapping_add(i.wrapping_mul(h2)) % self.n_bits)
    }

    pub fn insert(&mut self, code: u32) {
        let positions: Vec<u64> = self.positions(code).collect();
        for p in positions {
            self.words[(p / 64) as usize] |= 1 << (p % 64);
        }
    }

    pub fn contains(&self, code: u32) -> bool {
        self.positions(code)
            .all(|p| self.words[(p / 64) as usize] & (1 << (p % 64)) != 0)
    }

    pub fn size_bits(&self) -> u64 {
        self.n_bits
    }
}

/// Set-membership structure over an attribute's codes. `Dense` means every
/// code in `[min, max]` is present; `Bitmap` is exact over that range.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MembershipFilter {
    Dense,
    Bitmap(Vec<u64>),
    Bloom(BloomFilter),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeIndex {
    pub min: u32,
    pub max: u32,
    pub distinct: u32,
    pub filter: MembershipFilter,
}

impl AttributeIndex {
    /// Exact min/max plus the smallest filter meeting `rate`. `None` for an
    /// empty column.
    pub fn build(codes: &[u32], rate: f64) -> Option<Self> {
        let distinct: BTreeSet<u32> = codes.iter().copied().collect();
        let (&min, &max) = (distinct.first()?, distinct.last()?);
        let span = u64::from(max - min) + 1;
        let bloom = BloomFilter::with_rate(distinct.len(), rate);
        let filter = if span == distinct.len() as u64 {
            MembershipFilter::Dense
        } else if span <= bloom.size_bits() {
            let mut words = vec![0u64; span.div_ceil(64) as usize];
            for &c in &distinct {
                let off = u64::from(c - min);
                words[(off / 64) as usize] |= 1 << (off % 64);
            }
            MembershipFilter::Bitmap(words)
        } else {
            let mut bloom = bloom;
            for &c in &distinct {
                bloom.insert(c);
            }
            MembershipFilter::Bloom(bloom)
        };
        Some(Self {
            min,
            max,
            distinct: distinct.len() as u32,
            filter,
        })
    }

    pub fn contains(&self, code: u32) -> bool {
        if code < self.min || code > self.max {
            return false;
        }
        match &self.filter {
            MembershipFilter::Dense => true,
            MembershipFilter::Bitmap(words) => {
                let off = code - self.min;
                words[(off / 64) as usize] & (1 << (off % 64)) != 0
            }
            MembershipFilter::Bloom(b) => b.contains(code),
        }
    }

    pub fn may_match(&self, region: &Region) -> bool {
        match region {
            Region::Interval { lo, hi } => *lo <= self.max && *hi >= self.min,
            Region::Codes(codes) => codes.range(self.min..=self.max).any(|&c| self.contains(c)),
        }
    }
}

/// Per-attribute index of one bubble, keyed by qualified attribute name.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BubbleIndex {
    pub rows: usize,
    pub attributes: BTreeMap<String, Option<AttributeIndex>>,
    pub aliases: BTreeMap<String, String>,
}

impl BubbleIndex {
    fn lookup(&self, attribute: &str) -> Option<&Option<AttributeIndex>> {
        let name = self.aliases.get(attribute).map_or(attribute, String::as_str);
        self.attributes.get(name)
    }

    pub fn has_attribute(&self, attribute: &str) -> bool {
        self.lookup(attribute).is_some()
    }

    /// Membership probe; never false for a code present in the bubble.
    pub fn contains(&self, attribute: &str, code: u32) -> bool {
        match self.lookup(attribute) {
            Some(Some(idx)) => idx.contains(code),
            Some(None) => false,
            None => true,
        }
    }

    /// Whether some row of the bubble may satisfy `region` on `attribute`.
    /// Attributes the bubble does not carry cannot rule it out.
    pub fn may_match(&self, attribute: &str, region: &Region) -> bool {
        match self.lookup(attribute) {
            Some(Some(idx)) => idx.may_match(region),
            Some(None) => false,
            None => true,
        }
    }
}

pub fn build_bubble_index(bubble: &TupleBubble) -> BubbleIndex {
    build_bubble_index_with_rate(bubble, DEFAULT_FALSE_POSITIVE_RATE)
}

pub fn build_bubble_index_with_rate(bubble: &TupleBubble, rate: f64) -> BubbleIndex {
    let table = &bubble.table;
    BubbleIndex {
        rows: table.n_rows(),
        attributes: table
            .schema()
            .attributes
            .iter()
            .zip(table.columns())
            .map(|(a, col)| (a.name.clone(), AttributeIndex::build(col, rate)))
            .collect(),
        aliases: bubble.aliases.clone(),
    }
}
