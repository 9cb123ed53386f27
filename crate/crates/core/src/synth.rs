//! Deterministic synthetic datasets used by the examples, benchmarks and
//! acceptance tests.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::catalog::{format_date, infer_schema, parse_date, parse_table, Database, Schema};
use crate::error::{Error, Result};

/// One relation as CSV text plus its declared keys.
#[derive(Clone, Debug)]
pub struct SyntheticRelation {
    pub name: String,
    pub csv: String,
    pub primary_key: Option<String>,
    /// `(attribute, referenced relation, referenced attribute)`.
    pub foreign_keys: Vec<(String, String, String)>,
}

impl SyntheticRelation {
    fn new(name: &str, csv: String) -> Self {
        Self {
            name: name.to_string(),
            csv,
            primary_key: None,
            foreign_keys: Vec::new(),
        }
    }

    fn key(mut self, attribute: &str) -> Self {
        self.primary_key = Some(attribute.to_string());
        self
    }

    fn fk(mut self, attribute: &str, relation: &str, referenced: &str) -> Self {
        self.foreign_keys
            .push((attribute.to_string(), relation.to_string(), referenced.to_string()));
        self
    }

    pub fn schema(&self) -> Result<Schema> {
        let mut schema = infer_schema(&self.name, &self.csv)?;
        if let Some(pk) = &self.primary_key {
            schema = schema.with_primary_key(pk)?;
        }
        for (a, r, ra) in &self.foreign_keys {
            schema = schema.with_foreign_key(a, r, ra)?;
        }
        Ok(schema)
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name.to_ascii_lowercase())
    }
}

pub fn to_database(relations: &[SyntheticRelation]) -> Result<Database> {
    let tables = relations
        .iter()
        .map(|r| parse_table(r.csv.as_bytes(), r.schema()?))
        .collect::<Result<Vec<_>>>()?;
    Database::new(tables)
}

/// Total CSV bytes of a dataset.
pub fn csv_bytes(relations: &[SyntheticRelation]) -> u64 {
    relations.iter().map(|r| r.csv.len() as u64).sum()
}

/// Writes one CSV per relation plus an engine config declaring them.
/// Returns the config path.
pub fn write_dataset(relations: &[SyntheticRelation], dir: &Path, settings: &[(&str, String)]) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut config = String::from("# generated dataset\n");
    for r in relations {
        let path = dir.join(r.file_name());
        fs::write(&path, &r.csv).map_err(|e| Error::io(&path, e))?;
        writeln!(config, "data.{} = {}", r.name, r.file_name()).expect("string write");
        if let Some(pk) = &r.primary_key {
            writeln!(config, "key.{} = {pk}", r.name).expect("string write");
        }
        for (a, rel, ra) in &r.foreign_keys {
            writeln!(config, "fk.{}.{a} = {rel}.{ra}", r.name).expect("string write");
        }
    }
    for (k, v) in settings {
        writeln!(config, "{k} = {v}").expect("string write");
    }
    let path = dir.join("engine.conf");
    fs::write(&path, config).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// The two-relation customer/orders example: three customers, six orders,
/// and an order date predicate that only customer 4's late orders satisfy
/// together with `name = 'C4'`.
pub fn orders_customers() -> Vec<SyntheticRelation> {
    let customer = "c_key,name\n1,C1\n4,C4\n5,C5\n";
    let orders = "o_key,c_key,price,date\n\
                  1,1,10,01.01.2022\n\
                  2,5,20,15.02.2022\n\
                  3,4,30,02.03.2022\n\
                  4,4,15,10.03.2022\n\
                  5,1,25,20.03.2022\n\
                  6,4,40,01.02.2022\n";
    vec![
        SyntheticRelation::new("Customer", customer.to_string()).key("c_key"),
        SyntheticRelation::new("Orders", orders.to_string())
            .key("o_key")
            .fk("c_key", "Customer", "c_key"),
    ]
}

pub const SEGMENTS: [&str; 5] = ["AUTOMOBILE", "BUILDING", "FURNITURE", "HOUSEHOLD", "MACHINERY"];

/// Customers and orders where the customer segment drives order price and
/// quantity. Orders are sorted by date; customers are assigned to segments
/// independently of their keys, so key ranges carry no segment information.
pub fn correlated_orders(customers: usize, orders: usize, seed: u64) -> Vec<SyntheticRelation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let segment_weights = WeightedIndex::new([30, 25, 20, 15, 10]).expect("positive weights");
    let seg: Vec<usize> = (0..customers).map(|_| segment_weights.sample(&mut rng)).collect();
    let mut csv = String::from("c_key,segment,nation,acctbal\n");
    for (i, &s) in seg.iter().enumerate() {
        let nation = (s * 5 + rng.gen_range(0..5)) % 25;
        let acctbal = (s as i64 + 1) * 1000 + rng.gen_range(0..1000) / 10 * 10;
        writeln!(csv, "{},{},{nation},{acctbal}", i + 1, SEGMENTS[s]).expect("string write");
    }
    let customer = SyntheticRelation::new("Customer", csv).key("c_key");

    // A few customers order far more often than the rest.
    let activity: Vec<f64> = (0..customers).map(|i| 1.0 / (1.0 + (i % 97) as f64)).collect();
    let pick = WeightedIndex::new(&activity).expect("positive weights");
    let start = parse_date("01.01.2020").expect("valid date");
    let span = 3 * 365;
    let mut csv = String::from("o_key,c_key,price,quantity,priority,date\n");
    for o in 0..orders {
        let c = pick.sample(&mut rng);
        let s = seg[c];
        let price = 50 * (s as i64 + 1).pow(2) + rng.gen_range(0..50);
        let quantity = 1 + (s as i64) * 8 + rng.gen_range(0..8);
        let priority = if price > 600 {
            rng.gen_range(1..=2)
        } else {
            rng.gen_range(2..=5)
        };
        let date = start + (o as i64 * span) / orders.max(1) as i64 + rng.gen_range(0..3);
        writeln!(
            csv,
            "{},{},{price},{quantity},{priority},{}",
            o + 1,
            c + 1,
            format_date(date)
        )
        .expect("string write");
    }
    let orders = SyntheticRelation::new("Orders", csv)
        .key("o_key")
        .fk("c_key", "Customer", "c_key");
    vec![customer, orders]
}

/// A three-relation chain: Nation <- Customer <- Orders.
pub fn chain_dataset(nations: usize, customers: usize, orders: usize, seed: u64) -> Vec<SyntheticRelation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut csv = String::from("n_key,region\n");
    let region: Vec<usize> = (0..nations).map(|_| rng.gen_range(0..4)).collect();
    for (i, r) in region.iter().enumerate() {
        writeln!(csv, "{},R{r}", i + 1).expect("string write");
    }
    let nation = SyntheticRelation::new("Nation", csv).key("n_key");

    let mut csv = String::from("c_key,n_key,tier\n");
    let mut tier = Vec::with_capacity(customers);
    for i in 0..customers {
        let n = rng.gen_range(0..nations);
        let t = (region[n] + rng.gen_range(0..2)) % 4;
        tier.push(t);
        writeln!(csv, "{},{},{t}", i + 1, n + 1).expect("string write");
    }
    let customer = SyntheticRelation::new("Customer", csv)
        .key("c_key")
        .fk("n_key", "Nation", "n_key");

    let mut csv = String::from("o_key,c_key,amount\n");
    for o in 0..orders {
        let c = rng.gen_range(0..customers);
        let amount = 10 * (tier[c] as i64 + 1) + rng.gen_range(0..10);
        writeln!(csv, "{},{},{amount}", o + 1, c + 1).expect("string write");
    }
    let orders = SyntheticRelation::new("Orders", csv)
        .key("o_key")
        .fk("c_key", "Customer", "c_key");
    vec![nation, customer, orders]
}

/// A single relation whose attributes follow a fixed dependency tree with
/// clearly separated strengths, so every contiguous partition learns the
/// same structure:
///
/// ```text
/// a -> b -> d
/// a -> c -> e
/// ```
pub fn tree_table(rows: usize, seed: u64) -> Vec<SyntheticRelation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut csv = String::from("a,b,c,d,e\n");
    let noisy = |rng: &mut ChaCha8Rng, v: u32, p: f64, card: u32| {
        if rng.gen_bool(p) {
            rng.gen_range(0..card)
        } else {
            v % card
        }
    };
    for _ in 0..rows {
        let a: u32 = rng.gen_range(0..8);
        let b = noisy(&mut rng, a, 0.05, 8);
        let c = noisy(&mut rng, a / 2, 0.15, 4);
        let d = noisy(&mut rng, b * 3 + 1, 0.25, 12);
        let e = 100 + 10 * noisy(&mut rng, c * 2, 0.35, 6) + rng.gen_range(0..2);
        writeln!(csv, "{a},{b},{c},{d},{e}").expect("string write");
    }
    vec![SyntheticRelation::new("T", csv)]
}
