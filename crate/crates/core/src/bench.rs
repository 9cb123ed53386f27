//! Exact query execution, q-error, random workloads and the benchmark
//! runner that compares estimators against exact answers.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fmt::Write as _;
use std::ops::RangeInclusive;
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::catalog::{format_date, parse_date, AttributeKind, Database, FkGraph, Schema, Table, Value};
use crate::error::{Error, Result};
use crate::estimator::{estimate_result, format_value, EstimatorOptions};
use crate::model::BubbleModel;
use crate::sql::{
    bind, parse, relation_of, Aggregate, BoundQuery, ColumnRef, CompareOp, Condition, Literal, Query, RelationRef,
};

fn column<'a>(db: &'a Database, qualified: &str) -> Result<(&'a Table, usize)> {
    let relation = relation_of(qualified);
    let table = db.table(relation)?;
    let name = &qualified[relation.len() + 1..];
    let pos = table
        .schema()
        .position(name)
        .ok_or_else(|| Error::UnknownAttribute(qualified.to_string()))?;
    Ok((table, pos))
}

/// Per-row multiplicities of `relation` in the join result restricted to
/// the subtree hanging below it: zero for rows failing a predicate,
/// otherwise the product over child relations of matching child weights.
fn subtree_weights(db: &Database, query: &BoundQuery, relation: &str, parent: Option<&str>) -> Result<Vec<u128>> {
    let table = db.table(relation)?;
    let mut weights = vec![1u128; table.n_rows()];
    for p in query.predicates_on(relation) {
        let (_, pos) = column(db, &p.attribute)?;
        for (w, &code) in weights.iter_mut().zip(table.column(pos)) {
            if !p.region.contains(code) {
                *w = 0;
            }
        }
    }
    for join in &query.joins {
        let (mine, theirs) = if relation_of(&join.referencing) == relation {
            (&join.referencing, &join.referenced)
        } else if relation_of(&join.referenced) == relation {
            (&join.referenced, &join.referencing)
        } else {
            continue;
        };
        let child = relation_of(theirs);
        if Some(child) == parent {
            continue;
        }
        let child_weights = subtree_weights(db, query, child, Some(relation))?;
        let (child_table, child_pos) = column(db, theirs)?;
        let child_dict = child_table.dictionary(child_pos);
        let mut by_key: HashMap<u32, u128> = HashMap::new();
        for (&code, &w) in child_table.column(child_pos).iter().zip(&child_weights) {
            if w > 0 && !child_dict.is_null(code) {
                *by_key.entry(code).or_default() += w;
            }
        }
        let (_, my_pos) = column(db, mine)?;
        for (w, &code) in weights.iter_mut().zip(table.column(my_pos)) {
            if *w > 0 {
                *w *= by_key.get(&code).copied().unwrap_or(0);
            }
        }
    }
    Ok(weights)
}

/// Exact answer computed on the raw tables by hash-joining along the FK
/// tree. `COUNT` and `SUM` of an empty result are 0; the other aggregates
/// are `None`.
pub fn exact_execute(query: &BoundQuery, db: &Database) -> Result<Option<f64>> {
    let anchor = query.anchor_relation().to_string();
    let weights = subtree_weights(db, query, &anchor, None)?;
    let count: u128 = weights.iter().sum();
    let Some(target) = &query.target else {
        return Ok(Some(count as f64));
    };
    let (table, pos) = column(db, target)?;
    let dict = table.dictionary(pos);
    let mut sum = 0.0;
    let mut n: u128 = 0;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for (&w, &code) in weights.iter().zip(table.column(pos)) {
        if w == 0 {
            continue;
        }
        let Some(v) = dict.numeric(code) else { continue };
        sum += v * w as f64;
        n += w;
        min = min.min(v);
        max = max.max(v);
    }
    Ok(match query.aggregate {
        Aggregate::Count => Some(n as f64),
        Aggregate::Sum => Some(sum),
        _ if n == 0 => None,
        Aggregate::Avg => Some(sum / n as f64),
        Aggregate::Min => Some(min),
        Aggregate::Max => Some(max),
    })
}

/// `max(t/e, e/t)` on magnitudes. Equal zeros (or two missing answers)
/// score 1; a zero or missing answer on one side only scores infinity.
pub fn q_error(truth: Option<f64>, estimate: Option<f64>) -> f64 {
    match (truth, estimate) {
        (None, None) => 1.0,
        (Some(t), Some(e)) => {
            let (t, e) = (t.abs(), e.abs());
            if t == 0.0 && e == 0.0 {
                1.0
            } else if t == 0.0 || e == 0.0 {
                f64::INFINITY
            } else {
                (t / e).max(e / t)
            }
        }
        _ => f64::INFINITY,
    }
}

/// Nearest-rank percentile of sorted values, `p` in `(0, 100]`.
pub fn percentile(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    Some(sorted[rank.clamp(1, sorted.len()) - 1])
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WorkloadSpec {
    pub queries: usize,
    pub joins: RangeInclusive<usize>,
    pub predicates: RangeInclusive<usize>,
    pub aggregates: Vec<Aggregate>,
    pub seed: u64,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        Self {
            queries: 100,
            joins: 0..=2,
            predicates: 1..=3,
            aggregates: vec![
                Aggregate::Count,
                Aggregate::Sum,
                Aggregate::Avg,
                Aggregate::Min,
                Aggregate::Max,
            ],
            seed: 1,
        }
    }
}

/// Most join edges a connected, cycle-free set of distinct relations can
/// have in this graph.
pub fn max_joins(graph: &FkGraph) -> usize {
    let mut seen = BTreeSet::new();
    let mut best = 0;
    for start in &graph.relations {
        if !seen.insert(start.as_str()) {
            continue;
        }
        let mut stack = vec![start.as_str()];
        let mut size = 0;
        while let Some(r) = stack.pop() {
            size += 1;
            for (_, n) in graph.neighbors(r) {
                if seen.insert(n) {
                    stack.push(n);
                }
            }
        }
        best = best.max(size - 1);
    }
    best
}

fn is_key(schema: &Schema, attribute: &str) -> bool {
    schema.primary_key.as_deref() == Some(attribute) || schema.foreign_keys.iter().any(|fk| fk.attribute == attribute)
}

fn literal_of(value: &Value) -> Option<Literal> {
    Some(match value {
        Value::Null => return None,
        Value::Int(v) => Literal::Number(v.to_string()),
        Value::Float(v) => Literal::Number(v.to_string()),
        Value::Date(d) => Literal::Text(format_date(*d)),
        Value::Str(s) => Literal::Text(s.clone()),
    })
}

fn draw_value(rng: &mut ChaCha8Rng, table: &Table, pos: usize) -> Option<Value> {
    let dict = table.dictionary(pos);
    if dict.is_empty() {
        return None;
    }
    if rng.gen_bool(0.1) {
        // Uniform over the value range, which may miss the data entirely.
        let lo = dict.decode(0);
        let hi = dict.decode(dict.len() as u32 - 1);
        return Some(match (lo, hi) {
            (Value::Int(a), Value::Int(b)) => Value::Int(rng.gen_range(a..=b)),
            (Value::Date(a), Value::Date(b)) => Value::Date(rng.gen_range(a..=b)),
            (Value::Float(a), Value::Float(b)) => {
                let scale = 10f64.powi(dict.scale() as i32);
                Value::Float((rng.gen_range(a..=b) * scale).round() / scale)
            }
            _ => dict.decode(rng.gen_range(0..dict.len() as u32)),
        });
    }
    let rows = table.n_rows();
    if rows == 0 {
        return None;
    }
    Some(table.value(rng.gen_range(0..rows), pos))
}

fn random_tree(rng: &mut ChaCha8Rng, graph: &FkGraph, joins: usize) -> Option<(Vec<String>, Vec<usize>)> {
    for _ in 0..64 {
        let start = graph.relations.choose(rng)?;
        let mut relations = vec![start.clone()];
        let mut edges = Vec::new();
        while edges.len() < joins {
            let frontier: Vec<(usize, &str)> = relations
                .iter()
                .flat_map(|r| graph.neighbors(r))
                .filter(|(_, n)| !relations.iter().any(|r| r == n))
                .collect();
            let Some(&(e, n)) = frontier.choose(rng) else { break };
            relations.push(n.to_string());
            edges.push(e);
        }
        if edges.len() == joins {
            return Some((relations, edges));
        }
    }
    None
}

/// Draws a random workload of FK-join queries. Join paths follow the FK
/// graph; predicate literals are taken from random rows, or one time in ten
/// uniformly from the attribute's value range.
pub fn generate_workload(db: &Database, spec: &WorkloadSpec) -> Result<Vec<String>> {
    let graph = db.fk_graph();
    let most = max_joins(graph);
    if spec.joins.start() > spec.joins.end() || *spec.joins.start() > most {
        return Err(Error::InvalidArgument(format!(
            "cannot draw {}..={} joins; the FK graph allows at most {most}",
            spec.joins.start(),
            spec.joins.end()
        )));
    }
    if spec.predicates.start() > spec.predicates.end() {
        return Err(Error::InvalidArgument("empty predicate range".into()));
    }
    if spec.aggregates.is_empty() {
        return Err(Error::InvalidArgument("no aggregates to draw from".into()));
    }
    let joins = *spec.joins.start()..=(*spec.joins.end()).min(most);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(spec.queries);
    while out.len() < spec.queries {
        let j = rng.gen_range(joins.clone());
        let (relations, edges) = random_tree(&mut rng, graph, j)
            .ok_or_else(|| Error::InvalidArgument(format!("no connected set of relations with {j} joins")))?;

        let mut candidates: Vec<(String, usize, AttributeKind)> = Vec::new();
        for r in &relations {
            let schema = db.table(r)?.schema();
            for (i, a) in schema.attributes.iter().enumerate() {
                if !is_key(schema, &a.name) {
                    candidates.push((r.clone(), i, a.kind));
                }
            }
        }
        let numeric: Vec<&(String, usize, AttributeKind)> =
            candidates.iter().filter(|(_, _, k)| k.is_numeric()).collect();
        let mut aggregate = *spec.aggregates.choose(&mut rng).expect("non-empty");
        let argument = if aggregate == Aggregate::Count {
            None
        } else if let Some((r, i, _)) = numeric.choose(&mut rng) {
            Some(ColumnRef {
                qualifier: Some(r.clone()),
                name: db.table(r)?.schema().attributes[*i].name.clone(),
            })
        } else {
            aggregate = Aggregate::Count;
            None
        };

        let mut conditions: Vec<Condition> = edges
            .iter()
            .map(|&e| {
                let edge = &graph.edges[e];
                Condition::Join(
                    ColumnRef {
                        qualifier: Some(edge.from.clone()),
                        name: edge.attribute.clone(),
                    },
                    ColumnRef {
                        qualifier: Some(edge.to.clone()),
                        name: edge.to_attribute.clone(),
                    },
                )
            })
            .collect();
        let n_preds = rng.gen_range(spec.predicates.clone()).min(candidates.len());
        for (r, i, kind) in candidates.choose_multiple(&mut rng, n_preds) {
            let table = db.table(r)?;
            let col = ColumnRef {
                qualifier: Some(r.clone()),
                name: table.schema().attributes[*i].name.clone(),
            };
            let Some(first) = draw_value(&mut rng, table, *i).as_ref().and_then(literal_of) else {
                continue;
            };
            let condition = if !kind.is_numeric() {
                Condition::Compare(col, CompareOp::Eq, first)
            } else {
                match rng.gen_range(0..4) {
                    0 => Condition::Compare(col, CompareOp::Eq, first),
                    1 => Condition::Compare(col, CompareOp::Le, first),
                    2 => Condition::Compare(col, CompareOp::Ge, first),
                    _ => {
                        let Some(second) = draw_value(&mut rng, table, *i).as_ref().and_then(literal_of) else {
                            continue;
                        };
                        let (lo, hi) = if literal_key(&first) <= literal_key(&second) {
                            (first, second)
                        } else {
                            (second, first)
                        };
                        Condition::Between(col, lo, hi)
                    }
                }
            };
            conditions.push(condition);
        }
        let mut relations = relations;
        relations.shuffle(&mut rng);
        let query = Query {
            aggregate,
            argument,
            relations: relations
                .into_iter()
                .map(|name| RelationRef { name, alias: None })
                .collect(),
            conditions,
        };
        out.push(query.to_string());
    }
    Ok(out)
}

fn literal_key(literal: &Literal) -> f64 {
    match literal {
        Literal::Number(n) => n.parse().unwrap_or(0.0),
        Literal::Text(t) => parse_date(t).map_or(0.0, |d| d as f64),
    }
}

/// One estimator setup in a benchmark matrix.
#[derive(Clone, Debug)]
pub struct BenchConfig<'a> {
    pub name: String,
    pub model: &'a BubbleModel,
    pub options: EstimatorOptions,
    pub model_bytes: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub config: String,
    pub query: usize,
    pub sql: String,
    pub truth: Option<f64>,
    pub estimate: Option<f64>,
    pub q_error: f64,
    /// Estimation error message, if the estimator failed.
    pub error: Option<String>,
    pub latency: Duration,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchSummary {
    pub config: String,
    pub queries: usize,
    /// Queries with infinite q-error or an estimation error.
    pub failed: usize,
    /// Statistics over the finite q-errors.
    pub median: Option<f64>,
    pub p95: Option<f64>,
    pub max: Option<f64>,
    pub mean: Option<f64>,
    pub mean_latency: Duration,
    pub model_bytes: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub summaries: Vec<BenchSummary>,
}

/// Runs every query of the workload against every configuration.
pub fn run_benchmark(db: &Database, workload: &[String], configs: &[BenchConfig<'_>]) -> Result<BenchReport> {
    let catalog = db.catalog();
    let bound = workload
        .iter()
        .map(|sql| bind(&parse(sql)?, &catalog))
        .collect::<Result<Vec<_>>>()?;
    let truths = bound
        .par_iter()
        .map(|q| exact_execute(q, db))
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for config in configs {
        let config_rows: Vec<BenchRow> = bound
            .par_iter()
            .enumerate()
            .map(|(i, q)| {
                let (estimate, error, latency) = match estimate_result(config.model, q, &config.options) {
                    Ok(r) => (r.value, None, r.latency),
                    Err(e) => (None, Some(e.to_string()), Duration::ZERO),
                };
                let q_error = if error.is_some() {
                    f64::INFINITY
                } else {
                    q_error(truths[i], estimate)
                };
                BenchRow {
                    config: config.name.clone(),
                    query: i + 1,
                    sql: workload[i].clone(),
                    truth: truths[i],
                    estimate,
                    q_error,
                    error,
                    latency,
                }
            })
            .collect();
        summaries.push(summarize(config, &config_rows));
        rows.extend(config_rows);
    }
    Ok(BenchReport { rows, summaries })
}

fn summarize(config: &BenchConfig<'_>, rows: &[BenchRow]) -> BenchSummary {
    let mut finite: Vec<f64> = rows.iter().map(|r| r.q_error).filter(|q| q.is_finite()).collect();
    finite.sort_by(f64::total_cmp);
    let total_latency: Duration = rows.iter().map(|r| r.latency).sum();
    BenchSummary {
        config: config.name.clone(),
        queries: rows.len(),
        failed: rows.len() - finite.len(),
        median: percentile(&finite, 50.0),
        p95: percentile(&finite, 95.0),
        max: finite.last().copied(),
        mean: (!finite.is_empty()).then(|| finite.iter().sum::<f64>() / finite.len() as f64),
        mean_latency: if rows.is_empty() {
            Duration::ZERO
        } else {
            total_latency / rows.len() as u32
        },
        model_bytes: config.model_bytes,
    }
}

fn csv_text<F: FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>>(write: F) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    write(&mut w).expect("writing to memory");
    String::from_utf8(w.into_inner().expect("writing to memory")).expect("utf-8 fields")
}

fn q_text(q: f64) -> String {
    if q.is_finite() {
        format_value(Some(q))
    } else {
        "inf".to_string()
    }
}

fn opt_q(q: Option<f64>) -> String {
    q.map_or_else(String::new, q_text)
}

impl BenchReport {
    /// Per-query results; contains no timings, so reruns are byte-identical.
    pub fn report_csv(&self) -> String {
        csv_text(|w| {
            w.write_record(["config", "query", "sql", "truth", "estimate", "q_error", "error"])?;
            for r in &self.rows {
                w.write_record([
                    r.config.clone(),
                    r.query.to_string(),
                    r.sql.clone(),
                    format_value(r.truth),
                    format_value(r.estimate),
                    q_text(r.q_error),
                    r.error.clone().unwrap_or_default(),
                ])?;
            }
            Ok(())
        })
    }

    pub fn summary_csv(&self) -> String {
        csv_text(|w| {
            w.write_record([
                "config",
                "queries",
                "failed",
                "median",
                "p95",
                "max",
                "mean",
                "model_bytes",
            ])?;
            for s in &self.summaries {
                w.write_record([
                    s.config.clone(),
                    s.queries.to_string(),
                    s.failed.to_string(),
                    opt_q(s.median),
                    opt_q(s.p95),
                    opt_q(s.max),
                    opt_q(s.mean),
                    s.model_bytes.to_string(),
                ])?;
            }
            Ok(())
        })
    }

    pub fn timing_csv(&self) -> String {
        csv_text(|w| {
            w.write_record(["config", "query", "latency_us"])?;
            for r in &self.rows {
                w.write_record([r.config.clone(), r.query.to_string(), r.latency.as_micros().to_string()])?;
            }
            Ok(())
        })
    }

    pub fn summary(&self, config: &str) -> Option<&BenchSummary> {
        self.summaries.iter().find(|s| s.config == config)
    }
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let header = [
            "config",
            "queries",
            "failed",
            "median",
            "p95",
            "max",
            "mean",
            "latency_ms",
            "model_bytes",
        ];
        let mut table: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
        for s in &self.summaries {
            table.push(vec![
                s.config.clone(),
                s.queries.to_string(),
                s.failed.to_string(),
                opt_q(s.median),
                opt_q(s.p95),
                opt_q(s.max),
                opt_q(s.mean),
                format!("{:.3}", s.mean_latency.as_secs_f64() * 1e3),
                s.model_bytes.to_string(),
            ]);
        }
        let widths: Vec<usize> = (0..header.len())
            .map(|c| table.iter().map(|r| r[c].len()).max().unwrap_or(0))
            .collect();
        for row in &table {
            let mut line = String::new();
            for (c, cell) in row.iter().enumerate() {
                if c > 0 {
                    line.push_str("  ");
                }
                if c == 0 {
                    write!(line, "{cell:<w$}", w = widths[c])?;
                } else {
                    write!(line, "{cell:>w$}", w = widths[c])?;
                }
            }
            writeln!(f, "{}", line.trim_end())?;
        }
        Ok(())
    }
}
