//! Aggregate estimation over bubble networks.
//!
//! A query is planned as a tree of *units*: a unit is either one relation or
//! an FK-joined pair covered by join bubbles. Every combination of one bubble
//! per unit is a substitute query. Within a substitute, units are processed
//! leaves first: each unit turns its per-value counts of the join attribute
//! into weights on the matching attribute of the next unit, so the unit
//! holding the aggregation attribute, processed last, sees every predicate.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use crate::catalog::Dictionary;
use crate::error::{Error, Result};
use crate::inference::{
    infer, per_value_distribution, CodeWeights, Conditions, Distribution, InferenceMethod, PredicateRegion, Region,
};
use crate::model::BubbleModel;
use crate::network::{ChowLiuNetwork, ValueClass};
use crate::sql::{relation_of, Aggregate, BoundQuery};

/// Expected count at which a value is taken to appear in the result.
pub const APPEARANCE_THRESHOLD: f64 = 0.5;

/// How many bubble combinations to estimate per query.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sigma {
    All,
    Count(usize),
}

impl FromStr for Sigma {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("all") {
            return Ok(Sigma::All);
        }
        match s.parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Sigma::Count(n)),
            _ => Err(Error::Config(format!(
                "sigma must be ALL or a positive integer, got `{s}`"
            ))),
        }
    }
}

impl fmt::Display for Sigma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sigma::All => f.write_str("ALL"),
            Sigma::Count(n) => write!(f, "{n}"),
        }
    }
}

/// How networks of different units are combined.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JoinEstimation {
    /// Per-value evidence passed along the unit tree.
    Chain,
    /// Independent per-relation selectivities times the join size estimated
    /// from distinct key counts.
    Uniformity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EstimatorOptions {
    pub sigma: Sigma,
    pub method: InferenceMethod,
    pub join_estimation: JoinEstimation,
    /// Cover joined relation pairs with join bubbles when the model has them.
    pub use_join_bubbles: bool,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self {
            sigma: Sigma::All,
            method: InferenceMethod::VariableElimination,
            join_estimation: JoinEstimation::Chain,
            use_join_bubbles: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: Option<f64>,
    /// At least one result row is expected.
    pub relevant: bool,
    /// Estimated number of result rows.
    pub count: f64,
}

impl Estimate {
    pub fn empty(aggregate: Aggregate) -> Self {
        Self {
            value: matches!(aggregate, Aggregate::Count | Aggregate::Sum).then_some(0.0),
            relevant: false,
            count: 0.0,
        }
    }
}

pub fn estimate_count(selectivity: f64, rows: f64) -> f64 {
    selectivity * rows
}

fn class_bounds(dist: &Distribution, class: usize, dict: &Dictionary) -> Option<(f64, f64)> {
    match dist.class(class) {
        ValueClass::Code(c) => dict.numeric(c).map(|v| (v, v)),
        ValueClass::Range(b) => Some((dict.numeric(b.min)?, dict.numeric(b.max)?)),
    }
}

/// Turns a per-value distribution into an aggregate, with `rows` the number
/// of rows the distribution is relative to.
pub fn estimate_aggregate(
    dist: &Distribution,
    aggregate: Aggregate,
    rows: f64,
    dictionary: Option<&Dictionary>,
) -> Result<Estimate> {
    let count = estimate_count(dist.mass, rows);
    let relevant = count >= APPEARANCE_THRESHOLD;
    if aggregate == Aggregate::Count {
        return Ok(Estimate {
            value: Some(count),
            relevant,
            count,
        });
    }
    let dict =
        dictionary.ok_or_else(|| Error::InvalidArgument(format!("{aggregate} needs the attribute dictionary")))?;
    if !dict.kind().is_numeric() {
        return Err(Error::TypeMismatch(format!(
            "{aggregate} over {} attribute `{}`",
            dict.kind(),
            dist.attribute
        )));
    }
    let appearing = dist
        .entries
        .iter()
        .enumerate()
        .filter(|&(_, &p)| p * rows >= APPEARANCE_THRESHOLD)
        .filter_map(|(i, &p)| class_bounds(dist, i, dict).map(|b| (b, p * rows)));
    let value = match aggregate {
        Aggregate::Count => unreachable!("handled above"),
        Aggregate::Sum | Aggregate::Avg => {
            let sum: f64 = appearing.map(|((lo, hi), c)| (lo + hi) / 2.0 * c).sum();
            if aggregate == Aggregate::Sum {
                Some(sum)
            } else {
                (count > 0.0).then(|| sum / count)
            }
        }
        Aggregate::Min => appearing.map(|((lo, _), _)| lo).reduce(f64::min),
        Aggregate::Max => appearing.map(|((_, hi), _)| hi).reduce(f64::max),
    };
    Ok(Estimate { value, relevant, count })
}

/// Weight of each substitute estimate in the combined result: 1 for COUNT
/// and SUM, the share of the relevant result rows for AVG, and 0 for MIN/MAX
/// (which select instead of weighting).
pub fn combination_weights(estimates: &[Estimate], aggregate: Aggregate) -> Vec<f64> {
    match aggregate {
        Aggregate::Count | Aggregate::Sum => vec![1.0; estimates.len()],
        Aggregate::Avg => {
            let total: f64 = estimates.iter().filter(|e| e.relevant).map(|e| e.count).sum();
            estimates
                .iter()
                .map(|e| {
                    if e.relevant && total > 0.0 {
                        e.count / total
                    } else {
                        0.0
                    }
                })
                .collect()
        }
        Aggregate::Min | Aggregate::Max => vec![0.0; estimates.len()],
    }
}

pub fn combine_estimates(estimates: &[Estimate], aggregate: Aggregate) -> Result<Option<f64>> {
    if estimates.is_empty() {
        return Err(Error::InvalidArgument("no substitute estimates to combine".into()));
    }
    let relevant = || estimates.iter().filter(|e| e.relevant);
    if relevant().next().is_none() {
        return Ok(matches!(aggregate, Aggregate::Count | Aggregate::Sum).then_some(0.0));
    }
    Ok(match aggregate {
        Aggregate::Count | Aggregate::Sum => Some(estimates.iter().filter_map(|e| e.value).sum()),
        Aggregate::Avg => {
            let weights = combination_weights(estimates, aggregate);
            Some(
                estimates
                    .iter()
                    .zip(weights)
                    .filter_map(|(e, w)| e.value.map(|v| v * w))
                    .sum(),
            )
        }
        Aggregate::Min => relevant().filter_map(|e| e.value).reduce(f64::min),
        Aggregate::Max => relevant().filter_map(|e| e.value).reduce(f64::max),
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum UnitKind {
    Relation(String),
    /// FK edge index.
    Join(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Unit {
    pub name: String,
    pub kind: UnitKind,
    pub relations: Vec<String>,
    /// Candidate bubble indices in the model.
    pub candidates: Vec<usize>,
    pub predicates: Vec<PredicateRegion>,
}

/// Join between a unit and the next unit towards the anchor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Link {
    pub child: usize,
    pub parent: usize,
    pub child_attribute: String,
    pub parent_attribute: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryPlan {
    pub units: Vec<Unit>,
    /// One link per non-anchor unit.
    pub links: Vec<Link>,
    /// Processing order; the anchor unit comes last.
    pub order: Vec<usize>,
    pub anchor: usize,
}

impl QueryPlan {
    pub fn link_of(&self, child: usize) -> Option<&Link> {
        self.links.iter().find(|l| l.child == child)
    }

    /// Unit names in processing order.
    pub fn chain(&self) -> Vec<String> {
        self.order.iter().map(|&u| self.units[u].name.clone()).collect()
    }
}

/// Groups the query's relations into units and orders them so that every
/// unit shares a join attribute with a later one and the unit holding the
/// aggregation attribute is last.
pub fn plan_query(model: &BubbleModel, query: &BoundQuery, use_join_bubbles: bool) -> Result<QueryPlan> {
    let edges = &model.catalog.fk_graph.edges;
    let mut units: Vec<Unit> = Vec::new();
    let mut unit_of = BTreeMap::<String, usize>::new();
    if use_join_bubbles {
        for j in &query.joins {
            let e = &edges[j.edge];
            if unit_of.contains_key(&e.from) || unit_of.contains_key(&e.to) {
                continue;
            }
            let candidates = model.join_bubbles(e);
            if candidates.is_empty() {
                continue;
            }
            let id = units.len();
            unit_of.insert(e.from.clone(), id);
            unit_of.insert(e.to.clone(), id);
            units.push(Unit {
                name: format!("{}+{}", e.from, e.to),
                kind: UnitKind::Join(j.edge),
                relations: vec![e.from.clone(), e.to.clone()],
                candidates,
                predicates: Vec::new(),
            });
        }
    }
    for r in &query.relations {
        if unit_of.contains_key(r) {
            continue;
        }
        let candidates = model.relation_bubbles(r);
        if candidates.is_empty() {
            return Err(Error::Unanswerable(format!("model has no bubbles for `{r}`")));
        }
        unit_of.insert(r.clone(), units.len());
        units.push(Unit {
            name: r.clone(),
            kind: UnitKind::Relation(r.clone()),
            relations: vec![r.clone()],
            candidates,
            predicates: Vec::new(),
        });
    }
    for p in &query.predicates {
        let u = unit_of[relation_of(&p.attribute)];
        units[u].predicates.push(p.clone());
    }

    // Undirected unit adjacency from the joins not absorbed by join units.
    let mut adjacency: Vec<Vec<(usize, String, String)>> = vec![Vec::new(); units.len()];
    for j in &query.joins {
        let e = &edges[j.edge];
        let (a, b) = (unit_of[&e.from], unit_of[&e.to]);
        if a == b {
            continue;
        }
        adjacency[a].push((b, j.referencing.clone(), j.referenced.clone()));
        adjacency[b].push((a, j.referenced.clone(), j.referencing.clone()));
    }
    for adj in &mut adjacency {
        adj.sort_by(|x, y| units[x.0].name.cmp(&units[y.0].name));
    }

    let anchor = unit_of[query.anchor_relation()];
    let mut bfs = vec![anchor];
    let mut links = Vec::new();
    let mut seen = vec![false; units.len()];
    seen[anchor] = true;
    let mut queue = VecDeque::from([anchor]);
    while let Some(u) = queue.pop_front() {
        for (v, own, other) in &adjacency[u] {
            if !seen[*v] {
                seen[*v] = true;
                links.push(Link {
                    child: *v,
                    parent: u,
                    child_attribute: other.clone(),
                    parent_attribute: own.clone(),
                });
                bfs.push(*v);
                queue.push_back(*v);
            }
        }
    }
    if bfs.len() != units.len() {
        return Err(Error::Unanswerable(
            "query relations do not form one connected join".into(),
        ));
    }
    bfs.reverse();
    Ok(QueryPlan {
        units,
        links,
        order: bfs,
        anchor,
    })
}

/// Unit names in the order their networks are chained.
pub fn order_chain(model: &BubbleModel, query: &BoundQuery, use_join_bubbles: bool) -> Result<Vec<String>> {
    Ok(plan_query(model, query, use_join_bubbles)?.chain())
}

/// Candidate bubble combinations, one bubble index per unit. With a finite
/// sigma, combinations whose bubbles pass every index probe come first, then
/// larger combinations, then bubble ids.
pub fn select_bubble_combinations(model: &BubbleModel, plan: &QueryPlan, sigma: Sigma) -> Vec<Vec<usize>> {
    let mut combos: Vec<Vec<usize>> = vec![Vec::new()];
    for unit in &plan.units {
        combos = combos
            .into_iter()
            .flat_map(|c| {
                unit.candidates.iter().map(move |&b| {
                    let mut next = c.clone();
                    next.push(b);
                    next
                })
            })
            .collect();
    }
    let Sigma::Count(n) = sigma else {
        return combos;
    };
    let passes = |combo: &[usize]| {
        combo.iter().zip(&plan.units).all(|(&b, unit)| {
            let entry = &model.bubbles[b];
            !entry.is_empty()
                && unit
                    .predicates
                    .iter()
                    .all(|p| entry.index.may_match(&p.attribute, &p.region))
        })
    };
    let size = |combo: &[usize]| combo.iter().map(|&b| model.bubbles[b].rows as f64).product::<f64>();
    let ids = |combo: &[usize]| combo.iter().map(|&b| model.bubbles[b].id.as_str()).collect::<Vec<_>>();
    let mut ranked: Vec<(bool, f64, Vec<usize>)> = combos.into_iter().map(|c| (passes(&c), size(&c), c)).collect();
    ranked.sort_by(|a, b| {
        b.0.cmp(&a.0)
            .then(b.1.total_cmp(&a.1))
            .then_with(|| ids(&a.2).cmp(&ids(&b.2)))
    });
    ranked.into_iter().take(n).map(|(_, _, c)| c).collect()
}

fn seeded(method: InferenceMethod, salt: u64) -> InferenceMethod {
    match method {
        InferenceMethod::ProgressiveSampling { samples, seed } => InferenceMethod::ProgressiveSampling {
            samples,
            seed: seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15),
        },
        m => m,
    }
}

fn non_null(model: &BubbleModel, qualified: &str) -> Result<CodeWeights> {
    let (rel, attr) = qualified
        .split_once('.')
        .ok_or_else(|| Error::UnknownAttribute(qualified.to_string()))?;
    let dict = model.catalog.dictionary(rel, attr)?;
    let n = dict.len() as u32;
    Ok(if n == 0 {
        CodeWeights::default()
    } else {
        CodeWeights::from_region(&Region::Interval { lo: 0, hi: n - 1 })
    })
}

/// Conditions for the anchor unit after all other units were folded in.
#[derive(Clone, Debug)]
pub struct Propagated {
    pub conditions: Conditions,
    /// Rows each weighted anchor row stands for.
    pub scale: f64,
}

/// Folds every non-anchor unit of one combination into evidence for the
/// anchor. `None` means some unit admits no rows, so the substitute query is
/// empty.
pub fn propagate_evidence(
    model: &BubbleModel,
    plan: &QueryPlan,
    combo: &[usize],
    method: InferenceMethod,
) -> Result<Option<Propagated>> {
    let mut evidence: Vec<Vec<(String, CodeWeights)>> = vec![Vec::new(); plan.units.len()];
    let mut scales = vec![1.0; plan.units.len()];
    for &u in &plan.order {
        let entry = &model.bubbles[combo[u]];
        if entry.is_empty() || entry.network.degenerate {
            return Ok(None);
        }
        let net = &entry.network;
        let mut conditions = Conditions::from_predicates(net, &plan.units[u].predicates)?;
        for (attr, w) in &evidence[u] {
            conditions.restrict(net.require(attr)?, w.clone());
        }
        if u == plan.anchor {
            return Ok(Some(Propagated {
                conditions,
                scale: scales[u],
            }));
        }
        let link = plan.link_of(u).expect("non-anchor units have a link");
        let dist = per_value_distribution(net, &link.child_attribute, &conditions, seeded(method, u as u64))?;
        if dist.mass <= 0.0 {
            return Ok(None);
        }
        let weights = dist
            .to_code_weights(entry.rows as f64 * scales[u])
            .product(&non_null(model, &link.child_attribute)?);
        let top = weights.max_weight();
        if top <= 0.0 {
            return Ok(None);
        }
        evidence[link.parent].push((link.parent_attribute.clone(), weights.scaled(1.0 / top)));
        scales[link.parent] *= top;
    }
    unreachable!("the anchor is always in the processing order")
}

fn target_dictionary<'a>(model: &'a BubbleModel, query: &BoundQuery) -> Result<Option<&'a Dictionary>> {
    query
        .target
        .as_deref()
        .map(|t| {
            let (rel, attr) = t.split_once('.').expect("bound targets are qualified");
            model.catalog.dictionary(rel, attr).map(|d| d.as_ref())
        })
        .transpose()
}

fn final_estimate(
    net: &ChowLiuNetwork,
    query: &BoundQuery,
    conditions: &Conditions,
    rows: f64,
    method: InferenceMethod,
    dict: Option<&Dictionary>,
) -> Result<Estimate> {
    let target = query.target.as_deref().map(|t| net.require(t)).transpose()?;
    let dist = infer(net, target, conditions, method)?;
    estimate_aggregate(&dist, query.aggregate, rows, dict)
}

fn chain_estimate(
    model: &BubbleModel,
    plan: &QueryPlan,
    query: &BoundQuery,
    combo: &[usize],
    method: InferenceMethod,
) -> Result<Estimate> {
    let Some(prop) = propagate_evidence(model, plan, combo, method)? else {
        return Ok(Estimate::empty(query.aggregate));
    };
    let entry = &model.bubbles[combo[plan.anchor]];
    let rows = entry.rows as f64 * prop.scale;
    final_estimate(
        &entry.network,
        query,
        &prop.conditions,
        rows,
        seeded(method, plan.anchor as u64),
        target_dictionary(model, query)?,
    )
}

fn uniformity_estimate(
    model: &BubbleModel,
    plan: &QueryPlan,
    query: &BoundQuery,
    combo: &[usize],
    method: InferenceMethod,
) -> Result<Estimate> {
    let mut rows = 1.0;
    for &u in &plan.order {
        let entry = &model.bubbles[combo[u]];
        if entry.is_empty() || entry.network.degenerate {
            return Ok(Estimate::empty(query.aggregate));
        }
        rows *= entry.rows as f64;
        if u != plan.anchor {
            let conditions = Conditions::from_predicates(&entry.network, &plan.units[u].predicates)?;
            rows *= infer(&entry.network, None, &conditions, seeded(method, u as u64))?.mass;
        }
    }
    for link in &plan.links {
        let ndv = |unit: usize, attr: &str| -> Result<f64> {
            let net = &model.bubbles[combo[unit]].network;
            Ok(net.domain(net.require(attr)?).distinct() as f64)
        };
        rows /= ndv(link.child, &link.child_attribute)?.max(ndv(link.parent, &link.parent_attribute)?);
    }
    let anchor = &model.bubbles[combo[plan.anchor]];
    let conditions = Conditions::from_predicates(&anchor.network, &plan.units[plan.anchor].predicates)?;
    // `rows` already holds the anchor's cardinality.
    final_estimate(
        &anchor.network,
        query,
        &conditions,
        rows,
        seeded(method, plan.anchor as u64),
        target_dictionary(model, query)?,
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubstituteReport {
    pub bubbles: Vec<String>,
    pub estimate: Estimate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimationReport {
    pub aggregate: Aggregate,
    pub value: Option<f64>,
    pub chain: Vec<String>,
    pub substitutes: Vec<SubstituteReport>,
    pub method: InferenceMethod,
    pub sigma: Sigma,
    pub join_estimation: JoinEstimation,
    /// Wall-clock time of the estimation, excluding parsing and binding.
    pub latency: Duration,
}

/// Fixed-precision rendering used in reports.
pub fn format_value(value: Option<f64>) -> String {
    match value {
        None => "NULL".to_string(),
        Some(v) if v.is_infinite() => if v > 0.0 { "inf" } else { "-inf" }.to_string(),
        Some(v) => {
            let s = format!("{v:.6}");
            let s = s.trim_end_matches('0').trim_end_matches('.');
            if s == "-0" {
                "0".to_string()
            } else {
                s.to_string()
            }
        }
    }
}

fn method_label(method: InferenceMethod) -> String {
    match method {
        InferenceMethod::VariableElimination => "ve".to_string(),
        InferenceMethod::ProgressiveSampling { samples, seed } => format!("ps(samples={samples}, seed={seed})"),
    }
}

/// Report without latency, so equal inputs print equal text.
impl fmt::Display for EstimationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "estimate: {}", format_value(self.value))?;
        writeln!(f, "aggregate: {}", self.aggregate)?;
        writeln!(f, "method: {}", method_label(self.method))?;
        writeln!(f, "sigma: {}", self.sigma)?;
        writeln!(
            f,
            "join estimation: {}",
            match self.join_estimation {
                JoinEstimation::Chain => "chain",
                JoinEstimation::Uniformity => "uniformity",
            }
        )?;
        writeln!(f, "chain: {}", self.chain.join(" -> "))?;
        writeln!(f, "substitutes: {}", self.substitutes.len())?;
        for s in &self.substitutes {
            writeln!(
                f,
                "  [{}] value={} count={} relevant={}",
                s.bubbles.join(", "),
                format_value(s.estimate.value),
                format_value(Some(s.estimate.count)),
                s.estimate.relevant
            )?;
        }
        Ok(())
    }
}

/// Plans the query, selects bubble combinations, estimates every
/// substitute query and combines the results.
pub fn estimate_result(
    model: &BubbleModel,
    query: &BoundQuery,
    options: &EstimatorOptions,
) -> Result<EstimationReport> {
    let start = Instant::now();
    let use_join = options.use_join_bubbles && options.join_estimation == JoinEstimation::Chain;
    let plan = plan_query(model, query, use_join)?;
    let combos = select_bubble_combinations(model, &plan, options.sigma);
    let mut substitutes = Vec::with_capacity(combos.len());
    for (i, combo) in combos.iter().enumerate() {
        let method = seeded(options.method, (i as u64) << 16);
        let estimate = match options.join_estimation {
            JoinEstimation::Chain => chain_estimate(model, &plan, query, combo, method)?,
            JoinEstimation::Uniformity => uniformity_estimate(model, &plan, query, combo, method)?,
        };
        substitutes.push(SubstituteReport {
            bubbles: combo.iter().map(|&b| model.bubbles[b].id.clone()).collect(),
            estimate,
        });
    }
    let estimates: Vec<Estimate> = substitutes.iter().map(|s| s.estimate).collect();
    let value = combine_estimates(&estimates, query.aggregate)?;
    Ok(EstimationReport {
        aggregate: query.aggregate,
        value,
        chain: plan.chain(),
        substitutes,
        method: options.method,
        sigma: options.sigma,
        join_estimation: options.join_estimation,
        latency: start.elapsed(),
    })
}
