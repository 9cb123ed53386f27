//! Selectivities and per-value distributions from a single Chow-Liu network.
//!
//! Conditions on a node are piecewise-constant weights over dictionary codes:
//! a hard predicate region has weight 1 inside and 0 outside, evidence from
//! another network carries arbitrary non-negative weights. A compressed class
//! gets the average weight of the codes it may stand for; bucket codes are
//! assumed uniform over the bucket's candidate codes.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::network::{AttributeDomain, ChowLiuNetwork, ValueClass};

/// Set of dictionary codes a predicate admits.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Region {
    Codes(BTreeSet<u32>),
    /// Inclusive code interval; empty when `lo > hi`.
    Interval {
        lo: u32,
        hi: u32,
    },
}

impl Region {
    pub fn point(code: u32) -> Self {
        Region::Codes(BTreeSet::from([code]))
    }

    pub fn empty() -> Self {
        Region::Codes(BTreeSet::new())
    }

    pub fn contains(&self, code: u32) -> bool {
        match self {
            Region::Codes(codes) => codes.contains(&code),
            Region::Interval { lo, hi } => *lo <= code && code <= *hi,
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            Region::Codes(codes) => codes.is_empty(),
            Region::Interval { lo, hi } => lo > hi,
        }
    }

    pub fn intersect(&self, other: &Region) -> Region {
        match (self, other) {
            (Region::Interval { lo: a, hi: b }, Region::Interval { lo: c, hi: d }) => Region::Interval {
                lo: *a.max(c),
                hi: *b.min(d),
            },
            (Region::Codes(codes), r) | (r, Region::Codes(codes)) => {
                Region::Codes(codes.iter().copied().filter(|&c| r.contains(c)).collect())
            }
        }
    }
}

/// A predicate on one (qualified) attribute.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PredicateRegion {
    pub attribute: String,
    pub region: Region,
}

impl PredicateRegion {
    pub fn new(attribute: impl Into<String>, region: Region) -> Self {
        Self {
            attribute: attribute.into(),
            region,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub lo: u32,
    pub hi: u32,
    pub weight: f64,
}

/// Piecewise-constant non-negative weights over codes; zero outside the
/// segments.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CodeWeights {
    segments: Vec<Segment>,
}

impl CodeWeights {
    /// Segments must be pairwise disjoint; zero-weight segments are dropped.
    pub fn from_segments(mut segments: Vec<Segment>) -> Self {
        segments.retain(|s| s.weight > 0.0 && s.lo <= s.hi);
        segments.sort_by_key(|s| s.lo);
        debug_assert!(segments.windows(2).all(|w| w[0].hi < w[1].lo), "overlapping segments");
        Self { segments }
    }

    pub fn from_region(region: &Region) -> Self {
        match region {
            Region::Interval { lo, hi } => Self::from_segments(vec![Segment {
                lo: *lo,
                hi: *hi,
                weight: 1.0,
            }]),
            Region::Codes(codes) => {
                let mut segments: Vec<Segment> = Vec::new();
                for &c in codes {
                    match segments.last_mut() {
                        Some(s) if s.hi + 1 == c => s.hi = c,
                        _ => segments.push(Segment {
                            lo: c,
                            hi: c,
                            weight: 1.0,
                        }),
                    }
                }
                Self { segments }
            }
        }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn is_zero(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn weight(&self, code: u32) -> f64 {
        let i = self.segments.partition_point(|s| s.hi < code);
        match self.segments.get(i) {
            Some(s) if s.lo <= code => s.weight,
            _ => 0.0,
        }
    }

    pub fn max_weight(&self) -> f64 {
        self.segments.iter().map(|s| s.weight).fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::from_segments(
            self.segments
                .iter()
                .map(|s| Segment {
                    weight: s.weight * factor,
                    ..*s
                })
                .collect(),
        )
    }

    /// Pointwise product.
    pub fn product(&self, other: &CodeWeights) -> Self {
        let (a, b) = (&self.segments, &other.segments);
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::new();
        while i < a.len() && j < b.len() {
            let lo = a[i].lo.max(b[j].lo);
            let hi = a[i].hi.min(b[j].hi);
            if lo <= hi {
                out.push(Segment {
                    lo,
                    hi,
                    weight: a[i].weight * b[j].weight,
                });
            }
            if a[i].hi < b[j].hi {
                i += 1;
            } else {
                j += 1;
            }
        }
        Self::from_segments(out)
    }

    /// Average weight over the codes a class may stand for.
    pub fn class_weight(&self, domain: &AttributeDomain, class: usize) -> f64 {
        match domain.class(class) {
            ValueClass::Code(c) => self.weight(c),
            ValueClass::Range(bucket) => {
                let start = self.segments.partition_point(|s| s.hi < bucket.min);
                let mut total = 0.0;
                for s in self.segments[start..].iter().take_while(|s| s.lo <= bucket.max) {
                    let lo = s.lo.max(bucket.min);
                    let hi = s.hi.min(bucket.max);
                    let candidates = (hi - lo + 1) as usize - domain.mcvs_in(lo, hi);
                    total += s.weight * candidates as f64;
                }
                total / f64::from(domain.candidate_span(&bucket))
            }
        }
    }
}

/// Accumulated weights per network node.
#[derive(Clone, Debug, Default)]
pub struct Conditions {
    per_node: BTreeMap<usize, CodeWeights>,
}

impl Conditions {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_predicates(net: &ChowLiuNetwork, predicates: &[PredicateRegion]) -> Result<Self> {
        let mut out = Self::new();
        for p in predicates {
            out.restrict(net.require(&p.attribute)?, CodeWeights::from_region(&p.region));
        }
        Ok(out)
    }

    pub fn restrict(&mut self, node: usize, weights: CodeWeights) {
        let merged = match self.per_node.remove(&node) {
            Some(w) => w.product(&weights),
            None => weights,
        };
        self.per_node.insert(node, merged);
    }

    pub fn restrict_region(&mut self, node: usize, region: &Region) {
        self.restrict(node, CodeWeights::from_region(region));
    }

    pub fn nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.per_node.keys().copied()
    }

    pub fn weights(&self, node: usize) -> Option<&CodeWeights> {
        self.per_node.get(&node)
    }

    fn class_weights(&self, net: &ChowLiuNetwork) -> Vec<Option<Vec<f64>>> {
        (0..net.nodes.len())
            .map(|i| {
                self.per_node.get(&i).map(|w| {
                    let domain = net.domain(i);
                    (0..domain.classes()).map(|c| w.class_weight(domain, c)).collect()
                })
            })
            .collect()
    }
}

/// Unnormalized distribution `P(node = class ∧ conditions)` over the
/// compressed classes of one node.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution {
    pub node: usize,
    pub attribute: String,
    pub domain: AttributeDomain,
    pub entries: Vec<f64>,
    pub mass: f64,
}

impl Distribution {
    fn new(net: &ChowLiuNetwork, node: usize, entries: Vec<f64>) -> Self {
        let mass = entries.iter().sum();
        Self {
            node,
            attribute: net.nodes[node].name.clone(),
            domain: net.domain(node).clone(),
            entries,
            mass,
        }
    }

    pub fn class(&self, index: usize) -> ValueClass {
        self.domain.class(index)
    }

    /// Spreads each entry, multiplied by `scale`, over the codes its class
    /// may stand for. Bucket mass is divided evenly over candidate codes.
    pub fn to_code_weights(&self, scale: f64) -> CodeWeights {
        let mcvs = self.domain.mcvs();
        let mut segments: Vec<Segment> = mcvs
            .iter()
            .zip(&self.entries)
            .map(|(&c, &e)| Segment {
                lo: c,
                hi: c,
                weight: e * scale,
            })
            .collect();
        for (i, b) in self.domain.buckets().iter().enumerate() {
            let e = self.entries[mcvs.len() + i];
            if e <= 0.0 {
                continue;
            }
            let weight = e * scale / f64::from(self.domain.candidate_span(b));
            let mut lo = b.min;
            for &m in &mcvs[mcvs.partition_point(|&c| c < b.min)..mcvs.partition_point(|&c| c <= b.max)] {
                if m > lo {
                    segments.push(Segment { lo, hi: m - 1, weight });
                }
                lo = m + 1;
            }
            if lo <= b.max {
                segments.push(Segment { lo, hi: b.max, weight });
            }
        }
        CodeWeights::from_segments(segments)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InferenceMethod {
    VariableElimination,
    ProgressiveSampling { samples: usize, seed: u64 },
}

/// Nodes that influence the result: every marked node, the root, and the
/// tree paths between them. Unmarked leaves sum out to 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelevantNodes {
    keep: Vec<bool>,
}

impl RelevantNodes {
    pub fn all(net: &ChowLiuNetwork) -> Self {
        Self {
            keep: vec![true; net.nodes.len()],
        }
    }

    pub fn contains(&self, node: usize) -> bool {
        self.keep[node]
    }

    pub fn nodes(&self) -> Vec<usize> {
        (0..self.keep.len()).filter(|&i| self.keep[i]).collect()
    }

    pub fn len(&self) -> usize {
        self.keep.iter().filter(|&&k| k).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn prune_irrelevant(net: &ChowLiuNetwork, marked: impl IntoIterator<Item = usize>) -> RelevantNodes {
    let mut keep = vec![false; net.nodes.len()];
    if !keep.is_empty() {
        keep[net.root] = true;
    }
    for mut node in marked {
        while !keep[node] {
            keep[node] = true;
            node = net.nodes[node].parent.expect("non-root nodes have parents");
        }
    }
    RelevantNodes { keep }
}

/// Prunes by attribute names, as used by callers holding query predicates.
pub fn prune_for(net: &ChowLiuNetwork, targets: &[&str], evidence: &[PredicateRegion]) -> Result<RelevantNodes> {
    let mut marked = Vec::new();
    for t in targets {
        marked.push(net.require(t)?);
    }
    for p in evidence {
        marked.push(net.require(&p.attribute)?);
    }
    Ok(prune_irrelevant(net, marked))
}

fn check_usable(net: &ChowLiuNetwork) -> Result<()> {
    if net.degenerate {
        return Err(Error::DegenerateNetwork(net.bubble_id.clone()));
    }
    Ok(())
}

fn marked_nodes(conditions: &Conditions, target: Option<usize>) -> Vec<usize> {
    conditions.nodes().chain(target).collect()
}

/// Exact `P(conditions)` and, with a target, `P(target = class ∧ conditions)`
/// by message passing towards the target on the pruned tree.
pub fn variable_elimination(
    net: &ChowLiuNetwork,
    target: Option<usize>,
    conditions: &Conditions,
) -> Result<Distribution> {
    check_usable(net)?;
    let relevant = prune_irrelevant(net, marked_nodes(conditions, target));
    Ok(eliminate(net, &relevant, target, conditions))
}

/// Variable elimination over an explicit node set (which must include every
/// marked node and the root).
pub fn variable_elimination_on(
    net: &ChowLiuNetwork,
    relevant: &RelevantNodes,
    target: Option<usize>,
    conditions: &Conditions,
) -> Result<Distribution> {
    check_usable(net)?;
    Ok(eliminate(net, relevant, target, conditions))
}

fn eliminate(
    net: &ChowLiuNetwork,
    relevant: &RelevantNodes,
    target: Option<usize>,
    conditions: &Conditions,
) -> Distribution {
    let phi = conditions.class_weights(net);
    let center = target.unwrap_or(net.root);
    let local = |u: usize| -> Vec<f64> {
        let nc = net.domain(u).classes();
        let mut v = match &phi[u] {
            Some(w) => w.clone(),
            None => vec![1.0; nc],
        };
        if u == net.root {
            for (x, p) in v.iter_mut().zip(net.nodes[u].cpt.row(0)) {
                *x *= p;
            }
        }
        v
    };

    // Collect in reverse BFS order from the center over relevant nodes.
    let neighbors = |u: usize| -> Vec<usize> {
        let node = &net.nodes[u];
        node.parent
            .into_iter()
            .chain(node.children.iter().copied())
            .filter(|&v| relevant.contains(v))
            .collect()
    };
    let mut order = vec![(center, usize::MAX)];
    let mut i = 0;
    while i < order.len() {
        let (u, from) = order[i];
        for v in neighbors(u) {
            if v != from {
                order.push((v, u));
            }
        }
        i += 1;
    }
    let mut belief: Vec<Option<Vec<f64>>> = vec![None; net.nodes.len()];
    for &(u, _) in &order {
        belief[u] = Some(local(u));
    }
    for &(u, towards) in order.iter().rev() {
        if towards == usize::MAX {
            continue;
        }
        let bu = belief[u].take().expect("visited once");
        let message = if net.nodes[u].parent == Some(towards) {
            // m(p) = Σ_c P(c|p) b(c)
            let cpt = &net.nodes[u].cpt;
            (0..cpt.parent_classes())
                .map(|p| cpt.row(p).iter().zip(&bu).map(|(a, b)| a * b).sum())
                .collect::<Vec<f64>>()
        } else {
            // towards is a child: m(c) = Σ_p b(p) P(c|p)
            let cpt = &net.nodes[towards].cpt;
            let mut m = vec![0.0; cpt.child_classes()];
            for (p, &bp) in bu.iter().enumerate() {
                if bp != 0.0 {
                    for (mc, &q) in m.iter_mut().zip(cpt.row(p)) {
                        *mc += bp * q;
                    }
                }
            }
            m
        };
        let bt = belief[towards].as_mut().expect("parent visited before child");
        for (x, m) in bt.iter_mut().zip(message) {
            *x *= m;
        }
    }
    let entries = belief[center].take().expect("center visited");
    let mut out = Distribution::new(net, center, entries);
    out.mass = out.mass.max(0.0);
    out
}

/// Monte-Carlo estimate of `P(conditions)` and, with a target, of the
/// per-class joint. Nodes are visited root first; each step multiplies the
/// mean conditional weight of the current particles and then draws the node's
/// class for every particle after resampling particles by that weight.
pub fn progressive_sampling(
    net: &ChowLiuNetwork,
    target: Option<usize>,
    conditions: &Conditions,
    samples: usize,
    seed: u64,
) -> Result<Distribution> {
    check_usable(net)?;
    if samples == 0 {
        return Err(Error::InvalidArgument(
            "progressive sampling needs at least one sample".into(),
        ));
    }
    let relevant = prune_irrelevant(net, marked_nodes(conditions, target));
    let phi = conditions.class_weights(net);
    let weight = |u: usize, c: usize| phi[u].as_ref().map_or(1.0, |w| w[c]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // A relevant leaf target is handled last and analytically.
    let rao_blackwell =
        target.filter(|&t| t != net.root && net.nodes[t].children.iter().all(|&c| !relevant.contains(c)));
    let order: Vec<usize> = net
        .order
        .iter()
        .copied()
        .filter(|&u| relevant.contains(u) && Some(u) != rao_blackwell)
        .collect();

    let mut particles: Vec<Vec<u32>> = vec![Vec::new(); net.nodes.len()];
    let mut estimate = 1.0;
    let zero = |net: &ChowLiuNetwork, t: Option<usize>| {
        let node = t.unwrap_or(net.root);
        Distribution::new(net, node, vec![0.0; net.domain(node).classes()])
    };

    for &u in &order {
        let cpt = &net.nodes[u].cpt;
        let nc = cpt.child_classes();
        // Per parent class: restricted row and its total.
        let rows: Vec<Vec<f64>> = (0..cpt.parent_classes())
            .map(|p| (0..nc).map(|c| cpt.prob(p, c) * weight(u, c)).collect())
            .collect();
        let totals: Vec<f64> = rows.iter().map(|r| r.iter().sum()).collect();
        let parent = net.nodes[u].parent;
        let g: Vec<f64> = match parent {
            None => vec![totals[0]; samples],
            Some(p) => particles[p].iter().map(|&pc| totals[pc as usize]).collect(),
        };
        let factor = g.iter().sum::<f64>() / samples as f64;
        if factor <= 0.0 {
            return Ok(zero(net, target));
        }
        estimate *= factor;
        if parent.is_some() {
            let picks = systematic_resample(&g, &mut rng);
            for col in particles.iter_mut().filter(|c| !c.is_empty()) {
                *col = picks.iter().map(|&i| col[i]).collect();
            }
        }
        let cdfs: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| {
                r.iter()
                    .scan(0.0, |acc, &x| {
                        *acc += x;
                        Some(*acc)
                    })
                    .collect()
            })
            .collect();
        let drawn: Vec<u32> = (0..samples)
            .map(|s| {
                let pc = parent.map_or(0, |p| particles[p][s] as usize);
                draw(&cdfs[pc], &mut rng)
            })
            .collect();
        particles[u] = drawn;
    }

    let node = target.unwrap_or(net.root);
    let nc = net.domain(node).classes();
    let entries = if let Some(t) = rao_blackwell {
        let cpt = &net.nodes[t].cpt;
        let p = net.nodes[t].parent.expect("leaf target is not the root");
        let mut acc = vec![0.0; nc];
        for &pc in &particles[p] {
            for (c, a) in acc.iter_mut().enumerate() {
                *a += cpt.prob(pc as usize, c) * weight(t, c);
            }
        }
        acc.into_iter().map(|a| estimate * a / samples as f64).collect()
    } else {
        let mut hist = vec![0.0; nc];
        for &c in &particles[node] {
            hist[c as usize] += 1.0;
        }
        hist.into_iter().map(|h| estimate * h / samples as f64).collect()
    };
    let mut out = Distribution::new(net, node, entries);
    if target.is_none() {
        out.mass = estimate;
    }
    Ok(out)
}

fn draw(cdf: &[f64], rng: &mut ChaCha8Rng) -> u32 {
    let total = *cdf.last().expect("non-empty class list");
    let u = rng.gen::<f64>() * total;
    let i = cdf.partition_point(|&x| x <= u);
    if i < cdf.len() {
        return i as u32;
    }
    // Rounding pushed the draw past the end: take the last class with mass.
    (0..cdf.len())
        .rev()
        .find(|&j| cdf[j] > if j == 0 { 0.0 } else { cdf[j - 1] })
        .unwrap_or(0) as u32
}

fn systematic_resample(weights: &[f64], rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = weights.len();
    let total: f64 = weights.iter().sum();
    let step = total / n as f64;
    let mut u = rng.gen::<f64>() * step;
    let mut out = Vec::with_capacity(n);
    let mut acc = 0.0;
    let mut i = 0;
    for _ in 0..n {
        while i + 1 < n && (acc + weights[i] <= u || weights[i] == 0.0) {
            acc += weights[i];
            i += 1;
        }
        out.push(i);
        u += step;
    }
    out
}

/// `P(attribute = class ∧ predicates)` for every class of the aggregation
/// attribute; the mass is the selectivity.
pub fn per_value_distribution(
    net: &ChowLiuNetwork,
    attribute: &str,
    conditions: &Conditions,
    method: InferenceMethod,
) -> Result<Distribution> {
    let node = net.require(attribute)?;
    infer(net, Some(node), conditions, method)
}

/// Selectivity of the conditions.
pub fn selectivity(net: &ChowLiuNetwork, conditions: &Conditions, method: InferenceMethod) -> Result<f64> {
    Ok(infer(net, None, conditions, method)?.mass)
}

pub fn infer(
    net: &ChowLiuNetwork,
    target: Option<usize>,
    conditions: &Conditions,
    method: InferenceMethod,
) -> Result<Distribution> {
    match method {
        InferenceMethod::VariableElimination => variable_elimination(net, target, conditions),
        InferenceMethod::ProgressiveSampling { samples, seed } => {
            progressive_sampling(net, target, conditions, samples, seed)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::infer_schema;
    use crate::catalog::parse_table;
    use crate::network::{learn_table_network, ModelParams};

    fn net_from_csv(csv: &str) -> ChowLiuNetwork {
        let schema = infer_schema("T", csv).unwrap();
        let table = parse_table(csv.as_bytes(), schema).unwrap();
        learn_table_network("T", &table, BTreeMap::new(), &ModelParams::exact(64))
    }

    const CSV: &str = "a,b,c\n0,0,1\n0,1,1\n1,1,0\n1,1,1\n2,0,0\n2,1,0\n";

    #[test]
    fn full_region_has_unit_mass() {
        let net = net_from_csv(CSV);
        let mut cond = Conditions::new();
        for i in 0..3 {
            cond.restrict_region(i, &Region::Interval { lo: 0, hi: 10 });
        }
        let d = variable_elimination(&net, None, &cond).unwrap();
        assert!((d.mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_region_has_zero_mass() {
        let net = net_from_csv(CSV);
        let mut cond = Conditions::new();
        cond.restrict_region(1, &Region::empty());
        assert_eq!(variable_elimination(&net, None, &cond).unwrap().mass, 0.0);
        assert_eq!(progressive_sampling(&net, None, &cond, 10, 1).unwrap().mass, 0.0);
    }

    #[test]
    fn root_target_only_prunes_to_root() {
        let net = net_from_csv(CSV);
        let relevant = prune_irrelevant(&net, [net.root]);
        assert_eq!(relevant.nodes(), vec![net.root]);
        let all = prune_irrelevant(&net, 0..3);
        assert_eq!(all.len(), 3);
    }

    #[test]
    fn region_intersection() {
        let a = Region::Interval { lo: 2, hi: 8 };
        let b = Region::Codes([1, 3, 9].into());
        assert_eq!(a.intersect(&b), Region::Codes([3].into()));
        assert!(a.intersect(&Region::Interval { lo: 9, hi: 12 }).is_empty());
    }

    #[test]
    fn bucket_class_weight_is_overlap_share() {
        let codes: Vec<u32> = (0..10).collect();
        let domain = AttributeDomain::fit(&codes, 0, 1);
        let w = CodeWeights::from_region(&Region::Interval { lo: 0, hi: 4 });
        assert!((w.class_weight(&domain, 0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn code_weight_product() {
        let a = CodeWeights::from_segments(vec![Segment {
            lo: 0,
            hi: 9,
            weight: 2.0,
        }]);
        let b = CodeWeights::from_region(&Region::Codes([3, 4, 12].into()));
        let p = a.product(&b);
        assert_eq!(p.weight(3), 2.0);
        assert_eq!(p.weight(4), 2.0);
        assert_eq!(p.weight(5), 0.0);
        assert_eq!(p.weight(12), 0.0);
    }

    #[test]
    fn ps_single_root_predicate_is_exact() {
        let net = net_from_csv(CSV);
        let mut cond = Conditions::new();
        cond.restrict_region(net.root, &Region::point(0));
        let ve = variable_elimination(&net, None, &cond).unwrap().mass;
        let ps = progressive_sampling(&net, None, &cond, 7, 3).unwrap().mass;
        assert!((ve - ps).abs() < 1e-12);
    }

    #[test]
    fn degenerate_network_is_rejected() {
        let net = net_from_csv("a,b\n");
        assert!(matches!(
            variable_elimination(&net, None, &Conditions::new()),
            Err(Error::DegenerateNetwork(_))
        ));
    }
}
