//! Chow-Liu tree Bayesian networks with compressed conditional probability
//! tables.
//!
//! Each attribute's codes are compressed into classes: the `k_mcv` most
//! frequent codes keep their own class, the remaining codes are grouped into
//! at most `b` buckets holding near-equal numbers of distinct codes. CPTs are
//! stored as counts over (parent class, child class) and probabilities are
//! derived from them, so a CPT built with `k_mcv >= card(A)` is exact.

use std::collections::{BTreeMap, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::Table;
use crate::error::{Error, Result};
use crate::partitioner::TupleBubble;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Most common values stored exactly per attribute.
    pub k_mcv: usize,
    /// Buckets for the remaining values.
    pub buckets: usize,
    /// Sample count for progressive sampling.
    pub samples: usize,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            k_mcv: 60,
            buckets: 100,
            samples: 1000,
        }
    }
}

impl ModelParams {
    pub fn new(k_mcv: usize, buckets: usize, samples: usize) -> Result<Self> {
        if buckets == 0 || samples == 0 {
            return Err(Error::InvalidArgument(format!(
                "model parameters need buckets >= 1 and samples >= 1 (got {buckets}, {samples})"
            )));
        }
        Ok(Self {
            k_mcv,
            buckets,
            samples,
        })
    }

    /// Parameters that keep every value of a domain with at most `card`
    /// distinct codes exact.
    pub fn exact(card: usize) -> Self {
        Self {
            k_mcv: card,
            buckets: 1,
            samples: 1000,
        }
    }
}

/// A run of non-MCV codes summarized by its bounds and distinct count.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bucket {
    pub id: u32,
    pub min: u32,
    pub max: u32,
    pub distinct: u32,
}

/// What a compressed class stands for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ValueClass {
    Code(u32),
    Range(Bucket),
}

/// Class layout of one attribute: MCV classes first (ordered by code), then
/// bucket classes (ordered by range).
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeDomain {
    mcvs: Vec<u32>,
    buckets: Vec<Bucket>,
}

impl AttributeDomain {
    pub fn fit(codes: &[u32], k_mcv: usize, buckets: usize) -> Self {
        let mut freq: BTreeMap<u32, u64> = BTreeMap::new();
        for &c in codes {
            *freq.entry(c).or_default() += 1;
        }
        let mut ranked: Vec<(u32, u64)> = freq.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        let split = k_mcv.min(ranked.len());
        let mut mcvs: Vec<u32> = ranked[..split].iter().map(|&(c, _)| c).collect();
        mcvs.sort_unstable();
        let mut rest: Vec<u32> = ranked[split..].iter().map(|&(c, _)| c).collect();
        rest.sort_unstable();

        let n_buckets = buckets.max(1).min(rest.len());
        let mut out = Vec::with_capacity(n_buckets);
        if n_buckets > 0 {
            let (base, extra) = (rest.len() / n_buckets, rest.len() % n_buckets);
            let mut start = 0;
            for i in 0..n_buckets {
                let len = base + usize::from(i < extra);
                let chunk = &rest[start..start + len];
                out.push(Bucket {
                    id: i as u32,
                    min: chunk[0],
                    max: chunk[len - 1],
                    distinct: len as u32,
                });
                start += len;
            }
        }
        Self { mcvs, buckets: out }
    }

    pub fn classes(&self) -> usize {
        self.mcvs.len() + self.buckets.len()
    }

    pub fn mcvs(&self) -> &[u32] {
        &self.mcvs
    }

    pub fn buckets(&self) -> &[Bucket] {
        &self.buckets
    }

    /// Number of distinct codes the domain was fitted on.
    pub fn distinct(&self) -> usize {
        self.mcvs.len() + self.buckets.iter().map(|b| b.distinct as usize).sum::<usize>()
    }

    pub fn class_of(&self, code: u32) -> Option<usize> {
        if let Ok(i) = self.mcvs.binary_search(&code) {
            return Some(i);
        }
        let i = self.buckets.partition_point(|b| b.max < code);
        let b = self.buckets.get(i)?;
        (b.min <= code).then_some(self.mcvs.len() + i)
    }

    pub fn class(&self, index: usize) -> ValueClass {
        match self.mcvs.get(index) {
            Some(&c) => ValueClass::Code(c),
            None => ValueClass::Range(self.buckets[index - self.mcvs.len()]),
        }
    }

    /// Number of MCV codes inside `[lo, hi]`.
    pub fn mcvs_in(&self, lo: u32, hi: u32) -> usize {
        if lo > hi {
            return 0;
        }
        self.mcvs.partition_point(|&c| c <= hi) - self.mcvs.partition_point(|&c| c < lo)
    }

    /// Codes a bucket may hold: its range minus the MCV codes inside it.
    pub fn candidate_span(&self, bucket: &Bucket) -> u32 {
        (bucket.max - bucket.min + 1) - self.mcvs_in(bucket.min, bucket.max) as u32
    }
}

/// Conditional distribution of one attribute given its parent's class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "StoredCpt", from = "StoredCpt")]
pub struct CompressedCpt {
    domain: AttributeDomain,
    parent_classes: usize,
    counts: Vec<u32>,
    totals: Vec<u64>,
    probs: Vec<f64>,
}

impl CompressedCpt {
    fn from_counts(domain: AttributeDomain, parent_classes: usize, counts: Vec<u32>) -> Self {
        let nc = domain.classes();
        let totals: Vec<u64> = (0..parent_classes)
            .map(|p| counts[p * nc..(p + 1) * nc].iter().map(|&c| u64::from(c)).sum())
            .collect();
        let probs = counts
            .iter()
            .enumerate()
            .map(|(i, &c)| match totals[i / nc.max(1)] {
                0 => 0.0,
                t => f64::from(c) / t as f64,
            })
            .collect();
        Self {
            domain,
            parent_classes,
            counts,
            totals,
            probs,
        }
    }

    pub fn domain(&self) -> &AttributeDomain {
        &self.domain
    }

    pub fn parent_classes(&self) -> usize {
        self.parent_classes
    }

    pub fn child_classes(&self) -> usize {
        self.domain.classes()
    }

    /// `P(child class | parent class)`; the parent class is 0 for a root.
    pub fn prob(&self, parent_class: usize, child_class: usize) -> f64 {
        self.probs[parent_class * self.child_classes() + child_class]
    }

    pub fn row(&self, parent_class: usize) -> &[f64] {
        let nc = self.child_classes();
        &self.probs[parent_class * nc..(parent_class + 1) * nc]
    }

    pub fn count(&self, parent_class: usize, child_class: usize) -> u32 {
        self.counts[parent_class * self.child_classes() + child_class]
    }

    pub fn parent_total(&self, parent_class: usize) -> u64 {
        self.totals[parent_class]
    }

    /// Non-zero probability entries actually stored.
    pub fn stored_entries(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }
}

/// On-disk form of a CPT.
#[derive(Clone, Serialize, Deserialize)]
struct StoredCpt {
    domain: AttributeDomain,
    parent_classes: u32,
    cells: StoredCells,
}

/// Nonzero counts as `(gap, count)` pairs, or every count when most cells
/// are filled.
#[derive(Clone, Serialize, Deserialize)]
enum StoredCells {
    Sparse(Vec<(u32, u32)>),
    Dense(Vec<u32>),
}

impl From<CompressedCpt> for StoredCpt {
    fn from(cpt: CompressedCpt) -> Self {
        let filled = cpt.counts.iter().filter(|&&c| c > 0).count();
        let cells = if 2 * filled > cpt.counts.len() {
            StoredCells::Dense(cpt.counts)
        } else {
            let mut pairs = Vec::with_capacity(filled);
            let mut last = 0usize;
            for (i, &c) in cpt.counts.iter().enumerate() {
                if c > 0 {
                    pairs.push(((i - last) as u32, c));
                    last = i;
                }
            }
            StoredCells::Sparse(pairs)
        };
        StoredCpt {
            domain: cpt.domain,
            parent_classes: cpt.parent_classes as u32,
            cells,
        }
    }
}

impl From<StoredCpt> for CompressedCpt {
    fn from(s: StoredCpt) -> Self {
        let len = s.parent_classes as usize * s.domain.classes();
        let counts = match s.cells {
            StoredCells::Dense(mut counts) => {
                counts.resize(len, 0);
                counts
            }
            StoredCells::Sparse(pairs) => {
                let mut counts = vec![0u32; len];
                let mut pos = 0usize;
                for (gap, c) in pairs {
                    pos += gap as usize;
                    if let Some(slot) = counts.get_mut(pos) {
                        *slot = c;
                    }
                }
                counts
            }
        };
        CompressedCpt::from_counts(s.domain, s.parent_classes as usize, counts)
    }
}

/// Parent column and its class layout, for fitting a conditional CPT.
pub struct ParentColumn<'a> {
    pub codes: &'a [u32],
    pub domain: &'a AttributeDomain,
}

/// Fits a CPT for `child`, conditioned on the parent's classes when given.
pub fn fit_cpt(child: &[u32], parent: Option<ParentColumn<'_>>, params: &ModelParams) -> CompressedCpt {
    let domain = AttributeDomain::fit(child, params.k_mcv, params.buckets);
    fit_cpt_with_domain(domain, child, parent)
}

fn fit_cpt_with_domain(domain: AttributeDomain, child: &[u32], parent: Option<ParentColumn<'_>>) -> CompressedCpt {
    let nc = domain.classes();
    let np = parent.as_ref().map_or(1, |p| p.domain.classes());
    let mut counts = vec![0u32; np * nc];
    for (row, &code) in child.iter().enumerate() {
        let c = domain.class_of(code).expect("domain fitted on this column");
        let p = match &parent {
            Some(pc) => pc
                .domain
                .class_of(pc.codes[row])
                .expect("parent domain fitted on its column"),
            None => 0,
        };
        counts[p * nc + c] += 1;
    }
    CompressedCpt::from_counts(domain, np, counts)
}

fn dense_joint(x: &[u32], y: &[u32]) -> Option<(usize, usize, Vec<u32>)> {
    let nx = x.iter().copied().max()? as usize + 1;
    let ny = y.iter().copied().max()? as usize + 1;
    if nx.saturating_mul(ny) > 1 << 22 {
        return None;
    }
    let mut joint = vec![0u32; nx * ny];
    for (&a, &b) in x.iter().zip(y) {
        joint[a as usize * ny + b as usize] += 1;
    }
    Some((nx, ny, joint))
}

/// Empirical entropy in nats.
pub fn entropy(x: &[u32]) -> f64 {
    let n = x.len() as f64;
    let mut freq: BTreeMap<u32, u64> = BTreeMap::new();
    for &c in x {
        *freq.entry(c).or_default() += 1;
    }
    freq.values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Empirical mutual information in nats.
pub fn mutual_information(x: &[u32], y: &[u32]) -> f64 {
    assert_eq!(x.len(), y.len(), "columns differ in length");
    let n = x.len() as f64;
    if x.is_empty() {
        return 0.0;
    }
    let term = |pxy: u64, px: u64, py: u64| {
        let pxy = pxy as f64 / n;
        pxy * (pxy / ((px as f64 / n) * (py as f64 / n))).ln()
    };
    if let Some((nx, ny, joint)) = dense_joint(x, y) {
        let mut mx = vec![0u64; nx];
        let mut my = vec![0u64; ny];
        for a in 0..nx {
            for b in 0..ny {
                let c = u64::from(joint[a * ny + b]);
                mx[a] += c;
                my[b] += c;
            }
        }
        let mut mi = 0.0;
        for a in 0..nx {
            for b in 0..ny {
                let c = joint[a * ny + b];
                if c > 0 {
                    mi += term(u64::from(c), mx[a], my[b]);
                }
            }
        }
        return mi.max(0.0);
    }
    let mut pairs: Vec<(u32, u32)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_unstable();
    let mut mx: BTreeMap<u32, u64> = BTreeMap::new();
    let mut my: BTreeMap<u32, u64> = BTreeMap::new();
    for &(a, b) in &pairs {
        *mx.entry(a).or_default() += 1;
        *my.entry(b).or_default() += 1;
    }
    let mut mi = 0.0;
    let mut i = 0;
    while i < pairs.len() {
        let j = i + pairs[i..].iter().take_while(|&&p| p == pairs[i]).count();
        let (a, b) = pairs[i];
        mi += term((j - i) as u64, mx[&a], my[&b]);
        i = j;
    }
    mi.max(0.0)
}

/// Rooted spanning tree over attributes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeStructure {
    pub names: Vec<String>,
    pub root: usize,
    pub parent: Vec<Option<usize>>,
}

impl TreeStructure {
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.parent
            .iter()
            .enumerate()
            .filter_map(|(child, p)| p.map(|p| (p, child)))
            .collect()
    }
}

// Weights compared on a 1e-12 grid so that float noise cannot break ties.
fn grid(w: f64) -> i64 {
    (w * 1e12).round() as i64
}

/// Maximum-weight spanning tree under pairwise mutual information, rooted at
/// the attribute of highest entropy. Equal weights fall back to name order.
pub fn chow_liu_tree(names: &[String], columns: &[&[u32]]) -> TreeStructure {
    let n = names.len();
    let mut edges: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let weights: Vec<f64> = edges
        .par_iter()
        .map(|&(i, j)| mutual_information(columns[i], columns[j]))
        .collect();
    let key = |&(i, j): &(usize, usize)| {
        let (a, b) = if names[i] <= names[j] { (i, j) } else { (j, i) };
        (names[a].as_str(), names[b].as_str())
    };
    let mut order: Vec<usize> = (0..edges.len()).collect();
    order.sort_by(|&x, &y| {
        grid(weights[y])
            .cmp(&grid(weights[x]))
            .then_with(|| key(&edges[x]).cmp(&key(&edges[y])))
    });
    edges = order.into_iter().map(|i| edges[i]).collect();

    let mut uf: Vec<usize> = (0..n).collect();
    fn find(uf: &mut [usize], mut x: usize) -> usize {
        while uf[x] != x {
            uf[x] = uf[uf[x]];
            x = uf[x];
        }
        x
    }
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, j) in edges {
        let (ri, rj) = (find(&mut uf, i), find(&mut uf, j));
        if ri != rj {
            uf[ri] = rj;
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
    }

    let root = (0..n)
        .max_by(|&a, &b| {
            grid(entropy(columns[a]))
                .cmp(&grid(entropy(columns[b])))
                .then_with(|| names[b].cmp(&names[a]))
        })
        .unwrap_or(0);
    let mut parent = vec![None; n];
    let mut seen = vec![false; n];
    let mut queue = VecDeque::new();
    if n > 0 {
        seen[root] = true;
        queue.push_back(root);
    }
    while let Some(u) = queue.pop_front() {
        let mut next = adjacency[u].clone();
        next.sort_by(|&a, &b| names[a].cmp(&names[b]));
        for v in next {
            if !seen[v] {
                seen[v] = true;
                parent[v] = Some(u);
                queue.push_back(v);
            }
        }
    }
    TreeStructure {
        names: names.to_vec(),
        root,
        parent,
    }
}

/// Chow-Liu structure over the raw codes of a table.
pub fn chow_liu_structure(table: &Table) -> TreeStructure {
    let names: Vec<String> = table.schema().attributes.iter().map(|a| a.name.clone()).collect();
    let columns: Vec<&[u32]> = table.columns().iter().map(Vec::as_slice).collect();
    chow_liu_tree(&names, &columns)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkNode {
    pub name: String,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub cpt: CompressedCpt,
}

/// One Chow-Liu network summarizing one bubble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChowLiuNetwork {
    pub bubble_id: String,
    pub rows: u64,
    pub nodes: Vec<NetworkNode>,
    pub root: usize,
    /// Root-first topological order.
    pub order: Vec<usize>,
    pub aliases: BTreeMap<String, String>,
    /// Set for networks of empty bubbles, which carry no probability mass.
    pub degenerate: bool,
}

impl ChowLiuNetwork {
    pub fn node_index(&self, attribute: &str) -> Option<usize> {
        let name = self.aliases.get(attribute).map_or(attribute, String::as_str);
        self.nodes.iter().position(|n| n.name == name)
    }

    pub fn require(&self, attribute: &str) -> Result<usize> {
        self.node_index(attribute)
            .ok_or_else(|| Error::UnknownAttribute(format!("{attribute} (bubble {})", self.bubble_id)))
    }

    pub fn domain(&self, node: usize) -> &AttributeDomain {
        self.nodes[node].cpt.domain()
    }

    /// `(parent, child)` pairs.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| n.parent.map(|p| (p, i)))
            .collect()
    }

    pub fn stored_entries(&self) -> usize {
        self.nodes.iter().map(|n| n.cpt.stored_entries()).sum()
    }

    fn from_structure(
        bubble_id: String,
        rows: u64,
        aliases: BTreeMap<String, String>,
        structure: TreeStructure,
        cpts: Vec<CompressedCpt>,
        degenerate: bool,
    ) -> Self {
        let mut nodes: Vec<NetworkNode> = structure
            .names
            .into_iter()
            .zip(cpts)
            .zip(&structure.parent)
            .map(|((name, cpt), &parent)| NetworkNode {
                name,
                parent,
                children: Vec::new(),
                cpt,
            })
            .collect();
        for i in 0..nodes.len() {
            if let Some(p) = nodes[i].parent {
                nodes[p].children.push(i);
            }
        }
        let mut order = Vec::with_capacity(nodes.len());
        let mut queue = VecDeque::from([structure.root]);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            queue.extend(nodes[u].children.iter().copied());
        }
        Self {
            bubble_id,
            rows,
            nodes,
            root: structure.root,
            order,
            aliases,
            degenerate,
        }
    }
}

/// Learns structure and compressed CPTs for one bubble. Structure is learned
/// on the compressed class columns, i.e. on the distributions the CPTs will
/// actually store.
pub fn learn_network(bubble: &TupleBubble, params: &ModelParams) -> ChowLiuNetwork {
    learn_table_network(&bubble.id, &bubble.table, bubble.aliases.clone(), params)
}

/// Learns a network directly from a table, e.g. a whole relation.
pub fn learn_table_network(
    id: &str,
    table: &Table,
    aliases: BTreeMap<String, String>,
    params: &ModelParams,
) -> ChowLiuNetwork {
    let names: Vec<String> = table.schema().attributes.iter().map(|a| a.name.clone()).collect();
    if table.n_rows() == 0 || names.is_empty() {
        let structure = TreeStructure {
            root: 0,
            parent: (0..names.len()).map(|i| (i > 0).then_some(0)).collect(),
            names,
        };
        let cpts = structure
            .parent
            .iter()
            .map(|_| CompressedCpt::from_counts(AttributeDomain::default(), 1, Vec::new()))
            .collect();
        return ChowLiuNetwork::from_structure(id.to_string(), 0, aliases, structure, cpts, true);
    }

    let domains: Vec<AttributeDomain> = table
        .columns()
        .par_iter()
        .map(|c| AttributeDomain::fit(c, params.k_mcv, params.buckets))
        .collect();
    let classes: Vec<Vec<u32>> = table
        .columns()
        .par_iter()
        .zip(&domains)
        .map(|(col, d)| col.iter().map(|&c| d.class_of(c).expect("fitted") as u32).collect())
        .collect();
    let class_refs: Vec<&[u32]> = classes.iter().map(Vec::as_slice).collect();
    let structure = chow_liu_tree(&names, &class_refs);
    let cpts = (0..names.len())
        .into_par_iter()
        .map(|i| {
            let parent = structure.parent[i].map(|p| ParentColumn {
                codes: table.column(p),
                domain: &domains[p],
            });
            fit_cpt_with_domain(domains[i].clone(), table.column(i), parent)
        })
        .collect();
    ChowLiuNetwork::from_structure(id.to_string(), table.n_rows() as u64, aliases, structure, cpts, false)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mi_of_identical_columns_is_entropy() {
        let x = [0, 0, 1, 2, 2, 2];
        assert!((mutual_information(&x, &x) - entropy(&x)).abs() < 1e-12);
    }

    #[test]
    fn mi_of_independent_columns_is_zero() {
        assert_eq!(mutual_information(&[0, 0, 1, 1], &[0, 1, 0, 1]), 0.0);
        // product sample over a 3x2 joint
        let x: Vec<u32> = (0..6).map(|i| i / 2).collect();
        let y: Vec<u32> = (0..6).map(|i| i % 2).collect();
        assert!(mutual_information(&x, &y).abs() < 1e-15);
    }

    #[test]
    fn sparse_path_matches_dense_path() {
        let x: Vec<u32> = (0..200).map(|i| (i * 7919 % 97) as u32).collect();
        let y: Vec<u32> = x.iter().map(|&v| v % 5).collect();
        let dense = mutual_information(&x, &y);
        let wide: Vec<u32> = x.iter().map(|&v| v * 100_000).collect();
        let sparse = mutual_information(&wide, &y);
        assert!((dense - sparse).abs() < 1e-12);
    }

    #[test]
    fn uniform_root_splits_into_equal_buckets() {
        let codes: Vec<u32> = (1..=100).collect();
        let cpt = fit_cpt(&codes, None, &ModelParams::new(0, 4, 1).unwrap());
        assert_eq!(cpt.domain().buckets().len(), 4);
        for (i, b) in cpt.domain().buckets().iter().enumerate() {
            assert_eq!(b.distinct, 25);
            assert!((cpt.prob(0, i) - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn few_distinct_values_stay_exact() {
        let codes = [0, 1, 1, 2, 2, 2];
        let cpt = fit_cpt(&codes, None, &ModelParams::default());
        assert!(cpt.domain().buckets().is_empty());
        assert_eq!(cpt.child_classes(), 3);
        assert!((cpt.prob(0, 2) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn mcvs_are_most_frequent() {
        let codes = [5, 5, 5, 1, 1, 2, 3, 4];
        let domain = AttributeDomain::fit(&codes, 2, 2);
        assert_eq!(domain.mcvs(), &[1, 5]);
        assert_eq!(domain.buckets().len(), 2);
        assert_eq!(domain.buckets()[0].min, 2);
        assert_eq!(domain.buckets()[0].max, 3);
        assert_eq!(domain.buckets()[1].min, 4);
        assert_eq!(domain.class_of(5), Some(1));
        assert_eq!(domain.class_of(3), Some(2));
        assert_eq!(domain.class_of(9), None);
    }

    #[test]
    fn conditional_rows_are_normalized() {
        let parent = [0u32, 0, 1, 1, 1, 2];
        let child = [3u32, 4, 3, 3, 7, 9];
        let pdom = AttributeDomain::fit(&parent, 60, 100);
        let cpt = fit_cpt(
            &child,
            Some(ParentColumn {
                codes: &parent,
                domain: &pdom,
            }),
            &ModelParams::new(1, 2, 1).unwrap(),
        );
        for p in 0..cpt.parent_classes() {
            let s: f64 = cpt.row(p).iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn two_attributes_one_edge() {
        let names = vec!["a".to_string(), "b".to_string()];
        let a = [0, 1, 1, 0];
        let b = [1, 1, 0, 0];
        let t = chow_liu_tree(&names, &[&a, &b]);
        assert_eq!(t.edges().len(), 1);
    }

    #[test]
    fn duplicate_attribute_pair_is_linked() {
        let names = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        let a: Vec<u32> = (0..12).map(|i| i % 3).collect();
        let c: Vec<u32> = (0..12).map(|i| (i / 3) % 2).collect();
        let t = chow_liu_tree(&names, &[&a, &a, &c]);
        let edges = t.edges();
        assert!(edges.contains(&(0, 1)) || edges.contains(&(1, 0)), "{edges:?}");
        // c is independent of both; the tie goes to the edge a-c
        assert!(edges.contains(&(0, 2)) || edges.contains(&(2, 0)), "{edges:?}");
    }

    #[test]
    fn stored_cpt_round_trip() {
        let parent = [0u32, 0, 1, 1, 1, 2, 2, 2];
        let child = [3u32, 4, 3, 3, 7, 9, 9, 1];
        let pdom = AttributeDomain::fit(&parent, 60, 100);
        let cpt = fit_cpt(
            &child,
            Some(ParentColumn {
                codes: &parent,
                domain: &pdom,
            }),
            &ModelParams::default(),
        );
        let bytes = postcard::to_stdvec(&cpt).unwrap();
        let back: CompressedCpt = postcard::from_bytes(&bytes).unwrap();
        assert_eq!(back, cpt);
    }
}
