//! Test-side oracles and generators shared by the integration targets.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tuple_bubbles::catalog::{infer_schema, parse_table, Table};
use tuple_bubbles::inference::{CodeWeights, Conditions, Region, Segment};
use tuple_bubbles::network::{learn_table_network, ChowLiuNetwork, ModelParams, ValueClass};

/// Integer table with columns `a0..an` from row-major codes.
pub fn int_table(name: &str, rows: &[Vec<u32>]) -> Table {
    let width = rows.first().map_or(0, Vec::len);
    let mut csv = (0..width).map(|i| format!("a{i}")).collect::<Vec<_>>().join(",");
    csv.push('\n');
    for r in rows {
        let line: Vec<String> = r.iter().map(u32::to_string).collect();
        writeln!(csv, "{}", line.join(",")).unwrap();
    }
    parse_table(csv.as_bytes(), infer_schema(name, &csv).unwrap()).unwrap()
}

/// Rows drawn from a random tree-shaped generator with `nodes` attributes of
/// at most `max_card` values each.
pub fn random_rows(rng: &mut ChaCha8Rng, nodes: usize, max_card: u32, rows: usize) -> Vec<Vec<u32>> {
    let cards: Vec<u32> = (0..nodes).map(|_| rng.gen_range(2..=max_card)).collect();
    let parents: Vec<Option<usize>> = (0..nodes).map(|i| (i > 0).then(|| rng.gen_range(0..i))).collect();
    // Each attribute copies a function of its parent with some probability.
    let noise: Vec<f64> = (0..nodes).map(|_| rng.gen_range(0.1..0.9)).collect();
    let maps: Vec<Vec<u32>> = (0..nodes)
        .map(|i| (0..max_card).map(|_| rng.gen_range(0..cards[i])).collect())
        .collect();
    (0..rows)
        .map(|_| {
            let mut row = vec![0u32; nodes];
            for i in 0..nodes {
                row[i] = match parents[i] {
                    Some(p) if !rng.gen_bool(noise[i]) => maps[i][row[p] as usize],
                    _ => rng.gen_range(0..cards[i]),
                };
            }
            row
        })
        .collect()
}

/// Network with exact CPTs learned from random tree-shaped data.
pub fn random_network(seed: u64, max_nodes: usize, max_card: u32) -> ChowLiuNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes = rng.gen_range(1..=max_nodes);
    let n_rows = rng.gen_range(30..400);
    let rows = random_rows(&mut rng, nodes, max_card, n_rows);
    let table = int_table("R", &rows);
    learn_table_network("R#0", &table, BTreeMap::new(), &ModelParams::exact(max_card as usize))
}

/// Per-node code weights used by both the oracle and the engine.
pub type Evidence = BTreeMap<usize, Vec<f64>>;

fn code_of(net: &ChowLiuNetwork, node: usize, class: usize) -> u32 {
    match net.domain(node).class(class) {
        ValueClass::Code(c) => c,
        ValueClass::Range(_) => panic!("oracle expects exact domains"),
    }
}

/// Random hard or soft evidence on a random subset of nodes.
pub fn random_evidence(rng: &mut ChaCha8Rng, net: &ChowLiuNetwork, soft: bool) -> Evidence {
    let mut ev = Evidence::new();
    for node in 0..net.nodes.len() {
        if !rng.gen_bool(0.5) {
            continue;
        }
        let card = net.domain(node).classes();
        let top = (0..card).map(|c| code_of(net, node, c)).max().unwrap_or(0) as usize + 1;
        let w: Vec<f64> = if soft {
            (0..top)
                .map(|_| {
                    if rng.gen_bool(0.3) {
                        0.0
                    } else {
                        rng.gen_range(0.0..1.0)
                    }
                })
                .collect()
        } else {
            let lo = rng.gen_range(0..top);
            let hi = rng.gen_range(lo..top);
            (0..top)
                .map(|c| if (lo..=hi).contains(&c) { 1.0 } else { 0.0 })
                .collect()
        };
        ev.insert(node, w);
    }
    ev
}

pub fn conditions_for(ev: &Evidence) -> Conditions {
    let mut c = Conditions::new();
    for (&node, w) in ev {
        let segments = w
            .iter()
            .enumerate()
            .map(|(code, &weight)| Segment {
                lo: code as u32,
                hi: code as u32,
                weight,
            })
            .collect();
        c.restrict(node, CodeWeights::from_segments(segments));
    }
    c
}

pub fn region_conditions(regions: &[(usize, Region)]) -> Conditions {
    let mut c = Conditions::new();
    for (n, r) in regions {
        c.restrict_region(*n, r);
    }
    c
}

/// `P(target = class ∧ evidence)` per class by enumerating the full joint.
pub fn enumerate_joint(net: &ChowLiuNetwork, target: Option<usize>, ev: &Evidence) -> (Vec<f64>, f64) {
    let n = net.nodes.len();
    let cards: Vec<usize> = (0..n).map(|i| net.domain(i).classes()).collect();
    let t = target.unwrap_or(net.root);
    let mut per_class = vec![0.0; cards[t]];
    let mut total = 0.0;
    let mut assignment = vec![0usize; n];
    loop {
        let mut p = 1.0;
        for i in 0..n {
            let parent_class = net.nodes[i].parent.map_or(0, |q| assignment[q]);
            p *= net.nodes[i].cpt.prob(parent_class, assignment[i]);
            if let Some(w) = ev.get(&i) {
                p *= w.get(code_of(net, i, assignment[i]) as usize).copied().unwrap_or(0.0);
            }
        }
        per_class[assignment[t]] += p;
        total += p;
        let mut i = 0;
        while i < n {
            assignment[i] += 1;
            if assignment[i] < cards[i] {
                break;
            }
            assignment[i] = 0;
            i += 1;
        }
        if i == n {
            break;
        }
    }
    (per_class, total)
}

/// Mutual information from co-occurrence counts.
pub fn oracle_mi(x: &[u32], y: &[u32]) -> f64 {
    let n = x.len() as f64;
    let mut joint: HashMap<(u32, u32), f64> = HashMap::new();
    let mut px: HashMap<u32, f64> = HashMap::new();
    let mut py: HashMap<u32, f64> = HashMap::new();
    for (&a, &b) in x.iter().zip(y) {
        *joint.entry((a, b)).or_default() += 1.0;
        *px.entry(a).or_default() += 1.0;
        *py.entry(b).or_default() += 1.0;
    }
    joint
        .iter()
        .map(|(&(a, b), &c)| (c / n) * ((c * n) / (px[&a] * py[&b])).ln())
        .sum()
}

/// Every labelled spanning tree on `n` vertices, via Prüfer sequences.
pub fn all_spanning_trees(n: usize) -> Vec<Vec<(usize, usize)>> {
    match n {
        0 | 1 => return vec![Vec::new()],
        2 => return vec![vec![(0, 1)]],
        _ => {}
    }
    let len = n - 2;
    let mut out = Vec::new();
    let mut seq = vec![0usize; len];
    loop {
        let mut degree = vec![1usize; n];
        for &s in &seq {
            degree[s] += 1;
        }
        let mut edges = Vec::with_capacity(n - 1);
        for &s in &seq {
            let leaf = (0..n).find(|&v| degree[v] == 1).unwrap();
            edges.push((leaf, s));
            degree[leaf] -= 1;
            degree[s] -= 1;
        }
        let rest: Vec<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
        edges.push((rest[0], rest[1]));
        out.push(edges);
        let mut i = 0;
        while i < len {
            seq[i] += 1;
            if seq[i] < n {
                break;
            }
            seq[i] = 0;
            i += 1;
        }
        if i == len {
            break;
        }
    }
    out
}
