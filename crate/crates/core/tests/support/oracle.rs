//! Brute-force reference implementations of the structural metrics. They
//! work straight off the edge list with no shared helpers from the crate.
#![allow(dead_code)]

use std::collections::BTreeMap;

use cohortnet_core::cohorts::CohortLabel;
use cohortnet_core::graphs::MonthlyGraph;
use cohortnet_core::netmetrics::CohortedGraph;
use cohortnet_core::{CommunityRef, MonthKey, Platform};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;

/// Mean absolute difference over all ordered pairs, over twice the mean.
pub fn gini(values: &[f64]) -> Option<f64> {
    let n = values.len() as f64;
    let total: f64 = values.iter().sum();
    if values.is_empty() || total == 0.0 {
        return None;
    }
    let mut diff = 0.0;
    for a in values {
        for b in values {
            diff += (a - b).abs();
        }
    }
    Some(diff / (2.0 * n * total))
}

fn degree_of(graph: &MonthlyGraph, node: &str) -> usize {
    graph.edges().iter().filter(|(a, b)| a == node || b == node).count()
}

pub fn degree_gini(graph: &MonthlyGraph) -> Option<f64> {
    let d: Vec<f64> = graph.nodes().iter().map(|n| degree_of(graph, n) as f64).collect();
    gini(&d)
}

/// Pearson correlation of degrees over both orientations of every edge.
pub fn assortativity(graph: &MonthlyGraph) -> Option<f64> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (a, b) in graph.edges() {
        let (da, db) = (degree_of(graph, a) as f64, degree_of(graph, b) as f64);
        xs.extend([da, db]);
        ys.extend([db, da]);
    }
    if xs.len() < 4 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let vx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let vy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if xs.iter().all(|x| *x == xs[0]) {
        return None;
    }
    Some(cov / (vx * vy).sqrt())
}

fn label(cg: &CohortedGraph, node: &str) -> Option<CohortLabel> {
    cg.labels[node]
}

pub fn ei_index(cg: &CohortedGraph) -> Option<f64> {
    let (mut e, mut i) = (0i64, 0i64);
    for (a, b) in cg.graph.edges() {
        match (label(cg, a), label(cg, b)) {
            (Some(x), Some(y)) if x == y => i += 1,
            (Some(_), Some(_)) => e += 1,
            _ => {}
        }
    }
    (e + i > 0).then(|| (e - i) as f64 / (e + i) as f64)
}

/// Degree counting only edges whose endpoints both carry a label.
fn labeled_degree(cg: &CohortedGraph, node: &str) -> usize {
    cg.graph
        .edges()
        .iter()
        .filter(|(a, b)| a == node || b == node)
        .filter(|(a, b)| label(cg, a).is_some() && label(cg, b).is_some())
        .count()
}

fn cohort(cg: &CohortedGraph, which: CohortLabel) -> Vec<&String> {
    cg.graph.nodes().iter().filter(|n| label(cg, n) == Some(which)).collect()
}

/// Smallest existing degree `v` with at least `p * n` existing degrees at or
/// below it.
pub fn hub_rate(cg: &CohortedGraph, p: f64) -> Option<f64> {
    let existing: Vec<usize> = cohort(cg, CohortLabel::Existing).iter().map(|n| labeled_degree(cg, n)).collect();
    let newcomers: Vec<usize> = cohort(cg, CohortLabel::Newcomer).iter().map(|n| labeled_degree(cg, n)).collect();
    if existing.is_empty() || newcomers.is_empty() {
        return None;
    }
    let need = p * existing.len() as f64 - 1e-9;
    let threshold = (0..=*existing.iter().max().unwrap())
        .find(|&v| existing.iter().filter(|&&d| d <= v).count() as f64 >= need)
        .unwrap();
    let hubs = newcomers.iter().filter(|&&d| d > threshold).count();
    Some(hubs as f64 / newcomers.len() as f64)
}

pub fn share_ratio(cg: &CohortedGraph) -> Option<f64> {
    let new = cohort(cg, CohortLabel::Newcomer);
    let old = cohort(cg, CohortLabel::Existing);
    let new_deg: usize = new.iter().map(|n| labeled_degree(cg, n)).sum();
    let old_deg: usize = old.iter().map(|n| labeled_degree(cg, n)).sum();
    let total = new_deg + old_deg;
    if new.is_empty() || old.is_empty() || total == 0 {
        return None;
    }
    Some((new_deg as f64 / total as f64) / (new.len() as f64 / (new.len() + old.len()) as f64))
}

/// Random simple graph with random cohort labels (about 10% unlabeled).
pub fn random_graph(seed: u64, max_nodes: usize, max_edges: usize) -> CohortedGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=max_nodes);
    let target = rng.gen_range(1..=max_edges.min(n * (n - 1) / 2));
    let community = CommunityRef::new(Platform::Receiver, "oracle");
    let mut graph = MonthlyGraph::new(community, MonthKey::new(2020, 1).unwrap());
    let names: Vec<String> = (0..n).map(|i| format!("n{i:03}")).collect();
    for name in &names {
        graph.add_node(name);
    }
    // Skewed endpoint choice gives heavy-tailed degrees.
    let mut attempts = 0;
    while graph.edge_count() < target && attempts < target * 20 {
        attempts += 1;
        let a = (rng.gen::<f64>().powi(2) * n as f64) as usize;
        let b = rng.gen_range(0..n);
        graph.add_edge(&names[a.min(n - 1)], &names[b]);
    }
    let newcomer_share: f64 = rng.gen_range(0.1..0.9);
    let labels: BTreeMap<String, Option<CohortLabel>> = names
        .iter()
        .map(|name| {
            let l = if rng.gen_bool(0.1) {
                None
            } else if rng.gen_bool(newcomer_share) {
                Some(CohortLabel::Newcomer)
            } else {
                Some(CohortLabel::Existing)
            };
            (name.clone(), l)
        })
        .collect();
    CohortedGraph::new(graph, labels).unwrap()
}

pub fn close(a: Option<f64>, b: Option<f64>, tol: f64) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(x), Some(y)) => (x - y).abs() <= tol,
        _ => false,
    }
}
