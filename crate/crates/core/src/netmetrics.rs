//! Structural metrics of a monthly reply graph with cohort labels.
//!
//! Every metric returns `None` when it is undefined for the cell; a zero is
//! always a measured zero.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::cohorts::CohortLabel;
use crate::events::{CommunityRef, MonthKey};
use crate::graphs::MonthlyGraph;
use crate::stats::nearest_rank;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("negative value {0} in degree sequence")]
    NegativeValue(f64),
    #[error("percentile {0} outside (0, 1)")]
    BadPercentile(f64),
    #[error("node {0} has no label entry")]
    MissingLabel(String),
}

/// A named metric value for one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricValue {
    pub name: String,
    pub value: Option<f64>,
    pub month: MonthKey,
    pub community: CommunityRef,
}

/// Number of distinct neighbours per node; isolated nodes map to 0.
pub fn degree_sequence(graph: &MonthlyGraph) -> BTreeMap<&str, usize> {
    let mut deg: BTreeMap<&str, usize> = graph.nodes().iter().map(|n| (n.as_str(), 0)).collect();
    for (a, b) in graph.edges() {
        *deg.get_mut(a.as_str()).expect("endpoint is a node") += 1;
        *deg.get_mut(b.as_str()).expect("endpoint is a node") += 1;
    }
    deg
}

/// Population Gini coefficient, `sum_i sum_j |x_i - x_j| / (2 n^2 mean)`,
/// evaluated in O(n log n) over the sorted values.
pub fn degree_gini(values: &[f64]) -> Result<Option<f64>, MetricError> {
    if let Some(&neg) = values.iter().find(|v| **v < 0.0 || v.is_nan()) {
        return Err(MetricError::NegativeValue(neg));
    }
    let n = values.len();
    let total: f64 = values.iter().sum();
    if n == 0 || total <= 0.0 {
        return Ok(None);
    }
    let mut sorted = Vec::from(values);
    sorted.sort_by(f64::total_cmp);
    let nf = n as f64;
    let weighted: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, x)| (2.0 * (i as f64 + 1.0) - nf - 1.0) * x)
        .sum();
    Ok(Some(weighted / (nf * total)))
}

fn gini_of_counts(counts: impl Iterator<Item = usize>) -> Option<f64> {
    let values: Vec<f64> = counts.map(|d| d as f64).collect();
    degree_gini(&values).expect("degrees are non-negative")
}

/// Pearson correlation of endpoint degrees over both orderings of every
/// edge. Integer moment sums keep constant-degree graphs exactly at zero
/// variance.
pub fn degree_assortativity(graph: &MonthlyGraph) -> Option<f64> {
    let ix = graph.indexed();
    if ix.edges.len() < 2 {
        return None;
    }
    let deg = ix.degrees();
    let (mut s1, mut s2, mut cross) = (0i128, 0i128, 0i128);
    for &(a, b) in &ix.edges {
        let (da, db) = (deg[a] as i128, deg[b] as i128);
        s1 += da + db;
        s2 += da * da + db * db;
        cross += 2 * da * db;
    }
    let m = 2 * ix.edges.len() as i128;
    let var = m * s2 - s1 * s1;
    if var == 0 {
        return None;
    }
    let cov = m * cross - s1 * s1;
    Some(cov as f64 / var as f64)
}

/// A graph together with a label for every node (`None` = unlabeled).
#[derive(Debug, Clone)]
pub struct CohortedGraph {
    pub graph: MonthlyGraph,
    pub labels: BTreeMap<String, Option<CohortLabel>>,
}

impl CohortedGraph {
    pub fn new(graph: MonthlyGraph, labels: BTreeMap<String, Option<CohortLabel>>) -> Result<Self, MetricError> {
        if let Some(missing) = graph.nodes().iter().find(|n| !labels.contains_key(*n)) {
            return Err(MetricError::MissingLabel(missing.clone()));
        }
        Ok(Self { graph, labels })
    }

    fn view(&self) -> LabeledView {
        let ix = self.graph.indexed();
        let labels: Vec<Option<CohortLabel>> = ix.names.iter().map(|n| self.labels[*n]).collect();
        let degree = ix.degrees();
        let mut labeled_degree = alloc::vec![0usize; labels.len()];
        let (mut external, mut internal) = (0usize, 0usize);
        for &(a, b) in &ix.edges {
            if let (Some(la), Some(lb)) = (labels[a], labels[b]) {
                labeled_degree[a] += 1;
                labeled_degree[b] += 1;
                if la == lb {
                    internal += 1;
                } else {
                    external += 1;
                }
            }
        }
        LabeledView {
            labels,
            degree,
            labeled_degree,
            external,
            internal,
        }
    }
}

/// Per-node arrays derived once per cell.
struct LabeledView {
    labels: Vec<Option<CohortLabel>>,
    degree: Vec<usize>,
    /// Degree counting only edges whose endpoints are both labeled.
    labeled_degree: Vec<usize>,
    external: usize,
    internal: usize,
}

impl LabeledView {
    fn cohort(&self, which: CohortLabel) -> impl Iterator<Item = usize> + '_ {
        (0..self.labels.len()).filter(move |&i| self.labels[i] == Some(which))
    }

    fn ei(&self) -> Option<f64> {
        let total = self.external + self.internal;
        (total > 0).then(|| (self.external as f64 - self.internal as f64) / total as f64)
    }

    fn hub_rate(&self, percentile: f64) -> Option<f64> {
        let existing: Vec<usize> = self.cohort(CohortLabel::Existing).map(|i| self.labeled_degree[i]).collect();
        let newcomers: Vec<usize> = self.cohort(CohortLabel::Newcomer).map(|i| self.labeled_degree[i]).collect();
        hub_rate_from_degrees(existing, &newcomers, percentile)
    }

    fn share_ratio(&self) -> Option<f64> {
        let newcomers = self.cohort(CohortLabel::Newcomer).count();
        let existing = self.cohort(CohortLabel::Existing).count();
        let newcomer_degree: usize = self.cohort(CohortLabel::Newcomer).map(|i| self.labeled_degree[i]).sum();
        let total_degree: usize = self.labeled_degree.iter().sum();
        share_ratio_from_counts(newcomer_degree, total_degree, newcomers, newcomers + existing)
    }

    fn existing_gini(&self) -> Option<f64> {
        gini_of_counts(self.cohort(CohortLabel::Existing).map(|i| self.degree[i]))
    }
}

/// Hub-rate kernel on raw degree lists.
pub fn hub_rate_from_degrees(mut existing: Vec<usize>, newcomers: &[usize], percentile: f64) -> Option<f64> {
    if existing.is_empty() || newcomers.is_empty() {
        return None;
    }
    existing.sort_unstable();
    let threshold = nearest_rank(&existing, percentile)?;
    let above = newcomers.iter().filter(|&&d| d > threshold).count();
    Some(above as f64 / newcomers.len() as f64)
}

/// Degree-share kernel: `(newcomer_degree / total_degree) / (newcomers / population)`.
pub fn share_ratio_from_counts(
    newcomer_degree: usize,
    total_degree: usize,
    newcomers: usize,
    population: usize,
) -> Option<f64> {
    if newcomers == 0 || newcomers == population || total_degree == 0 {
        return None;
    }
    let degree_share = newcomer_degree as f64 / total_degree as f64;
    let population_share = newcomers as f64 / population as f64;
    Some(degree_share / population_share)
}

/// Krackhardt E-I index `(E - I) / (E + I)` over edges with two labeled
/// endpoints.
pub fn ei_index(cg: &CohortedGraph) -> Option<f64> {
    cg.view().ei()
}

fn check_percentile(percentile: f64) -> Result<(), MetricError> {
    if percentile > 0.0 && percentile < 1.0 {
        Ok(())
    } else {
        Err(MetricError::BadPercentile(percentile))
    }
}

/// Fraction of newcomers whose degree strictly exceeds the nearest-rank
/// `percentile` of existing users' degrees.
pub fn newcomer_hub_rate(cg: &CohortedGraph, percentile: f64) -> Result<Option<f64>, MetricError> {
    check_percentile(percentile)?;
    Ok(cg.view().hub_rate(percentile))
}

/// Newcomers' share of total degree divided by their share of labeled nodes.
pub fn degree_share_ratio(cg: &CohortedGraph) -> Option<f64> {
    cg.view().share_ratio()
}

/// Degree Gini restricted to existing users.
pub fn existing_gini(cg: &CohortedGraph) -> Option<f64> {
    cg.view().existing_gini()
}

/// Every structural metric of one cell, computed from a single view.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuralMetrics {
    pub nodes: usize,
    pub edges: usize,
    pub degree_gini: Option<f64>,
    pub existing_gini: Option<f64>,
    pub degree_assortativity: Option<f64>,
    pub ei_index: Option<f64>,
    /// `(hub percentile, rate)` in the order requested.
    pub hub_rates: Vec<(f64, Option<f64>)>,
    pub degree_share_ratio: Option<f64>,
}

pub fn structural_metrics(cg: &CohortedGraph, hub_percentiles: &[f64]) -> Result<StructuralMetrics, MetricError> {
    for &p in hub_percentiles {
        check_percentile(p)?;
    }
    let view = cg.view();
    Ok(StructuralMetrics {
        nodes: cg.graph.node_count(),
        edges: cg.graph.edge_count(),
        degree_gini: gini_of_counts(view.degree.iter().copied()),
        existing_gini: view.existing_gini(),
        degree_assortativity: degree_assortativity(&cg.graph),
        ei_index: view.ei(),
        hub_rates: hub_percentiles.iter().map(|&p| (p, view.hub_rate(p))).collect(),
        degree_share_ratio: view.share_ratio(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::Platform;
    use alloc::format;
    use alloc::string::ToString;
    use CohortLabel::{Existing, Newcomer};

    fn graph(edges: &[(&str, &str)], isolated: &[&str]) -> MonthlyGraph {
        let mut g = MonthlyGraph::new(CommunityRef::new(Platform::Receiver, "c"), MonthKey::new(2018, 10).unwrap());
        for (a, b) in edges {
            g.add_edge(a, b);
        }
        for n in isolated {
            g.add_node(n);
        }
        g
    }

    fn cohorted(g: MonthlyGraph, labels: &[(&str, Option<CohortLabel>)]) -> CohortedGraph {
        let map = labels.iter().map(|(n, l)| (n.to_string(), *l)).collect();
        CohortedGraph::new(g, map).unwrap()
    }

    fn star() -> MonthlyGraph {
        graph(&[("u1", "u2"), ("u1", "u3"), ("u1", "u4"), ("u1", "u5")], &[])
    }

    #[test]
    fn degree_sequences() {
        let s = star();
        let deg = degree_sequence(&s);
        assert_eq!(deg["u1"], 4);
        assert!(["u2", "u3", "u4", "u5"].iter().all(|u| deg[u] == 1));
        assert!(degree_sequence(&graph(&[], &[])).is_empty());
        let t = graph(&[("a", "b"), ("b", "c"), ("a", "c")], &[]);
        let tri = degree_sequence(&t);
        assert!(tri.values().all(|&d| d == 2));
    }

    #[test]
    fn gini_examples() {
        assert_eq!(degree_gini(&[3.0, 3.0, 3.0, 3.0]), Ok(Some(0.0)));
        assert!((degree_gini(&[0.0, 0.0, 0.0, 10.0]).unwrap().unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(degree_gini(&[]), Ok(None));
        assert_eq!(degree_gini(&[0.0, 0.0]), Ok(None));
        assert_eq!(degree_gini(&[1.0, -1.0]), Err(MetricError::NegativeValue(-1.0)));
    }

    #[test]
    fn assortativity_examples() {
        assert!((degree_assortativity(&star()).unwrap() + 1.0).abs() < 1e-15);
        let c5 = graph(&[("a", "b"), ("b", "c"), ("c", "d"), ("d", "e"), ("e", "a")], &[]);
        assert_eq!(degree_assortativity(&c5), None);
        assert_eq!(degree_assortativity(&graph(&[("a", "b"), ("c", "d")], &[])), None);
        assert_eq!(degree_assortativity(&graph(&[("a", "b")], &[])), None);
    }

    fn four_edge_graph(cross: usize) -> CohortedGraph {
        // Edges e_i = (x_i, y_i); the first `cross` connect differing cohorts.
        let mut edges = Vec::new();
        let mut labels = Vec::new();
        for i in 0..4 {
            edges.push((format!("x{i}"), format!("y{i}")));
            labels.push((format!("x{i}"), Some(Existing)));
            labels.push((format!("y{i}"), Some(if i < cross { Newcomer } else { Existing })));
        }
        let e: Vec<(&str, &str)> = edges.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
        let l: Vec<(&str, Option<CohortLabel>)> = labels.iter().map(|(n, l)| (n.as_str(), *l)).collect();
        cohorted(graph(&e, &[]), &l)
    }

    #[test]
    fn ei_examples() {
        assert_eq!(ei_index(&four_edge_graph(0)), Some(-1.0));
        assert_eq!(ei_index(&four_edge_graph(2)), Some(0.0));
        assert_eq!(ei_index(&four_edge_graph(3)), Some(0.5));
        let g = cohorted(graph(&[], &["a"]), &[("a", Some(Newcomer))]);
        assert_eq!(ei_index(&g), None);
    }

    #[test]
    fn ei_skips_unlabeled_endpoints() {
        let g = cohorted(
            graph(&[("a", "b"), ("a", "c")], &[]),
            &[("a", Some(Existing)), ("b", Some(Newcomer)), ("c", None)],
        );
        assert_eq!(ei_index(&g), Some(1.0));
    }

    #[test]
    fn hub_rate_nearest_rank_example() {
        let existing: Vec<usize> = (1..=10).collect();
        let rate = hub_rate_from_degrees(existing, &[10, 5, 1], 0.9).unwrap();
        assert!((rate - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(hub_rate_from_degrees(alloc::vec![], &[1], 0.9), None);
        assert_eq!(hub_rate_from_degrees(alloc::vec![1], &[], 0.9), None);
    }

    #[test]
    fn hub_rate_on_graph() {
        // Existing hub e0 with 9 leaves; newcomer n0 with 10 leaves.
        let mut edges = Vec::new();
        let mut labels = Vec::new();
        for i in 0..9 {
            edges.push(("e0".to_string(), format!("a{i}")));
            labels.push((format!("a{i}"), Some(Existing)));
        }
        for i in 0..10 {
            edges.push(("n0".to_string(), format!("b{i}")));
            labels.push((format!("b{i}"), Some(Newcomer)));
        }
        labels.push(("e0".to_string(), Some(Existing)));
        labels.push(("n0".to_string(), Some(Newcomer)));
        let e: Vec<(&str, &str)> = edges.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
        let l: Vec<(&str, Option<CohortLabel>)> = labels.iter().map(|(n, l)| (n.as_str(), *l)).collect();
        let g = cohorted(graph(&e, &[]), &l);
        // Existing degrees: nine 1s and a 9 -> 90th percentile rank 9 is 1.
        // Newcomers: n0 (10) and ten leaves (1) -> 1 of 11 above.
        let rate = newcomer_hub_rate(&g, 0.9).unwrap().unwrap();
        assert!((rate - 1.0 / 11.0).abs() < 1e-15);
        // Top 5%: rank 10 -> threshold 9, still only n0.
        assert!((newcomer_hub_rate(&g, 0.95).unwrap().unwrap() - 1.0 / 11.0).abs() < 1e-15);
    }

    #[test]
    fn hub_rate_edge_cases() {
        let g = cohorted(
            graph(&[("e1", "e2")], &["n1", "n2"]),
            &[("e1", Some(Existing)), ("e2", Some(Existing)), ("n1", Some(Newcomer)), ("n2", Some(Newcomer))],
        );
        assert_eq!(newcomer_hub_rate(&g, 0.9), Ok(Some(0.0)));
        let only_new = cohorted(graph(&[("n1", "n2")], &[]), &[("n1", Some(Newcomer)), ("n2", Some(Newcomer))]);
        assert_eq!(newcomer_hub_rate(&only_new, 0.9), Ok(None));
        assert_eq!(newcomer_hub_rate(&g, 1.0), Err(MetricError::BadPercentile(1.0)));
        assert_eq!(newcomer_hub_rate(&g, 0.0), Err(MetricError::BadPercentile(0.0)));
    }

    #[test]
    fn share_ratio_examples() {
        assert_eq!(share_ratio_from_counts(3, 12, 2, 4), Some(0.5));
        assert_eq!(share_ratio_from_counts(0, 0, 2, 4), None);
        assert_eq!(share_ratio_from_counts(3, 12, 0, 4), None);

        let sq = cohorted(
            graph(&[("a", "b"), ("b", "c"), ("c", "d"), ("d", "a")], &[]),
            &[("a", Some(Newcomer)), ("b", Some(Existing)), ("c", Some(Newcomer)), ("d", Some(Existing))],
        );
        assert_eq!(degree_share_ratio(&sq), Some(1.0));
        let none_new = cohorted(graph(&[("a", "b")], &[]), &[("a", Some(Existing)), ("b", Some(Existing))]);
        assert_eq!(degree_share_ratio(&none_new), None);
    }

    #[test]
    fn share_ratio_ignores_unlabeled_edges() {
        let g = cohorted(
            graph(&[("n1", "e1"), ("n2", "e1"), ("n2", "e2"), ("e1", "e2"), ("e2", "x")], &[]),
            &[
                ("n1", Some(Newcomer)),
                ("n2", Some(Newcomer)),
                ("e1", Some(Existing)),
                ("e2", Some(Existing)),
                ("x", None),
            ],
        );
        // Labeled degrees n1=1 n2=2 e1=3 e2=2: share 3/8 over population 2/4.
        assert!((degree_share_ratio(&g).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn existing_gini_examples() {
        let eq = cohorted(graph(&[("a", "b")], &[]), &[("a", Some(Existing)), ("b", Some(Existing))]);
        assert_eq!(existing_gini(&eq), Some(0.0));
        // Existing degrees [0, 0, 0, 10] via a hub with ten newcomer leaves.
        let mut edges = Vec::new();
        let mut labels = alloc::vec![
            ("hub".to_string(), Some(Existing)),
            ("e1".to_string(), Some(Existing)),
            ("e2".to_string(), Some(Existing)),
            ("e3".to_string(), Some(Existing)),
        ];
        for i in 0..10 {
            edges.push(("hub".to_string(), format!("n{i}")));
            labels.push((format!("n{i}"), Some(Newcomer)));
        }
        let e: Vec<(&str, &str)> = edges.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
        let l: Vec<(&str, Option<CohortLabel>)> = labels.iter().map(|(n, l)| (n.as_str(), *l)).collect();
        let g = cohorted(graph(&e, &["e1", "e2", "e3"]), &l);
        assert!((existing_gini(&g).unwrap() - 0.75).abs() < 1e-15);
        let none = cohorted(graph(&[("a", "b")], &[]), &[("a", Some(Newcomer)), ("b", Some(Newcomer))]);
        assert_eq!(existing_gini(&none), None);
    }

    #[test]
    fn missing_label_is_rejected() {
        let g = graph(&[("a", "b")], &[]);
        let labels = [("a".to_string(), Some(Existing))].into_iter().collect();
        assert_eq!(CohortedGraph::new(g, labels).unwrap_err(), MetricError::MissingLabel("b".to_string()));
    }

    #[test]
    fn structural_bundle_matches_individual_metrics() {
        let g = four_edge_graph(3);
        let m = structural_metrics(&g, &[0.95, 0.9, 0.8]).unwrap();
        assert_eq!(m.ei_index, ei_index(&g));
        assert_eq!(m.degree_share_ratio, degree_share_ratio(&g));
        assert_eq!(m.hub_rates[1].1, newcomer_hub_rate(&g, 0.9).unwrap());
        assert_eq!(m.edges, 4);
        assert_eq!(m.nodes, 8);
    }
}
