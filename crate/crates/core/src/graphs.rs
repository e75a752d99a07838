//! Monthly comment-to-post reply networks.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::events::{month_of, CommunityRef, EventKind, InteractionEvent, MonthKey};

/// Author and location of a post.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PostRef {
    pub author: String,
    pub community: CommunityRef,
    pub timestamp: i64,
}

/// Post event id -> author; first occurrence of an id wins.
#[derive(Debug, Clone, Default)]
pub struct PostAuthorIndex {
    posts: BTreeMap<String, PostRef>,
}

impl PostAuthorIndex {
    pub fn get(&self, post_id: &str) -> Option<&PostRef> {
        self.posts.get(post_id)
    }

    pub fn len(&self) -> usize {
        self.posts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.posts.is_empty()
    }
}

pub fn build_post_index<'a>(events: impl IntoIterator<Item = &'a InteractionEvent>) -> PostAuthorIndex {
    let mut posts = BTreeMap::new();
    for ev in events {
        if ev.kind == EventKind::Post && !posts.contains_key(&ev.event_id) {
            posts.insert(
                ev.event_id.clone(),
                PostRef {
                    author: ev.user_id.clone(),
                    community: ev.community(),
                    timestamp: ev.timestamp,
                },
            );
        }
    }
    PostAuthorIndex { posts }
}

/// Undirected, unweighted user graph of one (community, month).
///
/// Edges are stored as `(a, b)` with `a < b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonthlyGraph {
    pub community: CommunityRef,
    pub month: MonthKey,
    nodes: BTreeSet<String>,
    edges: BTreeSet<(String, String)>,
}

impl MonthlyGraph {
    pub fn new(community: CommunityRef, month: MonthKey) -> Self {
        Self {
            community,
            month,
            nodes: BTreeSet::new(),
            edges: BTreeSet::new(),
        }
    }

    pub fn add_node(&mut self, user: &str) {
        if !self.nodes.contains(user) {
            self.nodes.insert(String::from(user));
        }
    }

    /// Adds `{a, b}`; self-pairs are ignored. Returns whether the edge is new.
    pub fn add_edge(&mut self, a: &str, b: &str) -> bool {
        if a == b {
            return false;
        }
        self.add_node(a);
        self.add_node(b);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        self.edges.insert((String::from(lo), String::from(hi)))
    }

    pub fn nodes(&self) -> &BTreeSet<String> {
        &self.nodes
    }

    pub fn edges(&self) -> &BTreeSet<(String, String)> {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// `u v` per line, lexicographically sorted.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for (a, b) in &self.edges {
            let _ = writeln!(out, "{a} {b}");
        }
        out
    }

    /// Dense view: nodes in sorted order, edges as index pairs.
    pub fn indexed(&self) -> IndexedGraph<'_> {
        let names: Vec<&str> = self.nodes.iter().map(String::as_str).collect();
        let edges = self
            .edges
            .iter()
            .map(|(a, b)| {
                let ia = names.binary_search(&a.as_str()).expect("edge endpoint is a node");
                let ib = names.binary_search(&b.as_str()).expect("edge endpoint is a node");
                (ia, ib)
            })
            .collect();
        IndexedGraph { names, edges }
    }
}

/// Index-based snapshot of a [`MonthlyGraph`] for metric kernels.
#[derive(Debug, Clone)]
pub struct IndexedGraph<'a> {
    pub names: Vec<&'a str>,
    pub edges: Vec<(usize, usize)>,
}

impl IndexedGraph<'_> {
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = alloc::vec![0usize; self.names.len()];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }
}

/// Comments that did not become edges.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GraphBuildStats {
    pub comments: usize,
    pub dangling_parent: usize,
    pub cross_community_parent: usize,
    pub self_reply: usize,
}

/// Builds the reply graph of `community` in `month`.
///
/// Events outside the cell are ignored, so callers may pass the whole corpus
/// or a pre-filtered slice.
pub fn build_monthly_graph<'a>(
    events: impl IntoIterator<Item = &'a InteractionEvent>,
    community: &CommunityRef,
    month: MonthKey,
    index: &PostAuthorIndex,
) -> (MonthlyGraph, GraphBuildStats) {
    let mut graph = MonthlyGraph::new(community.clone(), month);
    let mut stats = GraphBuildStats::default();
    for ev in events {
        if !ev.in_community(community) || month_of(ev.timestamp) != month {
            continue;
        }
        graph.add_node(&ev.user_id);
        if ev.kind != EventKind::Comment {
            continue;
        }
        stats.comments += 1;
        let Some(parent) = ev.parent_post_id.as_deref().and_then(|p| index.get(p)) else {
            stats.dangling_parent += 1;
            continue;
        };
        if parent.community != *community {
            stats.cross_community_parent += 1;
            continue;
        }
        if parent.author == ev.user_id {
            stats.self_reply += 1;
            continue;
        }
        graph.add_edge(&ev.user_id, &parent.author);
    }
    (graph, stats)
}
