//! Directed page hyperlink graph and bucketed hop-distance queries.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

/// Default cap on the number of nodes a single breadth-first search may visit.
pub const DEFAULT_EXPANSION_CAP: usize = 1_000_000;

const WITHIN: u32 = 3;

/// Minimum directed link distance from one page to another, bucketed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HopBucket {
    Within3,
    MoreThan3,
    Unreachable,
}

impl HopBucket {
    pub fn from_distance(distance: Option<u32>) -> Self {
        match distance {
            Some(d) if d <= WITHIN => HopBucket::Within3,
            Some(_) => HopBucket::MoreThan3,
            None => HopBucket::Unreachable,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            HopBucket::Within3 => "within_3",
            HopBucket::MoreThan3 => "more_than_3",
            HopBucket::Unreachable => "unreachable",
        }
    }
}

impl fmt::Display for HopBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Immutable directed graph over page ids.
///
/// Page ids are interned to dense `u32` node ids; adjacency lists are sorted
/// and deduplicated.
#[derive(Debug, Clone, Default)]
pub struct HopGraph {
    ids: HashMap<String, u32>,
    adjacency: Vec<Vec<u32>>,
    edges: usize,
}

impl HopGraph {
    pub fn from_edges<I, S>(edges: I) -> Self
    where
        I: IntoIterator<Item = (S, S)>,
        S: AsRef<str>,
    {
        let mut graph = HopGraph::default();
        for (src, dst) in edges {
            let s = graph.intern(src.as_ref());
            let d = graph.intern(dst.as_ref());
            graph.adjacency[s as usize].push(d);
        }
        for list in &mut graph.adjacency {
            list.sort_unstable();
            list.dedup();
        }
        graph.edges = graph.adjacency.iter().map(Vec::len).sum();
        graph
    }

    fn intern(&mut self, page: &str) -> u32 {
        if let Some(&id) = self.ids.get(page) {
            return id;
        }
        let id = self.adjacency.len() as u32;
        self.ids.insert(page.to_owned(), id);
        self.adjacency.push(Vec::new());
        id
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges
    }

    pub fn contains(&self, page: &str) -> bool {
        self.ids.contains_key(page)
    }

    pub(crate) fn node(&self, page: &str) -> Option<u32> {
        self.ids.get(page).copied()
    }

    pub(crate) fn successors(&self, node: u32) -> &[u32] {
        &self.adjacency[node as usize]
    }

    /// Bucketed hop distance from `p1` to `p2` with no memoization.
    pub fn hop_bucket(&self, p1: &str, p2: &str) -> HopBucket {
        let (Some(src), Some(dst)) = (self.node(p1), self.node(p2)) else {
            return HopBucket::Unreachable;
        };
        if src == dst {
            return HopBucket::Within3;
        }
        let reach = Reach::search(self, src, DEFAULT_EXPANSION_CAP, Some(dst));
        reach.bucket(dst)
    }
}

/// Distances discovered by one breadth-first search from a fixed source.
#[derive(Debug)]
struct Reach {
    dist: HashMap<u32, u32>,
    /// True when the frontier was exhausted, so unvisited nodes are unreachable.
    complete: bool,
}

impl Reach {
    /// Runs BFS from `src` until the frontier empties, `cap` nodes have been
    /// visited, or (when given) `stop_at` has been discovered.
    fn search(graph: &HopGraph, src: u32, cap: usize, stop_at: Option<u32>) -> Self {
        let mut dist = HashMap::new();
        dist.insert(src, 0u32);
        let mut queue = VecDeque::from([src]);
        while let Some(node) = queue.pop_front() {
            let d = dist[&node];
            for &next in graph.successors(node) {
                if dist.contains_key(&next) {
                    continue;
                }
                dist.insert(next, d + 1);
                if Some(next) == stop_at {
                    return Reach {
                        dist,
                        complete: false,
                    };
                }
                if dist.len() >= cap {
                    return Reach {
                        dist,
                        complete: false,
                    };
                }
                queue.push_back(next);
            }
        }
        Reach {
            dist,
            complete: true,
        }
    }

    fn bucket(&self, dst: u32) -> HopBucket {
        match self.dist.get(&dst) {
            Some(&d) => HopBucket::from_distance(Some(d)),
            None if self.complete => HopBucket::Unreachable,
            // Search budget exhausted without meeting the target.
            None => HopBucket::MoreThan3,
        }
    }
}

/// Memoizing query front-end over a [`HopGraph`].
///
/// Keeps the full BFS result for recently used sources. Not shared between
/// threads; create one per worker.
#[derive(Debug)]
pub struct HopQuery<'g> {
    graph: &'g HopGraph,
    cap: usize,
    max_cached: usize,
    cache: HashMap<u32, Reach>,
}

impl<'g> HopQuery<'g> {
    pub fn new(graph: &'g HopGraph) -> Self {
        Self::with_cap(graph, DEFAULT_EXPANSION_CAP)
    }

    pub fn with_cap(graph: &'g HopGraph, cap: usize) -> Self {
        HopQuery {
            graph,
            cap: cap.max(1),
            max_cached: 64,
            cache: HashMap::new(),
        }
    }

    pub fn graph(&self) -> &'g HopGraph {
        self.graph
    }

    pub fn hop_bucket(&mut self, p1: &str, p2: &str) -> HopBucket {
        let (Some(src), Some(dst)) = (self.graph.node(p1), self.graph.node(p2)) else {
            return HopBucket::Unreachable;
        };
        if src == dst {
            return HopBucket::Within3;
        }
        if !self.cache.contains_key(&src) {
            if self.cache.len() >= self.max_cached {
                self.cache.clear();
            }
            let reach = Reach::search(self.graph, src, self.cap, None);
            self.cache.insert(src, reach);
        }
        self.cache[&src].bucket(dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> HopGraph {
        HopGraph::from_edges([("A", "B"), ("B", "C"), ("C", "D"), ("D", "E")])
    }

    #[test]
    fn chain_distances() {
        let g = chain();
        assert_eq!(g.hop_bucket("A", "D"), HopBucket::Within3);
        assert_eq!(g.hop_bucket("A", "E"), HopBucket::MoreThan3);
        // directed: no way back
        assert_eq!(g.hop_bucket("D", "A"), HopBucket::Unreachable);
    }

    #[test]
    fn self_distance_is_zero() {
        let g = chain();
        assert_eq!(g.hop_bucket("C", "C"), HopBucket::Within3);
    }

    #[test]
    fn missing_nodes_are_unreachable() {
        let g = chain();
        assert_eq!(g.hop_bucket("A", "Z"), HopBucket::Unreachable);
        assert_eq!(g.hop_bucket("Z", "Z"), HopBucket::Unreachable);
    }

    #[test]
    fn disconnected_components() {
        let g = HopGraph::from_edges([("A", "B"), ("X", "Y")]);
        assert_eq!(g.hop_bucket("A", "Y"), HopBucket::Unreachable);
        let mut q = HopQuery::new(&g);
        assert_eq!(q.hop_bucket("A", "Y"), HopBucket::Unreachable);
        assert_eq!(q.hop_bucket("A", "B"), HopBucket::Within3);
    }

    #[test]
    fn capped_search_reports_far() {
        // a long chain with a tiny budget cannot prove unreachability
        let edges: Vec<(String, String)> = (0..20)
            .map(|i| (format!("n{i}"), format!("n{}", i + 1)))
            .collect();
        let g = HopGraph::from_edges(edges);
        let mut q = HopQuery::with_cap(&g, 5);
        assert_eq!(q.hop_bucket("n0", "n15"), HopBucket::MoreThan3);
        assert_eq!(q.hop_bucket("n0", "n2"), HopBucket::Within3);
    }

    #[test]
    fn duplicate_edges_collapse() {
        let g = HopGraph::from_edges([("A", "B"), ("A", "B")]);
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.node_count(), 2);
    }
}
