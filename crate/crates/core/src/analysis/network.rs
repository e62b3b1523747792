//! The undirected user–user reply graph and its descriptors.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;

use crate::events::{AgentId, EventKind, EventRecord, ItemId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Edge {
    pub u: AgentId,
    pub v: AgentId,
    pub raw_weight: u64,
    pub weight: f64,
}

/// Nodes are kept in ascending id order and addressed by index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InteractionGraph {
    nodes: Vec<AgentId>,
    index: HashMap<AgentId, usize>,
    adj: Vec<BTreeMap<usize, u64>>,
    max_raw: u64,
}

impl InteractionGraph {
    /// Builds a graph from raw edge counts. Self-loops are dropped and
    /// repeated pairs accumulate.
    pub fn from_edges(
        nodes: impl IntoIterator<Item = AgentId>,
        edges: impl IntoIterator<Item = (AgentId, AgentId, u64)>,
    ) -> Self {
        let edges: Vec<_> = edges.into_iter().filter(|(u, v, w)| u != v && *w > 0).collect();
        let set: BTreeSet<AgentId> = nodes
            .into_iter()
            .chain(edges.iter().flat_map(|&(u, v, _)| [u, v]))
            .collect();
        let nodes: Vec<AgentId> = set.into_iter().collect();
        let index: HashMap<AgentId, usize> = nodes.iter().enumerate().map(|(i, &a)| (a, i)).collect();
        let mut adj = vec![BTreeMap::new(); nodes.len()];
        for (u, v, w) in edges {
            let (i, j) = (index[&u], index[&v]);
            *adj[i].entry(j).or_insert(0) += w;
            *adj[j].entry(i).or_insert(0) += w;
        }
        let max_raw = adj.iter().flat_map(|m| m.values()).copied().max().unwrap_or(0);
        Self { nodes, index, adj, max_raw }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(BTreeMap::len).sum::<usize>() / 2
    }

    pub fn nodes(&self) -> &[AgentId] {
        &self.nodes
    }

    pub fn index_of(&self, agent: AgentId) -> Option<usize> {
        self.index.get(&agent).copied()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].len()
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.adj[i].keys().copied()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i].contains_key(&j)
    }

    pub fn raw_weight(&self, i: usize, j: usize) -> u64 {
        self.adj[i].get(&j).copied().unwrap_or(0)
    }

    /// Raw weight divided by the largest raw weight in the graph.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        if self.max_raw == 0 {
            return 0.0;
        }
        self.raw_weight(i, j) as f64 / self.max_raw as f64
    }

    pub fn weighted_degree(&self, i: usize) -> f64 {
        self.adj[i].keys().map(|&j| self.weight(i, j)).sum()
    }

    /// Each undirected edge once, `u < v`, in node order.
    pub fn edges(&self) -> Vec<Edge> {
        let mut out = Vec::new();
        for (i, m) in self.adj.iter().enumerate() {
            for &j in m.keys().filter(|&&j| j > i) {
                out.push(Edge {
                    u: self.nodes[i],
                    v: self.nodes[j],
                    raw_weight: self.raw_weight(i, j),
                    weight: self.weight(i, j),
                });
            }
        }
        out
    }

    /// Node-induced subgraph; weights are renormalized within it.
    pub fn subgraph(&self, keep: &[usize]) -> InteractionGraph {
        let set: BTreeSet<usize> = keep.iter().copied().collect();
        let mut edges = Vec::new();
        for &i in &set {
            for (&j, &w) in &self.adj[i] {
                if j > i && set.contains(&j) {
                    edges.push((self.nodes[i], self.nodes[j], w));
                }
            }
        }
        InteractionGraph::from_edges(set.iter().map(|&i| self.nodes[i]), edges)
    }

    /// Connected components as sorted index lists, largest first; equal sizes
    /// are ordered by their smallest index.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.nodes.len()];
        let mut comps = Vec::new();
        for start in 0..self.nodes.len() {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut stack = vec![start];
            let mut comp = Vec::new();
            while let Some(i) = stack.pop() {
                comp.push(i);
                for j in self.neighbors(i) {
                    if !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
        comps
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() <= 1
    }
}

/// One edge per comment between its author and the author of the item it
/// replies to. Every post or comment author is a node.
pub fn build_reply_graph(events: &[EventRecord]) -> InteractionGraph {
    let mut author_of: HashMap<ItemId, AgentId> = HashMap::new();
    for e in events {
        let item = match e.kind {
            EventKind::Post => e.post_id,
            k if k.is_comment() => e.comment_id,
            _ => None,
        };
        if let Some(item) = item {
            author_of.insert(item, e.agent);
        }
    }
    let authors: Vec<AgentId> = author_of.values().copied().collect();
    let edges: Vec<(AgentId, AgentId, u64)> = events
        .iter()
        .filter(|e| e.kind.is_comment())
        .filter_map(|e| {
            let parent = author_of.get(&e.parent_id?)?;
            Some((e.agent, *parent, 1))
        })
        .collect();
    InteractionGraph::from_edges(authors, edges)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphDescriptors {
    pub nodes: usize,
    pub edges: usize,
    pub density: f64,
    pub avg_degree: f64,
    pub weighted_avg_degree: f64,
    pub avg_weighted_clustering: f64,
    pub lcc_nodes: usize,
    pub lcc_share: f64,
}

/// `c_u = Σ (ŵ_uv ŵ_uw ŵ_vw)^(1/3) / (k_u (k_u - 1))` over ordered neighbor
/// pairs; 0 below degree 2.
pub fn weighted_clustering(g: &InteractionGraph, u: usize) -> f64 {
    let k = g.degree(u);
    if k < 2 {
        return 0.0;
    }
    let nbrs: Vec<usize> = g.neighbors(u).collect();
    let mut total = 0.0;
    for (a, &v) in nbrs.iter().enumerate() {
        for &w in &nbrs[a + 1..] {
            if g.has_edge(v, w) {
                total += 2.0 * (g.weight(u, v) * g.weight(u, w) * g.weight(v, w)).cbrt();
            }
        }
    }
    total / (k * (k - 1)) as f64
}

pub fn descriptors(g: &InteractionGraph) -> GraphDescriptors {
    let n = g.node_count();
    if n == 0 {
        return GraphDescriptors {
            nodes: 0,
            edges: 0,
            density: 0.0,
            avg_degree: 0.0,
            weighted_avg_degree: 0.0,
            avg_weighted_clustering: 0.0,
            lcc_nodes: 0,
            lcc_share: 0.0,
        };
    }
    let e = g.edge_count();
    let nf = n as f64;
    let lcc_nodes = g.components().first().map_or(0, Vec::len);
    GraphDescriptors {
        nodes: n,
        edges: e,
        density: if n > 1 { 2.0 * e as f64 / (nf * (nf - 1.0)) } else { 0.0 },
        avg_degree: 2.0 * e as f64 / nf,
        weighted_avg_degree: (0..n).map(|i| g.weighted_degree(i)).sum::<f64>() / nf,
        avg_weighted_clustering: (0..n).map(|i| weighted_clustering(g, i)).sum::<f64>() / nf,
        lcc_nodes,
        lcc_share: lcc_nodes as f64 / nf,
    }
}

/// The largest connected component and its share of all nodes.
pub fn largest_component(g: &InteractionGraph) -> (InteractionGraph, f64) {
    match g.components().first() {
        None => (InteractionGraph::default(), 0.0),
        Some(c) => (g.subgraph(c), c.len() as f64 / g.node_count() as f64),
    }
}

/// `(degree, node count)` ascending, isolated nodes included.
pub fn degree_histogram(g: &InteractionGraph) -> Vec<(usize, usize)> {
    let mut h = BTreeMap::new();
    for i in 0..g.node_count() {
        *h.entry(g.degree(i)).or_insert(0) += 1;
    }
    h.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a(i: u64) -> AgentId {
        AgentId(i)
    }

    fn graph(edges: &[(u64, u64, u64)]) -> InteractionGraph {
        InteractionGraph::from_edges([], edges.iter().map(|&(u, v, w)| (a(u), a(v), w)))
    }

    #[test]
    fn normalized_weights() {
        let g = graph(&[(1, 2, 2), (3, 2, 1)]);
        let e = g.edges();
        assert_eq!(e.len(), 2);
        assert_eq!((e[0].u, e[0].v, e[0].raw_weight, e[0].weight), (a(1), a(2), 2, 1.0));
        assert_eq!((e[1].u, e[1].v, e[1].raw_weight, e[1].weight), (a(2), a(3), 1, 0.5));
    }

    #[test]
    fn self_loops_dropped() {
        let g = graph(&[(1, 1, 3)]);
        assert_eq!(g.edge_count(), 0);
        assert_eq!(g.node_count(), 0);
    }

    #[test]
    fn triangle_and_path_clustering() {
        let t = graph(&[(1, 2, 1), (2, 3, 1), (1, 3, 1)]);
        assert!((descriptors(&t).avg_weighted_clustering - 1.0).abs() < 1e-12);
        let p = graph(&[(1, 2, 1), (2, 3, 1)]);
        assert_eq!(descriptors(&p).avg_weighted_clustering, 0.0);
    }

    #[test]
    fn components_and_share() {
        let g = graph(&[(1, 2, 1), (2, 3, 1), (3, 4, 1), (8, 9, 1)]);
        let (lcc, share) = largest_component(&g);
        assert_eq!(lcc.node_count(), 4);
        assert!((share - 4.0 / 6.0).abs() < 1e-12);
        assert_eq!(largest_component(&graph(&[(1, 2, 1)])).1, 1.0);
    }

    #[test]
    fn star_histogram() {
        let g = graph(&[(0, 1, 1), (0, 2, 1), (0, 3, 1)]);
        assert_eq!(degree_histogram(&g), vec![(1, 3), (3, 1)]);
        assert!(degree_histogram(&InteractionGraph::default()).is_empty());
        let iso = InteractionGraph::from_edges([a(7)], []);
        assert_eq!(degree_histogram(&iso), vec![(0, 1)]);
    }

    #[test]
    fn empty_descriptors() {
        let d = descriptors(&InteractionGraph::default());
        assert_eq!(d.nodes, 0);
        assert_eq!(d.density, 0.0);
    }
}
