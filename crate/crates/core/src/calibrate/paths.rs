use std::collections::BTreeMap;

use indexmap::IndexSet;

use crate::event::{DeviceId, Event, LinkKey, Payload, Subtype};

/// Undirected multigraph over devices; parallel edges are kept.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Multigraph {
    nodes: Vec<DeviceId>,
    /// Edge list as node-index pairs.
    edges: Vec<(usize, usize)>,
}

impl Multigraph {
    pub fn new(nodes: impl IntoIterator<Item = DeviceId>) -> Multigraph {
        let mut nodes: Vec<DeviceId> = nodes.into_iter().collect();
        nodes.sort();
        nodes.dedup();
        Multigraph {
            nodes,
            edges: Vec::new(),
        }
    }

    pub fn add_edge(&mut self, a: DeviceId, b: DeviceId) -> bool {
        match (self.index_of(a), self.index_of(b)) {
            (Some(i), Some(j)) => {
                self.edges.push((i, j));
                true
            }
            _ => false,
        }
    }

    /// A chain of `hops` hops with `k` parallel edges per hop; devices are
    /// numbered `1..=hops+1`.
    pub fn series_chain(hops: usize, k: usize) -> Multigraph {
        let mut g = Multigraph::new((1..=hops as u64 + 1).map(DeviceId));
        for h in 0..hops {
            for _ in 0..k {
                g.edges.push((h, h + 1));
            }
        }
        g
    }

    /// The topology a path query would see after `events`: links added
    /// between live devices, minus those removed directly or along with an
    /// endpoint device.
    pub fn from_events(events: &[Event]) -> Multigraph {
        let mut devices: IndexSet<DeviceId> = IndexSet::new();
        let mut links: BTreeMap<String, LinkKey> = BTreeMap::new();
        for event in events {
            match (&event.payload, event.subtype) {
                (Payload::Device(d), Subtype::DeviceAdded) => {
                    devices.insert(d.id);
                }
                (Payload::Device(d), Subtype::DeviceRemoved) => {
                    devices.shift_remove(&d.id);
                    links.retain(|_, k| k.0.device != d.id && k.1.device != d.id);
                }
                (Payload::Link(l), subtype) => {
                    if !devices.contains(&l.src.device) || !devices.contains(&l.dst.device) {
                        continue;
                    }
                    let key = l.key();
                    if subtype == Subtype::LinkAdded {
                        links.insert(key.to_string(), key);
                    } else if subtype == Subtype::LinkRemoved {
                        links.remove(&key.to_string());
                    }
                }
                _ => {}
            }
        }
        let mut g = Multigraph::new(devices);
        for key in links.values() {
            g.add_edge(key.0.device, key.1.device);
        }
        g
    }

    pub fn index_of(&self, d: DeviceId) -> Option<usize> {
        self.nodes.binary_search(&d).ok()
    }

    pub fn nodes(&self) -> &[DeviceId] {
        &self.nodes
    }

    pub fn edges(&self) -> impl Iterator<Item = (DeviceId, DeviceId)> + '_ {
        self.edges
            .iter()
            .map(|&(i, j)| (self.nodes[i], self.nodes[j]))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Largest number of parallel edges between any device pair.
    pub fn max_multiplicity(&self) -> usize {
        let mut counts: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for &(i, j) in &self.edges {
            *counts.entry((i.min(j), i.max(j))).or_default() += 1;
        }
        counts.values().copied().max().unwrap_or(0)
    }

    /// Adjacency lists holding one entry per incident edge.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for &(i, j) in &self.edges {
            if i == j {
                continue;
            }
            adj[i].push(j);
            adj[j].push(i);
        }
        adj
    }
}

/// Number of simple paths from `src` to `dst`, counting paths that differ
/// only in which parallel edge they use as distinct. Zero if either device
/// is missing or they are the same device.
pub fn count_simple_paths(graph: &Multigraph, src: DeviceId, dst: DeviceId) -> u64 {
    let (Some(s), Some(t)) = (graph.index_of(src), graph.index_of(dst)) else {
        return 0;
    };
    if s == t {
        return 0;
    }
    let adj = graph.adjacency();
    let mut visited = vec![false; adj.len()];
    visited[s] = true;
    walk(&adj, s, t, &mut visited)
}

fn walk(adj: &[Vec<usize>], at: usize, dst: usize, visited: &mut [bool]) -> u64 {
    let mut total = 0u64;
    for &next in &adj[at] {
        if next == dst {
            total = total.saturating_add(1);
        } else if !visited[next] {
            visited[next] = true;
            total = total.saturating_add(walk(adj, next, dst, visited));
            visited[next] = false;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule() {
        let g = Multigraph::series_chain(3, 2);
        assert_eq!(count_simple_paths(&g, DeviceId(1), DeviceId(4)), 8);
        let g = Multigraph::series_chain(2, 3);
        assert_eq!(count_simple_paths(&g, DeviceId(1), DeviceId(3)), 9);
    }

    #[test]
    fn disconnected_and_degenerate() {
        let mut g = Multigraph::new([DeviceId(1), DeviceId(2), DeviceId(3)]);
        g.add_edge(DeviceId(1), DeviceId(2));
        assert_eq!(count_simple_paths(&g, DeviceId(1), DeviceId(3)), 0);
        assert_eq!(count_simple_paths(&g, DeviceId(1), DeviceId(1)), 0);
        assert_eq!(count_simple_paths(&g, DeviceId(1), DeviceId(9)), 0);
        assert!(!g.add_edge(DeviceId(1), DeviceId(9)));
    }

    #[test]
    fn triangle_with_parallel_edge() {
        let mut g = Multigraph::new([DeviceId(1), DeviceId(2), DeviceId(3)]);
        g.add_edge(DeviceId(1), DeviceId(2));
        g.add_edge(DeviceId(1), DeviceId(2));
        g.add_edge(DeviceId(2), DeviceId(3));
        g.add_edge(DeviceId(1), DeviceId(3));
        // Direct, or via 3; from 1 to 2: 2 direct + 1 via 3.
        assert_eq!(count_simple_paths(&g, DeviceId(1), DeviceId(2)), 3);
        assert_eq!(g.max_multiplicity(), 2);
    }
}
