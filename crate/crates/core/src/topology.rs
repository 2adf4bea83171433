//! k-ary fat-tree construction and equal-cost path enumeration.
//!
//! Node ids are dense and assigned pod-major, layer-major: hosts first, then
//! edge switches, then aggregate switches, then core switches. Hosts are
//! 1-based in every external surface (CSV, JSON, CLI) and 0-based internally.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LinkId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Host,
    Edge,
    Aggregate,
    Core,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    /// Pod index for hosts, edge and aggregate switches; `None` for cores.
    pub pod: Option<u32>,
}

/// Full-duplex cable. Capacity applies independently to each direction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Link {
    pub a: NodeId,
    pub b: NodeId,
    pub capacity_bps: f64,
}

/// One directed traversal of a link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Hop {
    pub link: LinkId,
    pub from: NodeId,
    pub to: NodeId,
}

/// A loop-free host-to-host route, stored as the node sequence plus hops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    pub nodes: Vec<NodeId>,
    pub hops: Vec<Hop>,
}

impl Path {
    pub fn src(&self) -> NodeId {
        self.nodes[0]
    }

    pub fn dst(&self) -> NodeId {
        *self.nodes.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.hops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hops.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct FatTreeTopology {
    k: u32,
    capacity_bps: f64,
    nodes: Vec<Node>,
    links: Vec<Link>,
    adjacency: Vec<Vec<(NodeId, LinkId)>>,
}

impl FatTreeTopology {
    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn host_count(&self) -> usize {
        let k = self.k as usize;
        k * k * k / 4
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id.0 as usize]
    }

    pub fn link_capacity_bps(&self) -> f64 {
        self.capacity_bps
    }

    /// NIC capacity of a host, i.e. the capacity of its access link.
    pub fn nic_capacity_bps(&self) -> f64 {
        self.capacity_bps
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0 as usize]
    }

    pub fn is_host(&self, id: NodeId) -> bool {
        (id.0 as usize) < self.host_count()
    }

    /// Internal id of a 1-based host number.
    pub fn host(&self, number: u32) -> Result<NodeId> {
        if number == 0 || number as usize > self.host_count() {
            return Err(Error::invalid(format!(
                "host number {number} outside 1..={}",
                self.host_count()
            )));
        }
        Ok(NodeId(number - 1))
    }

    /// 1-based host number of an internal host id.
    pub fn host_number(&self, id: NodeId) -> u32 {
        debug_assert!(self.is_host(id));
        id.0 + 1
    }

    pub fn pod_of(&self, id: NodeId) -> Option<u32> {
        self.node(id).pod
    }

    /// Dense index of a directed link, usable as a rate-accounting key.
    #[inline]
    pub fn dlink(&self, hop: &Hop) -> usize {
        let idx = hop.link.0 as usize * 2;
        if hop.from == self.links[hop.link.0 as usize].a {
            idx
        } else {
            idx + 1
        }
    }

    pub fn dlink_count(&self) -> usize {
        self.links.len() * 2
    }

    pub fn neighbors(&self, id: NodeId) -> &[(NodeId, LinkId)] {
        &self.adjacency[id.0 as usize]
    }

    /// All shortest paths between two hosts, sorted by their node sequences.
    ///
    /// Inter-pod pairs yield (k/2)^2 paths, intra-pod pairs under different
    /// edge switches k/2, and same-edge pairs exactly one.
    pub fn equal_cost_paths(&self, src: NodeId, dst: NodeId) -> Result<Vec<Path>> {
        if src == dst {
            return Err(Error::invalid("equal-cost paths need distinct endpoints"));
        }
        if !self.is_host(src) || !self.is_host(dst) {
            return Err(Error::invalid("equal-cost paths are defined between hosts"));
        }

        let dist_from_src = self.bfs_distances(src);
        let dist_to_dst = self.bfs_distances(dst);
        let shortest = dist_from_src[dst.0 as usize];
        debug_assert!(shortest < u32::MAX, "fat tree must be connected");

        // Walk the shortest-path DAG: an edge (u, v) is on some shortest path
        // iff dist(src,u) + 1 + dist(v,dst) == dist(src,dst).
        let mut paths = Vec::new();
        let mut nodes = vec![src];
        let mut hops: Vec<Hop> = Vec::new();
        self.collect_shortest(
            src,
            dst,
            shortest,
            &dist_from_src,
            &dist_to_dst,
            &mut nodes,
            &mut hops,
            &mut paths,
        );
        paths.sort_by(|a, b| a.nodes.cmp(&b.nodes));
        Ok(paths)
    }

    fn bfs_distances(&self, from: NodeId) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.nodes.len()];
        dist[from.0 as usize] = 0;
        let mut queue = std::collections::VecDeque::from([from]);
        while let Some(u) = queue.pop_front() {
            let d = dist[u.0 as usize];
            for &(v, _) in self.neighbors(u) {
                if dist[v.0 as usize] == u32::MAX {
                    dist[v.0 as usize] = d + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    #[allow(clippy::too_many_arguments)]
    fn collect_shortest(
        &self,
        at: NodeId,
        dst: NodeId,
        total: u32,
        dist_from_src: &[u32],
        dist_to_dst: &[u32],
        nodes: &mut Vec<NodeId>,
        hops: &mut Vec<Hop>,
        out: &mut Vec<Path>,
    ) {
        if at == dst {
            out.push(Path { nodes: nodes.clone(), hops: hops.clone() });
            return;
        }
        let here = dist_from_src[at.0 as usize];
        for &(next, link) in self.neighbors(at) {
            if here + 1 + dist_to_dst[next.0 as usize] == total {
                nodes.push(next);
                hops.push(Hop { link, from: at, to: next });
                self.collect_shortest(next, dst, total, dist_from_src, dist_to_dst, nodes, hops, out);
                nodes.pop();
                hops.pop();
            }
        }
    }

    /// Debug dump of nodes and links; hosts reported with 1-based numbers.
    pub fn to_json(&self) -> serde_json::Value {
        let nodes: Vec<_> = self
            .nodes
            .iter()
            .map(|n| {
                serde_json::json!({
                    "id": n.id.0,
                    "kind": n.kind,
                    "pod": n.pod,
                    "host_number": if self.is_host(n.id) { Some(self.host_number(n.id)) } else { None },
                })
            })
            .collect();
        let links: Vec<_> = self
            .links
            .iter()
            .map(|l| serde_json::json!({"a": l.a.0, "b": l.b.0, "capacity_bps": l.capacity_bps}))
            .collect();
        serde_json::json!({"k": self.k, "nodes": nodes, "links": links})
    }
}

/// Build a k-ary fat tree with uniform link capacity.
///
/// Aggregate-to-core wiring follows the canonical port striping: aggregate
/// switch `a` of every pod connects to the k/2 core switches of core group `a`.
pub fn build_fat_tree(k: u32, link_capacity_bps: f64) -> Result<FatTreeTopology> {
    if k < 2 || k % 2 != 0 {
        return Err(Error::invalid(format!("fat-tree arity must be even and >= 2, got {k}")));
    }
    if !(link_capacity_bps > 0.0) {
        return Err(Error::invalid("link capacity must be positive"));
    }

    let half = (k / 2) as usize;
    let pods = k as usize;
    let n_hosts = pods * half * half;
    let n_edge = pods * half;
    let n_agg = pods * half;
    let n_core = half * half;

    let host_base = 0u32;
    let edge_base = n_hosts as u32;
    let agg_base = (n_hosts + n_edge) as u32;
    let core_base = (n_hosts + n_edge + n_agg) as u32;

    let mut nodes = Vec::with_capacity(n_hosts + n_edge + n_agg + n_core);
    for pod in 0..pods {
        for edge in 0..half {
            for h in 0..half {
                let id = NodeId(host_base + ((pod * half + edge) * half + h) as u32);
                nodes.push(Node { id, kind: NodeKind::Host, pod: Some(pod as u32) });
            }
        }
    }
    for pod in 0..pods {
        for edge in 0..half {
            let id = NodeId(edge_base + (pod * half + edge) as u32);
            nodes.push(Node { id, kind: NodeKind::Edge, pod: Some(pod as u32) });
        }
    }
    for pod in 0..pods {
        for agg in 0..half {
            let id = NodeId(agg_base + (pod * half + agg) as u32);
            nodes.push(Node { id, kind: NodeKind::Aggregate, pod: Some(pod as u32) });
        }
    }
    for group in 0..half {
        for i in 0..half {
            let id = NodeId(core_base + (group * half + i) as u32);
            nodes.push(Node { id, kind: NodeKind::Core, pod: None });
        }
    }

    let host_id = |pod: usize, edge: usize, h: usize| NodeId(host_base + ((pod * half + edge) * half + h) as u32);
    let edge_id = |pod: usize, edge: usize| NodeId(edge_base + (pod * half + edge) as u32);
    let agg_id = |pod: usize, agg: usize| NodeId(agg_base + (pod * half + agg) as u32);
    let core_id = |group: usize, i: usize| NodeId(core_base + (group * half + i) as u32);

    let mut links = Vec::with_capacity(3 * n_hosts);
    // Host access links, then edge-aggregate, then aggregate-core; each block
    // in pod-major order so link ids are deterministic.
    for pod in 0..pods {
        for edge in 0..half {
            for h in 0..half {
                links.push(Link { a: host_id(pod, edge, h), b: edge_id(pod, edge), capacity_bps: link_capacity_bps });
            }
        }
    }
    for pod in 0..pods {
        for edge in 0..half {
            for agg in 0..half {
                links.push(Link { a: edge_id(pod, edge), b: agg_id(pod, agg), capacity_bps: link_capacity_bps });
            }
        }
    }
    for pod in 0..pods {
        for agg in 0..half {
            for i in 0..half {
                links.push(Link { a: agg_id(pod, agg), b: core_id(agg, i), capacity_bps: link_capacity_bps });
            }
        }
    }

    let mut adjacency = vec![Vec::new(); nodes.len()];
    for (idx, link) in links.iter().enumerate() {
        adjacency[link.a.0 as usize].push((link.b, LinkId(idx as u32)));
        adjacency[link.b.0 as usize].push((link.a, LinkId(idx as u32)));
    }
    for adj in &mut adjacency {
        adj.sort_by_key(|&(n, _)| n);
    }

    Ok(FatTreeTopology { k, capacity_bps: link_capacity_bps, nodes, links, adjacency })
}
