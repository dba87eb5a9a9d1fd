//! Capacitated directed topologies, minimum-hop routing and the sparse
//! routing matrix.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type NodeId = usize;
pub type LinkId = usize;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TopologyError {
    #[error("link {link}: endpoint {node} is not a node of the topology")]
    InvalidEndpoint { link: LinkId, node: NodeId },
    #[error("link {link}: self-loop on node {node}")]
    SelfLoop { link: LinkId, node: NodeId },
    #[error("link {link}: capacity {capacity} must be finite and nonnegative")]
    InvalidCapacity { link: LinkId, capacity: f64 },
    #[error("capacity scaling needs at least one link with positive capacity")]
    ZeroCapacities,
    #[error("capacity bound {0} must be positive and finite")]
    InvalidCapBound(f64),
    #[error("no ordered node pair is connected")]
    NoConnectedPairs,
    #[error("sampled flow count must be at least 1")]
    InvalidFlowCount,
    #[error("flow {flow}: invalid endpoints {src} -> {dst}")]
    InvalidFlow { flow: usize, src: NodeId, dst: NodeId },
    #[error("flow {flow}: node {dst} is unreachable from node {src}")]
    Unreachable { flow: usize, src: NodeId, dst: NodeId },
    #[error("routing entry ({row}, {col}) lies outside a {rows}x{cols} matrix")]
    EntryOutOfRange { row: usize, col: usize, rows: usize, cols: usize },
    #[error("routing entry ({row}, {col}) = {value} is not in [0, 1]")]
    EntryValue { row: usize, col: usize, value: f64 },
    #[error("routing entry ({row}, {col}) is given twice")]
    DuplicateEntry { row: usize, col: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub id: LinkId,
    pub src: NodeId,
    pub dst: NodeId,
    pub capacity: f64,
}

/// A directed graph with dense node ids `0..n` and dense link ids `0..m`.
///
/// Nodes carry display names (the identifiers used in the source file);
/// everything else works on the integer ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    names: Vec<String>,
    links: Vec<Link>,
    // out-links of every node sorted by (head node, link id)
    adjacency: Vec<Vec<LinkId>>,
}

impl Topology {
    /// Builds a topology from `(src, dst, capacity)` triples. Link ids follow
    /// the order of `links`; nodes are named by their decimal id.
    pub fn new(node_count: usize, links: &[(NodeId, NodeId, f64)]) -> Result<Self, TopologyError> {
        let names = (0..node_count).map(|i| format!("{i}")).collect();
        Self::with_names(names, links)
    }

    pub fn with_names(
        names: Vec<String>,
        links: &[(NodeId, NodeId, f64)],
    ) -> Result<Self, TopologyError> {
        let n = names.len();
        let mut out = Vec::with_capacity(links.len());
        for (id, &(src, dst, capacity)) in links.iter().enumerate() {
            for node in [src, dst] {
                if node >= n {
                    return Err(TopologyError::InvalidEndpoint { link: id, node });
                }
            }
            if src == dst {
                return Err(TopologyError::SelfLoop { link: id, node: src });
            }
            if !capacity.is_finite() || capacity < 0.0 {
                return Err(TopologyError::InvalidCapacity { link: id, capacity });
            }
            out.push(Link { id, src, dst, capacity });
        }
        let mut adjacency = vec![Vec::new(); n];
        for link in &out {
            adjacency[link.src].push(link.id);
        }
        for row in &mut adjacency {
            row.sort_by_key(|&l| (out[l].dst, l));
        }
        Ok(Self { names, links: out, adjacency })
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn node_name(&self, node: NodeId) -> &str {
        &self.names[node]
    }

    pub fn node_by_name(&self, name: &str) -> Option<NodeId> {
        self.names.iter().position(|n| n == name)
    }

    pub fn capacities(&self) -> Vec<f64> {
        self.links.iter().map(|l| l.capacity).collect()
    }

    /// Multiplies every capacity by `cap_max / max_e c_e`.
    pub fn scale_capacities(&self, cap_max: f64) -> Result<Self, TopologyError> {
        if !(cap_max.is_finite() && cap_max > 0.0) {
            return Err(TopologyError::InvalidCapBound(cap_max));
        }
        let largest = self.links.iter().map(|l| l.capacity).fold(0.0, f64::max);
        if largest <= 0.0 {
            return Err(TopologyError::ZeroCapacities);
        }
        let factor = cap_max / largest;
        let mut scaled = self.clone();
        for link in &mut scaled.links {
            // the largest link maps to cap_max exactly
            link.capacity = if link.capacity == largest { cap_max } else { link.capacity * factor };
        }
        Ok(scaled)
    }

    /// Hop distance from every node to `dst` (usize::MAX when unreachable).
    fn hops_to(&self, dst: NodeId) -> Vec<usize> {
        let n = self.node_count();
        let mut incoming = vec![Vec::new(); n];
        for link in &self.links {
            incoming[link.dst].push(link.src);
        }
        let mut dist = vec![usize::MAX; n];
        let mut queue = VecDeque::new();
        dist[dst] = 0;
        queue.push_back(dst);
        while let Some(v) = queue.pop_front() {
            for &u in &incoming[v] {
                if dist[u] == usize::MAX {
                    dist[u] = dist[v] + 1;
                    queue.push_back(u);
                }
            }
        }
        dist
    }

    fn path_with_hops(&self, src: NodeId, dst: NodeId, hops: &[usize]) -> Option<Vec<LinkId>> {
        if hops[src] == usize::MAX {
            return None;
        }
        let mut path = Vec::with_capacity(hops[src]);
        let mut at = src;
        while at != dst {
            // adjacency is sorted by head node, so the first link that gets
            // one hop closer gives the lexicographically smallest sequence
            let next = self.adjacency[at]
                .iter()
                .copied()
                .find(|&l| hops[self.links[l].dst] == hops[at] - 1)?;
            path.push(next);
            at = self.links[next].dst;
        }
        Some(path)
    }

    /// Minimum-hop directed path from `src` to `dst` as link ids.
    ///
    /// Among equal-length paths the one with the lexicographically smallest
    /// node sequence wins; parallel links are resolved by smallest link id.
    /// Returns `None` when `dst` is unreachable.
    ///
    /// # Panics
    /// If `src` or `dst` is not a node id.
    pub fn shortest_path(&self, src: NodeId, dst: NodeId) -> Option<Vec<LinkId>> {
        assert!(src < self.node_count() && dst < self.node_count(), "node id out of range");
        if src == dst {
            return Some(Vec::new());
        }
        self.path_with_hops(src, dst, &self.hops_to(dst))
    }

    /// Ordered `(src, dst)` pairs with `src != dst` and `dst` reachable.
    pub fn connected_pairs(&self) -> Vec<(NodeId, NodeId)> {
        let n = self.node_count();
        let reach: Vec<Vec<usize>> = (0..n).map(|dst| self.hops_to(dst)).collect();
        let mut pairs = Vec::new();
        for src in 0..n {
            for (dst, hops) in reach.iter().enumerate() {
                if src != dst && hops[src] != usize::MAX {
                    pairs.push((src, dst));
                }
            }
        }
        pairs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Flow {
    pub id: usize,
    pub src: NodeId,
    pub dst: NodeId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowMode {
    /// One flow per connected ordered node pair.
    AllPairs,
    /// `count` connected pairs drawn uniformly with replacement.
    Sampled { count: usize, seed: u64 },
}

pub fn generate_flows(topology: &Topology, mode: FlowMode) -> Result<Vec<Flow>, TopologyError> {
    let pairs = topology.connected_pairs();
    if pairs.is_empty() {
        return Err(TopologyError::NoConnectedPairs);
    }
    let chosen: Vec<(NodeId, NodeId)> = match mode {
        FlowMode::AllPairs => pairs,
        FlowMode::Sampled { count, seed } => {
            if count == 0 {
                return Err(TopologyError::InvalidFlowCount);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..count).map(|_| pairs[rng.gen_range(0..pairs.len())]).collect()
        }
    };
    Ok(chosen
        .into_iter()
        .enumerate()
        .map(|(id, (src, dst))| Flow { id, src, dst })
        .collect())
}

/// Sparse `|E| x d` link-by-flow matrix stored row-major (one row per link).
#[derive(Debug, Clone, PartialEq)]
pub struct RoutingMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    row_norms_sq: Vec<f64>,
}

impl RoutingMatrix {
    /// Builds a matrix from `(row, col, value)` triples. Values must lie in
    /// `[0, 1]`; zeros are dropped.
    pub fn from_entries(
        rows: usize,
        cols: usize,
        entries: &[(usize, usize, f64)],
    ) -> Result<Self, TopologyError> {
        let mut kept: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
        for &(row, col, value) in entries {
            if row >= rows || col >= cols {
                return Err(TopologyError::EntryOutOfRange { row, col, rows, cols });
            }
            if !(0.0..=1.0).contains(&value) {
                return Err(TopologyError::EntryValue { row, col, value });
            }
            kept.push((row, col, value));
        }
        kept.sort_by_key(|&(r, c, _)| (r, c));
        for pair in kept.windows(2) {
            if pair[0].0 == pair[1].0 && pair[0].1 == pair[1].1 {
                return Err(TopologyError::DuplicateEntry { row: pair[0].0, col: pair[0].1 });
            }
        }
        kept.retain(|&(_, _, v)| v > 0.0);

        let mut row_ptr = vec![0usize; rows + 1];
        for &(r, _, _) in &kept {
            row_ptr[r + 1] += 1;
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        let col_idx = kept.iter().map(|e| e.1).collect();
        let values: Vec<f64> = kept.iter().map(|e| e.2).collect();
        let row_norms_sq = (0..rows)
            .map(|r| values[row_ptr[r]..row_ptr[r + 1]].iter().map(|v| v * v).sum())
            .collect();
        Ok(Self { rows, cols, row_ptr, col_idx, values, row_norms_sq })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Nonzeros of row `e` as `(flow, value)` pairs in increasing flow order.
    pub fn row(&self, e: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[e]..self.row_ptr[e + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    /// Cached `‖A_e‖²`.
    pub fn row_norm_sq(&self, e: usize) -> f64 {
        self.row_norms_sq[e]
    }

    pub fn row_norms_sq(&self) -> &[f64] {
        &self.row_norms_sq
    }

    /// `Σ_e A_{e,s}` for every flow `s`.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for (&c, &v) in self.col_idx.iter().zip(&self.values) {
            sums[c] += v;
        }
        sums
    }

    /// Links carried by flow `s` in increasing link order.
    pub fn column_support(&self, s: usize) -> Vec<usize> {
        (0..self.rows).filter(|&e| self.row(e).any(|(c, _)| c == s)).collect()
    }

    /// `out = A x`. Slice lengths are the caller's responsibility.
    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (e, slot) in out.iter_mut().enumerate() {
            let span = self.row_ptr[e]..self.row_ptr[e + 1];
            *slot = self.col_idx[span.clone()]
                .iter()
                .zip(&self.values[span])
                .map(|(&c, &v)| v * x[c])
                .sum();
        }
    }

    /// `out += Aᵀ w`.
    pub fn transpose_mul_add(&self, w: &[f64], out: &mut [f64]) {
        debug_assert_eq!(w.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (e, &we) in w.iter().enumerate() {
            if we == 0.0 {
                continue;
            }
            let span = self.row_ptr[e]..self.row_ptr[e + 1];
            for (&c, &v) in self.col_idx[span.clone()].iter().zip(&self.values[span]) {
                out[c] += we * v;
            }
        }
    }
}

/// 0/1 routing matrix with `A[e][s] = 1` iff link `e` lies on the shortest
/// path of flow `s`.
pub fn build_routing_matrix(
    topology: &Topology,
    flows: &[Flow],
) -> Result<RoutingMatrix, TopologyError> {
    let n = topology.node_count();
    let mut hops_cache: Vec<Option<Vec<usize>>> = vec![None; n];
    let mut entries = Vec::new();
    for (col, flow) in flows.iter().enumerate() {
        if flow.src >= n || flow.dst >= n || flow.src == flow.dst {
            return Err(TopologyError::InvalidFlow { flow: col, src: flow.src, dst: flow.dst });
        }
        let hops = hops_cache[flow.dst].get_or_insert_with(|| topology.hops_to(flow.dst));
        let path = topology.path_with_hops(flow.src, flow.dst, hops).ok_or(
            TopologyError::Unreachable { flow: col, src: flow.src, dst: flow.dst },
        )?;
        entries.extend(path.into_iter().map(|link| (link, col, 1.0)));
    }
    RoutingMatrix::from_entries(topology.link_count(), flows.len(), &entries)
}
