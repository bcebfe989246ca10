//! Network topology: devices, base stations and edge servers (plus the
//! implicit cloud), the links between them and every dimension derived from
//! the node counts.
//!
//! Global orderings used throughout the crate:
//!
//! * nodes: all devices, then all base stations, then all servers;
//! * action vector: node blocks in node order (see [`crate::model`] for the
//!   layout inside a block);
//! * constraint vector: device blocks `[g_d0, g_d1..g_dB]`, then base station
//!   blocks `[g_b0, g_b1..g_bS]`, then one `g_s0` per server.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeKind {
    Device,
    BaseStation,
    Server,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId {
    pub kind: NodeKind,
    pub index: usize,
}

impl NodeId {
    pub const fn device(index: usize) -> Self {
        NodeId {
            kind: NodeKind::Device,
            index,
        }
    }

    pub const fn base_station(index: usize) -> Self {
        NodeId {
            kind: NodeKind::BaseStation,
            index,
        }
    }

    pub const fn server(index: usize) -> Self {
        NodeId {
            kind: NodeKind::Server,
            index,
        }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = match self.kind {
            NodeKind::Device => 'd',
            NodeKind::BaseStation => 'b',
            NodeKind::Server => 's',
        };
        write!(f, "{p}{}", self.index)
    }
}

/// A static edge network. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    num_devices: usize,
    num_bs: usize,
    num_servers: usize,
    /// `D x B`, row major: device may offload to base station.
    device_bs: Vec<bool>,
    /// `B x S`, row major: base station may forward to server.
    bs_server: Vec<bool>,
    /// `S x S`, row major, diagonal unused: server may reroute to server.
    server_server: Vec<bool>,
}

/// For every node, the nodes whose variables it needs (`required`) and the
/// nodes that need its variables (`dependents`). Indexed by node position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CouplingSets {
    pub required: Vec<Vec<NodeId>>,
    pub dependents: Vec<Vec<NodeId>>,
}

impl Topology {
    /// Fully connected topology between consecutive layers.
    pub fn full(num_devices: usize, num_bs: usize, num_servers: usize) -> Result<Self> {
        if num_devices == 0 || num_bs == 0 || num_servers == 0 {
            return Err(Error::InvalidTopology(format!(
                "every node kind needs at least one node (got D={num_devices}, B={num_bs}, S={num_servers})"
            )));
        }
        let mut server_server = vec![true; num_servers * num_servers];
        for s in 0..num_servers {
            server_server[s * num_servers + s] = false;
        }
        Ok(Topology {
            num_devices,
            num_bs,
            num_servers,
            device_bs: vec![true; num_devices * num_bs],
            bs_server: vec![true; num_bs * num_servers],
            server_server,
        })
    }

    /// Removes the link `from -> to`. Only links between consecutive layers
    /// (and between distinct servers) exist.
    pub fn remove_link(&mut self, from: NodeId, to: NodeId) -> Result<()> {
        self.check_node(from)?;
        self.check_node(to)?;
        match (from.kind, to.kind) {
            (NodeKind::Device, NodeKind::BaseStation) => {
                self.device_bs[from.index * self.num_bs + to.index] = false
            }
            (NodeKind::BaseStation, NodeKind::Server) => {
                self.bs_server[from.index * self.num_servers + to.index] = false
            }
            (NodeKind::Server, NodeKind::Server) if from.index != to.index => {
                self.server_server[from.index * self.num_servers + to.index] = false
            }
            _ => {
                return Err(Error::InvalidTopology(format!(
                    "there is no link {from} -> {to}"
                )))
            }
        }
        Ok(())
    }

    fn check_node(&self, n: NodeId) -> Result<()> {
        if n.index < self.count(n.kind) {
            Ok(())
        } else {
            Err(Error::InvalidTopology(format!("node {n} does not exist")))
        }
    }

    pub fn num_devices(&self) -> usize {
        self.num_devices
    }

    pub fn num_bs(&self) -> usize {
        self.num_bs
    }

    pub fn num_servers(&self) -> usize {
        self.num_servers
    }

    pub fn count(&self, kind: NodeKind) -> usize {
        match kind {
            NodeKind::Device => self.num_devices,
            NodeKind::BaseStation => self.num_bs,
            NodeKind::Server => self.num_servers,
        }
    }

    pub fn has_device_link(&self, d: usize, b: usize) -> bool {
        self.device_bs[d * self.num_bs + b]
    }

    pub fn has_bs_link(&self, b: usize, s: usize) -> bool {
        self.bs_server[b * self.num_servers + s]
    }

    /// `false` on the diagonal: local processing is not a link.
    pub fn has_server_link(&self, s: usize, to: usize) -> bool {
        self.server_server[s * self.num_servers + to]
    }

    pub fn is_fully_connected(&self) -> bool {
        self.device_bs.iter().chain(&self.bs_server).all(|&l| l)
            && (0..self.num_servers)
                .all(|s| (0..self.num_servers).all(|t| s == t || self.has_server_link(s, t)))
    }

    /// N = D + B + S.
    pub fn num_nodes(&self) -> usize {
        self.num_devices + self.num_bs + self.num_servers
    }

    /// V = D(2B+1) + B(2S+1) + S(S+1).
    pub fn dim(&self) -> usize {
        let (d, b, s) = (self.num_devices, self.num_bs, self.num_servers);
        d * (2 * b + 1) + b * (2 * s + 1) + s * (s + 1)
    }

    /// M = D(B+1) + B(S+1) + S.
    pub fn num_constraints(&self) -> usize {
        let (d, b, s) = (self.num_devices, self.num_bs, self.num_servers);
        d * (b + 1) + b * (s + 1) + s
    }

    /// E: number of active links. `DB + BS + S(S-1)` when fully connected.
    pub fn num_edges(&self) -> usize {
        let ss = (0..self.num_servers)
            .flat_map(|s| (0..self.num_servers).map(move |t| (s, t)))
            .filter(|&(s, t)| s != t && self.has_server_link(s, t))
            .count();
        self.device_bs.iter().filter(|&&l| l).count()
            + self.bs_server.iter().filter(|&&l| l).count()
            + ss
    }

    /// K = 2D(3B+1) + 2B(3S+1) + 2S(2S-1).
    pub fn k_constant(&self) -> usize {
        let (d, b, s) = (self.num_devices, self.num_bs, self.num_servers);
        2 * d * (3 * b + 1) + 2 * b * (3 * s + 1) + 2 * s * (2 * s - 1)
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.num_devices)
            .map(NodeId::device)
            .chain((0..self.num_bs).map(NodeId::base_station))
            .chain((0..self.num_servers).map(NodeId::server))
    }

    /// Ordinal of `n` in the global node order.
    pub fn position(&self, n: NodeId) -> usize {
        match n.kind {
            NodeKind::Device => n.index,
            NodeKind::BaseStation => self.num_devices + n.index,
            NodeKind::Server => self.num_devices + self.num_bs + n.index,
        }
    }

    pub fn node_at(&self, position: usize) -> NodeId {
        let (d, b) = (self.num_devices, self.num_bs);
        if position < d {
            NodeId::device(position)
        } else if position < d + b {
            NodeId::base_station(position - d)
        } else {
            NodeId::server(position - d - b)
        }
    }

    /// Length of a node's action block: 2B+1, 2S+1 or S+1.
    pub fn action_len(&self, kind: NodeKind) -> usize {
        match kind {
            NodeKind::Device => 2 * self.num_bs + 1,
            NodeKind::BaseStation => 2 * self.num_servers + 1,
            NodeKind::Server => self.num_servers + 1,
        }
    }

    /// Offset of a node's block in the flattened action vector.
    pub fn action_offset(&self, n: NodeId) -> usize {
        let dev = self.action_len(NodeKind::Device);
        let bs = self.action_len(NodeKind::BaseStation);
        let srv = self.action_len(NodeKind::Server);
        match n.kind {
            NodeKind::Device => n.index * dev,
            NodeKind::BaseStation => self.num_devices * dev + n.index * bs,
            NodeKind::Server => self.num_devices * dev + self.num_bs * bs + n.index * srv,
        }
    }

    pub fn action_range(&self, n: NodeId) -> std::ops::Range<usize> {
        let o = self.action_offset(n);
        o..o + self.action_len(n.kind)
    }

    /// Number of constraints owned by a node: B+1, S+1 or 1.
    pub fn local_constraint_count(&self, kind: NodeKind) -> usize {
        match kind {
            NodeKind::Device => self.num_bs + 1,
            NodeKind::BaseStation => self.num_servers + 1,
            NodeKind::Server => 1,
        }
    }

    pub fn constraint_offset(&self, n: NodeId) -> usize {
        let dev = self.local_constraint_count(NodeKind::Device);
        let bs = self.local_constraint_count(NodeKind::BaseStation);
        match n.kind {
            NodeKind::Device => n.index * dev,
            NodeKind::BaseStation => self.num_devices * dev + n.index * bs,
            NodeKind::Server => self.num_devices * dev + self.num_bs * bs + n.index,
        }
    }

    pub fn constraint_range(&self, n: NodeId) -> std::ops::Range<usize> {
        let o = self.constraint_offset(n);
        o..o + self.local_constraint_count(n.kind)
    }

    /// Global position of the `local`-th constraint of node `n`. Local index 0
    /// is always the node's flow conservation constraint.
    pub fn constraint_index(&self, n: NodeId, local: usize) -> Result<usize> {
        self.check_node(n).map_err(|_| Error::ConstraintIndex {
            node: n.to_string(),
            local,
            count: 0,
        })?;
        let count = self.local_constraint_count(n.kind);
        if local >= count {
            return Err(Error::ConstraintIndex {
                node: n.to_string(),
                local,
                count,
            });
        }
        Ok(self.constraint_offset(n) + local)
    }

    /// Which node owns global constraint `m`, and its local index.
    pub fn constraint_owner(&self, m: usize) -> (NodeId, usize) {
        let dev = self.local_constraint_count(NodeKind::Device);
        let bs = self.local_constraint_count(NodeKind::BaseStation);
        let dev_total = self.num_devices * dev;
        let bs_total = self.num_bs * bs;
        if m < dev_total {
            (NodeId::device(m / dev), m % dev)
        } else if m < dev_total + bs_total {
            let r = m - dev_total;
            (NodeId::base_station(r / bs), r % bs)
        } else {
            (NodeId::server(m - dev_total - bs_total), 0)
        }
    }

    /// Nodes whose variables appear in `n`'s flow constraint.
    pub fn required_by(&self, n: NodeId) -> Vec<NodeId> {
        match n.kind {
            NodeKind::Device => Vec::new(),
            NodeKind::BaseStation => (0..self.num_devices)
                .filter(|&d| self.has_device_link(d, n.index))
                .map(NodeId::device)
                .collect(),
            NodeKind::Server => (0..self.num_bs)
                .filter(|&b| self.has_bs_link(b, n.index))
                .map(NodeId::base_station)
                .chain(
                    (0..self.num_servers)
                        .filter(|&s| s != n.index && self.has_server_link(s, n.index))
                        .map(NodeId::server),
                )
                .collect(),
        }
    }

    /// Nodes whose flow constraint contains one of `n`'s variables.
    pub fn receivers_of(&self, n: NodeId) -> Vec<NodeId> {
        match n.kind {
            NodeKind::Device => (0..self.num_bs)
                .filter(|&b| self.has_device_link(n.index, b))
                .map(NodeId::base_station)
                .collect(),
            NodeKind::BaseStation => (0..self.num_servers)
                .filter(|&s| self.has_bs_link(n.index, s))
                .map(NodeId::server)
                .collect(),
            NodeKind::Server => (0..self.num_servers)
                .filter(|&s| s != n.index && self.has_server_link(n.index, s))
                .map(NodeId::server)
                .collect(),
        }
    }

    pub fn coupling_sets(&self) -> CouplingSets {
        CouplingSets {
            required: self.nodes().map(|n| self.required_by(n)).collect(),
            dependents: self.nodes().map(|n| self.receivers_of(n)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_dimensions_for_two_of_each() {
        let t = Topology::full(2, 2, 2).unwrap();
        assert_eq!(t.num_nodes(), 6);
        // V = 2*5 + 2*5 + 2*3, M = 2*3 + 2*3 + 2, E = 4 + 4 + 2, K = 28 + 28 + 12
        assert_eq!(t.dim(), 26);
        assert_eq!(t.num_constraints(), 14);
        assert_eq!(t.num_edges(), 10);
        assert_eq!(t.k_constant(), 68);
    }

    #[test]
    fn zero_counts_are_rejected() {
        assert!(matches!(
            Topology::full(0, 1, 1),
            Err(Error::InvalidTopology(_))
        ));
        assert!(Topology::full(1, 0, 1).is_err());
        assert!(Topology::full(1, 1, 0).is_err());
    }

    #[test]
    fn smallest_instance() {
        let t = Topology::full(1, 1, 1).unwrap();
        assert_eq!(t.num_nodes(), 3);
        assert_eq!(
            t.required_by(NodeId::server(0)),
            vec![NodeId::base_station(0)]
        );
        assert_eq!(t.num_edges(), 2);
    }

    #[test]
    fn coupling_sets_match_flow_constraints() {
        let t = Topology::full(2, 2, 2).unwrap();
        let c = t.coupling_sets();
        let pos = |n| t.position(n);
        assert_eq!(
            c.required[pos(NodeId::base_station(0))],
            vec![NodeId::device(0), NodeId::device(1)]
        );
        assert_eq!(
            c.required[pos(NodeId::server(0))],
            vec![
                NodeId::base_station(0),
                NodeId::base_station(1),
                NodeId::server(1)
            ]
        );
        for d in 0..2 {
            assert!(c.required[pos(NodeId::device(d))].is_empty());
        }
    }

    #[test]
    fn coupling_sets_are_inverse_consistent() {
        for (d, b, s) in [(1, 1, 1), (2, 3, 1), (3, 2, 4)] {
            let mut t = Topology::full(d, b, s).unwrap();
            if s > 1 {
                t.remove_link(NodeId::server(0), NodeId::server(1)).unwrap();
            }
            t.remove_link(NodeId::device(0), NodeId::base_station(0))
                .unwrap();
            let c = t.coupling_sets();
            for v in t.nodes() {
                for n in t.nodes() {
                    let needs = c.required[t.position(v)].contains(&n);
                    let feeds = c.dependents[t.position(n)].contains(&v);
                    assert_eq!(needs, feeds, "{v} / {n}");
                }
            }
        }
    }

    #[test]
    fn constraint_index_examples() {
        let t = Topology::full(2, 2, 2).unwrap();
        assert_eq!(t.constraint_index(NodeId::device(0), 0).unwrap(), 0);
        assert_eq!(t.constraint_index(NodeId::base_station(0), 0).unwrap(), 6);
        assert_eq!(t.constraint_index(NodeId::server(1), 0).unwrap(), 13);
        assert!(t.constraint_index(NodeId::server(0), 1).is_err());
        assert!(t.constraint_index(NodeId::device(0), 3).is_err());
        assert!(t.constraint_index(NodeId::device(2), 0).is_err());
    }

    #[test]
    fn constraint_index_is_a_bijection_on_small_grids() {
        for d in 1..=4 {
            for b in 1..=4 {
                for s in 1..=4 {
                    let t = Topology::full(d, b, s).unwrap();
                    let n = d + b + s;
                    let m_blocks: usize = t.nodes().map(|v| t.local_constraint_count(v.kind)).sum();
                    assert_eq!(m_blocks, d * (b + 1) + b * (s + 1) + s);
                    assert_eq!(m_blocks, b * (d + s) + n);
                    assert_eq!(m_blocks, t.num_constraints());

                    let mut seen = vec![false; m_blocks];
                    for v in t.nodes() {
                        for l in 0..t.local_constraint_count(v.kind) {
                            let m = t.constraint_index(v, l).unwrap();
                            assert!(!seen[m]);
                            seen[m] = true;
                            assert_eq!(t.constraint_owner(m), (v, l));
                        }
                    }
                    assert!(seen.iter().all(|&x| x));

                    let v_blocks: usize = t.nodes().map(|v| t.action_len(v.kind)).sum();
                    assert_eq!(v_blocks, t.dim());
                    let last = t.node_at(n - 1);
                    assert_eq!(t.action_range(last).end, t.dim());
                }
            }
        }
    }

    #[test]
    fn removing_links_updates_edge_count() {
        let mut t = Topology::full(2, 2, 2).unwrap();
        t.remove_link(NodeId::device(1), NodeId::base_station(0))
            .unwrap();
        assert_eq!(t.num_edges(), 9);
        assert!(!t.is_fully_connected());
        assert!(t.remove_link(NodeId::server(0), NodeId::server(0)).is_err());
        assert!(t.remove_link(NodeId::device(0), NodeId::server(0)).is_err());
    }
}
