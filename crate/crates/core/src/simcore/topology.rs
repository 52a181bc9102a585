use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::fmt;

use super::time::SimTime;

/// Opaque node identifier.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct NodeId(pub u32);

/// A network address: one interface on one node. A node may own several
/// addresses, which is what makes multi-homed handover possible.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Address {
    pub node: NodeId,
    pub iface: u16,
}

impl Address {
    pub const fn new(node: u32, iface: u16) -> Self {
        Address {
            node: NodeId(node),
            iface,
        }
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}:i{}", self.node.0, self.iface)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct LinkId(pub u32);

/// Direction of travel over a link, relative to its (a, b) endpoint order.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Dir {
    AtoB,
    BtoA,
}

impl Dir {
    pub fn index(self) -> usize {
        match self {
            Dir::AtoB => 0,
            Dir::BtoA => 1,
        }
    }
}

/// Point-to-point full-duplex link. Delay applies per direction; a frame
/// occupies the link for its serialization time before the propagation delay.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LinkSpec {
    pub a: Address,
    pub b: Address,
    pub one_way_delay: SimTime,
    pub rate_bits_per_s: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum TopologyError {
    ZeroRate { link_index: usize },
    SelfLink { link_index: usize },
    DuplicateAddress { addr: Address },
    DuplicateLink { a: NodeId, b: NodeId },
}

impl fmt::Display for TopologyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopologyError::ZeroRate { link_index } => {
                write!(f, "link {link_index} has zero rate")
            }
            TopologyError::SelfLink { link_index } => {
                write!(f, "link {link_index} connects a node to itself")
            }
            TopologyError::DuplicateAddress { addr } => {
                write!(f, "address {addr} attached to more than one link")
            }
            TopologyError::DuplicateLink { a, b } => {
                write!(f, "duplicate link between n{} and n{}", a.0, b.0)
            }
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum RouteError {
    NoRoute { from: NodeId, to: NodeId },
    AmbiguousRoute { from: NodeId, to: NodeId },
}

impl fmt::Display for RouteError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RouteError::NoRoute { from, to } => {
                write!(f, "no route from n{} to n{}", from.0, to.0)
            }
            RouteError::AmbiguousRoute { from, to } => {
                write!(f, "more than one path from n{} to n{}", from.0, to.0)
            }
        }
    }
}

/// Static node/link graph. Routing requires a unique simple path between the
/// endpoints' nodes; anything else is an error rather than a silent choice.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Topology {
    links: Vec<LinkSpec>,
    adjacency: BTreeMap<NodeId, Vec<(LinkId, NodeId)>>,
}

impl Topology {
    pub fn build(specs: &[LinkSpec]) -> Result<Topology, TopologyError> {
        let mut seen_addrs: BTreeSet<Address> = BTreeSet::new();
        let mut seen_pairs: BTreeSet<(NodeId, NodeId)> = BTreeSet::new();
        let mut adjacency: BTreeMap<NodeId, Vec<(LinkId, NodeId)>> = BTreeMap::new();

        for (i, spec) in specs.iter().enumerate() {
            if spec.rate_bits_per_s == 0 {
                return Err(TopologyError::ZeroRate { link_index: i });
            }
            if spec.a.node == spec.b.node {
                return Err(TopologyError::SelfLink { link_index: i });
            }
            for addr in [spec.a, spec.b] {
                if !seen_addrs.insert(addr) {
                    return Err(TopologyError::DuplicateAddress { addr });
                }
            }
            let pair = if spec.a.node <= spec.b.node {
                (spec.a.node, spec.b.node)
            } else {
                (spec.b.node, spec.a.node)
            };
            if !seen_pairs.insert(pair) {
                return Err(TopologyError::DuplicateLink {
                    a: pair.0,
                    b: pair.1,
                });
            }
            let id = LinkId(i as u32);
            adjacency.entry(spec.a.node).or_default().push((id, spec.b.node));
            adjacency.entry(spec.b.node).or_default().push((id, spec.a.node));
        }

        Ok(Topology {
            links: specs.to_vec(),
            adjacency,
        })
    }

    pub fn link(&self, id: LinkId) -> &LinkSpec {
        &self.links[id.0 as usize]
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn links(&self) -> impl Iterator<Item = (LinkId, &LinkSpec)> {
        self.links
            .iter()
            .enumerate()
            .map(|(i, l)| (LinkId(i as u32), l))
    }

    /// Direction of `link` when traversed out of `from`.
    pub fn dir_from(&self, link: LinkId, from: NodeId) -> Dir {
        if self.link(link).a.node == from {
            Dir::AtoB
        } else {
            Dir::BtoA
        }
    }

    /// The unique link path between two addresses' nodes. A same-node pair
    /// yields an empty route (in-node delivery).
    pub fn route(&self, from: Address, to: Address) -> Result<Vec<(LinkId, Dir)>, RouteError> {
        if from.node == to.node {
            return Ok(Vec::new());
        }
        let mut paths: Vec<Vec<(LinkId, Dir)>> = Vec::new();
        let mut stack: Vec<(NodeId, Vec<(LinkId, Dir)>, BTreeSet<NodeId>)> = Vec::new();
        let mut visited0 = BTreeSet::new();
        visited0.insert(from.node);
        stack.push((from.node, Vec::new(), visited0));

        while let Some((node, path, visited)) = stack.pop() {
            if node == to.node {
                paths.push(path);
                if paths.len() > 1 {
                    return Err(RouteError::AmbiguousRoute {
                        from: from.node,
                        to: to.node,
                    });
                }
                continue;
            }
            if let Some(neigh) = self.adjacency.get(&node) {
                for &(link, next) in neigh {
                    if visited.contains(&next) {
                        continue;
                    }
                    let mut p = path.clone();
                    p.push((link, self.dir_from(link, node)));
                    let mut v = visited.clone();
                    v.insert(next);
                    stack.push((next, p, v));
                }
            }
        }

        match paths.len() {
            0 => Err(RouteError::NoRoute {
                from: from.node,
                to: to.node,
            }),
            1 => Ok(paths.pop().unwrap()),
            _ => unreachable!(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain_specs() -> Vec<LinkSpec> {
        // client(0) -- emulator(1) -- serverA(2), emulator(1) -- serverB(3)
        let d = SimTime::from_millis(10);
        let r = 100_000_000;
        alloc::vec![
            LinkSpec {
                a: Address::new(0, 0),
                b: Address::new(1, 0),
                one_way_delay: d,
                rate_bits_per_s: r,
            },
            LinkSpec {
                a: Address::new(1, 1),
                b: Address::new(2, 0),
                one_way_delay: d,
                rate_bits_per_s: r,
            },
            LinkSpec {
                a: Address::new(1, 2),
                b: Address::new(3, 0),
                one_way_delay: d,
                rate_bits_per_s: r,
            },
        ]
    }

    #[test]
    fn four_node_chain_has_three_links() {
        let topo = Topology::build(&chain_specs()).unwrap();
        assert_eq!(topo.link_count(), 3);
        let route = topo.route(Address::new(0, 0), Address::new(3, 0)).unwrap();
        assert_eq!(route.len(), 2);
    }

    #[test]
    fn empty_topology_is_valid_but_unroutable() {
        let topo = Topology::build(&[]).unwrap();
        assert_eq!(topo.link_count(), 0);
        assert_eq!(
            topo.route(Address::new(0, 0), Address::new(1, 0)),
            Err(RouteError::NoRoute {
                from: NodeId(0),
                to: NodeId(1)
            })
        );
    }

    #[test]
    fn duplicate_address_rejected() {
        let mut specs = chain_specs();
        specs.push(LinkSpec {
            a: Address::new(0, 0),
            b: Address::new(3, 1),
            one_way_delay: SimTime::ZERO,
            rate_bits_per_s: 1,
        });
        assert_eq!(
            Topology::build(&specs),
            Err(TopologyError::DuplicateAddress {
                addr: Address::new(0, 0)
            })
        );
    }

    #[test]
    fn duplicate_link_rejected() {
        let specs = [
            LinkSpec {
                a: Address::new(0, 0),
                b: Address::new(1, 0),
                one_way_delay: SimTime::ZERO,
                rate_bits_per_s: 1,
            },
            LinkSpec {
                a: Address::new(0, 1),
                b: Address::new(1, 1),
                one_way_delay: SimTime::ZERO,
                rate_bits_per_s: 1,
            },
        ];
        assert_eq!(
            Topology::build(&specs),
            Err(TopologyError::DuplicateLink {
                a: NodeId(0),
                b: NodeId(1)
            })
        );
    }

    #[test]
    fn self_link_rejected() {
        let specs = [LinkSpec {
            a: Address::new(0, 0),
            b: Address::new(0, 1),
            one_way_delay: SimTime::ZERO,
            rate_bits_per_s: 1,
        }];
        assert!(matches!(
            Topology::build(&specs),
            Err(TopologyError::SelfLink { .. })
        ));
    }

    #[test]
    fn same_node_route_is_empty() {
        let topo = Topology::build(&chain_specs()).unwrap();
        let route = topo.route(Address::new(1, 0), Address::new(1, 2)).unwrap();
        assert!(route.is_empty());
    }
}
