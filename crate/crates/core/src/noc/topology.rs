use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::NocParams;
use crate::error::{Error, Result};

pub const TIERS: usize = 4;
pub const GRID: usize = 4;
pub const NODES_PER_TIER: usize = GRID * GRID;
pub const NUM_NODES: usize = TIERS * NODES_PER_TIER;
/// Tier holding the systolic cores; the rest are ReRAM.
pub const SYSTOLIC_TIER: usize = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TopologyKind {
    #[serde(rename = "mesh3d")]
    Mesh3D,
    #[serde(rename = "mesh3d-skip")]
    Mesh3DSkip,
    #[serde(rename = "sfc-hybrid")]
    /// Serpentine paths on the ReRAM tiers, mesh on the systolic tier, skip TSVs.
    SfcHybrid,
}

impl TopologyKind {
    pub const ALL: [TopologyKind; 3] = [TopologyKind::Mesh3D, TopologyKind::Mesh3DSkip, TopologyKind::SfcHybrid];

    pub fn name(self) -> &'static str {
        match self {
            TopologyKind::Mesh3D => "mesh3d",
            TopologyKind::Mesh3DSkip => "mesh3d-skip",
            TopologyKind::SfcHybrid => "sfc-hybrid",
        }
    }

    pub fn has_skip(self) -> bool {
        !matches!(self, TopologyKind::Mesh3D)
    }

    /// Whether planar links on `tier` follow the serpentine path instead of a mesh.
    pub fn is_sfc_tier(self, tier: usize) -> bool {
        self == TopologyKind::SfcHybrid && tier != SYSTOLIC_TIER
    }
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    Reram,
    Systolic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    pub tier: usize,
    pub x: usize,
    pub y: usize,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LinkKind {
    Planar,
    TsvAdjacent,
    TsvSkip,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub a: usize,
    pub b: usize,
    pub kind: LinkKind,
    pub width_bits: u32,
    pub latency_cycles: u32,
    pub energy_per_bit: f64,
}

/// A directed traversal of link `link` from `from` to `to`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Hop {
    pub link: usize,
    pub from: usize,
    pub to: usize,
}

pub fn node_id(tier: usize, x: usize, y: usize) -> usize {
    tier * NODES_PER_TIER + y * GRID + x
}

/// Grid coordinates at `pos` along the serpentine: even rows left to right, odd rows right to left.
pub fn serpentine_xy(pos: usize) -> (usize, usize) {
    let y = pos / GRID;
    let x = if y.is_multiple_of(2) { pos % GRID } else { GRID - 1 - pos % GRID };
    (x, y)
}

pub fn serpentine_pos(x: usize, y: usize) -> usize {
    y * GRID + if y.is_multiple_of(2) { x } else { GRID - 1 - x }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub kind: TopologyKind,
    pub nodes: Vec<Node>,
    pub links: Vec<Link>,
    #[serde(skip)]
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl Topology {
    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    /// Links incident to `id`, as (neighbor, link index).
    pub fn neighbors(&self, id: usize) -> &[(usize, usize)] {
        &self.adjacency[id]
    }

    pub fn link_between(&self, a: usize, b: usize) -> Option<usize> {
        self.adjacency.get(a)?.iter().find(|(n, _)| *n == b).map(|&(_, l)| l)
    }

    /// Router ports: one per incident link plus the local port.
    pub fn ports(&self, id: usize) -> u32 {
        self.adjacency[id].len() as u32 + 1
    }

    pub fn count_links(&self, kind: LinkKind) -> usize {
        self.links.iter().filter(|l| l.kind == kind).count()
    }

    /// Drops every skip link, keeping the rest of the graph.
    pub fn without_skip_links(&self) -> Topology {
        let links = self.links.iter().copied().filter(|l| l.kind != LinkKind::TsvSkip).collect();
        Topology::from_parts(self.kind, self.nodes.clone(), links)
    }

    fn from_parts(kind: TopologyKind, nodes: Vec<Node>, links: Vec<Link>) -> Topology {
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for (i, l) in links.iter().enumerate() {
            adjacency[l.a].push((l.b, i));
            adjacency[l.b].push((l.a, i));
        }
        Topology {
            kind,
            nodes,
            links,
            adjacency,
        }
    }
}

pub fn build_topology(kind: TopologyKind, params: &NocParams) -> Topology {
    let nodes: Vec<Node> = (0..TIERS)
        .flat_map(|tier| {
            (0..GRID).flat_map(move |y| {
                (0..GRID).map(move |x| Node {
                    id: node_id(tier, x, y),
                    tier,
                    x,
                    y,
                    kind: if tier == SYSTOLIC_TIER { NodeKind::Systolic } else { NodeKind::Reram },
                })
            })
        })
        .collect();

    let mut links = Vec::new();
    let mut add = |a: usize, b: usize, kind: LinkKind| {
        links.push(Link {
            a,
            b,
            kind,
            width_bits: params.link_width_bits,
            latency_cycles: 1,
            energy_per_bit: params.link_energy_per_bit(kind),
        });
    };

    for tier in 0..TIERS {
        if kind.is_sfc_tier(tier) {
            for pos in 0..NODES_PER_TIER - 1 {
                let (x0, y0) = serpentine_xy(pos);
                let (x1, y1) = serpentine_xy(pos + 1);
                add(node_id(tier, x0, y0), node_id(tier, x1, y1), LinkKind::Planar);
            }
        } else {
            for y in 0..GRID {
                for x in 0..GRID {
                    if x + 1 < GRID {
                        add(node_id(tier, x, y), node_id(tier, x + 1, y), LinkKind::Planar);
                    }
                    if y + 1 < GRID {
                        add(node_id(tier, x, y), node_id(tier, x, y + 1), LinkKind::Planar);
                    }
                }
            }
        }
    }
    for tier in 0..TIERS - 1 {
        for y in 0..GRID {
            for x in 0..GRID {
                add(node_id(tier, x, y), node_id(tier + 1, x, y), LinkKind::TsvAdjacent);
            }
        }
    }
    if kind.has_skip() {
        for y in 0..GRID {
            for x in 0..GRID {
                add(node_id(0, x, y), node_id(TIERS - 1, x, y), LinkKind::TsvSkip);
            }
        }
    }
    Topology::from_parts(kind, nodes, links)
}

pub fn port_histogram(topo: &Topology) -> BTreeMap<u32, usize> {
    let mut hist = BTreeMap::new();
    for n in &topo.nodes {
        *hist.entry(topo.ports(n.id)).or_insert(0) += 1;
    }
    hist
}

/// Deterministic route: vertical movement first (taking the skip link only
/// when it saves hops), then in-tier on the destination tier.
pub fn route(topo: &Topology, src: usize, dst: usize) -> Result<Vec<Hop>> {
    if src >= topo.nodes.len() || dst >= topo.nodes.len() {
        return Err(Error::Unreachable { src, dst });
    }
    let mut path = Vec::new();
    let s = *topo.node(src);
    let d = *topo.node(dst);
    let mut cur = src;
    let step = |cur: &mut usize, next: usize, path: &mut Vec<Hop>| -> Result<()> {
        let link = topo.link_between(*cur, next).ok_or(Error::Unreachable { src, dst })?;
        path.push(Hop { link, from: *cur, to: next });
        *cur = next;
        Ok(())
    };

    // Vertical leg at the source column.
    let top = TIERS - 1;
    let direct = s.tier.abs_diff(d.tier);
    let has_skip = topo.link_between(node_id(0, s.x, s.y), node_id(top, s.x, s.y)).is_some();
    let via_skip = |from_end: usize, to_end: usize| s.tier.abs_diff(from_end) + 1 + to_end.abs_diff(d.tier);
    let skip_plan = if has_skip {
        [(0, top), (top, 0)]
            .into_iter()
            .map(|(a, b)| (via_skip(a, b), a, b))
            .filter(|&(h, _, _)| h < direct)
            .min_by_key(|&(h, _, _)| h)
    } else {
        None
    };
    let mut tier = s.tier;
    let walk_to = |target: usize, tier: &mut usize, cur: &mut usize, path: &mut Vec<Hop>| -> Result<()> {
        while *tier != target {
            *tier = if *tier < target { *tier + 1 } else { *tier - 1 };
            step(cur, node_id(*tier, s.x, s.y), path)?;
        }
        Ok(())
    };
    match skip_plan {
        Some((_, a, b)) => {
            walk_to(a, &mut tier, &mut cur, &mut path)?;
            tier = b;
            step(&mut cur, node_id(b, s.x, s.y), &mut path)?;
            walk_to(d.tier, &mut tier, &mut cur, &mut path)?;
        }
        None => walk_to(d.tier, &mut tier, &mut cur, &mut path)?,
    }

    // Planar leg on the destination tier.
    if topo.kind.is_sfc_tier(d.tier) {
        let mut pos = serpentine_pos(s.x, s.y);
        let goal = serpentine_pos(d.x, d.y);
        while pos != goal {
            pos = if pos < goal { pos + 1 } else { pos - 1 };
            let (x, y) = serpentine_xy(pos);
            step(&mut cur, node_id(d.tier, x, y), &mut path)?;
        }
    } else {
        let (mut x, mut y) = (s.x, s.y);
        while x != d.x {
            x = if x < d.x { x + 1 } else { x - 1 };
            step(&mut cur, node_id(d.tier, x, y), &mut path)?;
        }
        while y != d.y {
            y = if y < d.y { y + 1 } else { y - 1 };
            step(&mut cur, node_id(d.tier, x, y), &mut path)?;
        }
    }
    debug_assert_eq!(cur, dst);
    Ok(path)
}
