use heterosim_core::noc::{
    build_topology, evaluate_noc, gen_traffic, layer_position, node_id, port_histogram, route, LinkKind, Placement,
    GRID, NUM_NODES, TIERS,
};
use heterosim_core::workload::preset;
use heterosim_core::{NocParams, StageId, Topology, TopologyKind};
use proptest::prelude::*;

fn topo(kind: TopologyKind) -> Topology {
    build_topology(kind, &NocParams::default())
}

fn manhattan(t: &Topology, a: usize, b: usize) -> usize {
    let (p, q) = (t.node(a), t.node(b));
    p.tier.abs_diff(q.tier) + p.x.abs_diff(q.x) + p.y.abs_diff(q.y)
}

proptest! {
    #[test]
    fn routes_are_connected_walks(kind in prop::sample::select(TopologyKind::ALL.to_vec()), src in 0..NUM_NODES, dst in 0..NUM_NODES) {
        let t = topo(kind);
        let hops = route(&t, src, dst).unwrap();
        let mut at = src;
        for h in &hops {
            prop_assert_eq!(h.from, at);
            prop_assert_eq!(t.link_between(h.from, h.to), Some(h.link));
            at = h.to;
        }
        prop_assert_eq!(at, dst);
        prop_assert_eq!(hops.is_empty(), src == dst);
    }

    #[test]
    fn mesh_routes_are_minimal(src in 0..NUM_NODES, dst in 0..NUM_NODES) {
        let t = topo(TopologyKind::Mesh3D);
        prop_assert_eq!(route(&t, src, dst).unwrap().len(), manhattan(&t, src, dst));
    }

    #[test]
    fn skip_links_shorten_outer_tier_trips(x in 0..GRID, y in 0..GRID) {
        for kind in [TopologyKind::Mesh3DSkip, TopologyKind::SfcHybrid] {
            let t = topo(kind);
            let (top, bottom) = (node_id(TIERS - 1, x, y), node_id(0, x, y));
            let with = route(&t, top, bottom).unwrap().len();
            let without = route(&t.without_skip_links(), top, bottom).unwrap().len();
            prop_assert!(without > with, "{kind:?}: {without} vs {with}");
        }
    }
}

#[test]
fn sfc_tiers_form_hamiltonian_paths() {
    let t = topo(TopologyKind::SfcHybrid);
    for tier in 1..TIERS {
        let on_tier: Vec<_> = t.nodes.iter().filter(|n| n.tier == tier).map(|n| n.id).collect();
        let planar_degree = |id: usize| {
            t.neighbors(id)
                .iter()
                .filter(|&&(nb, l)| t.links[l].kind == LinkKind::Planar && t.node(nb).tier == tier)
                .count()
        };
        let ends: Vec<_> = on_tier.iter().copied().filter(|&id| planar_degree(id) == 1).collect();
        assert_eq!(ends.len(), 2, "tier {tier}");
        assert!(on_tier.iter().all(|&id| (1..=2).contains(&planar_degree(id))));
        // Walk from one end; every node must be visited exactly once.
        let mut seen = vec![ends[0]];
        let mut prev = usize::MAX;
        let mut at = ends[0];
        loop {
            let next = t
                .neighbors(at)
                .iter()
                .find(|&&(nb, l)| t.links[l].kind == LinkKind::Planar && t.node(nb).tier == tier && nb != prev);
            match next {
                Some(&(nb, _)) => {
                    prev = at;
                    at = nb;
                    assert!(!seen.contains(&at));
                    seen.push(at);
                }
                None => break,
            }
        }
        assert_eq!(seen.len(), on_tier.len());
    }
}

#[test]
fn link_inventory() {
    let mesh = topo(TopologyKind::Mesh3D);
    assert_eq!(mesh.count_links(LinkKind::Planar), 96);
    assert_eq!(mesh.count_links(LinkKind::TsvAdjacent), 48);
    assert_eq!(mesh.count_links(LinkKind::TsvSkip), 0);
    let skip = topo(TopologyKind::Mesh3DSkip);
    assert_eq!(skip.count_links(LinkKind::TsvSkip), 16);
    let sfc = topo(TopologyKind::SfcHybrid);
    assert_eq!(sfc.count_links(LinkKind::Planar), 24 + 3 * 15);
    assert_eq!(sfc.count_links(LinkKind::TsvAdjacent), 48);
    assert_eq!(sfc.count_links(LinkKind::TsvSkip), 16);
}

#[test]
fn histograms_cover_every_router() {
    for kind in TopologyKind::ALL {
        let h = port_histogram(&topo(kind));
        assert_eq!(h.values().sum::<usize>(), NUM_NODES, "{kind:?}");
    }
}

#[test]
fn traffic_conserves_bytes() {
    for name in ["gpt2-medium", "roberta-base", "bloom-560m"] {
        let cfg = preset(name).unwrap();
        let placement = Placement::serpentine(cfg.num_layers);
        let trace = gen_traffic(&cfg, &placement).unwrap();
        let act = cfg.activation_bytes();
        let (n, d, l) = (cfg.n, cfg.d_model, cfg.num_layers);
        let on_port = (0..l).filter(|&i| layer_position(i) == 0).count() as u64;
        let expected = l * (3 * n * d + n * d + n * cfg.d_ff) * act
            + (l - 1) * n * d * act
            + (l - on_port) * cfg.lora_param_bytes();
        assert_eq!(trace.total_bytes(), expected, "{name}");
        for f in &trace.flows {
            assert_ne!(f.src, f.dst);
            assert!(f.bytes > 0);
        }
    }
}

#[test]
fn evaluation_is_deterministic_and_positive() {
    let cfg = preset("gpt2-medium").unwrap();
    let trace = gen_traffic(&cfg, &Placement::serpentine(cfg.num_layers)).unwrap();
    for kind in TopologyKind::ALL {
        let t = topo(kind);
        let a = evaluate_noc(&t, &trace, &NocParams::default()).unwrap();
        let b = evaluate_noc(&t, &trace, &NocParams::default()).unwrap();
        assert_eq!(a, b);
        assert!(a.total_energy > 0.0 && a.edp > 0.0);
        assert!(a.stage_delay(StageId::S2) > 0.0);
    }
}
