use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::topology::{route, LinkKind, Topology};
use super::traffic::TrafficTrace;
use super::NocParams;
use crate::error::{Error, Result};
use crate::mapping::StageId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NocArea {
    pub router_mm2: f64,
    pub tsv_mm2: f64,
    pub tsv_count: u64,
}

impl NocArea {
    pub fn total(&self) -> f64 {
        self.router_mm2 + self.tsv_mm2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NocEvaluation {
    /// Indexed by stage, S1 first.
    pub per_stage_comm_delay: [f64; 4],
    pub flow_delays: Vec<f64>,
    pub flow_hops: Vec<usize>,
    pub total_energy: f64,
    pub edp: f64,
    pub area: NocArea,
}

impl NocEvaluation {
    pub fn stage_delay(&self, stage: StageId) -> f64 {
        self.per_stage_comm_delay[stage.index()]
    }

    pub fn total_delay(&self) -> f64 {
        self.per_stage_comm_delay.iter().sum()
    }

    pub fn noc_area_mm2(&self) -> f64 {
        self.area.total()
    }
}

pub fn noc_area(topo: &Topology, params: &NocParams) -> NocArea {
    let router_mm2 = topo
        .nodes
        .iter()
        .map(|n| params.router_area_unit * f64::from(topo.ports(n.id)).powi(2))
        .sum();
    let mut tsv_mm2 = 0.0;
    let mut tsv_count = 0;
    for l in topo.links.iter().filter(|l| l.kind != LinkKind::Planar) {
        tsv_count += u64::from(params.tsvs_per_link);
        tsv_mm2 += f64::from(params.tsvs_per_link) * params.tsv_area_mm2(l.kind);
    }
    NocArea {
        router_mm2,
        tsv_mm2,
        tsv_count,
    }
}

/// Latency, energy, EDP and area of one iteration of `traffic`.
///
/// Flows of the same stage run concurrently; those crossing a common directed
/// link share its bandwidth, so each flow waits for the most loaded link on
/// its path. Energy counts every link traversal and every router port on the
/// way.
pub fn evaluate_noc(topo: &Topology, traffic: &TrafficTrace, params: &NocParams) -> Result<NocEvaluation> {
    if traffic.flows.is_empty() {
        return Err(Error::Empty("traffic trace"));
    }
    params.validate()?;
    let paths = traffic
        .flows
        .iter()
        .map(|f| route(topo, f.src, f.dst))
        .collect::<Result<Vec<_>>>()?;

    let mut load: HashMap<(StageId, usize, usize), u64> = HashMap::new();
    for (f, path) in traffic.flows.iter().zip(&paths) {
        for hop in path {
            *load.entry((f.stage, hop.link, hop.from)).or_insert(0) += f.bytes * 8;
        }
    }

    let f_clk = params.clock_hz;
    let width = f64::from(params.link_width_bits);
    let mut per_stage = [0.0f64; 4];
    let mut flow_delays = Vec::with_capacity(paths.len());
    let mut total_energy = 0.0;
    for (f, path) in traffic.flows.iter().zip(&paths) {
        let max_bits = path.iter().map(|h| load[&(f.stage, h.link, h.from)]).max().unwrap_or(0);
        let delay = path.len() as f64 * f64::from(params.router_latency_cycles) / f_clk + max_bits as f64 / (width * f_clk);
        flow_delays.push(delay);
        let slot = &mut per_stage[f.stage.index()];
        *slot = slot.max(delay);

        let link_e: f64 = path.iter().map(|h| topo.links[h.link].energy_per_bit).sum();
        let ports: u32 = std::iter::once(f.src)
            .chain(path.iter().map(|h| h.to))
            .map(|n| topo.ports(n))
            .sum();
        let router_e = f64::from(ports) * params.router_energy_per_bit_per_port;
        total_energy += (f.bytes * 8) as f64 * (link_e + router_e);
    }
    let edp = total_energy * per_stage.iter().sum::<f64>();
    Ok(NocEvaluation {
        per_stage_comm_delay: per_stage,
        flow_hops: paths.iter().map(Vec::len).collect(),
        flow_delays,
        total_energy,
        edp,
        area: noc_area(topo, params),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noc::{build_topology, node_id, Flow, TopologyKind};

    fn flow(src: usize, dst: usize, bytes: u64, stage: StageId) -> Flow {
        Flow {
            src,
            dst,
            bytes,
            stage,
            label: String::new(),
        }
    }

    #[test]
    fn single_hop_delay() {
        let p = NocParams::default();
        let t = build_topology(TopologyKind::Mesh3D, &p);
        let tr = TrafficTrace {
            flows: vec![flow(node_id(0, 0, 0), node_id(0, 1, 0), 1000, StageId::S2)],
        };
        let e = evaluate_noc(&t, &tr, &p).unwrap();
        let expected = 3.0 / 1e9 + 8000.0 / (128.0 * 1e9);
        assert!((e.stage_delay(StageId::S2) - expected).abs() < 1e-18);
        assert_eq!(e.stage_delay(StageId::S1), 0.0);
    }

    #[test]
    fn shared_link_serializes() {
        let p = NocParams::default();
        let t = build_topology(TopologyKind::Mesh3D, &p);
        let a = flow(node_id(0, 0, 0), node_id(0, 2, 0), 1000, StageId::S2);
        let b = flow(node_id(0, 1, 0), node_id(0, 2, 0), 1000, StageId::S2);
        let alone = evaluate_noc(&t, &TrafficTrace { flows: vec![a.clone()] }, &p).unwrap();
        let both = evaluate_noc(&t, &TrafficTrace { flows: vec![a.clone(), b.clone()] }, &p).unwrap();
        assert!(both.stage_delay(StageId::S2) > alone.stage_delay(StageId::S2));
        // Different stages never contend.
        let b_other = Flow { stage: StageId::S3, ..b };
        let split = evaluate_noc(&t, &TrafficTrace { flows: vec![a, b_other] }, &p).unwrap();
        assert_eq!(split.stage_delay(StageId::S2), alone.stage_delay(StageId::S2));
    }

    #[test]
    fn empty_trace_rejected() {
        let p = NocParams::default();
        let t = build_topology(TopologyKind::Mesh3D, &p);
        assert!(evaluate_noc(&t, &TrafficTrace::default(), &p).is_err());
    }

    #[test]
    fn area_ordering() {
        let p = NocParams::default();
        let a = |k| noc_area(&build_topology(k, &p), &p).total();
        let mesh = a(TopologyKind::Mesh3D);
        let sfc = a(TopologyKind::SfcHybrid);
        let skip = a(TopologyKind::Mesh3DSkip);
        assert!(mesh < sfc && sfc < skip);
        assert!(sfc / mesh - 1.0 <= 0.08);
        assert!(skip / mesh - 1.0 >= 0.12);
    }
}
