use serde::{Deserialize, Serialize};

use super::topology::{node_id, serpentine_xy, NODES_PER_TIER};
use crate::error::{Error, Result};
use crate::mapping::StageId;
use crate::workload::TransformerConfig;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flow {
    pub src: usize,
    pub dst: usize,
    pub bytes: u64,
    /// Consuming stage; the transfer is charged to it.
    pub stage: StageId,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TrafficTrace {
    pub flows: Vec<Flow>,
}

impl TrafficTrace {
    pub fn total_bytes(&self) -> u64 {
        self.flows.iter().map(|f| f.bytes).sum()
    }
}

/// Tier hosting a stage: attention projections on the top tier next to the
/// skip TSVs, the dynamic stage on the systolic tier, feed-forward below.
pub fn stage_tier(stage: StageId) -> usize {
    match stage {
        StageId::S1 => 3,
        StageId::S2 => 0,
        StageId::S3 => 1,
        StageId::S4 => 2,
    }
}

/// Serpentine slot of a layer. Layers walk the curve forward, then back, so
/// consecutive layers are always one hop apart.
pub fn layer_position(layer: u64) -> usize {
    let span = 2 * NODES_PER_TIER as u64;
    let m = layer % span;
    (if m < NODES_PER_TIER as u64 { m } else { span - 1 - m }) as usize
}

/// Node assignment of each layer's four stages.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    /// `stage_nodes[layer][stage]`.
    pub stage_nodes: Vec<[usize; 4]>,
    /// Router attached to the off-chip memory port.
    pub dram_node: usize,
}

impl Placement {
    pub fn serpentine(num_layers: u64) -> Placement {
        let stage_nodes = (0..num_layers)
            .map(|layer| {
                let (x, y) = serpentine_xy(layer_position(layer));
                StageId::ALL.map(|s| node_id(stage_tier(s), x, y))
            })
            .collect();
        Placement {
            stage_nodes,
            dram_node: node_id(0, 0, 0),
        }
    }

    pub fn node(&self, layer: u64, stage: StageId) -> Result<usize> {
        self.stage_nodes
            .get(layer as usize)
            .map(|s| s[stage.index()])
            .ok_or_else(|| Error::Unplaced(format!("{stage} of layer {layer}")))
    }
}

/// Per-iteration flows for every layer in flight.
pub fn gen_traffic(cfg: &TransformerConfig, placement: &Placement) -> Result<TrafficTrace> {
    let act = cfg.activation_bytes();
    let (n, d) = (cfg.n, cfg.d_model);
    let lora = cfg.lora_param_bytes();
    let mut flows = Vec::new();
    let mut push = |src: usize, dst: usize, bytes: u64, stage: StageId, label: String| {
        if src != dst && bytes > 0 {
            flows.push(Flow {
                src,
                dst,
                bytes,
                stage,
                label,
            });
        }
    };
    for layer in 0..cfg.num_layers {
        let at = |s| placement.node(layer, s);
        push(at(StageId::S1)?, at(StageId::S2)?, 3 * n * d * act, StageId::S2, format!("L{layer} S1->S2"));
        push(placement.dram_node, at(StageId::S2)?, lora, StageId::S2, format!("L{layer} DRAM->S2"));
        push(at(StageId::S2)?, at(StageId::S3)?, n * d * act, StageId::S3, format!("L{layer} S2->S3"));
        push(at(StageId::S3)?, at(StageId::S4)?, n * cfg.d_ff * act, StageId::S4, format!("L{layer} S3->S4"));
        if layer + 1 < cfg.num_layers {
            let next = placement.node(layer + 1, StageId::S1)?;
            push(at(StageId::S4)?, next, n * d * act, StageId::S1, format!("L{layer} S4->L{} S1", layer + 1));
        }
    }
    Ok(TrafficTrace { flows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::{preset, Phase};

    #[test]
    fn gpt2_flow_sizes() {
        let cfg = preset("gpt2-medium").unwrap();
        let t = gen_traffic(&cfg, &Placement::serpentine(cfg.num_layers)).unwrap();
        let qkv = t.flows.iter().find(|f| f.label == "L0 S1->S2").unwrap();
        assert_eq!(qkv.bytes, 6_291_456);
        let dram = t.flows.iter().find(|f| f.label == "L1 DRAM->S2").unwrap();
        assert_eq!(dram.bytes, 262_144);
        // Layer 0's systolic stage sits on the memory port itself.
        assert!(!t.flows.iter().any(|f| f.label == "L0 DRAM->S2"));
    }

    #[test]
    fn unit_model_moves_one_activation() {
        let cfg = TransformerConfig::new(2, 1, 1, 1, 1, 0, Phase::Inference);
        let mut unit = cfg;
        unit.d_model = 1;
        unit.d_ff = 4;
        let t = gen_traffic(&unit, &Placement::serpentine(1)).unwrap();
        let f = t.flows.iter().find(|f| f.label == "L0 S2->S3").unwrap();
        assert_eq!(f.bytes, unit.activation_bytes());
    }

    #[test]
    fn positions_ping_pong() {
        let seq: Vec<_> = (0..34).map(layer_position).collect();
        assert_eq!(&seq[..3], &[0, 1, 2]);
        assert_eq!(seq[15], 15);
        assert_eq!(seq[16], 15);
        assert_eq!(seq[31], 0);
        assert_eq!(seq[32], 0);
    }

    #[test]
    fn missing_layer_is_unplaced() {
        let cfg = preset("roberta-base").unwrap();
        assert!(matches!(gen_traffic(&cfg, &Placement::serpentine(3)), Err(Error::Unplaced(_))));
    }
}
