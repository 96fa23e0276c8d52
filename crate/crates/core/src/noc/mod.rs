//! 3D network-on-chip: four stacked 4×4 tiers, systolic cores on tier 0 and
//! ReRAM cores above. Evaluation is analytic: hop latency plus serialization
//! on the most loaded link of each path.

mod eval;
mod topology;
mod traffic;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use eval::{evaluate_noc, noc_area, NocArea, NocEvaluation};
pub use topology::{
    build_topology, node_id, port_histogram, route, serpentine_pos, serpentine_xy, Hop, Link, LinkKind, Node,
    NodeKind, Topology, TopologyKind, GRID, NODES_PER_TIER, NUM_NODES, SYSTOLIC_TIER, TIERS,
};
pub use traffic::{gen_traffic, layer_position, stage_tier, Flow, Placement, TrafficTrace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NocParams {
    pub router_latency_cycles: u32,
    pub clock_hz: f64,
    pub link_width_bits: u32,
    pub planar_energy_per_bit: f64,
    /// ½·C·V² for one adjacent-tier TSV.
    pub tsv_energy_per_bit: f64,
    /// Switch energy per bit per router port traversed.
    pub router_energy_per_bit_per_port: f64,
    /// Router area per port².
    pub router_area_unit: f64,
    pub tsv_diameter_um: f64,
    pub tsv_pitch_factor: f64,
    /// Skip TSVs are this many times wider (and longer) than adjacent-tier TSVs.
    pub skip_diameter_factor: f64,
    pub tsvs_per_link: u32,
}

impl Default for NocParams {
    fn default() -> Self {
        Self {
            router_latency_cycles: 3,
            clock_hz: 1e9,
            link_width_bits: 128,
            planar_energy_per_bit: 0.1e-12,
            tsv_energy_per_bit: 0.5 * 37e-15 * 1.0 * 1.0,
            router_energy_per_bit_per_port: 0.02e-12,
            router_area_unit: 0.0125,
            tsv_diameter_um: 5.0,
            tsv_pitch_factor: 3.0,
            skip_diameter_factor: 3.0,
            tsvs_per_link: 128,
        }
    }
}

impl NocParams {
    pub fn tsv_pitch_um(&self) -> f64 {
        self.tsv_diameter_um * self.tsv_pitch_factor
    }

    /// Footprint of one TSV of a link of `kind`, in mm².
    pub fn tsv_area_mm2(&self, kind: LinkKind) -> f64 {
        let pitch_mm = self.tsv_pitch_um() * 1e-3;
        match kind {
            LinkKind::Planar => 0.0,
            LinkKind::TsvAdjacent => pitch_mm * pitch_mm,
            LinkKind::TsvSkip => pitch_mm * pitch_mm * self.skip_diameter_factor.powi(2),
        }
    }

    pub fn link_energy_per_bit(&self, kind: LinkKind) -> f64 {
        match kind {
            LinkKind::Planar => self.planar_energy_per_bit,
            LinkKind::TsvAdjacent => self.tsv_energy_per_bit,
            LinkKind::TsvSkip => self.tsv_energy_per_bit * (TIERS - 1) as f64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.clock_hz > 0.0) || !self.clock_hz.is_finite() {
            return Err(Error::config("hardware.noc.clock_hz", "must be positive"));
        }
        if self.link_width_bits == 0 {
            return Err(Error::config("hardware.noc.link_width_bits", "must be positive"));
        }
        let non_negative = [
            ("hardware.noc.planar_energy_per_bit", self.planar_energy_per_bit),
            ("hardware.noc.tsv_energy_per_bit", self.tsv_energy_per_bit),
            ("hardware.noc.router_energy_per_bit_per_port", self.router_energy_per_bit_per_port),
            ("hardware.noc.router_area_unit", self.router_area_unit),
            ("hardware.noc.tsv_diameter_um", self.tsv_diameter_um),
        ];
        for (field, v) in non_negative {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::config(field, "must be a non-negative finite number"));
            }
        }
        if !(self.tsv_pitch_factor >= 1.0) {
            return Err(Error::config("hardware.noc.tsv_pitch_factor", "pitch cannot be below the TSV diameter"));
        }
        if !(self.skip_diameter_factor >= 1.0) {
            return Err(Error::config("hardware.noc.skip_diameter_factor", "must be at least 1"));
        }
        Ok(())
    }
}
