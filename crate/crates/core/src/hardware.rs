//! Reference hardware: three ReRAM tiers and one systolic tier of 16 cores each.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noc::{NocParams, TopologyKind, NODES_PER_TIER, TIERS};
use crate::reram::ReramTileConfig;
use crate::systolic::SystolicConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DramConfig {
    pub max_bandwidth_bytes_per_s: f64,
    pub efficiency: f64,
}

impl Default for DramConfig {
    fn default() -> Self {
        Self {
            max_bandwidth_bytes_per_s: 256e9,
            efficiency: 0.8,
        }
    }
}

impl DramConfig {
    pub fn effective_bandwidth(&self) -> f64 {
        self.max_bandwidth_bytes_per_s * self.efficiency
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineParams {
    /// Inputs streamed through the pipeline back to back.
    pub batch: u64,
    /// A systolic kernel may take up to `(1 + slack)` times the slowest ReRAM stage.
    pub feasibility_slack: f64,
    /// Fraction of systolic compute time that can hide adapter weight loads.
    pub load_overlap: f64,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            batch: 1,
            feasibility_slack: 1.0,
            load_overlap: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardwareSpec {
    #[serde(default)]
    pub systolic: SystolicConfig,
    #[serde(default)]
    pub reram: ReramTileConfig,
    #[serde(default)]
    pub dram: DramConfig,
    #[serde(default = "default_reram_cores")]
    pub reram_cores: u64,
    #[serde(default = "default_systolic_cores")]
    pub systolic_cores: u64,
    #[serde(default)]
    pub noc: NocParams,
    #[serde(default = "default_topology")]
    pub topology: TopologyKind,
    #[serde(default)]
    pub pipeline: PipelineParams,
}

fn default_reram_cores() -> u64 {
    ((TIERS - 1) * NODES_PER_TIER) as u64
}

fn default_systolic_cores() -> u64 {
    NODES_PER_TIER as u64
}

fn default_topology() -> TopologyKind {
    TopologyKind::SfcHybrid
}

impl Default for HardwareSpec {
    fn default() -> Self {
        Self {
            systolic: SystolicConfig::default(),
            reram: ReramTileConfig::default(),
            dram: DramConfig::default(),
            reram_cores: default_reram_cores(),
            systolic_cores: default_systolic_cores(),
            noc: NocParams::default(),
            topology: default_topology(),
            pipeline: PipelineParams::default(),
        }
    }
}

impl HardwareSpec {
    pub fn validate(&self) -> Result<()> {
        self.systolic.validate()?;
        self.reram.validate()?;
        self.noc.validate()?;
        if self.systolic_cores == 0 || self.reram_cores != 3 * self.systolic_cores {
            return Err(Error::config(
                "hardware.reram_cores",
                format!(
                    "{} ReRAM cores against {} systolic cores breaks the 3:1 allocation",
                    self.reram_cores, self.systolic_cores
                ),
            ));
        }
        if self.reram_cores + self.systolic_cores != (TIERS * NODES_PER_TIER) as u64 {
            return Err(Error::config("hardware.reram_cores", "core counts must fill the 4x4x4 grid"));
        }
        if !(self.dram.max_bandwidth_bytes_per_s > 0.0) {
            return Err(Error::config("hardware.dram.max_bandwidth_bytes_per_s", "must be positive"));
        }
        if !(self.dram.efficiency > 0.0 && self.dram.efficiency <= 1.0) {
            return Err(Error::config("hardware.dram.efficiency", "must be in (0, 1]"));
        }
        if self.pipeline.batch == 0 {
            return Err(Error::config("hardware.pipeline.batch", "must be at least 1"));
        }
        if !(self.pipeline.feasibility_slack >= 0.0) {
            return Err(Error::config("hardware.pipeline.feasibility_slack", "must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.pipeline.load_overlap) {
            return Err(Error::config("hardware.pipeline.load_overlap", "must be in [0, 1]"));
        }
        Ok(())
    }
}
