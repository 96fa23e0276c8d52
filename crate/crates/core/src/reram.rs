//! ReRAM processing-in-memory tiles.
//!
//! Weights are bit-sliced across 2-bit cells and stored crossbar by crossbar.
//! Quantization is crossbar-wise: every 128×128 block carries its own scale,
//! and partial sums are dequantized by an extra shift-and-add stage before
//! they are aggregated across crossbars.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::workload::{PrecisionPlan, TransformerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReramTileConfig {
    pub xbar_rows: u64,
    pub xbar_cols: u64,
    pub bits_per_cell: u32,
    pub xbars_per_tile: u64,
    pub tiles_per_core: u64,
    pub adc_bits: u32,
    pub adcs_per_tile: u64,
    pub dac_bits: u32,
    pub tile_power_w: f64,
    pub tile_area_mm2: f64,
    pub scale_register_bytes: u64,
    pub sa_units: u64,
    pub dequant_power_overhead: f64,
    pub dequant_area_overhead: f64,
    /// Pipeline clock. Not published for the reference design; 12.5 MHz is an 80 ns crossbar cycle.
    pub clock_hz: f64,
    /// Copies of each weight matrix; inputs are split evenly across copies.
    #[serde(default = "one")]
    pub weight_duplication: u64,
}

fn one() -> u64 {
    1
}

impl Default for ReramTileConfig {
    fn default() -> Self {
        Self {
            xbar_rows: 128,
            xbar_cols: 128,
            bits_per_cell: 2,
            xbars_per_tile: 96,
            tiles_per_core: 16,
            adc_bits: 8,
            adcs_per_tile: 96,
            dac_bits: 1,
            tile_power_w: 0.345,
            tile_area_mm2: 0.37,
            scale_register_bytes: 192,
            sa_units: 48,
            dequant_power_overhead: 0.015,
            dequant_area_overhead: 0.0215,
            clock_hz: 12.5e6,
            weight_duplication: 1,
        }
    }
}

impl ReramTileConfig {
    pub fn validate(&self) -> Result<()> {
        if self.xbar_rows == 0 || self.xbar_cols == 0 {
            return Err(Error::config("hardware.reram.xbar_rows", "crossbar dimensions must be positive"));
        }
        if self.bits_per_cell == 0 {
            return Err(Error::config("hardware.reram.bits_per_cell", "must be positive"));
        }
        if self.xbars_per_tile == 0 || self.tiles_per_core == 0 {
            return Err(Error::config("hardware.reram.xbars_per_tile", "must be positive"));
        }
        if !(self.clock_hz > 0.0) || !self.clock_hz.is_finite() {
            return Err(Error::config("hardware.reram.clock_hz", "must be positive"));
        }
        if self.weight_duplication == 0 {
            return Err(Error::config("hardware.reram.weight_duplication", "must be at least 1"));
        }
        if !(self.tile_power_w >= 0.0) {
            return Err(Error::config("hardware.reram.tile_power_w", "must be non-negative"));
        }
        Ok(())
    }

    /// Weights held by one crossbar at the given precision.
    pub fn weights_per_crossbar(&self, weight_bits: u32) -> u64 {
        self.xbar_rows * self.xbar_cols * u64::from(self.bits_per_cell) / u64::from(weight_bits)
    }

    pub fn core_area_mm2(&self, dequant_enabled: bool) -> f64 {
        let overhead = if dequant_enabled { 1.0 + self.dequant_area_overhead } else { 1.0 };
        self.tiles_per_core as f64 * self.tile_area_mm2 * overhead
    }
}

pub fn crossbars_for_matrix(rows: u64, cols: u64, weight_bits: u32, cfg: &ReramTileConfig) -> Result<u64> {
    if weight_bits == 0 || !weight_bits.is_multiple_of(cfg.bits_per_cell) {
        return Err(Error::config(
            "weight_bits",
            format!("{weight_bits} bits do not split into {}-bit cells", cfg.bits_per_cell),
        ));
    }
    let cells_per_weight = u64::from(weight_bits / cfg.bits_per_cell);
    Ok(rows.div_ceil(cfg.xbar_rows) * (cols * cells_per_weight).div_ceil(cfg.xbar_cols))
}

/// Crossbars needed for the frozen weights of one layer under `plan`.
pub fn layer_crossbars(model: &TransformerConfig, plan: &PrecisionPlan, cfg: &ReramTileConfig) -> Result<LayerCrossbars> {
    let d = model.d_model;
    let square = crossbars_for_matrix(d, d, plan.mha_bits, cfg)?;
    let mha = 4 * square;
    let ff1 = crossbars_for_matrix(d, model.d_ff, plan.ff_bits, cfg)?;
    let ff2 = crossbars_for_matrix(model.d_ff, d, plan.ff_bits, cfg)?;
    Ok(LayerCrossbars {
        mha: mha * cfg.weight_duplication,
        ff: (ff1 + ff2) * cfg.weight_duplication,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerCrossbars {
    pub mha: u64,
    pub ff: u64,
}

impl LayerCrossbars {
    pub fn total(&self) -> u64 {
        self.mha + self.ff
    }

    pub fn tiles(&self, cfg: &ReramTileConfig) -> u64 {
        self.total().div_ceil(cfg.xbars_per_tile)
    }

    pub fn cores(&self, cfg: &ReramTileConfig) -> u64 {
        self.tiles(cfg).div_ceil(cfg.tiles_per_core)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedBlock {
    pub ints: Array2<i32>,
    pub scale: f64,
    pub bits: u32,
}

impl QuantizedBlock {
    pub fn dequantize(&self) -> Array2<f64> {
        self.ints.mapv(|q| f64::from(q) * self.scale)
    }

    /// Integer matrix-vector product of the stored block.
    pub fn int_mvm(&self, x: &Array1<i64>) -> Result<Array1<i64>> {
        if x.len() != self.ints.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} against a block with {} columns",
                x.len(),
                self.ints.ncols()
            )));
        }
        Ok(self.ints.mapv(i64::from).dot(x))
    }
}

/// Symmetric absmax quantization with one scale for the whole block.
pub fn quantize_block(block: &Array2<f64>, bits: u32) -> Result<QuantizedBlock> {
    if block.is_empty() {
        return Err(Error::Empty("quantization block"));
    }
    if !(2..=32).contains(&bits) {
        return Err(Error::config("bits", "must be between 2 and 32"));
    }
    if block.iter().any(|w| !w.is_finite()) {
        return Err(Error::NonFinite("quantization block"));
    }
    let qmax = ((1i64 << (bits - 1)) - 1) as f64;
    let absmax = block.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    if absmax == 0.0 {
        return Ok(QuantizedBlock {
            ints: Array2::zeros(block.dim()),
            scale: 1.0,
            bits,
        });
    }
    let scale = absmax / qmax;
    let ints = block.mapv(|w| (w / scale).round_ties_even().clamp(-qmax, qmax) as i32);
    Ok(QuantizedBlock { ints, scale, bits })
}

pub fn dequantize_mvm(int_acc: &Array1<i64>, scale: f64) -> Array1<f64> {
    int_acc.mapv(|v| v as f64 * scale)
}

/// Dequantization operations for one MVM over a `rows`×`cols` block.
///
/// Returns (post-MVM, pre-compute): one scale multiply per output column
/// after the crossbar, against one per stored weight when weights are
/// dequantized before the product.
pub fn dequant_op_counts(rows: u64, cols: u64) -> (u64, u64) {
    (cols, rows * cols)
}

pub const PIPELINE_DEPTH: u64 = 4;

/// Cycles to push `vectors` bit-serial inputs through the tile pipeline.
pub fn mvm_latency(vectors: u64, input_bits: u32, cfg: &ReramTileConfig, dequant_enabled: bool) -> Result<u64> {
    if input_bits == 0 {
        return Err(Error::config("input_bits", "must be positive"));
    }
    if !input_bits.is_multiple_of(cfg.dac_bits.max(1)) {
        return Err(Error::config("input_bits", "must be a multiple of the DAC resolution"));
    }
    let depth = PIPELINE_DEPTH + u64::from(dequant_enabled);
    let slices = u64::from(input_bits / cfg.dac_bits.max(1));
    Ok(vectors * slices + depth)
}

/// Seconds for a weight-stationary kernel fed `vectors` input rows.
pub fn kernel_seconds(vectors: u64, input_bits: u32, cfg: &ReramTileConfig, dequant_enabled: bool) -> Result<f64> {
    let per_copy = vectors.div_ceil(cfg.weight_duplication);
    Ok(mvm_latency(per_copy, input_bits, cfg, dequant_enabled)? as f64 / cfg.clock_hz)
}

pub fn reram_energy(active_tiles: u64, duration_s: f64, cfg: &ReramTileConfig, dequant_enabled: bool) -> f64 {
    let overhead = if dequant_enabled { 1.0 + cfg.dequant_power_overhead } else { 1.0 };
    active_tiles as f64 * cfg.tile_power_w * overhead * duration_s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MappingPolicy {
    /// Every matrix product, including attention scores, runs in crossbars.
    AllOnReram,
    /// Dynamic products run on the systolic tier.
    Heterogeneous,
}

/// Dynamic-operand writes into crossbars for one sequence on one core.
///
/// With one head per core, the transposed key block and the value block of
/// that head (n × d_model/h each) must be programmed before the score and
/// context products can stream through. Counted in matrix elements.
pub fn rewrite_count(cfg: &TransformerConfig, policy: MappingPolicy) -> u64 {
    match policy {
        MappingPolicy::AllOnReram => 2 * cfg.n * cfg.head_dim(),
        MappingPolicy::Heterogeneous => 0,
    }
}

/// [`rewrite_count`] expressed in cells at `bits` per element.
pub fn rewrite_cells(cfg: &TransformerConfig, policy: MappingPolicy, bits: u32, tile: &ReramTileConfig) -> u64 {
    rewrite_count(cfg, policy) * u64::from(bits.div_ceil(tile.bits_per_cell))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::{preset, Phase};
    use ndarray::array;

    #[test]
    fn crossbar_counts() {
        let c = ReramTileConfig::default();
        assert_eq!(crossbars_for_matrix(1024, 1024, 16, &c).unwrap(), 512);
        assert_eq!(crossbars_for_matrix(1024, 1024, 4, &c).unwrap(), 128);
        assert_eq!(c.weights_per_crossbar(4), 8192);
        assert!(crossbars_for_matrix(8, 8, 3, &c).is_err());
        // 32-bit to 8-bit keeps a quarter of the cells.
        let full = crossbars_for_matrix(1024, 1024, 32, &c).unwrap();
        let q8 = crossbars_for_matrix(1024, 1024, 8, &c).unwrap();
        assert_eq!(q8 * 4, full);
    }

    #[test]
    fn quantize_examples() {
        let z = quantize_block(&array![[0.0]], 4).unwrap();
        assert_eq!(z.scale, 1.0);
        assert_eq!(z.ints, array![[0]]);

        let q = quantize_block(&array![[-1.0, 0.5, 1.0]], 4).unwrap();
        assert!((q.scale - 1.0 / 7.0).abs() < 1e-15);
        assert_eq!(q.ints, array![[-7, 4, 7]]);

        assert!(matches!(
            quantize_block(&array![[f64::NAN]], 8),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn dequantize_examples() {
        let acc = array![3i64, -2];
        assert_eq!(dequantize_mvm(&acc, 1.0), array![3.0, -2.0]);

        let q = QuantizedBlock {
            ints: array![[-7, 4], [7, 0]],
            scale: 1.0 / 7.0,
            bits: 4,
        };
        let out = dequantize_mvm(&q.int_mvm(&array![1, 2]).unwrap(), q.scale);
        assert!((out[0] - 1.0 / 7.0).abs() < 1e-15);
        assert!((out[1] - 1.0).abs() < 1e-15);

        let (post, pre) = dequant_op_counts(128, 128);
        assert_eq!(pre / post, 128);
    }

    #[test]
    fn latency_examples() {
        let c = ReramTileConfig::default();
        assert_eq!(mvm_latency(1, 16, &c, false).unwrap(), 20);
        assert_eq!(mvm_latency(1, 16, &c, true).unwrap(), 21);
        assert_eq!(mvm_latency(2, 16, &c, false).unwrap(), 36);
        assert!(mvm_latency(1, 0, &c, false).is_err());
    }

    #[test]
    fn energy_examples() {
        let c = ReramTileConfig::default();
        assert!((reram_energy(1, 1.0, &c, false) - 0.345).abs() < 1e-15);
        assert!((reram_energy(1, 1.0, &c, true) - 0.345 * 1.015).abs() < 1e-15);
        assert_eq!(reram_energy(0, 1.0, &c, true), 0.0);
    }

    #[test]
    fn rewrites() {
        let mut cfg = preset("bert-large").unwrap();
        cfg.n = 1024;
        let writes = rewrite_count(&cfg, MappingPolicy::AllOnReram);
        assert_eq!(writes, 131_072);
        assert_eq!(rewrite_count(&cfg, MappingPolicy::Heterogeneous), 0);
        let mut one = cfg;
        one.n = 1;
        assert_eq!(rewrite_count(&one, MappingPolicy::AllOnReram) * 1024, writes);
        let tile = ReramTileConfig::default();
        assert_eq!(rewrite_cells(&cfg, MappingPolicy::AllOnReram, 16, &tile), writes * 8);
    }

    #[test]
    fn layer_crossbars_shrink_with_precision() {
        let c = ReramTileConfig::default();
        let cfg = TransformerConfig::new(1024, 1024, 1, 16, 32, 2, Phase::FineTune);
        let full = layer_crossbars(&cfg, &PrecisionPlan::uniform(16), &c).unwrap();
        assert_eq!(full.total(), 12 * 512);
        let m8f4 = layer_crossbars(&cfg, &PrecisionPlan::new(8, 4), &c).unwrap();
        let m4f8 = layer_crossbars(&cfg, &PrecisionPlan::new(4, 8), &c).unwrap();
        assert!(m8f4.total() < m4f8.total());
    }
}
