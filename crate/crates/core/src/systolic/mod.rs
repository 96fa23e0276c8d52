//! Output-stationary systolic array model.
//!
//! A product of an M×K by K×N matrix is tiled into folds of at most R×C
//! outputs. Each fold pays a skewed fill, K streaming MAC cycles and a
//! row-serial drain of its outputs; folds run back to back.
//! [`event::event_sim`] is the cycle-by-cycle reference for the closed form.

pub mod event;

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::workload::{KernelId, KernelInstance, TransformerConfig};

pub use event::{event_sim, EventSimResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dataflow {
    #[serde(rename = "OS")]
    OutputStationary,
    #[serde(rename = "WS")]
    WeightStationary,
    #[serde(rename = "IS")]
    InputStationary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnergyMode {
    /// Core power times busy time.
    #[default]
    PowerTime,
    /// Fixed energy per MAC.
    PerMac,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SystolicConfig {
    pub rows: u64,
    pub cols: u64,
    pub clock_hz: f64,
    pub sram_bytes: u64,
    pub dataflow: Dataflow,
    pub pe_energy_per_mac: f64,
    pub core_power_w: f64,
    pub core_area_mm2: f64,
    #[serde(default)]
    pub energy_mode: EnergyMode,
}

impl Default for SystolicConfig {
    /// 128×32 PEs, 1 Mb SRAM, 800 MHz, 2.55 mm², 2.13 W.
    fn default() -> Self {
        Self {
            rows: 128,
            cols: 32,
            clock_hz: 800e6,
            sram_bytes: 1 << 17,
            dataflow: Dataflow::OutputStationary,
            // 2.13 W spread over 4096 PEs at 800 MHz.
            pe_energy_per_mac: 2.13 / (4096.0 * 800e6),
            core_power_w: 2.13,
            core_area_mm2: 2.55,
            energy_mode: EnergyMode::PowerTime,
        }
    }
}

impl SystolicConfig {
    pub fn with_shape(rows: u64, cols: u64) -> Self {
        Self {
            rows,
            cols,
            ..Self::default()
        }
    }

    pub fn pes(&self) -> u64 {
        self.rows * self.cols
    }

    pub fn shape_label(&self) -> String {
        format!("{}x{}", self.rows, self.cols)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::config("hardware.systolic.rows", "array dimensions must be positive"));
        }
        if !(self.clock_hz > 0.0) || !self.clock_hz.is_finite() {
            return Err(Error::config("hardware.systolic.clock_hz", "must be positive"));
        }
        if self.dataflow != Dataflow::OutputStationary {
            return Err(Error::UnsupportedDataflow(self.dataflow));
        }
        Ok(())
    }
}

/// Product of an M×K matrix by a K×N matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MMJob {
    pub m: u64,
    pub k: u64,
    pub n: u64,
}

impl MMJob {
    pub fn new(m: u64, k: u64, n: u64) -> Self {
        Self { m, k, n }
    }

    pub fn macs(&self) -> u64 {
        self.m * self.k * self.n
    }
}

impl fmt::Display for MMJob {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.m, self.k, self.n)
    }
}

/// Cycles of one fold occupying `r`×`c` PEs with reduction depth `k`.
pub fn fold_cycles(r: u64, c: u64, k: u64) -> u64 {
    (r - 1) + (c - 1) + k + r
}

pub fn analytic_cycles(job: &MMJob, cfg: &SystolicConfig) -> Result<u64> {
    if cfg.dataflow != Dataflow::OutputStationary {
        return Err(Error::UnsupportedDataflow(cfg.dataflow));
    }
    Ok(os_cycles(job, cfg.rows, cfg.cols))
}

fn os_cycles(job: &MMJob, rows: u64, cols: u64) -> u64 {
    if job.m == 0 || job.k == 0 || job.n == 0 {
        return 0;
    }
    let full_r = job.m / rows;
    let tail_r = job.m % rows;
    let full_c = job.n / cols;
    let tail_c = job.n % cols;
    // Folds of equal shape have equal cost, so sum by class instead of iterating.
    let mut total = 0;
    for (rcount, r) in [(full_r, rows), (u64::from(tail_r > 0), tail_r)] {
        for (ccount, c) in [(full_c, cols), (u64::from(tail_c > 0), tail_c)] {
            if rcount > 0 && ccount > 0 {
                total += rcount * ccount * fold_cycles(r, c, job.k);
            }
        }
    }
    total
}

pub fn utilization(job: &MMJob, cfg: &SystolicConfig) -> Result<f64> {
    let cycles = analytic_cycles(job, cfg)?;
    if cycles == 0 {
        return Ok(0.0);
    }
    Ok(job.macs() as f64 / (cfg.pes() as f64 * cycles as f64))
}

pub fn systolic_energy(job: &MMJob, cfg: &SystolicConfig) -> Result<f64> {
    Ok(match cfg.energy_mode {
        EnergyMode::PowerTime => cfg.core_power_w * (analytic_cycles(job, cfg)? as f64 / cfg.clock_hz),
        EnergyMode::PerMac => job.macs() as f64 * cfg.pe_energy_per_mac,
    })
}

/// Cycles for an elementwise pass at one op per PE per cycle.
pub fn elementwise_cycles(ops: u64, cfg: &SystolicConfig) -> u64 {
    ops.div_ceil(cfg.pes())
}

/// How a kernel executes on the array.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SystolicWork {
    Products(Vec<MMJob>),
    Elementwise(u64),
}

/// Lowers a systolic-tier kernel to array work.
///
/// Attention scores run one product per head. An adapter forward pass is
/// `(X·A)·B`; its backward pass is the pair of skinny gradient products
/// `dY·Bᵀ` (n×d×r) and `Xᵀ·G` (d×n×r). Static-weight kernels are not
/// systolic work and return `None`.
pub fn lower_kernel(kernel: &KernelInstance, cfg: &TransformerConfig) -> Option<SystolicWork> {
    let (d, n, r) = (cfg.d_model, cfg.n, cfg.r);
    match kernel.id {
        KernelId::Mha2 => {
            let (m, k, nn) = kernel.operand_dims;
            Some(SystolicWork::Products(vec![MMJob::new(m, k, nn); kernel.multiplicity as usize]))
        }
        KernelId::Mha3 | KernelId::L1 | KernelId::L2 => Some(SystolicWork::Elementwise(kernel.macs)),
        KernelId::LoraFwd => Some(SystolicWork::Products(vec![MMJob::new(n, d, r), MMJob::new(n, r, d)])),
        KernelId::LoraBwd => Some(SystolicWork::Products(vec![MMJob::new(n, d, r), MMJob::new(d, n, r)])),
        KernelId::Mha1 | KernelId::Mha4 | KernelId::Ff1 | KernelId::Ff2 => None,
    }
}

/// Cycle count and useful-op count for a lowered kernel.
pub fn work_cycles(work: &SystolicWork, cfg: &SystolicConfig) -> Result<(u64, u64)> {
    match work {
        SystolicWork::Products(jobs) => {
            let mut cycles = 0;
            let mut ops = 0;
            for j in jobs {
                cycles += analytic_cycles(j, cfg)?;
                ops += j.macs();
            }
            Ok((cycles, ops))
        }
        SystolicWork::Elementwise(ops) => Ok((elementwise_cycles(*ops, cfg), *ops)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelDelay {
    pub kernel: String,
    pub cycles: u64,
    pub normalized_delay: f64,
    pub utilization: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub config: SystolicConfig,
    pub kernels: Vec<KernelDelay>,
    pub cumulative_delay: f64,
    pub mean_utilization: f64,
    pub feasible: bool,
}

impl SweepEntry {
    pub fn label(&self) -> String {
        self.config.shape_label()
    }
}

/// Evaluates every candidate array on the systolic-tier kernels and ranks them.
///
/// Delays are normalized to `reram_stage_delay`; a candidate is feasible when
/// the normalized stage total is at most 1. Ranking: feasible first, then
/// highest mean per-kernel utilization, then lowest cumulative delay.
pub fn shape_sweep(
    kernels: &[KernelInstance],
    cfg: &TransformerConfig,
    candidates: &[SystolicConfig],
    reram_stage_delay: f64,
) -> Result<Vec<SweepEntry>> {
    if candidates.is_empty() {
        return Err(Error::Empty("shape sweep candidate list"));
    }
    if !(reram_stage_delay > 0.0) {
        return Err(Error::config("reram_stage_delay", "must be positive"));
    }
    let clock = candidates[0].clock_hz;
    if candidates.iter().any(|c| c.clock_hz != clock) {
        return Err(Error::config("candidates.clock_hz", "all candidates must share one clock"));
    }
    let lowered: Vec<(String, SystolicWork)> = kernels
        .iter()
        .filter_map(|k| lower_kernel(k, cfg).map(|w| (k.label(), w)))
        .collect();

    let mut entries = candidates
        .par_iter()
        .map(|cand| -> Result<SweepEntry> {
            cand.validate()?;
            let mut rows = Vec::with_capacity(lowered.len());
            for (label, work) in &lowered {
                let (cycles, ops) = work_cycles(work, cand)?;
                let util = if cycles == 0 { 0.0 } else { ops as f64 / (cand.pes() as f64 * cycles as f64) };
                rows.push(KernelDelay {
                    kernel: label.clone(),
                    cycles,
                    normalized_delay: cycles as f64 / cand.clock_hz / reram_stage_delay,
                    utilization: util,
                });
            }
            let cumulative_delay = rows.iter().map(|r| r.normalized_delay).sum();
            let mean_utilization = if rows.is_empty() {
                0.0
            } else {
                rows.iter().map(|r| r.utilization).sum::<f64>() / rows.len() as f64
            };
            Ok(SweepEntry {
                config: *cand,
                kernels: rows,
                cumulative_delay,
                mean_utilization,
                feasible: cumulative_delay <= 1.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    // Stable sort keeps candidate order for exact ties.
    entries.sort_by(|a, b| {
        b.feasible
            .cmp(&a.feasible)
            .then(b.mean_utilization.total_cmp(&a.mean_utilization))
            .then(a.cumulative_delay.total_cmp(&b.cumulative_delay))
    });
    Ok(entries)
}

/// Candidate shapes covering 1024, 2048 and 4096 PEs.
pub fn default_candidates(base: &SystolicConfig) -> Vec<SystolicConfig> {
    [(32, 32), (64, 32), (128, 16), (128, 32), (64, 64), (256, 16)]
        .into_iter()
        .map(|(r, c)| SystolicConfig { rows: r, cols: c, ..*base })
        .collect()
}
