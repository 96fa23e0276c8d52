//! Kernel placement and the four-stage intra-layer pipeline.
//!
//! Static-weight products stay in ReRAM crossbars; products with two
//! dynamic operands and the non-linear kernels go to the systolic tier.
//! Each layer runs as S1 (QKV and output projections, ReRAM), S2 (attention
//! scores, softmax, norm and adapters, systolic), S3 (FF1, ReRAM) and S4
//! (FF2 and the second norm).

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hardware::HardwareSpec;
use crate::noc::{build_topology, evaluate_noc, gen_traffic, NocEvaluation, Placement};
use crate::reram::{self, crossbars_for_matrix};
use crate::systolic::{lower_kernel, work_cycles};
use crate::workload::{enumerate_kernels, KernelClass, KernelId, KernelInstance, TransformerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StageId {
    S1,
    S2,
    S3,
    S4,
}

impl StageId {
    pub const ALL: [StageId; 4] = [StageId::S1, StageId::S2, StageId::S3, StageId::S4];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn resource(self) -> Resource {
        match self {
            StageId::S2 => Resource::Systolic,
            _ => Resource::Reram,
        }
    }

    pub fn of_kernel(id: KernelId) -> StageId {
        match id {
            KernelId::Mha1 | KernelId::Mha4 => StageId::S1,
            KernelId::Mha2 | KernelId::Mha3 | KernelId::L1 | KernelId::LoraFwd | KernelId::LoraBwd => StageId::S2,
            KernelId::Ff1 => StageId::S3,
            KernelId::Ff2 | KernelId::L2 => StageId::S4,
        }
    }
}

impl fmt::Display for StageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S{}", self.index() + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Resource {
    Reram,
    Systolic,
}

impl fmt::Display for Resource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Resource::Reram => "ReRAM",
            Resource::Systolic => "Systolic",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub reram_kernels: Vec<KernelInstance>,
    pub systolic_kernels: Vec<KernelInstance>,
    pub mm_reram: u64,
    pub mm_systolic: u64,
}

pub fn partition(kernels: &[KernelInstance]) -> Partition {
    let (reram_kernels, systolic_kernels): (Vec<_>, Vec<_>) =
        kernels.iter().cloned().partition(|k| k.class == KernelClass::StaticWeight);
    Partition {
        mm_reram: reram_kernels.iter().map(|k| k.macs).sum(),
        mm_systolic: systolic_kernels.iter().map(|k| k.macs).sum(),
        reram_kernels,
        systolic_kernels,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComputeShare {
    pub exact_ratio: f64,
    pub approx_ratio: f64,
    pub reram_share_pct: f64,
}

/// ReRAM-to-systolic op ratio, counting one adapter product pair per adapted matrix.
pub fn compute_share(cfg: &TransformerConfig) -> Result<ComputeShare> {
    cfg.validate()?;
    let (d, n, r, k) = (cfg.d_model as f64, cfg.n as f64, cfg.r as f64, cfg.k as f64);
    let reram = 12.0 * d * d * n;
    let systolic = d * n * n + 2.0 * k * d * r * n + 3.0 * d * n;
    let exact_ratio = reram / systolic;
    Ok(ComputeShare {
        exact_ratio,
        approx_ratio: 12.0 * d / n,
        reram_share_pct: 100.0 * exact_ratio / (1.0 + exact_ratio),
    })
}

pub fn dram_transfer_time(bytes: u64, hw: &HardwareSpec) -> f64 {
    bytes as f64 / hw.dram.effective_bandwidth()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub id: StageId,
    pub resource: Resource,
    pub kernels: Vec<String>,
    pub compute_delay: f64,
    pub comm_delay: f64,
    /// Adapter weight load time left exposed after overlap (S2 only).
    pub exposed_load_delay: f64,
    /// Crossbar energy of one pass through the stage.
    pub reram_energy: f64,
    /// Systolic-core energy of one pass through the stage.
    pub systolic_energy: f64,
    pub ops: u64,
}

impl Stage {
    pub fn total_delay(&self) -> f64 {
        self.compute_delay + self.comm_delay
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSchedule {
    pub stages: Vec<Stage>,
    pub core_ratio: (u64, u64),
    pub noc: Option<NocEvaluation>,
}

impl PipelineSchedule {
    pub fn stage(&self, id: StageId) -> &Stage {
        &self.stages[id.index()]
    }

    /// Schedule with the given per-stage compute delays and no communication.
    pub fn from_delays(delays: [f64; 4]) -> PipelineSchedule {
        let stages = StageId::ALL
            .iter()
            .zip(delays)
            .map(|(&id, d)| Stage {
                id,
                resource: id.resource(),
                kernels: Vec::new(),
                compute_delay: d,
                comm_delay: 0.0,
                exposed_load_delay: 0.0,
                reram_energy: 0.0,
                systolic_energy: 0.0,
                ops: 0,
            })
            .collect();
        PipelineSchedule {
            stages,
            core_ratio: (3, 1),
            noc: None,
        }
    }
}

/// Per-kernel systolic delay, reported for the feasibility check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystolicKernelTime {
    pub kernel: String,
    pub cycles: u64,
    pub seconds: f64,
}

pub fn systolic_kernel_times(cfg: &TransformerConfig, hw: &HardwareSpec) -> Result<Vec<SystolicKernelTime>> {
    let kernels = layer_kernels(cfg)?;
    let mut out = Vec::new();
    for k in kernels.iter().filter(|k| StageId::of_kernel(k.id) == StageId::S2) {
        if let Some(work) = lower_kernel(k, cfg) {
            let (cycles, _) = work_cycles(&work, &hw.systolic)?;
            out.push(SystolicKernelTime {
                kernel: k.label(),
                cycles,
                seconds: cycles as f64 / hw.systolic.clock_hz,
            });
        }
    }
    Ok(out)
}

fn layer_kernels(cfg: &TransformerConfig) -> Result<Vec<KernelInstance>> {
    let one = TransformerConfig { num_layers: 1, ..*cfg };
    enumerate_kernels(&one)
}

/// Crossbars holding the frozen weights of one static kernel.
fn kernel_crossbars(k: &KernelInstance, cfg: &TransformerConfig, hw: &HardwareSpec) -> Result<u64> {
    let (_, kk, nn) = k.operand_dims;
    let bits = match k.id {
        KernelId::Mha1 | KernelId::Mha4 => cfg.precision.mha_bits,
        _ => cfg.precision.ff_bits,
    };
    Ok(k.multiplicity * crossbars_for_matrix(kk, nn, bits, &hw.reram)? * hw.reram.weight_duplication)
}

/// Binds one layer's kernels to the four stages and times each stage.
///
/// ReRAM kernels of a stage sit on disjoint crossbars and stream the same
/// `n` token vectors concurrently, so a stage takes as long as its slowest
/// kernel. Systolic kernels run back to back on one core. Communication
/// delays come from evaluating every layer's flows on the configured NoC.
pub fn build_pipeline(cfg: &TransformerConfig, hw: &HardwareSpec) -> Result<PipelineSchedule> {
    cfg.validate()?;
    hw.validate()?;
    let kernels = layer_kernels(cfg)?;
    let dequant = cfg.precision.is_quantized();
    let input_bits = cfg.precision.activation_bits;
    let sys = &hw.systolic;

    let mut stages: Vec<Stage> = StageId::ALL
        .iter()
        .map(|&id| Stage {
            id,
            resource: id.resource(),
            kernels: Vec::new(),
            compute_delay: 0.0,
            comm_delay: 0.0,
            exposed_load_delay: 0.0,
            reram_energy: 0.0,
            systolic_energy: 0.0,
            ops: 0,
        })
        .collect();

    let mut s2_kernels = Vec::new();
    let mut s2_compute = 0.0;
    // Non-linear work outside S2 runs after the crossbars finish.
    let mut tail = [0.0f64; 4];
    let mut crossbar_time = [0.0f64; 4];
    for k in &kernels {
        let sid = StageId::of_kernel(k.id);
        let stage = &mut stages[sid.index()];
        stage.kernels.push(k.label());
        stage.ops += k.macs;
        if k.class == KernelClass::StaticWeight {
            let t = reram::kernel_seconds(cfg.n, input_bits, &hw.reram, dequant)?;
            let tiles = kernel_crossbars(k, cfg, hw)?.div_ceil(hw.reram.xbars_per_tile);
            crossbar_time[sid.index()] = crossbar_time[sid.index()].max(t);
            stage.reram_energy += reram::reram_energy(tiles, t, &hw.reram, dequant);
        } else {
            let work = lower_kernel(k, cfg).expect("non-static kernels lower to systolic work");
            let (cycles, _) = work_cycles(&work, sys)?;
            let t = cycles as f64 / sys.clock_hz;
            stage.systolic_energy += sys.core_power_w * t;
            if sid == StageId::S2 {
                s2_compute += t;
                s2_kernels.push((k.label(), t));
            } else {
                tail[sid.index()] += t;
            }
        }
    }
    for s in &mut stages {
        s.compute_delay = crossbar_time[s.id.index()] + tail[s.id.index()];
    }

    let load = dram_transfer_time(cfg.lora_param_bytes(), hw);
    let exposed = (load - hw.pipeline.load_overlap * s2_compute).max(0.0);
    let s2 = &mut stages[StageId::S2.index()];
    s2.compute_delay = s2_compute + exposed;
    s2.exposed_load_delay = exposed;

    let reram_max = stages
        .iter()
        .filter(|s| s.resource == Resource::Reram)
        .map(|s| s.compute_delay)
        .fold(0.0, f64::max);
    let budget = (1.0 + hw.pipeline.feasibility_slack) * reram_max;
    if let Some((label, t)) = s2_kernels.iter().find(|(_, t)| *t > budget) {
        return Err(Error::Infeasible {
            kernel: label.clone(),
            kernel_delay_s: *t,
            budget_s: budget,
            reram_delay_s: reram_max,
        });
    }

    let topo = build_topology(hw.topology, &hw.noc);
    let traffic = gen_traffic(cfg, &Placement::serpentine(cfg.num_layers))?;
    let noc = if traffic.flows.is_empty() {
        None
    } else {
        let eval = evaluate_noc(&topo, &traffic, &hw.noc)?;
        for s in &mut stages {
            s.comm_delay = eval.stage_delay(s.id);
        }
        Some(eval)
    };

    Ok(PipelineSchedule {
        stages,
        core_ratio: (hw.reram_cores, hw.systolic_cores),
        noc,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineTiming {
    pub stage_time: f64,
    pub throughput: f64,
    pub end_to_end_latency: f64,
    pub exact: ExactTiming,
}

/// Timing in exact rational arithmetic over the binary values of the stage delays.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactTiming {
    pub stage_time: BigRational,
    pub throughput: BigRational,
    pub end_to_end_latency: BigRational,
}

fn exact(v: f64) -> BigRational {
    BigRational::from_float(v).unwrap_or_else(BigRational::zero)
}

pub fn pipeline_timing(schedule: &PipelineSchedule, num_layers: u64, batch: u64) -> PipelineTiming {
    let stage_time = schedule
        .stages
        .iter()
        .map(|s| exact(s.compute_delay) + exact(s.comm_delay))
        .max()
        .unwrap_or_else(BigRational::zero);
    let depth = 4 * num_layers;
    let slots = BigRational::from_integer(BigInt::from(depth + batch) - BigInt::one());
    let latency = &slots * &stage_time;
    let throughput = if stage_time.is_zero() {
        BigRational::zero()
    } else {
        stage_time.recip()
    };
    let f = |r: &BigRational| r.to_f64().unwrap_or(f64::NAN);
    PipelineTiming {
        stage_time: f(&stage_time),
        throughput: if stage_time.is_zero() { f64::INFINITY } else { f(&throughput) },
        end_to_end_latency: f(&latency),
        exact: ExactTiming {
            stage_time,
            throughput,
            end_to_end_latency: latency,
        },
    }
}
