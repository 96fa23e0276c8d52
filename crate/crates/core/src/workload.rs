//! Transformer workload description and the per-layer kernel catalog.
//!
//! A layer is broken into eight base kernels (four attention, two feed-forward,
//! two layer norms) plus low-rank adapter kernels for every adapted weight
//! matrix. MAC counts are exact integers; non-linear kernels count one
//! elementwise op per activation.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    FineTune,
    Inference,
}

/// Weight precision per transformer module. Adapter weights always stay at 16 bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PrecisionPlan {
    pub mha_bits: u32,
    pub ff_bits: u32,
    pub lora_bits: u32,
    pub activation_bits: u32,
}

pub const LORA_BITS: u32 = 16;
const WEIGHT_BIT_CHOICES: [u32; 3] = [4, 8, 16];

impl Default for PrecisionPlan {
    fn default() -> Self {
        Self::uniform(16)
    }
}

impl PrecisionPlan {
    pub fn new(mha_bits: u32, ff_bits: u32) -> Self {
        Self {
            mha_bits,
            ff_bits,
            lora_bits: LORA_BITS,
            activation_bits: 16,
        }
    }

    pub fn uniform(bits: u32) -> Self {
        Self::new(bits, bits)
    }

    /// `MnFm` rendering, e.g. `M8F4`.
    pub fn label(&self) -> String {
        format!("M{}F{}", self.mha_bits, self.ff_bits)
    }

    /// Any module stored below 16 bits needs crossbar-level dequantization.
    pub fn is_quantized(&self) -> bool {
        self.mha_bits < 16 || self.ff_bits < 16
    }

    pub fn validate(&self) -> Result<()> {
        if !WEIGHT_BIT_CHOICES.contains(&self.mha_bits) {
            return Err(Error::config("precision.mha_bits", "must be one of 4, 8, 16"));
        }
        if !WEIGHT_BIT_CHOICES.contains(&self.ff_bits) {
            return Err(Error::config("precision.ff_bits", "must be one of 4, 8, 16"));
        }
        if self.lora_bits != LORA_BITS {
            return Err(Error::config("precision.lora_bits", "adapter weights are never quantized; must be 16"));
        }
        if self.activation_bits == 0 {
            return Err(Error::config("precision.activation_bits", "must be positive"));
        }
        Ok(())
    }
}

impl fmt::Display for PrecisionPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TransformerConfig {
    pub d_model: u64,
    /// Sequence length in tokens.
    pub n: u64,
    pub d_ff: u64,
    pub num_layers: u64,
    pub num_heads: u64,
    /// Adapter rank.
    pub r: u64,
    /// Number of adapted weight matrices per layer.
    pub k: u64,
    pub phase: Phase,
    pub precision: PrecisionPlan,
}

impl TransformerConfig {
    pub fn new(d_model: u64, n: u64, num_layers: u64, num_heads: u64, r: u64, k: u64, phase: Phase) -> Self {
        Self {
            d_model,
            n,
            d_ff: 4 * d_model,
            num_layers,
            num_heads,
            r,
            k,
            phase,
            precision: PrecisionPlan::default(),
        }
    }

    pub fn with_precision(mut self, precision: PrecisionPlan) -> Self {
        self.precision = precision;
        self
    }

    pub fn head_dim(&self) -> u64 {
        self.d_model / self.num_heads
    }

    pub fn activation_bytes(&self) -> u64 {
        u64::from(self.precision.activation_bits).div_ceil(8)
    }

    /// Adapter parameter bytes for one layer (A and B for each adapted matrix).
    pub fn lora_param_bytes(&self) -> u64 {
        self.k * 2 * self.d_model * self.r * u64::from(self.precision.lora_bits) / 8
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("workload.d_model", self.d_model),
            ("workload.n", self.n),
            ("workload.d_ff", self.d_ff),
            ("workload.num_layers", self.num_layers),
            ("workload.num_heads", self.num_heads),
            ("workload.r", self.r),
        ];
        for (field, v) in positive {
            if v == 0 {
                return Err(Error::config(field, "must be a positive integer"));
            }
        }
        if !self.d_model.is_multiple_of(self.num_heads) {
            return Err(Error::config(
                "workload.num_heads",
                format!("d_model {} is not divisible by {} heads", self.d_model, self.num_heads),
            ));
        }
        if self.r >= self.d_model {
            return Err(Error::config(
                "workload.r",
                format!("rank {} must be smaller than d_model {}", self.r, self.d_model),
            ));
        }
        if self.k > LoraTarget::ALL.len() as u64 {
            return Err(Error::config(
                "workload.k",
                format!("at most 4 attention matrices can carry adapters, got {}", self.k),
            ));
        }
        self.precision.validate()
    }
}

/// Built-in model shapes. Sequence lengths are each model's maximum context.
pub const PRESET_NAMES: [&str; 4] = ["roberta-base", "bert-large", "gpt2-medium", "bloom-560m"];

pub fn preset(name: &str) -> Result<TransformerConfig> {
    let (d_model, n, layers, heads) = match name {
        "roberta-base" => (768, 512, 12, 12),
        "bert-large" => (1024, 512, 24, 16),
        "gpt2-medium" => (1024, 1024, 24, 16),
        "bloom-560m" => (1024, 2048, 24, 16),
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    Ok(TransformerConfig::new(d_model, n, layers, heads, 32, 2, Phase::FineTune))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum KernelId {
    Mha1,
    Mha2,
    Mha3,
    Mha4,
    L1,
    Ff1,
    Ff2,
    L2,
    LoraFwd,
    LoraBwd,
}

impl KernelId {
    pub fn class(self) -> KernelClass {
        match self {
            KernelId::Mha1 | KernelId::Mha4 | KernelId::Ff1 | KernelId::Ff2 => KernelClass::StaticWeight,
            KernelId::Mha2 | KernelId::LoraFwd | KernelId::LoraBwd => KernelClass::DynamicMM,
            KernelId::Mha3 | KernelId::L1 | KernelId::L2 => KernelClass::NonLinear,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelId::Mha1 => "MHA1",
            KernelId::Mha2 => "MHA2",
            KernelId::Mha3 => "MHA3",
            KernelId::Mha4 => "MHA4",
            KernelId::L1 => "L1",
            KernelId::Ff1 => "FF1",
            KernelId::Ff2 => "FF2",
            KernelId::L2 => "L2",
            KernelId::LoraFwd => "LoRA_Fwd",
            KernelId::LoraBwd => "LoRA_Bwd",
        }
    }
}

impl fmt::Display for KernelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KernelClass {
    StaticWeight,
    DynamicMM,
    NonLinear,
}

/// Attention weight matrices that can carry an adapter, in the order adapters are assigned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LoraTarget {
    Query,
    Value,
    Key,
    Output,
}

impl LoraTarget {
    pub const ALL: [LoraTarget; 4] = [LoraTarget::Query, LoraTarget::Value, LoraTarget::Key, LoraTarget::Output];

    pub fn name(self) -> &'static str {
        match self {
            LoraTarget::Query => "WQ",
            LoraTarget::Value => "WV",
            LoraTarget::Key => "WK",
            LoraTarget::Output => "WO",
        }
    }
}

/// One computation of the layer catalog.
///
/// `operand_dims` is the (M, K, N) shape of a single product; `multiplicity`
/// counts how many such products the kernel performs (three projections for
/// MHA1, one per head for MHA2/MHA3, two chained factor products for an
/// adapter kernel).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelInstance {
    pub id: KernelId,
    pub layer_index: u64,
    pub operand_dims: (u64, u64, u64),
    pub multiplicity: u64,
    pub macs: u64,
    pub class: KernelClass,
    pub trainable_param_count: u64,
    pub lora_target: Option<LoraTarget>,
}

impl KernelInstance {
    pub fn label(&self) -> String {
        match self.lora_target {
            Some(t) => format!("{}[{}]", self.id, t.name()),
            None => self.id.to_string(),
        }
    }
}

/// Exact op count for a kernel of `cfg`.
pub fn kernel_macs(kernel: &KernelInstance, cfg: &TransformerConfig) -> u64 {
    let (d, n) = (cfg.d_model, cfg.n);
    match kernel.id {
        KernelId::Mha1 => 3 * d * d * n,
        KernelId::Mha2 => d * n * n,
        KernelId::Mha4 => d * d * n,
        KernelId::Ff1 | KernelId::Ff2 => n * d * cfg.d_ff,
        KernelId::Mha3 | KernelId::L1 | KernelId::L2 => d * n,
        KernelId::LoraFwd | KernelId::LoraBwd => 2 * d * cfg.r * n,
    }
}

/// Per-layer op total written out term by term, used to cross-check the catalog.
pub fn layer_macs_closed_form(cfg: &TransformerConfig) -> u64 {
    let (d, n, r, k) = (cfg.d_model, cfg.n, cfg.r, cfg.k);
    let lora_kernels = match cfg.phase {
        Phase::FineTune => 2 * k,
        Phase::Inference => k,
    };
    4 * d * d * n + 2 * n * d * cfg.d_ff + d * n * n + lora_kernels * 2 * d * r * n + 3 * d * n
}

pub fn enumerate_kernels(cfg: &TransformerConfig) -> Result<Vec<KernelInstance>> {
    cfg.validate()?;
    let (d, n, r, h) = (cfg.d_model, cfg.n, cfg.r, cfg.num_heads);
    let dh = cfg.head_dim();
    let fine_tune = cfg.phase == Phase::FineTune;

    let per_layer = 8 + cfg.k as usize * if fine_tune { 2 } else { 1 };
    let mut out = Vec::with_capacity(per_layer * cfg.num_layers as usize);
    for layer in 0..cfg.num_layers {
        let mut push = |id: KernelId, dims: (u64, u64, u64), multiplicity: u64, target: Option<LoraTarget>, trainable: u64| {
            let mut k = KernelInstance {
                id,
                layer_index: layer,
                operand_dims: dims,
                multiplicity,
                macs: 0,
                class: id.class(),
                trainable_param_count: trainable,
                lora_target: target,
            };
            k.macs = kernel_macs(&k, cfg);
            out.push(k);
        };
        push(KernelId::Mha1, (n, d, d), 3, None, 0);
        push(KernelId::Mha2, (n, dh, n), h, None, 0);
        push(KernelId::Mha3, (n, n, dh), h, None, 0);
        push(KernelId::Mha4, (n, d, d), 1, None, 0);
        push(KernelId::L1, (n, d, 1), 1, None, 0);
        push(KernelId::Ff1, (n, d, cfg.d_ff), 1, None, 0);
        push(KernelId::Ff2, (n, cfg.d_ff, d), 1, None, 0);
        push(KernelId::L2, (n, d, 1), 1, None, 0);
        for &target in LoraTarget::ALL.iter().take(cfg.k as usize) {
            let trainable = if fine_tune { 2 * d * r } else { 0 };
            push(KernelId::LoraFwd, (n, d, r), 2, Some(target), trainable);
            if fine_tune {
                push(KernelId::LoraBwd, (n, d, r), 2, Some(target), 0);
            }
        }
    }
    Ok(out)
}
