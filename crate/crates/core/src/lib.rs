//! Analytical models of a 3D-stacked transformer accelerator: ReRAM
//! crossbar tiers for static weights, a systolic tier for dynamic products,
//! and the network and manufacturing cost that tie them together.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` rejects NaN on purpose.

pub mod cost;
pub mod error;
pub mod experiment;
pub mod hardware;
pub mod mapping;
pub mod noc;
pub mod report;
pub mod reram;
pub mod systolic;
pub mod workload;

pub use error::{Error, Result};
pub use experiment::{run, ExperimentConfig, ExperimentKind, WorkloadSection};
pub use hardware::HardwareSpec;
pub use mapping::{PipelineSchedule, StageId};
pub use noc::{NocParams, Topology, TopologyKind};
pub use report::{Format, Report};
pub use reram::{MappingPolicy, ReramTileConfig};
pub use systolic::{MMJob, SystolicConfig};
pub use workload::{KernelInstance, Phase, PrecisionPlan, TransformerConfig};
