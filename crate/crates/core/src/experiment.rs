//! Experiment configuration and the runners behind each CLI subcommand.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cost::{self, CostParams, DieSpec};
use crate::error::{Error, Result};
use crate::hardware::HardwareSpec;
use crate::mapping::{build_pipeline, compute_share, partition, pipeline_timing, PipelineSchedule, Resource, StageId};
use crate::noc::{
    build_topology, evaluate_noc, gen_traffic, noc_area, port_histogram, LinkKind, Placement, Topology,
    TopologyKind, NODES_PER_TIER, SYSTOLIC_TIER, TIERS,
};
use crate::report::{Cell, Chart, Format, Metadata, Report, Table};
use crate::reram::layer_crossbars;
use crate::systolic::{default_candidates, shape_sweep};
use crate::workload::{enumerate_kernels, preset, Phase, PrecisionPlan, TransformerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Simulate,
    ShapeSweep,
    QuantSweep,
    NocCompare,
    CostCompare,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::ShapeSweep => "shape-sweep",
            ExperimentKind::QuantSweep => "quant-sweep",
            ExperimentKind::NocCompare => "noc-compare",
            ExperimentKind::CostCompare => "cost-compare",
        }
    }
}

/// Workload as a preset name plus optional overrides, or fully spelled out.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadSection {
    pub preset: Option<String>,
    pub d_model: Option<u64>,
    pub n: Option<u64>,
    pub d_ff: Option<u64>,
    pub num_layers: Option<u64>,
    pub num_heads: Option<u64>,
    pub r: Option<u64>,
    pub k: Option<u64>,
    pub phase: Option<Phase>,
    pub precision: Option<PrecisionPlan>,
}

impl WorkloadSection {
    pub fn from_preset(name: &str) -> Self {
        Self {
            preset: Some(name.to_string()),
            ..Self::default()
        }
    }

    pub fn resolve(&self) -> Result<TransformerConfig> {
        let mut cfg = match &self.preset {
            Some(name) => preset(name)?,
            None => {
                let need = |v: Option<u64>, field: &str| {
                    v.ok_or_else(|| Error::config(format!("workload.{field}"), "required when no preset is given"))
                };
                let d = need(self.d_model, "d_model")?;
                TransformerConfig::new(
                    d,
                    need(self.n, "n")?,
                    need(self.num_layers, "num_layers")?,
                    need(self.num_heads, "num_heads")?,
                    need(self.r, "r")?,
                    self.k.unwrap_or(0),
                    self.phase.unwrap_or(Phase::FineTune),
                )
            }
        };
        if let Some(d) = self.d_model {
            cfg.d_model = d;
            cfg.d_ff = 4 * d;
        }
        let overrides = [
            (&mut cfg.n, self.n),
            (&mut cfg.d_ff, self.d_ff),
            (&mut cfg.num_layers, self.num_layers),
            (&mut cfg.num_heads, self.num_heads),
            (&mut cfg.r, self.r),
            (&mut cfg.k, self.k),
        ];
        for (slot, v) in overrides {
            if let Some(v) = v {
                *slot = v;
            }
        }
        if let Some(p) = self.phase {
            cfg.phase = p;
        }
        if let Some(p) = self.precision {
            cfg.precision = p;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            formats: vec![Format::Csv, Format::Json],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub workload: WorkloadSection,
    #[serde(default)]
    pub hardware: HardwareSpec,
    #[serde(default)]
    pub cost: CostParams,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind, workload: WorkloadSection) -> Self {
        Self {
            experiment,
            workload,
            hardware: HardwareSpec::default(),
            cost: CostParams::default(),
            output: OutputSection::default(),
            seed: 0,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<TransformerConfig> {
        let model = self.workload.resolve()?;
        self.hardware.validate()?;
        self.cost.validate()?;
        Ok(model)
    }

    /// SHA-256 of the canonical JSON form of the configuration, output location excluded.
    pub fn config_hash(&self) -> String {
        let inputs = ExperimentConfig {
            output: OutputSection::default(),
            ..self.clone()
        };
        let canonical = serde_json::to_vec(&inputs).expect("config serializes");
        Sha256::digest(&canonical).iter().map(|b| format!("{b:02x}")).collect()
    }

    fn metadata(&self) -> Metadata {
        Metadata {
            config_hash: self.config_hash(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp_unix: std::env::var("SOURCE_DATE_EPOCH")
                .ok()
                .and_then(|v| v.parse().ok())
                .unwrap_or(0),
        }
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    match cfg.experiment {
        ExperimentKind::Simulate => run_simulate(cfg),
        ExperimentKind::ShapeSweep | ExperimentKind::QuantSweep => run_sweep(cfg),
        ExperimentKind::NocCompare => run_noc_compare(cfg),
        ExperimentKind::CostCompare => run_cost_compare(cfg),
    }
}

fn ms(s: f64) -> Cell {
    Cell::num(s * 1e3)
}

fn mj(j: f64) -> Cell {
    Cell::num(j * 1e3)
}

/// Energy of one input through every layer, split by resource.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown {
    pub reram: f64,
    pub systolic: f64,
    pub noc: f64,
}

impl EnergyBreakdown {
    pub fn of(schedule: &PipelineSchedule, num_layers: u64) -> Self {
        let layers = num_layers as f64;
        Self {
            reram: layers * schedule.stages.iter().map(|s| s.reram_energy).sum::<f64>(),
            systolic: layers * schedule.stages.iter().map(|s| s.systolic_energy).sum::<f64>(),
            noc: schedule.noc.as_ref().map_or(0.0, |n| n.total_energy),
        }
    }

    pub fn compute(&self) -> f64 {
        self.reram + self.systolic
    }

    pub fn total(&self) -> f64 {
        self.compute() + self.noc
    }
}

pub fn run_simulate(cfg: &ExperimentConfig) -> Result<Report> {
    let model = cfg.validate()?;
    let hw = &cfg.hardware;
    let schedule = build_pipeline(&model, hw)?;
    let batch = hw.pipeline.batch;
    let timing = pipeline_timing(&schedule, model.num_layers, batch);
    let share = compute_share(&model)?;
    let part = partition(&enumerate_kernels(&model)?);
    let energy = EnergyBreakdown::of(&schedule, model.num_layers);

    let mut report = Report::new(ExperimentKind::Simulate.name(), cfg.metadata());

    let mut summary = Table::new("summary", &[("metric", "-"), ("value", "-"), ("unit", "-")]);
    let mut row = |m: &str, v: Cell, u: &str| summary.push(vec![m.into(), v, u.into()]);
    row("d_model", model.d_model.into(), "-");
    row("sequence_length", model.n.into(), "tokens");
    row("layers", model.num_layers.into(), "-");
    row("precision", model.precision.label().into(), "-");
    row("topology", hw.topology.name().into(), "-");
    row("systolic_array", hw.systolic.shape_label().into(), "PEs");
    row("batch", batch.into(), "inputs");
    row("stage_time", ms(timing.stage_time), "ms");
    row("throughput", Cell::num(timing.throughput), "inputs/s");
    row("end_to_end_latency", ms(timing.end_to_end_latency), "ms");
    row("compute_ratio_exact", Cell::num(share.exact_ratio), "-");
    row("compute_ratio_approx", Cell::num(share.approx_ratio), "-");
    row("energy_per_input", mj(energy.total()), "mJ");
    row("energy_batch", mj(energy.total() * batch as f64), "mJ");
    if let Some(n) = &schedule.noc {
        row("noc_edp", Cell::num(n.edp), "J*s");
        row("noc_area", Cell::num(n.noc_area_mm2()), "mm2");
    }
    report.tables.push(summary);

    let mut stages = Table::new(
        "stages",
        &[
            ("stage", "-"),
            ("resource", "-"),
            ("kernels", "-"),
            ("compute", "ms"),
            ("comm", "ms"),
            ("exposed_load", "ms"),
            ("total", "ms"),
            ("energy", "mJ"),
        ],
    );
    for s in &schedule.stages {
        stages.push(vec![
            s.id.to_string().into(),
            s.resource.to_string().into(),
            s.kernels.join(" ").into(),
            ms(s.compute_delay),
            ms(s.comm_delay),
            ms(s.exposed_load_delay),
            ms(s.total_delay()),
            mj(s.reram_energy + s.systolic_energy),
        ]);
    }
    report.tables.push(stages);

    let total_ops = (part.mm_reram + part.mm_systolic) as f64;
    let mut breakdown = Table::new(
        "breakdown",
        &[("resource", "-"), ("ops", "-"), ("op_share", "%"), ("energy", "mJ"), ("energy_share", "%")],
    );
    let compute_e = energy.compute();
    for (res, ops, e) in [
        (Resource::Reram, part.mm_reram, energy.reram),
        (Resource::Systolic, part.mm_systolic, energy.systolic),
    ] {
        breakdown.push(vec![
            res.to_string().into(),
            ops.into(),
            Cell::num(100.0 * ops as f64 / total_ops),
            mj(e),
            Cell::num(100.0 * e / compute_e),
        ]);
    }
    report.tables.push(breakdown);

    let mut eq_share = Table::new("compute_share", &[("quantity", "-"), ("value", "-")]);
    eq_share.push(vec!["exact_ratio".into(), Cell::num(share.exact_ratio)]);
    eq_share.push(vec!["approx_ratio".into(), Cell::num(share.approx_ratio)]);
    eq_share.push(vec!["reram_share_pct".into(), Cell::num(share.reram_share_pct)]);
    report.tables.push(eq_share);

    report.charts.push(Chart {
        name: "stage_delays".into(),
        title: "Per-stage compute and communication delay (ms)".into(),
        table: "stages".into(),
        label_column: "stage".into(),
        value_columns: vec!["compute".into(), "comm".into()],
    });
    Ok(report)
}

/// Compute delay of the slowest ReRAM stage, independent of the systolic array.
pub fn reram_stage_delay(model: &TransformerConfig, hw: &HardwareSpec) -> Result<f64> {
    let mut relaxed = *hw;
    relaxed.pipeline.feasibility_slack = f64::INFINITY;
    let s = build_pipeline(model, &relaxed)?;
    Ok(s.stages
        .iter()
        .filter(|s| s.resource == Resource::Reram)
        .map(|s| s.compute_delay)
        .fold(0.0, f64::max))
}

pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Report> {
    match cfg.experiment {
        ExperimentKind::ShapeSweep => run_shape_sweep(cfg),
        ExperimentKind::QuantSweep => run_quant_sweep(cfg),
        other => Err(Error::config("experiment", format!("{} is not a sweep", other.name()))),
    }
}

fn run_shape_sweep(cfg: &ExperimentConfig) -> Result<Report> {
    let model = cfg.validate()?;
    let hw = &cfg.hardware;
    let budget = reram_stage_delay(&model, hw)?;
    let kernels = enumerate_kernels(&TransformerConfig { num_layers: 1, ..model })?;
    let ranked = shape_sweep(&kernels, &model, &default_candidates(&hw.systolic), budget)?;

    let mut report = Report::new(ExperimentKind::ShapeSweep.name(), cfg.metadata());
    let mut summary = Table::new(
        "summary",
        &[
            ("config", "-"),
            ("rank", "-"),
            ("pes", "-"),
            ("cumulative_delay", "normalized"),
            ("mean_utilization", "-"),
            ("feasible", "-"),
        ],
    );
    let mut detail = Table::new(
        "kernels",
        &[
            ("config", "-"),
            ("kernel", "-"),
            ("cycles", "-"),
            ("normalized_delay", "normalized"),
            ("utilization", "-"),
        ],
    );
    for (rank, e) in ranked.iter().enumerate() {
        summary.push(vec![
            e.label().into(),
            (rank + 1).into(),
            e.config.pes().into(),
            Cell::num(e.cumulative_delay),
            Cell::num(e.mean_utilization),
            e.feasible.into(),
        ]);
        for k in &e.kernels {
            detail.push(vec![
                e.label().into(),
                k.kernel.clone().into(),
                k.cycles.into(),
                Cell::num(k.normalized_delay),
                Cell::num(k.utilization),
            ]);
        }
        detail.push(vec![
            e.label().into(),
            "total".into(),
            e.kernels.iter().map(|k| k.cycles).sum::<u64>().into(),
            Cell::num(e.cumulative_delay),
            Cell::num(e.mean_utilization),
        ]);
    }
    let mut base = Table::new("baseline", &[("quantity", "-"), ("value", "-"), ("unit", "-")]);
    base.push(vec!["reram_stage_delay".into(), ms(budget), "ms".into()]);
    report.tables.extend([summary, detail, base]);
    report.charts.push(Chart {
        name: "shape_sweep".into(),
        title: "Systolic stage delay normalized to the slowest ReRAM stage".into(),
        table: "summary".into(),
        label_column: "config".into(),
        value_columns: vec!["cumulative_delay".into(), "mean_utilization".into()],
    });
    Ok(report)
}

pub const QUANT_PLANS: [(u32, u32); 5] = [(16, 16), (8, 8), (8, 4), (4, 8), (4, 4)];

pub fn quant_label(plan: &PrecisionPlan) -> String {
    if plan.is_quantized() {
        plan.label()
    } else {
        "16-bit".to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantPoint {
    pub plan: PrecisionPlan,
    pub crossbars: u64,
    pub tiles: u64,
    pub energy: EnergyBreakdown,
}

pub fn quant_points(model: &TransformerConfig, hw: &HardwareSpec) -> Result<Vec<QuantPoint>> {
    QUANT_PLANS
        .par_iter()
        .map(|&(m, f)| {
            let plan = PrecisionPlan {
                activation_bits: model.precision.activation_bits,
                ..PrecisionPlan::new(m, f)
            };
            let cfg = model.with_precision(plan);
            let schedule = build_pipeline(&cfg, hw)?;
            let xb = layer_crossbars(&cfg, &plan, &hw.reram)?;
            Ok(QuantPoint {
                plan,
                crossbars: xb.total(),
                tiles: xb.tiles(&hw.reram),
                energy: EnergyBreakdown::of(&schedule, cfg.num_layers),
            })
        })
        .collect()
}

fn run_quant_sweep(cfg: &ExperimentConfig) -> Result<Report> {
    let model = cfg.validate()?;
    let points = quant_points(&model, &cfg.hardware)?;
    let base = &points[0];

    let mut report = Report::new(ExperimentKind::QuantSweep.name(), cfg.metadata());
    let mut t = Table::new(
        "quant_sweep",
        &[
            ("plan", "-"),
            ("crossbars_per_layer", "-"),
            ("tiles_per_layer", "-"),
            ("relative_crossbars", "-"),
            ("reram_energy", "mJ"),
            ("systolic_energy", "mJ"),
            ("noc_energy", "mJ"),
            ("total_energy", "mJ"),
            ("normalized_energy", "-"),
        ],
    );
    for p in &points {
        t.push(vec![
            quant_label(&p.plan).into(),
            p.crossbars.into(),
            p.tiles.into(),
            Cell::num(p.crossbars as f64 / base.crossbars as f64),
            mj(p.energy.reram),
            mj(p.energy.systolic),
            mj(p.energy.noc),
            mj(p.energy.total()),
            Cell::num(p.energy.total() / base.energy.total()),
        ]);
    }
    report.tables.push(t);
    report.charts.push(Chart {
        name: "quant_energy".into(),
        title: "Energy and crossbars relative to 16-bit weights".into(),
        table: "quant_sweep".into(),
        label_column: "plan".into(),
        value_columns: vec!["normalized_energy".into(), "relative_crossbars".into()],
    });
    Ok(report)
}

/// Per-tier dies of the stack under `topo`: cores, the tier's routers, and
/// every TSV that lands on or passes through the tier.
pub fn tier_dies(topo: &Topology, hw: &HardwareSpec, dequant: bool) -> Vec<DieSpec> {
    let p = &hw.noc;
    (0..TIERS)
        .map(|tier| {
            let cores = NODES_PER_TIER as f64;
            let core_area = if tier == SYSTOLIC_TIER {
                cores * hw.systolic.core_area_mm2
            } else {
                cores * hw.reram.core_area_mm2(dequant)
            };
            let router_area: f64 = topo
                .nodes
                .iter()
                .filter(|n| n.tier == tier)
                .map(|n| p.router_area_unit * f64::from(topo.ports(n.id)).powi(2))
                .sum();
            let mut tsv_area = 0.0;
            let mut tsv_count = 0;
            for l in &topo.links {
                if l.kind == LinkKind::Planar {
                    continue;
                }
                let (lo, hi) = {
                    let (a, b) = (topo.node(l.a).tier, topo.node(l.b).tier);
                    (a.min(b), a.max(b))
                };
                if (lo..=hi).contains(&tier) {
                    tsv_count += u64::from(p.tsvs_per_link);
                    tsv_area += f64::from(p.tsvs_per_link) * p.tsv_area_mm2(l.kind);
                }
            }
            DieSpec {
                core_area_mm2: core_area,
                router_area_mm2: router_area,
                tsv_count,
                tsv_area_each_mm2: if tsv_count == 0 { 0.0 } else { tsv_area / tsv_count as f64 },
            }
        })
        .collect()
}

pub fn stack_cost(topo: &Topology, hw: &HardwareSpec, params: &CostParams) -> Result<f64> {
    let costs = tier_dies(topo, hw, false)
        .iter()
        .map(|d| cost::die_cost(cost::die_area(d), params))
        .collect::<Result<Vec<_>>>()?;
    cost::stack_cost_3d(&costs, params)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NocComparison {
    pub kind: TopologyKind,
    pub edp: f64,
    pub energy: f64,
    pub delay: f64,
    pub area: f64,
    pub stack_cost: f64,
    pub max_ports: u32,
    pub histogram: Vec<(u32, usize)>,
}

pub fn compare_nocs(model: &TransformerConfig, hw: &HardwareSpec, cost: &CostParams) -> Result<Vec<NocComparison>> {
    let noc = &hw.noc;
    let traffic = gen_traffic(model, &Placement::serpentine(model.num_layers))?;
    TopologyKind::ALL
        .par_iter()
        .map(|&kind| {
            let topo = build_topology(kind, noc);
            let eval = evaluate_noc(&topo, &traffic, noc)?;
            let hist: Vec<_> = port_histogram(&topo).into_iter().collect();
            Ok(NocComparison {
                kind,
                edp: eval.edp,
                energy: eval.total_energy,
                delay: eval.total_delay(),
                area: noc_area(&topo, noc).total(),
                stack_cost: stack_cost(&topo, hw, cost)?,
                max_ports: hist.last().map_or(0, |&(p, _)| p),
                histogram: hist,
            })
        })
        .collect()
}

pub fn run_noc_compare(cfg: &ExperimentConfig) -> Result<Report> {
    let model = cfg.validate()?;
    let rows = compare_nocs(&model, &cfg.hardware, &cfg.cost)?;
    let base = rows.iter().find(|r| r.kind == TopologyKind::Mesh3D).expect("mesh is always compared");

    let mut report = Report::new(ExperimentKind::NocCompare.name(), cfg.metadata());
    let mut t = Table::new(
        "noc_compare",
        &[
            ("topology", "-"),
            ("energy", "mJ"),
            ("delay", "ms"),
            ("edp", "J*s"),
            ("area", "mm2"),
            ("max_ports", "-"),
            ("normalized_edp", "-"),
            ("normalized_area", "-"),
            ("normalized_cost", "-"),
        ],
    );
    for r in &rows {
        t.push(vec![
            r.kind.name().into(),
            mj(r.energy),
            ms(r.delay),
            Cell::num(r.edp),
            Cell::num(r.area),
            r.max_ports.into(),
            Cell::num(r.edp / base.edp),
            Cell::num(r.area / base.area),
            Cell::num(r.stack_cost / base.stack_cost),
        ]);
    }
    let mut h = Table::new("port_histogram", &[("topology", "-"), ("ports", "-"), ("routers", "-")]);
    for r in &rows {
        for &(p, c) in &r.histogram {
            h.push(vec![r.kind.name().into(), p.into(), c.into()]);
        }
    }
    report.tables.extend([t, h]);
    report.charts.push(Chart {
        name: "noc_compare".into(),
        title: "NoC EDP, area and cost normalized to the 3D mesh".into(),
        table: "noc_compare".into(),
        label_column: "topology".into(),
        value_columns: vec!["normalized_edp".into(), "normalized_area".into(), "normalized_cost".into()],
    });
    Ok(report)
}

pub fn run_cost_compare(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.hardware.validate()?;
    cfg.cost.validate()?;
    let hw = &cfg.hardware;
    let p = &cfg.cost;
    let mut report = Report::new(ExperimentKind::CostCompare.name(), cfg.metadata());

    let mut dies = Table::new(
        "die_cost",
        &[
            ("design", "-"),
            ("tier", "-"),
            ("die_area", "mm2"),
            ("dies_per_wafer", "-"),
            ("die_yield", "-"),
            ("die_cost", "wafer"),
        ],
    );
    let mut stacks = Table::new(
        "stack_cost",
        &[("design", "-"), ("stack_cost", "wafer"), ("normalized_cost", "-")],
    );
    let mut base_cost = None;
    for kind in TopologyKind::ALL {
        let topo = build_topology(kind, &hw.noc);
        let mut costs = Vec::new();
        for (tier, d) in tier_dies(&topo, hw, false).iter().enumerate() {
            let a = cost::die_area(d);
            let c = cost::die_cost(a, p)?;
            costs.push(c);
            dies.push(vec![
                kind.name().into(),
                tier.into(),
                Cell::num(a),
                Cell::num(cost::dies_per_wafer(a, p)?),
                Cell::num(cost::die_yield(a, p)?),
                Cell::num(c),
            ]);
        }
        let c3d = cost::stack_cost_3d(&costs, p)?;
        let base = *base_cost.get_or_insert(c3d);
        stacks.push(vec![kind.name().into(), Cell::num(c3d), Cell::num(c3d / base)]);
    }

    let total = 400.0;
    let tiers = TIERS as u32;
    let tier_area = total / f64::from(tiers);
    let planar = cost::die_cost(total, p)?;
    let tier_cost = cost::die_cost(tier_area, p)?;
    let mut cmp = Table::new(
        "planar_vs_stacked",
        &[
            ("quantity", "-"),
            ("die_area", "mm2"),
            ("dies_per_wafer", "-"),
            ("die_yield", "-"),
            ("cost", "wafer"),
        ],
    );
    cmp.push(vec![
        "planar_die".into(),
        Cell::num(total),
        Cell::num(cost::dies_per_wafer(total, p)?),
        Cell::num(cost::die_yield(total, p)?),
        Cell::num(planar),
    ]);
    cmp.push(vec![
        "tier_die".into(),
        Cell::num(tier_area),
        Cell::num(cost::dies_per_wafer(tier_area, p)?),
        Cell::num(cost::die_yield(tier_area, p)?),
        Cell::num(tier_cost),
    ]);
    cmp.push(vec![
        "stacked_sum".into(),
        Cell::num(total),
        "".into(),
        "".into(),
        Cell::num(f64::from(tiers) * tier_cost),
    ]);
    cmp.push(vec![
        "planar_over_stacked".into(),
        "".into(),
        "".into(),
        "".into(),
        Cell::num(cost::planar_vs_stacked_ratio(total, tiers, p)?),
    ]);
    report.tables.extend([dies, stacks, cmp]);
    report.charts.push(Chart {
        name: "stack_cost".into(),
        title: "3D stack cost normalized to the 3D mesh".into(),
        table: "stack_cost".into(),
        label_column: "design".into(),
        value_columns: vec!["normalized_cost".into()],
    });
    Ok(report)
}

/// Stage label, resource and delays in milliseconds, as printed by the CLI.
pub fn stage_rows(schedule: &PipelineSchedule) -> Vec<(StageId, Resource, f64, f64)> {
    schedule
        .stages
        .iter()
        .map(|s| (s.id, s.resource, s.compute_delay * 1e3, s.comm_delay * 1e3))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sim(name: &str) -> ExperimentConfig {
        ExperimentConfig::new(ExperimentKind::Simulate, WorkloadSection::from_preset(name))
    }

    #[test]
    fn simulate_gpt2_shares() {
        let r = run(&sim("gpt2-medium")).unwrap();
        let b = r.table("breakdown").unwrap();
        let op = b.lookup("ReRAM", "op_share").unwrap().as_f64().unwrap();
        let en = b.lookup("ReRAM", "energy_share").unwrap().as_f64().unwrap();
        assert!(op > 90.0 && op < 92.0, "{op}");
        assert!(en < op, "{en} vs {op}");
    }

    #[test]
    fn zero_layers_rejected() {
        let mut cfg = sim("gpt2-medium");
        cfg.workload.num_layers = Some(0);
        let err = run(&cfg).unwrap_err();
        assert!(err.is_config_error());
        assert!(err.to_string().contains("workload.num_layers"));
    }

    #[test]
    fn workload_needs_fields_without_preset() {
        let w = WorkloadSection {
            d_model: Some(64),
            ..WorkloadSection::default()
        };
        assert!(w.resolve().unwrap_err().to_string().contains("workload.n"));
    }

    #[test]
    fn toml_round_trip() {
        let text = r#"
            experiment = "noc-compare"
            seed = 7
            [workload]
            preset = "bert-large"
            n = 1024
            [hardware]
            topology = "mesh3d-skip"
            [hardware.systolic]
            rows = 64
            cols = 64
            [output]
            formats = ["csv", "svg"]
        "#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.experiment, ExperimentKind::NocCompare);
        assert_eq!(cfg.hardware.systolic.rows, 64);
        assert_eq!(cfg.hardware.systolic.clock_hz, 800e6);
        assert_eq!(cfg.workload.resolve().unwrap().n, 1024);
        let again = ExperimentConfig::from_toml(&toml::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(again, cfg);
        assert!(ExperimentConfig::from_toml("experiment = \"simulate\"\nbogus = 1").is_err());
    }

    #[test]
    fn hash_tracks_config() {
        let a = sim("gpt2-medium");
        let mut b = a.clone();
        assert_eq!(a.config_hash(), b.config_hash());
        b.hardware.pipeline.batch = 4;
        assert_ne!(a.config_hash(), b.config_hash());
    }
}
