//! Die and 3D-stack manufacturing cost.
//!
//! Dies per wafer, negative-binomial yield, cost per good die, and the stack
//! cost including stacking and TSV bonding yield.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeLossForm {
    /// Edge loss term π·ϕ/(√2·A).
    #[default]
    Literal,
    /// Edge loss term π·ϕ/√(2·A).
    Textbook,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostParams {
    pub wafer_cost: f64,
    pub wafer_diameter_mm: f64,
    pub defect_density_per_cm2: f64,
    pub clustering_alpha: f64,
    pub wafer_yield: f64,
    pub stacking_yield: f64,
    pub tsv_yield: f64,
    pub edge_loss: EdgeLossForm,
}

impl Default for CostParams {
    fn default() -> Self {
        Self {
            wafer_cost: 1.0,
            wafer_diameter_mm: 300.0,
            defect_density_per_cm2: 0.2,
            clustering_alpha: 3.0,
            wafer_yield: 1.0,
            stacking_yield: 0.99,
            tsv_yield: 0.99,
            edge_loss: EdgeLossForm::Literal,
        }
    }
}

impl CostParams {
    pub fn validate(&self) -> Result<()> {
        let yields = [
            ("cost.wafer_yield", self.wafer_yield),
            ("cost.stacking_yield", self.stacking_yield),
            ("cost.tsv_yield", self.tsv_yield),
        ];
        for (field, y) in yields {
            if !(y > 0.0 && y <= 1.0) {
                return Err(Error::config(field, "yield must be in (0, 1]"));
            }
        }
        if !(self.defect_density_per_cm2 >= 0.0) {
            return Err(Error::config("cost.defect_density_per_cm2", "must be non-negative"));
        }
        if !(self.clustering_alpha > 0.0) {
            return Err(Error::config("cost.clustering_alpha", "must be positive"));
        }
        if !(self.wafer_diameter_mm > 0.0) {
            return Err(Error::config("cost.wafer_diameter_mm", "must be positive"));
        }
        if !(self.wafer_cost > 0.0) {
            return Err(Error::config("cost.wafer_cost", "must be positive"));
        }
        Ok(())
    }

    pub fn wafer_area_mm2(&self) -> f64 {
        PI * (self.wafer_diameter_mm / 2.0).powi(2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DieSpec {
    pub core_area_mm2: f64,
    pub router_area_mm2: f64,
    pub tsv_count: u64,
    pub tsv_area_each_mm2: f64,
}

impl DieSpec {
    pub fn with_area(core_area_mm2: f64) -> Self {
        Self {
            core_area_mm2,
            router_area_mm2: 0.0,
            tsv_count: 0,
            tsv_area_each_mm2: 0.0,
        }
    }
}

pub fn die_area(spec: &DieSpec) -> f64 {
    spec.core_area_mm2 + spec.router_area_mm2 + spec.tsv_count as f64 * spec.tsv_area_each_mm2
}

fn check_area(a: f64, p: &CostParams) -> Result<()> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::config("die_area", format!("{a} mm² is not a positive area")));
    }
    if a >= p.wafer_area_mm2() {
        return Err(Error::config("die_area", "die is larger than the wafer"));
    }
    Ok(())
}

pub fn dies_per_wafer(a: f64, p: &CostParams) -> Result<f64> {
    check_area(a, p)?;
    let phi = p.wafer_diameter_mm;
    let edge = match p.edge_loss {
        EdgeLossForm::Literal => PI * phi / (SQRT_2 * a),
        EdgeLossForm::Textbook => PI * phi / (2.0 * a).sqrt(),
    };
    Ok(p.wafer_area_mm2() / a - edge)
}

pub fn die_yield(a: f64, p: &CostParams) -> Result<f64> {
    check_area(a, p)?;
    let a_cm2 = a / 100.0;
    Ok(p.wafer_yield * (1.0 + a_cm2 * p.defect_density_per_cm2 / p.clustering_alpha).powf(-p.clustering_alpha))
}

pub fn die_cost(a: f64, p: &CostParams) -> Result<f64> {
    let n = dies_per_wafer(a, p)?;
    if !(n > 0.0) {
        return Err(Error::config("die_area", "no whole dies fit on the wafer"));
    }
    Ok(p.wafer_cost / n / die_yield(a, p)?)
}

pub fn stack_cost_3d(tier_costs: &[f64], p: &CostParams) -> Result<f64> {
    if tier_costs.is_empty() {
        return Err(Error::Empty("tier cost list"));
    }
    let n = tier_costs.len() as i32;
    Ok(tier_costs.iter().sum::<f64>() / (p.stacking_yield.powi(n - 1) * p.tsv_yield))
}

/// Cost of die `a` relative to die `b`: (Y_b·N_b)/(Y_a·N_a).
pub fn normalized_cost(a: &DieSpec, b: &DieSpec, p: &CostParams) -> Result<f64> {
    let (aa, ab) = (die_area(a), die_area(b));
    Ok(die_yield(ab, p)? * dies_per_wafer(ab, p)? / (die_yield(aa, p)? * dies_per_wafer(aa, p)?))
}

/// Cost of one planar die of `total_area` over the summed cost of `tiers`
/// equal dies splitting the same area; stacking yield excluded.
pub fn planar_vs_stacked_ratio(total_area: f64, tiers: u32, p: &CostParams) -> Result<f64> {
    if tiers == 0 {
        return Err(Error::config("tiers", "must be at least 1"));
    }
    let tier = die_cost(total_area / f64::from(tiers), p)?;
    Ok(die_cost(total_area, p)? / (f64::from(tiers) * tier))
}
