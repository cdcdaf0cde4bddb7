//! Net Present Cost, incentive subsidies, and the penalized loss.

use serde::{Deserialize, Serialize};

use crate::components::{PerComponent, TurbineSpec};
use crate::dispatch::{emissions_reduction, renewable_penetration, DesignVector, DispatchTotals};
use crate::error::{ensure, ModelError};

/// How recurring annual cash flows enter the NPC bracket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnualConvention {
    /// Annual terms are multiplied by the lifetime before annualization.
    #[default]
    LifetimeSum,
    /// Annual terms enter the bracket once, next to one-time CAPEX.
    Literal,
}

/// Gating rule of the emissions-reduction subsidy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErGating {
    /// Pay when the achieved reduction meets the threshold (R_er >= T_er).
    #[default]
    AchievedAtLeastThreshold,
    /// Pay when the threshold is at least the achieved reduction (T_er >= R_er).
    ThresholdAtLeastAchieved,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostParams {
    /// USD per kW (kWh for the battery).
    pub capex_unit: PerComponent<f64>,
    /// USD per kW (kWh) per year.
    pub opex_unit: PerComponent<f64>,
    /// USD per kg CO₂.
    pub carbon_tax: f64,
    /// USD per fuel unit.
    pub fuel_price: f64,
    /// USD per unserved kWh.
    pub voll: f64,
    pub discount_rate: f64,
    pub lifetime_years: u32,
    /// Allowed hours of lost load per year.
    pub h_max: f64,
    /// Quadratic penalty weight, USD per hour².
    pub penalty_r: f64,
    #[serde(default)]
    pub convention: AnnualConvention,
    #[serde(default)]
    pub er_gating: ErGating,
}

impl CostParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        for (kind, v) in self.capex_unit.iter() {
            ensure(*v >= 0.0, "costs.capex_unit", &format!("{} must be >= 0", kind.name()))?;
        }
        for (kind, v) in self.opex_unit.iter() {
            ensure(*v >= 0.0, "costs.opex_unit", &format!("{} must be >= 0", kind.name()))?;
        }
        ensure(self.carbon_tax >= 0.0, "costs.carbon_tax", "must be >= 0")?;
        ensure(self.fuel_price >= 0.0, "costs.fuel_price", "must be >= 0")?;
        ensure(self.voll >= 0.0, "costs.voll", "must be >= 0")?;
        ensure(
            self.discount_rate > 0.0 && self.discount_rate < 1.0,
            "costs.discount_rate",
            "must lie in (0, 1)",
        )?;
        ensure(self.lifetime_years >= 1, "costs.lifetime_years", "must be >= 1")?;
        ensure(self.h_max >= 0.0, "costs.h_max", "must be >= 0")?;
        ensure(self.penalty_r > 0.0, "costs.penalty_r", "must be > 0")
    }

    fn annual_multiplier(&self) -> f64 {
        match self.convention {
            AnnualConvention::LifetimeSum => self.lifetime_years as f64,
            AnnualConvention::Literal => 1.0,
        }
    }
}

/// Every term of one loss evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub capex_total: f64,
    pub opex_total: f64,
    pub carbon_tax_cost: f64,
    pub fuel_cost: f64,
    pub voll_cost: f64,
    pub subsidy_rp: f64,
    pub subsidy_er_value: f64,
    pub crf: f64,
    pub npc: f64,
    pub hll: f64,
    pub penalty: f64,
    pub loss: f64,
    pub r_rp: f64,
    pub r_er: f64,
    pub unserved_kwh: f64,
    pub emissions_kg: f64,
    pub scenarios: usize,
}

/// Capital recovery factor i(1+i)ⁿ / ((1+i)ⁿ − 1).
pub fn crf(discount_rate: f64, lifetime_years: u32) -> f64 {
    let n = lifetime_years as f64;
    if discount_rate == 0.0 {
        return 1.0 / n;
    }
    // (1+i)^n - 1 via expm1 keeps precision for tiny rates
    let growth_minus_one = (n * discount_rate.ln_1p()).exp_m1();
    discount_rate * (growth_minus_one + 1.0) / growth_minus_one
}

/// Renewable-penetration subsidy: ΣCAPEX·T_rp when R_rp ≥ T_rp.
pub fn incentive_rp(design: &DesignVector, capex_total: f64, r_rp: f64) -> f64 {
    if r_rp >= design.t_rp {
        capex_total * design.t_rp
    } else {
        0.0
    }
}

/// Emissions-reduction subsidy: baseline carbon tax × T_er, gated by `gating`.
pub fn incentive_er(baseline_tax: f64, t_er: f64, r_er: f64, gating: ErGating) -> f64 {
    let met = match gating {
        ErGating::AchievedAtLeastThreshold => r_er >= t_er,
        ErGating::ThresholdAtLeastAchieved => t_er >= r_er,
    };
    if met {
        baseline_tax * t_er
    } else {
        0.0
    }
}

/// r·max(0, hll − h_max)².
pub fn penalty(hll: f64, h_max: f64, r: f64) -> f64 {
    let excess = (hll - h_max).max(0.0);
    r * excess * excess
}

pub fn capex_total(design: &DesignVector, params: &CostParams) -> f64 {
    let c = &params.capex_unit;
    c.pv * design.pv_kw as f64
        + c.wind * design.wt_kw as f64
        + c.battery * design.bss_kwh as f64
        + c.turbine * design.mt_kw as f64
}

pub fn opex_annual(design: &DesignVector, params: &CostParams) -> f64 {
    let c = &params.opex_unit;
    c.pv * design.pv_kw as f64
        + c.wind * design.wt_kw as f64
        + c.battery * design.bss_kwh as f64
        + c.turbine * design.mt_kw as f64
}

/// Costs `design` from one or more simulated years. Operational quantities
/// are averaged across years before costing.
pub fn evaluate_loss(
    design: &DesignVector,
    totals: &[DispatchTotals],
    turbine: &TurbineSpec,
    params: &CostParams,
) -> Result<CostBreakdown, ModelError> {
    if totals.is_empty() {
        return Err(ModelError::EmptyTraces);
    }
    params.validate()?;
    let n = totals.len() as f64;
    let mean = |f: &dyn Fn(&DispatchTotals) -> f64| totals.iter().map(f).sum::<f64>() / n;

    let hll = mean(&|t| t.hll as f64);
    let emissions = mean(&|t| t.emissions_kg);
    let baseline_emissions = mean(&|t| t.baseline_emissions_kg);
    let fuel = mean(&|t| t.fuel_units);
    let unserved = mean(&|t| t.unserved_kwh);
    let r_rp = mean(&|t| renewable_penetration(t));
    let r_er = mean(&|t| emissions_reduction(t, turbine));

    let years = params.annual_multiplier();
    let capex = capex_total(design, params);
    let opex = opex_annual(design, params) * years;
    let carbon_tax_cost = params.carbon_tax * emissions * years;
    let fuel_cost = params.fuel_price * fuel * years;
    let voll_cost = params.voll * unserved * years;
    let baseline_tax = params.carbon_tax * baseline_emissions * years;

    let subsidy_rp = incentive_rp(design, capex, r_rp);
    let subsidy_er_value = incentive_er(baseline_tax, design.t_er, r_er, params.er_gating);

    let crf = crf(params.discount_rate, params.lifetime_years);
    let npc = (capex + opex + carbon_tax_cost + fuel_cost + voll_cost
        - subsidy_rp
        - subsidy_er_value)
        * crf;
    let penalty = penalty(hll, params.h_max, params.penalty_r);

    Ok(CostBreakdown {
        capex_total: capex,
        opex_total: opex,
        carbon_tax_cost,
        fuel_cost,
        voll_cost,
        subsidy_rp,
        subsidy_er_value,
        crf,
        npc,
        hll,
        penalty,
        loss: npc + penalty,
        r_rp,
        r_er,
        unserved_kwh: unserved,
        emissions_kg: emissions,
        scenarios: totals.len(),
    })
}
