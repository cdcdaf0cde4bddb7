//! The penalized microgrid loss as an optimizer objective.

use rayon::prelude::*;

use crate::components::PerComponent;
use crate::dispatch::{simulate_totals, DesignVector, DispatchTotals, SystemSpecs};
use crate::economics::{evaluate_loss, CostBreakdown, CostParams};
use crate::error::ModelError;
use crate::optimize::Objective;
use crate::scenario::{build_scenario, ReliabilityParams, ScenarioBundle, StochasticParams, TypicalYear};

#[derive(Debug, Clone)]
pub struct MicrogridObjective {
    pub tmy: TypicalYear,
    pub stochastic: StochasticParams,
    pub reliability: PerComponent<ReliabilityParams>,
    pub specs: SystemSpecs,
    pub costs: CostParams,
    /// Optimizer units per unit of threshold fraction.
    pub threshold_scale: f64,
}

impl MicrogridObjective {
    pub fn validate(&self) -> Result<(), ModelError> {
        self.tmy.validate()?;
        self.stochastic.validate()?;
        for (_, r) in self.reliability.iter() {
            r.validate()?;
        }
        self.specs.validate()?;
        self.costs.validate()?;
        if !(self.threshold_scale > 0.0 && self.threshold_scale.is_finite()) {
            return Err(ModelError::invalid("design.threshold_scale", "must be > 0"));
        }
        Ok(())
    }

    /// The stochastic year for `seed`.
    pub fn scenario(&self, seed: u64) -> Result<ScenarioBundle, ModelError> {
        build_scenario(&self.tmy, &self.stochastic, &self.reliability, seed)
    }

    /// The typical year itself with every component available.
    pub fn base_scenario(&self) -> ScenarioBundle {
        ScenarioBundle::fully_available(
            self.tmy.irradiance.clone(),
            self.tmy.temperature.clone(),
            self.tmy.wind_speed.clone(),
            self.tmy.load.clone(),
        )
    }

    /// Annual totals of `design` in each scenario. No seeds means the base
    /// scenario.
    pub fn totals(&self, design: &DesignVector, seeds: &[u64]) -> Result<Vec<DispatchTotals>, ModelError> {
        if seeds.is_empty() {
            return Ok(vec![simulate_totals(design, &self.base_scenario(), &self.specs)?]);
        }
        seeds
            .par_iter()
            .map(|&s| simulate_totals(design, &self.scenario(s)?, &self.specs))
            .collect()
    }

    pub fn breakdown(&self, design: &DesignVector, seeds: &[u64]) -> Result<CostBreakdown, ModelError> {
        let totals = self.totals(design, seeds)?;
        evaluate_loss(design, &totals, &self.specs.turbine, &self.costs)
    }

    pub fn design(&self, point: &[f64]) -> DesignVector {
        DesignVector::from_point(point, self.threshold_scale)
    }
}

impl Objective for MicrogridObjective {
    type Error = ModelError;

    fn evaluate(&self, point: &[f64], seeds: &[u64]) -> Result<f64, ModelError> {
        Ok(self.breakdown(&self.design(point), seeds)?.loss)
    }
}
