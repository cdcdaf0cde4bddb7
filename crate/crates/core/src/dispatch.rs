//! Hour-by-hour merit-order dispatch of one simulated year.
//!
//! Per hour: renewables serve load first; surplus charges the battery and
//! the rest is curtailed; a deficit is met by the battery, then the
//! microturbine, and whatever remains is lost load.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::components::{
    battery_step, max_charge_power, max_discharge_power, pv_power, wind_power, BatterySpec,
    PvSpec, TurbineSpec, WindSpec,
};
use crate::error::{ensure, ModelError};
use crate::scenario::ScenarioBundle;

/// Unserved energy above this (kWh) makes an hour count toward HLL.
pub const LOST_LOAD_EPSILON: f64 = 1e-9;

/// Number of coordinates in a design vector.
pub const DESIGN_DIM: usize = 6;

/// Which design coordinates are integer capacities.
pub const DESIGN_DISCRETE_MASK: [bool; DESIGN_DIM] = [true, true, true, true, false, false];

/// Component capacities plus the two incentive thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignVector {
    pub pv_kw: u32,
    pub wt_kw: u32,
    pub bss_kwh: u32,
    pub mt_kw: u32,
    /// Renewable-penetration threshold, fraction.
    pub t_rp: f64,
    /// Emissions-reduction threshold, fraction.
    pub t_er: f64,
}

/// Rounds half-up to the nearest non-negative integer.
pub fn round_half_up(x: f64) -> u32 {
    let r = (x + 0.5).floor();
    if r <= 0.0 {
        0
    } else if r >= u32::MAX as f64 {
        u32::MAX
    } else {
        r as u32
    }
}

impl DesignVector {
    pub const ZERO: DesignVector = DesignVector {
        pv_kw: 0,
        wt_kw: 0,
        bss_kwh: 0,
        mt_kw: 0,
        t_rp: 0.0,
        t_er: 0.0,
    };

    /// Optimizer coordinates. Thresholds are multiplied by `threshold_scale`.
    pub fn to_point(&self, threshold_scale: f64) -> [f64; DESIGN_DIM] {
        [
            self.pv_kw as f64,
            self.wt_kw as f64,
            self.bss_kwh as f64,
            self.mt_kw as f64,
            self.t_rp * threshold_scale,
            self.t_er * threshold_scale,
        ]
    }

    /// Inverse of [`DesignVector::to_point`]; capacities are rounded half-up.
    pub fn from_point(point: &[f64], threshold_scale: f64) -> DesignVector {
        assert_eq!(point.len(), DESIGN_DIM, "design point must have 6 coordinates");
        DesignVector {
            pv_kw: round_half_up(point[0]),
            wt_kw: round_half_up(point[1]),
            bss_kwh: round_half_up(point[2]),
            mt_kw: round_half_up(point[3]),
            t_rp: point[4] / threshold_scale,
            t_er: point[5] / threshold_scale,
        }
    }
}

/// Box bounds on the six design coordinates, in design units (kW, kWh,
/// fractions).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignBounds {
    pub pv_kw: [f64; 2],
    pub wt_kw: [f64; 2],
    pub bss_kwh: [f64; 2],
    pub mt_kw: [f64; 2],
    pub t_rp: [f64; 2],
    pub t_er: [f64; 2],
}

impl Default for DesignBounds {
    fn default() -> Self {
        DesignBounds {
            pv_kw: [0.0, 10_000.0],
            wt_kw: [0.0, 10_000.0],
            bss_kwh: [0.0, 10_000.0],
            mt_kw: [0.0, 10_000.0],
            t_rp: [0.0, 1.0],
            t_er: [0.0, 1.0],
        }
    }
}

impl DesignBounds {
    fn rows(&self) -> [(&'static str, [f64; 2]); DESIGN_DIM] {
        [
            ("pv_kw", self.pv_kw),
            ("wt_kw", self.wt_kw),
            ("bss_kwh", self.bss_kwh),
            ("mt_kw", self.mt_kw),
            ("t_rp", self.t_rp),
            ("t_er", self.t_er),
        ]
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, [lo, hi]) in self.rows() {
            ensure(
                lo.is_finite() && hi.is_finite() && lo <= hi,
                "design.bounds",
                &format!("{name}: bounds must be finite with min <= max"),
            )?;
            ensure(lo >= 0.0, "design.bounds", &format!("{name}: min must be >= 0"))?;
        }
        ensure(
            self.t_rp[1] <= 1.0 && self.t_er[1] <= 1.0,
            "design.bounds",
            "threshold bounds must lie within [0, 1]",
        )
    }

    /// Bounds in optimizer coordinates.
    pub fn to_box(&self, threshold_scale: f64) -> Vec<(f64, f64)> {
        self.rows()
            .iter()
            .enumerate()
            .map(|(i, (_, [lo, hi]))| {
                if DESIGN_DISCRETE_MASK[i] {
                    (*lo, *hi)
                } else {
                    (lo * threshold_scale, hi * threshold_scale)
                }
            })
            .collect()
    }

    pub fn contains(&self, d: &DesignVector) -> bool {
        let v = d.to_point(1.0);
        self.rows()
            .iter()
            .zip(v)
            .all(|((_, [lo, hi]), x)| x >= *lo - 1e-12 && x <= *hi + 1e-12)
    }

    /// The same bounds with both thresholds pinned to zero.
    pub fn without_incentives(&self) -> DesignBounds {
        DesignBounds {
            t_rp: [0.0, 0.0],
            t_er: [0.0, 0.0],
            ..*self
        }
    }
}

/// Per-unit component models plus dispatch options.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SystemSpecs {
    pub pv: PvSpec,
    pub wind: WindSpec,
    pub battery: BatterySpec,
    pub turbine: TurbineSpec,
    /// Let spare microturbine capacity charge the battery in surplus hours.
    pub turbine_charging: bool,
}

impl SystemSpecs {
    pub fn validate(&self) -> Result<(), ModelError> {
        self.pv.validate()?;
        self.wind.validate()?;
        self.battery.validate()?;
        self.turbine.validate()
    }
}

/// Hourly energy flows, all in kWh except `soc`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HourlyTrace {
    pub load: Vec<f64>,
    pub pv_gen: Vec<f64>,
    pub wt_gen: Vec<f64>,
    pub mt_gen: Vec<f64>,
    /// Part of `mt_gen` that went into the battery.
    pub mt_charge: Vec<f64>,
    pub batt_charge: Vec<f64>,
    pub batt_discharge: Vec<f64>,
    pub curtailed: Vec<f64>,
    pub unserved: Vec<f64>,
    /// SOC at the end of each hour.
    pub soc: Vec<f64>,
}

impl HourlyTrace {
    fn with_capacity(n: usize) -> Self {
        HourlyTrace {
            load: Vec::with_capacity(n),
            pv_gen: Vec::with_capacity(n),
            wt_gen: Vec::with_capacity(n),
            mt_gen: Vec::with_capacity(n),
            mt_charge: Vec::with_capacity(n),
            batt_charge: Vec::with_capacity(n),
            batt_discharge: Vec::with_capacity(n),
            curtailed: Vec::with_capacity(n),
            unserved: Vec::with_capacity(n),
            soc: Vec::with_capacity(n),
        }
    }

    pub fn hours(&self) -> usize {
        self.load.len()
    }

    /// Renewable energy delivered straight to load in hour `h`.
    pub fn renewable_direct(&self, h: usize) -> f64 {
        let renewable_charge = self.batt_charge[h] - self.mt_charge[h];
        self.pv_gen[h] + self.wt_gen[h] - self.curtailed[h] - renewable_charge
    }

    /// Relative energy-balance residual of hour `h`.
    pub fn balance_residual(&self, h: usize) -> f64 {
        let supplied = self.renewable_direct(h)
            + self.batt_discharge[h]
            + (self.mt_gen[h] - self.mt_charge[h])
            + self.unserved[h];
        (supplied - self.load[h]).abs() / self.load[h].max(1.0)
    }
}

/// Annual totals of one simulated year.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DispatchTotals {
    pub load_kwh: f64,
    pub renewable_served_kwh: f64,
    pub total_served_kwh: f64,
    pub mt_kwh: f64,
    pub unserved_kwh: f64,
    pub curtailed_kwh: f64,
    /// Hours with lost load.
    pub hll: usize,
    pub emissions_kg: f64,
    /// Emissions if the microturbine had served the whole load.
    pub baseline_emissions_kg: f64,
    pub fuel_units: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispatchTrace {
    pub hourly: HourlyTrace,
    pub totals: DispatchTotals,
}

const TRACE_HEADER: &str = "hour,load_kwh,pv_gen_kwh,wt_gen_kwh,mt_gen_kwh,mt_charge_kwh,\
batt_charge_kwh,batt_discharge_kwh,curtailed_kwh,unserved_kwh,soc_fraction";

impl DispatchTrace {
    /// Writes one row per hour with a unit-bearing header.
    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let file = std::fs::File::create(path)?;
        let mut out = std::io::BufWriter::new(file);
        writeln!(out, "{TRACE_HEADER}")?;
        let t = &self.hourly;
        for h in 0..t.hours() {
            writeln!(
                out,
                "{h},{},{},{},{},{},{},{},{},{},{}",
                t.load[h],
                t.pv_gen[h],
                t.wt_gen[h],
                t.mt_gen[h],
                t.mt_charge[h],
                t.batt_charge[h],
                t.batt_discharge[h],
                t.curtailed[h],
                t.unserved[h],
                t.soc[h]
            )?;
        }
        out.flush()
    }
}

/// Simulates a year and keeps the hourly trace.
pub fn simulate_year(
    design: &DesignVector,
    scenario: &ScenarioBundle,
    specs: &SystemSpecs,
) -> Result<DispatchTrace, ModelError> {
    let mut hourly = HourlyTrace::with_capacity(scenario.hours());
    let totals = run(design, scenario, specs, Some(&mut hourly))?;
    Ok(DispatchTrace { hourly, totals })
}

/// Simulates a year and keeps only the annual totals.
pub fn simulate_totals(
    design: &DesignVector,
    scenario: &ScenarioBundle,
    specs: &SystemSpecs,
) -> Result<DispatchTotals, ModelError> {
    run(design, scenario, specs, None)
}

fn run(
    design: &DesignVector,
    scenario: &ScenarioBundle,
    specs: &SystemSpecs,
    mut record: Option<&mut HourlyTrace>,
) -> Result<DispatchTotals, ModelError> {
    specs.validate()?;
    scenario.validate()?;

    let pv_fleet = PvSpec {
        rated_kw: design.pv_kw as f64,
        ..specs.pv
    };
    let wind_fleet = WindSpec {
        rated_kw: design.wt_kw as f64,
        ..specs.wind
    };
    let battery: BatterySpec = specs.battery.scaled(design.bss_kwh as f64);
    let mt_kw = design.mt_kw as f64;
    let turbine = &specs.turbine;
    let avail = &scenario.availability;

    let mut soc = battery.soc_init;
    // Stored energy by origin; only consulted when the turbine may charge.
    let mut stored_renewable = soc * battery.capacity_kwh;
    let mut stored_fossil = 0.0;

    let mut totals = DispatchTotals::default();

    for h in 0..scenario.hours() {
        let load = scenario.load[h];
        let pv = if avail.pv[h] {
            pv_power(&pv_fleet, scenario.irradiance[h], scenario.temperature[h])?
        } else {
            0.0
        };
        let wt = if avail.wind[h] {
            wind_power(&wind_fleet, scenario.wind_speed[h])?
        } else {
            0.0
        };
        let battery_up = avail.battery[h];
        let mt_available = if avail.turbine[h] { mt_kw } else { 0.0 };
        let renewable = pv + wt;

        let direct = renewable.min(load);
        let (mut charge_ren, mut charge_mt, mut discharge) = (0.0, 0.0, 0.0);
        let (mut curtailed, mut mt_load, mut unserved) = (0.0, 0.0, 0.0);

        if renewable >= load {
            let surplus = renewable - load;
            let room = if battery_up {
                max_charge_power(&battery, soc)
            } else {
                0.0
            };
            charge_ren = surplus.min(room);
            curtailed = surplus - charge_ren;
            if specs.turbine_charging {
                charge_mt = (room - charge_ren).max(0.0).min(mt_available);
            }
        } else {
            let mut deficit = load - renewable;
            if battery_up {
                discharge = deficit.min(max_discharge_power(&battery, soc));
                deficit -= discharge;
            }
            mt_load = deficit.min(mt_available);
            unserved = deficit - mt_load;
        }

        let charge = charge_ren + charge_mt;
        soc = battery_step(&battery, soc, charge, discharge)?;

        let renewable_discharge = if specs.turbine_charging {
            stored_renewable *= battery.eta_carryover;
            stored_fossil *= battery.eta_carryover;
            let stored = stored_renewable + stored_fossil;
            let share = if stored > 0.0 {
                stored_renewable / stored
            } else {
                1.0
            };
            if discharge > 0.0 {
                let removed = discharge / battery.eta_discharge;
                stored_renewable -= removed * share;
                stored_fossil -= removed * (1.0 - share);
            } else {
                stored_renewable += charge_ren * battery.eta_charge;
                stored_fossil += charge_mt * battery.eta_charge;
            }
            discharge * share
        } else {
            discharge
        };

        let mt_gen = mt_load + charge_mt;
        totals.load_kwh += load;
        totals.renewable_served_kwh += direct + renewable_discharge;
        totals.total_served_kwh += load - unserved;
        totals.mt_kwh += mt_gen;
        totals.unserved_kwh += unserved;
        totals.curtailed_kwh += curtailed;
        if unserved > LOST_LOAD_EPSILON {
            totals.hll += 1;
        }

        if let Some(rec) = record.as_deref_mut() {
            rec.load.push(load);
            rec.pv_gen.push(pv);
            rec.wt_gen.push(wt);
            rec.mt_gen.push(mt_gen);
            rec.mt_charge.push(charge_mt);
            rec.batt_charge.push(charge);
            rec.batt_discharge.push(discharge);
            rec.curtailed.push(curtailed);
            rec.unserved.push(unserved);
            rec.soc.push(soc);
        }
    }

    totals.emissions_kg = turbine.emissions(totals.mt_kwh);
    totals.fuel_units = turbine.fuel(totals.mt_kwh);
    totals.baseline_emissions_kg = turbine.emissions(totals.load_kwh);
    Ok(totals)
}

/// Share of served energy that came from renewables (directly or via the
/// battery). 1.0 when nothing was served.
pub fn renewable_penetration(totals: &DispatchTotals) -> f64 {
    if totals.total_served_kwh <= 0.0 {
        1.0
    } else {
        (totals.renewable_served_kwh / totals.total_served_kwh).clamp(0.0, 1.0)
    }
}

/// One minus actual emissions over the all-microturbine baseline, clamped
/// to [0, 1]. 1.0 when the baseline is zero.
pub fn emissions_reduction(totals: &DispatchTotals, turbine: &TurbineSpec) -> f64 {
    let baseline = turbine.emissions(totals.load_kwh);
    if baseline <= 0.0 {
        return 1.0;
    }
    (1.0 - turbine.emissions(totals.mt_kwh) / baseline).clamp(0.0, 1.0)
}
