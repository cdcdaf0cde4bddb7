//! Hourly physical models of the four microgrid component classes.
//!
//! All powers are in kW and the time step is one hour, so a power held for
//! a step is numerically equal to the energy in kWh.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, ModelError};

/// Tolerance applied to SOC bound and power-limit checks.
pub const SOC_TOLERANCE: f64 = 1e-9;

/// The four component classes of the microgrid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentKind {
    Pv,
    Wind,
    Battery,
    Turbine,
}

impl ComponentKind {
    pub const ALL: [ComponentKind; 4] = [
        ComponentKind::Pv,
        ComponentKind::Wind,
        ComponentKind::Battery,
        ComponentKind::Turbine,
    ];

    pub fn index(self) -> usize {
        match self {
            ComponentKind::Pv => 0,
            ComponentKind::Wind => 1,
            ComponentKind::Battery => 2,
            ComponentKind::Turbine => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ComponentKind::Pv => "pv",
            ComponentKind::Wind => "wind",
            ComponentKind::Battery => "battery",
            ComponentKind::Turbine => "turbine",
        }
    }
}

/// One value per component class.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerComponent<T> {
    pub pv: T,
    pub wind: T,
    pub battery: T,
    pub turbine: T,
}

impl<T> PerComponent<T> {
    pub fn splat(value: T) -> Self
    where
        T: Clone,
    {
        PerComponent {
            pv: value.clone(),
            wind: value.clone(),
            battery: value.clone(),
            turbine: value,
        }
    }

    pub fn get(&self, kind: ComponentKind) -> &T {
        match kind {
            ComponentKind::Pv => &self.pv,
            ComponentKind::Wind => &self.wind,
            ComponentKind::Battery => &self.battery,
            ComponentKind::Turbine => &self.turbine,
        }
    }

    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> PerComponent<U> {
        PerComponent {
            pv: f(&self.pv),
            wind: f(&self.wind),
            battery: f(&self.battery),
            turbine: f(&self.turbine),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (ComponentKind, &T)> {
        ComponentKind::ALL.into_iter().map(move |k| (k, self.get(k)))
    }
}

/// PV array rated at standard test conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PvSpec {
    pub rated_kw: f64,
    /// Reference irradiance in kW/m².
    pub g_stc: f64,
    /// Power temperature coefficient, fraction per °C.
    pub temp_coeff: f64,
    /// Reference cell temperature in °C.
    pub t_stc: f64,
}

impl Default for PvSpec {
    fn default() -> Self {
        PvSpec {
            rated_kw: 1.0,
            g_stc: 1.0,
            temp_coeff: -0.004,
            t_stc: 25.0,
        }
    }
}

impl PvSpec {
    pub fn validate(&self) -> Result<(), ModelError> {
        ensure(self.rated_kw >= 0.0, "pv.rated_kw", "must be >= 0")?;
        ensure(self.g_stc > 0.0, "pv.g_stc", "must be > 0")?;
        ensure(self.temp_coeff.is_finite(), "pv.temp_coeff", "must be finite")?;
        ensure(self.t_stc.is_finite(), "pv.t_stc", "must be finite")
    }
}

/// PV output for irradiance `g` (kW/m²) and cell temperature `t` (°C),
/// floored at zero.
pub fn pv_power(spec: &PvSpec, irradiance: f64, temperature: f64) -> Result<f64, ModelError> {
    spec.validate()?;
    ensure(irradiance >= 0.0, "irradiance", "must be >= 0")?;
    let derate = 1.0 + spec.temp_coeff * (temperature - spec.t_stc);
    Ok((spec.rated_kw * irradiance / spec.g_stc * derate).max(0.0))
}

/// Wind turbine with a linear power curve between cut-in and rated speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindSpec {
    pub rated_kw: f64,
    pub v_cut_in: f64,
    pub v_rated: f64,
    pub v_cut_out: f64,
}

impl Default for WindSpec {
    fn default() -> Self {
        WindSpec {
            rated_kw: 1.0,
            v_cut_in: 3.0,
            v_rated: 12.0,
            v_cut_out: 25.0,
        }
    }
}

impl WindSpec {
    pub fn validate(&self) -> Result<(), ModelError> {
        ensure(self.rated_kw >= 0.0, "wind.rated_kw", "must be >= 0")?;
        ensure(self.v_cut_in >= 0.0, "wind.v_cut_in", "must be >= 0")?;
        ensure(
            self.v_cut_in < self.v_rated,
            "wind.v_rated",
            "must exceed v_cut_in",
        )?;
        ensure(
            self.v_rated <= self.v_cut_out,
            "wind.v_cut_out",
            "must be >= v_rated",
        )
    }
}

pub fn wind_power(spec: &WindSpec, wind_speed: f64) -> Result<f64, ModelError> {
    spec.validate()?;
    ensure(wind_speed >= 0.0, "wind_speed", "must be >= 0")?;
    let v = wind_speed;
    let p = if v <= spec.v_cut_in || v > spec.v_cut_out {
        0.0
    } else if v <= spec.v_rated {
        spec.rated_kw * (v - spec.v_cut_in) / (spec.v_rated - spec.v_cut_in)
    } else {
        spec.rated_kw
    };
    Ok(p)
}

/// Battery storage. SOC values are fractions of `capacity_kwh`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BatterySpec {
    pub capacity_kwh: f64,
    /// Fraction of stored charge retained from one hour to the next.
    pub eta_carryover: f64,
    pub eta_charge: f64,
    pub eta_discharge: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub soc_init: f64,
    pub p_charge_max: f64,
    pub p_discharge_max: f64,
}

impl Default for BatterySpec {
    fn default() -> Self {
        BatterySpec {
            capacity_kwh: 1.0,
            eta_carryover: 1.0,
            eta_charge: 0.95,
            eta_discharge: 0.95,
            soc_min: 0.1,
            soc_max: 1.0,
            soc_init: 0.5,
            p_charge_max: 0.5,
            p_discharge_max: 0.5,
        }
    }
}

impl BatterySpec {
    pub fn validate(&self) -> Result<(), ModelError> {
        ensure(self.capacity_kwh >= 0.0, "battery.capacity_kwh", "must be >= 0")?;
        ensure(
            self.eta_charge > 0.0 && self.eta_charge <= 1.0,
            "battery.eta_charge",
            "must lie in (0, 1]",
        )?;
        ensure(
            self.eta_discharge > 0.0 && self.eta_discharge <= 1.0,
            "battery.eta_discharge",
            "must lie in (0, 1]",
        )?;
        ensure(
            self.eta_carryover > 0.0 && self.eta_carryover <= 1.0,
            "battery.eta_carryover",
            "must lie in (0, 1]",
        )?;
        ensure(self.soc_min >= 0.0, "battery.soc_min", "must be >= 0")?;
        ensure(
            self.soc_min <= self.soc_init,
            "battery.soc_init",
            "must be >= soc_min",
        )?;
        ensure(
            self.soc_init <= self.soc_max,
            "battery.soc_init",
            "must be <= soc_max",
        )?;
        ensure(self.soc_max <= 1.0, "battery.soc_max", "must be <= 1")?;
        ensure(self.p_charge_max >= 0.0, "battery.p_charge_max", "must be >= 0")?;
        ensure(
            self.p_discharge_max >= 0.0,
            "battery.p_discharge_max",
            "must be >= 0",
        )
    }

    /// The same battery resized to `capacity_kwh`, with power limits scaled
    /// in proportion.
    pub fn scaled(&self, capacity_kwh: f64) -> BatterySpec {
        let ratio = if self.capacity_kwh > 0.0 {
            capacity_kwh / self.capacity_kwh
        } else {
            0.0
        };
        BatterySpec {
            capacity_kwh,
            p_charge_max: self.p_charge_max * ratio,
            p_discharge_max: self.p_discharge_max * ratio,
            ..*self
        }
    }
}

/// One hourly SOC update.
///
/// Self-discharge alone may carry the SOC below `soc_min` (e.g. during an
/// outage); an applied discharge may not.
pub fn battery_step(
    spec: &BatterySpec,
    soc_prev: f64,
    p_charge: f64,
    p_discharge: f64,
) -> Result<f64, ModelError> {
    spec.validate()?;
    ensure(p_charge >= 0.0, "p_charge", "must be >= 0")?;
    ensure(p_discharge >= 0.0, "p_discharge", "must be >= 0")?;
    if p_charge > 0.0 && p_discharge > 0.0 {
        return Err(ModelError::SimultaneousChargeDischarge {
            charge: p_charge,
            discharge: p_discharge,
        });
    }
    let limit_tol = |limit: f64| SOC_TOLERANCE * limit.max(1.0);
    ensure(
        p_charge <= spec.p_charge_max + limit_tol(spec.p_charge_max),
        "p_charge",
        "exceeds p_charge_max",
    )?;
    ensure(
        p_discharge <= spec.p_discharge_max + limit_tol(spec.p_discharge_max),
        "p_discharge",
        "exceeds p_discharge_max",
    )?;
    if soc_prev < -SOC_TOLERANCE || soc_prev > spec.soc_max + SOC_TOLERANCE {
        return Err(ModelError::SocBound {
            soc: soc_prev,
            min: 0.0,
            max: spec.soc_max,
        });
    }

    let retained = spec.eta_carryover * soc_prev;
    let mut soc = retained;
    if p_charge > 0.0 {
        soc += p_charge * spec.eta_charge / spec.capacity_kwh;
    }
    if p_discharge > 0.0 {
        soc -= p_discharge / (spec.capacity_kwh * spec.eta_discharge);
    }

    let floor = spec.soc_min.min(retained);
    if soc < floor - SOC_TOLERANCE || soc > spec.soc_max + SOC_TOLERANCE {
        return Err(ModelError::SocBound {
            soc,
            min: spec.soc_min,
            max: spec.soc_max,
        });
    }
    Ok(soc)
}

/// Largest charging power that keeps the next SOC at or below `soc_max`.
pub fn max_charge_power(spec: &BatterySpec, soc_prev: f64) -> f64 {
    if spec.capacity_kwh <= 0.0 {
        return 0.0;
    }
    let headroom = spec.soc_max - spec.eta_carryover * soc_prev;
    if headroom <= 0.0 {
        return 0.0;
    }
    (headroom * spec.capacity_kwh / spec.eta_charge).min(spec.p_charge_max)
}

/// Largest discharging power that keeps the next SOC at or above `soc_min`.
pub fn max_discharge_power(spec: &BatterySpec, soc_prev: f64) -> f64 {
    if spec.capacity_kwh <= 0.0 {
        return 0.0;
    }
    let usable = spec.eta_carryover * soc_prev - spec.soc_min;
    if usable <= 0.0 {
        return 0.0;
    }
    (usable * spec.capacity_kwh * spec.eta_discharge).min(spec.p_discharge_max)
}

/// Microturbine (fossil backup). Fuel and emissions are proportional to
/// generated energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TurbineSpec {
    pub rated_kw: f64,
    /// kg CO₂ per kWh generated.
    pub emissions_factor: f64,
    /// Fuel units per kWh generated.
    pub fuel_rate: f64,
}

impl Default for TurbineSpec {
    fn default() -> Self {
        TurbineSpec {
            rated_kw: 1.0,
            emissions_factor: 0.8,
            fuel_rate: 0.3,
        }
    }
}

impl TurbineSpec {
    pub fn validate(&self) -> Result<(), ModelError> {
        ensure(self.rated_kw >= 0.0, "turbine.rated_kw", "must be >= 0")?;
        ensure(
            self.emissions_factor >= 0.0,
            "turbine.emissions_factor",
            "must be >= 0",
        )?;
        ensure(self.fuel_rate >= 0.0, "turbine.fuel_rate", "must be >= 0")
    }

    pub fn emissions(&self, energy_kwh: f64) -> f64 {
        self.emissions_factor * energy_kwh
    }

    pub fn fuel(&self, energy_kwh: f64) -> f64 {
        self.fuel_rate * energy_kwh
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn battery(capacity: f64) -> BatterySpec {
        BatterySpec {
            capacity_kwh: capacity,
            eta_carryover: 1.0,
            eta_charge: 0.9,
            eta_discharge: 0.9,
            soc_min: 0.1,
            soc_max: 1.0,
            soc_init: 0.5,
            p_charge_max: f64::INFINITY,
            p_discharge_max: f64::INFINITY,
        }
    }

    #[test]
    fn pv_identity_at_stc() {
        let spec = PvSpec::default();
        assert_eq!(pv_power(&spec, 1.0, 25.0).unwrap(), 1.0);
        assert_eq!(pv_power(&spec, 0.0, 40.0).unwrap(), 0.0);
    }

    #[test]
    fn pv_hot_cell_derate() {
        let spec = PvSpec {
            temp_coeff: -0.004,
            ..PvSpec::default()
        };
        assert!((pv_power(&spec, 1.0, 50.0).unwrap() - 0.9).abs() < 1e-12);
    }

    #[test]
    fn pv_is_floored_at_zero() {
        let spec = PvSpec {
            temp_coeff: -0.05,
            ..PvSpec::default()
        };
        assert_eq!(pv_power(&spec, 1.0, 60.0).unwrap(), 0.0);
        assert!(pv_power(&spec, -0.1, 25.0).is_err());
        let bad = PvSpec {
            g_stc: 0.0,
            ..PvSpec::default()
        };
        assert!(pv_power(&bad, 1.0, 25.0).is_err());
    }

    #[test]
    fn wind_curve_branches() {
        let spec = WindSpec {
            rated_kw: 100.0,
            v_cut_in: 3.0,
            v_rated: 12.0,
            v_cut_out: 25.0,
        };
        assert_eq!(wind_power(&spec, 3.0).unwrap(), 0.0);
        assert!((wind_power(&spec, 7.5).unwrap() - 50.0).abs() < 1e-12);
        assert_eq!(wind_power(&spec, 12.0).unwrap(), 100.0);
        assert_eq!(wind_power(&spec, 25.0).unwrap(), 100.0);
        assert_eq!(wind_power(&spec, 26.0).unwrap(), 0.0);
    }

    #[test]
    fn wind_rejects_malformed_curve() {
        let spec = WindSpec {
            v_rated: 3.0,
            ..WindSpec::default()
        };
        assert!(matches!(
            wind_power(&spec, 5.0),
            Err(ModelError::InvalidParameter { .. })
        ));
    }

    #[test]
    fn battery_step_examples() {
        let spec = battery(100.0);
        assert_eq!(battery_step(&spec, 0.5, 0.0, 0.0).unwrap(), 0.5);
        let charged = battery_step(&spec, 0.5, 10.0, 0.0).unwrap();
        assert!((charged - 0.59).abs() < 1e-12);
        let discharged = battery_step(&spec, 0.59, 0.0, 9.0).unwrap();
        assert!((discharged - 0.49).abs() < 1e-12);
    }

    #[test]
    fn battery_step_errors() {
        let spec = battery(100.0);
        assert!(matches!(
            battery_step(&spec, 0.5, 1.0, 1.0),
            Err(ModelError::SimultaneousChargeDischarge { .. })
        ));
        assert!(matches!(
            battery_step(&spec, 0.95, 20.0, 0.0),
            Err(ModelError::SocBound { .. })
        ));
        assert!(matches!(
            battery_step(&spec, 0.15, 0.0, 9.0),
            Err(ModelError::SocBound { .. })
        ));
    }

    #[test]
    fn self_discharge_may_cross_soc_min_when_idle() {
        let spec = BatterySpec {
            eta_carryover: 0.5,
            ..battery(100.0)
        };
        let soc = battery_step(&spec, 0.15, 0.0, 0.0).unwrap();
        assert!((soc - 0.075).abs() < 1e-12);
        assert_eq!(max_discharge_power(&spec, 0.15), 0.0);
    }

    #[test]
    fn max_powers_at_bounds() {
        let spec = battery(100.0);
        assert_eq!(max_charge_power(&spec, 1.0), 0.0);
        assert_eq!(max_discharge_power(&spec, 0.1), 0.0);
        assert!((max_discharge_power(&spec, 0.5) - 36.0).abs() < 1e-12);
    }

    #[test]
    fn max_powers_respect_limits() {
        let spec = BatterySpec {
            p_charge_max: 5.0,
            p_discharge_max: 7.0,
            ..battery(100.0)
        };
        assert_eq!(max_charge_power(&spec, 0.5), 5.0);
        assert_eq!(max_discharge_power(&spec, 0.5), 7.0);
    }

    #[test]
    fn zero_capacity_battery_is_inert() {
        let spec = BatterySpec::default().scaled(0.0);
        assert_eq!(max_charge_power(&spec, 0.5), 0.0);
        assert_eq!(max_discharge_power(&spec, 0.5), 0.0);
        assert_eq!(battery_step(&spec, 0.5, 0.0, 0.0).unwrap(), 0.5);
    }

    #[test]
    fn scaling_preserves_c_rate() {
        let spec = BatterySpec::default().scaled(200.0);
        assert_eq!(spec.capacity_kwh, 200.0);
        assert_eq!(spec.p_charge_max, 100.0);
        assert_eq!(spec.p_discharge_max, 100.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn max_powers_land_on_binding_bound(
                soc in 0.1f64..1.0,
                cap in 1.0f64..10_000.0,
                eta_c in 0.5f64..1.0,
                eta_d in 0.5f64..1.0,
                c_rate in 0.05f64..2.0,
            ) {
                let spec = BatterySpec {
                    eta_charge: eta_c,
                    eta_discharge: eta_d,
                    ..BatterySpec::default()
                }
                .scaled(1.0);
                let spec = BatterySpec {
                    p_charge_max: c_rate,
                    p_discharge_max: c_rate,
                    ..spec
                }
                .scaled(cap);

                let pc = max_charge_power(&spec, soc);
                let next = battery_step(&spec, soc, pc, 0.0).unwrap();
                let at_limit = (pc - spec.p_charge_max).abs() <= 1e-9 * spec.p_charge_max;
                prop_assert!(at_limit || (next - spec.soc_max).abs() <= 1e-9);

                let pd = max_discharge_power(&spec, soc);
                let next = battery_step(&spec, soc, 0.0, pd).unwrap();
                let at_limit = (pd - spec.p_discharge_max).abs() <= 1e-9 * spec.p_discharge_max;
                prop_assert!(at_limit || (next - spec.soc_min).abs() <= 1e-9);
            }

            #[test]
            fn round_trip_recovers_both_efficiencies(
                energy in 0.1f64..30.0,
                eta_c in 0.5f64..1.0,
                eta_d in 0.5f64..1.0,
            ) {
                let spec = BatterySpec {
                    eta_charge: eta_c,
                    eta_discharge: eta_d,
                    ..battery(100.0)
                };
                let start = 0.5;
                let mid = battery_step(&spec, start, energy, 0.0).unwrap();
                // discharge that returns exactly to `start`
                let out = (mid - start) * spec.capacity_kwh * spec.eta_discharge;
                let end = battery_step(&spec, mid, 0.0, out).unwrap();
                prop_assert!((end - start).abs() < 1e-12);
                prop_assert!((out - eta_c * eta_d * energy).abs() < 1e-9 * energy.max(1.0));
            }

            #[test]
            fn pv_monotone_in_irradiance(
                g1 in 0.0f64..1.5,
                g2 in 0.0f64..1.5,
                t in -30.0f64..60.0,
            ) {
                let spec = PvSpec::default();
                let (lo, hi) = if g1 <= g2 { (g1, g2) } else { (g2, g1) };
                prop_assert!(pv_power(&spec, lo, t).unwrap() <= pv_power(&spec, hi, t).unwrap());
            }

            #[test]
            fn wind_continuous_on_operating_range(v in 3.0001f64..24.99) {
                let spec = WindSpec { rated_kw: 100.0, ..WindSpec::default() };
                let eps = 1e-7;
                let a = wind_power(&spec, v).unwrap();
                let b = wind_power(&spec, v + eps).unwrap();
                prop_assert!((a - b).abs() < 1e-4);
            }
        }
    }
}
