//! Seeded stochastic years: Gaussian-perturbed irradiance around a typical
//! meteorological year, Weibull wind speeds, and sequential two-state
//! Markov availability chains for every component class.

use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::components::{ComponentKind, PerComponent};
use crate::error::{ensure, ModelError};
use crate::rng::{stream_rng, Stream};

pub const HOURS_PER_YEAR: usize = 8760;

/// Deterministic base year every scenario perturbs.
#[derive(Debug, Clone, PartialEq)]
pub struct TypicalYear {
    /// kW/m²
    pub irradiance: Vec<f64>,
    /// °C
    pub temperature: Vec<f64>,
    /// m/s
    pub wind_speed: Vec<f64>,
    /// kW
    pub load: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TmyRow {
    hour: usize,
    irradiance_kw_m2: f64,
    temperature_c: f64,
    wind_speed_m_s: f64,
    load_kw: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum TmyReadError {
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}, data row {row}: {reason}")]
    Row {
        path: String,
        row: usize,
        reason: String,
    },
    #[error("{path}: {source}")]
    Invalid { path: String, source: ModelError },
}

impl TypicalYear {
    pub fn new(
        irradiance: Vec<f64>,
        temperature: Vec<f64>,
        wind_speed: Vec<f64>,
        load: Vec<f64>,
    ) -> Result<Self, ModelError> {
        let tmy = TypicalYear {
            irradiance,
            temperature,
            wind_speed,
            load,
        };
        tmy.validate()?;
        Ok(tmy)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, series) in [
            ("irradiance", &self.irradiance),
            ("temperature", &self.temperature),
            ("wind_speed", &self.wind_speed),
            ("load", &self.load),
        ] {
            if series.len() != HOURS_PER_YEAR {
                return Err(ModelError::LengthMismatch {
                    name,
                    expected: HOURS_PER_YEAR,
                    actual: series.len(),
                });
            }
            ensure(
                series.iter().all(|v| v.is_finite()),
                name,
                "contains a non-finite value",
            )?;
        }
        ensure(
            self.irradiance.iter().all(|&g| g >= 0.0),
            "irradiance",
            "must be >= 0 everywhere",
        )?;
        ensure(
            self.wind_speed.iter().all(|&v| v >= 0.0),
            "wind_speed",
            "must be >= 0 everywhere",
        )?;
        ensure(
            self.load.iter().all(|&l| l >= 0.0),
            "load",
            "must be >= 0 everywhere",
        )
    }

    /// Reads the `hour,irradiance_kw_m2,temperature_c,wind_speed_m_s,load_kw`
    /// columnar format. Hours must run 0..8759 in order.
    pub fn read_csv(path: &Path) -> Result<Self, TmyReadError> {
        let shown = path.display().to_string();
        let mut reader = csv::Reader::from_path(path).map_err(|source| TmyReadError::Csv {
            path: shown.clone(),
            source,
        })?;
        let mut tmy = TypicalYear {
            irradiance: Vec::with_capacity(HOURS_PER_YEAR),
            temperature: Vec::with_capacity(HOURS_PER_YEAR),
            wind_speed: Vec::with_capacity(HOURS_PER_YEAR),
            load: Vec::with_capacity(HOURS_PER_YEAR),
        };
        for (i, row) in reader.deserialize::<TmyRow>().enumerate() {
            let row = row.map_err(|source| TmyReadError::Csv {
                path: shown.clone(),
                source,
            })?;
            if row.hour != i {
                return Err(TmyReadError::Row {
                    path: shown,
                    row: i + 1,
                    reason: format!("expected hour {i}, found {}", row.hour),
                });
            }
            tmy.irradiance.push(row.irradiance_kw_m2);
            tmy.temperature.push(row.temperature_c);
            tmy.wind_speed.push(row.wind_speed_m_s);
            tmy.load.push(row.load_kw);
        }
        tmy.validate().map_err(|source| TmyReadError::Invalid {
            path: shown,
            source,
        })?;
        Ok(tmy)
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), csv::Error> {
        let mut writer = csv::Writer::from_path(path)?;
        for h in 0..self.irradiance.len() {
            writer.serialize(TmyRow {
                hour: h,
                irradiance_kw_m2: self.irradiance[h],
                temperature_c: self.temperature[h],
                wind_speed_m_s: self.wind_speed[h],
                load_kw: self.load[h],
            })?;
        }
        writer.flush()?;
        Ok(())
    }
}

/// Weather noise parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StochasticParams {
    /// Irradiance noise standard deviation, kW/m².
    pub sigma_pv: f64,
    pub weibull_shape: f64,
    /// m/s
    pub weibull_scale: f64,
}

impl StochasticParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        ensure(self.sigma_pv >= 0.0, "stochastic.sigma_pv", "must be >= 0")?;
        self.validate_wind()
    }

    fn validate_wind(&self) -> Result<(), ModelError> {
        ensure(
            self.weibull_shape > 0.0 && self.weibull_shape.is_finite(),
            "stochastic.weibull_shape",
            "must be > 0",
        )?;
        ensure(
            self.weibull_scale > 0.0 && self.weibull_scale.is_finite(),
            "stochastic.weibull_scale",
            "must be > 0",
        )
    }
}

/// Hourly failure (λ) and repair (μ) probabilities of a two-state chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReliabilityParams {
    pub failure_rate: f64,
    pub repair_rate: f64,
}

impl ReliabilityParams {
    pub const ALWAYS_AVAILABLE: ReliabilityParams = ReliabilityParams {
        failure_rate: 0.0,
        repair_rate: 1.0,
    };

    pub fn validate(&self) -> Result<(), ModelError> {
        ensure(
            (0.0..=1.0).contains(&self.failure_rate),
            "reliability.failure_rate",
            "must lie in [0, 1]",
        )?;
        ensure(
            (0.0..=1.0).contains(&self.repair_rate),
            "reliability.repair_rate",
            "must lie in [0, 1]",
        )?;
        ensure(
            self.failure_rate + self.repair_rate > 0.0,
            "reliability",
            "failure_rate + repair_rate must be > 0",
        )
    }

    /// Stationary probability of the available state, μ/(λ+μ).
    pub fn availability(&self) -> f64 {
        self.repair_rate / (self.failure_rate + self.repair_rate)
    }

    /// Stationary probability of the failed state, λ/(λ+μ).
    pub fn unavailability(&self) -> f64 {
        self.failure_rate / (self.failure_rate + self.repair_rate)
    }
}

/// One realized stochastic year.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioBundle {
    pub irradiance: Vec<f64>,
    pub temperature: Vec<f64>,
    pub wind_speed: Vec<f64>,
    pub load: Vec<f64>,
    /// `true` = available.
    pub availability: PerComponent<Vec<bool>>,
}

impl ScenarioBundle {
    pub fn hours(&self) -> usize {
        self.load.len()
    }

    /// A bundle with every component available all year.
    pub fn fully_available(
        irradiance: Vec<f64>,
        temperature: Vec<f64>,
        wind_speed: Vec<f64>,
        load: Vec<f64>,
    ) -> Self {
        let n = load.len();
        ScenarioBundle {
            irradiance,
            temperature,
            wind_speed,
            load,
            availability: PerComponent::splat(vec![true; n]),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let n = self.load.len();
        let check = |name: &'static str, len: usize| {
            if len == n {
                Ok(())
            } else {
                Err(ModelError::LengthMismatch {
                    name,
                    expected: n,
                    actual: len,
                })
            }
        };
        check("irradiance", self.irradiance.len())?;
        check("temperature", self.temperature.len())?;
        check("wind_speed", self.wind_speed.len())?;
        check("availability.pv", self.availability.pv.len())?;
        check("availability.wind", self.availability.wind.len())?;
        check("availability.battery", self.availability.battery.len())?;
        check("availability.turbine", self.availability.turbine.len())
    }
}

/// The clamp applied to one noisy irradiance value.
pub fn perturb_value(base: f64, noise: f64) -> f64 {
    if base > 0.0 {
        (base + noise).max(0.0)
    } else {
        0.0
    }
}

/// Adds independent N(0, σ²) noise to every daylight hour of `irradiance`.
/// Night hours (base 0) stay 0 and consume no draws.
pub fn perturb_solar(
    irradiance: &[f64],
    params: &StochasticParams,
    seed: u64,
) -> Result<Vec<f64>, ModelError> {
    ensure(params.sigma_pv >= 0.0, "stochastic.sigma_pv", "must be >= 0")?;
    if params.sigma_pv == 0.0 {
        return Ok(irradiance.iter().map(|&g| perturb_value(g, 0.0)).collect());
    }
    let mut rng = stream_rng(seed, Stream::Solar);
    Ok(irradiance
        .iter()
        .map(|&g| {
            if g > 0.0 {
                let z: f64 = rng.sample(StandardNormal);
                perturb_value(g, params.sigma_pv * z)
            } else {
                0.0
            }
        })
        .collect())
}

/// Weibull inverse CDF.
pub fn weibull_quantile(u: f64, shape: f64, scale: f64) -> f64 {
    scale * (-(-u).ln_1p()).powf(1.0 / shape)
}

/// `n_hours` independent Weibull(shape, scale) wind speeds.
pub fn sample_wind(
    params: &StochasticParams,
    n_hours: usize,
    seed: u64,
) -> Result<Vec<f64>, ModelError> {
    params.validate_wind()?;
    let mut rng = stream_rng(seed, Stream::Wind);
    Ok((0..n_hours)
        .map(|_| {
            let u: f64 = rng.random();
            weibull_quantile(u, params.weibull_shape, params.weibull_scale)
        })
        .collect())
}

/// Hourly availability chain seeded from one sub-stream.
fn markov_chain<R: Rng>(params: &ReliabilityParams, n_hours: usize, rng: &mut R) -> Vec<bool> {
    let mut up = true;
    let mut out = Vec::with_capacity(n_hours);
    for _ in 0..n_hours {
        out.push(up);
        let u: f64 = rng.random();
        up = if up {
            u >= params.failure_rate
        } else {
            u < params.repair_rate
        };
    }
    out
}

/// A two-state availability chain that starts available, fails with
/// probability λ per hour and recovers with probability μ per hour.
/// `component` selects the sub-stream of `seed`.
pub fn sample_availability(
    params: &ReliabilityParams,
    n_hours: usize,
    seed: u64,
    component: ComponentKind,
) -> Result<Vec<bool>, ModelError> {
    params.validate()?;
    let mut rng = stream_rng(seed, Stream::Availability(component.index()));
    Ok(markov_chain(params, n_hours, &mut rng))
}

/// Composes the three samplers into one stochastic year.
pub fn build_scenario(
    tmy: &TypicalYear,
    sparams: &StochasticParams,
    rparams: &PerComponent<ReliabilityParams>,
    seed: u64,
) -> Result<ScenarioBundle, ModelError> {
    sparams.validate()?;
    for (_, p) in rparams.iter() {
        p.validate()?;
    }
    let n = tmy.load.len();
    let availability = PerComponent {
        pv: sample_availability(&rparams.pv, n, seed, ComponentKind::Pv)?,
        wind: sample_availability(&rparams.wind, n, seed, ComponentKind::Wind)?,
        battery: sample_availability(&rparams.battery, n, seed, ComponentKind::Battery)?,
        turbine: sample_availability(&rparams.turbine, n, seed, ComponentKind::Turbine)?,
    };
    Ok(ScenarioBundle {
        irradiance: perturb_solar(&tmy.irradiance, sparams, seed)?,
        temperature: tmy.temperature.clone(),
        wind_speed: sample_wind(sparams, n, seed)?,
        load: tmy.load.clone(),
        availability,
    })
}
