//! Generator for the bundled synthetic island year.
//!
//! Irradiance follows a clear-sky curve at 43°N scaled by a daily cloudiness
//! factor, temperature has seasonal and diurnal cycles, wind is Weibull
//! distributed, and load has winter and evening peaks reaching 3000 kW.
//! Nothing here is measured data.

use std::f64::consts::PI;

use rand::Rng;

use crate::rng::stream_rng;
use crate::rng::Stream;
use crate::scenario::{weibull_quantile, TypicalYear, HOURS_PER_YEAR};

pub const LATITUDE_DEG: f64 = 43.0;
pub const PEAK_LOAD_KW: f64 = 3000.0;
const GENERATOR_SEED: u64 = 20_240_601;

/// Clear-sky global horizontal irradiance, kW/m², at the middle of
/// `hour_of_day` on `day` (0-based).
pub fn clear_sky_irradiance(day: usize, hour_of_day: usize) -> f64 {
    let phi = LATITUDE_DEG.to_radians();
    let decl = (23.45f64).to_radians() * (2.0 * PI * (284.0 + day as f64 + 1.0) / 365.0).sin();
    let omega = (15.0 * (hour_of_day as f64 + 0.5 - 12.0)).to_radians();
    let cos_z = phi.sin() * decl.sin() + phi.cos() * decl.cos() * omega.cos();
    if cos_z <= 0.0 {
        return 0.0;
    }
    // simple air-mass attenuation
    let air_mass = 1.0 / cos_z.max(0.05);
    1.353 * cos_z * 0.7f64.powf(air_mass.powf(0.678))
}

fn temperature(day: usize, hour_of_day: usize) -> f64 {
    let seasonal = 9.0 + 13.0 * (2.0 * PI * (day as f64 - 110.0) / 365.0).sin();
    let diurnal = 3.5 * (2.0 * PI * (hour_of_day as f64 - 9.0) / 24.0).sin();
    seasonal + diurnal
}

fn load_shape(day: usize, hour_of_day: usize) -> f64 {
    let t = hour_of_day as f64;
    let bump = |center: f64, width: f64| (-((t - center) / width).powi(2)).exp();
    let diurnal = 0.55 + 0.25 * bump(8.5, 2.5) + 0.45 * bump(19.5, 2.5);
    // winter heating, smaller summer cooling
    let season = 1.0
        + 0.22 * (2.0 * PI * (day as f64 + 10.0) / 365.0).cos().max(0.0)
        + 0.08 * (-(2.0 * PI * (day as f64 + 10.0) / 365.0).cos()).max(0.0);
    let weekend = if day % 7 >= 5 { 0.93 } else { 1.0 };
    diurnal * season * weekend
}

/// The bundled typical year. Deterministic.
pub fn synthetic_year() -> TypicalYear {
    let mut rng = stream_rng(GENERATOR_SEED, Stream::Solar);
    let clouds: Vec<f64> = (0..365).map(|_| 0.35 + 0.65 * rng.random::<f64>().sqrt()).collect();
    let mut wind_rng = stream_rng(GENERATOR_SEED, Stream::Wind);

    let mut irradiance = Vec::with_capacity(HOURS_PER_YEAR);
    let mut temp = Vec::with_capacity(HOURS_PER_YEAR);
    let mut wind = Vec::with_capacity(HOURS_PER_YEAR);
    let mut shape = Vec::with_capacity(HOURS_PER_YEAR);
    for h in 0..HOURS_PER_YEAR {
        let (day, t) = (h / 24, h % 24);
        irradiance.push(round6(clear_sky_irradiance(day, t) * clouds[day]));
        temp.push(round6(temperature(day, t)));
        wind.push(round6(weibull_quantile(wind_rng.random(), 2.0, 6.8)));
        shape.push(load_shape(day, t));
    }
    let max = shape.iter().cloned().fold(0.0, f64::max);
    let load = shape.iter().map(|s| round6(PEAK_LOAD_KW * s / max)).collect();
    TypicalYear::new(irradiance, temp, wind, load).expect("generated year is valid")
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}
