//! Deterministic generator of hourly grid data with realistic structure:
//! growing, temperature-driven load with an evening peak; wind whose speed
//! dips in summer; solar following a clear-sky envelope scaled by a cloud
//! process; wind capacity growing linearly and solar capacity compounding.
//!
//! Every random draw comes from one ChaCha8 stream seeded by
//! [`SynthConfig::seed`], so a configuration fixes the output bit for bit.
//! Timestamps are local standard time and need no shifting.

use std::f64::consts::TAU;

use chrono::{Datelike, Duration, NaiveDate, Timelike, Weekday};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::HourlyRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub start_year: i32,
    pub n_years: u32,
    pub seed: u64,

    pub base_load_mw: f64,
    /// Fractional growth per year, compounded continuously over the hours.
    pub load_growth: f64,
    /// Stationary standard deviation of the AR(1) load noise, as a fraction
    /// of the trend load.
    pub load_noise: f64,
    pub load_noise_ar: f64,
    /// Load increase per °C above `cooling_threshold_c`, as a fraction.
    pub cooling_sensitivity: f64,
    pub cooling_threshold_c: f64,
    /// Load increase per °C below `heating_threshold_c`, as a fraction.
    pub heating_sensitivity: f64,
    pub heating_threshold_c: f64,
    /// Relative swing of the diurnal cycle, peaking at `peak_hour`.
    pub diurnal_amplitude: f64,
    pub peak_hour: f64,
    pub weekend_factor: f64,

    pub mean_temperature_c: f64,
    pub annual_temperature_amplitude_c: f64,
    pub diurnal_temperature_amplitude_c: f64,
    pub temperature_noise_c: f64,

    pub wind_capacity_mw: f64,
    /// Capacity added per year, spread linearly over the hours.
    pub wind_capacity_increment_mw: f64,
    pub mean_wind_speed_ms: f64,
    /// Depth of the Gaussian summer dip in mean wind speed.
    pub summer_wind_dip_ms: f64,
    pub summer_dip_center_day: f64,
    pub summer_dip_width_days: f64,
    pub diurnal_wind_amplitude_ms: f64,
    /// Innovation scale of the wind-speed anomaly.
    pub wind_noise_ms: f64,
    pub wind_noise_ar: f64,
    /// Second smoothing stage applied to the wind anomaly.
    pub wind_smoothing: f64,
    pub cut_in_speed_ms: f64,
    pub rated_speed_ms: f64,
    pub max_capacity_factor: f64,

    pub solar_capacity_mw: f64,
    /// Capacity multiplier per elapsed year.
    pub solar_growth: f64,
    pub latitude_deg: f64,
    pub solar_efficiency: f64,
    pub mean_clearness: f64,
    pub cloud_noise: f64,
    pub cloud_noise_ar: f64,
    pub cloud_smoothing: f64,
    pub min_clearness: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            start_year: 2021,
            n_years: 4,
            seed: 42,
            base_load_mw: 45_000.0,
            load_growth: 0.02,
            load_noise: 0.01,
            load_noise_ar: 0.9,
            cooling_sensitivity: 0.02,
            cooling_threshold_c: 22.0,
            heating_sensitivity: 0.012,
            heating_threshold_c: 12.0,
            diurnal_amplitude: 0.10,
            peak_hour: 18.0,
            weekend_factor: 0.93,
            mean_temperature_c: 20.0,
            annual_temperature_amplitude_c: 10.0,
            diurnal_temperature_amplitude_c: 5.0,
            temperature_noise_c: 0.6,
            wind_capacity_mw: 30_000.0,
            wind_capacity_increment_mw: 2_500.0,
            mean_wind_speed_ms: 8.0,
            summer_wind_dip_ms: 1.8,
            summer_dip_center_day: 200.0,
            summer_dip_width_days: 40.0,
            diurnal_wind_amplitude_ms: 0.8,
            wind_noise_ms: 0.4,
            wind_noise_ar: 0.98,
            wind_smoothing: 0.8,
            cut_in_speed_ms: 3.0,
            rated_speed_ms: 12.0,
            max_capacity_factor: 0.8,
            solar_capacity_mw: 8_000.0,
            solar_growth: 1.33,
            latitude_deg: 31.0,
            solar_efficiency: 0.8,
            mean_clearness: 0.75,
            cloud_noise: 0.04,
            cloud_noise_ar: 0.97,
            cloud_smoothing: 0.7,
            min_clearness: 0.15,
        }
    }
}

/// Noiseless and intermediate components behind each generated row.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Latent {
    /// Load without the AR noise term, MW.
    pub load_clean: Vec<f64>,
    /// Wind capacity factor implied by the seasonal/diurnal mean speed alone.
    pub wind_cf_clean: Vec<f64>,
    /// Realized wind capacity factor.
    pub wind_cf: Vec<f64>,
    /// Clear-sky envelope in `[0, 1]`, zero at night.
    pub solar_envelope: Vec<f64>,
    /// Cloud clearness multiplier.
    pub clearness: Vec<f64>,
    /// `total_load − wind_gen − solar_gen` for every row.
    pub net_load: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub records: Vec<HourlyRecord>,
    pub latent: Latent,
}

/// Hours from January 1 of `start_year` to January 1 of `start_year + n_years`.
pub fn hours_in_years(start_year: i32, n_years: u32) -> Result<usize> {
    let start = NaiveDate::from_ymd_opt(start_year, 1, 1);
    let end = NaiveDate::from_ymd_opt(start_year + n_years as i32, 1, 1);
    match (start, end) {
        (Some(s), Some(e)) => Ok((e - s).num_hours() as usize),
        _ => Err(Error::Config(format!("year {start_year} is out of range"))),
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_years < 1 {
            return Err(Error::Config("n_years must be at least 1".into()));
        }
        let positive = [
            ("base_load_mw", self.base_load_mw),
            ("wind_capacity_mw", self.wind_capacity_mw),
            ("solar_capacity_mw", self.solar_capacity_mw),
            ("solar_growth", self.solar_growth),
            ("summer_dip_width_days", self.summer_dip_width_days),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.rated_speed_ms <= self.cut_in_speed_ms {
            return Err(Error::Config("rated wind speed must exceed cut-in speed".into()));
        }
        if !(0.0..=1.0).contains(&self.max_capacity_factor) || !(0.0..=1.0).contains(&self.solar_efficiency) {
            return Err(Error::Config("capacity factors must lie in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.min_clearness) {
            return Err(Error::Config("min_clearness must lie in [0, 1]".into()));
        }
        for (name, v) in [
            ("load_noise_ar", self.load_noise_ar),
            ("wind_noise_ar", self.wind_noise_ar),
            ("wind_smoothing", self.wind_smoothing),
            ("cloud_noise_ar", self.cloud_noise_ar),
            ("cloud_smoothing", self.cloud_smoothing),
        ] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1), got {v}")));
            }
        }
        hours_in_years(self.start_year, self.n_years).map(|_| ())
    }

    fn capacity_factor(&self, speed: f64) -> f64 {
        let x = ((speed - self.cut_in_speed_ms) / (self.rated_speed_ms - self.cut_in_speed_ms)).clamp(0.0, 1.0);
        self.max_capacity_factor * x * x
    }
}

/// Sine of the sun's elevation, floored at zero.
fn clear_sky(latitude_deg: f64, day_of_year: f64, hour: f64) -> f64 {
    let declination = 23.44f64.to_radians() * (TAU * (284.0 + day_of_year) / 365.0).sin();
    let hour_angle = (15.0 * (hour - 12.0)).to_radians();
    let lat = latitude_deg.to_radians();
    let s = lat.sin() * declination.sin() + lat.cos() * declination.cos() * hour_angle.cos();
    s.max(0.0)
}

/// Stationary AR(1) innovation scale for a target standard deviation.
fn innovation(std: f64, phi: f64) -> f64 {
    std * (1.0 - phi * phi).sqrt()
}

pub fn generate_series(cfg: &SynthConfig) -> Result<SynthOutput> {
    cfg.validate()?;
    let n = hours_in_years(cfg.start_year, cfg.n_years)?;
    let start = NaiveDate::from_ymd_opt(cfg.start_year, 1, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .ok_or_else(|| Error::Config("invalid start year".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };

    let temp_sigma = innovation(cfg.temperature_noise_c, 0.95);
    let load_sigma = innovation(cfg.load_noise, cfg.load_noise_ar);

    let (mut temp_ar, mut load_ar) = (0.0, 0.0);
    let (mut wind_raw, mut wind_anom) = (0.0, 0.0);
    let (mut cloud_raw, mut cloud_anom) = (0.0, 0.0);

    let mut records = Vec::with_capacity(n);
    let mut latent = Latent::default();
    let hours_per_year = 365.25 * 24.0;
    let span = (n.max(2) - 1) as f64;

    for i in 0..n {
        let ts = start + Duration::hours(i as i64);
        let hour = ts.hour() as f64;
        let doy = ts.ordinal() as f64;
        let years = i as f64 / hours_per_year;

        // Draw order is fixed: temperature, load, wind, cloud.
        let (e_temp, e_load, e_wind, e_cloud) = (normal(), normal(), normal(), normal());

        temp_ar = 0.95 * temp_ar + temp_sigma * e_temp;
        let temperature = cfg.mean_temperature_c
            + cfg.annual_temperature_amplitude_c * (TAU * (doy - cfg.summer_dip_center_day) / 365.25).cos()
            + cfg.diurnal_temperature_amplitude_c * (TAU * (hour - 15.0) / 24.0).cos()
            + temp_ar;

        let trend = cfg.base_load_mw * (1.0 + cfg.load_growth).powf(years);
        let weather = 1.0
            + cfg.cooling_sensitivity * (temperature - cfg.cooling_threshold_c).max(0.0)
            + cfg.heating_sensitivity * (cfg.heating_threshold_c - temperature).max(0.0);
        let diurnal = 1.0 + cfg.diurnal_amplitude * (TAU * (hour - cfg.peak_hour) / 24.0).cos();
        let weekday = match ts.weekday() {
            Weekday::Sat | Weekday::Sun => cfg.weekend_factor,
            _ => 1.0,
        };
        let load_clean = trend * weather * diurnal * weekday;
        load_ar = cfg.load_noise_ar * load_ar + load_sigma * e_load;
        let total_load = load_clean + trend * load_ar;

        let dip = (-0.5 * ((doy - cfg.summer_dip_center_day) / cfg.summer_dip_width_days).powi(2)).exp();
        let mean_speed = cfg.mean_wind_speed_ms - cfg.summer_wind_dip_ms * dip
            + cfg.diurnal_wind_amplitude_ms * (TAU * (hour - 2.0) / 24.0).cos();
        wind_raw = cfg.wind_noise_ar * wind_raw + cfg.wind_noise_ms * e_wind;
        wind_anom = cfg.wind_smoothing * wind_anom + (1.0 - cfg.wind_smoothing) * wind_raw;
        let wind_speed = (mean_speed + wind_anom).max(0.0);
        let wind_cf = cfg.capacity_factor(wind_speed);
        let wind_capacity =
            cfg.wind_capacity_mw + cfg.wind_capacity_increment_mw * cfg.n_years as f64 * (i as f64 / span);
        let wind_gen = wind_capacity * wind_cf;

        let envelope = clear_sky(cfg.latitude_deg, doy, hour);
        cloud_raw = cfg.cloud_noise_ar * cloud_raw + cfg.cloud_noise * e_cloud;
        cloud_anom = cfg.cloud_smoothing * cloud_anom + (1.0 - cfg.cloud_smoothing) * cloud_raw;
        let clearness = (cfg.mean_clearness + cloud_anom).clamp(cfg.min_clearness, 1.0);
        let solar_capacity = cfg.solar_capacity_mw * cfg.solar_growth.powf(years);
        let solar_gen = solar_capacity * cfg.solar_efficiency * envelope * clearness;
        let irradiance = 1000.0 * envelope * clearness;

        let r = HourlyRecord {
            timestamp: ts,
            total_load,
            wind_gen,
            wind_capacity,
            solar_gen,
            solar_capacity,
            temperature,
            wind_speed,
            irradiance,
        };
        latent.load_clean.push(load_clean);
        latent.wind_cf_clean.push(cfg.capacity_factor(mean_speed));
        latent.wind_cf.push(wind_cf);
        latent.solar_envelope.push(envelope);
        latent.clearness.push(clearness);
        latent.net_load.push(total_load - wind_gen - solar_gen);
        records.push(r);
    }
    Ok(SynthOutput { records, latent })
}
