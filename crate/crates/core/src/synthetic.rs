//! Seeded synthetic weather for offline runs and tests.
//!
//! Three hourly series over the same dates: one solar radiation station and
//! two wind stations with opposite diurnal phase, one windiest at night and
//! one windiest in the afternoon.

use chrono::{Duration, NaiveDate, NaiveDateTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::renewables::{MeteoSeries, SeriesKind, HOURS_PER_DAY};
use crate::scalar::Scalar;

pub const DEFAULT_SEED: u64 = 20_190_601;
pub const DEFAULT_SYNTHETIC_DAYS: usize = 60;

pub const SOLAR_STATION: &str = "KP";
pub const NIGHT_WIND_STATION: &str = "TC";
pub const DAY_WIND_STATION: &str = "SKG";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticConfig {
    pub days: usize,
    pub seed: u64,
    pub start: NaiveDate,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            days: DEFAULT_SYNTHETIC_DAYS,
            seed: DEFAULT_SEED,
            start: NaiveDate::from_ymd_opt(2023, 6, 1).expect("valid date"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset<F> {
    pub solar: MeteoSeries<F>,
    pub night_wind: MeteoSeries<F>,
    pub day_wind: MeteoSeries<F>,
}

fn timestamps(cfg: &SyntheticConfig) -> Vec<NaiveDateTime> {
    let t0 = cfg.start.and_hms_opt(0, 0, 0).expect("midnight exists");
    (0..cfg.days * HOURS_PER_DAY)
        .map(|h| t0 + Duration::hours(h as i64))
        .collect()
}

/// Two decimals, so CSV round trips are exact.
fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

fn solar_values(days: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut out = Vec::with_capacity(days * HOURS_PER_DAY);
    let mut cloud: f64 = 0.7;
    for _ in 0..days {
        cloud = (0.6 * cloud + 0.4 * rng.gen_range(0.2..1.0)).clamp(0.15, 1.0);
        for h in 0..HOURS_PER_DAY {
            let phase = (h as f64 + 0.5 - 6.0) / 12.0;
            let clear = if (0.0..=1.0).contains(&phase) {
                950.0 * (std::f64::consts::PI * phase).sin().powf(1.3)
            } else {
                0.0
            };
            let noise = rng.gen_range(0.85..1.15);
            out.push(round2((clear * cloud * noise).max(0.0)));
        }
    }
    out
}

/// Wind speed with an AR(1) daily mean and a cosine diurnal cycle peaking at
/// `peak_hour`.
fn wind_values(days: usize, mean: f64, amplitude: f64, peak_hour: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut out = Vec::with_capacity(days * HOURS_PER_DAY);
    let mut level = mean;
    for _ in 0..days {
        level = (0.5 * level + 0.5 * (mean + rng.gen_range(-3.0..3.0))).max(1.0);
        for h in 0..HOURS_PER_DAY {
            let angle = 2.0 * std::f64::consts::PI * (h as f64 - peak_hour) / HOURS_PER_DAY as f64;
            let v = level + amplitude * angle.cos() + rng.gen_range(-1.2..1.2);
            out.push(round2(v.max(0.0)));
        }
    }
    out
}

/// Generates the three stations from one seeded stream.
pub fn generate<F: Scalar>(cfg: &SyntheticConfig) -> Result<SyntheticDataset<F>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let ts = timestamps(cfg);
    let solar = solar_values(cfg.days, &mut rng);
    let night = wind_values(cfg.days, 7.5, 3.5, 2.0, &mut rng);
    let day = wind_values(cfg.days, 5.5, 3.0, 14.0, &mut rng);
    let lift = |v: Vec<f64>| v.into_iter().map(F::lit).collect::<Vec<F>>();
    Ok(SyntheticDataset {
        solar: MeteoSeries::new(SOLAR_STATION, SeriesKind::Solar, ts.clone(), lift(solar))?,
        night_wind: MeteoSeries::new(NIGHT_WIND_STATION, SeriesKind::Wind, ts.clone(), lift(night))?,
        day_wind: MeteoSeries::new(DAY_WIND_STATION, SeriesKind::Wind, ts, lift(day))?,
    })
}

/// Bundled copies of the default dataset, as `timestamp,value` CSV text.
pub mod bundled {
    pub const SOLAR_CSV: &str = include_str!("../data/kp_solar.csv");
    pub const NIGHT_WIND_CSV: &str = include_str!("../data/tc_wind.csv");
    pub const DAY_WIND_CSV: &str = include_str!("../data/skg_wind.csv");
}

/// Loads the bundled default dataset.
pub fn bundled_dataset<F: Scalar>() -> Result<SyntheticDataset<F>> {
    Ok(SyntheticDataset {
        solar: MeteoSeries::from_csv(bundled::SOLAR_CSV.as_bytes(), SOLAR_STATION, SeriesKind::Solar)?,
        night_wind: MeteoSeries::from_csv(bundled::NIGHT_WIND_CSV.as_bytes(), NIGHT_WIND_STATION, SeriesKind::Wind)?,
        day_wind: MeteoSeries::from_csv(bundled::DAY_WIND_CSV.as_bytes(), DAY_WIND_STATION, SeriesKind::Wind)?,
    })
}
