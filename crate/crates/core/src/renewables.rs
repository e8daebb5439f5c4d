//! Meteorological ingest and per-unit renewable output profiles.

use std::io::{Read, Write};
use std::str::FromStr;

use chrono::{DateTime, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const HOURS_PER_DAY: usize = 24;

/// Irradiance at standard test conditions, W/m².
pub const STC_IRRADIANCE: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesKind {
    /// Global solar radiation, W/m².
    Solar,
    /// Hub-height wind speed, m/s.
    Wind,
}

impl FromStr for SeriesKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "solar" => Ok(SeriesKind::Solar),
            "wind" => Ok(SeriesKind::Wind),
            other => Err(Error::invalid(format!("unknown series type `{other}`"))),
        }
    }
}

/// Hourly measurements from one station. Always whole days starting at midnight.
#[derive(Debug, Clone)]
pub struct MeteoSeries<F> {
    station: String,
    kind: SeriesKind,
    timestamps: Vec<NaiveDateTime>,
    values: Vec<F>,
}

fn parse_timestamp(s: &str) -> Result<NaiveDateTime> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Ok(t.naive_utc());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(t);
        }
    }
    Err(Error::invalid(format!("unparseable timestamp `{s}`")))
}

impl<F: Scalar> MeteoSeries<F> {
    pub fn new(
        station: impl Into<String>,
        kind: SeriesKind,
        timestamps: Vec<NaiveDateTime>,
        values: Vec<F>,
    ) -> Result<Self> {
        if timestamps.len() != values.len() {
            return Err(Error::invalid("timestamp and value counts differ"));
        }
        if values.is_empty() || values.len() % HOURS_PER_DAY != 0 {
            return Err(Error::invalid(format!(
                "series length {} is not a positive multiple of {HOURS_PER_DAY}",
                values.len()
            )));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < F::zero())
        {
            return Err(Error::invalid(format!(
                "value {v} at row {i} is negative or not finite"
            )));
        }
        let first = timestamps[0];
        if first.hour() != 0 || first.minute() != 0 || first.second() != 0 {
            return Err(Error::invalid(format!("series must start at midnight, got {first}")));
        }
        for (i, w) in timestamps.windows(2).enumerate() {
            let step = w[1] - w[0];
            if step != chrono::Duration::hours(1) {
                return Err(Error::invalid(format!(
                    "non-hourly step between rows {} and {} ({} -> {}); gaps are rejected",
                    i,
                    i + 1,
                    w[0],
                    w[1]
                )));
            }
        }
        Ok(MeteoSeries {
            station: station.into(),
            kind,
            timestamps,
            values,
        })
    }

    /// Reads a `timestamp,value` CSV.
    pub fn from_csv<R: Read>(reader: R, station: impl Into<String>, kind: SeriesKind) -> Result<Self> {
        #[derive(Deserialize)]
        struct Rec {
            timestamp: String,
            value: f64,
        }
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut ts = Vec::new();
        let mut vs = Vec::new();
        for rec in rdr.deserialize::<Rec>() {
            let rec = rec?;
            ts.push(parse_timestamp(&rec.timestamp)?);
            vs.push(F::lit(rec.value));
        }
        Self::new(station, kind, ts, vs)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["timestamp", "value"])?;
        for (t, v) in self.timestamps.iter().zip(&self.values) {
            w.write_record([t.format("%Y-%m-%dT%H:%M:%S").to_string(), format!("{:.4}", v.as_f64())])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn station(&self) -> &str {
        &self.station
    }

    pub fn kind(&self) -> SeriesKind {
        self.kind
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    pub fn days(&self) -> usize {
        self.values.len() / HOURS_PER_DAY
    }

    pub fn day_start(&self, day: usize) -> Option<NaiveDateTime> {
        self.timestamps.get(day * HOURS_PER_DAY).copied()
    }

    pub fn day(&self, day: usize) -> Result<&[F]> {
        if day >= self.days() {
            return Err(Error::invalid(format!(
                "day index {day} out of range for {} days",
                self.days()
            )));
        }
        Ok(&self.values[day * HOURS_PER_DAY..(day + 1) * HOURS_PER_DAY])
    }
}

/// Per-unit-capacity output, one value per hour in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RenewableProfile<F>(Vec<F>);

impl<F: Scalar> RenewableProfile<F> {
    pub fn new(values: Vec<F>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("empty profile"));
        }
        if let Some(v) = values
            .iter()
            .find(|v| !v.is_finite() || **v < F::zero() || **v > F::one())
        {
            return Err(Error::invalid(format!("profile value {v} outside [0, 1]")));
        }
        Ok(RenewableProfile(values))
    }

    pub fn zeros(len: usize) -> Self {
        RenewableProfile(vec![F::zero(); len])
    }

    pub fn values(&self) -> &[F] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Applies `f` hour by hour and clamps the result back into `[0, 1]`.
    pub fn map_clamped(&self, mut f: impl FnMut(usize, F) -> F) -> Self {
        RenewableProfile(
            self.0
                .iter()
                .enumerate()
                .map(|(t, &v)| f(t, v).max(F::zero()).min(F::one()))
                .collect(),
        )
    }
}

/// Cubic wind turbine power curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurbineCurve<F> {
    pub cut_in: F,
    pub rated: F,
    pub cut_out: F,
}

impl<F: Scalar> Default for TurbineCurve<F> {
    fn default() -> Self {
        TurbineCurve {
            cut_in: F::lit(3.0),
            rated: F::lit(12.0),
            cut_out: F::lit(25.0),
        }
    }
}

impl<F: Scalar> TurbineCurve<F> {
    pub fn validate(&self) -> Result<()> {
        let ok = self.cut_in > F::zero() && self.cut_in < self.rated && self.rated < self.cut_out;
        if ok && self.cut_out.is_finite() {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "turbine curve needs 0 < cut-in < rated < cut-out, got {}/{}/{}",
                self.cut_in, self.rated, self.cut_out
            )))
        }
    }

    /// Per-unit output at wind speed `v` (m/s).
    pub fn output(&self, v: F) -> F {
        if v < self.cut_in || v > self.cut_out {
            F::zero()
        } else if v >= self.rated {
            F::one()
        } else {
            let ci3 = self.cut_in.powi(3);
            (v.powi(3) - ci3) / (self.rated.powi(3) - ci3)
        }
    }
}

/// Per-unit PV output for a radiation reading in W/m².
pub fn solar_output<F: Scalar>(radiation: F) -> F {
    (radiation / F::lit(STC_IRRADIANCE)).max(F::zero()).min(F::one())
}

pub fn solar_profile<F: Scalar>(series: &MeteoSeries<F>, day: usize) -> Result<RenewableProfile<F>> {
    if series.kind() != SeriesKind::Solar {
        return Err(Error::invalid(format!(
            "station `{}` is a wind-speed series, expected solar radiation",
            series.station()
        )));
    }
    let v = series.day(day)?.iter().map(|&r| solar_output(r)).collect();
    Ok(RenewableProfile(v))
}

pub fn wind_profile<F: Scalar>(
    series: &MeteoSeries<F>,
    day: usize,
    curve: &TurbineCurve<F>,
) -> Result<RenewableProfile<F>> {
    curve.validate()?;
    if series.kind() != SeriesKind::Wind {
        return Err(Error::invalid(format!(
            "station `{}` is a radiation series, expected wind speed",
            series.station()
        )));
    }
    let v = series.day(day)?.iter().map(|&s| curve.output(s)).collect();
    Ok(RenewableProfile(v))
}

/// Profiles for every day of a series, using the curve only for wind stations.
pub fn all_profiles<F: Scalar>(
    series: &MeteoSeries<F>,
    curve: &TurbineCurve<F>,
) -> Result<Vec<RenewableProfile<F>>> {
    (0..series.days())
        .map(|d| match series.kind() {
            SeriesKind::Solar => solar_profile(series, d),
            SeriesKind::Wind => wind_profile(series, d, curve),
        })
        .collect()
}

/// Sample (Pearson) correlation coefficient.
pub fn correlation<F: Scalar>(x: &[F], y: &[F]) -> Result<F> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "series lengths differ ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::invalid("correlation needs at least two samples"));
    }
    let n = F::from_usize_lossy(x.len());
    let mx = x.iter().copied().sum::<F>() / n;
    let my = y.iter().copied().sum::<F>() / n;
    let mut sxy = F::zero();
    let mut sxx = F::zero();
    let mut syy = F::zero();
    for (&a, &b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy = sxy + dx * dy;
        sxx = sxx + dx * dx;
        syy = syy + dy * dy;
    }
    if sxx == F::zero() || syy == F::zero() {
        return Err(Error::Degenerate(
            "correlation undefined for a constant series".into(),
        ));
    }
    let r = sxy / (sxx.sqrt() * syy.sqrt());
    Ok(r.max(-F::one()).min(F::one()))
}

/// Writes profiles as `day,hour,eta` rows, 24 per day.
pub fn write_profiles_csv<F: Scalar, W: Write>(profiles: &[RenewableProfile<F>], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["day", "hour", "eta"])?;
    for (d, p) in profiles.iter().enumerate() {
        for (h, v) in p.values().iter().enumerate() {
            w.write_record([d.to_string(), h.to_string(), format!("{:.9}", v.as_f64())])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_profiles_csv<F: Scalar, R: Read>(reader: R) -> Result<Vec<RenewableProfile<F>>> {
    #[derive(Deserialize)]
    struct Rec {
        day: usize,
        hour: usize,
        eta: f64,
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut days: Vec<Vec<F>> = Vec::new();
    for rec in rdr.deserialize::<Rec>() {
        let rec = rec?;
        if rec.day == days.len() {
            days.push(Vec::new());
        }
        let Some(cur) = days.get_mut(rec.day) else {
            return Err(Error::invalid(format!("profile rows out of order at day {}", rec.day)));
        };
        if rec.hour != cur.len() {
            return Err(Error::invalid(format!(
                "profile rows out of order at day {} hour {}",
                rec.day, rec.hour
            )));
        }
        cur.push(F::lit(rec.eta));
    }
    days.into_iter().map(RenewableProfile::new).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn hours(days: usize) -> Vec<NaiveDateTime> {
        let start = NaiveDate::from_ymd_opt(2012, 9, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
        (0..days * 24).map(|h| start + chrono::Duration::hours(h as i64)).collect()
    }

    fn series(kind: SeriesKind, vals: Vec<f64>) -> MeteoSeries<f64> {
        let days = vals.len() / 24;
        MeteoSeries::new("KP", kind, hours(days), vals).unwrap()
    }

    #[test]
    fn zero_radiation_gives_zero_profile() {
        let s = series(SeriesKind::Solar, vec![0.0; 24]);
        let p = solar_profile(&s, 0).unwrap();
        assert!(p.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stc_radiation_is_unit_output() {
        let mut v = vec![0.0; 24];
        v[12] = 1000.0;
        v[13] = 1400.0;
        v[11] = 500.0;
        let p = solar_profile(&series(SeriesKind::Solar, v), 0).unwrap();
        assert_eq!(p.values()[12], 1.0);
        assert_eq!(p.values()[13], 1.0);
        // 500 / 1000 evaluated by hand
        assert_eq!(p.values()[11], 0.5);
    }

    #[test]
    fn wind_curve_reference_points() {
        let c = TurbineCurve::<f64>::default();
        assert_eq!(c.output(2.0), 0.0);
        assert_eq!(c.output(12.0), 1.0);
        assert_eq!(c.output(20.0), 1.0);
        assert_eq!(c.output(26.0), 0.0);
        // (343 - 27) / (1728 - 27) = 316 / 1701
        assert!((c.output(7.0) - 0.185_773_074_661_963_55).abs() < 1e-15);
    }

    #[test]
    fn wrong_series_type_rejected() {
        let s = series(SeriesKind::Wind, vec![5.0; 24]);
        assert!(solar_profile(&s, 0).is_err());
        let s = series(SeriesKind::Solar, vec![5.0; 24]);
        assert!(wind_profile(&s, 0, &TurbineCurve::default()).is_err());
    }

    #[test]
    fn day_out_of_range() {
        let s = series(SeriesKind::Solar, vec![1.0; 48]);
        assert!(solar_profile(&s, 1).is_ok());
        assert!(solar_profile(&s, 2).is_err());
    }

    #[test]
    fn malformed_curve_rejected() {
        let c = TurbineCurve {
            cut_in: 5.0,
            rated: 4.0,
            cut_out: 25.0,
        };
        let s = series(SeriesKind::Wind, vec![5.0; 24]);
        assert!(wind_profile(&s, 0, &c).is_err());
        assert!(TurbineCurve { cut_in: 0.0, rated: 4.0, cut_out: 25.0 }.validate().is_err());
    }

    #[test]
    fn gaps_and_partial_days_rejected() {
        let mut ts = hours(1);
        ts[5] = ts[5] + chrono::Duration::hours(1);
        assert!(MeteoSeries::new("x", SeriesKind::Solar, ts, vec![0.0f64; 24]).is_err());
        let ts = hours(1)[..23].to_vec();
        assert!(MeteoSeries::new("x", SeriesKind::Solar, ts, vec![0.0f64; 23]).is_err());
        let mut v = vec![0.0f64; 24];
        v[3] = -1.0;
        assert!(MeteoSeries::new("x", SeriesKind::Solar, hours(1), v).is_err());
    }

    #[test]
    fn correlation_reference_values() {
        assert!((correlation(&[1.0f64, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((correlation(&[1.0f64, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
        // two-pass evaluation: means 7/3 and 7/3; deviations (-4/3,-1/3,5/3) and (-4/3,2/3,2/3)
        // sxy = 16/9 - 2/9 + 10/9 = 24/9, sxx = 42/9, syy = 24/9
        let expect = (24.0f64 / 9.0) / ((42.0f64 / 9.0).sqrt() * (24.0f64 / 9.0).sqrt());
        let got = correlation(&[1.0, 2.0, 4.0], &[1.0, 3.0, 3.0]).unwrap();
        assert!((got - expect).abs() < 1e-14, "{got} vs {expect}");
    }

    #[test]
    fn correlation_degenerate_inputs() {
        assert!(matches!(
            correlation(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::Degenerate(_))
        ));
        assert!(correlation(&[1.0], &[2.0]).is_err());
        assert!(correlation(&[1.0, 2.0], &[2.0]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let vals: Vec<f64> = (0..48).map(|h| (h % 24) as f64 * 10.0).collect();
        let s = series(SeriesKind::Solar, vals);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let back = MeteoSeries::<f64>::from_csv(buf.as_slice(), "KP", SeriesKind::Solar).unwrap();
        assert_eq!(back.values(), s.values());

        let profiles = all_profiles(&s, &TurbineCurve::default()).unwrap();
        let mut buf = Vec::new();
        write_profiles_csv(&profiles, &mut buf).unwrap();
        let back: Vec<RenewableProfile<f64>> = read_profiles_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[1].len(), 24);
    }
}
