use microgrid_core::renewables::MeteoSeries;
use microgrid_core::synthetic::{bundled, bundled_dataset, generate, SyntheticConfig};

fn csv_of(series: &MeteoSeries<f64>) -> String {
    let mut out = Vec::new();
    series.write_csv(&mut out).unwrap();
    String::from_utf8(out).unwrap()
}

/// Set `MICROGRID_REGENERATE_DATA=1` to rewrite the bundled files.
#[test]
fn bundled_files_match_generator() {
    let data = generate::<f64>(&SyntheticConfig::default()).unwrap();
    let expected = [
        ("kp_solar.csv", csv_of(&data.solar), bundled::SOLAR_CSV),
        ("tc_wind.csv", csv_of(&data.night_wind), bundled::NIGHT_WIND_CSV),
        ("skg_wind.csv", csv_of(&data.day_wind), bundled::DAY_WIND_CSV),
    ];
    if std::env::var_os("MICROGRID_REGENERATE_DATA").is_some() {
        let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
        for (name, text, _) in &expected {
            std::fs::write(dir.join(name), text).unwrap();
        }
        return;
    }
    for (name, text, stored) in &expected {
        assert_eq!(text, stored, "{name} differs from the generator output");
    }
}

#[test]
fn bundled_dataset_loads() {
    let d = bundled_dataset::<f64>().unwrap();
    assert_eq!(d.solar.days(), 60);
    assert_eq!(d.night_wind.days(), 60);
    assert_eq!(d.day_wind.values().len(), 60 * 24);
}

#[test]
fn wind_stations_peak_at_opposite_times() {
    let d = generate::<f64>(&SyntheticConfig::default()).unwrap();
    let mean_at = |s: &MeteoSeries<f64>, hours: &[usize]| -> f64 {
        let v = s.values();
        let mut sum = 0.0;
        let mut n = 0.0;
        for day in 0..s.days() {
            for &h in hours {
                sum += v[day * 24 + h];
                n += 1.0;
            }
        }
        sum / n
    };
    let night = [0, 1, 2, 3, 4];
    let afternoon = [12, 13, 14, 15, 16];
    assert!(mean_at(&d.night_wind, &night) > mean_at(&d.night_wind, &afternoon) + 2.0);
    assert!(mean_at(&d.day_wind, &afternoon) > mean_at(&d.day_wind, &night) + 2.0);
}

#[test]
fn seed_changes_the_data() {
    let a = generate::<f64>(&SyntheticConfig::default()).unwrap();
    let b = generate::<f64>(&SyntheticConfig { seed: 7, ..Default::default() }).unwrap();
    assert_ne!(a.solar.values(), b.solar.values());
    let a2 = generate::<f64>(&SyntheticConfig::default()).unwrap();
    assert_eq!(a.night_wind.values(), a2.night_wind.values());
}
