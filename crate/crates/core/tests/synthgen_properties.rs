use chrono::Datelike;
use netload::dataset::HourlyRecord;
use netload::synthgen::{generate_series, SynthConfig};

fn mean_by(records: &[HourlyRecord], keep: impl Fn(&HourlyRecord) -> bool, f: impl Fn(&HourlyRecord) -> f64) -> f64 {
    let v: Vec<f64> = records.iter().filter(|r| keep(r)).map(f).collect();
    v.iter().sum::<f64>() / v.len() as f64
}

#[test]
fn default_series_has_expected_structure() {
    let cfg = SynthConfig::default();
    let records = generate_series(&cfg).unwrap().records;
    assert_eq!(records.len(), 3 * 8760 + 8784);

    let first = cfg.start_year;
    let last = first + cfg.n_years as i32 - 1;
    let load = |y: i32| mean_by(&records, |r| r.timestamp.year() == y, |r| r.total_load);
    assert!(load(last) > load(first), "{} vs {}", load(last), load(first));

    let cf = |m: u32| mean_by(&records, |r| r.timestamp.month() == m, |r| r.wind_gen / r.wind_capacity);
    assert!(cf(7) < cf(4), "July CF {} vs April CF {}", cf(7), cf(4));

    for month in 1..=12 {
        let solar = |y: i32| {
            mean_by(
                &records,
                |r| r.timestamp.year() == y && r.timestamp.month() == month,
                |r| r.solar_gen,
            )
        };
        assert!(
            solar(last) >= cfg.solar_growth * solar(first),
            "month {month}: {} vs {}",
            solar(last),
            solar(first)
        );
    }
}

#[test]
fn seed_changes_noise_but_not_calendar() {
    let a = generate_series(&SynthConfig { n_years: 1, ..SynthConfig::default() }).unwrap().records;
    let b = generate_series(&SynthConfig { n_years: 1, seed: 9, ..SynthConfig::default() }).unwrap().records;
    assert_eq!(a.len(), b.len());
    assert!(a.iter().zip(&b).all(|(x, y)| x.timestamp == y.timestamp));
    assert!(a.iter().zip(&b).any(|(x, y)| x.total_load != y.total_load));
}

#[test]
fn leap_year_start_has_8784_hours() {
    let r = generate_series(&SynthConfig { start_year: 2024, n_years: 1, ..SynthConfig::default() }).unwrap();
    assert_eq!(r.records.len(), 8784);
}
