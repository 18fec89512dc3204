//! Generates the synthetic ERCOT-like series and summarizes it by year.
//!
//! ```text
//! cargo run --release --example generate_synthetic -- [years] [out.csv]
//! ```

use chrono::Datelike;
use netload::dataset::{compute_net_load, save_csv, DatasetStats};
use netload::synthgen::{generate_series, SynthConfig};

fn main() -> netload::Result<()> {
    let mut args = std::env::args().skip(1);
    let n_years = args.next().map_or(4, |s| s.parse().expect("years must be an integer"));
    let cfg = SynthConfig {
        n_years,
        ..SynthConfig::default()
    };
    let series = generate_series(&cfg)?;
    let stats = DatasetStats::from_records(&series.records);
    println!(
        "{} hourly rows, {} .. {}",
        stats.rows,
        stats.first_timestamp.unwrap(),
        stats.last_timestamp.unwrap()
    );
    println!("year   load MW  wind MW  solar MW  net MW  min net MW");
    for year in cfg.start_year..cfg.start_year + n_years as i32 {
        let rows: Vec<_> = series.records.iter().filter(|r| r.timestamp.year() == year).collect();
        let mean = |f: &dyn Fn(&netload::dataset::HourlyRecord) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / rows.len() as f64;
        let min_net = rows.iter().map(|r| compute_net_load(r)).fold(f64::INFINITY, f64::min);
        println!(
            "{year} {:>9.0} {:>8.0} {:>9.0} {:>7.0} {:>11.0}",
            mean(&|r| r.total_load),
            mean(&|r| r.wind_gen),
            mean(&|r| r.solar_gen),
            mean(&compute_net_load),
            min_net
        );
    }
    if let Some(path) = args.next() {
        save_csv(path.as_ref(), &series.records)?;
        println!("wrote {path}");
    }
    Ok(())
}
