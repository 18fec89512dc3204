//! Round-trips records through the dataset CSV schema, then shows what
//! ingestion reports for gaps and bad rows.

use netload::dataset::{find_gaps, CSV_HEADER, ingest_csv, parse_csv, save_csv, shift_timezone, GMT_TO_CST_HOURS};
use netload::synthgen::{generate_series, SynthConfig};

fn main() -> netload::Result<()> {
    let cfg = SynthConfig {
        n_years: 1,
        ..SynthConfig::default()
    };
    let mut records = generate_series(&cfg)?.records;
    // Knock out a day to simulate a feed outage.
    records.drain(1000..1024);

    let dir = tempfile::tempdir().map_err(|e| netload::Error::io(std::env::temp_dir(), e))?;
    let path = dir.path().join("hourly.csv");
    save_csv(&path, &records)?;
    let (back, stats) = ingest_csv(&path)?;
    assert_eq!(back, records);
    println!("{} rows, {} missing hours", stats.rows, stats.missing_hours.len());
    println!("first gap at {}", find_gaps(&back)[0]);
    println!(
        "net load {:.0} .. {:.0} MW, {} negative hours",
        stats.min_net_load_mw, stats.max_net_load_mw, stats.negative_net_load_hours
    );

    let local = shift_timezone(&back[..3], GMT_TO_CST_HOURS);
    println!("{} GMT is {} CST", back[0].timestamp, local[0].timestamp);

    let bad = format!("{}\n2021-01-01T00:00:00,40000,5000,30000,-10,9000,10,7,0\n", CSV_HEADER.join(","));
    match parse_csv(bad.as_bytes()) {
        Ok(_) => println!("unexpectedly accepted"),
        Err(e) => println!("rejected: {e}"),
    }
    Ok(())
}
