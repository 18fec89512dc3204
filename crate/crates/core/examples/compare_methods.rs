//! Direct versus indirect, FCNN versus LSTM, on one dataset and split.
//! Writes the summary table and the trace view of the first test hours.
//!
//! ```text
//! cargo run --release --example compare_methods -- [epochs] [years] [out-dir]
//! ```
//! The full-size experiment is `netload compare` with the default config.

use netload::config::RunConfig;
use netload::pipeline::compare_methods;
use netload::synthgen::generate_series;

fn main() -> netload::Result<()> {
    let mut args = std::env::args().skip(1);
    let epochs = args.next().unwrap_or_else(|| "5".into());
    let years = args.next().unwrap_or_else(|| "2".into());
    let cfg = RunConfig::default().apply_pairs(&[
        ("train.epochs".into(), epochs),
        ("synth.n_years".into(), years),
    ])?;
    let records = generate_series(&cfg.synth_config())?.records;
    let (comparison, _) = compare_methods(&records, &cfg.compare_specs())?;

    print!("{}", comparison.summary_csv());
    println!("lowest median APE: {}", comparison.best_by_median_ape().unwrap());
    if let Some(dir) = args.next() {
        let dir = std::path::PathBuf::from(dir);
        std::fs::create_dir_all(&dir).map_err(|e| netload::Error::io(&dir, e))?;
        let write = |name: &str, text: String| std::fs::write(dir.join(name), text).map_err(|e| netload::Error::io(dir.join(name), e));
        write("comparison.csv", comparison.summary_csv())?;
        write("trace_view.csv", comparison.trace_view_csv(cfg.compare.trace_rows))?;
        println!("wrote {}", dir.display());
    }
    Ok(())
}
