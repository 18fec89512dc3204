//! How accuracy degrades as the forecast horizon grows.
//!
//! ```text
//! cargo run --release --example lookahead_sensitivity -- [fcnn|lstm] [epochs] [horizons...]
//! ```

use netload::models::ModelKind;
use netload::pipeline::{mape_non_decreasing, sensitivity_csv, sensitivity_lookahead, Method, MethodSpec};
use netload::synthgen::{generate_series, SynthConfig};

fn main() -> netload::Result<()> {
    let mut args = std::env::args().skip(1);
    let kind: ModelKind = args.next().as_deref().unwrap_or("fcnn").parse()?;
    let mut spec = MethodSpec::new(Method::Direct, kind);
    spec.train.epochs = args.next().map_or(10, |s| s.parse().expect("epochs must be an integer"));
    let mut horizons: Vec<usize> = args.map(|s| s.parse().expect("horizons must be integers")).collect();
    if horizons.is_empty() {
        horizons = vec![1, 2, 4];
    }
    let records = generate_series(&SynthConfig {
        n_years: 2,
        ..SynthConfig::default()
    })?
    .records;
    let rows = sensitivity_lookahead(&records, &spec, &horizons)?;
    print!("{}", sensitivity_csv(&rows));
    println!("MAPE non-decreasing with horizon: {}", mape_non_decreasing(&rows));
    Ok(())
}
