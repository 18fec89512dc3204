//! The indirect method: separate load, wind and solar models whose
//! forecasts are combined into net load.
//!
//! ```text
//! cargo run --release --example indirect_forecast -- [fcnn|lstm] [epochs] [all]
//! ```
//! Pass `all` as the third argument to feed every observed column to each
//! sub-model instead of the per-target routing.

use netload::models::ModelKind;
use netload::pipeline::{build_datasets, run_indirect, FeatureRouting, Method, MethodSpec};
use netload::synthgen::{generate_series, SynthConfig};

fn main() -> netload::Result<()> {
    let mut args = std::env::args().skip(1);
    let kind: ModelKind = args.next().as_deref().unwrap_or("fcnn").parse()?;
    let mut spec = MethodSpec::new(Method::Indirect, kind);
    spec.train.epochs = args.next().map_or(10, |s| s.parse().expect("epochs must be an integer"));
    if args.next().as_deref() == Some("all") {
        spec.routing = FeatureRouting::All;
    }
    let records = generate_series(&SynthConfig {
        n_years: 2,
        ..SynthConfig::default()
    })?
    .records;

    let datasets = build_datasets(&records, &spec)?;
    let run = run_indirect(&datasets, &spec)?;
    let r = &run.report;
    for s in &r.submodels {
        let last = s.train_report.rows.last().unwrap();
        let names: Vec<&str> = s.features.iter().map(|f| f.name()).collect();
        println!("{:<10} seed {} val MAE {:.4}  [{}]", s.target, s.seed, last.val_mae, names.join(", "));
    }
    println!(
        "{}: MAPE {:.2}%  RMSPE {:.2}%  R2 {:.4}  median APE {:.2}",
        r.label, r.metrics.mape, r.metrics.rmspe, r.metrics.r2, r.ape.median
    );
    println!("timestamp              actual     predicted  error %");
    for t in r.trace.iter().take(6) {
        println!("{}  {:>9.0}  {:>9.0}  {:>+7.2}", t.timestamp, t.actual, t.predicted, t.percentage_error);
    }
    Ok(())
}
