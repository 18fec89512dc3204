//! Trains one net-load model directly and prints its loss curve.
//!
//! ```text
//! cargo run --release --example train_model -- [fcnn|lstm] [epochs] [years]
//! ```

use netload::dataset::{build_dataset, Series, WindowSpec};
use netload::metrics::MetricReport;
use netload::models::{init_params, ModelKind, ModelSizes};
use netload::synthgen::{generate_series, SynthConfig};
use netload::training::{predict_range, train_model, TrainConfig};

fn main() -> netload::Result<()> {
    let mut args = std::env::args().skip(1);
    let kind: ModelKind = args.next().as_deref().unwrap_or("fcnn").parse()?;
    let epochs = args.next().map_or(15, |s| s.parse().expect("epochs must be an integer"));
    let n_years = args.next().map_or(2, |s| s.parse().expect("years must be an integer"));

    let records = generate_series(&SynthConfig {
        n_years,
        ..SynthConfig::default()
    })?
    .records;
    let mut features = Series::OBSERVED.to_vec();
    features.push(Series::NetLoad);
    let ds = build_dataset(&records, WindowSpec::new(24, 1, Series::NetLoad, features)?)?;
    let sizes = ModelSizes {
        features: ds.n_features(),
        look_back: 24,
        hidden: kind.default_hidden(),
        outputs: 1,
    };
    let cfg = TrainConfig {
        epochs,
        seed: 1,
        ..TrainConfig::default()
    };
    let out = train_model(init_params(kind, sizes, 1)?, &ds, &cfg)?;

    println!("epoch  train_loss  val_mae   lr");
    for r in &out.report.rows {
        println!("{:>5}  {:>10.6}  {:>7.5}  {:.3e}", r.epoch, r.train_loss, r.val_mae, r.lr);
    }
    let test = ds.split.test.clone();
    let pred: Vec<f64> = predict_range(&out.model, &ds, test.clone())?
        .into_iter()
        .map(|v| ds.denormalize(v))
        .collect();
    let m = MetricReport::compute(&ds.raw_targets(test), &pred)?;
    println!("{kind} test: MAPE {:.2}%  RMSPE {:.2}%  R2 {:.4}", m.mape, m.rmspe, m.r2);
    Ok(())
}
