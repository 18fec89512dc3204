//! Sliding windows, the chronological 90:5:5 split and its leakage guard.

use netload::dataset::{build_dataset, Series, WindowSpec};
use netload::synthgen::{generate_series, SynthConfig};

fn main() -> netload::Result<()> {
    let records = generate_series(&SynthConfig {
        n_years: 1,
        ..SynthConfig::default()
    })?
    .records;
    for look_ahead in [1, 2, 4] {
        let mut features = Series::OBSERVED.to_vec();
        features.push(Series::NetLoad);
        let ds = build_dataset(&records, WindowSpec::new(24, look_ahead, Series::NetLoad, features)?)?;
        ds.check_leakage()?;
        println!(
            "look-ahead {look_ahead}: {} samples -> train {} / val {} / test {}, first test target {}, split {}",
            ds.len(),
            ds.split.train.len(),
            ds.split.val.len(),
            ds.split.test.len(),
            ds.target_timestamp(ds.split.test.start),
            &ds.split_hash()[..12]
        );
    }

    let ds = build_dataset(
        &records,
        WindowSpec::new(24, 1, Series::WindGen, vec![Series::WindSpeed, Series::WindCapacity, Series::WindGen])?,
    )?;
    let rows = ds.fit_rows();
    println!(
        "normalizer fitted on records {}..{} (of {}); wind_gen range {:.0}..{:.0} MW",
        rows.start,
        rows.end,
        records.len(),
        ds.normalizer.min[2],
        ds.normalizer.max[2]
    );
    let x = ds.input(0);
    println!("sample 0: {} inputs, first step {:?}, target {:.4}", x.len(), &x[..3], ds.target(0));
    Ok(())
}
