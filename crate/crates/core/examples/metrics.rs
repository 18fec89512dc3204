//! Forecast error metrics on a small hand-made series, including an hour
//! whose net load is close enough to zero to be left out of the
//! percentage metrics.

use netload::metrics::{ape_stats, near_zero_threshold, MetricReport};

fn main() -> netload::Result<()> {
    let actual = [32000.0, 28500.0, 150.0, 30100.0, 41000.0];
    let predicted = [31500.0, 29400.0, 900.0, 30000.0, 39800.0];
    let r = MetricReport::compute(&actual, &predicted)?;
    println!("MAPE  {:.3}%", r.mape);
    println!("RMSPE {:.3}%", r.rmspe);
    println!("R2    {:.4}", r.r2);
    println!("MAE   {:.1} MW, MSE {:.0} MW^2", r.mae, r.mse);
    println!("{} hours used, {} excluded as near zero", r.n_used, r.n_excluded_near_zero);
    let s = ape_stats(&actual, &predicted, near_zero_threshold(&actual))?;
    println!("APE max {:.3} min {:.3} median {:.3} std {:.3}", s.max, s.min, s.median, s.std_dev);
    Ok(())
}
