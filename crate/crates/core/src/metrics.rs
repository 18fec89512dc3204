//! Forecast error metrics: MAPE, RMSPE, R², MAE/MSE and the statistics of
//! per-sample absolute percentage errors.
//!
//! Percentage metrics divide by the actual value, so samples whose actual is
//! tiny compared with the rest of the series are excluded and counted. The
//! default threshold is 1% of the mean absolute actual value; a sample is also
//! excluded whenever its actual is exactly zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fraction of the mean absolute actual below which a sample is left out of
/// percentage metrics.
pub const NEAR_ZERO_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// Percent.
    pub mape: f64,
    /// Percent.
    pub rmspe: f64,
    pub r2: f64,
    pub mae: f64,
    pub mse: f64,
    pub n_used: usize,
    pub n_excluded_near_zero: usize,
}

/// Statistics of absolute percentage errors, all in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApeStats {
    pub max: f64,
    pub min: f64,
    /// Lower-middle element for even counts.
    pub median: f64,
    /// Population form (divides by n).
    pub std_dev: f64,
}

fn check_lengths(actual: &[f64], predicted: &[f64]) -> Result<()> {
    if actual.len() != predicted.len() {
        return Err(Error::Metric(format!(
            "length mismatch: {} actual vs {} predicted",
            actual.len(),
            predicted.len()
        )));
    }
    if actual.is_empty() {
        return Err(Error::Metric("no samples".into()));
    }
    Ok(())
}

/// `NEAR_ZERO_FRACTION × mean(|actual|)`.
pub fn near_zero_threshold(actual: &[f64]) -> f64 {
    if actual.is_empty() {
        return 0.0;
    }
    NEAR_ZERO_FRACTION * actual.iter().map(|y| y.abs()).sum::<f64>() / actual.len() as f64
}

/// Signed relative errors `(ŷ − y) / y` of the samples that survive the
/// near-zero filter, plus the number excluded.
pub fn relative_errors(
    actual: &[f64],
    predicted: &[f64],
    threshold: f64,
) -> Result<(Vec<f64>, usize)> {
    check_lengths(actual, predicted)?;
    let mut kept = Vec::with_capacity(actual.len());
    for (&y, &p) in actual.iter().zip(predicted) {
        if y != 0.0 && y.abs() >= threshold {
            kept.push((p - y) / y);
        }
    }
    let excluded = actual.len() - kept.len();
    if kept.is_empty() {
        return Err(Error::Metric(format!(
            "all {excluded} samples fall below the near-zero threshold {threshold}"
        )));
    }
    Ok((kept, excluded))
}

/// Absolute percentage errors of the surviving samples.
pub fn ape_values(actual: &[f64], predicted: &[f64], threshold: f64) -> Result<(Vec<f64>, usize)> {
    let (rel, excluded) = relative_errors(actual, predicted, threshold)?;
    Ok((rel.into_iter().map(|r| r.abs() * 100.0).collect(), excluded))
}

/// Mean absolute percentage error, percent.
pub fn mape(actual: &[f64], predicted: &[f64], threshold: f64) -> Result<f64> {
    let (ape, _) = ape_values(actual, predicted, threshold)?;
    Ok(ape.iter().sum::<f64>() / ape.len() as f64)
}

/// Root mean square percentage error, percent.
pub fn rmspe(actual: &[f64], predicted: &[f64], threshold: f64) -> Result<f64> {
    let (rel, _) = relative_errors(actual, predicted, threshold)?;
    Ok((rel.iter().map(|r| r * r).sum::<f64>() / rel.len() as f64).sqrt() * 100.0)
}

/// Coefficient of determination. Negative for fits worse than the mean.
pub fn r2_score(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    check_lengths(actual, predicted)?;
    if actual.len() < 2 {
        return Err(Error::Metric("R² needs at least two samples".into()));
    }
    let mean = actual.iter().sum::<f64>() / actual.len() as f64;
    let ss_tot: f64 = actual.iter().map(|y| (y - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::Metric("R² undefined for a constant actual series".into()));
    }
    let ss_res: f64 = actual.iter().zip(predicted).map(|(y, p)| (y - p).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// `(MAE, MSE)`.
pub fn mae_mse(actual: &[f64], predicted: &[f64]) -> Result<(f64, f64)> {
    check_lengths(actual, predicted)?;
    let n = actual.len() as f64;
    let (abs, sq) = actual
        .iter()
        .zip(predicted)
        .fold((0.0, 0.0), |(a, s), (y, p)| {
            let e = p - y;
            (a + e.abs(), s + e * e)
        });
    Ok((abs / n, sq / n))
}

pub fn ape_stats(actual: &[f64], predicted: &[f64], threshold: f64) -> Result<ApeStats> {
    let (mut ape, _) = ape_values(actual, predicted, threshold)?;
    ape.sort_by(f64::total_cmp);
    let n = ape.len();
    let mean = ape.iter().sum::<f64>() / n as f64;
    let var = ape.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n as f64;
    Ok(ApeStats {
        max: ape[n - 1],
        min: ape[0],
        median: ape[(n - 1) / 2],
        std_dev: var.sqrt(),
    })
}

impl MetricReport {
    /// All metrics with the default near-zero threshold.
    pub fn compute(actual: &[f64], predicted: &[f64]) -> Result<Self> {
        Self::with_threshold(actual, predicted, near_zero_threshold(actual))
    }

    pub fn with_threshold(actual: &[f64], predicted: &[f64], threshold: f64) -> Result<Self> {
        let (mae, mse) = mae_mse(actual, predicted)?;
        let (rel, excluded) = relative_errors(actual, predicted, threshold)?;
        let n = rel.len() as f64;
        Ok(Self {
            mape: rel.iter().map(|r| r.abs() * 100.0).sum::<f64>() / n,
            rmspe: (rel.iter().map(|r| r * r).sum::<f64>() / n).sqrt() * 100.0,
            r2: r2_score(actual, predicted)?,
            mae,
            mse,
            n_used: rel.len(),
            n_excluded_near_zero: excluded,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
    }

    #[test]
    fn mape_hand_cases() {
        assert_eq!(mape(&[100.0, 200.0], &[100.0, 200.0], 0.0).unwrap(), 0.0);
        assert!(close(mape(&[100.0, 200.0], &[110.0, 180.0], 0.0).unwrap(), 10.0, 1e-12));
        let (_, excluded) = ape_values(&[0.0, 100.0], &[5.0, 100.0], 1.0).unwrap();
        assert_eq!(excluded, 1);
        assert_eq!(mape(&[0.0, 100.0], &[5.0, 100.0], 1.0).unwrap(), 0.0);
    }

    #[test]
    fn rmspe_hand_cases() {
        assert_eq!(rmspe(&[5.0, 7.0], &[5.0, 7.0], 0.0).unwrap(), 0.0);
        assert!(close(rmspe(&[100.0, 200.0], &[110.0, 180.0], 0.0).unwrap(), 10.0, 1e-12));
        assert!(close(rmspe(&[100.0], &[120.0], 0.0).unwrap(), 20.0, 1e-12));
    }

    #[test]
    fn all_excluded_is_an_error() {
        assert!(mape(&[0.0, 0.0], &[1.0, 1.0], 0.0).is_err());
        assert!(ape_stats(&[0.1], &[1.0], 1.0).is_err());
    }

    #[test]
    fn r2_hand_cases() {
        assert_eq!(r2_score(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(r2_score(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap(), 0.0);
        assert!(close(r2_score(&[1.0, 2.0, 3.0], &[1.5, 2.0, 2.5]).unwrap(), 0.75, 1e-12));
        assert!(r2_score(&[4.0, 4.0], &[1.0, 2.0]).is_err());
        assert!(r2_score(&[4.0], &[4.0]).is_err());
        assert!(r2_score(&[1.0, 2.0], &[10.0, -10.0]).unwrap() < 0.0);
    }

    #[test]
    fn mae_mse_hand_cases() {
        assert_eq!(mae_mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), (0.0, 0.0));
        assert_eq!(mae_mse(&[0.0, 0.0], &[1.0, -1.0]).unwrap(), (1.0, 1.0));
        assert_eq!(mae_mse(&[0.0], &[3.0]).unwrap(), (3.0, 9.0));
        assert!(mae_mse(&[], &[]).is_err());
        assert!(mae_mse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn ape_stats_hand_cases() {
        let y = [100.0; 4];
        let s = ape_stats(&y, &[110.0, 80.0, 130.0, 60.0], 0.0).unwrap();
        assert!(close(s.max, 40.0, 1e-12));
        assert!(close(s.min, 10.0, 1e-12));
        assert!(close(s.median, 20.0, 1e-12));
        assert!(close(s.std_dev, 125f64.sqrt(), 1e-12));

        let one = ape_stats(&[50.0], &[55.0], 0.0).unwrap();
        assert_eq!(one.max, one.min);
        assert_eq!(one.median, one.max);
        assert_eq!(one.std_dev, 0.0);

        let perfect = ape_stats(&[3.0, 4.0], &[3.0, 4.0], 0.0).unwrap();
        assert_eq!((perfect.max, perfect.min, perfect.median, perfect.std_dev), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn report_counts_exclusions() {
        let y = [0.5, 100.0, 200.0, 300.0];
        let p = [9.0, 100.0, 200.0, 300.0];
        let r = MetricReport::compute(&y, &p).unwrap();
        assert_eq!(r.n_used, 3);
        assert_eq!(r.n_excluded_near_zero, 1);
        assert_eq!(r.mape, 0.0);
        assert!(r.mae > 0.0);
    }

    fn pairs() -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((1.0f64..1e4, -1e4f64..1e4), 2..40)
    }

    proptest! {
        #[test]
        fn permutation_invariant(v in pairs(), seed in any::<u64>()) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mut w = v.clone();
            w.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let (y1, p1): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
            let (y2, p2): (Vec<f64>, Vec<f64>) = w.into_iter().unzip();
            let a = MetricReport::compute(&y1, &p1).unwrap();
            let b = MetricReport::compute(&y2, &p2).unwrap();
            prop_assert!(close(a.mape, b.mape, 1e-12));
            prop_assert!(close(a.rmspe, b.rmspe, 1e-12));
            prop_assert!(close(a.r2, b.r2, 1e-9));
            prop_assert!(close(a.mae, b.mae, 1e-12));
            prop_assert!(close(a.mse, b.mse, 1e-12));
            let (sa, sb) = (ape_stats(&y1, &p1, 0.0).unwrap(), ape_stats(&y2, &p2, 0.0).unwrap());
            prop_assert_eq!(sa.max, sb.max);
            prop_assert_eq!(sa.median, sb.median);
            prop_assert!(close(sa.std_dev, sb.std_dev, 1e-12));
        }

        #[test]
        fn scale_behavior(v in pairs(), k in 0.01f64..100.0) {
            let (y, p): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
            let ys: Vec<f64> = y.iter().map(|x| x * k).collect();
            let ps: Vec<f64> = p.iter().map(|x| x * k).collect();
            let a = MetricReport::compute(&y, &p).unwrap();
            let b = MetricReport::compute(&ys, &ps).unwrap();
            prop_assert!(close(a.mape, b.mape, 1e-10));
            prop_assert!(close(a.rmspe, b.rmspe, 1e-10));
            prop_assert!(close(a.r2, b.r2, 1e-8));
            prop_assert!(close(a.mae * k, b.mae, 1e-10));
            prop_assert!(close(a.mse * k * k, b.mse, 1e-10));
            let (sa, sb) = (ape_stats(&y, &p, 0.0).unwrap(), ape_stats(&ys, &ps, 0.0).unwrap());
            prop_assert!(close(sa.median, sb.median, 1e-10));
            prop_assert!(close(sa.std_dev, sb.std_dev, 1e-9));
        }

        #[test]
        fn invariants_hold(v in pairs()) {
            let (y, p): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
            let r = MetricReport::compute(&y, &p).unwrap();
            prop_assert!(r.mape >= 0.0 && r.rmspe >= 0.0 && r.r2 <= 1.0);
            prop_assert_eq!(r.n_used + r.n_excluded_near_zero, y.len());
            let s = ape_stats(&y, &p, near_zero_threshold(&y)).unwrap();
            prop_assert!(s.min <= s.median && s.median <= s.max && s.std_dev >= 0.0);
        }

        #[test]
        fn constant_ape_makes_rmspe_equal_mape(y in prop::collection::vec(1.0f64..1e4, 1..30), ratio in 0.0f64..0.5) {
            let p: Vec<f64> = y.iter().map(|v| v * (1.0 + ratio)).collect();
            let a = mape(&y, &p, 0.0).unwrap();
            let b = rmspe(&y, &p, 0.0).unwrap();
            prop_assert!(close(a, b, 1e-12));
            prop_assert!(close(a, ratio * 100.0, 1e-9));
        }
    }
}
