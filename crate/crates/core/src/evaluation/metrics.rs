use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_pair(actual: &[f64], predicted: &[f64]) -> Result<()> {
    if actual.len() != predicted.len() {
        return Err(Error::LengthMismatch {
            left: actual.len(),
            right: predicted.len(),
        });
    }
    if actual.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Pearson correlation with population normalization in numerator and
/// denominator.
pub fn pearson(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    check_pair(actual, predicted)?;
    if actual.len() < 2 {
        return Err(Error::NotEnoughData {
            needed: 2,
            got: actual.len(),
        });
    }
    let (ma, mp) = (mean(actual), mean(predicted));
    let (mut cov, mut va, mut vp) = (0.0, 0.0, 0.0);
    for (&a, &p) in actual.iter().zip(predicted) {
        let (da, dp) = (a - ma, p - mp);
        cov += da * dp;
        va += da * da;
        vp += dp * dp;
    }
    if va == 0.0 {
        return Err(Error::UndefinedCorrelation("actual"));
    }
    if vp == 0.0 {
        return Err(Error::UndefinedCorrelation("predicted"));
    }
    let r = cov / (va.sqrt() * vp.sqrt());
    if !r.is_finite() {
        return Err(Error::NonFinite("correlation"));
    }
    Ok(r.clamp(-1.0, 1.0))
}

pub fn mae(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    check_pair(actual, predicted)?;
    Ok(actual
        .iter()
        .zip(predicted)
        .map(|(a, p)| (a - p).abs())
        .sum::<f64>()
        / actual.len() as f64)
}

/// Mean relative error over samples with a positive reference rate.
/// Returns the error and the number of zero-rate samples left out.
pub fn mre(actual: &[f64], predicted: &[f64]) -> Result<(f64, usize)> {
    check_pair(actual, predicted)?;
    let mut sum = 0.0;
    let mut used = 0usize;
    for (&a, &p) in actual.iter().zip(predicted) {
        if a > 0.0 {
            sum += (a - p).abs() / a;
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::UndefinedMre);
    }
    Ok((sum / used as f64, actual.len() - used))
}

/// P, MAE and MRE of one evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub pearson: f64,
    pub mae: f64,
    pub mre: f64,
    pub n_total: usize,
    pub n_mre_excluded: usize,
    /// Seconds per block for feature extraction plus prediction, when measured.
    pub wall_time_per_block: Option<f64>,
}

impl MetricsReport {
    pub fn compute(actual: &[f64], predicted: &[f64]) -> Result<Self> {
        let (mre, excluded) = mre(actual, predicted)?;
        Ok(Self {
            pearson: pearson(actual, predicted)?,
            mae: mae(actual, predicted)?,
            mre,
            n_total: actual.len(),
            n_mre_excluded: excluded,
            wall_time_per_block: None,
        })
    }

    /// Unweighted mean of per-fold metrics; counts are summed.
    pub fn average(reports: &[MetricsReport]) -> Result<Self> {
        if reports.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let k = reports.len() as f64;
        let avg = |f: fn(&MetricsReport) -> f64| reports.iter().map(f).sum::<f64>() / k;
        let wall_time_per_block = reports
            .iter()
            .map(|r| r.wall_time_per_block)
            .sum::<Option<f64>>()
            .map(|t| t / k);
        Ok(Self {
            pearson: avg(|r| r.pearson),
            mae: avg(|r| r.mae),
            mre: avg(|r| r.mre),
            n_total: reports.iter().map(|r| r.n_total).sum(),
            n_mre_excluded: reports.iter().map(|r| r.n_mre_excluded).sum(),
            wall_time_per_block,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pearson_examples() {
        let x = [1.0, 4.0, 2.5, 9.0, -3.0];
        assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 5.0).collect();
        assert!((pearson(&x, &y).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_zero_variance() {
        assert!(matches!(
            pearson(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]),
            Err(Error::UndefinedCorrelation("actual"))
        ));
        assert!(matches!(
            pearson(&[1.0, 2.0, 3.0], &[0.0, 0.0, 0.0]),
            Err(Error::UndefinedCorrelation("predicted"))
        ));
        assert!(pearson(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn mae_examples() {
        assert_eq!(mae(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mae(&[3.0, 5.0], &[4.0, 7.0]).unwrap(), 1.5);
        assert_eq!(mae(&[-9.0, 15.0], &[-12.0, 21.0]).unwrap(), 4.5);
        assert!(mae(&[], &[]).is_err());
    }

    #[test]
    fn mre_examples() {
        assert_eq!(mre(&[2.0, 8.0], &[2.0, 8.0]).unwrap(), (0.0, 0));
        assert_eq!(mre(&[4.0], &[5.0]).unwrap(), (0.25, 0));
        assert_eq!(mre(&[0.0, 4.0], &[9.0, 4.0]).unwrap(), (0.0, 1));
        assert!(matches!(mre(&[0.0, 0.0], &[1.0, 2.0]), Err(Error::UndefinedMre)));
    }

    #[test]
    fn average_is_fold_mean() {
        let a = MetricsReport {
            pearson: 0.9,
            mae: 2.0,
            mre: 0.1,
            n_total: 10,
            n_mre_excluded: 1,
            wall_time_per_block: None,
        };
        let b = MetricsReport {
            pearson: 0.7,
            mae: 4.0,
            mre: 0.3,
            n_total: 9,
            n_mre_excluded: 0,
            wall_time_per_block: None,
        };
        let avg = MetricsReport::average(&[a, b]).unwrap();
        assert!((avg.pearson - 0.8).abs() < 1e-15);
        assert_eq!(avg.mae, 3.0);
        assert_eq!(avg.n_total, 19);
        assert_eq!(avg.n_mre_excluded, 1);
        assert_eq!(avg.wall_time_per_block, None);
    }
}
