//! Metrics and evaluation protocols: k-fold cross-validation, cross-QP
//! train/test evaluation, feature-subset ablation and scatter dumps.

mod metrics;

use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::block::DatasetRecord;
use crate::error::{Error, Result};
use crate::features::FeatureSet;
use crate::models::{qp_set, ModelFile, ModelSpec, RateModel, TrainingInfo};

pub use metrics::{mae, mre, pearson, MetricsReport};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalOptions {
    /// Record per-block wall time. Off by default so reports are reproducible.
    pub measure_time: bool,
    /// Floor predictions at 0 bits before scoring.
    pub clamp: bool,
}

/// Scores a model on a record set.
pub fn evaluate(
    model: &RateModel,
    records: &[DatasetRecord],
    opts: EvalOptions,
) -> Result<MetricsReport> {
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let start = Instant::now();
    let predicted: Vec<f64> = records
        .iter()
        .map(|r| {
            if opts.clamp {
                model.predict_clamped(&r.block)
            } else {
                model.predict(&r.block)
            }
        })
        .collect();
    let elapsed = start.elapsed().as_secs_f64();
    if predicted.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFinite("predictions"));
    }
    let actual: Vec<f64> = records.iter().map(|r| r.rate_bits()).collect();
    let mut report = MetricsReport::compute(&actual, &predicted)?;
    if opts.measure_time {
        report.wall_time_per_block = Some(elapsed / records.len() as f64);
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CvOptions {
    pub k: usize,
    pub seed: u64,
    /// Keep all blocks of one image in the same fold. The image is the part
    /// of `source_id` before the first `/`.
    pub group_by_image: bool,
    pub eval: EvalOptions,
}

impl Default for CvOptions {
    fn default() -> Self {
        Self {
            k: 5,
            seed: 0,
            group_by_image: false,
            eval: EvalOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossValReport {
    pub per_fold: Vec<MetricsReport>,
    pub averaged: MetricsReport,
    pub fold_seed: u64,
    pub fold_sizes: Vec<usize>,
    pub trained_params: Vec<RateModel>,
}

fn image_key(source_id: &str) -> &str {
    source_id.split('/').next().unwrap_or(source_id)
}

/// Assigns each record index to a fold.
///
/// Block-level splits shuffle the indices and cut them into `k` contiguous
/// runs whose sizes differ by at most one. Grouped splits shuffle the images
/// and hand each one to the currently smallest fold.
pub fn fold_assignment(records: &[DatasetRecord], k: usize, seed: u64, group_by_image: bool) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {k}")));
    }
    if records.len() < k {
        return Err(Error::NotEnoughData {
            needed: k,
            got: records.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    if group_by_image {
        let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, r) in records.iter().enumerate() {
            groups.entry(image_key(r.block.source_id())).or_default().push(i);
        }
        if groups.len() < k {
            return Err(Error::NotEnoughData {
                needed: k,
                got: groups.len(),
            });
        }
        let mut groups: Vec<Vec<usize>> = groups.into_values().collect();
        groups.shuffle(&mut rng);
        for g in groups {
            let smallest = (0..k).min_by_key(|&f| folds[f].len()).unwrap_or(0);
            folds[smallest].extend(g);
        }
    } else {
        let mut idx: Vec<usize> = (0..records.len()).collect();
        idx.shuffle(&mut rng);
        let (base, extra) = (records.len() / k, records.len() % k);
        let mut it = idx.into_iter();
        for (f, fold) in folds.iter_mut().enumerate() {
            let size = base + usize::from(f < extra);
            fold.extend(it.by_ref().take(size));
        }
    }
    Ok(folds)
}

/// k-fold cross-validation: train on k−1 folds, score the held-out fold,
/// and average the per-fold metrics.
pub fn kfold_cv(records: &[DatasetRecord], spec: &ModelSpec, opts: CvOptions) -> Result<CrossValReport> {
    let folds = fold_assignment(records, opts.k, opts.seed, opts.group_by_image)?;
    let mut in_fold = vec![0usize; records.len()];
    for (f, fold) in folds.iter().enumerate() {
        for &i in fold {
            in_fold[i] = f;
        }
    }
    let mut per_fold = Vec::with_capacity(opts.k);
    let mut trained = Vec::with_capacity(opts.k);
    for (f, fold) in folds.iter().enumerate() {
        let train: Vec<DatasetRecord> = records
            .iter()
            .zip(&in_fold)
            .filter(|(_, &g)| g != f)
            .map(|(r, _)| r.clone())
            .collect();
        let test: Vec<DatasetRecord> = fold.iter().map(|&i| records[i].clone()).collect();
        let (model, _) = spec.fit(&train)?;
        per_fold.push(evaluate(&model, &test, opts.eval)?);
        trained.push(model);
    }
    Ok(CrossValReport {
        averaged: MetricsReport::average(&per_fold)?,
        per_fold,
        fold_seed: opts.seed,
        fold_sizes: folds.iter().map(Vec::len).collect(),
        trained_params: trained,
    })
}

/// Train on one record set, score on another (e.g. different QPs).
#[derive(Debug, Clone, PartialEq)]
pub struct CrossQpReport {
    pub qp_train: Vec<i32>,
    pub qp_eval: Vec<i32>,
    pub metrics: MetricsReport,
    pub model: RateModel,
}

pub fn cross_qp_eval(
    train: &[DatasetRecord],
    test: &[DatasetRecord],
    spec: &ModelSpec,
    opts: EvalOptions,
) -> Result<CrossQpReport> {
    if train.is_empty() || test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (model, _) = spec.fit(train)?;
    Ok(CrossQpReport {
        qp_train: qp_set(train),
        qp_eval: qp_set(test),
        metrics: evaluate(&model, test, opts)?,
        model,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub features: FeatureSet,
    pub pearson: f64,
    pub mae: f64,
    pub mre: f64,
    /// MSE of the bias-free fit on the full data set.
    pub in_sample_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn row(&self, features: FeatureSet) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.features == features)
    }
}

/// Cross-validates the bias-free sub-block model on each of the 15
/// non-empty feature subsets.
pub fn ablate(records: &[DatasetRecord], opts: CvOptions) -> Result<AblationTable> {
    let mut rows = Vec::with_capacity(15);
    for features in FeatureSet::nonempty_subsets() {
        let spec = ModelSpec::subblock(features, false);
        let cv = kfold_cv(records, &spec, opts)?;
        let (_, full) = spec.fit(records)?;
        rows.push(AblationRow {
            features,
            pearson: cv.averaged.pearson,
            mae: cv.averaged.mae,
            mre: cv.averaged.mre,
            in_sample_mse: full.final_mse,
        });
    }
    Ok(AblationTable { rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub actual: f64,
    pub estimated: f64,
    pub pixels: usize,
}

/// Measured vs estimated rate per record, with block area for coloring.
pub fn scatter_dump(records: &[DatasetRecord], model: &RateModel) -> Vec<ScatterPoint> {
    records
        .iter()
        .map(|r| ScatterPoint {
            actual: r.rate_bits(),
            estimated: model.predict(&r.block),
            pixels: r.block.pixel_count(),
        })
        .collect()
}

/// Fits `spec` on `records` and packages the result as a model file.
pub fn train_model_file(records: &[DatasetRecord], spec: &ModelSpec) -> Result<ModelFile> {
    let (model, report) = spec.fit(records)?;
    ModelFile::new(
        &model,
        TrainingInfo {
            qp_train: qp_set(records),
            n_samples: records.len(),
            final_mse: report.final_mse,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::block::CoeffBlock;
    use crate::models::{ModelKind, SubBlockLinearParams};

    fn records(n: usize) -> Vec<DatasetRecord> {
        (0..n)
            .map(|i| {
                let mut c = vec![0; 16];
                c[0] = (i % 7) as i32;
                c[3] = (i % 3) as i32;
                let b = CoeffBlock::new(4, 4, c, 22, format!("img{}/{}", i % 9, i)).unwrap();
                DatasetRecord::new(b, 1.0 + i as f64).unwrap()
            })
            .collect()
    }

    #[test]
    fn balanced_fold_sizes() {
        let folds = fold_assignment(&records(103), 5, 1, false).unwrap();
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![21, 21, 21, 20, 20]);
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..103).collect::<Vec<_>>());
    }

    #[test]
    fn grouped_folds_keep_images_together() {
        let recs = records(90);
        let folds = fold_assignment(&recs, 5, 2, true).unwrap();
        for fold in &folds {
            for &i in fold {
                let img = image_key(recs[i].block.source_id());
                for (g, other) in folds.iter().enumerate() {
                    if !std::ptr::eq(other, fold) {
                        assert!(
                            other.iter().all(|&j| image_key(recs[j].block.source_id()) != img),
                            "image {img} split across fold {g}"
                        );
                    }
                }
            }
        }
        assert_eq!(folds.iter().map(Vec::len).sum::<usize>(), 90);
    }

    #[test]
    fn too_few_records() {
        assert!(matches!(
            fold_assignment(&records(4), 5, 0, false),
            Err(Error::NotEnoughData { needed: 5, got: 4 })
        ));
    }

    #[test]
    fn cv_is_deterministic() {
        let recs = records(60);
        let spec = ModelSpec::new(ModelKind::SubBlock);
        let opts = CvOptions {
            seed: 11,
            ..Default::default()
        };
        assert_eq!(kfold_cv(&recs, &spec, opts).unwrap(), kfold_cv(&recs, &spec, opts).unwrap());
    }

    #[test]
    fn timing_is_opt_in() {
        let recs = records(20);
        let m = RateModel::SubBlock(SubBlockLinearParams::new(1.0, 1.0, 0.0, 0.0, 1.0));
        assert!(evaluate(&m, &recs, EvalOptions::default()).unwrap().wall_time_per_block.is_none());
        let timed = EvalOptions {
            measure_time: true,
            ..Default::default()
        };
        assert!(evaluate(&m, &recs, timed).unwrap().wall_time_per_block.is_some());
    }

    #[test]
    fn scatter_rows() {
        let recs = records(7);
        let m = RateModel::SubBlock(SubBlockLinearParams::new(0.0, 0.0, 0.0, 0.0, 2.0));
        let pts = scatter_dump(&recs, &m);
        assert_eq!(pts.len(), 7);
        assert!(pts.iter().all(|p| p.pixels == 16 && p.estimated == 2.0));
    }

    #[test]
    fn cross_qp_same_sets_is_in_sample() {
        let recs = records(30);
        let spec = ModelSpec::new(ModelKind::Rho);
        let rep = cross_qp_eval(&recs, &recs, &spec, EvalOptions::default()).unwrap();
        let (model, _) = spec.fit(&recs).unwrap();
        assert_eq!(rep.metrics, evaluate(&model, &recs, EvalOptions::default()).unwrap());
        assert_eq!(rep.qp_train, vec![22]);
        assert!(cross_qp_eval(&[], &recs, &spec, EvalOptions::default()).is_err());
    }
}
