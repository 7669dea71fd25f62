//! Cross-validation, greedy model selection and the C grid search.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{auc_from_scores, score, train_svm, EvalReport, Label, LabeledSet};
use crate::error::{Error, Result};
use crate::residuals::ModelId;

/// Cross-validation repetitions used throughout.
pub const DEFAULT_REPS: usize = 18;

/// Soft-margin grid searched when no C is given.
pub const C_GRID: [f64; 4] = [0.01, 0.1, 1.0, 10.0];

/// Ranking criterion for model selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    Score,
    Auc,
}

impl Criterion {
    pub fn parse(s: &str) -> Result<Criterion> {
        match s.trim().to_ascii_lowercase().as_str() {
            "score" => Ok(Criterion::Score),
            "auc" => Ok(Criterion::Auc),
            other => Err(Error::InvalidConfig(format!("unknown criterion {other:?}"))),
        }
    }

    fn of(&self, report: &EvalReport) -> f64 {
        match self {
            Criterion::Score => report.score,
            Criterion::Auc => report.auc,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Repeated stratified 5/6 - 1/6 cross-validation of the merged selection.
///
/// Each repetition draws its own random split, trains on the 5/6 part and
/// evaluates hit rates and AUC on the held-out 1/6; results are averaged.
/// Deterministic for a given seed.
pub fn cross_validate(
    data: &LabeledSet,
    selection: &[ModelId],
    c: f64,
    reps: usize,
    seed: u64,
) -> Result<EvalReport> {
    let projected = if data.items.first().map(|it| it.features.models()) == Some(selection) {
        data.clone()
    } else {
        data.project(selection)?
    };
    cross_validate_prepared(&projected, c, reps, seed)
}

/// [`cross_validate`] on a set that is already restricted to the selection.
pub(crate) fn cross_validate_prepared(
    data: &LabeledSet,
    c: f64,
    reps: usize,
    seed: u64,
) -> Result<EvalReport> {
    if reps == 0 {
        return Err(Error::InvalidConfig("need at least one repetition".into()));
    }
    let pristine: Vec<usize> = (0..data.len())
        .filter(|&i| data.items[i].label == Label::Pristine)
        .collect();
    let fake: Vec<usize> =
        (0..data.len()).filter(|&i| data.items[i].label == Label::Fake).collect();
    for (name, class) in [("pristine", &pristine), ("fake", &fake)] {
        if class.len() < 6 {
            return Err(Error::ClassTooSmall(name.into(), class.len(), 6));
        }
    }

    let folds: Vec<(f64, f64, f64)> = (0..reps)
        .into_par_iter()
        .map(|rep| -> Result<(f64, f64, f64)> {
            let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(rep as u64)));
            let mut train_idx = Vec::new();
            let mut test_idx = Vec::new();
            for class in [&pristine, &fake] {
                let mut idx = class.clone();
                idx.shuffle(&mut rng);
                let test_n = idx.len() / 6;
                test_idx.extend_from_slice(&idx[..test_n]);
                train_idx.extend_from_slice(&idx[test_n..]);
            }
            let train =
                LabeledSet::new(train_idx.iter().map(|&i| data.items[i].clone()).collect());
            let model = train_svm(&train, c)?;

            let mut tp = 0usize;
            let mut tn = 0usize;
            let mut n_fake = 0usize;
            let mut n_pristine = 0usize;
            let mut values = Vec::with_capacity(test_idx.len());
            let mut labels = Vec::with_capacity(test_idx.len());
            for &i in &test_idx {
                let it = &data.items[i];
                let f = model.decision_value(&it.features)?;
                values.push(f);
                labels.push(it.label);
                match it.label {
                    Label::Fake => {
                        n_fake += 1;
                        if f > 0.0 {
                            tp += 1;
                        }
                    }
                    Label::Pristine => {
                        n_pristine += 1;
                        if f <= 0.0 {
                            tn += 1;
                        }
                    }
                }
            }
            let (auc, _) = auc_from_scores(&values, &labels)?;
            Ok((tp as f64 / n_fake as f64, tn as f64 / n_pristine as f64, auc))
        })
        .collect::<Result<Vec<_>>>()?;

    let n = folds.len() as f64;
    let tpr = folds.iter().map(|f| f.0).sum::<f64>() / n;
    let tnr = folds.iter().map(|f| f.1).sum::<f64>() / n;
    let auc = folds.iter().map(|f| f.2).sum::<f64>() / n;
    Ok(EvalReport { score: score(tpr, tnr), auc, tpr, tnr, repetitions: reps })
}

/// One row of the selection table: a model's individual performance and the
/// performance of the merge up to and including it.
#[derive(Debug, Clone)]
pub struct SelectionRow {
    pub model: ModelId,
    pub single: EvalReport,
    pub merged: EvalReport,
}

/// Ranked single-model results with the greedy merge trajectory.
#[derive(Debug, Clone)]
pub struct SelectionReport {
    pub criterion: Criterion,
    pub rows: Vec<SelectionRow>,
    /// All candidates ranked by the criterion (rows cover the first k).
    pub ranked: Vec<(ModelId, EvalReport)>,
}

impl SelectionReport {
    /// The selected merge: the top-k models in rank order.
    pub fn selected(&self) -> Vec<ModelId> {
        self.rows.iter().map(|r| r.model).collect()
    }
}

/// Ranks each candidate model by cross-validated score or AUC, then greedily
/// merges the top `k` in rank order, reporting the merged score after each
/// addition.
pub fn select_models(
    data: &LabeledSet,
    candidates: &[ModelId],
    k: usize,
    criterion: Criterion,
    c: f64,
    reps: usize,
    seed: u64,
) -> Result<SelectionReport> {
    if candidates.is_empty() || k == 0 {
        return Err(Error::EmptySelection);
    }
    if k > candidates.len() {
        return Err(Error::InvalidConfig(format!(
            "k = {k} exceeds the {} candidate models",
            candidates.len()
        )));
    }
    let mut ranked: Vec<(ModelId, EvalReport)> = candidates
        .iter()
        .map(|&id| Ok((id, cross_validate(data, &[id], c, reps, seed)?)))
        .collect::<Result<Vec<_>>>()?;
    // Stable sort keeps bank order among ties.
    ranked.sort_by(|a, b| {
        criterion.of(&b.1).partial_cmp(&criterion.of(&a.1)).expect("finite criterion")
    });

    let mut rows = Vec::with_capacity(k);
    let mut selection = Vec::with_capacity(k);
    for (id, single) in ranked.iter().take(k) {
        selection.push(*id);
        let merged = cross_validate(data, &selection, c, reps, seed)?;
        rows.push(SelectionRow { model: *id, single: *single, merged });
    }
    Ok(SelectionReport { criterion, rows, ranked })
}

/// Picks the grid C with the best cross-validated score (ties go to the
/// smaller C).
pub fn grid_search_c(
    data: &LabeledSet,
    selection: &[ModelId],
    reps: usize,
    seed: u64,
) -> Result<f64> {
    let mut best = (f64::NEG_INFINITY, C_GRID[0]);
    for &c in &C_GRID {
        let report = cross_validate(data, selection, c, reps, seed)?;
        if report.score > best.0 {
            best = (report.score, c);
        }
    }
    Ok(best.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::LabeledItem;
    use crate::cooccurrence::FeatureVector;
    use rand::Rng;

    /// Two-model synthetic set: the N1 block separates the classes, the L1
    /// block is pure noise.
    fn two_block_set(n_per_class: usize, seed: u64) -> LabeledSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut items = Vec::new();
        for i in 0..2 * n_per_class {
            let label = if i % 2 == 0 { Label::Fake } else { Label::Pristine };
            let mut values = vec![0.0; 169 + 325];
            for v in values.iter_mut().take(169) {
                *v = rng.gen_range(0.0..1.0);
            }
            let shift = if label == Label::Fake { 0.8 } else { -0.8 };
            for v in values.iter_mut().skip(169) {
                *v = rng.gen_range(-0.2..0.2) + shift;
            }
            items.push(LabeledItem {
                image_id: format!("img{i}"),
                label,
                features: FeatureVector::new(vec![ModelId::L1, ModelId::N1], values),
            });
        }
        LabeledSet::new(items)
    }

    #[test]
    fn deterministic_given_seed() {
        let data = two_block_set(12, 4);
        let a = cross_validate(&data, &[ModelId::N1], 1.0, 6, 99).unwrap();
        let b = cross_validate(&data, &[ModelId::N1], 1.0, 6, 99).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.repetitions, 6);
        assert_eq!(a.score, score(a.tpr, a.tnr));
    }

    #[test]
    fn separable_set_scores_one() {
        let data = two_block_set(12, 8);
        let report = cross_validate(&data, &[ModelId::N1], 1.0, DEFAULT_REPS, 1).unwrap();
        assert_eq!(report.repetitions, 18);
        assert_eq!(report.score, 1.0);
        assert_eq!(report.auc, 1.0);
    }

    #[test]
    fn class_too_small_rejected() {
        let mut data = two_block_set(12, 8);
        data.items.retain(|it| it.label == Label::Fake || it.image_id == "img1");
        let err = cross_validate(&data, &[ModelId::N1], 1.0, 4, 1).unwrap_err();
        assert!(matches!(err, Error::ClassTooSmall(_, 1, 6)));
    }

    #[test]
    fn informative_model_ranked_first() {
        let data = two_block_set(18, 21);
        for criterion in [Criterion::Score, Criterion::Auc] {
            let report = select_models(
                &data,
                &[ModelId::L1, ModelId::N1],
                2,
                criterion,
                1.0,
                8,
                5,
            )
            .unwrap();
            assert_eq!(report.rows[0].model, ModelId::N1);
            assert_eq!(report.selected(), vec![ModelId::N1, ModelId::L1]);
        }
    }

    #[test]
    fn single_candidate_selected() {
        let data = two_block_set(10, 2);
        let report =
            select_models(&data, &[ModelId::N1], 1, Criterion::Auc, 1.0, 4, 3).unwrap();
        assert_eq!(report.selected(), vec![ModelId::N1]);
        assert_eq!(report.rows.len(), 1);
    }
}
