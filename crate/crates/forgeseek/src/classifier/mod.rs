//! Linear-SVM training, the challenge score metric, bias-sweep ROC/AUC,
//! cross-validated model selection and feature-file I/O.

mod metrics;
mod svm;
mod validate;

pub use metrics::{auc_from_scores, roc_auc, score};
pub use svm::{train_svm, SvmModel};
pub use validate::{
    cross_validate, grid_search_c, select_models, Criterion, SelectionReport, SelectionRow,
    C_GRID, DEFAULT_REPS,
};

use std::path::Path;

use crate::cooccurrence::{feature_dim, FeatureVector};
use crate::error::{Error, Result};
use crate::residuals::{ModelId, ModelKind};

/// Ground-truth or predicted class of an image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Pristine,
    Fake,
}

impl Label {
    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Pristine => "pristine",
            Label::Fake => "fake",
        }
    }

    pub fn parse(s: &str) -> Result<Label> {
        match s.trim() {
            "pristine" => Ok(Label::Pristine),
            "fake" => Ok(Label::Fake),
            other => Err(Error::MalformedRecord {
                file: String::new(),
                detail: format!("unknown label {other:?}"),
            }),
        }
    }

    /// Class sign used by the SVM: fake is the positive class.
    pub fn sign(&self) -> f64 {
        match self {
            Label::Pristine => -1.0,
            Label::Fake => 1.0,
        }
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One labeled feature vector.
#[derive(Debug, Clone)]
pub struct LabeledItem {
    pub image_id: String,
    pub label: Label,
    pub features: FeatureVector,
}

/// A labeled dataset; the unit both training and evaluation operate on.
#[derive(Debug, Clone, Default)]
pub struct LabeledSet {
    pub items: Vec<LabeledItem>,
}

impl LabeledSet {
    pub fn new(items: Vec<LabeledItem>) -> Self {
        Self { items }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn count(&self, label: Label) -> usize {
        self.items.iter().filter(|it| it.label == label).count()
    }

    /// Restricts every item to the feature blocks named by `selection`.
    pub fn project(&self, selection: &[ModelId]) -> Result<LabeledSet> {
        let items = self
            .items
            .iter()
            .map(|it| {
                Ok(LabeledItem {
                    image_id: it.image_id.clone(),
                    label: it.label,
                    features: it.features.project(selection)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(LabeledSet { items })
    }

    pub(crate) fn check_trainable(&self) -> Result<usize> {
        if self.count(Label::Pristine) == 0 || self.count(Label::Fake) == 0 {
            return Err(Error::SingleClass);
        }
        let dim = self.items[0].features.dim();
        for it in &self.items {
            if it.features.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: it.features.dim() });
            }
        }
        Ok(dim)
    }
}

/// Averaged cross-validation outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    /// (tpr + tnr) / 2.
    pub score: f64,
    pub auc: f64,
    /// Pr(declared fake | fake).
    pub tpr: f64,
    /// Pr(declared pristine | pristine).
    pub tnr: f64,
    pub repetitions: usize,
}

/// Writes a labeled feature set as CSV with header `image_id,label,f0,...`.
///
/// Columns follow bank order of the extracted models, then orbit
/// representative order inside each block.
pub fn write_features_csv(path: impl AsRef<Path>, data: &LabeledSet) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    let dim = data.items.first().map_or(0, |it| it.features.dim());
    let mut header = Vec::with_capacity(dim + 2);
    header.push("image_id".to_string());
    header.push("label".to_string());
    header.extend((0..dim).map(|i| format!("f{i}")));
    w.write_record(&header)?;
    for it in &data.items {
        if it.features.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: it.features.dim() });
        }
        let mut rec = Vec::with_capacity(dim + 2);
        rec.push(it.image_id.clone());
        rec.push(it.label.as_str().to_string());
        rec.extend(it.features.values().iter().map(|v| format!("{v}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a feature CSV produced by [`write_features_csv`].
///
/// `models` names the blocks the columns hold, in order; the summed block
/// dimensions must match the column count.
pub fn read_features_csv(path: impl AsRef<Path>, models: &[ModelId]) -> Result<LabeledSet> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let expected: usize = models
        .iter()
        .map(|m| {
            feature_dim(match m {
                ModelId::L1 | ModelId::L2 | ModelId::L3 | ModelId::Lsq => ModelKind::Linear,
                _ => ModelKind::MinMax,
            })
        })
        .sum();
    let mut r = csv::Reader::from_path(path)?;
    let mut items = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != expected + 2 {
            return Err(Error::DimensionMismatch { expected: expected + 2, got: rec.len() });
        }
        let label = Label::parse(&rec[1]).map_err(|_| Error::MalformedRecord {
            file: path.display().to_string(),
            detail: format!("bad label {:?}", &rec[1]),
        })?;
        let values = (2..rec.len())
            .map(|i| {
                rec[i].parse::<f64>().map_err(|e| Error::MalformedRecord {
                    file: path.display().to_string(),
                    detail: format!("bad value {:?}: {e}", &rec[i]),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        items.push(LabeledItem {
            image_id: rec[0].to_string(),
            label,
            features: FeatureVector::new(models.to_vec(), values),
        });
    }
    Ok(LabeledSet { items })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::residuals::builtin_bank;

    #[test]
    fn feature_csv_round_trip() {
        let img = crate::synth::smooth_texture(40, 40, 77);
        let feats = crate::cooccurrence::extract_features(&img, &builtin_bank()).unwrap();
        let merged = crate::cooccurrence::merge_features(&feats, &ModelId::ALL).unwrap();
        let set = LabeledSet::new(vec![
            LabeledItem { image_id: "a".into(), label: Label::Pristine, features: merged.clone() },
            LabeledItem { image_id: "b".into(), label: Label::Fake, features: merged },
        ]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("features.csv");
        write_features_csv(&path, &set).unwrap();
        let back = read_features_csv(&path, &ModelId::ALL).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back.items[0].label, Label::Pristine);
        assert_eq!(back.items[1].label, Label::Fake);
        for (a, b) in set.items.iter().zip(&back.items) {
            assert_eq!(a.features.values(), b.features.values());
        }
    }
}
