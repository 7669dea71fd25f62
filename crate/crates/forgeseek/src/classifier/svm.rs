//! Linear soft-margin SVM trained by dual coordinate descent.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Label, LabeledSet};
use crate::cooccurrence::FeatureVector;
use crate::error::{Error, Result};
use crate::residuals::ModelId;

const DUAL_EPS: f64 = 1e-6;
const MAX_PASSES: usize = 4000;

/// Trained linear decision function with its feature scaling.
///
/// Features are standardized per dimension before the dot product; a
/// dimension whose training spread was zero is neutralized (spread stored
/// as 1, weight 0).
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    selection: Vec<ModelId>,
    means: Vec<f64>,
    spreads: Vec<f64>,
    weights: Vec<f64>,
    bias: f64,
    c: f64,
}

impl SvmModel {
    pub fn selection(&self) -> &[ModelId] {
        &self.selection
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// Signed distance-like decision value; positive means fake.
    pub fn decision_value(&self, features: &FeatureVector) -> Result<f64> {
        let values = if features.models() == self.selection.as_slice() {
            std::borrow::Cow::Borrowed(features.values())
        } else {
            std::borrow::Cow::Owned(features.project(&self.selection)?.values().to_vec())
        };
        if values.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                got: values.len(),
            });
        }
        let mut acc = self.bias;
        for ((&v, &w), (&m, &s)) in values
            .iter()
            .zip(&self.weights)
            .zip(self.means.iter().zip(&self.spreads))
        {
            acc += w * (v - m) / s;
        }
        Ok(acc)
    }

    pub fn predict(&self, features: &FeatureVector) -> Result<Label> {
        Ok(if self.decision_value(features)? > 0.0 { Label::Fake } else { Label::Pristine })
    }

    /// Serializes to the versioned JSON model document.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let doc = ModelDoc {
            version: 1,
            selection: self.selection.iter().map(|m| m.name().to_string()).collect(),
            scaling: ScalingDoc { mean: self.means.clone(), spread: self.spreads.clone() },
            weights: self.weights.clone(),
            bias: self.bias,
            c: self.c,
        };
        let text = serde_json::to_string_pretty(&doc).map_err(|e| Error::ModelFile(e.to_string()))?;
        std::fs::write(path.as_ref(), text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<SvmModel> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::FileNotFound(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path)?;
        let doc: ModelDoc =
            serde_json::from_str(&text).map_err(|e| Error::ModelFile(e.to_string()))?;
        if doc.version != 1 {
            return Err(Error::ModelFile(format!("unsupported model version {}", doc.version)));
        }
        let selection = doc
            .selection
            .iter()
            .map(|s| ModelId::parse(s))
            .collect::<Result<Vec<_>>>()?;
        let dim = doc.weights.len();
        if doc.scaling.mean.len() != dim || doc.scaling.spread.len() != dim {
            return Err(Error::ModelFile("scaling arrays do not match weights".into()));
        }
        if doc.scaling.spread.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::ModelFile("spread entries must be positive".into()));
        }
        Ok(SvmModel {
            selection,
            means: doc.scaling.mean,
            spreads: doc.scaling.spread,
            weights: doc.weights,
            bias: doc.bias,
            c: doc.c,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct ScalingDoc {
    mean: Vec<f64>,
    spread: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    version: u32,
    selection: Vec<String>,
    scaling: ScalingDoc,
    weights: Vec<f64>,
    bias: f64,
    #[serde(rename = "C")]
    c: f64,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// L2-regularized L1-loss SVC in the dual, with shrinking. `rows` carry an
/// appended constant bias feature. Returns the primal weights.
fn solve_dual_cd(rows: &[Vec<f64>], y: &[f64], c: f64) -> Vec<f64> {
    let l = rows.len();
    let dim = rows[0].len();
    let mut w = vec![0.0; dim];
    let mut alpha = vec![0.0; l];
    let qd: Vec<f64> = rows.iter().map(|r| dot(r, r)).collect();
    let mut index: Vec<usize> = (0..l).collect();
    let mut active = l;
    let mut pgmax_old = f64::INFINITY;
    let mut pgmin_old = f64::NEG_INFINITY;
    // Fixed seed: training is deterministic for a given dataset.
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);

    for _ in 0..MAX_PASSES {
        let mut pgmax = f64::NEG_INFINITY;
        let mut pgmin = f64::INFINITY;
        for i in 0..active {
            let j = i + rng.gen_range(0..active - i);
            index.swap(i, j);
        }
        let mut s = 0;
        while s < active {
            let i = index[s];
            let g = y[i] * dot(&w, &rows[i]) - 1.0;
            let mut pg = 0.0;
            if alpha[i] == 0.0 {
                if g > pgmax_old {
                    active -= 1;
                    index.swap(s, active);
                    continue;
                }
                if g < 0.0 {
                    pg = g;
                }
            } else if alpha[i] == c {
                if g < pgmin_old {
                    active -= 1;
                    index.swap(s, active);
                    continue;
                }
                if g > 0.0 {
                    pg = g;
                }
            } else {
                pg = g;
            }
            pgmax = pgmax.max(pg);
            pgmin = pgmin.min(pg);
            if pg.abs() > 1e-12 && qd[i] > 0.0 {
                let old = alpha[i];
                alpha[i] = (old - g / qd[i]).clamp(0.0, c);
                let d = (alpha[i] - old) * y[i];
                for (wj, xj) in w.iter_mut().zip(&rows[i]) {
                    *wj += d * xj;
                }
            }
            s += 1;
        }
        if pgmax - pgmin <= DUAL_EPS && pgmax.abs() <= DUAL_EPS && pgmin.abs() <= DUAL_EPS {
            if active == l {
                break;
            }
            active = l;
            pgmax_old = f64::INFINITY;
            pgmin_old = f64::NEG_INFINITY;
            continue;
        }
        pgmax_old = if pgmax <= 0.0 { f64::INFINITY } else { pgmax };
        pgmin_old = if pgmin >= 0.0 { f64::NEG_INFINITY } else { pgmin };
    }
    w
}

/// Trains a linear soft-margin SVM on z-scored features.
///
/// The decision value is `w . standardize(x) + b`; an image is declared
/// fake when it is positive.
pub fn train_svm(data: &LabeledSet, c: f64) -> Result<SvmModel> {
    if c <= 0.0 {
        return Err(Error::InvalidConfig(format!("C must be positive, got {c}")));
    }
    let dim = data.check_trainable()?;
    let n = data.len() as f64;
    let selection = data.items[0].features.models().to_vec();

    let mut means = vec![0.0; dim];
    for it in &data.items {
        for (m, &v) in means.iter_mut().zip(it.features.values()) {
            *m += v;
        }
    }
    for m in means.iter_mut() {
        *m /= n;
    }
    let mut vars = vec![0.0; dim];
    for it in &data.items {
        for ((var, &m), &v) in vars.iter_mut().zip(&means).zip(it.features.values()) {
            *var += (v - m) * (v - m);
        }
    }
    let spreads: Vec<f64> = vars.iter().map(|&v| (v / n).sqrt()).collect();
    let active: Vec<bool> = spreads.iter().map(|&s| s > 1e-300).collect();

    // Standardized rows with an appended constant bias feature.
    let rows: Vec<Vec<f64>> = data
        .items
        .iter()
        .map(|it| {
            let mut row: Vec<f64> = it
                .features
                .values()
                .iter()
                .enumerate()
                .map(|(j, &v)| if active[j] { (v - means[j]) / spreads[j] } else { 0.0 })
                .collect();
            row.push(1.0);
            row
        })
        .collect();
    let y: Vec<f64> = data.items.iter().map(|it| it.label.sign()).collect();

    let mut w = solve_dual_cd(&rows, &y, c);
    let bias = w.pop().expect("bias slot");
    // Inactive dimensions keep weight 0 and a neutral spread of 1.
    let weights: Vec<f64> =
        w.into_iter().zip(&active).map(|(wj, &a)| if a { wj } else { 0.0 }).collect();
    let spreads = spreads
        .into_iter()
        .zip(&active)
        .map(|(s, &a)| if a { s } else { 1.0 })
        .collect();

    Ok(SvmModel { selection, means, spreads, weights, bias, c })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::LabeledItem;

    fn toy_point(x0: f64, x1: f64) -> FeatureVector {
        FeatureVector::new(vec![], vec![x0, x1])
    }

    fn toy_set(scale: f64, jitter: f64, seed: u64) -> LabeledSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut items = Vec::new();
        for i in 0..20 {
            let jx = rng.gen_range(-jitter..jitter);
            let jy = rng.gen_range(-jitter..jitter);
            items.push(LabeledItem {
                image_id: format!("p{i}"),
                label: Label::Fake,
                features: toy_point((2.0 + jx) * scale, jy * scale),
            });
            let jx = rng.gen_range(-jitter..jitter);
            let jy = rng.gen_range(-jitter..jitter);
            items.push(LabeledItem {
                image_id: format!("n{i}"),
                label: Label::Pristine,
                features: toy_point((-2.0 + jx) * scale, jy * scale),
            });
        }
        LabeledSet::new(items)
    }

    #[test]
    fn separable_toy_set() {
        let data = toy_set(1.0, 0.2, 3);
        let model = train_svm(&data, 1.0).unwrap();
        for it in &data.items {
            assert_eq!(model.predict(&it.features).unwrap(), it.label);
        }
        let w = model.weights();
        let cosine = w[0].abs() / (w[0] * w[0] + w[1] * w[1]).sqrt();
        assert!(cosine >= 0.99, "weight direction cosine {cosine}");
        assert!(w[0] > 0.0, "fake side must be positive along x");
    }

    #[test]
    fn contradictory_duplicates_do_not_crash() {
        let mut items = Vec::new();
        for i in 0..10 {
            items.push(LabeledItem {
                image_id: format!("a{i}"),
                label: Label::Fake,
                features: toy_point(1.0, 1.0),
            });
            items.push(LabeledItem {
                image_id: format!("b{i}"),
                label: Label::Pristine,
                features: toy_point(1.0, 1.0),
            });
        }
        let data = LabeledSet::new(items);
        let model = train_svm(&data, 1.0).unwrap();
        for it in &data.items {
            let f = model.decision_value(&it.features).unwrap();
            assert!(f.abs() < 1e-3, "decision value {f} not near zero");
        }
    }

    #[test]
    fn scaling_invariance_of_labels() {
        let data = toy_set(1.0, 0.3, 9);
        let scaled = toy_set(1000.0, 0.3, 9);
        let m1 = train_svm(&data, 1.0).unwrap();
        let m2 = train_svm(&scaled, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let x0 = rng.gen_range(-3.0..3.0);
            let x1 = rng.gen_range(-3.0..3.0);
            let l1 = m1.predict(&toy_point(x0, x1)).unwrap();
            let l2 = m2.predict(&toy_point(x0 * 1000.0, x1 * 1000.0)).unwrap();
            assert_eq!(l1, l2);
        }
    }

    #[test]
    fn single_class_rejected() {
        let items = (0..4)
            .map(|i| LabeledItem {
                image_id: format!("x{i}"),
                label: Label::Fake,
                features: toy_point(i as f64, 0.0),
            })
            .collect();
        assert!(matches!(train_svm(&LabeledSet::new(items), 1.0), Err(Error::SingleClass)));
    }

    #[test]
    fn model_file_round_trip_is_lossless() {
        let data = toy_set(1.0, 0.25, 5);
        let model = train_svm(&data, 0.1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        model.save(&path).unwrap();
        let back = SvmModel::load(&path).unwrap();
        assert_eq!(model, back);
        for (a, b) in model.weights().iter().zip(back.weights()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(model.bias().to_bits(), back.bias().to_bits());
    }
}
