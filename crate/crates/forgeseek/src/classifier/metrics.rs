//! Score and ROC/AUC computation.

use super::{Label, LabeledSet, SvmModel};
use crate::error::{Error, Result};

/// Mean of the per-class hit rates: `(Pr(F̂|F) + Pr(P̂|P)) / 2`.
pub fn score(tpr: f64, tnr: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&tpr) && (0.0..=1.0).contains(&tnr));
    (tpr + tnr) / 2.0
}

/// AUC and ROC curve from decision values, sweeping the bias over all
/// thresholds. Tied values are grouped, which gives them half credit and
/// makes the trapezoidal area equal the Mann-Whitney statistic.
pub fn auc_from_scores(values: &[f64], labels: &[Label]) -> Result<(f64, Vec<(f64, f64)>)> {
    assert_eq!(values.len(), labels.len());
    let pos = labels.iter().filter(|&&l| l == Label::Fake).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }

    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).expect("finite decision values"));

    let mut curve = vec![(0.0, 0.0)];
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut auc = 0.0;
    let mut i = 0;
    while i < order.len() {
        // Advance over the whole tie group before emitting a point.
        let v = values[order[i]];
        let (mut dtp, mut dfp) = (0usize, 0usize);
        while i < order.len() && values[order[i]] == v {
            match labels[order[i]] {
                Label::Fake => dtp += 1,
                Label::Pristine => dfp += 1,
            }
            i += 1;
        }
        let prev = (fp as f64 / neg as f64, tp as f64 / pos as f64);
        tp += dtp;
        fp += dfp;
        let next = (fp as f64 / neg as f64, tp as f64 / pos as f64);
        auc += (next.0 - prev.0) * (prev.1 + next.1) / 2.0;
        curve.push(next);
    }
    Ok((auc, curve))
}

/// Sweeps the model's bias over the dataset's decision values and returns
/// the AUC with the ROC curve as `(fpr, tpr)` points.
pub fn roc_auc(model: &SvmModel, data: &LabeledSet) -> Result<(f64, Vec<(f64, f64)>)> {
    let mut values = Vec::with_capacity(data.len());
    let mut labels = Vec::with_capacity(data.len());
    for it in &data.items {
        values.push(model.decision_value(&it.features)?);
        labels.push(it.label);
    }
    auc_from_scores(&values, &labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Pairwise Mann-Whitney statistic with half-credit ties.
    fn mann_whitney(values: &[f64], labels: &[Label]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for (i, &li) in labels.iter().enumerate() {
            if li != Label::Fake {
                continue;
            }
            for (j, &lj) in labels.iter().enumerate() {
                if lj != Label::Pristine {
                    continue;
                }
                pairs += 1.0;
                if values[i] > values[j] {
                    wins += 1.0;
                } else if values[i] == values[j] {
                    wins += 0.5;
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn score_identities() {
        assert_eq!(score(1.0, 1.0), 1.0);
        assert_eq!(score(0.0, 1.0), 0.5);
        assert!((score(0.9274, 0.9787) - 0.95305).abs() < 1e-12);
        for t in [0.0, 0.25, 0.5, 0.8, 1.0] {
            assert_eq!(score(t, t), t);
        }
    }

    #[test]
    fn perfect_separation_auc_one() {
        let values = vec![2.0, 1.5, 1.0, -1.0, -2.0];
        let labels = vec![Label::Fake, Label::Fake, Label::Fake, Label::Pristine, Label::Pristine];
        let (auc, curve) = auc_from_scores(&values, &labels).unwrap();
        assert_eq!(auc, 1.0);
        assert_eq!(curve.first(), Some(&(0.0, 0.0)));
        assert_eq!(curve.last(), Some(&(1.0, 1.0)));
    }

    #[test]
    fn all_tied_auc_half() {
        let values = vec![0.3; 6];
        let labels = vec![
            Label::Fake,
            Label::Fake,
            Label::Pristine,
            Label::Pristine,
            Label::Fake,
            Label::Pristine,
        ];
        let (auc, _) = auc_from_scores(&values, &labels).unwrap();
        assert_eq!(auc, 0.5);
    }

    #[test]
    fn single_class_errors() {
        let err = auc_from_scores(&[1.0, 2.0], &[Label::Fake, Label::Fake]).unwrap_err();
        assert!(matches!(err, Error::SingleClass));
    }

    #[test]
    fn trapezoid_equals_mann_whitney() {
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        for _ in 0..100 {
            let n = rng.gen_range(4..40);
            let mut values = Vec::new();
            let mut labels = Vec::new();
            let mut counts = [0usize; 2];
            for _ in 0..n {
                // Quantized values so ties actually occur.
                values.push(f64::from(rng.gen_range(-4..=4)) / 2.0);
                let l = if rng.gen_bool(0.5) { Label::Fake } else { Label::Pristine };
                counts[usize::from(l == Label::Fake)] += 1;
                labels.push(l);
            }
            if counts[0] == 0 || counts[1] == 0 {
                continue;
            }
            let (auc, _) = auc_from_scores(&values, &labels).unwrap();
            let mw = mann_whitney(&values, &labels);
            assert!((auc - mw).abs() < 1e-12, "auc {auc} vs mw {mw}");
        }
    }

    #[test]
    fn auc_invariant_under_monotone_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let values: Vec<f64> = (0..30).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let labels: Vec<Label> = (0..30)
            .map(|_| if rng.gen_bool(0.4) { Label::Fake } else { Label::Pristine })
            .collect();
        let (a1, _) = auc_from_scores(&values, &labels).unwrap();
        let transformed: Vec<f64> = values.iter().map(|v| (v * 0.7).exp() + 3.0).collect();
        let (a2, _) = auc_from_scores(&transformed, &labels).unwrap();
        assert!((a1 - a2).abs() < 1e-12);
    }
}
