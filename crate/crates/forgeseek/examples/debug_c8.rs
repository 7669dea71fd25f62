use std::time::Instant;

use forgeseek::classifier::{train_svm, Label, LabeledItem, LabeledSet};
use forgeseek::cooccurrence::{extract_features, merge_features};
use forgeseek::copymove::{detect_copymove, CopyMoveConfig, PatchMatchConfig};
use forgeseek::fusion::fuse;
use forgeseek::residuals::{bank_model, ModelId};
use forgeseek::synth::{generate_items, CorpusSpec};
use rayon::prelude::*;

fn main() {
    let t0 = Instant::now();
    let train_spec = CorpusSpec {
        n_pristine: 60,
        n_copymove: 0,
        n_splice: 60,
        seed: 91,
        ..Default::default()
    };
    let eval_spec = CorpusSpec {
        n_pristine: 24,
        n_copymove: 12,
        n_splice: 12,
        seed: 92,
        ..Default::default()
    };
    let selection = [ModelId::L1, ModelId::L2, ModelId::L3, ModelId::N1];
    let bank: Vec<_> = selection.iter().map(|&id| bank_model(id)).collect();

    let featurize = |items: &[forgeseek::synth::GeneratedItem]| -> LabeledSet {
        LabeledSet::new(
            items
                .par_iter()
                .map(|it| {
                    let feats = extract_features(&it.image, &bank).unwrap();
                    let merged = merge_features(&feats, &selection).unwrap();
                    LabeledItem { image_id: it.id.clone(), label: it.class, features: merged }
                })
                .collect(),
        )
    };

    let train_items = generate_items(&train_spec).unwrap();
    let model = train_svm(&featurize(&train_items), 1.0).unwrap();

    let eval_items = generate_items(&eval_spec).unwrap();
    let eval_set = featurize(&eval_items);
    let pm = PatchMatchConfig::default();
    let cm = CopyMoveConfig::default();

    let mut confusion = vec![];
    for (it, li) in eval_items.iter().zip(&eval_set.items) {
        let margin = model.decision_value(&li.features).unwrap();
        let splice = if margin > 0.0 { Label::Fake } else { Label::Pristine };
        let cm_res = detect_copymove(&it.image, &pm, &cm).unwrap();
        let copy = if cm_res.is_fake { Label::Fake } else { Label::Pristine };
        confusion.push((it.kind.clone(), it.class, splice, margin, copy, fuse(splice, copy)));
    }

    let rate = |picks: &dyn Fn(&(String, Label, Label, f64, Label, Label)) -> (bool, bool)| {
        let mut tp = 0;
        let mut n_fake = 0;
        let mut tn = 0;
        let mut n_pris = 0;
        for row in &confusion {
            let (truth_fake, pred_fake) = picks(row);
            if truth_fake {
                n_fake += 1;
                tp += usize::from(pred_fake);
            } else {
                n_pris += 1;
                tn += usize::from(!pred_fake);
            }
        }
        (tp as f64 / n_fake as f64 + tn as f64 / n_pris as f64) / 2.0
    };

    for row in &confusion {
        println!(
            "{:<9} truth={:<8} splice={:<8} margin={:+.3} copymove={:<8} fused={}",
            row.0, row.1, row.2, row.3, row.4, row.5
        );
    }
    let splice_score = rate(&|r| (r.1 == Label::Fake, r.2 == Label::Fake));
    let fused_score = rate(&|r| (r.1 == Label::Fake, r.5 == Label::Fake));
    println!("splice-only score {splice_score:.4}  fused score {fused_score:.4}");
    println!("total {:?}", t0.elapsed());
}
