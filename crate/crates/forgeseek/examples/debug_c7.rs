use std::time::Instant;

use forgeseek::classifier::{
    cross_validate, select_models, Criterion, LabeledItem, LabeledSet,
};
use forgeseek::cooccurrence::{extract_features, merge_features};
use forgeseek::residuals::{builtin_bank, ModelId};
use forgeseek::synth::{generate_items, CorpusSpec};
use rayon::prelude::*;

fn main() {
    let t0 = Instant::now();
    let spec = CorpusSpec {
        n_pristine: 60,
        n_copymove: 0,
        n_splice: 60,
        seed: 77,
        ..Default::default()
    };
    let items = generate_items(&spec).unwrap();
    println!("corpus {:?}", t0.elapsed());

    let bank = builtin_bank();
    let data = LabeledSet::new(
        items
            .par_iter()
            .map(|it| {
                let feats = extract_features(&it.image, &bank).unwrap();
                let merged = merge_features(&feats, &ModelId::ALL).unwrap();
                LabeledItem { image_id: it.id.clone(), label: it.class, features: merged }
            })
            .collect(),
    );
    println!("features {:?}", t0.elapsed());

    let report = select_models(&data, &ModelId::ALL, 4, Criterion::Auc, 1.0, 18, 5).unwrap();
    println!("ranked:");
    for (id, r) in &report.ranked {
        println!("  {id}: score {:.4} auc {:.4}", r.score, r.auc);
    }
    println!("merge trajectory:");
    for row in &report.rows {
        println!(
            "  +{}: single score {:.4} auc {:.4} -> merged score {:.4} auc {:.4}",
            row.model, row.single.score, row.single.auc, row.merged.score, row.merged.auc
        );
    }
    let selected = report.selected();
    let final_report = cross_validate(&data, &selected, 1.0, 18, 5).unwrap();
    let best_single = report.rows[0].single.score;
    println!(
        "final: score {:.4} auc {:.4} (best single {:.4})",
        final_report.score, final_report.auc, best_single
    );
    println!("total {:?}", t0.elapsed());
}
