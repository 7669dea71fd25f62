use std::time::Instant;

use forgeseek::classifier::Label;
use forgeseek::copymove::{detect_copymove, CopyMoveConfig, PatchMatchConfig};
use forgeseek::synth::{generate_items, CorpusSpec};
use rayon::prelude::*;

fn main() {
    let t0 = Instant::now();
    // Criterion-6 style corpus: translated + rotated copies, pristine rest.
    let translated = CorpusSpec {
        n_pristine: 40,
        n_copymove: 20,
        n_splice: 0,
        rotation_prob: 0.0,
        seed: 41,
        ..Default::default()
    };
    let rotated = CorpusSpec {
        n_pristine: 0,
        n_copymove: 10,
        n_splice: 0,
        rotation_prob: 1.0,
        seed: 42,
        ..Default::default()
    };
    let mut items = generate_items(&translated).unwrap();
    items.extend(generate_items(&rotated).unwrap());
    println!("generated {} items in {:?}", items.len(), t0.elapsed());

    let pm = PatchMatchConfig::default();
    let cm = CopyMoveConfig::default();
    let results: Vec<(String, String, bool, f64, Option<f64>, String)> = items
        .par_iter()
        .map(|it| {
            let r = detect_copymove(&it.image, &pm, &cm).unwrap();
            let jaccard = match (&it.mask, r.is_fake) {
                (Some(truth), true) => r.map.jaccard(truth),
                _ => f64::NAN,
            };
            (it.id.clone(), it.kind.clone(), r.is_fake, jaccard, r.rotation_found, it.params.clone())
        })
        .collect();

    let mut tp_trans = 0;
    let mut n_trans = 0;
    let mut tp_rot = 0;
    let mut n_rot = 0;
    let mut fp = 0;
    let mut n_pristine = 0;
    let mut jaccards = Vec::new();
    for (id, kind, fake, j, rot, params) in &results {
        if kind == "texture" {
            n_pristine += 1;
            if *fake {
                fp += 1;
                println!("FALSE ALARM on {id} (rot {rot:?})");
            }
        } else {
            let rotated = params.contains("angle=15") || params.contains("angle=30") || params.contains("angle=45");
            if rotated {
                n_rot += 1;
                tp_rot += usize::from(*fake);
            } else {
                n_trans += 1;
                tp_trans += usize::from(*fake);
            }
            if *fake {
                jaccards.push((*id).clone().to_string());
                println!("{id} kind={kind} fake={fake} jaccard={j:.3} rot={rot:?} [{params}]");
            } else {
                println!("MISS {id} [{params}]");
            }
        }
    }
    let min_j: f64 = results
        .iter()
        .filter(|r| !r.3.is_nan())
        .map(|r| r.3)
        .fold(f64::INFINITY, f64::min);
    println!("translated: {tp_trans}/{n_trans}  rotated: {tp_rot}/{n_rot}  false alarms: {fp}/{n_pristine}");
    println!("min jaccard on detected: {min_j:.3}");
    println!("total {:?}", t0.elapsed());
}
