//! Decision fusion and the batch detection/evaluation pipeline.
//!
//! The two detectors are complementary: the splicing classifier reads a
//! global descriptor shift, the copy-move detector needs an actual duplicated
//! region but is near-certain when it fires. An image is fused to fake when
//! at least one of them says fake, which recovers forgeries too small to
//! move the global descriptor without giving up the copy-move detector's
//! specificity.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::classifier::{Label, SvmModel};
use crate::cooccurrence::{extract_features, merge_features};
use crate::copymove::{detect_copymove, CopyMoveConfig, PatchMatchConfig};
use crate::error::{Error, Result};
use crate::raster::{load_image, write_mask, GrayImage};
use crate::residuals::bank_model;
use crate::synth::Manifest;

/// Detector decisions share the label domain.
pub type Decision = Label;

/// Per-image outcome of the fused pipeline.
#[derive(Debug, Clone)]
pub struct Verdict {
    pub image_id: String,
    pub splice_decision: Decision,
    /// Signed SVM decision value behind the splice decision.
    pub splice_margin: f64,
    pub copymove_decision: Decision,
    pub fused: Decision,
    /// Detection map location, when one was written.
    pub map_path: Option<PathBuf>,
}

/// OR rule: fake when at least one detector says fake.
pub fn fuse(splice: Decision, copymove: Decision) -> Decision {
    if splice == Label::Fake || copymove == Label::Fake {
        Label::Fake
    } else {
        Label::Pristine
    }
}

/// Runs both detectors on one image and fuses their decisions.
pub fn detect_image(
    image_id: &str,
    img: &GrayImage,
    model: &SvmModel,
    pm: &PatchMatchConfig,
    cm: &CopyMoveConfig,
) -> Result<(Verdict, crate::copymove::CopyMoveResult)> {
    let models: Vec<_> = model.selection().iter().map(|&id| bank_model(id)).collect();
    let feats = extract_features(img, &models)?;
    let merged = merge_features(&feats, model.selection())?;
    let margin = model.decision_value(&merged)?;
    let splice = if margin > 0.0 { Label::Fake } else { Label::Pristine };

    let cm_result = detect_copymove(img, pm, cm)?;
    let copymove = if cm_result.is_fake { Label::Fake } else { Label::Pristine };

    let verdict = Verdict {
        image_id: image_id.to_string(),
        splice_decision: splice,
        splice_margin: margin,
        copymove_decision: copymove,
        fused: fuse(splice, copymove),
        map_path: None,
    };
    Ok((verdict, cm_result))
}

/// Runs the fused pipeline over many images concurrently; results keep input
/// order. Detection maps are written to `map_dir` (as `<id>.png`) for images
/// the copy-move detector flags.
pub fn detect_batch(
    items: &[(String, PathBuf)],
    model: &SvmModel,
    pm: &PatchMatchConfig,
    cm: &CopyMoveConfig,
    map_dir: Option<&Path>,
) -> Result<Vec<Verdict>> {
    if let Some(dir) = map_dir {
        std::fs::create_dir_all(dir)?;
    }
    items
        .par_iter()
        .map(|(id, path)| {
            let img = load_image(path)?;
            let (mut verdict, cm_result) = detect_image(id, &img, model, pm, cm)?;
            if let (Some(dir), true) = (map_dir, cm_result.is_fake) {
                let out = dir.join(format!("{id}.png"));
                write_mask(&cm_result.map, &out)?;
                verdict.map_path = Some(out);
            }
            Ok(verdict)
        })
        .collect()
}

/// Writes verdicts as CSV with header `id,splice,margin,copymove,fused`.
pub fn write_verdicts_csv(path: impl AsRef<Path>, verdicts: &[Verdict]) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record(["id", "splice", "margin", "copymove", "fused"])?;
    for v in verdicts {
        w.write_record([
            v.image_id.as_str(),
            v.splice_decision.as_str(),
            &format!("{}", v.splice_margin),
            v.copymove_decision.as_str(),
            v.fused.as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a verdict CSV written by [`write_verdicts_csv`].
pub fn read_verdicts_csv(path: impl AsRef<Path>) -> Result<Vec<Verdict>> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() < 5 {
            return Err(Error::MalformedRecord {
                file: path.display().to_string(),
                detail: format!("expected 5 fields, got {}", rec.len()),
            });
        }
        let bad = |detail: String| Error::MalformedRecord {
            file: path.display().to_string(),
            detail,
        };
        out.push(Verdict {
            image_id: rec[0].to_string(),
            splice_decision: Label::parse(&rec[1]).map_err(|_| bad(format!("splice {:?}", &rec[1])))?,
            splice_margin: rec[2].parse().map_err(|e| bad(format!("margin {:?}: {e}", &rec[2])))?,
            copymove_decision: Label::parse(&rec[3])
                .map_err(|_| bad(format!("copymove {:?}", &rec[3])))?,
            fused: Label::parse(&rec[4]).map_err(|_| bad(format!("fused {:?}", &rec[4])))?,
            map_path: None,
        });
    }
    Ok(out)
}

/// Which decision column of a verdict is being evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecisionSource {
    Splice,
    CopyMove,
    Fused,
}

impl DecisionSource {
    pub fn of(&self, v: &Verdict) -> Decision {
        match self {
            DecisionSource::Splice => v.splice_decision,
            DecisionSource::CopyMove => v.copymove_decision,
            DecisionSource::Fused => v.fused,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DecisionSource::Splice => "splice",
            DecisionSource::CopyMove => "copymove",
            DecisionSource::Fused => "fused",
        }
    }
}

/// Confusion counts and derived rates against manifest ground truth.
#[derive(Debug, Clone, Copy)]
pub struct Evaluation {
    pub score: f64,
    pub tpr: f64,
    pub tnr: f64,
    /// True-negative rate on pristine images, spelled out.
    pub specificity: f64,
    /// `confusion[truth][prediction]`, indexed pristine = 0, fake = 1.
    pub confusion: [[usize; 2]; 2],
}

/// Scores one decision column of the verdicts against the manifest labels.
pub fn evaluate(
    verdicts: &[Verdict],
    manifest: &Manifest,
    source: DecisionSource,
) -> Result<Evaluation> {
    let truth: std::collections::HashMap<&str, Label> =
        manifest.entries.iter().map(|e| (e.id.as_str(), e.class)).collect();
    let mut confusion = [[0usize; 2]; 2];
    for v in verdicts {
        let t = truth.get(v.image_id.as_str()).ok_or_else(|| Error::MalformedRecord {
            file: "manifest".into(),
            detail: format!("verdict id {:?} not in manifest", v.image_id),
        })?;
        let ti = usize::from(*t == Label::Fake);
        let pi = usize::from(source.of(v) == Label::Fake);
        confusion[ti][pi] += 1;
    }
    let n_pristine = confusion[0][0] + confusion[0][1];
    let n_fake = confusion[1][0] + confusion[1][1];
    if n_pristine == 0 || n_fake == 0 {
        return Err(Error::SingleClass);
    }
    let tpr = confusion[1][1] as f64 / n_fake as f64;
    let tnr = confusion[0][0] as f64 / n_pristine as f64;
    Ok(Evaluation {
        score: crate::classifier::score(tpr, tnr),
        tpr,
        tnr,
        specificity: tnr,
        confusion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fuse_is_logical_or() {
        use Label::*;
        assert_eq!(fuse(Pristine, Fake), Fake);
        assert_eq!(fuse(Fake, Pristine), Fake);
        assert_eq!(fuse(Fake, Fake), Fake);
        assert_eq!(fuse(Pristine, Pristine), Pristine);
    }

    fn verdict(id: &str, splice: Label, copymove: Label) -> Verdict {
        Verdict {
            image_id: id.into(),
            splice_decision: splice,
            splice_margin: if splice == Label::Fake { 0.5 } else { -0.5 },
            copymove_decision: copymove,
            fused: fuse(splice, copymove),
            map_path: None,
        }
    }

    #[test]
    fn fused_fake_set_is_superset() {
        use Label::*;
        let verdicts = vec![
            verdict("a", Fake, Pristine),
            verdict("b", Pristine, Fake),
            verdict("c", Pristine, Pristine),
            verdict("d", Fake, Fake),
        ];
        for v in &verdicts {
            if v.splice_decision == Fake || v.copymove_decision == Fake {
                assert_eq!(v.fused, Fake);
            }
        }
    }

    #[test]
    fn verdict_csv_round_trip() {
        use Label::*;
        let verdicts = vec![verdict("x1", Fake, Pristine), verdict("x2", Pristine, Pristine)];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("verdicts.csv");
        write_verdicts_csv(&path, &verdicts).unwrap();
        let back = read_verdicts_csv(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].image_id, "x1");
        assert_eq!(back[0].splice_decision, Fake);
        assert_eq!(back[0].splice_margin, 0.5);
        assert_eq!(back[1].fused, Pristine);
    }

    #[test]
    fn evaluation_of_perfect_verdicts() {
        use crate::synth::ManifestEntry;
        let manifest = Manifest {
            entries: vec![
                ManifestEntry {
                    id: "p".into(),
                    class: Label::Pristine,
                    kind: "texture".into(),
                    params: String::new(),
                },
                ManifestEntry {
                    id: "f".into(),
                    class: Label::Fake,
                    kind: "splice".into(),
                    params: String::new(),
                },
            ],
        };
        let verdicts = vec![
            verdict("p", Label::Pristine, Label::Pristine),
            verdict("f", Label::Fake, Label::Pristine),
        ];
        let eval = evaluate(&verdicts, &manifest, DecisionSource::Fused).unwrap();
        assert_eq!(eval.score, 1.0);
        assert_eq!(eval.tpr, 1.0);
        assert_eq!(eval.specificity, 1.0);
        assert_eq!(eval.confusion, [[1, 0], [0, 1]]);
    }
}
