//! Fourth-order co-occurrence counting on quantized residuals, symmetry
//! folding and multi-model feature merging.
//!
//! Co-occurrences are collected over four consecutive samples along rows and
//! columns of a quantized field, giving a 5^4 = 625-cell tensor. Symmetry
//! folding shrinks this to 169 dimensions for linear models (sign flip and
//! scan reversal) and 325 for min/max models (min/max fold, then reversal).

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::raster::GrayImage;
use crate::residuals::{
    compute_residual, quantize_truncate, ModelId, ModelKind, QuantizedResidualField,
    ResidualModel,
};

/// Cells per co-occurrence tensor: 5 symbols over 4 positions.
pub const COOC_CELLS: usize = 625;
/// Feature dimension of a linear model after folding.
pub const LINEAR_DIM: usize = 169;
/// Feature dimension of a min/max model after folding.
pub const MINMAX_DIM: usize = 325;

/// Feature dimension contributed by one model of the given kind.
pub fn feature_dim(kind: ModelKind) -> usize {
    match kind {
        ModelKind::Linear => LINEAR_DIM,
        ModelKind::MinMax => MINMAX_DIM,
    }
}

/// Flat index of a quantized 4-tuple, each component in `-2..=2`.
#[inline]
pub fn cell_index(t: [i8; 4]) -> usize {
    t.iter().fold(0usize, |acc, &d| {
        debug_assert!((-2..=2).contains(&d));
        acc * 5 + (d + 2) as usize
    })
}

/// Inverse of [`cell_index`].
#[inline]
pub fn cell_tuple(mut idx: usize) -> [i8; 4] {
    debug_assert!(idx < COOC_CELLS);
    let mut t = [0i8; 4];
    for slot in t.iter_mut().rev() {
        *slot = (idx % 5) as i8 - 2;
        idx /= 5;
    }
    t
}

fn negate(t: [i8; 4]) -> [i8; 4] {
    [-t[0], -t[1], -t[2], -t[3]]
}

fn reverse(t: [i8; 4]) -> [i8; 4] {
    [t[3], t[2], t[1], t[0]]
}

struct FoldTables {
    /// Cell -> feature index under {id, negate, reverse, negate∘reverse}.
    linear: [u16; COOC_CELLS],
    /// Cell -> feature index under {id, reverse}.
    minmax: [u16; COOC_CELLS],
    /// Cell -> cell under reverse∘negate (folds max counts onto min cells).
    max_onto_min: [u16; COOC_CELLS],
}

fn orbit_features(orbit: impl Fn([i8; 4]) -> Vec<[i8; 4]>) -> ([u16; COOC_CELLS], usize) {
    let mut map = [u16::MAX; COOC_CELLS];
    let mut next = 0u16;
    for idx in 0..COOC_CELLS {
        let t = cell_tuple(idx);
        let rep = orbit(t).into_iter().min().expect("orbit not empty");
        if rep == t {
            map[idx] = next;
            next += 1;
        } else {
            map[idx] = map[cell_index(rep)];
        }
    }
    (map, next as usize)
}

fn tables() -> &'static FoldTables {
    static TABLES: OnceLock<FoldTables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let (linear, linear_dim) =
            orbit_features(|t| vec![t, negate(t), reverse(t), negate(reverse(t))]);
        let (minmax, minmax_dim) = orbit_features(|t| vec![t, reverse(t)]);
        // Exhaustive enumeration must reproduce the expected dimensions.
        assert_eq!(linear_dim, LINEAR_DIM);
        assert_eq!(minmax_dim, MINMAX_DIM);
        let mut max_onto_min = [0u16; COOC_CELLS];
        for (idx, slot) in max_onto_min.iter_mut().enumerate() {
            *slot = cell_index(reverse(negate(cell_tuple(idx)))) as u16;
        }
        FoldTables { linear, minmax, max_onto_min }
    })
}

/// Joint histogram of 4 consecutive quantized residuals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoocTensor {
    counts: Vec<u64>,
    total: u64,
}

impl Default for CoocTensor {
    fn default() -> Self {
        Self::new()
    }
}

impl CoocTensor {
    pub fn new() -> Self {
        Self { counts: vec![0; COOC_CELLS], total: 0 }
    }

    pub fn get(&self, t: [i8; 4]) -> u64 {
        self.counts[cell_index(t)]
    }

    pub fn add(&mut self, t: [i8; 4], count: u64) {
        self.counts[cell_index(t)] += count;
        self.total += count;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Accumulates all row and column windows of the field into the tensor.
    pub fn add_field(&mut self, field: &QuantizedResidualField) -> Result<()> {
        let (w, h) = (field.width, field.height);
        if w < 4 && h < 4 {
            return Err(Error::DegenerateInput(format!(
                "field {w}x{h} has no 4-sample window in either direction"
            )));
        }
        for y in 0..h {
            for x in 0..w.saturating_sub(3) {
                let t = [field.get(x, y), field.get(x + 1, y), field.get(x + 2, y), field.get(x + 3, y)];
                self.counts[cell_index(t)] += 1;
                self.total += 1;
            }
        }
        for x in 0..w {
            for y in 0..h.saturating_sub(3) {
                let t = [field.get(x, y), field.get(x, y + 1), field.get(x, y + 2), field.get(x, y + 3)];
                self.counts[cell_index(t)] += 1;
                self.total += 1;
            }
        }
        Ok(())
    }
}

/// Counts co-occurrences over all horizontal and vertical 4-sample windows.
pub fn count_cooc(field: &QuantizedResidualField) -> Result<CoocTensor> {
    let mut tensor = CoocTensor::new();
    tensor.add_field(field)?;
    Ok(tensor)
}

/// Symmetry-reduced, unit-sum co-occurrence histogram with model provenance.
///
/// Merged vectors carry one provenance entry per concatenated block, in
/// block order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    models: Vec<ModelId>,
    values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(models: Vec<ModelId>, values: Vec<f64>) -> Self {
        Self { models, values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Provenance: the residual models behind each concatenated block.
    pub fn models(&self) -> &[ModelId] {
        &self.models
    }

    fn block_dim(id: ModelId) -> usize {
        let bank_kind = match id {
            ModelId::L1 | ModelId::L2 | ModelId::L3 | ModelId::Lsq => ModelKind::Linear,
            _ => ModelKind::MinMax,
        };
        feature_dim(bank_kind)
    }

    /// The value block contributed by `id`, if present.
    pub fn block(&self, id: ModelId) -> Option<&[f64]> {
        let mut offset = 0;
        for &m in &self.models {
            let dim = Self::block_dim(m);
            if m == id {
                return Some(&self.values[offset..offset + dim]);
            }
            offset += dim;
        }
        None
    }

    /// Concatenates the blocks named by `selection`, in the listed order.
    pub fn project(&self, selection: &[ModelId]) -> Result<FeatureVector> {
        if selection.is_empty() {
            return Err(Error::EmptySelection);
        }
        let mut values = Vec::new();
        for &id in selection {
            let block = self.block(id).ok_or_else(|| Error::UnknownModel(id.name().into()))?;
            values.extend_from_slice(block);
        }
        Ok(FeatureVector { models: selection.to_vec(), values })
    }
}

fn fold(counts_per_feature: Vec<f64>, total: u64, models: Vec<ModelId>) -> FeatureVector {
    assert!(total > 0, "cannot normalize an empty co-occurrence tensor");
    let values = counts_per_feature.into_iter().map(|v| v / total as f64).collect();
    FeatureVector { models, values }
}

/// Folds a linear-model tensor under sign flip and scan reversal.
///
/// The tensor must already pool both scan directions of the model.
pub fn symmetrize_linear(model: ModelId, c: &CoocTensor) -> FeatureVector {
    let t = tables();
    let mut folded = vec![0f64; LINEAR_DIM];
    for (idx, &count) in c.counts.iter().enumerate() {
        folded[t.linear[idx] as usize] += count as f64;
    }
    fold(folded, c.total, vec![model])
}

/// Folds a min/max model pair: max counts land on `reverse(-d)` cells of the
/// min tensor, then scan reversal is folded.
pub fn symmetrize_minmax(model: ModelId, c_min: &CoocTensor, c_max: &CoocTensor) -> FeatureVector {
    let t = tables();
    let mut merged = vec![0u64; COOC_CELLS];
    for (idx, &count) in c_min.counts.iter().enumerate() {
        merged[idx] += count;
    }
    for (idx, &count) in c_max.counts.iter().enumerate() {
        merged[t.max_onto_min[idx] as usize] += count;
    }
    let mut folded = vec![0f64; MINMAX_DIM];
    for (idx, &count) in merged.iter().enumerate() {
        folded[t.minmax[idx] as usize] += count as f64;
    }
    fold(folded, c_min.total + c_max.total, vec![model])
}

/// Runs residual computation, quantization, counting and folding for each
/// model, yielding one feature vector per model in the given order.
pub fn extract_features(img: &GrayImage, models: &[ResidualModel]) -> Result<Vec<FeatureVector>> {
    models
        .iter()
        .map(|model| {
            let fields = compute_residual(img, model)?;
            let quantized: Vec<QuantizedResidualField> =
                fields.iter().map(|f| quantize_truncate(f, 1.0, 2)).collect();
            match model.kind {
                ModelKind::Linear => {
                    // Direction pooling: both scan directions accumulate into
                    // one tensor before folding.
                    let mut tensor = CoocTensor::new();
                    for q in &quantized {
                        tensor.add_field(q)?;
                    }
                    Ok(symmetrize_linear(model.id, &tensor))
                }
                ModelKind::MinMax => {
                    let c_min = count_cooc(&quantized[0])?;
                    let c_max = count_cooc(&quantized[1])?;
                    Ok(symmetrize_minmax(model.id, &c_min, &c_max))
                }
            }
        })
        .collect()
}

/// Concatenates single-model features in the order named by `selection`.
///
/// Blocks are not renormalized: each already sums to one.
pub fn merge_features(features: &[FeatureVector], selection: &[ModelId]) -> Result<FeatureVector> {
    if selection.is_empty() {
        return Err(Error::EmptySelection);
    }
    let mut models = Vec::with_capacity(selection.len());
    let mut values = Vec::new();
    for &id in selection {
        if models.contains(&id) {
            return Err(Error::UnknownModel(format!("{id} selected twice")));
        }
        let block = features
            .iter()
            .find_map(|f| f.block(id))
            .ok_or_else(|| Error::UnknownModel(id.name().into()))?;
        models.push(id);
        values.extend_from_slice(block);
    }
    Ok(FeatureVector { models, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::residuals::builtin_bank;
    use proptest::prelude::*;

    fn field_from(w: usize, h: usize, data: Vec<i8>) -> QuantizedResidualField {
        QuantizedResidualField { width: w, height: h, data, t: 2, q: 1.0 }
    }

    /// Independent orbit enumeration used as the dimension oracle.
    fn orbit_count(group: &[fn([i8; 4]) -> [i8; 4]]) -> usize {
        let mut reps = std::collections::BTreeSet::new();
        for idx in 0..COOC_CELLS {
            let t = cell_tuple(idx);
            let canon = group.iter().map(|g| g(t)).min().unwrap();
            reps.insert(canon);
        }
        reps.len()
    }

    #[test]
    fn orbit_counts_match_expected_dims() {
        let id = |t: [i8; 4]| t;
        let neg = negate as fn([i8; 4]) -> [i8; 4];
        let rev = reverse as fn([i8; 4]) -> [i8; 4];
        let negrev = (|t| negate(reverse(t))) as fn([i8; 4]) -> [i8; 4];
        assert_eq!(orbit_count(&[id, neg, rev, negrev]), 169);
        assert_eq!(orbit_count(&[id, rev]), 325);
        // Burnside: (625 + 1 + 25 + 25) / 4 and (625 + 25) / 2.
        assert_eq!((625 + 1 + 25 + 25) / 4, 169);
        assert_eq!((625 + 25) / 2, 325);
    }

    #[test]
    fn all_zero_field_count() {
        let field = field_from(10, 10, vec![0; 100]);
        let c = count_cooc(&field).unwrap();
        assert_eq!(c.get([0, 0, 0, 0]), 140);
        assert_eq!(c.total(), 140);
    }

    #[test]
    fn single_row_windows() {
        let field = field_from(6, 1, vec![0, 1, 2, -1, 0, 1]);
        let c = count_cooc(&field).unwrap();
        assert_eq!(c.total(), 3);
        assert_eq!(c.get([0, 1, 2, -1]), 1);
        assert_eq!(c.get([1, 2, -1, 0]), 1);
        assert_eq!(c.get([2, -1, 0, 1]), 1);
    }

    #[test]
    fn too_small_in_both_directions() {
        let field = field_from(3, 3, vec![0; 9]);
        assert!(matches!(count_cooc(&field), Err(Error::DegenerateInput(_))));
    }

    /// Brute-force window enumerator, independent of `add_field`.
    fn brute_force_count(field: &QuantizedResidualField) -> Vec<u64> {
        let mut counts = vec![0u64; COOC_CELLS];
        for y in 0..field.height {
            for x in 0..field.width {
                if x + 3 < field.width {
                    let t = [
                        field.get(x, y),
                        field.get(x + 1, y),
                        field.get(x + 2, y),
                        field.get(x + 3, y),
                    ];
                    counts[cell_index(t)] += 1;
                }
                if y + 3 < field.height {
                    let t = [
                        field.get(x, y),
                        field.get(x, y + 1),
                        field.get(x, y + 2),
                        field.get(x, y + 3),
                    ];
                    counts[cell_index(t)] += 1;
                }
            }
        }
        counts
    }

    proptest! {
        #[test]
        fn count_matches_brute_force(
            w in 4usize..20,
            h in 1usize..20,
            seed in 0u64..1000,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let data: Vec<i8> = (0..w * h).map(|_| rng.gen_range(-2..=2)).collect();
            let field = field_from(w, h, data);
            let c = count_cooc(&field).unwrap();
            prop_assert_eq!(c.counts(), &brute_force_count(&field)[..]);
        }

        #[test]
        fn folds_conserve_mass(seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut c = CoocTensor::new();
            let mut c2 = CoocTensor::new();
            for _ in 0..200 {
                let t = cell_tuple(rng.gen_range(0..COOC_CELLS));
                c.add(t, rng.gen_range(1..5));
                let t2 = cell_tuple(rng.gen_range(0..COOC_CELLS));
                c2.add(t2, rng.gen_range(1..5));
            }
            let lin = symmetrize_linear(ModelId::L1, &c);
            prop_assert!((lin.values().iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let mm = symmetrize_minmax(ModelId::N1, &c, &c2);
            prop_assert!((mm.values().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn linear_fold_invariant_under_sign_flip() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut c = CoocTensor::new();
        let mut flipped = CoocTensor::new();
        for _ in 0..300 {
            let t = cell_tuple(rng.gen_range(0..COOC_CELLS));
            let n = rng.gen_range(1..4);
            c.add(t, n);
            flipped.add(negate(t), n);
        }
        assert_eq!(symmetrize_linear(ModelId::L2, &c), symmetrize_linear(ModelId::L2, &flipped));
    }

    #[test]
    fn minmax_fold_invariant_under_swap() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let mut c_min = CoocTensor::new();
        let mut c_max = CoocTensor::new();
        for _ in 0..300 {
            c_min.add(cell_tuple(rng.gen_range(0..COOC_CELLS)), rng.gen_range(1..4));
            c_max.add(cell_tuple(rng.gen_range(0..COOC_CELLS)), rng.gen_range(1..4));
        }
        let transform = |c: &CoocTensor| {
            let mut out = CoocTensor::new();
            for idx in 0..COOC_CELLS {
                let t = cell_tuple(idx);
                let n = c.get(t);
                if n > 0 {
                    out.add(reverse(negate(t)), n);
                }
            }
            out
        };
        let direct = symmetrize_minmax(ModelId::N2, &c_min, &c_max);
        let swapped = symmetrize_minmax(ModelId::N2, &transform(&c_max), &transform(&c_min));
        assert_eq!(direct, swapped);
    }

    #[test]
    fn all_zero_mass_is_indicator() {
        let mut c = CoocTensor::new();
        c.add([0, 0, 0, 0], 42);
        let f = symmetrize_linear(ModelId::L1, &c);
        assert_eq!(f.values().iter().filter(|&&v| v != 0.0).count(), 1);
        assert_eq!(f.values().iter().sum::<f64>(), 1.0);

        let mut cm = CoocTensor::new();
        cm.add([0, 0, 0, 0], 10);
        let mut cx = CoocTensor::new();
        cx.add([0, 0, 0, 0], 10);
        let fm = symmetrize_minmax(ModelId::N1, &cm, &cx);
        assert_eq!(fm.values().iter().filter(|&&v| v != 0.0).count(), 1);
        assert_eq!(fm.values().iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn orbit_of_antisymmetric_tuple_has_size_two() {
        // (1,0,0,-1): sign-flip equals reversal, so the 4-element group
        // produces only two distinct tuples.
        let t: [i8; 4] = [1, 0, 0, -1];
        let orbit: std::collections::BTreeSet<[i8; 4]> =
            [t, negate(t), reverse(t), negate(reverse(t))].into_iter().collect();
        assert_eq!(orbit.len(), 2);
        let mut c = CoocTensor::new();
        c.add(t, 7);
        let f = symmetrize_linear(ModelId::L1, &c);
        let idx_t = tables().linear[cell_index(t)];
        let idx_neg = tables().linear[cell_index(negate(t))];
        assert_eq!(idx_t, idx_neg);
        assert_eq!(f.values()[idx_t as usize], 1.0);
    }

    #[test]
    fn max_mass_lands_on_folded_cell() {
        let mut c_min = CoocTensor::new();
        c_min.add([0, 0, 0, 0], 1);
        let mut c_max = CoocTensor::new();
        let src: [i8; 4] = [2, 1, 0, -1];
        c_max.add(src, 1);
        let f = symmetrize_minmax(ModelId::Nsq, &c_min, &c_max);
        // reverse(-(2,1,0,-1)) = (1,0,-1,-2); its reversal orbit holds the mass.
        let folded: [i8; 4] = [1, 0, -1, -2];
        let feat = tables().minmax[cell_index(folded)] as usize;
        assert_eq!(f.values()[feat], 0.5);
    }

    #[test]
    fn constant_image_features_are_zero_orbit_indicators() {
        let img = GrayImage::constant(64, 64, 100.0);
        let feats = extract_features(&img, &builtin_bank()).unwrap();
        for f in &feats {
            assert_eq!(f.values().iter().filter(|&&v| v != 0.0).count(), 1);
            assert!((f.values().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn bank_feature_dims() {
        let img = crate::synth::smooth_texture(48, 48, 3);
        let feats = extract_features(&img, &builtin_bank()).unwrap();
        let dims: Vec<usize> = feats.iter().map(|f| f.dim()).collect();
        assert_eq!(dims, vec![169, 169, 169, 169, 325, 325, 325, 325]);
        for f in &feats {
            assert!((f.values().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn merge_single_model_is_identity() {
        let img = crate::synth::smooth_texture(40, 40, 8);
        let feats = extract_features(&img, &builtin_bank()).unwrap();
        let merged = merge_features(&feats, &[ModelId::L1]).unwrap();
        assert_eq!(merged, feats[0]);
    }

    #[test]
    fn merge_four_models_dim() {
        let img = crate::synth::smooth_texture(40, 40, 8);
        let feats = extract_features(&img, &builtin_bank()).unwrap();
        let merged =
            merge_features(&feats, &[ModelId::L3, ModelId::L1, ModelId::N3, ModelId::Nsq]).unwrap();
        assert_eq!(merged.dim(), 169 + 169 + 325 + 325);
        assert_eq!(merged.dim(), 988);
        assert_eq!(merged.block(ModelId::L1).unwrap(), feats[0].values());
    }

    #[test]
    fn merge_empty_selection_errors() {
        assert!(matches!(merge_features(&[], &[]), Err(Error::EmptySelection)));
    }
}
