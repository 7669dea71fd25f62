//! High-pass residual models and the quantize/truncate step.
//!
//! Residuals suppress image content and expose local statistical
//! alterations. The built-in bank holds eight models covering first,
//! second and third order plus square 5x5 supports, each in a linear
//! variant and a min/max variant. Real-valued residuals are mapped onto
//! the small alphabet `{-T..T}` (T = 2, q = 1 as shipped) before
//! co-occurrence counting.

use crate::error::{Error, Result};
use crate::raster::GrayImage;

/// Stable keys for the built-in residual models, in bank order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelId {
    /// Linear 1st order, horizontal + vertical differences.
    L1,
    /// Linear 2nd order.
    L2,
    /// Linear 3rd order.
    L3,
    /// Linear square 5x5.
    Lsq,
    /// Min/max over the 1st-order pair.
    N1,
    /// Min/max over the 2nd-order pair.
    N2,
    /// Min/max over the 3rd-order pair.
    N3,
    /// Min/max over four half-plane splits of the square 5x5 stencil.
    Nsq,
}

impl ModelId {
    pub const ALL: [ModelId; 8] = [
        ModelId::L1,
        ModelId::L2,
        ModelId::L3,
        ModelId::Lsq,
        ModelId::N1,
        ModelId::N2,
        ModelId::N3,
        ModelId::Nsq,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ModelId::L1 => "L1",
            ModelId::L2 => "L2",
            ModelId::L3 => "L3",
            ModelId::Lsq => "LSQ",
            ModelId::N1 => "N1",
            ModelId::N2 => "N2",
            ModelId::N3 => "N3",
            ModelId::Nsq => "NSQ",
        }
    }

    pub fn parse(s: &str) -> Result<ModelId> {
        match s.trim().to_ascii_uppercase().as_str() {
            "L1" => Ok(ModelId::L1),
            "L2" => Ok(ModelId::L2),
            "L3" => Ok(ModelId::L3),
            "LSQ" => Ok(ModelId::Lsq),
            "N1" => Ok(ModelId::N1),
            "N2" => Ok(ModelId::N2),
            "N3" => Ok(ModelId::N3),
            "NSQ" => Ok(ModelId::Nsq),
            other => Err(Error::UnknownModel(other.to_string())),
        }
    }
}

impl std::fmt::Display for ModelId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Linear models emit one residual field per kernel; min/max models pool
/// several kernels into a min field and a max field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Linear,
    MinMax,
}

/// Filter support class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterOrder {
    First,
    Second,
    Third,
    Square5,
}

/// Integer-weight 2-D stencil with an anchor position.
///
/// The residual at pixel `(x, y)` correlates the stencil with the image so
/// that the anchor cell sits on `(x, y)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stencil {
    pub width: usize,
    pub height: usize,
    pub anchor_x: usize,
    pub anchor_y: usize,
    pub weights: Vec<i32>,
}

impl Stencil {
    fn new(width: usize, height: usize, anchor: (usize, usize), weights: Vec<i32>) -> Self {
        assert_eq!(weights.len(), width * height);
        assert!(anchor.0 < width && anchor.1 < height);
        Self { width, height, anchor_x: anchor.0, anchor_y: anchor.1, weights }
    }

    #[inline]
    pub fn weight(&self, kx: usize, ky: usize) -> i32 {
        self.weights[ky * self.width + kx]
    }

    pub fn weight_sum(&self) -> i32 {
        self.weights.iter().sum()
    }

    /// Margins a field loses on each side when this stencil requires full
    /// support: (left, top, right, bottom).
    fn margins(&self) -> (usize, usize, usize, usize) {
        (
            self.anchor_x,
            self.anchor_y,
            self.width - 1 - self.anchor_x,
            self.height - 1 - self.anchor_y,
        )
    }
}

/// A high-pass residual model: one or more stencils plus a normalizer
/// applied to the raw correlation before quantization.
#[derive(Debug, Clone)]
pub struct ResidualModel {
    pub id: ModelId,
    pub kind: ModelKind,
    pub order: FilterOrder,
    pub kernels: Vec<Stencil>,
    pub normalizer: i32,
}

/// Real-valued residual field over the valid region of an image.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualField {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl ResidualField {
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }
}

/// Residual field quantized onto `{-T..T}`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedResidualField {
    pub width: usize,
    pub height: usize,
    pub data: Vec<i8>,
    /// Truncation bound (2 as shipped).
    pub t: i32,
    /// Quantization step (1 as shipped).
    pub q: f64,
}

impl QuantizedResidualField {
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> i8 {
        self.data[y * self.width + x]
    }
}

/// Full square 5x5 stencil; every row and column sums to zero.
const SQUARE5: [i32; 25] = [
    -1, 2, -2, 2, -1, //
    2, -6, 8, -6, 2, //
    -2, 8, -12, 8, -2, //
    2, -6, 8, -6, 2, //
    -1, 2, -2, 2, -1,
];

fn square5_stencil() -> Stencil {
    Stencil::new(5, 5, (2, 2), SQUARE5.to_vec())
}

/// Half-plane splits of the square 5x5 stencil: the three rows (or columns)
/// that include the center. Each split keeps the -12 anchor and stays
/// zero-sum because every row and column of the full stencil sums to zero.
fn square5_half_planes() -> Vec<Stencil> {
    let row = |r: usize| -> Vec<i32> { SQUARE5[r * 5..(r + 1) * 5].to_vec() };
    let top = [row(0), row(1), row(2)].concat();
    let bottom = [row(2), row(3), row(4)].concat();
    let left: Vec<i32> = (0..5).flat_map(|r| (0..3).map(move |c| SQUARE5[r * 5 + c])).collect();
    let right: Vec<i32> = (0..5).flat_map(|r| (2..5).map(move |c| SQUARE5[r * 5 + c])).collect();
    vec![
        Stencil::new(5, 3, (2, 2), top),
        Stencil::new(5, 3, (2, 0), bottom),
        Stencil::new(3, 5, (2, 2), left),
        Stencil::new(3, 5, (0, 2), right),
    ]
}

fn first_order_pair() -> Vec<Stencil> {
    vec![
        Stencil::new(2, 1, (0, 0), vec![-1, 1]),
        Stencil::new(1, 2, (0, 0), vec![-1, 1]),
    ]
}

fn second_order_pair() -> Vec<Stencil> {
    vec![
        Stencil::new(3, 1, (1, 0), vec![1, -2, 1]),
        Stencil::new(1, 3, (0, 1), vec![1, -2, 1]),
    ]
}

fn third_order_pair() -> Vec<Stencil> {
    vec![
        Stencil::new(4, 1, (1, 0), vec![1, -3, 3, -1]),
        Stencil::new(1, 4, (0, 1), vec![1, -3, 3, -1]),
    ]
}

/// The eight built-in residual models, in bank order
/// (L1, L2, L3, LSQ, N1, N2, N3, NSQ).
pub fn builtin_bank() -> Vec<ResidualModel> {
    use FilterOrder::*;
    use ModelKind::*;
    vec![
        ResidualModel { id: ModelId::L1, kind: Linear, order: First, kernels: first_order_pair(), normalizer: 1 },
        ResidualModel { id: ModelId::L2, kind: Linear, order: Second, kernels: second_order_pair(), normalizer: 1 },
        ResidualModel { id: ModelId::L3, kind: Linear, order: Third, kernels: third_order_pair(), normalizer: 1 },
        ResidualModel { id: ModelId::Lsq, kind: Linear, order: Square5, kernels: vec![square5_stencil()], normalizer: 12 },
        ResidualModel { id: ModelId::N1, kind: MinMax, order: First, kernels: first_order_pair(), normalizer: 1 },
        ResidualModel { id: ModelId::N2, kind: MinMax, order: Second, kernels: second_order_pair(), normalizer: 1 },
        ResidualModel { id: ModelId::N3, kind: MinMax, order: Third, kernels: third_order_pair(), normalizer: 1 },
        ResidualModel { id: ModelId::Nsq, kind: MinMax, order: Square5, kernels: square5_half_planes(), normalizer: 12 },
    ]
}

/// Looks up a built-in model by id.
pub fn bank_model(id: ModelId) -> ResidualModel {
    builtin_bank().into_iter().find(|m| m.id == id).expect("bank covers all ids")
}

fn correlate(img: &GrayImage, k: &Stencil, margins: (usize, usize, usize, usize), norm: f64) -> ResidualField {
    let (left, top, right, bottom) = margins;
    let width = img.width() - left - right;
    let height = img.height() - top - bottom;
    let mut data = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            // Anchor sits on image pixel (x + left, y + top).
            let base_x = x + left - k.anchor_x;
            let base_y = y + top - k.anchor_y;
            let mut acc = 0.0;
            for ky in 0..k.height {
                let row = img.row(base_y + ky);
                for kx in 0..k.width {
                    acc += f64::from(k.weight(kx, ky)) * row[base_x + kx];
                }
            }
            data.push(acc / norm);
        }
    }
    ResidualField { width, height, data }
}

/// Computes the model's residual fields over the image's valid region.
///
/// Linear models return one field per kernel, each over its own full-support
/// region. Min/max models evaluate every kernel at the same pixel and return
/// exactly two fields: the pointwise minimum and maximum.
pub fn compute_residual(img: &GrayImage, model: &ResidualModel) -> Result<Vec<ResidualField>> {
    let norm = f64::from(model.normalizer);
    match model.kind {
        ModelKind::Linear => model
            .kernels
            .iter()
            .map(|k| {
                let m = k.margins();
                if img.width() <= m.0 + m.2 || img.height() <= m.1 + m.3 {
                    return Err(Error::DegenerateInput(format!(
                        "image {}x{} smaller than kernel support of model {}",
                        img.width(),
                        img.height(),
                        model.id
                    )));
                }
                Ok(correlate(img, k, m, norm))
            })
            .collect(),
        ModelKind::MinMax => {
            let mut left = 0;
            let mut top = 0;
            let mut right = 0;
            let mut bottom = 0;
            for k in &model.kernels {
                let m = k.margins();
                left = left.max(m.0);
                top = top.max(m.1);
                right = right.max(m.2);
                bottom = bottom.max(m.3);
            }
            if img.width() <= left + right || img.height() <= top + bottom {
                return Err(Error::DegenerateInput(format!(
                    "image {}x{} smaller than kernel support of model {}",
                    img.width(),
                    img.height(),
                    model.id
                )));
            }
            let fields: Vec<ResidualField> = model
                .kernels
                .iter()
                .map(|k| correlate(img, k, (left, top, right, bottom), norm))
                .collect();
            let n = fields[0].data.len();
            let mut min_data = fields[0].data.clone();
            let mut max_data = fields[0].data.clone();
            for f in &fields[1..] {
                for i in 0..n {
                    min_data[i] = min_data[i].min(f.data[i]);
                    max_data[i] = max_data[i].max(f.data[i]);
                }
            }
            let (w, h) = (fields[0].width, fields[0].height);
            Ok(vec![
                ResidualField { width: w, height: h, data: min_data },
                ResidualField { width: w, height: h, data: max_data },
            ])
        }
    }
}

/// Quantizes a residual field: `round(r / q)` with ties away from zero,
/// clamped to `[-t, t]`.
pub fn quantize_truncate(field: &ResidualField, q: f64, t: i32) -> QuantizedResidualField {
    assert!(q > 0.0 && t >= 1, "need q > 0 and t >= 1");
    let data = field
        .data
        .iter()
        .map(|&r| {
            // f64::round ties away from zero, matching the quantizer's odd symmetry.
            let v = (r / q).round();
            v.clamp(f64::from(-t), f64::from(t)) as i8
        })
        .collect();
    QuantizedResidualField { width: field.width, height: field.height, data, t, q }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_image(w: usize, h: usize, seed: u64) -> GrayImage {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        GrayImage::from_fn(w, h, |_, _| rng.gen_range(0.0..255.0))
    }

    /// Naive stencil correlation, written independently of `correlate`.
    fn naive_residual(img: &GrayImage, k: &Stencil, norm: f64) -> Vec<Vec<f64>> {
        let mut rows = Vec::new();
        for y in k.anchor_y..img.height() + k.anchor_y + 1 - k.height {
            let mut row = Vec::new();
            for x in k.anchor_x..img.width() + k.anchor_x + 1 - k.width {
                let mut acc = 0.0;
                for ky in 0..k.height {
                    for kx in 0..k.width {
                        acc += f64::from(k.weights[ky * k.width + kx])
                            * img.get(x + kx - k.anchor_x, y + ky - k.anchor_y);
                    }
                }
                row.push(acc / norm);
            }
            rows.push(row);
        }
        rows
    }

    #[test]
    fn bank_has_eight_models_in_order() {
        let bank = builtin_bank();
        assert_eq!(bank.len(), 8);
        let ids: Vec<ModelId> = bank.iter().map(|m| m.id).collect();
        assert_eq!(ids, ModelId::ALL.to_vec());
    }

    #[test]
    fn all_kernels_sum_to_zero() {
        for model in builtin_bank() {
            for k in &model.kernels {
                assert_eq!(k.weight_sum(), 0, "model {} kernel not zero-sum", model.id);
            }
            if model.kind == ModelKind::MinMax {
                assert!(model.kernels.len() >= 2);
            }
        }
    }

    #[test]
    fn square5_normalizer_matches_anchor() {
        for model in builtin_bank() {
            if model.order == FilterOrder::Square5 {
                assert_eq!(model.normalizer, 12);
                for k in &model.kernels {
                    assert_eq!(k.weight(k.anchor_x, k.anchor_y), -12);
                }
            } else {
                assert_eq!(model.normalizer, 1);
            }
        }
    }

    #[test]
    fn n1_on_column_ramp() {
        // x_{i,j} = j: horizontal difference 1, vertical difference 0.
        let img = GrayImage::from_fn(12, 9, |x, _| x as f64);
        let fields = compute_residual(&img, &bank_model(ModelId::N1)).unwrap();
        assert_eq!(fields.len(), 2);
        assert!(fields[0].data.iter().all(|&v| v == 0.0), "min branch");
        assert!(fields[1].data.iter().all(|&v| v == 1.0), "max branch");
    }

    #[test]
    fn l1_horizontal_on_ramp() {
        let img = GrayImage::from_fn(10, 4, |x, _| x as f64);
        let fields = compute_residual(&img, &bank_model(ModelId::L1)).unwrap();
        assert!(fields[0].data.iter().all(|&v| v == 1.0));
        assert_eq!((fields[0].width, fields[0].height), (9, 4));
        assert_eq!((fields[1].width, fields[1].height), (10, 3));
    }

    #[test]
    fn constant_image_zero_residuals() {
        let img = GrayImage::constant(16, 16, 77.0);
        for model in builtin_bank() {
            for field in compute_residual(&img, &model).unwrap() {
                assert!(field.data.iter().all(|&v| v.abs() < 1e-12), "model {}", model.id);
            }
        }
    }

    #[test]
    fn lsq_matches_naive_oracle() {
        let img = random_image(16, 16, 3);
        let model = bank_model(ModelId::Lsq);
        let field = &compute_residual(&img, &model).unwrap()[0];
        let oracle = naive_residual(&img, &model.kernels[0], 12.0);
        assert_eq!(field.height, oracle.len());
        for (y, row) in oracle.iter().enumerate() {
            assert_eq!(field.width, row.len());
            for (x, &want) in row.iter().enumerate() {
                assert!((field.get(x, y) - want).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn linear_models_are_odd() {
        let img = random_image(20, 20, 11);
        let negated = GrayImage::from_fn(20, 20, |x, y| 255.0 - img.get(x, y));
        for model in builtin_bank().iter().filter(|m| m.kind == ModelKind::Linear) {
            let a = compute_residual(&img, model).unwrap();
            let b = compute_residual(&negated, model).unwrap();
            for (fa, fb) in a.iter().zip(&b) {
                for (va, vb) in fa.data.iter().zip(&fb.data) {
                    assert!((va + vb).abs() < 1e-9, "model {}", model.id);
                }
            }
        }
    }

    #[test]
    fn image_smaller_than_support_errors() {
        let img = GrayImage::constant(3, 3, 0.0);
        let err = compute_residual(&img, &bank_model(ModelId::Lsq)).unwrap_err();
        assert!(matches!(err, Error::DegenerateInput(_)));
    }

    #[test]
    fn quantizer_cases() {
        let field = ResidualField {
            width: 6,
            height: 1,
            data: vec![0.49, 7.2, -7.2, -1.5, 1.5, 0.5],
        };
        let q = quantize_truncate(&field, 1.0, 2);
        assert_eq!(q.data, vec![0, 2, -2, -2, 2, 1]);
    }

    #[test]
    fn quantizer_output_confined() {
        for seed in 0..5u64 {
            let img = random_image(24, 24, seed);
            for model in builtin_bank() {
                for field in compute_residual(&img, &model).unwrap() {
                    let q = quantize_truncate(&field, 1.0, 2);
                    assert!(q.data.iter().all(|&v| (-2..=2).contains(&v)));
                }
            }
        }
    }
}
