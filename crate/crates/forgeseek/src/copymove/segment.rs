//! Homogeneous-motion segmentation of the offset field.

use super::patchmatch::OffsetField;
use super::CopyMoveConfig;
use crate::raster::BinaryMask;

/// Marks anchors whose offset agrees with the windowed median of each
/// component within the homogeneity tolerance.
///
/// The `±homogeneity_tol` band around a windowed median deliberately admits
/// slowly, linearly varying fields, which is what moderate resizing of a
/// copied region produces.
pub fn segment_offsets(field: &OffsetField, cfg: &CopyMoveConfig) -> BinaryMask {
    let (w, h) = (field.width, field.height);
    let r = cfg.median_window / 2;
    let tol = cfg.homogeneity_tol;
    let mut out = BinaryMask::new(w, h, false);
    let mut buf_x: Vec<i32> = Vec::with_capacity(cfg.median_window * cfg.median_window);
    let mut buf_y: Vec<i32> = Vec::with_capacity(cfg.median_window * cfg.median_window);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !field.valid[i] {
                continue;
            }
            buf_x.clear();
            buf_y.clear();
            for wy in y.saturating_sub(r)..=(y + r).min(h - 1) {
                for wx in x.saturating_sub(r)..=(x + r).min(w - 1) {
                    let j = wy * w + wx;
                    if field.valid[j] {
                        buf_x.push(field.dx[j]);
                        buf_y.push(field.dy[j]);
                    }
                }
            }
            buf_x.sort_unstable();
            buf_y.sort_unstable();
            let med_x = buf_x[(buf_x.len() - 1) / 2];
            let med_y = buf_y[(buf_y.len() - 1) / 2];
            if (field.dx[i] - med_x).abs() <= tol && (field.dy[i] - med_y).abs() <= tol {
                out.set(x, y, true);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn constant_field(w: usize, h: usize, dx: i32, dy: i32) -> OffsetField {
        OffsetField {
            width: w,
            height: h,
            dx: vec![dx; w * h],
            dy: vec![dy; w * h],
            dist: vec![0.0; w * h],
            valid: vec![true; w * h],
        }
    }

    #[test]
    fn constant_field_fully_marked() {
        let field = constant_field(40, 30, 17, -9);
        let mask = segment_offsets(&field, &CopyMoveConfig::default());
        assert_eq!(mask.area(), 40 * 30);
    }

    #[test]
    fn random_field_sparsely_marked() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (w, h) = (60, 60);
        let field = OffsetField {
            width: w,
            height: h,
            dx: (0..w * h).map(|_| rng.gen_range(-100..=100)).collect(),
            dy: (0..w * h).map(|_| rng.gen_range(-100..=100)).collect(),
            dist: vec![0.5; w * h],
            valid: vec![true; w * h],
        };
        let mask = segment_offsets(&field, &CopyMoveConfig::default());
        let fraction = mask.area() as f64 / (w * h) as f64;
        assert!(fraction < 0.10, "marked fraction {fraction}");
    }

    #[test]
    fn slow_linear_ramp_mostly_marked() {
        let (w, h) = (80, 40);
        let mut field = constant_field(w, h, 0, 25);
        for y in 0..h {
            for x in 0..w {
                field.dx[y * w + x] = (x / 20) as i32;
            }
        }
        let mask = segment_offsets(&field, &CopyMoveConfig::default());
        let fraction = mask.area() as f64 / (w * h) as f64;
        assert!(fraction >= 0.90, "marked fraction {fraction}");
    }
}
