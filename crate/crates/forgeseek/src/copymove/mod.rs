//! Copy-move forgery detection: PatchMatch offset field, homogeneous-motion
//! segmentation, candidate elimination and a rotation sweep.
//!
//! A rotated copy never aligns with its source under within-image patch
//! matching (their relative rotation is unchanged by rotating the whole
//! frame), so the sweep matches the original image against rotated versions
//! of itself: at the compensating angle the copied region's motion field
//! collapses to a constant translation and the zero-rotation machinery
//! applies unchanged.

mod eliminate;
mod patchmatch;
mod segment;

pub use eliminate::eliminate_candidates;
pub use patchmatch::{patchmatch, OffsetField, PatchMatchConfig};
pub use segment::segment_offsets;

use rayon::prelude::*;

use eliminate::eliminate_general;
use patchmatch::{match_field, PatchGrid};

use crate::error::{Error, Result};
use crate::raster::{mask_from_rotated, rotate_image, rotate_point_forward, BinaryMask, GrayImage};

/// Segmentation and elimination parameters.
#[derive(Debug, Clone)]
pub struct CopyMoveConfig {
    /// Median filter window over the offset field.
    pub median_window: usize,
    /// Allowed deviation from the windowed median, in pixels.
    pub homogeneity_tol: i32,
    /// Patches with luminance variance below this are treated as flat.
    pub flat_var_threshold: f64,
    /// Minimum connected-component area, in anchors.
    pub min_region_area: usize,
    /// Disk radius of the morphological opening.
    pub open_radius: usize,
    /// Rotation sweep step in degrees; must divide 360.
    pub rotation_step: f64,
    pub rotations_enabled: bool,
}

impl Default for CopyMoveConfig {
    fn default() -> Self {
        Self {
            median_window: 7,
            homogeneity_tol: 1,
            flat_var_threshold: 1.0,
            min_region_area: 1200,
            open_radius: 3,
            rotation_step: 15.0,
            rotations_enabled: true,
        }
    }
}

impl CopyMoveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.median_window == 0 || self.median_window % 2 == 0 {
            return Err(Error::InvalidConfig("median_window must be odd".into()));
        }
        if self.homogeneity_tol < 0 {
            return Err(Error::InvalidConfig("homogeneity_tol must be >= 0".into()));
        }
        if !(self.rotation_step > 0.0) || (360.0 % self.rotation_step).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "rotation_step {} must divide 360",
                self.rotation_step
            )));
        }
        Ok(())
    }
}

/// A surviving duplicated region.
#[derive(Debug, Clone)]
pub struct Region {
    /// Patch footprint of the component, in source-image coordinates.
    pub mask: BinaryMask,
    /// Dominant (median) offset of the component, in anchor coordinates.
    pub offset: (i32, i32),
    /// Mean PatchMatch distance over the component.
    pub mean_dist: f64,
}

/// Outcome of copy-move detection on one image.
#[derive(Debug, Clone)]
pub struct CopyMoveResult {
    /// At least one duplicated region survived elimination.
    pub is_fake: bool,
    /// Union of surviving regions and their translated images, in
    /// source-image coordinates.
    pub map: BinaryMask,
    pub regions: Vec<Region>,
    /// Sweep angle at which the detection fired; `None` when pristine.
    pub rotation_found: Option<f64>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

fn run_at_angle(
    img: &GrayImage,
    theta: f64,
    pm: &PatchMatchConfig,
    cm: &CopyMoveConfig,
) -> Result<CopyMoveResult> {
    // Each sweep angle draws from its own deterministic stream.
    let angle_cfg = PatchMatchConfig {
        seed: splitmix64(pm.seed ^ splitmix64(theta.to_bits())),
        ..pm.clone()
    };

    if theta == 0.0 {
        let grid = PatchGrid::new(img, pm.patch_size, None)?;
        let identity = |x: usize, y: usize| (x as f64, y as f64);
        let field = match_field(&grid, &grid, &identity, &angle_cfg)?;
        let candidates = segment_offsets(&field, cm);
        let e = eliminate_general(img, img, None, &field, &candidates, cm)?;
        let mut map = e.src_map;
        map.or_with(&e.dst_map);
        let is_fake = !e.regions.is_empty();
        return Ok(CopyMoveResult {
            is_fake,
            map,
            regions: e.regions,
            rotation_found: is_fake.then_some(0.0),
        });
    }

    let (rotated, rot_valid) = rotate_image(img, theta);
    let src_grid = PatchGrid::new(img, pm.patch_size, None)?;
    let dst_grid = PatchGrid::new(&rotated, pm.patch_size, Some(&rot_valid))?;
    let half = (pm.patch_size as f64 - 1.0) / 2.0;
    let src_dims = (img.width(), img.height());
    let dst_dims = (rotated.width(), rotated.height());
    // Excluded disk sits on the anchor's own rotated position: that is the
    // trivial self-match in the rotated canvas.
    let exclusion = move |x: usize, y: usize| {
        let (cx, cy) =
            rotate_point_forward(x as f64 + half, y as f64 + half, theta, src_dims, dst_dims);
        (cx - half, cy - half)
    };
    let field = match_field(&src_grid, &dst_grid, &exclusion, &angle_cfg)?;
    let candidates = segment_offsets(&field, cm);
    let e = eliminate_general(img, &rotated, Some(&rot_valid), &field, &candidates, cm)?;
    let mut map = e.src_map;
    map.or_with(&mask_from_rotated(&e.dst_map, theta, img.width(), img.height()));
    let is_fake = !e.regions.is_empty();
    Ok(CopyMoveResult { is_fake, map, regions: e.regions, rotation_found: is_fake.then_some(theta) })
}

/// Temporary diagnostics for the rotation sweep (debugging aid).
#[doc(hidden)]
pub struct AngleDiag {
    pub candidate_count: usize,
    pub component_sizes: Vec<usize>,
    pub notes: String,
}

#[doc(hidden)]
pub fn debug_run_at_angle(
    img: &GrayImage,
    theta: f64,
    pm: &PatchMatchConfig,
    cm: &CopyMoveConfig,
) -> Result<(CopyMoveResult, AngleDiag)> {
    let angle_cfg = PatchMatchConfig {
        seed: splitmix64(pm.seed ^ splitmix64(theta.to_bits())),
        ..pm.clone()
    };
    let (rotated, rot_valid) = rotate_image(img, theta);
    let src_grid = PatchGrid::new(img, pm.patch_size, None)?;
    let dst_grid = PatchGrid::new(&rotated, pm.patch_size, Some(&rot_valid))?;
    let half = (pm.patch_size as f64 - 1.0) / 2.0;
    let src_dims = (img.width(), img.height());
    let dst_dims = (rotated.width(), rotated.height());
    let exclusion = move |x: usize, y: usize| {
        let (cx, cy) =
            rotate_point_forward(x as f64 + half, y as f64 + half, theta, src_dims, dst_dims);
        (cx - half, cy - half)
    };
    let field = match_field(&src_grid, &dst_grid, &exclusion, &angle_cfg)?;
    let candidates = segment_offsets(&field, cm);
    let mut notes = String::new();

    // Offset histogram over candidates.
    let mut hist: std::collections::HashMap<(i32, i32), usize> = Default::default();
    for y in 0..field.height {
        for x in 0..field.width {
            if candidates.get(x, y) {
                let i = y * field.width + x;
                *hist.entry((field.dx[i], field.dy[i])).or_default() += 1;
            }
        }
    }
    let mut top: Vec<_> = hist.into_iter().collect();
    top.sort_by_key(|&(_, n)| std::cmp::Reverse(n));
    for (off, n) in top.iter().take(3) {
        notes.push_str(&format!("off{off:?}x{n} "));
    }

    let e = eliminate_general(img, &rotated, Some(&rot_valid), &field, &candidates, cm)?;
    let diag = AngleDiag {
        candidate_count: candidates.area(),
        component_sizes: e.regions.iter().map(|r| r.mask.area()).collect(),
        notes,
    };
    let mut map = e.src_map;
    map.or_with(&mask_from_rotated(&e.dst_map, theta, img.width(), img.height()));
    let is_fake = !e.regions.is_empty();
    Ok((
        CopyMoveResult { is_fake, map, regions: e.regions, rotation_found: is_fake.then_some(theta) },
        diag,
    ))
}

/// Full copy-move detection with the rotation sweep.
///
/// Runs the pipeline at rotation zero first; when nothing is found and
/// rotations are enabled, sweeps the remaining multiples of the rotation
/// step over the full circle, stopping at the first (smallest-angle)
/// detection. The returned map is always in original-image coordinates.
pub fn detect_copymove(
    img: &GrayImage,
    pm: &PatchMatchConfig,
    cm: &CopyMoveConfig,
) -> Result<CopyMoveResult> {
    pm.validate()?;
    cm.validate()?;
    let base = run_at_angle(img, 0.0, pm, cm)?;
    if base.is_fake || !cm.rotations_enabled {
        return Ok(base);
    }
    let steps = (360.0 / cm.rotation_step).round() as usize;
    let angles: Vec<f64> = (1..steps).map(|k| k as f64 * cm.rotation_step).collect();
    // Angles are evaluated in parallel chunks; the smallest detected angle
    // wins, so the outcome matches a sequential sweep.
    let chunk = rayon::current_num_threads().max(1);
    for group in angles.chunks(chunk) {
        let results: Vec<CopyMoveResult> = group
            .par_iter()
            .map(|&theta| run_at_angle(img, theta, pm, cm))
            .collect::<Result<Vec<_>>>()?;
        if let Some(hit) = results.into_iter().find(|r| r.is_fake) {
            return Ok(hit);
        }
    }
    Ok(base)
}
