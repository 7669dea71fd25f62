//! Randomized approximate nearest-neighbor field over unit-normalized
//! patches: random initialization, scan-order propagation and exponentially
//! shrinking random search.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, GrayImage};

/// PatchMatch parameters.
#[derive(Debug, Clone)]
pub struct PatchMatchConfig {
    /// Patch side length; odd and at least 3.
    pub patch_size: usize,
    /// Propagation/search sweeps.
    pub iterations: usize,
    /// Matches closer than this to the trivial self-match are excluded.
    pub min_offset: usize,
    /// Radius shrink factor of the random search, in (0, 1).
    pub search_alpha: f64,
    pub seed: u64,
}

impl Default for PatchMatchConfig {
    fn default() -> Self {
        Self { patch_size: 7, iterations: 5, min_offset: 8, search_alpha: 0.5, seed: 0 }
    }
}

impl PatchMatchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patch_size < 3 || self.patch_size % 2 == 0 {
            return Err(Error::InvalidConfig(format!(
                "patch_size must be odd and >= 3, got {}",
                self.patch_size
            )));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be >= 1".into()));
        }
        if 2 * self.min_offset <= self.patch_size {
            return Err(Error::InvalidConfig(format!(
                "min_offset {} must exceed patch_size/2",
                self.min_offset
            )));
        }
        if !(self.search_alpha > 0.0 && self.search_alpha < 1.0) {
            return Err(Error::InvalidConfig("search_alpha must be in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Dense displacement field over patch anchors (patch top-left corners).
///
/// `dx`/`dy` point from a source anchor to its matched target anchor;
/// `dist` is the squared Euclidean distance between the unit-normalized
/// patches. Anchors for which no admissible target exists are flagged in
/// `valid` (all anchors are valid in ordinary within-image matching).
#[derive(Debug, Clone)]
pub struct OffsetField {
    pub width: usize,
    pub height: usize,
    pub dx: Vec<i32>,
    pub dy: Vec<i32>,
    pub dist: Vec<f64>,
    pub valid: Vec<bool>,
}

impl OffsetField {
    #[inline]
    pub fn idx(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }
}

/// Per-anchor patch norms plus anchor validity for one image.
pub(crate) struct PatchGrid<'a> {
    img: &'a GrayImage,
    patch: usize,
    /// Anchor grid dimensions: image dims minus patch plus one.
    pub(crate) width: usize,
    pub(crate) height: usize,
    /// 1/||patch||, or 0 for an all-zero patch.
    inv_norm: Vec<f64>,
    /// Anchor usable: patch fully inside the image's valid region.
    pub(crate) usable: Vec<bool>,
    /// Usable anchors, flattened for random sampling.
    usable_list: Vec<(u32, u32)>,
}

impl<'a> PatchGrid<'a> {
    pub(crate) fn new(
        img: &'a GrayImage,
        patch: usize,
        pixel_valid: Option<&BinaryMask>,
    ) -> Result<PatchGrid<'a>> {
        if img.width() < patch || img.height() < patch {
            return Err(Error::DegenerateInput(format!(
                "image {}x{} smaller than patch {patch}",
                img.width(),
                img.height()
            )));
        }
        let width = img.width() - patch + 1;
        let height = img.height() - patch + 1;

        // Integral images over squared samples and invalid-pixel counts.
        let iw = img.width() + 1;
        let mut sq = vec![0.0f64; iw * (img.height() + 1)];
        let mut bad = vec![0u32; iw * (img.height() + 1)];
        for y in 0..img.height() {
            let row = img.row(y);
            for x in 0..img.width() {
                let v = row[x];
                let invalid = pixel_valid.is_some_and(|m| !m.get(x, y));
                sq[(y + 1) * iw + x + 1] =
                    v * v + sq[y * iw + x + 1] + sq[(y + 1) * iw + x] - sq[y * iw + x];
                bad[(y + 1) * iw + x + 1] = u32::from(invalid) + bad[y * iw + x + 1]
                    + bad[(y + 1) * iw + x]
                    - bad[y * iw + x];
            }
        }
        let rect =
            |table: &[f64], x: usize, y: usize| -> f64 {
                table[(y + patch) * iw + x + patch] + table[y * iw + x]
                    - table[y * iw + x + patch]
                    - table[(y + patch) * iw + x]
            };
        let rect_u =
            |table: &[u32], x: usize, y: usize| -> u32 {
                table[(y + patch) * iw + x + patch] + table[y * iw + x]
                    - table[y * iw + x + patch]
                    - table[(y + patch) * iw + x]
            };

        let mut inv_norm = vec![0.0; width * height];
        let mut usable = vec![false; width * height];
        let mut usable_list = Vec::new();
        for y in 0..height {
            for x in 0..width {
                let i = y * width + x;
                let n2 = rect(&sq, x, y);
                inv_norm[i] = if n2 > 0.0 { 1.0 / n2.sqrt() } else { 0.0 };
                if rect_u(&bad, x, y) == 0 {
                    usable[i] = true;
                    usable_list.push((x as u32, y as u32));
                }
            }
        }
        Ok(PatchGrid { img, patch, width, height, inv_norm, usable, usable_list })
    }

    #[inline]
    fn dot(&self, sx: usize, sy: usize, other: &PatchGrid<'_>, tx: usize, ty: usize) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.patch {
            let a = &self.img.row(sy + k)[sx..sx + self.patch];
            let b = &other.img.row(ty + k)[tx..tx + self.patch];
            for (va, vb) in a.iter().zip(b) {
                acc += va * vb;
            }
        }
        acc
    }
}

/// Squared distance between unit-normalized patches; all-zero patches map
/// to the zero vector.
#[inline]
pub(crate) fn unit_patch_distance(
    src: &PatchGrid<'_>,
    sx: usize,
    sy: usize,
    dst: &PatchGrid<'_>,
    tx: usize,
    ty: usize,
) -> f64 {
    let ia = src.inv_norm[sy * src.width + sx];
    let ib = dst.inv_norm[ty * dst.width + tx];
    if ia == 0.0 || ib == 0.0 {
        return if ia == ib { 0.0 } else { 1.0 };
    }
    (2.0 - 2.0 * src.dot(sx, sy, dst, tx, ty) * ia * ib).max(0.0)
}

/// Center of the excluded target disk for each source anchor, in target
/// anchor coordinates. Identity for within-image matching; the forward
/// rotation map when matching against a rotated canvas.
pub(crate) type ExclusionMap = dyn Fn(usize, usize) -> (f64, f64) + Sync;

fn admissible(excl: (f64, f64), tx: usize, ty: usize, min_offset: f64) -> bool {
    let dx = tx as f64 - excl.0;
    let dy = ty as f64 - excl.1;
    dx * dx + dy * dy >= min_offset * min_offset
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Random initialization; separated from the search stream so a field can
/// be compared against its own starting point.
pub(crate) fn initial_field(
    src: &PatchGrid<'_>,
    dst: &PatchGrid<'_>,
    exclusion: &ExclusionMap,
    cfg: &PatchMatchConfig,
) -> OffsetField {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(cfg.seed));
    let min_offset = cfg.min_offset as f64;
    let (w, h) = (src.width, src.height);
    let mut field = OffsetField {
        width: w,
        height: h,
        dx: vec![0; w * h],
        dy: vec![0; w * h],
        dist: vec![f64::INFINITY; w * h],
        valid: vec![false; w * h],
    };
    if dst.usable_list.is_empty() {
        return field;
    }
    for y in 0..h {
        for x in 0..w {
            let excl = exclusion(x, y);
            let mut choice = None;
            for _ in 0..64 {
                let (tx, ty) = dst.usable_list[rng.gen_range(0..dst.usable_list.len())];
                if admissible(excl, tx as usize, ty as usize, min_offset) {
                    choice = Some((tx as usize, ty as usize));
                    break;
                }
            }
            if choice.is_none() {
                // Deterministic fallback scan from a random start.
                let start = rng.gen_range(0..dst.usable_list.len());
                for k in 0..dst.usable_list.len() {
                    let (tx, ty) = dst.usable_list[(start + k) % dst.usable_list.len()];
                    if admissible(excl, tx as usize, ty as usize, min_offset) {
                        choice = Some((tx as usize, ty as usize));
                        break;
                    }
                }
            }
            if let Some((tx, ty)) = choice {
                let i = y * w + x;
                field.dx[i] = tx as i32 - x as i32;
                field.dy[i] = ty as i32 - y as i32;
                field.dist[i] = unit_patch_distance(src, x, y, dst, tx, ty);
                field.valid[i] = true;
            }
        }
    }
    field
}

/// Approximate nearest-neighbor field from `src` anchors into `dst`.
///
/// Sequential by construction: propagation order is part of the contract,
/// and the result is deterministic for a given seed.
pub(crate) fn match_field(
    src: &PatchGrid<'_>,
    dst: &PatchGrid<'_>,
    exclusion: &ExclusionMap,
    cfg: &PatchMatchConfig,
) -> Result<OffsetField> {
    cfg.validate()?;
    let mut field = initial_field(src, dst, exclusion, cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(cfg.seed ^ 0x00ff_00ff_00ff_00ff));
    let min_offset = cfg.min_offset as f64;
    let (w, h) = (src.width, src.height);
    let r0 = dst.width.max(dst.height) as f64;

    let try_candidate = |field: &mut OffsetField, x: usize, y: usize, tx: i64, ty: i64, excl: (f64, f64)| {
        if tx < 0 || ty < 0 || tx >= dst.width as i64 || ty >= dst.height as i64 {
            return;
        }
        let (tx, ty) = (tx as usize, ty as usize);
        if !dst.usable[ty * dst.width + tx] || !admissible(excl, tx, ty, min_offset) {
            return;
        }
        let i = y * w + x;
        let d = unit_patch_distance(src, x, y, dst, tx, ty);
        if d < field.dist[i] {
            field.dist[i] = d;
            field.dx[i] = tx as i32 - x as i32;
            field.dy[i] = ty as i32 - y as i32;
            field.valid[i] = true;
        }
    };

    for iter in 0..cfg.iterations {
        let forward = iter % 2 == 0;
        for yy in 0..h {
            let y = if forward { yy } else { h - 1 - yy };
            for xx in 0..w {
                let x = if forward { xx } else { w - 1 - xx };
                let i = y * w + x;
                let excl = exclusion(x, y);

                // Propagate offsets from the two already-visited neighbors.
                let neighbors: [(i64, i64); 2] = if forward {
                    [(x as i64 - 1, y as i64), (x as i64, y as i64 - 1)]
                } else {
                    [(x as i64 + 1, y as i64), (x as i64, y as i64 + 1)]
                };
                for (nx, ny) in neighbors {
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let ni = ny as usize * w + nx as usize;
                    if !field.valid[ni] {
                        continue;
                    }
                    let (cand_x, cand_y) =
                        (x as i64 + field.dx[ni] as i64, y as i64 + field.dy[ni] as i64);
                    try_candidate(&mut field, x, y, cand_x, cand_y, excl);
                }

                // Random search around the current best, radius shrinking
                // geometrically.
                if field.valid[i] {
                    let mut radius = r0;
                    while radius >= 1.0 {
                        let cx = x as i64 + field.dx[i] as i64;
                        let cy = y as i64 + field.dy[i] as i64;
                        let ox = (rng.gen_range(-1.0..1.0) * radius).round() as i64;
                        let oy = (rng.gen_range(-1.0..1.0) * radius).round() as i64;
                        try_candidate(&mut field, x, y, cx + ox, cy + oy, excl);
                        radius *= cfg.search_alpha;
                    }
                }
            }
        }
    }
    Ok(field)
}

/// Dense approximate nearest-neighbor field of an image against itself,
/// excluding near-self matches.
pub fn patchmatch(img: &GrayImage, cfg: &PatchMatchConfig) -> Result<OffsetField> {
    cfg.validate()?;
    let need = cfg.patch_size + 2 * cfg.min_offset;
    if img.width() < need || img.height() < need {
        return Err(Error::DegenerateInput(format!(
            "image {}x{} too small for patch {} with min offset {}",
            img.width(),
            img.height(),
            cfg.patch_size,
            cfg.min_offset
        )));
    }
    let grid = PatchGrid::new(img, cfg.patch_size, None)?;
    let identity = |x: usize, y: usize| (x as f64, y as f64);
    match_field(&grid, &grid, &identity, cfg)
}
