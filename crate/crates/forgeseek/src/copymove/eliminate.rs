//! Candidate elimination: flat/saturated-match removal, morphological
//! opening, connected components, size filtering and mirror verification.

use super::patchmatch::{unit_patch_distance, OffsetField, PatchGrid};
use super::{CopyMoveConfig, CopyMoveResult, Region};
use crate::error::Result;
use crate::raster::{BinaryMask, GrayImage};

/// Mean unit-patch distance allowed when verifying that a candidate region
/// matches back under its dominant offset. Duplicated content sits near
/// zero even after interpolation; unrelated smooth patches score an order
/// of magnitude higher.
const MATCH_BACK_TOL: f64 = 0.12;

/// Fraction of a component that must land inside the frame when translated
/// by its dominant offset.
const MIN_INSIDE_FRACTION: f64 = 0.8;

pub(crate) struct Elimination {
    pub regions: Vec<Region>,
    /// Footprints of surviving components, in source-image coordinates.
    pub src_map: BinaryMask,
    /// Footprints of their translated images, in target-image coordinates.
    pub dst_map: BinaryMask,
}

fn median_i32(values: &mut Vec<i32>) -> i32 {
    values.sort_unstable();
    values[(values.len() - 1) / 2]
}

/// Disk structuring element offsets for the given radius.
fn disk_offsets(radius: usize) -> Vec<(i32, i32)> {
    let r = radius as i32;
    let mut out = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r * r {
                out.push((dx, dy));
            }
        }
    }
    out
}

fn erode(mask: &BinaryMask, disk: &[(i32, i32)]) -> BinaryMask {
    let (w, h) = (mask.width(), mask.height());
    let mut out = BinaryMask::new(w, h, false);
    for y in 0..h {
        'next: for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            for &(dx, dy) in disk {
                let nx = x as i32 + dx;
                let ny = y as i32 + dy;
                if nx < 0 || ny < 0 || nx >= w as i32 || ny >= h as i32 {
                    continue 'next;
                }
                if !mask.get(nx as usize, ny as usize) {
                    continue 'next;
                }
            }
            out.set(x, y, true);
        }
    }
    out
}

fn dilate(mask: &BinaryMask, disk: &[(i32, i32)]) -> BinaryMask {
    let (w, h) = (mask.width(), mask.height());
    let mut out = BinaryMask::new(w, h, false);
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            for &(dx, dy) in disk {
                let nx = x as i32 + dx;
                let ny = y as i32 + dy;
                if nx >= 0 && ny >= 0 && nx < w as i32 && ny < h as i32 {
                    out.set(nx as usize, ny as usize, true);
                }
            }
        }
    }
    out
}

fn open(mask: &BinaryMask, radius: usize) -> BinaryMask {
    if radius == 0 {
        return mask.clone();
    }
    let disk = disk_offsets(radius);
    dilate(&erode(mask, &disk), &disk)
}

/// 8-connected components as index lists.
fn connected_components(mask: &BinaryMask) -> Vec<Vec<(usize, usize)>> {
    let (w, h) = (mask.width(), mask.height());
    let mut seen = vec![false; w * h];
    let mut components = Vec::new();
    let mut stack = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) || seen[y * w + x] {
                continue;
            }
            let mut comp = Vec::new();
            seen[y * w + x] = true;
            stack.push((x, y));
            while let Some((cx, cy)) = stack.pop() {
                comp.push((cx, cy));
                for dy in -1i32..=1 {
                    for dx in -1i32..=1 {
                        if dx == 0 && dy == 0 {
                            continue;
                        }
                        let nx = cx as i32 + dx;
                        let ny = cy as i32 + dy;
                        if nx < 0 || ny < 0 || nx >= w as i32 || ny >= h as i32 {
                            continue;
                        }
                        let n = (nx as usize, ny as usize);
                        if mask.get(n.0, n.1) && !seen[ny as usize * w + nx as usize] {
                            seen[ny as usize * w + nx as usize] = true;
                            stack.push(n);
                        }
                    }
                }
            }
            components.push(comp);
        }
    }
    components
}

/// Stamps a full patch footprint for each anchor into an image-space mask.
fn stamp_footprint(mask: &mut BinaryMask, anchors: impl Iterator<Item = (usize, usize)>, patch: usize) {
    for (x, y) in anchors {
        for v in 0..patch {
            for u in 0..patch {
                let px = x + u;
                let py = y + v;
                if px < mask.width() && py < mask.height() {
                    mask.set(px, py, true);
                }
            }
        }
    }
}

pub(crate) fn eliminate_general(
    src: &GrayImage,
    dst: &GrayImage,
    dst_valid: Option<&BinaryMask>,
    field: &OffsetField,
    candidates: &BinaryMask,
    cfg: &CopyMoveConfig,
) -> Result<Elimination> {
    let patch = src.width() + 1 - field.width;
    debug_assert_eq!(src.height() + 1 - field.height, patch);
    let src_grid = PatchGrid::new(src, patch, None)?;
    let dst_grid = PatchGrid::new(dst, patch, dst_valid)?;
    let (w, h) = (field.width, field.height);
    let n = (patch * patch) as f64;

    // Patch mean/variance via integral images over the source.
    let iw = src.width() + 1;
    let mut s1 = vec![0.0f64; iw * (src.height() + 1)];
    let mut s2 = vec![0.0f64; iw * (src.height() + 1)];
    for y in 0..src.height() {
        let row = src.row(y);
        for x in 0..src.width() {
            let v = row[x];
            s1[(y + 1) * iw + x + 1] = v + s1[y * iw + x + 1] + s1[(y + 1) * iw + x] - s1[y * iw + x];
            s2[(y + 1) * iw + x + 1] =
                v * v + s2[y * iw + x + 1] + s2[(y + 1) * iw + x] - s2[y * iw + x];
        }
    }
    let rect = |t: &[f64], x: usize, y: usize| -> f64 {
        t[(y + patch) * iw + x + patch] + t[y * iw + x]
            - t[y * iw + x + patch]
            - t[(y + patch) * iw + x]
    };

    // Flat and saturated matches carry no identity evidence.
    let mut kept = BinaryMask::new(w, h, false);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !candidates.get(x, y) || !field.valid[i] {
                continue;
            }
            let sum = rect(&s1, x, y);
            let mean = sum / n;
            let var = (rect(&s2, x, y) / n - mean * mean).max(0.0);
            let saturated = sum < 1e-9 || (sum - 255.0 * n).abs() < 1e-6;
            if var >= cfg.flat_var_threshold && !saturated {
                kept.set(x, y, true);
            }
        }
    }

    let opened = open(&kept, cfg.open_radius);

    let mut regions = Vec::new();
    let mut src_map = BinaryMask::new(src.width(), src.height(), false);
    let mut dst_map = BinaryMask::new(dst.width(), dst.height(), false);
    for comp in connected_components(&opened) {
        if comp.len() < cfg.min_region_area {
            continue;
        }
        let mut dxs: Vec<i32> = comp.iter().map(|&(x, y)| field.dx[y * w + x]).collect();
        let mut dys: Vec<i32> = comp.iter().map(|&(x, y)| field.dy[y * w + x]).collect();
        let dom = (median_i32(&mut dxs), median_i32(&mut dys));

        // Mirror verification: the component translated by its dominant
        // offset must stay mostly inside the frame and match back.
        let mut inside = Vec::new();
        for &(x, y) in &comp {
            let tx = x as i64 + dom.0 as i64;
            let ty = y as i64 + dom.1 as i64;
            if tx >= 0
                && ty >= 0
                && (tx as usize) < dst_grid.width
                && (ty as usize) < dst_grid.height
                && dst_grid.usable[ty as usize * dst_grid.width + tx as usize]
            {
                inside.push(((x, y), (tx as usize, ty as usize)));
            }
        }
        if (inside.len() as f64) < MIN_INSIDE_FRACTION * comp.len() as f64 {
            continue;
        }
        let mean_back = inside
            .iter()
            .map(|&((sx, sy), (tx, ty))| unit_patch_distance(&src_grid, sx, sy, &dst_grid, tx, ty))
            .sum::<f64>()
            / inside.len() as f64;
        if mean_back > MATCH_BACK_TOL {
            continue;
        }

        let mean_dist =
            comp.iter().map(|&(x, y)| field.dist[y * w + x]).sum::<f64>() / comp.len() as f64;
        let mut region_mask = BinaryMask::new(src.width(), src.height(), false);
        stamp_footprint(&mut region_mask, comp.iter().copied(), patch);
        src_map.or_with(&region_mask);
        stamp_footprint(&mut dst_map, inside.iter().map(|&(_, t)| t), patch);
        regions.push(Region { mask: region_mask, offset: dom, mean_dist });
    }

    Ok(Elimination { regions, src_map, dst_map })
}

/// Within-image candidate elimination; the detection map is the union of the
/// surviving components and their translated images.
pub fn eliminate_candidates(
    img: &GrayImage,
    field: &OffsetField,
    candidates: &BinaryMask,
    cfg: &CopyMoveConfig,
) -> Result<CopyMoveResult> {
    let e = eliminate_general(img, img, None, field, candidates, cfg)?;
    let mut map = e.src_map;
    map.or_with(&e.dst_map);
    Ok(CopyMoveResult {
        is_fake: !e.regions.is_empty(),
        map,
        regions: e.regions,
        rotation_found: None,
    })
}
