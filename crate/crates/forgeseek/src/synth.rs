//! Deterministic synthetic forgery corpus generator.
//!
//! Emits smoothed random textures as pristine images, copy-move forgeries
//! (translated, optionally rotated blocks) and splice forgeries (a block
//! pasted from a donor image with a different JPEG history, so residual
//! statistics differ between regions), each with a ground-truth mask and a
//! manifest line. Fully reproducible from the corpus seed.

use std::io::Cursor;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::Label;
use crate::error::{Error, Result};
use crate::raster::{write_image, write_mask, BinaryMask, GrayImage};

/// Parameters of a generated corpus.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub n_pristine: usize,
    pub n_copymove: usize,
    pub n_splice: usize,
    /// Images are square with this side length.
    pub image_size: usize,
    /// Inclusive range of copied/spliced block side lengths.
    pub block_size_range: (usize, usize),
    /// Probability that a copy-move block is also rotated (by a random
    /// multiple of 15 degrees, up to 45).
    pub rotation_prob: f64,
    /// JPEG qualities for (host/pristine, pasted donor) in splices.
    pub jpeg_quality_pair: (u8, u8),
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            n_pristine: 40,
            n_copymove: 30,
            n_splice: 30,
            image_size: 128,
            block_size_range: (48, 56),
            rotation_prob: 0.3,
            jpeg_quality_pair: (95, 60),
            seed: 7,
        }
    }
}

impl CorpusSpec {
    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.block_size_range;
        if lo < 8 || lo > hi {
            return Err(Error::InvalidConfig(format!("bad block size range {lo}..={hi}")));
        }
        // Rotated copies sample the source block's circumscribed square.
        if hi + 2 * rotation_margin(hi) + 1 >= self.image_size {
            return Err(Error::InvalidConfig(format!(
                "blocks up to {hi} px do not fit a {0}x{0} image with rotation margin",
                self.image_size
            )));
        }
        // The displaced copy must be reachable: the farthest corner-to-corner
        // placement has to beat the 1.25-block displacement floor.
        let reach = (self.image_size - hi - rotation_margin(hi)) as i64;
        if 2 * reach * reach <= (hi as i64 * 5 / 4).pow(2) {
            return Err(Error::InvalidConfig(format!(
                "image size {} cannot hold two {hi} px blocks displaced by 1.25 blocks",
                self.image_size
            )));
        }
        if !(0.0..=1.0).contains(&self.rotation_prob) {
            return Err(Error::InvalidConfig("rotation_prob outside [0, 1]".into()));
        }
        Ok(())
    }
}

/// One manifest line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub id: String,
    pub class: Label,
    pub kind: String,
    pub params: String,
}

/// Ordered manifest of a generated corpus.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path.as_ref())?;
        w.write_record(["id", "class", "kind", "params"])?;
        for e in &self.entries {
            w.write_record([e.id.as_str(), e.class.as_str(), e.kind.as_str(), e.params.as_str()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Manifest> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::FileNotFound(path.to_path_buf()));
        }
        let mut r = csv::Reader::from_path(path)?;
        let mut entries = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            if rec.len() < 4 {
                return Err(Error::MalformedRecord {
                    file: path.display().to_string(),
                    detail: format!("expected 4 fields, got {}", rec.len()),
                });
            }
            entries.push(ManifestEntry {
                id: rec[0].to_string(),
                class: Label::parse(&rec[1]).map_err(|_| Error::MalformedRecord {
                    file: path.display().to_string(),
                    detail: format!("bad class {:?}", &rec[1]),
                })?,
                kind: rec[2].to_string(),
                params: rec[3].to_string(),
            });
        }
        Ok(Manifest { entries })
    }

    /// Path of the image for an entry, relative to the corpus root.
    pub fn image_rel_path(entry: &ManifestEntry) -> String {
        match entry.class {
            Label::Pristine => format!("pristine/{}.png", entry.id),
            Label::Fake => format!("fake/{}.png", entry.id),
        }
    }
}

/// Extra source margin needed to bilinearly sample a rotated block:
/// (B/2)(sqrt(2) - 1) rounded up, plus interpolation slack.
fn rotation_margin(block: usize) -> usize {
    block * 21 / 100 + 3
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

fn derive_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream))
}

/// Smoothed random texture: bilinearly upsampled value noise at several
/// scales plus a small per-pixel component, centered around mid-gray.
pub fn smooth_texture(width: usize, height: usize, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = vec![128.0f64; width * height];
    for (scale, amp) in [(16usize, 52.0f64), (8, 26.0), (4, 13.0), (2, 6.0)] {
        let gw = width / scale + 2;
        let gh = height / scale + 2;
        let grid: Vec<f64> = (0..gw * gh).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for y in 0..height {
            for x in 0..width {
                let gx = x as f64 / scale as f64;
                let gy = y as f64 / scale as f64;
                let x0 = gx as usize;
                let y0 = gy as usize;
                let fx = gx - x0 as f64;
                let fy = gy - y0 as f64;
                let v = grid[y0 * gw + x0] * (1.0 - fx) * (1.0 - fy)
                    + grid[y0 * gw + x0 + 1] * fx * (1.0 - fy)
                    + grid[(y0 + 1) * gw + x0] * (1.0 - fx) * fy
                    + grid[(y0 + 1) * gw + x0 + 1] * fx * fy;
                acc[y * width + x] += amp * v;
            }
        }
    }
    for v in acc.iter_mut() {
        *v += rng.gen_range(-2.5..2.5);
    }
    GrayImage::from_fn(width, height, |x, y| acc[y * width + x])
}

/// Encodes to JPEG at the given quality and decodes back, imprinting the
/// corresponding compression history on the samples.
pub fn jpeg_roundtrip(img: &GrayImage, quality: u8) -> GrayImage {
    let w = img.width() as u32;
    let h = img.height() as u32;
    let buf = image::GrayImage::from_fn(w, h, |x, y| {
        image::Luma([img.get(x as usize, y as usize).round().clamp(0.0, 255.0) as u8])
    });
    let mut bytes = Vec::new();
    let enc = image::codecs::jpeg::JpegEncoder::new_with_quality(Cursor::new(&mut bytes), quality);
    buf.write_with_encoder(enc).expect("in-memory jpeg encode");
    let back = image::load_from_memory(&bytes).expect("decode own jpeg").to_luma8();
    GrayImage::from_fn(back.width() as usize, back.height() as usize, |x, y| {
        f64::from(back.get_pixel(x as u32, y as u32).0[0])
    })
}

/// A generated corpus item, kept in memory for tests and pipelines.
#[derive(Debug, Clone)]
pub struct GeneratedItem {
    pub id: String,
    pub class: Label,
    pub kind: String,
    /// The emitted image.
    pub image: GrayImage,
    /// The pristine image the forgery was applied to (equals `image` for
    /// pristine items).
    pub base: GrayImage,
    /// Ground truth; `None` for pristine items.
    pub mask: Option<BinaryMask>,
    pub params: String,
}

fn gen_pristine(spec: &CorpusSpec, ordinal: usize) -> GeneratedItem {
    let seed = derive_seed(spec.seed, ordinal as u64);
    let tex = smooth_texture(spec.image_size, spec.image_size, seed);
    let image = jpeg_roundtrip(&tex, spec.jpeg_quality_pair.0);
    GeneratedItem {
        id: format!("pristine_{ordinal:04}"),
        class: Label::Pristine,
        kind: "texture".into(),
        base: image.clone(),
        image,
        mask: None,
        params: format!("seed={seed};q={}", spec.jpeg_quality_pair.0),
    }
}

/// Rasterized pre-image of a block rotated by `angle` about `center`.
fn rotated_block_mask(
    mask: &mut BinaryMask,
    center: (f64, f64),
    block: usize,
    angle_deg: f64,
) {
    let rad = angle_deg.to_radians();
    let (s, c) = rad.sin_cos();
    let half = (block as f64 - 1.0) / 2.0;
    let reach = (block as f64) * std::f64::consts::SQRT_2 / 2.0 + 1.0;
    let x_lo = ((center.0 - reach).floor().max(0.0)) as usize;
    let x_hi = ((center.0 + reach).ceil() as usize).min(mask.width() - 1);
    let y_lo = ((center.1 - reach).floor().max(0.0)) as usize;
    let y_hi = ((center.1 + reach).ceil() as usize).min(mask.height() - 1);
    for py in y_lo..=y_hi {
        for px in x_lo..=x_hi {
            let dx = px as f64 - center.0;
            let dy = py as f64 - center.1;
            // Forward-rotate into block coordinates.
            let u = c * dx - s * dy + half;
            let v = s * dx + c * dy + half;
            if u >= -0.5 && u < block as f64 - 0.5 && v >= -0.5 && v < block as f64 - 0.5 {
                mask.set(px, py, true);
            }
        }
    }
}

fn gen_copymove(spec: &CorpusSpec, ordinal: usize) -> GeneratedItem {
    let seed = derive_seed(spec.seed, 1_000_000 + ordinal as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spec.image_size;
    // Same processing history as pristine items: the duplication happens
    // inside the decoded image, so global residual statistics barely move
    // and only the region matcher can see the forgery.
    let base = jpeg_roundtrip(&smooth_texture(n, n, derive_seed(seed, 1)), spec.jpeg_quality_pair.0);

    let (lo, hi) = spec.block_size_range;
    let block = rng.gen_range(lo..=hi);
    let rotate = rng.gen_bool(spec.rotation_prob);
    let angle = if rotate { 15.0 * f64::from(rng.gen_range(1u8..=3)) } else { 0.0 };

    // Rotated sampling reads from a sqrt(2) neighborhood of the source.
    let src_margin = if rotate { rotation_margin(block) } else { 0 };
    // Displace by at least 1.25 blocks so source and copy barely overlap;
    // an overlap rewrites part of the source and shrinks the clean pair.
    let min_disp = block * 5 / 4;
    let (src_x, src_y, dst_x, dst_y) = loop {
        let sx = rng.gen_range(src_margin..n - block - src_margin);
        let sy = rng.gen_range(src_margin..n - block - src_margin);
        let dx = rng.gen_range(0..n - block);
        let dy = rng.gen_range(0..n - block);
        let dist2 = (dx as i64 - sx as i64).pow(2) + (dy as i64 - sy as i64).pow(2);
        if dist2 >= (min_disp as i64).pow(2) {
            break (sx, sy, dx, dy);
        }
    };

    let mut image = base.clone();
    let mut mask = BinaryMask::new(n, n, false);
    let half = (block as f64 - 1.0) / 2.0;
    let src_center = (src_x as f64 + half, src_y as f64 + half);
    if rotate {
        let rad = angle.to_radians();
        let (s, c) = rad.sin_cos();
        for v in 0..block {
            for u in 0..block {
                let du = u as f64 - half;
                let dv = v as f64 - half;
                // Inverse-rotate target offsets into source coordinates.
                let sx = c * du + s * dv + src_center.0;
                let sy = -s * du + c * dv + src_center.1;
                let val = base.sample_bilinear(sx, sy).expect("source margin covers rotation");
                image.set(dst_x + u, dst_y + v, val);
                mask.set(dst_x + u, dst_y + v, true);
            }
        }
        rotated_block_mask(&mut mask, src_center, block, angle);
    } else {
        for v in 0..block {
            for u in 0..block {
                image.set(dst_x + u, dst_y + v, base.get(src_x + u, src_y + v));
                mask.set(dst_x + u, dst_y + v, true);
                mask.set(src_x + u, src_y + v, true);
            }
        }
    }

    GeneratedItem {
        id: format!("copymove_{ordinal:04}"),
        class: Label::Fake,
        kind: "copymove".into(),
        image,
        base,
        mask: Some(mask),
        params: format!(
            "seed={seed};block={block};src={src_x},{src_y};dst={dst_x},{dst_y};angle={angle};q={}",
            spec.jpeg_quality_pair.0
        ),
    }
}

fn gen_splice(spec: &CorpusSpec, ordinal: usize) -> GeneratedItem {
    let seed = derive_seed(spec.seed, 2_000_000 + ordinal as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spec.image_size;
    let (q_host, q_paste) = spec.jpeg_quality_pair;

    let host = jpeg_roundtrip(&smooth_texture(n, n, derive_seed(seed, 1)), q_host);
    let donor = jpeg_roundtrip(&smooth_texture(n, n, derive_seed(seed, 2)), q_paste);

    let (lo, hi) = spec.block_size_range;
    let block = rng.gen_range(lo..=hi);
    let src_x = rng.gen_range(0..n - block);
    let src_y = rng.gen_range(0..n - block);
    let dst_x = rng.gen_range(0..n - block);
    let dst_y = rng.gen_range(0..n - block);

    let mut image = host.clone();
    let mut mask = BinaryMask::new(n, n, false);
    for v in 0..block {
        for u in 0..block {
            image.set(dst_x + u, dst_y + v, donor.get(src_x + u, src_y + v));
            mask.set(dst_x + u, dst_y + v, true);
        }
    }

    GeneratedItem {
        id: format!("splice_{ordinal:04}"),
        class: Label::Fake,
        kind: "splice".into(),
        image,
        base: host,
        mask: Some(mask),
        params: format!("seed={seed};block={block};dst={dst_x},{dst_y};q={q_host}/{q_paste}"),
    }
}

/// Generates every item of the corpus in memory, in manifest order.
pub fn generate_items(spec: &CorpusSpec) -> Result<Vec<GeneratedItem>> {
    spec.validate()?;
    let jobs: Vec<(usize, u8)> = (0..spec.n_pristine)
        .map(|i| (i, 0u8))
        .chain((0..spec.n_copymove).map(|i| (i, 1u8)))
        .chain((0..spec.n_splice).map(|i| (i, 2u8)))
        .collect();
    Ok(jobs
        .into_par_iter()
        .map(|(i, kind)| match kind {
            0 => gen_pristine(spec, i),
            1 => gen_copymove(spec, i),
            _ => gen_splice(spec, i),
        })
        .collect())
}

/// Generates the corpus under `out_dir`: `pristine/` and `fake/` images,
/// `masks/` ground truth and `manifest.csv`.
pub fn generate_corpus(spec: &CorpusSpec, out_dir: impl AsRef<Path>) -> Result<Manifest> {
    let out_dir = out_dir.as_ref();
    let items = generate_items(spec)?;
    std::fs::create_dir_all(out_dir)?;
    if !items.is_empty() {
        std::fs::create_dir_all(out_dir.join("pristine"))?;
        std::fs::create_dir_all(out_dir.join("fake"))?;
        std::fs::create_dir_all(out_dir.join("masks"))?;
    }
    let manifest = Manifest {
        entries: items
            .iter()
            .map(|it| ManifestEntry {
                id: it.id.clone(),
                class: it.class,
                kind: it.kind.clone(),
                params: it.params.clone(),
            })
            .collect(),
    };
    items.par_iter().try_for_each(|it| -> Result<()> {
        let sub = match it.class {
            Label::Pristine => "pristine",
            Label::Fake => "fake",
        };
        write_image(&it.image, out_dir.join(sub).join(format!("{}.png", it.id)))?;
        if let Some(mask) = &it.mask {
            write_mask(mask, out_dir.join("masks").join(format!("{}.png", it.id)))?;
        }
        Ok(())
    })?;
    manifest.write(out_dir.join("manifest.csv"))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_spec(seed: u64) -> CorpusSpec {
        CorpusSpec {
            n_pristine: 2,
            n_copymove: 3,
            n_splice: 2,
            image_size: 128,
            block_size_range: (48, 56),
            rotation_prob: 0.5,
            jpeg_quality_pair: (95, 60),
            seed,
        }
    }

    #[test]
    fn empty_spec_empty_manifest() {
        let spec = CorpusSpec { n_pristine: 0, n_copymove: 0, n_splice: 0, ..tiny_spec(1) };
        let dir = tempfile::tempdir().unwrap();
        let manifest = generate_corpus(&spec, dir.path()).unwrap();
        assert!(manifest.entries.is_empty());
        assert!(!dir.path().join("pristine").exists());
        assert!(dir.path().join("manifest.csv").exists());
    }

    #[test]
    fn same_seed_byte_identical() {
        let spec = tiny_spec(42);
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let m1 = generate_corpus(&spec, d1.path()).unwrap();
        let m2 = generate_corpus(&spec, d2.path()).unwrap();
        assert_eq!(m1, m2);
        for e in &m1.entries {
            let rel = Manifest::image_rel_path(e);
            let b1 = std::fs::read(d1.path().join(&rel)).unwrap();
            let b2 = std::fs::read(d2.path().join(&rel)).unwrap();
            assert_eq!(b1, b2, "{rel} differs between runs");
        }
        let c1 = std::fs::read(d1.path().join("manifest.csv")).unwrap();
        let c2 = std::fs::read(d2.path().join("manifest.csv")).unwrap();
        assert_eq!(c1, c2);
    }

    #[test]
    fn manifest_counts_partition_corpus() {
        let spec = tiny_spec(3);
        let items = generate_items(&spec).unwrap();
        assert_eq!(items.len(), 7);
        let pristine = items.iter().filter(|i| i.class == Label::Pristine).count();
        let copymove = items.iter().filter(|i| i.kind == "copymove").count();
        let splice = items.iter().filter(|i| i.kind == "splice").count();
        assert_eq!((pristine, copymove, splice), (2, 3, 2));
        for it in &items {
            assert_eq!(it.class == Label::Fake, it.mask.is_some());
        }
    }

    #[test]
    fn forgery_differs_only_inside_mask() {
        let items = generate_items(&tiny_spec(11)).unwrap();
        for it in items.iter().filter(|i| i.class == Label::Fake) {
            let mask = it.mask.as_ref().unwrap();
            for y in 0..it.image.height() {
                for x in 0..it.image.width() {
                    if !mask.get(x, y) {
                        assert_eq!(
                            it.image.get(x, y),
                            it.base.get(x, y),
                            "{} differs outside mask at {x},{y}",
                            it.id
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn copymove_mask_area_is_two_blocks_minus_overlap() {
        let mut spec = tiny_spec(19);
        spec.n_copymove = 8;
        spec.rotation_prob = 0.0;
        let items = generate_items(&spec).unwrap();
        for it in items.iter().filter(|i| i.kind == "copymove") {
            let params: std::collections::HashMap<&str, &str> =
                it.params.split(';').filter_map(|kv| kv.split_once('=')).collect();
            let block: i64 = params["block"].parse().unwrap();
            let parse_xy = |s: &str| -> (i64, i64) {
                let (a, b) = s.split_once(',').unwrap();
                (a.parse().unwrap(), b.parse().unwrap())
            };
            let (sx, sy) = parse_xy(params["src"]);
            let (dx, dy) = parse_xy(params["dst"]);
            let overlap = (block - (sx - dx).abs()).max(0) * (block - (sy - dy).abs()).max(0);
            let expected = 2 * block * block - overlap;
            assert_eq!(it.mask.as_ref().unwrap().area() as i64, expected, "{}", it.id);
        }
    }

    #[test]
    fn rotated_copymove_mask_matches_rasterization_oracle() {
        let mut spec = tiny_spec(23);
        spec.n_copymove = 6;
        spec.rotation_prob = 1.0;
        let items = generate_items(&spec).unwrap();
        for it in items.iter().filter(|i| i.kind == "copymove") {
            let params: std::collections::HashMap<&str, &str> =
                it.params.split(';').filter_map(|kv| kv.split_once('=')).collect();
            let block: usize = params["block"].parse().unwrap();
            let angle: f64 = params["angle"].parse().unwrap();
            let parse_xy = |s: &str| -> (usize, usize) {
                let (a, b) = s.split_once(',').unwrap();
                (a.parse().unwrap(), b.parse().unwrap())
            };
            let (sx, sy) = parse_xy(params["src"]);
            let (dx, dy) = parse_xy(params["dst"]);

            // Independent whole-frame rasterization of target square plus
            // rotated source pre-image.
            let n = spec.image_size;
            let half = (block as f64 - 1.0) / 2.0;
            let (s, c) = angle.to_radians().sin_cos();
            let mut oracle = BinaryMask::new(n, n, false);
            for py in 0..n {
                for px in 0..n {
                    if (dx..dx + block).contains(&px) && (dy..dy + block).contains(&py) {
                        oracle.set(px, py, true);
                        continue;
                    }
                    let ox = px as f64 - (sx as f64 + half);
                    let oy = py as f64 - (sy as f64 + half);
                    let u = c * ox - s * oy + half;
                    let v = s * ox + c * oy + half;
                    if u >= -0.5 && u < block as f64 - 0.5 && v >= -0.5 && v < block as f64 - 0.5 {
                        oracle.set(px, py, true);
                    }
                }
            }
            let mask = it.mask.as_ref().unwrap();
            assert_eq!(mask, &oracle, "{}", it.id);
            // Source and target each contribute close to one block area.
            let area = mask.area() as f64;
            let b = block as f64;
            assert!(area <= 2.0 * b * b + 6.0 * b, "{}: area {area}", it.id);
            assert!(area >= b * b, "{}: area {area}", it.id);
        }
    }

    #[test]
    fn textures_have_local_variance() {
        let tex = smooth_texture(96, 96, 5);
        let mut min_var = f64::INFINITY;
        for y in (0..90).step_by(7) {
            for x in (0..90).step_by(7) {
                let mut mean = 0.0;
                for v in 0..7 {
                    for u in 0..7 {
                        mean += tex.get(x + u, y + v);
                    }
                }
                mean /= 49.0;
                let mut var = 0.0;
                for v in 0..7 {
                    for u in 0..7 {
                        var += (tex.get(x + u, y + v) - mean).powi(2);
                    }
                }
                min_var = min_var.min(var / 49.0);
            }
        }
        assert!(min_var > 1.0, "flattest patch variance {min_var}");
    }
}
