//! Grayscale rasters, binary masks, image I/O and rotation.
//!
//! Both detectors operate on a real-valued luminance raster. Masks are used
//! for ground truth and detection maps, and double as validity maps for
//! rotated canvases (a rotated frame does not fill its bounding box).

use std::path::Path;

use crate::error::{Error, Result};

/// Row-major real-valued luminance raster with samples in `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    /// Builds an image from row-major samples.
    ///
    /// Rejects empty dimensions, length mismatches and samples outside
    /// `[0, 255]` (or non-finite ones).
    pub fn from_data(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::DegenerateInput(format!(
                "image dimensions {width}x{height} must be positive"
            )));
        }
        if data.len() != width * height {
            return Err(Error::DegenerateInput(format!(
                "data length {} does not match {width}x{height}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 255.0) {
            return Err(Error::DegenerateInput(format!(
                "luminance sample {bad} out of [0, 255]"
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y).clamp(0.0, 255.0));
            }
        }
        Self { width, height, data }
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Self {
        Self::from_fn(width, height, |_, _| value)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        debug_assert!(x < self.width && y < self.height);
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        debug_assert!(x < self.width && y < self.height);
        self.data[y * self.width + x] = value.clamp(0.0, 255.0);
    }

    /// Row `y` as a contiguous slice.
    #[inline]
    pub fn row(&self, y: usize) -> &[f64] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    /// Bilinear sample at a continuous position; `None` outside the frame.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> Option<f64> {
        if !(0.0..=(self.width - 1) as f64).contains(&x)
            || !(0.0..=(self.height - 1) as f64).contains(&y)
        {
            return None;
        }
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bot = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        Some(top * (1.0 - fy) + bot * fy)
    }

    /// Copies the axis-aligned window at `(x0, y0)` with size `w`x`h`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<GrayImage> {
        if x0 + w > self.width || y0 + h > self.height {
            return Err(Error::DegenerateInput(format!(
                "crop {w}x{h}+{x0}+{y0} exceeds {}x{}",
                self.width, self.height
            )));
        }
        let mut data = Vec::with_capacity(w * h);
        for y in y0..y0 + h {
            data.extend_from_slice(&self.data[y * self.width + x0..y * self.width + x0 + w]);
        }
        GrayImage::from_data(w, h, data)
    }
}

/// Row-major boolean raster; `true` marks a forged/duplicated/valid pixel
/// depending on context.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, value: bool) -> Self {
        Self { width, height, data: vec![value; width * height] }
    }

    pub fn from_data(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DegenerateInput(format!(
                "mask length {} does not match {width}x{height}",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        debug_assert!(x < self.width && y < self.height);
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        debug_assert!(x < self.width && y < self.height);
        self.data[y * self.width + x] = value;
    }

    /// Number of `true` pixels.
    pub fn area(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn any(&self) -> bool {
        self.data.iter().any(|&v| v)
    }

    /// In-place union with another mask of equal dimensions.
    pub fn or_with(&mut self, other: &BinaryMask) {
        assert_eq!((self.width, self.height), (other.width, other.height));
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a |= b;
        }
    }

    /// Intersection-over-union against another mask of equal dimensions.
    pub fn jaccard(&self, other: &BinaryMask) -> f64 {
        assert_eq!((self.width, self.height), (other.width, other.height));
        let mut inter = 0usize;
        let mut union = 0usize;
        for (a, b) in self.data.iter().zip(&other.data) {
            if *a && *b {
                inter += 1;
            }
            if *a || *b {
                union += 1;
            }
        }
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }
}

/// ITU-R BT.601 luminance from 8-bit-range channel values.
pub fn to_grayscale(r: f64, g: f64, b: f64) -> f64 {
    0.299 * r + 0.587 * g + 0.114 * b
}

fn map_image_error(path: &Path, err: image::ImageError) -> Error {
    match err {
        image::ImageError::IoError(io) if io.kind() == std::io::ErrorKind::NotFound => {
            Error::FileNotFound(path.to_path_buf())
        }
        image::ImageError::IoError(io) => Error::Io(io),
        image::ImageError::Unsupported(e) => Error::UnsupportedFormat(e.to_string()),
        other => Error::CorruptStream(other.to_string()),
    }
}

/// Decodes a PNG or JPEG file into a grayscale raster.
///
/// Color sources are converted with [`to_grayscale`]; 16-bit samples are
/// scaled into the 8-bit range.
pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let dynimg = image::ImageReader::open(path)
        .map_err(|e| map_image_error(path, image::ImageError::IoError(e)))?
        .decode()
        .map_err(|e| map_image_error(path, e))?;
    Ok(dynamic_to_gray(dynimg))
}

fn dynamic_to_gray(img: image::DynamicImage) -> GrayImage {
    use image::DynamicImage::*;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<f64> = match img {
        ImageLuma8(buf) => buf.into_raw().into_iter().map(f64::from).collect(),
        ImageLumaA8(buf) => buf.pixels().map(|p| f64::from(p.0[0])).collect(),
        ImageLuma16(buf) => buf.into_raw().into_iter().map(|v| f64::from(v) / 257.0).collect(),
        ImageLumaA16(buf) => buf.pixels().map(|p| f64::from(p.0[0]) / 257.0).collect(),
        ImageRgb8(buf) => buf
            .pixels()
            .map(|p| to_grayscale(f64::from(p.0[0]), f64::from(p.0[1]), f64::from(p.0[2])))
            .collect(),
        ImageRgba8(buf) => buf
            .pixels()
            .map(|p| to_grayscale(f64::from(p.0[0]), f64::from(p.0[1]), f64::from(p.0[2])))
            .collect(),
        other => {
            let buf = other.to_rgb16();
            buf.pixels()
                .map(|p| {
                    to_grayscale(
                        f64::from(p.0[0]) / 257.0,
                        f64::from(p.0[1]) / 257.0,
                        f64::from(p.0[2]) / 257.0,
                    )
                })
                .collect()
        }
    };
    let data = data.into_iter().map(|v| v.clamp(0.0, 255.0)).collect();
    GrayImage { width: w, height: h, data }
}

/// Writes the raster as an 8-bit grayscale PNG (samples rounded).
pub fn write_image(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let buf = image::GrayImage::from_fn(img.width as u32, img.height as u32, |x, y| {
        image::Luma([img.get(x as usize, y as usize).round().clamp(0.0, 255.0) as u8])
    });
    buf.save(path.as_ref()).map_err(|e| map_image_error(path.as_ref(), e))
}

/// Reads a mask PNG; any pixel with luminance above 127 is marked.
pub fn read_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let img = load_image(path)?;
    let data = img.data.iter().map(|&v| v > 127.0).collect();
    Ok(BinaryMask { width: img.width, height: img.height, data })
}

/// Writes a mask as an 8-bit grayscale PNG with values 0 and 255.
pub fn write_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    let buf = image::GrayImage::from_fn(mask.width as u32, mask.height as u32, |x, y| {
        image::Luma([if mask.get(x as usize, y as usize) { 255u8 } else { 0u8 }])
    });
    buf.save(path.as_ref()).map_err(|e| map_image_error(path.as_ref(), e))
}

/// Output canvas for rotating a `w`x`h` frame by `theta` degrees.
///
/// Quarter turns keep exact (swapped) dimensions. Other angles use the
/// rotated bounding box, padded so the canvas parity matches the source and
/// pixel grids stay aligned under rotate/unrotate round trips.
pub fn rotated_dims(width: usize, height: usize, theta: f64) -> (usize, usize) {
    let t = theta.rem_euclid(360.0);
    if t == 0.0 || t == 180.0 {
        return (width, height);
    }
    if t == 90.0 || t == 270.0 {
        return (height, width);
    }
    let rad = t.to_radians();
    let (s, c) = (rad.sin().abs(), rad.cos().abs());
    let mut w = (width as f64 * c + height as f64 * s).ceil() as usize;
    let mut h = (width as f64 * s + height as f64 * c).ceil() as usize;
    if (w + width) % 2 == 1 {
        w += 1;
    }
    if (h + height) % 2 == 1 {
        h += 1;
    }
    (w, h)
}

/// Maps a source-pixel position into the rotated canvas of [`rotate_image`].
pub fn rotate_point_forward(
    x: f64,
    y: f64,
    theta: f64,
    src_dims: (usize, usize),
    dst_dims: (usize, usize),
) -> (f64, f64) {
    let rad = theta.rem_euclid(360.0).to_radians();
    let (s, c) = rad.sin_cos();
    let cx_in = (src_dims.0 as f64 - 1.0) / 2.0;
    let cy_in = (src_dims.1 as f64 - 1.0) / 2.0;
    let cx_out = (dst_dims.0 as f64 - 1.0) / 2.0;
    let cy_out = (dst_dims.1 as f64 - 1.0) / 2.0;
    let dx = x - cx_in;
    let dy = y - cy_in;
    (c * dx - s * dy + cx_out, s * dx + c * dy + cy_out)
}

/// Rotates the image about its center by `theta` degrees.
///
/// Returns the rotated raster on an enlarged canvas together with a validity
/// mask: pixels outside the rotated frame are zero-filled and marked invalid
/// so they never enter patch matching. Multiples of 90 degrees are exact
/// sample permutations; other angles interpolate bilinearly.
pub fn rotate_image(img: &GrayImage, theta: f64) -> (GrayImage, BinaryMask) {
    let t = theta.rem_euclid(360.0);
    let (w, h) = (img.width, img.height);
    if t == 0.0 {
        return (img.clone(), BinaryMask::new(w, h, true));
    }
    if t == 90.0 {
        let out = GrayImage::from_fn(h, w, |x, y| img.get(y, h - 1 - x));
        return (out, BinaryMask::new(h, w, true));
    }
    if t == 180.0 {
        let out = GrayImage::from_fn(w, h, |x, y| img.get(w - 1 - x, h - 1 - y));
        return (out, BinaryMask::new(w, h, true));
    }
    if t == 270.0 {
        let out = GrayImage::from_fn(h, w, |x, y| img.get(w - 1 - y, x));
        return (out, BinaryMask::new(h, w, true));
    }

    let (ow, oh) = rotated_dims(w, h, t);
    let rad = t.to_radians();
    let (s, c) = rad.sin_cos();
    let cx_in = (w as f64 - 1.0) / 2.0;
    let cy_in = (h as f64 - 1.0) / 2.0;
    let cx_out = (ow as f64 - 1.0) / 2.0;
    let cy_out = (oh as f64 - 1.0) / 2.0;

    let mut out = GrayImage { width: ow, height: oh, data: vec![0.0; ow * oh] };
    let mut valid = BinaryMask::new(ow, oh, false);
    for yo in 0..oh {
        for xo in 0..ow {
            // Inverse rotation: where does this output pixel sample from?
            let dx = xo as f64 - cx_out;
            let dy = yo as f64 - cy_out;
            let xi = c * dx + s * dy + cx_in;
            let yi = -s * dx + c * dy + cy_in;
            if let Some(v) = img.sample_bilinear(xi, yi) {
                out.data[yo * ow + xo] = v;
                valid.set(xo, yo, true);
            }
        }
    }
    (out, valid)
}

/// Re-expresses a detection mask computed on a rotated canvas in the
/// coordinates of the unrotated source image.
pub fn mask_from_rotated(
    rot_mask: &BinaryMask,
    theta: f64,
    src_width: usize,
    src_height: usize,
) -> BinaryMask {
    let mut out = BinaryMask::new(src_width, src_height, false);
    let dst_dims = (rot_mask.width, rot_mask.height);
    for y in 0..src_height {
        for x in 0..src_width {
            let (rx, ry) =
                rotate_point_forward(x as f64, y as f64, theta, (src_width, src_height), dst_dims);
            let rxi = rx.round();
            let ryi = ry.round();
            if rxi >= 0.0
                && ryi >= 0.0
                && (rxi as usize) < rot_mask.width
                && (ryi as usize) < rot_mask.height
                && rot_mask.get(rxi as usize, ryi as usize)
            {
                out.set(x, y, true);
            }
        }
    }
    out
}
