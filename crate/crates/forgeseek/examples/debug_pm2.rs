use forgeseek::copymove::{patchmatch, PatchMatchConfig};
use forgeseek::raster::GrayImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

fn plant(img: &mut GrayImage, src: (usize, usize), dst: (usize, usize), size: usize) {
    let base = img.clone();
    for v in 0..size {
        for u in 0..size {
            img.set(dst.0 + u, dst.1 + v, base.get(src.0 + u, src.1 + v));
        }
    }
}

fn exact_nn(img: &GrayImage, patch: usize, min_offset: usize) -> Vec<f64> {
    let w = img.width() - patch + 1;
    let h = img.height() - patch + 1;
    let mut patches: Vec<Vec<f64>> = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let mut p = Vec::with_capacity(patch * patch);
            for v in 0..patch {
                for u in 0..patch {
                    p.push(img.get(x + u, y + v));
                }
            }
            let norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                for v in p.iter_mut() {
                    *v /= norm;
                }
            }
            patches.push(p);
        }
    }
    let min2 = (min_offset * min_offset) as i64;
    (0..w * h)
        .into_par_iter()
        .map(|i| {
            let (xi, yi) = ((i % w) as i64, (i / w) as i64);
            let mut best = f64::INFINITY;
            for j in 0..w * h {
                let (xj, yj) = ((j % w) as i64, (j / w) as i64);
                if (xi - xj).pow(2) + (yi - yj).pow(2) < min2 {
                    continue;
                }
                let d: f64 = patches[i]
                    .iter()
                    .zip(&patches[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                best = best.min(d);
            }
            best
        })
        .collect()
}

fn value_noise(w: usize, h: usize, seed: u64, octaves: &[(usize, f64)], pixel_amp: f64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = vec![128.0f64; w * h];
    for &(scale, amp) in octaves {
        let gw = w / scale + 2;
        let gh = h / scale + 2;
        let grid: Vec<f64> = (0..gw * gh).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for y in 0..h {
            for x in 0..w {
                let gx = x as f64 / scale as f64;
                let gy = y as f64 / scale as f64;
                let (x0, y0) = (gx as usize, gy as usize);
                let (fx, fy) = (gx - x0 as f64, gy - y0 as f64);
                let v = grid[y0 * gw + x0] * (1.0 - fx) * (1.0 - fy)
                    + grid[y0 * gw + x0 + 1] * fx * (1.0 - fy)
                    + grid[(y0 + 1) * gw + x0] * (1.0 - fx) * fy
                    + grid[(y0 + 1) * gw + x0 + 1] * fx * fy;
                acc[y * w + x] += amp * v;
            }
        }
    }
    for v in acc.iter_mut() {
        *v += rng.gen_range(-pixel_amp..pixel_amp.max(1e-9));
    }
    GrayImage::from_fn(w, h, |x, y| acc[y * w + x])
}

fn raw_noise(w: usize, h: usize, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    GrayImage::from_fn(w, h, |_, _| rng.gen_range(20.0..235.0))
}

fn blocky_noise(w: usize, h: usize, seed: u64, cell: usize) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gw = w / cell + 1;
    let gh = h / cell + 1;
    let grid: Vec<f64> = (0..gw * gh).map(|_| rng.gen_range(20.0..235.0)).collect();
    GrayImage::from_fn(w, h, |x, y| grid[(y / cell) * gw + x / cell])
}

fn normalized_patches(img: &GrayImage, patch: usize) -> (Vec<Vec<f64>>, usize, usize) {
    let w = img.width() - patch + 1;
    let h = img.height() - patch + 1;
    let mut patches = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let mut p = Vec::with_capacity(patch * patch);
            for v in 0..patch {
                for u in 0..patch {
                    p.push(img.get(x + u, y + v));
                }
            }
            let norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                for v in p.iter_mut() {
                    *v /= norm;
                }
            }
            patches.push(p);
        }
    }
    (patches, w, h)
}

/// Steepest-descent to the local minimum of the distance surface (test-side
/// diagnostic of how much of the PM gap is local vs global).
fn descend(
    patches: &[Vec<f64>],
    w: usize,
    h: usize,
    min_offset: usize,
    xi: usize,
    yi: usize,
    mut tx: i64,
    mut ty: i64,
) -> f64 {
    let dist = |tx: i64, ty: i64| -> f64 {
        if tx < 0 || ty < 0 || tx >= w as i64 || ty >= h as i64 {
            return f64::INFINITY;
        }
        let d2 = (tx - xi as i64).pow(2) + (ty - yi as i64).pow(2);
        if d2 < (min_offset * min_offset) as i64 {
            return f64::INFINITY;
        }
        patches[yi * w + xi]
            .iter()
            .zip(&patches[ty as usize * w + tx as usize])
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    };
    let mut best = dist(tx, ty);
    for _ in 0..100 {
        let mut improved = false;
        for (ox, oy) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)] {
            let d = dist(tx + ox, ty + oy);
            if d < best {
                best = d;
                tx += ox;
                ty += oy;
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
    best
}

fn measure(make: &dyn Fn(u64) -> GrayImage, label: &str) {
    let cfg = PatchMatchConfig::default();
    let mut worst: f64 = 0.0;
    let mut mean_ratio = 0.0;
    let mut mean_desc_ratio = 0.0;
    for seed in 0..10u64 {
        let mut img = make(seed);
        plant(&mut img, (8, 30), (48, 30), 32);
        let field = patchmatch(&img, &cfg).unwrap();
        let exact = exact_nn(&img, cfg.patch_size, cfg.min_offset);
        let pm_mean = field.dist.iter().sum::<f64>() / field.dist.len() as f64;
        let ex_mean = exact.iter().sum::<f64>() / exact.len() as f64;
        let (patches, w, h) = normalized_patches(&img, cfg.patch_size);
        let desc_sum: f64 = (0..w * h)
            .into_par_iter()
            .map(|i| {
                let (x, y) = (i % w, i / w);
                descend(
                    &patches,
                    w,
                    h,
                    cfg.min_offset,
                    x,
                    y,
                    x as i64 + field.dx[i] as i64,
                    y as i64 + field.dy[i] as i64,
                )
            })
            .sum();
        let desc_mean = desc_sum / (w * h) as f64;
        let r = pm_mean / ex_mean;
        worst = worst.max(r);
        mean_ratio += r / 10.0;
        mean_desc_ratio += desc_mean / ex_mean / 10.0;
    }
    println!("{label}: mean ratio {mean_ratio:.4}, worst {worst:.4}, descended ratio {mean_desc_ratio:.4}");
}

/// Wood-grain texture: 1-D multi-scale value noise swept along a direction,
/// plus small isotropic noise.
fn grain(w: usize, h: usize, seed: u64, angle_deg: f64, pixel_amp: f64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rad = angle_deg.to_radians();
    let (s, c) = rad.sin_cos();
    let maxt = (w as f64 + h as f64) * 2.0;
    let n = (2.0 * maxt) as usize + 4;
    // 1-D profile from summed octaves.
    let mut profile = vec![128.0f64; n];
    for (scale, amp) in [(24usize, 50.0f64), (12, 25.0), (6, 12.0), (3, 6.0)] {
        let gp = n / scale + 2;
        let grid: Vec<f64> = (0..gp).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for (i, p) in profile.iter_mut().enumerate() {
            let g = i as f64 / scale as f64;
            let i0 = g as usize;
            let f = g - i0 as f64;
            *p += amp * (grid[i0] * (1.0 - f) + grid[i0 + 1] * f);
        }
    }
    GrayImage::from_fn(w, h, |x, y| {
        let t = c * x as f64 + s * y as f64 + maxt;
        let i0 = t as usize;
        let f = t - i0 as f64;
        let v = profile[i0] * (1.0 - f) + profile[i0 + 1] * f;
        v + rng.gen_range(-pixel_amp..pixel_amp.max(1e-9))
    })
}

fn main() {
    measure(&|s| raw_noise(96, 96, 7000 + s), "raw iid noise");
    measure(&|s| grain(96, 96, 7100 + s, 25.0, 0.0), "grain 25deg, no noise");
    measure(&|s| grain(96, 96, 7200 + s, 25.0, 1.5), "grain 25deg, noise 1.5");
    measure(&|s| grain(96, 96, 7300 + s, 10.0 * s as f64 % 180.0, 1.0), "grain varied angles, noise 1");
    measure(
        &|s| value_noise(96, 96, 9000 + s, &[(16, 45.0), (8, 20.0), (4, 10.0), (2, 6.0)], 3.0),
        "multi-scale + pixel noise",
    );
    let _ = blocky_noise;
}
