use std::time::Instant;

use forgeseek::copymove::{patchmatch, PatchMatchConfig};
use forgeseek::raster::GrayImage;
use forgeseek::synth::smooth_texture;
use rayon::prelude::*;

fn plant(img: &mut GrayImage, src: (usize, usize), dst: (usize, usize), size: usize) {
    let base = img.clone();
    for v in 0..size {
        for u in 0..size {
            img.set(dst.0 + u, dst.1 + v, base.get(src.0 + u, src.1 + v));
        }
    }
}

/// Brute-force exact NN over unit-normalized patches with the same
/// min-offset exclusion.
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
                let d2 = (xi - xj).pow(2) + (yi - yj).pow(2);
                if d2 < min2 {
                    continue;
                }
                let d: f64 = patches[i]
                    .iter()
                    .zip(&patches[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                if d < best {
                    best = d;
                }
            }
            best
        })
        .collect()
}

/// Multi-scale value noise without a per-pixel component.
fn coherent_texture(w: usize, h: usize, seed: u64, octaves: &[(usize, f64)]) -> GrayImage {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut acc = vec![128.0f64; w * h];
    for &(scale, amp) in octaves {
        let gw = w / scale + 2;
        let gh = h / scale + 2;
        let grid: Vec<f64> = (0..gw * gh).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for y in 0..h {
            for x in 0..w {
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
                acc[y * w + x] += amp * v;
            }
        }
    }
    GrayImage::from_fn(w, h, |x, y| acc[y * w + x])
}

fn main() {
    let cfg = PatchMatchConfig::default();

    for octaves in [
        vec![(16usize, 40.0f64), (8, 10.0)],
        vec![(16, 45.0), (8, 14.0), (4, 5.0)],
        vec![(12, 40.0), (6, 12.0)],
    ] {
        let mut worst = 0.0f64;
        for seed in 0..10u64 {
            let mut img = coherent_texture(96, 96, 100 + seed, &octaves);
            plant(&mut img, (8, 30), (48, 30), 32);
            let field = patchmatch(&img, &cfg).unwrap();
            let exact = exact_nn(&img, cfg.patch_size, cfg.min_offset);
            let pm_mean = field.dist.iter().sum::<f64>() / field.dist.len() as f64;
            let ex_mean = exact.iter().sum::<f64>() / exact.len() as f64;
            worst = worst.max(pm_mean / ex_mean);
        }
        println!("octaves {octaves:?}: worst ratio {worst:.4}");
    }

    // Ten 96x96 textures with planted 32x32 duplicates.
    let mut worst_hit = 1.0f64;
    let mut ratios = Vec::new();
    for seed in 0..10u64 {
        let mut img = smooth_texture(96, 96, 100 + seed);
        plant(&mut img, (8, 30), (48, 30), 32);
        let field = patchmatch(&img, &cfg).unwrap();
        let exact = exact_nn(&img, cfg.patch_size, cfg.min_offset);

        let mut hits = 0;
        let mut total = 0;
        for y in 30..30 + 32 - 7 + 1 {
            for x in 48..48 + 32 - 7 + 1 {
                total += 1;
                let i = field.idx(x, y);
                assert!(exact[i] <= 1e-12, "oracle should be 0 for duplicates");
                if field.dist[i] <= 1e-6 {
                    hits += 1;
                }
            }
        }
        let hit_rate = hits as f64 / total as f64;
        worst_hit = worst_hit.min(hit_rate);
        let pm_mean = field.dist.iter().sum::<f64>() / field.dist.len() as f64;
        let ex_mean = exact.iter().sum::<f64>() / exact.len() as f64;
        ratios.push(pm_mean / ex_mean);
        println!(
            "seed {seed}: hit={hit_rate:.3} pm_mean={pm_mean:.5} ex_mean={ex_mean:.5} ratio={:.4}",
            pm_mean / ex_mean
        );
    }
    println!(
        "worst hit rate {worst_hit:.3}, worst ratio {:.4}",
        ratios.iter().fold(0.0f64, |a, &b| a.max(b))
    );

    // 64x64 mean ratio.
    let img = smooth_texture(64, 64, 500);
    let field = patchmatch(&img, &cfg).unwrap();
    let exact = exact_nn(&img, cfg.patch_size, cfg.min_offset);
    let pm_mean = field.dist.iter().sum::<f64>() / field.dist.len() as f64;
    let ex_mean = exact.iter().sum::<f64>() / exact.len() as f64;
    println!("64x64: ratio {:.4}", pm_mean / ex_mean);

    // 256x256 timing.
    let img = smooth_texture(256, 256, 900);
    let t0 = Instant::now();
    let _field = patchmatch(&img, &cfg).unwrap();
    let pm_time = t0.elapsed();
    let t0 = Instant::now();
    let _exact = exact_nn(&img, cfg.patch_size, cfg.min_offset);
    let ex_time = t0.elapsed();
    println!(
        "256x256: patchmatch {:?} exact {:?} speedup {:.1}x",
        pm_time,
        ex_time,
        ex_time.as_secs_f64() / pm_time.as_secs_f64()
    );
}
