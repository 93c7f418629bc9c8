#![allow(dead_code)]

use chronicity::raster::{ClassId, LabelRaster};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A raster of overlapping random rectangles plus isolated speckle, so
/// components of every shape meet patch borders, corners included.
pub fn random_raster(seed: u64, width: usize, height: usize) -> LabelRaster {
    let mut rng = rng(seed);
    let mut r = LabelRaster::new(width, height);
    let n_rects = rng.random_range(0..40);
    for _ in 0..n_rects {
        let class = ClassId::ALL[rng.random_range(0..7)];
        let h = rng.random_range(1..=height.min(60));
        let w = rng.random_range(1..=width.min(60));
        let top = rng.random_range(0..=height - h);
        let left = rng.random_range(0..=width - w);
        for row in top..top + h {
            for col in left..left + w {
                r.set(row, col, class);
            }
        }
    }
    let speckle = width * height / 50;
    for _ in 0..speckle {
        let class = ClassId::ALL[rng.random_range(0..7)];
        r.set(rng.random_range(0..height), rng.random_range(0..width), class);
    }
    r
}
