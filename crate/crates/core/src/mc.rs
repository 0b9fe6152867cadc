//! Seed derivation and order-stable Monte Carlo aggregation.
//!
//! Samples are generated independently from `(base seed, stream indices)`,
//! collected in index order and reduced with pairwise summation, so a result
//! never depends on how many threads produced it.

use serde::Serialize;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for a position in a tree of streams, e.g. `[delta_index, path_index]`.
pub fn derive_seed(base: u64, stream: &[u64]) -> u64 {
    stream
        .iter()
        .fold(splitmix64(base), |acc, &s| splitmix64(acc ^ splitmix64(s.wrapping_add(GOLDEN))))
}

/// Pairwise summation; the tree shape depends only on the length.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl MeanEstimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                stderr: f64::NAN,
                n,
            };
        }
        let mean = pairwise_sum(xs) / n as f64;
        let stderr = if n > 1 {
            let sq: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
            (pairwise_sum(&sq) / (n - 1) as f64 / n as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, stderr, n }
    }

    /// `|mean - target| <= bands * stderr`
    pub fn within(&self, target: f64, bands: f64) -> bool {
        (self.mean - target).abs() <= bands * self.stderr
    }
}

/// Column-wise estimates for samples stored row-major with `width` values per sample.
pub fn column_estimates(rows: &[f64], width: usize) -> Vec<MeanEstimate> {
    let n = if width == 0 { 0 } else { rows.len() / width };
    let mut column = vec![0.0; n];
    (0..width)
        .map(|c| {
            for (k, v) in column.iter_mut().enumerate() {
                *v = rows[k * width + c];
            }
            MeanEstimate::from_samples(&column)
        })
        .collect()
}
