//! Deterministic randomness: one 64-bit master seed fans out into named
//! streams, and Monte-Carlo loops run over fixed-size chunks whose partial
//! sums are merged in chunk order with compensated summation. Results are
//! bit-identical for a given `(seed, stream)` regardless of thread count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// SplitMix64 output function; used to derive independent sub-seeds.
fn splitmix64_value(mut state: u64) -> u64 {
    state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn hash_name(name: &str) -> u64 {
    // FNV-1a
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// RNG for a named stream of a master seed.
pub fn stream_rng(seed: u64, stream: &str) -> ChaCha8Rng {
    let s = splitmix64_value(seed ^ hash_name(stream));
    ChaCha8Rng::seed_from_u64(s)
}

/// RNG for chunk `chunk` of a named stream.
pub fn chunk_rng(seed: u64, stream: &str, chunk: u64) -> ChaCha8Rng {
    let s = splitmix64_value(splitmix64_value(seed ^ hash_name(stream)) ^ chunk);
    ChaCha8Rng::seed_from_u64(s)
}

/// Kahan-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    pub fn add(&mut self, x: f64) {
        let y = x - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Sums and sums of squares of `K` per-sample statistics.
#[derive(Debug, Clone, Copy)]
pub struct McSums<const K: usize> {
    pub n: u64,
    pub sum: [f64; K],
    pub sum_sq: [f64; K],
}

impl<const K: usize> McSums<K> {
    pub fn mean(&self, i: usize) -> f64 {
        self.sum[i] / self.n as f64
    }

    /// Standard error of the mean of statistic `i`.
    pub fn stderr(&self, i: usize) -> f64 {
        let n = self.n as f64;
        let mean = self.sum[i] / n;
        let var = (self.sum_sq[i] / n - mean * mean).max(0.0) * n / (n - 1.0);
        (var / n).sqrt()
    }
}

const CHUNK: u64 = 1 << 16;

/// Runs `n_samples` evaluations of `eval` across parallel chunks, each chunk
/// with its own deterministic RNG. Partial Kahan sums are merged in chunk
/// order, so the result does not depend on the worker count.
pub fn run_mc_sums<const K: usize, F>(seed: u64, stream: &str, n_samples: u64, eval: F) -> McSums<K>
where
    F: Fn(&mut ChaCha8Rng) -> [f64; K] + Sync,
{
    let n_chunks = n_samples.div_ceil(CHUNK);
    let partials: Vec<([f64; K], [f64; K])> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = chunk_rng(seed, stream, chunk);
            let lo = chunk * CHUNK;
            let hi = (lo + CHUNK).min(n_samples);
            let mut sums = [Kahan::default(); K];
            let mut sq = [Kahan::default(); K];
            for _ in lo..hi {
                let v = eval(&mut rng);
                for i in 0..K {
                    sums[i].add(v[i]);
                    sq[i].add(v[i] * v[i]);
                }
            }
            let mut s = [0.0; K];
            let mut s2 = [0.0; K];
            for i in 0..K {
                s[i] = sums[i].value();
                s2[i] = sq[i].value();
            }
            (s, s2)
        })
        .collect();

    let mut sums = [Kahan::default(); K];
    let mut sq = [Kahan::default(); K];
    for (s, s2) in partials {
        for i in 0..K {
            sums[i].add(s[i]);
            sq[i].add(s2[i]);
        }
    }
    let mut sum = [0.0; K];
    let mut sum_sq = [0.0; K];
    for i in 0..K {
        sum[i] = sums[i].value();
        sum_sq[i] = sq[i].value();
    }
    McSums { n: n_samples, sum, sum_sq }
}

/// Uniform point in the ball of radius `r` (rejection from the cube).
pub fn uniform_in_ball(rng: &mut ChaCha8Rng, r: f64) -> crate::linalg::Vec3 {
    use rand::Rng;
    loop {
        let x = rng.random::<f64>() * 2.0 - 1.0;
        let y = rng.random::<f64>() * 2.0 - 1.0;
        let z = rng.random::<f64>() * 2.0 - 1.0;
        if x * x + y * y + z * z <= 1.0 {
            return crate::linalg::Vec3::new(x * r, y * r, z * r);
        }
    }
}

/// Standard normal via Box-Muller.
pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    use rand::Rng;
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Uniform direction on the unit sphere.
pub fn uniform_direction(rng: &mut ChaCha8Rng) -> crate::linalg::Vec3 {
    let v = crate::linalg::Vec3::new(normal(rng), normal(rng), normal(rng));
    let n = v.norm();
    if n == 0.0 {
        crate::linalg::Vec3::new(1.0, 0.0, 0.0)
    } else {
        v / n
    }
}
