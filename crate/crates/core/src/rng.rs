//! Reproducible random streams.
//!
//! Every random quantity is drawn from a ChaCha8 generator keyed by a 64-bit
//! seed (`seed_from_u64`) and a 64-bit stream id (`set_stream`). Distinct
//! streams of one seed are independent keystreams, so e.g. the design matrix
//! and the noise vector of an instance never share random words.
//!
//! Gaussians use the Box–Muller transform on 53-bit uniforms, both outputs of
//! each pair consumed in order. Nothing here depends on platform float
//! libraries beyond `ln`, `sqrt`, `sin` and `cos`.
//!
//! Seeds for sub-tasks are derived with [`mix64`], the SplitMix64 finalizer
//! applied to `a ^ rotl(b, 32)` plus the golden-ratio increment.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use rand_chacha::ChaCha8Rng as StreamRng;

/// Stream ids used by the generators in this crate.
pub mod streams {
    pub const DESIGN: u64 = 0;
    pub const NOISE: u64 = 1;
    pub const SUPPORT: u64 = 2;
    pub const VALUES: u64 = 3;
    pub const SAMPLING: u64 = 4;
}

/// Generator for `(seed, stream)`.
pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and a tag.
pub fn mix64(a: u64, b: u64) -> u64 {
    splitmix64(a ^ b.rotate_left(32) ^ splitmix64(b))
}

/// Uniform in (0, 1], 53 bits.
#[inline]
pub fn uniform_open0<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    1.0 - u
}

/// Uniform in [0, 1), 53 bits.
#[inline]
pub fn uniform<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal sampler (Box–Muller, pairs consumed in order).
pub struct Normal<R> {
    rng: R,
    spare: Option<f64>,
}

impl<R: RngCore> Normal<R> {
    pub fn new(rng: R) -> Self {
        Self { rng, spare: None }
    }

    pub fn sample(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = uniform_open0(&mut self.rng);
        let u2 = uniform(&mut self.rng);
        let radius = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.spare = Some(radius * theta.sin());
        radius * theta.cos()
    }

    pub fn fill(&mut self, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = self.sample();
        }
    }

    pub fn rng_mut(&mut self) -> &mut R {
        &mut self.rng
    }
}

/// Uniform index in `0..bound` by rejection (no modulo bias).
pub fn index_below<R: RngCore + ?Sized>(rng: &mut R, bound: usize) -> usize {
    assert!(bound > 0);
    let bound = bound as u64;
    let zone = u64::MAX - (u64::MAX % bound);
    loop {
        let v = rng.next_u64();
        if v < zone {
            return (v % bound) as usize;
        }
    }
}

/// Uniformly random `k`-subset of `0..n`, returned sorted (partial Fisher–Yates).
pub fn sample_subset<R: RngCore + ?Sized>(rng: &mut R, n: usize, k: usize) -> Vec<usize> {
    assert!(k <= n);
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + index_below(rng, n - i);
        pool.swap(i, j);
    }
    let mut out = pool[..k].to_vec();
    out.sort_unstable();
    out
}

/// Uniformly random `k`-subset of `items`, returned sorted.
pub fn sample_from<R: RngCore + ?Sized>(rng: &mut R, items: &[usize], k: usize) -> Vec<usize> {
    let picks = sample_subset(rng, items.len(), k);
    let mut out: Vec<usize> = picks.into_iter().map(|i| items[i]).collect();
    out.sort_unstable();
    out
}
