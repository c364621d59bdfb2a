use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Seeded random stream. Identical seeds give identical sequences, and
/// [`RngStream::split`] derives independent children with distinct sub-seeds.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha8Rng,
}

// SplitMix64 finalizer; decorrelates nearby seeds before they reach ChaCha.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(mix(seed)),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Deterministic child stream keyed by `key`. Does not advance `self`.
    pub fn derive(&self, key: u64) -> Self {
        Self::new(mix(self.seed ^ mix(key.wrapping_add(1))))
    }

    /// `k` children keyed 0..k.
    pub fn split(&self, k: usize) -> Vec<Self> {
        (0..k as u64).map(|i| self.derive(i)).collect()
    }

    /// Uniform on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Uniform index in 0..n.
    pub fn below(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Fisher-Yates permutation of 0..n.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = self.below(i + 1);
            idx.swap(i, j);
        }
        idx
    }

    /// Draws an index from unnormalized nonnegative `weights` via their
    /// prefix sums (`cumulative` must be nondecreasing with positive last entry).
    pub fn categorical_cumulative(&mut self, cumulative: &[f64]) -> usize {
        let total = *cumulative.last().expect("nonempty weights");
        let u = self.uniform() * total;
        let i = cumulative.partition_point(|&c| c <= u);
        i.min(cumulative.len() - 1)
    }
}
