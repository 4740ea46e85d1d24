//! Deterministic SplitMix64 stream and Box–Muller normals.
//!
//! Every stochastic component in the crate draws from an [`RngStream`], so two
//! runs seeded identically consume bit-identical noise. Twin-run equivalence
//! tests depend on this.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 state. Single owner; clone it to replay a stream.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RngStream {
    state: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Independent stream for run `run_index` of a sweep seeded with `seed`.
    ///
    /// The state is the first SplitMix64 output of `seed ^ run_index`, so
    /// neighbouring run indices do not produce shifted copies of each other.
    pub fn for_run(seed: u64, run_index: u64) -> Self {
        let mut base = Self::new(seed ^ run_index);
        Self::new(base.next_u64())
    }

    pub fn state(&self) -> u64 {
        self.state
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform double in `[0, 1)` built from the top 53 bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in `0..n`. `n` must be positive.
    pub fn next_index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_f64() * n as f64) as usize).min(n - 1)
    }

    /// Two independent standard normals; consumes exactly two words.
    pub fn gaussian_pair(&mut self) -> (f64, f64) {
        // u1 in (0, 1] keeps the logarithm finite.
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        box_muller(u1, u2)
    }

    /// `out.len()` standard normals. An odd length discards the final spare
    /// so consumption is always `2 * ceil(len / 2)` words.
    pub fn fill_gaussian(&mut self, out: &mut [f64]) {
        let mut chunks = out.chunks_mut(2);
        for chunk in &mut chunks {
            let (a, b) = self.gaussian_pair();
            chunk[0] = a;
            if let Some(slot) = chunk.get_mut(1) {
                *slot = b;
            }
        }
    }

    pub fn gaussian_vec(&mut self, len: usize) -> Vec<f64> {
        let mut v = vec![0.0; len];
        self.fill_gaussian(&mut v);
        v
    }
}

/// Box–Muller transform of `u1 ∈ (0, 1]`, `u2 ∈ [0, 1)`.
pub fn box_muller(u1: f64, u2: f64) -> (f64, f64) {
    let radius = (-2.0 * u1.ln()).sqrt();
    let angle = 2.0 * std::f64::consts::PI * u2;
    (radius * angle.cos(), radius * angle.sin())
}
