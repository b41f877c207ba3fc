//! Deterministic random number generation.
//!
//! Every stochastic component of the engine draws from an explicit
//! [`RngStream`] whose seed is derived from a single experiment seed by
//! labeled hashing ([`derive_seed`]). No ambient RNG is ever used, so results
//! are independent of thread scheduling.
//!
//! The generator (PCG-64 MCG with XSL-RR output) and the samplers
//! (Marsaglia polar normals, Marsaglia–Tsang gammas, Fisher–Yates shuffle)
//! are implemented here so their output is frozen: the same seed yields the
//! same bytes on any platform and with any dependency versions.

/// PCG multiplier for the 128-bit multiplicative congruential generator.
const PCG_MUL: u128 = 0x2360_ed05_1fc6_5da4_4385_df64_9fcc_f645;

/// Derives a child seed from a root seed, a stream label, and two indices.
///
/// FNV-1a over the label and inputs, finished with a SplitMix64 mix so that
/// sequential indices produce well-spread seeds.
pub fn derive_seed(root: u64, label: &str, a: u64, b: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut absorb = |byte: u8| {
        h ^= u64::from(byte);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    };
    for &byte in label.as_bytes() {
        absorb(byte);
    }
    for v in [root, a, b] {
        for byte in v.to_le_bytes() {
            absorb(byte);
        }
    }
    splitmix64(h)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A splittable, platform-stable random stream.
#[derive(Debug, Clone)]
pub struct RngStream {
    state: u128,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        let lo = splitmix64(seed);
        let hi = splitmix64(lo ^ seed);
        // MCG state must be odd.
        let state = ((u128::from(hi) << 64) | u128::from(lo)) | 1;
        Self { state }
    }

    /// Stream for a named component, e.g. `RngStream::derived(seed, "smote", k, 0)`.
    pub fn derived(root: u64, label: &str, a: u64, b: u64) -> Self {
        Self::new(derive_seed(root, label, a, b))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_mul(PCG_MUL);
        let rot = (self.state >> 122) as u32;
        let xored = ((self.state >> 64) as u64) ^ (self.state as u64);
        xored.rotate_right(rot)
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Unbiased uniform integer in [0, n). Rejection sampling; n must be > 0.
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % n;
            }
        }
    }

    /// Standard normal via the Marsaglia polar method (second deviate discarded
    /// so the draw sequence stays simple to reason about).
    pub fn normal(&mut self) -> f64 {
        loop {
            let u = 2.0 * self.uniform() - 1.0;
            let v = 2.0 * self.uniform() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                return u * (-2.0 * s.ln() / s).sqrt();
            }
        }
    }

    pub fn normal_with(&mut self, mean: f64, std: f64) -> f64 {
        mean + std * self.normal()
    }

    /// Gamma(shape, 1) via Marsaglia–Tsang; the shape < 1 case uses the
    /// boosting identity G(a) = G(a+1) * U^(1/a).
    pub fn gamma(&mut self, shape: f64) -> f64 {
        assert!(shape > 0.0, "gamma shape must be positive");
        if shape < 1.0 {
            let boost = self.gamma(shape + 1.0);
            let u = self.uniform().max(f64::MIN_POSITIVE);
            return boost * u.powf(1.0 / shape);
        }
        let d = shape - 1.0 / 3.0;
        let c = 1.0 / (9.0 * d).sqrt();
        loop {
            let x = self.normal();
            let t = 1.0 + c * x;
            if t <= 0.0 {
                continue;
            }
            let v = t * t * t;
            let u = self.uniform();
            if u < 1.0 - 0.0331 * x.powi(4) {
                return d * v;
            }
            if u > 0.0 && u.ln() < 0.5 * x * x + d * (1.0 - v + v.ln()) {
                return d * v;
            }
        }
    }

    /// Symmetric Dirichlet(alpha) proportions of length k.
    pub fn dirichlet(&mut self, alpha: f64, k: usize) -> Vec<f64> {
        loop {
            let draws: Vec<f64> = (0..k).map(|_| self.gamma(alpha)).collect();
            let sum: f64 = draws.iter().sum();
            if sum > 0.0 && sum.is_finite() {
                return draws.iter().map(|g| g / sum).collect();
            }
        }
    }

    /// In-place Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, slice: &mut [T]) {
        for i in (1..slice.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            slice.swap(i, j);
        }
    }
}
