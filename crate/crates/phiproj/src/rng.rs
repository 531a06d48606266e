//! Counter-based splittable pseudo-random generator.
//!
//! SplitMix64 streams keyed by `(seed, stream)` so that worker `r` draws the
//! same sequence no matter how replicates are scheduled across threads.
//! Non-cryptographic.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: mix64(seed) }
    }

    /// Generator for stream `stream` of the family keyed by `seed`.
    ///
    /// Streams are scattered through the state space by double mixing, so
    /// distinct `(seed, stream)` pairs yield effectively independent
    /// sequences.
    pub fn stream(seed: u64, stream: u64) -> Self {
        let scattered = mix64(seed) ^ mix64(stream.wrapping_mul(GOLDEN_GAMMA).wrapping_add(1));
        Self {
            state: mix64(scattered),
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        const DEN: f64 = (1u64 << 53) as f64;
        ((self.next_u64() >> 11) as f64) / DEN
    }

    /// Uniform draw in `(0, 1]`, safe as a logarithm argument.
    #[inline]
    pub fn next_f64_open(&mut self) -> f64 {
        const DEN: f64 = (1u64 << 53) as f64;
        (((self.next_u64() >> 11) + 1) as f64) / DEN
    }

    /// Standard normal draw via the Box-Muller transform.
    pub fn next_standard_normal(&mut self) -> f64 {
        let u1 = self.next_f64_open();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// Index of a categorical draw given the cumulative distribution
    /// `cumulative` (nondecreasing, last entry ~1).
    pub fn next_categorical(&mut self, cumulative: &[f64]) -> usize {
        let u = self.next_f64();
        match cumulative.binary_search_by(|c| c.partial_cmp(&u).unwrap()) {
            Ok(i) => (i + 1).min(cumulative.len() - 1),
            Err(i) => i.min(cumulative.len() - 1),
        }
    }
}
