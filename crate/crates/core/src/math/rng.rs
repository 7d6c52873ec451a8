/// Counter-based deterministic random number generator.
///
/// Each `(seed, stream)` pair defines an independent sequence produced by a
/// SplitMix64-style mix of a per-stream key with a call counter. Because the
/// state is just a counter, results never depend on thread scheduling: work
/// units own their streams, keyed by stable indices (pixel, texel, walk).
#[derive(Debug, Clone)]
pub struct RngStream {
    key: u64,
    counter: u64,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        // Decorrelate the stream id from the seed before mixing.
        let key = mix(seed ^ mix(stream.wrapping_mul(GOLDEN).wrapping_add(GOLDEN)));
        RngStream { key, counter: 0 }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let x = self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN));
        self.counter += 1;
        mix(x)
    }

    /// Uniform in `[0, 1)`.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Two fresh uniforms, the common case for 2D warps.
    #[inline]
    pub fn next_2d(&mut self) -> (f64, f64) {
        (self.next_f64(), self.next_f64())
    }

    /// Uniform integer in `[0, bound)` by rejection-free scaling.
    #[inline]
    pub fn next_below(&mut self, bound: usize) -> usize {
        debug_assert!(bound > 0);
        ((self.next_u64() >> 11) as usize).wrapping_rem(bound)
    }
}
