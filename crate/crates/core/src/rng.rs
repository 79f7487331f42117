//! SplitMix64, the fixed generator behind every seeded draw in the crate.
//!
//! The algorithm is Steele, Lea & Flood's SplitMix64 (the seeding generator
//! of `java.util.SplittableRandom` and of the xoshiro family). It is a few
//! lines of integer arithmetic, so a sample drawn here can be reproduced
//! bit-for-bit by any other implementation given the same seed.

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Independent stream for sub-task `index` of a computation seeded with
    /// `seed`. Used to partition work without sharing a generator.
    pub fn for_stream(seed: u64, index: u64) -> Self {
        let mut mixer = Self::new(seed ^ mix(index.wrapping_add(GOLDEN_GAMMA)));
        // burn one output so adjacent indices decorrelate immediately
        mixer.next_u64();
        mixer
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix(self.state)
    }

    /// Uniform integer in `[0, bound)` by rejection sampling. `bound` must be
    /// non-zero.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "bound must be positive");
        // 2^64 mod bound; values below it would bias the modulus
        let threshold = bound.wrapping_neg() % bound;
        loop {
            let x = self.next_u64();
            if x >= threshold {
                return x % bound;
            }
        }
    }

    /// Sample `k` distinct integers from `[0, n)` with Floyd's algorithm and
    /// return them in ascending order.
    pub fn sample_distinct(&mut self, n: u64, k: u64) -> Vec<u64> {
        assert!(k <= n, "cannot draw {k} distinct values from {n}");
        let mut chosen = std::collections::BTreeSet::new();
        for j in (n - k)..n {
            let t = self.below(j + 1);
            if !chosen.insert(t) {
                chosen.insert(j);
            }
        }
        chosen.into_iter().collect()
    }
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
