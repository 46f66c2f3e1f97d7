//! Seeded, splittable random streams.
//!
//! Every stochastic operation takes its randomness from a [`SeedStream`].
//! Child streams are derived from a parent seed and a path of integer labels
//! (for example `(tree, batch)`), so work can be scheduled in any order and
//! still draw the same numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The concrete generator handed to samplers.
pub type Rng = ChaCha8Rng;

/// A seed plus a derivation path. Cheap to copy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedStream {
    key: u64,
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        SeedStream { key: mix(seed ^ 0x6a09_e667_f3bc_c908) }
    }

    /// A child stream labelled by `label`. Distinct labels give independent
    /// streams; the same label always gives the same stream.
    pub fn child(self, label: u64) -> Self {
        SeedStream {
            key: mix(self.key.rotate_left(17) ^ mix(label.wrapping_add(0x9e37_79b9_7f4a_7c15))),
        }
    }

    pub fn child2(self, a: u64, b: u64) -> Self {
        self.child(a).child(b)
    }

    pub fn rng(self) -> Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.key);
        rng.set_stream(self.key.rotate_right(29));
        rng
    }

    pub fn key(self) -> u64 {
        self.key
    }
}

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn same_path_same_numbers() {
        let a: Vec<u64> = SeedStream::new(7).child2(3, 4).rng().random_iter().take(8).collect();
        let b: Vec<u64> = SeedStream::new(7).child2(3, 4).rng().random_iter().take(8).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn siblings_differ() {
        let root = SeedStream::new(7);
        let a: u64 = root.child(0).rng().random();
        let b: u64 = root.child(1).rng().random();
        let c: u64 = SeedStream::new(8).child(0).rng().random();
        assert_ne!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn path_order_matters() {
        let root = SeedStream::new(1);
        assert_ne!(root.child2(1, 2).key(), root.child2(2, 1).key());
    }
}
