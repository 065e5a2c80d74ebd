//! Seed derivation. Every random stream in a run is a pure function of the
//! master seed plus a path of labels and indices, so any sweep point or
//! repeat can be re-run in isolation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The random stream type used throughout: portable and reproducible
/// across platforms.
pub type RunRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> RunRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// One step of a derivation path.
#[derive(Debug, Clone, Copy)]
pub enum SeedPart<'a> {
    Label(&'a str),
    Index(u64),
}

impl<'a> From<&'a str> for SeedPart<'a> {
    fn from(s: &'a str) -> Self {
        SeedPart::Label(s)
    }
}

impl From<u64> for SeedPart<'_> {
    fn from(i: u64) -> Self {
        SeedPart::Index(i)
    }
}

impl From<usize> for SeedPart<'_> {
    fn from(i: usize) -> Self {
        SeedPart::Index(i as u64)
    }
}

pub fn derive_seed(master: u64, path: &[SeedPart<'_>]) -> u64 {
    path.iter().fold(splitmix64(master), |acc, part| {
        let mixed = match part {
            SeedPart::Label(s) => fnv1a(s.as_bytes()),
            SeedPart::Index(i) => splitmix64(*i ^ 0x5851_F42D_4C95_7F2D),
        };
        splitmix64(acc ^ mixed)
    })
}

#[macro_export]
macro_rules! seed_path {
    ($master:expr $(, $part:expr)* $(,)?) => {
        $crate::seed::derive_seed($master, &[$($crate::seed::SeedPart::from($part)),*])
    };
}
