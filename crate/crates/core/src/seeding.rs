//! Deterministic seed derivation so every stochastic stage (folds, bootstrap
//! resamples, subsamples, synthetic draws) gets an independent stream from
//! one user-facing seed.

/// splitmix64 finaliser.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Order-sensitive combination of a base seed with two stream tags.
pub fn derive_seed(base: u64, a: u64, b: u64) -> u64 {
    mix(mix(mix(base) ^ a) ^ b)
}
