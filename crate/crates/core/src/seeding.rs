//! Deterministic seed derivation so that parallel episode workers,
//! paired evaluation arms and repeated runs all draw from reproducible
//! streams.

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A child seed from a base seed and a salt; distinct salts give
/// independent-looking streams.
pub fn derive_seed(base: u64, salt: u64) -> u64 {
    mix(base ^ mix(salt))
}

/// Stable salt from a short label, for naming derived streams.
pub fn salt(label: &str) -> u64 {
    // FNV-1a
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in label.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
