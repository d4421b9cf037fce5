// Float helpers that work without std.

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub(crate) fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

/// Dot product accumulated left to right; every projection in the crate goes
/// through this so routing and split search see bit-identical values.
#[inline]
pub(crate) fn dot<I: IntoIterator<Item = f64>>(coefficients: &[f64], x: I) -> f64 {
    let mut acc = 0.0;
    for (a, v) in coefficients.iter().zip(x) {
        acc += a * v;
    }
    acc
}

/// splitmix64 finalizer, used to derive independent per-node seeds.
pub(crate) fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
