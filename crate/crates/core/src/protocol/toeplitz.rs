//! Privacy amplification by Toeplitz hashing over GF(2).
//!
//! An `m x n` Toeplitz matrix is fixed by `n + m - 1` seed bits:
//! `T[i][j] = seed[i + n - 1 - j]`, so row 0 is the first `n` seed bits
//! reversed and column 0 is `seed[n-1 ..]`. Output bit `i` is therefore the
//! parity of `seed[i .. i + n] & reverse(x)`, which is evaluated 64 bits at
//! a time.

use rayon::prelude::*;

use super::{PackedBits, ProtocolError};
use crate::analytic::binary_entropy;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecretKey {
    pub bits: Vec<bool>,
    pub hash_seed: Vec<bool>,
    pub security_parameter: u32,
}

impl SecretKey {
    /// True when the discount consumed the whole key.
    pub fn is_exhausted(&self) -> bool {
        self.bits.is_empty()
    }
}

/// `max(0, n - leaked - ceil(n h(qber)) - s)`.
pub fn secret_key_length(n: usize, leaked_bits: u64, qber: f64, security_parameter: u32) -> usize {
    let eve = (n as f64 * binary_entropy(qber.clamp(0.0, 1.0))).ceil();
    let m = n as f64 - leaked_bits as f64 - eve - security_parameter as f64;
    if m > 0.0 {
        m as usize
    } else {
        0
    }
}

/// Multiplies `bits` by the Toeplitz matrix of `seed` with `m` rows.
pub fn toeplitz_multiply(bits: &[bool], seed: &[bool], m: usize) -> Result<Vec<bool>, ProtocolError> {
    let n = bits.len();
    if m == 0 {
        return Ok(Vec::new());
    }
    let expected = n + m - 1;
    if seed.len() != expected {
        return Err(ProtocolError::SeedLength { got: seed.len(), expected });
    }
    let seed = PackedBits::from_bools(seed);
    let xr = PackedBits::from_bools_reversed(bits);
    let words = xr.words();
    let row = |i: usize| -> bool {
        let mut acc = 0u64;
        for (w, &x) in words.iter().enumerate() {
            acc ^= seed.window(i + 64 * w) & x;
        }
        acc.count_ones() & 1 == 1
    };
    if (m as u128) * (n as u128) < 1 << 22 {
        Ok((0..m).map(row).collect())
    } else {
        Ok((0..m).into_par_iter().map(row).collect())
    }
}

/// Compresses a reconciled key to its secret part.
///
/// The output length is `n - leaked_bits - ceil(n h(qber)) - s` floored at
/// zero; the seed must hold `n + m - 1` bits (any length when `m = 0`).
/// A zero-length result is returned as an exhausted key.
pub fn privacy_amplify(
    bits: &[bool],
    leaked_bits: u64,
    qber: f64,
    security_parameter: u32,
    hash_seed: &[bool],
) -> Result<SecretKey, ProtocolError> {
    if bits.is_empty() {
        return Err(ProtocolError::EmptyKey);
    }
    let m = secret_key_length(bits.len(), leaked_bits, qber, security_parameter);
    let out = toeplitz_multiply(bits, hash_seed, m)?;
    Ok(SecretKey { bits: out, hash_seed: hash_seed.to_vec(), security_parameter })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_xoshiro::Xoshiro256PlusPlus;

    fn naive(bits: &[bool], seed: &[bool], m: usize) -> Vec<bool> {
        let n = bits.len();
        (0..m)
            .map(|i| (0..n).fold(false, |acc, j| acc ^ (seed[i + n - 1 - j] & bits[j])))
            .collect()
    }

    #[test]
    fn packed_product_matches_definition() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(1);
        for (n, m) in [(1, 1), (5, 3), (64, 64), (65, 7), (200, 130), (1000, 1)] {
            let x: Vec<bool> = (0..n).map(|_| rng.random()).collect();
            let s: Vec<bool> = (0..n + m - 1).map(|_| rng.random()).collect();
            assert_eq!(toeplitz_multiply(&x, &s, m).unwrap(), naive(&x, &s, m), "n {n} m {m}");
        }
    }

    #[test]
    fn no_discount_keeps_length() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(2);
        let x: Vec<bool> = (0..100).map(|_| rng.random()).collect();
        let s: Vec<bool> = (0..199).map(|_| rng.random()).collect();
        let key = privacy_amplify(&x, 0, 0.0, 0, &s).unwrap();
        assert_eq!(key.bits.len(), 100);
        assert_eq!(key, privacy_amplify(&x, 0, 0.0, 0, &s).unwrap());
    }

    #[test]
    fn full_compromise_exhausts_key() {
        let x = vec![true; 64];
        let key = privacy_amplify(&x, 0, 0.5, 0, &[]).unwrap();
        assert!(key.is_exhausted());
    }

    #[test]
    fn length_formula() {
        // h(0.05) = 0.2864..., ceil(1000 * h) = 287
        assert_eq!(secret_key_length(1000, 300, 0.05, 30), 1000 - 300 - 287 - 30);
        assert_eq!(secret_key_length(10, 300, 0.05, 30), 0);
    }

    #[test]
    fn errors() {
        assert_eq!(privacy_amplify(&[], 0, 0.0, 0, &[]), Err(ProtocolError::EmptyKey));
        assert!(matches!(
            privacy_amplify(&[true; 4], 0, 0.0, 0, &[true; 3]),
            Err(ProtocolError::SeedLength { got: 3, expected: 7 })
        ));
    }
}
