//! Bit handling and QPSK mapping.

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// A sequence of payload bits, each stored as 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BitVector(Vec<u8>);

impl BitVector {
    /// Wraps raw bits, rejecting any value other than 0 or 1.
    pub fn from_bits(bits: Vec<u8>) -> Result<Self> {
        if let Some(bad) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::InvalidArgument(format!(
                "bit values must be 0 or 1, got {bad}"
            )));
        }
        Ok(Self(bits))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    /// Number of positions where the two vectors differ.
    ///
    /// Errors when the lengths do not match.
    pub fn count_mismatches(&self, other: &Self) -> Result<usize> {
        if self.len() != other.len() {
            return Err(Error::InvalidArgument(format!(
                "bit vectors differ in length: {} vs {}",
                self.len(),
                other.len()
            )));
        }
        Ok(self
            .0
            .iter()
            .zip(other.0.iter())
            .filter(|(a, b)| a != b)
            .count())
    }
}

/// Deterministic pseudo-random payload bits.
///
/// The same (seed, count) pair always yields the same bits, on every platform,
/// so scenario runs are reproducible end to end.
pub fn prbs_bits(seed: u64, count: usize) -> BitVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bits = Vec::with_capacity(count);
    let mut word = 0u64;
    for i in 0..count {
        if i % 64 == 0 {
            word = rng.next_u64();
        }
        bits.push((word & 1) as u8);
        word >>= 1;
    }
    BitVector(bits)
}

/// Gray-coded QPSK with unit mean symbol energy.
///
/// Bit pair (b0, b1) maps to ((1 - 2 b0) + j (1 - 2 b1)) / sqrt(2), so 00
/// lands at (+0.7071, +0.7071) and 11 at (-0.7071, -0.7071). b0 steers the
/// in-phase axis, b1 the quadrature axis, and adjacent constellation points
/// differ in exactly one bit.
pub fn qpsk_map(bits: &BitVector) -> Result<Vec<Complex64>> {
    if bits.len() % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "QPSK needs an even bit count, got {}",
            bits.len()
        )));
    }
    let a = std::f64::consts::FRAC_1_SQRT_2;
    Ok(bits
        .as_slice()
        .chunks_exact(2)
        .map(|pair| {
            Complex64::new(
                if pair[0] == 0 { a } else { -a },
                if pair[1] == 0 { a } else { -a },
            )
        })
        .collect())
}

/// Hard-decision QPSK demapping by quadrant.
///
/// Inverse of [`qpsk_map`] for any symbol not exactly on a decision axis;
/// points on an axis resolve toward the 0 bit.
pub fn qpsk_demap(symbols: &[Complex64]) -> BitVector {
    let mut bits = Vec::with_capacity(symbols.len() * 2);
    for s in symbols {
        bits.push(u8::from(s.re < 0.0));
        bits.push(u8::from(s.im < 0.0));
    }
    BitVector(bits)
}
