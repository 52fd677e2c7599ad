use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::RngCore;

use super::{Result, SssError};

/// Arithmetic modulo a prime. Elements are encoded big-endian at a fixed
/// width derived from the modulus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrimeField {
    modulus: BigUint,
}

impl PrimeField {
    /// The modulus is assumed prime; only a lower bound is checked.
    pub fn new(modulus: BigUint) -> Result<Self> {
        if modulus < BigUint::from(3u8) {
            return Err(SssError::InvalidModulus);
        }
        Ok(Self { modulus })
    }

    /// `2^256 - 189`, the largest prime below `2^256`.
    pub fn production() -> Self {
        let modulus = (BigUint::one() << 256u32) - BigUint::from(189u32);
        Self { modulus }
    }

    /// Small test field for hand-checkable examples.
    pub fn small(modulus: u64) -> Result<Self> {
        Self::new(BigUint::from(modulus))
    }

    pub fn modulus(&self) -> &BigUint {
        &self.modulus
    }

    pub fn element_width(&self) -> usize {
        (self.modulus.bits() as usize).div_ceil(8)
    }

    pub fn contains(&self, value: &BigUint) -> bool {
        value < &self.modulus
    }

    pub fn add(&self, a: &BigUint, b: &BigUint) -> BigUint {
        (a + b) % &self.modulus
    }

    pub fn sub(&self, a: &BigUint, b: &BigUint) -> BigUint {
        ((a + &self.modulus) - (b % &self.modulus)) % &self.modulus
    }

    pub fn mul(&self, a: &BigUint, b: &BigUint) -> BigUint {
        (a * b) % &self.modulus
    }

    /// Multiplicative inverse by Fermat's little theorem.
    pub fn inv(&self, a: &BigUint) -> Option<BigUint> {
        let a = a % &self.modulus;
        if a.is_zero() {
            return None;
        }
        let exponent = &self.modulus - BigUint::from(2u8);
        Some(a.modpow(&exponent, &self.modulus))
    }

    /// Uniform element by rejection sampling.
    pub fn random_element<R: RngCore + ?Sized>(&self, rng: &mut R) -> BigUint {
        let width = self.element_width();
        let excess_bits = width * 8 - self.modulus.bits() as usize;
        let mut buf = vec![0u8; width];
        loop {
            rng.fill_bytes(&mut buf);
            buf[0] &= 0xff >> excess_bits;
            let candidate = BigUint::from_bytes_be(&buf);
            if candidate < self.modulus {
                return candidate;
            }
        }
    }

    pub fn encode(&self, value: &BigUint) -> Vec<u8> {
        let width = self.element_width();
        let raw = value.to_bytes_be();
        let mut out = vec![0u8; width.saturating_sub(raw.len())];
        out.extend_from_slice(&raw);
        out
    }

    /// Decodes a fixed-width element, rejecting values `>= p`.
    pub fn decode(&self, bytes: &[u8]) -> Result<BigUint> {
        if bytes.len() != self.element_width() {
            return Err(SssError::LengthMismatch { expected: self.element_width(), actual: bytes.len() });
        }
        let value = BigUint::from_bytes_be(bytes);
        if !self.contains(&value) {
            return Err(SssError::MalformedShare("field element out of range".into()));
        }
        Ok(value)
    }
}
