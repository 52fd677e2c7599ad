//! Shamir's polynomial scheme over a prime field.
//!
//! A share is the point `(i, f(i))`, encoded as a 4-byte big-endian `x`
//! followed by the field-width big-endian `y`.

use std::collections::BTreeSet;

use num_bigint::BigUint;
use num_traits::Zero;
use rand::RngCore;

use super::{ParticipantIndex, PrimeField, Result, SchemeConfig, SchemeKind, Secret, ShareBytes, ShareMap, SssError};

pub fn encode_point(field: &PrimeField, x: u32, y: &BigUint) -> ShareBytes {
    let mut bytes = x.to_be_bytes().to_vec();
    bytes.extend(field.encode(y));
    ShareBytes::new(bytes)
}

pub fn decode_point(field: &PrimeField, share: &ShareBytes) -> Result<(u32, BigUint)> {
    let bytes = share.as_bytes();
    let expected = 4 + field.element_width();
    if bytes.len() != expected {
        return Err(SssError::LengthMismatch { expected, actual: bytes.len() });
    }
    let x = u32::from_be_bytes(bytes[..4].try_into().expect("4-byte prefix"));
    let y = field.decode(&bytes[4..])?;
    Ok((x, y))
}

fn secret_value(field: &PrimeField, secret: &Secret) -> Result<BigUint> {
    let value = BigUint::from_bytes_be(secret.as_bytes());
    if !field.contains(&value) {
        return Err(SssError::SecretOutOfRange);
    }
    Ok(value)
}

/// Samples a degree-`(t-1)` polynomial with `f(0) = secret` and hands
/// participant `i` the point `(i, f(i))`.
pub fn shamir_setup<R: RngCore + ?Sized>(
    config: &SchemeConfig,
    field: &PrimeField,
    secret: &Secret,
    rng: &mut R,
) -> Result<ShareMap> {
    config.validate()?;
    let coefficients: Vec<BigUint> = (1..config.threshold).map(|_| field.random_element(rng)).collect();
    shamir_setup_with_coefficients(config, field, secret, &coefficients)
}

/// Deterministic variant taking the non-constant coefficients
/// `a_1..a_{t-1}` explicitly.
pub fn shamir_setup_with_coefficients(
    config: &SchemeConfig,
    field: &PrimeField,
    secret: &Secret,
    coefficients: &[BigUint],
) -> Result<ShareMap> {
    if config.kind != SchemeKind::Shamir {
        return Err(SssError::SchemeMismatch("shamir_setup called with a non-shamir config"));
    }
    config.validate()?;
    if coefficients.len() != config.threshold - 1 {
        return Err(SssError::InvalidParameters { threshold: config.threshold, participants: config.participants });
    }
    let constant = secret_value(field, secret)?;

    let mut shares = ShareMap::new();
    for x in 1..=config.participants as u32 {
        let xb = BigUint::from(x);
        // Horner, highest coefficient first
        let mut y = BigUint::zero();
        for a in coefficients.iter().rev() {
            y = field.add(&field.mul(&y, &xb), a);
        }
        y = field.add(&field.mul(&y, &xb), &constant);
        shares.insert(ParticipantIndex(x), encode_point(field, x, &y));
    }
    Ok(shares)
}

/// Lagrange interpolation at `x = 0` over exactly the first `threshold`
/// shares in ascending index order.
pub fn shamir_recover(field: &PrimeField, threshold: usize, shares: &ShareMap) -> Result<Secret> {
    if threshold == 0 {
        return Err(SssError::InvalidParameters { threshold, participants: shares.len() });
    }
    if shares.len() < threshold {
        return Err(SssError::InsufficientShares { needed: threshold, got: shares.len() });
    }

    let mut points = Vec::with_capacity(threshold);
    let mut seen = BTreeSet::new();
    for share in shares.values().take(threshold) {
        let (x, y) = decode_point(field, share)?;
        if x == 0 || !seen.insert(x) {
            return Err(SssError::DuplicateX(x));
        }
        points.push((BigUint::from(x), y));
    }

    let mut acc = BigUint::zero();
    for (i, (xi, yi)) in points.iter().enumerate() {
        let mut numerator = BigUint::from(1u8);
        let mut denominator = BigUint::from(1u8);
        for (j, (xj, _)) in points.iter().enumerate() {
            if i != j {
                // basis term (0 - xj) / (xi - xj)
                numerator = field.mul(&numerator, &field.sub(&BigUint::zero(), xj));
                denominator = field.mul(&denominator, &field.sub(xi, xj));
            }
        }
        let inverse = field.inv(&denominator).ok_or(SssError::DuplicateX(0))?;
        acc = field.add(&acc, &field.mul(yi, &field.mul(&numerator, &inverse)));
    }
    Ok(Secret::new(field.encode(&acc)))
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    use super::*;

    fn f257() -> PrimeField {
        PrimeField::small(257).unwrap()
    }

    fn y_of(field: &PrimeField, share: &ShareBytes) -> u32 {
        let (_, y) = decode_point(field, share).unwrap();
        u32::try_from(y).unwrap()
    }

    fn hand_checked_shares() -> ShareMap {
        let field = f257();
        let config = SchemeConfig::shamir(2, 3).unwrap();
        let secret = Secret::new(field.encode(&BigUint::from(123u32)));
        shamir_setup_with_coefficients(&config, &field, &secret, &[BigUint::from(45u32)]).unwrap()
    }

    #[test]
    fn hand_checked_points() {
        let field = f257();
        let shares = hand_checked_shares();
        let ys: Vec<u32> = shares.values().map(|s| y_of(&field, s)).collect();
        assert_eq!(ys, vec![168, 213, 1]);
    }

    #[test]
    fn recovers_from_hand_checked_pairs() {
        let field = f257();
        let shares = hand_checked_shares();
        for pair in [[1u32, 2], [1, 3], [2, 3]] {
            let subset: ShareMap =
                pair.iter().map(|&i| (ParticipantIndex(i), shares[&ParticipantIndex(i)].clone())).collect();
            let secret = shamir_recover(&field, 2, &subset).unwrap();
            assert_eq!(BigUint::from_bytes_be(secret.as_bytes()), BigUint::from(123u32));
        }
    }

    #[test]
    fn constant_polynomial_for_threshold_one() {
        let field = f257();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let config = SchemeConfig::shamir(1, 4).unwrap();
        let secret = Secret::new(field.encode(&BigUint::from(77u32)));
        let shares = shamir_setup(&config, &field, &secret, &mut rng).unwrap();
        assert!(shares.values().all(|s| y_of(&field, s) == 77));
    }

    #[test]
    fn too_few_shares() {
        let field = f257();
        let mut shares = hand_checked_shares();
        shares.retain(|i, _| i.0 == 1);
        assert_eq!(shamir_recover(&field, 2, &shares).unwrap_err(), SssError::InsufficientShares { needed: 2, got: 1 });
    }

    #[test]
    fn duplicate_x_is_rejected() {
        let field = f257();
        let shares = hand_checked_shares();
        let mut tampered = ShareMap::new();
        tampered.insert(ParticipantIndex(1), shares[&ParticipantIndex(1)].clone());
        tampered.insert(ParticipantIndex(2), shares[&ParticipantIndex(1)].clone());
        assert_eq!(shamir_recover(&field, 2, &tampered).unwrap_err(), SssError::DuplicateX(1));
    }

    #[test]
    fn secret_outside_field_is_rejected() {
        let field = f257();
        let config = SchemeConfig::shamir(2, 3).unwrap();
        let secret = Secret::new(vec![1, 1]); // 257
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        assert_eq!(shamir_setup(&config, &field, &secret, &mut rng).unwrap_err(), SssError::SecretOutOfRange);
    }

    #[test]
    fn production_field_round_trip() {
        let field = PrimeField::production();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let config = SchemeConfig::shamir(3, 5).unwrap();
        let secret = Secret::new(field.encode(&field.random_element(&mut rng)));
        let shares = shamir_setup(&config, &field, &secret, &mut rng).unwrap();
        let subset: ShareMap = shares.into_iter().filter(|(i, _)| i.0 >= 3).collect();
        assert_eq!(shamir_recover(&field, 3, &subset).unwrap(), secret);
    }
}
