//! Hash-based `(t, n)` threshold scheme.
//!
//! Setup draws `n` distinct random shares and a secret `h`, all of digest
//! length. For each minimal authorized subset the shares are concatenated in
//! ascending participant order, hashed to `h_i`, and published as the control
//! `c_i = h_i XOR h`. Recovery recomputes `h_i` from the presented shares and
//! XORs it with the matching control.

use std::collections::BTreeSet;

use rand::RngCore;
use sha2::{Digest, Sha256};

use super::{
    enumerate_minimal_authorized_subsets, AuthorizedSubset, ControlRecord, ParticipantIndex, Result, SchemeConfig,
    SchemeKind, Secret, ShareBytes, ShareMap, SssError,
};

/// SHA-256 output length; also the share and secret length.
pub const DIGEST_LEN: usize = 32;

pub fn digest(data: &[u8]) -> [u8; DIGEST_LEN] {
    Sha256::digest(data).into()
}

/// Bitwise XOR of two equal-length byte strings.
pub fn xor_bytes(a: &[u8], b: &[u8]) -> Result<Vec<u8>> {
    if a.len() != b.len() {
        return Err(SssError::LengthMismatch { expected: a.len(), actual: b.len() });
    }
    Ok(a.iter().zip(b).map(|(x, y)| x ^ y).collect())
}

#[derive(Debug, Clone)]
pub struct HashSetup {
    pub secret: Secret,
    pub shares: ShareMap,
    pub controls: Vec<ControlRecord>,
}

/// Deals a fresh random secret.
pub fn hash_setup<R: RngCore + ?Sized>(config: &SchemeConfig, rng: &mut R) -> Result<HashSetup> {
    let mut secret = vec![0u8; DIGEST_LEN];
    rng.fill_bytes(&mut secret);
    hash_setup_with_secret(config, Secret::new(secret), rng)
}

/// Deals shares for a caller-provided secret of digest length.
pub fn hash_setup_with_secret<R: RngCore + ?Sized>(
    config: &SchemeConfig,
    secret: Secret,
    rng: &mut R,
) -> Result<HashSetup> {
    if config.kind != SchemeKind::HashBased {
        return Err(SssError::SchemeMismatch("hash_setup called with a non-hash config"));
    }
    config.validate()?;
    if secret.len() != DIGEST_LEN {
        return Err(SssError::LengthMismatch { expected: DIGEST_LEN, actual: secret.len() });
    }

    let shares = distinct_random_shares(config.participants, rng);
    let subsets = enumerate_minimal_authorized_subsets(config.participants, config.threshold)?;
    let controls = subsets
        .into_iter()
        .map(|subset| {
            let hashed = digest(&private_message(&subset, &shares));
            let control = xor_bytes(&hashed, secret.as_bytes())?;
            Ok(ControlRecord { subset, control: ShareBytes::new(control) })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(HashSetup { secret, shares, controls })
}

fn distinct_random_shares<R: RngCore + ?Sized>(n: usize, rng: &mut R) -> ShareMap {
    let mut seen = BTreeSet::new();
    let mut shares = ShareMap::new();
    let mut index = 1u32;
    while shares.len() < n {
        let mut bytes = vec![0u8; DIGEST_LEN];
        rng.fill_bytes(&mut bytes);
        // collisions are regenerated, never returned
        if seen.insert(bytes.clone()) {
            shares.insert(ParticipantIndex(index), ShareBytes::new(bytes));
            index += 1;
        }
    }
    shares
}

fn private_message(subset: &AuthorizedSubset, shares: &ShareMap) -> Vec<u8> {
    subset.members().iter().flat_map(|index| shares[index].as_bytes().iter().copied()).collect()
}

/// Recovers a secret candidate. Shares are taken in ascending index order
/// (the map's order); the control is looked up by the exact index set.
pub fn hash_recover(shares: &ShareMap, controls: &[ControlRecord]) -> Result<Secret> {
    if shares.is_empty() {
        return Err(SssError::NoShares);
    }
    let indices: Vec<ParticipantIndex> = shares.keys().copied().collect();
    let control = controls
        .iter()
        .find(|record| record.subset.members() == indices.as_slice())
        .ok_or_else(|| SssError::ControlNotFound(render(&indices)))?;

    if let Some(bad) = shares.values().find(|s| s.len() != DIGEST_LEN) {
        return Err(SssError::LengthMismatch { expected: DIGEST_LEN, actual: bad.len() });
    }
    if control.control.len() != DIGEST_LEN {
        return Err(SssError::LengthMismatch { expected: DIGEST_LEN, actual: control.control.len() });
    }

    let message: Vec<u8> = shares.values().flat_map(|s| s.as_bytes().iter().copied()).collect();
    let hashed = digest(&message);
    Ok(Secret::new(xor_bytes(&hashed, control.control.as_bytes())?))
}

fn render(indices: &[ParticipantIndex]) -> String {
    let parts: Vec<String> = indices.iter().map(ToString::to_string).collect();
    format!("[{}]", parts.join(","))
}
