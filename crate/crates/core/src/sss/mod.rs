//! Threshold secret sharing.
//!
//! Two `(t, n)` schemes sit behind one interface:
//!
//! - a hash-based scheme where every minimal authorized subset gets a public
//!   control value `c_i = H(s_p1 || ... || s_pt) XOR h`, and
//! - Shamir's polynomial scheme over a prime field.
//!
//! Both are pure functions of their inputs plus an injected random source, so
//! a seeded RNG makes every dealing bit-reproducible.

mod document;
mod field;
mod hash;
mod shamir;
mod subsets;

use std::collections::BTreeMap;
use std::fmt;

use rand::RngCore;
use serde::{Deserialize, Serialize};

pub use document::{ControlEntry, SchemeDocument, ShareEntry};
pub use field::PrimeField;
pub use hash::{digest, hash_recover, hash_setup, hash_setup_with_secret, xor_bytes, HashSetup, DIGEST_LEN};
pub use shamir::{decode_point, encode_point, shamir_recover, shamir_setup, shamir_setup_with_coefficients};
pub use subsets::enumerate_minimal_authorized_subsets;

/// Shares keyed (and therefore ordered) by participant index.
pub type ShareMap = BTreeMap<ParticipantIndex, ShareBytes>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SssError {
    #[error("invalid parameters: threshold {threshold}, participants {participants}")]
    InvalidParameters { threshold: usize, participants: usize },
    #[error("control not found for subset {0}")]
    ControlNotFound(String),
    #[error("length not matched: expected {expected} bytes, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("insufficient shares: need {needed}, got {got}")]
    InsufficientShares { needed: usize, got: usize },
    #[error("duplicate x-coordinate {0}")]
    DuplicateX(u32),
    #[error("secret is not an element of the field")]
    SecretOutOfRange,
    #[error("malformed share encoding: {0}")]
    MalformedShare(String),
    #[error("no shares provided")]
    NoShares,
    #[error("invalid field modulus")]
    InvalidModulus,
    #[error("scheme mismatch: {0}")]
    SchemeMismatch(&'static str),
}

pub type Result<T, E = SssError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    #[serde(alias = "hash", alias = "hash-based", alias = "HashBased")]
    HashBased,
    #[serde(alias = "Shamir")]
    Shamir,
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemeKind::HashBased => f.write_str("hash_based"),
            SchemeKind::Shamir => f.write_str("shamir"),
        }
    }
}

/// Which scheme plus its `(t, n)` threshold parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemeConfig {
    #[serde(rename = "scheme")]
    pub kind: SchemeKind,
    pub threshold: usize,
    pub participants: usize,
}

impl SchemeConfig {
    pub fn new(kind: SchemeKind, threshold: usize, participants: usize) -> Result<Self> {
        let config = Self { kind, threshold, participants };
        config.validate()?;
        Ok(config)
    }

    pub fn hash_based(threshold: usize, participants: usize) -> Result<Self> {
        Self::new(SchemeKind::HashBased, threshold, participants)
    }

    pub fn shamir(threshold: usize, participants: usize) -> Result<Self> {
        Self::new(SchemeKind::Shamir, threshold, participants)
    }

    pub fn validate(&self) -> Result<()> {
        check_threshold(self.threshold, self.participants)
    }
}

pub(crate) fn check_threshold(threshold: usize, participants: usize) -> Result<()> {
    if threshold < 1 || participants < 1 || threshold > participants || participants > u32::MAX as usize {
        return Err(SssError::InvalidParameters { threshold, participants });
    }
    Ok(())
}

/// 1-based participant position within one scheme instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParticipantIndex(pub u32);

impl ParticipantIndex {
    pub fn get(self) -> u32 {
        self.0
    }
}

impl fmt::Display for ParticipantIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u32> for ParticipantIndex {
    fn from(value: u32) -> Self {
        Self(value)
    }
}

/// Opaque share payload, serialized as lowercase hex.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct ShareBytes(Vec<u8>);

impl ShareBytes {
    pub fn new(bytes: Vec<u8>) -> Self {
        Self(bytes)
    }

    pub fn from_hex(text: &str) -> std::result::Result<Self, hex::FromHexError> {
        hex::decode(text.trim()).map(Self)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.0)
    }
}

impl fmt::Debug for ShareBytes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ShareBytes({})", self.to_hex())
    }
}

impl From<ShareBytes> for String {
    fn from(value: ShareBytes) -> Self {
        value.to_hex()
    }
}

impl TryFrom<String> for ShareBytes {
    type Error = hex::FromHexError;

    fn try_from(value: String) -> std::result::Result<Self, Self::Error> {
        Self::from_hex(&value)
    }
}

/// The shared secret. When used as an action-store key it is rendered as
/// lowercase hex.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Secret(Vec<u8>);

impl Secret {
    pub fn new(bytes: Vec<u8>) -> Self {
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.0)
    }
}

impl fmt::Debug for Secret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Secret({})", self.to_hex())
    }
}

impl From<Secret> for String {
    fn from(value: Secret) -> Self {
        value.to_hex()
    }
}

impl TryFrom<String> for Secret {
    type Error = hex::FromHexError;

    fn try_from(value: String) -> std::result::Result<Self, Self::Error> {
        hex::decode(value.trim()).map(Self)
    }
}

/// A minimal authorized subset: exactly `t` strictly ascending indices.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct AuthorizedSubset(Vec<ParticipantIndex>);

impl AuthorizedSubset {
    /// Builds a subset from strictly ascending, nonzero indices.
    pub fn new(members: Vec<ParticipantIndex>) -> Result<Self> {
        if members.is_empty() || members[0].0 == 0 || members.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SssError::MalformedShare(format!(
                "subset must be nonempty, nonzero and strictly ascending: {members:?}"
            )));
        }
        Ok(Self(members))
    }

    pub fn members(&self) -> &[ParticipantIndex] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, index: ParticipantIndex) -> bool {
        self.0.binary_search(&index).is_ok()
    }

    pub fn indices(&self) -> Vec<u32> {
        self.0.iter().map(|p| p.0).collect()
    }
}

impl fmt::Display for AuthorizedSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, member) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{member}")?;
        }
        f.write_str("]")
    }
}

impl TryFrom<Vec<u32>> for AuthorizedSubset {
    type Error = SssError;

    fn try_from(value: Vec<u32>) -> Result<Self> {
        Self::new(value.into_iter().map(ParticipantIndex).collect())
    }
}

impl From<AuthorizedSubset> for Vec<u32> {
    fn from(value: AuthorizedSubset) -> Self {
        value.indices()
    }
}

/// Public per-subset control value `c_i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlRecord {
    pub subset: AuthorizedSubset,
    pub control: ShareBytes,
}

/// Public material a dealer keeps to recover the secret later.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PublicParams {
    Controls(Vec<ControlRecord>),
    Field(PrimeField),
}

/// Output of one dealing: the secret, one share per participant, and the
/// public recovery material.
#[derive(Debug, Clone)]
pub struct Dealing {
    pub secret: Secret,
    pub shares: ShareMap,
    pub public: PublicParams,
}

/// A configured scheme instance. Shamir instances carry their field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scheme {
    config: SchemeConfig,
    field: PrimeField,
}

impl Scheme {
    /// Hash-based instances ignore the field; Shamir instances use the
    /// production field.
    pub fn new(config: SchemeConfig) -> Result<Self> {
        Self::with_field(config, PrimeField::production())
    }

    pub fn with_field(config: SchemeConfig, field: PrimeField) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, field })
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.config
    }

    pub fn field(&self) -> &PrimeField {
        &self.field
    }

    /// Byte length of every share this instance produces.
    pub fn share_len(&self) -> usize {
        match self.config.kind {
            SchemeKind::HashBased => DIGEST_LEN,
            SchemeKind::Shamir => 4 + self.field.element_width(),
        }
    }

    /// Deals a fresh random secret.
    pub fn deal<R: RngCore + ?Sized>(&self, rng: &mut R) -> Result<Dealing> {
        match self.config.kind {
            SchemeKind::HashBased => {
                let setup = hash_setup(&self.config, rng)?;
                Ok(Dealing {
                    secret: setup.secret,
                    shares: setup.shares,
                    public: PublicParams::Controls(setup.controls),
                })
            }
            SchemeKind::Shamir => {
                let value = self.field.random_element(rng);
                let secret = Secret::new(self.field.encode(&value));
                let shares = shamir_setup(&self.config, &self.field, &secret, rng)?;
                Ok(Dealing { secret, shares, public: PublicParams::Field(self.field.clone()) })
            }
        }
    }

    /// Recovers a secret candidate from the given shares. Whether the
    /// candidate is the real secret is for the caller to decide.
    pub fn recover(&self, public: &PublicParams, shares: &ShareMap) -> Result<Secret> {
        match (self.config.kind, public) {
            (SchemeKind::HashBased, PublicParams::Controls(controls)) => hash_recover(shares, controls),
            (SchemeKind::Shamir, PublicParams::Field(field)) => shamir_recover(field, self.config.threshold, shares),
            (SchemeKind::HashBased, _) => Err(SssError::SchemeMismatch("hash-based scheme needs control records")),
            (SchemeKind::Shamir, _) => Err(SssError::SchemeMismatch("shamir scheme needs field parameters")),
        }
    }
}
