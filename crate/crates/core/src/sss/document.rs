use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use super::{
    AuthorizedSubset, ControlRecord, ParticipantIndex, PrimeField, PublicParams, Result, SchemeConfig, SchemeKind,
    ShareBytes, ShareMap, SssError,
};

pub const HASH_FUNCTION: &str = "sha256";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlEntry {
    pub subset: AuthorizedSubset,
    pub control: ShareBytes,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShareEntry {
    pub index: ParticipantIndex,
    pub value: ShareBytes,
}

/// JSON persistence form of a scheme instance: config, public controls or
/// field, and optionally the shares. Byte strings are lowercase hex.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemeDocument {
    pub scheme: SchemeKind,
    pub threshold: usize,
    pub participants: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prime: Option<String>,
    #[serde(default)]
    pub controls: Vec<ControlEntry>,
    #[serde(default)]
    pub shares: Vec<ShareEntry>,
}

impl SchemeDocument {
    pub fn new(config: &SchemeConfig, public: &PublicParams, shares: &ShareMap) -> Self {
        let (hash, prime, controls) = match public {
            PublicParams::Controls(records) => (
                Some(HASH_FUNCTION.to_string()),
                None,
                records.iter().map(|r| ControlEntry { subset: r.subset.clone(), control: r.control.clone() }).collect(),
            ),
            PublicParams::Field(field) => (None, Some(field.modulus().to_str_radix(16)), Vec::new()),
        };
        Self {
            scheme: config.kind,
            threshold: config.threshold,
            participants: config.participants,
            hash,
            prime,
            controls,
            shares: shares.iter().map(|(index, value)| ShareEntry { index: *index, value: value.clone() }).collect(),
        }
    }

    pub fn config(&self) -> Result<SchemeConfig> {
        SchemeConfig::new(self.scheme, self.threshold, self.participants)
    }

    pub fn public_params(&self) -> Result<PublicParams> {
        match self.scheme {
            SchemeKind::HashBased => {
                if let Some(hash) = &self.hash {
                    if hash != HASH_FUNCTION {
                        return Err(SssError::SchemeMismatch("unsupported hash function"));
                    }
                }
                Ok(PublicParams::Controls(
                    self.controls
                        .iter()
                        .map(|c| ControlRecord { subset: c.subset.clone(), control: c.control.clone() })
                        .collect(),
                ))
            }
            SchemeKind::Shamir => {
                let field = match &self.prime {
                    Some(hex) => {
                        PrimeField::new(BigUint::parse_bytes(hex.as_bytes(), 16).ok_or(SssError::InvalidModulus)?)?
                    }
                    None => PrimeField::production(),
                };
                Ok(PublicParams::Field(field))
            }
        }
    }

    pub fn share_map(&self) -> ShareMap {
        self.shares.iter().map(|s| (s.index, s.value.clone())).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("document serializes")
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}
