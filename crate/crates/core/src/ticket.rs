use std::fmt;

use rand::RngCore;
use serde::{Deserialize, Serialize};

/// Maximum timestamp skew between two tickets that describe the same request.
pub const CONSISTENCY_WINDOW_MS: i64 = 30_000;

/// Canonical request descriptor exchanged between controller, node and dealer.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Ticket {
    /// UTC milliseconds.
    pub timestamp: i64,
    pub from: String,
    pub to: String,
    pub request: String,
    pub reference: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Inconsistency {
    #[error("field `{field}` differs: `{left}` vs `{right}`")]
    Field { field: &'static str, left: String, right: String },
    #[error("timestamps {skew_ms} ms apart exceed the {window_ms} ms window")]
    Skew { skew_ms: i64, window_ms: i64 },
}

impl Ticket {
    /// Raises a new ticket with a fresh reference
    /// `<unix-ms>-<from>-<to>-<request>-<4 hex>`.
    pub fn raise<R: RngCore + ?Sized>(timestamp: i64, from: &str, to: &str, request: &str, rng: &mut R) -> Self {
        let suffix = rng.next_u32() & 0xffff;
        Self {
            timestamp,
            from: from.into(),
            to: to.into(),
            request: request.into(),
            reference: format!("{timestamp}-{from}-{to}-{request}-{suffix:04x}"),
        }
    }

    /// Same request, re-stamped (e.g. the dealer's solicitation ticket).
    pub fn restamped(&self, timestamp: i64) -> Self {
        Self { timestamp, ..self.clone() }
    }

    /// `timestamp-from-to-request`.
    pub fn canonical(&self) -> String {
        format!("{}-{}-{}-{}", self.timestamp, self.from, self.to, self.request)
    }

    pub fn same_request(&self, other: &Ticket) -> bool {
        self.from == other.from
            && self.to == other.to
            && self.request == other.request
            && self.reference == other.reference
    }

    pub fn check_consistent(&self, other: &Ticket) -> Result<(), Inconsistency> {
        self.check_consistent_within(other, CONSISTENCY_WINDOW_MS)
    }

    pub fn check_consistent_within(&self, other: &Ticket, window_ms: i64) -> Result<(), Inconsistency> {
        let fields: [(&'static str, &String, &String); 4] = [
            ("from", &self.from, &other.from),
            ("to", &self.to, &other.to),
            ("request", &self.request, &other.request),
            ("reference", &self.reference, &other.reference),
        ];
        for (field, left, right) in fields {
            if left != right {
                return Err(Inconsistency::Field { field, left: left.clone(), right: right.clone() });
            }
        }
        let skew_ms = (self.timestamp - other.timestamp).abs();
        if skew_ms > window_ms {
            return Err(Inconsistency::Skew { skew_ms, window_ms });
        }
        Ok(())
    }
}

impl fmt::Display for Ticket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    use super::*;

    fn ticket() -> Ticket {
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        Ticket::raise(1_000, "C3", "N4", "R3", &mut rng)
    }

    #[test]
    fn canonical_rendering() {
        assert_eq!(ticket().canonical(), "1000-C3-N4-R3");
    }

    #[test]
    fn reference_extends_canonical_form() {
        let t = ticket();
        assert!(t.reference.starts_with("1000-C3-N4-R3-"));
        assert_eq!(t.reference.len(), "1000-C3-N4-R3-".len() + 4);
    }

    #[test]
    fn fresh_references_differ() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let a = Ticket::raise(1, "C1", "N2", "R1", &mut rng);
        let b = Ticket::raise(1, "C1", "N2", "R1", &mut rng);
        assert_ne!(a.reference, b.reference);
    }

    #[test]
    fn window_boundaries() {
        let t = ticket();
        assert!(t.check_consistent(&t.restamped(1_000 + CONSISTENCY_WINDOW_MS)).is_ok());
        assert!(matches!(
            t.check_consistent(&t.restamped(1_001 + CONSISTENCY_WINDOW_MS)),
            Err(Inconsistency::Skew { .. })
        ));
    }

    #[test]
    fn altered_request_is_inconsistent() {
        let t = ticket();
        let mut other = t.clone();
        other.request = "R9".into();
        assert!(matches!(t.check_consistent(&other), Err(Inconsistency::Field { field: "request", .. })));
    }
}
