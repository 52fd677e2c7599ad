use serde::{Deserialize, Serialize};

use crate::store::WILDCARD;

/// How the dealer picks the `n - 1` participants that join a request's main
/// controller.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum SelectionStrategy {
    /// Lowest-indexed controllers other than the main one.
    #[default]
    FirstN,
    /// Rotates through the pool across rows.
    RoundRobin,
    /// Exactly these controllers, in this order.
    Explicit { controllers: Vec<String> },
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Selector {
    pub strategy: SelectionStrategy,
    cursor: usize,
}

impl Selector {
    pub fn new(strategy: SelectionStrategy) -> Self {
        Self { strategy, cursor: 0 }
    }

    pub fn select(&mut self, pool: &[String], main: &str, count: usize) -> Result<Vec<String>, String> {
        let candidates: Vec<&String> = match &self.strategy {
            SelectionStrategy::Explicit { controllers } => controllers.iter().filter(|c| *c != main).collect(),
            _ => pool.iter().filter(|c| *c != main).collect(),
        };
        if candidates.len() < count {
            return Err(format!("need {count} participants besides {main}, only {} available", candidates.len()));
        }
        let picked = match self.strategy {
            SelectionStrategy::RoundRobin => {
                let start = self.cursor % candidates.len();
                self.cursor = start + count;
                (0..count).map(|k| candidates[(start + k) % candidates.len()].clone()).collect()
            }
            _ => candidates.into_iter().take(count).cloned().collect(),
        };
        Ok(picked)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Side {
    From,
    To,
}

/// Maps the shorthand an operator types in an action table onto service
/// names: `3` in the From column is the third controller, `N4` the fourth
/// node, and `0` stays the wildcard.
pub(crate) fn resolve_name(raw: &str, side: Side, controllers: &[String], nodes: &[String]) -> Result<String, String> {
    let raw = raw.trim();
    if raw == WILDCARD {
        return Ok(WILDCARD.to_string());
    }
    if controllers.iter().chain(nodes).any(|n| n == raw) {
        return Ok(raw.to_string());
    }
    let (pool, digits) = match raw.as_bytes().first() {
        Some(b'C' | b'c') => (controllers, &raw[1..]),
        Some(b'N' | b'n') => (nodes, &raw[1..]),
        _ if side == Side::From => (controllers, raw),
        _ => (nodes, raw),
    };
    let k: usize = digits.trim_start_matches('_').parse().map_err(|_| format!("unknown service `{raw}`"))?;
    pool.get(k.wrapping_sub(1)).cloned().ok_or_else(|| format!("unknown service `{raw}`"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(prefix: &str, n: usize) -> Vec<String> {
        (1..=n).map(|k| format!("{prefix}-{k}")).collect()
    }

    #[test]
    fn first_n_skips_main() {
        let pool = names("controller", 6);
        let mut s = Selector::default();
        assert_eq!(s.select(&pool, "controller-1", 2).unwrap(), ["controller-2", "controller-3"]);
        assert_eq!(s.select(&pool, "controller-2", 2).unwrap(), ["controller-1", "controller-3"]);
    }

    #[test]
    fn round_robin_rotates() {
        let pool = names("controller", 4);
        let mut s = Selector::new(SelectionStrategy::RoundRobin);
        assert_eq!(s.select(&pool, "controller-1", 2).unwrap(), ["controller-2", "controller-3"]);
        assert_eq!(s.select(&pool, "controller-1", 2).unwrap(), ["controller-4", "controller-2"]);
    }

    #[test]
    fn explicit_list() {
        let pool = names("controller", 6);
        let strategy = SelectionStrategy::Explicit { controllers: vec!["controller-5".into(), "controller-6".into()] };
        let mut s = Selector::new(strategy);
        assert_eq!(s.select(&pool, "controller-3", 2).unwrap(), ["controller-5", "controller-6"]);
        assert!(s.select(&pool, "controller-5", 2).is_err());
    }

    #[test]
    fn pool_too_small() {
        let pool = names("controller", 2);
        assert!(Selector::default().select(&pool, "controller-1", 2).is_err());
    }

    #[test]
    fn shorthand_names() {
        let c = names("controller", 6);
        let n = names("node", 6);
        assert_eq!(resolve_name("3", Side::From, &c, &n).unwrap(), "controller-3");
        assert_eq!(resolve_name("4", Side::To, &c, &n).unwrap(), "node-4");
        assert_eq!(resolve_name("C_5", Side::To, &c, &n).unwrap(), "controller-5");
        assert_eq!(resolve_name("N2", Side::From, &c, &n).unwrap(), "node-2");
        assert_eq!(resolve_name("0", Side::From, &c, &n).unwrap(), "0");
        assert_eq!(resolve_name("node-6", Side::From, &c, &n).unwrap(), "node-6");
        assert!(resolve_name("7", Side::From, &c, &n).is_err());
        assert!(resolve_name("x", Side::To, &c, &n).is_err());
    }
}
