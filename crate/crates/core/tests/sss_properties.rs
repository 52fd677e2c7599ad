use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use s3cdm::sss::{ParticipantIndex, PrimeField, Scheme, SchemeConfig, SchemeDocument, ShareMap};

fn config_strategy() -> impl Strategy<Value = (usize, usize)> {
    (1usize..=6).prop_flat_map(|n| (1..=n, Just(n)))
}

fn subset(shares: &ShareMap, indices: &[u32]) -> ShareMap {
    indices.iter().map(|&i| (ParticipantIndex(i), shares[&ParticipantIndex(i)].clone())).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn any_threshold_subset_recovers(
        (t, n) in config_strategy(),
        seed in any::<u64>(),
        order in Just(()).prop_perturb(|_, mut rng| {
            let mut v: Vec<u32> = (1..=6).collect();
            for i in (1..v.len()).rev() { v.swap(i, (rng.next_u32() as usize) % (i + 1)); }
            v
        }),
        shamir in any::<bool>(),
    ) {
        let config = if shamir { SchemeConfig::shamir(t, n) } else { SchemeConfig::hash_based(t, n) }.unwrap();
        let scheme = Scheme::new(config).unwrap();
        let dealing = scheme.deal(&mut ChaCha20Rng::seed_from_u64(seed)).unwrap();
        prop_assert!(dealing.shares.values().all(|s| s.len() == scheme.share_len()));
        let chosen: Vec<u32> = {
            let mut c: Vec<u32> = order.into_iter().filter(|i| *i <= n as u32).take(t).collect();
            c.sort();
            c
        };
        let recovered = scheme.recover(&dealing.public, &subset(&dealing.shares, &chosen)).unwrap();
        prop_assert_eq!(recovered, dealing.secret);
    }

    #[test]
    fn small_field_documents_round_trip((t, n) in config_strategy(), seed in any::<u64>()) {
        let config = SchemeConfig::shamir(t, n).unwrap();
        let scheme = Scheme::with_field(config, PrimeField::small(257).unwrap()).unwrap();
        let dealing = scheme.deal(&mut ChaCha20Rng::seed_from_u64(seed)).unwrap();
        let document = SchemeDocument::new(&config, &dealing.public, &dealing.shares);
        let text = serde_json::to_string(&document).unwrap();
        let back: SchemeDocument = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, document);
    }
}
