//! Deal a hash-based (2,3) instance and recover it from each pair.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use s3cdm::sss::{
    enumerate_minimal_authorized_subsets, ParticipantIndex, PublicParams, Scheme, SchemeConfig, ShareMap,
};

fn main() {
    let scheme = Scheme::new(SchemeConfig::hash_based(2, 3).unwrap()).unwrap();
    let dealing = scheme.deal(&mut ChaCha20Rng::seed_from_u64(42)).unwrap();
    println!("secret  {}", dealing.secret.to_hex());
    for (index, share) in &dealing.shares {
        println!("share {index} {}", share.to_hex());
    }
    if let PublicParams::Controls(controls) = &dealing.public {
        for record in controls {
            println!("control {} {}", record.subset, record.control.to_hex());
        }
    }

    for subset in enumerate_minimal_authorized_subsets(3, 2).unwrap() {
        let shares: ShareMap = subset.members().iter().map(|i| (*i, dealing.shares[i].clone())).collect();
        let secret = scheme.recover(&dealing.public, &shares).unwrap();
        println!("{subset} recovers: {}", secret == dealing.secret);
    }

    let one: ShareMap = [(ParticipantIndex(2), dealing.shares[&ParticipantIndex(2)].clone())].into();
    println!("single share: {}", scheme.recover(&dealing.public, &one).unwrap_err());
}
