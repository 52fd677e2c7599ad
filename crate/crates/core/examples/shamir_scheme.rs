//! Shamir sharing over a small prime so the numbers can be checked by hand,
//! then over the 256-bit production field.

use num_bigint::BigUint;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use s3cdm::sss::{
    decode_point, shamir_setup_with_coefficients, ParticipantIndex, PrimeField, PublicParams, Scheme, SchemeConfig,
    Secret, ShareMap,
};

fn main() {
    // f(x) = 42 + 7x + 3x^2 mod 257
    let field = PrimeField::small(257).unwrap();
    let config = SchemeConfig::shamir(3, 5).unwrap();
    let secret = Secret::new(field.encode(&BigUint::from(42u32)));
    let coefficients = [BigUint::from(7u32), BigUint::from(3u32)];
    let shares = shamir_setup_with_coefficients(&config, &field, &secret, &coefficients).unwrap();
    for share in shares.values() {
        let (x, y) = decode_point(&field, share).unwrap();
        println!("f({x}) = {y}");
    }

    let scheme = Scheme::with_field(config, field.clone()).unwrap();
    let picked: ShareMap =
        [2u32, 4, 5].iter().map(|&i| (ParticipantIndex(i), shares[&ParticipantIndex(i)].clone())).collect();
    let recovered = scheme.recover(&PublicParams::Field(field), &picked).unwrap();
    println!("recovered from 2,4,5: {}", BigUint::from_bytes_be(recovered.as_bytes()));

    let production = Scheme::new(SchemeConfig::shamir(2, 3).unwrap()).unwrap();
    let dealing = production.deal(&mut ChaCha20Rng::seed_from_u64(1)).unwrap();
    println!("production share length: {} bytes", production.share_len());
    println!("secret {}", dealing.secret.to_hex());
}
