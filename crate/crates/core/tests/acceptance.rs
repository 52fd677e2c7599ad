//! One line per acceptance criterion. Runs without the libtest harness so the
//! lines always print; exits non-zero if any criterion fails.

mod common;

use std::panic::{self, AssertUnwindSafe};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use common::*;
use s3cdm::harness::{Scenario, Step, Topology, TopologyConfig, Transcript};
use s3cdm::routing::RouteError;
use s3cdm::sss::{
    shamir_setup_with_coefficients, ParticipantIndex, PrimeField, PublicParams, Scheme, SchemeConfig, SchemeKind,
    Secret, ShareBytes, ShareMap, SssError,
};
use s3cdm::store::{ActionRecord, ActionStore, Level, Verdict};

type Outcome = Result<(), String>;
/// Presence of the level 0, 9, 1 and 2 rows for one pair.
type Rows = (bool, bool, bool, bool);
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(condition: bool, message: impl FnOnce() -> String) -> Outcome {
    if condition {
        Ok(())
    } else {
        Err(message())
    }
}

fn pick(shares: &ShareMap, indices: &[u32]) -> ShareMap {
    indices.iter().map(|&i| (ParticipantIndex(i), shares[&ParticipantIndex(i)].clone())).collect()
}

fn hash_scheme_exhaustive() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    for n in 1..=5u32 {
        for t in 1..=n {
            let scheme = Scheme::new(SchemeConfig::hash_based(t as usize, n as usize).unwrap()).unwrap();
            let dealing = scheme.deal(&mut rng).unwrap();
            let PublicParams::Controls(controls) = &dealing.public else { return Err("no controls".into()) };
            ensure(controls.len() as u64 == binomial(n as u64, t as u64), || format!("({t},{n}) control count"))?;
            for record in controls {
                let parts: Vec<&[u8]> =
                    record.subset.indices().iter().map(|i| dealing.shares[&ParticipantIndex(*i)].as_bytes()).collect();
                let expected = hash_control(&parts, dealing.secret.as_bytes());
                ensure(record.control.as_bytes() == expected, || format!("({t},{n}) control {}", record.subset))?;
            }
            for subset in all_subsets(n) {
                let shares = pick(&dealing.shares, &subset);
                let result = scheme.recover(&dealing.public, &shares);
                if subset.len() == t as usize {
                    ensure(result.as_ref() == Ok(&dealing.secret), || format!("({t},{n}) {subset:?} did not recover"))?;
                    // any altered share yields a different candidate
                    for victim in &subset {
                        let mut tampered = shares.clone();
                        let mut bytes = tampered[&ParticipantIndex(*victim)].as_bytes().to_vec();
                        bytes[0] ^= 0x01;
                        tampered.insert(ParticipantIndex(*victim), ShareBytes::new(bytes));
                        let candidate = scheme.recover(&dealing.public, &tampered).unwrap();
                        ensure(candidate != dealing.secret, || format!("({t},{n}) tamper of {victim} undetected"))?;
                    }
                } else if !subset.is_empty() {
                    ensure(matches!(result, Err(SssError::ControlNotFound(_))), || {
                        format!("({t},{n}) {subset:?} gave {result:?}")
                    })?;
                }
            }
            let short = ShareBytes::new(vec![0; 31]);
            let mut shares = pick(&dealing.shares, &(1..=t).collect::<Vec<_>>());
            shares.insert(ParticipantIndex(1), short);
            let result = scheme.recover(&dealing.public, &shares);
            ensure(matches!(result, Err(SssError::LengthMismatch { .. })), || format!("short share gave {result:?}"))?;
        }
    }
    Ok(())
}

fn decode_small(share: &ShareBytes) -> (i128, i128) {
    let b = share.as_bytes();
    let x = u32::from_be_bytes([b[0], b[1], b[2], b[3]]) as i128;
    let y = b[4..].iter().fold(0i128, |acc, v| acc * 256 + *v as i128);
    (x, y)
}

fn shamir_matches_lagrange_oracle() -> Outcome {
    const P: i128 = 257;
    let field = PrimeField::small(257).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    for instance in 0..50 {
        let n = rng.gen_range(1..=8usize);
        let t = rng.gen_range(1..=n);
        let config = SchemeConfig::shamir(t, n).unwrap();
        let secret_value: i128 = rng.gen_range(0..P);
        let coefficients: Vec<i128> = (1..t).map(|_| rng.gen_range(0..P)).collect();
        let secret = Secret::new(vec![(secret_value >> 8) as u8, secret_value as u8]);
        let big: Vec<_> = coefficients.iter().map(|c| num_bigint::BigUint::from(*c as u64)).collect();
        let shares = shamir_setup_with_coefficients(&config, &field, &secret, &big).unwrap();

        let mut poly = vec![secret_value];
        poly.extend(&coefficients);
        for (index, share) in &shares {
            let (x, y) = decode_small(share);
            ensure(x == index.get() as i128, || format!("#{instance}: share {index} has x={x}"))?;
            ensure(y == poly_eval(&poly, x, P), || format!("#{instance}: share {index} off the polynomial"))?;
        }

        let scheme = Scheme::with_field(config, field.clone()).unwrap();
        let public = PublicParams::Field(field.clone());
        let mut indices: Vec<u32> = (1..=n as u32).collect();
        for _ in 0..3 {
            // random t-subset
            for i in (1..indices.len()).rev() {
                indices.swap(i, rng.gen_range(0..=i));
            }
            let chosen = &indices[..t];
            let points: Vec<(i128, i128)> =
                chosen.iter().map(|i| decode_small(&shares[&ParticipantIndex(*i)])).collect();
            let oracle = lagrange_at_zero(&points, P);
            ensure(oracle == secret_value, || format!("#{instance}: oracle disagrees with dealt secret"))?;
            let recovered = scheme.recover(&public, &pick(&shares, chosen)).map_err(|e| e.to_string())?;
            ensure(recovered == secret, || format!("#{instance}: library recovered {}", recovered.to_hex()))?;
            if t > 1 {
                let result = scheme.recover(&public, &pick(&shares, &chosen[..t - 1]));
                ensure(matches!(result, Err(SssError::InsufficientShares { .. })), || {
                    format!("#{instance}: t-1 shares gave {result:?}")
                })?;
            }
        }
    }
    Ok(())
}

fn run_script(name: &str, scheme: Option<SchemeKind>) -> Transcript {
    let mut scenario = Scenario::from_json(&read_scenario(name)).expect("script parses");
    if let Some(kind) = scheme {
        for step in &mut scenario.steps {
            if let Step::ConfigureScheme { config } = step {
                config.kind = kind;
            }
        }
    }
    let mut topology = Topology::boot(TopologyConfig::demo().with_seed(11)).expect("topology boots");
    scenario.run(&mut topology)
}

fn script_passes_and_matches_golden(script: &str, golden: &str) -> Outcome {
    let transcript = run_script(script, None);
    if let Some(step) = transcript.failing_step() {
        return Err(format!("{script}: step {} {} failed: {:?}", step.index, step.step, step.outcome));
    }
    ensure(transcript.render(true) == read_golden(golden), || format!("{script}: transcript differs from golden"))
}

fn request_flows() -> Outcome {
    script_passes_and_matches_golden("case1_unconditional.json", "case1_unconditional")?;
    script_passes_and_matches_golden("case2_bound_request.json", "case2_bound_request")?;
    script_passes_and_matches_golden("case3_threshold.json", "case3_threshold")
}

fn compromise_detection() -> Outcome {
    script_passes_and_matches_golden("compromised_participant.json", "compromised_participant")?;
    script_passes_and_matches_golden("compromised_main.json", "compromised_main")?;
    // Same outcome under the polynomial scheme.
    for script in ["compromised_participant.json", "compromised_main.json"] {
        let transcript = run_script(script, Some(SchemeKind::Shamir));
        ensure(transcript.passed(), || format!("{script} under shamir:\n{}", transcript.render(true)))?;
    }
    Ok(())
}

fn broken_path() -> Outcome {
    script_passes_and_matches_golden("broken_path.json", "broken_path")
}

fn routing_matches_brute_force() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    for g in 0..200 {
        let (graph, oracle) = random_graph(&mut rng);
        for from in &oracle.vertices {
            for to in &oracle.vertices {
                let actual = graph.next_hop(from, to);
                match (oracle.next_hop(from, to), actual) {
                    (Some(expected), Ok(hop)) => {
                        ensure(hop == expected, || format!("graph {g}: {from}->{to} via {hop}, oracle {expected}"))?
                    }
                    (None, Err(RouteError::NoRoute { .. })) => {}
                    (expected, actual) => {
                        return Err(format!("graph {g}: {from}->{to} got {actual:?}, oracle {expected:?}"))
                    }
                }
                ensure(graph.shortest_distance(from, to) == oracle.distance(from, to), || {
                    format!("graph {g}: distance {from}->{to}")
                })?;
            }
        }
    }
    Ok(())
}

fn schemes_interchangeable() -> Outcome {
    for script in ["case3_threshold.json", "compromised_participant.json", "broken_path.json"] {
        let hash = run_script(script, Some(SchemeKind::HashBased));
        let shamir = run_script(script, Some(SchemeKind::Shamir));
        ensure(hash.passed() && shamir.passed(), || format!("{script}: a scheme failed"))?;
        ensure(hash.summary() == shamir.summary(), || format!("{script}: transcripts differ between schemes"))?;
    }
    Ok(())
}

fn cascade_table() -> Outcome {
    use Verdict::*;
    // (level 0 row, level 9 row, level 1 row, level 2 row) => verdict, action
    let table: [(Rows, Verdict, Option<&str>); 16] = [
        ((false, false, false, false), Denied, None),
        ((false, false, false, true), NeedsLevel2Recovery, None),
        ((false, false, true, false), AllowedLevel1, Some("A1")),
        ((false, false, true, true), AllowedLevel1, Some("A1")),
        ((false, true, false, false), Denied, None),
        ((false, true, false, true), NeedsLevel2Recovery, None),
        ((false, true, true, false), AllowedLevel1, Some("A1")),
        ((false, true, true, true), AllowedLevel1, Some("A1")),
        ((true, false, false, false), Denied, None),
        ((true, false, false, true), Denied, None),
        ((true, false, true, false), Denied, None),
        ((true, false, true, true), Denied, None),
        ((true, true, false, false), AllowedLevel0, Some("A9")),
        ((true, true, false, true), AllowedLevel0, Some("A9")),
        ((true, true, true, false), AllowedLevel0, Some("A9")),
        ((true, true, true, true), AllowedLevel0, Some("A9")),
    ];
    for ((l0, l9, l1, l2), verdict, action) in table {
        let mut store = ActionStore::in_memory();
        let mut rows = Vec::new();
        if l0 {
            rows.push(ActionRecord::unchecked("controller-1", "node-2"));
        }
        if l9 {
            rows.push(ActionRecord::globally_valid("R", "A9"));
        }
        if l1 {
            rows.push(ActionRecord::new("controller-1", "node-2", Level::Direct, "R", "A1"));
        }
        if l2 {
            rows.push(ActionRecord::new("controller-1", "node-2", Level::SecretGated, "ab12", "A2"));
        }
        store.upsert_actions(&rows).map_err(|e| e.to_string())?;
        let outcome = store.authorize_request("controller-1", "node-2", "R").map_err(|e| e.to_string())?;
        ensure(outcome.verdict == verdict && outcome.action.as_deref() == action, || {
            format!(
                "{:?}: got {:?}/{:?}, expected {verdict:?}/{action:?}",
                (l0, l9, l1, l2),
                outcome.verdict,
                outcome.action
            )
        })?;
    }
    // A level-1 row for another pair grants nothing here.
    let mut store = ActionStore::in_memory();
    store
        .upsert_actions(&[ActionRecord::new("controller-2", "node-2", Level::Direct, "R", "A1")])
        .map_err(|e| e.to_string())?;
    let outcome = store.authorize_request("controller-1", "node-2", "R").map_err(|e| e.to_string())?;
    ensure(outcome.verdict == Denied, || "foreign pair granted".into())
}

fn main() {
    // Keep scenario noise and panics out of the report.
    panic::set_hook(Box::new(|_| {}));

    let criteria: [Criterion; 8] = [
        ("hash scheme: t-subsets recover, other sizes and tampering fail (all t <= n <= 5)", hash_scheme_exhaustive),
        ("shamir: 50 instances agree with an independent Lagrange oracle mod 257", shamir_matches_lagrange_oracle),
        ("request flows: unconditional, bound and threshold cases match golden transcripts", request_flows),
        ("compromise: bad participant share retried, bad main share rejected and audited", compromise_detection),
        ("broken path: disabled dealer-node link relayed by exactly one intermediate", broken_path),
        ("routing: next hop agrees with brute-force search on 200 random graphs", routing_matches_brute_force),
        ("schemes: hash and shamir give identical protocol transcripts", schemes_interchangeable),
        ("cascade: authorization verdicts match the 16-case table", cascade_table),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|p| Err(p.downcast_ref::<String>().cloned().unwrap_or_else(|| "panicked".into())));
        match outcome {
            Ok(()) => println!("PASS  {name}"),
            Err(reason) => {
                failed += 1;
                println!("FAIL  {name}\n      {reason}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
