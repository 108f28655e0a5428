//! Values recomputed without going through the library's own encoders.

use fairdraw_core::audit::chi_square_sf;
use fairdraw_core::{
    commit, mod_add, verify_transcript, ContributionValue, DrawSpec, Event, Mask, Modulus, Timestamp,
    Transcript,
};
use proptest::prelude::*;
use sha2::{Digest, Sha256};

fn hand_preimage(session: &str, who: &str, mask: &[u8; 32], m: u64, n: u64) -> Vec<u8> {
    let mut v = b"FAIRDRAW-COMMIT-V1".to_vec();
    v.push(session.len() as u8);
    v.extend(session.bytes());
    v.push(who.len() as u8);
    v.extend(who.bytes());
    v.extend(mask);
    v.extend(m.to_be_bytes());
    v.extend(n.to_be_bytes());
    v
}

#[test]
fn clock_face_examples() {
    let m = Modulus::new(12).unwrap();
    let v = |n| m.value(n).unwrap();
    assert_eq!(mod_add(&[v(9), v(4)], m).unwrap().get(), 1);
    assert_eq!(mod_add(&[v(11), v(2)], m).unwrap().get(), 1);
    assert_eq!(mod_add(&[v(11), v(1)], m).unwrap().get(), 0);
}

#[test]
fn five_stakeholder_draw() {
    let m = Modulus::new(10_000_000).unwrap();
    let values: Vec<ContributionValue> = [1_610_027, 5_871_032, 6_029_108, 7_664_824, 5_757_989]
        .iter()
        .map(|&n| m.value(n).unwrap())
        .collect();
    assert_eq!(mod_add(&values, m).unwrap().get(), 6_932_980);
}

#[test]
fn chi_square_table_values() {
    // Standard critical values at the 5% and 1% levels, and the closed form
    // exp(-x/2) for two degrees of freedom.
    let cases = [
        (3.841_458_820_694_124, 1, 0.05),
        (6.634_896_601_021_214, 1, 0.01),
        (18.307_038_053_275_146, 10, 0.05),
        (123.225_221_453_361_8, 99, 0.05),
    ];
    for (x, dof, p) in cases {
        let got = chi_square_sf(x, dof);
        assert!((got - p).abs() < 1e-9, "sf({x}, {dof}) = {got}, want {p}");
    }
    for x in [0.1, 1.0, 2.0, 10.0, 50.0] {
        let got = chi_square_sf(x, 2);
        let want = (-x / 2.0f64).exp();
        assert!((got - want).abs() <= 1e-10 * want, "sf({x}, 2) = {got}, want {want}");
    }
}

/// Hash of a `completed` record, framed by hand.
fn hand_completed_hash(seq: u64, prev: &[u8; 32], outcome: u64) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"FAIRDRAW-RECORD-V1");
    h.update(seq.to_be_bytes());
    h.update(prev);
    h.update([5u8]);
    h.update(outcome.to_be_bytes());
    h.finalize().into()
}

#[test]
fn completed_record_hash_and_chain_link() {
    let m = Modulus::new(12).unwrap();
    let ids = ["alice", "bob"];
    let spec = DrawSpec::new("oracle", m, ids.iter().map(|s| s.to_string()).collect());
    let mut t = Transcript::new();
    t.push(Event::CeremonyCreated { spec, at: Timestamp(0) }).unwrap();
    let masks = [Mask::from_bytes([1; 32]), Mask::from_bytes([2; 32])];
    for (i, id) in ids.iter().enumerate() {
        let digest = commit("oracle", id, m.value(9 - 5 * i as u64).unwrap(), &masks[i]).unwrap();
        t.push(Event::CommitmentSubmitted { stakeholder_id: id.to_string(), digest, at: Timestamp(1) })
            .unwrap();
    }
    for (i, id) in ids.iter().enumerate() {
        t.push(Event::RevealSubmitted {
            stakeholder_id: id.to_string(),
            value: 9 - 5 * i as u64,
            mask: masks[i],
            at: Timestamp(2),
        })
        .unwrap();
    }
    let sealed = t.seal_outcome().unwrap().clone();
    assert_eq!(sealed.event, Event::Completed { outcome: 1 });

    let records = t.records();
    for pair in records.windows(2) {
        assert_eq!(pair[1].prev_hash, pair[0].record_hash);
    }
    assert_eq!(records[0].prev_hash, [0u8; 32]);
    assert_eq!(sealed.record_hash, hand_completed_hash(sealed.seq, &sealed.prev_hash, 1));

    let report = verify_transcript(t.to_jsonl().as_bytes());
    assert!(report.is_ok());
    assert_eq!(report.recomputed_outcome, Some(1));
}

proptest! {
    #[test]
    fn digest_matches_hand_built_preimage(
        session in "[a-z0-9-]{1,40}",
        who in "[a-z]{1,20}",
        mask in any::<[u8; 32]>(),
        m in 2u64..=i64::MAX as u64,
        seed in any::<u64>(),
    ) {
        let n = seed % m;
        let modulus = Modulus::new(m).unwrap();
        let digest = commit(&session, &who, modulus.value(n).unwrap(), &Mask::from_bytes(mask)).unwrap();
        let want: [u8; 32] = Sha256::digest(hand_preimage(&session, &who, &mask, m, n)).into();
        prop_assert_eq!(digest.as_bytes(), &want);
    }

    #[test]
    fn modular_sum_matches_wide_integer_sum(
        m in 2u64..=i64::MAX as u64,
        raw in prop::collection::vec(any::<u64>(), 1..64),
    ) {
        let modulus = Modulus::new(m).unwrap();
        let values: Vec<_> = raw.iter().map(|r| modulus.value(r % m).unwrap()).collect();
        let wide: u128 = raw.iter().map(|r| u128::from(r % m)).sum();
        prop_assert_eq!(u128::from(mod_add(&values, modulus).unwrap().get()), wide % u128::from(m));
    }

    #[test]
    fn one_free_value_reaches_every_outcome(
        m in 2u64..1000,
        fixed in prop::collection::vec(any::<u64>(), 0..8),
        target_seed in any::<u64>(),
    ) {
        // Whatever the others chose, exactly one value of the free
        // contribution yields any given outcome.
        let modulus = Modulus::new(m).unwrap();
        let target = target_seed % m;
        let base: u64 = fixed.iter().fold(0, |acc, r| (acc + r % m) % m);
        let free = (target + m - base) % m;
        let mut values: Vec<_> = fixed.iter().map(|r| modulus.value(r % m).unwrap()).collect();
        values.push(modulus.value(free).unwrap());
        prop_assert_eq!(mod_add(&values, modulus).unwrap().get(), target);
    }
}
