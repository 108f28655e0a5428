//! Fixtures shared by the benchmarks.

use fairdraw_core::{commit, ContributionValue, DrawSpec, Event, Mask, Modulus, Timestamp, Transcript};

/// A completed ceremony with `k` stakeholders over modulus `m`, values
/// `i * 7919 mod m`.
pub fn completed_transcript(k: usize, m: u64) -> Transcript {
    let modulus = Modulus::new(m).expect("valid modulus");
    let roster: Vec<String> = (0..k).map(|i| format!("S{i}")).collect();
    let spec = DrawSpec::new("bench", modulus, roster.clone());
    let mut t = Transcript::new();
    let at = Timestamp(0);
    t.push(Event::CeremonyCreated { spec, at }).expect("create");
    let values: Vec<u64> = (0..k as u64).map(|i| i.wrapping_mul(7919) % m).collect();
    let masks: Vec<Mask> = (0..k).map(|i| Mask::from_bytes([i as u8; 32])).collect();
    for i in 0..k {
        let v = ContributionValue::new(values[i], modulus).expect("in range");
        let digest = commit("bench", &roster[i], v, &masks[i]).expect("commit");
        t.push(Event::CommitmentSubmitted { stakeholder_id: roster[i].clone(), digest, at })
            .expect("commitment");
    }
    for i in 0..k {
        t.push(Event::RevealSubmitted {
            stakeholder_id: roster[i].clone(),
            value: values[i],
            mask: masks[i],
            at,
        })
        .expect("reveal");
    }
    t.seal_outcome();
    t
}
