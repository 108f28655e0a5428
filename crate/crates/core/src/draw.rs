//! Modular-sum draw arithmetic.
//!
//! Every stakeholder contributes a value in `[0, m)`; the outcome is the sum of
//! all contributions reduced modulo `m`. For a fixed sum of the other
//! contributions, `y -> (c + y) mod m` is a bijection on `[0, m)`, so the
//! outcome is uniform as soon as a single contribution is.

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest admissible modulus, `2^63 - 1`.
pub const MAX_MODULUS: u64 = i64::MAX as u64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DrawError {
    #[error("modulus {0} is outside [2, 2^63 - 1]")]
    InvalidModulus(u64),
    #[error("value {value} is out of range for modulus {modulus}")]
    OutOfRange { value: u64, modulus: u64 },
    #[error("contributions use different moduli ({0} and {1})")]
    MixedModuli(u64, u64),
    #[error("no contributions to combine")]
    Empty,
    #[error("candidate list has {actual} entries but the modulus is {expected}")]
    CandidateCount { expected: u64, actual: usize },
}

/// The wrap-around bound `m` of a draw. Always in `[2, 2^63 - 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u64", into = "u64")]
pub struct Modulus(u64);

impl Modulus {
    pub fn new(m: u64) -> Result<Self, DrawError> {
        if (2..=MAX_MODULUS).contains(&m) {
            Ok(Modulus(m))
        } else {
            Err(DrawError::InvalidModulus(m))
        }
    }

    pub fn get(self) -> u64 {
        self.0
    }

    pub fn value(self, n: u64) -> Result<ContributionValue, DrawError> {
        ContributionValue::new(n, self)
    }
}

impl TryFrom<u64> for Modulus {
    type Error = DrawError;

    fn try_from(m: u64) -> Result<Self, Self::Error> {
        Modulus::new(m)
    }
}

impl From<Modulus> for u64 {
    fn from(m: Modulus) -> u64 {
        m.0
    }
}

impl std::fmt::Display for Modulus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// A residue `n` in `[0, m)`, carrying its modulus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ContributionValue {
    value: u64,
    modulus: Modulus,
}

impl ContributionValue {
    pub fn new(value: u64, modulus: Modulus) -> Result<Self, DrawError> {
        if value < modulus.get() {
            Ok(ContributionValue { value, modulus })
        } else {
            Err(DrawError::OutOfRange {
                value,
                modulus: modulus.get(),
            })
        }
    }

    pub fn get(self) -> u64 {
        self.value
    }

    pub fn modulus(self) -> Modulus {
        self.modulus
    }
}

impl std::fmt::Display for ContributionValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.value.fmt(f)
    }
}

/// Sum of `values` modulo `m`, reduced after every addition.
pub fn mod_add(values: &[ContributionValue], m: Modulus) -> Result<ContributionValue, DrawError> {
    if values.is_empty() {
        return Err(DrawError::Empty);
    }
    let modulus = u128::from(m.get());
    let mut acc: u128 = 0;
    for v in values {
        if v.modulus != m {
            return Err(DrawError::MixedModuli(m.get(), v.modulus.get()));
        }
        acc = (acc + u128::from(v.value)) % modulus;
    }
    // acc < m <= u64::MAX
    Ok(ContributionValue {
        value: acc as u64,
        modulus: m,
    })
}

/// `n / m` rounded to the nearest `f64`, clamped below 1.0.
///
/// The quotient is produced bit by bit with exact integer long division and a
/// sticky bit, so the result is correctly rounded for every modulus, not only
/// those exactly representable as `f64`. For `m > 2^53` the correctly rounded
/// quotient of `m - 1` can be 1.0; it is clamped to the largest double below
/// one, so the map is only weakly monotone for such moduli.
pub fn to_unit_fraction(n: ContributionValue) -> f64 {
    let m = u128::from(n.modulus.get());
    let mut rem = u128::from(n.value);
    if rem == 0 {
        return 0.0;
    }
    // 53 mantissa bits plus guard and round bits.
    const WANT: u32 = 55;
    let mut mantissa: u64 = 0;
    let mut bits = 0u32;
    let mut exp = 0i32;
    while bits < WANT {
        rem <<= 1;
        exp -= 1;
        mantissa <<= 1;
        if rem >= m {
            rem -= m;
            mantissa |= 1;
        }
        if mantissa != 0 {
            bits += 1;
        }
    }
    if rem != 0 {
        mantissa |= 1;
    }
    // mantissa < 2^55 and exp >= -118: both conversions are exact apart from
    // the single rounding of the 55-bit integer to 53 bits.
    let x = mantissa as f64 * 2f64.powi(exp);
    if x >= 1.0 {
        f64::from_bits(1.0f64.to_bits() - 1)
    } else {
        x
    }
}

/// Picks `candidates[n]`. The list must have exactly `m` entries; no modulo
/// reduction onto a shorter list is ever performed.
pub fn select_candidate<T>(n: ContributionValue, candidates: &[T]) -> Result<&T, DrawError> {
    let m = n.modulus.get();
    if candidates.len() as u64 != m {
        return Err(DrawError::CandidateCount {
            expected: m,
            actual: candidates.len(),
        });
    }
    Ok(&candidates[n.value as usize])
}

/// Uniform value in `[0, m)` by rejection sampling on 64-bit words.
///
/// Words at or above `floor(2^64 / m) * m` are discarded, which removes the
/// modulo bias entirely.
pub fn uniform_value<R: RngCore + ?Sized>(rng: &mut R, m: Modulus) -> ContributionValue {
    let modulus = u128::from(m.get());
    let limit = ((1u128 << 64) / modulus) * modulus;
    loop {
        let x = u128::from(rng.next_u64());
        if x < limit {
            return ContributionValue {
                value: (x % modulus) as u64,
                modulus: m,
            };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn vals(m: Modulus, xs: &[u64]) -> Vec<ContributionValue> {
        xs.iter().map(|&x| m.value(x).unwrap()).collect()
    }

    #[test]
    fn modulus_bounds() {
        assert_eq!(Modulus::new(0), Err(DrawError::InvalidModulus(0)));
        assert_eq!(Modulus::new(1), Err(DrawError::InvalidModulus(1)));
        assert!(Modulus::new(2).is_ok());
        assert!(Modulus::new(MAX_MODULUS).is_ok());
        assert!(Modulus::new(MAX_MODULUS + 1).is_err());
        assert!(Modulus::new(u64::MAX).is_err());
    }

    #[test]
    fn value_range() {
        let m = Modulus::new(10_000_000).unwrap();
        assert!(m.value(9_999_999).is_ok());
        assert_eq!(
            m.value(10_000_000),
            Err(DrawError::OutOfRange {
                value: 10_000_000,
                modulus: 10_000_000
            })
        );
    }

    #[test]
    fn reference_sum() {
        let m = Modulus::new(10_000_000).unwrap();
        let v = vals(m, &[1_610_027, 5_871_032, 6_029_108, 7_664_824, 5_757_989]);
        assert_eq!(mod_add(&v, m).unwrap().get(), 6_932_980);
    }

    #[test]
    fn clock_examples() {
        let m = Modulus::new(12).unwrap();
        assert_eq!(mod_add(&vals(m, &[9, 4]), m).unwrap().get(), 1);
        assert_eq!(mod_add(&vals(m, &[0, 0, 0]), m).unwrap().get(), 0);
        assert_eq!(mod_add(&vals(m, &[3, 2]), m).unwrap().get(), 5);
    }

    #[test]
    fn mod_add_errors() {
        let m = Modulus::new(12).unwrap();
        let other = Modulus::new(13).unwrap();
        assert_eq!(mod_add(&[], m), Err(DrawError::Empty));
        let mixed = [m.value(1).unwrap(), other.value(1).unwrap()];
        assert_eq!(mod_add(&mixed, m), Err(DrawError::MixedModuli(12, 13)));
    }

    #[test]
    fn mod_add_near_cap_does_not_overflow() {
        let m = Modulus::new(MAX_MODULUS).unwrap();
        let v = vec![m.value(MAX_MODULUS - 1).unwrap(); 1000];
        // 1000 * (m - 1) = -1000 = m - 1000 (mod m)
        assert_eq!(mod_add(&v, m).unwrap().get(), MAX_MODULUS - 1000);
    }

    #[test]
    fn unit_fraction_examples() {
        let m = Modulus::new(10_000_000).unwrap();
        assert_eq!(to_unit_fraction(m.value(0).unwrap()).to_bits(), 0f64.to_bits());
        // Both operands are exact doubles, so IEEE division is the correctly
        // rounded rational n/m.
        let f = to_unit_fraction(m.value(6_932_980).unwrap());
        assert_eq!(f, 6_932_980f64 / 10_000_000f64);
        assert!((f - 0.693298).abs() <= f64::EPSILON);
        let m12 = Modulus::new(12).unwrap();
        assert_eq!(to_unit_fraction(m12.value(11).unwrap()), 11f64 / 12f64);
    }

    #[test]
    fn unit_fraction_below_one_for_huge_modulus() {
        let m = Modulus::new(MAX_MODULUS).unwrap();
        let f = to_unit_fraction(m.value(MAX_MODULUS - 1).unwrap());
        assert!(f < 1.0);
        let tiny = to_unit_fraction(m.value(1).unwrap());
        assert!(tiny > 0.0);
        // 1 / (2^63 - 1) rounds to 2^-63.
        assert_eq!(tiny, 2f64.powi(-63));
    }

    #[test]
    fn unit_fraction_matches_division_for_exact_moduli() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        for _ in 0..20_000 {
            let m = Modulus::new(2 + rng.next_u64() % ((1 << 53) - 2)).unwrap();
            let n = uniform_value(&mut rng, m);
            assert_eq!(to_unit_fraction(n), n.get() as f64 / m.get() as f64, "{n}/{m}");
        }
    }

    #[test]
    fn unit_fraction_strictly_monotone() {
        for m in [2u64, 3, 7, 12, 100, 1000] {
            let m = Modulus::new(m).unwrap();
            let fs: Vec<f64> = (0..m.get())
                .map(|n| to_unit_fraction(m.value(n).unwrap()))
                .collect();
            assert!(fs.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn select_candidate_rules() {
        let m = Modulus::new(3).unwrap();
        let c = ["A", "B", "C"];
        assert_eq!(*select_candidate(m.value(1).unwrap(), &c).unwrap(), "B");
        let m12 = Modulus::new(12).unwrap();
        assert_eq!(
            select_candidate(m12.value(1).unwrap(), &c),
            Err(DrawError::CandidateCount {
                expected: 12,
                actual: 3
            })
        );
    }

    #[test]
    fn select_candidate_reference() {
        let m = Modulus::new(10_000_000).unwrap();
        let labels: Vec<u32> = (0..10_000_000).collect();
        let picked = select_candidate(m.value(6_932_980).unwrap(), &labels).unwrap();
        assert_eq!(picked.to_string(), "6932980");
    }

    #[test]
    fn uniformity_bijection_exhaustive() {
        for m in 2..=64u64 {
            let modulus = Modulus::new(m).unwrap();
            for c in 0..m {
                let mut seen = vec![false; m as usize];
                for y in 0..m {
                    let z = mod_add(&vals(modulus, &[c, y]), modulus).unwrap().get();
                    assert!(!seen[z as usize], "m={m} c={c} repeats {z}");
                    seen[z as usize] = true;
                }
                assert!(seen.iter().all(|&s| s));
            }
        }
    }

    // Every assignment of k-1 fixed values, every honest index.
    #[test]
    fn one_honest_party_bijection_exhaustive() {
        fn assignments(m: u64, len: usize) -> Vec<Vec<u64>> {
            let mut out = vec![vec![]];
            for _ in 0..len {
                out = out
                    .into_iter()
                    .flat_map(|prefix| {
                        (0..m).map(move |x| {
                            let mut p = prefix.clone();
                            p.push(x);
                            p
                        })
                    })
                    .collect();
            }
            out
        }
        for m in 2..=16u64 {
            let modulus = Modulus::new(m).unwrap();
            for k in 1..=4usize {
                for fixed in assignments(m, k - 1) {
                    for honest_at in 0..k {
                        let mut hit = vec![0u32; m as usize];
                        for honest in 0..m {
                            let mut xs = fixed.clone();
                            xs.insert(honest_at, honest);
                            let z = mod_add(&vals(modulus, &xs), modulus).unwrap();
                            hit[z.get() as usize] += 1;
                        }
                        assert!(hit.iter().all(|&h| h == 1), "m={m} fixed={fixed:?}");
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn closure_and_order_invariance(
            m in 2u64..=MAX_MODULUS,
            raw in proptest::collection::vec(any::<u64>(), 1..20),
            seed in any::<u64>(),
        ) {
            let modulus = Modulus::new(m).unwrap();
            let v: Vec<_> = raw.iter().map(|x| modulus.value(x % m).unwrap()).collect();
            let sum = mod_add(&v, modulus).unwrap();
            prop_assert!(sum.get() < m);
            let mut shuffled = v.clone();
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rand::seq::SliceRandom::shuffle(shuffled.as_mut_slice(), &mut rng);
            prop_assert_eq!(mod_add(&shuffled, modulus).unwrap(), sum);
            let reference = raw.iter().fold(0u128, |a, x| a + u128::from(x % m)) % u128::from(m);
            prop_assert_eq!(u128::from(sum.get()), reference);
        }
    }

    #[test]
    fn rejection_sampling_avoids_biased_tail() {
        // A source that returns the top word first: it must be rejected for
        // m = 3 because 2^64 - 1 >= floor(2^64 / 3) * 3.
        struct Scripted(Vec<u64>);
        impl RngCore for Scripted {
            fn next_u32(&mut self) -> u32 {
                self.next_u64() as u32
            }
            fn next_u64(&mut self) -> u64 {
                self.0.remove(0)
            }
            fn fill_bytes(&mut self, _: &mut [u8]) {
                unimplemented!()
            }
        }
        let m = Modulus::new(3).unwrap();
        let mut src = Scripted(vec![u64::MAX, 4]);
        assert_eq!(uniform_value(&mut src, m).get(), 1);
        assert!(src.0.is_empty());
    }
}
