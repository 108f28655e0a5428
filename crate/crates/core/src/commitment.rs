//! SHA-256 commitments to a contribution under a 256-bit mask.
//!
//! The hashed octet string is, in order:
//!
//! | field            | size                                   |
//! |------------------|----------------------------------------|
//! | domain tag       | 18 octets, ASCII `FAIRDRAW-COMMIT-V1`  |
//! | session id       | 1 length octet, then UTF-8 bytes       |
//! | stakeholder id   | 1 length octet, then UTF-8 bytes       |
//! | mask             | 32 octets                              |
//! | modulus          | 8 octets, big-endian                   |
//! | value            | 8 octets, big-endian                   |

use rand::rngs::OsRng;
use rand::TryRngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use subtle::ConstantTimeEq;
use thiserror::Error;

use crate::draw::ContributionValue;
use crate::hex32;

pub const COMMIT_DOMAIN_TAG: &[u8; 18] = b"FAIRDRAW-COMMIT-V1";

/// Longest session or stakeholder identifier the encoding can frame.
pub const MAX_ID_LEN: usize = 255;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CommitError {
    #[error("{field} is {len} octets long; at most 255 are allowed")]
    IdentifierTooLong { field: &'static str, len: usize },
    #[error("secure entropy source unavailable: {0}")]
    Entropy(String),
}

/// 32 secret octets mixed into a commitment.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Mask(#[serde(with = "hex32")] [u8; 32]);

impl Mask {
    pub const LEN: usize = 32;

    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        Mask(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex32::encode(&self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, String> {
        hex32::decode(s).map(Mask)
    }

    /// Fresh mask from the operating system's CSPRNG.
    pub fn random() -> Result<Self, CommitError> {
        new_mask(&mut OsRng)
    }
}

// Masks are secrets; keep them out of logs.
impl std::fmt::Debug for Mask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("Mask(..)")
    }
}

/// Fills a mask from a fallible entropy source. A failing source is an error,
/// never a reason to fall back to something weaker.
pub fn new_mask<R: TryRngCore + ?Sized>(entropy: &mut R) -> Result<Mask, CommitError> {
    let mut bytes = [0u8; 32];
    entropy
        .try_fill_bytes(&mut bytes)
        .map_err(|e| CommitError::Entropy(format!("{e:?}")))?;
    Ok(Mask(bytes))
}

/// SHA-256 output identifying a commitment.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CommitmentDigest(#[serde(with = "hex32")] [u8; 32]);

impl CommitmentDigest {
    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        CommitmentDigest(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex32::encode(&self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, String> {
        hex32::decode(s).map(CommitmentDigest)
    }

    /// Constant-time equality.
    pub fn ct_eq(&self, other: &CommitmentDigest) -> bool {
        self.0.ct_eq(&other.0).into()
    }
}

impl std::fmt::Debug for CommitmentDigest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "CommitmentDigest({})", self.to_hex())
    }
}

impl std::fmt::Display for CommitmentDigest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// A revealed value together with the mask it was committed under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Opening {
    pub value: ContributionValue,
    pub mask: Mask,
}

/// The exact octets that [`commit`] hashes.
pub fn commit_preimage(
    session_id: &str,
    stakeholder_id: &str,
    value: ContributionValue,
    mask: &Mask,
) -> Result<Vec<u8>, CommitError> {
    let sid = session_id.as_bytes();
    let pid = stakeholder_id.as_bytes();
    check_id_len("session id", sid)?;
    check_id_len("stakeholder id", pid)?;
    let mut buf = Vec::with_capacity(COMMIT_DOMAIN_TAG.len() + 2 + sid.len() + pid.len() + 48);
    buf.extend_from_slice(COMMIT_DOMAIN_TAG);
    buf.push(sid.len() as u8);
    buf.extend_from_slice(sid);
    buf.push(pid.len() as u8);
    buf.extend_from_slice(pid);
    buf.extend_from_slice(&mask.0);
    buf.extend_from_slice(&value.modulus().get().to_be_bytes());
    buf.extend_from_slice(&value.get().to_be_bytes());
    Ok(buf)
}

fn check_id_len(field: &'static str, id: &[u8]) -> Result<(), CommitError> {
    if id.len() > MAX_ID_LEN {
        Err(CommitError::IdentifierTooLong {
            field,
            len: id.len(),
        })
    } else {
        Ok(())
    }
}

pub fn commit(
    session_id: &str,
    stakeholder_id: &str,
    value: ContributionValue,
    mask: &Mask,
) -> Result<CommitmentDigest, CommitError> {
    let preimage = commit_preimage(session_id, stakeholder_id, value, mask)?;
    Ok(CommitmentDigest(Sha256::digest(&preimage).into()))
}

/// True iff `opening` reproduces `digest`. Identifiers that cannot be encoded
/// simply fail to verify.
pub fn verify_opening(
    digest: &CommitmentDigest,
    session_id: &str,
    stakeholder_id: &str,
    opening: &Opening,
) -> bool {
    match commit(session_id, stakeholder_id, opening.value, &opening.mask) {
        Ok(recomputed) => recomputed.ct_eq(digest),
        Err(_) => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::draw::Modulus;
    use rand::{RngCore, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn m7() -> Modulus {
        Modulus::new(10_000_000).unwrap()
    }

    #[test]
    fn preimage_layout() {
        let mask = Mask::from_bytes([0xaa; 32]);
        let v = m7().value(1_610_027).unwrap();
        let p = commit_preimage("S", "0", v, &mask).unwrap();
        assert_eq!(p.len(), 18 + 2 + 2 + 32 + 16);
        assert_eq!(&p[..18], b"FAIRDRAW-COMMIT-V1");
        assert_eq!(&p[18..22], &[1, b'S', 1, b'0']);
        assert_eq!(&p[22..54], &[0xaa; 32]);
        assert_eq!(&p[54..62], &10_000_000u64.to_be_bytes());
        assert_eq!(&p[62..70], &1_610_027u64.to_be_bytes());
    }

    // Expected digest produced by `sha256sum` over the documented encoding:
    //   printf 'FAIRDRAW-COMMIT-V1\x01S\x010' > p; head -c 32 /dev/zero >> p
    //   printf '\x00\x00\x00\x00\x00\x98\x96\x80\x00\x00\x00\x00\x00\x18\x91\x2b' >> p
    //   sha256sum p
    #[test]
    fn golden_digest_against_external_sha256() {
        let v = m7().value(1_610_027).unwrap();
        let d = commit("S", "0", v, &Mask::from_bytes([0; 32])).unwrap();
        assert_eq!(
            d.to_hex(),
            "2c9f616127b3b8cf62b45facb66ddecac09a1a5ec76caed275ce169731ee72f1"
        );
    }

    #[test]
    fn deterministic() {
        let mask = Mask::random().unwrap();
        let v = m7().value(42).unwrap();
        assert_eq!(commit("s", "a", v, &mask), commit("s", "a", v, &mask));
    }

    #[test]
    fn oversized_identifiers_rejected() {
        let v = m7().value(1).unwrap();
        let mask = Mask::from_bytes([0; 32]);
        let long = "x".repeat(256);
        assert_eq!(
            commit(&long, "a", v, &mask),
            Err(CommitError::IdentifierTooLong {
                field: "session id",
                len: 256
            })
        );
        assert!(commit("s", &long, v, &mask).is_err());
        assert!(commit(&"x".repeat(255), "a", v, &mask).is_ok());
    }

    #[test]
    fn masks_are_fresh() {
        let mut seen = std::collections::HashSet::new();
        for _ in 0..1000 {
            let m = Mask::random().unwrap();
            assert_eq!(m.as_bytes().len(), 32);
            assert!(seen.insert(*m.as_bytes()));
        }
    }

    // Binomial(10_000, 0.5) has sd 50, so 0.02 * 10_000 = 200 is a 4-sigma
    // band per bit position.
    #[test]
    fn mask_bit_balance() {
        let mut counts = [0u32; 256];
        for _ in 0..10_000 {
            let m = Mask::random().unwrap();
            for (i, c) in counts.iter_mut().enumerate() {
                *c += u32::from(m.as_bytes()[i / 8] >> (i % 8) & 1);
            }
        }
        for c in counts {
            let f = f64::from(c) / 10_000.0;
            assert!((f - 0.5).abs() <= 0.02, "bit frequency {f}");
        }
    }

    #[test]
    fn digest_bit_balance() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let mut counts = [0u32; 256];
        for _ in 0..10_000 {
            let mut mask = [0u8; 32];
            rng.fill_bytes(&mut mask);
            let v = m7().value(rng.next_u64() % 10_000_000).unwrap();
            let d = commit("s", "a", v, &Mask::from_bytes(mask)).unwrap();
            for (i, c) in counts.iter_mut().enumerate() {
                *c += u32::from(d.as_bytes()[i / 8] >> (i % 8) & 1);
            }
        }
        for c in counts {
            assert!((f64::from(c) / 10_000.0 - 0.5).abs() <= 0.02);
        }
    }

    #[test]
    fn entropy_failure_is_an_error() {
        struct Broken;
        impl TryRngCore for Broken {
            type Error = std::io::Error;
            fn try_next_u32(&mut self) -> Result<u32, Self::Error> {
                Err(std::io::Error::other("no entropy"))
            }
            fn try_next_u64(&mut self) -> Result<u64, Self::Error> {
                Err(std::io::Error::other("no entropy"))
            }
            fn try_fill_bytes(&mut self, _: &mut [u8]) -> Result<(), Self::Error> {
                Err(std::io::Error::other("no entropy"))
            }
        }
        assert!(matches!(new_mask(&mut Broken), Err(CommitError::Entropy(_))));
    }

    #[test]
    fn debug_does_not_leak_mask() {
        let m = Mask::from_bytes([0x5a; 32]);
        assert!(!format!("{m:?}").contains("5a"));
    }
}
