//! Strict lowercase hex for 32-octet values.
//!
//! Only the canonical rendering is accepted on input; `AB` and `ab` do not
//! both decode to the same octet, so every distinct string names a distinct
//! value.

use serde::{de, Deserializer, Serializer};

pub fn encode(bytes: &[u8; 32]) -> String {
    hex::encode(bytes)
}

pub fn decode(s: &str) -> Result<[u8; 32], String> {
    if s.len() != 64 {
        return Err(format!("expected 64 hex digits, got {}", s.len()));
    }
    if !s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
        return Err("expected lowercase hex digits".into());
    }
    let mut out = [0u8; 32];
    hex::decode_to_slice(s, &mut out).map_err(|e| e.to_string())?;
    Ok(out)
}

pub fn serialize<S: Serializer>(bytes: &[u8; 32], s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&encode(bytes))
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u8; 32], D::Error> {
    let s: std::borrow::Cow<'de, str> = serde::Deserialize::deserialize(d)?;
    decode(&s).map_err(de::Error::custom)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_uppercase_and_bad_length() {
        let lower = "00".repeat(31) + "ab";
        assert_eq!(decode(&lower).unwrap()[31], 0xab);
        assert!(decode(&lower.to_uppercase()).is_err());
        assert!(decode("abcd").is_err());
        assert!(decode(&("0".repeat(63) + "g")).is_err());
    }
}
