//! Canonical JSON text and content digests.
//!
//! `serde_json::Value` objects keep keys in sorted order, so serializing
//! through a `Value` yields sorted keys at every level. Digests are
//! lowercase hex SHA-256 over the compact canonical text.

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Pretty form: two-space indentation, sorted keys, trailing newline.
pub fn to_pretty(value: &Value) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("JSON values always serialize");
    text.push('\n');
    text
}

/// Compact single-line form with sorted keys.
pub fn to_compact(value: &Value) -> String {
    serde_json::to_string(value).expect("JSON values always serialize")
}

pub fn to_canonical_value<T: Serialize>(value: &T) -> Value {
    serde_json::to_value(value).expect("engine types serialize to JSON")
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Digest of any serializable value through its compact canonical text.
pub fn digest_of<T: Serialize>(value: &T) -> String {
    sha256_hex(&to_compact(&to_canonical_value(value)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn keys_are_sorted() {
        let v = json!({"b": 1, "a": {"d": 2, "c": 3}});
        assert_eq!(to_compact(&v), r#"{"a":{"c":3,"d":2},"b":1}"#);
    }

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
