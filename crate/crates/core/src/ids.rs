//! Identifier and content-hash helpers.

use std::sync::Mutex;

use sha2::{Digest, Sha256};
use ulid::Generator;

static ULID_GEN: Mutex<Option<Generator>> = Mutex::new(None);

/// Returns a fresh 26-character Crockford ULID.
///
/// Successive calls within one process are strictly increasing, even when
/// they land in the same millisecond.
pub fn new_ulid() -> String {
    let mut guard = ULID_GEN.lock().unwrap_or_else(|e| e.into_inner());
    let gen = guard.get_or_insert_with(Generator::new);
    loop {
        match gen.generate() {
            Ok(id) => return id.to_string(),
            // random part overflowed within one millisecond; wait for the clock
            Err(_) => std::thread::sleep(std::time::Duration::from_micros(200)),
        }
    }
}

/// Lowercase hex SHA-256 digest of `bytes`.
pub fn sha256_hex(bytes: impl AsRef<[u8]>) -> String {
    hex::encode(Sha256::digest(bytes.as_ref()))
}

pub fn is_ulid(s: &str) -> bool {
    s.len() == 26 && ulid::Ulid::from_string(s).is_ok()
}

pub fn is_sha256_hex(s: &str) -> bool {
    s.len() == 64 && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_standard_vectors() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn ulids_are_monotonic() {
        let mut prev = new_ulid();
        for _ in 0..10_000 {
            let next = new_ulid();
            assert!(next > prev, "{next} <= {prev}");
            assert!(is_ulid(&next));
            prev = next;
        }
    }

    #[test]
    fn ulids_monotonic_across_threads() {
        let handles: Vec<_> = (0..4)
            .map(|_| std::thread::spawn(|| (0..500).map(|_| new_ulid()).collect::<Vec<_>>()))
            .collect();
        let mut all: Vec<String> = handles
            .into_iter()
            .flat_map(|h| h.join().unwrap())
            .collect();
        let n = all.len();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), n);
    }
}
