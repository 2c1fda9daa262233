use sha2::{Digest, Sha256};

/// Derives a 64-bit seed from a base seed and a list of labels.
pub fn derive_seed(base: u64, parts: &[&[u8]]) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_le_bytes());
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stable_and_distinct() {
        let a = derive_seed(7, &[b"q1", &0u64.to_le_bytes()]);
        assert_eq!(a, derive_seed(7, &[b"q1", &0u64.to_le_bytes()]));
        assert_ne!(a, derive_seed(8, &[b"q1", &0u64.to_le_bytes()]));
        assert_ne!(derive_seed(0, &[b"ab", b"c"]), derive_seed(0, &[b"a", b"bc"]));
    }
}
