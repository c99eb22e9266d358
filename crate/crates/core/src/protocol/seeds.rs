use sha2::{Digest, Sha256};

/// 32-byte generator seed from a domain label and integer coordinates.
///
/// Every random stream in the protocol (pair masks, encryption vectors) is
/// keyed this way so streams never overlap and reruns are reproducible.
pub fn derive_seed(label: &str, parts: &[u64]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update((label.len() as u64).to_le_bytes());
    h.update(label.as_bytes());
    for p in parts {
        h.update(p.to_le_bytes());
    }
    let digest = h.finalize();
    let mut out = [0u8; 32];
    out.copy_from_slice(&digest);
    out
}
