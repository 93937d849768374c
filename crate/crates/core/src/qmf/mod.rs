//! Quantum-memory-free QSDC: messages are encrypted with pooled keys,
//! LDPC-precoded, and cut into frames. Every frame is sent over its own
//! DL04 session and carries a slice of ciphertext plus the raw material for
//! the next key, so no photon ever has to wait for a detection decision.

mod fec;
mod keypool;
mod session;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use fec::{DecodeFailure, FecCode, DEFAULT_DECODER_ITERATIONS, KNOWN_BIT_LLR};
pub use keypool::{KeyPool, KeyWithdrawal};
pub use session::{
    run_qmf_session, Dl04Transport, FrameCapacity, FrameRecord, FrameTransport, PayloadKind, QmfOutcome,
    QmfSessionConfig, VERIFY_TAG_BITS,
};

use crate::protocols::ProtocolError;
use crate::security::SecurityError;

#[derive(Debug, Error)]
pub enum QmfError {
    #[error("key pool underflow: requested {requested} bits, {available} available")]
    KeyPoolUnderflow { requested: usize, available: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("invalid code: {0}")]
    BadCode(String),
    #[error("sparse matrix line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("invalid QMF configuration: {0}")]
    InvalidConfig(String),
    #[error("session failed at frame {frame}: {reason}")]
    SessionFailure { frame: usize, reason: String },
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Security(#[from] SecurityError),
}

pub fn xor_encrypt(m: &[u8], k: &[u8]) -> Result<Vec<u8>, QmfError> {
    if m.len() != k.len() {
        return Err(QmfError::LengthMismatch {
            left: m.len(),
            right: k.len(),
        });
    }
    Ok(m.iter().zip(k).map(|(a, b)| (a ^ b) & 1).collect())
}

/// Frame admission: k/n ≤ R − C_W and R < C_M, using the previous frame's
/// capacities.
pub fn admit_frame(k: usize, n: usize, rate: f64, c_w_prev: f64, c_m_prev: f64) -> bool {
    n > 0 && k as f64 / n as f64 <= rate - c_w_prev && rate < c_m_prev
}

/// Toeplitz-matrix hash of `input` to `out_len` bits. The matrix diagonals
/// are drawn from a public seed, so both parties compute the same function.
pub fn toeplitz_hash(input: &[u8], out_len: usize, seed: u64) -> Vec<u8> {
    let n = input.len();
    if n == 0 || out_len == 0 {
        return vec![0; out_len];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let diag: Vec<u8> = (0..out_len + n - 1).map(|_| rng.random_range(0..2)).collect();
    let ones: Vec<usize> = (0..n).filter(|&j| input[j] & 1 == 1).collect();
    (0..out_len)
        .map(|i| ones.iter().fold(0, |acc, &j| acc ^ diag[i + n - 1 - j]))
        .collect()
}

/// Compresses a frame codeword into floor(|c|·c_s·(1 − margin)) key bits.
/// A non-positive secrecy capacity yields no key.
pub fn distill_key(c: &[u8], c_s: f64, margin: f64, seed: u64) -> Vec<u8> {
    if !(c_s > 0.0) {
        return Vec::new();
    }
    let len = (c.len() as f64 * c_s.min(1.0) * (1.0 - margin.clamp(0.0, 1.0))).floor() as usize;
    toeplitz_hash(c, len, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xor_examples() {
        assert_eq!(xor_encrypt(&[0; 4], &[0; 4]).unwrap(), vec![0; 4]);
        assert_eq!(xor_encrypt(&[1, 0, 1, 0], &[1; 4]).unwrap(), vec![0, 1, 0, 1]);
        assert!(xor_encrypt(&[1], &[]).is_err());
    }

    #[test]
    fn admission_examples() {
        assert!(admit_frame(500, 1000, 0.6, 0.05, 0.7));
        assert!(!admit_frame(500, 1000, 0.6, 0.15, 0.7));
        assert!(!admit_frame(500, 1000, 0.8, 0.05, 0.7));
        assert!(!admit_frame(0, 0, 0.5, 0.0, 1.0));
    }

    #[test]
    fn distillation_lengths() {
        let c = vec![1u8; 1000];
        assert!(distill_key(&c, 0.0, 0.1, 1).is_empty());
        assert!(distill_key(&c, -0.3, 0.1, 1).is_empty());
        assert_eq!(distill_key(&c, 0.2, 0.1, 1).len(), 180);
        assert_eq!(distill_key(&c, 0.2, 0.1, 7), distill_key(&c, 0.2, 0.1, 7));
    }

    #[test]
    fn toeplitz_hash_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a: Vec<u8> = (0..200).map(|_| rng.random_range(0..2)).collect();
        let b: Vec<u8> = (0..200).map(|_| rng.random_range(0..2)).collect();
        let ab = xor_encrypt(&a, &b).unwrap();
        let lhs = toeplitz_hash(&ab, 64, 9);
        let rhs = xor_encrypt(&toeplitz_hash(&a, 64, 9), &toeplitz_hash(&b, 64, 9)).unwrap();
        assert_eq!(lhs, rhs);
    }
}
