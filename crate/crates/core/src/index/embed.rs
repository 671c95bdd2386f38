use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::dense::Vector;
use super::tokenize::tokenize;

/// Deterministic signed feature-hashing text embedder.
///
/// Stands in for a neural text encoder: each token lands in bucket `h mod dim` with sign
/// taken from the top bit of `h`, where `h` is the first 8 bytes of SHA-256(token). The
/// result is L2-normalized (all zeros when the text has no tokens).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashingEmbedder {
    pub dim: usize,
}

impl HashingEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim }
    }

    pub fn embed(&self, text: &str) -> Vector {
        let mut v = vec![0.0; self.dim];
        for token in tokenize(text) {
            let digest = Sha256::digest(token.as_bytes());
            let mut head = [0u8; 8];
            head.copy_from_slice(&digest[..8]);
            let h = u64::from_be_bytes(head);
            let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
            v[(h % self.dim as u64) as usize] += sign;
        }
        Vector::new(normalized(v)).expect("finite by construction")
    }
}

fn normalized(mut v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    v
}

/// Fuses a text vector and an image vector into one multimodal query vector by summing
/// their unit-normalized forms and renormalizing. Both must share a dimension.
pub fn combine_multimodal(text: &[f64], image: &[f64]) -> Vector {
    assert_eq!(text.len(), image.len(), "multimodal parts must share a dimension");
    let t = normalized(text.to_vec());
    let i = normalized(image.to_vec());
    let sum = t.iter().zip(&i).map(|(a, b)| a + b).collect();
    Vector::new(normalized(sum)).expect("finite by construction")
}
