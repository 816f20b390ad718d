use super::BackendError;

pub const DEFAULT_DIMENSION: usize = 512;

pub trait Embedder: Send + Sync {
    /// A unit-norm vector of [`Embedder::dimension`] entries.
    fn embed(&self, text: &str) -> Result<Vec<f64>, BackendError>;
    fn dimension(&self) -> usize;
}

/// Offline embedding: character n-gram counts hashed (FNV-1a) into a fixed
/// number of buckets, then L2-normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashedNgramEmbedder {
    pub dimension: usize,
    pub n: usize,
}

impl Default for HashedNgramEmbedder {
    fn default() -> Self {
        Self {
            dimension: DEFAULT_DIMENSION,
            n: 3,
        }
    }
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl HashedNgramEmbedder {
    /// The n-grams of `text`; texts shorter than `n` are one gram.
    pub fn grams(&self, text: &str) -> Vec<String> {
        let chars: Vec<char> = text.chars().collect();
        if chars.len() <= self.n {
            return vec![text.to_string()];
        }
        chars.windows(self.n).map(|w| w.iter().collect()).collect()
    }

    pub fn bucket(&self, gram: &str) -> usize {
        (fnv1a(gram.as_bytes()) % self.dimension as u64) as usize
    }
}

impl Embedder for HashedNgramEmbedder {
    fn embed(&self, text: &str) -> Result<Vec<f64>, BackendError> {
        if text.is_empty() {
            return Err(BackendError::Precondition("cannot embed empty text".into()));
        }
        let mut v = vec![0.0; self.dimension];
        for g in self.grams(text) {
            v[self.bucket(&g)] += 1.0;
        }
        normalize(&mut v);
        Ok(v)
    }

    fn dimension(&self) -> usize {
        self.dimension
    }
}

pub(crate) fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v {
            *x /= norm;
        }
    }
}

/// Cosine similarity; 0 when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}
