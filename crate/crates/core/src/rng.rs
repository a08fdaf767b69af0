//! Counter-based random streams addressed by (seed, replica, site, stage, cell).
//!
//! Every cookie draw is a pure function of its address, so the k-th cookie at
//! site x is the same random variable no matter when (or whether) a walk
//! consumes it. ChaCha8 supplies the keystream: the key carries the master
//! seed and replica index, the stream id carries site and stage, and the word
//! position carries the cell index.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const DOMAIN_TAG: &[u8; 16] = b"erw.cell-stream\0";

/// Identifies one replica of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedKey {
    pub seed: u64,
    pub replica: u64,
}

impl SeedKey {
    pub fn new(seed: u64, replica: u64) -> Self {
        Self { seed, replica }
    }
}

/// Random-access uniform source for one replica.
#[derive(Debug, Clone)]
pub struct CellStream {
    key: [u8; 32],
}

impl CellStream {
    pub fn new(seed_key: SeedKey) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed_key.seed.to_le_bytes());
        key[8..16].copy_from_slice(&seed_key.replica.to_le_bytes());
        key[16..].copy_from_slice(DOMAIN_TAG);
        Self { key }
    }

    fn stream_id(site: i64, stage: u8) -> u64 {
        let zigzag = ((site << 1) ^ (site >> 63)) as u64;
        debug_assert!(zigzag < 1 << 56, "site out of addressable range");
        (zigzag << 8) | stage as u64
    }

    /// Raw 64-bit words for cells `first, first + 1, ...` (0-based) at `(site, stage)`.
    pub fn fill(&self, site: i64, stage: u8, first: u64, out: &mut [u64]) {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(Self::stream_id(site, stage));
        rng.set_word_pos(2 * first as u128);
        for w in out.iter_mut() {
            *w = rng.next_u64();
        }
    }

    /// Single word; prefer [`CellStream::fill`] for runs of cells.
    pub fn word(&self, site: i64, stage: u8, cell: u64) -> u64 {
        let mut out = [0u64; 1];
        self.fill(site, stage, cell, &mut out);
        out[0]
    }
}

/// `true` with probability `p` when `word` is uniform on 64 bits.
#[inline]
pub fn bernoulli(word: u64, p: f64) -> bool {
    // 53-bit resolution, exact for dyadic p.
    ((word >> 11) as f64) < p * (1u64 << 53) as f64
}

/// Uniform in [0, 1) from a raw word.
#[inline]
pub fn unit(word: u64) -> f64 {
    (word >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Seeded generator for auxiliary draws (bootstrap resampling and the like).
pub fn aux_rng(seed: u64, purpose: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&purpose.to_le_bytes());
    key[16..].copy_from_slice(b"erw.auxiliary\0\0\0");
    ChaCha8Rng::from_seed(key)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_access_matches_sequential() {
        let s = CellStream::new(SeedKey::new(7, 3));
        let mut run = [0u64; 40];
        s.fill(-5, 2, 0, &mut run);
        for (i, &w) in run.iter().enumerate() {
            assert_eq!(s.word(-5, 2, i as u64), w);
        }
        let mut tail = [0u64; 8];
        s.fill(-5, 2, 31, &mut tail);
        assert_eq!(&run[31..39], &tail[..]);
    }

    #[test]
    fn addresses_are_distinct() {
        let a = CellStream::new(SeedKey::new(1, 0));
        let b = CellStream::new(SeedKey::new(1, 1));
        assert_ne!(a.word(0, 0, 0), b.word(0, 0, 0));
        assert_ne!(a.word(0, 0, 0), a.word(1, 0, 0));
        assert_ne!(a.word(0, 0, 0), a.word(-1, 0, 0));
        assert_ne!(a.word(0, 0, 0), a.word(0, 1, 0));
        assert_ne!(a.word(0, 0, 0), a.word(0, 0, 1));
    }

    #[test]
    fn bernoulli_frequency() {
        let s = CellStream::new(SeedKey::new(11, 0));
        let mut words = vec![0u64; 200_000];
        s.fill(0, 0, 0, &mut words);
        let hits = words.iter().filter(|&&w| bernoulli(w, 0.3)).count() as f64;
        let freq = hits / words.len() as f64;
        let se = (0.3f64 * 0.7 / words.len() as f64).sqrt();
        assert!((freq - 0.3).abs() < 4.0 * se, "{freq}");
    }
}
