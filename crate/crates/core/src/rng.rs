//! Seeded, labelled random streams.
//!
//! Each component draws from its own ChaCha20 stream, selected by hashing a
//! fixed label ("transitions", "rewards", "features", "init", "trajectory",
//! "network", ...). A given `(seed, label)` pair always yields the same
//! sequence regardless of what other components consumed.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// FNV-1a, used only to turn a label into a stream id.
fn label_stream(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

#[derive(Debug, Clone)]
pub struct SimRng {
    seed: u64,
    label: String,
    inner: ChaCha20Rng,
}

impl SimRng {
    pub fn new(seed: u64, label: &str) -> Self {
        let mut inner = ChaCha20Rng::seed_from_u64(seed);
        inner.set_stream(label_stream(label));
        Self {
            seed,
            label: label.to_string(),
            inner,
        }
    }

    /// A stream keyed by `label#index`, used for retries and per-item streams.
    pub fn indexed(seed: u64, label: &str, index: usize) -> Self {
        Self::new(seed, &format!("{label}#{index}"))
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n)
    }

    /// Inverse-CDF draw from a probability row.
    pub fn categorical(&mut self, probs: &[f64]) -> usize {
        let u = self.uniform();
        let mut acc = 0.0;
        for (i, &p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        // Rounding left u above the final cumulative sum; take the last supported entry.
        probs
            .iter()
            .rposition(|&p| p > 0.0)
            .unwrap_or(probs.len() - 1)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Human-readable state: seed, label and word position within the stream.
    pub fn state_label(&self) -> String {
        format!(
            "seed={} label={} word_pos={}",
            self.seed,
            self.label,
            self.inner.get_word_pos()
        )
    }
}
