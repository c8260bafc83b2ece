//! Seeded corpus splitting.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::Document;

/// Relative train/dev/test proportions, e.g. `8:1:1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatio {
    pub train: f64,
    pub dev: f64,
    pub test: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum SplitError {
    #[error("split ratios must be positive, got {0}:{1}:{2}")]
    NonPositive(f64, f64, f64),
    #[error("malformed ratio {0:?}, expected a:b:c")]
    Malformed(String),
}

impl SplitRatio {
    pub fn new(train: f64, dev: f64, test: f64) -> Result<Self, SplitError> {
        if !(train > 0.0 && dev > 0.0 && test > 0.0)
            || !(train.is_finite() && dev.is_finite() && test.is_finite())
        {
            return Err(SplitError::NonPositive(train, dev, test));
        }
        Ok(SplitRatio { train, dev, test })
    }

    /// Parses `a:b:c` with positive numeric components.
    pub fn parse(text: &str) -> Result<Self, SplitError> {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(SplitError::Malformed(text.to_string()));
        }
        let mut vals = [0.0f64; 3];
        for (slot, part) in vals.iter_mut().zip(&parts) {
            *slot = part
                .trim()
                .parse()
                .map_err(|_| SplitError::Malformed(text.to_string()))?;
        }
        SplitRatio::new(vals[0], vals[1], vals[2])
    }

    fn normalized(&self) -> (f64, f64) {
        let sum = self.train + self.dev + self.test;
        (self.train / sum, (self.train + self.dev) / sum)
    }
}

/// Shuffles the corpus with the seeded permutation, then cuts it at
/// `floor(N * r_train)` and `floor(N * (r_train + r_dev))`. The three
/// splits always partition the input exactly.
pub fn split_corpus(
    corpus: &[Document],
    ratio: SplitRatio,
    seed: u64,
) -> (Vec<Document>, Vec<Document>, Vec<Document>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shuffled: Vec<Document> = corpus.to_vec();
    shuffled.shuffle(&mut rng);

    let n = shuffled.len();
    let (r_train, r_train_dev) = ratio.normalized();
    let cut1 = ((n as f64) * r_train).floor() as usize;
    let cut2 = ((n as f64) * r_train_dev).floor() as usize;
    let cut1 = cut1.min(n);
    let cut2 = cut2.clamp(cut1, n);

    let test = shuffled.split_off(cut2);
    let dev = shuffled.split_off(cut1);
    (shuffled, dev, test)
}
