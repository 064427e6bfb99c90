//! Token estimation.
//!
//! Model-native tokenizers are not available offline, so every budget
//! computation goes through a [`TokenEstimator`]. Estimators must be
//! deterministic and monotone in text length.

/// Approximates the token count of a piece of text.
pub trait TokenEstimator: Send + Sync {
    fn estimate(&self, text: &str) -> usize;
}

/// `ceil(chars / n)`, counted in Unicode scalar values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CharsPerToken(pub usize);

impl Default for CharsPerToken {
    fn default() -> Self {
        CharsPerToken(4)
    }
}

impl TokenEstimator for CharsPerToken {
    fn estimate(&self, text: &str) -> usize {
        let per = self.0.max(1);
        text.chars().count().div_ceil(per)
    }
}

/// Estimate with the default `ceil(chars / 4)` rule.
pub fn estimate_tokens(text: &str) -> usize {
    CharsPerToken::default().estimate(text)
}
