//! Add-one smoothed n-gram language model.
//!
//! `p(w | h) = (c(h w) + 1) / (c(h) + V)` where `h` is the previous
//! `order - 1` tokens (padded with sentence-start markers) and `V` counts every
//! predictable token: the corpus words plus end-of-sentence and unknown.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::tokenize::{tokenize, Vocabulary, BOS, EOS};
use super::Backend;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct NgramModel {
    order: usize,
    vocab: Vocabulary,
    ngrams: HashMap<Vec<u32>, u32>,
    contexts: HashMap<Vec<u32>, u32>,
    source: String,
}

impl NgramModel {
    /// Trains on `corpus`, one sentence per non-blank line.
    pub fn train(corpus: &str, order: usize) -> Result<Self> {
        Self::train_weighted(corpus.lines().map(|l| (l, 1)), order)
    }

    /// Trains on sentences that each count as `weight` observations.
    pub fn train_weighted<'a>(sentences: impl IntoIterator<Item = (&'a str, u32)>, order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::Config("n-gram order must be at least 1".into()));
        }
        let mut vocab = Vocabulary::new();
        let mut ngrams = HashMap::new();
        let mut contexts = HashMap::new();
        for (line, weight) in sentences {
            let toks = tokenize(line);
            if toks.is_empty() || weight == 0 {
                continue;
            }
            let mut seq = vec![BOS; order - 1];
            seq.extend(toks.iter().map(|t| vocab.intern(t)));
            seq.push(EOS);
            for window in seq.windows(order) {
                *ngrams.entry(window.to_vec()).or_insert(0) += weight;
                *contexts.entry(window[..order - 1].to_vec()).or_insert(0) += weight;
            }
        }
        Ok(NgramModel {
            order,
            vocab,
            ngrams,
            contexts,
            source: "inline".into(),
        })
    }

    pub fn from_file(path: impl AsRef<Path>, order: usize) -> Result<Self> {
        let path = path.as_ref();
        let corpus = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m = Self::train(&corpus, order)?;
        m.source = path.display().to_string();
        Ok(m)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    /// Number of tokens the model can predict (everything but sentence start).
    pub fn predictable_size(&self) -> usize {
        self.vocab.len() - 1
    }

    /// Ids of all predictable tokens.
    pub fn predictable_ids(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.vocab.len() as u32).filter(|&i| i != BOS)
    }

    /// `p(word | context)`; only the last `order - 1` context ids matter.
    pub fn prob(&self, context: &[u32], word: u32) -> f64 {
        let h = self.order - 1;
        let mut key: Vec<u32> = Vec::with_capacity(self.order);
        if context.len() < h {
            key.extend(std::iter::repeat_n(BOS, h - context.len()));
            key.extend_from_slice(context);
        } else {
            key.extend_from_slice(&context[context.len() - h..]);
        }
        let ctx_count = self.contexts.get(&key).copied().unwrap_or(0) as f64;
        key.push(word);
        let count = self.ngrams.get(&key).copied().unwrap_or(0) as f64;
        (count + 1.0) / (ctx_count + self.predictable_size() as f64)
    }
}

impl Backend for NgramModel {
    fn describe(&self) -> String {
        format!("ngram(order={}, corpus={})", self.order, self.source)
    }

    fn token_logprobs(&self, prompt: &str, completion: &str) -> Result<Vec<f64>> {
        self.continue_from(&self.vocab.encode(prompt).tokens, completion)
    }

    fn score_batch(&self, prompt: &str, completions: &[String]) -> Result<Vec<Vec<f64>>> {
        let context = self.vocab.encode(prompt).tokens;
        completions.iter().map(|c| self.continue_from(&context, c)).collect()
    }
}

impl NgramModel {
    fn continue_from(&self, prompt: &[u32], completion: &str) -> Result<Vec<f64>> {
        let completion = self.vocab.encode(completion).tokens;
        if completion.is_empty() {
            return Err(Error::Tokenization("completion has no tokens".into()));
        }
        let h = self.order - 1;
        let mut context: Vec<u32> = prompt[prompt.len().saturating_sub(h)..].to_vec();
        let mut out = Vec::with_capacity(completion.len());
        for tok in completion {
            out.push(self.prob(&context, tok).ln());
            context.push(tok);
        }
        Ok(out)
    }
}
