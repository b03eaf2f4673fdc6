//! Lowercasing whitespace-and-punctuation tokenizer shared by the local
//! backends.

use std::collections::HashMap;

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '\''
}

/// Splits on whitespace; every punctuation character becomes its own token.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut word = String::new();
    for c in text.chars() {
        if is_word_char(c) {
            word.extend(c.to_lowercase());
            continue;
        }
        if !word.is_empty() {
            out.push(std::mem::take(&mut word));
        }
        if !c.is_whitespace() {
            out.push(c.to_string());
        }
    }
    if !word.is_empty() {
        out.push(word);
    }
    out
}

/// Canonical surface form of a token list: tokens joined by single spaces.
pub fn detokenize<S: AsRef<str>>(tokens: &[S]) -> String {
    tokens.iter().map(AsRef::as_ref).collect::<Vec<_>>().join(" ")
}

/// Token ids plus the text they came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub tokens: Vec<u32>,
    pub surface: String,
}

/// Bidirectional token ↔ id table. Id 0 is reserved for sentence start,
/// 1 for sentence end and 2 for unknown tokens.
#[derive(Debug, Clone, Default)]
pub struct Vocabulary {
    ids: HashMap<String, u32>,
    words: Vec<String>,
}

pub const BOS: u32 = 0;
pub const EOS: u32 = 1;
pub const UNK: u32 = 2;

impl Vocabulary {
    pub fn new() -> Self {
        let mut v = Vocabulary::default();
        for w in ["<s>", "</s>", "<unk>"] {
            v.intern(w);
        }
        v
    }

    pub fn intern(&mut self, word: &str) -> u32 {
        if let Some(&id) = self.ids.get(word) {
            return id;
        }
        let id = self.words.len() as u32;
        self.ids.insert(word.to_string(), id);
        self.words.push(word.to_string());
        id
    }

    pub fn id(&self, word: &str) -> u32 {
        self.ids.get(word).copied().unwrap_or(UNK)
    }

    pub fn word(&self, id: u32) -> &str {
        &self.words[id as usize]
    }

    /// Number of entries, including the reserved ones.
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn encode(&self, text: &str) -> TokenSequence {
        TokenSequence {
            tokens: tokenize(text).iter().map(|t| self.id(t)).collect(),
            surface: text.to_string(),
        }
    }

    pub fn decode(&self, ids: &[u32]) -> String {
        detokenize(&ids.iter().map(|&i| self.word(i)).collect::<Vec<_>>())
    }
}
