use std::collections::HashSet;
use std::ops::Range;

use rust_stemmers::{Algorithm, Stemmer};
use serde::{Deserialize, Serialize};

/// Lowercases and splits on any non-alphanumeric codepoint.
pub fn tokenize(text: &str) -> Vec<String> {
    token_spans(text).map(|(tok, _)| tok).collect()
}

/// Tokens together with the byte range each one occupies in `text`.
pub fn token_spans(text: &str) -> impl Iterator<Item = (String, Range<usize>)> + '_ {
    let mut chars = text.char_indices().peekable();
    std::iter::from_fn(move || {
        while let Some(&(_, c)) = chars.peek() {
            if c.is_alphanumeric() {
                break;
            }
            chars.next();
        }
        let (start, _) = *chars.peek()?;
        let mut end = start;
        let mut token = String::new();
        while let Some(&(i, c)) = chars.peek() {
            if !c.is_alphanumeric() {
                break;
            }
            token.extend(c.to_lowercase());
            end = i + c.len_utf8();
            chars.next();
        }
        Some((token, start..end))
    })
}

/// Persisted tokenizer options. Both stemming and stopword removal are off
/// by default.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizerConfig {
    #[serde(default)]
    pub stem: bool,
    #[serde(default)]
    pub stopwords: Vec<String>,
}

pub struct Tokenizer {
    config: TokenizerConfig,
    stopwords: HashSet<String>,
    stemmer: Option<Stemmer>,
}

impl std::fmt::Debug for Tokenizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tokenizer").field("config", &self.config).finish()
    }
}

impl Clone for Tokenizer {
    fn clone(&self) -> Self {
        Tokenizer::new(self.config.clone())
    }
}

impl Default for Tokenizer {
    fn default() -> Self {
        Tokenizer::new(TokenizerConfig::default())
    }
}

impl Tokenizer {
    pub fn new(config: TokenizerConfig) -> Self {
        let stopwords = config.stopwords.iter().flat_map(|w| tokenize(w)).collect();
        let stemmer = config.stem.then(|| Stemmer::create(Algorithm::English));
        Self {
            config,
            stopwords,
            stemmer,
        }
    }

    pub fn config(&self) -> &TokenizerConfig {
        &self.config
    }

    pub fn is_plain(&self) -> bool {
        self.stemmer.is_none() && self.stopwords.is_empty()
    }

    pub fn tokenize(&self, text: &str) -> Vec<String> {
        self.spans(text).map(|(t, _)| t).collect()
    }

    pub fn spans<'a>(&'a self, text: &'a str) -> impl Iterator<Item = (String, Range<usize>)> + 'a {
        token_spans(text).filter_map(move |(tok, span)| {
            if self.stopwords.contains(&tok) {
                return None;
            }
            let tok = match &self.stemmer {
                Some(s) => s.stem(&tok).into_owned(),
                None => tok,
            };
            Some((tok, span))
        })
    }
}
