//! Synthetic fixtures shared by the benchmarks.

use cascade_core::corpus::{Document, DocumentStore, Query};
use cascade_core::duo::PairMatrix;
use cascade_core::index::{Bm25Params, InvertedIndex, Tokenizer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn word(rng: &mut ChaCha8Rng, vocab: usize) -> String {
    let u: f64 = rng.random();
    format!("t{}", (u * u * u * vocab as f64) as usize)
}

/// `n` documents of 20 to 80 tokens over a skewed vocabulary.
pub fn corpus(n: usize, vocab: usize, seed: u64) -> (DocumentStore, InvertedIndex) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let docs = (0..n).map(|i| {
        let len = rng.random_range(20..=80);
        let text: Vec<String> = (0..len).map(|_| word(&mut rng, vocab)).collect();
        Document::new(format!("d{i}"), text.join(" "))
    });
    let store = DocumentStore::from_documents(docs).expect("unique ids");
    let index = InvertedIndex::build(&store, Tokenizer::default(), Bm25Params::default()).expect("non-empty");
    (store, index)
}

pub fn queries(n: usize, vocab: usize, seed: u64) -> Vec<Query> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let len = rng.random_range(2..=6);
            let text: Vec<String> = (0..len).map(|_| word(&mut rng, vocab)).collect();
            Query::new(format!("q{i}"), text.join(" "))
        })
        .collect()
}

pub fn matrix(n: usize, seed: u64) -> PairMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PairMatrix::from_fn(n, |_, _| rng.random())
}
