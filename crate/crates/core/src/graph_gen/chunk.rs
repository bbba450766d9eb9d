//! Character-based corpus chunking with overlap. Chunk starts advance
//! by `chunk_size - overlap` characters, so dropping the first
//! `overlap` characters of every chunk after the first reassembles the
//! corpus exactly, and split points can never land inside a multi-byte
//! character.

use crate::error::{Error, Result};

pub fn chunk_text(corpus: &str, chunk_size: usize, overlap: usize) -> Result<Vec<String>> {
    if chunk_size <= overlap {
        return Err(Error::invalid_config(format!(
            "chunk_size {chunk_size} must exceed overlap {overlap}"
        )));
    }
    let chars: Vec<char> = corpus.chars().collect();
    let stride = chunk_size - overlap;
    let mut chunks = Vec::new();
    let mut start = 0usize;
    while start < chars.len() {
        let end = (start + chunk_size).min(chars.len());
        chunks.push(chars[start..end].iter().collect());
        start += stride;
    }
    Ok(chunks)
}

/// Inverse of [`chunk_text`] for testing the reassembly property.
pub fn reassemble(chunks: &[String], overlap: usize) -> String {
    let mut out = String::new();
    for (i, chunk) in chunks.iter().enumerate() {
        if i == 0 {
            out.push_str(chunk);
        } else {
            out.extend(chunk.chars().skip(overlap));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn short_corpus_fits_in_one_chunk() {
        let corpus = "x".repeat(300);
        let chunks = chunk_text(&corpus, 400, 0).unwrap();
        assert_eq!(chunks, vec![corpus]);
    }

    #[test]
    fn forced_arithmetic_without_overlap() {
        let corpus = "a".repeat(1000);
        let chunks = chunk_text(&corpus, 400, 0).unwrap();
        let lengths: Vec<usize> = chunks.iter().map(|c| c.chars().count()).collect();
        assert_eq!(lengths, vec![400, 400, 200]);
    }

    #[test]
    fn stride_arithmetic_with_overlap() {
        // chunk_size 400, overlap 100: starts at 0, 300, 600, 900.
        let corpus: String = (0..1000).map(|i| char::from(b'a' + (i % 26) as u8)).collect();
        let chunks = chunk_text(&corpus, 400, 100).unwrap();
        assert_eq!(chunks.len(), 4);
        let chars: Vec<char> = corpus.chars().collect();
        for (i, chunk) in chunks.iter().enumerate() {
            let start = i * 300;
            let want: String = chars[start..(start + 400).min(1000)].iter().collect();
            assert_eq!(chunk, &want);
        }
    }

    #[test]
    fn rejects_overlap_not_less_than_chunk_size() {
        assert!(chunk_text("abc", 100, 100).is_err());
        assert!(chunk_text("abc", 50, 100).is_err());
    }

    #[test]
    fn multibyte_characters_survive_splitting() {
        let corpus = "日本語のテキスト".repeat(40);
        let chunks = chunk_text(&corpus, 37, 11).unwrap();
        for chunk in &chunks {
            assert!(chunk.chars().count() <= 37);
        }
        assert_eq!(reassemble(&chunks, 11), corpus);
    }

    proptest! {
        #[test]
        fn reassembly_reproduces_random_corpora(
            corpus in "[a-zα-ω \n]{0,500}",
            chunk_size in 2usize..80,
            overlap_frac in 0usize..100,
        ) {
            let overlap = overlap_frac * (chunk_size - 1) / 100;
            let chunks = chunk_text(&corpus, chunk_size, overlap).unwrap();
            prop_assert_eq!(reassemble(&chunks, overlap), corpus);
            for chunk in &chunks {
                prop_assert!(chunk.chars().count() <= chunk_size);
            }
        }
    }
}
