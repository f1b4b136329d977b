//! The single tokenizer shared by indexing, keyword mining and keyword
//! matching. Tokens are maximal runs of alphanumeric characters, lowercased.

use std::ops::Range;

/// Lowercased alphanumeric runs of `text`, in order.
pub fn tokenize(text: &str) -> Vec<String> {
    token_spans(text)
        .into_iter()
        .map(|span| text[span].to_lowercase())
        .collect()
}

/// Byte ranges of every token in `text`.
pub fn token_spans(text: &str) -> Vec<Range<usize>> {
    let mut spans = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_alphanumeric(), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                spans.push(s..i);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        spans.push(s..text.len());
    }
    spans
}

/// Prefix of `text` ending with its `max_tokens`-th token. Returns the whole
/// text when it has no more than `max_tokens` tokens.
pub fn truncate_tokens(text: &str, max_tokens: usize) -> &str {
    let spans = token_spans(text);
    if spans.len() <= max_tokens {
        return text;
    }
    match max_tokens {
        0 => "",
        n => &text[..spans[n - 1].end],
    }
}
