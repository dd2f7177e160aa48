// SPDX-License-Identifier: Apache-2.0

//! Tokenization and sentence segmentation shared by retrieval and grounding.

/// Characters that may end a sentence.
pub const TERMINALS: &[char] = &['.', '!', '?', '。', '！', '？'];

/// Lowercases `text` and splits it into maximal runs of alphanumeric characters.
///
/// Alphanumeric is Unicode-aware, so Hangul syllables form words the same way
/// Latin letters do.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

/// Splits `text` into sentence slices.
///
/// A sentence ends at a newline, or at a run of terminal punctuation that is
/// followed by whitespace, the end of the text, or an opening `[` (the start of a
/// reference token). A period between two digits (`3.5`) therefore never splits.
/// Returned slices keep their terminal punctuation and are trimmed; empty
/// slices are dropped.
pub fn split_sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut iter = text.char_indices().peekable();
    while let Some((i, c)) = iter.next() {
        if c == '\n' {
            push_trimmed(&mut out, &text[start..i]);
            start = i + c.len_utf8();
            continue;
        }
        if TERMINALS.contains(&c) {
            let mut end = i + c.len_utf8();
            while let Some(&(j, d)) = iter.peek() {
                if TERMINALS.contains(&d) {
                    end = j + d.len_utf8();
                    iter.next();
                } else {
                    break;
                }
            }
            let boundary = match iter.peek() {
                None => true,
                Some(&(_, d)) => d.is_whitespace() || d == '[',
            };
            if boundary {
                push_trimmed(&mut out, &text[start..end]);
                start = end;
            }
        }
    }
    push_trimmed(&mut out, &text[start..]);
    out
}

fn push_trimmed<'a>(out: &mut Vec<&'a str>, s: &'a str) {
    let t = s.trim();
    if !t.is_empty() {
        out.push(t);
    }
}

/// Returns the first `max` characters of `s` (not bytes).
pub fn take_chars(s: &str, max: usize) -> &str {
    match s.char_indices().nth(max) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}
