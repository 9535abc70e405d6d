//! Text normalization shared by the index, the reranker and the scorers.

use unicode_normalization::UnicodeNormalization;

/// Lowercases and splits on every non-alphanumeric character. No stemming,
/// no stopword removal.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Canonical form used for every title comparison.
pub fn normalize_title(title: &str) -> String {
    title.nfc().collect()
}

/// Title tokens as seen by the decoder trie: whitespace tokens of the
/// normalized title.
pub fn title_tokens(title: &str) -> Vec<String> {
    title.split_whitespace().map(str::to_owned).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_splits_on_punctuation() {
        assert_eq!(
            tokenize("Seth Adam Meyers (born December 28, 1973)"),
            vec!["seth", "adam", "meyers", "born", "december", "28", "1973"]
        );
        assert!(tokenize(" -- ").is_empty());
    }

    #[test]
    fn nfc_composes_combining_marks() {
        let decomposed = "Beyonce\u{301}";
        assert_eq!(normalize_title(decomposed), "Beyonc\u{e9}");
    }
}
