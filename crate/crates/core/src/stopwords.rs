//! Built-in function-word list used when pulling content words out of glosses
//! and examples. Signatures never consult it: counting keeps every token.

/// Lowercase function words, sorted so membership is a binary search.
pub const STOPWORDS: &[&str] = &[
    "a", "about", "after", "all", "an", "and", "any", "are", "as", "at", "be", "been", "but",
    "by", "can", "do", "for", "from", "had", "has", "have", "he", "her", "his", "i", "if", "in",
    "into", "is", "it", "its", "no", "not", "of", "on", "one", "or", "other", "she", "so",
    "some", "such", "than", "that", "the", "their", "them", "then", "there", "these", "they",
    "this", "those", "to", "up", "was", "we", "were", "what", "when", "which", "who", "whom",
    "whose", "with", "you",
];

pub fn is_stopword(word: &str) -> bool {
    STOPWORDS.binary_search(&word).is_ok()
}

/// Lowercased content words of a free-text field (gloss, example, multiword
/// relation entry). Punctuation at word edges is dropped, internal hyphens and
/// apostrophes are kept.
pub fn content_words(text: &str) -> Vec<String> {
    text.split(|c: char| c.is_whitespace() || matches!(c, ',' | ';' | ':' | '(' | ')' | '"'))
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|w| !w.is_empty() && !is_stopword(w))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn list_is_sorted_and_unique() {
        assert!(STOPWORDS.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn gloss_content_words() {
        assert_eq!(
            content_words("a youthful male person"),
            vec!["youthful", "male", "person"]
        );
        assert_eq!(
            content_words("a person whose occupation is to serve at table (as in a restaurant)"),
            vec!["person", "occupation", "serve", "table", "restaurant"]
        );
        assert_eq!(content_words("a x"), vec!["x"]);
    }
}
