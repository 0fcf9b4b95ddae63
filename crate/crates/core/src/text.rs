//! Tokenization shared by questions, display names and KB identifiers.

/// Lowercases, drops apostrophes, treats any other non-alphanumeric
/// character as a separator and splits on whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut cleaned = String::with_capacity(text.len());
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            cleaned.extend(ch.to_lowercase());
        } else if ch == '\'' || ch == '\u{2019}' {
            continue;
        } else {
            cleaned.push(' ');
        }
    }
    cleaned.split_whitespace().map(str::to_owned).collect()
}

/// Splits an identifier such as `government.governing_officials` on `.`
/// and `_`, lowercased, order preserved.
pub fn id_tokens(id: &str) -> Vec<String> {
    id.split(['.', '_'])
        .filter(|s| !s.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Tokens of the last `.`-separated segment of an identifier; the leading
/// segments are namespaces (`m.`, `film.film.`) and carry no surface words.
pub fn last_segment_tokens(id: &str) -> Vec<String> {
    let last = id.rsplit('.').find(|s| !s.is_empty()).unwrap_or(id);
    id_tokens(last)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_strips_punctuation() {
        assert_eq!(
            tokenize("Who is the highest president of the US after 2000?"),
            vec![
                "who",
                "is",
                "the",
                "highest",
                "president",
                "of",
                "the",
                "us",
                "after",
                "2000"
            ]
        );
        assert_eq!(
            tokenize("Galapagos islands' map"),
            vec!["galapagos", "islands", "map"]
        );
        assert_eq!(tokenize("star-wars"), vec!["star", "wars"]);
        assert!(tokenize(" ?! ").is_empty());
    }

    #[test]
    fn identifier_tokens() {
        assert_eq!(
            id_tokens("government.governing_officials"),
            vec!["government", "governing", "officials"]
        );
        assert_eq!(
            last_segment_tokens("government.governing_officials"),
            vec!["governing", "officials"]
        );
        assert_eq!(
            last_segment_tokens("m.united_states"),
            vec!["united", "states"]
        );
        assert_eq!(last_segment_tokens("cvt_1"), vec!["cvt", "1"]);
    }
}
