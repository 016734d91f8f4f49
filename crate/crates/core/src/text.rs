//! Tokenization shared by the annotator and the feature extractor.
//!
//! Splitting is Unicode-whitespace based; non-alphanumeric characters are
//! stripped at token edges so that `"Bath,"` and `"Bath"` normalize to the
//! same token. A leading `#` run is stripped for matching purposes but kept
//! in the anchor span, so hashtag mentions keep their original surface form.

/// One token of a text. Offsets are byte positions into the source string.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token {
    /// Start of the anchor text: equals `start`, except when the token is a
    /// hashtag, in which case it points at the leading `#` run.
    pub anchor_start: usize,
    /// Start of the core (edge-punctuation-stripped) text.
    pub start: usize,
    /// End of the core text (exclusive).
    pub end: usize,
}

impl Token {
    pub fn core<'a>(&self, text: &'a str) -> &'a str {
        &text[self.start..self.end]
    }
}

/// Splits `text` into tokens, trimming non-alphanumeric characters at both
/// edges of each whitespace-separated chunk. Chunks that contain no
/// alphanumeric character produce no token.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut chunk_start = None::<usize>;
    let mut push = |start: usize, end: usize| {
        let chunk = &text[start..end];
        let core_rel_start = match chunk.char_indices().find(|(_, c)| c.is_alphanumeric()) {
            Some((i, _)) => i,
            None => return,
        };
        let core_rel_end = chunk
            .char_indices()
            .rev()
            .find(|(_, c)| c.is_alphanumeric())
            .map(|(i, c)| i + c.len_utf8())
            .expect("chunk has an alphanumeric char");
        let core_start = start + core_rel_start;
        // Extend the anchor backwards over an adjacent `#` run.
        let mut anchor_start = core_start;
        while anchor_start > start && chunk[..anchor_start - start].ends_with('#') {
            anchor_start -= 1;
        }
        tokens.push(Token {
            anchor_start,
            start: core_start,
            end: start + core_rel_end,
        });
    };
    for (i, c) in text.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = chunk_start.take() {
                push(s, i);
            }
        } else if chunk_start.is_none() {
            chunk_start = Some(i);
        }
    }
    if let Some(s) = chunk_start {
        push(s, text.len());
    }
    tokens
}

/// Canonical lowercase form of a string: tokens joined by single spaces.
/// Used as the lexicon key and for validating annotator output.
pub fn normal_form(text: &str) -> String {
    let tokens = tokenize(text);
    let mut out = String::new();
    for tok in &tokens {
        if !out.is_empty() {
            out.push(' ');
        }
        out.extend(tok.core(text).chars().flat_map(char::to_lowercase));
    }
    out
}

/// Number of tokens in a string under the shared tokenization rules.
pub fn token_count(text: &str) -> usize {
    tokenize(text).len()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strips_edge_punctuation() {
        let text = "visiting Bath, today.";
        let toks = tokenize(text);
        let cores: Vec<&str> = toks.iter().map(|t| t.core(text)).collect();
        assert_eq!(cores, ["visiting", "Bath", "today"]);
    }

    #[test]
    fn hashtag_keeps_hash_in_anchor() {
        let text = "going to (#Bath)";
        let toks = tokenize(text);
        let bath = toks.last().unwrap();
        assert_eq!(bath.core(text), "Bath");
        assert_eq!(&text[bath.anchor_start..bath.end], "#Bath");
    }

    #[test]
    fn normal_form_collapses_case_and_punctuation() {
        assert_eq!(normal_form("Bath, Somerset"), "bath somerset");
        assert_eq!(normal_form("  NEW   York  "), "new york");
        assert_eq!(normal_form("!!!"), "");
    }

    #[test]
    fn unicode_tokens_survive() {
        let text = "Ångström café №5";
        let toks = tokenize(text);
        let cores: Vec<&str> = toks.iter().map(|t| t.core(text)).collect();
        assert_eq!(cores, ["Ångström", "café", "5"]);
    }
}
