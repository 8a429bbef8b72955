use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Index into a [`Vocabulary`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenId(pub u32);

impl TokenId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";
pub const EOV: &str = "<eov>";

/// Token space shared by every model taking part in one pipeline run.
///
/// Ids `0..4` are always the special markers, in the order
/// begin-of-sequence, end-of-sequence, unknown, end-of-value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    tokens: Vec<String>,
}

impl From<VocabularyRepr> for Vocabulary {
    fn from(repr: VocabularyRepr) -> Self {
        let mut vocab = Vocabulary::new();
        for t in repr.tokens {
            vocab.insert(&t);
        }
        vocab
    }
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(vocab: Vocabulary) -> Self {
        VocabularyRepr {
            tokens: vocab.tokens,
        }
    }
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}

impl Vocabulary {
    /// A vocabulary holding only the four special markers.
    pub fn new() -> Self {
        let mut vocab = Vocabulary {
            tokens: Vec::new(),
            index: HashMap::new(),
        };
        for special in [BOS, EOS, UNK, EOV] {
            vocab.insert(special);
        }
        vocab
    }

    /// Builds a vocabulary from every token of every text.
    pub fn from_texts<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut vocab = Vocabulary::new();
        for text in texts {
            vocab.extend_from_text(text);
        }
        vocab
    }

    pub fn extend_from_text(&mut self, text: &str) {
        for word in split_words(text) {
            self.insert(&word);
        }
    }

    /// Adds `token` if absent and returns its id.
    pub fn insert(&mut self, token: &str) -> TokenId {
        if let Some(&id) = self.index.get(token) {
            return id;
        }
        let id = TokenId(self.tokens.len() as u32);
        self.tokens.push(token.to_string());
        self.index.insert(token.to_string(), id);
        id
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> &str {
        &self.tokens[id.index()]
    }

    pub fn get_token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id.index()).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn bos(&self) -> TokenId {
        TokenId(0)
    }

    pub fn eos(&self) -> TokenId {
        TokenId(1)
    }

    pub fn unk(&self) -> TokenId {
        TokenId(2)
    }

    pub fn eov(&self) -> TokenId {
        TokenId(3)
    }

    pub fn is_special(&self, id: TokenId) -> bool {
        id.0 < 4
    }

    /// Lowercases, splits on whitespace and separates punctuation into
    /// standalone tokens. Words missing from the vocabulary map to the unknown
    /// marker.
    pub fn tokenize(&self, text: &str) -> Vec<TokenId> {
        split_words(text)
            .map(|w| self.id(&w).unwrap_or_else(|| self.unk()))
            .collect()
    }

    pub fn decode_tokens(&self, ids: &[TokenId]) -> Vec<&str> {
        ids.iter().map(|&id| self.token(id)).collect()
    }
}

/// Free-standing form of [`Vocabulary::tokenize`].
pub fn tokenize(text: &str, vocab: &Vocabulary) -> Vec<TokenId> {
    vocab.tokenize(text)
}

fn is_operator_char(c: char) -> bool {
    matches!(c, '<' | '>' | '=' | '!')
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Splits `text` into lowercase word strings.
///
/// Rules: whitespace separates; every punctuation character is its own token,
/// except that runs of comparison characters (`<>=!`) stay together (`==`,
/// `>=`) and a `.` between two digits stays inside a number (`2.5`).
pub fn split_words(text: &str) -> impl Iterator<Item = String> + '_ {
    let chars: Vec<char> = text.chars().flat_map(char::to_lowercase).collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if is_word_char(c) {
            let start = i;
            while i < chars.len() {
                let c = chars[i];
                let decimal_point = c == '.'
                    && i > start
                    && chars[i - 1].is_ascii_digit()
                    && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit());
                if is_word_char(c) || decimal_point {
                    i += 1;
                } else {
                    break;
                }
            }
            out.push(chars[start..i].iter().collect());
        } else if is_operator_char(c) {
            let start = i;
            while i < chars.len() && is_operator_char(chars[i]) {
                i += 1;
            }
            out.push(chars[start..i].iter().collect());
        } else {
            out.push(c.to_string());
            i += 1;
        }
    }
    out.into_iter()
}

/// Best-effort inverse of tokenization for values that have no recorded
/// surface form. Tokens are space-joined, double quotes hug their contents and
/// parentheses hug what they enclose.
pub fn detokenize<S: AsRef<str>>(words: &[S]) -> String {
    let mut out = String::new();
    let mut in_quote = false;
    let mut glue_next = false;
    for w in words {
        let w = w.as_ref();
        let glue_prev = match w {
            "\"" => {
                in_quote = !in_quote;
                // a closing quote attaches to the previous token
                !in_quote
            }
            ")" => true,
            "(" => true,
            _ => false,
        };
        if !out.is_empty() && !glue_prev && !glue_next {
            out.push(' ');
        }
        out.push_str(w);
        glue_next = matches!(w, "(") || (w == "\"" && in_quote);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(s: &str) -> Vec<String> {
        split_words(s).collect()
    }

    #[test]
    fn empty_text_tokenizes_to_nothing() {
        let vocab = Vocabulary::new();
        assert!(vocab.tokenize("").is_empty());
        assert!(vocab.tokenize("   \t ").is_empty());
    }

    #[test]
    fn question_is_lowercased_and_punctuation_split() {
        let vocab = Vocabulary::from_texts(["what is utah ?"]);
        let ids = vocab.tokenize("What is Utah?");
        assert_eq!(vocab.decode_tokens(&ids), vec!["what", "is", "utah", "?"]);
        assert_eq!(
            ids,
            vec![TokenId(4), TokenId(5), TokenId(6), TokenId(7)],
            "ids follow insertion order after the four specials"
        );
    }

    #[test]
    fn oov_maps_to_unknown() {
        let vocab = Vocabulary::from_texts(["a b"]);
        assert_eq!(vocab.tokenize("zzz"), vec![vocab.unk()]);
    }

    #[test]
    fn specials_are_distinct_and_first() {
        let v = Vocabulary::new();
        assert_eq!(v.len(), 4);
        assert_eq!(v.token(v.bos()), BOS);
        assert_eq!(v.token(v.eos()), EOS);
        assert_eq!(v.token(v.unk()), UNK);
        assert_eq!(v.token(v.eov()), EOV);
    }

    #[test]
    fn sql_operators_and_identifiers() {
        assert_eq!(
            words(r#"state . state_name = "utah""#),
            vec!["state", ".", "state_name", "=", "\"", "utah", "\""]
        );
        assert_eq!(
            words(r#"Maching Algorithm("x y") == True"#),
            vec![
                "maching",
                "algorithm",
                "(",
                "\"",
                "x",
                "y",
                "\"",
                ")",
                "==",
                "true"
            ]
        );
        assert_eq!(words("Price >= 2.5"), vec!["price", ">=", "2.5"]);
        assert_eq!(words("end."), vec!["end", "."]);
    }

    #[test]
    fn detokenize_restores_quoted_and_called_forms() {
        let w = words(r#"state . state_name = "utah""#);
        assert_eq!(detokenize(&w), r#"state . state_name = "utah""#);
        let w = words(r#"maching algorithm("petrol trimmer") == true and price > 100"#);
        assert_eq!(
            detokenize(&w),
            r#"maching algorithm("petrol trimmer") == true and price > 100"#
        );
    }

    #[test]
    fn serde_round_trip_keeps_ids() {
        let v = Vocabulary::from_texts(["b a c"]);
        let json = serde_json::to_string(&v).unwrap();
        let back: Vocabulary = serde_json::from_str(&json).unwrap();
        assert_eq!(v, back);
        assert_eq!(back.id("c"), v.id("c"));
    }
}
