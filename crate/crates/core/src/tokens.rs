//! Token estimation for prompt budgeting.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TokenMethod {
    Heuristic,
    ExactTokenizer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenEstimate {
    pub char_count: usize,
    pub token_count: usize,
    pub method: TokenMethod,
}

pub trait Tokenizer: Send + Sync {
    fn name(&self) -> &str;
    fn count(&self, text: &str) -> usize;
}

/// Four characters per token, rounded up.
pub fn heuristic_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

pub fn estimate_tokens(text: &str) -> TokenEstimate {
    let chars = text.chars().count();
    TokenEstimate {
        char_count: chars,
        token_count: chars.div_ceil(4),
        method: TokenMethod::Heuristic,
    }
}

pub fn estimate_tokens_with(text: &str, tokenizer: Option<&dyn Tokenizer>) -> TokenEstimate {
    match tokenizer {
        None => estimate_tokens(text),
        Some(t) => TokenEstimate {
            char_count: text.chars().count(),
            token_count: t.count(text),
            method: TokenMethod::ExactTokenizer,
        },
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TokenizerError {
    #[error("unknown tokenizer {0:?}; available: {1}")]
    Unknown(String, String),
    #[error("tokenizer {name} failed to load: {message}")]
    Load { name: String, message: String },
}

/// Names accepted by [`tokenizer_by_name`].
pub fn available_tokenizers() -> &'static [&'static str] {
    if cfg!(feature = "tiktoken") {
        &["heuristic", "cl100k_base", "o200k_base"]
    } else {
        &["heuristic"]
    }
}

/// `None` for the heuristic, otherwise an exact tokenizer.
pub fn tokenizer_by_name(name: &str) -> Result<Option<Box<dyn Tokenizer>>, TokenizerError> {
    match name {
        "heuristic" => Ok(None),
        #[cfg(feature = "tiktoken")]
        "cl100k_base" | "o200k_base" => tiktoken::Tiktoken::load(name).map(|t| Some(Box::new(t) as Box<dyn Tokenizer>)),
        other => Err(TokenizerError::Unknown(
            other.to_string(),
            available_tokenizers().join(", "),
        )),
    }
}

#[cfg(feature = "tiktoken")]
mod tiktoken {
    use super::{Tokenizer, TokenizerError};

    pub struct Tiktoken {
        name: String,
        bpe: tiktoken_rs::CoreBPE,
    }

    impl Tiktoken {
        pub fn load(name: &str) -> Result<Self, TokenizerError> {
            let bpe = match name {
                "cl100k_base" => tiktoken_rs::cl100k_base(),
                _ => tiktoken_rs::o200k_base(),
            }
            .map_err(|e| TokenizerError::Load {
                name: name.to_string(),
                message: e.to_string(),
            })?;
            Ok(Tiktoken {
                name: name.to_string(),
                bpe,
            })
        }
    }

    impl Tokenizer for Tiktoken {
        fn name(&self) -> &str {
            &self.name
        }

        fn count(&self, text: &str) -> usize {
            self.bpe.encode_with_special_tokens(text).len()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heuristic_formula() {
        assert_eq!(estimate_tokens("").token_count, 0);
        assert_eq!(estimate_tokens(&"x".repeat(400)).token_count, 100);
        assert_eq!(estimate_tokens("abcde").token_count, 2);
        assert_eq!(estimate_tokens("äöü").char_count, 3);
    }

    struct Words;
    impl Tokenizer for Words {
        fn name(&self) -> &str {
            "words"
        }
        fn count(&self, text: &str) -> usize {
            text.split_whitespace().count()
        }
    }

    #[test]
    fn pluggable_tokenizer() {
        let e = estimate_tokens_with("a b c", Some(&Words));
        assert_eq!((e.token_count, e.method), (3, TokenMethod::ExactTokenizer));
        assert!(tokenizer_by_name("heuristic").unwrap().is_none());
        assert!(tokenizer_by_name("nope").is_err());
    }
}
