//! Tokenizer for Isar proof text.
//!
//! Quoted strings, cartouches (`‹...›` and `\<open>...\<close>`), backquoted
//! facts and `(* ... *)` comments are atomic. Brackets and commas are split
//! into their own tokens; everything else is whitespace-delimited.

use std::fmt;

use super::ParseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Word,
    Str,
    Cartouche,
    Comment,
    Punct,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    /// Byte offset into the text the token was lexed from.
    pub start: usize,
    /// Whether whitespace separated this token from the previous one.
    pub space_before: bool,
}

impl Token {
    pub fn word(text: &str) -> Self {
        Token { kind: TokenKind::Word, text: text.to_string(), start: 0, space_before: true }
    }

    pub fn end(&self) -> usize {
        self.start + self.text.len()
    }

    pub fn is_comment(&self) -> bool {
        self.kind == TokenKind::Comment
    }

    pub fn is_word(&self, w: &str) -> bool {
        self.kind == TokenKind::Word && self.text == w
    }

    /// Comparison key: atomic tokens compare with internal whitespace runs collapsed.
    pub fn canonical(&self) -> String {
        match self.kind {
            TokenKind::Word | TokenKind::Punct => self.text.clone(),
            _ => self.text.split_whitespace().collect::<Vec<_>>().join(" "),
        }
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

const OPEN_SYM: &str = "\\<open>";
const CLOSE_SYM: &str = "\\<close>";

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

fn unterminated(text: &str, at: usize, what: &str) -> ParseError {
    let (line, column) = line_col(text, at);
    ParseError { line, column, message: format!("unterminated {what}") }
}

/// Splits `text` into tokens. Offsets are relative to `text` plus `base`.
pub fn tokenize(text: &str) -> Result<Vec<Token>, ParseError> {
    tokenize_at(text, 0)
}

pub(crate) fn tokenize_at(text: &str, base: usize) -> Result<Vec<Token>, ParseError> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    let mut space = false;
    while i < text.len() {
        let rest = &text[i..];
        let c = rest.chars().next().unwrap();
        if c.is_whitespace() {
            space = true;
            i += c.len_utf8();
            continue;
        }
        let (kind, len) = if rest.starts_with("(*") {
            (TokenKind::Comment, scan_comment(text, i)?)
        } else if c == '"' {
            (TokenKind::Str, scan_quoted(text, i, b'"', "string")?)
        } else if c == '`' {
            (TokenKind::Str, scan_quoted(text, i, b'`', "backquoted fact")?)
        } else if c == '‹' {
            (TokenKind::Cartouche, scan_cartouche(text, i, "‹", "›")?)
        } else if rest.starts_with(OPEN_SYM) {
            (TokenKind::Cartouche, scan_cartouche(text, i, OPEN_SYM, CLOSE_SYM)?)
        } else if matches!(c, '(' | ')' | '[' | ']' | ',') {
            (TokenKind::Punct, 1)
        } else {
            let mut j = i;
            while j < text.len() {
                let r = &text[j..];
                let ch = r.chars().next().unwrap();
                if ch.is_whitespace()
                    || matches!(ch, '"' | '`' | '‹' | '(' | ')' | '[' | ']' | ',')
                    || r.starts_with(OPEN_SYM)
                {
                    break;
                }
                j += ch.len_utf8();
            }
            (TokenKind::Word, j - i)
        };
        debug_assert!(len > 0 && bytes.len() >= i + len);
        tokens.push(Token {
            kind,
            text: text[i..i + len].to_string(),
            start: base + i,
            space_before: space,
        });
        space = false;
        i += len;
    }
    Ok(tokens)
}

fn scan_comment(text: &str, start: usize) -> Result<usize, ParseError> {
    let mut depth = 0usize;
    let mut i = start;
    while i < text.len() {
        let rest = &text[i..];
        if rest.starts_with("(*") {
            depth += 1;
            i += 2;
        } else if rest.starts_with("*)") {
            depth -= 1;
            i += 2;
            if depth == 0 {
                return Ok(i - start);
            }
        } else {
            i += rest.chars().next().unwrap().len_utf8();
        }
    }
    Err(unterminated(text, start, "comment"))
}

fn scan_quoted(text: &str, start: usize, quote: u8, what: &str) -> Result<usize, ParseError> {
    let bytes = text.as_bytes();
    let mut i = start + 1;
    while i < bytes.len() {
        match bytes[i] {
            b'\\' => i += 2,
            b if b == quote => return Ok(i + 1 - start),
            _ => i += 1,
        }
    }
    Err(unterminated(text, start, what))
}

fn scan_cartouche(text: &str, start: usize, open: &str, close: &str) -> Result<usize, ParseError> {
    let mut depth = 0usize;
    let mut i = start;
    while i < text.len() {
        let rest = &text[i..];
        if rest.starts_with(open) {
            depth += 1;
            i += open.len();
        } else if rest.starts_with(close) {
            depth -= 1;
            i += close.len();
            if depth == 0 {
                return Ok(i - start);
            }
        } else {
            i += rest.chars().next().unwrap().len_utf8();
        }
    }
    Err(unterminated(text, start, "cartouche"))
}

/// Joins tokens with a single space wherever the source had whitespace.
pub fn join_tokens<'a>(tokens: impl IntoIterator<Item = &'a Token>) -> String {
    let mut out = String::new();
    for (i, t) in tokens.into_iter().enumerate() {
        if i > 0 && t.space_before {
            out.push(' ');
        }
        out.push_str(&t.text);
    }
    out
}

/// Whitespace-insensitive token sequence of `text`.
pub fn canonical_tokens(text: &str) -> Result<Vec<String>, ParseError> {
    Ok(tokenize(text)?.iter().map(Token::canonical).collect())
}

/// True when both texts lex to the same canonical token sequence.
pub fn token_equivalent(a: &str, b: &str) -> Result<bool, ParseError> {
    Ok(canonical_tokens(a)? == canonical_tokens(b)?)
}
