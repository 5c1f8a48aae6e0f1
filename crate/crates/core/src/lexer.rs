//! Language-aware lexer for Python, Java and C++.
//!
//! Comments (and C++ preprocessor lines) are dropped, string and character
//! literals become single [`TokKind::Str`] tokens, so keyword scans never
//! look inside them.

use crate::corpus::Lang;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokKind {
    Ident,
    Number,
    Str,
    Punct,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token<'a> {
    pub kind: TokKind,
    pub text: &'a str,
    /// Byte offset into the source.
    pub start: usize,
    /// Column (in chars) of the token start within its line.
    pub col: usize,
}

impl Token<'_> {
    pub fn is(&self, text: &str) -> bool {
        self.text == text && self.kind != TokKind::Str
    }
}

const PUNCT3: &[&str] = &["<<=", ">>=", "**=", "//=", "...", "->*", "<=>", ">>>"];
const PUNCT2: &[&str] = &[
    "->", "::", "==", "!=", "<=", ">=", "&&", "||", "++", "--", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<",
    ">>", "**", "//", ":=",
];

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    line_start: usize,
    lang: Lang,
    out: Vec<Token<'a>>,
}

impl<'a> Lexer<'a> {
    fn peek(&self, off: usize) -> u8 {
        *self.bytes.get(self.pos + off).unwrap_or(&0)
    }

    fn starts_with(&self, s: &str) -> bool {
        self.src[self.pos..].starts_with(s)
    }

    fn col_of(&self, start: usize) -> usize {
        // Multi-line literals move `line_start` past their own start.
        let line_start =
            if self.line_start <= start { self.line_start } else { self.src[..start].rfind('\n').map_or(0, |i| i + 1) };
        self.src[line_start..start].chars().count()
    }

    fn push(&mut self, kind: TokKind, start: usize) {
        let col = self.col_of(start);
        self.out.push(Token { kind, text: &self.src[start..self.pos], start, col });
    }

    fn advance_char(&mut self) {
        let c = self.src[self.pos..].chars().next().unwrap();
        if c == '\n' {
            self.line_start = self.pos + 1;
        }
        self.pos += c.len_utf8();
    }

    fn skip_to_eol(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
            self.pos += 1;
        }
    }

    fn skip_block_comment(&mut self) {
        self.pos += 2;
        while self.pos < self.bytes.len() && !self.starts_with("*/") {
            self.advance_char();
        }
        self.pos = (self.pos + 2).min(self.bytes.len());
    }

    // Quoted literal starting at the current quote; handles backslash escapes.
    fn quoted(&mut self, quote: &str, escapes: bool) {
        self.pos += quote.len();
        while self.pos < self.bytes.len() {
            if escapes && self.bytes[self.pos] == b'\\' {
                self.pos += 1;
                if self.pos < self.bytes.len() {
                    self.advance_char();
                }
                continue;
            }
            if self.starts_with(quote) {
                self.pos += quote.len();
                return;
            }
            // Single-quoted literals stop at end of line when unterminated.
            if quote.len() == 1 && self.bytes[self.pos] == b'\n' {
                return;
            }
            self.advance_char();
        }
    }

    fn cpp_raw_string(&mut self) -> bool {
        // R"delim( ... )delim"
        let rest = &self.src[self.pos..];
        let Some(after) = rest.strip_prefix("R\"") else {
            return false;
        };
        let Some(paren) = after.find('(') else {
            return false;
        };
        let delim = &after[..paren];
        if delim.len() > 16 || delim.contains(|c: char| c.is_whitespace() || c == ')') {
            return false;
        }
        let close = format!("){delim}\"");
        let body_start = self.pos + 2 + paren + 1;
        match self.src[body_start..].find(&close) {
            Some(off) => {
                let end = body_start + off + close.len();
                while self.pos < end {
                    self.advance_char();
                }
            }
            None => {
                while self.pos < self.bytes.len() {
                    self.advance_char();
                }
            }
        }
        true
    }

    fn python_string_prefix_len(&self) -> Option<usize> {
        // Up to two prefix letters (r, b, u, f in any case) followed by a quote.
        for len in 0..=2 {
            let q = self.peek(len);
            if q == b'"' || q == b'\'' {
                let ok = (0..len).all(|i| matches!(self.peek(i).to_ascii_lowercase(), b'r' | b'b' | b'u' | b'f'));
                return ok.then_some(len);
            }
            if !matches!(self.peek(len).to_ascii_lowercase(), b'r' | b'b' | b'u' | b'f') {
                return None;
            }
        }
        None
    }

    fn run(mut self) -> Vec<Token<'a>> {
        while self.pos < self.bytes.len() {
            let c = self.bytes[self.pos];
            if c == b'\n' {
                self.pos += 1;
                self.line_start = self.pos;
                continue;
            }
            if c.is_ascii_whitespace() {
                self.pos += 1;
                continue;
            }
            let start = self.pos;
            match self.lang {
                Lang::Python => {
                    if c == b'#' {
                        self.skip_to_eol();
                        continue;
                    }
                    if let Some(plen) = self.python_string_prefix_len() {
                        let raw = (0..plen).any(|i| self.peek(i).eq_ignore_ascii_case(&b'r'));
                        self.pos += plen;
                        let q = self.bytes[self.pos] as char;
                        let triple: String = std::iter::repeat_n(q, 3).collect();
                        if self.starts_with(&triple) {
                            self.quoted(&triple, !raw);
                        } else {
                            self.quoted(&q.to_string(), !raw);
                        }
                        self.push(TokKind::Str, start);
                        continue;
                    }
                }
                Lang::Java | Lang::Cpp => {
                    if self.starts_with("//") {
                        self.skip_to_eol();
                        continue;
                    }
                    if self.starts_with("/*") {
                        self.skip_block_comment();
                        continue;
                    }
                    if self.lang == Lang::Cpp && c == b'#' && self.src[self.line_start..start].trim().is_empty() {
                        // Preprocessor directive, honouring line continuations.
                        loop {
                            self.skip_to_eol();
                            if self.pos > 0 && self.bytes[self.pos - 1] == b'\\' && self.pos < self.bytes.len() {
                                self.pos += 1;
                                self.line_start = self.pos;
                                continue;
                            }
                            break;
                        }
                        continue;
                    }
                    if self.lang == Lang::Cpp && self.cpp_raw_string() {
                        self.push(TokKind::Str, start);
                        continue;
                    }
                    if self.lang == Lang::Java && self.starts_with("\"\"\"") {
                        self.quoted("\"\"\"", true);
                        self.push(TokKind::Str, start);
                        continue;
                    }
                    if c == b'"' || c == b'\'' {
                        self.quoted(&(c as char).to_string(), true);
                        self.push(TokKind::Str, start);
                        continue;
                    }
                }
            }
            if c == b'_' || c.is_ascii_alphabetic() || c >= 0x80 {
                while self.pos < self.bytes.len() {
                    let b = self.bytes[self.pos];
                    if b == b'_' || b.is_ascii_alphanumeric() {
                        self.pos += 1;
                    } else if b >= 0x80 {
                        let ch = self.src[self.pos..].chars().next().unwrap();
                        if ch.is_alphanumeric() {
                            self.pos += ch.len_utf8();
                        } else {
                            break;
                        }
                    } else {
                        break;
                    }
                }
                if self.pos == start {
                    // Non-identifier Unicode char: emit as punctuation.
                    self.advance_char();
                    self.push(TokKind::Punct, start);
                } else {
                    self.push(TokKind::Ident, start);
                }
                continue;
            }
            if c.is_ascii_digit() || (c == b'.' && self.peek(1).is_ascii_digit()) {
                self.pos += 1;
                while self.pos < self.bytes.len() {
                    let b = self.bytes[self.pos];
                    let prev = self.bytes[self.pos - 1];
                    let digit_sep = b == b'\'' && self.lang == Lang::Cpp;
                    let exp_sign = (b == b'+' || b == b'-') && (prev == b'e' || prev == b'E');
                    if b.is_ascii_alphanumeric() || b == b'.' || b == b'_' || digit_sep || exp_sign {
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                self.push(TokKind::Number, start);
                continue;
            }
            let rest = &self.src[self.pos..];
            let op_len = PUNCT3.iter().chain(PUNCT2).find(|op| rest.starts_with(*op)).map(|op| op.len());
            match op_len {
                Some(n) => self.pos += n,
                None => self.advance_char(),
            }
            self.push(TokKind::Punct, start);
        }
        self.out
    }
}

/// Tokenizes `code` for `lang`, dropping comments.
pub fn lex(code: &str, lang: Lang) -> Vec<Token<'_>> {
    Lexer { src: code, bytes: code.as_bytes(), pos: 0, line_start: 0, lang, out: Vec::new() }.run()
}
