//! Language-neutral code tokenizer shared by the TF-IDF embedder and BLEU.
//!
//! Tokens are identifiers/keywords, numbers and operators, lowercased.
//! Whitespace separates tokens and is never emitted.

const OPS: &[&str] = &[
    "<<=", ">>=", "**=", "//=", "...", ">>>", "->", "::", "==", "!=", "<=", ">=", "&&", "||", "++", "--", "+=", "-=",
    "*=", "/=", "%=", "&=", "|=", "^=", "<<", ">>", "**", "//",
];

pub fn code_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some(&(start, c)) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
            continue;
        }
        if c == '_' || c.is_alphabetic() {
            let mut end = start;
            while let Some(&(i, ch)) = chars.peek() {
                if ch == '_' || ch.is_alphanumeric() {
                    end = i + ch.len_utf8();
                    chars.next();
                } else {
                    break;
                }
            }
            out.push(text[start..end].to_lowercase());
            continue;
        }
        if c.is_ascii_digit() {
            let mut end = start;
            let mut prev = c;
            while let Some(&(i, ch)) = chars.peek() {
                let exp_sign = (ch == '+' || ch == '-') && (prev == 'e' || prev == 'E');
                if ch.is_ascii_alphanumeric() || ch == '.' || ch == '_' || exp_sign {
                    end = i + ch.len_utf8();
                    prev = ch;
                    chars.next();
                } else {
                    break;
                }
            }
            out.push(text[start..end].to_lowercase());
            continue;
        }
        let rest = &text[start..];
        let len = OPS.iter().find(|op| rest.starts_with(*op)).map(|op| op.len()).unwrap_or(c.len_utf8());
        out.push(rest[..len].to_string());
        while let Some(&(i, _)) = chars.peek() {
            if i < start + len {
                chars.next();
            } else {
                break;
            }
        }
    }
    out
}
