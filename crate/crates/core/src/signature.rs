//! Entry-function signature extraction.
//!
//! The scanner works on header tokens only: it finds the first top-level
//! function (Python `def` at column 0, the first Java `static` method, the
//! first C++ free function other than `main`) and maps its parameter types
//! onto [`TypeTag`]s.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Lang, Program};
use crate::lexer::{lex, TokKind, Token};

pub const MAX_LIST_DEPTH: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TypeTag {
    Int,
    Float,
    Bool,
    Str,
    List(Box<TypeTag>),
}

impl TypeTag {
    pub fn list(inner: TypeTag) -> Self {
        TypeTag::List(Box::new(inner))
    }

    pub fn depth(&self) -> usize {
        match self {
            TypeTag::List(inner) => 1 + inner.depth(),
            _ => 0,
        }
    }
}

impl fmt::Display for TypeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeTag::Int => f.write_str("int"),
            TypeTag::Float => f.write_str("float"),
            TypeTag::Bool => f.write_str("bool"),
            TypeTag::Str => f.write_str("str"),
            TypeTag::List(inner) => write!(f, "list[{inner}]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub tag: TypeTag,
    /// Normalized declared type in the program's own language (`int[]`,
    /// `List<Integer>`, `vector<long long>`, ...). Empty for Python.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub native: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    pub function_name: String,
    pub params: Vec<Param>,
    pub return_present: bool,
    /// Enclosing Java class when the method is not a bare top-level method.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub owner: Option<String>,
}

impl Signature {
    pub fn tags(&self) -> Vec<TypeTag> {
        self.params.iter().map(|p| p.tag.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SignatureError {
    #[error("no function found")]
    NoFunction,
    #[error("function `{0}` takes no parameters")]
    ZeroParams(String),
    #[error("unsupported parameter type `{0}`")]
    UnmappableType(String),
    #[error("missing type hint for {0}")]
    MissingTypeHint(String),
    #[error("malformed function header: {0}")]
    Malformed(String),
}

pub fn extract_signature(p: &Program) -> Result<Signature, SignatureError> {
    extract_from_code(&p.code, p.lang)
}

pub fn extract_from_code(code: &str, lang: Lang) -> Result<Signature, SignatureError> {
    let sig = match lang {
        Lang::Python => python_signature(code, None)?,
        Lang::Java => java_signature(code)?,
        Lang::Cpp => cpp_signature(code)?,
    };
    if sig.params.is_empty() {
        return Err(SignatureError::ZeroParams(sig.function_name));
    }
    Ok(sig)
}

/// Signature used to call a candidate translation. Python candidates may omit
/// type hints; missing hints are taken positionally from `reference`.
pub fn extract_call_signature(code: &str, lang: Lang, reference: &Signature) -> Result<Signature, SignatureError> {
    let sig = match lang {
        Lang::Python => python_signature(code, Some(reference))?,
        Lang::Java => java_signature(code)?,
        Lang::Cpp => cpp_signature(code)?,
    };
    if sig.params.len() != reference.params.len() {
        return Err(SignatureError::Malformed(format!(
            "`{}` takes {} parameters, expected {}",
            sig.function_name,
            sig.params.len(),
            reference.params.len()
        )));
    }
    Ok(sig)
}

// Splits `toks` on commas that are not nested in brackets.
fn split_top_level<'t, 'a>(toks: &'t [Token<'a>]) -> Vec<&'t [Token<'a>]> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, t) in toks.iter().enumerate() {
        if t.kind == TokKind::Str {
            continue;
        }
        match t.text {
            "(" | "[" | "{" | "<" => depth += 1,
            ")" | "]" | "}" | ">" => depth -= 1,
            ">>" => depth -= 2,
            "," if depth == 0 => {
                parts.push(&toks[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    if start < toks.len() {
        parts.push(&toks[start..]);
    }
    parts
}

fn matching_close(toks: &[Token], open_idx: usize) -> Option<usize> {
    let (open, close) = match toks[open_idx].text {
        "(" => ("(", ")"),
        "[" => ("[", "]"),
        "{" => ("{", "}"),
        _ => return None,
    };
    let mut depth = 0;
    for (i, t) in toks.iter().enumerate().skip(open_idx) {
        if t.kind == TokKind::Str {
            continue;
        }
        if t.text == open {
            depth += 1;
        } else if t.text == close {
            depth -= 1;
            if depth == 0 {
                return Some(i);
            }
        }
    }
    None
}

fn joined(toks: &[Token]) -> String {
    let mut s = String::new();
    for (i, t) in toks.iter().enumerate() {
        let word = |x: &Token| x.kind == TokKind::Ident || x.kind == TokKind::Number;
        if i > 0 && word(&toks[i - 1]) && word(t) {
            s.push(' ');
        }
        s.push_str(t.text);
    }
    s
}

fn check_depth(tag: TypeTag, text: &str) -> Result<TypeTag, SignatureError> {
    if tag.depth() > MAX_LIST_DEPTH {
        Err(SignatureError::UnmappableType(text.to_string()))
    } else {
        Ok(tag)
    }
}

// ---------------------------------------------------------------- python

fn python_type(toks: &[Token]) -> Result<TypeTag, SignatureError> {
    let text = joined(toks);
    let unmappable = || SignatureError::UnmappableType(text.clone());
    let mut toks = toks;
    if toks.len() > 2 && toks[0].is("typing") && toks[1].is(".") {
        toks = &toks[2..];
    }
    let head = toks.first().ok_or_else(unmappable)?;
    let tag = match head.text {
        "int" if toks.len() == 1 => TypeTag::Int,
        "float" if toks.len() == 1 => TypeTag::Float,
        "bool" if toks.len() == 1 => TypeTag::Bool,
        "str" if toks.len() == 1 => TypeTag::Str,
        "list" | "List" => {
            if toks.len() < 4 || !toks[1].is("[") || !toks[toks.len() - 1].is("]") {
                return Err(unmappable());
            }
            TypeTag::list(python_type(&toks[2..toks.len() - 1]).map_err(|_| unmappable())?)
        }
        _ => return Err(unmappable()),
    };
    check_depth(tag, &text)
}

fn python_signature(code: &str, reference: Option<&Signature>) -> Result<Signature, SignatureError> {
    let toks = lex(code, Lang::Python);
    let def_idx = toks.iter().position(|t| t.is("def") && t.col == 0).ok_or(SignatureError::NoFunction)?;
    let name = toks
        .get(def_idx + 1)
        .filter(|t| t.kind == TokKind::Ident)
        .ok_or_else(|| SignatureError::Malformed("expected function name after def".into()))?;
    let open = def_idx + 2;
    if !toks.get(open).is_some_and(|t| t.is("(")) {
        return Err(SignatureError::Malformed("expected `(`".into()));
    }
    let close =
        matching_close(&toks, open).ok_or_else(|| SignatureError::Malformed("unbalanced parameter list".into()))?;
    let mut params = Vec::new();
    for (i, part) in split_top_level(&toks[open + 1..close]).into_iter().enumerate() {
        let Some(first) = part.first() else { continue };
        if first.kind != TokKind::Ident {
            return Err(SignatureError::UnmappableType(joined(part)));
        }
        let pname = first.text.to_string();
        let annotation_end = part.iter().position(|t| t.is("=")).unwrap_or(part.len());
        let tag = if part.len() > 1 && part[1].is(":") {
            python_type(&part[2..annotation_end])?
        } else {
            match reference.and_then(|r| r.params.get(i)) {
                Some(p) => p.tag.clone(),
                None => return Err(SignatureError::MissingTypeHint(pname)),
            }
        };
        params.push(Param { name: pname, tag, native: String::new() });
    }
    let after = &toks[close + 1..];
    let return_present = match after.first() {
        Some(t) if t.is("->") => !after.get(1).is_some_and(|t| t.is("None")),
        // Without an annotation the function is assumed to return a value.
        _ => true,
    };
    Ok(Signature { function_name: name.text.to_string(), params, return_present, owner: None })
}

// ---------------------------------------------------------------- java

const JAVA_MODIFIERS: &[&str] =
    &["public", "private", "protected", "final", "synchronized", "native", "strictfp", "abstract"];

// Parses a Java/C++ type starting at `i`, returning (normalized text, next index).
// Generic arguments are parsed recursively; `>>` closes two levels.
struct TypeParser<'t, 'a> {
    toks: &'t [Token<'a>],
    pending_close: usize,
}

impl TypeParser<'_, '_> {
    fn expect_close(&mut self, i: &mut usize) -> bool {
        if self.pending_close > 0 {
            self.pending_close -= 1;
            return true;
        }
        match self.toks.get(*i).map(|t| t.text) {
            Some(">") => {
                *i += 1;
                true
            }
            Some(">>") => {
                *i += 1;
                self.pending_close = 1;
                true
            }
            Some(">>>") => {
                *i += 1;
                self.pending_close = 2;
                true
            }
            _ => false,
        }
    }

    /// Returns the raw base name (qualifiers dropped) and its generic arguments.
    fn parse(&mut self, i: &mut usize, lang: Lang) -> Option<(String, Vec<String>)> {
        let name = loop {
            let t = self.toks.get(*i)?;
            if t.kind != TokKind::Ident {
                return None;
            }
            if lang == Lang::Cpp && matches!(t.text, "const" | "volatile" | "typename") {
                *i += 1;
                continue;
            }
            // C++ multi-word builtins.
            if lang == Lang::Cpp && matches!(t.text, "long" | "unsigned" | "signed" | "short") {
                let mut words = vec![t.text];
                *i += 1;
                while let Some(n) = self.toks.get(*i) {
                    if matches!(n.text, "long" | "int" | "unsigned" | "signed" | "short" | "char" | "double") {
                        words.push(n.text);
                        *i += 1;
                    } else {
                        break;
                    }
                }
                break words.join(" ");
            }
            *i += 1;
            let sep = self.toks.get(*i).map(|t| t.text);
            if matches!(sep, Some(".") | Some("::")) && self.toks.get(*i + 1).is_some_and(|t| t.kind == TokKind::Ident)
            {
                *i += 1;
                continue;
            }
            break t.text.to_string();
        };
        let mut args = Vec::new();
        if self.pending_close == 0 && self.toks.get(*i).is_some_and(|t| t.is("<")) {
            *i += 1;
            loop {
                let (n, a) = self.parse(i, lang)?;
                let mut arg = render_type(&n, &a);
                if self.pending_close == 0 {
                    while self.toks.get(*i).is_some_and(|t| t.is("["))
                        && self.toks.get(*i + 1).is_some_and(|t| t.is("]"))
                    {
                        arg.push_str("[]");
                        *i += 2;
                    }
                }
                args.push(arg);
                if self.pending_close == 0 && self.toks.get(*i).is_some_and(|t| t.is(",")) {
                    *i += 1;
                    continue;
                }
                if !self.expect_close(i) {
                    return None;
                }
                break;
            }
        }
        Some((name, args))
    }
}

fn render_type(name: &str, args: &[String]) -> String {
    if args.is_empty() {
        name.to_string()
    } else {
        format!("{name}<{}>", args.join(", "))
    }
}

/// Maps a normalized Java type text onto a TypeTag.
pub fn java_tag(native: &str) -> Option<TypeTag> {
    if let Some(elem) = native.strip_suffix("[]") {
        return Some(TypeTag::list(java_tag(elem)?));
    }
    if let Some(inner) = generic_arg(native, &["List", "ArrayList", "LinkedList", "Collection"]) {
        return Some(TypeTag::list(java_tag(inner)?));
    }
    Some(match native {
        "int" | "long" | "short" | "byte" | "Integer" | "Long" | "Short" | "Byte" => TypeTag::Int,
        "double" | "float" | "Double" | "Float" => TypeTag::Float,
        "boolean" | "Boolean" => TypeTag::Bool,
        "String" => TypeTag::Str,
        _ => return None,
    })
}

/// Maps a normalized C++ type text onto a TypeTag.
pub fn cpp_tag(native: &str) -> Option<TypeTag> {
    if let Some(elem) = native.strip_suffix("[]") {
        return Some(TypeTag::list(cpp_tag(elem)?));
    }
    if let Some(inner) = generic_arg(native, &["vector"]) {
        return Some(TypeTag::list(cpp_tag(inner)?));
    }
    Some(match native {
        "int" | "long" | "long long" | "short" | "long int" | "long long int" | "unsigned" | "unsigned int"
        | "unsigned long" | "unsigned long long" | "size_t" | "int64_t" | "int32_t" => TypeTag::Int,
        "double" | "float" | "long double" => TypeTag::Float,
        "bool" => TypeTag::Bool,
        "string" => TypeTag::Str,
        _ => return None,
    })
}

fn generic_arg<'s>(native: &'s str, names: &[&str]) -> Option<&'s str> {
    let open = native.find('<')?;
    if !names.contains(&&native[..open]) || !native.ends_with('>') {
        return None;
    }
    Some(native[open + 1..native.len() - 1].trim())
}

fn java_param(part: &[Token]) -> Result<Param, SignatureError> {
    let text = joined(part);
    let unmappable = || SignatureError::UnmappableType(text.clone());
    let mut i = 0;
    while part.get(i).is_some_and(|t| t.is("final")) {
        i += 1;
    }
    while part.get(i).is_some_and(|t| t.is("@")) {
        i += 2;
    }
    let mut parser = TypeParser { toks: part, pending_close: 0 };
    let (name, args) = parser.parse(&mut i, Lang::Java).ok_or_else(unmappable)?;
    let mut native = normalize_java(&name, &args);
    loop {
        match part.get(i).map(|t| t.text) {
            Some("[") if part.get(i + 1).is_some_and(|t| t.is("]")) => {
                native.push_str("[]");
                i += 2;
            }
            Some("...") => {
                native.push_str("[]");
                i += 1;
            }
            _ => break,
        }
    }
    let pname = part.get(i).filter(|t| t.kind == TokKind::Ident).ok_or_else(unmappable)?;
    i += 1;
    // C-style `int a[]`.
    while part.get(i).is_some_and(|t| t.is("[")) && part.get(i + 1).is_some_and(|t| t.is("]")) {
        native.push_str("[]");
        i += 2;
    }
    if i != part.len() {
        return Err(unmappable());
    }
    let tag = java_tag(&native).ok_or_else(|| SignatureError::UnmappableType(native.clone()))?;
    Ok(Param { name: pname.text.to_string(), tag: check_depth(tag, &native)?, native })
}

fn normalize_java(name: &str, args: &[String]) -> String {
    match name {
        "ArrayList" | "LinkedList" | "Collection" | "List" if args.len() == 1 => format!("List<{}>", args[0]),
        _ => render_type(name, args),
    }
}

fn java_signature(code: &str) -> Result<Signature, SignatureError> {
    let toks = lex(code, Lang::Java);
    let mut depth = 0usize;
    // Brace depth at which each enclosing class body opened, with its name.
    let mut classes: Vec<(usize, String)> = Vec::new();
    let mut pending_class: Option<String> = None;
    let mut i = 0;
    while i < toks.len() {
        let t = &toks[i];
        if t.kind == TokKind::Str {
            i += 1;
            continue;
        }
        match t.text {
            "{" => {
                depth += 1;
                if let Some(name) = pending_class.take() {
                    classes.push((depth, name));
                }
            }
            "}" => {
                if classes.last().is_some_and(|(d, _)| *d == depth) {
                    classes.pop();
                }
                depth = depth.saturating_sub(1);
            }
            "class" | "interface" | "enum" | "record" => {
                if let Some(n) = toks.get(i + 1).filter(|n| n.kind == TokKind::Ident) {
                    pending_class = Some(n.text.to_string());
                }
            }
            "static" => {
                if let Some(sig) = java_method_at(&toks, i + 1)? {
                    let at_top = classes.last().map_or(depth == 0, |(d, _)| *d == depth);
                    if at_top {
                        let owner = classes.last().map(|(_, n)| n.clone());
                        return Ok(Signature { owner, ..sig });
                    }
                }
            }
            _ => {}
        }
        i += 1;
    }
    Err(SignatureError::NoFunction)
}

fn java_method_at(toks: &[Token], mut i: usize) -> Result<Option<Signature>, SignatureError> {
    while toks.get(i).is_some_and(|t| JAVA_MODIFIERS.contains(&t.text)) {
        i += 1;
    }
    // Generic method type parameters.
    if toks.get(i).is_some_and(|t| t.is("<")) {
        let mut depth = 0i32;
        while let Some(t) = toks.get(i) {
            match t.text {
                "<" => depth += 1,
                ">" => depth -= 1,
                ">>" => depth -= 2,
                _ => {}
            }
            i += 1;
            if depth <= 0 {
                break;
            }
        }
    }
    let mut parser = TypeParser { toks, pending_close: 0 };
    let Some((ret, _)) = parser.parse(&mut i, Lang::Java) else {
        return Ok(None);
    };
    while toks.get(i).is_some_and(|t| t.is("[")) && toks.get(i + 1).is_some_and(|t| t.is("]")) {
        i += 2;
    }
    let Some(name) = toks.get(i).filter(|t| t.kind == TokKind::Ident) else {
        return Ok(None);
    };
    if !toks.get(i + 1).is_some_and(|t| t.is("(")) || matches!(ret.as_str(), "class" | "new") {
        return Ok(None);
    }
    let close =
        matching_close(toks, i + 1).ok_or_else(|| SignatureError::Malformed("unbalanced parameter list".into()))?;
    let params = split_top_level(&toks[i + 2..close])
        .into_iter()
        .filter(|p| !p.is_empty())
        .map(java_param)
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Some(Signature { function_name: name.text.to_string(), params, return_present: ret != "void", owner: None }))
}

// ---------------------------------------------------------------- c++

const CPP_NOT_FUNCTIONS: &[&str] =
    &["if", "while", "for", "switch", "return", "sizeof", "catch", "decltype", "alignof", "static_assert"];

fn cpp_param(part: &[Token]) -> Result<Param, SignatureError> {
    let text = joined(part);
    let unmappable = || SignatureError::UnmappableType(text.clone());
    let mut i = 0;
    let mut parser = TypeParser { toks: part, pending_close: 0 };
    let (name, args) = parser.parse(&mut i, Lang::Cpp).ok_or_else(unmappable)?;
    let mut native = render_type(&name, &args);
    while part.get(i).is_some_and(|t| matches!(t.text, "&" | "&&" | "const")) {
        i += 1;
    }
    if part.get(i).is_some_and(|t| t.is("*")) {
        return Err(unmappable());
    }
    let pname = part.get(i).filter(|t| t.kind == TokKind::Ident).ok_or_else(unmappable)?;
    i += 1;
    if part.get(i).is_some_and(|t| t.is("[")) {
        let close = matching_close(part, i).ok_or_else(unmappable)?;
        if close != part.len() - 1 || !args.is_empty() {
            return Err(unmappable());
        }
        // C arrays are passed through a vector's data(); vector<bool> has none.
        if !matches!(name.as_str(), "int" | "long" | "long long" | "double" | "float") {
            return Err(unmappable());
        }
        native.push_str("[]");
        i = close + 1;
    }
    if part.get(i).is_some_and(|t| t.is("=")) {
        i = part.len();
    }
    if i != part.len() {
        return Err(unmappable());
    }
    let tag = cpp_tag(&native).ok_or_else(|| SignatureError::UnmappableType(native.clone()))?;
    Ok(Param { name: pname.text.to_string(), tag: check_depth(tag, &native)?, native })
}

fn cpp_signature(code: &str) -> Result<Signature, SignatureError> {
    let toks = lex(code, Lang::Cpp);
    let mut depth = 0usize;
    // Index of the first token of the current top-level declaration.
    let mut decl_start = 0usize;
    let mut i = 0;
    while i < toks.len() {
        let t = &toks[i];
        if t.kind == TokKind::Str {
            i += 1;
            continue;
        }
        match t.text {
            "{" => {
                depth += 1;
                i += 1;
                continue;
            }
            "}" => {
                depth = depth.saturating_sub(1);
                i += 1;
                if depth == 0 {
                    decl_start = i;
                }
                continue;
            }
            ";" if depth == 0 => {
                i += 1;
                decl_start = i;
                continue;
            }
            _ => {}
        }
        if depth == 0
            && t.kind == TokKind::Ident
            && !CPP_NOT_FUNCTIONS.contains(&t.text)
            && toks.get(i + 1).is_some_and(|n| n.is("("))
            && i > decl_start
        {
            if let Some(close) = matching_close(&toks, i + 1) {
                let mut j = close + 1;
                while toks.get(j).is_some_and(|n| matches!(n.text, "const" | "noexcept" | "override")) {
                    j += 1;
                }
                if toks.get(j).is_some_and(|n| n.is("{")) {
                    let ret_toks = &toks[decl_start..i];
                    let is_template = ret_toks.first().is_some_and(|t| t.is("template"));
                    if t.text != "main" && !is_template {
                        let params = split_top_level(&toks[i + 2..close])
                            .into_iter()
                            .filter(|p| !(p.is_empty() || p.len() == 1 && p[0].is("void")))
                            .map(cpp_param)
                            .collect::<Result<Vec<_>, _>>()?;
                        let return_present =
                            !(ret_toks.iter().any(|t| t.is("void")) && !ret_toks.iter().any(|t| t.is("*")));
                        return Ok(Signature {
                            function_name: t.text.to_string(),
                            params,
                            return_present,
                            owner: None,
                        });
                    }
                    // Skip the body of `main` or a template.
                    i = j;
                    continue;
                }
            }
        }
        i += 1;
    }
    Err(SignatureError::NoFunction)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(code: &str, lang: Lang) -> Result<Signature, SignatureError> {
        extract_from_code(code, lang)
    }

    fn tags(code: &str, lang: Lang) -> Vec<(String, TypeTag)> {
        sig(code, lang).unwrap().params.into_iter().map(|p| (p.name, p.tag)).collect()
    }

    #[test]
    fn python_hints() {
        let s = sig("def f(a: int, b: list[int]) -> int:\n    return a\n", Lang::Python).unwrap();
        assert_eq!(s.function_name, "f");
        assert_eq!(
            s.params.iter().map(|p| (p.name.as_str(), p.tag.clone())).collect::<Vec<_>>(),
            vec![("a", TypeTag::Int), ("b", TypeTag::list(TypeTag::Int))]
        );
        assert!(s.return_present);
    }

    #[test]
    fn python_missing_hint() {
        let err = sig("def f(a):\n    return a\n", Lang::Python).unwrap_err();
        assert_eq!(err.to_string(), "missing type hint for a");
    }

    #[test]
    fn python_typing_aliases_and_defaults() {
        let t = tags(
            "from typing import List\ndef g(x: List[List[str]], y: typing.List[float], z: bool = True) -> None:\n    pass",
            Lang::Python,
        );
        assert_eq!(t[0].1, TypeTag::list(TypeTag::list(TypeTag::Str)));
        assert_eq!(t[1].1, TypeTag::list(TypeTag::Float));
        assert_eq!(t[2].1, TypeTag::Bool);
        assert!(!sig("def g(a: int) -> None:\n  pass", Lang::Python).unwrap().return_present);
    }

    #[test]
    fn python_skips_nested_and_string_defs() {
        let code = "s = \"\"\"\ndef fake(q): pass\n\"\"\"\n# def other(z): pass\nclass A:\n    def m(self, x): pass\ndef real(n: int) -> int:\n    return n\n";
        assert_eq!(sig(code, Lang::Python).unwrap().function_name, "real");
    }

    #[test]
    fn python_unmappable_and_too_deep() {
        assert_eq!(
            sig("def f(a: dict) -> int:\n  return 1", Lang::Python).unwrap_err(),
            SignatureError::UnmappableType("dict".into())
        );
        assert!(matches!(
            sig("def f(a: list[list[list[list[int]]]]) -> int:\n  return 1", Lang::Python),
            Err(SignatureError::UnmappableType(_))
        ));
        assert_eq!(
            sig("def f() -> int:\n  return 1", Lang::Python).unwrap_err(),
            SignatureError::ZeroParams("f".into())
        );
        assert_eq!(sig("x = 1\n", Lang::Python).unwrap_err(), SignatureError::NoFunction);
    }

    #[test]
    fn python_call_signature_borrows_reference_hints() {
        let reference = sig("def f(a: int, b: list[int]) -> int:\n  return a", Lang::Python).unwrap();
        let cand = extract_call_signature("def g(x, y):\n    return x\n", Lang::Python, &reference).unwrap();
        assert_eq!(cand.function_name, "g");
        assert_eq!(cand.tags(), reference.tags());
        assert!(cand.return_present);
        assert!(extract_call_signature("def g(x):\n  return x", Lang::Python, &reference).is_err());
    }

    #[test]
    fn java_static_method() {
        let t = tags("static int gcd(int a, int b) { return b == 0 ? a : gcd(b, a % b); }", Lang::Java);
        assert_eq!(t, vec![("a".into(), TypeTag::Int), ("b".into(), TypeTag::Int)]);
    }

    #[test]
    fn java_arrays_lists_and_classes() {
        let code = "import java.util.*;\n// static void x(int q)\npublic class Sol {\n  int field = 0;\n  static final int K = 3;\n  public static boolean f(int arr[], final List<List<Integer>> g, String... s, long[][] m) { return true; }\n}";
        let s = sig(code, Lang::Java).unwrap();
        assert_eq!(s.function_name, "f");
        assert_eq!(s.owner.as_deref(), Some("Sol"));
        let natives: Vec<_> = s.params.iter().map(|p| p.native.as_str()).collect();
        assert_eq!(natives, vec!["int[]", "List<List<Integer>>", "String[]", "long[][]"]);
        assert_eq!(s.params[1].tag, TypeTag::list(TypeTag::list(TypeTag::Int)));
        assert_eq!(s.params[3].tag, TypeTag::list(TypeTag::list(TypeTag::Int)));
    }

    #[test]
    fn java_void_and_unmappable() {
        assert!(!sig("static void p(double x) { }", Lang::Java).unwrap().return_present);
        assert_eq!(
            sig("static int f(Map<String, Integer> m) { return 0; }", Lang::Java).unwrap_err(),
            SignatureError::UnmappableType("Map<String, Integer>".into())
        );
        assert_eq!(
            sig("static int f(char c) { return 0; }", Lang::Java).unwrap_err(),
            SignatureError::UnmappableType("char".into())
        );
    }

    #[test]
    fn cpp_free_function_skips_main_and_includes() {
        let code = "#include <vector>\nusing namespace std;\nstruct P { int f(int z) { return z; } };\nint main() { return 0; }\nlong long total(const vector<long long>& xs, int arr[], std::string s, bool b) {\n  return 0;\n}\n";
        let s = sig(code, Lang::Cpp).unwrap();
        assert_eq!(s.function_name, "total");
        let natives: Vec<_> = s.params.iter().map(|p| p.native.as_str()).collect();
        assert_eq!(natives, vec!["vector<long long>", "int[]", "string", "bool"]);
        assert_eq!(s.params[0].tag, TypeTag::list(TypeTag::Int));
        assert_eq!(s.params[1].tag, TypeTag::list(TypeTag::Int));
        assert_eq!(s.params[2].tag, TypeTag::Str);
    }

    #[test]
    fn cpp_nested_vectors_and_void() {
        let s = sig("void g(vector<vector<double>> m) {}\n", Lang::Cpp).unwrap();
        assert!(!s.return_present);
        assert_eq!(s.params[0].tag, TypeTag::list(TypeTag::list(TypeTag::Float)));
        assert_eq!(s.params[0].native, "vector<vector<double>>");
        assert!(matches!(sig("int f(int* p) { return 0; }", Lang::Cpp), Err(SignatureError::UnmappableType(_))));
        assert_eq!(sig("int main() { return 0; }", Lang::Cpp).unwrap_err(), SignatureError::NoFunction);
    }

    #[test]
    fn extraction_is_idempotent() {
        let code = "def f(a: int) -> int:\n    return a\n";
        assert_eq!(sig(code, Lang::Python), sig(code, Lang::Python));
    }
}
