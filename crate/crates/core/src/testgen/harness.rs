//! Harness programs: the program text verbatim, followed by a call to its
//! entry function with literal arguments and a canonical print of the result.
//!
//! Templates live in `templates/`; placeholders are `{{CODE}}`,
//! `{{PRINT_STMT}}` and (Java) `{{HELPERS}}`. The print statement is built
//! from the function name and the `CALL_ARGS` literal list.

use thiserror::Error;

use super::{TestInput, Value};
use crate::corpus::{Lang, Program};
use crate::lexer::{lex, TokKind};
use crate::signature::{Param, Signature};

const PYTHON_TEMPLATE: &str = include_str!("../../templates/python.tmpl");
const JAVA_BARE_TEMPLATE: &str = include_str!("../../templates/java_bare.tmpl");
const JAVA_CLASS_TEMPLATE: &str = include_str!("../../templates/java_class.tmpl");
const JAVA_HELPERS: &str = include_str!("../../templates/java_helpers.tmpl");
const CPP_TEMPLATE: &str = include_str!("../../templates/cpp.tmpl");

/// Name of the class holding the Java harness `main`.
pub const JAVA_MAIN_CLASS: &str = "TxMain";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HarnessError {
    #[error("case index {index} out of range ({len} inputs)")]
    CaseIndex { index: usize, len: usize },
    #[error("input has {got} arguments, function takes {expected}")]
    Arity { expected: usize, got: usize },
    #[error("cannot render {value} as a literal of `{native}`")]
    Literal { value: String, native: String },
}

/// A harness ready to be written to disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HarnessSource {
    pub text: String,
    /// File name the toolchain expects (Java ties it to the public class).
    pub file_name: String,
    pub main_class: Option<String>,
}

// Single-pass placeholder substitution so that inserted text is never rescanned.
fn fill(template: &str, slots: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    while let Some(open) = rest.find("{{") {
        out.push_str(&rest[..open]);
        let after = &rest[open + 2..];
        let hit = after.find("}}").and_then(|close| {
            let key = &after[..close];
            slots.iter().find(|(k, _)| *k == key).map(|(_, v)| (close, *v))
        });
        match hit {
            Some((close, value)) => {
                out.push_str(value);
                rest = &after[close + 2..];
            }
            None => {
                out.push_str("{{");
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

// ------------------------------------------------------------- literals

fn python_str(s: &str) -> String {
    let mut out = String::from("\"");
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 || c as u32 == 0x7f => out.push_str(&format!("\\x{:02x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn java_str(s: &str) -> String {
    let mut out = String::from("\"");
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if c.is_ascii() && !c.is_ascii_control() => out.push(c),
            c => {
                let mut buf = [0u16; 2];
                for unit in c.encode_utf16(&mut buf) {
                    out.push_str(&format!("\\u{unit:04x}"));
                }
            }
        }
    }
    out.push('"');
    out
}

fn cpp_str(s: &str) -> String {
    let mut out = String::from("\"");
    for b in s.bytes() {
        match b {
            b'\\' => out.push_str("\\\\"),
            b'"' => out.push_str("\\\""),
            b'\n' => out.push_str("\\n"),
            b'\t' => out.push_str("\\t"),
            b'\r' => out.push_str("\\r"),
            // Octal escapes have a fixed width, unlike `\x`.
            b if b < 0x20 || b == 0x7f || b >= 0x80 => out.push_str(&format!("\\{b:03o}")),
            b => out.push(b as char),
        }
    }
    out.push('"');
    out
}

fn float_text(x: f64) -> String {
    // Shortest round-trip form; always carries a `.` or an exponent.
    format!("{x:?}")
}

fn python_literal(v: &Value) -> String {
    match v {
        Value::Bool(b) => if *b { "True" } else { "False" }.into(),
        Value::Int(i) => i.to_string(),
        Value::Float(x) => float_text(*x),
        Value::Str(s) => python_str(s),
        Value::List(xs) => {
            let items: Vec<String> = xs.iter().map(python_literal).collect();
            format!("[{}]", items.join(", "))
        }
    }
}

fn java_generic_arg(native: &str) -> Option<&str> {
    native.strip_prefix("List<")?.strip_suffix('>')
}

fn java_boxed(native: &str) -> String {
    match native {
        "int" => "Integer".into(),
        "long" => "Long".into(),
        "short" => "Short".into(),
        "byte" => "Byte".into(),
        "double" => "Double".into(),
        "float" => "Float".into(),
        "boolean" => "Boolean".into(),
        other => java_qualified(other),
    }
}

/// Qualifies `List<...>` so the harness does not depend on the program's imports.
fn java_qualified(native: &str) -> String {
    match java_generic_arg(native) {
        Some(inner) => format!("java.util.List<{}>", java_qualified(inner)),
        None => match native.strip_suffix("[]") {
            Some(elem) => format!("{}[]", java_qualified(elem)),
            None => native.to_string(),
        },
    }
}

fn java_literal(v: &Value, native: &str) -> Result<String, HarnessError> {
    let err = || HarnessError::Literal { value: v.canonical(), native: native.to_string() };
    if let Some(elem) = native.strip_suffix("[]") {
        let Value::List(xs) = v else { return Err(err()) };
        let items = xs.iter().map(|x| java_literal(x, elem)).collect::<Result<Vec<_>, _>>()?;
        return Ok(format!("new {}[]{{{}}}", java_qualified(elem), items.join(", ")));
    }
    if let Some(elem) = java_generic_arg(native) {
        let Value::List(xs) = v else { return Err(err()) };
        let items = xs.iter().map(|x| java_literal(x, elem)).collect::<Result<Vec<_>, _>>()?;
        let boxed = java_boxed(elem);
        return Ok(format!("new java.util.ArrayList<{boxed}>(java.util.Arrays.<{boxed}>asList({}))", items.join(", ")));
    }
    Ok(match (v, native) {
        (Value::Int(i), "int" | "Integer") => i.to_string(),
        (Value::Int(i), "long" | "Long") => format!("{i}L"),
        (Value::Int(i), "short" | "Short") => format!("(short) {i}"),
        (Value::Int(i), "byte" | "Byte") => format!("(byte) {i}"),
        (Value::Int(i), "double" | "Double") => format!("{i}.0"),
        (Value::Int(i), "float" | "Float") => format!("{i}.0f"),
        (Value::Float(x), "double" | "Double") => float_text(*x),
        (Value::Float(x), "float" | "Float") => format!("{}f", float_text(*x)),
        (Value::Bool(b), "boolean" | "Boolean") => b.to_string(),
        (Value::Str(s), "String") => java_str(s),
        _ => return Err(err()),
    })
}

fn cpp_literal(v: &Value, native: &str) -> Result<String, HarnessError> {
    let err = || HarnessError::Literal { value: v.canonical(), native: native.to_string() };
    let elem = native.strip_suffix("[]").or_else(|| native.strip_prefix("vector<").and_then(|s| s.strip_suffix('>')));
    if let Some(elem) = elem {
        let Value::List(xs) = v else { return Err(err()) };
        let items = xs.iter().map(|x| cpp_literal(x, elem.trim())).collect::<Result<Vec<_>, _>>()?;
        return Ok(format!("{{{}}}", items.join(", ")));
    }
    Ok(match (v, native) {
        (Value::Int(i), "long long" | "long long int" | "int64_t") => format!("{i}LL"),
        (Value::Int(i), "long" | "long int") => format!("{i}L"),
        (Value::Int(i), n) if crate::signature::cpp_tag(n) == Some(crate::signature::TypeTag::Int) => i.to_string(),
        (Value::Int(i), "double" | "float" | "long double") => format!("{i}.0"),
        (Value::Float(x), "double" | "float" | "long double") => float_text(*x),
        (Value::Bool(b), "bool") => b.to_string(),
        (Value::Str(s), "string") => cpp_str(s),
        _ => return Err(err()),
    })
}

/// Renders one argument value as a literal of `param`'s type in `lang`.
pub fn literal(v: &Value, lang: Lang, param: &Param) -> Result<String, HarnessError> {
    match lang {
        Lang::Python => Ok(python_literal(v)),
        Lang::Java => java_literal(v, &param.native),
        Lang::Cpp => cpp_literal(v, &param.native),
    }
}

// ------------------------------------------------------------- call blocks

fn call_block(lang: Lang, sig: &Signature, input: &TestInput, indent: &str) -> Result<String, HarnessError> {
    if input.args.len() != sig.params.len() {
        return Err(HarnessError::Arity { expected: sig.params.len(), got: input.args.len() });
    }
    let mut decls = Vec::new();
    let mut call_args = Vec::new();
    for (i, (v, p)) in input.args.iter().zip(&sig.params).enumerate() {
        let lit = literal(v, lang, p)?;
        match lang {
            Lang::Python => call_args.push(lit),
            Lang::Java => {
                let name = format!("txA{i}");
                decls.push(format!("{} {name} = {lit};", java_qualified(&p.native)));
                call_args.push(name);
            }
            Lang::Cpp => {
                let name = format!("tx_a{i}");
                match p.native.strip_suffix("[]") {
                    Some(elem) => {
                        decls.push(format!("std::vector<{elem}> {name} = {lit};"));
                        call_args.push(format!("{name}.data()"));
                    }
                    None => {
                        decls.push(format!("{} {name} = {lit};", p.native));
                        call_args.push(name);
                    }
                }
            }
        }
    }
    let callee = match (lang, &sig.owner) {
        (Lang::Java, Some(owner)) => format!("{owner}.{}", sig.function_name),
        _ => sig.function_name.clone(),
    };
    let call = format!("{callee}({})", call_args.join(", "));
    let stmt = match (lang, sig.return_present) {
        (Lang::Python, true) => format!("print(_tx_canon({call}))"),
        (Lang::Python, false) => call,
        (Lang::Java, true) => format!("System.out.print(txCanon({call}) + \"\\n\");"),
        (Lang::Java, false) => format!("{call};"),
        (Lang::Cpp, true) => format!("std::cout << tx_canon({call}) << \"\\n\";"),
        (Lang::Cpp, false) => format!("{call};"),
    };
    let mut lines = decls;
    lines.push(stmt);
    Ok(lines.iter().map(|l| format!("{indent}{l}")).collect::<Vec<_>>().join("\n"))
}

/// Top-level Java class declared by the code, if any: (name, is_public).
fn java_top_class(code: &str) -> Option<(String, bool)> {
    let toks = lex(code, Lang::Java);
    let mut depth = 0usize;
    let mut first: Option<(String, bool)> = None;
    for (i, t) in toks.iter().enumerate() {
        if t.kind == TokKind::Str {
            continue;
        }
        match t.text {
            "{" => depth += 1,
            "}" => depth = depth.saturating_sub(1),
            "class" | "interface" | "enum" | "record" if depth == 0 => {
                let Some(name) = toks.get(i + 1).filter(|n| n.kind == TokKind::Ident) else {
                    continue;
                };
                let is_public =
                    toks[..i].iter().rev().take_while(|p| !matches!(p.text, ";" | "}" | "{")).any(|p| p.is("public"));
                if is_public {
                    return Some((name.text.to_string(), true));
                }
                first.get_or_insert((name.text.to_string(), false));
            }
            _ => {}
        }
    }
    first
}

fn assemble(code: &str, lang: Lang, print_stmt: &str) -> HarnessSource {
    match lang {
        Lang::Python => HarnessSource {
            text: fill(PYTHON_TEMPLATE, &[("CODE", code), ("PRINT_STMT", print_stmt)]),
            file_name: "main.py".into(),
            main_class: None,
        },
        Lang::Cpp => HarnessSource {
            text: fill(CPP_TEMPLATE, &[("CODE", code), ("PRINT_STMT", print_stmt)]),
            file_name: "main.cpp".into(),
            main_class: None,
        },
        Lang::Java => {
            let slots = [("CODE", code), ("PRINT_STMT", print_stmt), ("HELPERS", JAVA_HELPERS)];
            let (text, file_name) = match java_top_class(code) {
                Some((name, true)) => (fill(JAVA_CLASS_TEMPLATE, &slots), format!("{name}.java")),
                Some((_, false)) => (fill(JAVA_CLASS_TEMPLATE, &slots), format!("{JAVA_MAIN_CLASS}.java")),
                None => (fill(JAVA_BARE_TEMPLATE, &slots), format!("{JAVA_MAIN_CLASS}.java")),
            };
            HarnessSource { text, file_name, main_class: Some(JAVA_MAIN_CLASS.to_string()) }
        }
    }
}

const PY_INDENT: &str = "    ";
const JAVA_INDENT: &str = "        ";
const CPP_INDENT: &str = "    ";

fn indent_for(lang: Lang) -> &'static str {
    match lang {
        Lang::Python => PY_INDENT,
        Lang::Java => JAVA_INDENT,
        Lang::Cpp => CPP_INDENT,
    }
}

/// Harness running exactly one test case.
pub fn emit_harness(
    p: &Program,
    sig: &Signature,
    inputs: &[TestInput],
    case_index: usize,
) -> Result<String, HarnessError> {
    let input = inputs.get(case_index).ok_or(HarnessError::CaseIndex { index: case_index, len: inputs.len() })?;
    let body = call_block(p.lang, sig, input, indent_for(p.lang))?;
    let print_stmt = match p.lang {
        Lang::Python => body,
        Lang::Java | Lang::Cpp => {
            let ind = indent_for(p.lang);
            format!("{ind}{{\n{}\n{ind}}}", indent_lines(&body, "    "))
        }
    };
    Ok(assemble(&p.code, p.lang, &print_stmt).text)
}

fn indent_lines(text: &str, extra: &str) -> String {
    text.lines().map(|l| format!("{extra}{l}")).collect::<Vec<_>>().join("\n")
}

/// Harness holding every case; the case index is the first command-line
/// argument, so each process still runs exactly one case.
pub fn emit_multi_harness(
    code: &str,
    lang: Lang,
    sig: &Signature,
    inputs: &[TestInput],
) -> Result<HarnessSource, HarnessError> {
    let ind = indent_for(lang);
    let mut out = String::new();
    match lang {
        Lang::Python => {
            out.push_str(&format!("{ind}_tx_case = int(_tx_sys.argv[1])\n"));
            for (i, input) in inputs.iter().enumerate() {
                let kw = if i == 0 { "if" } else { "elif" };
                out.push_str(&format!("{ind}{kw} _tx_case == {i}:\n"));
                out.push_str(&call_block(lang, sig, input, &format!("{ind}    "))?);
                out.push('\n');
            }
            if inputs.is_empty() {
                out.push_str(&format!("{ind}pass\n"));
            } else {
                out.push_str(&format!("{ind}else:\n{ind}    _tx_sys.exit(64)\n"));
            }
        }
        Lang::Java | Lang::Cpp => {
            let parse = if lang == Lang::Java {
                "int txCase = args.length > 0 ? Integer.parseInt(args[0]) : -1;"
            } else {
                "int tx_case = argc > 1 ? std::atoi(argv[1]) : -1;"
            };
            let var = if lang == Lang::Java { "txCase" } else { "tx_case" };
            let exit = if lang == Lang::Java { "System.exit(64);" } else { "return 64;" };
            out.push_str(&format!("{ind}{parse}\n{ind}switch ({var}) {{\n"));
            for (i, input) in inputs.iter().enumerate() {
                out.push_str(&format!("{ind}case {i}: {{\n"));
                out.push_str(&call_block(lang, sig, input, &format!("{ind}    "))?);
                out.push_str(&format!("\n{ind}    break;\n{ind}}}\n"));
            }
            out.push_str(&format!("{ind}default:\n{ind}    {exit}\n{ind}}}\n"));
        }
    }
    Ok(assemble(code, lang, out.trim_end_matches('\n')))
}

/// Harness with an empty entry point, used for compile-only checks.
pub fn emit_shell(code: &str, lang: Lang) -> HarnessSource {
    let stmt = match lang {
        Lang::Python => "    pass",
        Lang::Java | Lang::Cpp => "",
    };
    assemble(code, lang, stmt)
}
