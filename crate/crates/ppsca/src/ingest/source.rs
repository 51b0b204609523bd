//! Heuristic brace-matching extractor for C-like sources.
//!
//! The extractor does not parse C++; it recognizes `ret-type name(args) {...}`
//! definition heads while tracking namespace/class scope, which is enough for
//! stable, deterministic dissection. Preprocessor directives are treated as
//! opaque text (all conditional branches are scanned as code).

use std::collections::BTreeSet;

use super::{metrics, FunctionId, IngestError, SourceFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Class {
    Code,
    Comment,
    Str,
    Chr,
    Preproc,
}

/// Classify every byte of the input as code, comment, string/char literal, or
/// preprocessor directive.
pub(crate) fn classify(text: &str) -> Vec<Class> {
    let b = text.as_bytes();
    let mut cls = vec![Class::Code; b.len()];
    let mut i = 0;
    let mut line_has_code = false;
    while i < b.len() {
        let c = b[i];
        match c {
            b'\n' => {
                line_has_code = false;
                i += 1;
            }
            b'/' if i + 1 < b.len() && b[i + 1] == b'/' => {
                while i < b.len() && b[i] != b'\n' {
                    cls[i] = Class::Comment;
                    i += 1;
                }
            }
            b'/' if i + 1 < b.len() && b[i + 1] == b'*' => {
                cls[i] = Class::Comment;
                cls[i + 1] = Class::Comment;
                i += 2;
                while i < b.len() {
                    if b[i] == b'*' && i + 1 < b.len() && b[i + 1] == b'/' {
                        cls[i] = Class::Comment;
                        cls[i + 1] = Class::Comment;
                        i += 2;
                        break;
                    }
                    cls[i] = Class::Comment;
                    i += 1;
                }
            }
            b'"' => {
                cls[i] = Class::Str;
                i += 1;
                while i < b.len() {
                    cls[i] = Class::Str;
                    if b[i] == b'\\' && i + 1 < b.len() {
                        cls[i + 1] = Class::Str;
                        i += 2;
                        continue;
                    }
                    i += 1;
                    if b[i - 1] == b'"' {
                        break;
                    }
                }
                line_has_code = true;
            }
            b'\'' => {
                cls[i] = Class::Chr;
                i += 1;
                while i < b.len() {
                    cls[i] = Class::Chr;
                    if b[i] == b'\\' && i + 1 < b.len() {
                        cls[i + 1] = Class::Chr;
                        i += 2;
                        continue;
                    }
                    i += 1;
                    if b[i - 1] == b'\'' {
                        break;
                    }
                }
                line_has_code = true;
            }
            b'#' if !line_has_code => {
                // directive, honoring backslash continuations
                loop {
                    while i < b.len() && b[i] != b'\n' {
                        cls[i] = Class::Preproc;
                        i += 1;
                    }
                    if i >= b.len() || b[i - 1] != b'\\' {
                        break;
                    }
                    i += 1; // continue past the newline
                }
            }
            _ => {
                if !c.is_ascii_whitespace() {
                    line_has_code = true;
                }
                i += 1;
            }
        }
    }
    cls
}

/// Strip comments and collapse whitespace runs to single spaces.
pub fn normalize_body(body: &str) -> String {
    let cls = classify(body);
    let mut out = String::with_capacity(body.len());
    let mut pending_space = false;
    for (i, ch) in body.char_indices() {
        if cls[i] == Class::Comment {
            pending_space = true;
            continue;
        }
        if ch.is_ascii_whitespace() {
            pending_space = true;
            continue;
        }
        if pending_space && !out.is_empty() {
            out.push(' ');
        }
        pending_space = false;
        out.push(ch);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Sym(char),
    DColon,
}

fn lex_head(head: &str) -> Vec<Tok> {
    let mut toks = Vec::new();
    let mut chars = head.chars().peekable();
    let mut word = String::new();
    while let Some(c) = chars.next() {
        if c.is_ascii_alphanumeric() || c == '_' {
            word.push(c);
            continue;
        }
        if !word.is_empty() {
            toks.push(Tok::Ident(std::mem::take(&mut word)));
        }
        if c == ':' && chars.peek() == Some(&':') {
            chars.next();
            toks.push(Tok::DColon);
        } else if !c.is_ascii_whitespace() {
            toks.push(Tok::Sym(c));
        }
    }
    if !word.is_empty() {
        toks.push(Tok::Ident(word));
    }
    toks
}

/// Drop a leading `template <...>` section.
fn strip_template(toks: &[Tok]) -> &[Tok] {
    if toks.first() != Some(&Tok::Ident("template".into())) {
        return toks;
    }
    let mut depth = 0usize;
    for (i, t) in toks.iter().enumerate().skip(1) {
        match t {
            Tok::Sym('<') => depth += 1,
            Tok::Sym('>') => {
                depth = depth.saturating_sub(1);
                if depth == 0 {
                    return &toks[i + 1..];
                }
            }
            _ => {}
        }
    }
    toks
}

#[derive(Debug)]
enum HeadKind {
    Namespace(String),
    Class(String),
    Function { name: String, qualifier: Vec<String> },
    Other,
}

fn classify_head(head: &str) -> HeadKind {
    let toks = lex_head(head);
    let toks = strip_template(&toks);
    let first_ident = toks.iter().find_map(|t| match t {
        Tok::Ident(s) => Some(s.as_str()),
        _ => None,
    });

    match first_ident {
        Some("namespace") => {
            // `namespace foo {`; anonymous namespaces add no scope
            if let Some(Tok::Ident(name)) = toks.get(1) {
                return HeadKind::Namespace(name.clone());
            }
            return HeadKind::Other;
        }
        Some("class") | Some("struct") | Some("union")
            if matches!(toks.first(), Some(Tok::Ident(k))
                if k == "class" || k == "struct" || k == "union")
                && !toks.contains(&Tok::Sym('('))
                && !toks.contains(&Tok::Sym('=')) =>
        {
            // name: last identifier before a base clause, else last overall
            let mut name = None;
            for t in toks.iter().skip(1) {
                match t {
                    Tok::Ident(s) if s != "final" => name = Some(s.clone()),
                    Tok::Sym(':') => break,
                    _ => {}
                }
            }
            return match name {
                Some(n) => HeadKind::Class(n),
                None => HeadKind::Other, // e.g. `typedef struct {`
            };
        }
        Some("enum") | Some("using") | Some("typedef") | Some("return") => return HeadKind::Other,
        _ => {}
    }

    // function definition: identifier chain directly before the first
    // top-level paren group, no '=' before it
    let mut open = None;
    for (i, t) in toks.iter().enumerate() {
        match t {
            Tok::Sym('=') => return HeadKind::Other,
            Tok::Sym('(') => {
                open = Some(i);
                break;
            }
            _ => {}
        }
    }
    let Some(open) = open else {
        return HeadKind::Other;
    };
    if open == 0 {
        return HeadKind::Other;
    }
    let Tok::Ident(name) = &toks[open - 1] else {
        return HeadKind::Other; // e.g. operator overloads, lambdas
    };
    let mut name = name.clone();
    // walk back over `Qual::` prefixes
    let mut qualifier = Vec::new();
    let mut i = open - 1;
    while i >= 2 && toks[i - 1] == Tok::DColon {
        if let Tok::Ident(q) = &toks[i - 2] {
            qualifier.push(q.clone());
            i -= 2;
        } else {
            break;
        }
    }
    qualifier.reverse();
    if i >= 1 && toks[i - 1] == Tok::Sym('~') {
        name = format!("~{name}");
    }
    HeadKind::Function { name, qualifier }
}

const CALLEE_EXCLUDED: &[&str] = &[
    "if", "else", "for", "while", "do", "switch", "case", "default", "return", "sizeof",
    "alignof", "goto", "break", "continue", "new", "delete", "throw", "catch", "try",
    "static_cast", "dynamic_cast", "reinterpret_cast", "const_cast", "static_assert", "int",
    "char", "long", "short", "float", "double", "void", "bool", "unsigned", "signed", "const",
    "static", "struct", "class", "enum", "union", "auto", "using", "namespace", "template",
    "typename", "operator", "inline", "virtual", "extern", "register", "volatile", "mutable",
    "friend", "public", "private", "protected", "true", "false", "nullptr", "defined",
];

/// Scan the inner body for `name(...)` call expressions.
fn collect_callees(inner: &str) -> BTreeSet<FunctionId> {
    let cls = classify(inner);
    let mut toks: Vec<Tok> = Vec::new();
    {
        let mut word = String::new();
        let mut prev_colon = false;
        for (i, ch) in inner.char_indices() {
            if cls[i] != Class::Code {
                if !word.is_empty() {
                    toks.push(Tok::Ident(std::mem::take(&mut word)));
                }
                prev_colon = false;
                continue;
            }
            if ch.is_ascii_alphanumeric() || ch == '_' {
                word.push(ch);
                prev_colon = false;
                continue;
            }
            if !word.is_empty() {
                toks.push(Tok::Ident(std::mem::take(&mut word)));
            }
            if ch == ':' {
                if prev_colon {
                    toks.pop();
                    toks.push(Tok::DColon);
                    prev_colon = false;
                } else {
                    toks.push(Tok::Sym(':'));
                    prev_colon = true;
                }
            } else {
                if !ch.is_ascii_whitespace() {
                    toks.push(Tok::Sym(ch));
                }
                prev_colon = false;
            }
        }
        if !word.is_empty() {
            toks.push(Tok::Ident(word));
        }
    }

    let mut callees = BTreeSet::new();
    for (i, t) in toks.iter().enumerate() {
        if *t != Tok::Sym('(') || i == 0 {
            continue;
        }
        let Tok::Ident(name) = &toks[i - 1] else {
            continue;
        };
        if CALLEE_EXCLUDED.contains(&name.as_str()) || name.chars().next().is_some_and(|c| c.is_ascii_digit()) {
            continue;
        }
        let mut scope = Vec::new();
        let mut j = i - 1;
        while j >= 2 && toks[j - 1] == Tok::DColon {
            if let Tok::Ident(q) = &toks[j - 2] {
                scope.push(q.clone());
                j -= 2;
            } else {
                break;
            }
        }
        scope.reverse();
        callees.insert(FunctionId {
            name: name.clone(),
            scope,
        });
    }
    callees
}

fn count_nonblank_lines(s: &str) -> u32 {
    s.lines().filter(|l| !l.trim().is_empty()).count() as u32
}

#[derive(Debug)]
enum Block {
    Namespace(String),
    Class(String),
    Function {
        id: FunctionId,
        head_start: usize,
        body_open: usize,
    },
    Other,
}

/// Extract all function definitions of one file. Fails (and the caller skips
/// the file) when braces do not balance at file level.
pub fn extract_source_functions(
    text: &str,
    file_path: &str,
) -> Result<Vec<SourceFunction>, IngestError> {
    let cls = classify(text);
    let bytes = text.as_bytes();
    let mut stack: Vec<Block> = Vec::new();
    let mut head = String::new();
    let mut head_start: Option<usize> = None;
    let mut functions = Vec::new();

    let unbalanced = |detail: &str| IngestError::UnbalancedBraces {
        file: file_path.to_string(),
        detail: detail.to_string(),
    };

    let mut i = 0;
    while i < bytes.len() {
        if cls[i] != Class::Code {
            // literals keep the head "non-empty" but contribute no structure
            if (cls[i] == Class::Str || cls[i] == Class::Chr) && head_start.is_none() {
                head_start = Some(i);
            }
            if cls[i] == Class::Str || cls[i] == Class::Chr {
                head.push(' ');
            }
            i += 1;
            continue;
        }
        let c = bytes[i] as char;
        match c {
            '{' => {
                let in_function = stack
                    .iter()
                    .any(|b| matches!(b, Block::Function { .. }));
                if in_function {
                    stack.push(Block::Other);
                } else {
                    let scope: Vec<String> = stack
                        .iter()
                        .filter_map(|b| match b {
                            Block::Namespace(n) | Block::Class(n) => Some(n.clone()),
                            _ => None,
                        })
                        .collect();
                    let block = match classify_head(&head) {
                        HeadKind::Namespace(n) => Block::Namespace(n),
                        HeadKind::Class(n) => Block::Class(n),
                        HeadKind::Function { name, qualifier } => {
                            let mut full_scope = scope;
                            full_scope.extend(qualifier);
                            Block::Function {
                                id: FunctionId {
                                    name,
                                    scope: full_scope,
                                },
                                head_start: head_start.unwrap_or(i),
                                body_open: i,
                            }
                        }
                        HeadKind::Other => Block::Other,
                    };
                    stack.push(block);
                }
                head.clear();
                head_start = None;
            }
            '}' => {
                let Some(block) = stack.pop() else {
                    return Err(unbalanced("closing brace at file level"));
                };
                if let Block::Function {
                    id,
                    head_start: hs,
                    body_open,
                } = block
                {
                    let body = &text[hs..=i];
                    let inner = &text[body_open + 1..i];
                    let (cyclomatic, halstead_volume) = metrics::compute_metrics_on(inner);
                    functions.push(SourceFunction {
                        id,
                        file: file_path.to_string(),
                        body: body.to_string(),
                        span: (hs, i + 1),
                        loc: count_nonblank_lines(body),
                        cyclomatic,
                        halstead_volume,
                        callees: collect_callees(inner),
                    });
                }
                head.clear();
                head_start = None;
            }
            ';' => {
                head.clear();
                head_start = None;
            }
            _ => {
                if !c.is_ascii_whitespace() && head_start.is_none() {
                    head_start = Some(i);
                }
                head.push(c);
            }
        }
        i += 1;
    }
    if !stack.is_empty() {
        return Err(unbalanced(&format!(
            "{} unclosed block(s) at end of file",
            stack.len()
        )));
    }
    Ok(functions)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_definition() {
        let fns = extract_source_functions("int add(int a,int b){return a+b;}", "t.cc").unwrap();
        assert_eq!(fns.len(), 1);
        let f = &fns[0];
        assert_eq!(f.id, FunctionId::new("add"));
        assert_eq!(f.loc, 1);
        assert!(f.callees.is_empty());
    }

    #[test]
    fn namespace_scope_and_callee() {
        let fns = extract_source_functions("namespace ns{void f(){g();}}", "t.cc").unwrap();
        assert_eq!(fns.len(), 1);
        assert_eq!(fns[0].id.render(), "ns::f");
        assert_eq!(
            fns[0].callees.iter().cloned().collect::<Vec<_>>(),
            vec![FunctionId::new("g")]
        );
    }

    #[test]
    fn fixture_with_nested_namespace_matches_hand_parse() {
        // Hand-built oracle: spans and ids annotated by inspection of the
        // fixture text below.
        let src = "\
int top(int v) {\n  return v * 2;\n}\n\nnamespace outer {\nnamespace inner {\nstatic long scale(long x) {\n  long y = x + top(1);\n  return y;\n}\n} // namespace inner\n\nchar classify_byte(char c) {\n  if (c > 'a') { return 'l'; }\n  return scale(c) ? 'x' : 'o';\n}\n} // namespace outer\n";
        let fns = extract_source_functions(src, "fixture.cc").unwrap();
        assert_eq!(fns.len(), 3);

        assert_eq!(fns[0].id.render(), "top");
        assert_eq!(fns[0].span, (0, src.find("}\n\nnamespace").unwrap() + 1));
        assert_eq!(fns[0].loc, 3);

        assert_eq!(fns[1].id.render(), "outer::inner::scale");
        let scale_start = src.find("static long scale").unwrap();
        let scale_end = src.find("}\n} // namespace inner").unwrap() + 1;
        assert_eq!(fns[1].span, (scale_start, scale_end));
        assert_eq!(
            fns[1].callees.iter().cloned().collect::<Vec<_>>(),
            vec![FunctionId::new("top")]
        );

        assert_eq!(fns[2].id.render(), "outer::classify_byte");
        let cb_start = src.find("char classify_byte").unwrap();
        let cb_end = src.find("}\n} // namespace outer").unwrap() + 1;
        assert_eq!(fns[2].span, (cb_start, cb_end));
        assert_eq!(
            fns[2].callees.iter().cloned().collect::<Vec<_>>(),
            vec![FunctionId::new("scale")]
        );

        // non-overlap
        for w in fns.windows(2) {
            assert!(w[0].span.1 <= w[1].span.0);
        }
        // LoC additivity
        let total: u32 = fns.iter().map(|f| f.loc).sum();
        assert!(total <= src.lines().count() as u32);
    }

    #[test]
    fn unbalanced_braces_skip_file() {
        let err = extract_source_functions("void f() { if (x) {", "bad.cc").unwrap_err();
        assert!(matches!(err, IngestError::UnbalancedBraces { .. }));
        let err = extract_source_functions("}}", "bad2.cc").unwrap_err();
        assert!(matches!(err, IngestError::UnbalancedBraces { .. }));
    }

    #[test]
    fn class_methods_are_scoped() {
        let src = "class Codec {\npublic:\n  int open(int fd) { return init(fd); }\n  void close() {}\n};\n";
        let fns = extract_source_functions(src, "t.cc").unwrap();
        assert_eq!(fns.len(), 2);
        assert_eq!(fns[0].id.render(), "Codec::open");
        assert_eq!(fns[1].id.render(), "Codec::close");
    }

    #[test]
    fn qualified_out_of_line_definition() {
        let src = "int Codec::open(int fd) { return fd; }";
        let fns = extract_source_functions(src, "t.cc").unwrap();
        assert_eq!(fns[0].id.render(), "Codec::open");
    }

    #[test]
    fn initializers_and_prototypes_are_not_functions() {
        let src = "int table[] = {1, 2, 3};\nvoid proto(int x);\nstruct P pt = { .x = mk(1) };\n";
        let fns = extract_source_functions(src, "t.cc").unwrap();
        assert!(fns.is_empty());
    }

    #[test]
    fn preprocessor_braces_are_ignored() {
        let src = "#define OPEN {\nvoid f() { g(); }\n#define CLOSE }\n";
        let fns = extract_source_functions(src, "t.cc").unwrap();
        assert_eq!(fns.len(), 1);
        assert_eq!(fns[0].id.render(), "f");
    }

    #[test]
    fn comments_and_strings_hide_braces() {
        let src = "void f() {\n  // brace in comment {\n  const char *s = \"}{\";\n  use(s);\n}\n";
        let fns = extract_source_functions(src, "t.cc").unwrap();
        assert_eq!(fns.len(), 1);
        assert_eq!(fns[0].callees.len(), 1);
    }

    #[test]
    fn determinism() {
        let src = "namespace a { int f(int x) { return g(x); } int g(int y) { return y; } }";
        let a = extract_source_functions(src, "t.cc").unwrap();
        let b = extract_source_functions(src, "t.cc").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn normalization_strips_comments_and_collapses_whitespace() {
        let body = "int f() {\n  /* note */ int   x = 1; // tail\n  return x;\n}";
        assert_eq!(
            normalize_body(body),
            "int f() { int x = 1; return x; }"
        );
    }
}
