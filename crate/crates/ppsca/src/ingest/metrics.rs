//! Cyclomatic complexity, Halstead volume, and the maintainability index.

use super::source::{classify, Class};
use super::SourceFunction;

const KEYWORDS: &[&str] = &[
    "if", "else", "for", "while", "do", "switch", "case", "default", "return", "sizeof",
    "alignof", "goto", "break", "continue", "new", "delete", "throw", "catch", "try", "int",
    "char", "long", "short", "float", "double", "void", "bool", "unsigned", "signed", "const",
    "static", "struct", "class", "enum", "union", "auto", "using", "namespace", "template",
    "typename", "operator", "inline", "virtual", "extern", "register", "volatile", "mutable",
];

const MULTI_OPS: &[&str] = &[
    "<<=", ">>=", "->*", "->", "::", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "++", "--",
    "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=",
];

const SINGLE_OPS: &str = "+-*/%<>=!&|^~?:.";

#[derive(Debug, PartialEq)]
enum MTok {
    Word(String),
    Op(String),
    Literal(String),
}

fn lex_metric_tokens(inner: &str) -> Vec<MTok> {
    let cls = classify(inner);
    let bytes = inner.as_bytes();
    let mut toks = Vec::new();
    let mut word = String::new();
    let mut i = 0;
    while i < bytes.len() {
        match cls[i] {
            Class::Str | Class::Chr => {
                if !word.is_empty() {
                    toks.push(MTok::Word(std::mem::take(&mut word)));
                }
                let start = i;
                let kind = cls[i];
                while i < bytes.len() && cls[i] == kind {
                    i += 1;
                }
                toks.push(MTok::Literal(inner[start..i].to_string()));
                continue;
            }
            Class::Comment | Class::Preproc => {
                if !word.is_empty() {
                    toks.push(MTok::Word(std::mem::take(&mut word)));
                }
                i += 1;
                continue;
            }
            Class::Code => {}
        }
        let c = bytes[i] as char;
        if c.is_ascii_alphanumeric() || c == '_' {
            word.push(c);
            i += 1;
            continue;
        }
        if !word.is_empty() {
            toks.push(MTok::Word(std::mem::take(&mut word)));
        }
        if SINGLE_OPS.contains(c) {
            // greedy multi-character operator match over the run
            let lookahead = &inner[i..inner.len().min(i + 3)];
            if let Some(op) = MULTI_OPS.iter().find(|op| lookahead.starts_with(**op)) {
                toks.push(MTok::Op((*op).to_string()));
                i += op.len();
                continue;
            }
            toks.push(MTok::Op(c.to_string()));
        }
        i += 1;
    }
    if !word.is_empty() {
        toks.push(MTok::Word(word));
    }
    toks
}

/// Cyclomatic complexity and Halstead volume of a function's inner body.
pub(crate) fn compute_metrics_on(inner: &str) -> (u32, f64) {
    let toks = lex_metric_tokens(inner);

    let mut cc = 1u32;
    for t in &toks {
        match t {
            MTok::Word(w) if matches!(w.as_str(), "if" | "for" | "while" | "case") => cc += 1,
            MTok::Op(op) if matches!(op.as_str(), "&&" | "||" | "?") => cc += 1,
            _ => {}
        }
    }

    let mut n_ops = 0usize;
    let mut n_operands = 0usize;
    let mut distinct_ops = std::collections::BTreeSet::new();
    let mut distinct_operands = std::collections::BTreeSet::new();
    for t in &toks {
        match t {
            MTok::Word(w) => {
                if KEYWORDS.contains(&w.as_str()) {
                    n_ops += 1;
                    distinct_ops.insert(w.clone());
                } else {
                    n_operands += 1;
                    distinct_operands.insert(w.clone());
                }
            }
            MTok::Op(op) => {
                n_ops += 1;
                distinct_ops.insert(op.clone());
            }
            MTok::Literal(l) => {
                n_operands += 1;
                distinct_operands.insert(l.clone());
            }
        }
    }
    let vocabulary = distinct_ops.len() + distinct_operands.len();
    let volume = if vocabulary == 0 {
        0.0
    } else {
        (n_ops + n_operands) as f64 * (vocabulary as f64).log2()
    };
    (cc, volume)
}

/// The 171-point maintainability index, normalized to 0..100.
pub fn maintainability_index(volume: f64, cyclomatic: u32, loc: u32) -> f64 {
    let mi = 171.0
        - 5.2 * volume.max(1.0).ln()
        - 0.23 * f64::from(cyclomatic)
        - 16.2 * f64::from(loc.max(1)).ln();
    (mi * 100.0 / 171.0).max(0.0)
}

/// Metrics triple of an extracted function.
pub fn compute_metrics(f: &SourceFunction) -> (u32, f64, f64) {
    (
        f.cyclomatic,
        f.halstead_volume,
        maintainability_index(f.halstead_volume, f.cyclomatic, f.loc),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::extract_source_functions;

    #[test]
    fn degenerate_straight_line_body() {
        let fns = extract_source_functions("void f() {}", "t.cc").unwrap();
        let (cc, v, mi) = compute_metrics(&fns[0]);
        assert_eq!(cc, 1);
        assert_eq!(v, 0.0);
        // LoC=1, V treated as 1: (171 - 0.23) * 100 / 171
        assert!((mi - 99.8654970760).abs() < 1e-9);
        assert!((mi - 99.87).abs() < 0.01);
    }

    #[test]
    fn branch_keyword_counting() {
        let fns =
            extract_source_functions("void f(int a, int b) { if (a && b) { g(); } }", "t.cc")
                .unwrap();
        assert_eq!(fns[0].cyclomatic, 3);
    }

    #[test]
    fn cc_counts_all_branch_kinds() {
        let body = "void f(int x) { for (;;) { while (x) { switch (x) { case 1: break; } } } int y = x ? 1 : 0; }";
        let fns = extract_source_functions(body, "t.cc").unwrap();
        // 1 + for + while + case + ?
        assert_eq!(fns[0].cyclomatic, 5);
    }

    #[test]
    fn fixture_matches_hand_computation() {
        // Hand computation over the inner body:
        //   operands: x a b x 3 x x 1 x 2            -> N2=10, n2=6
        //   operators: int if return = + > = - *     -> N1=9,  n1=8
        //   V = 19 * log2(14) = 72.3397437...
        //   CC = 1 + if = 2; LoC = 5
        //   MI = (171 - 5.2 ln V - 0.23*2 - 16.2 ln 5) * 100/171 = 71.4643...
        let src = "int sample(int a, int b) {\n  int x = a + b;\n  if (x > 3) { x = x - 1; }\n  return x * 2;\n}";
        let fns = extract_source_functions(src, "t.cc").unwrap();
        let f = &fns[0];
        assert_eq!(f.loc, 5);
        let (cc, v, mi) = compute_metrics(f);
        assert_eq!(cc, 2);
        assert!((v - 72.3397435).abs() < 1e-6, "volume was {v}");
        assert!((mi - 71.4643057).abs() < 1e-6, "mi was {mi}");
    }

    #[test]
    fn appending_an_if_never_decreases_cc() {
        let base = "void f(int x) { x = x + 1; }";
        let more = "void f(int x) { x = x + 1; if (x) { x = 0; } }";
        let a = extract_source_functions(base, "t.cc").unwrap()[0].cyclomatic;
        let b = extract_source_functions(more, "t.cc").unwrap()[0].cyclomatic;
        assert!(b >= a);
        assert_eq!(b, a + 1);
    }
}
