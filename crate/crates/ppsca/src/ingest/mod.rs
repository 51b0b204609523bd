//! Parsing of C-like source trees and pseudo-assembly listings into function
//! records, call graphs, and complexity metrics.

pub mod asm;
pub mod metrics;
pub mod source;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use asm::{parse_assembly_listing, AssemblyFunction, BasicBlock};
pub use metrics::{compute_metrics, maintainability_index};
pub use source::{extract_source_functions, normalize_body};

/// Ingest-stage failures.
#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{file}: unbalanced braces ({detail}); file skipped")]
    UnbalancedBraces { file: String, detail: String },

    #[error("assembly listing line {line}: {msg}")]
    AsmParse { line: usize, msg: String },
}

/// A function identifier: name plus enclosing namespace/class names.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FunctionId {
    pub name: String,
    pub scope: Vec<String>,
}

impl FunctionId {
    pub fn new(name: impl Into<String>) -> FunctionId {
        FunctionId {
            name: name.into(),
            scope: Vec::new(),
        }
    }

    pub fn scoped(scope: Vec<String>, name: impl Into<String>) -> FunctionId {
        FunctionId {
            name: name.into(),
            scope,
        }
    }

    /// `scope::...::name` rendering.
    pub fn render(&self) -> String {
        if self.scope.is_empty() {
            self.name.clone()
        } else {
            format!("{}::{}", self.scope.join("::"), self.name)
        }
    }
}

impl fmt::Display for FunctionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// One extracted source function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceFunction {
    pub id: FunctionId,
    /// Path of the defining file, relative to the ingest root.
    pub file: String,
    /// Raw text from signature start to the closing brace.
    pub body: String,
    /// Byte range of `body` within the file.
    pub span: (usize, usize),
    /// Non-blank line count, signature line included.
    pub loc: u32,
    pub cyclomatic: u32,
    pub halstead_volume: f64,
    /// Ids appearing as call expressions inside the braces.
    pub callees: BTreeSet<FunctionId>,
}

impl SourceFunction {
    /// Comment-stripped, whitespace-collapsed body used for hashing and
    /// tokenization.
    pub fn normalized_body(&self) -> String {
        normalize_body(&self.body)
    }

    pub fn maintainability_index(&self) -> f64 {
        maintainability_index(self.halstead_volume, self.cyclomatic, self.loc)
    }
}

/// Direct call relations between functions of one corpus.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallGraph {
    /// Resolved edges: both endpoints are functions of the corpus.
    pub edges: BTreeSet<(FunctionId, FunctionId)>,
    /// Callees that did not resolve to any corpus function.
    pub external: BTreeSet<FunctionId>,
}

/// Build the call graph of a function set. A callee resolves to every corpus
/// function sharing its name (and scope, when the call is qualified);
/// unresolved names are recorded as external.
pub fn build_call_graph(functions: &[SourceFunction]) -> CallGraph {
    let mut by_name: std::collections::BTreeMap<&str, Vec<&FunctionId>> =
        std::collections::BTreeMap::new();
    for f in functions {
        by_name.entry(f.id.name.as_str()).or_default().push(&f.id);
    }
    let mut graph = CallGraph::default();
    for f in functions {
        for callee in &f.callees {
            match by_name.get(callee.name.as_str()) {
                Some(candidates) => {
                    let qualified: Vec<&&FunctionId> = if callee.scope.is_empty() {
                        candidates.iter().collect()
                    } else {
                        candidates
                            .iter()
                            .filter(|c| c.scope.ends_with(&callee.scope))
                            .collect()
                    };
                    if qualified.is_empty() {
                        graph.external.insert(callee.clone());
                    }
                    for c in qualified {
                        graph.edges.insert((f.id.clone(), (*c).clone()));
                    }
                }
                None => {
                    graph.external.insert(callee.clone());
                }
            }
        }
    }
    graph
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fun(name: &str, callees: &[&str]) -> SourceFunction {
        SourceFunction {
            id: FunctionId::new(name),
            file: "t.cc".into(),
            body: String::new(),
            span: (0, 0),
            loc: 1,
            cyclomatic: 1,
            halstead_volume: 0.0,
            callees: callees.iter().map(|c| FunctionId::new(*c)).collect(),
        }
    }

    #[test]
    fn simple_edge() {
        let fs = vec![fun("f", &["g"]), fun("g", &[])];
        let g = build_call_graph(&fs);
        assert_eq!(g.edges.len(), 1);
        assert!(g
            .edges
            .contains(&(FunctionId::new("f"), FunctionId::new("g"))));
        assert!(g.external.is_empty());
    }

    #[test]
    fn self_edge_for_recursion() {
        let fs = vec![fun("f", &["f"])];
        let g = build_call_graph(&fs);
        assert!(g
            .edges
            .contains(&(FunctionId::new("f"), FunctionId::new("f"))));
    }

    #[test]
    fn unresolved_marked_external() {
        let fs = vec![fun("f", &["qsort"])];
        let g = build_call_graph(&fs);
        assert!(g.edges.is_empty());
        assert!(g.external.contains(&FunctionId::new("qsort")));
    }

    #[test]
    fn id_rendering() {
        let id = FunctionId::scoped(vec!["ns".into(), "Cls".into()], "f");
        assert_eq!(id.render(), "ns::Cls::f");
        assert_eq!(FunctionId::new("main").render(), "main");
    }
}
