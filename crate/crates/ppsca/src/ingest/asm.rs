//! Parser for the line-based pseudo-assembly listing format:
//!
//! ```text
//! func <name>
//! block <label>:
//!   <instruction tokens...>
//! endfunc
//! ```

use serde::{Deserialize, Serialize};

use super::IngestError;

/// One basic block: a label and its instructions (token lists).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasicBlock {
    pub label: String,
    pub instructions: Vec<Vec<String>>,
}

/// One function of a listing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssemblyFunction {
    pub name: String,
    pub blocks: Vec<BasicBlock>,
}

impl AssemblyFunction {
    pub fn block_num(&self) -> usize {
        self.blocks.len()
    }

    /// All instruction tokens in order, for embedding.
    pub fn token_stream(&self) -> Vec<String> {
        self.blocks
            .iter()
            .flat_map(|b| b.instructions.iter())
            .flat_map(|i| i.iter())
            .map(|t| t.to_lowercase())
            .collect()
    }
}

/// Parse a listing into its functions.
pub fn parse_assembly_listing(text: &str) -> Result<Vec<AssemblyFunction>, IngestError> {
    let mut functions: Vec<AssemblyFunction> = Vec::new();
    let mut current: Option<AssemblyFunction> = None;

    let err = |line: usize, msg: &str| IngestError::AsmParse {
        line,
        msg: msg.to_string(),
    };

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let indented = raw.starts_with(' ') || raw.starts_with('\t');
        let line = raw.trim();
        if indented {
            let Some(f) = current.as_mut() else {
                return Err(err(line_no, "instruction outside of a function"));
            };
            let Some(block) = f.blocks.last_mut() else {
                return Err(err(line_no, "instruction before any block label"));
            };
            block
                .instructions
                .push(line.split_whitespace().map(str::to_string).collect());
            continue;
        }
        let mut fields = line.split_whitespace();
        match fields.next() {
            Some("func") => {
                if current.is_some() {
                    return Err(err(line_no, "nested `func` section"));
                }
                let (Some(name), None) = (fields.next(), fields.next()) else {
                    return Err(err(line_no, "expected `func <name>`"));
                };
                current = Some(AssemblyFunction {
                    name: name.to_string(),
                    blocks: Vec::new(),
                });
            }
            Some("block") => {
                let Some(f) = current.as_mut() else {
                    return Err(err(line_no, "`block` outside of a function"));
                };
                let (Some(label), None) = (fields.next(), fields.next()) else {
                    return Err(err(line_no, "expected `block <label>:`"));
                };
                let Some(label) = label.strip_suffix(':') else {
                    return Err(err(line_no, "block label must end with `:`"));
                };
                f.blocks.push(BasicBlock {
                    label: label.to_string(),
                    instructions: Vec::new(),
                });
            }
            Some("endfunc") => {
                let Some(f) = current.take() else {
                    return Err(err(line_no, "`endfunc` without open function"));
                };
                if f.blocks.is_empty() {
                    return Err(err(line_no, "function closed with no blocks"));
                }
                functions.push(f);
            }
            _ => return Err(err(line_no, "unrecognized section header")),
        }
    }
    if current.is_some() {
        return Err(err(text.lines().count(), "unterminated `func` section"));
    }
    Ok(functions)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_block_function() {
        let text = "func f\nblock entry:\n  mov r0 r1\n  add r0 4\nblock exit:\n  ret r0\nendfunc\n";
        let fns = parse_assembly_listing(text).unwrap();
        assert_eq!(fns.len(), 1);
        assert_eq!(fns[0].name, "f");
        assert_eq!(fns[0].block_num(), 2);
        assert_eq!(fns[0].blocks[0].instructions.len(), 2);
        assert_eq!(fns[0].blocks[0].instructions[0], vec!["mov", "r0", "r1"]);
    }

    #[test]
    fn empty_listing() {
        assert!(parse_assembly_listing("").unwrap().is_empty());
        assert!(parse_assembly_listing("\n\n  \n").unwrap().is_empty());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_assembly_listing("func f\nbogus here\nendfunc\n").unwrap_err();
        match e {
            IngestError::AsmParse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
        let e = parse_assembly_listing("func f\nblock a\nendfunc\n").unwrap_err();
        match e {
            IngestError::AsmParse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
        assert!(parse_assembly_listing("  stray instruction\n").is_err());
        assert!(parse_assembly_listing("func f\nblock a:\n").is_err());
    }
}
