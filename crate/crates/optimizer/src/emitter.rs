//! Rewrites an annotated source once winners have been chosen.
//!
//! The two anchor lines are replaced with `#ifdef`-guarded blocks holding the
//! deduplicated includes and helper functions of every winner, and each
//! pragma region becomes:
//!
//! ```text
//! #ifndef OPTIMIZER_ACTIVATED
//! <original fallback lines, byte-preserved>
//! #else
//!     <winner body, re-indented>
//! #endif // PRAGMA BEGIN line <N>
//! ```
//!
//! so that compiling without the guard macro is textually equivalent to the
//! original non-pragma code.

use thiserror::Error;

use crate::pragma::{AnnotatedSource, Element, PragmaRegion};
use crate::registry::Candidate;

/// Guard macro used when none is configured.
pub const DEFAULT_GUARD_MACRO: &str = "OPTIMIZER_ACTIVATED";
/// Extra indentation applied to winner body lines, by default.
pub const DEFAULT_INDENT_UNIT: &str = "    ";

#[derive(Debug, Clone)]
pub struct EmitOptions {
    pub guard_macro: String,
    pub indent_unit: String,
}

impl Default for EmitOptions {
    fn default() -> Self {
        EmitOptions {
            guard_macro: DEFAULT_GUARD_MACRO.to_string(),
            indent_unit: DEFAULT_INDENT_UNIT.to_string(),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PlanError {
    #[error("{path}: {regions} region(s) but {winners} winner(s)")]
    WinnerCountMismatch {
        path: String,
        regions: usize,
        winners: usize,
    },
}

/// A parsed source paired with one winning candidate per region.
#[derive(Debug)]
pub struct RewritePlan<'a> {
    source: &'a AnnotatedSource,
    winners: Vec<Candidate>,
    merged_includes: Vec<String>,
    merged_functions: Vec<String>,
    options: EmitOptions,
}

impl<'a> RewritePlan<'a> {
    /// `winners` must hold exactly one candidate per region, in region order.
    pub fn new(
        source: &'a AnnotatedSource,
        winners: Vec<Candidate>,
        options: EmitOptions,
    ) -> Result<RewritePlan<'a>, PlanError> {
        let regions = source.region_count();
        if winners.len() != regions {
            return Err(PlanError::WinnerCountMismatch {
                path: source.path.clone(),
                regions,
                winners: winners.len(),
            });
        }
        // First-occurrence order across winners taken in region order;
        // duplicates keyed on the line with trailing whitespace trimmed.
        let merge = |pick: fn(&Candidate) -> &[String]| {
            let mut seen = std::collections::BTreeSet::new();
            let mut merged = Vec::new();
            for winner in &winners {
                for line in pick(winner) {
                    let trimmed = line.trim_end();
                    if seen.insert(trimmed.to_string()) {
                        merged.push(trimmed.to_string());
                    }
                }
            }
            merged
        };
        let merged_includes = merge(|c| &c.fragment.includes);
        let merged_functions = merge(|c| &c.fragment.functions);
        Ok(RewritePlan {
            source,
            winners,
            merged_includes,
            merged_functions,
            options,
        })
    }

    pub fn merged_includes(&self) -> &[String] {
        &self.merged_includes
    }

    pub fn merged_functions(&self) -> &[String] {
        &self.merged_functions
    }
}

/// Produce the rewritten file. Total on valid plans.
pub fn emit(plan: &RewritePlan) -> String {
    let mut lines: Vec<String> = Vec::new();
    let mut winners = plan.winners.iter();

    for element in &plan.source.elements {
        match element {
            Element::Passthrough(line) => lines.push(line.text.clone()),
            Element::IncludesAnchor(_) => {
                push_guarded_block(&mut lines, &plan.options, &plan.merged_includes)
            }
            Element::FunctionsAnchor(_) => {
                push_guarded_block(&mut lines, &plan.options, &plan.merged_functions)
            }
            Element::Region(region) => {
                let winner = winners.next().expect("one winner per region");
                push_region(&mut lines, &plan.options, region, winner);
            }
        }
    }

    // A guard block at the very end of the file would otherwise leave its
    // synthetic separator as a trailing blank line.
    if matches!(
        plan.source.elements.last(),
        Some(Element::IncludesAnchor(_) | Element::FunctionsAnchor(_))
    ) && lines.last().is_some_and(|l| l.is_empty())
    {
        lines.pop();
    }

    let mut out = lines.join("\n");
    if plan.source.ends_with_newline {
        out.push('\n');
    }
    out
}

/// `#ifdef` block in place of an anchor line, separated from its
/// surroundings by single blank lines (adjacent blocks share one).
fn push_guarded_block(lines: &mut Vec<String>, options: &EmitOptions, content: &[String]) {
    let last_is_blank = lines.last().is_some_and(|l| l.is_empty());
    if !lines.is_empty() && !last_is_blank {
        lines.push(String::new());
    }
    lines.push(format!("#ifdef {}", options.guard_macro));
    lines.extend(content.iter().cloned());
    lines.push("#endif".to_string());
    lines.push(String::new());
}

fn push_region(
    lines: &mut Vec<String>,
    options: &EmitOptions,
    region: &PragmaRegion,
    winner: &Candidate,
) {
    let indent = &region.indent;
    lines.push(format!("{indent}#ifndef {}", options.guard_macro));
    for fallback in region.fallback_lines() {
        lines.push(fallback.text.clone());
    }
    lines.push(format!("{indent}#else"));
    for body_line in &winner.fragment.body {
        if body_line.is_empty() {
            lines.push(String::new());
        } else {
            lines.push(format!("{indent}{}{body_line}", options.indent_unit));
        }
    }
    // The label is the 0-based index of the BEGIN directive in the input.
    lines.push(format!(
        "{indent}#endif // PRAGMA BEGIN line {}",
        region.begin.line.index - 1
    ));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pragma::parse;
    use crate::registry::GeneratedFragment;

    fn candidate(includes: &[&str], functions: &[&str], body: &[&str]) -> Candidate {
        Candidate {
            label: "stub".to_string(),
            fragment: GeneratedFragment {
                includes: includes.iter().map(|s| s.to_string()).collect(),
                functions: functions.iter().map(|s| s.to_string()).collect(),
                body: body.iter().map(|s| s.to_string()).collect(),
            },
            op_counts: Default::default(),
        }
    }

    const EXAMPLE_INPUT: &str = "\
#include <iostream>
#include <cstdio>
/// PRAGMA INCLUDES
/// PRAGMA FUNCTIONS
int main() {
    std::cout << \"begin\" << std::endl;
    /// PRAGMA BEGIN algo, b, c,
    std::cout << \"BAD\" << std::endl;
    /// g, h
    std::cout << \"BAD\" << std::endl;
    /// PRAGMA END
    std::cout << \"end\" << std::endl;
    return 0;
}
";

    const EXAMPLE_OUTPUT: &str = "\
#include <iostream>
#include <cstdio>

#ifdef OPTIMIZER_ACTIVATED
// Extra includes here required by building blocks
// This block of code replaces the original /// PRAGMA INCLUDES
#endif

#ifdef OPTIMIZER_ACTIVATED
// Extra code here required by building blocks
// This block of code replaces the original /// PRAGMA FUNCTIONS
#endif

int main() {
    std::cout << \"begin\" << std::endl;
    #ifndef OPTIMIZER_ACTIVATED
    std::cout << \"BAD\" << std::endl;
    std::cout << \"BAD\" << std::endl;
    #else
        // OPTIMIZED CODE HERE PROPERLY INDENTED
    #endif // PRAGMA BEGIN line 6
    std::cout << \"end\" << std::endl;
    return 0;
}
";

    #[test]
    fn example_produces_expected_shape() {
        let source = parse(EXAMPLE_INPUT, "example.cpp").unwrap();
        let winner = candidate(
            &[
                "// Extra includes here required by building blocks",
                "// This block of code replaces the original /// PRAGMA INCLUDES",
            ],
            &[
                "// Extra code here required by building blocks",
                "// This block of code replaces the original /// PRAGMA FUNCTIONS",
            ],
            &["// OPTIMIZED CODE HERE PROPERLY INDENTED"],
        );
        let plan = RewritePlan::new(&source, vec![winner], EmitOptions::default()).unwrap();
        let out = emit(&plan);
        assert_eq!(out, EXAMPLE_OUTPUT);
        assert_eq!(out.lines().count(), 24);
    }

    #[test]
    fn no_regions_no_anchors_is_identity() {
        for input in ["plain();\nmore();\n", "no newline at end", ""] {
            let source = parse(input, "t").unwrap();
            let plan = RewritePlan::new(&source, vec![], EmitOptions::default()).unwrap();
            assert_eq!(emit(&plan), input);
        }
    }

    #[test]
    fn shared_include_is_deduplicated() {
        let input = "\
/// PRAGMA INCLUDES
/// PRAGMA FUNCTIONS
/// PRAGMA BEGIN a
/// PRAGMA END
/// PRAGMA BEGIN b
/// PRAGMA END
";
        let source = parse(input, "t").unwrap();
        let w1 = candidate(&["#include <math.h>"], &[], &["a();"]);
        let w2 = candidate(&["#include <math.h>  ", "#include <stddef.h>"], &[], &["b();"]);
        let plan = RewritePlan::new(&source, vec![w1, w2], EmitOptions::default()).unwrap();
        assert_eq!(
            plan.merged_includes(),
            ["#include <math.h>", "#include <stddef.h>"]
        );
        let out = emit(&plan);
        assert_eq!(out.matches("#include <math.h>").count(), 1);
    }

    #[test]
    fn winner_count_mismatch_is_rejected() {
        let input = "\
/// PRAGMA INCLUDES
/// PRAGMA FUNCTIONS
/// PRAGMA BEGIN a
/// PRAGMA END
";
        let source = parse(input, "t").unwrap();
        let err = RewritePlan::new(&source, vec![], EmitOptions::default()).unwrap_err();
        assert_eq!(
            err,
            PlanError::WinnerCountMismatch {
                path: "t".to_string(),
                regions: 1,
                winners: 0
            }
        );
    }

    #[test]
    fn guard_macro_and_indent_unit_are_configurable() {
        let source = parse(EXAMPLE_INPUT, "t").unwrap();
        let winner = candidate(&[], &[], &["body();"]);
        let options = EmitOptions {
            guard_macro: "MY_GUARD".to_string(),
            indent_unit: "  ".to_string(),
        };
        let out = emit(&RewritePlan::new(&source, vec![winner], options).unwrap());
        assert!(out.contains("#ifdef MY_GUARD"));
        assert!(out.contains("    #ifndef MY_GUARD"));
        assert!(out.contains("      body();"));
        assert!(!out.contains("OPTIMIZER_ACTIVATED"));
        // The #endif comment still names the pragma, not the macro.
        assert!(out.contains("#endif // PRAGMA BEGIN line 6"));
    }

    #[test]
    fn fallback_lines_are_byte_preserved() {
        // Trailing whitespace spelled out so no editor can strip it.
        let fallback = "\t  oddly   spaced();  \t ";
        let input = format!(
            "/// PRAGMA INCLUDES\n/// PRAGMA FUNCTIONS\n  /// PRAGMA BEGIN k\n{fallback}\n  /// PRAGMA END\n"
        );
        let source = parse(&input, "t").unwrap();
        let winner = candidate(&[], &[], &["x();"]);
        let out = emit(&RewritePlan::new(&source, vec![winner], EmitOptions::default()).unwrap());
        assert!(out.contains(&format!("{fallback}\n")));
    }

    #[test]
    fn guard_lines_take_region_indent_and_balance() {
        let input = "\
/// PRAGMA INCLUDES
/// PRAGMA FUNCTIONS
fn();
\t/// PRAGMA BEGIN k
\tfallback();
\t/// PRAGMA END
";
        let source = parse(input, "t").unwrap();
        let winner = candidate(&["#include <x.h>"], &["void h(void);"], &["x();", "", "y();"]);
        let out = emit(&RewritePlan::new(&source, vec![winner], EmitOptions::default()).unwrap());
        assert!(out.contains("\t#ifndef OPTIMIZER_ACTIVATED"));
        assert!(out.contains("\t#else"));
        assert!(out.contains("\t#endif // PRAGMA BEGIN line 3"));
        assert!(out.contains("\t    x();"));
        // Empty body lines stay empty rather than gaining trailing spaces.
        assert!(out.contains("\t    x();\n\n\t    y();"));

        let opened = out.matches("#ifdef").count() + out.matches("#ifndef").count();
        let closed = out.matches("#endif").count();
        assert_eq!(opened, closed);
    }

    #[test]
    fn trailing_newline_is_mirrored() {
        let with = parse("/// PRAGMA INCLUDES\n/// PRAGMA FUNCTIONS\n", "t").unwrap();
        let without = parse("/// PRAGMA INCLUDES\n/// PRAGMA FUNCTIONS", "t").unwrap();
        let out_with = emit(&RewritePlan::new(&with, vec![], EmitOptions::default()).unwrap());
        let out_without =
            emit(&RewritePlan::new(&without, vec![], EmitOptions::default()).unwrap());
        assert!(out_with.ends_with('\n'));
        assert!(!out_without.ends_with('\n'));
    }

    #[test]
    fn anchors_only_emit_empty_guard_blocks() {
        let input = "before();\n/// PRAGMA INCLUDES\nafter();\n";
        let source = parse(input, "t").unwrap();
        let out = emit(&RewritePlan::new(&source, vec![], EmitOptions::default()).unwrap());
        assert_eq!(
            out,
            "before();\n\n#ifdef OPTIMIZER_ACTIVATED\n#endif\n\nafter();\n"
        );
    }

    #[test]
    fn anchor_at_file_start_gets_no_leading_blank() {
        let input = "/// PRAGMA INCLUDES\nafter();\n";
        let source = parse(input, "t").unwrap();
        let out = emit(&RewritePlan::new(&source, vec![], EmitOptions::default()).unwrap());
        assert!(out.starts_with("#ifdef OPTIMIZER_ACTIVATED\n"));
    }

    #[test]
    fn compile_duality_fallback_once_body_once() {
        let source = parse(EXAMPLE_INPUT, "t").unwrap();
        let winner = candidate(&[], &[], &["optimized();"]);
        let out = emit(&RewritePlan::new(&source, vec![winner], EmitOptions::default()).unwrap());

        let lines: Vec<&str> = out.lines().collect();
        let ifndef = lines
            .iter()
            .position(|l| l.trim_start() == "#ifndef OPTIMIZER_ACTIVATED")
            .unwrap();
        let else_at = lines.iter().position(|l| l.trim_start() == "#else").unwrap();
        let endif = lines
            .iter()
            .position(|l| l.trim_start().starts_with("#endif // PRAGMA BEGIN"))
            .unwrap();
        assert!(ifndef < else_at && else_at < endif);

        // Both fallback lines appear exactly once, inside the #ifndef branch.
        let bad_positions: Vec<usize> = lines
            .iter()
            .enumerate()
            .filter(|(_, l)| l.contains("BAD"))
            .map(|(i, _)| i)
            .collect();
        assert_eq!(bad_positions.len(), 2);
        assert!(bad_positions.iter().all(|&p| p > ifndef && p < else_at));

        // The winner body appears exactly once, inside the #else branch.
        let body_positions: Vec<usize> = lines
            .iter()
            .enumerate()
            .filter(|(_, l)| l.contains("optimized();"))
            .map(|(i, _)| i)
            .collect();
        assert_eq!(body_positions, [else_at + 1]);
    }
}
