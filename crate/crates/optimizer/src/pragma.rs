//! Line-level parser for `/// PRAGMA` annotations in C/C++ sources.
//!
//! The parser has no C/C++ grammar awareness: it classifies each line as a
//! pragma directive, a region body line, or untouched passthrough text, and
//! keeps enough of the original bytes that a file without directives can be
//! re-emitted unchanged.
//!
//! Recognized directives, matched case-sensitively after stripping leading
//! whitespace (`///`, then one or more spaces, then `PRAGMA`):
//!
//! ```text
//! /// PRAGMA INCLUDES            anchor for injected include lines
//! /// PRAGMA FUNCTIONS           anchor for injected helper code
//! /// PRAGMA BEGIN kernel, a, b  start of a replaceable region
//! /// PRAGMA END                 end of the open region
//! ```
//!
//! Inside an open region, any other `///` line continues the parameter list
//! (`/// g, h` contributes `g` and `h`) and every remaining line is fallback
//! code that stays compilable when the optimizer is disabled.

use thiserror::Error;

/// One line of the original file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceLine {
    /// 1-based line number in the original file.
    pub index: usize,
    /// Raw line content without the `\n` terminator.
    pub text: String,
    /// Leading whitespace of the line.
    pub indent: String,
}

impl SourceLine {
    fn new(index: usize, text: &str) -> SourceLine {
        let indent_len = text.len() - text.trim_start_matches([' ', '\t']).len();
        SourceLine {
            index,
            text: text.to_string(),
            indent: text[..indent_len].to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectiveKind {
    Includes,
    Functions,
    Begin,
    End,
    Continuation,
}

/// A recognized pragma line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PragmaDirective {
    pub kind: DirectiveKind,
    pub line: SourceLine,
    /// Kernel identifier; present on `Begin` directives only.
    pub kernel_name: Option<String>,
    /// Parameters contributed by this line (`Begin` and `Continuation`).
    pub params: Vec<String>,
}

/// A line between `BEGIN` and `END`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RegionLine {
    /// Original code kept as the non-optimized branch.
    Fallback(SourceLine),
    /// `///` line extending the parameter list.
    Continuation(PragmaDirective),
}

/// A pragma-delimited region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PragmaRegion {
    pub begin: PragmaDirective,
    pub end: PragmaDirective,
    /// Region body lines in original order.
    pub body: Vec<RegionLine>,
    /// Begin-line parameters followed by continuation parameters, file order.
    pub full_params: Vec<String>,
    /// Indentation of the `BEGIN` line.
    pub indent: String,
}

impl PragmaRegion {
    pub fn kernel_name(&self) -> &str {
        self.begin.kernel_name.as_deref().expect("begin directive")
    }

    pub fn fallback_lines(&self) -> impl Iterator<Item = &SourceLine> {
        self.body.iter().filter_map(|l| match l {
            RegionLine::Fallback(line) => Some(line),
            RegionLine::Continuation(_) => None,
        })
    }

    /// All original lines of the region, `BEGIN` through `END`.
    fn original_lines(&self) -> impl Iterator<Item = &SourceLine> {
        std::iter::once(&self.begin.line)
            .chain(self.body.iter().map(|l| match l {
                RegionLine::Fallback(line) => line,
                RegionLine::Continuation(d) => &d.line,
            }))
            .chain(std::iter::once(&self.end.line))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Element {
    Passthrough(SourceLine),
    IncludesAnchor(SourceLine),
    FunctionsAnchor(SourceLine),
    Region(PragmaRegion),
}

/// Parsed document model of an annotated source file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedSource {
    pub path: String,
    pub elements: Vec<Element>,
    /// Whether the input ended with a newline; re-emission mirrors it.
    pub ends_with_newline: bool,
}

impl AnnotatedSource {
    pub fn regions(&self) -> impl Iterator<Item = &PragmaRegion> {
        self.elements.iter().filter_map(|e| match e {
            Element::Region(r) => Some(r),
            _ => None,
        })
    }

    pub fn region_count(&self) -> usize {
        self.regions().count()
    }

    /// Reconstruct the original input byte-for-byte.
    pub fn original_text(&self) -> String {
        let mut lines: Vec<&str> = Vec::new();
        for element in &self.elements {
            match element {
                Element::Passthrough(l)
                | Element::IncludesAnchor(l)
                | Element::FunctionsAnchor(l) => lines.push(&l.text),
                Element::Region(r) => lines.extend(r.original_lines().map(|l| l.text.as_str())),
            }
        }
        let mut out = lines.join("\n");
        if self.ends_with_newline {
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("{path}:{line}: PRAGMA END without a matching PRAGMA BEGIN")]
    UnbalancedEnd { path: String, line: usize },
    #[error("{path}:{line}: PRAGMA BEGIN is never closed by a PRAGMA END")]
    UnclosedBegin { path: String, line: usize },
    #[error("{path}:{line}: PRAGMA BEGIN inside an open region (regions do not nest)")]
    NestedBegin { path: String, line: usize },
    #[error("{path}:{line}: PRAGMA {which} must not appear between BEGIN and END")]
    AnchorInRegion {
        path: String,
        line: usize,
        which: &'static str,
    },
    #[error("{path}:{line}: duplicate PRAGMA {which} (at most one per file)")]
    DuplicateAnchor {
        path: String,
        line: usize,
        which: &'static str,
    },
    #[error("{path}:{line}: PRAGMA {which} anchor missing or positioned after the first region")]
    MissingAnchor {
        path: String,
        line: usize,
        which: &'static str,
    },
    #[error("{path}:{line}: PRAGMA BEGIN without a kernel name")]
    EmptyKernelName { path: String, line: usize },
    #[error("{path}:{line}: empty parameter (consecutive commas)")]
    EmptyParameter { path: String, line: usize },
    #[error("{path}:{line}: `{name}` is not a valid kernel identifier")]
    InvalidKernelName {
        path: String,
        line: usize,
        name: String,
    },
}

impl ParseError {
    /// Line number the diagnostic points at.
    pub fn line(&self) -> usize {
        match self {
            ParseError::UnbalancedEnd { line, .. }
            | ParseError::UnclosedBegin { line, .. }
            | ParseError::NestedBegin { line, .. }
            | ParseError::AnchorInRegion { line, .. }
            | ParseError::DuplicateAnchor { line, .. }
            | ParseError::MissingAnchor { line, .. }
            | ParseError::EmptyKernelName { line, .. }
            | ParseError::EmptyParameter { line, .. }
            | ParseError::InvalidKernelName { line, .. } => *line,
        }
    }
}

/// Raw classification of one line, before region-state checks.
enum RawDirective<'a> {
    Includes,
    Functions,
    Begin { payload: &'a str },
    End,
}

/// Match the exact directive forms. Anything else — including `//`, `////`,
/// lowercase `pragma`, or a known verb with trailing junk — is not a
/// directive.
fn classify_directive(stripped: &str) -> Option<RawDirective<'_>> {
    let rest = stripped.trim_end().strip_prefix("///")?;
    let rest = rest.strip_prefix(' ')?;
    let rest = rest.trim_start_matches(' ');
    let rest = rest.strip_prefix("PRAGMA")?;
    let rest = rest.strip_prefix(' ')?;
    let rest = rest.trim_start_matches(' ');
    let (verb, payload) = match rest.split_once(' ') {
        Some((verb, payload)) => (verb, payload.trim_start_matches(' ')),
        None => (rest, ""),
    };
    match verb {
        "INCLUDES" if payload.is_empty() => Some(RawDirective::Includes),
        "FUNCTIONS" if payload.is_empty() => Some(RawDirective::Functions),
        "END" if payload.is_empty() => Some(RawDirective::End),
        "BEGIN" => Some(RawDirective::Begin { payload }),
        _ => None,
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Split a comma-separated parameter list. A single trailing comma is
/// consumed silently; any other empty item is an error.
fn split_params(payload: &str, path: &str, line: usize) -> Result<Vec<String>, ParseError> {
    if payload.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut items: Vec<String> = payload.split(',').map(|p| p.trim().to_string()).collect();
    if items.last().is_some_and(|p| p.is_empty()) {
        items.pop();
    }
    if items.iter().any(|p| p.is_empty()) {
        return Err(ParseError::EmptyParameter {
            path: path.to_string(),
            line,
        });
    }
    Ok(items)
}

struct OpenRegion {
    begin: PragmaDirective,
    body: Vec<RegionLine>,
}

/// Parse `source_text` into its document model. Pure: identical input yields
/// an identical model.
pub fn parse(source_text: &str, path: &str) -> Result<AnnotatedSource, ParseError> {
    let ends_with_newline = source_text.ends_with('\n');
    let mut raw_lines: Vec<&str> = source_text.split('\n').collect();
    if ends_with_newline {
        raw_lines.pop();
    }
    if source_text.is_empty() {
        raw_lines.clear();
    }

    let mut elements: Vec<Element> = Vec::new();
    let mut open: Option<OpenRegion> = None;
    let mut includes_at: Option<usize> = None;
    let mut functions_at: Option<usize> = None;

    for (idx, raw) in raw_lines.iter().enumerate() {
        let line_no = idx + 1;
        let line = SourceLine::new(line_no, raw);
        let stripped = raw.trim_start_matches([' ', '\t']);

        match classify_directive(stripped) {
            Some(anchor @ (RawDirective::Includes | RawDirective::Functions)) => {
                let is_includes = matches!(anchor, RawDirective::Includes);
                let which = if is_includes { "INCLUDES" } else { "FUNCTIONS" };
                if open.is_some() {
                    return Err(ParseError::AnchorInRegion {
                        path: path.to_string(),
                        line: line_no,
                        which,
                    });
                }
                let slot = if is_includes {
                    &mut includes_at
                } else {
                    &mut functions_at
                };
                if slot.is_some() {
                    return Err(ParseError::DuplicateAnchor {
                        path: path.to_string(),
                        line: line_no,
                        which,
                    });
                }
                *slot = Some(line_no);
                elements.push(if is_includes {
                    Element::IncludesAnchor(line)
                } else {
                    Element::FunctionsAnchor(line)
                });
            }
            Some(RawDirective::Begin { payload }) => {
                if open.is_some() {
                    return Err(ParseError::NestedBegin {
                        path: path.to_string(),
                        line: line_no,
                    });
                }
                let mut items = payload.splitn(2, ',');
                let kernel = items.next().unwrap_or("").trim();
                if kernel.is_empty() {
                    return Err(ParseError::EmptyKernelName {
                        path: path.to_string(),
                        line: line_no,
                    });
                }
                if !is_identifier(kernel) {
                    return Err(ParseError::InvalidKernelName {
                        path: path.to_string(),
                        line: line_no,
                        name: kernel.to_string(),
                    });
                }
                let params = match items.next() {
                    Some(rest) => split_params(rest, path, line_no)?,
                    None => Vec::new(),
                };
                open = Some(OpenRegion {
                    begin: PragmaDirective {
                        kind: DirectiveKind::Begin,
                        line,
                        kernel_name: Some(kernel.to_string()),
                        params,
                    },
                    body: Vec::new(),
                });
            }
            Some(RawDirective::End) => match open.take() {
                Some(region) => {
                    let end = PragmaDirective {
                        kind: DirectiveKind::End,
                        line,
                        kernel_name: None,
                        params: Vec::new(),
                    };
                    let mut full_params = region.begin.params.clone();
                    for body_line in &region.body {
                        if let RegionLine::Continuation(d) = body_line {
                            full_params.extend(d.params.iter().cloned());
                        }
                    }
                    let indent = region.begin.line.indent.clone();
                    elements.push(Element::Region(PragmaRegion {
                        begin: region.begin,
                        end,
                        body: region.body,
                        full_params,
                        indent,
                    }));
                }
                None => {
                    return Err(ParseError::UnbalancedEnd {
                        path: path.to_string(),
                        line: line_no,
                    })
                }
            },
            None => match &mut open {
                Some(region) => {
                    if stripped.starts_with("///") {
                        let content = &stripped.trim_end()[3..];
                        let params = split_params(content, path, line_no)?;
                        region.body.push(RegionLine::Continuation(PragmaDirective {
                            kind: DirectiveKind::Continuation,
                            line,
                            kernel_name: None,
                            params,
                        }));
                    } else {
                        region.body.push(RegionLine::Fallback(line));
                    }
                }
                None => elements.push(Element::Passthrough(line)),
            },
        }
    }

    if let Some(region) = open {
        return Err(ParseError::UnclosedBegin {
            path: path.to_string(),
            line: region.begin.line.index,
        });
    }

    // With at least one region, both anchors must exist and precede it so
    // injected includes and helpers land before their uses.
    if let Some(first_region_line) = elements.iter().find_map(|e| match e {
        Element::Region(r) => Some(r.begin.line.index),
        _ => None,
    }) {
        for (slot, which) in [(includes_at, "INCLUDES"), (functions_at, "FUNCTIONS")] {
            match slot {
                None => {
                    return Err(ParseError::MissingAnchor {
                        path: path.to_string(),
                        line: first_region_line,
                        which,
                    })
                }
                Some(anchor_line) if anchor_line > first_region_line => {
                    return Err(ParseError::MissingAnchor {
                        path: path.to_string(),
                        line: anchor_line,
                        which,
                    })
                }
                Some(_) => {}
            }
        }
    }

    Ok(AnnotatedSource {
        path: path.to_string(),
        elements,
        ends_with_newline,
    })
}
