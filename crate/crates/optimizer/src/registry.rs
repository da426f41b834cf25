//! Discovery and invocation of building-block generator executables.
//!
//! Generators live as executable files directly inside a `bbs/` directory.
//! The optimizer runs `bbs/<kernel>` with the region's parameters as plain
//! argv (no shell), sets `OPTIMIZER_ARCH` to the profile name, and parses
//! standard output in the candidate stream format:
//!
//! ```text
//! === CANDIDATE <label> ===
//! ;; ops fma=<n> mul=<n> add=<n> perm=<n> load=<n> store=<n>
//! --- INCLUDES ---
//! <zero or more verbatim lines>
//! --- FUNCTIONS ---
//! <zero or more verbatim lines>
//! --- BODY ---
//! <one or more verbatim lines>
//! ```
//!
//! repeated once per candidate. Exit status 0 means success; standard error
//! is passed through to the optimizer's own diagnostics verbatim.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::selector::{OpClass, OpCounts};

/// Default wall-clock budget for one generator invocation.
pub const DEFAULT_GENERATOR_TIMEOUT: Duration = Duration::from_secs(30);

/// A discovered generator executable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuildingBlockId {
    /// Base filename of the executable; the name used in `PRAGMA BEGIN`.
    pub name: String,
    pub executable_path: PathBuf,
}

/// Code fragment produced by a generator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedFragment {
    pub includes: Vec<String>,
    pub functions: Vec<String>,
    pub body: Vec<String>,
}

/// One candidate implementation for a region.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    /// Unique within one generator invocation.
    pub label: String,
    pub fragment: GeneratedFragment,
    /// Instruction counts declared by the generator for one region execution.
    pub op_counts: OpCounts,
}

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("building-block directory `{0}` does not exist or is not a directory")]
    MissingBbsDir(PathBuf),
    #[error("unknown kernel `{0}`: no such executable in the building-block directory")]
    UnknownKernel(String),
    #[error("generator `{name}` failed with {status}{}", render_stderr(.stderr))]
    GeneratorFailed {
        name: String,
        status: String,
        stderr: String,
    },
    #[error("generator `{name}` produced malformed output at stream line {line}: {reason}")]
    MalformedOutput {
        name: String,
        line: usize,
        reason: String,
    },
    #[error("generator `{0}` exited successfully but emitted zero candidates")]
    NoCandidates(String),
    #[error("generator `{name}` exceeded the {}s time budget", .budget.as_secs())]
    GeneratorTimeout { name: String, budget: Duration },
    #[error("failed to run generator `{name}`: {source}")]
    SpawnFailed {
        name: String,
        #[source]
        source: std::io::Error,
    },
}

fn render_stderr(stderr: &str) -> String {
    if stderr.trim().is_empty() {
        String::new()
    } else {
        format!("; stderr:\n{}", stderr.trim_end())
    }
}

/// The set of generators found in one `bbs/` directory.
#[derive(Debug, Default)]
pub struct BlockRegistry {
    blocks: BTreeMap<String, BuildingBlockId>,
    /// Non-fatal findings from loading (e.g. files skipped as non-executable).
    pub warnings: Vec<String>,
}

/// Result of one generator invocation.
#[derive(Debug)]
pub struct Invocation {
    pub candidates: Vec<Candidate>,
    /// Captured standard error, to be forwarded verbatim.
    pub stderr: String,
}

impl BlockRegistry {
    /// Scan `bbs_dir` for executable regular files (no recursion).
    pub fn load(bbs_dir: &Path) -> Result<BlockRegistry, RegistryError> {
        if !bbs_dir.is_dir() {
            return Err(RegistryError::MissingBbsDir(bbs_dir.to_path_buf()));
        }
        let mut registry = BlockRegistry::default();
        let entries =
            std::fs::read_dir(bbs_dir).map_err(|_| RegistryError::MissingBbsDir(bbs_dir.to_path_buf()))?;
        for entry in entries.flatten() {
            let path = entry.path();
            if !path.is_file() {
                continue;
            }
            let Some(name) = path.file_name().and_then(|n| n.to_str()).map(String::from) else {
                registry
                    .warnings
                    .push(format!("skipping non-UTF-8 filename {:?}", path));
                continue;
            };
            if !is_executable(&path) {
                registry
                    .warnings
                    .push(format!("skipping non-executable file {}", path.display()));
                continue;
            }
            registry.blocks.insert(
                name.clone(),
                BuildingBlockId {
                    name,
                    executable_path: path,
                },
            );
        }
        Ok(registry)
    }

    pub fn get(&self, name: &str) -> Option<&BuildingBlockId> {
        self.blocks.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.blocks.keys().map(|s| s.as_str())
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Run the named generator with `params` as its exact argument vector and
    /// `arch` exported as `OPTIMIZER_ARCH`.
    pub fn invoke(
        &self,
        kernel: &str,
        params: &[String],
        arch: &str,
        timeout: Duration,
    ) -> Result<Invocation, RegistryError> {
        let block = self
            .get(kernel)
            .ok_or_else(|| RegistryError::UnknownKernel(kernel.to_string()))?;
        invoke_block(block, params, arch, timeout)
    }
}

/// Run one generator executable. See [`BlockRegistry::invoke`].
pub fn invoke_block(
    block: &BuildingBlockId,
    params: &[String],
    arch: &str,
    timeout: Duration,
) -> Result<Invocation, RegistryError> {
    let name = block.name.clone();
    let mut child = Command::new(&block.executable_path)
        .args(params)
        .env("OPTIMIZER_ARCH", arch)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|source| RegistryError::SpawnFailed {
            name: name.clone(),
            source,
        })?;

    // Drain the pipes from threads so a chatty generator cannot deadlock
    // against a full pipe buffer while we poll for exit.
    let stdout_pipe = child.stdout.take().expect("stdout piped");
    let stderr_pipe = child.stderr.take().expect("stderr piped");
    let stdout_thread = std::thread::spawn(move || read_all(stdout_pipe));
    let stderr_thread = std::thread::spawn(move || read_all(stderr_pipe));

    let deadline = Instant::now() + timeout;
    let status = loop {
        match child.try_wait() {
            Ok(Some(status)) => break status,
            Ok(None) => {
                if Instant::now() >= deadline {
                    let _ = child.kill();
                    let _ = child.wait();
                    // Join the readers so the threads do not outlive us.
                    let _ = stdout_thread.join();
                    let _ = stderr_thread.join();
                    return Err(RegistryError::GeneratorTimeout {
                        name,
                        budget: timeout,
                    });
                }
                std::thread::sleep(Duration::from_millis(2));
            }
            Err(source) => {
                return Err(RegistryError::SpawnFailed { name, source });
            }
        }
    };

    let stdout = stdout_thread.join().unwrap_or_default();
    let stderr = String::from_utf8_lossy(&stderr_thread.join().unwrap_or_default()).into_owned();

    if !status.success() {
        return Err(RegistryError::GeneratorFailed {
            name,
            status: status
                .code()
                .map(|c| format!("exit status {c}"))
                .unwrap_or_else(|| status.to_string()),
            stderr,
        });
    }

    let candidates = parse_candidate_stream(&String::from_utf8_lossy(&stdout), &name)?;
    if candidates.is_empty() {
        return Err(RegistryError::NoCandidates(name));
    }
    Ok(Invocation { candidates, stderr })
}

fn read_all(mut pipe: impl Read) -> Vec<u8> {
    let mut buf = Vec::new();
    let _ = pipe.read_to_end(&mut buf);
    buf
}

#[cfg(unix)]
fn is_executable(path: &Path) -> bool {
    use std::os::unix::fs::PermissionsExt;
    std::fs::metadata(path)
        .map(|m| m.permissions().mode() & 0o111 != 0)
        .unwrap_or(false)
}

#[cfg(not(unix))]
fn is_executable(_path: &Path) -> bool {
    true
}

const CANDIDATE_PREFIX: &str = "=== CANDIDATE ";
const CANDIDATE_SUFFIX: &str = " ===";
const OPS_PREFIX: &str = ";; ops ";
const INCLUDES_MARKER: &str = "--- INCLUDES ---";
const FUNCTIONS_MARKER: &str = "--- FUNCTIONS ---";
const BODY_MARKER: &str = "--- BODY ---";

#[derive(Debug, Clone, Copy, PartialEq)]
enum StreamState {
    ExpectOps,
    ExpectIncludesMarker,
    InIncludes,
    InFunctions,
    InBody,
}

/// Parse the candidate stream format. `name` is the generator name, used in
/// diagnostics only.
pub fn parse_candidate_stream(text: &str, name: &str) -> Result<Vec<Candidate>, RegistryError> {
    let malformed = |line: usize, reason: String| RegistryError::MalformedOutput {
        name: name.to_string(),
        line,
        reason,
    };

    struct Partial {
        label: String,
        op_counts: OpCounts,
        fragment: GeneratedFragment,
        state: StreamState,
    }

    let mut candidates: Vec<Candidate> = Vec::new();
    let mut current: Option<Partial> = None;

    let finish = |part: Partial,
                  line_no: usize,
                  candidates: &mut Vec<Candidate>|
     -> Result<(), RegistryError> {
        if part.state != StreamState::InBody {
            return Err(malformed(
                line_no,
                format!(
                    "candidate `{}` ends before its `{BODY_MARKER}` section",
                    part.label
                ),
            ));
        }
        if part.fragment.body.is_empty() {
            return Err(malformed(
                line_no,
                format!("candidate `{}` has an empty body", part.label),
            ));
        }
        candidates.push(Candidate {
            label: part.label,
            fragment: part.fragment,
            op_counts: part.op_counts,
        });
        Ok(())
    };

    let is_marker =
        |raw: &str| raw == INCLUDES_MARKER || raw == FUNCTIONS_MARKER || raw == BODY_MARKER;

    let mut line_no = 0;
    for raw in text.lines() {
        line_no += 1;
        if let Some(label) = raw
            .strip_prefix(CANDIDATE_PREFIX)
            .and_then(|r| r.strip_suffix(CANDIDATE_SUFFIX))
        {
            if let Some(part) = current.take() {
                finish(part, line_no, &mut candidates)?;
            }
            if label.is_empty() || label.contains(' ') {
                return Err(malformed(line_no, format!("invalid candidate label `{label}`")));
            }
            if candidates.iter().any(|c| c.label == label) {
                return Err(malformed(line_no, format!("duplicate candidate label `{label}`")));
            }
            current = Some(Partial {
                label: label.to_string(),
                op_counts: OpCounts::default(),
                fragment: GeneratedFragment {
                    includes: Vec::new(),
                    functions: Vec::new(),
                    body: Vec::new(),
                },
                state: StreamState::ExpectOps,
            });
            continue;
        }

        let Some(part) = current.as_mut() else {
            return Err(malformed(
                line_no,
                format!("expected `{CANDIDATE_PREFIX}<label>{CANDIDATE_SUFFIX}`"),
            ));
        };

        match part.state {
            StreamState::ExpectOps => {
                part.op_counts = raw
                    .strip_prefix(OPS_PREFIX)
                    .and_then(parse_ops_line)
                    .ok_or_else(|| {
                        malformed(
                            line_no,
                            format!(
                                "expected `{OPS_PREFIX}fma=<n> mul=<n> add=<n> perm=<n> load=<n> store=<n>`"
                            ),
                        )
                    })?;
                part.state = StreamState::ExpectIncludesMarker;
            }
            StreamState::ExpectIncludesMarker => {
                if raw != INCLUDES_MARKER {
                    return Err(malformed(line_no, format!("expected `{INCLUDES_MARKER}`")));
                }
                part.state = StreamState::InIncludes;
            }
            StreamState::InIncludes if raw == FUNCTIONS_MARKER => {
                part.state = StreamState::InFunctions;
            }
            StreamState::InFunctions if raw == BODY_MARKER => {
                part.state = StreamState::InBody;
            }
            StreamState::InIncludes | StreamState::InFunctions | StreamState::InBody => {
                if is_marker(raw) {
                    return Err(malformed(line_no, format!("unexpected section marker `{raw}`")));
                }
                if raw.starts_with(OPS_PREFIX) {
                    return Err(malformed(
                        line_no,
                        "unexpected ops line inside a section".to_string(),
                    ));
                }
                let dest = match part.state {
                    StreamState::InIncludes => &mut part.fragment.includes,
                    StreamState::InFunctions => &mut part.fragment.functions,
                    _ => &mut part.fragment.body,
                };
                dest.push(raw.to_string());
            }
        }
    }

    if let Some(part) = current.take() {
        finish(part, line_no + 1, &mut candidates)?;
    }
    Ok(candidates)
}

/// Parse `fma=<n> mul=<n> add=<n> perm=<n> load=<n> store=<n>`, exactly in
/// that order with single spaces.
fn parse_ops_line(rest: &str) -> Option<OpCounts> {
    let mut counts = OpCounts::default();
    let mut fields = rest.split(' ');
    for class in OpClass::ALL {
        let field = fields.next()?;
        let value = field.strip_prefix(class.as_str())?.strip_prefix('=')?;
        if value.is_empty() || !value.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        *counts.get_mut(class) = value.parse().ok()?;
    }
    if fields.next().is_some() {
        return None;
    }
    Some(counts)
}
