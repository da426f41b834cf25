//! Pragma-driven source-to-source optimizer for C/C++ hot spots, together
//! with the signal-processing building blocks it ships with.
//!
//! The pipeline: [`pragma`] parses `/// PRAGMA` annotations out of a source
//! file, [`registry`] runs building-block generator executables from a `bbs/`
//! directory to obtain candidate code fragments, [`selector`] ranks the
//! candidates with an instruction-throughput cost model for a named target
//! architecture, and [`emitter`] splices the winner back into the source
//! under an `#ifdef` guard so the original code remains compilable.
//!
//! [`dsp`] holds the shipped kernels (FFT-based filtering, beamforming row
//! products) in oracle and optimized variants with operation-count
//! instrumentation, and [`bench`] is a small median-timing harness for
//! comparing them.
//!
//! The `optimizer` binary is a thin front end over [`cli`]; every capability
//! is also demonstrated by a runnable example under `examples/`.

pub mod bench;
pub mod cli;
pub mod dsp;
pub mod emitter;
pub mod pragma;
pub mod registry;
pub mod selector;
