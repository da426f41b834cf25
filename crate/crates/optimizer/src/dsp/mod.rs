//! Signal-processing kernels shipped as building blocks: FFT-based
//! filtering and beamforming row products, each in a naive and an optimized
//! variant, with operation-count instrumentation.
//!
//! All kernels work on interleaved complex single-precision data and are
//! pure over their inputs. Verification oracles (direct sums in double
//! precision) live in [`oracles`] and share no code with the kernels they
//! check.
//!
//! # Operation counting
//!
//! An optional [`FlopCounter`] tallies the work one kernel call performs,
//! using one unit per scalar operation:
//!
//! * `mul` / `add` — one f32 multiply / add-or-subtract
//! * `fma` — one fused multiply-add (two flops in one operation)
//! * `load` / `store` — one f32 moved between memory and the arithmetic
//! * `perm` — one f32 moved by a pure data-reordering pass (layout
//!   deinterleave, bit-reversal)
//!
//! Counting never changes what a kernel computes; the counter only
//! accumulates totals alongside the same arithmetic.

pub mod beamform;
pub mod blocks;
pub mod fft;
pub mod filter;
pub mod oracles;

use thiserror::Error;

use crate::selector::OpCounts;

pub use beamform::{beamform_full, beamform_row_naive, beamform_row_optimized, Beamformer};
pub use blocks::{emit_candidate_stream, make_bbs_generators, make_bbs_generators_with_backend};
pub use fft::{fft, ifft, FftPlan};
pub use filter::{filter_apply, filter_direct, FilterConfig};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DspError {
    #[error("length {0} is not a power of two")]
    NonPowerOfTwo(usize),
    #[error("size mismatch: {left} vs {right} complex elements")]
    SizeMismatch { left: usize, right: usize },
    #[error("dimension mismatch: {context}")]
    DimMismatch { context: String },
}

/// Interleaved `(re, im)` single-precision samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexVec {
    data: Vec<f32>,
}

impl ComplexVec {
    pub fn zeros(n: usize) -> ComplexVec {
        ComplexVec {
            data: vec![0.0; 2 * n],
        }
    }

    /// Wrap an interleaved buffer; its length must be even.
    pub fn from_interleaved(data: Vec<f32>) -> ComplexVec {
        assert!(data.len() % 2 == 0, "interleaved storage must have even length");
        ComplexVec { data }
    }

    pub fn from_pairs(pairs: &[(f32, f32)]) -> ComplexVec {
        let mut data = Vec::with_capacity(pairs.len() * 2);
        for &(re, im) in pairs {
            data.push(re);
            data.push(im);
        }
        ComplexVec { data }
    }

    pub fn random(n: usize, rng: &mut impl rand::Rng) -> ComplexVec {
        let data = (0..2 * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        ComplexVec { data }
    }

    /// Number of complex elements.
    pub fn len(&self) -> usize {
        self.data.len() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn re(&self, i: usize) -> f32 {
        self.data[2 * i]
    }

    pub fn im(&self, i: usize) -> f32 {
        self.data[2 * i + 1]
    }

    pub fn set(&mut self, i: usize, re: f32, im: f32) {
        self.data[2 * i] = re;
        self.data[2 * i + 1] = im;
    }

    pub fn as_interleaved(&self) -> &[f32] {
        &self.data
    }

    pub(crate) fn as_interleaved_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn iter_pairs(&self) -> impl Iterator<Item = (f32, f32)> + '_ {
        self.data.chunks_exact(2).map(|c| (c[0], c[1]))
    }
}

/// Row-major interleaved complex single-precision matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMat {
    pub rows: usize,
    pub cols: usize,
    data: Vec<f32>,
}

impl ComplexMat {
    pub fn zeros(rows: usize, cols: usize) -> ComplexMat {
        ComplexMat {
            rows,
            cols,
            data: vec![0.0; 2 * rows * cols],
        }
    }

    pub fn identity(n: usize) -> ComplexMat {
        let mut m = ComplexMat::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0, 0.0);
        }
        m
    }

    pub fn random(rows: usize, cols: usize, rng: &mut impl rand::Rng) -> ComplexMat {
        let data = (0..2 * rows * cols)
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        ComplexMat { rows, cols, data }
    }

    pub fn at(&self, row: usize, col: usize) -> (f32, f32) {
        let base = 2 * (row * self.cols + col);
        (self.data[base], self.data[base + 1])
    }

    pub fn set(&mut self, row: usize, col: usize, re: f32, im: f32) {
        let base = 2 * (row * self.cols + col);
        self.data[base] = re;
        self.data[base + 1] = im;
    }

    /// Interleaved storage of one row (`2 * cols` floats).
    pub fn row_slice(&self, row: usize) -> &[f32] {
        &self.data[2 * row * self.cols..2 * (row + 1) * self.cols]
    }

    pub fn row(&self, row: usize) -> ComplexVec {
        ComplexVec::from_interleaved(self.row_slice(row).to_vec())
    }

    pub fn as_interleaved(&self) -> &[f32] {
        &self.data
    }
}

/// Problem dimensions for the beamforming kernels: `antennas` rows of the
/// precoding matrix, `flows` parallel streams, `resource_elements` columns
/// of the symbols matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BeamformDims {
    pub antennas: usize,
    pub flows: usize,
    pub resource_elements: usize,
}

impl BeamformDims {
    pub fn new(
        antennas: usize,
        flows: usize,
        resource_elements: usize,
    ) -> Result<BeamformDims, DspError> {
        if antennas < 1 || resource_elements < 1 {
            return Err(DspError::DimMismatch {
                context: format!(
                    "antennas ({antennas}) and resource elements ({resource_elements}) must be >= 1"
                ),
            });
        }
        Ok(BeamformDims {
            antennas,
            flows,
            resource_elements,
        })
    }
}

/// Accumulates instruction counts during an instrumented kernel run.
#[derive(Debug, Default, Clone)]
pub struct FlopCounter {
    counts: OpCounts,
}

impl FlopCounter {
    pub fn new() -> FlopCounter {
        FlopCounter::default()
    }

    pub fn counts(&self) -> OpCounts {
        self.counts
    }

    pub fn reset(&mut self) {
        self.counts = OpCounts::default();
    }

    pub fn record(&mut self, delta: OpCounts) {
        self.counts.merge(&delta);
    }
}

/// Record `delta` if a counter is attached.
pub(crate) fn record(counter: &mut Option<&mut FlopCounter>, delta: OpCounts) {
    if let Some(c) = counter.as_deref_mut() {
        c.record(delta);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_vec_round_trips_pairs() {
        let v = ComplexVec::from_pairs(&[(1.0, 2.0), (3.0, -4.0)]);
        assert_eq!(v.len(), 2);
        assert_eq!(v.re(1), 3.0);
        assert_eq!(v.im(1), -4.0);
        assert_eq!(v.as_interleaved(), &[1.0, 2.0, 3.0, -4.0]);
        assert_eq!(v.iter_pairs().collect::<Vec<_>>(), [(1.0, 2.0), (3.0, -4.0)]);
    }

    #[test]
    fn complex_mat_is_row_major_interleaved() {
        let mut m = ComplexMat::zeros(2, 3);
        m.set(1, 2, 5.0, 6.0);
        assert_eq!(m.at(1, 2), (5.0, 6.0));
        assert_eq!(m.as_interleaved().len(), 12);
        assert_eq!(m.row_slice(1), &[0.0, 0.0, 0.0, 0.0, 5.0, 6.0]);
    }

    #[test]
    fn beamform_dims_validation() {
        assert!(BeamformDims::new(64, 0, 60).is_ok());
        assert!(BeamformDims::new(0, 4, 60).is_err());
        assert!(BeamformDims::new(64, 4, 0).is_err());
    }

    #[test]
    fn flop_counter_accumulates() {
        let mut c = FlopCounter::new();
        c.record(OpCounts {
            mul: 3,
            ..Default::default()
        });
        c.record(OpCounts {
            mul: 2,
            fma: 1,
            ..Default::default()
        });
        assert_eq!(c.counts().mul, 5);
        assert_eq!(c.counts().fma, 1);
        c.reset();
        assert_eq!(c.counts(), OpCounts::default());
    }
}
