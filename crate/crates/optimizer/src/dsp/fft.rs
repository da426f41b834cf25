//! Iterative radix-2 decimation-in-time FFT with a precomputed twiddle
//! table and bit-reversal permutation.
//!
//! Conventions: the forward transform is unnormalized,
//! `X[k] = Σ_j x[j]·exp(−2πi·jk/n)`; the inverse includes the `1/n` factor,
//! so `ifft(fft(x)) == x` up to rounding.

use std::f64::consts::PI;

use super::{record, ComplexVec, DspError, FlopCounter};
use crate::selector::OpCounts;

/// Precomputed transform state for one size; reusable across calls.
#[derive(Debug, Clone)]
pub struct FftPlan {
    n: usize,
    log2n: u32,
    /// `exp(−2πi·k/n)` for `k < n/2`, interleaved, rounded from f64.
    twiddles: Vec<f32>,
}

impl FftPlan {
    pub fn new(n: usize) -> Result<FftPlan, DspError> {
        if n == 0 || !n.is_power_of_two() {
            return Err(DspError::NonPowerOfTwo(n));
        }
        let mut twiddles = Vec::with_capacity(n.max(2));
        for k in 0..n / 2 {
            let angle = -2.0 * PI * k as f64 / n as f64;
            twiddles.push(angle.cos() as f32);
            twiddles.push(angle.sin() as f32);
        }
        Ok(FftPlan {
            n,
            log2n: n.trailing_zeros(),
            twiddles,
        })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// Unnormalized forward transform.
    pub fn forward(
        &self,
        x: &ComplexVec,
        counter: Option<&mut FlopCounter>,
    ) -> Result<ComplexVec, DspError> {
        self.run(x, false, counter)
    }

    /// Inverse transform including the `1/n` factor.
    pub fn inverse(
        &self,
        x: &ComplexVec,
        counter: Option<&mut FlopCounter>,
    ) -> Result<ComplexVec, DspError> {
        self.run(x, true, counter)
    }

    fn run(
        &self,
        x: &ComplexVec,
        invert: bool,
        mut counter: Option<&mut FlopCounter>,
    ) -> Result<ComplexVec, DspError> {
        if x.len() != self.n {
            return Err(DspError::SizeMismatch {
                left: x.len(),
                right: self.n,
            });
        }
        let mut out = x.clone();
        let data = out.as_interleaved_mut();
        let n = self.n;

        let swaps = bit_reverse_permute(data, n);

        for stage in 0..self.log2n {
            let len = 1usize << (stage + 1);
            let half = len / 2;
            let stride = n / len;
            for start in (0..n).step_by(len) {
                for i in 0..half {
                    let wr = self.twiddles[2 * i * stride];
                    let wi = {
                        let wi = self.twiddles[2 * i * stride + 1];
                        if invert {
                            -wi
                        } else {
                            wi
                        }
                    };
                    let a = start + i;
                    let b = start + half + i;
                    let (ar, ai) = (data[2 * a], data[2 * a + 1]);
                    let (br, bi) = (data[2 * b], data[2 * b + 1]);
                    // t = w * b: 4 mul + 2 add
                    let tr = wr * br - wi * bi;
                    let ti = wr * bi + wi * br;
                    // butterfly: 4 add
                    data[2 * a] = ar + tr;
                    data[2 * a + 1] = ai + ti;
                    data[2 * b] = ar - tr;
                    data[2 * b + 1] = ai - ti;
                }
            }
        }

        let butterflies = (n as u64 / 2) * self.log2n as u64;
        let mut counts = OpCounts {
            mul: 4 * butterflies,
            add: 6 * butterflies,
            load: 6 * butterflies,
            store: 4 * butterflies,
            perm: 4 * swaps,
            fma: 0,
        };

        if invert {
            let scale = 1.0 / n as f32;
            for v in data.iter_mut() {
                *v *= scale;
            }
            counts.mul += 2 * n as u64;
            counts.load += 2 * n as u64;
            counts.store += 2 * n as u64;
        }

        record(&mut counter, counts);
        Ok(out)
    }
}

/// In-place bit-reversal reordering of `n` interleaved complex elements.
/// Returns the number of swaps performed.
fn bit_reverse_permute(data: &mut [f32], n: usize) -> u64 {
    if n <= 1 {
        return 0;
    }
    let bits = n.trailing_zeros();
    let mut swaps = 0;
    for i in 0..n {
        let j = (i.reverse_bits() >> (usize::BITS - bits)) as usize;
        if i < j {
            data.swap(2 * i, 2 * j);
            data.swap(2 * i + 1, 2 * j + 1);
            swaps += 1;
        }
    }
    swaps
}

/// One-shot forward FFT (builds a throwaway plan).
pub fn fft(x: &ComplexVec) -> Result<ComplexVec, DspError> {
    FftPlan::new(x.len())?.forward(x, None)
}

/// One-shot inverse FFT.
pub fn ifft(x: &ComplexVec) -> Result<ComplexVec, DspError> {
    FftPlan::new(x.len())?.inverse(x, None)
}
