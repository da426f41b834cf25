//! Independent verification oracles: direct double-precision sums, O(n²),
//! sharing no code with the fast kernels they check.

use std::f64::consts::PI;

use super::{ComplexMat, ComplexVec, DspError};

/// Direct DFT, `X[k] = Σ_j x[j]·exp(−2πi·jk/n)`, any length >= 1.
/// Computed in double precision, rounded to single on output.
pub fn dft_oracle(x: &ComplexVec) -> ComplexVec {
    let n = x.len();
    let mut out = ComplexVec::zeros(n);
    for k in 0..n {
        let mut acc_re = 0.0f64;
        let mut acc_im = 0.0f64;
        for j in 0..n {
            let angle = -2.0 * PI * ((j * k) % n) as f64 / n as f64;
            let (sin, cos) = angle.sin_cos();
            let re = x.re(j) as f64;
            let im = x.im(j) as f64;
            acc_re += re * cos - im * sin;
            acc_im += re * sin + im * cos;
        }
        out.set(k, acc_re as f32, acc_im as f32);
    }
    out
}

/// Direct circular convolution, `y[k] = Σ_j s[j]·h[(k−j) mod n]`.
pub fn circular_convolve_oracle(s: &ComplexVec, h: &ComplexVec) -> Result<ComplexVec, DspError> {
    if s.len() != h.len() {
        return Err(DspError::SizeMismatch {
            left: s.len(),
            right: h.len(),
        });
    }
    let n = s.len();
    let mut out = ComplexVec::zeros(n);
    for k in 0..n {
        let mut acc_re = 0.0f64;
        let mut acc_im = 0.0f64;
        for j in 0..n {
            let m = (k + n - j) % n;
            let (sr, si) = (s.re(j) as f64, s.im(j) as f64);
            let (hr, hi) = (h.re(m) as f64, h.im(m) as f64);
            acc_re += sr * hr - si * hi;
            acc_im += sr * hi + si * hr;
        }
        out.set(k, acc_re as f32, acc_im as f32);
    }
    out
}

/// Direct beamforming row product, `R[j] = Σ_k w[k]·S[k][j]`, in double
/// precision.
pub fn beamform_row_oracle(w: &ComplexVec, s: &ComplexMat) -> Result<ComplexVec, DspError> {
    if w.len() != s.rows {
        return Err(DspError::DimMismatch {
            context: format!("weights length {} vs {} matrix rows", w.len(), s.rows),
        });
    }
    let mut out = ComplexVec::zeros(s.cols);
    for j in 0..s.cols {
        let mut acc_re = 0.0f64;
        let mut acc_im = 0.0f64;
        for k in 0..s.rows {
            let (wr, wi) = (w.re(k) as f64, w.im(k) as f64);
            let (sr, si) = s.at(k, j);
            let (sr, si) = (sr as f64, si as f64);
            acc_re += wr * sr - wi * si;
            acc_im += wr * si + wi * sr;
        }
        out.set(j, acc_re as f32, acc_im as f32);
    }
    Ok(out)
}
