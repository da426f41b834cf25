//! Frequency-domain filtering: `ifft(spectrum_mul(fft(s)))` with a
//! precomputed filter spectrum, plus the direct time-domain circular
//! convolution used as the naive building-block variant.

use super::{record, ComplexVec, DspError, FftPlan, FlopCounter};
use crate::selector::OpCounts;

/// Filter state: the FFT of the filter sequence and a reusable plan.
#[derive(Debug, Clone)]
pub struct FilterConfig {
    spectrum: ComplexVec,
    plan: FftPlan,
}

impl FilterConfig {
    /// Build from an already-transformed filter spectrum.
    pub fn from_spectrum(spectrum: ComplexVec) -> Result<FilterConfig, DspError> {
        let plan = FftPlan::new(spectrum.len())?;
        Ok(FilterConfig { spectrum, plan })
    }

    /// Build from time-domain taps; the spectrum is their FFT.
    pub fn from_taps(taps: &ComplexVec) -> Result<FilterConfig, DspError> {
        let plan = FftPlan::new(taps.len())?;
        let spectrum = plan.forward(taps, None)?;
        Ok(FilterConfig { spectrum, plan })
    }

    pub fn size(&self) -> usize {
        self.spectrum.len()
    }

    pub fn spectrum(&self) -> &ComplexVec {
        &self.spectrum
    }
}

/// Apply the filter in the frequency domain: forward FFT, pointwise
/// multiplication by the filter spectrum, inverse FFT.
pub fn filter_apply(
    s: &ComplexVec,
    cfg: &FilterConfig,
    mut counter: Option<&mut FlopCounter>,
) -> Result<ComplexVec, DspError> {
    if s.len() != cfg.size() {
        return Err(DspError::SizeMismatch {
            left: s.len(),
            right: cfg.size(),
        });
    }
    let n = s.len();
    let mut spectrum = cfg.plan.forward(s, counter.as_deref_mut())?;
    {
        let data = spectrum.as_interleaved_mut();
        let h = cfg.spectrum.as_interleaved();
        for i in 0..n {
            let (ar, ai) = (data[2 * i], data[2 * i + 1]);
            let (hr, hi) = (h[2 * i], h[2 * i + 1]);
            data[2 * i] = ar * hr - ai * hi;
            data[2 * i + 1] = ar * hi + ai * hr;
        }
    }
    // Pointwise complex multiply: 4 mul + 2 add, 4 loads, 2 stores each.
    record(
        &mut counter,
        OpCounts {
            mul: 4 * n as u64,
            add: 2 * n as u64,
            load: 4 * n as u64,
            store: 2 * n as u64,
            ..Default::default()
        },
    );
    cfg.plan.inverse(&spectrum, counter)
}

/// Direct time-domain circular convolution in single precision; the naive
/// counterpart of [`filter_apply`].
pub fn filter_direct(
    s: &ComplexVec,
    taps: &ComplexVec,
    mut counter: Option<&mut FlopCounter>,
) -> Result<ComplexVec, DspError> {
    if s.len() != taps.len() {
        return Err(DspError::SizeMismatch {
            left: s.len(),
            right: taps.len(),
        });
    }
    let n = s.len();
    let mut out = ComplexVec::zeros(n);
    for k in 0..n {
        let mut acc_re = 0.0f32;
        let mut acc_im = 0.0f32;
        for j in 0..n {
            let m = (k + n - j) % n;
            let (sr, si) = (s.re(j), s.im(j));
            let (hr, hi) = (taps.re(m), taps.im(m));
            acc_re += sr * hr - si * hi;
            acc_im += sr * hi + si * hr;
        }
        out.set(k, acc_re, acc_im);
    }
    let nn = (n * n) as u64;
    record(
        &mut counter,
        OpCounts {
            mul: 4 * nn,
            add: 4 * nn,
            load: 4 * nn,
            store: 2 * n as u64,
            ..Default::default()
        },
    );
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::oracles::circular_convolve_oracle;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn max_abs_diff(a: &ComplexVec, b: &ComplexVec) -> f32 {
        a.as_interleaved()
            .iter()
            .zip(b.as_interleaved())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f32::max)
    }

    #[test]
    fn all_ones_spectrum_is_identity_filter() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let s = ComplexVec::random(2048, &mut rng);
        let ones = ComplexVec::from_pairs(&vec![(1.0, 0.0); 2048]);
        let cfg = FilterConfig::from_spectrum(ones).unwrap();
        let out = filter_apply(&s, &cfg, None).unwrap();
        assert!(max_abs_diff(&out, &s) < 1e-4);
    }

    #[test]
    fn matches_circular_convolution_oracle_small_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for n in [8usize, 16, 32, 64] {
            let s = ComplexVec::random(n, &mut rng);
            let taps = ComplexVec::random(n, &mut rng);
            let cfg = FilterConfig::from_taps(&taps).unwrap();
            let fast = filter_apply(&s, &cfg, None).unwrap();
            let slow = circular_convolve_oracle(&s, &taps).unwrap();
            assert!(
                max_abs_diff(&fast, &slow) < 1e-4,
                "n={n}: {}",
                max_abs_diff(&fast, &slow)
            );
        }
    }

    #[test]
    fn direct_kernel_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let s = ComplexVec::random(16, &mut rng);
        let taps = ComplexVec::random(16, &mut rng);
        let direct = filter_direct(&s, &taps, None).unwrap();
        let slow = circular_convolve_oracle(&s, &taps).unwrap();
        assert!(max_abs_diff(&direct, &slow) < 1e-4);
    }

    #[test]
    fn paper_scale_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let s = ComplexVec::random(2048, &mut rng);
        let taps = ComplexVec::random(2048, &mut rng);
        let cfg = FilterConfig::from_taps(&taps).unwrap();
        let out = filter_apply(&s, &cfg, None).unwrap();
        assert_eq!(out.len(), 2048);
        assert!(out.as_interleaved().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn linearity_within_tolerance() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let n = 256;
        let taps = ComplexVec::random(n, &mut rng);
        let cfg = FilterConfig::from_taps(&taps).unwrap();
        for _ in 0..20 {
            let s1 = ComplexVec::random(n, &mut rng);
            let s2 = ComplexVec::random(n, &mut rng);
            let alpha: f32 = rng.gen_range(-2.0..2.0);
            let combined = ComplexVec::from_interleaved(
                s1.as_interleaved()
                    .iter()
                    .zip(s2.as_interleaved())
                    .map(|(a, b)| alpha * a + b)
                    .collect(),
            );
            let lhs = filter_apply(&combined, &cfg, None).unwrap();
            let f1 = filter_apply(&s1, &cfg, None).unwrap();
            let f2 = filter_apply(&s2, &cfg, None).unwrap();
            let rhs = ComplexVec::from_interleaved(
                f1.as_interleaved()
                    .iter()
                    .zip(f2.as_interleaved())
                    .map(|(a, b)| alpha * a + b)
                    .collect(),
            );
            assert!(max_abs_diff(&lhs, &rhs) < 1e-4);
        }
    }

    #[test]
    fn size_mismatch_is_rejected() {
        let cfg = FilterConfig::from_spectrum(ComplexVec::zeros(8)).unwrap();
        let s = ComplexVec::zeros(16);
        assert!(matches!(
            filter_apply(&s, &cfg, None),
            Err(DspError::SizeMismatch { .. })
        ));
        assert!(filter_direct(&s, &ComplexVec::zeros(8), None).is_err());
    }

    #[test]
    fn non_power_of_two_spectrum_is_rejected() {
        assert!(FilterConfig::from_spectrum(ComplexVec::zeros(6)).is_err());
    }

    #[test]
    fn counts_match_formulas() {
        // filter_apply(n) = fft + pointwise + ifft;
        // filter_direct(n) = 4n^2 mul, 4n^2 add, 4n^2 load, 2n store.
        let n = 16usize;
        let log2n = 4u64;
        let s = ComplexVec::zeros(n);
        let taps = ComplexVec::zeros(n);
        let cfg = FilterConfig::from_taps(&taps).unwrap();

        let mut counter = FlopCounter::new();
        filter_apply(&s, &cfg, Some(&mut counter)).unwrap();
        let c = counter.counts();
        let nn = n as u64;
        let butterflies = nn / 2 * log2n;
        assert_eq!(c.mul, 2 * 4 * butterflies + 2 * nn + 4 * nn);
        assert_eq!(c.add, 2 * 6 * butterflies + 2 * nn);
        assert_eq!(c.fma, 0);

        let mut counter = FlopCounter::new();
        filter_direct(&s, &taps, Some(&mut counter)).unwrap();
        let c = counter.counts();
        assert_eq!(c.mul, 4 * nn * nn);
        assert_eq!(c.add, 4 * nn * nn);
        assert_eq!(c.load, 4 * nn * nn);
        assert_eq!(c.store, 2 * nn);
        assert_eq!(c.perm, 0);
    }

    #[test]
    fn counting_does_not_change_results() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let s = ComplexVec::random(64, &mut rng);
        let taps = ComplexVec::random(64, &mut rng);
        let cfg = FilterConfig::from_taps(&taps).unwrap();
        let mut counter = FlopCounter::new();
        let with = filter_apply(&s, &cfg, Some(&mut counter)).unwrap();
        let without = filter_apply(&s, &cfg, None).unwrap();
        assert_eq!(with, without);
    }
}
