use num_complex::Complex64;

use crate::error::{Error, Result};

pub const FFT_LEN: usize = 512;
pub const SPECTRUM_BINS: usize = FFT_LEN / 2;

/// Max-normalized magnitudes of the first half of the padded spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceSpectrum {
    pub bins: Vec<f64>,
}

/// In-place iterative radix-2 decimation-in-time transform,
/// `X_k = Σ x_t e^{-2πi kt/n}`.
pub fn fft_in_place(data: &mut [Complex64]) -> Result<()> {
    let n = data.len();
    if !n.is_power_of_two() {
        return Err(Error::InvalidInput(format!(
            "transform length {n} is not a power of two"
        )));
    }
    if n <= 1 {
        return Ok(());
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            data.swap(i, j);
        }
    }
    // twiddles for the largest stage; smaller stages stride through them
    let twiddles: Vec<Complex64> = (0..n / 2)
        .map(|k| Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * k as f64 / n as f64))
        .collect();
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let stride = n / len;
        for chunk in data.chunks_exact_mut(len) {
            let (lo, hi) = chunk.split_at_mut(half);
            for k in 0..half {
                let t = twiddles[k * stride] * hi[k];
                hi[k] = lo[k] - t;
                lo[k] += t;
            }
        }
        len *= 2;
    }
    Ok(())
}

/// Full 512-point transform of `signal` zero-padded at the end.
pub fn padded_spectrum(signal: &[f64]) -> Result<Vec<Complex64>> {
    if signal.is_empty() || signal.len() > FFT_LEN {
        return Err(Error::InvalidInput(format!(
            "spectrum input needs 1..={FFT_LEN} samples, got {}",
            signal.len()
        )));
    }
    if signal.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite sample in force signal".into()));
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); FFT_LEN];
    for (b, &v) in buf.iter_mut().zip(signal) {
        b.re = v;
    }
    fft_in_place(&mut buf)?;
    Ok(buf)
}

pub fn fft_magnitude(signal: &[f64]) -> Result<ForceSpectrum> {
    let spec = padded_spectrum(signal)?;
    let mut bins: Vec<f64> = spec[..SPECTRUM_BINS].iter().map(|c| c.norm()).collect();
    let max = bins.iter().cloned().fold(0.0, f64::max);
    if max > 0.0 {
        for b in &mut bins {
            *b /= max;
        }
    }
    Ok(ForceSpectrum { bins })
}
