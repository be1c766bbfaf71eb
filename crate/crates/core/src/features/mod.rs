//! Force spectra and test-time image corruptions.

mod corrupt;
mod fft;

pub use corrupt::{corrupt, CorruptionKind, CorruptionSpec};
pub use fft::{fft_in_place, fft_magnitude, padded_spectrum, ForceSpectrum, FFT_LEN, SPECTRUM_BINS};
