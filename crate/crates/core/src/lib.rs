//! Baseband-to-baseband model of a millimeter-wave OFDM link.
//!
//! The crate mirrors the signal path of a beam-steered 29.8 GHz bench link built
//! around a direct-RF data converter platform:
//!
//! * [`frame`] assembles 480-sample OFDM bursts (short/long training plus two
//!   payload symbols of Gray-coded QPSK) at the 30.72 MHz baseband rate,
//! * [`frontend`] carries them through the digital up-conversion chain:
//!   10x root-raised-cosine interpolation to 307.2 MHz, 16-bit quantization at
//!   the converter boundary, and a 16x resampling stage to the 4.9152 GHz
//!   converter rate (the matching down-conversion runs the same blocks in
//!   reverse),
//! * [`channel`] applies a free-space link with 4x4 phased-array beamforming on
//!   both ends, a calibrated cable/conversion power budget, carrier frequency
//!   offset, and additive white Gaussian noise,
//! * [`receiver`] detects the burst, recovers timing and frequency, estimates
//!   the channel over the long training symbols, equalizes, and demaps bits,
//! * [`harness`] wires the whole chain into reproducible scenario runs,
//!   parameter sweeps, and stage dumps.
//!
//! All signal processing is done on complex baseband samples; carrier hops to
//! the 3.8 GHz IF and the 29.8 GHz RF are tracked as frequency bookkeeping in
//! the link budget rather than as sample-rate changes.

use num_complex::Complex64;

pub mod channel;
mod fft;
pub mod frame;
pub mod frontend;
pub mod harness;
pub mod iqfile;
pub mod layout;
pub mod modem;
pub mod receiver;
pub mod units;

/// Errors shared across the signal chain.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter is outside its documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// The input signal cannot be processed (empty, all-zero, wrong rate).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    /// Fewer samples are available than an operation requires.
    #[error("truncated frame: needed {needed} samples, {available} available")]
    TruncatedFrame { needed: usize, available: usize },
    /// An estimator could not produce a usable value.
    #[error("estimation failed: {0}")]
    EstimationFailed(String),
    /// A channel gain is too small to divide by.
    #[error("equalization singular at bin {bin}")]
    EqualizationSingular { bin: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Contiguous complex samples tagged with the rate they were produced at.
///
/// Every processing stage checks the tag instead of trusting the caller, so a
/// buffer handed to the wrong stage fails loudly rather than silently
/// processing at the wrong rate.
#[derive(Debug, Clone, PartialEq)]
pub struct IqBuffer {
    pub samples: Vec<Complex64>,
    pub sample_rate_hz: f64,
}

impl IqBuffer {
    pub fn new(samples: Vec<Complex64>, sample_rate_hz: f64) -> Self {
        Self {
            samples,
            sample_rate_hz,
        }
    }

    pub fn zeros(len: usize, sample_rate_hz: f64) -> Self {
        Self::new(vec![Complex64::new(0.0, 0.0); len], sample_rate_hz)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean of |x|^2 over the buffer; 0.0 for an empty buffer.
    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }

    /// Root-mean-square magnitude.
    pub fn rms(&self) -> f64 {
        self.mean_power().sqrt()
    }

    pub(crate) fn expect_rate(&self, rate_hz: f64, stage: &str) -> Result<()> {
        if (self.sample_rate_hz - rate_hz).abs() > 1e-3 {
            return Err(Error::DegenerateInput(format!(
                "{stage} expects {rate_hz} Hz samples, got {} Hz",
                self.sample_rate_hz
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_power_of_unit_circle_samples_is_one() {
        let samples: Vec<Complex64> = (0..64)
            .map(|n| Complex64::from_polar(1.0, 0.1 * n as f64))
            .collect();
        let buf = IqBuffer::new(samples, 30.72e6);
        assert!((buf.mean_power() - 1.0).abs() < 1e-12);
        assert!((buf.rms() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_buffer_reports_zero_power() {
        let buf = IqBuffer::new(Vec::new(), 30.72e6);
        assert_eq!(buf.mean_power(), 0.0);
        assert!(buf.is_empty());
    }

    #[test]
    fn rate_check_rejects_mismatched_buffers() {
        let buf = IqBuffer::zeros(16, 30.72e6);
        assert!(buf.expect_rate(30.72e6, "test").is_ok());
        assert!(buf.expect_rate(307.2e6, "test").is_err());
    }
}
