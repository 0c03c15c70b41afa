//! Transmit frame assembly.
//!
//! Every burst carries three sections, each 160 samples at 30.72 MHz:
//!
//! * short training: a 16-sample base repeated 10 times, built from 12 tones
//!   on subcarriers that are multiples of 4 so the base is exactly periodic,
//! * long training: two identical 64-sample BPSK symbols behind a 32-sample
//!   cyclic prefix, used for fine frequency and channel estimation,
//! * payload: two OFDM symbols, 16-sample prefix plus 64-sample body, with
//!   48 QPSK data bins and 4 pilot bins each.
//!
//! Transforms are unitary, so bin energies and time energies match directly.

use num_complex::Complex64;

use crate::fft::idft64;
use crate::layout::{FrameLayout, BASEBAND_RATE_HZ, FFT_SIZE};
use crate::modem::{qpsk_map, BitVector};
use crate::{Error, IqBuffer, Result};

/// Subcarriers occupied by the short training sequence, ascending order.
pub const STS_SUBCARRIERS: [i32; 12] = [-24, -20, -16, -12, -8, -4, 4, 8, 12, 16, 20, 24];

/// Per-tone (I, Q) signs of the short training sequence, matching
/// [`STS_SUBCARRIERS`] element for element.
pub const STS_PATTERN: [(f64, f64); 12] = [
    (1.0, 1.0),
    (-1.0, -1.0),
    (1.0, 1.0),
    (-1.0, -1.0),
    (-1.0, -1.0),
    (1.0, 1.0),
    (-1.0, -1.0),
    (-1.0, -1.0),
    (1.0, 1.0),
    (1.0, 1.0),
    (1.0, 1.0),
    (1.0, 1.0),
];

/// BPSK signs of the long training symbol for subcarriers -26..=+26; the
/// middle entry (DC) is zero.
pub const LTS_SIGNS: [f64; 53] = [
    1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0, 1.0, -1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, -1.0, -1.0,
    1.0, 1.0, -1.0, 1.0, -1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0, 1.0,
    -1.0, 1.0, -1.0, -1.0, -1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0,
    1.0, 1.0, 1.0,
];

/// Amplitude of each short-training tone. With 12 tones of magnitude
/// a*sqrt(2) the 64-bin energy is 24 a^2 = 64, giving the time-domain base an
/// RMS of exactly 1.
pub fn sts_bin_amplitude() -> f64 {
    (64.0_f64 / 24.0).sqrt()
}

/// Scale applied to every occupied payload bin. 52 bins of energy 64/52 sum
/// to 64, so each payload symbol body also has unit RMS.
pub fn payload_bin_scale() -> f64 {
    (64.0_f64 / 52.0).sqrt()
}

/// Frequency-domain reference of the long training symbol, one entry per FFT
/// bin. Virtual bins are zero. The receiver divides by these values during
/// channel estimation.
pub fn lts_reference() -> [Complex64; 64] {
    let mut bins = [Complex64::new(0.0, 0.0); 64];
    for k in -26i32..=26 {
        if k == 0 {
            continue;
        }
        let bin = k.rem_euclid(FFT_SIZE as i32) as usize;
        bins[bin] = Complex64::new(LTS_SIGNS[(k + 26) as usize], 0.0);
    }
    bins
}

/// One payload OFDM symbol before the transform: 48 data values in ascending
/// subcarrier order and 4 pilot values for subcarriers -21, -7, +7, +21.
#[derive(Debug, Clone)]
pub struct OfdmSymbolSpec {
    pub data: Vec<Complex64>,
    pub pilots: [Complex64; 4],
}

/// A built frame together with the payload bits it carries.
#[derive(Debug, Clone)]
pub struct TxFrame {
    pub samples: IqBuffer,
    pub bits: BitVector,
}

fn lts_body() -> Vec<Complex64> {
    idft64(&lts_reference())
}

/// Builds the 160-sample short training section.
pub fn build_short_preamble(layout: &FrameLayout) -> IqBuffer {
    let mut bins = vec![Complex64::new(0.0, 0.0); FFT_SIZE];
    let amp = sts_bin_amplitude();
    for (&k, &(i, q)) in STS_SUBCARRIERS.iter().zip(STS_PATTERN.iter()) {
        let bin = k.rem_euclid(FFT_SIZE as i32) as usize;
        bins[bin] = Complex64::new(amp * i, amp * q);
    }
    let time = idft64(&bins);
    let base = &time[..layout.sts_period];
    let mut out = Vec::with_capacity(layout.sts_section_len());
    for _ in 0..layout.sts_repeats {
        out.extend_from_slice(base);
    }
    IqBuffer::new(out, BASEBAND_RATE_HZ)
}

/// Builds the 160-sample long training section: 32-sample cyclic prefix
/// followed by two identical 64-sample bodies.
pub fn build_long_preamble(layout: &FrameLayout) -> IqBuffer {
    let body = lts_body();
    let mut out = Vec::with_capacity(layout.lts_section_len());
    out.extend_from_slice(&body[layout.lts_len - layout.lts_cp..]);
    for _ in 0..layout.lts_repeats {
        out.extend_from_slice(&body);
    }
    IqBuffer::new(out, BASEBAND_RATE_HZ)
}

/// Builds one 80-sample payload symbol: the spec values land on their bins
/// unchanged, everything else stays zero, and the last 16 body samples are
/// copied in front as the cyclic prefix.
pub fn build_payload_symbol(spec: &OfdmSymbolSpec, layout: &FrameLayout) -> Result<IqBuffer> {
    if spec.data.len() != layout.data_bins.len() {
        return Err(Error::InvalidArgument(format!(
            "payload symbol needs {} data values, got {}",
            layout.data_bins.len(),
            spec.data.len()
        )));
    }
    let mut bins = vec![Complex64::new(0.0, 0.0); layout.fft_size];
    for (&bin, &v) in layout.data_bins.iter().zip(spec.data.iter()) {
        bins[bin] = v;
    }
    for (&bin, &v) in layout.pilot_bins.iter().zip(spec.pilots.iter()) {
        bins[bin] = v;
    }
    let body = idft64(&bins);
    let mut out = Vec::with_capacity(layout.payload_symbol_len());
    out.extend_from_slice(&body[layout.fft_size - layout.payload_cp..]);
    out.extend_from_slice(&body);
    Ok(IqBuffer::new(out, BASEBAND_RATE_HZ))
}

/// Assembles a complete 480-sample frame from 192 payload bits.
///
/// Data and pilot bins are scaled by [`payload_bin_scale`] so the payload
/// bodies leave the builder with unit RMS, matching the short training
/// section; the scale is divided back out in the receiver's equalizer.
/// Pilots carry +1 (before scaling) on all four pilot bins of both symbols.
pub fn build_frame(bits: &BitVector, layout: &FrameLayout) -> Result<TxFrame> {
    if bits.len() != layout.bits_per_frame() {
        return Err(Error::InvalidArgument(format!(
            "frame carries {} bits, got {}",
            layout.bits_per_frame(),
            bits.len()
        )));
    }
    let symbols = qpsk_map(bits)?;
    let scale = payload_bin_scale();
    let pilot = Complex64::new(scale, 0.0);

    let mut samples = Vec::with_capacity(layout.frame_len());
    samples.extend_from_slice(&build_short_preamble(layout).samples);
    samples.extend_from_slice(&build_long_preamble(layout).samples);
    let per_symbol = layout.data_bins.len();
    for s in 0..layout.payload_symbols {
        let spec = OfdmSymbolSpec {
            data: symbols[s * per_symbol..(s + 1) * per_symbol]
                .iter()
                .map(|v| v * scale)
                .collect(),
            pilots: [pilot; 4],
        };
        samples.extend_from_slice(&build_payload_symbol(&spec, layout)?.samples);
    }
    debug_assert_eq!(samples.len(), layout.frame_len());
    Ok(TxFrame {
        samples: IqBuffer::new(samples, BASEBAND_RATE_HZ),
        bits: bits.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modem::prbs_bits;

    /// Direct unitary DFT, written out longhand so the checks here do not
    /// depend on the transform the builders use.
    fn dft_direct(time: &[Complex64]) -> Vec<Complex64> {
        let n = time.len();
        let scale = 1.0 / (n as f64).sqrt();
        (0..n)
            .map(|k| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (t, &x) in time.iter().enumerate() {
                    let ang = -2.0 * std::f64::consts::PI * (k * t) as f64 / n as f64;
                    acc += x * Complex64::from_polar(1.0, ang);
                }
                acc * scale
            })
            .collect()
    }

    #[test]
    fn short_preamble_is_sixteen_periodic_with_unit_rms() {
        let layout = FrameLayout::new();
        let sts = build_short_preamble(&layout);
        assert_eq!(sts.len(), 160);
        for n in 0..160 - 16 {
            assert!(
                (sts.samples[n] - sts.samples[n + 16]).norm() < 1e-12,
                "period break at {n}"
            );
        }
        assert!((sts.rms() - 1.0).abs() < 1e-12, "rms = {}", sts.rms());
    }

    #[test]
    fn short_preamble_lag_autocorrelation_peaks_at_period() {
        let layout = FrameLayout::new();
        let s = build_short_preamble(&layout).samples;
        let energy: f64 = s.iter().map(|v| v.norm_sqr()).sum();
        let corr = |lag: usize| -> f64 {
            let mut acc = Complex64::new(0.0, 0.0);
            for n in 0..s.len() - lag {
                acc += s[n].conj() * s[n + lag];
            }
            acc.norm() / energy
        };
        // Exact periodicity: lag-16 correlation only loses the edge samples.
        assert!(corr(16) > 0.899, "lag 16: {}", corr(16));
        // Off-period lags stay well below the peak.
        for lag in [3, 7, 11, 13] {
            assert!(corr(lag) < 0.6, "lag {lag}: {}", corr(lag));
        }
    }

    #[test]
    fn long_preamble_prefix_copies_the_body_tail() {
        let layout = FrameLayout::new();
        let lts = build_long_preamble(&layout);
        assert_eq!(lts.len(), 160);
        for n in 0..32 {
            assert!(
                (lts.samples[n] - lts.samples[64 + n]).norm() < 1e-14,
                "prefix mismatch at {n}"
            );
            assert!((lts.samples[n] - lts.samples[128 + n]).norm() < 1e-14);
        }
        // The two bodies are identical copies.
        for n in 0..64 {
            assert!((lts.samples[32 + n] - lts.samples[96 + n]).norm() < 1e-14);
        }
    }

    #[test]
    fn long_training_spectrum_is_unit_magnitude_bpsk() {
        let layout = FrameLayout::new();
        let lts = build_long_preamble(&layout);
        let bins = dft_direct(&lts.samples[32..96]);
        let reference = lts_reference();
        for (bin, (&got, &want)) in bins.iter().zip(reference.iter()).enumerate() {
            assert!(
                (got - want).norm() < 1e-9,
                "bin {bin}: got {got}, want {want}"
            );
            if want.norm() > 0.0 {
                assert!((got.norm() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn payload_symbol_places_spec_values_on_their_bins() {
        let layout = FrameLayout::new();
        let mut data = vec![Complex64::new(0.0, 0.0); 48];
        for (i, v) in data.iter_mut().enumerate() {
            *v = Complex64::from_polar(1.0, 0.7 * i as f64);
        }
        let spec = OfdmSymbolSpec {
            data: data.clone(),
            pilots: [
                Complex64::new(1.0, 0.0),
                Complex64::new(-1.0, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(1.0, 0.0),
            ],
        };
        let sym = build_payload_symbol(&spec, &layout).unwrap();
        assert_eq!(sym.len(), 80);
        // Cyclic prefix copies the body tail.
        for n in 0..16 {
            assert!((sym.samples[n] - sym.samples[64 + n]).norm() < 1e-14);
        }
        let bins = dft_direct(&sym.samples[16..80]);
        for (i, &bin) in layout.data_bins.iter().enumerate() {
            assert!((bins[bin] - data[i]).norm() < 1e-9);
        }
        for (i, &bin) in layout.pilot_bins.iter().enumerate() {
            assert!((bins[bin] - spec.pilots[i]).norm() < 1e-9);
        }
        for &bin in &layout.virtual_bins {
            assert!(bins[bin].norm() < 1e-9, "virtual bin {bin} leaked power");
        }
    }

    #[test]
    fn delta_spectrum_gives_a_one_eighth_exponential() {
        let layout = FrameLayout::new();
        let mut data = vec![Complex64::new(0.0, 0.0); 48];
        data[24] = Complex64::new(1.0, 0.0); // subcarrier +1, bin 1
        let spec = OfdmSymbolSpec {
            data,
            pilots: [Complex64::new(0.0, 0.0); 4],
        };
        let sym = build_payload_symbol(&spec, &layout).unwrap();
        let body = &sym.samples[16..80];
        for (n, &x) in body.iter().enumerate() {
            // Unitary inverse transform of a unit bin: magnitude 1/sqrt(64).
            assert!((x.norm() - 0.125).abs() < 1e-12, "sample {n}");
            let want = Complex64::from_polar(
                0.125,
                2.0 * std::f64::consts::PI * n as f64 / 64.0,
            );
            assert!((x - want).norm() < 1e-12);
        }
    }

    #[test]
    fn frame_sections_land_at_documented_offsets() {
        let layout = FrameLayout::new();
        let bits = prbs_bits(11, 192);
        let frame = build_frame(&bits, &layout).unwrap();
        assert_eq!(frame.samples.len(), 480);
        assert_eq!(frame.samples.sample_rate_hz, BASEBAND_RATE_HZ);
        let sts = build_short_preamble(&layout);
        let lts = build_long_preamble(&layout);
        assert_eq!(&frame.samples.samples[..160], sts.samples.as_slice());
        assert_eq!(&frame.samples.samples[160..320], lts.samples.as_slice());
    }

    #[test]
    fn payload_bodies_have_unit_rms() {
        let layout = FrameLayout::new();
        let bits = prbs_bits(5, 192);
        let frame = build_frame(&bits, &layout).unwrap();
        for s in 0..2 {
            let start = 320 + s * 80 + 16;
            let body = &frame.samples.samples[start..start + 64];
            let p: f64 = body.iter().map(|v| v.norm_sqr()).sum::<f64>() / 64.0;
            assert!(
                (p - 1.0).abs() < 1e-12,
                "payload body {s} power = {p}"
            );
        }
    }

    #[test]
    fn frame_round_trip_recovers_bits_through_the_transform() {
        let layout = FrameLayout::new();
        let bits = prbs_bits(21, 192);
        let frame = build_frame(&bits, &layout).unwrap();
        let scale = payload_bin_scale();
        let mut recovered = Vec::new();
        for s in 0..2 {
            let start = 320 + s * 80 + 16;
            let bins = dft_direct(&frame.samples.samples[start..start + 64]);
            for &bin in &layout.data_bins {
                let v = bins[bin] / scale;
                recovered.push(u8::from(v.re < 0.0));
                recovered.push(u8::from(v.im < 0.0));
            }
        }
        assert_eq!(recovered, bits.as_slice());
    }

    #[test]
    fn build_frame_is_deterministic() {
        let layout = FrameLayout::new();
        let bits = prbs_bits(33, 192);
        let a = build_frame(&bits, &layout).unwrap();
        let b = build_frame(&bits, &layout).unwrap();
        assert_eq!(a.samples, b.samples);
    }

    #[test]
    fn build_frame_rejects_wrong_bit_count() {
        let layout = FrameLayout::new();
        let bits = prbs_bits(1, 190);
        assert!(build_frame(&bits, &layout).is_err());
    }
}
