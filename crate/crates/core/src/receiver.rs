//! Burst detection, synchronization, channel estimation, and demodulation.
//!
//! The receive chain takes the 307.2 MHz stream coming out of the 16x
//! decimator and works it back to bits:
//!
//! 1. matched root-raised-cosine filter,
//! 2. packet detection on the short training periodicity: a lag-160
//!    autocorrelation ratio that is immune to carrier offset, followed by a
//!    long-training cross-correlation that pins the frame start to a sample,
//! 3. polyphase 10x decimation back to the 30.72 MHz symbol grid,
//! 4. coarse carrier recovery on the short training (lag 16 at baseband,
//!    unambiguous to +/-960 kHz), then fine recovery on the two long
//!    training copies (lag 64, +/-240 kHz),
//! 5. least-squares channel estimation over the averaged long training
//!    symbols, one complex gain per occupied bin,
//! 6. per-bin equalization, pilot-based common phase removal, and
//!    hard-decision QPSK demapping.

use num_complex::Complex64;

use crate::fft::dft64;
use crate::frame::{lts_reference, payload_bin_scale};
use crate::frontend::{convolve_real, nco_shift, NcoSpec, RrcFilterSpec};
use crate::layout::{FrameLayout, BASEBAND_RATE_HZ, DUC_RATE_HZ, INTERP_FACTOR};
use crate::modem::{qpsk_demap, BitVector};
use crate::{Error, IqBuffer, Result};

/// How far (in 307.2 MHz samples) the long-training search strays from the
/// position implied by the detection peak.
const LTS_SEARCH_HALF_WIDTH: usize = 400;

/// Outcome of packet detection.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub detected: bool,
    /// Frame start in the filtered 307.2 MHz stream; only meaningful when
    /// `detected` is true.
    pub start_index: usize,
    /// The full detection metric, one value per evaluated lag, in [0, 1].
    pub metric_trace: Vec<f64>,
    pub peak_metric: f64,
    pub threshold_used: f64,
}

/// Per-bin complex channel gains from the long training symbols. Virtual
/// bins carry no estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    pub gains: Vec<Option<Complex64>>,
}

impl ChannelEstimate {
    pub fn empty(layout: &FrameLayout) -> Self {
        Self {
            gains: vec![None; layout.fft_size],
        }
    }
}

/// Everything the receiver learned about one buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct RxReport {
    pub detection: DetectionResult,
    pub coarse_cfo_hz: f64,
    pub fine_cfo_hz: f64,
    pub channel: ChannelEstimate,
    pub bits: BitVector,
    /// Bit error rate against the reference bits; NaN when no reference was
    /// given or nothing was detected.
    pub ber: f64,
    /// Which of the 10 decimation phases carried the most energy.
    pub decimation_phase: usize,
}

/// Applies the receive-side root-raised-cosine filter (full convolution).
pub fn matched_filter(rx: &IqBuffer, filt: &RrcFilterSpec) -> Result<IqBuffer> {
    rx.expect_rate(DUC_RATE_HZ, "matched_filter")?;
    if rx.is_empty() {
        return Err(Error::DegenerateInput("empty matched filter input".into()));
    }
    Ok(IqBuffer::new(
        convolve_real(&rx.samples, &filt.taps),
        DUC_RATE_HZ,
    ))
}

fn lts_comb_template(layout: &FrameLayout) -> Vec<Complex64> {
    let body = crate::fft::idft64(&lts_reference());
    let mut t = Vec::with_capacity(layout.lts_len * layout.lts_repeats);
    for _ in 0..layout.lts_repeats {
        t.extend_from_slice(&body);
    }
    t
}

/// Detects a burst in the matched-filter output and locates its start.
///
/// The metric at lag n correlates a 1440-sample window with itself 160
/// samples later and normalizes by the mean energy of the two windows, so
/// it peaks where the repeating short training fills both windows and is
/// insensitive to any carrier offset. When the peak clears the threshold,
/// the start estimate is refined by cross-correlating a comb of known
/// long-training samples (spaced 10 apart, after removing the carrier
/// rotation implied by the correlation phase at the peak), and the frame
/// start follows from the long-training position.
///
/// Non-detection is a valid outcome, never an error. `threshold` must be in
/// (0, 1].
pub fn detect_packet(rx: &IqBuffer, threshold: f64, layout: &FrameLayout) -> DetectionResult {
    assert!(
        threshold > 0.0 && threshold <= 1.0,
        "detection threshold must be in (0, 1], got {threshold}"
    );
    let d = layout.sts_period * INTERP_FACTOR;
    let w = (layout.sts_repeats - 1) * d;
    let samples = &rx.samples;
    let none = DetectionResult {
        detected: false,
        start_index: 0,
        metric_trace: Vec::new(),
        peak_metric: 0.0,
        threshold_used: threshold,
    };
    if samples.len() < w + d + 1 {
        return none;
    }

    // Running sums: lag product and per-sample energy.
    let n_pairs = samples.len() - d;
    let mut corr = Vec::with_capacity(n_pairs);
    for i in 0..n_pairs {
        corr.push(samples[i].conj() * samples[i + d]);
    }
    let mut energy = Vec::with_capacity(samples.len());
    for s in samples {
        energy.push(s.norm_sqr());
    }

    let trace_len = samples.len() - w - d + 1;
    let mut trace = Vec::with_capacity(trace_len);
    let mut p = Complex64::new(0.0, 0.0);
    let mut e_lead = 0.0;
    let mut e_lag = 0.0;
    for i in 0..w {
        p += corr[i];
        e_lag += energy[i];
        e_lead += energy[i + d];
    }
    let mut peak_metric = 0.0;
    let mut peak_index = 0usize;
    for n in 0..trace_len {
        let denom = 0.5 * (e_lag + e_lead);
        let m = if denom > 1e-300 { p.norm() / denom } else { 0.0 };
        trace.push(m);
        if m > peak_metric {
            peak_metric = m;
            peak_index = n;
        }
        if n + 1 < trace_len {
            p += corr[n + w] - corr[n];
            e_lag += energy[n + w] - energy[n];
            e_lead += energy[n + w + d] - energy[n + d];
        }
    }

    let detected = peak_metric >= threshold;
    if !detected {
        return DetectionResult {
            metric_trace: trace,
            peak_metric,
            ..none
        };
    }

    // Carrier estimate at the converter-side rate, from the correlation
    // phase at the peak; used only to derotate the template search.
    let mut p_at_peak = Complex64::new(0.0, 0.0);
    for c in &corr[peak_index..peak_index + w] {
        p_at_peak += c;
    }
    let cfo_hr = p_at_peak.arg() * rx.sample_rate_hz
        / (2.0 * std::f64::consts::PI * d as f64);

    let template = lts_comb_template(layout);
    let comb_len = (template.len() - 1) * INTERP_FACTOR + 1;
    let lts_offset = layout.lts_body_start() * INTERP_FACTOR;
    let center = peak_index + lts_offset;
    let lo = center.saturating_sub(LTS_SEARCH_HALF_WIDTH);
    let hi = (center + LTS_SEARCH_HALF_WIDTH).min(samples.len().saturating_sub(comb_len));
    let start_index = if lo > hi {
        // Not enough room to refine; fall back to the metric peak.
        peak_index
    } else {
        // Carrier derotation for the whole search span, built once by
        // recurrence.
        let span = hi - lo + comb_len;
        let step = Complex64::from_polar(
            1.0,
            -2.0 * std::f64::consts::PI * cfo_hr / rx.sample_rate_hz,
        );
        let mut rot = Vec::with_capacity(span);
        let mut ph = Complex64::from_polar(
            1.0,
            -2.0 * std::f64::consts::PI * cfo_hr * lo as f64 / rx.sample_rate_hz,
        );
        for i in 0..span {
            if i % 4096 == 0 {
                ph = Complex64::from_polar(
                    1.0,
                    -2.0 * std::f64::consts::PI * cfo_hr * (lo + i) as f64
                        / rx.sample_rate_hz,
                );
            }
            rot.push(ph);
            ph *= step;
        }
        let mut best = 0.0;
        let mut best_lag = center;
        for lag in lo..=hi {
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, t) in template.iter().enumerate() {
                let i = lag + k * INTERP_FACTOR;
                acc += samples[i] * rot[i - lo] * t.conj();
            }
            let mag = acc.norm();
            if mag > best {
                best = mag;
                best_lag = lag;
            }
        }
        best_lag.saturating_sub(lts_offset)
    };

    DetectionResult {
        detected: true,
        start_index,
        metric_trace: trace,
        peak_metric,
        threshold_used: threshold,
    }
}

/// Picks the strongest of the 10 decimation phases and returns the 480
/// baseband samples of the frame starting at `start_index`, together with
/// the chosen phase.
pub fn decimate_10(rx: &IqBuffer, start_index: usize, layout: &FrameLayout) -> Result<(IqBuffer, usize)> {
    rx.expect_rate(DUC_RATE_HZ, "decimate_10")?;
    let frame_len = layout.frame_len();
    let needed = frame_len * INTERP_FACTOR;
    let available = rx.len().saturating_sub(start_index);
    if available < needed {
        return Err(Error::TruncatedFrame { needed, available });
    }
    let mut best_phase = 0usize;
    let mut best_energy = -1.0;
    for phase in 0..INTERP_FACTOR {
        let mut e = 0.0;
        for k in 0..frame_len {
            e += rx.samples[start_index + phase + k * INTERP_FACTOR].norm_sqr();
        }
        if e > best_energy {
            best_energy = e;
            best_phase = phase;
        }
    }
    let samples: Vec<Complex64> = (0..frame_len)
        .map(|k| rx.samples[start_index + best_phase + k * INTERP_FACTOR])
        .collect();
    Ok((IqBuffer::new(samples, BASEBAND_RATE_HZ), best_phase))
}

fn lag_frequency(
    samples: &[Complex64],
    lag: usize,
    sample_rate_hz: f64,
    what: &str,
) -> Result<f64> {
    let mut acc = Complex64::new(0.0, 0.0);
    for n in 0..samples.len() - lag {
        acc += samples[n].conj() * samples[n + lag];
    }
    if !acc.re.is_finite() || !acc.im.is_finite() || acc.norm() < 1e-300 {
        return Err(Error::EstimationFailed(format!(
            "{what}: lag correlation vanished"
        )));
    }
    Ok(acc.arg() * sample_rate_hz / (2.0 * std::f64::consts::PI * lag as f64))
}

/// Coarse carrier offset from the short training periodicity at baseband.
///
/// Conjugating the earlier sample makes a positive carrier offset produce a
/// positive estimate. Lag 16 at 30.72 MHz keeps the estimate unambiguous
/// out to +/-960 kHz.
pub fn coarse_cfo(frame: &IqBuffer, layout: &FrameLayout) -> Result<f64> {
    frame.expect_rate(BASEBAND_RATE_HZ, "coarse_cfo")?;
    let sts_len = layout.sts_section_len();
    if frame.len() < sts_len {
        return Err(Error::TruncatedFrame {
            needed: sts_len,
            available: frame.len(),
        });
    }
    lag_frequency(
        &frame.samples[..sts_len],
        layout.sts_period,
        frame.sample_rate_hz,
        "coarse_cfo",
    )
}

/// Fine carrier offset from the two long training copies; unambiguous to
/// +/-240 kHz, run after the coarse correction.
pub fn fine_cfo(frame: &IqBuffer, layout: &FrameLayout) -> Result<f64> {
    frame.expect_rate(BASEBAND_RATE_HZ, "fine_cfo")?;
    let end = layout.payload_start();
    if frame.len() < end {
        return Err(Error::TruncatedFrame {
            needed: end,
            available: frame.len(),
        });
    }
    let body = &frame.samples[layout.lts_body_start()..end];
    lag_frequency(body, layout.lts_len, frame.sample_rate_hz, "fine_cfo")
}

/// Least-squares channel estimate from the two long training bodies.
///
/// Both copies see the same channel, so the least-squares solution per bin
/// is the average of the two observations divided by the known value:
/// H[b] = (Y1[b] + Y2[b]) / (2 X[b]). Bins where the reference is zero get
/// no estimate.
pub fn estimate_channel_ls(
    frame: &IqBuffer,
    layout: &FrameLayout,
    reference: &[Complex64],
) -> Result<ChannelEstimate> {
    frame.expect_rate(BASEBAND_RATE_HZ, "estimate_channel_ls")?;
    if reference.len() != layout.fft_size {
        return Err(Error::InvalidArgument(format!(
            "reference must cover {} bins, got {}",
            layout.fft_size,
            reference.len()
        )));
    }
    let end = layout.payload_start();
    if frame.len() < end {
        return Err(Error::TruncatedFrame {
            needed: end,
            available: frame.len(),
        });
    }
    let b0 = layout.lts_body_start();
    let y1 = dft64(&frame.samples[b0..b0 + layout.lts_len]);
    let y2 = dft64(&frame.samples[b0 + layout.lts_len..end]);
    let gains = (0..layout.fft_size)
        .map(|b| {
            let x = reference[b];
            if x.norm() > 0.0 {
                Some((y1[b] + y2[b]) / (2.0 * x))
            } else {
                None
            }
        })
        .collect();
    Ok(ChannelEstimate { gains })
}

/// Equalizes the two payload symbols and demaps them to bits.
///
/// Each data bin is divided by its channel gain and by the transmit bin
/// scale, putting the constellation back on unit symbols. The four pilots
/// of each symbol, transmitted as +1, measure the common phase left by
/// residual carrier error; that phase is removed before slicing. Errors
/// out if any needed gain is missing or smaller than 1e-6 in magnitude.
pub fn equalize_and_demod(
    frame: &IqBuffer,
    estimate: &ChannelEstimate,
    layout: &FrameLayout,
) -> Result<BitVector> {
    frame.expect_rate(BASEBAND_RATE_HZ, "equalize_and_demod")?;
    if frame.len() < layout.frame_len() {
        return Err(Error::TruncatedFrame {
            needed: layout.frame_len(),
            available: frame.len(),
        });
    }
    if estimate.gains.len() != layout.fft_size {
        return Err(Error::InvalidArgument(format!(
            "estimate must cover {} bins, got {}",
            layout.fft_size,
            estimate.gains.len()
        )));
    }
    let gain_at = |bin: usize| -> Result<Complex64> {
        match estimate.gains[bin] {
            Some(h) if h.norm() >= 1e-6 => Ok(h),
            _ => Err(Error::EqualizationSingular { bin }),
        }
    };
    let scale = payload_bin_scale();
    let mut symbols = Vec::with_capacity(layout.payload_symbols * layout.data_bins.len());
    for s in 0..layout.payload_symbols {
        let body_start = layout.payload_start() + s * layout.payload_symbol_len() + layout.payload_cp;
        let bins = dft64(&frame.samples[body_start..body_start + layout.fft_size]);
        // Common phase from the equalized pilots (all transmitted as +1).
        let mut pilot_sum = Complex64::new(0.0, 0.0);
        for &bin in &layout.pilot_bins {
            pilot_sum += bins[bin] / gain_at(bin)? / scale;
        }
        if pilot_sum.norm() < 1e-12 {
            return Err(Error::EstimationFailed(format!(
                "pilot phase vanished in payload symbol {s}"
            )));
        }
        let derotate = Complex64::from_polar(1.0, -pilot_sum.arg());
        for &bin in &layout.data_bins {
            let eq = bins[bin] / gain_at(bin)? / scale * derotate;
            symbols.push(eq);
        }
    }
    Ok(qpsk_demap(&symbols))
}

/// Fraction of mismatched bits between the received and reference vectors.
pub fn compute_ber(received: &BitVector, reference: &BitVector) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::InvalidArgument("empty reference bits".into()));
    }
    let mismatches = received.count_mismatches(reference)?;
    Ok(mismatches as f64 / reference.len() as f64)
}

/// The full receive pipeline with its fixed configuration.
#[derive(Debug, Clone)]
pub struct Receiver {
    pub filter: RrcFilterSpec,
    pub layout: FrameLayout,
    pub detection_threshold: f64,
}

impl Receiver {
    pub fn new(detection_threshold: f64) -> Result<Self> {
        if !(detection_threshold > 0.0 && detection_threshold <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "detection threshold must be in (0, 1], got {detection_threshold}"
            )));
        }
        Ok(Self {
            filter: RrcFilterSpec::default_duc(),
            layout: FrameLayout::new(),
            detection_threshold,
        })
    }

    /// Runs the whole chain on a raw 307.2 MHz buffer.
    ///
    /// A burst that never crosses the detection threshold yields a report
    /// with `detected = false` and NaN BER rather than an error; errors are
    /// reserved for buffers that break mid-pipeline invariants.
    pub fn process(&self, rx: &IqBuffer, reference_bits: Option<&BitVector>) -> Result<RxReport> {
        let filtered = matched_filter(rx, &self.filter)?;
        let detection = detect_packet(&filtered, self.detection_threshold, &self.layout);
        if !detection.detected {
            return Ok(RxReport {
                detection,
                coarse_cfo_hz: 0.0,
                fine_cfo_hz: 0.0,
                channel: ChannelEstimate::empty(&self.layout),
                bits: BitVector::default(),
                ber: f64::NAN,
                decimation_phase: 0,
            });
        }
        let (baseband, decimation_phase) =
            decimate_10(&filtered, detection.start_index, &self.layout)?;
        let coarse = coarse_cfo(&baseband, &self.layout)?;
        let after_coarse = nco_shift(
            &baseband,
            &NcoSpec {
                frequency_hz: -coarse,
                initial_phase_rad: 0.0,
            },
        )?;
        let fine = fine_cfo(&after_coarse, &self.layout)?;
        let corrected = nco_shift(
            &after_coarse,
            &NcoSpec {
                frequency_hz: -fine,
                initial_phase_rad: 0.0,
            },
        )?;
        let reference = lts_reference();
        let channel = estimate_channel_ls(&corrected, &self.layout, &reference)?;
        let bits = equalize_and_demod(&corrected, &channel, &self.layout)?;
        let ber = match reference_bits {
            Some(r) => compute_ber(&bits, r)?,
            None => f64::NAN,
        };
        Ok(RxReport {
            detection,
            coarse_cfo_hz: coarse,
            fine_cfo_hz: fine,
            channel,
            bits,
            ber,
            decimation_phase,
        })
    }
}
