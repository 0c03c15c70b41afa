//! Frame geometry and subcarrier allocation.
//!
//! One burst is 480 samples at 30.72 MHz:
//!
//! ```text
//! [ STS: 10 x 16 ] [ LTS: 32 CP + 2 x 64 ] [ CP16 + 64 ] [ CP16 + 64 ]
//!       160               160                  160 payload samples
//! ```
//!
//! Payload symbols use a 64-point grid with 480 kHz spacing. Of the 64 bins,
//! 48 carry data, 4 carry pilots at subcarriers +/-7 and +/-21, and 12 are
//! left empty: DC and the 11 band-edge bins around the fold-over frequency.

/// Baseband sample rate of the modem.
pub const BASEBAND_RATE_HZ: f64 = 30.72e6;
/// Pulse-shaping interpolation factor between baseband and the DUC rate.
pub const INTERP_FACTOR: usize = 10;
/// Rate at the digital up/down-converter boundary.
pub const DUC_RATE_HZ: f64 = 307.2e6;
/// Resampling factor between the DUC rate and the converter rate.
pub const CONVERTER_FACTOR: usize = 16;
/// Data converter sample rate.
pub const CONVERTER_RATE_HZ: f64 = 4.9152e9;
/// Intermediate frequency produced by the digital up-converter.
pub const IF_CARRIER_HZ: f64 = 3.8e9;
/// Over-the-air carrier after the external up-conversion stage.
pub const RF_CARRIER_HZ: f64 = 29.8e9;
/// Payload FFT length.
pub const FFT_SIZE: usize = 64;
/// Subcarrier spacing: 30.72 MHz / 64.
pub const SUBCARRIER_SPACING_HZ: f64 = BASEBAND_RATE_HZ / FFT_SIZE as f64;
/// Payload bits carried by one frame: 2 symbols x 48 data bins x 2 bits.
pub const BITS_PER_FRAME: usize = 192;

/// Static description of the burst structure and the subcarrier map.
///
/// Index vectors hold FFT bin numbers in 0..64, where subcarrier k maps to
/// bin k mod 64. Data and pilot bins are listed in ascending subcarrier
/// order, -26 up to +26, which fixes the order data symbols are laid out in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameLayout {
    /// Samples in one short-training repetition.
    pub sts_period: usize,
    /// Number of short-training repetitions.
    pub sts_repeats: usize,
    /// Cyclic prefix length of the long-training section.
    pub lts_cp: usize,
    /// Samples in one long-training symbol body.
    pub lts_len: usize,
    /// Number of long-training symbol bodies.
    pub lts_repeats: usize,
    /// Cyclic prefix length of each payload symbol.
    pub payload_cp: usize,
    /// Payload FFT length.
    pub fft_size: usize,
    /// Number of payload symbols per frame.
    pub payload_symbols: usize,
    /// FFT bins carrying data, ascending subcarrier order.
    pub data_bins: Vec<usize>,
    /// FFT bins carrying pilots, ascending subcarrier order.
    pub pilot_bins: Vec<usize>,
    /// FFT bins left empty.
    pub virtual_bins: Vec<usize>,
}

impl FrameLayout {
    pub fn new() -> Self {
        let pilot_subcarriers: [i32; 4] = [-21, -7, 7, 21];
        let mut data_bins = Vec::with_capacity(48);
        let mut pilot_bins = Vec::with_capacity(4);
        for k in -26i32..=26 {
            if k == 0 {
                continue;
            }
            let bin = k.rem_euclid(FFT_SIZE as i32) as usize;
            if pilot_subcarriers.contains(&k) {
                pilot_bins.push(bin);
            } else {
                data_bins.push(bin);
            }
        }
        let mut virtual_bins = vec![0usize];
        virtual_bins.extend(27..=37);

        let layout = Self {
            sts_period: 16,
            sts_repeats: 10,
            lts_cp: 32,
            lts_len: 64,
            lts_repeats: 2,
            payload_cp: 16,
            fft_size: FFT_SIZE,
            payload_symbols: 2,
            data_bins,
            pilot_bins,
            virtual_bins,
        };
        debug_assert_eq!(layout.data_bins.len(), 48);
        debug_assert_eq!(layout.pilot_bins.len(), 4);
        debug_assert_eq!(layout.virtual_bins.len(), 12);
        layout
    }

    /// Length of the short-training section in samples.
    pub fn sts_section_len(&self) -> usize {
        self.sts_period * self.sts_repeats
    }

    /// Length of the long-training section in samples, prefix included.
    pub fn lts_section_len(&self) -> usize {
        self.lts_cp + self.lts_len * self.lts_repeats
    }

    /// Length of one payload symbol in samples, prefix included.
    pub fn payload_symbol_len(&self) -> usize {
        self.payload_cp + self.fft_size
    }

    /// Length of the payload section in samples.
    pub fn payload_section_len(&self) -> usize {
        self.payload_symbol_len() * self.payload_symbols
    }

    /// Total frame length in samples.
    pub fn frame_len(&self) -> usize {
        self.sts_section_len() + self.lts_section_len() + self.payload_section_len()
    }

    /// Sample offset of the long-training cyclic prefix within the frame.
    pub fn lts_section_start(&self) -> usize {
        self.sts_section_len()
    }

    /// Sample offset of the first long-training symbol body within the frame.
    pub fn lts_body_start(&self) -> usize {
        self.lts_section_start() + self.lts_cp
    }

    /// Sample offset of the payload section within the frame.
    pub fn payload_start(&self) -> usize {
        self.sts_section_len() + self.lts_section_len()
    }

    /// Payload bits carried by one frame.
    pub fn bits_per_frame(&self) -> usize {
        self.payload_symbols * self.data_bins.len() * 2
    }
}

impl Default for FrameLayout {
    fn default() -> Self {
        Self::new()
    }
}
