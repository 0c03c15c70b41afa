//! Decibel and power-unit conversions used across the link model.

/// Power ratio to decibels.
pub fn power_to_db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

/// Decibels to power ratio.
pub fn db_to_power(db: f64) -> f64 {
    10.0_f64.powf(db / 10.0)
}

/// Decibels to amplitude ratio.
pub fn db_to_amplitude(db: f64) -> f64 {
    10.0_f64.powf(db / 20.0)
}

/// Amplitude ratio to decibels.
pub fn amplitude_to_db(ratio: f64) -> f64 {
    20.0 * ratio.log10()
}

/// Milliwatts to dBm.
pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// dBm to milliwatts.
pub fn dbm_to_mw(dbm: f64) -> f64 {
    10.0_f64.powf(dbm / 10.0)
}
