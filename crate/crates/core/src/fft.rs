//! Unitary 64-point transforms used by the modem.
//!
//! Both directions carry a 1/sqrt(N) factor, so energy is preserved exactly
//! and a forward/inverse round trip is the identity.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::{Arc, OnceLock};

use crate::layout::FFT_SIZE;

type PlanPair = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

fn plans() -> &'static PlanPair {
    static PLANS: OnceLock<PlanPair> = OnceLock::new();
    PLANS.get_or_init(|| {
        let mut planner = FftPlanner::new();
        (
            planner.plan_fft_forward(FFT_SIZE),
            planner.plan_fft_inverse(FFT_SIZE),
        )
    })
}

/// Forward unitary DFT, length 64.
pub(crate) fn dft64(time: &[Complex64]) -> Vec<Complex64> {
    assert_eq!(time.len(), FFT_SIZE, "dft64 takes exactly 64 samples");
    let mut buf = time.to_vec();
    plans().0.process(&mut buf);
    let scale = 1.0 / (FFT_SIZE as f64).sqrt();
    for v in &mut buf {
        *v *= scale;
    }
    buf
}

/// Inverse unitary DFT, length 64.
pub(crate) fn idft64(freq: &[Complex64]) -> Vec<Complex64> {
    assert_eq!(freq.len(), FFT_SIZE, "idft64 takes exactly 64 bins");
    let mut buf = freq.to_vec();
    plans().1.process(&mut buf);
    let scale = 1.0 / (FFT_SIZE as f64).sqrt();
    for v in &mut buf {
        *v *= scale;
    }
    buf
}
