//! On-disk interchange format for quantized IQ captures.
//!
//! The sample file holds little-endian 16-bit words, interleaved I then Q,
//! exactly as [`crate::frontend::scale_quantize`] produces them. A text
//! sidecar at `<path>.meta` records what the words mean: sample rate, which
//! chain stage was tapped, the normalization scale (the peak divided out
//! before quantization), and the sample count.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::frontend::QuantizedIq;
use crate::{Error, Result};

/// Sidecar metadata for one capture file.
#[derive(Debug, Clone, PartialEq)]
pub struct IqFileMeta {
    pub sample_rate_hz: f64,
    /// Name of the chain stage the capture was taken at.
    pub stage: String,
    /// Peak magnitude divided out before quantization; multiply the
    /// dequantized floats by this to restore absolute levels.
    pub scale: f64,
    pub num_samples: usize,
}

/// Writes the words and the sidecar. The sidecar lands at `<path>.meta`.
pub fn write_iq_file(path: &Path, iq: &QuantizedIq, meta: &IqFileMeta) -> Result<()> {
    if meta.num_samples != iq.num_samples() {
        return Err(Error::InvalidArgument(format!(
            "metadata claims {} samples but the buffer holds {}",
            meta.num_samples,
            iq.num_samples()
        )));
    }
    let mut bytes = Vec::with_capacity(iq.words.len() * 2);
    for w in &iq.words {
        bytes.extend_from_slice(&w.to_le_bytes());
    }
    fs::write(path, bytes)?;

    let mut sidecar = fs::File::create(sidecar_path(path))?;
    writeln!(sidecar, "sample_rate_hz = {:.6}", meta.sample_rate_hz)?;
    writeln!(sidecar, "stage = {}", meta.stage)?;
    writeln!(sidecar, "scale = {:.12e}", meta.scale)?;
    writeln!(sidecar, "num_samples = {}", meta.num_samples)?;
    Ok(())
}

/// Reads a capture and its sidecar back.
pub fn read_iq_file(path: &Path) -> Result<(QuantizedIq, IqFileMeta)> {
    let bytes = fs::read(path)?;
    if bytes.len() % 4 != 0 {
        return Err(Error::InvalidArgument(format!(
            "IQ file length {} is not a multiple of 4 bytes",
            bytes.len()
        )));
    }
    let words: Vec<i16> = bytes
        .chunks_exact(2)
        .map(|b| i16::from_le_bytes([b[0], b[1]]))
        .collect();

    let text = fs::read_to_string(sidecar_path(path))?;
    let mut sample_rate_hz = None;
    let mut stage = None;
    let mut scale = None;
    let mut num_samples = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::InvalidArgument(format!("sidecar line {} has no '='", lineno + 1))
        })?;
        let key = key.trim();
        let value = value.trim();
        let bad = |what: &str| {
            Error::InvalidArgument(format!("sidecar {key} is not a valid {what}: {value}"))
        };
        match key {
            "sample_rate_hz" => {
                sample_rate_hz = Some(value.parse::<f64>().map_err(|_| bad("number"))?)
            }
            "stage" => stage = Some(value.to_string()),
            "scale" => scale = Some(value.parse::<f64>().map_err(|_| bad("number"))?),
            "num_samples" => {
                num_samples = Some(value.parse::<usize>().map_err(|_| bad("count"))?)
            }
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "unknown sidecar key: {key}"
                )))
            }
        }
    }
    let meta = IqFileMeta {
        sample_rate_hz: sample_rate_hz
            .ok_or_else(|| Error::InvalidArgument("sidecar missing sample_rate_hz".into()))?,
        stage: stage.ok_or_else(|| Error::InvalidArgument("sidecar missing stage".into()))?,
        scale: scale.ok_or_else(|| Error::InvalidArgument("sidecar missing scale".into()))?,
        num_samples: num_samples
            .ok_or_else(|| Error::InvalidArgument("sidecar missing num_samples".into()))?,
    };
    if meta.num_samples * 2 != words.len() {
        return Err(Error::InvalidArgument(format!(
            "sidecar claims {} samples but the file holds {}",
            meta.num_samples,
            words.len() / 2
        )));
    }
    Ok((QuantizedIq { words }, meta))
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut name = path.as_os_str().to_os_string();
    name.push(".meta");
    std::path::PathBuf::from(name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{dequantize, scale_quantize};
    use crate::layout::DUC_RATE_HZ;
    use crate::IqBuffer;
    use num_complex::Complex64;

    fn temp_path(name: &str) -> std::path::PathBuf {
        let mut p = std::env::temp_dir();
        p.push(format!("beamlink_iqfile_{}_{}", std::process::id(), name));
        p
    }

    #[test]
    fn write_read_round_trip_is_bit_exact() {
        let signal = IqBuffer::new(
            (0..300)
                .map(|n| Complex64::new((0.05 * n as f64).sin(), (0.03 * n as f64).cos()))
                .collect(),
            DUC_RATE_HZ,
        );
        let (q, peak) = scale_quantize(&signal).unwrap();
        let meta = IqFileMeta {
            sample_rate_hz: DUC_RATE_HZ,
            stage: "quantized".into(),
            scale: peak,
            num_samples: q.num_samples(),
        };
        let path = temp_path("roundtrip.iq");
        write_iq_file(&path, &q, &meta).unwrap();
        let (q2, meta2) = read_iq_file(&path).unwrap();
        assert_eq!(q, q2);
        assert_eq!(meta.stage, meta2.stage);
        assert_eq!(meta.num_samples, meta2.num_samples);
        assert!((meta.sample_rate_hz - meta2.sample_rate_hz).abs() < 1e-6);
        assert!((meta.scale - meta2.scale).abs() / meta.scale < 1e-12);

        // Restoring absolute levels through the recorded scale matches the
        // original within quantization error.
        let back = dequantize(&q2, meta2.sample_rate_hz).unwrap();
        for (orig, deq) in signal.samples.iter().zip(back.samples.iter()) {
            assert!((orig - deq * meta2.scale).norm() < 1e-4);
        }
        std::fs::remove_file(&path).ok();
        std::fs::remove_file(sidecar_path(&path)).ok();
    }

    #[test]
    fn malformed_sidecar_is_rejected() {
        let path = temp_path("badmeta.iq");
        std::fs::write(&path, [0u8, 0, 0, 0]).unwrap();
        std::fs::write(sidecar_path(&path), "sample_rate_hz 30720000\n").unwrap();
        assert!(read_iq_file(&path).is_err());
        std::fs::write(
            sidecar_path(&path),
            "sample_rate_hz = 30720000\nstage = x\nscale = 1.0\nnum_samples = 99\n",
        )
        .unwrap();
        // Sample count disagrees with the file payload.
        assert!(read_iq_file(&path).is_err());
        std::fs::remove_file(&path).ok();
        std::fs::remove_file(sidecar_path(&path)).ok();
    }

    #[test]
    fn odd_length_file_is_rejected() {
        let path = temp_path("oddlen.iq");
        std::fs::write(&path, [1u8, 2, 3]).unwrap();
        std::fs::write(
            sidecar_path(&path),
            "sample_rate_hz = 1.0\nstage = x\nscale = 1.0\nnum_samples = 0\n",
        )
        .unwrap();
        assert!(read_iq_file(&path).is_err());
        std::fs::remove_file(&path).ok();
        std::fs::remove_file(sidecar_path(&path)).ok();
    }
}
