//! WAV reading and writing (RIFF, PCM 16-bit signed little-endian, mono).

use std::path::Path;

use crate::error::{Error, Result};
use crate::features::AudioSignal;

fn read_u16(bytes: &[u8], at: usize) -> Result<u16> {
    bytes
        .get(at..at + 2)
        .map(|b| u16::from_le_bytes([b[0], b[1]]))
        .ok_or_else(|| Error::Parse(format!("wav truncated at offset {at}")))
}

fn read_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Parse(format!("wav truncated at offset {at}")))
}

/// Decodes a mono 16-bit PCM WAV byte stream into unit-range samples.
///
/// Sample values are divided by 32768. Any other encoding (stereo, non-PCM,
/// other bit depths) is rejected with an error naming the offending field.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioSignal> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" {
        return Err(Error::Parse("not a RIFF file (bad magic at offset 0)".into()));
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(Error::Parse("RIFF file is not WAVE (offset 8)".into()));
    }

    let mut fmt: Option<(u16, u16, u32, u16)> = None; // format, channels, rate, bits
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = read_u32(bytes, pos + 4)? as usize;
        let body_start = pos + 8;
        let body_end = body_start + size;
        if body_end > bytes.len() {
            return Err(Error::Parse(format!(
                "chunk '{}' at offset {pos} overruns file ({} > {})",
                String::from_utf8_lossy(id),
                body_end,
                bytes.len()
            )));
        }
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(Error::Parse(format!("fmt chunk too small ({size} bytes)")));
                }
                fmt = Some((
                    read_u16(bytes, body_start)?,
                    read_u16(bytes, body_start + 2)?,
                    read_u32(bytes, body_start + 4)?,
                    read_u16(bytes, body_start + 14)?,
                ));
            }
            b"data" => data = Some(&bytes[body_start..body_end]),
            _ => {} // skip LIST, fact, etc.
        }
        // Chunks are word-aligned.
        pos = body_end + (size & 1);
    }

    let (format, channels, rate, bits) =
        fmt.ok_or_else(|| Error::Parse("wav has no fmt chunk".into()))?;
    if format != 1 {
        return Err(Error::Parse(format!(
            "unsupported wav format code {format} (only PCM=1 is supported)"
        )));
    }
    if channels != 1 {
        return Err(Error::Parse(format!(
            "unsupported channel count {channels} (only mono is supported)"
        )));
    }
    if bits != 16 {
        return Err(Error::Parse(format!(
            "unsupported bit depth {bits} (only 16-bit PCM is supported)"
        )));
    }
    let data = data.ok_or_else(|| Error::Parse("wav has no data chunk".into()))?;
    if data.len() % 2 != 0 {
        return Err(Error::Parse("wav data chunk has odd byte length".into()));
    }

    let samples: Vec<f64> = data
        .chunks_exact(2)
        .map(|b| i16::from_le_bytes([b[0], b[1]]) as f64 / 32768.0)
        .collect();
    AudioSignal::new(samples, rate)
}

/// Reads and decodes a WAV file.
pub fn read_wav(path: &Path) -> Result<AudioSignal> {
    let bytes = std::fs::read(path)?;
    decode_wav(&bytes).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Encodes unit-range samples as a mono 16-bit PCM WAV byte stream.
///
/// Samples are quantized by 32768 and clamped to the i16 range, the
/// inverse of the decoder's division.
pub fn encode_wav(samples: &[f64], sample_rate: u32) -> Vec<u8> {
    let data_len = (samples.len() * 2) as u32;
    let riff_len = 4 + (8 + 16) + (8 + data_len);
    let mut out = Vec::with_capacity(8 + riff_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&riff_len.to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in samples {
        let q = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    out
}

/// Encodes and writes a mono 16-bit PCM WAV file.
pub fn write_wav(path: &Path, samples: &[f64], sample_rate: u32) -> Result<()> {
    std::fs::write(path, encode_wav(samples, sample_rate))?;
    Ok(())
}
