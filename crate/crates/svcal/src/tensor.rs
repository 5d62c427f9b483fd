//! Dense (channels, freq, time) tensor used by the embedding network.

use crate::error::{Error, Result};

/// A dense rank-3 tensor laid out as `[channel][freq][time]` with `time`
/// contiguous in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorChw {
    channels: usize,
    freq: usize,
    time: usize,
    data: Vec<f64>,
}

impl TensorChw {
    pub fn zeros(channels: usize, freq: usize, time: usize) -> Self {
        Self {
            channels,
            freq,
            time,
            data: vec![0.0; channels * freq * time],
        }
    }

    /// Builds a tensor from a flat row-major `[c][f][t]` buffer.
    pub fn from_vec(channels: usize, freq: usize, time: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != channels * freq * time {
            return Err(Error::Data(format!(
                "tensor data length {} does not match shape {}x{}x{}",
                data.len(),
                channels,
                freq,
                time
            )));
        }
        Ok(Self {
            channels,
            freq,
            time,
            data,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn freq(&self) -> usize {
        self.freq
    }

    pub fn time(&self) -> usize {
        self.time
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.freq, self.time)
    }

    #[inline]
    pub fn get(&self, c: usize, f: usize, t: usize) -> f64 {
        self.data[(c * self.freq + f) * self.time + t]
    }

    #[inline]
    pub fn set(&mut self, c: usize, f: usize, t: usize, v: f64) {
        self.data[(c * self.freq + f) * self.time + t] = v;
    }

    /// Contiguous time row for one (channel, freq) pair.
    #[inline]
    pub fn row(&self, c: usize, f: usize) -> &[f64] {
        let start = (c * self.freq + f) * self.time;
        &self.data[start..start + self.time]
    }

    #[inline]
    pub fn row_mut(&mut self, c: usize, f: usize) -> &mut [f64] {
        let start = (c * self.freq + f) * self.time;
        &mut self.data[start..start + self.time]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Copies channels `[from, to)` into a new tensor.
    pub fn slice_channels(&self, from: usize, to: usize) -> Self {
        assert!(from <= to && to <= self.channels, "channel slice out of range");
        let plane = self.freq * self.time;
        Self {
            channels: to - from,
            freq: self.freq,
            time: self.time,
            data: self.data[from * plane..to * plane].to_vec(),
        }
    }

    /// Concatenates tensors along the channel axis. All inputs must share
    /// spatial shape.
    pub fn concat_channels(parts: &[Self]) -> Self {
        assert!(!parts.is_empty());
        let freq = parts[0].freq;
        let time = parts[0].time;
        let channels = parts.iter().map(|p| p.channels).sum();
        let mut data = Vec::with_capacity(channels * freq * time);
        for p in parts {
            assert!(
                p.freq == freq && p.time == time,
                "concat_channels: spatial shape mismatch"
            );
            data.extend_from_slice(&p.data);
        }
        Self {
            channels,
            freq,
            time,
            data,
        }
    }

    /// Elementwise sum; shapes must match.
    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.shape(), other.shape(), "add: shape mismatch");
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
        out
    }

    pub fn relu_inplace(&mut self) {
        for v in &mut self.data {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_round_trip() {
        let mut t = TensorChw::zeros(2, 3, 4);
        t.set(1, 2, 3, 7.5);
        assert_eq!(t.get(1, 2, 3), 7.5);
        assert_eq!(t.row(1, 2)[3], 7.5);
        assert_eq!(t.data()[(1 * 3 + 2) * 4 + 3], 7.5);
    }

    #[test]
    fn slice_and_concat_are_inverse() {
        let data: Vec<f64> = (0..24).map(|i| i as f64).collect();
        let t = TensorChw::from_vec(4, 2, 3, data).unwrap();
        let parts = [
            t.slice_channels(0, 1),
            t.slice_channels(1, 3),
            t.slice_channels(3, 4),
        ];
        assert_eq!(TensorChw::concat_channels(&parts), t);
    }

    #[test]
    fn from_vec_rejects_bad_length() {
        assert!(TensorChw::from_vec(2, 2, 2, vec![0.0; 7]).is_err());
    }
}
