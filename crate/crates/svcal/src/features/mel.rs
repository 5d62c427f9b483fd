//! Triangular mel filterbank (HTK mel scale, triangles in the mel domain).

/// Converts Hz to mel: `2595 * log10(1 + f/700)`.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

/// Converts mel back to Hz.
pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Precomputed filterbank mapping a power spectrum to `n_mels` energies.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    n_mels: usize,
    /// Per filter: weight for each of the `fft_size/2 + 1` spectrum bins.
    weights: Vec<Vec<f64>>,
    center_freqs: Vec<f64>,
}

impl MelFilterbank {
    /// Builds `n_mels` triangular filters spanning `[low_freq, high_freq]`.
    ///
    /// Filter edges are uniformly spaced in mel; each triangle is evaluated
    /// at the actual FFT bin frequencies, so adjacent filters cross at 0.5
    /// and per-bin weights sum to at most 1.
    pub fn new(n_mels: usize, fft_size: usize, sample_rate: u32, low_freq: f64, high_freq: f64) -> Self {
        let n_bins = fft_size / 2 + 1;
        let mel_low = hz_to_mel(low_freq);
        let mel_high = hz_to_mel(high_freq);
        let spacing = (mel_high - mel_low) / (n_mels + 1) as f64;

        let bin_mels: Vec<f64> = (0..n_bins)
            .map(|k| hz_to_mel(k as f64 * sample_rate as f64 / fft_size as f64))
            .collect();

        let mut weights = Vec::with_capacity(n_mels);
        let mut center_freqs = Vec::with_capacity(n_mels);
        for m in 0..n_mels {
            let left = mel_low + m as f64 * spacing;
            let center = left + spacing;
            let right = center + spacing;
            center_freqs.push(mel_to_hz(center));
            let w: Vec<f64> = bin_mels
                .iter()
                .map(|&bm| {
                    let up = (bm - left) / (center - left);
                    let down = (right - bm) / (right - center);
                    up.min(down).max(0.0)
                })
                .collect();
            weights.push(w);
        }
        Self {
            n_mels,
            weights,
            center_freqs,
        }
    }

    pub fn n_mels(&self) -> usize {
        self.n_mels
    }

    /// Center frequency (Hz) of filter `m`.
    pub fn center_freq(&self, m: usize) -> f64 {
        self.center_freqs[m]
    }

    /// Linear filter energies for one power spectrum.
    pub fn apply(&self, power_spectrum: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|w| {
                w.iter()
                    .zip(power_spectrum)
                    .map(|(wk, pk)| wk * pk)
                    .sum()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mel_mapping_round_trips() {
        for hz in [20.0, 440.0, 1000.0, 7600.0] {
            assert!((mel_to_hz(hz_to_mel(hz)) - hz).abs() < 1e-9);
        }
        // 1 kHz is ~1000 mel under the HTK formula.
        assert!((hz_to_mel(1000.0) - 999.98).abs() < 0.1);
    }

    #[test]
    fn per_bin_weight_sums_at_most_one() {
        let bank = MelFilterbank::new(80, 512, 16000, 20.0, 7600.0);
        let n_bins = 512 / 2 + 1;
        for k in 0..n_bins {
            let total: f64 = bank.weights.iter().map(|w| w[k]).sum();
            assert!(total <= 1.0 + 1e-12, "bin {k} weight sum {total}");
        }
    }

    #[test]
    fn centers_are_increasing_and_in_range() {
        let bank = MelFilterbank::new(80, 512, 16000, 20.0, 7600.0);
        for m in 1..80 {
            assert!(bank.center_freq(m) > bank.center_freq(m - 1));
        }
        assert!(bank.center_freq(0) > 20.0);
        assert!(bank.center_freq(79) < 7600.0);
    }
}
