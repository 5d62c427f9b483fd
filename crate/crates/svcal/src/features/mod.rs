//! Log-mel filterbank front end: framing, windowing, FFT, mel integration.
//!
//! The defaults target 16 kHz speech: 25 ms frames shifted by 10 ms, 80 mel
//! filters between 20 Hz and 7600 Hz, Hamming window, pre-emphasis 0.97.
//! Every knob is exposed in [`FeatureConfig`].

pub mod fft;
pub mod mel;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use mel::MelFilterbank;

/// Mono audio in the nominal range [-1, 1].
#[derive(Debug, Clone)]
pub struct AudioSignal {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioSignal {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Data("sample_rate must be positive".into()));
        }
        if samples.is_empty() {
            return Err(Error::Data("audio signal must contain at least one sample".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::Data("audio signal contains non-finite samples".into()));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Window applied to each frame after pre-emphasis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    Hamming,
    Hann,
    Rectangular,
}

impl WindowKind {
    pub fn name(&self) -> &'static str {
        match self {
            WindowKind::Hamming => "hamming",
            WindowKind::Hann => "hann",
            WindowKind::Rectangular => "rectangular",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "hamming" => Ok(WindowKind::Hamming),
            "hann" => Ok(WindowKind::Hann),
            "rectangular" => Ok(WindowKind::Rectangular),
            other => Err(Error::Parse(format!("unknown window kind '{other}'"))),
        }
    }

    fn coefficients(&self, len: usize) -> Vec<f64> {
        use std::f64::consts::PI;
        match self {
            WindowKind::Rectangular => vec![1.0; len],
            WindowKind::Hamming => (0..len)
                .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / (len - 1) as f64).cos())
                .collect(),
            WindowKind::Hann => (0..len)
                .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / (len - 1) as f64).cos())
                .collect(),
        }
    }
}

/// Front-end configuration. `fft_size = None` selects the next power of two
/// at or above the frame length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub frame_len_ms: f64,
    pub frame_shift_ms: f64,
    pub n_mels: usize,
    pub fft_size: Option<usize>,
    pub low_freq: f64,
    pub high_freq: f64,
    /// Pre-emphasis coefficient in [0, 1).
    pub preemphasis: f64,
    /// When true, adds low-level Gaussian noise (1/32768 rms) before
    /// pre-emphasis. The noise source is seeded with a fixed constant, so
    /// featurization stays reproducible across runs either way.
    pub dither: bool,
    pub window: WindowKind,
    /// Linear-energy floor applied before the log.
    pub energy_floor: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            frame_len_ms: 25.0,
            frame_shift_ms: 10.0,
            n_mels: 80,
            fft_size: None,
            low_freq: 20.0,
            high_freq: 7600.0,
            preemphasis: 0.97,
            dither: false,
            window: WindowKind::Hamming,
            energy_floor: 1e-10,
        }
    }
}

impl FeatureConfig {
    /// Frame length in samples at the given rate.
    pub fn frame_len_samples(&self, sample_rate: u32) -> usize {
        (self.frame_len_ms * sample_rate as f64 / 1000.0).round() as usize
    }

    /// Frame shift in samples at the given rate.
    pub fn frame_shift_samples(&self, sample_rate: u32) -> usize {
        (self.frame_shift_ms * sample_rate as f64 / 1000.0).round() as usize
    }

    /// Effective FFT size for the given rate (explicit or next power of two).
    pub fn effective_fft_size(&self, sample_rate: u32) -> usize {
        match self.fft_size {
            Some(n) => n,
            None => self.frame_len_samples(sample_rate).next_power_of_two(),
        }
    }

    /// Validates the config against a concrete sample rate.
    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        if self.n_mels == 0 {
            return Err(Error::Config("n_mels must be >= 1".into()));
        }
        if self.frame_len_ms <= 0.0 || self.frame_shift_ms <= 0.0 {
            return Err(Error::Config("frame length and shift must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.preemphasis) {
            return Err(Error::Config("preemphasis must be in [0, 1)".into()));
        }
        if self.low_freq <= 0.0 || self.low_freq >= self.high_freq {
            return Err(Error::Config("need 0 < low_freq < high_freq".into()));
        }
        if self.high_freq > sample_rate as f64 / 2.0 {
            return Err(Error::Config(format!(
                "high_freq {} exceeds Nyquist {} at {} Hz",
                self.high_freq,
                sample_rate as f64 / 2.0,
                sample_rate
            )));
        }
        if self.energy_floor <= 0.0 {
            return Err(Error::Config("energy_floor must be positive".into()));
        }
        let flen = self.frame_len_samples(sample_rate);
        let fft = self.effective_fft_size(sample_rate);
        if !fft.is_power_of_two() {
            return Err(Error::Config(format!("fft_size {fft} is not a power of two")));
        }
        if fft < flen {
            return Err(Error::Config(format!(
                "fft_size {fft} smaller than frame length {flen} samples"
            )));
        }
        Ok(())
    }

    /// FNV-1a hash of the canonical key=value rendition; identifies the
    /// config in feature and report metadata.
    pub fn hash(&self) -> u64 {
        let canonical = format!(
            "frame_len_ms={};frame_shift_ms={};n_mels={};fft_size={};low_freq={};high_freq={};preemphasis={};dither={};window={};energy_floor={}",
            self.frame_len_ms,
            self.frame_shift_ms,
            self.n_mels,
            self.fft_size.map_or("auto".to_string(), |v| v.to_string()),
            self.low_freq,
            self.high_freq,
            self.preemphasis,
            self.dither,
            self.window.name(),
            self.energy_floor
        );
        fnv1a(canonical.as_bytes())
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// T x n_mels matrix of log mel-filter energies.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n_frames: usize,
    n_mels: usize,
    /// Row-major: frame t occupies `data[t*n_mels .. (t+1)*n_mels]`.
    data: Vec<f64>,
    utterance_id: String,
    config_hash: u64,
}

impl FeatureMatrix {
    pub fn new(
        n_frames: usize,
        n_mels: usize,
        data: Vec<f64>,
        utterance_id: String,
        config_hash: u64,
    ) -> Result<Self> {
        if data.len() != n_frames * n_mels {
            return Err(Error::Data(format!(
                "feature data length {} does not match {}x{}",
                data.len(),
                n_frames,
                n_mels
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Internal("feature matrix contains non-finite entries".into()));
        }
        Ok(Self {
            n_frames,
            n_mels,
            data,
            utterance_id,
            config_hash,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn n_mels(&self) -> usize {
        self.n_mels
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.data[t * self.n_mels..(t + 1) * self.n_mels]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn utterance_id(&self) -> &str {
        &self.utterance_id
    }

    pub fn config_hash(&self) -> u64 {
        self.config_hash
    }
}

/// Number of complete frames in a signal of `n_samples`.
pub fn frame_count(n_samples: usize, frame_len: usize, frame_shift: usize) -> usize {
    if n_samples < frame_len {
        0
    } else {
        1 + (n_samples - frame_len) / frame_shift
    }
}

/// Cuts the signal into pre-emphasized, windowed frames.
///
/// The last partial frame is dropped. Fails with an "utterance too short"
/// error when the signal does not cover a single frame.
pub fn frame_signal(signal: &AudioSignal, config: &FeatureConfig) -> Result<Vec<Vec<f64>>> {
    config.validate(signal.sample_rate())?;
    let flen = config.frame_len_samples(signal.sample_rate());
    let shift = config.frame_shift_samples(signal.sample_rate());
    if signal.len() < flen {
        return Err(Error::Data(format!(
            "utterance too short: need at least {} samples, got {}",
            flen,
            signal.len()
        )));
    }

    let mut samples = signal.samples().to_vec();
    if config.dither {
        // Fixed seed keeps featurization reproducible run to run.
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_d17e);
        let amp = 1.0 / 32768.0;
        for s in &mut samples {
            let (u1, u2): (f64, f64) = (rng.gen::<f64>().max(f64::MIN_POSITIVE), rng.gen());
            let gauss = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
            *s += amp * gauss;
        }
    }

    let window = config.window.coefficients(flen);
    let n_frames = frame_count(samples.len(), flen, shift);
    let mut frames = Vec::with_capacity(n_frames);
    for t in 0..n_frames {
        let start = t * shift;
        let src = &samples[start..start + flen];
        let mut frame = Vec::with_capacity(flen);
        // Pre-emphasis; the first sample is emphasized against itself.
        frame.push(src[0] * (1.0 - config.preemphasis) * window[0]);
        for i in 1..flen {
            frame.push((src[i] - config.preemphasis * src[i - 1]) * window[i]);
        }
        frames.push(frame);
    }
    Ok(frames)
}

/// Log mel-filter energies of one already-windowed frame.
///
/// Prefer [`featurize`] for whole utterances; this entry point rebuilds the
/// filterbank on every call.
pub fn log_mel_filterbank(frame: &[f64], config: &FeatureConfig, sample_rate: u32) -> Result<Vec<f64>> {
    config.validate(sample_rate)?;
    let fft_size = config.effective_fft_size(sample_rate);
    if frame.len() > fft_size {
        return Err(Error::Data(format!(
            "frame length {} exceeds fft size {}",
            frame.len(),
            fft_size
        )));
    }
    let bank = MelFilterbank::new(config.n_mels, fft_size, sample_rate, config.low_freq, config.high_freq);
    Ok(log_mel_with_bank(frame, fft_size, &bank, config.energy_floor))
}

fn log_mel_with_bank(frame: &[f64], fft_size: usize, bank: &MelFilterbank, floor: f64) -> Vec<f64> {
    let spectrum = fft::real_power_spectrum(frame, fft_size);
    bank.apply(&spectrum)
        .into_iter()
        .map(|e| e.max(floor).ln())
        .collect()
}

/// Full front end: framing, windowing, FFT, mel integration, log.
pub fn featurize(signal: &AudioSignal, config: &FeatureConfig, utterance_id: &str) -> Result<FeatureMatrix> {
    let frames = frame_signal(signal, config)?;
    let fft_size = config.effective_fft_size(signal.sample_rate());
    let bank = MelFilterbank::new(
        config.n_mels,
        fft_size,
        signal.sample_rate(),
        config.low_freq,
        config.high_freq,
    );
    let mut data = Vec::with_capacity(frames.len() * config.n_mels);
    for frame in &frames {
        data.extend(log_mel_with_bank(frame, fft_size, &bank, config.energy_floor));
    }
    FeatureMatrix::new(
        frames.len(),
        config.n_mels,
        data,
        utterance_id.to_string(),
        config.hash(),
    )
}
