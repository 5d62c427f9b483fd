//! Decode a WAV file and extract 80-dimensional log-mel features.
//!
//! Synthesizes a two-tone test file first, so the example is
//! self-contained:
//!
//! ```bash
//! cargo run --example featurize_wav
//! ```

use svcal::features::{featurize, FeatureConfig};
use svcal::{audio, Result};

fn main() -> Result<()> {
    let rate = 16000u32;
    let samples: Vec<f64> = (0..rate as usize * 2)
        .map(|i| {
            let t = i as f64 / rate as f64;
            0.4 * (2.0 * std::f64::consts::PI * 220.0 * t).sin()
                + 0.3 * (2.0 * std::f64::consts::PI * 1763.0 * t).sin()
        })
        .collect();
    let wav_path = std::env::temp_dir().join("svcal_example.wav");
    audio::write_wav(&wav_path, &samples, rate)?;

    let signal = audio::read_wav(&wav_path)?;
    println!(
        "decoded {}: {} samples at {} Hz ({:.2} s)",
        wav_path.display(),
        signal.len(),
        signal.sample_rate(),
        signal.duration_secs()
    );

    let config = FeatureConfig::default();
    let features = featurize(&signal, &config, "example")?;
    println!(
        "features: {} frames x {} mels (frame {} ms, shift {} ms, fft {})",
        features.n_frames(),
        features.n_mels(),
        config.frame_len_ms,
        config.frame_shift_ms,
        config.effective_fft_size(rate)
    );

    // Show the strongest mel bins of the middle frame; the two tones stand
    // out clearly.
    let mid = features.frame(features.n_frames() / 2);
    let mut ranked: Vec<(usize, f64)> = mid.iter().copied().enumerate().collect();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    println!("strongest mel bins in the middle frame:");
    for (bin, energy) in ranked.iter().take(4) {
        println!("  bin {bin:2}  log-energy {energy:8.3}");
    }
    Ok(())
}
