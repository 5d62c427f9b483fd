//! Iterative radix-2 FFT over f64 buffers.

use std::f64::consts::PI;

/// In-place iterative radix-2 Cooley-Tukey transform.
///
/// `re`/`im` must have the same power-of-two length. Forward transform,
/// no normalization.
pub fn fft_inplace(re: &mut [f64], im: &mut [f64]) {
    let n = re.len();
    assert_eq!(n, im.len(), "fft: re/im length mismatch");
    assert!(n.is_power_of_two(), "fft: length must be a power of two");
    if n <= 1 {
        return;
    }

    // Bit-reversal permutation.
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            re.swap(i, j);
            im.swap(i, j);
        }
    }

    let mut len = 2;
    while len <= n {
        let ang = -2.0 * PI / len as f64;
        let (w_re, w_im) = (ang.cos(), ang.sin());
        for start in (0..n).step_by(len) {
            let mut cur_re = 1.0;
            let mut cur_im = 0.0;
            for k in 0..len / 2 {
                let a = start + k;
                let b = a + len / 2;
                let t_re = re[b] * cur_re - im[b] * cur_im;
                let t_im = re[b] * cur_im + im[b] * cur_re;
                re[b] = re[a] - t_re;
                im[b] = im[a] - t_im;
                re[a] += t_re;
                im[a] += t_im;
                let next_re = cur_re * w_re - cur_im * w_im;
                cur_im = cur_re * w_im + cur_im * w_re;
                cur_re = next_re;
            }
        }
        len <<= 1;
    }
}

/// Power spectrum of a real frame zero-padded to `fft_size`.
///
/// Returns `fft_size / 2 + 1` squared magnitudes (DC through Nyquist).
pub fn real_power_spectrum(frame: &[f64], fft_size: usize) -> Vec<f64> {
    assert!(frame.len() <= fft_size, "frame longer than fft size");
    let mut re = vec![0.0; fft_size];
    let mut im = vec![0.0; fft_size];
    re[..frame.len()].copy_from_slice(frame);
    fft_inplace(&mut re, &mut im);
    (0..=fft_size / 2)
        .map(|k| re[k] * re[k] + im[k] * im[k])
        .collect()
}
