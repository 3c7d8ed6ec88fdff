//! Minimal 3D complex FFT on flat `Vec<Complex<f64>>` buffers, built from
//! cached 1D rustfft plans. Each axis is brought into contiguous layout by a
//! full-buffer permutation and transformed in one batched call. Forward
//! transforms are unnormalized; the inverse applies the 1/N³ factor.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

#[derive(Clone)]
struct Plan {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

fn plan(n: usize) -> Plan {
    static PLANS: OnceLock<Mutex<HashMap<usize, Plan>>> = OnceLock::new();
    let cache = PLANS.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().unwrap();
    map.entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Plan {
                fwd: planner.plan_fft_forward(n),
                inv: planner.plan_fft_inverse(n),
            }
        })
        .clone()
}

/// Bring axis `axis` into the fastest position: out[..] indexed with the
/// chosen axis contiguous. The permutations used here are involutions, so
/// the same call maps back.
fn permute_axis(src: &[Complex<f64>], dst: &mut [Complex<f64>], n: usize, axis: usize) {
    match axis {
        1 => {
            // swap x and y within each z-plane
            for iz in 0..n {
                let plane = iz * n * n;
                for iy in 0..n {
                    let row = plane + iy * n;
                    for ix in 0..n {
                        dst[plane + ix * n + iy] = src[row + ix];
                    }
                }
            }
        }
        2 => {
            // swap x and z
            for iz in 0..n {
                for iy in 0..n {
                    let row = (iz * n + iy) * n;
                    for ix in 0..n {
                        dst[(ix * n + iy) * n + iz] = src[row + ix];
                    }
                }
            }
        }
        _ => unreachable!("axis 0 is already contiguous"),
    }
}

fn transform_axes(data: &mut [Complex<f64>], n: usize, fft: &Arc<dyn Fft<f64>>) {
    debug_assert_eq!(data.len(), n * n * n);
    thread_local! {
        static WORK: std::cell::RefCell<(Vec<Complex<f64>>, Vec<Complex<f64>>)> =
            const { std::cell::RefCell::new((Vec::new(), Vec::new())) };
    }
    WORK.with(|cell| {
        let mut work = cell.borrow_mut();
        let (scratch, buf) = &mut *work;
        scratch.resize(fft.get_inplace_scratch_len(), Complex::default());
        buf.resize(data.len(), Complex::default());
        // x-axis: one batched call over all N² contiguous lines.
        fft.process_with_scratch(data, scratch);
        // y and z axes: permute to contiguous, batch, permute back.
        for axis in [1usize, 2] {
            permute_axis(data, buf, n, axis);
            fft.process_with_scratch(buf, scratch);
            permute_axis(buf, data, n, axis);
        }
    });
}

/// Forward 3D FFT of a real scalar grid.
pub fn forward(values: &[f64], n: usize) -> Vec<Complex<f64>> {
    let mut data: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
    transform_axes(&mut data, n, &plan(n).fwd);
    data
}

/// Inverse 3D FFT back to a real scalar grid (imaginary parts discarded).
pub fn inverse(spectral: &[Complex<f64>], n: usize) -> Vec<f64> {
    let mut data = spectral.to_vec();
    transform_axes(&mut data, n, &plan(n).inv);
    let scale = 1.0 / (n * n * n) as f64;
    data.into_iter().map(|c| c.re * scale).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn roundtrip_identity() {
        let n = 16;
        let values: Vec<f64> = (0..n * n * n)
            .map(|i| ((i * 2654435761usize) % 1000) as f64 / 1000.0 - 0.5)
            .collect();
        let back = inverse(&forward(&values, n), n);
        let max = values
            .iter()
            .zip(&back)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(max < 1e-13, "roundtrip error {max}");
    }

    #[test]
    fn single_mode_lands_in_expected_bin() {
        let n = 8;
        let h = TAU / n as f64;
        let mut values = vec![0.0; n * n * n];
        for iz in 0..n {
            for iy in 0..n {
                for ix in 0..n {
                    values[(iz * n + iy) * n + ix] = (2.0 * ix as f64 * h).cos();
                }
            }
        }
        let spec = forward(&values, n);
        // cos(2x) = (e^{i2x} + e^{-i2x})/2: bins k_x = 2 and k_x = -2 (index 6).
        let total = (n * n * n) as f64;
        assert!((spec[2].re / total - 0.5).abs() < 1e-12);
        assert!((spec[n - 2].re / total - 0.5).abs() < 1e-12);
        let energy_elsewhere: f64 = spec
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != 2 && *i != n - 2)
            .map(|(_, c)| c.norm())
            .sum();
        assert!(energy_elsewhere / total < 1e-12);
    }

    #[test]
    fn axes_are_transformed_independently() {
        // A y-only mode must land in a pure k_y bin.
        let n = 8;
        let h = TAU / n as f64;
        let mut values = vec![0.0; n * n * n];
        for iz in 0..n {
            for iy in 0..n {
                for ix in 0..n {
                    values[(iz * n + iy) * n + ix] =
                        (3.0 * iy as f64 * h).sin() + (iz as f64 * h).cos();
                }
            }
        }
        let spec = forward(&values, n);
        let total = (n * n * n) as f64;
        // sin(3y): ±i/2 at k_y = ∓3; cos(z): ½ at k_z = ±1.
        assert!((spec[3 * n].im / total + 0.5).abs() < 1e-12);
        assert!((spec[(n - 3) * n].im / total - 0.5).abs() < 1e-12);
        assert!((spec[n * n].re / total - 0.5).abs() < 1e-12);
        assert!((spec[(n - 1) * n * n].re / total - 0.5).abs() < 1e-12);
    }
}
