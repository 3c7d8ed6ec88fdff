use rustfft::{num_complex::Complex, FftPlanner};
use std::time::Instant;

fn main() {
    let n = 32;
    let len = n * n * n;
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    let mut data: Vec<Complex<f64>> = (0..len)
        .map(|i| Complex::new((i % 97) as f64, 0.0))
        .collect();
    let mut scratch = vec![Complex::default(); fft.get_inplace_scratch_len()];

    let t0 = Instant::now();
    for _ in 0..100 {
        fft.process_with_scratch(&mut data, &mut scratch);
    }
    println!("batched x-axis pass x100: {:?}", t0.elapsed());

    // permute cost
    let mut buf = vec![Complex::default(); len];
    let t0 = Instant::now();
    for _ in 0..100 {
        for iz in 0..n {
            let plane = iz * n * n;
            for iy in 0..n {
                let row = plane + iy * n;
                for ix in 0..n {
                    buf[plane + ix * n + iy] = data[row + ix];
                }
            }
        }
    }
    println!("xy permute x100: {:?}", t0.elapsed());

    let t0 = Instant::now();
    for _ in 0..100 {
        for iz in 0..n {
            for iy in 0..n {
                let row = (iz * n + iy) * n;
                for ix in 0..n {
                    buf[(ix * n + iy) * n + iz] = data[row + ix];
                }
            }
        }
    }
    println!("xz permute x100: {:?}", t0.elapsed());

    let t0 = Instant::now();
    for _ in 0..100 {
        let full = stochastic_euler_fft_forward(&data);
        std::hint::black_box(&full);
    }
    println!("(clone+scale baseline) x100: {:?}", t0.elapsed());
}

fn stochastic_euler_fft_forward(d: &[Complex<f64>]) -> Vec<Complex<f64>> {
    d.to_vec()
}
