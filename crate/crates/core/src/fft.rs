//! 3-D FFT on a cubic grid built from 1-D rustfft passes along each axis.
//! Layout: index = (z * n + y) * n + x.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Clone)]
pub struct Fft3 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft3").field("n", &self.n).finish()
    }
}

impl Fft3 {
    pub fn new(n: usize) -> Fft3 {
        let mut p = FftPlanner::new();
        Fft3 {
            n,
            fwd: p.plan_fft_forward(n),
            inv: p.plan_fft_inverse(n),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Unnormalised forward transform, sign exp(-2 pi i j k / n).
    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.fwd);
    }

    /// Inverse transform scaled by 1/n^3.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inv);
        let s = 1.0 / (self.n * self.n * self.n) as f64;
        for v in data.iter_mut() {
            *v *= s;
        }
    }

    fn run(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        assert_eq!(data.len(), n * n * n, "grid size mismatch");
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        // x: contiguous lines
        plan.process_with_scratch(data, &mut scratch);
        let mut block = vec![Complex64::new(0.0, 0.0); n * n];
        // y: per z-plane, gather columns
        for z in 0..n {
            let plane = &mut data[z * n * n..(z + 1) * n * n];
            for y in 0..n {
                for x in 0..n {
                    block[x * n + y] = plane[y * n + x];
                }
            }
            plan.process_with_scratch(&mut block, &mut scratch);
            for y in 0..n {
                for x in 0..n {
                    plane[y * n + x] = block[x * n + y];
                }
            }
        }
        // z: per y, gather the (z, x) block
        for y in 0..n {
            for z in 0..n {
                let row = &data[(z * n + y) * n..(z * n + y) * n + n];
                for x in 0..n {
                    block[x * n + z] = row[x];
                }
            }
            plan.process_with_scratch(&mut block, &mut scratch);
            for z in 0..n {
                let row = &mut data[(z * n + y) * n..(z * n + y) * n + n];
                for x in 0..n {
                    row[x] = block[x * n + z];
                }
            }
        }
    }
}
