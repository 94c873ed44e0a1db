//! Cubic 3D FFT on top of rustfft's 1D plans.
//!
//! Layout is x-fastest: `index = x + n * (y + n * z)`.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

pub struct Fft3 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Fft3 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft3 {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Forward transform. Input is nonzero only in `[0, occupied)^3`, which
    /// lets the first two passes skip lines that are identically zero.
    pub fn forward(&self, data: &mut [Complex64], occupied: usize) {
        self.transform(data, occupied.min(self.n), &self.forward);
    }

    /// Unnormalized inverse transform.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, self.n, &self.inverse);
    }

    fn transform(&self, data: &mut [Complex64], occ: usize, fft: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        assert_eq!(data.len(), n * n * n);
        let plane = n * n;

        // x: contiguous rows; only rows with y < occ, z < occ can be nonzero
        data.par_chunks_mut(plane).take(occ).for_each(|pl| {
            let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
            fft.process_with_scratch(&mut pl[..occ * n], &mut scratch);
        });

        // y: transpose each z-plane, transform rows, transpose back
        data.par_chunks_mut(plane).take(occ).for_each(|pl| {
            let mut t = vec![Complex64::default(); plane];
            let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
            transpose(pl, &mut t, n);
            fft.process_with_scratch(&mut t, &mut scratch);
            transpose(&t, pl, n);
        });

        // z: gather x-z slabs for each y
        let mut slab = vec![Complex64::default(); plane];
        let mut col = vec![Complex64::default(); plane];
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        for y in 0..n {
            for z in 0..n {
                let src = n * (y + n * z);
                slab[z * n..(z + 1) * n].copy_from_slice(&data[src..src + n]);
            }
            transpose(&slab, &mut col, n);
            fft.process_with_scratch(&mut col, &mut scratch);
            transpose(&col, &mut slab, n);
            for z in 0..n {
                let dst = n * (y + n * z);
                data[dst..dst + n].copy_from_slice(&slab[z * n..(z + 1) * n]);
            }
        }
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], n: usize) {
    const B: usize = 16;
    for i0 in (0..n).step_by(B) {
        for j0 in (0..n).step_by(B) {
            for i in i0..(i0 + B).min(n) {
                for j in j0..(j0 + B).min(n) {
                    dst[j * n + i] = src[i * n + j];
                }
            }
        }
    }
}
