//! Multi-dimensional complex FFT on the periodic grid, built on `rustfft`.
//!
//! Layout is row-major with axis 0 slowest. The forward transform is
//! unnormalized; the inverse divides by `N^n`.

use std::cell::RefCell;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::field::Grid;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) struct FftNd {
    dim: usize,
    points: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl FftNd {
    pub(crate) fn new(grid: &Grid) -> Self {
        let (forward, inverse) = PLANNER.with(|p| {
            let mut p = p.borrow_mut();
            (
                p.plan_fft_forward(grid.points),
                p.plan_fft_inverse(grid.points),
            )
        });
        FftNd {
            dim: grid.dim,
            points: grid.points,
            forward,
            inverse,
        }
    }

    pub(crate) fn forward(&self, data: &mut [Complex64]) {
        self.apply(data, &self.forward);
    }

    pub(crate) fn inverse(&self, data: &mut [Complex64]) {
        self.apply(data, &self.inverse);
        let scale = 1.0 / data.len() as f64;
        for z in data.iter_mut() {
            *z *= scale;
        }
    }

    fn apply(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.points;
        debug_assert_eq!(data.len(), n.pow(self.dim as u32));
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        // Last axis is contiguous.
        plan.process_with_scratch(data, &mut scratch);
        let total = data.len();
        let mut lines = vec![Complex64::default(); total];
        for axis in 0..self.dim.saturating_sub(1) {
            let stride = n.pow((self.dim - 1 - axis) as u32);
            let block = stride * n;
            // Gather every line along `axis` into a contiguous buffer.
            let mut line = 0;
            for outer in (0..total).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    let dst = &mut lines[line * n..(line + 1) * n];
                    for (k, d) in dst.iter_mut().enumerate() {
                        *d = data[base + k * stride];
                    }
                    line += 1;
                }
            }
            plan.process_with_scratch(&mut lines, &mut scratch);
            let mut line = 0;
            for outer in (0..total).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    let src = &lines[line * n..(line + 1) * n];
                    for (k, s) in src.iter().enumerate() {
                        data[base + k * stride] = *s;
                    }
                    line += 1;
                }
            }
        }
    }
}

/// Signed frequency index for FFT slot `i` on an axis of `n` points.
pub(crate) fn signed_index(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// FFT slot for a signed frequency index.
pub(crate) fn slot(m: i64, n: usize) -> usize {
    m.rem_euclid(n as i64) as usize
}

pub(crate) fn to_complex(values: &[f64]) -> Vec<Complex64> {
    values.iter().map(|&v| Complex64::new(v, 0.0)).collect()
}
