use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::Grid;

/// Per-worker FFT plans and scratch for one grid shape.
///
/// Transforms are in place over row-major data; the 2D path runs the row pass,
/// transposes, runs it again and transposes back. `inverse` includes the
/// 1/n^d normalisation so forward followed by inverse is the identity.
///
/// Workspaces are cheap to build and are never shared between trajectories.
pub struct SpectralWorkspace {
    n: usize,
    dim: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    inv_scale: f64,
}

impl SpectralWorkspace {
    pub fn new(grid: &Grid) -> Self {
        let n = grid.points();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let scratch_len = fwd
            .get_inplace_scratch_len()
            .max(inv.get_inplace_scratch_len());
        SpectralWorkspace {
            n,
            dim: grid.dim(),
            fwd,
            inv,
            scratch: vec![Complex64::default(); scratch_len],
            inv_scale: 1.0 / grid.cells() as f64,
        }
    }

    pub fn matches(&self, grid: &Grid) -> bool {
        self.n == grid.points() && self.dim == grid.dim()
    }

    pub fn forward(&mut self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.n.pow(self.dim as u32));
        self.fwd.process_with_scratch(data, &mut self.scratch);
        if self.dim == 2 {
            transpose_square(data, self.n);
            self.fwd.process_with_scratch(data, &mut self.scratch);
            transpose_square(data, self.n);
        }
    }

    pub fn inverse(&mut self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.n.pow(self.dim as u32));
        self.inv.process_with_scratch(data, &mut self.scratch);
        if self.dim == 2 {
            transpose_square(data, self.n);
            self.inv.process_with_scratch(data, &mut self.scratch);
            transpose_square(data, self.n);
        }
        for v in data.iter_mut() {
            *v *= self.inv_scale;
        }
    }
}

fn transpose_square(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}
