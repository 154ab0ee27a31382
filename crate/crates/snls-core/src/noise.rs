use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::grid::Grid;
use crate::spectral::SpectralWorkspace;

/// Finite-rank spatial covariance of the Wiener process W = sum_k g_k beta_k.
///
/// Mode k carries the amplitude gamma * k^{-decay} on an L2-normalised real
/// trigonometric profile: alternating cos/sin of increasing wavenumber in one
/// dimension, diagonal products of those atoms in two. With
/// `space_independent` the single mode is the normalised constant, so the
/// noise reduces to one scalar Brownian phase.
#[derive(Debug)]
pub struct NoiseSpec {
    grid: Arc<Grid>,
    modes: Vec<Vec<f64>>,
    space_independent: bool,
    gamma: f64,
    decay: f64,
}

impl NoiseSpec {
    pub fn build(
        grid: &Arc<Grid>,
        n_modes: usize,
        gamma: f64,
        decay: f64,
        space_independent: bool,
    ) -> Result<Arc<NoiseSpec>> {
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::invalid("noise.gamma", format!("{gamma} (must be >= 0)")));
        }
        if !decay.is_finite() || decay < 0.0 {
            return Err(Error::invalid("noise.decay", format!("{decay} (must be >= 0)")));
        }
        if space_independent && n_modes > 1 {
            return Err(Error::invalid(
                "noise.modes",
                format!("{n_modes} modes with space_independent noise (needs exactly 1)"),
            ));
        }
        let mut modes = Vec::with_capacity(n_modes);
        for k in 1..=n_modes {
            let amp = gamma * (k as f64).powf(-decay);
            let profile = if space_independent {
                constant_mode(grid)
            } else {
                match grid.dim() {
                    1 => atom_1d(grid, k),
                    _ => atom_2d(grid, k),
                }
            };
            modes.push(profile.into_iter().map(|v| amp * v).collect());
        }
        Ok(Arc::new(NoiseSpec {
            grid: grid.clone(),
            modes,
            space_independent,
            gamma,
            decay,
        }))
    }

    /// Noise switched off: zero modes.
    pub fn off(grid: &Arc<Grid>) -> Arc<NoiseSpec> {
        Arc::new(NoiseSpec {
            grid: grid.clone(),
            modes: Vec::new(),
            space_independent: false,
            gamma: 0.0,
            decay: 0.0,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn is_off(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn is_space_independent(&self) -> bool {
        self.space_independent
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    pub fn mode(&self, k: usize) -> &[f64] {
        &self.modes[k]
    }

    /// The constant value of the single space-independent mode.
    pub fn constant_level(&self) -> Result<f64> {
        if self.space_independent && self.modes.len() == 1 {
            Ok(self.modes[0][0])
        } else {
            Err(Error::SpaceDependentNoise)
        }
    }

    /// F_Q(x) = sum_k g_k(x)^2, pointwise.
    pub fn fq_pointwise(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.cells()];
        for mode in &self.modes {
            for (o, g) in out.iter_mut().zip(mode) {
                *o += g * g;
            }
        }
        out
    }

    /// sup_x sum_k |grad g_k(x)|^2, gradients taken spectrally.
    pub fn fq_grad_sup(&self, ws: &mut SpectralWorkspace) -> Result<f64> {
        let mut acc = vec![0.0; self.grid.cells()];
        for mode in &self.modes {
            let field = ComplexField::from_values(
                &self.grid,
                mode.iter().map(|&g| num_complex::Complex64::new(g, 0.0)).collect(),
            )?;
            for comp in field.gradient(ws)? {
                for (a, v) in acc.iter_mut().zip(comp.values()) {
                    *a += v.norm_sqr();
                }
            }
        }
        Ok(acc.into_iter().fold(0.0, f64::max))
    }
}

fn constant_mode(grid: &Arc<Grid>) -> Vec<f64> {
    let v = (2.0 * grid.half_width()).powi(grid.dim() as i32).sqrt().recip();
    vec![v; grid.cells()]
}

/// Atom j of the 1D trigonometric basis evaluated on the grid: j = 0 is the
/// constant, odd j is cos, even j is sin, wavenumber ceil(j/2) * pi / L.
fn atom_values_1d(grid: &Grid, j: usize) -> Vec<f64> {
    let l = grid.half_width();
    if j == 0 {
        return vec![(2.0 * l).sqrt().recip(); grid.points()];
    }
    let m = j.div_ceil(2) as f64;
    let norm = l.sqrt().recip();
    grid.coords()
        .iter()
        .map(|&x| {
            let arg = m * std::f64::consts::PI * x / l;
            norm * if j % 2 == 1 { arg.cos() } else { arg.sin() }
        })
        .collect()
}

fn atom_1d(grid: &Arc<Grid>, k: usize) -> Vec<f64> {
    atom_values_1d(grid, k)
}

/// Mode k in 2D: products psi_p(x) psi_q(y) of the 1D atoms, (p, q) != (0, 0),
/// enumerated diagonally by (p + q, p).
fn atom_2d(grid: &Arc<Grid>, k: usize) -> Vec<f64> {
    let (p, q) = diagonal_pair(k);
    let px = atom_values_1d(grid, p);
    let qy = atom_values_1d(grid, q);
    let n = grid.points();
    let mut out = Vec::with_capacity(grid.cells());
    for i0 in 0..n {
        for i1 in 0..n {
            out.push(px[i0] * qy[i1]);
        }
    }
    out
}

fn diagonal_pair(k: usize) -> (usize, usize) {
    let mut count = 0;
    for sum in 1.. {
        for p in 0..=sum {
            count += 1;
            if count == k {
                return (p, sum - p);
            }
        }
    }
    unreachable!()
}

/// Seeded sampler of Q-Wiener increments for one trajectory.
///
/// The generator is a ChaCha stream keyed by (master seed, trajectory index),
/// so trajectories are independent yet fully reproducible and the schedule of
/// draws does not depend on how trajectories are distributed over threads.
pub struct QWienerSampler {
    spec: Arc<NoiseSpec>,
    rng: ChaCha8Rng,
    beta: Vec<f64>,
}

impl QWienerSampler {
    pub fn new(spec: &Arc<NoiseSpec>, master_seed: u64, trajectory: u64) -> QWienerSampler {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(trajectory);
        QWienerSampler {
            spec: spec.clone(),
            rng,
            beta: vec![0.0; spec.n_modes()],
        }
    }

    pub fn spec(&self) -> &Arc<NoiseSpec> {
        &self.spec
    }

    /// Fill `out` with the spatial increment sum_k g_k xi_k sqrt(dt) of one
    /// time step and advance the accumulated Brownian coordinates beta_k.
    pub fn sample_increment(&mut self, dt: f64, out: &mut [f64]) {
        out.fill(0.0);
        let root_dt = dt.sqrt();
        for (mode, beta) in self.spec.modes.iter().zip(self.beta.iter_mut()) {
            let xi: f64 = self.rng.sample(StandardNormal);
            let step = xi * root_dt;
            *beta += step;
            for (o, g) in out.iter_mut().zip(mode) {
                *o += g * step;
            }
        }
    }

    /// Accumulated Brownian coordinates beta_k(t).
    pub fn beta(&self) -> &[f64] {
        &self.beta
    }
}
