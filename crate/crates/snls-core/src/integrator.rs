use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::grid::Grid;
use crate::noise::QWienerSampler;
use crate::observables::{self, ObservableRecord};
use crate::spectral::SpectralWorkspace;

/// Default blow-up threshold as a multiple of ||u_0||_{H1}.
pub const DEFAULT_BLOWUP_FACTOR: f64 = 1e3;

/// Default fraction of the initial mass tolerated in the boundary strip
/// before a truncation warning is recorded.
pub const DEFAULT_BOUNDARY_TOL: f64 = 1e-8;

/// Parameters of one split-step run of
/// du = i(Lap u + lambda |u|^{2s} u) dt - a u dt + i u . dW.
#[derive(Debug, Clone, Serialize)]
pub struct SimParams {
    pub sigma: f64,
    /// +1 focusing, -1 defocusing.
    pub lambda: f64,
    /// Damping rate a >= 0.
    pub damping: f64,
    pub dt: f64,
    pub horizon: f64,
    /// Observables are recorded every `log_every` steps.
    pub log_every: usize,
    /// Blow-up threshold on ||u||_{H1}, as a multiple of ||u_0||_{H1}.
    pub blowup_factor: f64,
    /// Boundary-strip mass fraction above which a warning is recorded.
    pub boundary_tol: f64,
    /// Zero the top third of the spectrum after each step.
    pub dealias: bool,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            sigma: 2.0,
            lambda: 1.0,
            damping: 0.0,
            dt: 1e-3,
            horizon: 1.0,
            log_every: 10,
            blowup_factor: DEFAULT_BLOWUP_FACTOR,
            boundary_tol: DEFAULT_BOUNDARY_TOL,
            dealias: false,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, name: &'static str, reason: String| {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidParam { name, reason })
            }
        };
        check(
            self.sigma.is_finite() && self.sigma > 0.0,
            "sim.sigma",
            format!("{} (must be positive)", self.sigma),
        )?;
        check(
            self.lambda == 1.0 || self.lambda == -1.0,
            "sim.lambda",
            format!("{} (must be +1 or -1)", self.lambda),
        )?;
        check(
            self.damping.is_finite() && self.damping >= 0.0,
            "sim.damping",
            format!("{} (must be >= 0)", self.damping),
        )?;
        check(
            self.dt.is_finite() && self.dt > 0.0,
            "sim.dt",
            format!("{} (must be positive)", self.dt),
        )?;
        check(
            self.horizon.is_finite() && self.horizon > 0.0,
            "sim.horizon",
            format!("{} (must be positive)", self.horizon),
        )?;
        check(self.log_every >= 1, "sim.log_every", "must be >= 1".to_string())?;
        check(
            self.blowup_factor > 1.0,
            "sim.blowup_factor",
            format!("{} (must exceed 1)", self.blowup_factor),
        )?;
        check(
            self.boundary_tol > 0.0,
            "sim.boundary_tol",
            format!("{} (must be positive)", self.boundary_tol),
        )?;
        Ok(())
    }

    pub fn n_steps(&self) -> u64 {
        (self.horizon / self.dt - 1e-9).ceil() as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum RunStatus {
    Completed,
    /// The H1 norm crossed the threshold (or stopped being finite) at `tau`.
    BlewUp { tau: f64 },
}

/// Outcome of one trajectory.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub status: RunStatus,
    pub field: ComplexField,
    pub log: Vec<ObservableRecord>,
    /// Threshold B that the detector compared ||u||_{H1} against.
    pub threshold: f64,
    /// max_n |M(u_n) e^{2 a t_n} - M(u_0)| / M(u_0), tracked every step.
    pub max_charge_dev: f64,
    /// min over records of the uncertainty gap.
    pub min_uncertainty_gap: f64,
    pub warnings: Vec<String>,
}

impl Trajectory {
    pub fn blew_up(&self) -> bool {
        matches!(self.status, RunStatus::BlewUp { .. })
    }

    pub fn tau(&self) -> Option<f64> {
        match self.status {
            RunStatus::BlewUp { tau } => Some(tau),
            RunStatus::Completed => None,
        }
    }
}

/// Exact-substep Strang stepper for one grid/parameter combination.
///
/// One step is
///   (A) half dispersion  u^ *= exp(-i |k|^2 dt / 2),
///   (M) the exact flow over dt of the non-dispersive part
///         du = i lambda |u|^{2s} u dt - a u dt + i u . dW,
///       which preserves |u| up to the damping factor e^{-a dt}: the modulus
///       equation decouples, so the phase advances by
///       lambda |u|^{2s} (1 - e^{-2 s a dt}) / (2 s a) + dW
///       (the a -> 0 limit of the coefficient being dt),
///   (E) half dispersion again.
/// Every substep is an exact flow, so the composition is symmetric and the
/// scheme is second order in dt; charge obeys the discrete damping law to
/// rounding.
pub struct Stepper {
    ws: SpectralWorkspace,
    disp_half: Vec<Complex64>,
    dealias_keep: Option<Vec<bool>>,
    damp: f64,
    phase_coef: f64,
    lambda: f64,
    sigma: f64,
    vol_over_cells: f64,
    grad_weights: Vec<f64>,
}

/// Per-step diagnostics, read off the spectrum during the closing dispersion
/// half step (which leaves |u^| and hence these sums unchanged).
#[derive(Debug, Clone, Copy)]
pub struct StepDiag {
    pub mass: f64,
    pub grad_sq: f64,
}

impl StepDiag {
    pub fn h1_sq(&self) -> f64 {
        self.mass + self.grad_sq
    }

    pub fn is_finite(&self) -> bool {
        self.mass.is_finite() && self.grad_sq.is_finite()
    }
}

impl Stepper {
    pub fn new(grid: &Grid, params: &SimParams) -> Stepper {
        let n = grid.points();
        let ks = grid.wavenumbers();
        let nyq = n / 2;
        let cells = grid.cells();
        let mut disp_half = Vec::with_capacity(cells);
        let mut grad_weights = Vec::with_capacity(cells);
        let mut keep = Vec::with_capacity(cells);
        let cut = 2.0 / 3.0 * grid.k_max();
        match grid.dim() {
            1 => {
                for m in 0..n {
                    let k2 = ks[m] * ks[m];
                    disp_half.push(Complex64::from_polar(1.0, -k2 * params.dt / 2.0));
                    grad_weights.push(if m == nyq { 0.0 } else { k2 });
                    keep.push(ks[m].abs() <= cut);
                }
            }
            _ => {
                for i0 in 0..n {
                    for i1 in 0..n {
                        let k2 = ks[i0] * ks[i0] + ks[i1] * ks[i1];
                        disp_half.push(Complex64::from_polar(1.0, -k2 * params.dt / 2.0));
                        let w0 = if i0 == nyq { 0.0 } else { ks[i0] * ks[i0] };
                        let w1 = if i1 == nyq { 0.0 } else { ks[i1] * ks[i1] };
                        grad_weights.push(w0 + w1);
                        keep.push(ks[i0].abs() <= cut && ks[i1].abs() <= cut);
                    }
                }
            }
        }
        let a = params.damping;
        let s = params.sigma;
        let phase_coef = if a > 0.0 {
            (1.0 - (-2.0 * s * a * params.dt).exp()) / (2.0 * s * a)
        } else {
            params.dt
        };
        Stepper {
            ws: SpectralWorkspace::new(grid),
            disp_half,
            dealias_keep: params.dealias.then_some(keep),
            damp: (-a * params.dt).exp(),
            phase_coef,
            lambda: params.lambda,
            sigma: s,
            vol_over_cells: grid.cell_volume() / cells as f64,
            grad_weights,
        }
    }

    /// Advance `u` by one step in place.
    pub fn step(&mut self, u: &mut [Complex64], dw: Option<&[f64]>) -> StepDiag {
        self.ws.forward(u);
        for (v, m) in u.iter_mut().zip(&self.disp_half) {
            *v *= m;
        }
        self.ws.inverse(u);

        let int_sigma = integer_sigma(self.sigma);
        match dw {
            Some(dw) => {
                for (v, &w) in u.iter_mut().zip(dw) {
                    let phase = self.lambda * pow_sigma(v.norm_sqr(), self.sigma, int_sigma)
                        * self.phase_coef
                        + w;
                    let (sin, cos) = phase.sin_cos();
                    *v = *v * Complex64::new(cos, sin) * self.damp;
                }
            }
            None => {
                for v in u.iter_mut() {
                    let phase = self.lambda
                        * pow_sigma(v.norm_sqr(), self.sigma, int_sigma)
                        * self.phase_coef;
                    let (sin, cos) = phase.sin_cos();
                    *v = *v * Complex64::new(cos, sin) * self.damp;
                }
            }
        }

        self.ws.forward(u);
        let mut mass = 0.0;
        let mut grad = 0.0;
        for ((v, m), &w) in u.iter_mut().zip(&self.disp_half).zip(&self.grad_weights) {
            *v *= m;
            let p = v.norm_sqr();
            mass += p;
            grad += w * p;
        }
        if let Some(keep) = &self.dealias_keep {
            for (v, &k) in u.iter_mut().zip(keep) {
                if !k {
                    *v = Complex64::default();
                }
            }
        }
        self.ws.inverse(u);
        StepDiag {
            mass: mass * self.vol_over_cells,
            grad_sq: grad * self.vol_over_cells,
        }
    }

    pub fn workspace(&mut self) -> &mut SpectralWorkspace {
        &mut self.ws
    }
}

fn integer_sigma(sigma: f64) -> Option<i32> {
    (sigma.fract() == 0.0 && (1.0..=8.0).contains(&sigma)).then_some(sigma as i32)
}

#[inline]
fn pow_sigma(r2: f64, sigma: f64, int_sigma: Option<i32>) -> f64 {
    match int_sigma {
        Some(e) => r2.powi(e),
        None => r2.powf(sigma),
    }
}

/// Integrate `u0` to the horizon, logging observables every
/// `params.log_every` steps and stopping early when ||u||_{H1} crosses the
/// blow-up threshold or stops being finite.
///
/// `sampler` supplies the noise; pass `None` for the deterministic equation.
pub fn evolve(
    u0: &ComplexField,
    params: &SimParams,
    mut sampler: Option<&mut QWienerSampler>,
) -> Result<Trajectory> {
    params.validate()?;
    u0.ensure_finite("initial data")?;
    let grid = u0.grid().clone();
    if let Some(s) = sampler.as_ref() {
        if !s.spec().grid().same_as(&grid) {
            return Err(Error::GridMismatch(
                grid.describe(),
                s.spec().grid().describe(),
            ));
        }
    }

    let mut stepper = Stepper::new(&grid, params);
    let mut warnings = Vec::new();

    let mass0 = u0.norm_l2_sq();
    let h1_sq0 = u0.h1_norm_sq(stepper.workspace())?;
    let threshold = params.blowup_factor * h1_sq0.sqrt();
    let representable = (mass0 * (1.0 + grid.k_max().powi(2))).sqrt();
    if threshold > representable {
        warnings.push(format!(
            "blow-up threshold {threshold:.3e} exceeds the largest H1 norm \
             representable on this grid ({representable:.3e}); the detector can \
             only trip on non-finite values"
        ));
    }

    let mut u = u0.clone();
    let mut log = Vec::new();
    log.push(observables::record(
        &u,
        params.sigma,
        params.lambda,
        0,
        0.0,
        stepper.workspace(),
    )?);

    let mut dw = vec![0.0; grid.cells()];
    let n_steps = params.n_steps();
    let two_a = 2.0 * params.damping;
    let mut max_charge_dev = 0.0f64;
    let mut status = RunStatus::Completed;
    let mut boundary_warned = false;

    for n in 1..=n_steps {
        let noise = match sampler.as_deref_mut() {
            Some(s) => {
                s.sample_increment(params.dt, &mut dw);
                Some(dw.as_slice())
            }
            None => None,
        };
        let diag = stepper.step(u.values_mut(), noise);
        let t = n as f64 * params.dt;

        let dev = (diag.mass * (two_a * t).exp() - mass0).abs() / mass0;
        if dev.is_finite() {
            max_charge_dev = max_charge_dev.max(dev);
        }

        let blew = !diag.is_finite() || diag.h1_sq() > threshold * threshold;
        if blew || n % params.log_every as u64 == 0 || n == n_steps {
            log.push(observables::record(
                &u,
                params.sigma,
                params.lambda,
                n,
                t,
                stepper.workspace(),
            )?);
            let rec = log.last().unwrap();
            if !boundary_warned && rec.boundary_mass > params.boundary_tol * mass0 {
                warnings.push(format!(
                    "boundary strip holds {:.3e} of the initial mass at t = {t}; \
                     the box truncates the profile",
                    rec.boundary_mass / mass0
                ));
                boundary_warned = true;
            }
        }
        if blew {
            status = RunStatus::BlewUp { tau: t };
            break;
        }
    }

    let dim = grid.dim();
    let min_gap = log
        .iter()
        .map(|r| observables::gap_of(r, dim))
        .fold(f64::INFINITY, f64::min);
    Ok(Trajectory {
        status,
        field: u,
        log,
        threshold,
        max_charge_dev,
        min_uncertainty_gap: min_gap,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groundstate::ground_state_1d;
    use crate::noise::NoiseSpec;
    use std::sync::Arc;

    fn gaussian(grid: &Arc<Grid>) -> ComplexField {
        ComplexField::from_fn_1d(grid, |x| Complex64::new((-x * x).exp(), 0.0)).unwrap()
    }

    #[test]
    fn free_flow_matches_the_closed_form_gaussian() {
        // u_t = i u_xx with u0 = e^{-x^2} has
        // u(t, x) = (1 + 4it)^{-1/2} e^{-x^2 / (1 + 4it)}.
        let grid = Grid::new(1, 20.0, 256).unwrap();
        let u0 = gaussian(&grid);
        let params = SimParams {
            sigma: 2.0,
            lambda: 1.0,
            damping: 0.0,
            dt: 1e-3,
            horizon: 0.5,
            log_every: 100,
            ..SimParams::default()
        };
        // at amplitude eps the nonlinear phase per step is O(eps^4 dt),
        // so the run is the linear flow to far below the tolerance
        let eps = 1e-6;
        let small = u0.scaled(Complex64::new(eps, 0.0));
        let traj = evolve(&small, &params, None).unwrap();
        assert_eq!(traj.status, RunStatus::Completed);
        let t = 0.5;
        let denom = Complex64::new(1.0, 4.0 * t);
        let mut worst = 0.0f64;
        for (j, v) in traj.field.values().iter().enumerate() {
            let x = grid.coords()[j];
            let expect = (Complex64::new(-x * x, 0.0) / denom).exp() / denom.sqrt() * eps;
            worst = worst.max((v - expect).norm());
        }
        assert!(
            worst / eps < 1e-6,
            "free gaussian deviates by {:.3e} (relative)",
            worst / eps
        );
    }

    #[test]
    fn charge_law_to_rounding_with_damping_and_noise() {
        let grid = Grid::new(1, 20.0, 256).unwrap();
        let u0 = gaussian(&grid);
        let spec = NoiseSpec::build(&grid, 3, 0.1, 2.0, false).unwrap();
        let mut sampler = QWienerSampler::new(&spec, 11, 0);
        let params = SimParams {
            sigma: 2.0,
            lambda: 1.0,
            damping: 0.5,
            dt: 1e-3,
            horizon: 1.0,
            log_every: 50,
            ..SimParams::default()
        };
        let traj = evolve(&u0, &params, Some(&mut sampler)).unwrap();
        assert_eq!(traj.status, RunStatus::Completed);
        assert!(
            traj.max_charge_dev < 1e-12,
            "charge law violated: {:.3e}",
            traj.max_charge_dev
        );
        // the log agrees with e^{-2at} M0 as well
        let m0 = traj.log[0].mass;
        for r in &traj.log {
            let drift = (r.mass * (2.0f64 * 0.5 * r.t).exp() - m0).abs() / m0;
            assert!(drift < 1e-12, "log-level drift {drift:.3e} at t={}", r.t);
        }
    }

    #[test]
    fn noise_substep_preserves_the_modulus_pointwise() {
        let grid = Grid::new(1, 10.0, 64).unwrap();
        let u0 = gaussian(&grid);
        let spec = NoiseSpec::build(&grid, 2, 0.5, 2.0, false).unwrap();
        let mut sampler = QWienerSampler::new(&spec, 3, 1);
        // with a = 0 every substep is modulus-preserving, so any mass drift
        // bounds the pointwise modulus error of the noise substep
        let params = SimParams {
            sigma: 2.0,
            lambda: 1.0,
            damping: 0.0,
            dt: 1e-3,
            horizon: 0.05,
            log_every: 1,
            ..SimParams::default()
        };
        let traj = evolve(&u0, &params, Some(&mut sampler)).unwrap();
        assert!(traj.max_charge_dev < 1e-13, "dev {:.3e}", traj.max_charge_dev);
    }

    #[test]
    fn tiny_step_is_nearly_the_identity() {
        let grid = Grid::new(1, 20.0, 256).unwrap();
        let u0 = gaussian(&grid);
        let params = SimParams {
            dt: 1e-12,
            horizon: 1e-12,
            log_every: 1,
            ..SimParams::default()
        };
        let traj = evolve(&u0, &params, None).unwrap();
        let dev = traj.field.distance_l2(&u0).unwrap() / u0.norm_l2_sq().sqrt();
        assert!(dev < 1e-9, "one dt -> 0 step moved the field by {dev:.3e}");
    }

    #[test]
    fn soliton_modulus_is_stationary() {
        // u(t) = e^{it} R is an exact solution at sigma = 2, lambda = +1;
        // the modulus must not move.
        let grid = Grid::new(1, 24.0, 512).unwrap();
        let gs = ground_state_1d(2.0, &grid).unwrap();
        let u0 = gs.field(1.0);
        let params = SimParams {
            sigma: 2.0,
            lambda: 1.0,
            dt: 1e-3,
            horizon: 1.0,
            log_every: 100,
            ..SimParams::default()
        };
        let traj = evolve(&u0, &params, None).unwrap();
        let mut worst = 0.0f64;
        for (v, r) in traj.field.values().iter().zip(gs.values()) {
            worst = worst.max((v.norm() - r).abs());
        }
        assert!(worst < 1e-5, "soliton profile drifted by {worst:.3e}");
        // and the phase advances like e^{it}
        let centre = grid.points() / 2;
        let phase = traj.field.values()[centre].arg();
        let expect = 1.0f64; // t = 1.0 mod 2 pi
        assert!(
            (phase - expect).abs() < 1e-3,
            "soliton phase {phase} vs {expect}"
        );
    }

    #[test]
    fn detector_trips_on_supercritical_focusing_data() {
        let grid = Grid::new(1, 24.0, 1024).unwrap();
        let gs = ground_state_1d(3.0, &grid).unwrap();
        let u0 = gs.field(1.3);
        let params = SimParams {
            sigma: 3.0,
            lambda: 1.0,
            dt: 1e-4,
            horizon: 1.0,
            log_every: 100,
            blowup_factor: 15.0,
            ..SimParams::default()
        };
        let traj = evolve(&u0, &params, None).unwrap();
        match traj.status {
            RunStatus::BlewUp { tau } => {
                assert!(tau > 0.01 && tau < 0.6, "collapse time {tau}");
                let last = traj.log.last().unwrap();
                assert_eq!(last.t, tau, "final record sits at the detection time");
            }
            RunStatus::Completed => panic!("expected the detector to trip"),
        }
    }

    #[test]
    fn unreachable_threshold_is_reported() {
        let grid = Grid::new(1, 20.0, 64).unwrap();
        let u0 = gaussian(&grid);
        let params = SimParams {
            horizon: 0.01,
            log_every: 1,
            blowup_factor: 1e3,
            ..SimParams::default()
        };
        let traj = evolve(&u0, &params, None).unwrap();
        assert!(
            traj.warnings.iter().any(|w| w.contains("representable")),
            "coarse grid cannot represent a 1e3 threshold: {:?}",
            traj.warnings
        );
    }

    #[test]
    fn horizon_and_cadence_bookkeeping() {
        let grid = Grid::new(1, 10.0, 64).unwrap();
        let u0 = gaussian(&grid);
        let params = SimParams {
            dt: 1e-3,
            horizon: 0.0105, // not a multiple of dt: 11 steps, final at 0.011
            log_every: 5,
            ..SimParams::default()
        };
        let traj = evolve(&u0, &params, None).unwrap();
        let steps: Vec<u64> = traj.log.iter().map(|r| r.step).collect();
        assert_eq!(steps, vec![0, 5, 10, 11]);
        assert!((traj.log.last().unwrap().t - 0.011).abs() < 1e-12);
    }
}
