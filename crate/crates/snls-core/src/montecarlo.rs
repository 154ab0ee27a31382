use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;
use statrs::distribution::{Beta, ContinuousCDF};

use crate::error::{Error, Result};
use crate::exec;
use crate::field::ComplexField;
use crate::grid::Grid;
use crate::groundstate;
use crate::integrator::{evolve, SimParams, Stepper, Trajectory};
use crate::noise::{NoiseSpec, QWienerSampler};
use crate::observables::ObservableRecord;
use crate::spectral::SpectralWorkspace;

/// Largest exponent fed to exp() in the exponential-moment statistic;
/// anything above is flagged as an overflow and excluded (f64 overflows
/// just past 709).
pub const EXP_ARG_LIMIT: f64 = 700.0;

/// Families of initial data the experiments draw from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum InitialData {
    Zero,
    /// scale * exp(-r^2 / width^2) * exp(i chirp r^2).
    Gaussian { scale: f64, width: f64, chirp: f64 },
    /// scale times the 1-d ground-state profile for the run's sigma.
    GroundState { scale: f64 },
}

impl InitialData {
    pub fn build(&self, grid: &Arc<Grid>, sigma: f64) -> Result<ComplexField> {
        match *self {
            InitialData::Zero => Ok(ComplexField::zeros(grid)),
            InitialData::Gaussian { scale, width, chirp } => {
                if !(width.is_finite() && width > 0.0) {
                    return Err(Error::invalid("init.width", format!("{width} (must be positive)")));
                }
                if !scale.is_finite() || !chirp.is_finite() {
                    return Err(Error::invalid("init.scale", "scale and chirp must be finite"));
                }
                let f = move |r_sq: f64| {
                    let amp = scale * (-r_sq / (width * width)).exp();
                    let phase = chirp * r_sq;
                    Complex64::new(amp * phase.cos(), amp * phase.sin())
                };
                match grid.dim() {
                    1 => ComplexField::from_fn_1d(grid, |x| f(x * x)),
                    _ => ComplexField::from_fn_2d(grid, |x, y| f(x * x + y * y)),
                }
            }
            InitialData::GroundState { scale } => {
                if !(scale.is_finite() && scale > 0.0) {
                    return Err(Error::invalid("init.scale", format!("{scale} (must be positive)")));
                }
                Ok(groundstate::ground_state_1d(sigma, grid)?.field(scale))
            }
        }
    }
}

/// One ensemble: n independent trajectories of the same equation, with
/// trajectory i driven by the RNG stream `stream_offset + i` under
/// `master_seed`, so results do not depend on scheduling.
#[derive(Debug, Clone)]
pub struct EnsembleSpec {
    pub grid: Arc<Grid>,
    pub params: SimParams,
    pub noise: Arc<NoiseSpec>,
    pub init: InitialData,
    pub trajectories: usize,
    pub master_seed: u64,
    pub stream_offset: u64,
}

impl EnsembleSpec {
    pub fn initial_field(&self) -> Result<ComplexField> {
        self.init.build(&self.grid, self.params.sigma)
    }

    fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.trajectories == 0 {
            return Err(Error::invalid("ensemble.trajectories", "must be >= 1"));
        }
        if !self.grid.same_as(self.noise.grid()) {
            return Err(Error::GridMismatch(
                self.grid.describe(),
                self.noise.grid().describe(),
            ));
        }
        Ok(())
    }
}

/// The ensemble-averaged observables, in the order of the log schema.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct ObsVector {
    pub mass: f64,
    pub energy: f64,
    pub variance: f64,
    pub momentum: f64,
    pub h_tilde: f64,
    pub grad_sq: f64,
    pub lp_pow: f64,
    pub boundary_mass: f64,
}

impl ObsVector {
    pub fn from_record(r: &ObservableRecord) -> ObsVector {
        ObsVector {
            mass: r.mass,
            energy: r.energy,
            variance: r.variance,
            momentum: r.momentum,
            h_tilde: r.h_tilde,
            grad_sq: r.grad_sq,
            lp_pow: r.lp_pow,
            boundary_mass: r.boundary_mass,
        }
    }

    fn as_array(&self) -> [f64; 8] {
        [
            self.mass,
            self.energy,
            self.variance,
            self.momentum,
            self.h_tilde,
            self.grad_sq,
            self.lp_pow,
            self.boundary_mass,
        ]
    }

    fn from_array(a: [f64; 8]) -> ObsVector {
        ObsVector {
            mass: a[0],
            energy: a[1],
            variance: a[2],
            momentum: a[3],
            h_tilde: a[4],
            grad_sq: a[5],
            lp_pow: a[6],
            boundary_mass: a[7],
        }
    }
}

/// Ensemble mean and standard error of every observable at one log time,
/// over the `n_alive` trajectories that had not blown up by then.
#[derive(Debug, Clone, Serialize)]
pub struct SeriesPoint {
    pub t: f64,
    pub n_alive: usize,
    pub mean: ObsVector,
    pub stderr: ObsVector,
}

#[derive(Debug, Clone, Serialize)]
pub struct BlowupStats {
    pub n: usize,
    pub blew_up: usize,
    pub fraction: f64,
    /// 95% Clopper-Pearson interval for the blow-up probability.
    pub ci_low: f64,
    pub ci_high: f64,
    /// Detected blow-up times, sorted.
    pub times: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnsembleSummary {
    pub n_trajectories: usize,
    pub series: Vec<SeriesPoint>,
    pub blowup: BlowupStats,
    /// Max over trajectories of the pathwise charge-law deviation.
    pub max_charge_dev: f64,
    pub min_uncertainty_gap: f64,
    /// Trajectories that left noticeable mass in the boundary strip.
    pub boundary_warnings: usize,
}

/// Exact binomial confidence interval for k successes out of n.
pub fn clopper_pearson(k: usize, n: usize, confidence: f64) -> Result<(f64, f64)> {
    if n == 0 || k > n {
        return Err(Error::invalid("ci", format!("{k} successes out of {n}")));
    }
    if !(0.0..1.0).contains(&confidence) {
        return Err(Error::invalid("confidence", format!("{confidence}")));
    }
    let alpha = 1.0 - confidence;
    let beta_inv = |a: f64, b: f64, p: f64| -> Result<f64> {
        Ok(Beta::new(a, b)
            .map_err(|e| Error::invalid("ci", e.to_string()))?
            .inverse_cdf(p))
    };
    let low = if k == 0 {
        0.0
    } else {
        beta_inv(k as f64, (n - k + 1) as f64, alpha / 2.0)?
    };
    let high = if k == n {
        1.0
    } else {
        beta_inv((k + 1) as f64, (n - k) as f64, 1.0 - alpha / 2.0)?
    };
    Ok((low, high))
}

/// Run the ensemble and aggregate. Aggregation is keyed by trajectory index,
/// so the summary is a pure function of the spec regardless of how many
/// workers execute it.
pub fn run_ensemble(
    spec: &EnsembleSpec,
    workers: Option<usize>,
) -> Result<(EnsembleSummary, Vec<Trajectory>)> {
    spec.validate()?;
    let u0 = spec.initial_field()?;
    let noise_on = !spec.noise.is_off();
    let trajs = exec::map_indexed(spec.trajectories, workers, |i| {
        let mut sampler = noise_on
            .then(|| QWienerSampler::new(&spec.noise, spec.master_seed, spec.stream_offset + i as u64));
        evolve(&u0, &spec.params, sampler.as_mut())
            .map_err(|e| Error::Trajectory { index: i, source: Box::new(e) })
    })?;
    let summary = summarize(spec, &trajs)?;
    Ok((summary, trajs))
}

/// Detector-based blow-up fraction with its 95% binomial interval.
pub fn estimate_blowup_probability(
    spec: &EnsembleSpec,
    workers: Option<usize>,
) -> Result<(f64, (f64, f64))> {
    let (summary, _) = run_ensemble(spec, workers)?;
    Ok((summary.blowup.fraction, (summary.blowup.ci_low, summary.blowup.ci_high)))
}

fn summarize(spec: &EnsembleSpec, trajs: &[Trajectory]) -> Result<EnsembleSummary> {
    let log_every = spec.params.log_every as u64;
    let n_indices = (spec.params.n_steps() / log_every + 1) as usize;
    let mut buckets: Vec<Vec<[f64; 8]>> = vec![Vec::new(); n_indices];
    let mut times = vec![0.0; n_indices];
    for traj in trajs {
        for rec in &traj.log {
            if rec.step % log_every == 0 {
                let j = (rec.step / log_every) as usize;
                buckets[j].push(ObsVector::from_record(rec).as_array());
                times[j] = rec.t;
            }
        }
    }
    while buckets.last().is_some_and(Vec::is_empty) {
        buckets.pop();
    }

    let series = buckets
        .iter()
        .zip(&times)
        .map(|(vals, &t)| {
            let n = vals.len();
            let mut mean = [0.0; 8];
            let mut stderr = [0.0; 8];
            for v in vals {
                for (m, x) in mean.iter_mut().zip(v) {
                    *m += x;
                }
            }
            for m in mean.iter_mut() {
                *m /= n as f64;
            }
            if n >= 2 {
                for v in vals {
                    for ((s, x), m) in stderr.iter_mut().zip(v).zip(&mean) {
                        *s += (x - m) * (x - m);
                    }
                }
                for s in stderr.iter_mut() {
                    *s = (*s / ((n - 1) as f64 * n as f64)).sqrt();
                }
            }
            SeriesPoint {
                t,
                n_alive: n,
                mean: ObsVector::from_array(mean),
                stderr: ObsVector::from_array(stderr),
            }
        })
        .collect();

    let mut blowup_times: Vec<f64> = trajs.iter().filter_map(Trajectory::tau).collect();
    blowup_times.sort_by(f64::total_cmp);
    let blew_up = blowup_times.len();
    let n = trajs.len();
    let (ci_low, ci_high) = clopper_pearson(blew_up, n, 0.95)?;

    Ok(EnsembleSummary {
        n_trajectories: n,
        series,
        blowup: BlowupStats {
            n,
            blew_up,
            fraction: blew_up as f64 / n as f64,
            ci_low,
            ci_high,
            times: blowup_times,
        },
        max_charge_dev: trajs.iter().map(|t| t.max_charge_dev).fold(0.0, f64::max),
        min_uncertainty_gap: trajs
            .iter()
            .map(|t| t.min_uncertainty_gap)
            .fold(f64::INFINITY, f64::min),
        boundary_warnings: trajs
            .iter()
            .filter(|t| t.warnings.iter().any(|w| w.contains("boundary strip")))
            .count(),
    })
}

/// Lower bound on the admissible rate of the exponential-moment statistic,
/// -2a + 2 a sigma / (c (sigma+1)) ||u0||^{2 sigma} C_{sigma,d}
///     + 4 / c^2 ||u0||^2 ||f_Q||_inf^2,
/// with c = 1 - ||u0||^{2 sigma} / ||R||^{2 sigma}. Requires d = 1 and mass
/// strictly below the ground-state mass.
pub fn default_alpha(spec: &EnsembleSpec) -> Result<f64> {
    let u0 = spec.initial_field()?;
    let mut ws = SpectralWorkspace::new(&spec.grid);
    let r = groundstate::ground_state_1d(spec.params.sigma, &spec.grid)?;
    let sigma = spec.params.sigma;
    let mass = u0.norm_l2_sq();
    let c = 1.0 - (mass / r.mass_sq).powf(sigma);
    if c <= 0.0 {
        return Err(Error::invalid(
            "init",
            format!("mass {mass} is not below the ground-state mass {}", r.mass_sq),
        ));
    }
    let a = spec.params.damping;
    let fq = spec.noise.fq_grad_sup(&mut ws)?;
    Ok(-2.0 * a
        + 2.0 * a * sigma / (c * (sigma + 1.0)) * mass.powf(sigma) * r.gn_constant
        + 4.0 / (c * c) * mass * fq * fq)
}

/// Ensemble mean of exp(||u(t)||_{H1}^2 e^{-alpha t}) over time.
///
/// Trajectories whose exponent exceeds EXP_ARG_LIMIT at some log time are
/// excluded from that time onward and counted in `overflow_trajectories`;
/// the series is truncated at the first time nothing contributes.
#[derive(Debug, Clone, Serialize)]
pub struct ExpMomentSeries {
    pub alpha: f64,
    pub t: Vec<f64>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_used: Vec<usize>,
    pub overflow_trajectories: usize,
    /// Whether the running max of the mean stays within 2 stderr of its
    /// t = 0 value.
    pub bounded: bool,
}

pub fn exp_moment_estimate(
    spec: &EnsembleSpec,
    alpha: Option<f64>,
    workers: Option<usize>,
) -> Result<ExpMomentSeries> {
    let alpha = match alpha {
        Some(a) if a.is_finite() => a,
        Some(a) => return Err(Error::invalid("expmoment.alpha", format!("{a}"))),
        None => default_alpha(spec)?,
    };
    let (_, trajs) = run_ensemble(spec, workers)?;
    let log_every = spec.params.log_every as u64;
    let n_indices = (spec.params.n_steps() / log_every + 1) as usize;
    let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); n_indices];
    let mut times = vec![0.0; n_indices];
    let mut overflowed = 0usize;
    for traj in &trajs {
        let mut overflown = false;
        for rec in &traj.log {
            if rec.step % log_every != 0 {
                continue;
            }
            let j = (rec.step / log_every) as usize;
            times[j] = rec.t;
            let arg = (rec.mass + rec.grad_sq) * (-alpha * rec.t).exp();
            if arg > EXP_ARG_LIMIT {
                if !overflown {
                    overflown = true;
                    overflowed += 1;
                }
                break;
            }
            buckets[j].push(arg.exp());
        }
    }
    while buckets.last().is_some_and(Vec::is_empty) {
        buckets.pop();
    }
    let mut mean = Vec::with_capacity(buckets.len());
    let mut stderr = Vec::with_capacity(buckets.len());
    let mut n_used = Vec::with_capacity(buckets.len());
    for vals in &buckets {
        let (m, s) = mean_stderr(vals);
        mean.push(m);
        stderr.push(s);
        n_used.push(vals.len());
    }
    let bounded = !mean.is_empty()
        && mean.iter().zip(&stderr).all(|(m, s)| *m <= mean[0] + 2.0 * s);
    Ok(ExpMomentSeries {
        alpha,
        t: times[..buckets.len()].to_vec(),
        mean,
        stderr,
        n_used,
        overflow_trajectories: overflowed,
        bounded,
    })
}

fn mean_stderr(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Pathwise continuous dependence: both initial data evolved under the same
/// noise path, reporting sup_t ||u - v||^2 / ||u0 - v0||^2 over the ensemble.
#[derive(Debug, Clone, Serialize)]
pub struct ContDepPoint {
    pub initial_distance_sq: f64,
    pub mean_sup_ratio: f64,
    pub stderr: f64,
    pub max_sup_ratio: f64,
    /// u0 and v0 coincide; the difference is identically zero and no
    /// trajectories were run.
    pub identical: bool,
}

pub fn continuous_dependence(
    u0: &ComplexField,
    v0: &ComplexField,
    spec: &EnsembleSpec,
    workers: Option<usize>,
) -> Result<ContDepPoint> {
    spec.validate()?;
    for f in [u0, v0] {
        if !f.grid().same_as(&spec.grid) {
            return Err(Error::GridMismatch(f.grid().describe(), spec.grid.describe()));
        }
    }
    let d0 = u0.distance_l2(v0)?;
    let d0_sq = d0 * d0;
    if d0_sq == 0.0 {
        return Ok(ContDepPoint {
            initial_distance_sq: 0.0,
            mean_sup_ratio: 0.0,
            stderr: 0.0,
            max_sup_ratio: 0.0,
            identical: true,
        });
    }
    let sups = exec::map_indexed(spec.trajectories, workers, |i| {
        lockstep_sup_distance_sq(u0, v0, spec, spec.stream_offset + i as u64)
            .map_err(|e| Error::Trajectory { index: i, source: Box::new(e) })
    })?;
    let ratios: Vec<f64> = sups.iter().map(|s| s / d0_sq).collect();
    let (mean, se) = mean_stderr(&ratios);
    Ok(ContDepPoint {
        initial_distance_sq: d0_sq,
        mean_sup_ratio: mean,
        stderr: se,
        max_sup_ratio: ratios.iter().fold(0.0f64, |a, &b| a.max(b)),
        identical: false,
    })
}

fn lockstep_sup_distance_sq(
    u0: &ComplexField,
    v0: &ComplexField,
    spec: &EnsembleSpec,
    stream: u64,
) -> Result<f64> {
    let grid = &spec.grid;
    let params = &spec.params;
    let mut su = Stepper::new(grid, params);
    let mut sv = Stepper::new(grid, params);
    let mut u = u0.values().to_vec();
    let mut v = v0.values().to_vec();
    let mut sampler =
        (!spec.noise.is_off()).then(|| QWienerSampler::new(&spec.noise, spec.master_seed, stream));
    let mut dw = vec![0.0; grid.cells()];
    let weight = grid.cell_volume();
    let dist_sq = |u: &[Complex64], v: &[Complex64]| {
        weight * u.iter().zip(v).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>()
    };
    let mut sup = dist_sq(&u, &v);
    for _ in 1..=params.n_steps() {
        let noise = match sampler.as_mut() {
            Some(s) => {
                s.sample_increment(params.dt, &mut dw);
                Some(dw.as_slice())
            }
            None => None,
        };
        let du = su.step(&mut u, noise);
        let dv = sv.step(&mut v, noise);
        if !du.is_finite() || !dv.is_finite() {
            return Err(Error::NonFinite { context: "continuous-dependence pair".into() });
        }
        sup = sup.max(dist_sq(&u, &v));
    }
    Ok(sup)
}

/// Outcome of the transform-based cross-check of the direct integrator.
#[derive(Debug, Clone, Serialize)]
pub struct RescaleComparison {
    pub dt: f64,
    pub max_rel_dev: f64,
    /// Number of log times compared.
    pub checked: usize,
}

/// Integrate the same path twice: directly, and through the damping/noise
/// rescaling v(t) = e^{at - iW(t)} u(t), which turns the equation into
/// dv = i Lap v dt + i lambda e^{-2 a sigma t} |v|^{2 sigma} v dt with no
/// stochastic term. The transformed run discretizes the decay factor by its
/// midpoint value over each step, an approximation the direct scheme does
/// not share, so agreement within O(dt^2) cross-validates both.
/// Space-independent noise only: the transform needs W to commute with the
/// dispersion.
pub fn rescale_oracle_compare(u0: &ComplexField, spec: &EnsembleSpec) -> Result<RescaleComparison> {
    let params = &spec.params;
    params.validate()?;
    u0.ensure_finite("initial data")?;
    let grid = &spec.grid;
    if !u0.grid().same_as(grid) {
        return Err(Error::GridMismatch(u0.grid().describe(), grid.describe()));
    }
    let level = if spec.noise.is_off() { 0.0 } else { spec.noise.constant_level()? };

    let mut direct = Stepper::new(grid, params);
    let mut u = u0.values().to_vec();

    let mut ws = SpectralWorkspace::new(grid);
    let disp_half = half_dispersion_factors(grid, params.dt);
    let mut v = u0.values().to_vec();

    let mut sampler =
        (!spec.noise.is_off()).then(|| QWienerSampler::new(&spec.noise, spec.master_seed, spec.stream_offset));
    let mut dw = vec![0.0; grid.cells()];

    let (a, sigma, lambda, dt) = (params.damping, params.sigma, params.lambda, params.dt);
    let n_steps = params.n_steps();
    let mut max_rel_dev = 0.0f64;
    let mut checked = 0usize;

    for n in 1..=n_steps {
        let t_prev = (n - 1) as f64 * dt;
        let t = n as f64 * dt;
        let noise = match sampler.as_mut() {
            Some(s) => {
                s.sample_increment(dt, &mut dw);
                Some(dw.as_slice())
            }
            None => None,
        };
        let diag = direct.step(&mut u, noise);
        if !diag.is_finite() {
            return Err(Error::NonFinite { context: format!("direct run at t = {t}") });
        }

        // Transformed step: midpoint-frozen decay of the nonlinear phase.
        let coef = dt * (-2.0 * a * sigma * (t_prev + dt / 2.0)).exp();
        ws.forward(&mut v);
        for (x, m) in v.iter_mut().zip(&disp_half) {
            *x *= m;
        }
        ws.inverse(&mut v);
        for x in v.iter_mut() {
            let phase = lambda * x.norm_sqr().powf(sigma) * coef;
            let (sin, cos) = phase.sin_cos();
            *x *= Complex64::new(cos, sin);
        }
        ws.forward(&mut v);
        for (x, m) in v.iter_mut().zip(&disp_half) {
            *x *= m;
        }
        ws.inverse(&mut v);

        if n % params.log_every as u64 == 0 || n == n_steps {
            let w_t = level * sampler.as_ref().map_or(0.0, |s| s.beta()[0]);
            let rot = Complex64::from_polar((-a * t).exp(), w_t);
            let mut diff = 0.0;
            let mut norm = 0.0;
            for (x, y) in u.iter().zip(&v) {
                diff += (x - rot * y).norm_sqr();
                norm += x.norm_sqr();
            }
            let dev = (diff / norm).sqrt();
            if !dev.is_finite() {
                return Err(Error::NonFinite { context: format!("rescale comparison at t = {t}") });
            }
            max_rel_dev = max_rel_dev.max(dev);
            checked += 1;
        }
    }
    Ok(RescaleComparison { dt, max_rel_dev, checked })
}

fn half_dispersion_factors(grid: &Grid, dt: f64) -> Vec<Complex64> {
    let ks = grid.wavenumbers();
    let n = grid.points();
    match grid.dim() {
        1 => ks
            .iter()
            .map(|k| Complex64::from_polar(1.0, -k * k * dt / 2.0))
            .collect(),
        _ => {
            let mut out = Vec::with_capacity(n * n);
            for i0 in 0..n {
                for i1 in 0..n {
                    let k2 = ks[i0] * ks[i0] + ks[i1] * ks[i1];
                    out.push(Complex64::from_polar(1.0, -k2 * dt / 2.0));
                }
            }
            out
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DampingSweepPoint {
    pub damping: f64,
    pub n: usize,
    pub blew_up: usize,
    pub fraction: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub mean_tau: Option<f64>,
}

/// Blow-up fraction across damping strengths, everything else held fixed.
/// Each damping value gets its own disjoint block of RNG streams so the
/// sweep is reproducible independently of its order.
pub fn damping_sweep(
    spec: &EnsembleSpec,
    values: &[f64],
    workers: Option<usize>,
) -> Result<Vec<DampingSweepPoint>> {
    if values.is_empty() {
        return Err(Error::invalid("damping.values", "need at least one value"));
    }
    let mut out = Vec::with_capacity(values.len());
    for (idx, &a) in values.iter().enumerate() {
        let mut point_spec = spec.clone();
        point_spec.params.damping = a;
        point_spec.stream_offset = spec.stream_offset + (idx * spec.trajectories) as u64;
        let (summary, _) = run_ensemble(&point_spec, workers)?;
        let b = summary.blowup;
        let mean_tau = (!b.times.is_empty())
            .then(|| b.times.iter().sum::<f64>() / b.times.len() as f64);
        out.push(DampingSweepPoint {
            damping: a,
            n: b.n,
            blew_up: b.blew_up,
            fraction: b.fraction,
            ci_low: b.ci_low,
            ci_high: b.ci_high,
            mean_tau,
        });
    }
    Ok(out)
}

/// Whether the blow-up fraction is non-increasing along the sweep, treating
/// an increase as real only when the confidence intervals are disjoint.
pub fn damping_trend_holds(points: &[DampingSweepPoint]) -> bool {
    points.windows(2).all(|w| {
        let (prev, next) = (&w[0], &w[1]);
        next.fraction <= prev.fraction || next.ci_low <= prev.ci_high
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec(noise: Arc<NoiseSpec>, trajectories: usize) -> EnsembleSpec {
        let grid = noise.grid().clone();
        EnsembleSpec {
            grid,
            params: SimParams {
                sigma: 2.0,
                lambda: 1.0,
                damping: 0.5,
                dt: 1e-3,
                horizon: 0.05,
                log_every: 10,
                ..SimParams::default()
            },
            noise,
            init: InitialData::Gaussian { scale: 0.5, width: 1.0, chirp: 0.0 },
            trajectories,
            master_seed: 11,
            stream_offset: 0,
        }
    }

    fn grid_64() -> Arc<Grid> {
        Grid::new(1, 10.0, 64).unwrap()
    }

    #[test]
    fn deterministic_ensemble_has_zero_spread() {
        let spec = small_spec(NoiseSpec::off(&grid_64()), 4);
        let (summary, trajs) = run_ensemble(&spec, Some(1)).unwrap();
        assert_eq!(trajs.len(), 4);
        assert_eq!(summary.blowup.blew_up, 0);
        assert_eq!(summary.blowup.fraction, 0.0);
        let last = summary.series.last().unwrap();
        assert_eq!(last.n_alive, 4);
        for p in &summary.series {
            for (s, m) in p.stderr.as_array().into_iter().zip(p.mean.as_array()) {
                assert!(
                    s <= 1e-13 * (1.0 + m.abs()),
                    "identical trajectories cannot have spread, got stderr {s}"
                );
            }
        }
        // Charge law across the series: M(t) = e^{-2 a t} M(0).
        let m0 = summary.series[0].mean.mass;
        for p in &summary.series {
            let expected = m0 * (-2.0 * 0.5 * p.t).exp();
            assert!(
                (p.mean.mass - expected).abs() <= 1e-12 * m0,
                "mass at t = {} drifted: {} vs {expected}",
                p.t,
                p.mean.mass
            );
        }
    }

    #[test]
    fn reruns_and_worker_counts_give_identical_summaries() {
        let noise = NoiseSpec::build(&grid_64(), 2, 0.1, 1.0, false).unwrap();
        let spec = small_spec(noise, 3);
        let (s1, _) = run_ensemble(&spec, Some(1)).unwrap();
        let (s2, _) = run_ensemble(&spec, Some(2)).unwrap();
        let (s3, _) = run_ensemble(&spec, None).unwrap();
        let j1 = serde_json::to_string(&s1).unwrap();
        assert_eq!(j1, serde_json::to_string(&s2).unwrap(), "worker count changed the result");
        assert_eq!(j1, serde_json::to_string(&s3).unwrap());
        let mut shifted = spec.clone();
        shifted.master_seed = 12;
        let (s4, _) = run_ensemble(&shifted, Some(1)).unwrap();
        assert_ne!(
            j1,
            serde_json::to_string(&s4).unwrap(),
            "a different seed must change a noisy ensemble"
        );
    }

    #[test]
    fn clopper_pearson_matches_reference_values() {
        // 2 successes out of 10, 95%: interval (0.02521073, 0.55609546),
        // frozen from an independent exact binomial computation.
        let (lo, hi) = clopper_pearson(2, 10, 0.95).unwrap();
        assert!((lo - 0.02521073).abs() < 5e-7, "low end {lo}");
        assert!((hi - 0.55609546).abs() < 5e-7, "high end {hi}");
        let (lo0, hi0) = clopper_pearson(0, 10, 0.95).unwrap();
        assert_eq!(lo0, 0.0);
        let expected_hi0 = 1.0 - 0.025f64.powf(0.1);
        assert!((hi0 - expected_hi0).abs() < 1e-12, "k = 0 case is closed-form");
        let (lon, hin) = clopper_pearson(10, 10, 0.95).unwrap();
        assert_eq!(hin, 1.0);
        assert!((lon - 0.025f64.powf(0.1)).abs() < 1e-12);
    }

    #[test]
    fn negative_energy_profile_blows_up_on_every_path() {
        // 512 points keep the detector threshold well below the largest
        // H^1 value the grid can represent.
        let grid = Grid::new(1, 20.0, 512).unwrap();
        let spec = EnsembleSpec {
            grid: grid.clone(),
            params: SimParams {
                sigma: 3.0,
                dt: 2e-4,
                horizon: 0.6,
                log_every: 100,
                blowup_factor: 15.0,
                ..SimParams::default()
            },
            noise: NoiseSpec::off(&grid),
            init: InitialData::GroundState { scale: 1.3 },
            trajectories: 2,
            master_seed: 1,
            stream_offset: 0,
        };
        let (p_hat, (lo, hi)) = estimate_blowup_probability(&spec, Some(1)).unwrap();
        assert_eq!(p_hat, 1.0, "both deterministic paths must trip the detector");
        assert_eq!(hi, 1.0);
        assert!(lo > 0.0);
        let (summary, _) = run_ensemble(&spec, Some(1)).unwrap();
        assert_eq!(summary.blowup.times.len(), 2);
        assert_eq!(summary.blowup.times[0], summary.blowup.times[1]);
        assert!(
            summary.series.len() < (0.6f64 / 2e-4 / 100.0) as usize,
            "series should stop once every trajectory has blown up"
        );
    }

    #[test]
    fn exp_moment_starts_at_the_exact_initial_value() {
        let noise = NoiseSpec::build(&grid_64(), 2, 0.02, 2.0, false).unwrap();
        let mut spec = small_spec(noise, 3);
        spec.params.horizon = 0.1;
        let series = exp_moment_estimate(&spec, Some(0.3), Some(1)).unwrap();
        let u0 = spec.initial_field().unwrap();
        let mut ws = SpectralWorkspace::new(&spec.grid);
        let expected = u0.h1_norm_sq(&mut ws).unwrap().exp();
        assert_eq!(series.t[0], 0.0);
        assert!(
            ((series.mean[0] - expected) / expected).abs() < 1e-10,
            "t = 0 statistic should be exp(||u0||_H1^2): {} vs {expected}",
            series.mean[0]
        );
        assert!(
            series.stderr[0] <= 1e-13 * series.mean[0],
            "deterministic initial data has no spread at t = 0"
        );
        assert_eq!(series.overflow_trajectories, 0);
    }

    #[test]
    fn exp_moment_flags_overflowing_trajectories() {
        let spec = small_spec(NoiseSpec::off(&grid_64()), 2);
        // alpha = -200 inflates the exponent by e^{200 t}; the statistic
        // overflows well before the horizon.
        let series = exp_moment_estimate(&spec, Some(-200.0), Some(1)).unwrap();
        assert_eq!(series.overflow_trajectories, 2);
        assert!(
            series.t.len() < 6,
            "series should be truncated at the overflow, got {} points",
            series.t.len()
        );
        assert!(series.n_used.iter().all(|&n| n > 0));
    }

    #[test]
    fn default_alpha_reduces_to_noise_term_when_undamped() {
        // a = 0 kills the first two terms, leaving 4/c^2 ||u0||^2 ||f_Q||^2.
        // The box must hold the reference profile, so L = 24 here.
        let grid = Grid::new(1, 24.0, 256).unwrap();
        let noise = NoiseSpec::build(&grid, 2, 0.05, 2.0, false).unwrap();
        let mut spec = small_spec(noise.clone(), 1);
        spec.params.damping = 0.0;
        let alpha = default_alpha(&spec).unwrap();
        let u0 = spec.initial_field().unwrap();
        let mut ws = SpectralWorkspace::new(&grid);
        let r = groundstate::ground_state_1d(2.0, &grid).unwrap();
        let mass = u0.norm_l2_sq();
        let c = 1.0 - (mass / r.mass_sq).powi(2);
        let fq = noise.fq_grad_sup(&mut ws).unwrap();
        let expected = 4.0 / (c * c) * mass * fq * fq;
        assert!(((alpha - expected) / expected).abs() < 1e-12, "{alpha} vs {expected}");
        assert!(alpha > 0.0);
    }

    #[test]
    fn identical_initial_data_need_no_simulation() {
        let spec = small_spec(NoiseSpec::off(&grid_64()), 2);
        let u0 = spec.initial_field().unwrap();
        let point = continuous_dependence(&u0, &u0.clone(), &spec, Some(1)).unwrap();
        assert!(point.identical);
        assert_eq!(point.mean_sup_ratio, 0.0);
    }

    #[test]
    fn perturbation_ratios_stay_comparable_as_epsilon_shrinks() {
        let noise = NoiseSpec::build(&grid_64(), 1, 0.05, 1.0, false).unwrap();
        let mut spec = small_spec(noise, 3);
        spec.params.horizon = 0.2;
        let u0 = spec.initial_field().unwrap();
        let mut ratios = Vec::new();
        for eps in [1e-2, 1e-3] {
            let v0 = ComplexField::from_fn_1d(&spec.grid, |x| {
                let base = 0.5 * (-x * x).exp();
                Complex64::new(base + eps * (-x * x / 4.0).exp(), 0.0)
            })
            .unwrap();
            let point = continuous_dependence(&u0, &v0, &spec, Some(1)).unwrap();
            assert!(!point.identical);
            assert!(point.mean_sup_ratio >= 1.0, "sup over [0,T] includes t = 0");
            ratios.push(point.mean_sup_ratio);
        }
        let quotient = ratios[0] / ratios[1];
        assert!(
            (0.5..=2.0).contains(&quotient),
            "ratio should be stable under epsilon refinement, got {ratios:?}"
        );
    }

    #[test]
    fn rescale_oracle_agrees_with_the_direct_run() {
        let grid = Grid::new(1, 10.0, 128).unwrap();
        let noise = NoiseSpec::build(&grid, 1, 0.05, 1.0, true).unwrap();
        let spec = EnsembleSpec {
            grid: grid.clone(),
            params: SimParams {
                sigma: 2.0,
                damping: 1.0,
                dt: 1e-3,
                horizon: 0.2,
                log_every: 20,
                ..SimParams::default()
            },
            noise,
            init: InitialData::Gaussian { scale: 0.8, width: 1.0, chirp: 0.0 },
            trajectories: 1,
            master_seed: 7,
            stream_offset: 0,
        };
        let u0 = spec.initial_field().unwrap();
        let cmp = rescale_oracle_compare(&u0, &spec).unwrap();
        assert!(cmp.checked >= 10);
        assert!(
            cmp.max_rel_dev < 1e-6,
            "transformed and direct integrations disagree: {}",
            cmp.max_rel_dev
        );

        let mut quiet = spec.clone();
        quiet.noise = NoiseSpec::build(&grid, 1, 0.0, 1.0, true).unwrap();
        let cmp0 = rescale_oracle_compare(&u0, &quiet).unwrap();
        assert!(cmp0.max_rel_dev < 1e-6, "W = 0 case deviates: {}", cmp0.max_rel_dev);

        let spatial = NoiseSpec::build(&grid, 2, 0.05, 1.0, false).unwrap();
        let mut bad = spec.clone();
        bad.noise = spatial;
        assert!(
            rescale_oracle_compare(&u0, &bad).is_err(),
            "space-dependent noise must be rejected"
        );
    }

    #[test]
    fn damping_sweep_blocks_streams_per_value() {
        let noise = NoiseSpec::build(&grid_64(), 2, 0.1, 1.0, false).unwrap();
        let spec = small_spec(noise, 2);
        let points = damping_sweep(&spec, &[0.0, 2.0], Some(1)).unwrap();
        assert_eq!(points.len(), 2);
        assert_eq!(points[0].damping, 0.0);
        assert_eq!(points[1].damping, 2.0);
        assert!(points.iter().all(|p| p.n == 2));
        let again = damping_sweep(&spec, &[0.0, 2.0], Some(1)).unwrap();
        assert_eq!(
            serde_json::to_string(&points).unwrap(),
            serde_json::to_string(&again).unwrap(),
            "sweep must be reproducible"
        );
    }
}
