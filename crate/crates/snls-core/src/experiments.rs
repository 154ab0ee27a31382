//! Experiment runners: build the ingredients from a [`RunConfig`], run, and
//! persist CSV/JSON artifacts together with a manifest from which the run
//! can be reproduced bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde_json::json;

use crate::blowup::BlowupCondition;
use crate::config::{Experiment, InitKind, RunConfig};
use crate::error::Result;
use crate::field::ComplexField;
use crate::grid::Grid;
use crate::groundstate::ground_state_1d;
use crate::integrator::{evolve, RunStatus};
use crate::montecarlo::{
    continuous_dependence, damping_sweep, damping_trend_holds, exp_moment_estimate, run_ensemble,
    rescale_oracle_compare, EnsembleSpec, InitialData, SeriesPoint,
};
use crate::noise::QWienerSampler;
use crate::observables::ObservableRecord;
use crate::spectral::SpectralWorkspace;

pub const SCHEMA_VERSION: u32 = 1;

/// What the caller should report after a run.
pub struct RunOutcome {
    /// Human-readable result lines, one finding per line.
    pub lines: Vec<String>,
    /// A simulate run tripped the blow-up detector (informational).
    pub blew_up: bool,
}

/// Runs the configured experiment, writing `manifest.json` plus the
/// experiment's own artifacts into `out_dir`.
pub fn run(config: &RunConfig, out_dir: &Path, workers: Option<usize>) -> Result<RunOutcome> {
    let grid = config.build_grid()?;
    fs::create_dir_all(out_dir)?;
    write_manifest(config, &grid, out_dir)?;
    match config.experiment {
        Experiment::Simulate => run_simulate(config, &grid, out_dir),
        Experiment::Ensemble => run_ensemble_experiment(config, &grid, out_dir, workers),
        Experiment::Groundstate => run_groundstate(config, &grid, out_dir),
        Experiment::BlowupScan => run_blowup_scan(config, &grid, out_dir),
        Experiment::Threshold => run_threshold(config, &grid, out_dir),
        Experiment::RescaleCheck => run_rescale_check(config, &grid, out_dir),
        Experiment::ExpMoment => run_exp_moment(config, &grid, out_dir, workers),
        Experiment::ContDep => run_cont_dep(config, &grid, out_dir, workers),
        Experiment::DampingSweep => run_damping_sweep(config, &grid, out_dir, workers),
    }
}

fn ensemble_spec(config: &RunConfig, grid: &Arc<Grid>) -> Result<EnsembleSpec> {
    let noise = config.build_noise(grid)?;
    let init = match config.init.kind {
        InitKind::Zero => InitialData::Zero,
        InitKind::Gaussian => InitialData::Gaussian {
            scale: config.init.scale,
            width: config.init.width,
            chirp: config.init.chirp,
        },
        InitKind::Groundstate => InitialData::GroundState { scale: config.init.scale },
    };
    Ok(EnsembleSpec {
        grid: grid.clone(),
        params: config.sim.clone(),
        noise,
        init,
        trajectories: config.trajectories,
        master_seed: config.seed,
        stream_offset: 0,
    })
}

/// The manifest deliberately contains nothing run-dependent (no clocks, no
/// hosts): rerunning the echoed config with the echoed seed regenerates
/// every artifact byte for byte.
fn write_manifest(config: &RunConfig, grid: &Arc<Grid>, out_dir: &Path) -> Result<()> {
    let defaulted: Vec<&String> = config
        .provenance
        .iter()
        .filter(|(_, p)| **p == crate::config::Provenance::Defaulted)
        .map(|(k, _)| k)
        .collect();
    let manifest = json!({
        "schema_version": SCHEMA_VERSION,
        "experiment": config.experiment.as_str(),
        "seed": config.seed,
        "crate_version": env!("CARGO_PKG_VERSION"),
        "grid": {
            "dim": grid.dim(),
            "points": grid.points(),
            "half_width": grid.half_width(),
            "dx": grid.dx(),
        },
        "config_text": config.to_text(),
        "defaulted_keys": defaulted,
        "warnings": config.warnings(),
    });
    write_json(out_dir, "manifest.json", &manifest)
}

fn write_json(out_dir: &Path, name: &str, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    fs::write(out_dir.join(name), text)?;
    Ok(())
}

fn observables_csv(log: &[ObservableRecord]) -> String {
    let mut out = String::from("t,M,H,V,G,Htilde,grad_sq,lp_pow,boundary_mass\n");
    for r in log {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.t, r.mass, r.energy, r.variance, r.momentum, r.h_tilde, r.grad_sq, r.lp_pow,
            r.boundary_mass
        );
    }
    out
}

fn series_csv(series: &[SeriesPoint]) -> String {
    let mut out = String::from(
        "t,n_alive,M_mean,M_stderr,H_mean,H_stderr,V_mean,V_stderr,G_mean,G_stderr,\
         Htilde_mean,Htilde_stderr,grad_sq_mean,grad_sq_stderr,lp_pow_mean,lp_pow_stderr,\
         boundary_mass_mean,boundary_mass_stderr\n",
    );
    for p in series {
        let (m, s) = (&p.mean, &p.stderr);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            p.t,
            p.n_alive,
            m.mass,
            s.mass,
            m.energy,
            s.energy,
            m.variance,
            s.variance,
            m.momentum,
            s.momentum,
            m.h_tilde,
            s.h_tilde,
            m.grad_sq,
            s.grad_sq,
            m.lp_pow,
            s.lp_pow,
            m.boundary_mass,
            s.boundary_mass
        );
    }
    out
}

/// Max pathwise deviation of M(u_n) from e^{-2 a t_n} M(u_0), relative to
/// M(u_0).
fn charge_law_deviation(log: &[ObservableRecord], damping: f64) -> f64 {
    let m0 = log.first().map_or(0.0, |r| r.mass);
    if m0 <= 0.0 {
        return 0.0;
    }
    log.iter()
        .map(|r| (r.mass - (-2.0 * damping * r.t).exp() * m0).abs() / m0)
        .fold(0.0, f64::max)
}

fn run_simulate(config: &RunConfig, grid: &Arc<Grid>, out_dir: &Path) -> Result<RunOutcome> {
    let spec = ensemble_spec(config, grid)?;
    let u0 = spec.initial_field()?;
    let mut sampler = (!spec.noise.is_off())
        .then(|| QWienerSampler::new(&spec.noise, spec.master_seed, spec.stream_offset));
    let traj = evolve(&u0, &spec.params, sampler.as_mut())?;
    fs::write(out_dir.join("observables.csv"), observables_csv(&traj.log))?;
    let charge_dev = charge_law_deviation(&traj.log, config.sim.damping);
    let (status, tau) = match traj.status {
        RunStatus::Completed => ("completed", None),
        RunStatus::BlewUp { tau } => ("blew_up", Some(tau)),
    };
    let last = traj.log.last().expect("at least the initial record");
    let summary = json!({
        "schema_version": SCHEMA_VERSION,
        "status": status,
        "tau": tau,
        "records": traj.log.len(),
        "max_charge_dev": charge_dev,
        "final": { "t": last.t, "M": last.mass, "H": last.energy, "grad_sq": last.grad_sq },
        "warnings": traj.warnings,
    });
    write_json(out_dir, "summary.json", &summary)?;
    let mut lines = match tau {
        Some(tau) => vec![format!("blow-up detected at tau = {tau}")],
        None => vec![format!("completed, final t = {}", last.t)],
    };
    lines.push(format!("max charge-law deviation {charge_dev:.3e}"));
    lines.extend(traj.warnings.iter().map(|w| format!("warning: {w}")));
    Ok(RunOutcome { lines, blew_up: tau.is_some() })
}

fn run_ensemble_experiment(
    config: &RunConfig,
    grid: &Arc<Grid>,
    out_dir: &Path,
    workers: Option<usize>,
) -> Result<RunOutcome> {
    let spec = ensemble_spec(config, grid)?;
    let (summary, _) = run_ensemble(&spec, workers)?;
    fs::write(out_dir.join("series.csv"), series_csv(&summary.series))?;
    let payload = json!({ "schema_version": SCHEMA_VERSION, "ensemble": summary });
    write_json(out_dir, "summary.json", &payload)?;
    let b = &summary.blowup;
    Ok(RunOutcome {
        lines: vec![
            format!(
                "{} trajectories, {} blew up (fraction {}, 95% CI [{}, {}])",
                b.n, b.blew_up, b.fraction, b.ci_low, b.ci_high
            ),
            format!("max charge-law deviation {:.3e}", summary.max_charge_dev),
            format!("min uncertainty gap {:.3e}", summary.min_uncertainty_gap),
        ],
        blew_up: false,
    })
}

fn run_groundstate(config: &RunConfig, grid: &Arc<Grid>, out_dir: &Path) -> Result<RunOutcome> {
    let gs = ground_state_1d(config.sim.sigma, grid)?;
    let mut ws = SpectralWorkspace::new(grid);
    let residual = gs.ode_residual_sup(&mut ws)?;
    let payload = json!({
        "schema_version": SCHEMA_VERSION,
        "sigma": config.sim.sigma,
        "dim": grid.dim(),
        "mass_sq": gs.mass_sq,
        "gn_constant": gs.gn_constant,
        "ode_residual_sup": residual,
    });
    write_json(out_dir, "groundstate.json", &payload)?;
    Ok(RunOutcome { lines: vec![payload.to_string()], blew_up: false })
}

fn run_blowup_scan(config: &RunConfig, grid: &Arc<Grid>, out_dir: &Path) -> Result<RunOutcome> {
    let spec = ensemble_spec(config, grid)?;
    let mut ws = SpectralWorkspace::new(grid);
    let mut bases = Vec::with_capacity(config.scan.sigma.len());
    for &sigma in &config.scan.sigma {
        let u0 = spec.init.build(grid, sigma)?;
        bases.push(BlowupCondition::from_state(
            &u0,
            sigma,
            config.sim.lambda,
            0.0,
            0.0,
            &mut ws,
        )?);
    }
    let mut csv = String::from("damping,sigma,fq,z,v0,g0,h0,m0,tbar,certified\n");
    let mut certified = 0usize;
    let mut cells = 0usize;
    for &a in &config.scan.damping {
        for (base, &sigma) in bases.iter().zip(&config.scan.sigma) {
            for &fq in &config.scan.fq {
                let cond = BlowupCondition { damping: a, fq_sup: fq, ..*base };
                let z = cond.z_floor();
                let tbar = cond.minimal_certified_time(z, config.scan.tmax)?;
                cells += 1;
                certified += tbar.is_some() as usize;
                let _ = writeln!(
                    csv,
                    "{a},{sigma},{fq},{z},{},{},{},{},{},{}",
                    cond.v0,
                    cond.g0,
                    cond.h0,
                    cond.m0,
                    tbar.map_or_else(String::new, |t| t.to_string()),
                    tbar.is_some()
                );
            }
        }
    }
    fs::write(out_dir.join("scan.csv"), &csv)?;
    Ok(RunOutcome {
        lines: vec![format!("{certified} of {cells} cells certify blow-up by scan.tmax")],
        blew_up: false,
    })
}

fn run_threshold(config: &RunConfig, grid: &Arc<Grid>, out_dir: &Path) -> Result<RunOutcome> {
    let gs = ground_state_1d(config.sim.sigma, grid)?;
    let noise = config.build_noise(grid)?;
    let mut lines = Vec::new();
    let mut rows = Vec::new();
    let mut csv = String::from("scale,blew_up,tau,sup_grad_ratio\n");
    for (idx, &scale) in config.threshold_scales.iter().enumerate() {
        let u0 = gs.field(scale);
        let mut sampler =
            (!noise.is_off()).then(|| QWienerSampler::new(&noise, config.seed, idx as u64));
        let traj = evolve(&u0, &config.sim, sampler.as_mut())?;
        let grad0 = traj.log[0].grad_sq.max(f64::MIN_POSITIVE);
        let sup_ratio =
            traj.log.iter().map(|r| r.grad_sq / grad0).fold(0.0, f64::max);
        let tau = match traj.status {
            RunStatus::Completed => None,
            RunStatus::BlewUp { tau } => Some(tau),
        };
        lines.push(match tau {
            None => format!("scale = {scale}: global (sup grad ratio {sup_ratio:.3})"),
            Some(tau) => format!("scale = {scale}: blew_up (tau = {tau})"),
        });
        let _ = writeln!(
            csv,
            "{scale},{},{},{sup_ratio}",
            tau.is_some(),
            tau.map_or_else(String::new, |t| t.to_string())
        );
        rows.push(json!({
            "scale": scale,
            "blew_up": tau.is_some(),
            "tau": tau,
            "sup_grad_ratio": sup_ratio,
        }));
    }
    fs::write(out_dir.join("threshold.csv"), &csv)?;
    let payload = json!({ "schema_version": SCHEMA_VERSION, "scales": rows });
    write_json(out_dir, "summary.json", &payload)?;
    Ok(RunOutcome { lines, blew_up: false })
}

fn run_rescale_check(config: &RunConfig, grid: &Arc<Grid>, out_dir: &Path) -> Result<RunOutcome> {
    let mut spec = ensemble_spec(config, grid)?;
    let u0 = spec.initial_field()?;
    let mut csv = String::from("dt,max_rel_dev,checked\n");
    let mut lines = Vec::new();
    let mut devs = Vec::new();
    for &dt in &config.rescale_dts {
        spec.params.dt = dt;
        let comp = rescale_oracle_compare(&u0, &spec)?;
        let _ = writeln!(csv, "{},{},{}", comp.dt, comp.max_rel_dev, comp.checked);
        lines.push(format!(
            "dt = {}: max relative deviation {:.3e} over {} log times",
            comp.dt, comp.max_rel_dev, comp.checked
        ));
        devs.push(comp);
    }
    let decreasing = devs.windows(2).all(|w| w[1].max_rel_dev < w[0].max_rel_dev);
    lines.push(format!("deviation decreases under refinement: {decreasing}"));
    fs::write(out_dir.join("rescale.csv"), &csv)?;
    let payload = json!({
        "schema_version": SCHEMA_VERSION,
        "comparisons": devs,
        "decreasing": decreasing,
    });
    write_json(out_dir, "summary.json", &payload)?;
    Ok(RunOutcome { lines, blew_up: false })
}

fn run_exp_moment(
    config: &RunConfig,
    grid: &Arc<Grid>,
    out_dir: &Path,
    workers: Option<usize>,
) -> Result<RunOutcome> {
    let spec = ensemble_spec(config, grid)?;
    let series = exp_moment_estimate(&spec, config.alpha, workers)?;
    let mut csv = String::from("t,mean,stderr,n_used\n");
    for i in 0..series.t.len() {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            series.t[i], series.mean[i], series.stderr[i], series.n_used[i]
        );
    }
    fs::write(out_dir.join("exp_moment.csv"), &csv)?;
    let alpha_source = if config.alpha.is_some() { "config" } else { "derived" };
    let payload = json!({
        "schema_version": SCHEMA_VERSION,
        "alpha": series.alpha,
        "alpha_source": alpha_source,
        "bounded": series.bounded,
        "overflow_trajectories": series.overflow_trajectories,
        "points": series.t.len(),
    });
    write_json(out_dir, "summary.json", &payload)?;
    Ok(RunOutcome {
        lines: vec![
            format!("alpha = {} ({alpha_source})", series.alpha),
            format!(
                "mean statistic bounded by its t = 0 value within 2 stderr: {}",
                series.bounded
            ),
            format!("{} trajectories overflowed the statistic", series.overflow_trajectories),
        ],
        blew_up: false,
    })
}

fn run_cont_dep(
    config: &RunConfig,
    grid: &Arc<Grid>,
    out_dir: &Path,
    workers: Option<usize>,
) -> Result<RunOutcome> {
    let spec = ensemble_spec(config, grid)?;
    let u0 = spec.initial_field()?;
    let bump = match grid.dim() {
        1 => ComplexField::from_fn_1d(grid, |x| ((-x * x / 4.0).exp()).into()),
        _ => ComplexField::from_fn_2d(grid, |x, y| ((-(x * x + y * y) / 4.0).exp()).into()),
    }?;
    let mut csv = String::from("epsilon,initial_distance_sq,mean_sup_ratio,stderr,max_sup_ratio\n");
    let mut lines = Vec::new();
    let mut points = Vec::new();
    for &eps in &config.contdep_epsilons {
        let values: Vec<_> = u0
            .values()
            .iter()
            .zip(bump.values())
            .map(|(u, b)| *u + *b * eps)
            .collect();
        let v0 = ComplexField::from_values(grid, values)?;
        let point = continuous_dependence(&u0, &v0, &spec, workers)?;
        let _ = writeln!(
            csv,
            "{eps},{},{},{},{}",
            point.initial_distance_sq, point.mean_sup_ratio, point.stderr, point.max_sup_ratio
        );
        lines.push(format!(
            "epsilon = {eps}: mean sup ||u - v||^2 / ||u0 - v0||^2 = {:.4} (max {:.4})",
            point.mean_sup_ratio, point.max_sup_ratio
        ));
        points.push(point);
    }
    fs::write(out_dir.join("contdep.csv"), &csv)?;
    let payload = json!({
        "schema_version": SCHEMA_VERSION,
        "epsilons": config.contdep_epsilons,
        "points": points,
    });
    write_json(out_dir, "summary.json", &payload)?;
    Ok(RunOutcome { lines, blew_up: false })
}

fn run_damping_sweep(
    config: &RunConfig,
    grid: &Arc<Grid>,
    out_dir: &Path,
    workers: Option<usize>,
) -> Result<RunOutcome> {
    let spec = ensemble_spec(config, grid)?;
    let points = damping_sweep(&spec, &config.damping_values, workers)?;
    let mut csv = String::from("damping,n,blew_up,fraction,ci_low,ci_high,mean_tau\n");
    let mut lines = Vec::new();
    for p in &points {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            p.damping,
            p.n,
            p.blew_up,
            p.fraction,
            p.ci_low,
            p.ci_high,
            p.mean_tau.map_or_else(String::new, |t| t.to_string())
        );
        lines.push(format!(
            "a = {}: {} of {} blew up (fraction {}, CI [{}, {}])",
            p.damping, p.blew_up, p.n, p.fraction, p.ci_low, p.ci_high
        ));
    }
    let trend = damping_trend_holds(&points);
    lines.push(format!("fraction non-increasing up to CI overlap: {trend}"));
    fs::write(out_dir.join("damping.csv"), &csv)?;
    let payload = json!({
        "schema_version": SCHEMA_VERSION,
        "points": points,
        "trend_nonincreasing": trend,
    });
    write_json(out_dir, "summary.json", &payload)?;
    Ok(RunOutcome { lines, blew_up: false })
}
