use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::spectral::SpectralWorkspace;

/// Snapshot of the tracked functionals at one log time.
///
/// `lp_pow` is the potential term ||u||_{L^{2s+2}}^{2s+2} for the sigma the
/// run was configured with, `grad_sq` is ||grad u||^2, `boundary_mass` the
/// charge sitting in the outermost strip of the box.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ObservableRecord {
    pub step: u64,
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    pub variance: f64,
    pub momentum: f64,
    pub h_tilde: f64,
    pub grad_sq: f64,
    pub lp_pow: f64,
    pub boundary_mass: f64,
}

/// M(u) = ||u||^2.
pub fn mass(u: &ComplexField) -> f64 {
    u.norm_l2_sq()
}

/// H(u) = 1/2 ||grad u||^2 - lambda/(2s+2) ||u||_{2s+2}^{2s+2}.
pub fn energy(u: &ComplexField, sigma: f64, lambda: f64, ws: &mut SpectralWorkspace) -> Result<f64> {
    Ok(0.5 * u.grad_norm_sq(ws)? - lambda / (2.0 * sigma + 2.0) * u.lp_pow(2.0 * sigma + 2.0))
}

/// V(u) = int |x|^2 |u|^2.
pub fn variance(u: &ComplexField) -> f64 {
    u.weighted_x2()
}

/// G(u) = Im int conj(u) x . grad u.
pub fn momentum(u: &ComplexField, ws: &mut SpectralWorkspace) -> Result<f64> {
    let grad = u.gradient(ws)?;
    Ok(momentum_from_gradient(u, &grad))
}

fn momentum_from_gradient(u: &ComplexField, grad: &[ComplexField]) -> f64 {
    let grid = u.grid();
    let n = grid.points();
    let mut s = 0.0;
    for (axis, g) in grad.iter().enumerate() {
        for (j, (uv, gv)) in u.values().iter().zip(g.values()).enumerate() {
            let coord = match (grid.dim(), axis) {
                (1, _) => grid.coords()[j],
                (_, 0) => grid.coords()[j / n],
                _ => grid.coords()[j % n],
            };
            s += (uv.conj() * coord * gv).im;
        }
    }
    s * grid.cell_volume()
}

/// H~(u) = ||grad u||^2 - s d/(2s+2) ||u||_{2s+2}^{2s+2}, the combination
/// driving the variance momentum: dG/dt = 2 H~ - 2 a G in the focusing case.
pub fn h_tilde(u: &ComplexField, sigma: f64, ws: &mut SpectralWorkspace) -> Result<f64> {
    let d = u.grid().dim() as f64;
    Ok(u.grad_norm_sq(ws)? - sigma * d / (2.0 * sigma + 2.0) * u.lp_pow(2.0 * sigma + 2.0))
}

/// (2/d) ||grad u|| ||x u|| - ||u||^2, nonnegative up to boundary terms.
pub fn uncertainty_gap(u: &ComplexField, ws: &mut SpectralWorkspace) -> Result<f64> {
    let d = u.grid().dim() as f64;
    Ok(2.0 / d * (u.grad_norm_sq(ws)? * u.weighted_x2()).sqrt() - u.norm_l2_sq())
}

/// The gap recomputed from an existing record.
pub fn gap_of(rec: &ObservableRecord, dim: usize) -> f64 {
    2.0 / dim as f64 * (rec.grad_sq * rec.variance).sqrt() - rec.mass
}

/// Evaluate every tracked functional in one pass (one forward FFT plus one
/// inverse per dimension).
pub fn record(
    u: &ComplexField,
    sigma: f64,
    lambda: f64,
    step: u64,
    t: f64,
    ws: &mut SpectralWorkspace,
) -> Result<ObservableRecord> {
    let grad = u.gradient(ws)?;
    let grad_sq: f64 = grad.iter().map(|g| g.norm_l2_sq()).sum();
    let lp = u.lp_pow(2.0 * sigma + 2.0);
    let d = u.grid().dim() as f64;
    Ok(ObservableRecord {
        step,
        t,
        mass: u.norm_l2_sq(),
        energy: 0.5 * grad_sq - lambda / (2.0 * sigma + 2.0) * lp,
        variance: u.weighted_x2(),
        momentum: momentum_from_gradient(u, &grad),
        h_tilde: grad_sq - sigma * d / (2.0 * sigma + 2.0) * lp,
        grad_sq,
        lp_pow: lp,
        boundary_mass: u.boundary_mass(),
    })
}

/// Modified functionals e^{bt} {H~, G, V} along a log.
#[derive(Debug, Clone, Serialize)]
pub struct ModifiedSeries {
    pub b: f64,
    pub t: Vec<f64>,
    pub h_tilde: Vec<f64>,
    pub momentum: Vec<f64>,
    pub variance: Vec<f64>,
}

pub fn modified_series(log: &[ObservableRecord], b: f64) -> ModifiedSeries {
    let mut out = ModifiedSeries {
        b,
        t: Vec::with_capacity(log.len()),
        h_tilde: Vec::with_capacity(log.len()),
        momentum: Vec::with_capacity(log.len()),
        variance: Vec::with_capacity(log.len()),
    };
    for r in log {
        let w = (b * r.t).exp();
        out.t.push(r.t);
        out.h_tilde.push(w * r.h_tilde);
        out.momentum.push(w * r.momentum);
        out.variance.push(w * r.variance);
    }
    out
}

/// dV/dt = 4G - 2aV checked by central differences at spacing `dt_log`
/// (a multiple of the log cadence; the log is subsampled to it). Returns the
/// max interior residual normalised by the scale of the data, O(dt_log^2)
/// for a converged trajectory.
pub fn check_variance_ode(log: &[ObservableRecord], a: f64, dt_log: f64) -> Result<f64> {
    let idx = cadence_indices(log, dt_log)?;
    fd_residual(
        log,
        &idx,
        |r| r.variance,
        |r| 4.0 * r.momentum - 2.0 * a * r.variance,
    )
}

/// dG/dt = 4H - 2aG + (2 - s d)/(s + 1) ||u||_{2s+2}^{2s+2}, same scheme as
/// [check_variance_ode]. (Equivalently dG/dt = 2 H~ - 2 a G.)
pub fn check_momentum_ode(
    log: &[ObservableRecord],
    a: f64,
    sigma: f64,
    dim: usize,
    dt_log: f64,
) -> Result<f64> {
    let idx = cadence_indices(log, dt_log)?;
    let coef = (2.0 - sigma * dim as f64) / (sigma + 1.0);
    fd_residual(
        log,
        &idx,
        |r| r.momentum,
        move |r| 4.0 * r.energy - 2.0 * a * r.momentum + coef * r.lp_pow,
    )
}

/// Indices of records sitting on the uniform grid of spacing `dt_log`.
/// Selection is by step number, so a trailing off-cadence record (horizon or
/// blow-up time) is ignored rather than corrupting the differences.
fn cadence_indices(log: &[ObservableRecord], dt_log: f64) -> Result<Vec<usize>> {
    if log.len() < 2 {
        return Err(Error::ShortLog {
            need: 3,
            have: log.len(),
        });
    }
    let base_steps = (log[1].step - log[0].step).max(1);
    let base_dt = (log[1].t - log[0].t) / base_steps as f64;
    let stride_f = dt_log / (base_dt * base_steps as f64);
    let stride = stride_f.round() as u64;
    if stride == 0 || (stride_f - stride as f64).abs() > 1e-6 {
        return Err(Error::invalid(
            "dt_log",
            format!("{dt_log} is not a multiple of the log cadence {}", base_dt * base_steps as f64),
        ));
    }
    let step_stride = stride * base_steps;
    let first = log[0].step;
    let idx: Vec<usize> = log
        .iter()
        .enumerate()
        .filter(|(_, r)| (r.step - first) % step_stride == 0)
        .map(|(i, _)| i)
        .collect();
    if idx.len() < 3 {
        return Err(Error::ShortLog {
            need: 3,
            have: idx.len(),
        });
    }
    Ok(idx)
}

fn fd_residual(
    log: &[ObservableRecord],
    idx: &[usize],
    y: impl Fn(&ObservableRecord) -> f64,
    rhs: impl Fn(&ObservableRecord) -> f64,
) -> Result<f64> {
    let t_span = log[*idx.last().unwrap()].t - log[idx[0]].t;
    let mut worst = 0.0f64;
    let mut rhs_scale = 0.0f64;
    let mut y_scale = 0.0f64;
    for w in idx.windows(3) {
        let (lo, mid, hi) = (&log[w[0]], &log[w[1]], &log[w[2]]);
        let fd = (y(hi) - y(lo)) / (hi.t - lo.t);
        worst = worst.max((fd - rhs(mid)).abs());
        rhs_scale = rhs_scale.max(rhs(mid).abs());
        y_scale = y_scale.max(y(mid).abs());
    }
    let denom = rhs_scale.max(y_scale / t_span);
    if denom <= f64::MIN_POSITIVE {
        return Ok(if worst == 0.0 { 0.0 } else { worst });
    }
    Ok(worst / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::groundstate::ground_state_1d;
    use num_complex::Complex64;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn grid() -> Arc<Grid> {
        Grid::new(1, 20.0, 512).unwrap()
    }

    #[test]
    fn momentum_vanishes_for_real_fields_and_follows_the_chirp() {
        let g = grid();
        let mut ws = SpectralWorkspace::new(&g);
        let real = ComplexField::from_fn_1d(&g, |x| Complex64::new((-x * x).exp(), 0.0)).unwrap();
        assert!(momentum(&real, &mut ws).unwrap().abs() < 1e-12);
        // u = e^{-x^2 + i c x^2}: G = 2c int x^2 e^{-2x^2} = c/2 sqrt(pi/2)
        let c = 1.0;
        let chirped = ComplexField::from_fn_1d(&g, |x| {
            Complex64::from_polar((-x * x).exp(), c * x * x)
        })
        .unwrap();
        let expect = 0.5 * c * (PI / 2.0).sqrt();
        let got = momentum(&chirped, &mut ws).unwrap();
        assert!((got - expect).abs() < 1e-8, "{got} vs {expect}");
    }

    #[test]
    fn critical_ground_state_has_zero_energy() {
        let g = Grid::new(1, 24.0, 2048).unwrap();
        let mut ws = SpectralWorkspace::new(&g);
        let gs = ground_state_1d(2.0, &g).unwrap();
        let h = energy(&gs.field(1.0), 2.0, 1.0, &mut ws).unwrap();
        assert!(h.abs() < 1e-9, "H(R) = {h:.3e}");
        // H~(c R) = (sqrt(3) pi / 4)(c^2 - c^6) in the critical case
        let c: f64 = 0.5;
        let ht = h_tilde(&gs.field(c), 2.0, &mut ws).unwrap();
        let expect = 3.0f64.sqrt() * PI / 4.0 * (c.powi(2) - c.powi(6));
        assert!((ht - expect).abs() < 1e-8, "{ht} vs {expect}");
    }

    #[test]
    fn uncertainty_gap_examples() {
        let g = grid();
        let mut ws = SpectralWorkspace::new(&g);
        // the gaussian saturates the uncertainty inequality
        let gauss = ComplexField::from_fn_1d(&g, |x| Complex64::new((-x * x).exp(), 0.0)).unwrap();
        assert!(uncertainty_gap(&gauss, &mut ws).unwrap().abs() < 1e-10);
        let g2 = Grid::new(1, 24.0, 2048).unwrap();
        let mut ws2 = SpectralWorkspace::new(&g2);
        let gs = ground_state_1d(2.0, &g2).unwrap();
        let gap = uncertainty_gap(&gs.field(1.0), &mut ws2).unwrap();
        assert!(gap > 0.3 && gap < 0.302, "sech-type profile gap {gap}");
    }

    #[test]
    fn record_is_consistent_with_the_individual_functionals() {
        let g = grid();
        let mut ws = SpectralWorkspace::new(&g);
        let u = ComplexField::from_fn_1d(&g, |x| {
            Complex64::from_polar(1.3 * (-0.7 * x * x).exp(), 0.4 * x)
        })
        .unwrap();
        let (sigma, lambda) = (2.0, 1.0);
        let r = record(&u, sigma, lambda, 17, 0.017, &mut ws).unwrap();
        assert_eq!(r.step, 17);
        assert!((r.mass - mass(&u)).abs() < 1e-13);
        assert!((r.energy - energy(&u, sigma, lambda, &mut ws).unwrap()).abs() < 1e-12);
        assert!((r.variance - variance(&u)).abs() < 1e-13);
        assert!((r.momentum - momentum(&u, &mut ws).unwrap()).abs() < 1e-12);
        assert!((r.h_tilde - h_tilde(&u, sigma, &mut ws).unwrap()).abs() < 1e-12);
        assert!((gap_of(&r, 1) - uncertainty_gap(&u, &mut ws).unwrap()).abs() < 1e-12);
    }

    fn synthetic_log(h: f64, n: usize, f: impl Fn(f64) -> ObservableRecord) -> Vec<ObservableRecord> {
        (0..n)
            .map(|i| {
                let mut r = f(i as f64 * h);
                r.step = i as u64;
                r.t = i as f64 * h;
                r
            })
            .collect()
    }

    fn blank(t: f64) -> ObservableRecord {
        ObservableRecord {
            step: 0,
            t,
            mass: 0.0,
            energy: 0.0,
            variance: 0.0,
            momentum: 0.0,
            h_tilde: 0.0,
            grad_sq: 0.0,
            lp_pow: 0.0,
            boundary_mass: 0.0,
        }
    }

    #[test]
    fn variance_check_is_exact_on_the_conservative_parabola() {
        // a = 0: V = V0 + 4 G0 t + 8 H0 t^2, G = G0 + 4 H0 t. Central
        // differences are exact on quadratics.
        let (v0, g0, h0) = (2.0, -0.3, -0.8);
        let log = synthetic_log(0.01, 101, |t| {
            let mut r = blank(t);
            r.variance = v0 + 4.0 * g0 * t + 8.0 * h0 * t * t;
            r.momentum = g0 + 4.0 * h0 * t;
            r
        });
        let res = check_variance_ode(&log, 0.0, 0.01).unwrap();
        assert!(res < 1e-12, "residual {res:.3e}");
    }

    #[test]
    fn residual_decays_quadratically_in_the_sampling_interval() {
        // V = sin t with matching G = (cos t + 2 a sin t)/4; the only error
        // is the O(h^2) truncation of the central difference.
        let a = 0.5;
        let log = synthetic_log(1e-3, 4001, |t| {
            let mut r = blank(t);
            r.variance = t.sin();
            r.momentum = (t.cos() + 2.0 * a * t.sin()) / 4.0;
            r
        });
        let r8 = check_variance_ode(&log, a, 8e-3).unwrap();
        let r4 = check_variance_ode(&log, a, 4e-3).unwrap();
        let r2 = check_variance_ode(&log, a, 2e-3).unwrap();
        for (c, f) in [(r8, r4), (r4, r2)] {
            let ratio = c / f;
            assert!((3.5..=4.5).contains(&ratio), "halving ratio {ratio}");
        }
    }

    #[test]
    fn momentum_check_follows_its_identity() {
        // critical pair: the potential term drops out, G' = 4H - 2aG
        let (a, h0) = (0.25, 0.6);
        let log = synthetic_log(1e-3, 2001, |t| {
            let mut r = blank(t);
            r.energy = h0;
            // solution of G' = 4 h0 - 2 a G with G(0) = 0
            r.momentum = 2.0 * h0 / a * (1.0 - (-2.0 * a * t).exp());
            r
        });
        let res = check_momentum_ode(&log, a, 2.0, 1, 4e-3).unwrap();
        assert!(res < 1e-5, "residual {res:.3e}");
        let finer = check_momentum_ode(&log, a, 2.0, 1, 2e-3).unwrap();
        assert!(finer < res, "must improve with finer sampling");
    }

    #[test]
    fn degenerate_logs_are_handled() {
        let zeros = synthetic_log(0.1, 5, blank);
        assert_eq!(check_variance_ode(&zeros, 1.0, 0.1).unwrap(), 0.0);
        let two = synthetic_log(0.1, 2, blank);
        assert!(matches!(
            check_variance_ode(&two, 1.0, 0.1),
            Err(Error::ShortLog { .. })
        ));
        let log = synthetic_log(0.1, 32, blank);
        assert!(check_variance_ode(&log, 1.0, 0.15).is_err(), "non-multiple cadence");
    }

    #[test]
    fn trailing_off_cadence_record_is_ignored() {
        let mut log = synthetic_log(0.01, 100, |t| {
            let mut r = blank(t);
            r.variance = 1.0 + t;
            r.momentum = 0.25;
            r
        });
        // dt = 1e-4 logged every 100 steps
        for r in &mut log {
            r.step *= 100;
        }
        // a blow-up style final record between cadence points
        let mut tail = blank(0.9905);
        tail.step = 9905;
        tail.variance = 55.0;
        log.push(tail);
        let res = check_variance_ode(&log, 0.0, 0.01).unwrap();
        assert!(res < 1e-12, "tail must not enter the differences: {res:.3e}");
    }

    #[test]
    fn modified_series_reduces_to_raw_at_b_zero() {
        let log = synthetic_log(0.05, 40, |t| {
            let mut r = blank(t);
            r.variance = 1.0 + t * t;
            r.momentum = t;
            r.h_tilde = -t;
            r
        });
        let m0 = modified_series(&log, 0.0);
        for (i, r) in log.iter().enumerate() {
            assert_eq!(m0.variance[i], r.variance);
            assert_eq!(m0.momentum[i], r.momentum);
            assert_eq!(m0.h_tilde[i], r.h_tilde);
        }
        let m = modified_series(&log, 0.7);
        assert_eq!(m.variance[0], log[0].variance, "t = 0 is unweighted");
        let w = (0.7f64 * log[3].t).exp();
        assert!((m.h_tilde[3] - w * log[3].h_tilde).abs() < 1e-15);
    }

    #[test]
    fn modified_variance_obeys_the_product_rule() {
        // d/dt (e^{bt} V) = e^{bt} (b V + 4G - 2aV); verified by FD on a
        // synthetic exact solution.
        let (a, b) = (0.4, 0.9);
        let log = synthetic_log(1e-3, 2001, |t| {
            let mut r = blank(t);
            r.variance = (0.3 * t).cos() + 2.0;
            r.momentum = (-0.3 * (0.3 * t).sin() + 2.0 * a * r.variance) / 4.0;
            r
        });
        let m = modified_series(&log, b);
        let mut worst = 0.0f64;
        for i in (10..1990).step_by(7) {
            let fd = (m.variance[i + 1] - m.variance[i - 1]) / (m.t[i + 1] - m.t[i - 1]);
            let rhs = (b * m.t[i]).exp()
                * (b * log[i].variance + 4.0 * log[i].momentum - 2.0 * a * log[i].variance);
            worst = worst.max((fd - rhs).abs());
        }
        assert!(worst < 1e-5, "product rule residual {worst:.3e}");
    }
}
