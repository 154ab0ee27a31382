use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::integrator::Trajectory;
use crate::observables;
use crate::spectral::SpectralWorkspace;

/// Default upper end of the root search in `minimal_certified_time`.
pub const DEFAULT_T_MAX: f64 = 1e3;

/// Initial-data functionals feeding the finite-time blow-up certificates.
///
/// `v0`, `g0`, `h0`, `m0` are (expectations of) variance, momentum, energy
/// and charge of the initial data; `fq_sup` bounds the pointwise noise
/// intensity sup_x F_Q(x). Both certificates require the supercritical
/// regime sigma * dim > 2. A strictly negative certificate value certifies
/// blow-up with positive probability; an exact zero is a boundary case.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BlowupCondition {
    pub v0: f64,
    pub g0: f64,
    pub h0: f64,
    pub m0: f64,
    pub fq_sup: f64,
    pub damping: f64,
    pub sigma: f64,
    pub dim: usize,
}

/// Three-way reading of a certificate value under strict-negativity
/// certification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Certified,
    Boundary,
    NotCertified,
}

pub fn verdict(value: f64) -> Verdict {
    if value < 0.0 {
        Verdict::Certified
    } else if value == 0.0 {
        Verdict::Boundary
    } else {
        Verdict::NotCertified
    }
}

impl BlowupCondition {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        v0: f64,
        g0: f64,
        h0: f64,
        m0: f64,
        fq_sup: f64,
        damping: f64,
        sigma: f64,
        dim: usize,
    ) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::invalid("dim", format!("{dim} (must be 1 or 2)")));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::invalid("sigma", format!("{sigma} (must be positive)")));
        }
        if sigma * dim as f64 <= 2.0 {
            return Err(Error::invalid(
                "sigma",
                format!("sigma * dim = {} (certificates need > 2)", sigma * dim as f64),
            ));
        }
        if !(damping.is_finite() && damping >= 0.0) {
            return Err(Error::invalid("damping", format!("{damping} (must be >= 0)")));
        }
        for (name, value, lower) in [
            ("v0", v0, 0.0),
            ("m0", m0, 0.0),
            ("fq_sup", fq_sup, 0.0),
            ("g0", g0, f64::NEG_INFINITY),
            ("h0", h0, f64::NEG_INFINITY),
        ] {
            if !value.is_finite() || value < lower {
                return Err(Error::invalid(name, format!("{value}")));
            }
        }
        Ok(BlowupCondition { v0, g0, h0, m0, fq_sup, damping, sigma, dim })
    }

    /// Evaluates the functionals of one deterministic initial state.
    pub fn from_state(
        u: &ComplexField,
        sigma: f64,
        lambda: f64,
        damping: f64,
        fq_sup: f64,
        ws: &mut SpectralWorkspace,
    ) -> Result<Self> {
        let h0 = observables::energy(u, sigma, lambda, ws)?;
        let g0 = observables::momentum(u, ws)?;
        BlowupCondition::new(
            observables::variance(u),
            g0,
            h0,
            observables::mass(u),
            fq_sup,
            damping,
            sigma,
            u.grid().dim(),
        )
    }

    /// The same condition with every expectation shifted, e.g. by +2 standard
    /// errors for a worst-case ensemble verdict.
    pub fn shifted(&self, dv: f64, dg: f64, dh: f64, dm: f64) -> Result<Self> {
        BlowupCondition::new(
            self.v0 + dv,
            self.g0 + dg,
            self.h0 + dh,
            self.m0 + dm,
            self.fq_sup,
            self.damping,
            self.sigma,
            self.dim,
        )
    }

    /// Smallest admissible auxiliary rate, 4 a sigma / (sigma d - 2).
    pub fn z_floor(&self) -> f64 {
        4.0 * self.damping * self.sigma / (self.sigma * self.dim as f64 - 2.0)
    }

    /// Largest admissible modified-quantity rate b; equals 2a - z_floor.
    pub fn b_max(&self) -> f64 {
        2.0 * self.damping - self.z_floor()
    }

    fn require_z(&self, z: f64) -> Result<()> {
        let floor = self.z_floor();
        if !(z.is_finite() && z >= floor) {
            return Err(Error::invalid("z", format!("{z} (must be >= {floor})")));
        }
        Ok(())
    }

    /// Certificate cubic in the window length y:
    /// v0 + 4 y g0 + 16 y^2 h0 + 8 y^3 m0 fq.
    ///
    /// Admissible when b <= b_max and 0 < y <= 1 / (2a - b); the y range is
    /// unbounded when 2a - b = 0, which happens only for a = 0, b = 0.
    pub fn cubic_condition(&self, b: f64, y: f64) -> Result<f64> {
        if !(b.is_finite() && b <= self.b_max()) {
            return Err(Error::invalid("b", format!("{b} (must be <= {})", self.b_max())));
        }
        let window = 2.0 * self.damping - b;
        if !(y.is_finite() && y > 0.0 && y <= 1.0 / window) {
            return Err(Error::invalid(
                "y",
                format!("{y} (must lie in (0, {}])", 1.0 / window),
            ));
        }
        Ok(self.v0
            + 4.0 * y * self.g0
            + 16.0 * y * y * self.h0
            + 8.0 * y.powi(3) * self.m0 * self.fq_sup)
    }

    /// Certificate quartic in the horizon t: a nonpositive value certifies
    /// blow-up by time t with positive probability.
    ///
    /// value = v0 + 4 t g0 + (8 t^2 + (8/3) z t^3) h0
    ///       + ((4/3) t^3 + (4/3) z t^4) m0 fq,   z >= z_floor.
    pub fn quartic_condition(&self, z: f64, tbar: f64) -> Result<f64> {
        self.require_z(z)?;
        if !(tbar.is_finite() && tbar >= 0.0) {
            return Err(Error::invalid("tbar", format!("{tbar} (must be >= 0)")));
        }
        let t = tbar;
        Ok(self.v0
            + 4.0 * t * self.g0
            + (8.0 * t * t + (8.0 / 3.0) * z * t.powi(3)) * self.h0
            + ((4.0 / 3.0) * t.powi(3) + (4.0 / 3.0) * z * t.powi(4)) * self.m0 * self.fq_sup)
    }

    /// Ascending coefficients of the certificate quartic.
    fn quartic_coeffs(&self, z: f64) -> [f64; 5] {
        let mfq = self.m0 * self.fq_sup;
        [
            self.v0,
            4.0 * self.g0,
            8.0 * self.h0,
            (8.0 / 3.0) * z * self.h0 + (4.0 / 3.0) * mfq,
            (4.0 / 3.0) * z * mfq,
        ]
    }

    /// First t in [0, t_max] where the certificate quartic is nonpositive,
    /// located to adjacent-float precision; None when it stays positive.
    pub fn minimal_certified_time(&self, z: f64, t_max: f64) -> Result<Option<f64>> {
        self.require_z(z)?;
        if !(t_max.is_finite() && t_max > 0.0) {
            return Err(Error::invalid("t_max", format!("{t_max} (must be positive)")));
        }
        let c = self.quartic_coeffs(z);
        if poly_eval(&c, 0.0) <= 0.0 {
            return Ok(Some(0.0));
        }
        // Roots of the derivative split [0, t_max] into monotone pieces, so
        // the first piece whose right end is nonpositive holds the first
        // crossing.
        let mut points = real_roots_in(&poly_derivative(&c), 0.0, t_max);
        points.push(t_max);
        let mut lo = 0.0;
        for q in points {
            if q <= lo {
                continue;
            }
            if poly_eval(&c, q) <= 0.0 {
                return Ok(Some(first_nonpositive(&c, lo, q)));
            }
            lo = q;
        }
        Ok(None)
    }
}

/// Undamped-limit certificate: v0 + 4 t g0 + 8 t^2 h0 + (4/3) t^3 fq m0.
/// The quartic condition collapses to this as z -> 0.
pub fn conservative_condition(v0: f64, g0: f64, h0: f64, m0: f64, fq_sup: f64, t: f64) -> f64 {
    v0 + 4.0 * g0 * t + 8.0 * h0 * t * t + (4.0 / 3.0) * fq_sup * m0 * t.powi(3)
}

/// Detector verdict for one finished trajectory, with the resolution it was
/// obtained at.
#[derive(Debug, Clone, Serialize)]
pub struct BlowupReport {
    pub blew_up: bool,
    pub tau: Option<f64>,
    pub threshold: f64,
    pub points: usize,
    pub half_width: f64,
    pub dt: f64,
}

pub fn classify_trajectory(traj: &Trajectory, dt: f64) -> BlowupReport {
    let grid = traj.field.grid();
    BlowupReport {
        blew_up: traj.blew_up(),
        tau: traj.tau(),
        threshold: traj.threshold,
        points: grid.points(),
        half_width: grid.half_width(),
        dt,
    }
}

fn poly_eval(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
}

fn poly_derivative(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &c)| k as f64 * c)
        .collect()
}

/// All sign-change roots of the polynomial in [lo, hi], ascending, found by
/// recursing on the derivative to isolate monotone intervals. Roots where
/// the polynomial touches zero without changing sign are reported only when
/// the touch value is exactly zero.
fn real_roots_in(coeffs: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let mut c = coeffs.to_vec();
    while c.last() == Some(&0.0) {
        c.pop();
    }
    let mut roots = Vec::new();
    match c.len() {
        0 | 1 => {}
        2 => {
            let r = -c[0] / c[1];
            if r >= lo && r <= hi {
                roots.push(r);
            }
        }
        _ => {
            let mut points = vec![lo];
            points.extend(
                real_roots_in(&poly_derivative(&c), lo, hi)
                    .into_iter()
                    .filter(|&r| r > lo && r < hi),
            );
            points.push(hi);
            for pair in points.windows(2) {
                let (p, q) = (pair[0], pair[1]);
                let (fp, fq) = (poly_eval(&c, p), poly_eval(&c, q));
                if fp == 0.0 && roots.last() != Some(&p) {
                    roots.push(p);
                } else if fp * fq < 0.0 {
                    roots.push(bisect_sign_change(&c, p, q));
                }
            }
            if poly_eval(&c, hi) == 0.0 && roots.last() != Some(&hi) {
                roots.push(hi);
            }
        }
    }
    roots
}

fn bisect_sign_change(coeffs: &[f64], mut lo: f64, mut hi: f64) -> f64 {
    let positive_at_lo = poly_eval(coeffs, lo) > 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo.min(hi) || mid >= lo.max(hi) {
            break;
        }
        if (poly_eval(coeffs, mid) > 0.0) == positive_at_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Bisects a monotone interval with f(lo) > 0 >= f(hi) down to the first
/// float where the polynomial is nonpositive.
fn first_nonpositive(coeffs: &[f64], mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if poly_eval(coeffs, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}
