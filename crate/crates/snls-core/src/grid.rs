use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};

/// Smallest sensible resolution per dimension.
pub const MIN_POINTS: usize = 8;

/// Fraction of the half-width counted as the boundary strip by the
/// boundary-mass monitor and excluded from "interior" sup norms.
pub const BOUNDARY_FRACTION: f64 = 0.1;

/// Uniform periodic grid on [-L, L)^d, d in {1, 2}, with the wavenumbers of
/// the matching discrete Fourier basis.
///
/// Wavenumbers follow standard FFT ordering: bin m carries the physical
/// wavenumber pi*m/L for m <= n/2 and pi*(m-n)/L above, so spectral
/// derivative multipliers can be applied directly to FFT output.
#[derive(Debug, Clone, Serialize)]
pub struct Grid {
    dim: usize,
    points: usize,
    half_width: f64,
    dx: f64,
    #[serde(skip)]
    coords: Vec<f64>,
    #[serde(skip)]
    wavenumbers: Vec<f64>,
}

impl Grid {
    pub fn new(dim: usize, half_width: f64, points: usize) -> Result<Arc<Grid>> {
        if dim != 1 && dim != 2 {
            return Err(Error::invalid("grid.dim", format!("{dim} (must be 1 or 2)")));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::invalid(
                "grid.half_width",
                format!("{half_width} (must be finite and positive)"),
            ));
        }
        if points < MIN_POINTS || !points.is_power_of_two() {
            return Err(Error::invalid(
                "grid.points",
                format!("{points} (must be a power of two, at least {MIN_POINTS})"),
            ));
        }
        let dx = 2.0 * half_width / points as f64;
        let coords = (0..points).map(|j| -half_width + j as f64 * dx).collect();
        let wavenumbers = (0..points)
            .map(|m| {
                let signed = if m <= points / 2 {
                    m as isize
                } else {
                    m as isize - points as isize
                };
                std::f64::consts::PI * signed as f64 / half_width
            })
            .collect();
        Ok(Arc::new(Grid {
            dim,
            points,
            half_width,
            dx,
            coords,
            wavenumbers,
        }))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Points per dimension.
    pub fn points(&self) -> usize {
        self.points
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Total number of cells, points^dim.
    pub fn cells(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    /// Quadrature weight of one cell, dx^dim.
    pub fn cell_volume(&self) -> f64 {
        self.dx.powi(self.dim as i32)
    }

    /// Coordinates along one axis (all axes share them).
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Physical wavenumbers in FFT bin order.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// Largest wavenumber magnitude representable along one axis.
    pub fn k_max(&self) -> f64 {
        std::f64::consts::PI * (self.points / 2) as f64 / self.half_width
    }

    /// |x|^2 of the cell with flat index `idx` (row-major, axis 0 outermost).
    pub fn radius_sq(&self, idx: usize) -> f64 {
        match self.dim {
            1 => {
                let x = self.coords[idx];
                x * x
            }
            _ => {
                let x = self.coords[idx / self.points];
                let y = self.coords[idx % self.points];
                x * x + y * y
            }
        }
    }

    /// True when the cell lies in the outermost strip (any coordinate with
    /// |x| >= (1 - BOUNDARY_FRACTION) * L).
    pub fn in_boundary_strip(&self, idx: usize) -> bool {
        let cut = (1.0 - BOUNDARY_FRACTION) * self.half_width;
        match self.dim {
            1 => self.coords[idx].abs() >= cut,
            _ => {
                self.coords[idx / self.points].abs() >= cut
                    || self.coords[idx % self.points].abs() >= cut
            }
        }
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        self.dim == other.dim
            && self.points == other.points
            && self.half_width == other.half_width
    }

    pub fn describe(&self) -> String {
        format!(
            "dim={} points={} half_width={}",
            self.dim, self.points, self.half_width
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wavenumbers_follow_fft_ordering() {
        let g = Grid::new(1, 10.0, 8).unwrap();
        let k = g.wavenumbers();
        let unit = std::f64::consts::PI / 10.0;
        assert_eq!(k[0], 0.0);
        assert!((k[1] - unit).abs() < 1e-15);
        assert!((k[4] - 4.0 * unit).abs() < 1e-15, "Nyquist bin carries +pi*n/(2L)");
        assert!((k[5] + 3.0 * unit).abs() < 1e-15);
        assert!((k[7] + unit).abs() < 1e-15);
    }

    #[test]
    fn coords_span_half_open_box() {
        let g = Grid::new(1, 4.0, 8).unwrap();
        assert_eq!(g.coords()[0], -4.0);
        assert_eq!(g.coords()[7], 3.0);
        assert_eq!(g.dx(), 1.0);
    }

    #[test]
    fn rejects_bad_resolutions() {
        assert!(Grid::new(1, 1.0, 7).is_err(), "non power of two");
        assert!(Grid::new(1, 1.0, 4).is_err(), "below MIN_POINTS");
        assert!(Grid::new(3, 1.0, 16).is_err(), "dim 3 unsupported");
        assert!(Grid::new(1, 0.0, 16).is_err(), "degenerate box");
    }

    #[test]
    fn radius_and_strip_in_two_dims() {
        let g = Grid::new(2, 2.0, 8).unwrap();
        let n = g.points();
        let idx = 3 * n + 5;
        let x = g.coords()[3];
        let y = g.coords()[5];
        assert!((g.radius_sq(idx) - (x * x + y * y)).abs() < 1e-15);
        assert!(g.in_boundary_strip(0), "corner cell is boundary");
        let mid = (n / 2) * n + n / 2;
        assert!(!g.in_boundary_strip(mid), "centre cell is interior");
    }
}
