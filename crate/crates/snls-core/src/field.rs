use std::fs;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::spectral::SpectralWorkspace;

const BINARY_MAGIC: &[u8; 8] = b"SNLSFLD1";

/// Complex scalar field sampled on a [Grid], row-major for d = 2.
///
/// Integrals are rectangle-rule sums weighted by the cell volume, which is
/// spectrally accurate for the smooth decaying profiles this crate works
/// with. Derivatives go through the FFT.
#[derive(Debug, Clone)]
pub struct ComplexField {
    grid: Arc<Grid>,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn zeros(grid: &Arc<Grid>) -> ComplexField {
        ComplexField {
            grid: grid.clone(),
            values: vec![Complex64::default(); grid.cells()],
        }
    }

    pub fn from_values(grid: &Arc<Grid>, values: Vec<Complex64>) -> Result<ComplexField> {
        if values.len() != grid.cells() {
            return Err(Error::invalid(
                "field.values",
                format!("{} values for a grid of {} cells", values.len(), grid.cells()),
            ));
        }
        Ok(ComplexField {
            grid: grid.clone(),
            values,
        })
    }

    pub fn from_fn_1d(grid: &Arc<Grid>, f: impl Fn(f64) -> Complex64) -> Result<ComplexField> {
        if grid.dim() != 1 {
            return Err(Error::invalid("field", "from_fn_1d on a 2D grid".to_string()));
        }
        let values = grid.coords().iter().map(|&x| f(x)).collect();
        Ok(ComplexField {
            grid: grid.clone(),
            values,
        })
    }

    pub fn from_fn_2d(
        grid: &Arc<Grid>,
        f: impl Fn(f64, f64) -> Complex64,
    ) -> Result<ComplexField> {
        if grid.dim() != 2 {
            return Err(Error::invalid("field", "from_fn_2d on a 1D grid".to_string()));
        }
        let n = grid.points();
        let mut values = Vec::with_capacity(grid.cells());
        for i0 in 0..n {
            let x = grid.coords()[i0];
            for i1 in 0..n {
                values.push(f(x, grid.coords()[i1]));
            }
        }
        Ok(ComplexField {
            grid: grid.clone(),
            values,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn ensure_finite(&self, context: &str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite {
                context: context.to_string(),
            })
        }
    }

    fn check_ws(&self, ws: &SpectralWorkspace) -> Result<()> {
        if ws.matches(&self.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch(
                self.grid.describe(),
                "workspace of another shape".to_string(),
            ))
        }
    }

    fn check_same_grid(&self, other: &ComplexField) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch(
                self.grid.describe(),
                other.grid.describe(),
            ))
        }
    }

    /// L2 norm squared, integral of |u|^2.
    pub fn norm_l2_sq(&self) -> f64 {
        let s: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        s * self.grid.cell_volume()
    }

    /// Integral of |u|^p.
    pub fn lp_pow(&self, p: f64) -> f64 {
        let half = 0.5 * p;
        let s: f64 = if half.fract() == 0.0 && (1.0..=16.0).contains(&half) {
            let e = half as i32;
            self.values.iter().map(|v| v.norm_sqr().powi(e)).sum()
        } else {
            self.values.iter().map(|v| v.norm_sqr().powf(half)).sum()
        };
        s * self.grid.cell_volume()
    }

    /// Integral of |x|^2 |u|^2.
    pub fn weighted_x2(&self) -> f64 {
        let s: f64 = self
            .values
            .iter()
            .enumerate()
            .map(|(j, v)| self.grid.radius_sq(j) * v.norm_sqr())
            .sum();
        s * self.grid.cell_volume()
    }

    /// Integral of |u|^2 over the outermost strip of the box.
    pub fn boundary_mass(&self) -> f64 {
        let s: f64 = self
            .values
            .iter()
            .enumerate()
            .filter(|(j, _)| self.grid.in_boundary_strip(*j))
            .map(|(_, v)| v.norm_sqr())
            .sum();
        s * self.grid.cell_volume()
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// ||u - v||_{L2}.
    pub fn distance_l2(&self, other: &ComplexField) -> Result<f64> {
        self.check_same_grid(other)?;
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        Ok((s * self.grid.cell_volume()).sqrt())
    }

    pub fn scaled(&self, c: Complex64) -> ComplexField {
        ComplexField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    /// Spectral Laplacian. The full -|k|^2 multiplier is applied, Nyquist
    /// included.
    pub fn laplacian(&self, ws: &mut SpectralWorkspace) -> Result<ComplexField> {
        self.check_ws(ws)?;
        let mut hat = self.values.clone();
        ws.forward(&mut hat);
        let ks = self.grid.wavenumbers();
        match self.grid.dim() {
            1 => {
                for (v, &k) in hat.iter_mut().zip(ks) {
                    *v *= -(k * k);
                }
            }
            _ => {
                let n = self.grid.points();
                for i0 in 0..n {
                    let kx2 = ks[i0] * ks[i0];
                    for i1 in 0..n {
                        hat[i0 * n + i1] *= -(kx2 + ks[i1] * ks[i1]);
                    }
                }
            }
        }
        ws.inverse(&mut hat);
        Ok(ComplexField {
            grid: self.grid.clone(),
            values: hat,
        })
    }

    /// Spectral gradient, one component per dimension. The odd-derivative
    /// multiplier is zeroed on the Nyquist line so real fields keep real
    /// derivatives.
    pub fn gradient(&self, ws: &mut SpectralWorkspace) -> Result<Vec<ComplexField>> {
        self.check_ws(ws)?;
        let n = self.grid.points();
        let ks = self.grid.wavenumbers();
        let nyq = n / 2;
        let mut base = self.values.clone();
        ws.forward(&mut base);
        let mut out = Vec::with_capacity(self.grid.dim());
        for axis in 0..self.grid.dim() {
            let mut hat = base.clone();
            match (self.grid.dim(), axis) {
                (1, _) => {
                    for (m, v) in hat.iter_mut().enumerate() {
                        *v *= if m == nyq {
                            Complex64::default()
                        } else {
                            Complex64::new(0.0, ks[m])
                        };
                    }
                }
                (_, 0) => {
                    for i0 in 0..n {
                        let mult = if i0 == nyq {
                            Complex64::default()
                        } else {
                            Complex64::new(0.0, ks[i0])
                        };
                        for i1 in 0..n {
                            hat[i0 * n + i1] *= mult;
                        }
                    }
                }
                _ => {
                    for i0 in 0..n {
                        for i1 in 0..n {
                            let mult = if i1 == nyq {
                                Complex64::default()
                            } else {
                                Complex64::new(0.0, ks[i1])
                            };
                            hat[i0 * n + i1] *= mult;
                        }
                    }
                }
            }
            ws.inverse(&mut hat);
            out.push(ComplexField {
                grid: self.grid.clone(),
                values: hat,
            });
        }
        Ok(out)
    }

    /// ||grad u||_{L2}^2 via Parseval, consistent with [Self::gradient].
    pub fn grad_norm_sq(&self, ws: &mut SpectralWorkspace) -> Result<f64> {
        self.check_ws(ws)?;
        let mut hat = self.values.clone();
        ws.forward(&mut hat);
        let n = self.grid.points();
        let ks = self.grid.wavenumbers();
        let nyq = n / 2;
        let mut s = 0.0;
        match self.grid.dim() {
            1 => {
                for (m, v) in hat.iter().enumerate() {
                    if m != nyq {
                        s += ks[m] * ks[m] * v.norm_sqr();
                    }
                }
            }
            _ => {
                for i0 in 0..n {
                    let kx2 = if i0 == nyq { 0.0 } else { ks[i0] * ks[i0] };
                    for i1 in 0..n {
                        let ky2 = if i1 == nyq { 0.0 } else { ks[i1] * ks[i1] };
                        s += (kx2 + ky2) * hat[i0 * n + i1].norm_sqr();
                    }
                }
            }
        }
        Ok(s * self.grid.cell_volume() / self.grid.cells() as f64)
    }

    /// ||u||_{H1}^2 = ||u||^2 + ||grad u||^2.
    pub fn h1_norm_sq(&self, ws: &mut SpectralWorkspace) -> Result<f64> {
        Ok(self.norm_l2_sq() + self.grad_norm_sq(ws)?)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(24 + 16 * self.values.len());
        out.extend_from_slice(BINARY_MAGIC);
        out.extend_from_slice(&(self.grid.dim() as u32).to_le_bytes());
        out.extend_from_slice(&(self.grid.points() as u32).to_le_bytes());
        out.extend_from_slice(&self.grid.half_width().to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.re.to_le_bytes());
            out.extend_from_slice(&v.im.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<ComplexField> {
        let bad = |why: &str| Error::invalid("field.bytes", why.to_string());
        if bytes.len() < 24 || &bytes[..8] != BINARY_MAGIC {
            return Err(bad("missing field header"));
        }
        let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let points = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        let half_width = f64::from_le_bytes(bytes[16..24].try_into().unwrap());
        let grid = Grid::new(dim, half_width, points)?;
        let body = &bytes[24..];
        if body.len() != 16 * grid.cells() {
            return Err(bad("payload length does not match the grid"));
        }
        let values = body
            .chunks_exact(16)
            .map(|c| {
                Complex64::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect();
        Ok(ComplexField { grid, values })
    }

    pub fn write_binary(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<ComplexField> {
        Ok(ComplexField::from_bytes(&fs::read(path)?)?)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str(&format!("# {}\n", self.grid.describe()));
        let n = self.grid.points();
        match self.grid.dim() {
            1 => {
                out.push_str("x,re,im\n");
                for (j, v) in self.values.iter().enumerate() {
                    out.push_str(&format!("{},{},{}\n", self.grid.coords()[j], v.re, v.im));
                }
            }
            _ => {
                out.push_str("x0,x1,re,im\n");
                for (j, v) in self.values.iter().enumerate() {
                    out.push_str(&format!(
                        "{},{},{},{}\n",
                        self.grid.coords()[j / n],
                        self.grid.coords()[j % n],
                        v.re,
                        v.im
                    ));
                }
            }
        }
        fs::write(path, out)?;
        Ok(())
    }
}
