//! Vector and matrix fields sampled on the torus grid, with lazily cached
//! Fourier coefficients. Fields are immutable once built; every operation
//! returns a new field, so sharing across threads is free.

use std::sync::OnceLock;

use rustfft::num_complex::Complex;

use crate::fft;
use crate::grid::Grid;
use crate::{Error, Result};

pub type Spectrum = [Vec<Complex<f64>>; 3];

/// Real 3-vector field on an N³ grid, x-fastest storage, one `Vec` per
/// component, with the paired Fourier coefficients computed on demand.
pub struct VectorField {
    grid: Grid,
    comps: [Vec<f64>; 3],
    spectral: OnceLock<Spectrum>,
}

impl Clone for VectorField {
    fn clone(&self) -> Self {
        // The spectral cache is cheap to drop; it is rebuilt on demand.
        Self {
            grid: self.grid,
            comps: self.comps.clone(),
            spectral: OnceLock::new(),
        }
    }
}

impl std::fmt::Debug for VectorField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VectorField")
            .field("n", &self.grid.n())
            .field("max_norm", &self.max_norm())
            .finish()
    }
}

impl VectorField {
    pub fn zeros(grid: Grid) -> Self {
        let len = grid.len();
        Self {
            grid,
            comps: [vec![0.0; len], vec![0.0; len], vec![0.0; len]],
            spectral: OnceLock::new(),
        }
    }

    pub fn from_components(grid: Grid, comps: [Vec<f64>; 3]) -> Result<Self> {
        for c in &comps {
            if c.len() != grid.len() {
                return Err(Error::ResolutionMismatch(c.len(), grid.len()));
            }
        }
        Ok(Self {
            grid,
            comps,
            spectral: OnceLock::new(),
        })
    }

    /// Sample a closure at every grid node.
    pub fn from_fn(grid: Grid, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let mut out = Self::zeros(grid);
        for (i, p) in grid.points() {
            let v = f(p);
            out.comps[0][i] = v[0];
            out.comps[1][i] = v[1];
            out.comps[2][i] = v[2];
        }
        out
    }

    /// Build from Fourier coefficients (rustfft bin order, unnormalized
    /// forward convention). The cache is seeded with the given spectrum.
    pub fn from_spectral(grid: Grid, spectral: Spectrum) -> Result<Self> {
        for c in &spectral {
            if c.len() != grid.len() {
                return Err(Error::ResolutionMismatch(c.len(), grid.len()));
            }
        }
        let comps = [
            fft::inverse(&spectral[0], grid.n()),
            fft::inverse(&spectral[1], grid.n()),
            fft::inverse(&spectral[2], grid.n()),
        ];
        let field = Self {
            grid,
            comps,
            spectral: OnceLock::new(),
        };
        let _ = field.spectral.set(spectral);
        Ok(field)
    }

    #[inline]
    pub fn grid(&self) -> Grid {
        self.grid
    }

    #[inline]
    pub fn comp(&self, c: usize) -> &[f64] {
        &self.comps[c]
    }

    #[inline]
    pub fn at(&self, i: usize) -> [f64; 3] {
        [self.comps[0][i], self.comps[1][i], self.comps[2][i]]
    }

    /// Fourier coefficients of each component (cached after first use).
    pub fn spectral(&self) -> &Spectrum {
        self.spectral.get_or_init(|| {
            let n = self.grid.n();
            [
                fft::forward(&self.comps[0], n),
                fft::forward(&self.comps[1], n),
                fft::forward(&self.comps[2], n),
            ]
        })
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().all(|c| c.iter().all(|v| v.is_finite()))
    }

    pub fn ensure_finite(&self, context: &'static str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite { context })
        }
    }

    pub fn ensure_same_grid(&self, other: &Self) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::ResolutionMismatch(self.grid.n(), other.grid.n()))
        }
    }

    /// Pointwise Euclidean magnitude supremum over the grid.
    pub fn max_norm(&self) -> f64 {
        let mut m = 0.0f64;
        for i in 0..self.grid.len() {
            let v = self.at(i);
            m = m.max((v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt());
        }
        m
    }

    /// Discrete L² norm, `sqrt(h³ Σ |u|²)`.
    pub fn l2_norm(&self) -> f64 {
        let h3 = self.grid.spacing().powi(3);
        let mut s = 0.0;
        for c in &self.comps {
            for &v in c {
                s += v * v;
            }
        }
        (h3 * s).sqrt()
    }

    /// Kinetic energy `½ ∫ |u|²`.
    pub fn energy(&self) -> f64 {
        let l2 = self.l2_norm();
        0.5 * l2 * l2
    }

    /// Spatial mean of each component.
    pub fn mean(&self) -> [f64; 3] {
        let len = self.grid.len() as f64;
        let mut m = [0.0; 3];
        for c in 0..3 {
            m[c] = self.comps[c].iter().sum::<f64>() / len;
        }
        m
    }

    /// L² inner product `∫ u·v` by trapezoid-exact spectral quadrature.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.ensure_same_grid(other)?;
        let h3 = self.grid.spacing().powi(3);
        let mut s = 0.0;
        for c in 0..3 {
            for (a, b) in self.comps[c].iter().zip(&other.comps[c]) {
                s += a * b;
            }
        }
        Ok(h3 * s)
    }

    /// Max-norm of the spectral divergence, relative to the field amplitude.
    pub fn divergence_max_rel(&self) -> f64 {
        let amp = self.max_norm();
        if amp == 0.0 {
            return 0.0;
        }
        let div = crate::ops::divergence(self);
        let mut m = 0.0f64;
        for &v in &div {
            m = m.max(v.abs());
        }
        m / amp
    }

    pub fn ensure_divergence_free(&self, tolerance: f64) -> Result<()> {
        let measured = self.divergence_max_rel();
        if measured <= tolerance {
            Ok(())
        } else {
            Err(Error::NotDivergenceFree {
                measured,
                tolerance,
            })
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Self {
        let comps = [
            self.comps[0].iter().map(|v| v * s).collect(),
            self.comps[1].iter().map(|v| v * s).collect(),
            self.comps[2].iter().map(|v| v * s).collect(),
        ];
        Self {
            grid: self.grid,
            comps,
            spectral: OnceLock::new(),
        }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.ensure_same_grid(other)?;
        let comps = [0, 1, 2].map(|c| {
            self.comps[c]
                .iter()
                .zip(&other.comps[c])
                .map(|(&a, &b)| f(a, b))
                .collect()
        });
        Ok(Self {
            grid: self.grid,
            comps,
            spectral: OnceLock::new(),
        })
    }

    /// Max-norm of the difference.
    pub fn max_distance(&self, other: &Self) -> Result<f64> {
        self.ensure_same_grid(other)?;
        let mut m = 0.0f64;
        for i in 0..self.grid.len() {
            let a = self.at(i);
            let b = other.at(i);
            let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
            m = m.max((d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt());
        }
        Ok(m)
    }

    /// Translate by `a`: returns `x ↦ u(x + a)`, evaluated exactly through
    /// the spectrum (phase shift `e^{i k·a}`).
    pub fn shift(&self, a: [f64; 3]) -> Self {
        let n = self.grid.n();
        let spec = self.spectral();
        let mut out: Spectrum = [spec[0].clone(), spec[1].clone(), spec[2].clone()];
        for iz in 0..n {
            let kz = self.grid.wavenumber(iz) as f64;
            for iy in 0..n {
                let ky = self.grid.wavenumber(iy) as f64;
                for ix in 0..n {
                    let kx = self.grid.wavenumber(ix) as f64;
                    let phase = kx * a[0] + ky * a[1] + kz * a[2];
                    let rot = Complex::new(phase.cos(), phase.sin());
                    let i = self.grid.idx(ix, iy, iz);
                    for c in 0..3 {
                        out[c][i] *= rot;
                    }
                }
            }
        }
        Self::from_spectral(self.grid, out).expect("shift preserves the grid")
    }
}

/// 3×3 matrix alias plus the little linear algebra the flows need.
pub mod mat3 {
    pub type Mat3 = [[f64; 3]; 3];

    pub const IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

    #[inline]
    pub fn det(m: &Mat3) -> f64 {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    #[inline]
    pub fn inverse(m: &Mat3) -> Option<Mat3> {
        let d = det(m);
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        let inv_d = 1.0 / d;
        let mut out = [[0.0; 3]; 3];
        out[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) * inv_d;
        out[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * inv_d;
        out[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * inv_d;
        out[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) * inv_d;
        out[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * inv_d;
        out[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * inv_d;
        out[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) * inv_d;
        out[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * inv_d;
        out[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * inv_d;
        Some(out)
    }

    #[inline]
    pub fn mul(a: &Mat3, b: &Mat3) -> Mat3 {
        let mut out = [[0.0; 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                out[r][c] = a[r][0] * b[0][c] + a[r][1] * b[1][c] + a[r][2] * b[2][c];
            }
        }
        out
    }

    #[inline]
    pub fn mul_vec(m: &Mat3, v: &[f64; 3]) -> [f64; 3] {
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }

    #[inline]
    pub fn transpose_mul_vec(m: &Mat3, v: &[f64; 3]) -> [f64; 3] {
        [
            m[0][0] * v[0] + m[1][0] * v[1] + m[2][0] * v[2],
            m[0][1] * v[0] + m[1][1] * v[1] + m[2][1] * v[2],
            m[0][2] * v[0] + m[1][2] * v[1] + m[2][2] * v[2],
        ]
    }

    #[inline]
    pub fn add(a: &Mat3, b: &Mat3) -> Mat3 {
        let mut out = [[0.0; 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                out[r][c] = a[r][c] + b[r][c];
            }
        }
        out
    }

    #[inline]
    pub fn scale(m: &Mat3, s: f64) -> Mat3 {
        let mut out = *m;
        for row in &mut out {
            for v in row {
                *v *= s;
            }
        }
        out
    }

    /// Frobenius norm of `m - identity`.
    #[inline]
    pub fn deviation_from_identity(m: &Mat3) -> f64 {
        let mut s = 0.0;
        for r in 0..3 {
            for c in 0..3 {
                let d = m[r][c] - if r == c { 1.0 } else { 0.0 };
                s += d * d;
            }
        }
        s.sqrt()
    }
}

/// 3×3 matrix field (entry `(r,c)` = component `3r + c`), used for velocity
/// gradients and flow-map Jacobians. Convention: `(∇u)_{rc} = ∂u_r/∂x_c`.
#[derive(Clone)]
pub struct MatrixField {
    grid: Grid,
    comps: Vec<Vec<f64>>,
}

impl MatrixField {
    pub fn identity(grid: Grid) -> Self {
        let len = grid.len();
        let comps = (0..9)
            .map(|e| {
                let (r, c) = (e / 3, e % 3);
                vec![if r == c { 1.0 } else { 0.0 }; len]
            })
            .collect();
        Self { grid, comps }
    }

    pub fn zeros(grid: Grid) -> Self {
        let len = grid.len();
        Self {
            grid,
            comps: (0..9).map(|_| vec![0.0; len]).collect(),
        }
    }

    pub fn from_entries(grid: Grid, comps: Vec<Vec<f64>>) -> Result<Self> {
        if comps.len() != 9 {
            return Err(Error::ResolutionMismatch(comps.len(), 9));
        }
        for c in &comps {
            if c.len() != grid.len() {
                return Err(Error::ResolutionMismatch(c.len(), grid.len()));
            }
        }
        Ok(Self { grid, comps })
    }

    #[inline]
    pub fn grid(&self) -> Grid {
        self.grid
    }

    #[inline]
    pub fn entry(&self, r: usize, c: usize) -> &[f64] {
        &self.comps[3 * r + c]
    }

    #[inline]
    pub fn components(&self) -> &[Vec<f64>] {
        &self.comps
    }

    #[inline]
    pub fn at(&self, i: usize) -> mat3::Mat3 {
        let mut m = [[0.0; 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                m[r][c] = self.comps[3 * r + c][i];
            }
        }
        m
    }

    pub fn set_at(&mut self, i: usize, m: &mat3::Mat3) {
        for r in 0..3 {
            for c in 0..3 {
                self.comps[3 * r + c][i] = m[r][c];
            }
        }
    }

    /// Range of `det` over all nodes.
    pub fn det_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.grid.len() {
            let d = mat3::det(&self.at(i));
            lo = lo.min(d);
            hi = hi.max(d);
        }
        (lo, hi)
    }

    /// Supremum of the Frobenius deviation from the identity.
    pub fn max_deviation_from_identity(&self) -> f64 {
        let mut m = 0.0f64;
        for i in 0..self.grid.len() {
            m = m.max(mat3::deviation_from_identity(&self.at(i)));
        }
        m
    }

    /// Apply `u ↦ M u` node-wise to a vector field.
    pub fn apply(&self, u: &VectorField) -> Result<VectorField> {
        if self.grid != u.grid() {
            return Err(Error::ResolutionMismatch(self.grid.n(), u.grid().n()));
        }
        let mut out = VectorField::zeros(self.grid);
        for i in 0..self.grid.len() {
            let v = mat3::mul_vec(&self.at(i), &u.at(i));
            out.comps[0][i] = v[0];
            out.comps[1][i] = v[1];
            out.comps[2][i] = v[2];
        }
        Ok(out)
    }
}

impl std::fmt::Debug for MatrixField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MatrixField")
            .field("n", &self.grid.n())
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(16).unwrap()
    }

    #[test]
    fn spectral_roundtrip_max_norm() {
        let f = VectorField::from_fn(grid(), |[x, y, z]| {
            [
                (x).sin() + (2.0 * y).cos(),
                (y + z).sin(),
                (3.0 * x).cos() * (y).sin(),
            ]
        });
        let spec = f.spectral().clone();
        let back = VectorField::from_spectral(grid(), spec).unwrap();
        let err = f.max_distance(&back).unwrap();
        assert!(err <= 1e-12 * f.max_norm().max(1.0), "roundtrip {err}");
    }

    #[test]
    fn shift_matches_pointwise_sampling() {
        let f = VectorField::from_fn(grid(), |[x, y, z]| [(x + 2.0 * y).sin(), z.cos(), x.sin()]);
        let a = [0.3, -0.7, 1.1];
        let shifted = f.shift(a);
        let expect =
            VectorField::from_fn(grid(), |[x, y, z]| {
                let p = [x + a[0], y + a[1], z + a[2]];
                [(p[0] + 2.0 * p[1]).sin(), p[2].cos(), p[0].sin()]
            });
        assert!(shifted.max_distance(&expect).unwrap() < 1e-12);
    }

    #[test]
    fn mat3_inverse_roundtrip() {
        let m = [[1.0, 0.2, -0.1], [0.05, 0.9, 0.3], [-0.2, 0.1, 1.1]];
        let inv = mat3::inverse(&m).unwrap();
        let prod = mat3::mul(&m, &inv);
        assert!(mat3::deviation_from_identity(&prod) < 1e-12);
    }

    #[test]
    fn nonfinite_rejected() {
        let mut f = VectorField::zeros(grid());
        f.comps[1][3] = f64::NAN;
        assert!(f.ensure_finite("test").is_err());
    }
}
